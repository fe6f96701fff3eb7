//! Parameter sweeps, built-in figure presets and CSV output.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dynamics::ModelParams;
use crate::engine::{
    derive_seed, ensemble, ensemble_timeseries, ensemble_with_timeseries, EnsembleSpec,
    EnsembleStats, GraphMode, InitialCondition, NetworkSpec, Summary,
};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 19] = [
    "family",
    "f0",
    "h00",
    "h01",
    "h11",
    "p",
    "alpha",
    "beta",
    "p_verify",
    "p_forget",
    "steps",
    "iterations",
    "seed",
    "mean_believers_global",
    "std_believers_global",
    "mean_believers_minority",
    "std_believers_minority",
    "mean_believers_majority",
    "std_believers_majority",
];

pub const TIMESERIES_HEADER: [&str; 2] = ["t", "mean_believers"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    ErdosRenyi,
    TwoBlock,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::ErdosRenyi => "er",
            Family::TwoBlock => "sbm",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "er" => Ok(Family::ErdosRenyi),
            "sbm" => Ok(Family::TwoBlock),
            other => Err(format!(
                "unknown network family `{other}` (expected er or sbm)"
            )),
        }
    }
}

/// A grid of network and gullibility values plus everything held fixed.
///
/// ER grids sweep `p x alpha`; two-block grids sweep
/// `f0 x h00 x h01 x h11 x alpha`. Points are ordered lexicographically in
/// that axis order (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub family: Family,
    pub n: usize,
    pub p: Vec<f64>,
    pub f0: Vec<f64>,
    pub h00: Vec<f64>,
    pub h01: Vec<f64>,
    pub h11: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub p_verify: f64,
    pub p_forget: f64,
    pub initial: InitialCondition,
    pub steps: usize,
    pub iterations: usize,
    pub window: usize,
    pub graph_mode: GraphMode,
    pub master_seed: u64,
}

/// One point of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub network: NetworkSpec,
    pub alpha: f64,
}

impl SweepSpec {
    fn axes(&self) -> Vec<(&'static str, &[f64])> {
        match self.family {
            Family::ErdosRenyi => vec![("p", &self.p), ("alpha", &self.alpha)],
            Family::TwoBlock => vec![
                ("f0", &self.f0),
                ("h00", &self.h00),
                ("h01", &self.h01),
                ("h11", &self.h11),
                ("alpha", &self.alpha),
            ],
        }
    }

    pub fn grid_size(&self) -> usize {
        self.axes().iter().map(|(_, v)| v.len()).product()
    }

    /// Every invariant violation, not just the first.
    pub fn violations(&self) -> Vec<Error> {
        let mut errors = Vec::new();
        if self.n == 0 {
            errors.push(Error::EmptyGraph);
        }
        for (name, values) in self.axes() {
            if values.is_empty() {
                errors.push(Error::EmptyAxis(name));
            }
            for &v in values {
                if name == "alpha" {
                    continue;
                }
                if !(0.0..=1.0).contains(&v) {
                    errors.push(Error::InvalidParameter {
                        name,
                        value: v,
                        reason: "must lie in [0, 1]",
                    });
                }
            }
        }
        let alphas: &[f64] = if self.alpha.is_empty() {
            &[0.0]
        } else {
            &self.alpha
        };
        for &a in alphas {
            for e in ModelParams::violations(self.beta, a, self.p_verify, self.p_forget) {
                let duplicate = errors.iter().any(|prev| prev.to_string() == e.to_string());
                if !duplicate {
                    errors.push(e);
                }
            }
        }
        for (name, value) in [("iterations", self.iterations), ("window", self.window)] {
            if value == 0 {
                errors.push(Error::InvalidParameter {
                    name,
                    value: 0.0,
                    reason: "must be at least 1",
                });
            }
        }
        errors
    }

    fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Grid points in lexicographic order.
    pub fn grid(&self) -> Result<Vec<GridPoint>> {
        self.validate()?;
        let axes = self.axes();
        let size = self.grid_size();
        let mut points = Vec::with_capacity(size);
        for index in 0..size {
            // Mixed-radix decode, last axis fastest.
            let mut rem = index;
            let mut value = vec![0.0; axes.len()];
            for (slot, (_, vals)) in value.iter_mut().zip(&axes).rev() {
                *slot = vals[rem % vals.len()];
                rem /= vals.len();
            }
            let network = match self.family {
                Family::ErdosRenyi => NetworkSpec::erdos_renyi(self.n, value[0])?,
                Family::TwoBlock => {
                    NetworkSpec::two_block(self.n, value[0], value[1], value[2], value[3])?
                }
            };
            points.push(GridPoint {
                index,
                network,
                alpha: *value.last().unwrap(),
            });
        }
        Ok(points)
    }

    /// Ensemble settings for one grid point.
    pub fn ensemble_spec(&self, point: &GridPoint) -> Result<EnsembleSpec> {
        let params = ModelParams::new(self.beta, point.alpha, self.p_verify, self.p_forget)?;
        let mut spec = EnsembleSpec::new(
            point.network,
            params,
            self.initial,
            self.steps,
            self.iterations,
        );
        spec.window = self.window;
        spec.graph_mode = self.graph_mode;
        Ok(spec)
    }

    /// Seed used for the ensemble at grid index `index`.
    pub fn point_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, index as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl From<Summary> for MeanStd {
    fn from(s: Summary) -> Self {
        MeanStd {
            mean: s.mean,
            std: s.std,
        }
    }
}

/// One aggregated CSV record. Parameters that do not apply to the family
/// (and statistics of empty groups) are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub family: Family,
    pub f0: Option<f64>,
    pub h00: Option<f64>,
    pub h01: Option<f64>,
    pub h11: Option<f64>,
    pub p: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub p_verify: f64,
    pub p_forget: f64,
    pub steps: usize,
    pub iterations: usize,
    pub seed: u64,
    pub global: MeanStd,
    pub minority: Option<MeanStd>,
    pub majority: Option<MeanStd>,
}

impl ResultRow {
    pub fn new(spec: &SweepSpec, point: &GridPoint, stats: &EnsembleStats) -> Self {
        let (f0, h00, h01, h11, p) = match point.network {
            NetworkSpec::ErdosRenyi { p, .. } => (None, None, None, None, Some(p)),
            NetworkSpec::TwoBlock { f0, h, .. } => (
                Some(f0.value()),
                Some(h.h00()),
                Some(h.h01()),
                Some(h.h11()),
                None,
            ),
        };
        ResultRow {
            family: spec.family,
            f0,
            h00,
            h01,
            h11,
            p,
            alpha: point.alpha,
            beta: spec.beta,
            p_verify: spec.p_verify,
            p_forget: spec.p_forget,
            steps: spec.steps,
            iterations: stats.iterations(),
            seed: spec.master_seed,
            global: stats.global.into(),
            minority: stats.minority.map(Into::into),
            majority: stats.majority.map(Into::into),
        }
    }

    fn to_record(&self) -> Vec<String> {
        let param = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let frac = |v: Option<f64>| v.map(format_fraction).unwrap_or_default();
        vec![
            self.family.to_string(),
            param(self.f0),
            param(self.h00),
            param(self.h01),
            param(self.h11),
            param(self.p),
            self.alpha.to_string(),
            self.beta.to_string(),
            self.p_verify.to_string(),
            self.p_forget.to_string(),
            self.steps.to_string(),
            self.iterations.to_string(),
            self.seed.to_string(),
            frac(Some(self.global.mean)),
            frac(Some(self.global.std)),
            frac(self.minority.map(|m| m.mean)),
            frac(self.minority.map(|m| m.std)),
            frac(self.majority.map(|m| m.mean)),
            frac(self.majority.map(|m| m.std)),
        ]
    }

    fn from_record(record: &csv::StringRecord) -> std::result::Result<Self, String> {
        if record.len() != CSV_HEADER.len() {
            return Err(format!(
                "expected {} columns, found {}",
                CSV_HEADER.len(),
                record.len()
            ));
        }
        let field = |i: usize| record.get(i).unwrap_or("");
        let opt = |i: usize| -> std::result::Result<Option<f64>, String> {
            match field(i) {
                "" => Ok(None),
                s => s
                    .parse()
                    .map(Some)
                    .map_err(|_| format!("column `{}`: cannot parse `{s}`", CSV_HEADER[i])),
            }
        };
        let req = |i: usize| -> std::result::Result<f64, String> {
            opt(i)?.ok_or_else(|| format!("column `{}` is empty", CSV_HEADER[i]))
        };
        let int = |i: usize| -> std::result::Result<u64, String> {
            field(i)
                .parse()
                .map_err(|_| format!("column `{}`: cannot parse `{}`", CSV_HEADER[i], field(i)))
        };
        let pair = |i: usize| -> std::result::Result<Option<MeanStd>, String> {
            Ok(match (opt(i)?, opt(i + 1)?) {
                (Some(mean), Some(std)) => Some(MeanStd { mean, std }),
                _ => None,
            })
        };
        Ok(ResultRow {
            family: field(0).parse()?,
            f0: opt(1)?,
            h00: opt(2)?,
            h01: opt(3)?,
            h11: opt(4)?,
            p: opt(5)?,
            alpha: req(6)?,
            beta: req(7)?,
            p_verify: req(8)?,
            p_forget: req(9)?,
            steps: int(10)? as usize,
            iterations: int(11)? as usize,
            seed: int(12)?,
            global: pair(13)?.ok_or("global statistics are empty")?,
            minority: pair(15)?,
            majority: pair(17)?,
        })
    }
}

/// Six significant digits, plain decimal notation where reasonable.
pub fn format_fraction(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exponent) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exponent).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Runs one ensemble per grid point (points and iterations in parallel on the
/// current rayon pool). Rows come back in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    let points = spec.grid()?;
    points
        .par_iter()
        .map(|point| {
            let stats = ensemble(&spec.ensemble_spec(point)?, spec.point_seed(point.index))?;
            Ok(ResultRow::new(spec, point, &stats))
        })
        .collect()
}

/// Like [`run_sweep`], also returning each point's mean believer series
/// (`steps + 1` values) computed from the same runs.
pub fn run_sweep_with_timeseries(spec: &SweepSpec) -> Result<Vec<(ResultRow, Vec<f64>)>> {
    let points = spec.grid()?;
    points
        .par_iter()
        .map(|point| {
            let (stats, series) = ensemble_with_timeseries(
                &spec.ensemble_spec(point)?,
                spec.point_seed(point.index),
            )?;
            Ok((ResultRow::new(spec, point, &stats), series))
        })
        .collect()
}

/// Mean global believer fraction at `t = 0..=steps` for a single-point spec.
pub fn run_timeseries(spec: &SweepSpec) -> Result<Vec<f64>> {
    let size = spec.grid_size();
    if size > 1 {
        return Err(Error::NotSinglePoint(size));
    }
    let point = spec.grid()?.remove(0);
    ensemble_timeseries(&spec.ensemble_spec(&point)?, spec.point_seed(0))
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so a failed run never leaves a truncated file behind.
fn write_atomically(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> std::result::Result<(), csv::Error>,
) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    fill(tmp.as_file_mut()).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    tmp.as_file_mut().flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    write_atomically(path.as_ref(), |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for row in rows {
            w.write_record(row.to_record())?;
        }
        w.flush()?;
        Ok(())
    })
}

pub fn write_timeseries_csv(series: &[f64], path: impl AsRef<Path>) -> Result<()> {
    write_atomically(path.as_ref(), |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TIMESERIES_HEADER)?;
        for (t, v) in series.iter().enumerate() {
            w.write_record([t.to_string(), format_fraction(*v)])?;
        }
        w.flush()?;
        Ok(())
    })
}

/// Reads a file written by [`write_csv`]; the header must match exactly.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    let bad_data = |msg: String| {
        Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, msg),
        )
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(bad_data("header does not match the result schema".into()));
    }
    reader
        .records()
        .enumerate()
        .map(|(line, record)| {
            let record = record.map_err(csv_err)?;
            ResultRow::from_record(&record).map_err(|m| bad_data(format!("row {}: {m}", line + 1)))
        })
        .collect()
}

/// Built-in sweeps mirroring the three published figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Believer share over time on ER graphs of increasing density.
    Fig2a,
    /// Final believer share vs ER density, one series per gullibility.
    Fig2b,
    /// Majority believer share vs minority density on two-block graphs.
    Fig3,
}

pub const DENSITY_GRID: [f64; 4] = [0.002, 0.004, 0.008, 0.016];
pub const ALPHA_GRID: [f64; 4] = [0.1, 0.3, 0.5, 0.7];
pub const MINORITY_DENSITY_GRID: [f64; 5] = [0.01, 0.02, 0.04, 0.07, 0.10];
pub const MAJORITY_DENSITY_GRID: [f64; 3] = [0.004, 0.007, 0.010];
pub const MINORITY_FRACTION_GRID: [f64; 3] = [0.1, 0.2, 0.3];

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig2a, Preset::Fig2b, Preset::Fig3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2a => "fig2a",
            Preset::Fig2b => "fig2b",
            Preset::Fig3 => "fig3",
        }
    }

    pub fn spec(self, master_seed: u64) -> SweepSpec {
        let base = SweepSpec {
            family: Family::ErdosRenyi,
            n: 1000,
            p: DENSITY_GRID.to_vec(),
            f0: vec![],
            h00: vec![],
            h01: vec![],
            h11: vec![],
            alpha: vec![0.3],
            beta: 0.5,
            p_verify: 0.05,
            p_forget: 0.1,
            initial: InitialCondition::default(),
            steps: 1000,
            iterations: 50,
            window: 1,
            graph_mode: GraphMode::Annealed,
            master_seed,
        };
        match self {
            Preset::Fig2a => base,
            Preset::Fig2b => SweepSpec {
                alpha: ALPHA_GRID.to_vec(),
                ..base
            },
            Preset::Fig3 => SweepSpec {
                family: Family::TwoBlock,
                p: vec![],
                f0: MINORITY_FRACTION_GRID.to_vec(),
                h00: MINORITY_DENSITY_GRID.to_vec(),
                h01: vec![0.002],
                h11: MAJORITY_DENSITY_GRID.to_vec(),
                iterations: 100,
                ..base
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected fig2a, fig2b or fig3)"))
    }
}
