//! Initial seeding, single trajectories and seeded Monte Carlo ensembles.
//!
//! Randomness is derived from a master seed with [`derive_seed`], one private
//! ChaCha8 stream per iteration, so ensemble output does not depend on how
//! iterations are scheduled across threads.

mod exact;

pub use exact::{
    exact_state_distribution, StateDistribution, StateProbabilities, MAX_EXACT_NODES,
    MAX_EXACT_STEPS,
};

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{AgentState, ModelParams, StateVector, TalliedStates};
use crate::error::{check_probability, Error, Result};
use crate::graph::{generate_er, generate_sbm, BlockMatrix, Graph, Group, MinorityFraction};

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `k` of `master`:
/// `splitmix64(splitmix64(master) ^ (k * 0x9E3779B97F4A7C15))` with wrapping
/// arithmetic. Platform independent and stable across releases.
pub fn derive_seed(master: u64, k: u64) -> u64 {
    splitmix64(splitmix64(master) ^ k.wrapping_mul(SPLITMIX_GAMMA))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedingScope {
    #[default]
    WholeNetwork,
    MinorityOnly,
    MajorityOnly,
}

impl SeedingScope {
    pub fn name(self) -> &'static str {
        match self {
            SeedingScope::WholeNetwork => "whole-network",
            SeedingScope::MinorityOnly => "minority-only",
            SeedingScope::MajorityOnly => "majority-only",
        }
    }

    fn contains(self, group: Group) -> bool {
        match self {
            SeedingScope::WholeNetwork => true,
            SeedingScope::MinorityOnly => group == Group::Minority,
            SeedingScope::MajorityOnly => group == Group::Majority,
        }
    }
}

impl fmt::Display for SeedingScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SeedingScope {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "whole-network" => Ok(SeedingScope::WholeNetwork),
            "minority-only" => Ok(SeedingScope::MinorityOnly),
            "majority-only" => Ok(SeedingScope::MajorityOnly),
            other => Err(format!(
                "unknown seeding scope `{other}` (expected whole-network, minority-only or majority-only)"
            )),
        }
    }
}

/// How many nodes start as believers / fact-checkers, and where.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    believer_fraction: f64,
    factchecker_fraction: f64,
    scope: SeedingScope,
}

impl Default for InitialCondition {
    /// 1% believers across the whole network, no fact-checkers.
    fn default() -> Self {
        InitialCondition {
            believer_fraction: 0.01,
            factchecker_fraction: 0.0,
            scope: SeedingScope::WholeNetwork,
        }
    }
}

impl InitialCondition {
    pub fn new(
        believer_fraction: f64,
        factchecker_fraction: f64,
        scope: SeedingScope,
    ) -> Result<Self> {
        check_probability("believer_fraction", believer_fraction)?;
        check_probability("factchecker_fraction", factchecker_fraction)?;
        if believer_fraction + factchecker_fraction > 1.0 {
            return Err(Error::InvalidParameter {
                name: "factchecker_fraction",
                value: factchecker_fraction,
                reason: "believer_fraction + factchecker_fraction must not exceed 1",
            });
        }
        Ok(InitialCondition {
            believer_fraction,
            factchecker_fraction,
            scope,
        })
    }

    pub fn believers(fraction: f64) -> Result<Self> {
        Self::new(fraction, 0.0, SeedingScope::WholeNetwork)
    }

    pub fn believer_fraction(&self) -> f64 {
        self.believer_fraction
    }

    pub fn factchecker_fraction(&self) -> f64 {
        self.factchecker_fraction
    }

    pub fn scope(&self) -> SeedingScope {
        self.scope
    }
}

/// Places exactly `round(fraction * |scope|)` believers (and fact-checkers)
/// uniformly without replacement inside the scope; everyone else starts
/// susceptible.
pub fn seed_initial<R: Rng + ?Sized>(
    g: &Graph,
    ic: &InitialCondition,
    rng: &mut R,
) -> Result<StateVector> {
    let scope: Vec<usize> = (0..g.node_count())
        .filter(|&i| ic.scope.contains(g.label(i)))
        .collect();
    let size = scope.len();
    let believers = (ic.believer_fraction * size as f64).round() as usize;
    let fact_checkers =
        ((ic.factchecker_fraction * size as f64).round() as usize).min(size - believers);

    if size == 0 && (ic.believer_fraction > 0.0 || ic.factchecker_fraction > 0.0) {
        return Err(Error::EmptyScope {
            what: if ic.believer_fraction > 0.0 {
                "believers"
            } else {
                "fact-checkers"
            },
            scope: ic.scope.name(),
        });
    }

    let mut states = vec![AgentState::Susceptible; g.node_count()];
    let chosen = index::sample(rng, size, believers + fact_checkers);
    for (rank, pos) in chosen.into_iter().enumerate() {
        states[scope[pos]] = if rank < believers {
            AgentState::Believer
        } else {
            AgentState::FactChecker
        };
    }
    Ok(StateVector::new(states))
}

/// Susceptible / believer / fact-checker head counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StateCounts {
    pub susceptible: usize,
    pub believers: usize,
    pub fact_checkers: usize,
}

impl StateCounts {
    fn from_array(a: [usize; 3]) -> Self {
        StateCounts {
            susceptible: a[AgentState::Susceptible.index()],
            believers: a[AgentState::Believer.index()],
            fact_checkers: a[AgentState::FactChecker.index()],
        }
    }

    pub fn total(&self) -> usize {
        self.susceptible + self.believers + self.fact_checkers
    }

    /// Believer share of this population, `None` when it is empty.
    pub fn believer_fraction(&self) -> Option<f64> {
        match self.total() {
            0 => None,
            total => Some(self.believers as f64 / total as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepCounts {
    pub global: StateCounts,
    pub minority: StateCounts,
    pub majority: StateCounts,
}

impl StepCounts {
    pub fn group(&self, group: Group) -> &StateCounts {
        match group {
            Group::Minority => &self.minority,
            Group::Majority => &self.majority,
        }
    }
}

/// State counts recorded at `t = 0..=steps`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    records: Vec<StepCounts>,
}

impl Trajectory {
    pub fn records(&self) -> &[StepCounts] {
        &self.records
    }

    pub fn steps(&self) -> usize {
        self.records.len() - 1
    }

    pub fn believer_series(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.global.believer_fraction().unwrap_or(0.0))
            .collect()
    }

    /// Mean believer fraction over the last `window` records, globally and
    /// per group (group denominators are group sizes).
    pub fn final_metrics(&self, window: usize) -> FinalMetrics {
        let w = window.clamp(1, self.records.len());
        let tail = &self.records[self.records.len() - w..];
        let avg = |pick: fn(&StepCounts) -> &StateCounts| -> Option<f64> {
            tail.iter()
                .map(|r| pick(r).believer_fraction())
                .sum::<Option<f64>>()
                .map(|s| s / w as f64)
        };
        FinalMetrics {
            global: avg(|r| &r.global).unwrap_or(0.0),
            minority: avg(|r| &r.minority),
            majority: avg(|r| &r.majority),
        }
    }
}

/// Seeds the initial configuration and runs `steps` synchronous updates,
/// all from a single stream seeded with `seed`.
pub fn run_trajectory(
    g: &Graph,
    params: &ModelParams,
    ic: &InitialCondition,
    steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = seed_initial(g, ic, &mut rng)?;
    Ok(evolve(g, params, initial, steps, &mut rng))
}

fn evolve<R: Rng + ?Sized>(
    g: &Graph,
    params: &ModelParams,
    initial: StateVector,
    steps: usize,
    rng: &mut R,
) -> Trajectory {
    let labels = g.labels();
    let mut records = Vec::with_capacity(steps + 1);
    records.push(StepCounts::tally_slice(initial.as_slice(), labels));
    let mut current = TalliedStates::new(g, params, initial);
    for _ in 0..steps {
        current.advance(g, params, rng);
        records.push(StepCounts::tally_slice(current.states(), labels));
    }
    Trajectory { records }
}

impl StepCounts {
    fn tally_slice(states: &[AgentState], labels: &[Group]) -> Self {
        let mut out = [[0usize; 3]; 2];
        for (s, g) in states.iter().zip(labels) {
            out[g.index()][s.index()] += 1;
        }
        let minority = StateCounts::from_array(out[0]);
        let majority = StateCounts::from_array(out[1]);
        StepCounts {
            global: StateCounts {
                susceptible: minority.susceptible + majority.susceptible,
                believers: minority.believers + majority.believers,
                fact_checkers: minority.fact_checkers + majority.fact_checkers,
            },
            minority,
            majority,
        }
    }
}

/// Random network family and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetworkSpec {
    ErdosRenyi {
        n: usize,
        p: f64,
    },
    TwoBlock {
        n: usize,
        f0: MinorityFraction,
        h: BlockMatrix,
    },
}

impl NetworkSpec {
    pub fn erdos_renyi(n: usize, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        Ok(NetworkSpec::ErdosRenyi {
            n,
            p: check_probability("p", p)?,
        })
    }

    pub fn two_block(n: usize, f0: f64, h00: f64, h01: f64, h11: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        Ok(NetworkSpec::TwoBlock {
            n,
            f0: MinorityFraction::new(f0)?,
            h: BlockMatrix::new(h00, h01, h11)?,
        })
    }

    pub fn node_count(&self) -> usize {
        match *self {
            NetworkSpec::ErdosRenyi { n, .. } | NetworkSpec::TwoBlock { n, .. } => n,
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Graph> {
        match self {
            NetworkSpec::ErdosRenyi { n, p } => generate_er(*n, *p, rng),
            NetworkSpec::TwoBlock { n, f0, h } => generate_sbm(*n, *f0, h, rng),
        }
    }
}

/// Annealed regenerates the network every iteration; quenched draws one
/// network from the master seed and reuses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphMode {
    #[default]
    Annealed,
    Quenched,
}

/// Everything an ensemble needs besides the master seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub network: NetworkSpec,
    pub params: ModelParams,
    pub initial: InitialCondition,
    pub steps: usize,
    pub iterations: usize,
    /// Trailing records averaged into the final metric.
    pub window: usize,
    pub graph_mode: GraphMode,
}

impl EnsembleSpec {
    pub fn new(
        network: NetworkSpec,
        params: ModelParams,
        initial: InitialCondition,
        steps: usize,
        iterations: usize,
    ) -> Self {
        EnsembleSpec {
            network,
            params,
            initial,
            steps,
            iterations,
            window: 1,
            graph_mode: GraphMode::Annealed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "iterations",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        if self.window == 0 {
            return Err(Error::InvalidParameter {
                name: "window",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }

    fn quenched_graph(&self, master_seed: u64) -> Result<Option<Graph>> {
        match self.graph_mode {
            GraphMode::Annealed => Ok(None),
            GraphMode::Quenched => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, u64::MAX));
                self.network.generate(&mut rng).map(Some)
            }
        }
    }

    fn iteration(&self, master_seed: u64, k: usize, fixed: Option<&Graph>) -> Result<Trajectory> {
        let child = derive_seed(master_seed, k as u64);
        let fresh;
        let g = match fixed {
            Some(g) => g,
            None => {
                fresh = self
                    .network
                    .generate(&mut ChaCha8Rng::seed_from_u64(derive_seed(child, 0)))?;
                &fresh
            }
        };
        run_trajectory(
            g,
            &self.params,
            &self.initial,
            self.steps,
            derive_seed(child, 1),
        )
    }

    fn map_iterations<T: Send>(
        &self,
        master_seed: u64,
        f: impl Fn(Trajectory) -> T + Sync,
    ) -> Result<Vec<T>> {
        self.validate()?;
        let fixed = self.quenched_graph(master_seed)?;
        (0..self.iterations)
            .into_par_iter()
            .map(|k| self.iteration(master_seed, k, fixed.as_ref()).map(&f))
            .collect()
    }
}

/// Final believer fractions of one iteration. Group entries are `None`
/// when the group is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalMetrics {
    pub global: f64,
    pub minority: Option<f64>,
    pub majority: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Summary {
            mean: mean.clamp(min, max),
            std,
            min,
            max,
        })
    }

    /// Standard error of the mean over `n` samples.
    pub fn standard_error(&self, n: usize) -> f64 {
        self.std / (n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub finals: Vec<FinalMetrics>,
    pub global: Summary,
    pub minority: Option<Summary>,
    pub majority: Option<Summary>,
}

impl EnsembleStats {
    fn from_finals(finals: Vec<FinalMetrics>) -> Self {
        let column = |pick: fn(&FinalMetrics) -> Option<f64>| -> Option<Summary> {
            let values: Option<Vec<f64>> = finals.iter().map(pick).collect();
            values.and_then(|v| Summary::of(&v))
        };
        EnsembleStats {
            global: column(|f| Some(f.global)).expect("at least one iteration"),
            minority: column(|f| f.minority),
            majority: column(|f| f.majority),
            finals,
        }
    }

    pub fn iterations(&self) -> usize {
        self.finals.len()
    }

    pub fn group(&self, group: Group) -> Option<&Summary> {
        match group {
            Group::Minority => self.minority.as_ref(),
            Group::Majority => self.majority.as_ref(),
        }
    }
}

/// Runs `spec.iterations` independent simulations (in parallel on the
/// current rayon pool) and aggregates the final believer fractions.
pub fn ensemble(spec: &EnsembleSpec, master_seed: u64) -> Result<EnsembleStats> {
    let window = spec.window;
    let finals = spec.map_iterations(master_seed, |t| t.final_metrics(window))?;
    Ok(EnsembleStats::from_finals(finals))
}

fn pointwise_mean(series: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut mean = vec![0.0; len];
    for s in series {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    let n = series.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// [`ensemble`] and [`ensemble_timeseries`] from one set of runs.
pub fn ensemble_with_timeseries(
    spec: &EnsembleSpec,
    master_seed: u64,
) -> Result<(EnsembleStats, Vec<f64>)> {
    let window = spec.window;
    let (finals, series): (Vec<_>, Vec<_>) = spec
        .map_iterations(master_seed, |t| {
            (t.final_metrics(window), t.believer_series())
        })?
        .into_iter()
        .unzip();
    Ok((
        EnsembleStats::from_finals(finals),
        pointwise_mean(&series, spec.steps + 1),
    ))
}

/// Pointwise mean of the global believer fraction across iterations,
/// `steps + 1` values. Uses the same per-iteration streams as [`ensemble`].
pub fn ensemble_timeseries(spec: &EnsembleSpec, master_seed: u64) -> Result<Vec<f64>> {
    let series = spec.map_iterations(master_seed, |t| t.believer_series())?;
    Ok(pointwise_mean(&series, spec.steps + 1))
}
