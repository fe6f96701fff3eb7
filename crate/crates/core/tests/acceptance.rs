//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hoaxnet::experiments::{read_csv, run_sweep, Preset, ResultRow};
use hoaxnet::{
    belief_prob, exact_state_distribution, factcheck_prob, generate_er, generate_sbm, step,
    AgentState, BlockMatrix, Graph, Group, MinorityFraction, ModelParams, NeighborTally,
    StateVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn close(a: Option<f64>, b: f64) -> bool {
    a.is_some_and(|a| (a - b).abs() < 1e-9)
}

fn se(row: &ResultRow, m: hoaxnet::experiments::MeanStd) -> f64 {
    m.std / (row.iterations as f64).sqrt()
}

fn density_monotonicity() -> Outcome {
    let spec = Preset::Fig2b.spec(1);
    let rows = match run_sweep(&spec) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let mut pass = true;
    let mut notes = Vec::new();
    for &alpha in &spec.alpha {
        let mut line: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| (r.alpha - alpha).abs() < 1e-12)
            .collect();
        line.sort_by(|a, b| a.p.partial_cmp(&b.p).unwrap());
        let means: Vec<f64> = line.iter().map(|r| r.global.mean).collect();
        let monotone = means.windows(2).all(|w| w[1] >= w[0]);
        let (lo, hi) = (line[0], line[line.len() - 1]);
        let combined = (se(lo, lo.global).powi(2) + se(hi, hi.global).powi(2)).sqrt();
        let gap = hi.global.mean - lo.global.mean;
        let separated = gap > 0.0 && gap >= 2.0 * combined;
        pass &= monotone && separated;
        notes.push(format!(
            "alpha={alpha}: means {:?} gap={gap:.4} se={combined:.4}{}{}",
            means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>(),
            if monotone { "" } else { " (not monotone)" },
            if separated { "" } else { " (not separated)" },
        ));
    }
    Outcome::new(pass, notes.join("; "))
}

fn majority(rows: &[ResultRow], f0: f64, h00: f64, h11: f64) -> (f64, f64) {
    let row = rows
        .iter()
        .find(|r| close(r.f0, f0) && close(r.h00, h00) && close(r.h11, h11))
        .unwrap_or_else(|| panic!("no row for f0={f0} h00={h00} h11={h11}"));
    let m = row.majority.expect("majority group present");
    (m.mean, se(row, m))
}

fn cross_group_magnitude(rows: &[ResultRow], h00: &[f64]) -> Outcome {
    let (lo, _) = majority(rows, 0.2, h00[0], 0.007);
    let (hi, _) = majority(rows, 0.2, h00[h00.len() - 1], 0.007);
    let ratio = hi / lo;
    let mut detail = format!("majority believers {lo:.4} -> {hi:.4} (x{ratio:.1})");
    if !(0.005..=0.05).contains(&lo) || !(0.05..=0.20).contains(&hi) {
        detail.push_str("; calibration note: outside soft bands [0.5%,5%] / [5%,20%]");
    }
    Outcome::new(ratio >= 3.0, detail)
}

fn minority_size_modulation(rows: &[ResultRow], f0s: &[f64], h00: &[f64]) -> Outcome {
    let increases: Vec<(f64, f64)> = f0s
        .iter()
        .map(|&f0| {
            let (lo, lo_se) = majority(rows, f0, h00[0], 0.007);
            let (hi, hi_se) = majority(rows, f0, h00[h00.len() - 1], 0.007);
            (hi - lo, (lo_se.powi(2) + hi_se.powi(2)).sqrt())
        })
        .collect();
    let pass = increases
        .windows(2)
        .all(|w| w[1].0 >= w[0].0 - (w[0].1.powi(2) + w[1].1.powi(2)).sqrt());
    let detail = f0s
        .iter()
        .zip(&increases)
        .map(|(f0, (d, s))| format!("f0={f0}: +{d:.4}±{s:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(pass, detail)
}

fn within_group_density(rows: &[ResultRow], h00: &[f64], h11: &[f64]) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for &a in h00 {
        let series: Vec<f64> = h11.iter().map(|&b| majority(rows, 0.2, a, b).0).collect();
        let ok = series.windows(2).all(|w| w[1] >= w[0]);
        pass &= ok;
        notes.push(format!(
            "h00={a}: {}{}",
            series
                .iter()
                .map(|m| format!("{m:.4}"))
                .collect::<Vec<_>>()
                .join("<="),
            if ok { "" } else { " (violated)" }
        ));
    }
    Outcome::new(pass, notes.join("; "))
}

fn oracle_equivalence() -> Outcome {
    const RUNS: usize = 100_000;
    let g = Graph::from_edges(vec![Group::Majority; 4], &[(0, 1), (1, 2), (2, 3)]).unwrap();
    let params = ModelParams::new(0.5, 0.3, 0.05, 0.1).unwrap();
    let initial: StateVector = "BSSS".parse().unwrap();
    let marginals = exact_state_distribution(&g, &initial, &params, 3)
        .unwrap()
        .marginals();
    let mut counts = [[0usize; 3]; 4];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..RUNS {
        let mut s = initial.clone();
        for _ in 0..3 {
            s = step(&g, &s, &params, &mut rng).unwrap();
        }
        for (c, state) in counts.iter_mut().zip(s.as_slice()) {
            c[AgentState::ALL.iter().position(|x| x == state).unwrap()] += 1;
        }
    }
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for i in 0..4 {
        for (k, &state) in AgentState::ALL.iter().enumerate() {
            let p = marginals[i].get(state);
            let freq = counts[i][k] as f64 / RUNS as f64;
            let sigma = (p * (1.0 - p) / RUNS as f64).sqrt();
            if sigma == 0.0 {
                pass &= freq == p;
            } else {
                let z = (freq - p).abs() / sigma;
                worst = worst.max(z);
                pass &= z <= 4.0;
            }
        }
    }
    Outcome::new(pass, format!("12 cells, max |z| = {worst:.2}"))
}

fn kernel_identities() -> Outcome {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    for _ in 0..1000 {
        let beta: f64 = rng.random();
        let alpha = rng.random_range(-0.999..0.999);
        let nb = rng.random_range(0..40u32);
        let nf = rng.random_range(0..40u32);
        let p = ModelParams::new(beta, alpha, 0.0, 0.0).unwrap();
        let mirror = ModelParams::new(beta, -alpha, 0.0, 0.0).unwrap();
        let t = NeighborTally::new(nb, nf);
        let b = belief_prob(&p, t);
        let f = factcheck_prob(&p, t);
        let label = format!("beta={beta:.3} alpha={alpha:.3} nB={nb} nF={nf}");
        if nb + nf > 0 && (b + f - beta).abs() > TOL {
            failures.push(format!("sum at {label}"));
        }
        if (b - factcheck_prob(&mirror, NeighborTally::new(nf, nb))).abs() > TOL {
            failures.push(format!("role symmetry at {label}"));
        }
        if belief_prob(&p, NeighborTally::new(nb + 1, nf)) < b - TOL {
            failures.push(format!("nB monotonicity at {label}"));
        }
        if belief_prob(&p, NeighborTally::new(nb, nf + 1)) > b + TOL {
            failures.push(format!("nF monotonicity at {label}"));
        }
        if nb > 0 && nf > 0 {
            let higher = ModelParams::new(beta, rng.random_range(alpha..0.999), 0.0, 0.0).unwrap();
            if belief_prob(&higher, t) < b - TOL {
                failures.push(format!("alpha monotonicity at {label}"));
            }
        }
    }
    match failures.first() {
        None => Outcome::new(true, "1000 tuples"),
        Some(first) => Outcome::new(
            false,
            format!("{} failures, first: {first}", failures.len()),
        ),
    }
}

fn run_fig3(dir: &Path, file: &str, workers: &str) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hoaxnet"))
        .args([
            "preset",
            "fig3",
            "--seed",
            "42",
            "--workers",
            workers,
            "--out",
            file,
        ])
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    std::fs::read(dir.join(file)).map_err(|e| e.to_string())
}

fn binomial_mean_z(counts: &[usize], pairs: f64, p: f64) -> f64 {
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    let se = (pairs * p * (1.0 - p) / counts.len() as f64).sqrt();
    (mean - pairs * p) / se
}

fn generator_statistics() -> Outcome {
    let seeds = 0..200u64;
    let er: Vec<usize> = seeds
        .clone()
        .map(|s| {
            generate_er(1000, 0.006, &mut ChaCha8Rng::seed_from_u64(s))
                .unwrap()
                .edge_count()
        })
        .collect();
    let h = BlockMatrix::new(0.05, 0.002, 0.007).unwrap();
    let f0 = MinorityFraction::new(0.2).unwrap();
    let mut blocks = [Vec::new(), Vec::new(), Vec::new()];
    for s in seeds {
        let g = generate_sbm(1000, f0, &h, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
        for (b, c) in blocks.iter_mut().zip(g.block_edge_counts()) {
            b.push(c);
        }
    }
    let z = [
        ("er", binomial_mean_z(&er, 499_500.0, 0.006)),
        ("00", binomial_mean_z(&blocks[0], 19_900.0, 0.05)),
        ("01", binomial_mean_z(&blocks[1], 160_000.0, 0.002)),
        ("11", binomial_mean_z(&blocks[2], 319_600.0, 0.007)),
    ];
    let cross_mean = blocks[1].iter().sum::<usize>() as f64 / 200.0;
    Outcome::new(
        z.iter().all(|(_, z)| z.abs() <= 4.0),
        format!(
            "{}; mean cross edges {cross_mean:.1} (expected 320)",
            z.iter()
                .map(|(k, z)| format!("{k} z={z:.2}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn report(all: &mut bool, id: u32, name: &str, started: Instant, outcome: Outcome) {
    *all &= outcome.pass;
    println!(
        "{} C{id} {name} [{:.0}s]: {}",
        if outcome.pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64(),
        outcome.detail
    );
}

fn main() {
    let mut all = true;

    let t = Instant::now();
    report(
        &mut all,
        1,
        "density monotonicity",
        t,
        density_monotonicity(),
    );

    let dir = tempfile::tempdir().expect("tempdir");
    let t = Instant::now();
    let first = run_fig3(dir.path(), "a.csv", "8");
    let fig3_time = t;
    let fig3 = Preset::Fig3.spec(42);
    match first
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|_| read_csv(dir.path().join("a.csv")).map_err(|e| e.to_string()))
    {
        Ok(rows) => {
            report(
                &mut all,
                2,
                "cross-group effect magnitude",
                fig3_time,
                cross_group_magnitude(&rows, &fig3.h00),
            );
            report(
                &mut all,
                3,
                "minority-size modulation",
                fig3_time,
                minority_size_modulation(&rows, &fig3.f0, &fig3.h00),
            );
            report(
                &mut all,
                4,
                "within-group density effect",
                fig3_time,
                within_group_density(&rows, &fig3.h00, &fig3.h11),
            );
        }
        Err(e) => {
            for (id, name) in [
                (2, "cross-group effect magnitude"),
                (3, "minority-size modulation"),
                (4, "within-group density effect"),
            ] {
                report(
                    &mut all,
                    id,
                    name,
                    fig3_time,
                    Outcome::new(false, format!("fig3 preset failed: {e}")),
                );
            }
        }
    }

    let t = Instant::now();
    report(&mut all, 5, "oracle equivalence", t, oracle_equivalence());

    let t = Instant::now();
    report(&mut all, 6, "kernel identities", t, kernel_identities());

    let t = Instant::now();
    let reproducible = match (
        first,
        run_fig3(dir.path(), "b.csv", "8"),
        run_fig3(dir.path(), "c.csv", "1"),
    ) {
        (Ok(a), Ok(b), Ok(c)) => Outcome::new(
            a == b && b == c && !a.is_empty(),
            format!(
                "repeat identical: {}, workers 1 vs 8 identical: {}",
                a == b,
                b == c
            ),
        ),
        (a, b, c) => Outcome::new(
            false,
            [a, b, c]
                .into_iter()
                .filter_map(Result::err)
                .collect::<Vec<_>>()
                .join("; "),
        ),
    };
    report(&mut all, 7, "reproducibility", t, reproducible);

    let t = Instant::now();
    report(
        &mut all,
        8,
        "generator statistics",
        t,
        generator_statistics(),
    );

    if !all {
        std::process::exit(1);
    }
}
