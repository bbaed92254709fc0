//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `EXPECTED_FAILURES` are implemented as stated and are
//! known not to hold; they still print FAIL, but only an unexpected failure
//! makes the process exit non-zero.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use diglacian_core::data::{edge_homophily, generate_synthetic, parse_edges, parse_labels, SynthConfig};
use diglacian_core::model::{backward, evaluate, forward, loss, train, Params};
use diglacian_core::pipeline::{preprocess, PreprocessConfig};
use diglacian_core::verify::{self, VerifyConfig};
use diglacian_core::{DiGraph, ModelKind, TrainConfig};

/// Criteria whose literal statement does not hold; see the README.
const EXPECTED_FAILURES: &[u32] = &[4, 8];

struct Outcome {
    id: u32,
    passed: bool,
    detail: String,
}

fn outcome(id: u32, passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { id, passed, detail: detail.into() }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn fundamental(cfg: &VerifyConfig) -> (Outcome, Outcome) {
    let t = Instant::now();
    let (eq, ann) = verify::check_fundamental(cfg).expect("fundamental checks run");
    let elapsed = t.elapsed();
    let c1 = outcome(
        1,
        eq.passed && elapsed < Duration::from_secs(60),
        format!(
            "{} chains, n in [5, {}]: max |Z_sparse - Z_dense| = {:.2e} (< 1e-6), {:.1}s (< 60s){}",
            eq.instances,
            cfg.fundamental_max_n,
            eq.max_residual,
            secs(elapsed),
            if eq.passed { String::new() } else { format!(" [{}]", eq.detail) }
        ),
    );
    let c2 = outcome(
        2,
        ann.passed,
        format!("max(|Z e|, |pi^T Z|) = {:.2e} (< 1e-8) over {} chains", ann.max_residual, ann.instances),
    );
    (c1, c2)
}

fn hitting(cfg: &VerifyConfig) -> Outcome {
    let (lin, mc, two) = verify::check_hitting(cfg).expect("hitting checks run");
    outcome(
        3,
        lin.passed && mc.passed && two.passed,
        format!(
            "{} chains: closed form vs linear system max rel {:.2e} (< 1e-8); vs Monte Carlo worst {:.2} se (<= 3); two-state H01 = 2 exact: {}{}",
            cfg.hitting_instances,
            lin.max_residual,
            mc.max_residual,
            two.passed,
            if mc.passed { String::new() } else { format!(" [{}]", mc.detail) }
        ),
    )
}

fn stationary(cfg: &VerifyConfig) -> Outcome {
    let (_, capped, und) = verify::check_stationary(cfg).expect("stationary checks run");
    outcome(
        4,
        capped.passed && und.passed,
        format!(
            "{} chains at <= 30 iterations: worst residual/L1 {:.2e} (< 1e-8), {} failing; undirected degree law max err {:.2e} (< 1e-10)",
            capped.instances,
            capped.max_residual,
            capped.detail.matches("seed=").count(),
            und.max_residual
        ),
    )
}

fn spectrum(cfg: &VerifyConfig) -> (Outcome, Outcome) {
    let (boxed, build, comp) = verify::check_spectrum(cfg).expect("spectrum checks run");
    (
        outcome(
            5,
            boxed.passed && build.passed,
            format!(
                "{} chains, n <= {}: worst excess beyond box {:.2e} (slack 1e-9); operator vs entrywise build {:.2e}",
                boxed.instances, cfg.spectrum_max_n, boxed.max_residual, build.max_residual
            ),
        ),
        outcome(6, comp.passed, format!("max |T + T_hat - 2 D^-1| = {:.2e} (< 1e-10)", comp.max_residual)),
    )
}

fn rayleigh(cfg: &VerifyConfig) -> Outcome {
    let r = verify::check_rayleigh(cfg).expect("rayleigh check runs");
    outcome(7, r.passed, format!("{} pairs: max |difference| = {:.2e} (< 1e-10)", r.instances, r.max_residual))
}

fn diameter() -> Outcome {
    let (lit, shifted) = verify::check_diameter().expect("diameter checks run");
    outcome(
        8,
        lit.passed,
        format!(
            "{} regular graphs: literal bound holds on {}; shifted variant holds on {}. {}",
            lit.instances,
            lit.instances - lit.detail.matches(": diameter").count(),
            shifted.instances - shifted.detail.matches(": diameter").count(),
            lit.detail
        ),
    )
}

fn gradient_checks() -> Outcome {
    let ds = generate_synthetic(&SynthConfig {
        n: 10,
        classes: 3,
        homophily: 0.3,
        mean_degree: 2.0,
        dim: 4,
        snr: 1.0,
        n_splits: 0,
        seed: 9,
    })
    .expect("tiny dataset");
    let pre = preprocess(&ds.graph, &ds.features, &PreprocessConfig { commute_mu: Some(0.5), ..Default::default() })
        .expect("tiny preprocessing");
    let x = ds.features.matrix();
    let train_idx: Vec<usize> = (0..7).collect();
    let wd = 1e-3;
    let eps = 1e-5;
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for kind in [ModelKind::Diglacian, ModelKind::DiglacianCt, ModelKind::AdaSage, ModelKind::Gcn] {
        let props = pre.propagation(kind, &ds.graph).expect("propagation");
        let mut p = Params::init(kind, x.ncols(), 6, ds.classes, 2, 3);
        p.alpha = 0.7;
        p.beta = 0.3;
        let mixed = kind.is_mixed();
        let objective = |q: &Params| {
            let c = forward(kind, x, &props, q, None).expect("forward");
            loss(&c.probabilities, &ds.labels, &train_idx, q, wd).expect("loss")
        };
        let cache = forward(kind, x, &props, &p, None).expect("forward");
        let analytic = backward(kind, &cache, &props, &p, &ds.labels, &train_idx, wd).expect("backward").flatten(mixed);
        let flat = p.flatten(mixed);
        let mut kind_worst = 0.0f64;
        for i in 0..flat.len() {
            let (mut plus, mut minus) = (flat.clone(), flat.clone());
            plus[i] += eps;
            minus[i] -= eps;
            let fd = (objective(&p.unflatten(&plus, mixed)) - objective(&p.unflatten(&minus, mixed))) / (2.0 * eps);
            let rel = (analytic[i] - fd).abs() / analytic[i].abs().max(fd.abs()).max(1e-6);
            kind_worst = kind_worst.max(rel);
        }
        worst = worst.max(kind_worst);
        lines.push(format!("{kind} {kind_worst:.1e} ({} params)", flat.len()));
    }
    outcome(9, worst < 1e-4, format!("max rel err {worst:.2e} (< 1e-4): {}", lines.join(", ")))
}

fn synthetic_direction() -> Outcome {
    let t = Instant::now();
    let seeds: Vec<u64> = (0..10).collect();
    let kinds = [ModelKind::Gcn, ModelKind::Diglacian, ModelKind::DiglacianCt];
    let cfg = TrainConfig { patience: 100, max_epochs: 300, ..Default::default() };
    let per_seed: Vec<[f64; 3]> = seeds
        .par_iter()
        .map(|&seed| {
            let ds = generate_synthetic(&SynthConfig {
                n: 1000,
                classes: 5,
                homophily: 0.1,
                mean_degree: 5.0,
                dim: 64,
                snr: 2.0,
                n_splits: 5,
                seed,
            })
            .expect("synthetic dataset");
            let pre = preprocess(
                &ds.graph,
                &ds.features,
                &PreprocessConfig { seed, commute_mu: Some(0.97), ..Default::default() },
            )
            .expect("preprocessing");
            let x = ds.features.matrix();
            let mut sums = [0.0; 3];
            for (slot, kind) in kinds.iter().enumerate() {
                let props = pre.propagation(*kind, &ds.graph).expect("propagation");
                for (si, split) in ds.splits.iter().enumerate() {
                    let run = TrainConfig { seed: seed * 100 + si as u64, ..cfg };
                    let out = train(*kind, x, &props, &ds.labels, ds.classes, &split.train, &split.val, &run)
                        .expect("training");
                    sums[slot] += evaluate(*kind, x, &props, &out.params, &ds.labels, &split.test).expect("evaluation");
                }
            }
            sums.map(|s| 100.0 * s / ds.splits.len() as f64)
        })
        .collect();
    let mean = |slot: usize| per_seed.iter().map(|r| r[slot]).sum::<f64>() / per_seed.len() as f64;
    let (gcn, dig, ct) = (mean(0), mean(1), mean(2));
    let elapsed = t.elapsed();
    outcome(
        10,
        dig - gcn >= 5.0 && ct >= dig - 1.0 && elapsed < Duration::from_secs(600),
        format!(
            "h=0.1, n=1000, d=64, 10 seeds x 5 splits: GCN {gcn:.2}%, DiglacianGCN {dig:.2}% (gap {:+.2}, need >= +5), DiglacianGCN-CT {ct:.2}% (need >= {:.2}); {:.0}s (< 600s)",
            dig - gcn,
            dig - 1.0,
            secs(elapsed)
        ),
    )
}

fn random_sparse_graph(n: usize, edges: usize, seed: u64) -> DiGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = std::collections::BTreeSet::new();
    while set.len() < edges {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            set.insert((a, b));
        }
    }
    DiGraph::from_edges(n, &set.into_iter().collect::<Vec<_>>()).expect("edges in range").0
}

fn sparsity_scaling() -> Outcome {
    let k = 2;
    let mut timings = Vec::new();
    let mut bound_ok = true;
    let mut detail = String::new();
    for n in [2500usize, 5000, 10_000] {
        let e = 10 * n;
        let g = random_sparse_graph(n, e, n as u64);
        let x = verify::random_features(n, 64, n as u64);
        let t = Instant::now();
        let pre = preprocess(&g, &x, &PreprocessConfig { k, ..Default::default() }).expect("preprocessing");
        let elapsed = secs(t.elapsed());
        timings.push((n, elapsed));
        if n == 10_000 {
            let nnz = pre.chain.transition.nnz();
            let bound = e + 2 * n * k + n;
            bound_ok = nnz <= bound;
            detail = format!("n=10000, |E|={e}: nnz(P) = {nnz} (<= {bound})");
        }
    }
    let scaling: Vec<String> = timings
        .windows(2)
        .map(|w| {
            let (n0, t0) = w[0];
            let (n1, t1) = w[1];
            let nlogn = (n1 as f64 * (n1 as f64).ln()) / (n0 as f64 * (n0 as f64).ln());
            format!("{n0}->{n1}: x{:.2} (N log N predicts x{nlogn:.2})", t1 / t0)
        })
        .collect();
    let times: Vec<String> = timings.iter().map(|(n, t)| format!("{n}: {t:.2}s")).collect();
    outcome(11, bound_ok, format!("{detail}; times {}; {}", times.join(", "), scaling.join(", ")))
}

/// Published edge homophily values, checked when `DGL_DATASETS_DIR` holds
/// `<name>/edges.tsv` and `<name>/labels.tsv`.
const PUBLISHED_H: &[(&str, f64)] = &[
    ("texas", 0.11),
    ("wisconsin", 0.21),
    ("actor", 0.22),
    ("squirrel", 0.22),
    ("chameleon", 0.23),
    ("cornell", 0.3),
    ("deezer", 0.53),
    ("citeseer", 0.74),
    ("coraml", 0.79),
    ("coauthorcs", 0.81),
];

fn published_homophily() -> Option<Outcome> {
    let root = std::env::var_os("DGL_DATASETS_DIR")?;
    let root = Path::new(&root);
    let mut found = Vec::new();
    let mut ok = true;
    for &(name, expected) in PUBLISHED_H {
        let dir = root.join(name);
        let (edges, labels) = (dir.join("edges.tsv"), dir.join("labels.tsv"));
        if !edges.exists() || !labels.exists() {
            continue;
        }
        let labels = parse_labels(&labels).expect("labels parse");
        let edges = parse_edges(&edges).expect("edges parse");
        let (g, _) = DiGraph::from_edges(labels.len(), &edges).expect("edges in range");
        let h = edge_homophily(&g, &labels).expect("non-empty edge set");
        ok &= (h - expected).abs() <= 0.01;
        found.push(format!("{name} {h:.3} (published {expected})"));
    }
    if found.is_empty() {
        return None;
    }
    Some(outcome(12, ok, found.join(", ")))
}

fn main() {
    // the libtest harness flags are irrelevant here
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |id: u32| args.is_empty() || args.iter().any(|a| a == &id.to_string());
    let cfg = VerifyConfig::full(20_240_601);

    let mut results = Vec::new();
    let mut report = |o: Outcome| {
        let status = match (o.passed, EXPECTED_FAILURES.contains(&o.id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        println!("{status} criterion {}: {}", o.id, o.detail);
        results.push(o);
    };

    if selected(1) || selected(2) {
        let (c1, c2) = fundamental(&cfg);
        report(c1);
        report(c2);
    }
    if selected(3) {
        report(hitting(&cfg));
    }
    if selected(4) {
        report(stationary(&cfg));
    }
    if selected(5) || selected(6) {
        let (c5, c6) = spectrum(&cfg);
        report(c5);
        report(c6);
    }
    if selected(7) {
        report(rayleigh(&cfg));
    }
    if selected(8) {
        report(diameter());
    }
    if selected(9) {
        report(gradient_checks());
    }
    if selected(10) {
        report(synthetic_direction());
    }
    if selected(11) {
        report(sparsity_scaling());
    }
    if selected(12) {
        match published_homophily() {
            Some(o) => report(o),
            None => println!("SKIP criterion 12: set DGL_DATASETS_DIR to a directory of <name>/edges.tsv + labels.tsv"),
        }
    }

    let unexpected: Vec<u32> =
        results.iter().filter(|o| !o.passed && !EXPECTED_FAILURES.contains(&o.id)).map(|o| o.id).collect();
    let passed = results.iter().filter(|o| o.passed).count();
    println!("acceptance: {passed}/{} passed; unexpected failures: {unexpected:?}", results.len());
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
