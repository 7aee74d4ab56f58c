//! Acceptance checks. Each test prints one `[PASS]` or `[FAIL]` line to
//! stderr (uncaptured) and then asserts.
//!
//! Datasets come from `$MLDCC_DATA_DIR/<name>-train.arff`,
//! `<name>-test.arff` and `<name>.xml` when present, otherwise from the
//! synthetic presets with a fixed seed.

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use mldcc::dataset::{load_arff, LabelSpec, MultiLabelDataset, UNKNOWN};
use mldcc::metrics::evaluate;
use mldcc::mlboost::{
    brute_force_split, cross_entropy, grad_hess, grow_tree, leaf_score, sigmoid, split_gain,
    BoostParams, GradHess, SplitGain, GAIN_TOLERANCE,
};
use mldcc::rdt::{RdtEnsemble, RdtParams};
use mldcc::synth::{generate, SynthSpec};
use mldcc::xdcc::{audit_sign_flips, Branch, ChainModel, ChainParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

const DATA_SEED: u64 = 1;

fn report(n: usize, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {n}: {detail}");
    assert!(pass, "criterion {n}: {detail}");
}

fn real_dataset(name: &str) -> Option<(MultiLabelDataset, MultiLabelDataset)> {
    let dir = PathBuf::from(std::env::var_os("MLDCC_DATA_DIR")?);
    let xml = LabelSpec::Xml(dir.join(format!("{name}.xml")));
    let tr = load_arff(dir.join(format!("{name}-train.arff")), &xml).ok()?;
    let te = load_arff(dir.join(format!("{name}-test.arff")), &xml).ok()?;
    Some((tr, te))
}

/// Train and test split; `variant` picks another surrogate draw and is
/// ignored for real data.
fn dataset(name: &str, variant: u64) -> (MultiLabelDataset, MultiLabelDataset) {
    real_dataset(name)
        .unwrap_or_else(|| generate(&SynthSpec::preset(name).unwrap(), DATA_SEED + variant))
}

fn is_real(name: &str) -> bool {
    real_dataset(name).is_some()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn default_rdt(seed: u64) -> RdtParams {
    RdtParams {
        tree_count: 300,
        max_depth: 30,
        min_leaf_size: 5,
        label_test_fraction: 0.3,
        activation: 1.0,
        seed,
    }
}

fn subset_accuracy(te: &MultiLabelDataset, pred: &[Vec<u8>]) -> f64 {
    let hits = pred
        .iter()
        .enumerate()
        .filter(|(i, p)| te.labels().row(*i) == p.as_slice())
        .count();
    hits as f64 / pred.len() as f64
}

#[test]
fn criterion_01_gain_example_values() {
    let t = Instant::now();
    let (g, _) = grad_hess(&[1, 1, 0, 0], &[0.8, 0.2, 0.9, 0.1]);
    let expect = [1.50, 0.81, 0.0, 0.8, 2.0, 0.9];
    let got: Vec<f64> = SplitGain::ALL
        .iter()
        .map(|&k| leaf_score(k, &g, &[0.0; 4], 1.0))
        .collect();
    let err = got
        .iter()
        .zip(expect)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let el = t.elapsed();
    report(
        1,
        err <= 1e-12 && el < Duration::from_secs(1),
        format!("scores {got:?}, max error {err:.1e}, {:.3}s", secs(el)),
    );
}

#[test]
fn criterion_02_dynamic_beats_static() {
    let t = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for name in ["emotions", "scene"] {
        let (tr, te) = dataset(name, 0);
        let (tr, te) = (tr.augment().unwrap(), te.augment().unwrap());
        let n = tr.n_labels();
        let mut gaps = Vec::new();
        for seed in 0..5u64 {
            let ens = RdtEnsemble::build(&tr, &default_rdt(seed)).unwrap();
            let dcc: Vec<Vec<u8>> = (0..te.n_instances())
                .map(|i| ens.predict_dynamic_chain(te.row(i)).unwrap().labels)
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut static_sa = 0.0;
            for _ in 0..10 {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                let pred: Vec<Vec<u8>> = (0..te.n_instances())
                    .map(|i| ens.predict_static_chain(te.row(i), &order).unwrap().labels)
                    .collect();
                static_sa += subset_accuracy(&te, &pred) / 10.0;
            }
            gaps.push((subset_accuracy(&te, &dcc), static_sa));
        }
        let dcc = gaps.iter().map(|g| g.0).sum::<f64>() / 5.0;
        let stat = gaps.iter().map(|g| g.1).sum::<f64>() / 5.0;
        pass &= dcc - stat >= 0.05;
        details.push(format!(
            "{name}{} SA dcc {dcc:.4} static {stat:.4} gap {:.4}",
            if is_real(name) { "" } else { " (synthetic)" },
            dcc - stat
        ));
    }
    let el = t.elapsed();
    pass &= el < Duration::from_secs(600);
    report(2, pass, format!("{}; {:.1}s", details.join("; "), secs(el)));
}

#[test]
fn criterion_03_inactive_label_tests() {
    let (tr, _) = dataset("emotions", 0);
    let tr = tr.augment().unwrap();
    let (q, n) = (tr.n_features(), tr.n_labels());
    let ens = RdtEnsemble::build(
        &tr,
        &RdtParams {
            tree_count: 100,
            ..default_rdt(7)
        },
    )
    .unwrap()
    .with_activation(0.0, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut static_diff, mut dynamic_diff) = (0, 0);
    let trials = 1000;
    for _ in 0..trials {
        // Each column copies the value of a random training row.
        let mut x: Vec<f64> = (0..q)
            .map(|c| tr.row(rng.gen_range(0..tr.n_instances()))[c])
            .collect();
        x.extend(std::iter::repeat_n(UNKNOWN, n));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let stat = ens.predict_static_chain(&x, &order).unwrap().labels;
        let dynamic = ens.predict_dynamic_chain(&x).unwrap().labels;
        static_diff += stat
            .iter()
            .zip(ens.predict_threshold(&x).unwrap())
            .filter(|(a, b)| **a != *b)
            .count();
        dynamic_diff += dynamic
            .iter()
            .zip(ens.predict_multilabel(&x).unwrap())
            .filter(|(a, b)| **a != *b)
            .count();
    }
    report(
        3,
        static_diff == 0 && dynamic_diff == 0,
        format!(
            "{trials} instances: static vs thresholded marginals {static_diff} differing decisions, \
             dynamic vs ML-RDT {dynamic_diff}"
        ),
    );
}

#[test]
fn criterion_04_leaf_sets_shrink() {
    let (tr, te) = dataset("flags", 0);
    let (tr, te) = (tr.augment().unwrap(), te.augment().unwrap());
    let q = tr.n_features();
    let ens = RdtEnsemble::build(&tr, &default_rdt(1)).unwrap();
    let mut violations = 0;
    let mut checks = 0;
    for d in [&tr, &te] {
        for i in 0..d.n_instances() {
            let out = ens.predict_dynamic_chain(d.row(i)).unwrap();
            let mut x = d.row(i).to_vec();
            x[q..].fill(UNKNOWN);
            let mut prev: Vec<Vec<usize>> = ens.trees().iter().map(|t| t.route(&x)).collect();
            for step in &out.steps {
                x[q + step.label] = step.decision as f64;
                for (t, tree) in ens.trees().iter().enumerate() {
                    let cur = tree.route(&x);
                    violations += !cur.iter().all(|v| prev[t].binary_search(v).is_ok()) as usize;
                    checks += 1;
                    prev[t] = cur;
                }
            }
        }
    }
    report(
        4,
        violations == 0,
        format!("{checks} tree steps, {violations} violations"),
    );
}

#[test]
fn criterion_05_exact_cardinality() {
    let (tr, te) = dataset("emotions", 0);
    let (tr, te) = (tr.augment().unwrap(), te.augment().unwrap());
    let n = tr.n_labels();
    let ens = RdtEnsemble::build(&tr, &default_rdt(1)).unwrap();
    let (mut constant, mut mismatched, mut deficits) = (0, 0, 0);
    for i in 0..te.n_instances() {
        let out = ens.predict_dynamic_chain(te.row(i)).unwrap();
        let total: usize = out.labels.iter().map(|&b| b as usize).sum();
        let r: Vec<usize> = out.steps.iter().map(|s| s.rounded_cardinality).collect();
        if r.iter().all(|&v| v == r[0]) {
            constant += 1;
            mismatched += (total != r[0]) as usize;
        }
        // Once the current estimate is reachable it must stay reachable.
        let mut pos = 0;
        for s in &out.steps {
            pos += s.decision as usize;
            let reachable = s.positives_before + (n - s.iteration + 1) >= s.rounded_cardinality;
            if reachable && pos + (n - s.iteration) < s.rounded_cardinality {
                deficits += 1;
            }
        }
    }
    report(
        5,
        constant > 0 && mismatched == 0 && deficits == 0,
        format!(
            "{constant}/{} instances with constant R, {mismatched} miscounts, {deficits} deficits",
            te.n_instances()
        ),
    );
}

#[test]
fn criterion_06_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let step = 1e-5;
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let y = rng.gen_range(0..2u8);
        let raw = rng.gen_range(-5.0..5.0);
        let (g, h) = grad_hess(&[y], &[sigmoid(raw)]);
        let fd_g = (cross_entropy(y, raw + step) - cross_entropy(y, raw - step)) / (2.0 * step);
        let gp = grad_hess(&[y], &[sigmoid(raw + step)]).0[0];
        let gm = grad_hess(&[y], &[sigmoid(raw - step)]).0[0];
        let fd_h = (gp - gm) / (2.0 * step);
        worst_g = worst_g.max(((fd_g - g[0]) / g[0]).abs());
        worst_h = worst_h.max(((fd_h - h[0]) / h[0]).abs());
    }
    report(
        6,
        worst_g <= 1e-5 && worst_h <= 1e-4,
        format!("100 points, max relative error g {worst_g:.2e}, h {worst_h:.2e}"),
    );
}

#[test]
fn criterion_07_split_oracle() {
    let mut mismatches = 0;
    let mut splits = 0;
    for seed in 0..50 {
        let (x, y, prob, mask) = common::micro(seed);
        let gh = GradHess::compute(&y, &prob, Some(&mask));
        let (gs, hs) = gh.scoring();
        let rows: Vec<usize> = (0..x.rows()).collect();
        for kind in SplitGain::ALL {
            let p = BoostParams {
                max_depth: 1,
                split_gain: kind,
                ..BoostParams::default()
            };
            let oracle =
                brute_force_split(&x, &rows, &gs, &hs, y.cols(), kind, p.l2_reg, p.complexity)
                    .filter(|o| o.gain > p.min_split_gain + GAIN_TOLERANCE);
            let root = grow_tree(&x, &gh, &p).root_split();
            let same = match (&oracle, &root) {
                (Some(o), Some(t)) => o.same_split(t),
                (None, None) => true,
                _ => false,
            };
            splits += root.is_some() as usize;
            mismatches += !same as usize;
        }
    }
    report(
        7,
        mismatches == 0,
        format!("300 cases ({splits} with a split), {mismatches} mismatches"),
    );
}

#[test]
fn criterion_08_gain_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = f64::INFINITY;
    for _ in 0..100_000 {
        let n = rng.gen_range(1..=4);
        let rows = rng.gen_range(2..=30);
        let (mut gl, mut hl, mut gr, mut hr) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for k in 0..rows {
            let (g, h) = grad_hess(&[rng.gen_range(0..2u8)], &[rng.gen_range(0.01..0.99)]);
            let j = k % n;
            if rng.gen_bool(0.5) {
                gl[j] += g[0];
                hl[j] += h[0];
            } else {
                gr[j] += g[0];
                hr[j] += h[0];
            }
        }
        for kind in [SplitGain::SumGain, SplitGain::MaxGain] {
            worst = worst.min(split_gain(kind, &gl, &hl, &gr, &hr, 0.0, 0.0));
        }
    }
    report(
        8,
        worst >= -1e-12,
        format!("100000 partitions at zero regularization, min gain {worst:.3e}"),
    );
}

struct ChainRun {
    /// Cumulated and standard F1 per chain length 0..=N.
    cum_f1: Vec<f64>,
    std_f1: Vec<f64>,
    /// Share of final positives decided by round `early_round`.
    early_share: f64,
    flips_applied: usize,
    flips_ignored: usize,
    seconds: f64,
}

fn xdcc_boost() -> BoostParams {
    BoostParams {
        rounds: 20,
        max_depth: 4,
        learning_rate: 0.3,
        split_gain: SplitGain::MaxGain,
        ..BoostParams::default()
    }
}

fn run_chain(name: &str, variant: u64, early_round: usize) -> ChainRun {
    let t = Instant::now();
    let (tr, te) = dataset(name, variant);
    let n = tr.n_labels();
    let (model, info) = ChainModel::train(
        tr.features(),
        tr.labels(),
        &ChainParams {
            k: n,
            ..ChainParams::default()
        },
        &xdcc_boost(),
    )
    .unwrap();
    let (sweep, state) = model.predict_sweep(te.features()).unwrap();
    let f1 = |y| evaluate(te.labels(), y).unwrap().example_f1;
    let last = sweep.last().unwrap();
    let (mut early, mut total) = (0, 0);
    for r in state.trace() {
        if r.branch == Branch::Pos && last.standard.get(r.instance, r.label) == 1 {
            total += 1;
            early += (r.round <= early_round) as usize;
        }
    }
    ChainRun {
        cum_f1: sweep.iter().map(|p| f1(&p.cumulated)).collect(),
        std_f1: sweep.iter().map(|p| f1(&p.standard)).collect(),
        early_share: early as f64 / total.max(1) as f64,
        flips_applied: audit_sign_flips(&info.trace, tr.n_instances(), n)
            + audit_sign_flips(state.trace(), te.n_instances(), n),
        flips_ignored: info.flips_ignored + state.flips_ignored(),
        seconds: secs(t.elapsed()),
    }
}

/// Three runs per dataset. Boosting has no random component, so with real
/// data the runs coincide; surrogates use three different draws.
fn chain_runs(name: &'static str) -> &'static [ChainRun] {
    static YEAST: OnceLock<Vec<ChainRun>> = OnceLock::new();
    static EMOTIONS: OnceLock<Vec<ChainRun>> = OnceLock::new();
    let cell = match name {
        "yeast" => &YEAST,
        "emotions" => &EMOTIONS,
        _ => unreachable!(),
    };
    cell.get_or_init(|| {
        let variants = if is_real(name) { 1 } else { 3 };
        (0..variants).map(|v| run_chain(name, v, 5)).collect()
    })
}

#[test]
fn criterion_09_chain_length_shape() {
    let runs = chain_runs("yeast");
    let k = runs.len() as f64;
    let mean = |f: &dyn Fn(&ChainRun) -> f64| runs.iter().map(f).sum::<f64>() / k;
    let f1_1 = mean(&|r| r.cum_f1[1]);
    let f1_6 = mean(&|r| r.cum_f1[6]);
    let f1_14 = mean(&|r| *r.cum_f1.last().unwrap());
    let early = mean(&|r| r.early_share);
    let seconds: f64 = runs.iter().map(|r| r.seconds).sum();
    let pass =
        f1_6 - f1_1 >= 0.0 && (f1_6 - f1_14).abs() <= 0.05 && early >= 0.7 && seconds < 1200.0;
    report(
        9,
        pass,
        format!(
            "yeast{} over {} runs: cum F1 K=1 {f1_1:.4}, K=6 {f1_6:.4}, K=N {f1_14:.4}; \
             {:.1}% of positives decided by round 5; {seconds:.1}s",
            if is_real("yeast") { "" } else { " (synthetic)" },
            runs.len(),
            100.0 * early
        ),
    );
}

#[test]
fn criterion_10_cumulate_not_worse() {
    let mut details = Vec::new();
    let mut pass = true;
    for name in ["yeast", "emotions"] {
        for (v, r) in chain_runs(name).iter().enumerate() {
            let (c, s) = (*r.cum_f1.last().unwrap(), *r.std_f1.last().unwrap());
            pass &= c >= s;
            details.push(format!("{name}#{v} cum {c:.4} std {s:.4}"));
        }
    }
    report(10, pass, format!("F1 at K=N: {}", details.join(", ")));
}

#[test]
fn criterion_11_no_revocation() {
    let mut applied = 0;
    let mut ignored = 0;
    for name in ["yeast", "emotions"] {
        for r in chain_runs(name) {
            applied += r.flips_applied;
            ignored += r.flips_ignored;
        }
    }
    report(
        11,
        applied == 0,
        format!(
            "full chains on yeast and emotions: {applied} applied sign flips, {ignored} ignored"
        ),
    );
}

#[test]
fn criterion_12_determinism() {
    let (tr, te) = dataset("emotions", 0);
    let (atr, ate) = (tr.augment().unwrap(), te.augment().unwrap());
    let rdt = || {
        let p = RdtParams {
            tree_count: 50,
            activation: 0.5,
            ..default_rdt(12)
        };
        let ens = RdtEnsemble::build(&atr, &p)
            .unwrap()
            .with_activation(p.activation, p.seed);
        (0..ate.n_instances())
            .map(|i| {
                let e = ens.estimate(ate.row(i)).unwrap();
                let mut bits: Vec<u64> = e.marginals.iter().map(|m| m.to_bits()).collect();
                bits.extend(
                    ens.predict_dynamic_chain(ate.row(i))
                        .unwrap()
                        .labels
                        .iter()
                        .map(|&b| b as u64),
                );
                bits
            })
            .collect::<Vec<_>>()
    };
    let chain = || {
        let bp = BoostParams {
            rounds: 10,
            ..xdcc_boost()
        };
        let (m, _) = ChainModel::train(
            tr.features(),
            tr.labels(),
            &ChainParams {
                k: 3,
                ..ChainParams::default()
            },
            &bp,
        )
        .unwrap();
        let pred = m.predict(te.features()).unwrap().0;
        (m, pred)
    };
    let same_rdt = rdt() == rdt();
    let same_chain = chain() == chain();
    report(
        12,
        same_rdt && same_chain,
        format!(
            "repeated RDT run identical: {same_rdt}; repeated XDCC run identical: {same_chain}"
        ),
    );
}
