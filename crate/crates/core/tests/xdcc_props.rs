use mldcc::dataset::{FeatureMatrix, LabelMatrix, MultiLabelDataset};
use mldcc::metrics::{evaluate, hamming_accuracy};
use mldcc::mlboost::{BoostParams, MlBoostModel, SplitGain};
use mldcc::synth::{generate, SynthSpec};
use mldcc::xdcc::{
    audit_sign_flips, select_next_label, BinaryRelevance, Branch, ChainModel, ChainParams,
    PropagationState, StaticChain,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flags() -> (MultiLabelDataset, MultiLabelDataset) {
    generate(&SynthSpec::preset("flags").unwrap(), 1)
}

fn boost() -> BoostParams {
    BoostParams {
        rounds: 8,
        max_depth: 3,
        ..BoostParams::default()
    }
}

fn chain(k: usize) -> ChainParams {
    ChainParams {
        k,
        ..ChainParams::default()
    }
}

fn positives(y: &LabelMatrix, i: usize) -> usize {
    y.row(i).iter().map(|&b| b as usize).sum()
}

#[test]
fn single_round_cumulated_equals_plain_booster() {
    let (tr, te) = flags();
    let (model, _) = ChainModel::train(tr.features(), tr.labels(), &chain(1), &boost()).unwrap();
    let plain = MlBoostModel::train(tr.features(), tr.labels(), None, &boost()).unwrap();
    let p = plain.predict_matrix(te.features()).unwrap();
    let expect = LabelMatrix::from_vec(
        te.n_instances(),
        te.n_labels(),
        p.iter().map(|&v| (v >= 0.5) as u8).collect(),
    );
    let (pred, _) = model.predict(te.features()).unwrap();
    assert_eq!(pred.cumulated, expect);
    for i in 0..te.n_instances() {
        assert!(positives(&pred.standard, i) <= 1);
    }
}

#[test]
fn one_label_baselines_coincide() {
    let (tr, te) = flags();
    let y1 = LabelMatrix::from_vec(
        tr.n_instances(),
        1,
        (0..tr.n_instances())
            .map(|i| tr.labels().get(i, 2))
            .collect(),
    );
    let br = BinaryRelevance::train(tr.features(), &y1, &boost())
        .unwrap()
        .predict(te.features())
        .unwrap();
    let cc = StaticChain::train(tr.features(), &y1, &[0], &boost())
        .unwrap()
        .predict(te.features())
        .unwrap();
    let (xd, _) = ChainModel::train(tr.features(), &y1, &chain(1), &boost()).unwrap();
    let xd = xd.predict(te.features()).unwrap().0;
    assert_eq!(br, cc);
    assert_eq!(br, xd.cumulated);
    assert_eq!(br, xd.standard);
}

#[test]
fn full_chain_never_revokes() {
    let (tr, te) = flags();
    let n = tr.n_labels();
    let (model, info) = ChainModel::train(tr.features(), tr.labels(), &chain(n), &boost()).unwrap();
    assert_eq!(audit_sign_flips(&info.trace, tr.n_instances(), n), 0);
    assert_eq!(info.final_losses.len(), n);
    let (_, state) = model.predict(te.features()).unwrap();
    assert_eq!(audit_sign_flips(state.trace(), te.n_instances(), n), 0);
    for i in 0..te.n_instances() {
        let mut c = state.chosen(i).to_vec();
        c.sort_unstable();
        assert_eq!(c, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn empty_chain_predicts_nothing() {
    let (tr, te) = flags();
    let (model, info) = ChainModel::train(tr.features(), tr.labels(), &chain(0), &boost()).unwrap();
    assert!(info.trace.is_empty());
    let (pred, _) = model.predict(te.features()).unwrap();
    let zeros = LabelMatrix::zeros(te.n_instances(), te.n_labels());
    assert_eq!(pred.standard, zeros);
    assert_eq!(pred.cumulated, zeros);
}

#[test]
fn truncation_equals_shorter_training() {
    let (tr, te) = flags();
    let (long, _) = ChainModel::train(tr.features(), tr.labels(), &chain(4), &boost()).unwrap();
    let (short, _) = ChainModel::train(tr.features(), tr.labels(), &chain(2), &boost()).unwrap();
    assert_eq!(long.truncated(2), short);
    let (sweep, _) = long.predict_sweep(te.features()).unwrap();
    assert_eq!(sweep.len(), 5);
    assert_eq!(sweep[2], short.predict(te.features()).unwrap().0);
}

#[test]
fn training_and_prediction_are_deterministic() {
    let (tr, te) = flags();
    let (a, ia) = ChainModel::train(tr.features(), tr.labels(), &chain(3), &boost()).unwrap();
    let (b, ib) = ChainModel::train(tr.features(), tr.labels(), &chain(3), &boost()).unwrap();
    assert_eq!(a, b);
    assert_eq!(ia, ib);
    assert_eq!(
        a.predict(te.features()).unwrap().0,
        b.predict(te.features()).unwrap().0
    );
}

#[test]
fn chain_mask_hides_propagated_signal() {
    // Label 0 is the only learnable label and label 1 is constant. Round 1
    // decides label 0 everywhere (exact probability ties go to the lower
    // index), so round 2 sees no usable gradient and grows bare leaves.
    let m = 60;
    let x = FeatureMatrix::new(m, 1, (0..m).map(|i| i as f64).collect());
    let y = LabelMatrix::from_vec(m, 2, (0..m).flat_map(|i| [(i >= 30) as u8, 0]).collect());
    let p = BoostParams {
        l2_reg: 0.0,
        rounds: 3,
        split_gain: SplitGain::SumGain,
        ..BoostParams::default()
    };
    let (model, info) = ChainModel::train(&x, &y, &chain(2), &p).unwrap();
    let first: Vec<usize> = info
        .trace
        .iter()
        .filter(|r| r.round == 1)
        .map(|r| r.label)
        .collect();
    assert_eq!(first.len(), m);
    assert!(
        first.iter().all(|&j| j == 0),
        "round 1 decides label 0 everywhere"
    );
    // Split candidates in round 2 could only come from the masked label 0
    // (directly or via its label feature).
    for t in model.rounds()[1].trees() {
        assert_eq!(t.nodes().len(), 1);
    }
    assert!(model.rounds()[0].trees()[0].nodes().len() > 1);
}

#[test]
fn static_chain_follows_first_label() {
    // All labels equal a hidden bit; each label's own feature is a noisy copy
    // with growing noise. Along identity order the chain repeats label 0.
    let (m, n) = (600, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..m {
        let z = rng.gen_bool(0.5);
        for j in 0..n {
            let flip = rng.gen_bool(0.05 + 0.1 * j as f64);
            x.push(((z != flip) as u8) as f64 + rng.gen_range(-0.1..0.1));
        }
        y.extend(std::iter::repeat_n(z as u8, n));
    }
    let x = FeatureMatrix::new(m, n, x);
    let y = LabelMatrix::from_vec(m, n, y);
    let (tr, te): (Vec<usize>, Vec<usize>) = (0..m).partition(|i| i % 3 != 0);
    let pick_x = |idx: &[usize]| {
        FeatureMatrix::new(
            idx.len(),
            n,
            idx.iter().flat_map(|&i| x.row(i).to_vec()).collect(),
        )
    };
    let pick_y = |idx: &[usize]| {
        LabelMatrix::from_vec(
            idx.len(),
            n,
            idx.iter().flat_map(|&i| y.row(i).to_vec()).collect(),
        )
    };
    let (xtr, ytr, xte, yte) = (pick_x(&tr), pick_y(&tr), pick_x(&te), pick_y(&te));
    let p = BoostParams {
        rounds: 10,
        max_depth: 2,
        ..BoostParams::default()
    };
    let cc = StaticChain::train(&xtr, &ytr, &[0, 1, 2, 3], &p)
        .unwrap()
        .predict(&xte)
        .unwrap();
    let first = |yhat: &LabelMatrix, j: usize| {
        (0..yte.rows())
            .filter(|&i| yhat.get(i, j) == yte.get(i, j))
            .count() as f64
            / yte.rows() as f64
    };
    let same = (0..yte.rows())
        .filter(|&i| cc.row(i).iter().all(|&b| b == cc.get(i, 0)))
        .count();
    assert!(same as f64 / yte.rows() as f64 >= 0.98, "{same}");
    let ha = evaluate(&yte, &cc).unwrap().hamming_accuracy;
    assert!((ha - first(&cc, 0)).abs() < 0.02, "{ha}");
}

#[test]
fn binary_relevance_accuracy_is_label_mean() {
    let (tr, te) = flags();
    let br = BinaryRelevance::train(tr.features(), tr.labels(), &boost()).unwrap();
    let pred = br.predict(te.features()).unwrap();
    let n = te.n_labels();
    let mut per_label = 0.0;
    for (j, m) in br.models().iter().enumerate() {
        let p = m.predict_matrix(te.features()).unwrap();
        let yhat: Vec<u8> = p.iter().map(|&v| (v >= 0.5) as u8).collect();
        let y: Vec<u8> = (0..te.n_instances())
            .map(|i| te.labels().get(i, j))
            .collect();
        per_label += hamming_accuracy(&y, &yhat).unwrap();
    }
    let ha = evaluate(te.labels(), &pred).unwrap().hamming_accuracy;
    assert!((ha - per_label / n as f64).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagation_invariants(
        rows in 1usize..5,
        labels in 1usize..6,
        rounds in 0usize..8,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = PropagationState::new(rows, labels);
        for r in 0..rounds {
            let yhat: Vec<f64> = (0..rows * labels).map(|_| rng.gen_range(0.0..1.0)).collect();
            let before: Vec<Vec<bool>> = (0..rows)
                .map(|i| state.p(i).iter().map(|v| !v.is_nan()).collect())
                .collect();
            state.step(&yhat);
            for i in 0..rows {
                let row = &yhat[i * labels..(i + 1) * labels];
                let decided = state.p(i).iter().filter(|v| !v.is_nan()).count();
                let prev = before[i].iter().filter(|&&d| d).count();
                // Coverage grows by exactly one until every label is decided.
                prop_assert_eq!(decided, (r + 1).min(labels));
                prop_assert!(decided <= prev + 1);
                prop_assert_eq!(state.chosen(i).len(), decided);
                if prev < labels {
                    let j = *state.chosen(i).last().unwrap();
                    prop_assert_eq!(Some(j), select_next_label(row, &before[i]));
                    let any_pos = (0..labels).any(|l| !before[i][l] && row[l] >= 0.5);
                    prop_assert_eq!(row[j] >= 0.5, any_pos);
                }
            }
        }
        prop_assert_eq!(audit_sign_flips(state.trace(), rows, labels), 0);
        prop_assert!(state.trace().iter().all(|t| t.round >= 1 && t.round <= rounds));
        let std = state.standard_labels();
        let cum = state.cumulated_labels(false);
        for i in 0..rows {
            prop_assert!(positives(&cum, i) >= positives(&std, i));
            prop_assert!(positives(&std, i) <= rounds);
        }
        let updates = state.trace().iter().filter(|t| t.branch == Branch::Update).count();
        let firsts = state.trace().len() - updates;
        prop_assert_eq!(firsts, rows * rounds.min(labels));
    }
}
