//! Dynamic classifier chains of boosted multi-label models.
//!
//! Round `k` trains a full multi-label booster on `[X, p]`, where `p` holds
//! the probabilities propagated in earlier rounds (unknown elsewhere). Each
//! instance then decides one more label: the most probable undecided label
//! if any reaches 0.5, otherwise the least probable one. Labels decided
//! earlier may become more certain but never change side. Cells of decided
//! labels are masked out of split scoring in later rounds.
//!
//! Binary relevance and a static chain built from the same booster serve as
//! baselines.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{FeatureMatrix, LabelMatrix, UNKNOWN};
use crate::mlboost::{BoostError, BoostParams, MlBoostModel};

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("chain length {k} exceeds label count {n}")]
    TooLong { k: usize, n: usize },
    #[error("invalid permutation of {0} labels")]
    InvalidPermutation(usize),
    #[error("input has {found} columns, model expects {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Boost(#[from] BoostError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Number of rounds `K`.
    pub k: usize,
    /// Merge round maxima into undecided labels.
    pub cumulate: bool,
    /// Cumulate over decided labels too, taking the max of `p_j` and the
    /// round maxima.
    #[serde(default)]
    pub cumulate_overrides_propagated: bool,
    /// Stop prediction once every instance has taken this many consecutive
    /// negative decisions.
    #[serde(default)]
    pub early_stop: Option<usize>,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams {
            k: 1,
            cumulate: true,
            cumulate_overrides_propagated: false,
            early_stop: None,
        }
    }
}

/// Next label to decide, or `None` when all are decided. `decided[j]` marks
/// labels already propagated.
pub fn select_next_label(yhat: &[f64], decided: &[bool]) -> Option<usize> {
    let mut best_hi: Option<usize> = None;
    let mut best_lo: Option<usize> = None;
    for (j, &p) in yhat.iter().enumerate() {
        if decided[j] {
            continue;
        }
        if best_hi.is_none_or(|b| p > yhat[b]) {
            best_hi = Some(j);
        }
        if best_lo.is_none_or(|b| p < yhat[b]) {
            best_lo = Some(j);
        }
    }
    let hi = best_hi?;
    if yhat[hi] >= 0.5 {
        Some(hi)
    } else {
        best_lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Pos,
    Neg,
    Update,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Pos => "pos",
            Branch::Neg => "neg",
            Branch::Update => "update",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    pub instance: usize,
    pub label: usize,
    pub probability: f64,
    pub branch: Branch,
}

/// Per-instance chain state over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationState {
    rows: usize,
    labels: usize,
    /// Propagated probabilities, [`UNKNOWN`] where undecided.
    p: Vec<f64>,
    chosen: Vec<Vec<usize>>,
    /// Maximum over completed rounds of each round's prediction.
    round_max: Vec<f64>,
    rounds: usize,
    neg_streak: Vec<usize>,
    flips_ignored: usize,
    trace: Vec<TraceRow>,
}

impl PropagationState {
    pub fn new(rows: usize, labels: usize) -> Self {
        PropagationState {
            rows,
            labels,
            p: vec![UNKNOWN; rows * labels],
            chosen: vec![Vec::new(); rows],
            round_max: vec![f64::NEG_INFINITY; rows * labels],
            rounds: 0,
            neg_streak: vec![0; rows],
            flips_ignored: 0,
            trace: Vec::new(),
        }
    }

    pub fn p(&self, i: usize) -> &[f64] {
        &self.p[i * self.labels..(i + 1) * self.labels]
    }

    pub fn chosen(&self, i: usize) -> &[usize] {
        &self.chosen[i]
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn flips_ignored(&self) -> usize {
        self.flips_ignored
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceRow> {
        std::mem::take(&mut self.trace)
    }

    /// Row-major mask of decided cells.
    pub fn decided_mask(&self) -> Vec<bool> {
        self.p.iter().map(|v| !v.is_nan()).collect()
    }

    /// Writes `p` into the label-feature columns `q..q+N` of `aug`.
    pub fn fill_label_features(&self, aug: &mut FeatureMatrix, q: usize) {
        for i in 0..self.rows {
            aug.row_mut(i)[q..q + self.labels].copy_from_slice(self.p(i));
        }
    }

    /// Applies one round's prediction for instance `i`: refreshes decided
    /// labels whose certainty grew on the same side, then decides the next
    /// label.
    pub fn propagate(&mut self, i: usize, round: usize, yhat: &[f64]) {
        let n = self.labels;
        let base = i * n;
        for j in 0..n {
            let m = &mut self.round_max[base + j];
            *m = m.max(yhat[j]);
        }
        let decided: Vec<bool> = self.p(i).iter().map(|v| !v.is_nan()).collect();
        for j in 0..n {
            if !decided[j] {
                continue;
            }
            let old = self.p[base + j];
            if (old >= 0.5) != (yhat[j] >= 0.5) {
                self.flips_ignored += 1;
                continue;
            }
            if (yhat[j] - 0.5).abs() > (old - 0.5).abs() {
                self.p[base + j] = yhat[j];
                self.trace.push(TraceRow {
                    round,
                    instance: i,
                    label: j,
                    probability: yhat[j],
                    branch: Branch::Update,
                });
            }
        }
        if let Some(j) = select_next_label(yhat, &decided) {
            self.p[base + j] = yhat[j];
            self.chosen[i].push(j);
            let pos = yhat[j] >= 0.5;
            self.neg_streak[i] = if pos { 0 } else { self.neg_streak[i] + 1 };
            self.trace.push(TraceRow {
                round,
                instance: i,
                label: j,
                probability: yhat[j],
                branch: if pos { Branch::Pos } else { Branch::Neg },
            });
        }
    }

    /// Applies a round's predictions (row-major `M × N`) to every instance.
    pub fn step(&mut self, yhat: &[f64]) {
        self.rounds += 1;
        let round = self.rounds;
        for i in 0..self.rows {
            let row = yhat[i * self.labels..(i + 1) * self.labels].to_vec();
            self.propagate(i, round, &row);
        }
    }

    /// Labels of the standard chain: propagated probability `>= 0.5`.
    pub fn standard_labels(&self) -> LabelMatrix {
        let data = self.p.iter().map(|&v| (v >= 0.5) as u8).collect();
        LabelMatrix::from_vec(self.rows, self.labels, data)
    }

    /// Cumulated scores: the propagated probability where decided, the
    /// maximum round prediction otherwise. With `overrides`, decided labels
    /// also take the maximum of both.
    pub fn cumulated_scores(&self, overrides: bool) -> Vec<f64> {
        self.p
            .iter()
            .zip(&self.round_max)
            .map(|(&p, &m)| {
                if p.is_nan() {
                    if m.is_finite() {
                        m
                    } else {
                        UNKNOWN
                    }
                } else if overrides {
                    p.max(m)
                } else {
                    p
                }
            })
            .collect()
    }

    pub fn cumulated_labels(&self, overrides: bool) -> LabelMatrix {
        let data = self
            .cumulated_scores(overrides)
            .iter()
            .map(|&v| (v >= 0.5) as u8)
            .collect();
        LabelMatrix::from_vec(self.rows, self.labels, data)
    }

    fn all_negative_streak(&self, s: usize) -> bool {
        self.rows > 0 && self.neg_streak.iter().all(|&c| c >= s)
    }
}

/// Counts cells whose propagated probability changed side after its first
/// assignment, judged from a trace alone.
pub fn audit_sign_flips(trace: &[TraceRow], rows: usize, labels: usize) -> usize {
    let mut first: Vec<Option<bool>> = vec![None; rows * labels];
    let mut flips = 0;
    for r in trace {
        let side = r.probability >= 0.5;
        let cell = &mut first[r.instance * labels + r.label];
        match cell {
            None => *cell = Some(side),
            Some(s) if *s != side => flips += 1,
            _ => {}
        }
    }
    flips
}

/// Chain trace as CSV with header `round,instance,label,probability,branch`.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["round", "instance", "label", "probability", "branch"])
        .unwrap();
    for r in rows {
        w.write_record([
            r.round.to_string(),
            r.instance.to_string(),
            r.label.to_string(),
            r.probability.to_string(),
            r.branch.as_str().to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    rounds: Vec<MlBoostModel>,
    params: ChainParams,
    n_features: usize,
    n_labels: usize,
}

/// Output of a chain run over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPrediction {
    pub k: usize,
    pub standard: LabelMatrix,
    pub cumulated: LabelMatrix,
}

impl ChainPrediction {
    /// Labels of the configured variant.
    pub fn labels(&self, cumulate: bool) -> &LabelMatrix {
        if cumulate {
            &self.cumulated
        } else {
            &self.standard
        }
    }
}

/// Training-side diagnostics of a chain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainTrainInfo {
    pub flips_ignored: usize,
    pub trace: Vec<TraceRow>,
    /// Mean training loss of each round's final tree.
    pub final_losses: Vec<f64>,
}

fn augmented(x: &FeatureMatrix, n: usize) -> FeatureMatrix {
    x.widened(n)
}

impl ChainModel {
    /// Trains `params.k` rounds on original features `x` and labels `y`.
    pub fn train(
        x: &FeatureMatrix,
        y: &LabelMatrix,
        params: &ChainParams,
        boost: &BoostParams,
    ) -> Result<(Self, ChainTrainInfo), ChainError> {
        let n = y.cols();
        if params.k > n {
            return Err(ChainError::TooLong { k: params.k, n });
        }
        boost.validate()?;
        let q = x.cols();
        let mut aug = augmented(x, n);
        let mut state = PropagationState::new(x.rows(), n);
        let mut rounds = Vec::with_capacity(params.k);
        let mut info = ChainTrainInfo::default();
        for _ in 0..params.k {
            state.fill_label_features(&mut aug, q);
            let mask = state.decided_mask();
            let (model, prob) = MlBoostModel::train_with_scores(&aug, y, Some(&mask), boost)?;
            info.final_losses
                .push(model.loss_log().last().copied().unwrap_or(f64::NAN));
            state.step(&prob);
            rounds.push(model);
        }
        info.flips_ignored = state.flips_ignored();
        info.trace = state.take_trace();
        Ok((
            ChainModel {
                rounds,
                params: params.clone(),
                n_features: q,
                n_labels: n,
            },
            info,
        ))
    }

    pub fn rounds(&self) -> &[MlBoostModel] {
        &self.rounds
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn k(&self) -> usize {
        self.rounds.len()
    }

    /// The same chain cut after `k` rounds.
    pub fn truncated(&self, k: usize) -> ChainModel {
        ChainModel {
            rounds: self.rounds[..k.min(self.rounds.len())].to_vec(),
            params: ChainParams {
                k: k.min(self.rounds.len()),
                ..self.params.clone()
            },
            n_features: self.n_features,
            n_labels: self.n_labels,
        }
    }

    /// Runs the chain on `x`, returning one prediction per chain length
    /// `0..=K` and the final state (with trace).
    pub fn predict_sweep(
        &self,
        x: &FeatureMatrix,
    ) -> Result<(Vec<ChainPrediction>, PropagationState), ChainError> {
        if x.cols() != self.n_features {
            return Err(ChainError::WidthMismatch {
                expected: self.n_features,
                found: x.cols(),
            });
        }
        let n = self.n_labels;
        let overrides = self.params.cumulate_overrides_propagated;
        let mut aug = augmented(x, n);
        let mut state = PropagationState::new(x.rows(), n);
        let snapshot = |state: &PropagationState, k: usize| ChainPrediction {
            k,
            standard: state.standard_labels(),
            cumulated: state.cumulated_labels(overrides),
        };
        let mut out = vec![snapshot(&state, 0)];
        for (k, model) in self.rounds.iter().enumerate() {
            if let Some(s) = self.params.early_stop {
                if state.all_negative_streak(s) {
                    break;
                }
            }
            state.fill_label_features(&mut aug, self.n_features);
            let prob = model.predict_matrix(&aug)?;
            state.step(&prob);
            out.push(snapshot(&state, k + 1));
        }
        Ok((out, state))
    }

    /// Predictions of the full chain.
    pub fn predict(
        &self,
        x: &FeatureMatrix,
    ) -> Result<(ChainPrediction, PropagationState), ChainError> {
        let (mut sweep, state) = self.predict_sweep(x)?;
        Ok((sweep.pop().expect("at least the empty prediction"), state))
    }

    /// Labels of the configured variant (standard or cumulated).
    pub fn predict_labels(&self, x: &FeatureMatrix) -> Result<LabelMatrix, ChainError> {
        let (p, _) = self.predict(x)?;
        Ok(p.labels(self.params.cumulate).clone())
    }
}

fn label_column(y: &LabelMatrix, j: usize) -> LabelMatrix {
    LabelMatrix::from_vec(y.rows(), 1, (0..y.rows()).map(|i| y.get(i, j)).collect())
}

/// One independent single-label booster per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryRelevance {
    models: Vec<MlBoostModel>,
    n_features: usize,
}

impl BinaryRelevance {
    pub fn train(
        x: &FeatureMatrix,
        y: &LabelMatrix,
        boost: &BoostParams,
    ) -> Result<Self, ChainError> {
        let models = (0..y.cols())
            .map(|j| MlBoostModel::train(x, &label_column(y, j), None, boost))
            .collect::<Result<_, _>>()?;
        Ok(BinaryRelevance {
            models,
            n_features: x.cols(),
        })
    }

    pub fn models(&self) -> &[MlBoostModel] {
        &self.models
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>, ChainError> {
        let n = self.models.len();
        let mut out = vec![0.0; x.rows() * n];
        for (j, m) in self.models.iter().enumerate() {
            let p = m.predict_matrix(x)?;
            for i in 0..x.rows() {
                out[i * n + j] = p[i];
            }
        }
        Ok(out)
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<LabelMatrix, ChainError> {
        let p = self.predict_proba(x)?;
        Ok(LabelMatrix::from_vec(
            x.rows(),
            self.models.len(),
            p.iter().map(|&v| (v >= 0.5) as u8).collect(),
        ))
    }
}

/// Classifier chain along a fixed order; model `k` sees the features and the
/// labels of positions `< k` (true labels in training, predictions after).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticChain {
    models: Vec<MlBoostModel>,
    order: Vec<usize>,
    n_features: usize,
}

impl StaticChain {
    pub fn train(
        x: &FeatureMatrix,
        y: &LabelMatrix,
        order: &[usize],
        boost: &BoostParams,
    ) -> Result<Self, ChainError> {
        let n = y.cols();
        check_permutation(order, n)?;
        let q = x.cols();
        let mut aug = augmented(x, n);
        let mut models = Vec::with_capacity(n);
        for &j in order {
            models.push(MlBoostModel::train(&aug, &label_column(y, j), None, boost)?);
            for i in 0..x.rows() {
                aug.set(i, q + j, y.get(i, j) as f64);
            }
        }
        Ok(StaticChain {
            models,
            order: order.to_vec(),
            n_features: q,
        })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Models in chain order.
    pub fn models(&self) -> &[MlBoostModel] {
        &self.models
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<LabelMatrix, ChainError> {
        let n = self.order.len();
        if x.cols() != self.n_features {
            return Err(ChainError::WidthMismatch {
                expected: self.n_features,
                found: x.cols(),
            });
        }
        let q = self.n_features;
        let mut aug = augmented(x, n);
        let mut out = LabelMatrix::zeros(x.rows(), n);
        for (m, &j) in self.models.iter().zip(&self.order) {
            let p = m.predict_matrix(&aug)?;
            for i in 0..x.rows() {
                let b = (p[i] >= 0.5) as u8;
                out.set(i, j, b);
                aug.set(i, q + j, b as f64);
            }
        }
        Ok(out)
    }
}

pub fn check_permutation(order: &[usize], n: usize) -> Result<(), ChainError> {
    crate::rdt::check_permutation(order, n).map_err(|_| ChainError::InvalidPermutation(n))
}

/// How a static chain order is obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StaticOrder {
    Random(u64),
    Given(Vec<usize>),
    RareFirst,
    FrequentFirst,
}

impl StaticOrder {
    /// Resolves the order against training labels; frequency ties go to the
    /// lower index.
    pub fn resolve(&self, y: &LabelMatrix) -> Result<Vec<usize>, ChainError> {
        let n = y.cols();
        let order = match self {
            StaticOrder::Random(seed) => {
                let mut v: Vec<usize> = (0..n).collect();
                v.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
                v
            }
            StaticOrder::Given(v) => v.clone(),
            StaticOrder::RareFirst | StaticOrder::FrequentFirst => {
                let f = y.label_frequencies();
                let mut v: Vec<usize> = (0..n).collect();
                let rare = matches!(self, StaticOrder::RareFirst);
                v.sort_by(|&a, &b| {
                    let c = if rare {
                        f[a].cmp(&f[b])
                    } else {
                        f[b].cmp(&f[a])
                    };
                    c.then(a.cmp(&b))
                });
                v
            }
        };
        check_permutation(&order, n)?;
        Ok(order)
    }
}

impl std::str::FromStr for StaticOrder {
    type Err = String;

    /// `random:<seed>`, `given:2,0,1`, `rare-first` or `frequent-first`.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "rare-first" {
            return Ok(StaticOrder::RareFirst);
        }
        if s == "frequent-first" {
            return Ok(StaticOrder::FrequentFirst);
        }
        if let Some(seed) = s.strip_prefix("random:") {
            return seed
                .parse()
                .map(StaticOrder::Random)
                .map_err(|_| format!("bad seed in order '{s}'"));
        }
        if s == "random" {
            return Ok(StaticOrder::Random(0));
        }
        if let Some(list) = s.strip_prefix("given:") {
            return list
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map(StaticOrder::Given)
                .map_err(|_| format!("bad label list in order '{s}'"));
        }
        Err(format!("unknown order '{s}'"))
    }
}
