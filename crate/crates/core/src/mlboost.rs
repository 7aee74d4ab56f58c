//! Multi-label gradient boosted trees.
//!
//! Every tree has vector-valued leaves, one weight per label, so a single
//! additive model scores all labels at once. Trees are grown by exact greedy
//! search with second-order statistics of the binary cross-entropy. The split
//! criterion is one of six aggregations of per-label leaf scores
//! ([`SplitGain`]).
//!
//! A per-cell mask removes `(instance, label)` pairs from split scoring while
//! leaving the leaf weights untouched; the chain in [`crate::xdcc`] uses it to
//! steer later rounds away from labels that are already decided.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{FeatureMatrix, LabelMatrix};

/// Raw scores are clamped to this magnitude before the sigmoid.
pub const RAW_CLAMP: f64 = 30.0;

/// A split must beat `min_split_gain` by this much. Keeps rounding noise
/// from splitting nodes whose gradients are uniform.
pub const GAIN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum BoostError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("row width {found} does not match model width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SplitGain {
    SumGain,
    MaxGain,
    SumSigned,
    MaxSigned,
    SumAbsG,
    MaxAbsG,
}

impl SplitGain {
    pub const ALL: [SplitGain; 6] = [
        SplitGain::SumGain,
        SplitGain::MaxGain,
        SplitGain::SumSigned,
        SplitGain::MaxSigned,
        SplitGain::SumAbsG,
        SplitGain::MaxAbsG,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SplitGain::SumGain => "sumGain",
            SplitGain::MaxGain => "maxGain",
            SplitGain::SumSigned => "sumSigned",
            SplitGain::MaxSigned => "maxSigned",
            SplitGain::SumAbsG => "sumAbsG",
            SplitGain::MaxAbsG => "maxAbsG",
        }
    }

    #[inline]
    fn term(self, g: f64, h: f64, eps: f64) -> f64 {
        let d = h + eps;
        if d == 0.0 {
            return 0.0;
        }
        match self {
            SplitGain::SumGain | SplitGain::MaxGain => g * g / d,
            SplitGain::SumSigned | SplitGain::MaxSigned => -g / d,
            SplitGain::SumAbsG | SplitGain::MaxAbsG => (g / d).abs(),
        }
    }

    fn is_max(self) -> bool {
        matches!(
            self,
            SplitGain::MaxGain | SplitGain::MaxSigned | SplitGain::MaxAbsG
        )
    }
}

impl fmt::Display for SplitGain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitGain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SplitGain::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown split gain '{s}'"))
    }
}

/// Leaf score of a node with per-label sums `g`, `h`.
pub fn leaf_score(kind: SplitGain, g: &[f64], h: &[f64], eps: f64) -> f64 {
    let terms = g.iter().zip(h).map(|(&g, &h)| kind.term(g, h, eps));
    if g.is_empty() {
        0.0
    } else if kind.is_max() {
        terms.fold(f64::NEG_INFINITY, f64::max)
    } else {
        terms.sum()
    }
}

/// Gain of splitting a node into `u` and `v`.
pub fn split_gain(
    kind: SplitGain,
    g_u: &[f64],
    h_u: &[f64],
    g_v: &[f64],
    h_v: &[f64],
    eps: f64,
    gamma: f64,
) -> f64 {
    let g: Vec<f64> = g_u.iter().zip(g_v).map(|(a, b)| a + b).collect();
    let h: Vec<f64> = h_u.iter().zip(h_v).map(|(a, b)| a + b).collect();
    0.5 * (leaf_score(kind, g_u, h_u, eps) + leaf_score(kind, g_v, h_v, eps)
        - leaf_score(kind, &g, &h, eps))
        - gamma
}

#[inline]
pub fn sigmoid(raw: f64) -> f64 {
    let r = raw.clamp(-RAW_CLAMP, RAW_CLAMP);
    1.0 / (1.0 + (-r).exp())
}

/// Binary cross-entropy of label `y` under raw score `raw`.
pub fn cross_entropy(y: u8, raw: f64) -> f64 {
    let p = sigmoid(raw);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// First and second derivative of the cross-entropy w.r.t. the raw score.
pub fn grad_hess(y: &[u8], yhat: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let g = y.iter().zip(yhat).map(|(&y, &p)| p - y as f64).collect();
    let h = yhat.iter().map(|&p| p * (1.0 - p)).collect();
    (g, h)
}

/// Gradient statistics of a whole training set, row-major `M × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHess {
    pub rows: usize,
    pub cols: usize,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    /// `true` excludes the cell from split scoring.
    pub mask: Vec<bool>,
}

impl GradHess {
    pub fn compute(y: &LabelMatrix, prob: &[f64], mask: Option<&[bool]>) -> Self {
        let (g, h) = grad_hess(y.as_slice(), prob);
        GradHess {
            rows: y.rows(),
            cols: y.cols(),
            g,
            h,
            mask: mask.map_or_else(|| vec![false; y.rows() * y.cols()], <[bool]>::to_vec),
        }
    }

    /// Copies of `g` and `h` with masked cells zeroed.
    pub fn scoring(&self) -> (Vec<f64>, Vec<f64>) {
        let zero = |v: &[f64]| {
            v.iter()
                .zip(&self.mask)
                .map(|(&x, &m)| if m { 0.0 } else { x })
                .collect()
        };
        (zero(&self.g), zero(&self.h))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub complexity: f64,
    pub min_split_gain: f64,
    pub split_gain: SplitGain,
    pub base_raw_score: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            rounds: 20,
            max_depth: 5,
            learning_rate: 0.3,
            l2_reg: 1.0,
            complexity: 0.0,
            min_split_gain: 0.0,
            split_gain: SplitGain::MaxGain,
            base_raw_score: 0.0,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<(), BoostError> {
        let bad = |m: &str| Err(BoostError::InvalidParams(m.to_string()));
        if self.rounds < 1 {
            return bad("rounds must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return bad("learning_rate must be in [0,1]");
        }
        if !self.l2_reg.is_finite() || self.l2_reg < 0.0 {
            return bad("l2_reg must be >= 0");
        }
        if !self.complexity.is_finite() || self.complexity < 0.0 {
            return bad("complexity must be >= 0");
        }
        if !self.min_split_gain.is_finite() || !self.base_raw_score.is_finite() {
            return bad("min_split_gain and base_raw_score must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoostNode {
    /// Known values `< threshold` go left; unknown values follow
    /// `unknown_left`.
    Split {
        column: u32,
        #[serde(with = "extended_float")]
        threshold: f64,
        unknown_left: bool,
        left: u32,
        right: u32,
    },
    Leaf {
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTree {
    nodes: Vec<BoostNode>,
}

impl BoostTree {
    pub fn nodes(&self) -> &[BoostNode] {
        &self.nodes
    }

    pub fn leaf_weights(&self, x: &[f64]) -> &[f64] {
        let mut n = 0usize;
        loop {
            match &self.nodes[n] {
                BoostNode::Leaf { weights } => return weights,
                BoostNode::Split {
                    column,
                    threshold,
                    unknown_left,
                    left,
                    right,
                } => {
                    let v = x[*column as usize];
                    let go_left = if v.is_nan() {
                        *unknown_left
                    } else {
                        v < *threshold
                    };
                    n = if go_left { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &BoostTree, n: usize) -> usize {
            match &t.nodes[n] {
                BoostNode::Leaf { .. } => 0,
                BoostNode::Split { left, right, .. } => {
                    1 + go(t, *left as usize).max(go(t, *right as usize))
                }
            }
        }
        go(self, 0)
    }

    /// The root split, if any.
    pub fn root_split(&self) -> Option<SplitChoice> {
        match &self.nodes[0] {
            BoostNode::Split {
                column,
                threshold,
                unknown_left,
                ..
            } => Some(SplitChoice {
                column: *column as usize,
                threshold: *threshold,
                unknown_left: *unknown_left,
                gain: f64::NAN,
            }),
            BoostNode::Leaf { .. } => None,
        }
    }
}

/// A split candidate and its gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub column: usize,
    pub threshold: f64,
    pub unknown_left: bool,
    pub gain: f64,
}

impl SplitChoice {
    pub fn same_split(&self, other: &SplitChoice) -> bool {
        self.column == other.column
            && self.threshold == other.threshold
            && self.unknown_left == other.unknown_left
    }
}

/// Gains within this band of the best are ties, resolved by candidate order.
fn tie_band(best: f64) -> f64 {
    1e-12 * best.abs().max(1.0)
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m > a {
        m
    } else {
        b
    }
}

/// Exhaustive split search over `rows`, recomputing the partition sums of
/// every candidate from scratch. Candidates are ordered by column, then
/// threshold, then unknown-left before unknown-right; a known/unknown
/// separator (threshold `+inf`, unknown right) closes each column. The first
/// candidate within the tie band of the best gain wins.
pub fn brute_force_split(
    x: &FeatureMatrix,
    rows: &[usize],
    gs: &[f64],
    hs: &[f64],
    n_labels: usize,
    kind: SplitGain,
    eps: f64,
    gamma: f64,
) -> Option<SplitChoice> {
    let mut cands: Vec<SplitChoice> = Vec::new();
    for c in 0..x.cols() {
        let mut vals: Vec<f64> = rows
            .iter()
            .map(|&i| x.get(i, c))
            .filter(|v| !v.is_nan())
            .collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let has_unknown = rows.iter().any(|&i| x.get(i, c).is_nan());
        let mut ths: Vec<f64> = vals.windows(2).map(|w| midpoint(w[0], w[1])).collect();
        if has_unknown && !vals.is_empty() {
            ths.push(f64::INFINITY);
        }
        for t in ths {
            let dirs: &[bool] = if t.is_infinite() {
                &[false]
            } else if has_unknown {
                &[true, false]
            } else {
                &[true]
            };
            for &ul in dirs {
                let mut gl = vec![0.0; n_labels];
                let mut hl = vec![0.0; n_labels];
                let mut gr = vec![0.0; n_labels];
                let mut hr = vec![0.0; n_labels];
                for &i in rows {
                    let v = x.get(i, c);
                    let left = if v.is_nan() { ul } else { v < t };
                    let (g, h) = if left {
                        (&mut gl, &mut hl)
                    } else {
                        (&mut gr, &mut hr)
                    };
                    for j in 0..n_labels {
                        g[j] += gs[i * n_labels + j];
                        h[j] += hs[i * n_labels + j];
                    }
                }
                cands.push(SplitChoice {
                    column: c,
                    threshold: t,
                    unknown_left: ul,
                    gain: split_gain(kind, &gl, &hl, &gr, &hr, eps, gamma),
                });
            }
        }
    }
    let best = cands
        .iter()
        .map(|c| c.gain)
        .fold(f64::NEG_INFINITY, f64::max);
    cands.into_iter().find(|c| c.gain >= best - tie_band(best))
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    /// Scoring statistics (mask applied).
    gs: &'a [f64],
    hs: &'a [f64],
    /// Leaf statistics (mask ignored).
    g: &'a [f64],
    h: &'a [f64],
    n: usize,
    params: &'a BoostParams,
    nodes: Vec<BoostNode>,
    side: Vec<bool>,
}

struct Sums {
    g: Vec<f64>,
    h: Vec<f64>,
}

impl Sums {
    fn zero(n: usize) -> Self {
        Sums {
            g: vec![0.0; n],
            h: vec![0.0; n],
        }
    }

    #[inline]
    fn add_row(&mut self, gs: &[f64], hs: &[f64], i: usize) {
        let n = self.g.len();
        for j in 0..n {
            self.g[j] += gs[i * n + j];
            self.h[j] += hs[i * n + j];
        }
    }
}

impl<'a> Grower<'a> {
    fn leaf(&self, rows: &[u32]) -> BoostNode {
        let mut s = Sums::zero(self.n);
        for &i in rows {
            s.add_row(self.g, self.h, i as usize);
        }
        let eps = self.params.l2_reg;
        BoostNode::Leaf {
            weights: s
                .g
                .iter()
                .zip(&s.h)
                .map(|(&g, &h)| if h + eps == 0.0 { 0.0 } else { -g / (h + eps) })
                .collect(),
        }
    }

    fn grow(&mut self, rows: Vec<u32>, sorted: Vec<Vec<u32>>, depth: usize) -> u32 {
        let slot = self.nodes.len();
        self.nodes.push(BoostNode::Leaf {
            weights: Vec::new(),
        });
        let split = if depth < self.params.max_depth && rows.len() >= 2 {
            self.find_split(&rows, &sorted)
                .filter(|s| s.gain > self.params.min_split_gain + GAIN_TOLERANCE)
        } else {
            None
        };
        let Some(s) = split else {
            self.nodes[slot] = self.leaf(&rows);
            return slot as u32;
        };
        for &i in &rows {
            let v = self.x.get(i as usize, s.column);
            self.side[i as usize] = if v.is_nan() {
                s.unknown_left
            } else {
                v < s.threshold
            };
        }
        let (lrows, rrows): (Vec<u32>, Vec<u32>) =
            rows.iter().partition(|&&i| self.side[i as usize]);
        let mut lsorted = Vec::with_capacity(sorted.len());
        let mut rsorted = Vec::with_capacity(sorted.len());
        for col in sorted {
            let (l, r): (Vec<u32>, Vec<u32>) =
                col.into_iter().partition(|&i| self.side[i as usize]);
            lsorted.push(l);
            rsorted.push(r);
        }
        drop(rows);
        let left = self.grow(lrows, lsorted, depth + 1);
        let right = self.grow(rrows, rsorted, depth + 1);
        self.nodes[slot] = BoostNode::Split {
            column: s.column as u32,
            threshold: s.threshold,
            unknown_left: s.unknown_left,
            left,
            right,
        };
        slot as u32
    }

    /// Walks the candidates of column `c` in canonical order, calling
    /// `visit(threshold, unknown_left, gain)`; stops when it returns true.
    fn scan(
        &self,
        c: usize,
        rows: &[u32],
        known: &[u32],
        total: &Sums,
        mut visit: impl FnMut(f64, bool, f64) -> bool,
    ) {
        if known.is_empty() {
            return;
        }
        let n = self.n;
        let p = self.params;
        let mut unknown = Sums::zero(n);
        let mut has_unknown = false;
        for &i in rows {
            if self.x.get(i as usize, c).is_nan() {
                unknown.add_row(self.gs, self.hs, i as usize);
                has_unknown = true;
            }
        }
        let mut kn = Sums::zero(n);
        for &i in known {
            kn.add_row(self.gs, self.hs, i as usize);
        }
        let parent = leaf_score(p.split_gain, &total.g, &total.h, p.l2_reg);
        let score = |lg: &[f64], lh: &[f64], rg: &[f64], rh: &[f64]| {
            0.5 * (leaf_score(p.split_gain, lg, lh, p.l2_reg)
                + leaf_score(p.split_gain, rg, rh, p.l2_reg)
                - parent)
                - p.complexity
        };
        let mut prefix = Sums::zero(n);
        let mut lg = vec![0.0; n];
        let mut lh = vec![0.0; n];
        let mut rg = vec![0.0; n];
        let mut rh = vec![0.0; n];
        for k in 0..known.len() - 1 {
            prefix.add_row(self.gs, self.hs, known[k] as usize);
            let a = self.x.get(known[k] as usize, c);
            let b = self.x.get(known[k + 1] as usize, c);
            if b <= a {
                continue;
            }
            let t = midpoint(a, b);
            for j in 0..n {
                lg[j] = prefix.g[j] + unknown.g[j];
                lh[j] = prefix.h[j] + unknown.h[j];
                rg[j] = kn.g[j] - prefix.g[j];
                rh[j] = kn.h[j] - prefix.h[j];
            }
            if visit(t, true, score(&lg, &lh, &rg, &rh)) {
                return;
            }
            if has_unknown {
                for j in 0..n {
                    lg[j] = prefix.g[j];
                    lh[j] = prefix.h[j];
                    rg[j] = kn.g[j] - prefix.g[j] + unknown.g[j];
                    rh[j] = kn.h[j] - prefix.h[j] + unknown.h[j];
                }
                if visit(t, false, score(&lg, &lh, &rg, &rh)) {
                    return;
                }
            }
        }
        if has_unknown {
            visit(
                f64::INFINITY,
                false,
                score(&kn.g, &kn.h, &unknown.g, &unknown.h),
            );
        }
    }

    fn find_split(&self, rows: &[u32], sorted: &[Vec<u32>]) -> Option<SplitChoice> {
        let mut total = Sums::zero(self.n);
        for &i in rows {
            total.add_row(self.gs, self.hs, i as usize);
        }
        let col_best: Vec<f64> = (0..sorted.len())
            .into_par_iter()
            .map(|c| {
                let mut best = f64::NEG_INFINITY;
                self.scan(c, rows, &sorted[c], &total, |_, _, g| {
                    best = best.max(g);
                    false
                });
                best
            })
            .collect();
        let best = col_best.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !best.is_finite() {
            return None;
        }
        let floor = best - tie_band(best);
        for (c, &cb) in col_best.iter().enumerate() {
            if cb < floor {
                continue;
            }
            let mut found = None;
            self.scan(c, rows, &sorted[c], &total, |t, ul, g| {
                if g >= floor {
                    found = Some(SplitChoice {
                        column: c,
                        threshold: t,
                        unknown_left: ul,
                        gain: g,
                    });
                    true
                } else {
                    false
                }
            });
            if found.is_some() {
                return found;
            }
        }
        None
    }
}

/// Known rows of every column sorted by value (ties by row index).
fn presort(x: &FeatureMatrix, rows: &[u32]) -> Vec<Vec<u32>> {
    (0..x.cols())
        .into_par_iter()
        .map(|c| {
            let mut v: Vec<u32> = rows
                .iter()
                .copied()
                .filter(|&i| !x.get(i as usize, c).is_nan())
                .collect();
            v.sort_by(|&a, &b| {
                x.get(a as usize, c)
                    .total_cmp(&x.get(b as usize, c))
                    .then(a.cmp(&b))
            });
            v
        })
        .collect()
}

/// Grows one tree on the given gradient statistics.
pub fn grow_tree(x: &FeatureMatrix, gh: &GradHess, params: &BoostParams) -> BoostTree {
    let rows: Vec<u32> = (0..x.rows() as u32).collect();
    let sorted = presort(x, &rows);
    grow_presorted(x, gh, params, rows, sorted)
}

fn grow_presorted(
    x: &FeatureMatrix,
    gh: &GradHess,
    params: &BoostParams,
    rows: Vec<u32>,
    sorted: Vec<Vec<u32>>,
) -> BoostTree {
    let (gs, hs) = gh.scoring();
    let mut grower = Grower {
        x,
        gs: &gs,
        hs: &hs,
        g: &gh.g,
        h: &gh.h,
        n: gh.cols,
        params,
        nodes: Vec::new(),
        side: vec![false; x.rows()],
    };
    grower.grow(rows, sorted, 0);
    BoostTree {
        nodes: grower.nodes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlBoostModel {
    trees: Vec<BoostTree>,
    params: BoostParams,
    n_labels: usize,
    width: usize,
    /// Mean training cross-entropy after each round.
    loss_log: Vec<f64>,
}

impl MlBoostModel {
    /// Trains on features `x` (any width) and labels `y`. `mask`, row-major
    /// `M × N`, excludes cells from split scoring for every round.
    pub fn train(
        x: &FeatureMatrix,
        y: &LabelMatrix,
        mask: Option<&[bool]>,
        params: &BoostParams,
    ) -> Result<Self, BoostError> {
        Ok(Self::train_with_scores(x, y, mask, params)?.0)
    }

    /// Like [`train`](Self::train) and also returns the final training
    /// probabilities, row-major `M × N`.
    pub fn train_with_scores(
        x: &FeatureMatrix,
        y: &LabelMatrix,
        mask: Option<&[bool]>,
        params: &BoostParams,
    ) -> Result<(Self, Vec<f64>), BoostError> {
        params.validate()?;
        if x.rows() != y.rows() {
            return Err(BoostError::Shape(format!(
                "{} feature rows vs {} label rows",
                x.rows(),
                y.rows()
            )));
        }
        let (m, n) = (y.rows(), y.cols());
        if let Some(mask) = mask {
            if mask.len() != m * n {
                return Err(BoostError::Shape(format!(
                    "mask has {} cells, expected {}",
                    mask.len(),
                    m * n
                )));
            }
        }
        let rows: Vec<u32> = (0..m as u32).collect();
        let sorted = presort(x, &rows);
        let mut raw = vec![params.base_raw_score; m * n];
        let mut trees = Vec::with_capacity(params.rounds);
        let mut loss_log = Vec::with_capacity(params.rounds);
        for _ in 0..params.rounds {
            let prob: Vec<f64> = raw.iter().map(|&r| sigmoid(r)).collect();
            let gh = GradHess::compute(y, &prob, mask);
            let tree = grow_presorted(x, &gh, params, rows.clone(), sorted.clone());
            for i in 0..m {
                let w = tree.leaf_weights(x.row(i));
                for j in 0..n {
                    raw[i * n + j] += params.learning_rate * w[j];
                }
            }
            loss_log.push(mean_cross_entropy(y, &raw));
            trees.push(tree);
        }
        let prob = raw.iter().map(|&r| sigmoid(r)).collect();
        Ok((
            MlBoostModel {
                trees,
                params: params.clone(),
                n_labels: n,
                width: x.cols(),
                loss_log,
            },
            prob,
        ))
    }

    pub fn trees(&self) -> &[BoostTree] {
        &self.trees
    }

    pub fn params(&self) -> &BoostParams {
        &self.params
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn loss_log(&self) -> &[f64] {
        &self.loss_log
    }

    /// Per-round loss as CSV with header `round,loss`.
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("round,loss\n");
        for (t, l) in self.loss_log.iter().enumerate() {
            s.push_str(&format!("{},{}\n", t + 1, l));
        }
        s
    }

    /// Appends a tree; used to assemble models by hand.
    pub fn push_tree(&mut self, tree: BoostTree) {
        self.trees.push(tree);
    }

    /// A model without trees.
    pub fn empty(n_labels: usize, width: usize, params: BoostParams) -> Self {
        MlBoostModel {
            trees: Vec::new(),
            params,
            n_labels,
            width,
            loss_log: Vec::new(),
        }
    }

    fn check_width(&self, x: &[f64]) -> Result<(), BoostError> {
        if x.len() != self.width {
            return Err(BoostError::WidthMismatch {
                expected: self.width,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn predict_raw(&self, x: &[f64]) -> Result<Vec<f64>, BoostError> {
        self.check_width(x)?;
        let mut raw = vec![self.params.base_raw_score; self.n_labels];
        for t in &self.trees {
            for (r, w) in raw.iter_mut().zip(t.leaf_weights(x)) {
                *r += self.params.learning_rate * w;
            }
        }
        Ok(raw)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, BoostError> {
        Ok(self.predict_raw(x)?.into_iter().map(sigmoid).collect())
    }

    /// Probabilities for every row, row-major `M × N`.
    pub fn predict_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>, BoostError> {
        if x.cols() != self.width {
            return Err(BoostError::WidthMismatch {
                expected: self.width,
                found: x.cols(),
            });
        }
        let rows: Vec<Vec<f64>> = (0..x.rows())
            .into_par_iter()
            .map(|i| self.predict_proba(x.row(i)).expect("width checked"))
            .collect();
        Ok(rows.concat())
    }
}

/// JSON has no infinities; non-finite values are written as strings.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(serde::de::Error::custom(format!("bad float '{t}'"))),
            },
        }
    }
}

pub fn mean_cross_entropy(y: &LabelMatrix, raw: &[f64]) -> f64 {
    if raw.is_empty() {
        return 0.0;
    }
    y.as_slice()
        .iter()
        .zip(raw)
        .map(|(&y, &r)| cross_entropy(y, r))
        .sum::<f64>()
        / raw.len() as f64
}
