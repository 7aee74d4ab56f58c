//! Random decision trees with label tests.
//!
//! Trees are grown on the augmented space `[X, Y]`: an inner node tests
//! either an input feature or the true value of a label, picked at random.
//! Leaves keep the instance count and the per-label positive counts. At
//! prediction time the label-feature columns hold previously decided labels
//! (`0`/`1`) or [`UNKNOWN`]; unknown values, missing features and label
//! tests whose activation flag is off send the instance down every branch.
//!
//! One ensemble serves plain multi-label prediction, static chains and
//! dynamic chains; only the way the label-feature columns are filled differs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ColumnKind, MultiLabelDataset, UNKNOWN};

#[derive(Debug, Error, PartialEq)]
pub enum RdtError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dataset must be augmented with label-feature columns")]
    NotAugmented,
    #[error("row width {found} does not match model width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("column {0} out of range")]
    ColumnOutOfRange(usize),
    #[error("invalid permutation of {0} labels")]
    InvalidPermutation(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RdtParams {
    pub tree_count: usize,
    pub max_depth: usize,
    pub min_leaf_size: usize,
    /// Probability that an inner node tests a label instead of a feature.
    pub label_test_fraction: f64,
    /// Fraction of label tests that honor known label values.
    pub activation: f64,
    pub seed: u64,
}

impl Default for RdtParams {
    fn default() -> Self {
        RdtParams {
            tree_count: 300,
            max_depth: 30,
            min_leaf_size: 5,
            label_test_fraction: 0.3,
            activation: 1.0,
            seed: 0,
        }
    }
}

impl RdtParams {
    pub fn validate(&self) -> Result<(), RdtError> {
        let bad = |m: &str| Err(RdtError::InvalidParams(m.to_string()));
        if self.tree_count < 1 {
            return bad("tree_count must be >= 1");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1");
        }
        if self.min_leaf_size < 1 {
            return bad("min_leaf_size must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.label_test_fraction) {
            return bad("label_test_fraction must be in [0,1]");
        }
        if !(0.0..=1.0).contains(&self.activation) {
            return bad("activation must be in [0,1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Test {
    /// One child per category (two for label features).
    Categorical,
    /// `value < threshold` goes to child 0, the rest to child 1.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RdtNode {
    Split {
        column: u32,
        test: Test,
        label_test: bool,
        active: bool,
        /// Children occupy `first_child..first_child + n_children`.
        first_child: u32,
        n_children: u32,
    },
    Leaf {
        leaf: u32,
    },
}

/// Counts kept at a leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafStats<'a> {
    pub instance_count: u32,
    pub positive_counts: &'a [u32],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdtTree {
    nodes: Vec<RdtNode>,
    leaf_sizes: Vec<u32>,
    /// Row-major `n_leaves × n_labels`.
    leaf_counts: Vec<u32>,
    n_labels: usize,
}

impl RdtTree {
    /// Assembles a tree from raw parts. Node 0 is the root.
    pub fn from_parts(
        nodes: Vec<RdtNode>,
        leaf_sizes: Vec<u32>,
        leaf_counts: Vec<u32>,
        n_labels: usize,
    ) -> Self {
        assert_eq!(leaf_sizes.len() * n_labels, leaf_counts.len());
        for (v, &size) in leaf_sizes.iter().enumerate() {
            let counts = &leaf_counts[v * n_labels..(v + 1) * n_labels];
            assert!(counts.iter().all(|&c| c <= size), "n_v(j) > N_v");
        }
        RdtTree {
            nodes,
            leaf_sizes,
            leaf_counts,
            n_labels,
        }
    }

    pub fn nodes(&self) -> &[RdtNode] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_sizes.len()
    }

    pub fn leaf(&self, v: usize) -> LeafStats<'_> {
        LeafStats {
            instance_count: self.leaf_sizes[v],
            positive_counts: &self.leaf_counts[v * self.n_labels..(v + 1) * self.n_labels],
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RdtTree, n: usize) -> usize {
            match &t.nodes[n] {
                RdtNode::Leaf { .. } => 0,
                RdtNode::Split {
                    first_child,
                    n_children,
                    ..
                } => {
                    1 + (*first_child..first_child + n_children)
                        .map(|c| go(t, c as usize))
                        .max()
                        .unwrap_or(0)
                }
            }
        }
        go(self, 0)
    }

    /// Children of `node` that `x` descends into.
    #[inline]
    fn branches(
        &self,
        node: &RdtNode,
        x: &[f64],
        honor_activation: bool,
    ) -> (u32, u32, Option<u32>) {
        match *node {
            RdtNode::Split {
                column,
                test,
                label_test,
                active,
                first_child,
                n_children,
            } => {
                let v = x[column as usize];
                if v.is_nan() || (label_test && honor_activation && !active) {
                    return (first_child, n_children, None);
                }
                let child = match test {
                    Test::Threshold(t) => (v >= t) as u32,
                    Test::Categorical if label_test => (v >= 0.5) as u32,
                    Test::Categorical => {
                        let c = v as u32;
                        if v < 0.0 || c >= n_children {
                            return (first_child, n_children, None);
                        }
                        c
                    }
                };
                (first_child, n_children, Some(first_child + child))
            }
            RdtNode::Leaf { .. } => unreachable!(),
        }
    }

    fn walk(&self, x: &[f64], honor_activation: bool, f: &mut impl FnMut(usize)) {
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if let RdtNode::Leaf { leaf } = node {
                f(*leaf as usize);
                continue;
            }
            match self.branches(node, x, honor_activation) {
                (_, _, Some(c)) => stack.push(c),
                (first, count, None) => stack.extend((first..first + count).rev()),
            }
        }
    }

    /// Leaves reached by `x`, in ascending order.
    pub fn route(&self, x: &[f64]) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk(x, true, &mut |v| out.push(v));
        out.sort_unstable();
        out
    }

    /// Like [`route`](Self::route) but every label test is treated as
    /// active; this is how training rows were distributed.
    pub fn route_ignoring_activation(&self, x: &[f64]) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk(x, false, &mut |v| out.push(v));
        out.sort_unstable();
        out
    }

    /// Per-label posterior of this tree, or `None` when every reached leaf
    /// is empty.
    pub fn posterior(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.estimate(x).map(|e| e.posterior)
    }

    pub fn estimate(&self, x: &[f64]) -> Option<TreeEstimate> {
        let n = self.n_labels;
        let mut size = 0u64;
        let mut counts = vec![0u64; n];
        self.walk(x, true, &mut |v| {
            size += self.leaf_sizes[v] as u64;
            for (c, &k) in counts.iter_mut().zip(&self.leaf_counts[v * n..(v + 1) * n]) {
                *c += k as u64;
            }
        });
        if size == 0 {
            return None;
        }
        let total: u64 = counts.iter().sum();
        Some(TreeEstimate {
            posterior: counts.iter().map(|&c| c as f64 / size as f64).collect(),
            relevant: total as f64 / size as f64,
        })
    }
}

/// Per-tree estimate: label posteriors and the expected number of relevant
/// labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEstimate {
    pub posterior: Vec<f64>,
    pub relevant: f64,
}

/// Inverted Gini purity of a posterior vector, in `[0, 1]`.
pub fn gini_weight(posterior: &[f64]) -> f64 {
    if posterior.is_empty() {
        return 0.0;
    }
    let impurity: f64 = posterior.iter().map(|p| p * (1.0 - p)).sum();
    (1.0 - 4.0 / posterior.len() as f64 * impurity).clamp(0.0, 1.0)
}

/// Ensemble estimate: weighted marginals and weighted relevant-label count.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub marginals: Vec<f64>,
    pub cardinality: f64,
}

impl Estimate {
    pub fn rounded_cardinality(&self) -> usize {
        round_half_up(self.cardinality).min(self.marginals.len())
    }
}

pub fn round_half_up(x: f64) -> usize {
    if x <= 0.0 {
        0
    } else {
        (x + 0.5).floor() as usize
    }
}

/// Combines per-tree estimates with purity weights; falls back to the plain
/// mean when all weights are zero. Abstaining trees are skipped.
pub fn combine(estimates: &[Option<TreeEstimate>], n_labels: usize) -> Estimate {
    let mut wsum = 0.0;
    let mut wm = vec![0.0; n_labels];
    let mut wr = 0.0;
    let mut count = 0usize;
    let mut um = vec![0.0; n_labels];
    let mut ur = 0.0;
    for e in estimates.iter().flatten() {
        let w = gini_weight(&e.posterior);
        wsum += w;
        wr += w * e.relevant;
        ur += e.relevant;
        count += 1;
        for j in 0..n_labels {
            wm[j] += w * e.posterior[j];
            um[j] += e.posterior[j];
        }
    }
    if wsum > 0.0 {
        Estimate {
            marginals: wm.into_iter().map(|v| v / wsum).collect(),
            cardinality: wr / wsum,
        }
    } else if count > 0 {
        Estimate {
            marginals: um.into_iter().map(|v| v / count as f64).collect(),
            cardinality: ur / count as f64,
        }
    } else {
        Estimate {
            marginals: vec![0.0; n_labels],
            cardinality: 0.0,
        }
    }
}

/// One decision taken while running a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub iteration: usize,
    pub label: usize,
    pub decision: u8,
    pub marginal: f64,
    pub rounded_cardinality: usize,
    pub positives_before: usize,
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub labels: Vec<u8>,
    pub order: Vec<usize>,
    pub steps: Vec<ChainStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdtEnsemble {
    trees: Vec<RdtTree>,
    params: RdtParams,
    n_features: usize,
    n_labels: usize,
    columns: Vec<ColumnKind>,
}

impl RdtEnsemble {
    pub fn build(d: &MultiLabelDataset, params: &RdtParams) -> Result<Self, RdtError> {
        params.validate()?;
        if !d.is_augmented() {
            return Err(RdtError::NotAugmented);
        }
        let columns = d.column_kinds();
        let trees: Vec<RdtTree> = (0..params.tree_count)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                TreeBuilder::new(d, &columns, params).grow(&mut rng)
            })
            .collect();
        let mut ens = RdtEnsemble {
            trees,
            params: params.clone(),
            n_features: d.n_features(),
            n_labels: d.n_labels(),
            columns,
        };
        ens.set_activation(params.activation, params.seed);
        Ok(ens)
    }

    /// Assembles an ensemble from hand-built trees (all label tests keep the
    /// flags they were given).
    pub fn from_trees(trees: Vec<RdtTree>, n_features: usize, n_labels: usize) -> Self {
        let mut columns = vec![ColumnKind::Numeric; n_features];
        columns.extend((0..n_labels).map(|j| ColumnKind::LabelFeature { label: j as u32 }));
        RdtEnsemble {
            params: RdtParams {
                tree_count: trees.len(),
                ..RdtParams::default()
            },
            trees,
            n_features,
            n_labels,
            columns,
        }
    }

    pub fn trees(&self) -> &[RdtTree] {
        &self.trees
    }

    pub fn params(&self) -> &RdtParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn width(&self) -> usize {
        self.n_features + self.n_labels
    }

    /// Re-draws every label test's activation flag: each is on with
    /// probability `sigma`, independently, from a stream seeded by `seed`.
    pub fn set_activation(&mut self, sigma: f64, seed: u64) {
        let sigma = sigma.clamp(0.0, 1.0);
        for (t, tree) in self.trees.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5157_4d41_4354_4956);
            rng.set_stream(t as u64);
            for node in &mut tree.nodes {
                if let RdtNode::Split {
                    label_test: true,
                    active,
                    ..
                } = node
                {
                    *active = rng.gen_bool(sigma);
                }
            }
        }
        self.params.activation = sigma;
    }

    pub fn with_activation(mut self, sigma: f64, seed: u64) -> Self {
        self.set_activation(sigma, seed);
        self
    }

    /// Activation flags of all label tests, tree by tree in node order.
    pub fn activation_flags(&self) -> Vec<bool> {
        self.trees
            .iter()
            .flat_map(|t| t.nodes.iter())
            .filter_map(|n| match n {
                RdtNode::Split {
                    label_test: true,
                    active,
                    ..
                } => Some(*active),
                _ => None,
            })
            .collect()
    }

    fn check_width(&self, x: &[f64]) -> Result<(), RdtError> {
        if x.len() != self.width() {
            return Err(RdtError::WidthMismatch {
                expected: self.width(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn estimate(&self, x: &[f64]) -> Result<Estimate, RdtError> {
        self.check_width(x)?;
        let per_tree: Vec<Option<TreeEstimate>> =
            self.trees.iter().map(|t| t.estimate(x)).collect();
        Ok(combine(&per_tree, self.n_labels))
    }

    /// Weighted marginal probability per label.
    pub fn ensemble_estimate(&self, x: &[f64]) -> Result<Vec<f64>, RdtError> {
        Ok(self.estimate(x)?.marginals)
    }

    /// Weighted expected number of relevant labels.
    pub fn cardinality_estimate(&self, x: &[f64]) -> Result<f64, RdtError> {
        Ok(self.estimate(x)?.cardinality)
    }

    /// Labels with the `R` highest marginals, `R` the rounded cardinality.
    pub fn predict_multilabel(&self, x: &[f64]) -> Result<Vec<u8>, RdtError> {
        let e = self.estimate(x)?;
        Ok(top_r(&e.marginals, e.rounded_cardinality()))
    }

    /// Marginals thresholded at 0.5 on the given row.
    pub fn predict_threshold(&self, x: &[f64]) -> Result<Vec<u8>, RdtError> {
        Ok(self
            .ensemble_estimate(x)?
            .iter()
            .map(|&p| (p >= 0.5) as u8)
            .collect())
    }

    fn blank_row(&self, x: &[f64]) -> Result<Vec<f64>, RdtError> {
        if x.len() == self.n_features {
            let mut v = x.to_vec();
            v.extend(std::iter::repeat_n(UNKNOWN, self.n_labels));
            return Ok(v);
        }
        self.check_width(x)?;
        let mut v = x.to_vec();
        v[self.n_features..].fill(UNKNOWN);
        Ok(v)
    }

    /// Classifier chain along a fixed permutation. `x` may be the original
    /// row or an augmented one; label-feature cells start unknown either way.
    pub fn predict_static_chain(
        &self,
        x: &[f64],
        order: &[usize],
    ) -> Result<ChainOutcome, RdtError> {
        check_permutation(order, self.n_labels)?;
        let mut row = self.blank_row(x)?;
        let mut labels = vec![0u8; self.n_labels];
        let mut steps = Vec::with_capacity(self.n_labels);
        let mut positives = 0;
        for (k, &j) in order.iter().enumerate() {
            let e = self.estimate(&row)?;
            let f = e.marginals[j];
            let decision = (f >= 0.5) as u8;
            steps.push(ChainStep {
                iteration: k + 1,
                label: j,
                decision,
                marginal: f,
                rounded_cardinality: e.rounded_cardinality(),
                positives_before: positives,
                forced: false,
            });
            positives += decision as usize;
            labels[j] = decision;
            row[self.n_features + j] = decision as f64;
        }
        Ok(ChainOutcome {
            labels,
            order: order.to_vec(),
            steps,
        })
    }

    /// Dynamic chain: each iteration decides the undecided label the
    /// ensemble is most certain about, aiming for exactly `R` positives.
    pub fn predict_dynamic_chain(&self, x: &[f64]) -> Result<ChainOutcome, RdtError> {
        let n = self.n_labels;
        let mut row = self.blank_row(x)?;
        let mut decided = vec![false; n];
        let mut labels = vec![0u8; n];
        let mut order = Vec::with_capacity(n);
        let mut steps = Vec::with_capacity(n);
        let mut positives = 0usize;
        for k in 1..=n {
            let e = self.estimate(&row)?;
            let r = e.rounded_cardinality();
            let j = most_certain(&e.marginals, &decided).expect("undecided label remains");
            let f = e.marginals[j];
            let (decision, forced) = dynamic_decision(f, positives, r, n, k);
            steps.push(ChainStep {
                iteration: k,
                label: j,
                decision,
                marginal: f,
                rounded_cardinality: r,
                positives_before: positives,
                forced,
            });
            decided[j] = true;
            labels[j] = decision;
            positives += decision as usize;
            order.push(j);
            row[self.n_features + j] = decision as f64;
        }
        Ok(ChainOutcome {
            labels,
            order,
            steps,
        })
    }
}

/// Value rule of the dynamic chain for iteration `k` (1-based). Returns the
/// decision and whether it was forced by the remaining-slots condition.
pub fn dynamic_decision(
    marginal: f64,
    positives: usize,
    r: usize,
    n: usize,
    k: usize,
) -> (u8, bool) {
    let confident = marginal >= 0.5 && positives < r;
    let remaining = (n - k) as i64;
    let deficit = r as i64 - positives as i64;
    let forced = remaining < deficit;
    ((confident || forced) as u8, forced && !confident)
}

/// Undecided label maximizing `|0.5 - f_j|`, lowest index on ties.
pub fn most_certain(marginals: &[f64], decided: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &f) in marginals.iter().enumerate() {
        if decided[j] {
            continue;
        }
        let c = (0.5 - f).abs();
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((j, c));
        }
    }
    best.map(|(j, _)| j)
}

/// Sets the `r` labels with the highest scores; ties go to the lower index.
pub fn top_r(scores: &[f64], r: usize) -> Vec<u8> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut out = vec![0u8; scores.len()];
    for &j in idx.iter().take(r) {
        out[j] = 1;
    }
    out
}

pub fn check_permutation(order: &[usize], n: usize) -> Result<(), RdtError> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(RdtError::InvalidPermutation(n));
    }
    for &j in order {
        if j >= n || seen[j] {
            return Err(RdtError::InvalidPermutation(n));
        }
        seen[j] = true;
    }
    Ok(())
}

struct TreeBuilder<'a> {
    data: &'a MultiLabelDataset,
    columns: &'a [ColumnKind],
    params: &'a RdtParams,
    n_features: usize,
    n_labels: usize,
    nodes: Vec<RdtNode>,
    leaf_sizes: Vec<u32>,
    leaf_counts: Vec<u32>,
    /// Discrete columns already tested on the current path.
    used: Vec<bool>,
}

impl<'a> TreeBuilder<'a> {
    fn new(data: &'a MultiLabelDataset, columns: &'a [ColumnKind], params: &'a RdtParams) -> Self {
        TreeBuilder {
            data,
            columns,
            params,
            n_features: data.n_features(),
            n_labels: data.n_labels(),
            nodes: Vec::new(),
            leaf_sizes: Vec::new(),
            leaf_counts: Vec::new(),
            used: vec![false; columns.len()],
        }
    }

    /// Training value of a cell: label-feature columns carry the true label.
    #[inline]
    fn value(&self, i: usize, c: usize) -> f64 {
        if c < self.n_features {
            self.data.row(i)[c]
        } else {
            self.data.labels().get(i, c - self.n_features) as f64
        }
    }

    fn grow(mut self, rng: &mut ChaCha8Rng) -> RdtTree {
        let rows: Vec<u32> = (0..self.data.n_instances() as u32).collect();
        self.nodes.push(RdtNode::Leaf { leaf: 0 });
        self.fill(0, rows, 0, rng);
        RdtTree {
            nodes: self.nodes,
            leaf_sizes: self.leaf_sizes,
            leaf_counts: self.leaf_counts,
            n_labels: self.n_labels,
        }
    }

    fn make_leaf(&mut self, slot: usize, rows: &[u32]) {
        let leaf = self.leaf_sizes.len() as u32;
        self.leaf_sizes.push(rows.len() as u32);
        let base = self.leaf_counts.len();
        self.leaf_counts.resize(base + self.n_labels, 0);
        let y = self.data.labels();
        for &i in rows {
            for (c, &b) in self.leaf_counts[base..].iter_mut().zip(y.row(i as usize)) {
                *c += b as u32;
            }
        }
        self.nodes[slot] = RdtNode::Leaf { leaf };
    }

    fn fill(&mut self, slot: usize, rows: Vec<u32>, depth: usize, rng: &mut ChaCha8Rng) {
        if depth >= self.params.max_depth || rows.len() <= self.params.min_leaf_size {
            self.make_leaf(slot, &rows);
            return;
        }
        let Some((column, test, parts)) = self.choose_split(&rows, rng) else {
            self.make_leaf(slot, &rows);
            return;
        };
        let label_test = matches!(self.columns[column], ColumnKind::LabelFeature { .. });
        let first_child = self.nodes.len() as u32;
        let n_children = parts.len() as u32;
        for _ in 0..n_children {
            self.nodes.push(RdtNode::Leaf { leaf: u32::MAX });
        }
        self.nodes[slot] = RdtNode::Split {
            column: column as u32,
            test,
            label_test,
            active: true,
            first_child,
            n_children,
        };
        let discrete = !matches!(test, Test::Threshold(_));
        if discrete {
            self.used[column] = true;
        }
        for (k, part) in parts.into_iter().enumerate() {
            self.fill(first_child as usize + k, part, depth + 1, rng);
        }
        if discrete {
            self.used[column] = false;
        }
    }

    /// Picks a random admissible test. Numeric thresholds come from a random
    /// instance at the node; a threshold that leaves one side empty is
    /// redrawn once, after which the column is dropped for this node.
    fn choose_split(
        &self,
        rows: &[u32],
        rng: &mut ChaCha8Rng,
    ) -> Option<(usize, Test, Vec<Vec<u32>>)> {
        let mut excluded = vec![false; self.columns.len()];
        loop {
            let admissible = |c: usize| {
                !excluded[c]
                    && match self.columns[c] {
                        ColumnKind::Numeric => true,
                        _ => !self.used[c],
                    }
            };
            let features: Vec<usize> = (0..self.n_features).filter(|&c| admissible(c)).collect();
            let labels: Vec<usize> = (self.n_features..self.columns.len())
                .filter(|&c| admissible(c))
                .collect();
            let want_label = rng.gen_bool(self.params.label_test_fraction);
            let pool = match (want_label, labels.is_empty(), features.is_empty()) {
                (_, true, true) => return None,
                (true, false, _) | (false, false, true) => &labels,
                _ => &features,
            };
            if self.params.label_test_fraction == 0.0 && pool == &labels {
                return None;
            }
            let column = *pool.choose(rng).unwrap();
            match self.columns[column] {
                ColumnKind::Numeric => {
                    let known: Vec<u32> = rows
                        .iter()
                        .copied()
                        .filter(|&i| !self.value(i as usize, column).is_nan())
                        .collect();
                    if !known.is_empty() {
                        for _ in 0..2 {
                            let pick = *known.choose(rng).unwrap();
                            let t = self.value(pick as usize, column);
                            let below = known.iter().any(|&i| self.value(i as usize, column) < t);
                            if below {
                                return Some((
                                    column,
                                    Test::Threshold(t),
                                    self.partition(rows, column, Test::Threshold(t), 2),
                                ));
                            }
                        }
                    }
                    excluded[column] = true;
                }
                ColumnKind::Categorical { arity } => {
                    return Some((
                        column,
                        Test::Categorical,
                        self.partition(rows, column, Test::Categorical, arity as usize),
                    ));
                }
                ColumnKind::LabelFeature { .. } => {
                    return Some((
                        column,
                        Test::Categorical,
                        self.partition(rows, column, Test::Categorical, 2),
                    ));
                }
            }
        }
    }

    /// Distributes rows over children; rows with a missing value go to all.
    fn partition(&self, rows: &[u32], column: usize, test: Test, arity: usize) -> Vec<Vec<u32>> {
        let mut parts = vec![Vec::new(); arity];
        for &i in rows {
            let v = self.value(i as usize, column);
            if v.is_nan() {
                parts.iter_mut().for_each(|p| p.push(i));
                continue;
            }
            let child = match test {
                Test::Threshold(t) => (v >= t) as usize,
                Test::Categorical => v as usize,
            };
            parts[child].push(i);
        }
        parts
    }
}
