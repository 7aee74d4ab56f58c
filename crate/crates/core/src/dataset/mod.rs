//! Multi-label datasets: feature matrix plus binary label matrix.
//!
//! Feature cells are stored as `f64`. Numeric attributes hold their value,
//! nominal attributes hold the category index, and a missing cell is `NaN`.
//! After [`MultiLabelDataset::augment`] the row width grows by one column per
//! label; those label-feature columns start at the unknown sentinel, which
//! shares the `NaN` encoding so that every learner routes "not yet predicted"
//! the same way it routes a missing feature.

mod arff;
mod csv_io;
mod dump;

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arff::{load_arff, parse_arff, write_arff, write_mulan_xml, LabelSpec};
pub use csv_io::{load_csv, parse_csv};
pub use dump::canonical_dump;

/// Marker for a missing feature or a not-yet-predicted label feature.
pub const UNKNOWN: f64 = f64::NAN;

#[inline]
pub fn is_unknown(v: f64) -> bool {
    v.is_nan()
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown label name `{0}`")]
    UnknownLabel(String),
    #[error("line {line}: non-binary label value `{value}`")]
    NonBinaryLabel { line: usize, value: String },
    #[error("line {line}: expected {expected} cells, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("empty dataset")]
    Empty,
    #[error("dataset has no labels")]
    NoLabels,
    #[error("already augmented")]
    AlreadyAugmented,
    #[error("dataset not found: {0}")]
    NotFound(String),
    #[error("invalid label xml: {0}")]
    Xml(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// One feature cell as seen by callers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue {
    Numeric(f64),
    Categorical(u32),
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttributeKind {
    Numeric,
    /// Category vocabulary in declaration order.
    Nominal(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }

    pub fn nominal(name: impl Into<String>, values: Vec<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Nominal(values),
        }
    }

    /// Number of categories for nominal attributes, `None` for numeric ones.
    pub fn arity(&self) -> Option<usize> {
        match &self.kind {
            AttributeKind::Numeric => None,
            AttributeKind::Nominal(v) => Some(v.len()),
        }
    }
}

/// How a column of the (possibly augmented) row is tested by tree learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    Categorical {
        arity: u32,
    },
    /// Augmented column carrying the value of label `j`.
    LabelFeature {
        label: u32,
    },
}

/// Binary label matrix, row-major M×N.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl LabelMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LabelMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged label rows");
            assert!(r.iter().all(|&b| b <= 1), "labels must be 0/1");
            data.extend_from_slice(r);
        }
        LabelMatrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), rows * cols);
        assert!(data.iter().all(|&b| b <= 1), "labels must be 0/1");
        LabelMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [u8] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        debug_assert!(v <= 1);
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    /// Positive count per label.
    pub fn label_frequencies(&self) -> Vec<usize> {
        let mut freq = vec![0; self.cols];
        for r in self.iter_rows() {
            for (f, &b) in freq.iter_mut().zip(r) {
                *f += b as usize;
            }
        }
        freq
    }
}

/// Dense row-major feature matrix; `NaN` encodes missing/unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        FeatureMatrix { rows, cols, data }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        FeatureMatrix {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.data[i * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, i: usize, c: usize, v: f64) {
        self.data[i * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the matrix with `extra` trailing columns set to [`UNKNOWN`].
    pub fn widened(&self, extra: usize) -> FeatureMatrix {
        let cols = self.cols + extra;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend(std::iter::repeat_n(UNKNOWN, extra));
        }
        FeatureMatrix {
            rows: self.rows,
            cols,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelDataset {
    attributes: Vec<Attribute>,
    label_names: Vec<String>,
    features: FeatureMatrix,
    labels: LabelMatrix,
    augmented: bool,
}

impl MultiLabelDataset {
    /// Builds a dataset and checks the shape invariants.
    pub fn new(
        attributes: Vec<Attribute>,
        label_names: Vec<String>,
        features: FeatureMatrix,
        labels: LabelMatrix,
    ) -> Result<Self> {
        if features.rows() == 0 {
            return Err(DatasetError::Empty);
        }
        if label_names.is_empty() {
            return Err(DatasetError::NoLabels);
        }
        if features.cols() != attributes.len() {
            return Err(DatasetError::Invalid(format!(
                "{} attributes but {} feature columns",
                attributes.len(),
                features.cols()
            )));
        }
        if labels.rows() != features.rows() || labels.cols() != label_names.len() {
            return Err(DatasetError::Invalid(format!(
                "label matrix {}x{} does not match {} rows and {} labels",
                labels.rows(),
                labels.cols(),
                features.rows(),
                label_names.len()
            )));
        }
        for (q, a) in attributes.iter().enumerate() {
            if let Some(arity) = a.arity() {
                for i in 0..features.rows() {
                    let v = features.get(i, q);
                    if !v.is_nan() && (v < 0.0 || v.fract() != 0.0 || v as usize >= arity) {
                        return Err(DatasetError::Invalid(format!(
                            "row {i}: category index {v} out of range for `{}`",
                            a.name
                        )));
                    }
                }
            }
        }
        Ok(MultiLabelDataset {
            attributes,
            label_names,
            features,
            labels,
            augmented: false,
        })
    }

    /// Number of instances M.
    pub fn n_instances(&self) -> usize {
        self.features.rows()
    }

    /// Number of original features Q.
    pub fn n_features(&self) -> usize {
        self.attributes.len()
    }

    /// Number of labels N.
    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    /// Row width: Q, or Q+N once augmented.
    pub fn width(&self) -> usize {
        self.features.cols()
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &LabelMatrix {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn value(&self, i: usize, q: usize) -> FeatureValue {
        let v = self.features.get(i, q);
        if v.is_nan() {
            return FeatureValue::Missing;
        }
        match self.attributes.get(q).map(|a| &a.kind) {
            Some(AttributeKind::Nominal(_)) => FeatureValue::Categorical(v as u32),
            _ => FeatureValue::Numeric(v),
        }
    }

    /// Columns holding label features, if augmented.
    pub fn label_feature_columns(&self) -> Option<Range<usize>> {
        self.augmented
            .then(|| self.n_features()..self.n_features() + self.n_labels())
    }

    pub fn column_kinds(&self) -> Vec<ColumnKind> {
        let mut kinds: Vec<ColumnKind> = self
            .attributes
            .iter()
            .map(|a| match &a.kind {
                AttributeKind::Numeric => ColumnKind::Numeric,
                AttributeKind::Nominal(v) => ColumnKind::Categorical {
                    arity: v.len() as u32,
                },
            })
            .collect();
        if self.augmented {
            kinds
                .extend((0..self.n_labels()).map(|j| ColumnKind::LabelFeature { label: j as u32 }));
        }
        kinds
    }

    /// Appends one label-feature column per label, set to [`UNKNOWN`].
    pub fn augment(&self) -> Result<MultiLabelDataset> {
        if self.augmented {
            return Err(DatasetError::AlreadyAugmented);
        }
        Ok(MultiLabelDataset {
            attributes: self.attributes.clone(),
            label_names: self.label_names.clone(),
            features: self.features.widened(self.n_labels()),
            labels: self.labels.clone(),
            augmented: true,
        })
    }

    /// Rows `idx` as a new dataset (keeps augmentation state).
    pub fn subset(&self, idx: &[usize]) -> MultiLabelDataset {
        let w = self.width();
        let n = self.n_labels();
        let mut f = Vec::with_capacity(idx.len() * w);
        let mut l = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            f.extend_from_slice(self.features.row(i));
            l.extend_from_slice(self.labels.row(i));
        }
        MultiLabelDataset {
            attributes: self.attributes.clone(),
            label_names: self.label_names.clone(),
            features: FeatureMatrix::new(idx.len(), w, f),
            labels: LabelMatrix::from_vec(idx.len(), n, l),
            augmented: self.augmented,
        }
    }

    /// Same schema, different rows. Used to keep train/test encodings aligned.
    pub fn same_schema(&self, other: &MultiLabelDataset) -> bool {
        self.attributes == other.attributes && self.label_names == other.label_names
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub instances: usize,
    pub labels: usize,
    pub cardinality: f64,
    pub distinct: usize,
}

pub fn stats(d: &MultiLabelDataset) -> DatasetStats {
    let y = d.labels();
    let total: usize = y.as_slice().iter().map(|&b| b as usize).sum();
    let distinct: HashSet<&[u8]> = y.iter_rows().collect();
    DatasetStats {
        instances: y.rows(),
        labels: y.cols(),
        cardinality: total as f64 / y.rows() as f64,
        distinct: distinct.len(),
    }
}
