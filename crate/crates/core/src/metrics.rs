//! Example-based multi-label measures.
//!
//! All three are computed per instance and averaged over instances:
//! Hamming accuracy (fraction of labels predicted correctly), subset accuracy
//! (exact match) and example-based F1. F1 of an empty truth and an empty
//! prediction is 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabelMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
}

fn check(y: &[u8], yhat: &[u8]) -> Result<(), MetricsError> {
    if y.len() != yhat.len() {
        return Err(MetricsError::LengthMismatch(y.len(), yhat.len()));
    }
    Ok(())
}

pub fn hamming_accuracy(y: &[u8], yhat: &[u8]) -> Result<f64, MetricsError> {
    check(y, yhat)?;
    if y.is_empty() {
        return Ok(1.0);
    }
    let hits = y.iter().zip(yhat).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y.len() as f64)
}

pub fn subset_accuracy(y: &[u8], yhat: &[u8]) -> Result<f64, MetricsError> {
    check(y, yhat)?;
    Ok(if y == yhat { 1.0 } else { 0.0 })
}

pub fn example_f1(y: &[u8], yhat: &[u8]) -> Result<f64, MetricsError> {
    check(y, yhat)?;
    let tp: usize = y.iter().zip(yhat).map(|(&a, &b)| (a & b) as usize).sum();
    let pos: usize = y.iter().map(|&a| a as usize).sum::<usize>()
        + yhat.iter().map(|&b| b as usize).sum::<usize>();
    if pos == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / pos as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub train_seconds: f64,
    pub predict_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerInstance {
    pub hamming_accuracy: Vec<f64>,
    pub subset_accuracy: Vec<f64>,
    pub example_f1: Vec<f64>,
}

/// Schema tag written into every serialized report.
pub const REPORT_SCHEMA: &str = "mldcc-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub instances: usize,
    pub labels: usize,
    pub hamming_accuracy: f64,
    pub subset_accuracy: f64,
    pub example_f1: f64,
    pub per_instance: PerInstance,
    pub timing: Timing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn evaluate(y: &LabelMatrix, yhat: &LabelMatrix) -> Result<EvalReport, MetricsError> {
    if y.rows() != yhat.rows() || y.cols() != yhat.cols() {
        return Err(MetricsError::ShapeMismatch(
            y.rows(),
            y.cols(),
            yhat.rows(),
            yhat.cols(),
        ));
    }
    let mut per = PerInstance::default();
    for i in 0..y.rows() {
        let (a, b) = (y.row(i), yhat.row(i));
        per.hamming_accuracy.push(hamming_accuracy(a, b)?);
        per.subset_accuracy.push(subset_accuracy(a, b)?);
        per.example_f1.push(example_f1(a, b)?);
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    Ok(EvalReport {
        schema: REPORT_SCHEMA.to_string(),
        instances: y.rows(),
        labels: y.cols(),
        hamming_accuracy: mean(&per.hamming_accuracy),
        subset_accuracy: mean(&per.subset_accuracy),
        example_f1: mean(&per.example_f1),
        per_instance: per,
        timing: Timing::default(),
        trace: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        let y = [1, 1, 0, 0];
        let p = [1, 0, 0, 0];
        assert_eq!(hamming_accuracy(&y, &p).unwrap(), 0.75);
        assert_eq!(subset_accuracy(&y, &p).unwrap(), 0.0);
        assert!((example_f1(&y, &p).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identity_and_complement() {
        let y = [1, 0, 1];
        assert_eq!(hamming_accuracy(&y, &y).unwrap(), 1.0);
        assert_eq!(subset_accuracy(&y, &y).unwrap(), 1.0);
        assert_eq!(example_f1(&y, &y).unwrap(), 1.0);
        let c = [0, 1, 0];
        assert_eq!(hamming_accuracy(&y, &c).unwrap(), 0.0);
        assert_eq!(example_f1(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(subset_accuracy(&[0, 0], &[0, 0]).unwrap(), 1.0);
        assert_eq!(example_f1(&[0, 0], &[0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(
            hamming_accuracy(&[1], &[1, 0]),
            Err(MetricsError::LengthMismatch(1, 2))
        );
        assert!(example_f1(&[1], &[]).is_err());
        assert!(subset_accuracy(&[], &[0]).is_err());
    }

    #[test]
    fn report_means() {
        let y = LabelMatrix::from_rows(&[vec![1, 0], vec![0, 1]]);
        let p = LabelMatrix::from_rows(&[vec![1, 0], vec![1, 0]]);
        let r = evaluate(&y, &p).unwrap();
        assert_eq!(r.per_instance.example_f1, vec![1.0, 0.0]);
        assert_eq!(r.example_f1, 0.5);
        let perfect = evaluate(&y, &y).unwrap();
        assert_eq!(
            (
                perfect.hamming_accuracy,
                perfect.subset_accuracy,
                perfect.example_f1
            ),
            (1.0, 1.0, 1.0)
        );
        let single = evaluate(
            &LabelMatrix::from_rows(&[vec![1, 1, 0, 0]]),
            &LabelMatrix::from_rows(&[vec![1, 0, 0, 0]]),
        )
        .unwrap();
        assert_eq!(single.hamming_accuracy, 0.75);
        assert_eq!(single.per_instance.hamming_accuracy, vec![0.75]);
        assert!(evaluate(&y, &LabelMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn report_json_keys() {
        let y = LabelMatrix::from_rows(&[vec![1, 0]]);
        let v: serde_json::Value =
            serde_json::from_str(&evaluate(&y, &y).unwrap().to_json()).unwrap();
        for k in [
            "schema",
            "hamming_accuracy",
            "subset_accuracy",
            "example_f1",
            "per_instance",
            "timing",
        ] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
        assert_eq!(v["schema"], REPORT_SCHEMA);
    }

    fn pair() -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<usize>)> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(0u8..2, n),
                prop::collection::vec(0u8..2, n),
                Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            )
        })
    }

    proptest! {
        #[test]
        fn exact_match_equivalences((y, p, _perm) in pair()) {
            let sa = subset_accuracy(&y, &p).unwrap();
            let ha = hamming_accuracy(&y, &p).unwrap();
            let f1 = example_f1(&y, &p).unwrap();
            prop_assert_eq!(sa == 1.0, ha == 1.0);
            if sa == 1.0 { prop_assert_eq!(f1, 1.0); }
            for v in [sa, ha, f1] { prop_assert!((0.0..=1.0).contains(&v)); }
            prop_assert_eq!(example_f1(&y, &y).unwrap(), 1.0);
        }

        #[test]
        fn permutation_invariant((y, p, perm) in pair()) {
            let yp: Vec<u8> = perm.iter().map(|&k| y[k]).collect();
            let pp: Vec<u8> = perm.iter().map(|&k| p[k]).collect();
            prop_assert_eq!(hamming_accuracy(&y, &p).unwrap(), hamming_accuracy(&yp, &pp).unwrap());
            prop_assert_eq!(subset_accuracy(&y, &p).unwrap(), subset_accuracy(&yp, &pp).unwrap());
            prop_assert_eq!(example_f1(&y, &p).unwrap(), example_f1(&yp, &pp).unwrap());
        }
    }
}
