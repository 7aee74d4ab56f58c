//! CSV input: header row, trailing label columns in {0,1}.
//!
//! A feature column is numeric when every non-empty cell parses as a number,
//! otherwise nominal with the sorted distinct values as its vocabulary.
//! Empty cells are missing.

use std::path::Path;

use super::{
    Attribute, AttributeKind, DatasetError, FeatureMatrix, LabelMatrix, MultiLabelDataset, Result,
};

pub fn load_csv(path: impl AsRef<Path>, label_count: usize) -> Result<MultiLabelDataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DatasetError::NotFound(path.display().to_string()));
    }
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, label_count)
}

pub fn parse_csv(text: &str, label_count: usize) -> Result<MultiLabelDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(1, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if label_count == 0 {
        return Err(DatasetError::NoLabels);
    }
    if label_count > header.len() {
        return Err(DatasetError::Invalid(format!(
            "{label_count} labels requested but only {} columns",
            header.len()
        )));
    }
    let q = header.len() - label_count;

    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut ys: Vec<u8> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(0, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(DatasetError::Ragged {
                line,
                expected: header.len(),
                found: rec.len(),
            });
        }
        cells.push(rec.iter().take(q).map(|s| s.trim().to_string()).collect());
        for s in rec.iter().skip(q) {
            ys.push(match s.trim() {
                "1" => 1,
                "0" => 0,
                other => {
                    return Err(DatasetError::NonBinaryLabel {
                        line,
                        value: other.to_string(),
                    })
                }
            });
        }
    }
    if cells.is_empty() {
        return Err(DatasetError::Empty);
    }
    let m = cells.len();

    let mut attributes = Vec::with_capacity(q);
    let mut data = vec![f64::NAN; m * q];
    for c in 0..q {
        let numeric = cells
            .iter()
            .all(|r| r[c].is_empty() || r[c].parse::<f64>().is_ok());
        if numeric {
            for (i, r) in cells.iter().enumerate() {
                if !r[c].is_empty() {
                    data[i * q + c] = r[c].parse().unwrap();
                }
            }
            attributes.push(Attribute::numeric(header[c].clone()));
        } else {
            let mut vocab: Vec<String> = cells
                .iter()
                .filter(|r| !r[c].is_empty())
                .map(|r| r[c].clone())
                .collect();
            vocab.sort();
            vocab.dedup();
            for (i, r) in cells.iter().enumerate() {
                if !r[c].is_empty() {
                    data[i * q + c] = vocab.binary_search(&r[c]).unwrap() as f64;
                }
            }
            attributes.push(Attribute {
                name: header[c].clone(),
                kind: AttributeKind::Nominal(vocab),
            });
        }
    }
    MultiLabelDataset::new(
        attributes,
        header[q..].to_vec(),
        FeatureMatrix::new(m, q, data),
        LabelMatrix::from_vec(m, label_count, ys),
    )
}

fn csv_err(line: usize, e: csv::Error) -> DatasetError {
    let line = e.position().map_or(line, |p| p.line() as usize);
    DatasetError::Parse {
        line,
        msg: e.to_string(),
    }
}
