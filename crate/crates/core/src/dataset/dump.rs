//! Canonical text dump used for golden tests.
//!
//! ```text
//! mldcc-dump 1
//! shape <M> <Q> <N> <augmented 0|1>
//! attr <q> numeric <name>
//! attr <q> nominal <k> <name>
//! label <j> <name>
//! row <i> <cell> ... | <y_0> ... <y_N-1>
//! ```
//!
//! Cells are the shortest round-trip decimal for numeric values, `#k` for
//! category `k`, and `?` for missing or unknown. Label-feature columns of an
//! augmented dataset follow the original cells on the same row.

use std::fmt::Write;

use super::{AttributeKind, MultiLabelDataset};

pub fn canonical_dump(d: &MultiLabelDataset) -> String {
    let mut out = String::new();
    writeln!(out, "mldcc-dump 1").unwrap();
    writeln!(
        out,
        "shape {} {} {} {}",
        d.n_instances(),
        d.n_features(),
        d.n_labels(),
        d.is_augmented() as u8
    )
    .unwrap();
    for (q, a) in d.attributes().iter().enumerate() {
        match &a.kind {
            AttributeKind::Numeric => writeln!(out, "attr {q} numeric {}", a.name).unwrap(),
            AttributeKind::Nominal(v) => {
                writeln!(out, "attr {q} nominal {} {}", v.len(), a.name).unwrap()
            }
        }
    }
    for (j, name) in d.label_names().iter().enumerate() {
        writeln!(out, "label {j} {name}").unwrap();
    }
    let nominal: Vec<bool> = d
        .attributes()
        .iter()
        .map(|a| matches!(a.kind, AttributeKind::Nominal(_)))
        .collect();
    for i in 0..d.n_instances() {
        write!(out, "row {i}").unwrap();
        for (c, &v) in d.row(i).iter().enumerate() {
            if v.is_nan() {
                out.push_str(" ?");
            } else if nominal.get(c).copied().unwrap_or(false) {
                write!(out, " #{}", v as u32).unwrap();
            } else {
                write!(out, " {v}").unwrap();
            }
        }
        out.push_str(" |");
        for &b in d.labels().row(i) {
            write!(out, " {b}").unwrap();
        }
        out.push('\n');
    }
    out
}
