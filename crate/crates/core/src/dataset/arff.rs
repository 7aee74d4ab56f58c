//! ARFF reader/writer with MULAN label headers.
//!
//! Supports dense rows, sparse rows (`{index value, ...}`), quoted names and
//! values, `%` comments and `?` for missing cells. Omitted cells of a sparse
//! row take the attribute's zero: `0.0` for numeric and the first declared
//! category for nominal attributes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{
    Attribute, AttributeKind, DatasetError, FeatureMatrix, LabelMatrix, MultiLabelDataset, Result,
};

/// Which ARFF attributes are labels.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelSpec {
    /// MULAN XML file listing label names.
    Xml(PathBuf),
    /// Label names given directly.
    Names(Vec<String>),
    /// The last `n` attributes are labels.
    Trailing(usize),
}

#[derive(Debug, Clone)]
struct RawAttribute {
    name: String,
    kind: AttributeKind,
}

pub fn load_arff(path: impl AsRef<Path>, labels: &LabelSpec) -> Result<MultiLabelDataset> {
    let path = path.as_ref();
    let text = read_existing(path)?;
    let spec = match labels {
        LabelSpec::Xml(xml) => LabelSpec::Names(read_mulan_xml(xml)?),
        other => other.clone(),
    };
    parse_arff(&text, &spec)
}

fn read_existing(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(DatasetError::NotFound(path.display().to_string()));
    }
    Ok(fs::read_to_string(path)?)
}

/// Label names from a MULAN XML header, in document order.
pub fn read_mulan_xml(path: &Path) -> Result<Vec<String>> {
    let text = read_existing(path)?;
    parse_mulan_xml(&text)
}

pub(crate) fn parse_mulan_xml(text: &str) -> Result<Vec<String>> {
    let doc = roxmltree::Document::parse(text).map_err(|e| DatasetError::Xml(e.to_string()))?;
    let names: Vec<String> = doc
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "label")
        .filter_map(|n| n.attribute("name").map(str::to_string))
        .collect();
    if names.is_empty() {
        return Err(DatasetError::NoLabels);
    }
    Ok(names)
}

pub fn parse_arff(text: &str, labels: &LabelSpec) -> Result<MultiLabelDataset> {
    let mut attrs: Vec<RawAttribute> = Vec::new();
    let mut lines = text.lines().enumerate();
    let mut in_data = false;

    for (no, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            continue;
        } else if lower.starts_with("@attribute") {
            attrs.push(parse_attribute(&line["@attribute".len()..], no + 1)?);
        } else if lower.starts_with("@data") {
            in_data = true;
            break;
        } else {
            return Err(parse_err(
                no + 1,
                format!("unexpected header line `{line}`"),
            ));
        }
    }
    if !in_data {
        return Err(parse_err(0, "missing @data section".into()));
    }

    let label_idx = resolve_labels(&attrs, labels)?;
    let is_label: Vec<bool> = {
        let mut v = vec![false; attrs.len()];
        for &i in &label_idx {
            v[i] = true;
        }
        v
    };
    let feature_idx: Vec<usize> = (0..attrs.len()).filter(|&i| !is_label[i]).collect();
    for &li in &label_idx {
        if let AttributeKind::Nominal(vals) = &attrs[li].kind {
            if vals.iter().any(|v| v != "0" && v != "1") {
                return Err(DatasetError::NonBinaryLabel {
                    line: 0,
                    value: format!("{{{}}}", vals.join(",")),
                });
            }
        }
    }
    let nominal_lookup: Vec<Option<HashMap<&str, usize>>> = attrs
        .iter()
        .map(|a| match &a.kind {
            AttributeKind::Numeric => None,
            AttributeKind::Nominal(v) => {
                Some(v.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect())
            }
        })
        .collect();

    let q = feature_idx.len();
    let n = label_idx.len();
    let mut features = Vec::new();
    let mut ys = Vec::new();
    let mut m = 0usize;
    let mut cells: Vec<Option<String>> = vec![None; attrs.len()];

    for (no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let line_no = no + 1;
        cells.iter_mut().for_each(|c| *c = None);
        if line.starts_with('{') {
            let inner = line
                .strip_prefix('{')
                .and_then(|s| s.trim_end().strip_suffix('}'))
                .ok_or_else(|| parse_err(line_no, "unterminated sparse row".into()))?;
            for entry in split_values(inner, line_no)? {
                let entry = entry.trim();
                if entry.is_empty() {
                    continue;
                }
                let (idx, val) = entry
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| parse_err(line_no, format!("bad sparse entry `{entry}`")))?;
                let idx: usize = idx
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad sparse index `{idx}`")))?;
                if idx >= attrs.len() {
                    return Err(parse_err(
                        line_no,
                        format!("sparse index {idx} out of range"),
                    ));
                }
                cells[idx] = Some(unquote(val.trim()));
            }
            for (c, a) in cells.iter_mut().zip(&attrs) {
                if c.is_none() {
                    *c = Some(match &a.kind {
                        AttributeKind::Numeric => "0".to_string(),
                        AttributeKind::Nominal(v) => v[0].clone(),
                    });
                }
            }
        } else {
            let vals = split_values(line, line_no)?;
            if vals.len() != attrs.len() {
                return Err(DatasetError::Ragged {
                    line: line_no,
                    expected: attrs.len(),
                    found: vals.len(),
                });
            }
            for (c, v) in cells.iter_mut().zip(vals) {
                *c = Some(unquote(v.trim()));
            }
        }

        for &fi in &feature_idx {
            let s = cells[fi].as_deref().unwrap_or("?");
            let v = if s == "?" {
                f64::NAN
            } else {
                match &nominal_lookup[fi] {
                    None => s.parse::<f64>().map_err(|_| {
                        parse_err(
                            line_no,
                            format!("bad numeric value `{s}` for `{}`", attrs[fi].name),
                        )
                    })?,
                    Some(map) => *map.get(s).ok_or_else(|| {
                        parse_err(
                            line_no,
                            format!("undeclared category `{s}` for `{}`", attrs[fi].name),
                        )
                    })? as f64,
                }
            };
            features.push(v);
        }
        for &li in &label_idx {
            let s = cells[li].as_deref().unwrap_or("?");
            let b = match s {
                "1" => 1u8,
                "0" => 0u8,
                other => match other.parse::<f64>() {
                    Ok(x) if x == 1.0 => 1,
                    Ok(x) if x == 0.0 => 0,
                    _ => {
                        return Err(DatasetError::NonBinaryLabel {
                            line: line_no,
                            value: other.to_string(),
                        })
                    }
                },
            };
            ys.push(b);
        }
        m += 1;
    }

    if m == 0 {
        return Err(DatasetError::Empty);
    }
    let attributes = feature_idx
        .iter()
        .map(|&i| Attribute {
            name: attrs[i].name.clone(),
            kind: attrs[i].kind.clone(),
        })
        .collect();
    let names = label_idx.iter().map(|&i| attrs[i].name.clone()).collect();
    MultiLabelDataset::new(
        attributes,
        names,
        FeatureMatrix::new(m, q, features),
        LabelMatrix::from_vec(m, n, ys),
    )
}

fn resolve_labels(attrs: &[RawAttribute], spec: &LabelSpec) -> Result<Vec<usize>> {
    let idx: Vec<usize> = match spec {
        LabelSpec::Trailing(n) => {
            if *n > attrs.len() {
                return Err(DatasetError::Invalid(format!(
                    "{n} labels requested but only {} attributes",
                    attrs.len()
                )));
            }
            (attrs.len() - n..attrs.len()).collect()
        }
        LabelSpec::Names(names) => {
            let pos: HashMap<&str, usize> = attrs
                .iter()
                .enumerate()
                .map(|(i, a)| (a.name.as_str(), i))
                .collect();
            names
                .iter()
                .map(|n| {
                    pos.get(n.as_str())
                        .copied()
                        .ok_or_else(|| DatasetError::UnknownLabel(n.clone()))
                })
                .collect::<Result<_>>()?
        }
        LabelSpec::Xml(p) => return resolve_labels(attrs, &LabelSpec::Names(read_mulan_xml(p)?)),
    };
    if idx.is_empty() {
        return Err(DatasetError::NoLabels);
    }
    Ok(idx)
}

fn parse_attribute(rest: &str, line: usize) -> Result<RawAttribute> {
    let rest = rest.trim();
    let (name, ty) =
        take_name(rest).ok_or_else(|| parse_err(line, "missing attribute name".into()))?;
    let ty = ty.trim();
    let kind = if ty.starts_with('{') {
        let inner = ty
            .strip_prefix('{')
            .and_then(|s| s.trim_end().strip_suffix('}'))
            .ok_or_else(|| parse_err(line, "unterminated nominal declaration".into()))?;
        let vals: Vec<String> = split_values(inner, line)?
            .into_iter()
            .map(|v| unquote(v.trim()))
            .collect();
        if vals.is_empty() {
            return Err(parse_err(
                line,
                format!("nominal attribute `{name}` has no values"),
            ));
        }
        AttributeKind::Nominal(vals)
    } else {
        match ty.to_ascii_lowercase().as_str() {
            "numeric" | "real" | "integer" => AttributeKind::Numeric,
            other => {
                return Err(parse_err(
                    line,
                    format!("unsupported attribute type `{other}` for `{name}`"),
                ))
            }
        }
    };
    Ok(RawAttribute { name, kind })
}

/// Splits off a possibly quoted attribute name.
fn take_name(s: &str) -> Option<(String, &str)> {
    let first = s.chars().next()?;
    if first == '\'' || first == '"' {
        let mut out = String::new();
        let mut escaped = false;
        for (i, c) in s.char_indices().skip(1) {
            if escaped {
                out.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == first {
                return Some((out, &s[i + 1..]));
            } else {
                out.push(c);
            }
        }
        None
    } else {
        let end = s.find(char::is_whitespace)?;
        Some((s[..end].to_string(), &s[end..]))
    }
}

/// Comma split that respects single and double quotes.
fn split_values(s: &str, line: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for c in s.chars() {
        if escaped {
            cur.push(c);
            escaped = false;
            continue;
        }
        match quote {
            Some(q) => {
                if c == '\\' {
                    cur.push(c);
                    escaped = true;
                } else {
                    if c == q {
                        quote = None;
                    }
                    cur.push(c);
                }
            }
            None => match c {
                '\'' | '"' => {
                    quote = Some(c);
                    cur.push(c);
                }
                ',' => out.push(std::mem::take(&mut cur)),
                _ => cur.push(c),
            },
        }
    }
    if quote.is_some() {
        return Err(parse_err(line, "unterminated quote".into()));
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

fn unquote(s: &str) -> String {
    let b = s.as_bytes();
    if b.len() >= 2 && (b[0] == b'\'' || b[0] == b'"') && b[b.len() - 1] == b[0] {
        let mut out = String::new();
        let mut escaped = false;
        for c in s[1..s.len() - 1].chars() {
            if escaped {
                out.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else {
                out.push(c);
            }
        }
        out
    } else {
        s.to_string()
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

fn parse_err(line: usize, msg: String) -> DatasetError {
    DatasetError::Parse { line, msg }
}

/// Writes the original features and the labels (as trailing `{0,1}`
/// attributes) in dense ARFF. Label-feature columns of an augmented dataset
/// are not written.
pub fn write_arff<W: Write>(
    d: &MultiLabelDataset,
    relation: &str,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "@relation {}", quote(relation))?;
    writeln!(w)?;
    for a in d.attributes() {
        match &a.kind {
            AttributeKind::Numeric => writeln!(w, "@attribute {} numeric", quote(&a.name))?,
            AttributeKind::Nominal(v) => {
                let vals: Vec<String> = v.iter().map(|s| quote(s)).collect();
                writeln!(w, "@attribute {} {{{}}}", quote(&a.name), vals.join(","))?
            }
        }
    }
    for name in d.label_names() {
        writeln!(w, "@attribute {} {{0,1}}", quote(name))?;
    }
    writeln!(w)?;
    writeln!(w, "@data")?;
    let mut line = String::new();
    for i in 0..d.n_instances() {
        line.clear();
        let row = d.row(i);
        for (c, a) in d.attributes().iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            let v = row[c];
            match &a.kind {
                _ if v.is_nan() => line.push('?'),
                AttributeKind::Numeric => write!(line, "{v}").unwrap(),
                AttributeKind::Nominal(vals) => line.push_str(&quote(&vals[v as usize])),
            }
        }
        for &b in d.labels().row(i) {
            if !line.is_empty() {
                line.push(',');
            }
            line.push(if b == 1 { '1' } else { '0' });
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_mulan_xml<W: Write>(d: &MultiLabelDataset, mut w: W) -> std::io::Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="utf-8"?>"#)?;
    writeln!(w, r#"<labels xmlns="http://mulan.sourceforge.net/labels">"#)?;
    for name in d.label_names() {
        let esc = name
            .replace('&', "&amp;")
            .replace('"', "&quot;")
            .replace('<', "&lt;")
            .replace('>', "&gt;");
        writeln!(w, r#"<label name="{esc}"></label>"#)?;
    }
    writeln!(w, "</labels>")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureValue;

    const DENSE: &str = "% comment\n@relation 'toy'\n@attribute a numeric\n@attribute 'b c' {x,y,z}\n@attribute l1 {0,1}\n@attribute l2 {0,1}\n@data\n1.5,y,1,0\n?,'z',0,1\n";

    #[test]
    fn dense_with_trailing_labels() {
        let d = parse_arff(DENSE, &LabelSpec::Trailing(2)).unwrap();
        assert_eq!(d.n_instances(), 2);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.n_labels(), 2);
        assert_eq!(d.attributes()[1].name, "b c");
        assert_eq!(d.value(0, 1), FeatureValue::Categorical(1));
        assert_eq!(d.value(1, 0), FeatureValue::Missing);
        assert_eq!(d.labels().row(0), &[1, 0]);
        assert_eq!(d.labels().row(1), &[0, 1]);
    }

    #[test]
    fn labels_by_name_may_lead() {
        let text = "@relation r\n@attribute l1 {0,1}\n@attribute a numeric\n@data\n1,2.0\n0,3.0\n";
        let d = parse_arff(text, &LabelSpec::Names(vec!["l1".into()])).unwrap();
        assert_eq!(d.n_features(), 1);
        assert_eq!(d.row(1), &[3.0]);
        assert_eq!(d.labels().row(0), &[1]);
    }

    #[test]
    fn sparse_row_zero_fills() {
        let mut text = String::from("@relation s\n");
        for i in 0..10 {
            text.push_str(&format!("@attribute f{i} numeric\n"));
        }
        text.push_str("@attribute l0 {0,1}\n@attribute l1 {0,1}\n@data\n{2 1.5,8 1,11 1}\n");
        let d = parse_arff(&text, &LabelSpec::Trailing(2)).unwrap();
        let mut expected = vec![0.0; 10];
        expected[2] = 1.5;
        expected[8] = 1.0;
        assert_eq!(d.row(0), expected.as_slice());
        assert_eq!(d.labels().row(0), &[0, 1]);
    }

    #[test]
    fn sparse_nominal_uses_first_category() {
        let text = "@relation s\n@attribute c {red,green}\n@attribute x numeric\n@attribute l {0,1}\n@data\n{1 2}\n";
        let d = parse_arff(text, &LabelSpec::Trailing(1)).unwrap();
        assert_eq!(d.value(0, 0), FeatureValue::Categorical(0));
        assert_eq!(d.labels().row(0), &[0]);
    }

    #[test]
    fn empty_data_is_error() {
        let text = "@relation e\n@attribute a numeric\n@attribute l {0,1}\n@data\n";
        assert!(matches!(
            parse_arff(text, &LabelSpec::Trailing(1)),
            Err(DatasetError::Empty)
        ));
    }

    #[test]
    fn unknown_label_name() {
        let err = parse_arff(DENSE, &LabelSpec::Names(vec!["nope".into()])).unwrap_err();
        assert!(matches!(err, DatasetError::UnknownLabel(n) if n == "nope"));
    }

    #[test]
    fn non_binary_numeric_label() {
        let text = "@relation e\n@attribute a numeric\n@attribute l numeric\n@data\n1,1\n2,0.5\n";
        let err = parse_arff(text, &LabelSpec::Trailing(1)).unwrap_err();
        assert!(
            matches!(err, DatasetError::NonBinaryLabel { line: 6, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "@relation e\n@attribute a numeric\n@attribute l {0,1}\n@data\n1,1\nfoo,0\n";
        match parse_arff(text, &LabelSpec::Trailing(1)).unwrap_err() {
            DatasetError::Parse { line, .. } => assert_eq!(line, 6),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn mulan_xml_names_in_order() {
        let xml = r#"<?xml version="1.0" encoding="utf-8"?>
<labels xmlns="http://mulan.sourceforge.net/labels">
<label name="amazed-suprised"></label>
<label name="happy-pleased"></label>
<label name="relaxing-calm"><label name="nested"/></label>
</labels>"#;
        assert_eq!(
            parse_mulan_xml(xml).unwrap(),
            vec![
                "amazed-suprised",
                "happy-pleased",
                "relaxing-calm",
                "nested"
            ]
        );
    }
}
