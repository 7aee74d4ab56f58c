use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use mldcc::dataset::{
    stats as dataset_stats, write_arff, write_mulan_xml, DatasetError, LabelMatrix,
    MultiLabelDataset,
};
use mldcc::metrics::{evaluate, EvalReport, Timing};
use mldcc::model::ModelFile;
use mldcc::synth::{generate, SynthSpec};
use serde::Serialize;
use serde_json::json;

use crate::config::{load_dataset, RunConfig};
use crate::pipeline;

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn required<'a>(p: Option<&'a Path>, what: &str) -> Result<&'a Path> {
    p.ok_or_else(|| anyhow!("no {what} set: pass --{what} or put it in the config"))
}

pub fn train(
    cfg: &RunConfig,
    out: &Path,
    manifest: Option<&Path>,
    loss_csv: Option<&Path>,
) -> Result<()> {
    let train_path = required(cfg.train.as_deref(), "train")?;
    let t0 = Instant::now();
    let d = load_dataset(train_path, cfg.labels.as_deref())?;
    let load_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let mut trained = pipeline::train(cfg, &d)?;
    let train_seconds = t1.elapsed().as_secs_f64();
    trained.file.train_seconds = Some(train_seconds);
    trained.file.save(out)?;

    let st = dataset_stats(&d);
    let doc = json!({
        "format": "mldcc-run",
        "version": 1,
        "command": "train",
        "algorithm": cfg.algorithm.name(),
        "seed": cfg.seed,
        "config": trained.file.config,
        "dataset": {
            "path": train_path,
            "instances": st.instances,
            "features": d.n_features(),
            "labels": st.labels,
            "cardinality": st.cardinality,
            "distinct": st.distinct,
        },
        "model": out,
        "timings": { "load_seconds": load_seconds, "train_seconds": train_seconds },
    });
    let manifest = manifest.map_or_else(|| with_suffix(out, ".manifest.json"), Path::to_path_buf);
    emit(
        Some(&manifest),
        &(serde_json::to_string_pretty(&doc)? + "\n"),
    )?;
    if let Some(csv) = &trained.loss_csv {
        let path = loss_csv.map_or_else(|| with_suffix(out, ".loss.csv"), Path::to_path_buf);
        emit(Some(&path), csv)?;
    }
    println!(
        "trained {} in {train_seconds:.2}s -> {}",
        cfg.algorithm.name(),
        out.display()
    );
    Ok(())
}

fn labels_csv(d: &MultiLabelDataset, y: &LabelMatrix) -> String {
    let mut out = d.label_names().join(",");
    out.push('\n');
    for row in y.iter_rows() {
        let cells: Vec<&str> = row
            .iter()
            .map(|&b| if b == 1 { "1" } else { "0" })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Model file, its run config and the dataset at `data` (or the config's test set).
fn model_and_data(
    model: &Path,
    data: Option<&Path>,
    labels: Option<&str>,
) -> Result<(ModelFile, RunConfig, Result<MultiLabelDataset>)> {
    let file = ModelFile::load(model)?;
    let cfg = pipeline::config_of(&file)?;
    let path = required(data.or(cfg.test.as_deref()), "test")?.to_path_buf();
    let d = load_dataset(&path, labels.or(cfg.labels.as_deref()));
    Ok((file, cfg, d))
}

pub fn predict(model: &Path, data: &Path, labels: Option<&str>, out: Option<&Path>) -> Result<()> {
    let (file, _, d) = model_and_data(model, Some(data), labels)?;
    let d = d?;
    let y = pipeline::predict(&file, &d)?;
    emit(out, &labels_csv(&d, &y))
}

/// `a..b` (inclusive), `a..N`, `N` or a single length.
fn parse_range(s: &str, n: usize) -> Result<Vec<usize>> {
    let num = |t: &str| -> Result<usize> {
        let t = t.trim();
        if t.eq_ignore_ascii_case("n") {
            Ok(n)
        } else {
            t.parse().map_err(|_| anyhow!("bad chain length `{t}`"))
        }
    };
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => (num(s)?, num(s)?),
    };
    if a > b {
        bail!("empty sweep range {s}");
    }
    Ok((a..=b).collect())
}

#[derive(Serialize)]
struct SweepEntry {
    k: usize,
    #[serde(flatten)]
    report: EvalReport,
}

pub fn eval(
    model: &Path,
    test: Option<&Path>,
    labels: Option<&str>,
    out: Option<&Path>,
    sweep_k: Option<&str>,
    sweep_csv: Option<&Path>,
) -> Result<()> {
    let (file, _, d) = model_and_data(model, test, labels)?;
    let d = d?;
    let train_seconds = file.train_seconds.unwrap_or(0.0);
    let Some(range) = sweep_k else {
        let t = Instant::now();
        let y = pipeline::predict(&file, &d)?;
        let mut report = evaluate(d.labels(), &y)?;
        report.timing = Timing {
            train_seconds,
            predict_seconds: t.elapsed().as_secs_f64(),
        };
        return emit(out, &(report.to_json() + "\n"));
    };
    let ks = parse_range(range, d.n_labels())?;
    let t = Instant::now();
    let preds = pipeline::sweep(&file, &d, &ks)?;
    let predict_seconds = t.elapsed().as_secs_f64();
    let mut entries = Vec::with_capacity(preds.len());
    let mut curve = String::from("k,hamming_accuracy,subset_accuracy,example_f1\n");
    for (k, y) in preds {
        let mut report = evaluate(d.labels(), &y)?;
        report.timing = Timing {
            train_seconds,
            predict_seconds,
        };
        let _ = writeln!(
            curve,
            "{k},{},{},{}",
            report.hamming_accuracy, report.subset_accuracy, report.example_f1
        );
        entries.push(SweepEntry { k, report });
    }
    if let Some(p) = sweep_csv {
        emit(Some(p), &curve)?;
    }
    emit(out, &(serde_json::to_string_pretty(&entries)? + "\n"))
}

#[derive(Serialize)]
struct BenchRow {
    name: String,
    algorithm: String,
    hamming_accuracy: f64,
    subset_accuracy: f64,
    example_f1: f64,
    train_seconds: f64,
    predict_seconds: f64,
    f1_ratio: f64,
    train_time_ratio: f64,
    predict_time_ratio: f64,
}

const BENCH_HEADER: &str = "name,algorithm,hamming_accuracy,subset_accuracy,example_f1,\
train_seconds,predict_seconds,f1_ratio,train_time_ratio,predict_time_ratio\n";

fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.name,
            r.algorithm,
            r.hamming_accuracy,
            r.subset_accuracy,
            r.example_f1,
            r.train_seconds,
            r.predict_seconds,
            r.f1_ratio,
            r.train_time_ratio,
            r.predict_time_ratio
        );
    }
    out
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

fn bench_one(path: &Path) -> Result<(RunConfig, EvalReport)> {
    let cfg = RunConfig::load(path)?;
    let train = required(cfg.train.as_deref(), "train")?;
    let test = required(cfg.test.as_deref(), "test")?;
    let tr = load_dataset(train, cfg.labels.as_deref())?;
    let te = load_dataset(test, cfg.labels.as_deref())?;
    let t = Instant::now();
    let trained = pipeline::train(&cfg, &tr)?;
    let train_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let y = pipeline::predict(&trained.file, &te)?;
    let predict_seconds = t.elapsed().as_secs_f64();
    let mut report = evaluate(te.labels(), &y)?;
    report.timing = Timing {
        train_seconds,
        predict_seconds,
    };
    Ok((cfg, report))
}

pub fn bench(configs: &[PathBuf], out_csv: Option<&Path>, out_json: Option<&Path>) -> Result<()> {
    if configs.len() < 2 {
        bail!("need >=2 configs, got {}", configs.len());
    }
    let mut rows: Vec<BenchRow> = Vec::new();
    for path in configs {
        let (cfg, r) = match bench_one(path) {
            Ok(v) => v,
            Err(e) => {
                if let Some(p) = out_csv {
                    emit(Some(p), &bench_csv(&rows))?;
                }
                return Err(e.context(format!(
                    "config {} failed after {} completed runs",
                    path.display(),
                    rows.len()
                )));
            }
        };
        let base = rows.first();
        let row = BenchRow {
            name: cfg.display_name(),
            algorithm: cfg.algorithm.name().to_string(),
            hamming_accuracy: r.hamming_accuracy,
            subset_accuracy: r.subset_accuracy,
            example_f1: r.example_f1,
            train_seconds: r.timing.train_seconds,
            predict_seconds: r.timing.predict_seconds,
            f1_ratio: base.map_or(1.0, |b| ratio(r.example_f1, b.example_f1)),
            train_time_ratio: base.map_or(1.0, |b| ratio(r.timing.train_seconds, b.train_seconds)),
            predict_time_ratio: base
                .map_or(1.0, |b| ratio(r.timing.predict_seconds, b.predict_seconds)),
        };
        rows.push(row);
    }
    if let Some(p) = out_json {
        let doc = json!({ "schema": "mldcc-bench/1", "baseline": rows[0].name, "rows": rows });
        emit(Some(p), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    }
    emit(out_csv, &bench_csv(&rows))
}

pub fn trace(
    model: &Path,
    test: Option<&Path>,
    labels: Option<&str>,
    out: Option<&Path>,
) -> Result<()> {
    let (file, _, d) = model_and_data(model, test, labels)?;
    let csv = match d {
        Ok(d) => pipeline::trace(&file, &d)?,
        Err(e) if matches!(e.downcast_ref(), Some(DatasetError::Empty)) => {
            pipeline::trace_header(&file)?
        }
        Err(e) => return Err(e),
    };
    emit(out, &csv)
}

pub fn stats(data: &Path, labels: Option<&str>) -> Result<()> {
    let d = load_dataset(data, labels)?;
    let st = dataset_stats(&d);
    let doc = json!({
        "instances": st.instances,
        "features": d.n_features(),
        "labels": st.labels,
        "cardinality": st.cardinality,
        "distinct": st.distinct,
        "label_frequencies": d.labels().label_frequencies(),
    });
    emit(None, &(serde_json::to_string_pretty(&doc)? + "\n"))
}

pub fn synth(preset: &str, seed: u64, out_dir: &Path) -> Result<()> {
    let spec = SynthSpec::preset(preset).ok_or_else(|| {
        anyhow!(
            "unknown preset `{preset}` (known: {})",
            SynthSpec::PRESETS.join(", ")
        )
    })?;
    let (tr, te) = generate(&spec, seed);
    std::fs::create_dir_all(out_dir)?;
    for (part, d) in [("train", &tr), ("test", &te)] {
        let mut buf = Vec::new();
        write_arff(d, preset, &mut buf)?;
        std::fs::write(out_dir.join(format!("{preset}-{part}.arff")), buf)?;
    }
    let mut xml = Vec::new();
    write_mulan_xml(&tr, &mut xml)?;
    std::fs::write(out_dir.join(format!("{preset}.xml")), xml)?;
    println!(
        "wrote {preset} ({} train, {} test) to {}",
        tr.n_instances(),
        te.n_instances(),
        out_dir.display()
    );
    Ok(())
}
