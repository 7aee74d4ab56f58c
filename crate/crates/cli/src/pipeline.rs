//! Training, prediction and traces for every algorithm.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use mldcc::dataset::{LabelMatrix, MultiLabelDataset};
use mldcc::mlboost::MlBoostModel;
use mldcc::model::{Model, ModelFile};
use mldcc::rdt::{ChainOutcome, RdtEnsemble};
use mldcc::xdcc::{trace_csv, BinaryRelevance, ChainModel, ChainParams, StaticChain};

use crate::config::{Algorithm, RunConfig};

pub struct Trained {
    pub file: ModelFile,
    /// Per-round training loss, for boosted models.
    pub loss_csv: Option<String>,
}

fn boost_losses(models: &[MlBoostModel], first: &str) -> String {
    let mut out = format!("{first},round,loss\n");
    for (m, model) in models.iter().enumerate() {
        for (r, loss) in model.loss_log().iter().enumerate() {
            let _ = writeln!(out, "{},{},{loss}", m + 1, r + 1);
        }
    }
    out
}

pub fn train(cfg: &RunConfig, d: &MultiLabelDataset) -> Result<Trained> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    let (x, y) = (d.features(), d.labels());
    let n = d.n_labels();
    if cfg.algorithm.uses_order() {
        cfg.resolved_order = Some(cfg.static_order()?.resolve(y)?);
    }
    let (model, loss_csv) = match cfg.algorithm {
        Algorithm::MlRdt | Algorithm::RdtStatic | Algorithm::RdtDcc => {
            let ens = RdtEnsemble::build(&d.augment()?, &cfg.rdt_params())?;
            (Model::Rdt(ens), None)
        }
        Algorithm::Mlxgb => {
            let m = MlBoostModel::train(x, y, None, &cfg.boost)?;
            let loss = m.loss_csv();
            (Model::Boost(m), Some(loss))
        }
        Algorithm::XdccStd | Algorithm::XdccCum => {
            let params = ChainParams {
                k: cfg.k.unwrap_or(n),
                cumulate: cfg.algorithm == Algorithm::XdccCum,
                cumulate_overrides_propagated: cfg.cumulate_overrides_propagated,
                early_stop: cfg.early_stop,
            };
            let (m, _) = ChainModel::train(x, y, &params, &cfg.boost)?;
            let loss = boost_losses(m.rounds(), "chain_round");
            (Model::Chain(m), Some(loss))
        }
        Algorithm::XgbBr => {
            let m = BinaryRelevance::train(x, y, &cfg.boost)?;
            let loss = boost_losses(m.models(), "label");
            (Model::BinaryRelevance(m), Some(loss))
        }
        Algorithm::XgbCc => {
            let order = cfg.resolved_order.clone().expect("resolved above");
            let m = StaticChain::train(x, y, &order, &cfg.boost)?;
            let loss = boost_losses(m.models(), "position");
            (Model::StaticChain(m), Some(loss))
        }
    };
    let config = serde_json::to_value(&cfg)?;
    Ok(Trained {
        file: ModelFile::new(cfg.algorithm.name(), config, model),
        loss_csv,
    })
}

pub fn config_of(file: &ModelFile) -> Result<RunConfig> {
    serde_json::from_value(file.config.clone()).context("model file carries no run config")
}

fn mismatch(kind: &str, algo: Algorithm) -> anyhow::Error {
    anyhow::anyhow!(
        "model file holds a {kind} model but names algorithm {}",
        algo.name()
    )
}

fn rdt_rows(
    ens: &RdtEnsemble,
    d: &MultiLabelDataset,
    f: impl Fn(&RdtEnsemble, &[f64]) -> Result<Vec<u8>>,
) -> Result<LabelMatrix> {
    if d.n_features() != ens.n_features() {
        bail!(
            "input has {} feature columns, model expects {}",
            d.n_features(),
            ens.n_features()
        );
    }
    let mut out = LabelMatrix::zeros(d.n_instances(), ens.n_labels());
    for i in 0..d.n_instances() {
        out.row_mut(i).copy_from_slice(&f(ens, d.row(i))?);
    }
    Ok(out)
}

fn static_order(cfg: &RunConfig, n: usize) -> Vec<usize> {
    cfg.resolved_order
        .clone()
        .unwrap_or_else(|| (0..n).collect())
}

pub fn predict(file: &ModelFile, d: &MultiLabelDataset) -> Result<LabelMatrix> {
    let cfg = config_of(file)?;
    let x = d.features();
    let out = match (&file.model, cfg.algorithm) {
        (Model::Rdt(ens), Algorithm::MlRdt) => {
            rdt_rows(ens, d, |e, r| Ok(e.predict_multilabel(r)?))?
        }
        (Model::Rdt(ens), Algorithm::RdtDcc) => {
            rdt_rows(ens, d, |e, r| Ok(e.predict_dynamic_chain(r)?.labels))?
        }
        (Model::Rdt(ens), Algorithm::RdtStatic) => {
            let order = static_order(&cfg, ens.n_labels());
            rdt_rows(ens, d, |e, r| Ok(e.predict_static_chain(r, &order)?.labels))?
        }
        (Model::Rdt(_), a) => return Err(mismatch("rdt", a)),
        (Model::Boost(m), Algorithm::Mlxgb) => {
            let p = m.predict_matrix(x)?;
            LabelMatrix::from_vec(
                x.rows(),
                m.n_labels(),
                p.iter().map(|&v| (v >= 0.5) as u8).collect(),
            )
        }
        (Model::Chain(m), Algorithm::XdccStd | Algorithm::XdccCum) => m.predict_labels(x)?,
        (Model::BinaryRelevance(m), Algorithm::XgbBr) => m.predict(x)?,
        (Model::StaticChain(m), Algorithm::XgbCc) => m.predict(x)?,
        (Model::Boost(_), a) => return Err(mismatch("boost", a)),
        (Model::Chain(_), a) => return Err(mismatch("chain", a)),
        (Model::BinaryRelevance(_), a) => return Err(mismatch("binary-relevance", a)),
        (Model::StaticChain(_), a) => return Err(mismatch("static-chain", a)),
    };
    if out.cols() != d.n_labels() {
        bail!(
            "model predicts {} labels, dataset has {}",
            out.cols(),
            d.n_labels()
        );
    }
    Ok(out)
}

/// Predictions of an xdcc model for chain lengths `ks` (each `<= K`).
pub fn sweep(
    file: &ModelFile,
    d: &MultiLabelDataset,
    ks: &[usize],
) -> Result<Vec<(usize, LabelMatrix)>> {
    let cfg = config_of(file)?;
    let Model::Chain(m) = &file.model else {
        bail!(
            "chain-length sweep needs an xdcc model, got {}",
            cfg.algorithm.name()
        );
    };
    if let Some(&k) = ks.iter().find(|&&k| k > m.k()) {
        bail!("sweep length {k} exceeds trained chain length {}", m.k());
    }
    let (all, _) = m.predict_sweep(d.features())?;
    let cum = cfg.algorithm == Algorithm::XdccCum;
    Ok(ks
        .iter()
        .map(|&k| {
            // Early stopping can cut the sweep short; later lengths repeat the last state.
            let p = all
                .get(k)
                .unwrap_or_else(|| all.last().expect("non-empty sweep"));
            (k, p.labels(cum).clone())
        })
        .collect())
}

fn rdt_trace(out: &mut String, instance: usize, chain: &ChainOutcome) {
    for s in &chain.steps {
        let _ = writeln!(
            out,
            "{instance},{},{},{},{}",
            s.iteration, s.label, s.decision, s.marginal
        );
    }
}

const RDT_TRACE_HEADER: &str = "instance,iteration,label,decision,marginal\n";

/// Header-only trace, used for an empty test set.
pub fn trace_header(file: &ModelFile) -> Result<String> {
    let cfg = config_of(file)?;
    match (&file.model, cfg.algorithm) {
        (Model::Rdt(_), Algorithm::RdtDcc | Algorithm::RdtStatic) => {
            Ok(RDT_TRACE_HEADER.to_string())
        }
        (Model::Chain(_), _) => Ok(trace_csv(&[])),
        (_, a) => bail!("not a chain model: {}", a.name()),
    }
}

/// Chain trace as CSV. RDT chains use `instance,iteration,label,decision,marginal`;
/// xdcc uses `round,instance,label,probability,branch`.
pub fn trace(file: &ModelFile, d: &MultiLabelDataset) -> Result<String> {
    let cfg = config_of(file)?;
    match (&file.model, cfg.algorithm) {
        (Model::Rdt(ens), Algorithm::RdtDcc | Algorithm::RdtStatic) => {
            let order = static_order(&cfg, ens.n_labels());
            let mut out = String::from(RDT_TRACE_HEADER);
            for i in 0..d.n_instances() {
                let chain = if cfg.algorithm == Algorithm::RdtDcc {
                    ens.predict_dynamic_chain(d.row(i))?
                } else {
                    ens.predict_static_chain(d.row(i), &order)?
                };
                rdt_trace(&mut out, i, &chain);
            }
            Ok(out)
        }
        (Model::Chain(m), _) => {
            let (_, state) = m.predict(d.features())?;
            Ok(trace_csv(state.trace()))
        }
        (_, a) => bail!("not a chain model: {}", a.name()),
    }
}
