//! Run configuration and dataset loading.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use mldcc::dataset::{load_arff, load_csv, DatasetError, LabelSpec, MultiLabelDataset};
use mldcc::mlboost::BoostParams;
use mldcc::rdt::RdtParams;
use mldcc::xdcc::StaticOrder;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    MlRdt,
    RdtStatic,
    RdtDcc,
    Mlxgb,
    XdccStd,
    XdccCum,
    XgbBr,
    XgbCc,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MlRdt => "ml-rdt",
            Algorithm::RdtStatic => "rdt-static",
            Algorithm::RdtDcc => "rdt-dcc",
            Algorithm::Mlxgb => "mlxgb",
            Algorithm::XdccStd => "xdcc-std",
            Algorithm::XdccCum => "xdcc-cum",
            Algorithm::XgbBr => "xgb-br",
            Algorithm::XgbCc => "xgb-cc",
        }
    }

    pub fn is_rdt(self) -> bool {
        matches!(
            self,
            Algorithm::MlRdt | Algorithm::RdtStatic | Algorithm::RdtDcc
        )
    }

    pub fn uses_order(self) -> bool {
        matches!(self, Algorithm::RdtStatic | Algorithm::XgbCc)
    }
}

/// Random decision tree settings; the seed comes from [`RunConfig::seed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RdtSettings {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub label_tests: f64,
    pub sigma: f64,
}

impl Default for RdtSettings {
    fn default() -> Self {
        let p = RdtParams::default();
        RdtSettings {
            trees: p.tree_count,
            max_depth: p.max_depth,
            min_leaf: p.min_leaf_size,
            label_tests: p.label_test_fraction,
            sigma: p.activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Display name in benchmark tables.
    pub name: Option<String>,
    pub algorithm: Algorithm,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Label spec: an `.xml` path, a trailing label count, or `names:a,b`.
    pub labels: Option<String>,
    pub seed: u64,
    pub rdt: RdtSettings,
    pub boost: BoostParams,
    /// Chain length for xdcc; defaults to the number of labels.
    pub k: Option<usize>,
    /// `random`, `random:<seed>`, `given:2,0,1`, `rare-first`, `frequent-first`.
    pub order: String,
    pub cumulate_overrides_propagated: bool,
    pub early_stop: Option<usize>,
    /// Filled in at training time for order-based algorithms.
    pub resolved_order: Option<Vec<usize>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: None,
            algorithm: Algorithm::RdtDcc,
            train: None,
            test: None,
            labels: None,
            seed: 0,
            rdt: RdtSettings::default(),
            boost: BoostParams::default(),
            k: None,
            order: "random".into(),
            cumulate_overrides_propagated: false,
            early_stop: None,
            resolved_order: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("config not readable: {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("bad config {}", path.display()))
    }

    pub fn display_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.algorithm.name().to_string())
    }

    pub fn rdt_params(&self) -> RdtParams {
        RdtParams {
            tree_count: self.rdt.trees,
            max_depth: self.rdt.max_depth,
            min_leaf_size: self.rdt.min_leaf,
            label_test_fraction: self.rdt.label_tests,
            activation: self.rdt.sigma,
            seed: self.seed,
        }
    }

    pub fn static_order(&self) -> Result<StaticOrder> {
        if self.order.trim() == "random" {
            return Ok(StaticOrder::Random(self.seed));
        }
        self.order
            .parse()
            .map_err(|e: String| anyhow!("bad order: {e}"))
    }

    /// Checks the parameters of the selected algorithm.
    pub fn validate(&self) -> Result<()> {
        if self.algorithm.is_rdt() {
            self.rdt_params().validate()?;
        } else {
            self.boost.validate()?;
        }
        if self.algorithm.uses_order() {
            self.static_order()?;
        }
        Ok(())
    }
}

fn label_spec(spec: &str) -> Result<LabelSpec> {
    let spec = spec.trim();
    if let Some(names) = spec.strip_prefix("names:") {
        return Ok(LabelSpec::Names(
            names.split(',').map(|s| s.trim().to_string()).collect(),
        ));
    }
    let count = spec.strip_prefix("trailing:").unwrap_or(spec);
    if let Ok(n) = count.parse::<usize>() {
        return Ok(LabelSpec::Trailing(n));
    }
    Ok(LabelSpec::Xml(PathBuf::from(spec)))
}

/// `emotions-train.arff` pairs with `emotions.xml` in the same directory.
fn sibling_xml(path: &Path) -> Option<PathBuf> {
    let stem = path.file_stem()?.to_str()?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let base = ["-train", "-test", "_train", "_test"]
        .iter()
        .find_map(|s| stem.strip_suffix(s))
        .unwrap_or(stem);
    [base, stem]
        .iter()
        .map(|b| dir.join(format!("{b}.xml")))
        .find(|p| p.exists())
}

pub fn load_dataset(path: &Path, labels: Option<&str>) -> Result<MultiLabelDataset> {
    if !path.exists() {
        return Err(DatasetError::NotFound(path.display().to_string()).into());
    }
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let spec = match labels {
        Some(s) => label_spec(s)?,
        None if is_csv => bail!("csv input needs --labels <count>"),
        None => LabelSpec::Xml(
            sibling_xml(path)
                .ok_or_else(|| anyhow!("no label xml next to {}; pass --labels", path.display()))?,
        ),
    };
    let d = if is_csv {
        let LabelSpec::Trailing(n) = spec else {
            bail!("csv input needs a label count");
        };
        load_csv(path, n)?
    } else {
        load_arff(path, &spec)?
    };
    Ok(d)
}
