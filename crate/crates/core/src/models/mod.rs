//! Weight regressors, cross-validation and reports.

mod coef;
mod cv;
mod gp;
mod metrics;
mod svr;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use coef::{top_features, CoefficientReport};
pub use cv::{fold_assignment, kfold_cv, FoldFeaturizer, HeldOut, MetricsReport};
pub use gp::{fit_gp, se_kernel, train_gp, GaussianProcess, GpParams, GpSummary};
pub use metrics::{compute_metrics, pearson, Metrics};
pub use svr::{train_svr_linear, LinearSvr, SvrParams};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Constant,
    SvrLinear,
    GpRbf,
    LanguageSplit,
}

/// How to fit a model. Serializable so it can live in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trainer {
    Constant,
    SvrLinear(SvrParams),
    GpRbf(GpParams),
    LanguageSplit {
        base: Box<Trainer>,
        #[serde(default = "default_min_group")]
        min_group: usize,
    },
}

fn default_min_group() -> usize {
    2
}

impl Trainer {
    pub fn kind(&self) -> ModelKind {
        match self {
            Trainer::Constant => ModelKind::Constant,
            Trainer::SvrLinear(_) => ModelKind::SvrLinear,
            Trainer::GpRbf(_) => ModelKind::GpRbf,
            Trainer::LanguageSplit { .. } => ModelKind::LanguageSplit,
        }
    }

    /// `langs` is only consulted by the language-split wrapper.
    pub fn fit(&self, x: &DMatrix<f64>, y: &[f64], langs: &[String]) -> Result<FittedModel> {
        match self {
            Trainer::Constant => train_constant(y).map(|mean| FittedModel::Constant { mean }),
            Trainer::SvrLinear(p) => train_svr_linear(x, y, p).map(FittedModel::SvrLinear),
            Trainer::GpRbf(p) => fit_gp(x, y, p).map(|gp| FittedModel::GpRbf(Box::new(gp))),
            Trainer::LanguageSplit { base, min_group } => {
                language_split_fit(x, y, langs, base, *min_group).map(FittedModel::LanguageSplit)
            }
        }
    }
}

impl fmt::Display for Trainer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trainer::Constant => f.write_str("constant"),
            Trainer::SvrLinear(_) => f.write_str("svr_linear"),
            Trainer::GpRbf(_) => f.write_str("gp_rbf"),
            Trainer::LanguageSplit { base, .. } => write!(f, "language_split({base})"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Constant { mean: f64 },
    SvrLinear(LinearSvr),
    GpRbf(Box<GaussianProcess>),
    LanguageSplit(LanguageSplitModel),
}

impl FittedModel {
    pub fn predict_row(&self, row: &[f64], lang: &str) -> f64 {
        match self {
            FittedModel::Constant { mean } => *mean,
            FittedModel::SvrLinear(m) => m.predict_row(row),
            FittedModel::GpRbf(gp) => gp.predict_row(row),
            FittedModel::LanguageSplit(m) => m.predict_row(row, lang),
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>, langs: &[String]) -> Vec<f64> {
        (0..x.nrows())
            .map(|r| {
                let row: Vec<f64> = x.row(r).iter().copied().collect();
                let lang = langs.get(r).map_or("und", String::as_str);
                self.predict_row(&row, lang)
            })
            .collect()
    }

    pub fn describe(&self) -> ModelSummary {
        match self {
            FittedModel::Constant { mean } => ModelSummary::Constant { mean: *mean },
            FittedModel::SvrLinear(m) => ModelSummary::SvrLinear(m.clone()),
            FittedModel::GpRbf(gp) => ModelSummary::GpRbf(gp.summary()),
            FittedModel::LanguageSplit(m) => ModelSummary::LanguageSplit {
                groups: m.groups.iter().map(|(k, v)| (k.clone(), v.describe())).collect(),
                pooled: Box::new(m.pooled.describe()),
            },
        }
    }
}

/// Serializable description of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSummary {
    Constant { mean: f64 },
    SvrLinear(LinearSvr),
    GpRbf(GpSummary),
    LanguageSplit {
        groups: BTreeMap<String, ModelSummary>,
        pooled: Box<ModelSummary>,
    },
}

pub fn train_constant(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("constant baseline needs at least one target".into()));
    }
    Ok(y.iter().sum::<f64>() / y.len() as f64)
}

/// One model per language group plus a pooled fallback for unseen or
/// undersized groups.
#[derive(Debug, Clone)]
pub struct LanguageSplitModel {
    pub groups: BTreeMap<String, FittedModel>,
    pub pooled: Box<FittedModel>,
}

impl LanguageSplitModel {
    pub fn predict_row(&self, row: &[f64], lang: &str) -> f64 {
        self.groups
            .get(lang)
            .unwrap_or(&self.pooled)
            .predict_row(row, lang)
    }
}

pub fn language_split_fit(
    x: &DMatrix<f64>,
    y: &[f64],
    langs: &[String],
    base: &Trainer,
    min_group: usize,
) -> Result<LanguageSplitModel> {
    if langs.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} language tags for {} rows",
            langs.len(),
            y.len()
        )));
    }
    let pooled = base.fit(x, y, langs)?;
    let mut by_lang: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in langs.iter().enumerate() {
        by_lang.entry(l.as_str()).or_default().push(i);
    }
    let mut groups = BTreeMap::new();
    if by_lang.len() > 1 {
        for (lang, rows) in by_lang {
            if rows.len() < min_group.max(2) {
                continue;
            }
            let gx = x.select_rows(&rows);
            let gy: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
            let gl: Vec<String> = rows.iter().map(|&r| langs[r].clone()).collect();
            match base.fit(&gx, &gy, &gl) {
                Ok(m) => {
                    groups.insert(lang.to_string(), m);
                }
                Err(e) => log::warn!("language group {lang}: falling back to pooled model ({e})"),
            }
        }
    }
    Ok(LanguageSplitModel {
        groups,
        pooled: Box::new(pooled),
    })
}
