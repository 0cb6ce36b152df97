use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, Metrics};
use super::Trainer;
use crate::error::{Error, Result};
use crate::lexfeat::{minmax_scale, FeatureMatrix, FeatureView};

/// Produces the design matrix for one fold. Anything learned from data
/// (scaling ranges, vocabularies) must come from `train_rows` only.
pub trait FoldFeaturizer: Sync {
    fn n_rows(&self) -> usize;
    fn featurize(&self, train_rows: &[usize]) -> Result<DMatrix<f64>>;
}

impl FoldFeaturizer for FeatureMatrix {
    fn n_rows(&self) -> usize {
        FeatureMatrix::n_rows(self)
    }

    fn featurize(&self, train_rows: &[usize]) -> Result<DMatrix<f64>> {
        Ok(minmax_scale(self, train_rows)?.values)
    }
}

impl FoldFeaturizer for FeatureView<'_> {
    fn n_rows(&self) -> usize {
        self.set.len()
    }

    fn featurize(&self, train_rows: &[usize]) -> Result<DMatrix<f64>> {
        Ok(self.scaled(train_rows)?.values)
    }
}

/// A matrix used as-is in every fold.
impl FoldFeaturizer for DMatrix<f64> {
    fn n_rows(&self) -> usize {
        self.nrows()
    }

    fn featurize(&self, _train_rows: &[usize]) -> Result<DMatrix<f64>> {
        Ok(self.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOut {
    pub row: usize,
    pub fold: usize,
    pub y_true: f64,
    pub y_pred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub features: String,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Metrics>,
    /// Over the concatenation of every held-out prediction.
    pub pooled: Metrics,
    pub held_out: Vec<HeldOut>,
}

/// Seeded shuffle split into `k` near-equal folds (sizes differ by at most 1).
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds the {n} available rows")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..k)
        .map(|f| {
            let mut fold = perm[f * n / k..(f + 1) * n / k].to_vec();
            fold.sort_unstable();
            fold
        })
        .collect())
}

pub fn kfold_cv(
    features: &dyn FoldFeaturizer,
    y: &[f64],
    langs: &[String],
    k: usize,
    seed: u64,
    trainer: &Trainer,
) -> Result<MetricsReport> {
    let n = y.len();
    if features.n_rows() != n {
        return Err(Error::InvalidArgument(format!(
            "{} feature rows for {n} targets",
            features.n_rows()
        )));
    }
    if !langs.is_empty() && langs.len() != n {
        return Err(Error::InvalidArgument(format!("{} language tags for {n} rows", langs.len())));
    }
    let folds = fold_assignment(n, k, seed)?;
    let lang_of = |r: usize| langs.get(r).cloned().unwrap_or_else(|| "und".to_string());

    let run_fold = |f: usize| -> Result<Vec<HeldOut>> {
        let test = &folds[f];
        let train: Vec<usize> = (0..n).filter(|r| test.binary_search(r).is_err()).collect();
        let x = features.featurize(&train)?;
        let x_train = x.select_rows(&train);
        let y_train: Vec<f64> = train.iter().map(|&r| y[r]).collect();
        let l_train: Vec<String> = train.iter().map(|&r| lang_of(r)).collect();
        let model = trainer.fit(&x_train, &y_train, &l_train)?;
        let l_test: Vec<String> = test.iter().map(|&r| lang_of(r)).collect();
        let pred = model.predict(&x.select_rows(test), &l_test);
        Ok(test
            .iter()
            .zip(pred)
            .map(|(&row, y_pred)| HeldOut {
                row,
                fold: f,
                y_true: y[row],
                y_pred,
            })
            .collect())
    };

    let results: Vec<Result<Vec<HeldOut>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..k).map(|f| s.spawn(move || run_fold(f))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold worker panicked"))
            .collect()
    });

    let mut per_fold = Vec::with_capacity(k);
    let mut held_out = Vec::with_capacity(n);
    for r in results {
        let fold = r?;
        let t: Vec<f64> = fold.iter().map(|h| h.y_true).collect();
        let p: Vec<f64> = fold.iter().map(|h| h.y_pred).collect();
        per_fold.push(compute_metrics(&t, &p)?);
        held_out.extend(fold);
    }
    let t: Vec<f64> = held_out.iter().map(|h| h.y_true).collect();
    let p: Vec<f64> = held_out.iter().map(|h| h.y_pred).collect();
    Ok(MetricsReport {
        model: trainer.to_string(),
        features: String::new(),
        k,
        seed,
        folds: per_fold,
        pooled: compute_metrics(&t, &p)?,
        held_out,
    })
}
