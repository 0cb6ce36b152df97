use serde::{Deserialize, Serialize};

/// Strongest signed coefficients. `positive` is sorted descending,
/// `negative` ascending (most negative first).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub positive: Vec<(String, f64)>,
    pub negative: Vec<(String, f64)>,
}

/// Up to `k` largest positive and `k` most negative weights; ties are broken
/// by feature name. Zero weights appear in neither list.
pub fn top_features(names: &[String], weights: &[f64], k: usize) -> CoefficientReport {
    let mut pos: Vec<(String, f64)> = Vec::new();
    let mut neg: Vec<(String, f64)> = Vec::new();
    for (n, &w) in names.iter().zip(weights) {
        if w > 0.0 {
            pos.push((n.clone(), w));
        } else if w < 0.0 {
            neg.push((n.clone(), w));
        }
    }
    pos.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    neg.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    pos.truncate(k);
    neg.truncate(k);
    CoefficientReport {
        positive: pos,
        negative: neg,
    }
}
