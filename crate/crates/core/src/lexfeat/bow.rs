use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Token counts of one user's document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBag {
    pub counts: BTreeMap<String, u32>,
    pub total: usize,
}

impl TokenBag {
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut bag = TokenBag::default();
        bag.extend(tokens);
        bag
    }

    pub fn extend<S: AsRef<str>>(&mut self, tokens: &[S]) {
        for t in tokens {
            *self.counts.entry(t.as_ref().to_string()).or_default() += 1;
        }
        self.total += tokens.len();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BowConfig {
    pub min_df: usize,
    pub max_vocab: usize,
}

impl Default for BowConfig {
    fn default() -> Self {
        BowConfig {
            min_df: 5,
            max_vocab: 500,
        }
    }
}

/// Top `max_vocab` tokens by document frequency over `rows`, keeping only
/// df >= `min_df`. Ties go to the lexicographically smaller token.
pub fn build_vocabulary(docs: &[TokenBag], rows: &[usize], config: &BowConfig) -> Vec<String> {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for &r in rows {
        for token in docs[r].counts.keys() {
            *df.entry(token.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = df.into_iter().filter(|&(_, n)| n >= config.min_df).collect();
    // BTreeMap iteration is already lexicographic; the sort is stable.
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    ranked
        .into_iter()
        .take(config.max_vocab)
        .map(|(t, _)| t.to_string())
        .collect()
}

/// Relative frequency of each vocabulary token in every document. The
/// vocabulary is built from `train_rows` only; values are produced for all
/// documents.
pub fn bow_features(docs: &[TokenBag], train_rows: &[usize], config: &BowConfig) -> (Vec<String>, Vec<Vec<f64>>) {
    let vocab = build_vocabulary(docs, train_rows, config);
    let rows = docs
        .iter()
        .map(|d| {
            let denom = d.total.max(1) as f64;
            vocab
                .iter()
                .map(|t| d.counts.get(t).copied().unwrap_or(0) as f64 / denom)
                .collect()
        })
        .collect();
    (vocab, rows)
}
