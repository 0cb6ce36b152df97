use serde::{Deserialize, Serialize};

use super::bow::{bow_features, BowConfig, TokenBag};
use super::lexicon::{category_rates, Lexicon, Provenance};
use super::matrix::{minmax_scale, FeatureMatrix};
use super::tokenize::{tokenize, TextNormalizer};
use crate::error::{Error, Result};

/// Text available for one user. `tweets` holds normal tweets only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserText {
    pub user_id: String,
    pub lang: String,
    pub tweets: Vec<String>,
    pub bio: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub include_bio: bool,
    pub bow: Option<BowConfig>,
}

/// Unscaled per-user features for every provenance. Scaling and the BoW
/// vocabulary depend on the training rows and are produced per fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub users: Vec<String>,
    pub langs: Vec<String>,
    pub tweet_lexical: FeatureMatrix,
    pub bio_lexical: FeatureMatrix,
    pub tweet_bags: Vec<TokenBag>,
}

impl FeatureSet {
    /// Each user's tweets are concatenated into a single document.
    pub fn build(texts: &[UserText], lexicons: &[Lexicon], normalizer: &dyn TextNormalizer) -> Result<Self> {
        let users: Vec<String> = texts.iter().map(|t| t.user_id.clone()).collect();
        let names = |p| {
            lexicons
                .iter()
                .flat_map(|l| l.feature_names(p))
                .collect::<Vec<_>>()
        };
        let mut tweet_rows = Vec::with_capacity(texts.len());
        let mut bio_rows = Vec::with_capacity(texts.len());
        let mut bags = Vec::with_capacity(texts.len());
        for t in texts {
            let mut tweet_tokens = Vec::new();
            for tweet in &t.tweets {
                tweet_tokens.extend(tokenize(&normalizer.normalize(tweet, &t.lang)));
            }
            let bio_tokens = tokenize(&normalizer.normalize(&t.bio, &t.lang));
            tweet_rows.push(lexicons.iter().flat_map(|l| category_rates(&tweet_tokens, l)).collect());
            bio_rows.push(lexicons.iter().flat_map(|l| category_rates(&bio_tokens, l)).collect());
            bags.push(TokenBag::from_tokens(&tweet_tokens));
        }
        Ok(FeatureSet {
            langs: texts.iter().map(|t| t.lang.clone()).collect(),
            tweet_lexical: FeatureMatrix::new(users.clone(), names(Provenance::Tweet), &tweet_rows)?,
            bio_lexical: FeatureMatrix::new(users.clone(), names(Provenance::Bio), &bio_rows)?,
            tweet_bags: bags,
            users,
        })
    }

    pub fn view(&self, config: FeatureConfig) -> FeatureView<'_> {
        FeatureView { set: self, config }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> FeatureSet {
        FeatureSet {
            users: rows.iter().map(|&r| self.users[r].clone()).collect(),
            langs: rows.iter().map(|&r| self.langs[r].clone()).collect(),
            tweet_lexical: self.tweet_lexical.select_rows(rows),
            bio_lexical: self.bio_lexical.select_rows(rows),
            tweet_bags: rows.iter().map(|&r| self.tweet_bags[r].clone()).collect(),
        }
    }
}

/// A feature configuration over a [`FeatureSet`].
#[derive(Debug, Clone, Copy)]
pub struct FeatureView<'a> {
    pub set: &'a FeatureSet,
    pub config: FeatureConfig,
}

impl FeatureView<'_> {
    /// Unscaled matrix for all rows; the BoW vocabulary comes from
    /// `train_rows`.
    pub fn raw(&self, train_rows: &[usize]) -> Result<FeatureMatrix> {
        let mut m = self.set.tweet_lexical.clone();
        if self.config.include_bio {
            m = m.hstack(&self.set.bio_lexical)?;
        }
        if let Some(bow) = &self.config.bow {
            let (vocab, rows) = bow_features(&self.set.tweet_bags, train_rows, bow);
            let names = vocab.iter().map(|t| format!("Tweet_BoW_{t}")).collect();
            m = m.hstack(&FeatureMatrix::new(self.set.users.clone(), names, &rows)?)?;
        }
        Ok(m)
    }

    /// All rows scaled with the ranges of `train_rows`.
    pub fn scaled(&self, train_rows: &[usize]) -> Result<FeatureMatrix> {
        if train_rows.iter().any(|&r| r >= self.set.len()) {
            return Err(Error::InvalidArgument("training row out of range".into()));
        }
        minmax_scale(&self.raw(train_rows)?, train_rows)
    }
}
