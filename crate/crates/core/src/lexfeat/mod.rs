//! Text features: tokenization, lexicon category rates, bag-of-words and
//! min-max scaling.

mod bow;
mod lexicon;
mod matrix;
mod tokenize;

pub use bow::{bow_features, build_vocabulary, BowConfig, TokenBag};
pub use lexicon::{category_features, load_lexicon, load_named_lexicon, Lexicon, Provenance};
pub use matrix::{minmax_scale, FeatureMatrix, ScaleParams};
pub use tokenize::{tokenize, IdentityNormalizer, TextNormalizer};
mod set;

pub use set::{FeatureConfig, FeatureSet, FeatureView, UserText};
