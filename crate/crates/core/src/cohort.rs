//! User-level inclusion rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::{SourceClass, TweetRecord, UserRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub min_normal_tweets: usize,
    pub min_weighins: usize,
    pub min_friends: u64,
    pub min_followers: u64,
    pub require_social: bool,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            min_normal_tweets: 10,
            min_weighins: 10,
            min_friends: 50,
            min_followers: 50,
            require_social: true,
        }
    }
}

impl CohortConfig {
    /// The larger cohort used for population-level trends.
    pub fn population() -> Self {
        CohortConfig {
            require_social: false,
            ..Default::default()
        }
    }

    /// The cohort used for individual weight modeling.
    pub fn individual() -> Self {
        CohortConfig::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionRule {
    NormalTweets,
    WeighIns,
    Friends,
    Followers,
}

impl fmt::Display for ExclusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExclusionRule::NormalTweets => "normal_tweets",
            ExclusionRule::WeighIns => "weighins",
            ExclusionRule::Friends => "friends",
            ExclusionRule::Followers => "followers",
        })
    }
}

/// Per-user activity counts the rules are evaluated against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserCounts {
    pub normal_tweets: usize,
    pub weighins: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortCandidate {
    pub user: UserRecord,
    pub counts: UserCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub input: usize,
    pub after_normal_tweets: usize,
    pub after_weighins: usize,
    pub after_social: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortReport {
    pub retained: BTreeSet<String>,
    pub excluded: BTreeMap<String, Vec<ExclusionRule>>,
    pub funnel: FunnelCounts,
}

pub fn count_normal_tweets<'a, I>(tweets: I) -> usize
where
    I: IntoIterator<Item = &'a (TweetRecord, SourceClass)>,
{
    tweets
        .into_iter()
        .filter(|(_, class)| *class == SourceClass::Normal)
        .count()
}

/// Rules that `candidate` fails under `config`, in a fixed order.
pub fn failed_rules(candidate: &CohortCandidate, config: &CohortConfig) -> Vec<ExclusionRule> {
    let mut failed = Vec::new();
    if candidate.counts.normal_tweets < config.min_normal_tweets {
        failed.push(ExclusionRule::NormalTweets);
    }
    if candidate.counts.weighins < config.min_weighins {
        failed.push(ExclusionRule::WeighIns);
    }
    if config.require_social {
        // Both counts must clear the bar: a 60-friend, 41-follower account
        // is below it.
        if candidate.user.friends_count < config.min_friends {
            failed.push(ExclusionRule::Friends);
        }
        if candidate.user.followers_count < config.min_followers {
            failed.push(ExclusionRule::Followers);
        }
    }
    failed
}

pub fn select_cohort(candidates: &[CohortCandidate], config: &CohortConfig) -> CohortReport {
    let mut report = CohortReport::default();
    let funnel = &mut report.funnel;
    funnel.input = candidates.len();
    for c in candidates {
        let failed = failed_rules(c, config);
        let stage_ok = |rules: &[ExclusionRule]| !failed.iter().any(|r| rules.contains(r));
        if stage_ok(&[ExclusionRule::NormalTweets]) {
            funnel.after_normal_tweets += 1;
            if stage_ok(&[ExclusionRule::WeighIns]) {
                funnel.after_weighins += 1;
                if failed.is_empty() {
                    funnel.after_social += 1;
                }
            }
        }
        if failed.is_empty() {
            report.retained.insert(c.user.user_id.clone());
        } else {
            report.excluded.insert(c.user.user_id.clone(), failed);
        }
    }
    report
}
