use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cohort::CohortConfig;
use crate::error::{Error, Result};
use crate::ingest::{CorpusSchema, PatternTable};
use crate::lexfeat::{BowConfig, FeatureConfig};
use crate::models::{GpParams, SvrParams, Trainer};
use crate::synth::SynthSpec;
use crate::weighin::{default_rule_patterns, ExclusionThresholds};

/// Everything a run needs. Serialized next to the outputs as
/// `config.effective.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub ingest: IngestSection,
    pub clean: CleanSection,
    pub cohort: CohortSection,
    pub features: FeatureSection,
    pub models: Vec<Trainer>,
    pub train: TrainSection,
    pub cv: CvSection,
    pub synth: SynthSpec,
    pub report: ReportSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Corpus files. Empty means "use the synth stage's corpus".
    pub corpus: Vec<PathBuf>,
    /// Lexicon files in `.dic` form. Empty means the bundled synthetic pair.
    pub lexicons: Vec<LexiconPath>,
    /// Optional `period,term,score` CSV of external search interest.
    pub trends: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconPath {
    /// Defaults to the file stem, uppercased.
    #[serde(default)]
    pub name: Option<String>,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    pub schema: CorpusSchema,
    pub prefilter: bool,
    pub patterns: PatternTable,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            schema: CorpusSchema::TwitterV11,
            prefilter: false,
            patterns: PatternTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanSection {
    pub thresholds: ExclusionThresholds,
    /// Extraction rules (regexes with `value` and `unit` groups), in order.
    pub grammar: Vec<String>,
    /// Count weigh-in tweets whose text did not parse toward the cohort's
    /// minimum weigh-in count.
    pub count_unparseable: bool,
}

impl Default for CleanSection {
    fn default() -> Self {
        CleanSection {
            thresholds: ExclusionThresholds::default(),
            grammar: default_rule_patterns(),
            count_unparseable: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSection {
    pub population: CohortConfig,
    pub individual: CohortConfig,
}

impl Default for CohortSection {
    fn default() -> Self {
        CohortSection {
            population: CohortConfig::population(),
            individual: CohortConfig::individual(),
        }
    }
}

/// One column group of the metrics grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFlags {
    pub bio: bool,
    pub bow: bool,
}

impl FeatureFlags {
    pub fn name(self) -> String {
        let base = if self.bio { "tweet_plus_bio" } else { "tweet_only" };
        if self.bow {
            format!("{base}+bow")
        } else {
            base.to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSection {
    pub bow: BowConfig,
    /// Feature sets evaluated by cross-validation.
    pub evaluate: Vec<FeatureFlags>,
}

impl FeatureSection {
    pub fn resolve(&self, flags: FeatureFlags) -> FeatureConfig {
        FeatureConfig {
            include_bio: flags.bio,
            bow: flags.bow.then_some(self.bow),
        }
    }
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            bow: BowConfig::default(),
            evaluate: [(false, false), (false, true), (true, false), (true, true)]
                .into_iter()
                .map(|(bio, bow)| FeatureFlags { bio, bow })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    /// Feature set for the final models and the coefficient table.
    pub features: FeatureFlags,
    pub top_k: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            features: FeatureFlags { bio: true, bow: false },
            top_k: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvSection {
    pub k: usize,
    pub seed: u64,
}

impl Default for CvSection {
    fn default() -> Self {
        CvSection { k: 10, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportSection {
    pub top_k: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection { top_k: 15 }
    }
}

pub fn default_models() -> Vec<Trainer> {
    let gp = Trainer::GpRbf(GpParams {
        grid_search: true,
        ..Default::default()
    });
    vec![
        Trainer::Constant,
        Trainer::LanguageSplit {
            base: Box::new(gp.clone()),
            min_group: 2,
        },
        gp,
        Trainer::SvrLinear(SvrParams::default()),
    ]
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: Paths::default(),
            ingest: IngestSection::default(),
            clean: CleanSection::default(),
            cohort: CohortSection::default(),
            features: FeatureSection::default(),
            models: default_models(),
            train: TrainSection::default(),
            cv: CvSection::default(),
            synth: SynthSpec::default(),
            report: ReportSection::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses TOML. Relative paths are resolved against `base` (normally the
    /// directory holding the config file).
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        PipelineConfig::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.paths.corpus.iter_mut().for_each(fix);
        self.paths.lexicons.iter_mut().for_each(|l| fix(&mut l.path));
        if let Some(t) = &mut self.paths.trends {
            fix(t);
        }
    }

    /// Applies a global seed to every random stream.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.synth.seed = seed;
        self.cv.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cv.k < 2 {
            return Err(Error::Config(format!("cv.k must be at least 2, got {}", self.cv.k)));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models configured".into()));
        }
        let mut names: Vec<String> = self.models.iter().map(|m| m.to_string()).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("model {} configured twice", w[0])));
        }
        crate::weighin::WeighInGrammar::from_patterns(&self.clean.grammar)?;
        self.synth
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml(&text, Path::new("/")).unwrap(), cfg);
    }

    #[test]
    fn partial_config() {
        let cfg = PipelineConfig::from_toml(
            "[cv]\nk = 5\n[paths]\ncorpus = [\"data/a.ndjson\"]\n[[models]]\nkind = \"svr_linear\"\nc = 2.0\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.cv.k, 5);
        assert_eq!(cfg.cv.seed, 7);
        assert_eq!(cfg.paths.corpus, vec![PathBuf::from("/base/data/a.ndjson")]);
        assert_eq!(
            cfg.models,
            vec![Trainer::SvrLinear(SvrParams {
                c: 2.0,
                ..Default::default()
            })]
        );
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_toml("[cv]\nk = 1\n", Path::new("/")).is_err());
        assert!(PipelineConfig::from_toml("[cv]\nk = \"x\"\n", Path::new("/")).is_err());
        assert!(PipelineConfig::from_toml("[synth]\nn_users = 0\n", Path::new("/")).is_err());
        assert!(PipelineConfig::from_toml("[clean]\ngrammar = [\"(\"]\n", Path::new("/")).is_err());
    }

    #[test]
    fn flag_names() {
        assert_eq!(FeatureFlags { bio: false, bow: false }.name(), "tweet_only");
        assert_eq!(FeatureFlags { bio: true, bow: true }.name(), "tweet_plus_bio+bow");
    }
}
