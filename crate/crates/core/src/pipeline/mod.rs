//! Stage runner. Each stage reads its upstream outputs from the run
//! directory, writes its own files atomically under `<run>/<stage>/`, and
//! finishes with a manifest of input and output hashes.

mod config;
mod report;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{
    default_models, CleanSection, CohortSection, CvSection, FeatureFlags, FeatureSection, IngestSection, LexiconPath,
    Paths, PipelineConfig, ReportSection, TrainSection,
};
pub use report::{render_coefficients, render_metrics_table, render_monthly, render_weekday, Report};
pub use store::{sha256_bytes, sha256_file, stage_complete, write_atomic, StageManifest, MANIFEST};

use crate::cohort::{select_cohort, CohortCandidate, CohortReport, UserCounts};
use crate::error::{Error, Result};
use crate::ingest::{ingest_files, IngestOptions, SourceClass, TweetRecord, UserRecord};
use crate::lexfeat::{load_lexicon, load_named_lexicon, FeatureMatrix, FeatureSet, IdentityNormalizer, Lexicon, TokenBag, UserText};
use crate::models::{kfold_cv, top_features, CoefficientReport, FittedModel, MetricsReport, ModelSummary};
use crate::synth::{generate_corpus, synthetic_lexicons, weekday_search_csv};
use crate::trends::{
    align_and_compare, import_trend_csv, monthly_deviation, weekday_counts, write_long_csv, Comparison, Event, EventKind,
    Period, TrendSeries,
};
use crate::weighin::{
    apply_exclusions, build_series, date_of_day_index, day_index, parse_weighin, reference_weight, to_pounds,
    write_exclusion_report, ExclusionReason, NoMatch, WeighIn, WeighInGrammar, WeighInSeries,
};
use store::{display_path, read_json, require, StageWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Synth,
    Ingest,
    Clean,
    Cohort,
    Features,
    Train,
    Evaluate,
    Trends,
    Report,
}

impl Stage {
    /// Dependency order.
    pub const ALL: [Stage; 9] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Clean,
        Stage::Cohort,
        Stage::Features,
        Stage::Train,
        Stage::Evaluate,
        Stage::Trends,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Clean => "clean",
            Stage::Cohort => "cohort",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Trends => "trends",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage '{s}'")))
    }
}

/// Result of one stage. `gaps` is only non-empty for an incomplete report.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub stage: Stage,
    pub manifest: StageManifest,
    pub gaps: Vec<String>,
}

/// A tweet with the class assigned at ingest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedTweet {
    pub tweet: TweetRecord,
    pub class: SourceClass,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub weighin_tweets: usize,
    pub parsed: usize,
    pub no_rule: usize,
    pub nonpositive: usize,
    pub unparseable_by_user: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortStage {
    pub population: CohortReport,
    pub individual: CohortReport,
    /// Users whose weigh-in series was excluded by the cleaning rules.
    pub series_excluded: BTreeMap<String, ExclusionReason>,
    pub population_final: Vec<String>,
    pub individual_final: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: String,
    pub features: String,
    pub summary: ModelSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCoefficients {
    pub model: String,
    pub features: String,
    pub report: CoefficientReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrendsOutput {
    pub comparisons: Vec<Comparison>,
    pub warnings: Vec<String>,
}

/// Drives the stages of one run directory.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub root: PathBuf,
    config_sha256: String,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, root: &Path) -> Result<Self> {
        config.validate()?;
        let text = config.to_toml()?;
        Ok(Pipeline {
            config_sha256: sha256_bytes(text.as_bytes()),
            config,
            root: root.to_path_buf(),
        })
    }

    pub fn config_sha256(&self) -> &str {
        &self.config_sha256
    }

    pub fn run(&self, stage: Stage) -> Result<StageOutcome> {
        log::info!("running stage {stage}");
        write_atomic(&self.root.join("config.effective.toml"), self.config.to_toml()?.as_bytes())?;
        let mut w = StageWriter::begin(&self.root, stage, &self.config_sha256)?;
        let gaps = match stage {
            Stage::Synth => self.synth(&mut w)?,
            Stage::Ingest => self.ingest(&mut w)?,
            Stage::Clean => self.clean(&mut w)?,
            Stage::Cohort => self.cohort(&mut w)?,
            Stage::Features => self.features(&mut w)?,
            Stage::Train => self.train(&mut w)?,
            Stage::Evaluate => self.evaluate(&mut w)?,
            Stage::Trends => self.trends(&mut w)?,
            Stage::Report => self.report(&mut w)?,
        };
        Ok(StageOutcome {
            stage,
            manifest: w.finish()?,
            gaps,
        })
    }

    /// Runs every stage in dependency order. The synth stage only runs when
    /// the config names no corpus.
    pub fn run_all(&self) -> Result<Vec<StageOutcome>> {
        let mut out = Vec::new();
        for stage in Stage::ALL {
            if stage == Stage::Synth && !self.config.paths.corpus.is_empty() {
                continue;
            }
            out.push(self.run(stage)?);
        }
        Ok(out)
    }

    fn corpus_paths(&self) -> Result<Vec<PathBuf>> {
        if self.config.paths.corpus.is_empty() {
            Ok(vec![require(&self.root, Stage::Synth, "corpus.ndjson")?])
        } else {
            Ok(self.config.paths.corpus.clone())
        }
    }

    fn lexicons(&self, w: &mut StageWriter) -> Result<Vec<Lexicon>> {
        if self.config.paths.lexicons.is_empty() {
            let (liwc, perma) = synthetic_lexicons();
            for l in [&liwc, &perma] {
                w.note_input(&format!("bundled:{}", l.name), &l.to_dic());
            }
            return Ok(vec![liwc, perma]);
        }
        let mut out = Vec::new();
        for l in &self.config.paths.lexicons {
            w.input(&l.path)?;
            out.push(match &l.name {
                Some(name) => load_named_lexicon(&l.path, name)?,
                None => load_lexicon(&l.path)?,
            });
        }
        Ok(out)
    }

    fn synth(&self, w: &mut StageWriter) -> Result<Vec<String>> {
        let c = generate_corpus(&self.config.synth)?;
        w.write("corpus.ndjson", c.corpus.as_bytes())?;
        w.write_json("truth.json", &c.manifest)?;
        w.write("liwc.dic", c.liwc.to_dic().as_bytes())?;
        w.write("perma.dic", c.perma.to_dic().as_bytes())?;
        w.write("trends.csv", weekday_search_csv().as_bytes())?;
        Ok(Vec::new())
    }

    fn ingest(&self, w: &mut StageWriter) -> Result<Vec<String>> {
        let paths = self.corpus_paths()?;
        for p in &paths {
            w.input(p)?;
        }
        let opts = IngestOptions {
            schema: self.config.ingest.schema,
            patterns: self.config.ingest.patterns.clone(),
            prefilter: self.config.ingest.prefilter,
        };
        let (corpus, mut report) = ingest_files(&paths, &opts)?;
        for f in &mut report.files {
            f.path = display_path(&self.root, Path::new(&f.path));
        }
        for f in &report.files {
            for e in &f.errors {
                log::warn!("{}: {e}", f.path);
            }
        }
        let mut tweets = String::new();
        for (tweet, class) in corpus.tweets {
            tweets.push_str(&serde_json::to_string(&ClassifiedTweet { tweet, class })?);
            tweets.push('\n');
        }
        let mut users = String::new();
        for u in corpus.users.values() {
            users.push_str(&serde_json::to_string(u)?);
            users.push('\n');
        }
        w.write("tweets.ndjson", tweets.as_bytes())?;
        w.write("users.ndjson", users.as_bytes())?;
        w.write_json("report.json", &report)?;
        Ok(Vec::new())
    }

    fn load_tweets(&self, w: &mut StageWriter) -> Result<Vec<ClassifiedTweet>> {
        let path = require(&self.root, Stage::Ingest, "tweets.ndjson")?;
        w.input(&path)?;
        read_ndjson(&path)
    }

    fn load_users(&self, w: &mut StageWriter) -> Result<Vec<UserRecord>> {
        let path = require(&self.root, Stage::Ingest, "users.ndjson")?;
        w.input(&path)?;
        read_ndjson(&path)
    }

    fn clean(&self, w: &mut StageWriter) -> Result<Vec<String>> {
        let tweets = self.load_tweets(w)?;
        let grammar = WeighInGrammar::from_patterns(&self.config.clean.grammar)?;
        let mut report = ParseReport::default();
        let mut by_user: BTreeMap<String, Vec<WeighIn>> = BTreeMap::new();
        let mut rows = csv::Writer::from_writer(Vec::new());
        rows.write_record(["user_id", "tweet_id", "date", "day_index", "weight_lb"])?;
        for ct in tweets.iter().filter(|t| t.class == SourceClass::WeighIn) {
            report.weighin_tweets += 1;
            let t = &ct.tweet;
            let m = match parse_weighin(&t.text, &grammar) {
                Ok(m) => m,
                Err(e) => {
                    match e {
                        NoMatch::NoRule => report.no_rule += 1,
                        NoMatch::Nonpositive => report.nonpositive += 1,
                    }
                    *report.unparseable_by_user.entry(t.user_id.clone()).or_default() += 1;
                    continue;
                }
            };
            report.parsed += 1;
            let lb = to_pounds(m.value, m.unit)?;
            let day = day_index(&t.created_at);
            rows.write_record([
                t.user_id.as_str(),
                t.tweet_id.as_str(),
                &date_of_day_index(day).to_string(),
                &day.to_string(),
                &lb.to_string(),
            ])?;
            by_user.entry(t.user_id.clone()).or_default().push(WeighIn {
                user_id: t.user_id.clone(),
                day_index: day,
                weight_lb: lb,
            });
        }
        let series: Vec<WeighInSeries> = by_user
            .into_iter()
            .map(|(u, obs)| apply_exclusions(build_series(&u, obs), &self.config.clean.thresholds))
            .collect();
        let mut excl = Vec::new();
        write_exclusion_report(&mut excl, &series)?;
        w.write("weighins.csv", &csv_bytes(rows)?)?;
        w.write("exclusions.csv", &excl)?;
        w.write_json("series.json", &series)?;
        w.write_json("parse_report.json", &report)?;
        Ok(Vec::new())
    }

    fn load_series(&self, w: &mut StageWriter) -> Result<Vec<WeighInSeries>> {
        let path = require(&self.root, Stage::Clean, "series.json")?;
        w.input(&path)?;
        read_json(&path)
    }

    fn cohort(&self, w: &mut StageWriter) -> Result<Vec<String>> {
        let tweets = self.load_tweets(w)?;
        let users = self.load_users(w)?;
        let series = self.load_series(w)?;
        let parse_path = require(&self.root, Stage::Clean, "parse_report.json")?;
        w.input(&parse_path)?;
        let parse: ParseReport = read_json(&parse_path)?;

        let mut normal: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tweets.iter().filter(|t| t.class == SourceClass::Normal) {
            *normal.entry(t.tweet.user_id.as_str()).or_default() += 1;
        }
        let by_user: BTreeMap<&str, &WeighInSeries> = series.iter().map(|s| (s.user_id.as_str(), s)).collect();
        let candidates: Vec<CohortCandidate> = users
            .iter()
            .map(|u| {
                let mut weighins = by_user.get(u.user_id.as_str()).map_or(0, |s| s.len());
                if self.config.clean.count_unparseable {
                    weighins += parse.unparseable_by_user.get(&u.user_id).copied().unwrap_or(0);
                }
                CohortCandidate {
                    user: u.clone(),
                    counts: UserCounts {
                        normal_tweets: normal.get(u.user_id.as_str()).copied().unwrap_or(0),
                        weighins,
                    },
                }
            })
            .collect();
        let population = select_cohort(&candidates, &self.config.cohort.population);
        let individual = select_cohort(&candidates, &self.config.cohort.individual);
        let series_excluded: BTreeMap<String, ExclusionReason> = series
            .iter()
            .filter(|s| s.is_excluded())
            .map(|s| (s.user_id.clone(), s.excluded.unwrap_or_default()))
            .collect();
        let usable = |u: &String| by_user.contains_key(u.as_str()) && !series_excluded.contains_key(u);
        let stage = CohortStage {
            population_final: population.retained.iter().filter(|u| usable(u)).cloned().collect(),
            individual_final: individual.retained.iter().filter(|u| usable(u)).cloned().collect(),
            population,
            individual,
            series_excluded,
        };

        let langs: BTreeMap<&str, &str> = users.iter().map(|u| (u.user_id.as_str(), u.lang.as_str())).collect();
        let mut targets = csv::Writer::from_writer(Vec::new());
        targets.write_record(["user_id", "lang", "reference_weight_lb"])?;
        for u in &stage.individual_final {
            let weight = reference_weight(by_user[u.as_str()])?;
            targets.write_record([u.as_str(), langs.get(u.as_str()).copied().unwrap_or("und"), &weight.to_string()])?;
        }
        w.write_json("cohort.json", &stage)?;
        w.write("targets.csv", &csv_bytes(targets)?)?;
        w.write("funnel.txt", report::render_funnel(&stage).as_bytes())?;
        Ok(Vec::new())
    }

    fn load_cohort(&self, w: &mut StageWriter) -> Result<CohortStage> {
        let path = require(&self.root, Stage::Cohort, "cohort.json")?;
        w.input(&path)?;
        read_json(&path)
    }

    fn features(&self, w: &mut StageWriter) -> Result<Vec<String>> {
        let tweets = self.load_tweets(w)?;
        let users = self.load_users(w)?;
        let targets_path = require(&self.root, Stage::Cohort, "targets.csv")?;
        w.input(&targets_path)?;
        let targets = read_targets(&targets_path)?;
        let lexicons = self.lexicons(w)?;

        let profiles: BTreeMap<&str, &UserRecord> = users.iter().map(|u| (u.user_id.as_str(), u)).collect();
        let mut texts: BTreeMap<&str, UserText> = BTreeMap::new();
        for t in &targets {
            let bio = profiles.get(t.user_id.as_str()).map_or(String::new(), |p| p.bio.clone());
            texts.insert(
                t.user_id.as_str(),
                UserText {
                    user_id: t.user_id.clone(),
                    lang: t.lang.clone(),
                    tweets: Vec::new(),
                    bio,
                },
            );
        }
        for ct in tweets.iter().filter(|t| t.class == SourceClass::Normal) {
            if let Some(u) = texts.get_mut(ct.tweet.user_id.as_str()) {
                u.tweets.push(ct.tweet.text.clone());
            }
        }
        let texts: Vec<UserText> = targets.iter().map(|t| texts.remove(t.user_id.as_str()).expect("target has text")).collect();
        let set = FeatureSet::build(&texts, &lexicons, &IdentityNormalizer)?;

        let mut buf = Vec::new();
        set.tweet_lexical.write_csv(&mut buf)?;
        w.write("tweet_lexical.csv", &buf)?;
        let mut buf = Vec::new();
        set.bio_lexical.write_csv(&mut buf)?;
        w.write("bio_lexical.csv", &buf)?;
        let mut bags = String::new();
        for (u, b) in set.users.iter().zip(&set.tweet_bags) {
            bags.push_str(&serde_json::to_string(&UserBag { user_id: u.clone(), bag: b.clone() })?);
            bags.push('\n');
        }
        w.write("bags.ndjson", bags.as_bytes())?;
        w.write("targets.csv", &std::fs::read(&targets_path).map_err(|e| Error::io(&targets_path, e))?)?;
        Ok(Vec::new())
    }

    /// Feature set and targets as persisted by the features stage.
    pub fn load_features(&self) -> Result<(FeatureSet, Vec<f64>)> {
        let mut sink = StageWriter::detached(&self.root);
        self.load_features_into(&mut sink)
    }

    fn load_features_into(&self, w: &mut StageWriter) -> Result<(FeatureSet, Vec<f64>)> {
        let mut p = |name: &str| -> Result<PathBuf> {
            let path = require(&self.root, Stage::Features, name)?;
            w.input(&path)?;
            Ok(path)
        };
        let tweet_lexical = read_feature_csv(&p("tweet_lexical.csv")?)?;
        let bio_lexical = read_feature_csv(&p("bio_lexical.csv")?)?;
        let bags: Vec<UserBag> = read_ndjson(&p("bags.ndjson")?)?;
        let targets = read_targets(&p("targets.csv")?)?;
        let users: Vec<String> = targets.iter().map(|t| t.user_id.clone()).collect();
        if tweet_lexical.users != users || bio_lexical.users != users || bags.iter().map(|b| &b.user_id).ne(users.iter()) {
            return Err(Error::InvalidArgument("feature files disagree on the user list".into()));
        }
        let set = FeatureSet {
            langs: targets.iter().map(|t| t.lang.clone()).collect(),
            users,
            tweet_lexical,
            bio_lexical,
            tweet_bags: bags.into_iter().map(|b| b.bag).collect(),
        };
        Ok((set, targets.iter().map(|t| t.weight_lb).collect()))
    }

    fn train(&self, w: &mut StageWriter) -> Result<Vec<String>> {
        let (set, y) = self.load_features_into(w)?;
        if set.is_empty() {
            return Err(Error::InvalidArgument("the individual cohort is empty".into()));
        }
        let flags = self.config.train.features;
        let view = set.view(self.config.features.resolve(flags));
        let all: Vec<usize> = (0..set.len()).collect();
        let x = view.scaled(&all)?;
        let mut models = Vec::new();
        let mut coefs = Vec::new();
        for trainer in &self.config.models {
            let fitted = trainer.fit(&x.values, &y, &set.langs)?;
            if let FittedModel::SvrLinear(m) = &fitted {
                coefs.push(ModelCoefficients {
                    model: trainer.to_string(),
                    features: flags.name(),
                    report: top_features(&x.features, &m.weights, self.config.train.top_k),
                });
            }
            models.push(TrainedModel {
                model: trainer.to_string(),
                features: flags.name(),
                summary: fitted.describe(),
            });
        }
        w.write_json("models.json", &models)?;
        w.write_json("coefficients.json", &coefs)?;
        w.write("coefficients.txt", render_coefficients(&coefs, self.config.report.top_k).as_bytes())?;
        Ok(Vec::new())
    }

    fn evaluate(&self, w: &mut StageWriter) -> Result<Vec<String>> {
        let models = require(&self.root, Stage::Train, "models.json")?;
        w.input(&models)?;
        let (set, y) = self.load_features_into(w)?;
        let mut reports = Vec::new();
        let mut pred = csv::Writer::from_writer(Vec::new());
        pred.write_record(["features", "model", "user_id", "fold", "y_true", "y_pred"])?;
        for flags in &self.config.features.evaluate {
            let view = set.view(self.config.features.resolve(*flags));
            for trainer in &self.config.models {
                let mut r = kfold_cv(&view, &y, &set.langs, self.config.cv.k, self.config.cv.seed, trainer)?;
                r.features = flags.name();
                let mut held = std::mem::take(&mut r.held_out);
                held.sort_by_key(|h| h.row);
                for h in &held {
                    pred.write_record([
                        r.features.as_str(),
                        r.model.as_str(),
                        set.users[h.row].as_str(),
                        &h.fold.to_string(),
                        &h.y_true.to_string(),
                        &h.y_pred.to_string(),
                    ])?;
                }
                reports.push(r);
            }
        }
        w.write_json("metrics.json", &reports)?;
        w.write("predictions.csv", &csv_bytes(pred)?)?;
        let table = render_metrics_table(&reports, &self.model_names(), &self.feature_names());
        w.write("metrics.txt", table.as_bytes())?;
        Ok(Vec::new())
    }

    pub fn model_names(&self) -> Vec<String> {
        self.config.models.iter().map(|m| m.to_string()).collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.config.features.evaluate.iter().map(|f| f.name()).collect()
    }

    fn trend_path(&self) -> Option<PathBuf> {
        match &self.config.paths.trends {
            Some(p) => Some(p.clone()),
            None if self.config.paths.corpus.is_empty() => require(&self.root, Stage::Synth, "trends.csv").ok(),
            None => None,
        }
    }

    fn trends(&self, w: &mut StageWriter) -> Result<Vec<String>> {
        let tweets = self.load_tweets(w)?;
        let series = self.load_series(w)?;
        let cohort = self.load_cohort(w)?;
        let members: BTreeSet<&str> = cohort.population_final.iter().map(String::as_str).collect();

        let mut events = Vec::new();
        for s in series.iter().filter(|s| members.contains(s.user_id.as_str())) {
            for o in &s.observations {
                let at = date_of_day_index(o.day_index).and_hms_opt(12, 0, 0).expect("noon").and_utc();
                events.push(Event { kind: EventKind::WeighIn, at });
            }
        }
        for t in tweets
            .iter()
            .filter(|t| t.class == SourceClass::Fitness && members.contains(t.tweet.user_id.as_str()))
        {
            events.push(Event {
                kind: EventKind::Fitness,
                at: t.tweet.created_at,
            });
        }
        let weekday = weekday_counts(&events);
        let clean: Vec<WeighInSeries> = series
            .into_iter()
            .filter(|s| members.contains(s.user_id.as_str()) && !s.is_excluded())
            .collect();
        let monthly = monthly_deviation(&clean);

        let mut out = TrendsOutput::default();
        if let Some(path) = self.trend_path() {
            w.input(&path)?;
            let ext = import_trend_csv(&path)?;
            out.warnings.extend(ext.warnings.iter().cloned());
            out.comparisons = compare_all(&ext, &weekday, &monthly)?;
        }

        let mut buf = Vec::new();
        weekday.write_csv(&mut buf)?;
        w.write("weekday.csv", &buf)?;
        w.write_json("weekday.json", &weekday)?;
        let mut buf = Vec::new();
        monthly.write_csv(&mut buf)?;
        w.write("monthly.csv", &buf)?;
        w.write_json("monthly.json", &monthly)?;
        let mut buf = Vec::new();
        write_long_csv(&mut buf, &weekday, &monthly)?;
        w.write("long.csv", &buf)?;
        w.write_json("comparisons.json", &out)?;
        Ok(Vec::new())
    }

    fn report(&self, w: &mut StageWriter) -> Result<Vec<String>> {
        let mut gaps = Vec::new();
        let mut section = |stage: Stage, name: &str, gaps: &mut Vec<String>| -> Result<Option<PathBuf>> {
            match require(&self.root, stage, name) {
                Ok(p) => {
                    w.input(&p)?;
                    Ok(Some(p))
                }
                Err(Error::MissingStage { .. }) => {
                    gaps.push(format!("{stage} outputs missing; run `{stage}` first"));
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        };
        let metrics: Option<Vec<MetricsReport>> = match section(Stage::Evaluate, "metrics.json", &mut gaps)? {
            Some(p) => Some(read_json(&p)?),
            None => None,
        };
        let coefficients: Option<Vec<ModelCoefficients>> = match section(Stage::Train, "coefficients.json", &mut gaps)? {
            Some(p) => Some(read_json(&p)?),
            None => None,
        };
        let (weekday, monthly, comparisons) = match section(Stage::Trends, "weekday.json", &mut gaps)? {
            Some(p) => {
                let dir = p.parent().expect("stage dir").to_path_buf();
                for name in ["monthly.json", "comparisons.json"] {
                    w.input(&dir.join(name))?;
                }
                let t: TrendsOutput = read_json(&dir.join("comparisons.json"))?;
                (Some(read_json(&p)?), Some(read_json(&dir.join("monthly.json"))?), Some(t.comparisons))
            }
            None => (None, None, None),
        };
        gaps.dedup();
        let report = Report {
            models: self.model_names(),
            feature_sets: self.feature_names(),
            metrics,
            coefficients,
            weekday,
            monthly,
            comparisons,
            gaps: gaps.clone(),
        };
        w.write_json("report.json", &report)?;
        w.write("report.txt", report.render(self.config.report.top_k).as_bytes())?;
        Ok(gaps)
    }
}

/// Weekday terms are compared with weigh-in and fitness counts, month terms
/// with the monthly deviation.
fn compare_all(
    ext: &TrendSeries,
    weekday: &crate::trends::WeekdayTable,
    monthly: &crate::trends::MonthlyDeviation,
) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for (term, values) in &ext.values {
        let days: BTreeMap<Period, f64> = values
            .iter()
            .filter(|(p, _)| matches!(p, Period::Weekday(_)))
            .map(|(p, v)| (*p, *v))
            .collect();
        let months: BTreeMap<Period, f64> = values
            .iter()
            .filter(|(p, _)| matches!(p, Period::Month(_)))
            .map(|(p, v)| (*p, *v))
            .collect();
        if !days.is_empty() {
            out.push(align_and_compare("weighins", &weekday.weighin_series(), term, &days)?);
            out.push(align_and_compare("fitness", &weekday.fitness_series(), term, &days)?);
        }
        if !months.is_empty() {
            out.push(align_and_compare("weight_deviation_lb", &monthly.mean_series(), term, &months)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct UserBag {
    user_id: String,
    #[serde(flatten)]
    bag: TokenBag,
}

#[derive(Debug, Clone, PartialEq)]
struct Target {
    user_id: String,
    lang: String,
    weight_lb: f64,
}

fn read_targets(path: &Path) -> Result<Vec<Target>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        let weight_lb = rec
            .get(2)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(path, i + 2, "bad reference weight"))?;
        out.push(Target {
            user_id: rec.get(0).unwrap_or_default().to_string(),
            lang: rec.get(1).unwrap_or_default().to_string(),
            weight_lb,
        });
    }
    Ok(out)
}

/// Reads a matrix written by [`FeatureMatrix::write_csv`].
pub fn read_feature_csv(path: &Path) -> Result<FeatureMatrix> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let header = rdr.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?.clone();
    if header.get(0) != Some("user_id") {
        return Err(Error::parse(path, 1, "first column must be user_id"));
    }
    let features: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut users = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        users.push(rec.get(0).unwrap_or_default().to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| Error::parse(path, line, format!("bad number '{v}'"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    FeatureMatrix::new(users, features, &rows)
}

fn read_ndjson<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}

fn csv_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))
}

impl StageWriter {
    fn note_input(&mut self, name: &str, content: &str) {
        self.record_input(name.to_string(), sha256_bytes(content.as_bytes()));
    }
}

/// Convenience used by tests and the CLI: prints a stage's outputs.
pub fn describe_outcome(o: &StageOutcome, out: &mut dyn std::io::Write) -> std::io::Result<()> {
    writeln!(out, "{}: {} output(s)", o.stage, o.manifest.outputs.len())?;
    for g in &o.gaps {
        writeln!(out, "  gap: {g}")?;
    }
    Ok(())
}
