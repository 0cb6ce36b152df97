//! Seeded synthetic corpora with known ground truth.
//!
//! Every user gets a latent usage level in [0, 1] for each planted feature;
//! the user's true weight is `mean + sum(effect * (z - 0.5)) + noise`, and
//! the same latents drive how often that category's words are tweeted.
//! Weigh-in trajectories are mean-reverting walks whose steps stay inside the
//! plausibility tolerance, so only injected users ever violate it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::ingest::format_twitter_timestamp;
use crate::lexfeat::{Lexicon, Provenance};
use crate::weighin::{pounds_to_kg, LB_PER_KG};

pub const LIWC_CATEGORIES: [&str; 64] = [
    "funct", "pronoun", "ppron", "i", "we", "you", "shehe", "they", "ipron", "article", "verb", "auxverb", "past",
    "present", "future", "adverb", "preps", "conj", "negate", "quant", "number", "swear", "social", "family",
    "friend", "humans", "affect", "posemo", "negemo", "anx", "anger", "sad", "cogmech", "insight", "cause",
    "discrep", "tentat", "certain", "inhib", "incl", "excl", "percept", "see", "hear", "feel", "bio", "body",
    "health", "sexual", "ingest", "relativ", "motion", "space", "time", "work", "achieve", "leisure", "home",
    "money", "relig", "death", "assent", "nonfl", "filler",
];

pub const PERMA_CATEGORIES: [&str; 10] = [
    "pos_emotion",
    "neg_emotion",
    "pos_engagement",
    "neg_engagement",
    "pos_relationships",
    "neg_relationships",
    "pos_meaning",
    "neg_meaning",
    "pos_achievement",
    "neg_achievement",
];

/// Weigh-in volume by weekday, Monday first (thousands of tweets).
pub const WEEKDAY_WEIGHINS: [f64; 7] = [54.0, 54.0, 54.0, 53.0, 47.0, 63.0, 52.0];
/// Fitness-tweet volume by weekday, Monday first (thousands of tweets).
pub const WEEKDAY_FITNESS: [f64; 7] = [9.4, 9.6, 9.3, 9.2, 8.9, 8.8, 9.0];
/// Google search scores by weekday, Monday first.
pub const WEEKDAY_SEARCH: [(&str, [f64; 7]); 3] = [
    ("bmi", [27.1, 28.5, 28.2, 27.8, 25.0, 21.6, 22.8]),
    ("weight loss", [36.1, 35.9, 34.8, 33.4, 31.5, 31.5, 34.1]),
    ("diet", [92.0, 90.5, 87.7, 85.0, 78.5, 78.3, 86.9]),
];

const SYLLABLES: [&str; 5] = ["ba", "ko", "mi", "zu", "te"];
const CONSONANTS: [&str; 8] = ["gl", "dr", "pl", "vr", "sn", "fl", "tr", "br"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const STEP_MARGIN_LB: f64 = 0.5;
const TRUE_WEIGHT_RANGE: (f64, f64) = (110.0, 290.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_users: usize,
    pub weight_mean_lb: f64,
    /// Text-independent spread of true weights around the planted signal.
    pub noise_sd_lb: f64,
    /// Feature name (e.g. `Tweet_LIWC_ingest`) -> lb difference between the
    /// lowest and highest usage level.
    pub planted: BTreeMap<String, f64>,
    pub weighins_per_user: (u32, u32),
    pub normal_tweets_per_user: (u32, u32),
    pub tokens_per_tweet: (u32, u32),
    pub fitness_tweets_per_user: (u32, u32),
    pub start_date: NaiveDate,
    pub span_days: u32,
    pub weekday_weighin_weights: [f64; 7],
    pub weekday_fitness_weights: [f64; 7],
    /// Seasonal offset added to every user's weight, January first.
    pub monthly_offset_lb: [f64; 12],
    /// Walk innovation stddev per weigh-in.
    pub step_sd_lb: f64,
    /// Fraction of users given isolated implausible spikes.
    pub violation_rate: f64,
    /// Fraction of users whose true weight lies outside the plausible band.
    pub outlier_rate: f64,
    /// Fraction of users below the friends/followers bar.
    pub low_social_rate: f64,
    /// Fraction of users with too few normal tweets.
    pub low_activity_rate: f64,
    /// Extra weigh-in-source tweets, as a fraction of weigh-ins, whose text
    /// carries no measurement.
    pub unparseable_fraction: f64,
    /// Fraction of users reporting in kilograms.
    pub kg_fraction: f64,
    pub language_mix: BTreeMap<String, f64>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            n_users: 400,
            weight_mean_lb: 178.4,
            noise_sd_lb: 10.0,
            planted: [
                ("Tweet_LIWC_ingest", 75.0),
                ("Tweet_LIWC_body", 60.0),
                ("Tweet_PERMA_neg_engagement", 50.0),
                ("Tweet_LIWC_posemo", -65.0),
                ("Tweet_LIWC_leisure", -60.0),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
            weighins_per_user: (20, 60),
            normal_tweets_per_user: (90, 110),
            tokens_per_tweet: (15, 25),
            fitness_tweets_per_user: (0, 20),
            start_date: NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date"),
            span_days: 730,
            weekday_weighin_weights: WEEKDAY_WEIGHINS,
            weekday_fitness_weights: WEEKDAY_FITNESS,
            monthly_offset_lb: [0.5, 0.3, 0.15, 0.0, -0.1, -0.15, -0.2, -0.2, -0.3, -0.4, -0.2, 0.2],
            step_sd_lb: 1.0,
            violation_rate: 0.02,
            outlier_rate: 0.01,
            low_social_rate: 0.02,
            low_activity_rate: 0.02,
            unparseable_fraction: 0.02,
            kg_fraction: 0.3,
            language_mix: [("en".to_string(), 0.75), ("ja".to_string(), 0.25)].into_iter().collect(),
        }
    }
}

impl SynthSpec {
    /// A spec with every injection turned off: all users are clean and pass
    /// the cohort rules.
    pub fn clean(seed: u64, n_users: usize) -> Self {
        SynthSpec {
            seed,
            n_users,
            violation_rate: 0.0,
            outlier_rate: 0.0,
            low_social_rate: 0.0,
            low_activity_rate: 0.0,
            unparseable_fraction: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("synth spec: {m}")));
        if self.n_users == 0 {
            return bad("n_users must be positive".into());
        }
        for (name, (lo, hi)) in [
            ("weighins_per_user", self.weighins_per_user),
            ("normal_tweets_per_user", self.normal_tweets_per_user),
            ("tokens_per_tweet", self.tokens_per_tweet),
            ("fitness_tweets_per_user", self.fitness_tweets_per_user),
        ] {
            if lo > hi {
                return bad(format!("{name} range is empty ({lo} > {hi})"));
            }
        }
        if self.weighins_per_user.0 < 2 {
            return bad("weighins_per_user must start at 2 or more".into());
        }
        if self.violation_rate > 0.0 && self.weighins_per_user.0 < 8 {
            return bad("violation injection needs at least 8 weigh-ins per user".into());
        }
        if self.tokens_per_tweet.0 == 0 {
            return bad("tokens_per_tweet must start at 1 or more".into());
        }
        if self.span_days == 0 {
            return bad("span_days must be positive".into());
        }
        for (name, v) in [
            ("violation_rate", self.violation_rate),
            ("outlier_rate", self.outlier_rate),
            ("low_social_rate", self.low_social_rate),
            ("low_activity_rate", self.low_activity_rate),
            ("unparseable_fraction", self.unparseable_fraction),
            ("kg_fraction", self.kg_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.violation_rate + self.outlier_rate > 1.0 {
            return bad("violation_rate + outlier_rate exceeds 1".into());
        }
        if !(self.noise_sd_lb >= 0.0) || !(self.step_sd_lb >= 0.0) {
            return bad("standard deviations must be non-negative".into());
        }
        if !self.weight_mean_lb.is_finite() || self.weight_mean_lb <= 0.0 {
            return bad("weight_mean_lb must be positive".into());
        }
        for (name, w) in [
            ("weekday_weighin_weights", &self.weekday_weighin_weights[..]),
            ("weekday_fitness_weights", &self.weekday_fitness_weights[..]),
        ] {
            if w.iter().any(|v| !(*v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return bad(format!("{name} must be non-negative with a positive sum"));
            }
        }
        if self.language_mix.is_empty()
            || self.language_mix.values().any(|v| !(*v >= 0.0))
            || self.language_mix.values().sum::<f64>() <= 0.0
        {
            return bad("language_mix must have non-negative weights with a positive sum".into());
        }
        let known = planted_targets();
        for (k, v) in &self.planted {
            if !known.contains_key(k.as_str()) {
                return bad(format!("planted feature {k:?} is not a tweet category of the synthetic lexicons"));
            }
            if !v.is_finite() {
                return bad(format!("planted effect for {k} is not finite"));
            }
        }
        Ok(())
    }
}

/// Planted-feature name -> (lexicon index, category index).
fn planted_targets() -> BTreeMap<String, (usize, usize)> {
    let mut out = BTreeMap::new();
    for (li, (name, cats)) in [("LIWC", &LIWC_CATEGORIES[..]), ("PERMA", &PERMA_CATEGORIES[..])]
        .iter()
        .enumerate()
    {
        for (ci, c) in cats.iter().enumerate() {
            out.insert(format!("{}{name}_{c}", Provenance::Tweet.prefix()), (li, ci));
        }
    }
    out
}

fn category_words(category: &str) -> Vec<String> {
    let stem: String = category.chars().filter(|c| c.is_ascii_alphabetic()).collect();
    SYLLABLES.iter().map(|s| format!("{stem}x{s}")).collect()
}

/// The two bundled lexicons, in `.dic` form: a 64-category LIWC-style one and
/// a 10-category PERMA-style one. Words are invented; each category gets five
/// words plus a `stem*` entry, and a few shared entries exercise multi-category
/// matches.
pub fn synthetic_lexicons() -> (Lexicon, Lexicon) {
    let build = |name: &str, cats: &[&str], extra: &[(&str, &[&str])]| {
        let categories: Vec<(u32, String)> = cats
            .iter()
            .enumerate()
            .map(|(i, c)| (i as u32 + 1, c.to_string()))
            .collect();
        let mut entries: Vec<(String, Vec<u32>)> = Vec::new();
        for (i, c) in cats.iter().enumerate() {
            for w in category_words(c) {
                entries.push((w, vec![i as u32 + 1]));
            }
            let stem: String = c.chars().filter(|c| c.is_ascii_alphabetic()).collect();
            entries.push((format!("{stem}qu*"), vec![i as u32 + 1]));
        }
        for (word, in_cats) in extra {
            let ids = in_cats
                .iter()
                .map(|c| cats.iter().position(|x| x == c).expect("known category") as u32 + 1)
                .collect();
            entries.push((word.to_string(), ids));
        }
        Lexicon::from_parts(name, categories, entries).expect("bundled lexicon is well formed")
    };
    let liwc = build(
        "LIWC",
        &LIWC_CATEGORIES,
        &[("brother", &["social", "family"]), ("eat*", &["ingest", "bio"]), ("happy", &["affect", "posemo"])],
    );
    let perma = build("PERMA", &PERMA_CATEGORIES, &[("distract", &["neg_emotion"])]);
    (liwc, perma)
}

/// Letters-only words that match no entry of either bundled lexicon.
fn filler_vocabulary(lexicons: &[&Lexicon], n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    'outer: for c1 in CONSONANTS {
        for v1 in VOWELS {
            for c2 in CONSONANTS {
                for v2 in VOWELS {
                    let w = format!("{c1}{v1}{c2}{v2}");
                    if lexicons.iter().all(|l| l.lookup(&w).is_empty()) {
                        out.push(w);
                    }
                    if out.len() == n {
                        break 'outer;
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    None,
    /// Isolated spikes; `expected_violations` plausibility failures.
    Violations { spikes: usize, expected_violations: usize },
    LowOutlier,
    HighOutlier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTruth {
    pub user_id: String,
    pub lang: String,
    pub unit: String,
    /// Weight before seasonal offsets and walk noise.
    pub true_weight_lb: f64,
    /// Mean of the rendered weigh-ins, as the parser will see them.
    pub observed_mean_lb: f64,
    pub latent: BTreeMap<String, f64>,
    pub injection: Injection,
    pub low_social: bool,
    pub low_activity: bool,
    pub weighins: usize,
    pub unparseable: usize,
    pub normal_tweets: usize,
    pub fitness_tweets: usize,
    pub friends_count: u64,
    pub followers_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SynthSpec,
    pub planted: BTreeMap<String, f64>,
    pub users: Vec<UserTruth>,
    pub violation_users: Vec<String>,
    pub outlier_users: Vec<String>,
    pub low_social_users: Vec<String>,
    pub low_activity_users: Vec<String>,
    pub lines: usize,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    /// Newline-terminated tweet objects in the Twitter v1.1 layout.
    pub corpus: String,
    pub manifest: SynthManifest,
    pub liwc: Lexicon,
    pub perma: Lexicon,
}

impl SynthCorpus {
    /// Writes `corpus.ndjson`, `truth.json`, `liwc.dic`, `perma.dic` and
    /// `trends.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("corpus.ndjson", self.corpus.clone()),
            ("truth.json", serde_json::to_string_pretty(&self.manifest)? + "\n"),
            ("liwc.dic", self.liwc.to_dic()),
            ("perma.dic", self.perma.to_dic()),
            ("trends.csv", weekday_search_csv()),
        ];
        let mut out = Vec::new();
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
            out.push(p);
        }
        Ok(out)
    }
}

/// The published weekday search scores as a `period,term,score` CSV.
pub fn weekday_search_csv() -> String {
    let mut s = String::from("period,term,score\n");
    for (term, scores) in WEEKDAY_SEARCH {
        for (d, v) in scores.iter().enumerate() {
            let _ = writeln!(s, "{},{term},{v:.1}", crate::trends::WEEKDAYS[d]);
        }
    }
    s
}

fn choose_users(rng: &mut ChaCha8Rng, pool: &mut Vec<usize>, rate: f64, n: usize) -> BTreeSet<usize> {
    let k = ((rate * n as f64).round() as usize).min(pool.len());
    pool.shuffle(rng);
    pool.drain(..k).collect()
}

fn range(rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)) -> usize {
    rng.random_range(lo..=hi) as usize
}

struct Calendar {
    start: NaiveDate,
    span: u32,
}

impl Calendar {
    /// A day whose weekday follows `weights` (rejection sampling).
    fn day(&self, rng: &mut ChaCha8Rng, weights: &[f64; 7]) -> i64 {
        let max = weights.iter().cloned().fold(0.0, f64::max);
        loop {
            let d = rng.random_range(0..self.span) as i64;
            let wd = (self.start + Duration::days(d)).weekday().num_days_from_monday() as usize;
            if rng.random::<f64>() * max < weights[wd] {
                return d;
            }
        }
    }

    fn timestamp(&self, rng: &mut ChaCha8Rng, day: i64) -> DateTime<Utc> {
        let secs = rng.random_range(0..86_400);
        (self.start + Duration::days(day))
            .and_hms_opt(0, 0, 0)
            .expect("midnight")
            .and_utc()
            + Duration::seconds(secs)
    }

    fn month0(&self, day: i64) -> usize {
        (self.start + Duration::days(day)).month0() as usize
    }
}

struct Emitter {
    out: String,
    next_id: u64,
    lines: usize,
}

impl Emitter {
    fn tweet(&mut self, user: &serde_json::Value, text: &str, source: &str, at: DateTime<Utc>, lang: &str) {
        self.next_id += 1;
        let v = json!({
            "id_str": self.next_id.to_string(),
            "created_at": format_twitter_timestamp(&at),
            "text": text,
            "source": source,
            "lang": lang,
            "user": user,
        });
        self.out.push_str(&v.to_string());
        self.out.push('\n');
        self.lines += 1;
    }
}

fn anchor(url: &str, name: &str) -> String {
    format!("<a href=\"{url}\" rel=\"nofollow\">{name}</a>")
}

fn render_weighin(rng: &mut ChaCha8Rng, lb: f64, kg: bool) -> (String, f64) {
    let (value, unit) = if kg {
        ((pounds_to_kg(lb) * 10.0).round() / 10.0, "kg")
    } else {
        ((lb * 10.0).round() / 10.0, *["lb", "lbs"].choose(rng).expect("non-empty"))
    };
    let parsed_lb = if kg { value * LB_PER_KG } else { value };
    let text = match rng.random_range(0..3) {
        0 => format!("I just weighed in at {value:.1} {unit} on my Withings scale"),
        1 => format!("My weight: {value:.1}{unit}. Tracked with my Withings Smart Body Analyzer"),
        _ => format!("{value:.1} {unit} this morning, logged by my Withings"),
    };
    (text, parsed_lb)
}

/// Generates the corpus and its manifest. Equal specs give byte-identical
/// output.
pub fn generate_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (liwc, perma) = synthetic_lexicons();
    let fillers = filler_vocabulary(&[&liwc, &perma], 300);
    let cat_words: Vec<Vec<Vec<String>>> = [&LIWC_CATEGORIES[..], &PERMA_CATEGORIES[..]]
        .iter()
        .map(|cats| cats.iter().map(|c| category_words(c)).collect())
        .collect();
    let targets = planted_targets();
    let planted: Vec<(String, f64, (usize, usize))> = spec
        .planted
        .iter()
        .map(|(k, v)| (k.clone(), *v, targets[k]))
        .collect();
    // Flat category index: LIWC first, then PERMA.
    let flat = |(li, ci): (usize, usize)| if li == 0 { ci } else { LIWC_CATEGORIES.len() + ci };
    let n_cats = LIWC_CATEGORIES.len() + PERMA_CATEGORIES.len();
    let word_of = |k: usize, rng: &mut ChaCha8Rng| -> String {
        let words = if k < LIWC_CATEGORIES.len() {
            &cat_words[0][k]
        } else {
            &cat_words[1][k - LIWC_CATEGORIES.len()]
        };
        words.choose(rng).expect("non-empty").clone()
    };

    let n = spec.n_users;
    let mut pool: Vec<usize> = (0..n).collect();
    let violators = choose_users(&mut rng, &mut pool, spec.violation_rate, n);
    let outliers = choose_users(&mut rng, &mut pool, spec.outlier_rate, n);
    let mut all: Vec<usize> = (0..n).collect();
    let low_social = choose_users(&mut rng, &mut all, spec.low_social_rate, n);
    let mut all: Vec<usize> = (0..n).collect();
    let low_activity = choose_users(&mut rng, &mut all, spec.low_activity_rate, n);

    let langs: Vec<&String> = spec.language_mix.keys().collect();
    let lang_dist = WeightedIndex::new(spec.language_mix.values().cloned())
        .map_err(|e| Error::InvalidArgument(format!("language_mix: {e}")))?;
    let noise = Normal::new(0.0, spec.noise_sd_lb).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let step = Normal::new(0.0, spec.step_sd_lb).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let cal = Calendar {
        start: spec.start_date,
        span: spec.span_days,
    };
    let normal_sources = [
        anchor("http://twitter.com/download/iphone", "Twitter for iPhone"),
        anchor("http://twitter.com/download/android", "Twitter for Android"),
        anchor("http://twitter.com", "Twitter Web Client"),
    ];
    let fitness_sources = [
        anchor("http://runkeeper.com", "RunKeeper"),
        anchor("http://www.fitbit.com", "Fitbit"),
        anchor("http://www.runtastic.com", "Runtastic"),
        anchor("http://nikeplus.com", "Nike+ GPS"),
    ];
    let witwit = anchor("http://www.withings.com", "WiTwit");

    let mut em = Emitter {
        out: String::new(),
        next_id: 500_000_000_000_000_000,
        lines: 0,
    };
    let mut truths = Vec::with_capacity(n);

    for u in 0..n {
        let user_id = format!("{}", 1_000_000 + u);
        let lang = langs[lang_dist.sample(&mut rng)].clone();
        let kg = rng.random::<f64>() < spec.kg_fraction;

        // Latents and true weight; clean users are redrawn until the truth
        // lies well inside the plausible band.
        let (latent, true_weight) = loop {
            let z: Vec<f64> = planted.iter().map(|_| rng.random::<f64>()).collect();
            let signal: f64 = planted.iter().zip(&z).map(|((_, e, _), z)| e * (z - 0.5)).sum();
            let w = spec.weight_mean_lb + signal + noise.sample(&mut rng);
            let ok = (TRUE_WEIGHT_RANGE.0..=TRUE_WEIGHT_RANGE.1).contains(&w);
            if ok || outliers.contains(&u) {
                break (z, w);
            }
        };
        let injection = if outliers.contains(&u) {
            if rng.random::<bool>() {
                Injection::LowOutlier
            } else {
                Injection::HighOutlier
            }
        } else if violators.contains(&u) {
            Injection::Violations {
                spikes: 3,
                expected_violations: 6,
            }
        } else {
            Injection::None
        };
        let base = match injection {
            Injection::LowOutlier => rng.random_range(70.0..90.0),
            Injection::HighOutlier => rng.random_range(320.0..360.0),
            _ => true_weight,
        };

        // Token distribution: planted categories scale with the latent,
        // the rest share a flat rate, fillers take the remainder.
        let mut probs = vec![0.004; n_cats];
        for ((_, _, target), z) in planted.iter().zip(&latent) {
            probs[flat(*target)] = 0.01 + 0.15 * z;
        }
        let filler_mass = (1.0 - probs.iter().sum::<f64>()).max(0.05);
        probs.push(filler_mass);
        let token_dist = WeightedIndex::new(&probs).expect("positive weights");
        let sentence = |rng: &mut ChaCha8Rng, len: usize| -> String {
            (0..len)
                .map(|_| {
                    let k = token_dist.sample(rng);
                    if k == n_cats {
                        fillers.choose(rng).expect("non-empty").clone()
                    } else {
                        word_of(k, rng)
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        };

        let (friends, followers) = if low_social.contains(&u) {
            if u % 2 == 0 {
                (60, 41)
            } else {
                (rng.random_range(0..50), rng.random_range(50..900))
            }
        } else {
            (rng.random_range(50..900), rng.random_range(50..900))
        };
        let bio_len = rng.random_range(6..=14);
        let bio = sentence(&mut rng, bio_len);
        let user_obj = json!({
            "id_str": user_id,
            "description": bio,
            "friends_count": friends,
            "followers_count": followers,
            "lang": lang,
        });

        let mut events: Vec<(DateTime<Utc>, String, String)> = Vec::new();

        // Weigh-ins.
        let k = range(&mut rng, spec.weighins_per_user);
        let mut days: Vec<i64> = (0..k).map(|_| cal.day(&mut rng, &spec.weekday_weighin_weights)).collect();
        days.sort_unstable();
        let mut weights = Vec::with_capacity(k);
        let mut dev = step.sample(&mut rng);
        for (i, &d) in days.iter().enumerate() {
            let target = base + spec.monthly_offset_lb[cal.month0(d)];
            let mut w = target + dev;
            if i > 0 {
                let bound = 4.0 + (d - days[i - 1]) as f64 - STEP_MARGIN_LB;
                let prev: f64 = weights[i - 1];
                w = w.clamp(prev - bound, prev + bound);
            }
            weights.push(w);
            dev = 0.8 * (w - target) + step.sample(&mut rng);
        }
        if let Injection::Violations { spikes, .. } = injection {
            // Interior, pairwise non-adjacent positions.
            let mut slots: Vec<usize> = (1..k - 1).filter(|i| i % 2 == 1).collect();
            slots.shuffle(&mut rng);
            for &i in slots.iter().take(spikes) {
                let gap = (days[i] - days[i - 1]).max(days[i + 1] - days[i]) as f64;
                weights[i] += 2.0 * (4.0 + gap) + 10.0;
            }
        }
        let mut observed = Vec::with_capacity(k);
        for (&d, &w) in days.iter().zip(&weights) {
            let (text, parsed) = render_weighin(&mut rng, w, kg);
            observed.push(parsed);
            events.push((cal.timestamp(&mut rng, d), text, witwit.clone()));
        }
        let unparseable = (0..k).filter(|_| rng.random::<f64>() < spec.unparseable_fraction).count();
        for _ in 0..unparseable {
            let d = cal.day(&mut rng, &spec.weekday_weighin_weights);
            events.push((
                cal.timestamp(&mut rng, d),
                "Lost a few lbs this month, see my Withings graph".to_string(),
                witwit.clone(),
            ));
        }

        let n_fit = range(&mut rng, spec.fitness_tweets_per_user);
        for _ in 0..n_fit {
            let d = cal.day(&mut rng, &spec.weekday_fitness_weights);
            let km = rng.random_range(2.0..15.0);
            let text = format!("Just completed a {km:.2} km run with my app!");
            let src = fitness_sources.choose(&mut rng).expect("non-empty").clone();
            events.push((cal.timestamp(&mut rng, d), text, src));
        }

        let n_normal = if low_activity.contains(&u) {
            rng.random_range(0..10)
        } else {
            range(&mut rng, spec.normal_tweets_per_user)
        };
        for _ in 0..n_normal {
            let d = rng.random_range(0..spec.span_days) as i64;
            let len = range(&mut rng, spec.tokens_per_tweet);
            let mut text = sentence(&mut rng, len);
            match rng.random_range(0..10) {
                0 => text.push_str(" http://t.co/abc123"),
                1 => text.insert_str(0, "@friend "),
                _ => {}
            }
            let src = normal_sources.choose(&mut rng).expect("non-empty").clone();
            events.push((cal.timestamp(&mut rng, d), text, src));
        }

        events.sort_by(|a, b| a.0.cmp(&b.0));
        for (at, text, src) in &events {
            em.tweet(&user_obj, text, src, *at, &lang);
        }

        truths.push(UserTruth {
            user_id,
            lang: lang.clone(),
            unit: if kg { "kg" } else { "lb" }.to_string(),
            true_weight_lb: base,
            observed_mean_lb: observed.iter().sum::<f64>() / k as f64,
            latent: planted.iter().zip(&latent).map(|((name, _, _), z)| (name.clone(), *z)).collect(),
            injection,
            low_social: low_social.contains(&u),
            low_activity: low_activity.contains(&u),
            weighins: k,
            unparseable,
            normal_tweets: n_normal,
            fitness_tweets: n_fit,
            friends_count: friends,
            followers_count: followers,
        });
    }

    let ids = |set: &BTreeSet<usize>| set.iter().map(|u| truths[*u].user_id.clone()).collect::<Vec<_>>();
    let manifest = SynthManifest {
        spec: spec.clone(),
        planted: spec.planted.clone(),
        violation_users: ids(&violators),
        outlier_users: ids(&outliers),
        low_social_users: ids(&low_social),
        low_activity_users: ids(&low_activity),
        users: truths,
        lines: em.lines,
    };
    Ok(SynthCorpus {
        corpus: em.out,
        manifest,
        liwc,
        perma,
    })
}
