//! Corpus ingestion: newline-delimited tweet records, keyword pre-filtering
//! and source-application classification.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Which application generated a tweet, as derived from its source field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceClass {
    WeighIn,
    OtherWeightLoss,
    Fitness,
    Normal,
}

impl SourceClass {
    pub const ALL: [SourceClass; 4] = [
        SourceClass::WeighIn,
        SourceClass::OtherWeightLoss,
        SourceClass::Fitness,
        SourceClass::Normal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceClass::WeighIn => "weigh_in",
            SourceClass::OtherWeightLoss => "other_weight_loss",
            SourceClass::Fitness => "fitness",
            SourceClass::Normal => "normal",
        }
    }
}

impl fmt::Display for SourceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub user_id: String,
    pub text: String,
    /// Visible application name, markup already stripped.
    pub source_label: String,
    pub created_at: DateTime<Utc>,
    pub lang: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub bio: String,
    pub friends_count: u64,
    pub followers_count: u64,
    pub lang: String,
}

/// One parsed corpus line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorpusRecord {
    Tweet {
        tweet: TweetRecord,
        /// Profile snapshot embedded in the tweet object, if present.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        user: Option<UserRecord>,
    },
    User(UserRecord),
}

/// Layout of the lines in a corpus file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSchema {
    /// Subset of the Twitter v1.1 tweet/user objects.
    #[default]
    TwitterV11,
    /// The normalized record store written by the `ingest` stage.
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Streaming reader over a corpus. Yields one item per input line, in order.
pub struct CorpusReader<R> {
    lines: std::io::Lines<R>,
    schema: CorpusSchema,
    line_no: usize,
    seen_ids: HashSet<String>,
    path: PathBuf,
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, schema: CorpusSchema) -> Self {
        CorpusReader {
            lines: reader.lines(),
            schema,
            line_no: 0,
            seen_ids: HashSet::new(),
            path: PathBuf::from("<stream>"),
        }
    }

    fn with_path(mut self, path: PathBuf) -> Self {
        self.path = path;
        self
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    /// Outer `Result` is fatal (I/O); inner is a per-line parse outcome.
    type Item = Result<std::result::Result<CorpusRecord, LineError>>;

    fn next(&mut self) -> Option<Self::Item> {
        let line = match self.lines.next()? {
            Ok(line) => line,
            Err(e) => return Some(Err(Error::io(&self.path, e))),
        };
        self.line_no += 1;
        let parsed = parse_line(&line, self.schema).and_then(|record| {
            if let CorpusRecord::Tweet { tweet, .. } = &record {
                if !self.seen_ids.insert(tweet.tweet_id.clone()) {
                    return Err(format!("duplicate tweet id {}", tweet.tweet_id));
                }
            }
            Ok(record)
        });
        Some(Ok(parsed.map_err(|message| LineError {
            line: self.line_no,
            message,
        })))
    }
}

/// Everything read from one corpus file.
#[derive(Debug, Default, Clone)]
pub struct CorpusRead {
    pub records: Vec<CorpusRecord>,
    pub errors: Vec<LineError>,
    pub lines: usize,
}

pub fn open_corpus(path: &Path, schema: CorpusSchema) -> Result<CorpusReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(CorpusReader::new(BufReader::new(file), schema).with_path(path.to_path_buf()))
}

/// Reads a whole corpus file. Malformed lines are collected, not dropped.
pub fn read_corpus(path: &Path, schema: CorpusSchema) -> Result<CorpusRead> {
    collect(open_corpus(path, schema)?)
}

pub fn read_corpus_from<R: BufRead>(reader: R, schema: CorpusSchema) -> Result<CorpusRead> {
    collect(CorpusReader::new(reader, schema))
}

fn collect<R: BufRead>(reader: CorpusReader<R>) -> Result<CorpusRead> {
    let mut out = CorpusRead::default();
    for item in reader {
        out.lines += 1;
        match item? {
            Ok(record) => out.records.push(record),
            Err(e) => out.errors.push(e),
        }
    }
    Ok(out)
}

fn parse_line(line: &str, schema: CorpusSchema) -> std::result::Result<CorpusRecord, String> {
    if line.trim().is_empty() {
        return Err("blank line".into());
    }
    match schema {
        CorpusSchema::Normalized => {
            let record: CorpusRecord =
                serde_json::from_str(line).map_err(|e| format!("invalid record: {e}"))?;
            if let CorpusRecord::Tweet { tweet, .. } = &record {
                if tweet.tweet_id.is_empty() {
                    return Err("empty tweet id".into());
                }
            }
            Ok(record)
        }
        CorpusSchema::TwitterV11 => {
            let value: Value =
                serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
            let obj = value.as_object().ok_or("record must be a JSON object")?;
            if obj.contains_key("text") || obj.contains_key("full_text") {
                parse_v11_tweet(&value).map(|(tweet, user)| CorpusRecord::Tweet {
                    tweet,
                    user: Some(user),
                })
            } else {
                parse_v11_user(&value).map(CorpusRecord::User)
            }
        }
    }
}

fn str_field<'a>(v: &'a Value, key: &str) -> std::result::Result<&'a str, String> {
    match v.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(format!("field '{key}' must be a string")),
        None => Err(format!("missing required field '{key}'")),
    }
}

fn opt_str(v: &Value, key: &str) -> String {
    v.get(key).and_then(Value::as_str).unwrap_or_default().to_string()
}

fn count_field(v: &Value, key: &str) -> std::result::Result<u64, String> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(0),
        Some(x) => x
            .as_u64()
            .ok_or_else(|| format!("field '{key}' must be a non-negative integer")),
    }
}

fn parse_v11_user(v: &Value) -> std::result::Result<UserRecord, String> {
    let user_id = str_field(v, "id_str")?;
    if user_id.is_empty() {
        return Err("empty user id".into());
    }
    Ok(UserRecord {
        user_id: user_id.to_string(),
        bio: opt_str(v, "description"),
        friends_count: count_field(v, "friends_count")?,
        followers_count: count_field(v, "followers_count")?,
        lang: v
            .get("lang")
            .and_then(Value::as_str)
            .unwrap_or("und")
            .to_string(),
    })
}

fn parse_v11_tweet(v: &Value) -> std::result::Result<(TweetRecord, UserRecord), String> {
    let tweet_id = str_field(v, "id_str")?;
    if tweet_id.is_empty() {
        return Err("empty tweet id".into());
    }
    let text = match v.get("full_text") {
        Some(Value::String(s)) => s.as_str(),
        _ => str_field(v, "text")?,
    };
    let user = v.get("user").ok_or("missing required field 'user'")?;
    let user = parse_v11_user(user).map_err(|e| format!("user: {e}"))?;
    let created_at = parse_timestamp(str_field(v, "created_at")?)?;
    let lang = v
        .get("lang")
        .and_then(Value::as_str)
        .unwrap_or("und")
        .to_string();
    let tweet = TweetRecord {
        tweet_id: tweet_id.to_string(),
        user_id: user.user_id.clone(),
        text: text.to_string(),
        source_label: strip_source_markup(&opt_str(v, "source")),
        created_at,
        lang,
    };
    Ok((tweet, user))
}

/// Twitter's `created_at` layout, e.g. `Wed Oct 14 20:19:24 +0000 2015`.
pub const TWITTER_TIME_FORMAT: &str = "%a %b %d %H:%M:%S %z %Y";

/// Parses a Twitter-style or RFC 3339 timestamp. Failures are errors, never
/// defaulted.
pub fn parse_timestamp(raw: &str) -> std::result::Result<DateTime<Utc>, String> {
    DateTime::parse_from_str(raw, TWITTER_TIME_FORMAT)
        .or_else(|_| DateTime::parse_from_rfc3339(raw))
        .map(|t| t.with_timezone(&Utc))
        .map_err(|_| format!("unparseable created_at '{raw}'"))
}

pub fn format_twitter_timestamp(t: &DateTime<Utc>) -> String {
    t.format(TWITTER_TIME_FORMAT).to_string()
}

/// Raw source fields are HTML anchors such as
/// `<a href="http://withings.com" rel="nofollow">WiTwit</a>`; keep the text.
pub fn strip_source_markup(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut in_tag = false;
    for c in raw.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&amp;", "&")
        .trim()
        .to_string()
}

fn keyword_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        // The unit must not be glued to a preceding letter (a preceding digit
        // is fine: "80kg") and must not run into a following letter or digit.
        Regex::new(r"(?i)(?:^|[^\p{L}\p{N}]|\p{N})(?:lb|kg)(?:$|[^\p{L}\p{N}])").unwrap()
    })
}

/// True iff `text` mentions the unit "lb" or "kg" as a standalone token or as
/// the suffix of a number.
pub fn keyword_prefilter(text: &str) -> bool {
    keyword_regex().is_match(text)
}

/// Ordered (pattern, class) list; the first case-insensitive substring match
/// wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternTable {
    pub patterns: Vec<SourcePattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcePattern {
    pub pattern: String,
    pub class: SourceClass,
}

impl Default for PatternTable {
    fn default() -> Self {
        use SourceClass::*;
        // "Nike+ GPS" precedes "Nike" so the longer name is not shadowed.
        let rows = [
            ("WiTwit", WeighIn),
            ("Lose It!", OtherWeightLoss),
            ("SimpleWeight", OtherWeightLoss),
            ("MyFitnessPal", OtherWeightLoss),
            ("RunKeeper", Fitness),
            ("Fitbit", Fitness),
            ("Nike+ GPS", Fitness),
            ("Nike", Fitness),
            ("Runmeter", Fitness),
            ("Runtastic", Fitness),
            ("iSmoothRun", Fitness),
        ];
        PatternTable::new(rows.iter().map(|(p, c)| (p.to_string(), *c)))
    }
}

impl PatternTable {
    pub fn new(rows: impl IntoIterator<Item = (String, SourceClass)>) -> Self {
        PatternTable {
            patterns: rows
                .into_iter()
                .map(|(pattern, class)| SourcePattern { pattern, class })
                .collect(),
        }
    }

    pub fn classify(&self, source_label: &str) -> SourceClass {
        classify_source(source_label, self)
    }
}

pub fn classify_source(source_label: &str, table: &PatternTable) -> SourceClass {
    let label = source_label.to_lowercase();
    table
        .patterns
        .iter()
        .find(|p| !p.pattern.is_empty() && label.contains(&p.pattern.to_lowercase()))
        .map_or(SourceClass::Normal, |p| p.class)
}

/// Summary emitted by the ingest stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: Vec<FileReport>,
    pub tweets: usize,
    pub users: usize,
    pub prefiltered_out: usize,
    pub class_counts: BTreeMap<SourceClass, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub path: String,
    pub lines: usize,
    pub records: usize,
    pub errors: Vec<LineError>,
}

/// Normalized, classified corpus ready for the downstream stages.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub tweets: Vec<(TweetRecord, SourceClass)>,
    /// Latest profile snapshot per user, keyed by user id.
    pub users: BTreeMap<String, UserRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub schema: CorpusSchema,
    pub patterns: PatternTable,
    /// Apply [`keyword_prefilter`]; meant for raw stream captures only.
    pub prefilter: bool,
}

/// Reads and classifies every file. Duplicate tweet ids across files keep the
/// first occurrence.
pub fn ingest_files(paths: &[PathBuf], opts: &IngestOptions) -> Result<(Corpus, IngestReport)> {
    let mut corpus = Corpus::default();
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    for path in paths {
        let read = read_corpus(path, opts.schema)?;
        let mut file_report = FileReport {
            path: path.display().to_string(),
            lines: read.lines,
            records: read.records.len(),
            errors: read.errors,
        };
        for record in read.records {
            match record {
                CorpusRecord::User(user) => {
                    corpus.users.insert(user.user_id.clone(), user);
                }
                CorpusRecord::Tweet { tweet, user } => {
                    if let Some(user) = user {
                        corpus.users.insert(user.user_id.clone(), user);
                    }
                    if opts.prefilter && !keyword_prefilter(&tweet.text) {
                        report.prefiltered_out += 1;
                        continue;
                    }
                    if !seen.insert(tweet.tweet_id.clone()) {
                        file_report.errors.push(LineError {
                            line: 0,
                            message: format!("tweet id {} already seen in an earlier file", tweet.tweet_id),
                        });
                        continue;
                    }
                    let class = opts.patterns.classify(&tweet.source_label);
                    corpus.tweets.push((tweet, class));
                }
            }
        }
        report.files.push(file_report);
    }
    for class in SourceClass::ALL {
        report.class_counts.insert(class, 0);
    }
    for (_, class) in &corpus.tweets {
        *report.class_counts.entry(*class).or_default() += 1;
    }
    report.tweets = corpus.tweets.len();
    report.users = corpus.users.len();
    Ok((corpus, report))
}
