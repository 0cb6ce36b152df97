use std::path::{Path, PathBuf};
use std::process::Command;

use qsfuse::ingest::{IngestReport, SourceClass};
use qsfuse::pipeline::{CohortStage, ParseReport, Pipeline, PipelineConfig, Report, Stage, TrendsOutput};
use qsfuse::trends::WeekdayTable;
use qsfuse::weighin::{ExclusionReason, WeighInSeries};
use qsfuse::Error;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn fixture_config(dir: &Path) -> PathBuf {
    let text = format!(
        r#"
[paths]
corpus = ["{corpus}"]
lexicons = [{{ path = "{lex}" }}]
trends = "{trends}"

[cohort.individual]
require_social = false

[features]
evaluate = [{{ bio = false, bow = false }}, {{ bio = true, bow = true }}]

[train.features]
bio = false
bow = false

[features.bow]
min_df = 1
max_vocab = 100

[[models]]
kind = "constant"

[[models]]
kind = "svr_linear"

[cv]
k = 2
seed = 3
"#,
        corpus = fixture("mini_corpus.ndjson").display(),
        lex = fixture("mini.dic").display(),
        trends = fixture("mini_trends.csv").display(),
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn fixture_corpus_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig::load(&fixture_config(dir.path())).unwrap();
    let run = dir.path().join("run");
    let p = Pipeline::new(config, &run).unwrap();
    let outcomes = p.run_all().unwrap();
    assert!(outcomes.iter().all(|o| o.stage != Stage::Synth));
    assert!(outcomes.iter().all(|o| o.gaps.is_empty()));

    let ingest: IngestReport = read(&run.join("ingest/report.json"));
    assert_eq!(ingest.files[0].errors.len(), 1);
    assert_eq!(ingest.files[0].errors[0].line, 11);
    assert_eq!(ingest.class_counts[&SourceClass::WeighIn], 61);
    assert_eq!(ingest.class_counts[&SourceClass::Normal], 60);
    assert_eq!(ingest.class_counts[&SourceClass::Fitness], 3);
    assert_eq!(ingest.class_counts[&SourceClass::OtherWeightLoss], 1);

    let parse: ParseReport = read(&run.join("clean/parse_report.json"));
    assert_eq!((parse.parsed, parse.no_rule), (60, 1));
    let series: Vec<WeighInSeries> = read(&run.join("clean/series.json"));
    let by_id = |id: &str| series.iter().find(|s| s.user_id == id).unwrap();
    assert_eq!(by_id("103").excluded, Some(ExclusionReason::Violations));
    assert_eq!(by_id("103").violation_count, Some(4));
    assert!(!by_id("102").is_excluded());

    let cohort: CohortStage = read(&run.join("cohort/cohort.json"));
    assert_eq!(cohort.population_final, vec!["101", "102", "104", "105"]);
    assert_eq!(cohort.individual_final, vec!["101", "102", "104", "105"]);
    assert!(cohort.individual.retained.contains("103"));

    let targets = std::fs::read_to_string(run.join("cohort/targets.csv")).unwrap();
    let row: Vec<&str> = targets.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..2], ["101", "en"]);
    assert!((row[2].parse::<f64>().unwrap() - 183.2).abs() < 1e-9);

    let weekday: WeekdayTable = read(&run.join("trends/weekday.json"));
    assert_eq!(weekday.weighins.iter().sum::<u64>(), 48);
    assert_eq!(weekday.fitness.iter().sum::<u64>(), 2);
    let trends: TrendsOutput = read(&run.join("trends/comparisons.json"));
    assert_eq!(trends.comparisons.len(), 2);

    let report: Report = read(&run.join("report/report.json"));
    assert!(report.is_complete());
    assert!(report.metrics.is_some() && report.coefficients.is_some());
    assert!(report.weekday.is_some() && report.monthly.is_some());

    // The effective config is stored with the outputs and reloads to the same
    // hash.
    let effective = std::fs::read_to_string(run.join("config.effective.toml")).unwrap();
    let again = Pipeline::new(PipelineConfig::from_toml(&effective, Path::new("/")).unwrap(), &run).unwrap();
    assert_eq!(again.config_sha256(), p.config_sha256());
}

#[test]
fn stage_dependencies_are_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(PipelineConfig::default(), dir.path()).unwrap();
    for stage in [Stage::Ingest, Stage::Clean, Stage::Cohort, Stage::Features, Stage::Train, Stage::Trends] {
        assert!(matches!(p.run(stage), Err(Error::MissingStage { .. })), "{stage}");
    }
    let err = p.run(Stage::Evaluate).unwrap_err();
    assert!(err.to_string().contains("train outputs missing"), "{err}");
    // A failed stage leaves no manifest behind.
    assert!(!dir.path().join("evaluate/manifest.json").exists());
}

#[test]
fn interrupted_rerun_is_not_complete() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = PipelineConfig::default();
    config.synth.n_users = 20;
    let p = Pipeline::new(config, dir.path()).unwrap();
    p.run(Stage::Synth).unwrap();
    p.run(Stage::Ingest).unwrap();
    // Remove the corpus: the rerun fails and must not leave the old manifest.
    std::fs::remove_file(dir.path().join("synth/corpus.ndjson")).unwrap();
    assert!(p.run(Stage::Ingest).is_err());
    assert!(!dir.path().join("ingest/manifest.json").exists());
}

fn qsfuse(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qsfuse")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();

    let (code, _, err) = qsfuse(&["--out", out, "evaluate"]);
    assert_eq!(code, 3);
    assert!(err.contains("train outputs missing"), "{err}");

    assert_eq!(qsfuse(&["--bogus", "report"]).0, 1);
    assert_eq!(qsfuse(&["frobnicate"]).0, 1);
    assert_eq!(qsfuse(&["--help"]).0, 0);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[cv]\nk = 0\n").unwrap();
    assert_eq!(qsfuse(&["--config", bad.to_str().unwrap(), "--out", out, "synth"]).0, 1);

    let missing = dir.path().join("missing.toml");
    std::fs::write(&missing, "[paths]\ncorpus = [\"nowhere.ndjson\"]\n").unwrap();
    let (code, _, err) = qsfuse(&["--config", missing.to_str().unwrap(), "--out", out, "ingest"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn cli_report_sections_and_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let run = dir.path().join("run");
    let out = run.to_str().unwrap();

    let (code, stdout, err) = qsfuse(&["--config", cfg, "--out", out, "all"]);
    assert_eq!(code, 0, "{err}");
    for section in [
        "== Cross-validated weight prediction ==",
        "== Strongest coefficients ==",
        "== Weekday activity ==",
        "== Monthly weight deviation ==",
    ] {
        assert!(stdout.contains(section), "missing {section}");
    }
    assert!(!stdout.contains("(missing)"));

    // Row and column names of the grid are exactly the configured ones.
    let grid = std::fs::read_to_string(run.join("evaluate/metrics.txt")).unwrap();
    let lines: Vec<&str> = grid.lines().collect();
    let columns: Vec<&str> = lines[0].split('|').skip(1).map(str::trim).collect();
    assert_eq!(columns, ["tweet_only", "tweet_plus_bio+bow"]);
    let rows: Vec<&str> = lines[2..].iter().map(|l| l.split('|').next().unwrap().trim()).collect();
    assert_eq!(rows, ["constant", "svr_linear"]);

    std::fs::remove_dir_all(run.join("trends")).unwrap();
    let (code, stdout, _) = qsfuse(&["--config", cfg, "--out", out, "report"]);
    assert_eq!(code, 3);
    assert!(stdout.contains("== Cross-validated weight prediction =="));
    assert!(stdout.contains("== Strongest coefficients =="));
    assert!(stdout.contains("trends outputs missing"));
    let report: Report = read(&run.join("report/report.json"));
    assert_eq!(report.gaps.len(), 1);
    assert!(report.weekday.is_none() && report.monthly.is_none());
}

#[test]
fn seed_flag_changes_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, "[synth]\nn_users = 10\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (d, seed) in [(&a, "1"), (&b, "1"), (&c, "2")] {
        assert_eq!(qsfuse(&["--config", cfg, "--seed", seed, "--out", d.to_str().unwrap(), "synth"]).0, 0);
    }
    let corpus = |d: &Path| std::fs::read(d.join("synth/corpus.ndjson")).unwrap();
    assert_eq!(corpus(&a), corpus(&b));
    assert_ne!(corpus(&a), corpus(&c));
}
