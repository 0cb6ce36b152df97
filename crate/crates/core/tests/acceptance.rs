//! Acceptance checks. Runs without the libtest harness so each criterion
//! prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qsfuse::cohort::{select_cohort, CohortCandidate, CohortConfig};
use qsfuse::models::{compute_metrics, train_gp, CoefficientReport, GpParams, MetricsReport, SvrParams, Trainer};
use qsfuse::pipeline::{FeatureFlags, Pipeline, PipelineConfig, Stage, MANIFEST};
use qsfuse::synth::{SynthManifest, SynthSpec, WEEKDAY_FITNESS, WEEKDAY_SEARCH, WEEKDAY_WEIGHINS};
use qsfuse::trends::{
    align_and_compare, parse_trend_csv, user_monthly_deviations, weekday_counts, Event, EventKind, WEEKDAYS,
};
use qsfuse::weighin::{
    apply_exclusions, build_series, count_violations, pounds_to_kg, to_pounds, ExclusionReason, ExclusionThresholds,
    Unit, WeighIn, WeighInSeries,
};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("plausibility oracle", plausibility_oracle),
        ("boundary examples", boundary_examples),
        ("metric identities", metric_identities),
        ("gp oracle", gp_oracle),
        ("synthetic recovery", synthetic_recovery),
        ("trend identities", trend_identities),
        ("determinism", determinism),
        ("unit conversion", unit_conversion),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({secs:.2}s): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn series_of(obs: &[(i64, f64)]) -> WeighInSeries {
    build_series(
        "u",
        obs.iter()
            .map(|&(d, w)| WeighIn {
                user_id: "u".into(),
                day_index: d,
                weight_lb: w,
            })
            .collect(),
    )
}

/// Straight from the definition: stable sort by day, then compare each
/// neighbour pair.
fn brute_force_violations(obs: &[(i64, f64)]) -> usize {
    let mut idx: Vec<usize> = (0..obs.len()).collect();
    idx.sort_by_key(|&i| obs[i].0);
    let mut n = 0;
    for k in 1..idx.len() {
        let (d0, w0) = obs[idx[k - 1]];
        let (d1, w1) = obs[idx[k]];
        let allowed = 4.0 + (d1 - d0).abs() as f64;
        if (w1 - w0).abs() > allowed {
            n += 1;
        }
    }
    n
}

fn plausibility_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut total, mut boundary) = (0usize, 0usize);
    for case in 0..1000 {
        let len = rng.random_range(2..=300);
        let mut obs: Vec<(i64, f64)> = Vec::with_capacity(len);
        let mut day = rng.random_range(0..1000i64);
        let mut w = rng.random_range(120.0..250.0f64).round();
        for _ in 0..len {
            // Unsorted days and same-day repeats are part of the contract.
            let gap = if rng.random_bool(0.8) { rng.random_range(0..4) } else { -rng.random_range(0..3) };
            day += gap;
            // Quarter-pound steps keep sums exact, so the boundary is hit
            // exactly rather than within rounding.
            let step = match rng.random_range(0..10) {
                0 => 4.0 + gap.abs() as f64,
                1 => -(4.0 + gap.abs() as f64),
                2 => 4.25 + gap.abs() as f64,
                _ => rng.random_range(-24..=24) as f64 * 0.25,
            };
            w += step;
            obs.push((day, w));
        }
        if case % 2 == 1 {
            obs.reverse();
        }
        let expected = brute_force_violations(&obs);
        let got = count_violations(&series_of(&obs));
        ensure!(got == expected, "case {case}: got {got}, oracle {expected}");
        total += expected;
        boundary += obs.windows(2).filter(|p| (p[1].1 - p[0].1).abs() == 4.0 + (p[1].0 - p[0].0).abs() as f64).count();
    }
    // Explicit boundary pairs.
    ensure!(count_violations(&series_of(&[(0, 150.0), (0, 154.0)])) == 0, "|dw| = 4 on the same day must be plausible");
    ensure!(count_violations(&series_of(&[(0, 150.0), (3, 157.0)])) == 0, "|dw| = 4 + 3 must be plausible");
    ensure!(count_violations(&series_of(&[(0, 150.0), (3, 157.000001)])) == 1, "just over the bound must count");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("1000 series agree ({total} violations, {boundary} exact-boundary pairs) in {elapsed:.2?}"))
}

fn boundary_examples() -> Check {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/boundary_users.json");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let candidates: Vec<CohortCandidate> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let r = select_cohort(&candidates, &CohortConfig::individual());
    ensure!(!r.retained.contains("below_cutoff"), "60/41 user retained");
    ensure!(r.retained.contains("above_cutoff"), "657/55 user excluded: {:?}", r.excluded);

    let t = ExclusionThresholds::default();
    let flat = |w: f64| apply_exclusions(series_of(&[(0, w), (1, w)]), &t).excluded;
    ensure!(flat(100.0) == Some(ExclusionReason::None), "mean 100.0 must be retained");
    ensure!(flat(99.999) == Some(ExclusionReason::LowAvg), "mean 99.999 must be excluded");
    ensure!(flat(300.0) == Some(ExclusionReason::None), "mean 300.0 must be retained");
    ensure!(flat(300.001) == Some(ExclusionReason::HighAvg), "mean 300.001 must be excluded");

    // Alternating 200/210 on consecutive days: one violation per transition.
    let zigzag = |k: usize| {
        let obs: Vec<(i64, f64)> = (0..=k).map(|i| (i as i64, if i % 2 == 0 { 200.0 } else { 210.0 })).collect();
        apply_exclusions(series_of(&obs), &t)
    };
    let three = zigzag(3);
    let four = zigzag(4);
    ensure!(three.violation_count == Some(3) && !three.is_excluded(), "three violations must be retained");
    ensure!(four.violation_count == Some(4) && four.excluded == Some(ExclusionReason::Violations), "four violations must be excluded");
    Ok("60/41 excluded, 657/55 retained; 100.0/300.0 kept, 99.999/300.001 dropped; 3 violations kept, 4 dropped".into())
}

/// Definitional Pearson: covariance over the product of standard deviations.
fn pearson_oracle(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
    let sa = (a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n).sqrt();
    let sb = (b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n).sqrt();
    if sa == 0.0 || sb == 0.0 {
        None
    } else {
        Some(cov / (sa * sb))
    }
}

fn metric_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y: Vec<f64> = (0..100).map(|_| rng.random_range(100.0..300.0)).collect();
    let m = compute_metrics(&y, &y).map_err(|e| e.to_string())?;
    ensure!(m.r == Some(1.0) && m.mae == 0.0 && m.rmse == 0.0, "perfect predictions gave {m:?}");

    let mut worst = 0.0f64;
    for i in 0..1000 {
        let n = rng.random_range(2..200);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(100.0..300.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(100.0..300.0)).collect();
        let m = compute_metrics(&a, &b).map_err(|e| e.to_string())?;
        ensure!(m.mae <= m.rmse, "pair {i}: MAE {} > RMSE {}", m.mae, m.rmse);
        let (Some(r), Some(o)) = (m.r, pearson_oracle(&a, &b)) else {
            return Err(format!("pair {i}: r undefined"));
        };
        worst = worst.max((r - o).abs());
    }
    ensure!(worst <= 1e-12, "r deviates from oracle by {worst:e}");

    let flat = vec![180.0; 10];
    let m = compute_metrics(&y[..10], &flat).map_err(|e| e.to_string())?;
    ensure!(m.r.is_none(), "zero-variance predictions gave r = {:?}", m.r);
    Ok(format!("exact perfect case; MAE <= RMSE on 1000 pairs; max |r - oracle| = {worst:.1e}; flat -> undefined"))
}

fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn kernel(a: &[f64], b: &[f64], l: f64, s: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    s * (-d2 / (2.0 * l * l)).exp()
}

fn gp_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for p in 0..20 {
        let n = rng.random_range(2..=50);
        let d = rng.random_range(1..=10);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>() * 10.0 + rng.random_range(-1.0..1.0)).collect();
        let l = rng.random_range(0.3..2.0);
        let s = rng.random_range(0.5..5.0);
        let noise = rng.random_range(0.05..1.0);
        let mean = y.iter().sum::<f64>() / n as f64;

        let k: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| kernel(&x[i], &x[j], l, s) + if i == j { noise } else { 0.0 }).collect())
            .collect();
        let kinv = gauss_jordan_inverse(&k);
        let alpha: Vec<f64> = (0..n).map(|i| (0..n).map(|j| kinv[i][j] * (y[j] - mean)).sum()).collect();

        let xm = DMatrix::from_fn(n, d, |i, j| x[i][j]);
        let gp = train_gp(&xm, &y, l, s, noise).map_err(|e| format!("problem {p}: {e}"))?;
        for _ in 0..10 {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-0.2..1.2)).collect();
            let oracle = mean + (0..n).map(|i| kernel(&q, &x[i], l, s) * alpha[i]).sum::<f64>();
            worst = worst.max((gp.predict_row(&q) - oracle).abs());
        }
        for row in &x {
            let oracle = mean + (0..n).map(|j| kernel(row, &x[j], l, s) * alpha[j]).sum::<f64>();
            worst = worst.max((gp.predict_row(row) - oracle).abs());
        }
    }
    ensure!(worst <= 1e-8, "max deviation {worst:e}");
    Ok(format!("20 problems, max |gp - inverse oracle| = {worst:.1e}"))
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn synthetic_recovery() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let tweet_only = FeatureFlags { bio: false, bow: false };
    let mut config = PipelineConfig {
        synth: SynthSpec::clean(42, 400),
        models: vec![
            Trainer::Constant,
            Trainer::SvrLinear(SvrParams::default()),
            Trainer::GpRbf(GpParams {
                grid_search: true,
                ..Default::default()
            }),
        ],
        ..Default::default()
    };
    config.features.evaluate = vec![tweet_only];
    config.train.features = tweet_only;
    let pipeline = Pipeline::new(config, dir.path()).map_err(|e| e.to_string())?;
    pipeline.run_all().map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let truth: SynthManifest = read(&dir.path().join("synth/truth.json"))?;
    let metrics: Vec<MetricsReport> = read(&dir.path().join("evaluate/metrics.json"))?;
    let get = |m: &str| metrics.iter().find(|r| r.model == m).ok_or(format!("no metrics for {m}"));
    let svr = get("svr_linear")?.pooled;
    let gp = get("gp_rbf")?.pooled;
    let constant = get("constant")?.pooled;
    ensure!(svr.n == 400, "cohort has {} users, expected 400", svr.n);
    ensure!(svr.r.unwrap_or(0.0) >= 0.9, "svr_linear pooled r = {:?}", svr.r);
    ensure!(gp.r.unwrap_or(0.0) >= 0.9, "gp_rbf pooled r = {:?}", gp.r);

    // Mean absolute deviation of the true per-user means, from the generator.
    let y: Vec<f64> = truth.users.iter().map(|u| u.observed_mean_lb).collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mad = y.iter().map(|v| (v - mean).abs()).sum::<f64>() / y.len() as f64;
    let ratio = constant.mae / mad;
    ensure!((ratio - 1.0).abs() <= 0.05, "baseline MAE {:.3} vs MAD {mad:.3}", constant.mae);

    #[derive(serde::Deserialize)]
    struct Coefs {
        model: String,
        report: CoefficientReport,
    }
    let coefs: Vec<Coefs> = read(&dir.path().join("train/coefficients.json"))?;
    let svr_coefs = &coefs.iter().find(|c| c.model == "svr_linear").ok_or("no svr coefficients")?.report;
    for (name, effect) in &truth.planted {
        let side = if *effect > 0.0 { &svr_coefs.positive } else { &svr_coefs.negative };
        ensure!(side.iter().any(|(n, _)| n == name), "planted {name} ({effect:+}) not in the right top list");
    }
    ensure!(elapsed < Duration::from_secs(60), "full run took {elapsed:?}");
    Ok(format!(
        "r svr {:.3}, gp {:.3}; baseline MAE/MAD {ratio:.3}; {} planted categories signed correctly; {elapsed:.1?}",
        svr.r.unwrap_or(f64::NAN),
        gp.r.unwrap_or(f64::NAN),
        truth.planted.len()
    ))
}

fn trend_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..200);
        let obs: Vec<(i64, f64)> = (0..n)
            .map(|_| (rng.random_range(16000..17500), rng.random_range(100.0..300.0)))
            .collect();
        let dev = user_monthly_deviations(&series_of(&obs));
        let sum: f64 = dev.values().map(|(d, k)| d * *k as f64).sum();
        worst = worst.max(sum.abs());
    }
    ensure!(worst <= 1e-9, "count-weighted deviations sum to {worst:e}");

    let events: Vec<Event> = (0..5000)
        .map(|_| Event {
            kind: if rng.random_bool(0.7) { EventKind::WeighIn } else { EventKind::Fitness },
            at: Utc.timestamp_opt(rng.random_range(1.3e9 as i64..1.5e9 as i64), 0).unwrap(),
        })
        .collect();
    let t = weekday_counts(&events);
    ensure!(t.total() == 5000, "weekday counts total {} of 5000", t.total());
    ensure!(t.weighins.iter().sum::<u64>() + t.fitness.iter().sum::<u64>() == 5000, "column sums disagree");

    // Replay: one event per published thousand (weigh-ins) or hundred
    // (fitness) on a Monday-anchored week.
    let monday = Utc.with_ymd_and_hms(2015, 9, 7, 8, 0, 0).unwrap();
    let mut replay = Vec::new();
    for d in 0..7 {
        let at = monday + chrono::Duration::days(d as i64);
        for _ in 0..(WEEKDAY_WEIGHINS[d] * 1000.0).round() as usize {
            replay.push(Event { kind: EventKind::WeighIn, at });
        }
        for _ in 0..(WEEKDAY_FITNESS[d] * 100.0).round() as usize {
            replay.push(Event { kind: EventKind::Fitness, at });
        }
    }
    let t = weekday_counts(&replay);
    let sat = t.weighins[5];
    ensure!(
        t.weighins.iter().enumerate().all(|(d, &c)| d == 5 || c < sat),
        "Saturday is not the strict maximum: {:?}",
        t.weighins
    );

    let csv = ["period,term,score"]
        .into_iter()
        .map(String::from)
        .chain(WEEKDAY_SEARCH.iter().flat_map(|(term, v)| {
            v.iter().enumerate().map(move |(d, s)| format!("{},{term},{s}", WEEKDAYS[d]))
        }))
        .collect::<Vec<_>>()
        .join("\n");
    let ext = parse_trend_csv(csv.as_bytes(), Path::new("<table>")).map_err(|e| e.to_string())?;
    let diet = ext.term("diet").ok_or("no diet term")?;
    let cmp = align_and_compare("weighins", &t.weighin_series(), "diet", diet).map_err(|e| e.to_string())?;
    let r = cmp.r.ok_or("undefined r")?;
    let published_diet = WEEKDAY_SEARCH.iter().find(|(t, _)| *t == "diet").unwrap().1;
    let oracle = pearson_oracle(&WEEKDAY_WEIGHINS, &published_diet).unwrap();
    ensure!(r < 0.0, "weigh-ins vs diet r = {r}");
    ensure!((r - oracle).abs() < 1e-9, "replayed r {r} vs table r {oracle}");
    Ok(format!(
        "deviation sums <= {worst:.1e}; totals match; Saturday max ({sat}); weigh-ins vs diet r = {r:.3}"
    ))
}

fn hash_tree(root: &Path) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let p = e.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, qsfuse::pipeline::sha256_file(&p).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(out)
}

fn determinism() -> Check {
    let mut config = PipelineConfig::default();
    config.synth.n_users = 150;
    let mut trees = Vec::new();
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for dir in &dirs {
        let p = Pipeline::new(config.clone(), dir.path()).map_err(|e| e.to_string())?;
        p.run_all().map_err(|e| e.to_string())?;
        trees.push(hash_tree(dir.path())?);
    }
    ensure!(trees[0] == trees[1], "artifact hashes differ");
    let manifests = trees[0].keys().filter(|k| k.ends_with(MANIFEST)).count();
    ensure!(manifests == Stage::ALL.len(), "{manifests} stage manifests");
    Ok(format!("{} artifacts hash-identical across two runs", trees[0].len()))
}

fn unit_conversion() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let kg = rng.random_range(0.0..500.0);
        let lb = to_pounds(kg, Unit::Kg).map_err(|e| e.to_string())?;
        worst = worst.max((pounds_to_kg(lb) - kg).abs());
    }
    ensure!(worst <= 1e-9, "max round-trip error {worst:e}");
    Ok(format!("1000 values, max error {worst:.1e}"))
}
