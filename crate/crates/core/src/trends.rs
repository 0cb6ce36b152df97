//! Population-level aggregation: weekday activity, monthly weight deviation
//! and comparison with externally supplied search-interest series.
//!
//! All bucketing uses UTC; user time zones are not known.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::pearson;
use crate::weighin::{date_of_day_index, WeighInSeries};

pub const WEEKDAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];
pub const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];
const WEEKDAY_LONG: [&str; 7] = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const MONTH_LONG: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october",
    "november", "december",
];

/// A weekday (0 = Monday) or a month (0 = January).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Period {
    Weekday(u8),
    Month(u8),
}

impl Period {
    pub fn label(self) -> &'static str {
        match self {
            Period::Weekday(d) => WEEKDAYS[d as usize],
            Period::Month(m) => MONTHS[m as usize],
        }
    }

    /// Accepts three-letter or full names, any case.
    pub fn parse(label: &str) -> Option<Period> {
        let l = label.trim().to_lowercase();
        let find = |short: &[&str], long: &[&str]| {
            short
                .iter()
                .position(|s| s.to_lowercase() == l)
                .or_else(|| long.iter().position(|s| *s == l))
        };
        find(&WEEKDAYS, &WEEKDAY_LONG)
            .map(|i| Period::Weekday(i as u8))
            .or_else(|| find(&MONTHS, &MONTH_LONG).map(|i| Period::Month(i as u8)))
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    WeighIn,
    Fitness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub at: DateTime<Utc>,
}

/// Event counts per UTC weekday, Monday first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekdayTable {
    pub weighins: [u64; 7],
    pub fitness: [u64; 7],
}

impl WeekdayTable {
    pub fn total(&self) -> u64 {
        self.weighins.iter().chain(&self.fitness).sum()
    }

    pub fn weighin_series(&self) -> BTreeMap<Period, f64> {
        series_of(&self.weighins)
    }

    pub fn fitness_series(&self) -> BTreeMap<Period, f64> {
        series_of(&self.fitness)
    }

    /// Adds another shard's counts.
    pub fn merge(&mut self, other: &WeekdayTable) {
        for d in 0..7 {
            self.weighins[d] += other.weighins[d];
            self.fitness[d] += other.fitness[d];
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["weekday", "weighins", "fitness"])?;
        for d in 0..7 {
            w.write_record([WEEKDAYS[d], &self.weighins[d].to_string(), &self.fitness[d].to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<weekday table>", e))?;
        Ok(())
    }
}

fn series_of(counts: &[u64; 7]) -> BTreeMap<Period, f64> {
    counts
        .iter()
        .enumerate()
        .map(|(d, &c)| (Period::Weekday(d as u8), c as f64))
        .collect()
}

pub fn weekday_counts<'a, I: IntoIterator<Item = &'a Event>>(events: I) -> WeekdayTable {
    let mut t = WeekdayTable::default();
    for e in events {
        let d = e.at.weekday().num_days_from_monday() as usize;
        match e.kind {
            EventKind::WeighIn => t.weighins[d] += 1,
            EventKind::Fitness => t.fitness[d] += 1,
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthBucket {
    /// 0 = January.
    pub month: u8,
    /// Mean over users of (month mean - global mean), in lb.
    pub mean_lb: Option<f64>,
    /// Standard error of that mean: population stddev / sqrt(users).
    pub stderr_lb: Option<f64>,
    pub users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyDeviation {
    pub months: Vec<MonthBucket>,
}

/// One user's deviation per month (months pooled across years), with the
/// number of weigh-ins in that month.
pub fn user_monthly_deviations(series: &WeighInSeries) -> BTreeMap<u8, (f64, usize)> {
    let Some(global) = series.mean_lb() else {
        return BTreeMap::new();
    };
    let mut sums: BTreeMap<u8, (f64, usize)> = BTreeMap::new();
    for w in &series.observations {
        let m = date_of_day_index(w.day_index).month0() as u8;
        let e = sums.entry(m).or_default();
        e.0 += w.weight_lb;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(m, (sum, n))| (m, (sum / n as f64 - global, n)))
        .collect()
}

pub fn monthly_deviation(series: &[WeighInSeries]) -> MonthlyDeviation {
    let mut per_month: Vec<Vec<f64>> = vec![Vec::new(); 12];
    for s in series {
        for (m, (dev, _)) in user_monthly_deviations(s) {
            per_month[m as usize].push(dev);
        }
    }
    let months = per_month
        .into_iter()
        .enumerate()
        .map(|(m, devs)| {
            let n = devs.len();
            let (mean, se) = if n == 0 {
                (None, None)
            } else {
                let mean = devs.iter().sum::<f64>() / n as f64;
                let var = devs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
                (Some(mean), Some(var.sqrt() / (n as f64).sqrt()))
            };
            MonthBucket {
                month: m as u8,
                mean_lb: mean,
                stderr_lb: se,
                users: n,
            }
        })
        .collect();
    MonthlyDeviation { months }
}

impl MonthlyDeviation {
    pub fn mean_series(&self) -> BTreeMap<Period, f64> {
        self.months
            .iter()
            .filter_map(|b| b.mean_lb.map(|v| (Period::Month(b.month), v)))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["month", "mean_lb", "stderr_lb", "users"])?;
        for b in &self.months {
            w.write_record([
                MONTHS[b.month as usize].to_string(),
                opt(b.mean_lb),
                opt(b.stderr_lb),
                b.users.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<monthly deviation>", e))?;
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long-format rows (period, metric, value, stderr) for external plotting.
pub fn write_long_csv<W: Write>(out: W, weekday: &WeekdayTable, monthly: &MonthlyDeviation) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["period", "metric", "value", "stderr"])?;
    for d in 0..7 {
        w.write_record([WEEKDAYS[d], "weighins", &weekday.weighins[d].to_string(), ""])?;
    }
    for d in 0..7 {
        w.write_record([WEEKDAYS[d], "fitness", &weekday.fitness[d].to_string(), ""])?;
    }
    for b in &monthly.months {
        w.write_record([
            MONTHS[b.month as usize].to_string(),
            "weight_deviation_lb".to_string(),
            opt(b.mean_lb),
            opt(b.stderr_lb),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<long csv>", e))?;
    Ok(())
}

/// External series keyed by (term, period).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub values: BTreeMap<String, BTreeMap<Period, f64>>,
    pub warnings: Vec<String>,
}

impl TrendSeries {
    pub fn term(&self, term: &str) -> Option<&BTreeMap<Period, f64>> {
        self.values.get(term)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn import_trend_csv(path: &Path) -> Result<TrendSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trend_csv(file, path)
}

/// Reads `period,term,score` rows. Duplicate (period, term) pairs keep the
/// last value and add a warning.
pub fn parse_trend_csv<R: Read>(reader: R, origin: &Path) -> Result<TrendSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_lowercase()).collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(origin, 1, format!("missing column '{name}'")))
    };
    let (pi, ti, si) = (col("period")?, col("term")?, col("score")?);
    let mut out = TrendSeries::default();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(origin, line, e.to_string()))?;
        let field = |j: usize| rec.get(j).unwrap_or_default();
        let period = Period::parse(field(pi))
            .ok_or_else(|| Error::parse(origin, line, format!("unknown period label '{}'", field(pi))))?;
        let term = field(ti).to_string();
        let score: f64 = field(si)
            .parse()
            .map_err(|_| Error::parse(origin, line, format!("bad score '{}'", field(si))))?;
        if out.values.entry(term.clone()).or_default().insert(period, score).is_some() {
            let msg = format!("line {line}: duplicate ({period}, {term}); keeping the later value");
            log::warn!("{msg}");
            out.warnings.push(msg);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub period: String,
    pub qs: f64,
    pub external: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub term: String,
    pub rows: Vec<ComparisonRow>,
    /// Pearson correlation across periods; `None` if either side is flat.
    pub r: Option<f64>,
}

/// Pairs the two series period by period. Both must cover exactly the same
/// labels.
pub fn align_and_compare(
    metric: &str,
    qs: &BTreeMap<Period, f64>,
    term: &str,
    external: &BTreeMap<Period, f64>,
) -> Result<Comparison> {
    let a: BTreeSet<&Period> = qs.keys().collect();
    let b: BTreeSet<&Period> = external.keys().collect();
    if a != b {
        let missing: Vec<String> = a
            .symmetric_difference(&b)
            .map(|p| {
                let side = if qs.contains_key(p) { term } else { metric };
                format!("{p} (absent from {side})")
            })
            .collect();
        return Err(Error::LabelMismatch(missing));
    }
    let rows: Vec<ComparisonRow> = qs
        .iter()
        .map(|(p, v)| ComparisonRow {
            period: p.label().to_string(),
            qs: *v,
            external: external[p],
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.qs).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.external).collect();
    Ok(Comparison {
        metric: metric.to_string(),
        term: term.to_string(),
        r: pearson(&xs, &ys),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weighin::{build_series, WeighIn};
    use chrono::TimeZone;

    fn at(y: i32, m: u32, d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, 12, 0, 0).unwrap()
    }

    #[test]
    fn one_event_per_weekday() {
        // 2015-10-12 was a Monday.
        let events: Vec<Event> = (12..19)
            .map(|d| Event {
                kind: EventKind::WeighIn,
                at: at(2015, 10, d),
            })
            .collect();
        let t = weekday_counts(&events);
        assert_eq!(t.weighins, [1; 7]);
        assert_eq!(t.fitness, [0; 7]);
        assert_eq!(weekday_counts(&[]), WeekdayTable::default());
    }

    fn day(y: i32, m: u32, d: u32) -> i64 {
        crate::weighin::day_index(&at(y, m, d))
    }

    fn user(points: &[(i64, f64)]) -> WeighInSeries {
        build_series(
            "u",
            points
                .iter()
                .map(|&(d, w)| WeighIn {
                    user_id: "u".into(),
                    day_index: d,
                    weight_lb: w,
                })
                .collect(),
        )
    }

    #[test]
    fn jan_jul_user() {
        let s = user(&[(day(2015, 1, 5), 180.0), (day(2015, 7, 5), 178.0)]);
        let m = monthly_deviation(&[s]);
        assert_eq!(m.months[0].mean_lb, Some(1.0));
        assert_eq!(m.months[6].mean_lb, Some(-1.0));
        assert_eq!(m.months[3].users, 0);
        assert_eq!(m.months[3].mean_lb, None);
    }

    #[test]
    fn flat_user_has_zero_deviation() {
        let s = user(&[(day(2014, 2, 1), 150.0), (day(2014, 5, 1), 150.0), (day(2015, 2, 9), 150.0)]);
        let m = monthly_deviation(&[s]);
        assert!(m.months.iter().filter_map(|b| b.mean_lb).all(|v| v == 0.0));
    }

    #[test]
    fn trend_csv_rules() {
        let csv = "period,term,score\nMon,diet,92.0\nTue,diet,90.5\nMon,diet,91.0\n";
        let t = parse_trend_csv(csv.as_bytes(), Path::new("t.csv")).unwrap();
        assert_eq!(t.term("diet").unwrap()[&Period::Weekday(0)], 91.0);
        assert_eq!(t.warnings.len(), 1);

        let t = parse_trend_csv("period,term,score\n".as_bytes(), Path::new("t.csv")).unwrap();
        assert!(t.is_empty());

        let err = parse_trend_csv("period,term,score\nMon,diet,1\nFunday,diet,2\n".as_bytes(), Path::new("t.csv"))
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));

        let t = parse_trend_csv("period,term,score\nJanuary,bmi,3\n".as_bytes(), Path::new("t.csv")).unwrap();
        assert_eq!(t.term("bmi").unwrap()[&Period::Month(0)], 3.0);
    }

    #[test]
    fn compare_shapes() {
        let a: BTreeMap<Period, f64> = (0..7).map(|d| (Period::Weekday(d), d as f64)).collect();
        let same: BTreeMap<Period, f64> = (0..7).map(|d| (Period::Weekday(d), 10.0 + 2.0 * d as f64)).collect();
        let rev: BTreeMap<Period, f64> = (0..7).map(|d| (Period::Weekday(d), -(d as f64))).collect();
        assert!((align_and_compare("w", &a, "t", &same).unwrap().r.unwrap() - 1.0).abs() < 1e-12);
        assert!((align_and_compare("w", &a, "t", &rev).unwrap().r.unwrap() + 1.0).abs() < 1e-12);
        let mut short = same.clone();
        short.remove(&Period::Weekday(6));
        match align_and_compare("w", &a, "t", &short) {
            Err(Error::LabelMismatch(m)) => assert_eq!(m, vec!["Sun (absent from t)".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn period_labels() {
        assert_eq!(Period::parse("sat"), Some(Period::Weekday(5)));
        assert_eq!(Period::parse("SUNDAY"), Some(Period::Weekday(6)));
        assert_eq!(Period::parse("Dec"), Some(Period::Month(11)));
        assert_eq!(Period::parse("x"), None);
    }
}
