//! Weigh-in parsing, per-user weight series, plausibility checks and the
//! reference weight.

use std::fmt;
use std::io::Write;

use chrono::{DateTime, NaiveDate, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pounds per kilogram.
pub const LB_PER_KG: f64 = 2.20462262185;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Kg,
    Lb,
}

impl Unit {
    /// Maps the accepted spellings (kg, kgs, kilogram(s), lb, lbs, pound(s)).
    pub fn from_alias(s: &str) -> Option<Unit> {
        match s.to_lowercase().as_str() {
            "kg" | "kgs" | "kilogram" | "kilograms" => Some(Unit::Kg),
            "lb" | "lbs" | "pound" | "pounds" => Some(Unit::Lb),
            _ => None,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Kg => "kg",
            Unit::Lb => "lb",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub value: f64,
    pub unit: Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoMatch {
    /// No grammar rule matched.
    NoRule,
    /// A rule matched but the value was zero (or otherwise not positive).
    Nonpositive,
}

impl fmt::Display for NoMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoMatch::NoRule => "no rule matched",
            NoMatch::Nonpositive => "nonpositive",
        })
    }
}

const UNIT_ALT: &str = "kilograms|kilogram|pounds|pound|kgs|lbs|kg|lb";

/// Ordered extraction rules. Each rule is a regex with named groups `value`
/// and `unit`; the first rule that matches decides.
#[derive(Debug, Clone)]
pub struct WeighInGrammar {
    rules: Vec<Regex>,
}

impl Default for WeighInGrammar {
    fn default() -> Self {
        WeighInGrammar::from_patterns(&default_rule_patterns()).expect("default grammar compiles")
    }
}

pub fn default_rule_patterns() -> Vec<String> {
    vec![
        format!(r"(?i)\bweighed\s+in\s+at\s+(?P<value>\d+(?:\.\d+)?)\s*(?P<unit>{UNIT_ALT})\b"),
        format!(r"(?i)(?:^|[^\w.])(?P<value>\d+(?:\.\d+)?)(?P<unit>{UNIT_ALT})\b"),
        format!(r"(?i)(?:^|[^\w.])(?P<value>\d+(?:\.\d+)?)\s+(?P<unit>{UNIT_ALT})\b"),
    ]
}

impl WeighInGrammar {
    pub fn from_patterns(patterns: &[String]) -> Result<Self> {
        let mut rules = Vec::with_capacity(patterns.len());
        for p in patterns {
            let re = Regex::new(p).map_err(|e| Error::Config(format!("bad weigh-in rule {p:?}: {e}")))?;
            let names: Vec<_> = re.capture_names().flatten().collect();
            if !names.contains(&"value") || !names.contains(&"unit") {
                return Err(Error::Config(format!(
                    "weigh-in rule {p:?} needs named groups `value` and `unit`"
                )));
            }
            rules.push(re);
        }
        Ok(WeighInGrammar { rules })
    }

    pub fn parse(&self, text: &str) -> std::result::Result<Measurement, NoMatch> {
        parse_weighin(text, self)
    }
}

/// Extracts a weight measurement from a weigh-in tweet.
pub fn parse_weighin(text: &str, grammar: &WeighInGrammar) -> std::result::Result<Measurement, NoMatch> {
    for rule in &grammar.rules {
        let Some(caps) = rule.captures(text) else {
            continue;
        };
        let Some(unit) = caps.name("unit").and_then(|m| Unit::from_alias(m.as_str())) else {
            continue;
        };
        let Some(value) = caps.name("value").and_then(|m| m.as_str().parse::<f64>().ok()) else {
            continue;
        };
        if !(value > 0.0) || !value.is_finite() {
            return Err(NoMatch::Nonpositive);
        }
        return Ok(Measurement { value, unit });
    }
    Err(NoMatch::NoRule)
}

pub fn to_pounds(value: f64, unit: Unit) -> Result<f64> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidArgument(format!("weight must be positive, got {value}")));
    }
    Ok(match unit {
        Unit::Lb => value,
        Unit::Kg => value * LB_PER_KG,
    })
}

pub fn pounds_to_kg(lb: f64) -> f64 {
    lb / LB_PER_KG
}

/// Days since 1970-01-01 of the UTC calendar date of `t`.
pub fn day_index(t: &DateTime<Utc>) -> i64 {
    t.date_naive()
        .signed_duration_since(NaiveDate::from_ymd_opt(1970, 1, 1).unwrap())
        .num_days()
}

pub fn date_of_day_index(day: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + chrono::Duration::days(day)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeighIn {
    pub user_id: String,
    pub day_index: i64,
    pub weight_lb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    #[default]
    None,
    Violations,
    LowAvg,
    HighAvg,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::None => "none",
            ExclusionReason::Violations => "violations",
            ExclusionReason::LowAvg => "low_avg",
            ExclusionReason::HighAvg => "high_avg",
        }
    }
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeighInSeries {
    pub user_id: String,
    /// Sorted by (day_index, original order).
    pub observations: Vec<WeighIn>,
    /// `None` until [`count_violations`] has been applied.
    pub violation_count: Option<usize>,
    /// `None` until [`apply_exclusions`] has been applied.
    pub excluded: Option<ExclusionReason>,
}

impl WeighInSeries {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn is_excluded(&self) -> bool {
        matches!(self.excluded, Some(r) if r != ExclusionReason::None)
    }

    pub fn mean_lb(&self) -> Option<f64> {
        if self.observations.is_empty() {
            None
        } else {
            Some(self.observations.iter().map(|w| w.weight_lb).sum::<f64>() / self.len() as f64)
        }
    }
}

/// Stable sort by day; violation and exclusion fields start unset.
pub fn build_series(user_id: &str, mut weighins: Vec<WeighIn>) -> WeighInSeries {
    weighins.sort_by_key(|w| w.day_index);
    WeighInSeries {
        user_id: user_id.to_string(),
        observations: weighins,
        violation_count: None,
        excluded: None,
    }
}

/// Consecutive pair (i, i+1) is implausible when
/// |w(i) - w(i+1)| > 4 + |d(i) - d(i+1)| (pounds, days).
pub fn is_plausible_transition(a: &WeighIn, b: &WeighIn) -> bool {
    let days = (a.day_index - b.day_index).unsigned_abs() as f64;
    (a.weight_lb - b.weight_lb).abs() <= 4.0 + days
}

pub fn count_violations(series: &WeighInSeries) -> usize {
    series
        .observations
        .windows(2)
        .filter(|pair| !is_plausible_transition(&pair[0], &pair[1]))
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExclusionThresholds {
    pub max_violations: usize,
    pub low_lb: f64,
    pub high_lb: f64,
}

impl Default for ExclusionThresholds {
    fn default() -> Self {
        ExclusionThresholds {
            max_violations: 3,
            low_lb: 100.0,
            high_lb: 300.0,
        }
    }
}

/// Tags the series; observations are never touched. Computes the violation
/// count first if it is still unset.
pub fn apply_exclusions(mut series: WeighInSeries, thresholds: &ExclusionThresholds) -> WeighInSeries {
    let violations = match series.violation_count {
        Some(v) => v,
        None => count_violations(&series),
    };
    series.violation_count = Some(violations);
    let reason = if violations > thresholds.max_violations {
        ExclusionReason::Violations
    } else {
        match series.mean_lb() {
            Some(m) if m < thresholds.low_lb => ExclusionReason::LowAvg,
            Some(m) if m > thresholds.high_lb => ExclusionReason::HighAvg,
            _ => ExclusionReason::None,
        }
    };
    series.excluded = Some(reason);
    series
}

/// Arithmetic mean over all observations of a retained series.
pub fn reference_weight(series: &WeighInSeries) -> Result<f64> {
    if series.is_excluded() {
        return Err(Error::NoReferenceWeight(format!(
            "series for {} is excluded ({})",
            series.user_id,
            series.excluded.unwrap_or_default()
        )));
    }
    series
        .mean_lb()
        .ok_or_else(|| Error::NoReferenceWeight(format!("series for {} is empty", series.user_id)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionRow {
    pub user_id: String,
    pub n_weighins: usize,
    pub violation_count: usize,
    pub mean_lb: Option<f64>,
    pub exclusion_reason: ExclusionReason,
}

impl From<&WeighInSeries> for ExclusionRow {
    fn from(s: &WeighInSeries) -> Self {
        ExclusionRow {
            user_id: s.user_id.clone(),
            n_weighins: s.len(),
            violation_count: s.violation_count.unwrap_or_else(|| count_violations(s)),
            mean_lb: s.mean_lb(),
            exclusion_reason: s.excluded.unwrap_or_default(),
        }
    }
}

/// CSV with columns user_id, n_weighins, violation_count, mean_lb,
/// exclusion_reason.
pub fn write_exclusion_report<W: Write>(out: W, series: &[WeighInSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in series {
        w.serialize(ExclusionRow::from(s))?;
    }
    w.flush().map_err(|e| Error::io("<exclusion report>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wi(day: i64, w: f64) -> WeighIn {
        WeighIn {
            user_id: "u".into(),
            day_index: day,
            weight_lb: w,
        }
    }

    fn series(points: &[(i64, f64)]) -> WeighInSeries {
        build_series("u", points.iter().map(|&(d, w)| wi(d, w)).collect())
    }

    #[test]
    fn parse_default_rules() {
        let g = WeighInGrammar::default();
        assert_eq!(
            g.parse("I weighed in at 80.0 kg").unwrap(),
            Measurement { value: 80.0, unit: Unit::Kg }
        );
        assert_eq!(
            g.parse("I weighed in at 176 lb").unwrap(),
            Measurement { value: 176.0, unit: Unit::Lb }
        );
        assert_eq!(g.parse("great run today!"), Err(NoMatch::NoRule));
        assert_eq!(
            g.parse("down to 79.4kg today").unwrap(),
            Measurement { value: 79.4, unit: Unit::Kg }
        );
        assert_eq!(
            g.parse("now 170.2 Pounds").unwrap(),
            Measurement { value: 170.2, unit: Unit::Lb }
        );
        assert_eq!(g.parse("I weighed in at 0 kg"), Err(NoMatch::Nonpositive));
        assert_eq!(g.parse("I weighed in at 0.0 lbs"), Err(NoMatch::Nonpositive));
    }

    #[test]
    fn first_rule_wins() {
        let g = WeighInGrammar::default();
        // The generic rules would pick up "5 kg" first in text order.
        let m = g.parse("lost 5 kg, I weighed in at 90 kg").unwrap();
        assert_eq!(m.value, 90.0);
    }

    #[test]
    fn custom_rules_need_named_groups() {
        assert!(WeighInGrammar::from_patterns(&["(\\d+) kg".to_string()]).is_err());
        let g = WeighInGrammar::from_patterns(&[r"peso (?P<value>\d+) (?P<unit>kg)".to_string()]).unwrap();
        assert_eq!(g.parse("peso 70 kg").unwrap().value, 70.0);
    }

    #[test]
    fn conversion() {
        assert_eq!(to_pounds(176.0, Unit::Lb).unwrap(), 176.0);
        assert_eq!(to_pounds(1.0, Unit::Kg).unwrap(), 2.20462262185);
        assert!((to_pounds(80.0, Unit::Kg).unwrap() - 176.369_809_748).abs() < 1e-9);
        assert!(to_pounds(0.0, Unit::Kg).is_err());
        assert!(to_pounds(-3.0, Unit::Lb).is_err());
        assert!(to_pounds(f64::NAN, Unit::Lb).is_err());
    }

    #[test]
    fn stable_build() {
        let s = build_series("u", vec![wi(5, 1.0), wi(3, 2.0), wi(5, 3.0)]);
        let order: Vec<_> = s.observations.iter().map(|w| (w.day_index, w.weight_lb)).collect();
        assert_eq!(order, vec![(3, 2.0), (5, 1.0), (5, 3.0)]);
        assert_eq!(s.violation_count, None);
        assert_eq!(build_series("u", vec![]).len(), 0);
        assert_eq!(build_series("u", vec![wi(1, 2.0)]).len(), 1);
    }

    #[test]
    fn violation_examples() {
        assert_eq!(count_violations(&series(&[(0, 180.0), (1, 186.0)])), 1);
        assert_eq!(count_violations(&series(&[(0, 180.0), (1, 185.0)])), 0);
        // Same day: tolerance is exactly 4 lb.
        assert_eq!(count_violations(&series(&[(3, 180.0), (3, 184.0)])), 0);
        assert_eq!(count_violations(&series(&[(3, 180.0), (3, 184.5)])), 1);
        assert_eq!(count_violations(&series(&[])), 0);
    }

    #[test]
    fn exclusion_rules() {
        let t = ExclusionThresholds::default();
        // Alternating spikes: 4 violations.
        let spiky = series(&[(0, 180.0), (0, 190.0), (0, 180.0), (0, 190.0), (0, 180.0)]);
        let tagged = apply_exclusions(spiky.clone(), &t);
        assert_eq!(tagged.violation_count, Some(4));
        assert_eq!(tagged.excluded, Some(ExclusionReason::Violations));
        assert_eq!(tagged.observations, spiky.observations);

        let three = series(&[(0, 180.0), (0, 190.0), (0, 180.0), (0, 190.0)]);
        assert_eq!(apply_exclusions(three, &t).excluded, Some(ExclusionReason::None));

        assert_eq!(
            apply_exclusions(series(&[(0, 99.9)]), &t).excluded,
            Some(ExclusionReason::LowAvg)
        );
        assert_eq!(
            apply_exclusions(series(&[(0, 100.0)]), &t).excluded,
            Some(ExclusionReason::None)
        );
        assert_eq!(
            apply_exclusions(series(&[(0, 300.0)]), &t).excluded,
            Some(ExclusionReason::None)
        );
        assert_eq!(
            apply_exclusions(series(&[(0, 300.01)]), &t).excluded,
            Some(ExclusionReason::HighAvg)
        );
        assert_eq!(
            apply_exclusions(series(&[(0, 178.4)]), &t).excluded,
            Some(ExclusionReason::None)
        );
    }

    #[test]
    fn reference_weight_cases() {
        assert_eq!(reference_weight(&series(&[(0, 170.0), (1, 180.0)])).unwrap(), 175.0);
        assert_eq!(reference_weight(&series(&[(0, 163.25)])).unwrap(), 163.25);
        assert!(reference_weight(&series(&[])).is_err());
        let excluded = apply_exclusions(series(&[(0, 50.0)]), &ExclusionThresholds::default());
        assert!(matches!(reference_weight(&excluded), Err(Error::NoReferenceWeight(_))));
    }

    #[test]
    fn day_index_uses_utc_date() {
        let t = crate::ingest::parse_timestamp("1970-01-02T23:59:59Z").unwrap();
        assert_eq!(day_index(&t), 1);
        let t = crate::ingest::parse_timestamp("2015-10-14T01:00:00+05:00").unwrap();
        assert_eq!(date_of_day_index(day_index(&t)).to_string(), "2015-10-13");
    }

    #[test]
    fn report_csv() {
        let s = apply_exclusions(series(&[(0, 170.0), (1, 180.0)]), &ExclusionThresholds::default());
        let mut buf = Vec::new();
        write_exclusion_report(&mut buf, &[s]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "user_id,n_weighins,violation_count,mean_lb,exclusion_reason\nu,2,1,175.0,none\n"
        );
    }
}
