//! Plain-text tables for the run report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{CohortStage, ModelCoefficients};
use crate::models::MetricsReport;
use crate::trends::{Comparison, MonthlyDeviation, WeekdayTable, MONTHS, WEEKDAYS};

/// Everything the report stage could find. Missing sections are `None` and
/// listed in `gaps`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub models: Vec<String>,
    pub feature_sets: Vec<String>,
    pub metrics: Option<Vec<MetricsReport>>,
    pub coefficients: Option<Vec<ModelCoefficients>>,
    pub weekday: Option<WeekdayTable>,
    pub monthly: Option<MonthlyDeviation>,
    pub comparisons: Option<Vec<Comparison>>,
    pub gaps: Vec<String>,
}

impl Report {
    pub fn is_complete(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn render(&self, top_k: usize) -> String {
        let mut s = String::new();
        s.push_str("== Cross-validated weight prediction ==\n");
        match &self.metrics {
            Some(m) => s.push_str(&render_metrics_table(m, &self.models, &self.feature_sets)),
            None => s.push_str("(missing)\n"),
        }
        s.push_str("\n== Strongest coefficients ==\n");
        match &self.coefficients {
            Some(c) => s.push_str(&render_coefficients(c, top_k)),
            None => s.push_str("(missing)\n"),
        }
        s.push_str("\n== Weekday activity ==\n");
        match &self.weekday {
            Some(w) => s.push_str(&render_weekday(w)),
            None => s.push_str("(missing)\n"),
        }
        s.push_str("\n== Monthly weight deviation ==\n");
        match &self.monthly {
            Some(m) => s.push_str(&render_monthly(m)),
            None => s.push_str("(missing)\n"),
        }
        if let Some(c) = self.comparisons.as_ref().filter(|c| !c.is_empty()) {
            s.push_str("\n== Search-interest correlations ==\n");
            for cmp in c {
                let r = cmp.r.map_or("undefined".to_string(), |r| format!("{r:.3}"));
                let _ = writeln!(s, "{:<22} vs {:<20} r = {r}", cmp.metric, cmp.term);
            }
        }
        if !self.gaps.is_empty() {
            s.push_str("\n== Incomplete ==\n");
            for g in &self.gaps {
                let _ = writeln!(s, "- {g}");
            }
        }
        s
    }
}

fn fmt_r(r: Option<f64>) -> String {
    r.map_or("n/a".to_string(), |r| format!("{r:.3}"))
}

/// Rows are models, column groups are feature sets, cells are pooled
/// r / MAE / RMSE.
pub fn render_metrics_table(reports: &[MetricsReport], models: &[String], features: &[String]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<34}", "model");
    for f in features {
        let _ = write!(s, " | {:^26}", f);
    }
    s.push('\n');
    let _ = write!(s, "{:<34}", "");
    for _ in features {
        let _ = write!(s, " | {:>8} {:>8} {:>8}", "r", "MAE", "RMSE");
    }
    s.push('\n');
    for m in models {
        let _ = write!(s, "{m:<34}");
        for f in features {
            match reports.iter().find(|r| &r.model == m && &r.features == f) {
                Some(r) => {
                    let _ = write!(s, " | {:>8} {:>8.2} {:>8.2}", fmt_r(r.pooled.r), r.pooled.mae, r.pooled.rmse);
                }
                None => {
                    let _ = write!(s, " | {:>8} {:>8} {:>8}", "-", "-", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

pub fn render_coefficients(coefs: &[ModelCoefficients], top_k: usize) -> String {
    let mut s = String::new();
    if coefs.is_empty() {
        s.push_str("(no linear model configured)\n");
    }
    for c in coefs {
        let _ = writeln!(s, "{} on {}", c.model, c.features);
        let pos = &c.report.positive;
        let neg = &c.report.negative;
        let _ = writeln!(s, "  {:<40} {:<40}", "heavier", "lighter");
        for i in 0..pos.len().max(neg.len()).min(top_k) {
            let cell = |v: Option<&(String, f64)>| v.map_or(String::new(), |(n, w)| format!("{n} ({w:+.3})"));
            let _ = writeln!(s, "  {:<40} {:<40}", cell(pos.get(i)), cell(neg.get(i)));
        }
    }
    s
}

pub fn render_weekday(w: &WeekdayTable) -> String {
    let mut s = String::new();
    let total_w: u64 = w.weighins.iter().sum();
    let total_f: u64 = w.fitness.iter().sum();
    let pct = |x: u64, t: u64| if t == 0 { 0.0 } else { 100.0 * x as f64 / t as f64 };
    let _ = writeln!(s, "{:<5} {:>10} {:>7} {:>10} {:>7}", "day", "weigh-ins", "%", "fitness", "%");
    for (d, day) in WEEKDAYS.iter().enumerate() {
        let _ = writeln!(
            s,
            "{day:<5} {:>10} {:>6.1}% {:>10} {:>6.1}%",
            w.weighins[d],
            pct(w.weighins[d], total_w),
            w.fitness[d],
            pct(w.fitness[d], total_f)
        );
    }
    s
}

pub fn render_monthly(m: &MonthlyDeviation) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<5} {:>10} {:>10} {:>6}", "month", "mean lb", "std err", "users");
    for b in &m.months {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:+.3}"));
        let _ = writeln!(
            s,
            "{:<5} {:>10} {:>10} {:>6}",
            MONTHS[b.month as usize],
            f(b.mean_lb),
            b.stderr_lb.map_or("-".to_string(), |v| format!("{v:.3}")),
            b.users
        );
    }
    s
}

pub(super) fn render_funnel(c: &CohortStage) -> String {
    let mut s = String::new();
    for (name, r, fin) in [
        ("population", &c.population, c.population_final.len()),
        ("individual", &c.individual, c.individual_final.len()),
    ] {
        let f = &r.funnel;
        let _ = writeln!(s, "{name} cohort");
        let _ = writeln!(s, "  candidates            {}", f.input);
        let _ = writeln!(s, "  after normal tweets   {}", f.after_normal_tweets);
        let _ = writeln!(s, "  after weigh-ins       {}", f.after_weighins);
        let _ = writeln!(s, "  after social counts   {}", f.after_social);
        let _ = writeln!(s, "  after series cleaning {fin}");
    }
    let _ = writeln!(s, "series excluded by cleaning: {}", c.series_excluded.len());
    s
}
