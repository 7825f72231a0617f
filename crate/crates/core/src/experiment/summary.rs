use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::runner::{read_csv, FederatedRow, Manifest, RegretRow, RunKind, CEILING};
use crate::error::{Error, Result};
use crate::sim::loglog_slope;

/// Fraction of the all-Good final accuracy used as convergence target.
pub const TARGET_FRACTION: f64 = 0.8;

/// Mean and sample standard deviation (zero for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

impl std::fmt::Display for Stat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = f.precision().unwrap_or(2);
        write!(f, "{:.p$} ± {:.p$}", self.mean, self.std)
    }
}

/// Median; unreached targets enter as `+inf`.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

/// Log-log slope of a regret curve over its last decade.
pub fn last_decade_slope(curve: &[i64]) -> f64 {
    let t = curve.len();
    loglog_slope(curve, (t / 10).max(1), t, 100)
}

/// Per environment and policy aggregate across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub env: String,
    pub policy: String,
    pub seeds: usize,
    pub final_regret: Stat,
    pub slope: Stat,
    pub cumulative_variance: Stat,
    pub final_accuracy: Option<Stat>,
    /// Median rounds to reach `TARGET_FRACTION` of the all-Good accuracy.
    pub rounds_to_target: Option<f64>,
}

#[derive(Default)]
struct Acc {
    regret: Vec<f64>,
    slope: Vec<f64>,
    variance: Vec<f64>,
    accuracy: Vec<f64>,
    /// Seed and accuracy trace of each federated run.
    traces: Vec<(u64, Vec<f64>)>,
}

/// First 1-based round whose accuracy reaches `target`.
pub fn first_reaching(accuracy: &[f64], target: f64) -> Option<usize> {
    accuracy.iter().position(|&a| a >= target).map(|i| i + 1)
}

/// Reads a run directory and aggregates it.
pub fn summarize(dir: &Path) -> Result<Vec<SummaryRow>> {
    let manifest = Manifest::load(dir)?;
    if manifest.runs.is_empty() {
        return Err(Error::EmptyData(format!("{} lists no runs", dir.display())));
    }
    let mut groups: BTreeMap<(String, String), Acc> = BTreeMap::new();
    let mut ceilings: BTreeMap<(String, u64), f64> = BTreeMap::new();
    let mut order: Vec<(String, String)> = Vec::new();
    for entry in &manifest.runs {
        let path = dir.join(&entry.file);
        let key = (entry.env.clone(), entry.policy.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        let acc = groups.entry(key).or_default();
        let (curve, variance) = match entry.kind {
            RunKind::Regret => {
                let rows: Vec<RegretRow> = read_csv(&path)?;
                let variance = rows.iter().map(|r| r.age_variance).sum();
                (rows.iter().map(|r| r.regret).collect::<Vec<_>>(), variance)
            }
            RunKind::Federated => {
                let rows: Vec<FederatedRow> = read_csv(&path)?;
                let trace: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
                let last = trace.last().copied().unwrap_or(f64::NAN);
                if entry.policy == CEILING {
                    ceilings.insert((entry.env.clone(), entry.seed), last);
                }
                acc.accuracy.push(last);
                acc.traces.push((entry.seed, trace));
                let variance = rows.iter().map(|r| r.age_variance).sum();
                (rows.iter().map(|r| r.regret).collect::<Vec<_>>(), variance)
            }
        };
        acc.regret.push(curve.last().copied().unwrap_or(0) as f64);
        acc.slope.push(last_decade_slope(&curve));
        acc.variance.push(variance);
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let acc = &groups[&key];
            let rounds: Vec<f64> = acc
                .traces
                .iter()
                .filter_map(|(seed, trace)| {
                    let ceiling = ceilings.get(&(key.0.clone(), *seed))?;
                    let reached = first_reaching(trace, TARGET_FRACTION * ceiling);
                    Some(reached.map_or(f64::INFINITY, |r| r as f64))
                })
                .collect();
            SummaryRow {
                env: key.0.clone(),
                policy: key.1.clone(),
                seeds: acc.regret.len(),
                final_regret: Stat::of(&acc.regret),
                slope: Stat::of(&acc.slope),
                cumulative_variance: Stat::of(&acc.variance),
                final_accuracy: (!acc.accuracy.is_empty()).then(|| Stat::of(&acc.accuracy)),
                rounds_to_target: (!rounds.is_empty()).then(|| median(&rounds)),
            }
        })
        .collect())
}

/// Plain-text table of `rows`.
pub fn render(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<14} {:>5} {:>22} {:>14} {:>24} {:>16} {:>8}",
        "env", "policy", "seeds", "final regret", "slope", "cum. AoI variance", "final accuracy", "to 0.8x"
    );
    for r in rows {
        let acc = r.final_accuracy.map_or("-".into(), |s| format!("{s:.3}"));
        let rounds = r.rounds_to_target.map_or("-".into(), |x| {
            if x.is_finite() {
                format!("{x:.1}")
            } else {
                "never".into()
            }
        });
        let _ = writeln!(
            out,
            "{:<10} {:<14} {:>5} {:>22} {:>14} {:>24} {:>16} {:>8}",
            r.env,
            r.policy,
            r.seeds,
            format!("{:.1}", r.final_regret),
            format!("{:.3}", r.slope),
            format!("{:.1}", r.cumulative_variance),
            acc,
            rounds
        );
    }
    out
}

/// Writes `rows` as `summary.csv` into `dir`.
pub fn write_summary(dir: &Path, rows: &[SummaryRow]) -> Result<()> {
    #[derive(Serialize)]
    struct Flat<'a> {
        env: &'a str,
        policy: &'a str,
        seeds: usize,
        final_regret_mean: f64,
        final_regret_std: f64,
        slope_mean: f64,
        slope_std: f64,
        cumulative_variance_mean: f64,
        cumulative_variance_std: f64,
        final_accuracy_mean: Option<f64>,
        final_accuracy_std: Option<f64>,
        rounds_to_target_median: Option<f64>,
    }
    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Csv {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    for r in rows {
        w.serialize(Flat {
            env: &r.env,
            policy: &r.policy,
            seeds: r.seeds,
            final_regret_mean: r.final_regret.mean,
            final_regret_std: r.final_regret.std,
            slope_mean: r.slope.mean,
            slope_std: r.slope.std,
            cumulative_variance_mean: r.cumulative_variance.mean,
            cumulative_variance_std: r.cumulative_variance.std,
            final_accuracy_mean: r.final_accuracy.map(|s| s.mean),
            final_accuracy_std: r.final_accuracy.map(|s| s.std),
            rounds_to_target_median: r.rounds_to_target,
        })
        .map_err(|e| Error::Csv {
            path: path.clone(),
            reason: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::presets::preset;
    use crate::experiment::runner::run_experiment;
    use approx::assert_relative_eq;

    #[test]
    fn stat_values() {
        let s = Stat::of(&[2.0, 4.0, 6.0]);
        assert_relative_eq!(s.mean, 4.0);
        assert_relative_eq!(s.std, 2.0);
        assert_eq!(Stat::of(&[7.5]), Stat { mean: 7.5, std: 0.0 });
        assert_eq!(format!("{:.1}", Stat::of(&[1.0, 2.0])), "1.5 ± 0.7");
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[1.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
        assert_eq!(first_reaching(&[0.1, 0.5, 0.4, 0.9], 0.45), Some(2));
        assert_eq!(first_reaching(&[0.1], 0.45), None);
    }

    #[test]
    fn summary_of_a_small_run() {
        let tmp = tempfile::tempdir().unwrap();
        let mut c = preset("fig2b").unwrap();
        c.seeds = vec![5];
        c.output = tmp.path().to_path_buf();
        for env in &mut c.environments {
            env.horizon = 2000;
            env.breakpoints = crate::experiment::presets::equal_breakpoints(2000, env.means.len());
        }
        c.policies.insert(0, crate::experiment::config::PolicySpec::new(
            crate::experiment::config::PolicyName::Oracle,
        ));
        run_experiment(&c, Path::new(".")).unwrap();
        let rows = summarize(tmp.path()).unwrap();
        assert_eq!(rows.len(), 8);
        let oracle = rows.iter().find(|r| r.policy == "oracle").unwrap();
        assert_eq!(oracle.final_regret, Stat { mean: 0.0, std: 0.0 });
        assert_eq!(oracle.seeds, 1);
        assert!(rows.iter().all(|r| r.final_accuracy.is_none() && r.rounds_to_target.is_none()));
        assert!(rows.iter().all(|r| r.final_regret.std == 0.0));
        let table = render(&rows);
        assert!(table.lines().count() == 9 && table.contains("glr-cucb"));
        write_summary(tmp.path(), &rows).unwrap();
        assert!(tmp.path().join("summary.csv").exists());
    }

    #[test]
    fn missing_files_are_reported() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(summarize(tmp.path()), Err(Error::MissingFile(_))));
        let mut c = preset("fig2b").unwrap();
        c.seeds = vec![1];
        c.output = tmp.path().to_path_buf();
        c.environments.truncate(1);
        c.environments[0].horizon = 100;
        run_experiment(&c, Path::new(".")).unwrap();
        std::fs::remove_file(tmp.path().join("regret_ct0_glr-cucb_seed1.csv")).unwrap();
        assert!(matches!(summarize(tmp.path()), Err(Error::MissingFile(_))));
    }
}
