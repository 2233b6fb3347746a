//! Aggregated experiment metrics and CSV/JSON emission.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Output serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown output format {other:?} (expected csv or json)"
            ))),
        }
    }
}

/// Per-algorithm aggregate over all Monte-Carlo runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    /// Mean cumulative regret per slot, extended to the horizon.
    pub regret_curve: Vec<f64>,
    pub measurements_mean: f64,
    pub measurements_p05: f64,
    pub measurements_p95: f64,
    /// Fraction of runs whose final beam is the true argmax beam.
    pub accuracy: f64,
    pub latency_ms_mean: f64,
}

/// Full result of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub seed: u64,
    pub n_runs: usize,
    pub horizon: usize,
    pub algorithms: Vec<AlgorithmSummary>,
}

/// Empirical `q`-quantile by linear interpolation of the order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

impl MetricsSummary {
    /// Long-format CSV: one row per (algorithm, metric, index); the
    /// percentile columns are only populated for `measurements` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,metric,index,value,p05,p95\n");
        for alg in &self.algorithms {
            for (i, value) in alg.regret_curve.iter().enumerate() {
                let _ = writeln!(out, "{},regret,{},{},,", alg.algorithm, i + 1, value);
            }
            let _ = writeln!(
                out,
                "{},measurements,0,{},{},{}",
                alg.algorithm, alg.measurements_mean, alg.measurements_p05, alg.measurements_p95
            );
            // accuracy is NaN for analytic latency rows with no runs behind
            // them; skip those
            if alg.accuracy.is_finite() {
                let _ = writeln!(out, "{},accuracy,0,{},,", alg.algorithm, alg.accuracy);
            }
            let _ = writeln!(out, "{},latency_ms,0,{},,", alg.algorithm, alg.latency_ms_mean);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("could not parse summary JSON: {e}")))
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    pub fn write_to(&self, path: &Path, format: OutputFormat) -> Result<()> {
        std::fs::write(path, self.render(format)).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_summary() -> MetricsSummary {
        MetricsSummary {
            seed: 7,
            n_runs: 2,
            horizon: 3,
            algorithms: vec![AlgorithmSummary {
                algorithm: "hba".into(),
                regret_curve: vec![0.5, 0.75, 0.75],
                measurements_mean: 25.0,
                measurements_p05: 20.0,
                measurements_p95: 31.0,
                accuracy: 0.5,
                latency_ms_mean: 0.42,
            }],
        }
    }

    #[test]
    fn csv_layout() {
        let csv = sample_summary().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "algorithm,metric,index,value,p05,p95");
        assert_eq!(lines[1], "hba,regret,1,0.5,,");
        assert_eq!(lines[3], "hba,regret,3,0.75,,");
        assert_eq!(lines[4], "hba,measurements,0,25,20,31");
        assert_eq!(lines[5], "hba,accuracy,0,0.5,,");
        assert_eq!(lines[6], "hba,latency_ms,0,0.42,,");
        assert_eq!(lines.len(), 7);
    }

    #[test]
    fn empty_summary_is_header_only() {
        let summary = MetricsSummary {
            seed: 0,
            n_runs: 0,
            horizon: 0,
            algorithms: vec![],
        };
        assert_eq!(summary.to_csv(), "algorithm,metric,index,value,p05,p95\n");
    }

    #[test]
    fn json_round_trip() {
        let summary = sample_summary();
        let parsed = MetricsSummary::from_json(&summary.to_json()).unwrap();
        assert_eq!(parsed, summary);
    }

    #[test]
    fn quantile_interpolates() {
        let values = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&values, 0.0), 1.0);
        assert_eq!(quantile(&values, 1.0), 5.0);
        assert_eq!(quantile(&values, 0.5), 3.0);
        assert!((quantile(&values, 0.05) - 1.2).abs() < 1e-12);
        assert!((quantile(&values, 0.95) - 4.8).abs() < 1e-12);
        assert_eq!(quantile(&[42.0], 0.3), 42.0);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("csv".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
