//! Experiment records, aggregates and their CSV / JSON forms.

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::error::{Error, Result};

const Z95: f64 = 1.959964;

/// One (T, trial) cell. Serialized as the CSV columns `T,trial,success,millis`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(rename = "T")]
    pub t: usize,
    pub trial: usize,
    #[serde(with = "bit")]
    pub success: bool,
    pub millis: u64,
}

mod bit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*b as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("success must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    #[serde(rename = "T")]
    pub t: usize,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// 95% Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Pooled two-proportion z statistic; 0 when both samples are degenerate.
pub fn two_proportion_z(s1: usize, n1: usize, s2: usize, n2: usize) -> f64 {
    let (p1, p2) = (s1 as f64 / n1 as f64, s2 as f64 / n2 as f64);
    let pooled = (s1 + s2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        0.0
    } else {
        (p1 - p2) / se
    }
}

/// Aggregates in order of first appearance of each `T`.
pub fn aggregate(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut order: Vec<usize> = Vec::new();
    for r in records {
        if !order.contains(&r.t) {
            order.push(r.t);
        }
    }
    order
        .into_iter()
        .map(|t| {
            let cell: Vec<&TrialRecord> = records.iter().filter(|r| r.t == t).collect();
            let successes = cell.iter().filter(|r| r.success).count();
            let (wilson_low, wilson_high) = wilson_interval(successes, cell.len());
            Aggregate {
                t,
                trials: cell.len(),
                successes,
                rate: successes as f64 / cell.len() as f64,
                wilson_low,
                wilson_high,
            }
        })
        .collect()
}

/// True when no later `T` has an interval entirely below an earlier one.
pub fn is_monotone_within_noise(aggregates: &[Aggregate]) -> bool {
    let mut sorted: Vec<&Aggregate> = aggregates.iter().collect();
    sorted.sort_by_key(|a| a.t);
    sorted.iter().enumerate().all(|(i, a)| sorted[i + 1..].iter().all(|b| b.wilson_high >= a.wilson_low))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub version: String,
    pub trace_counts: Vec<usize>,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig, trace_counts: Vec<usize>, records: Vec<TrialRecord>) -> Self {
        let aggregates = aggregate(&records);
        ExperimentReport { config, version: env!("CARGO_PKG_VERSION").to_string(), trace_counts, records, aggregates }
    }

    pub fn aggregate_for(&self, t: usize) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.t == t)
    }

    pub fn to_csv(&self) -> Result<String> {
        records_to_csv(&self.records)
    }

    /// Config echo, version, seeds and aggregates, without per-trial rows.
    pub fn summary_json(&self) -> Result<String> {
        let summary = serde_json::json!({
            "config": self.config,
            "version": self.version,
            "master_seed": self.config.master_seed,
            "trace_counts": self.trace_counts,
            "aggregates": self.aggregates,
        });
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn records_to_csv(records: &[TrialRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

pub fn records_from_csv(text: &str) -> Result<Vec<TrialRecord>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<TrialRecord>, _>>()
        .map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson_interval(0, 10);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.27753).abs() < 1e-4);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.40383).abs() < 1e-4 && (hi - 0.59617).abs() < 1e-4);
    }

    #[test]
    fn csv_round_trip() {
        let records = vec![
            TrialRecord { t: 10, trial: 0, success: true, millis: 3 },
            TrialRecord { t: 10, trial: 1, success: false, millis: 0 },
            TrialRecord { t: 20, trial: 0, success: true, millis: 7 },
        ];
        let text = records_to_csv(&records).unwrap();
        assert!(text.starts_with("T,trial,success,millis\n10,0,1,3\n"));
        let back = records_from_csv(&text).unwrap();
        assert_eq!(back, records);
        assert_eq!(aggregate(&back), aggregate(&records));
    }

    #[test]
    fn z_statistic() {
        assert_eq!(two_proportion_z(5, 10, 5, 10), 0.0);
        assert!(two_proportion_z(90, 100, 50, 100) > 5.0);
    }
}
