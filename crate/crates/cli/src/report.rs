//! JSON report schemas. Reports carry a schema version so downstream
//! tooling can detect layout changes; scalar and MSE lists collapse to a
//! summary block past 64 groups to keep reports readable for per-row
//! calibrations of wide tensors.

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Groups retained as a full list before summarization kicks in.
pub const FULL_LIST_LIMIT: usize = 64;

/// Compact statistics standing in for a long per-group list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Either the full per-group values or their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    Full(Vec<f64>),
    Summary(ValueSummary),
}

impl Values {
    /// Keeps the list through [`FULL_LIST_LIMIT`] entries, summarizes after.
    pub fn from_values(values: &[f64]) -> Self {
        if values.len() <= FULL_LIST_LIMIT {
            return Values::Full(values.to_vec());
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        Values::Summary(ValueSummary {
            count: values.len(),
            min,
            max,
            mean: sum / values.len() as f64,
        })
    }

    pub fn full(&self) -> Option<&[f64]> {
        match self {
            Values::Full(v) => Some(v),
            Values::Summary(_) => None,
        }
    }
}

/// Calibration results for one tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorReport {
    pub name: String,
    pub shape: Vec<usize>,
    pub granularity: String,
    pub method: String,
    /// Batch files whose candidates were averaged into the scalars.
    pub batches_averaged: usize,
    pub group_count: usize,
    pub degenerate_groups: usize,
    pub scalars: Values,
    /// Per-group empirical MSE of the reported scalars over the batch union.
    pub mse: Values,
    /// Mean of the per-group MSE values; groups are equal-sized, so this is
    /// the element-weighted MSE of the whole tensor.
    pub mean_mse: f64,
    /// Wall time of the calibration computation, excluding file IO and the
    /// MSE measurement.
    pub wall_seconds: f64,
}

/// Full output of the calibrate command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub schema_version: u32,
    pub command: String,
    pub method: String,
    pub bits: u32,
    pub signedness: String,
    pub boundary: String,
    pub granularity: String,
    /// Newton iteration budget; meaningful for the octav method only.
    pub iterations: usize,
    pub tensors: Vec<TensorReport>,
    pub warnings: Vec<String>,
}

/// Timing for one method over the benchmark corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub method: String,
    pub per_tensor_mean_seconds: f64,
    /// Mean over repetitions of the summed corpus calibration time.
    pub total_seconds: f64,
    /// Sample variance of the repetition totals; 0 for one repetition.
    pub variance_seconds2: f64,
    pub tensor_count: usize,
    /// Sweep total over octav total; the same value in both entries.
    pub speedup: f64,
}

/// Full output of the bench command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub command: String,
    pub bits: u32,
    pub repetitions: usize,
    pub tensor_count: usize,
    /// False when the corpus misses the size floor (10 tensors of 1e5
    /// elements); timings are still reported but flagged.
    pub representative: bool,
    pub results: Vec<BenchResult>,
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_keep_short_lists_and_summarize_long_ones() {
        let short = Values::from_values(&[1.0, 2.0]);
        assert_eq!(short.full(), Some(&[1.0, 2.0][..]));

        let long: Vec<f64> = (0..65).map(|i| i as f64).collect();
        let summarized = Values::from_values(&long);
        assert!(summarized.full().is_none());
        match summarized {
            Values::Summary(s) => {
                assert_eq!(s.count, 65);
                assert_eq!(s.min, 0.0);
                assert_eq!(s.max, 64.0);
                assert_eq!(s.mean, 32.0);
            }
            Values::Full(_) => unreachable!(),
        }
    }

    #[test]
    fn values_round_trip_through_json_untagged() {
        let full = Values::Full(vec![0.5, 1.5]);
        let text = serde_json::to_string(&full).unwrap();
        assert_eq!(text, "[0.5,1.5]");
        assert_eq!(serde_json::from_str::<Values>(&text).unwrap(), full);

        let summary = Values::Summary(ValueSummary { count: 100, min: 0.0, max: 9.0, mean: 4.5 });
        let text = serde_json::to_string(&summary).unwrap();
        assert!(text.starts_with('{'));
        assert_eq!(serde_json::from_str::<Values>(&text).unwrap(), summary);
    }

    #[test]
    fn calibration_report_round_trips() {
        let report = CalibrationReport {
            schema_version: SCHEMA_VERSION,
            command: "calibrate".to_string(),
            method: "octav".to_string(),
            bits: 4,
            signedness: "signed".to_string(),
            boundary: "math".to_string(),
            granularity: "tensor".to_string(),
            iterations: 10,
            tensors: vec![TensorReport {
                name: "w".to_string(),
                shape: vec![4, 8],
                granularity: "tensor".to_string(),
                method: "octav".to_string(),
                batches_averaged: 2,
                group_count: 1,
                degenerate_groups: 0,
                scalars: Values::Full(vec![0.9]),
                mse: Values::Full(vec![0.001]),
                mean_mse: 0.001,
                wall_seconds: 0.002,
            }],
            warnings: vec![],
        };
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: CalibrationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        assert!(text.contains("\"schema_version\": 1"));
    }
}
