use std::io::Write;

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// Written as the first line of every CSV report.
pub const REPORT_SCHEMA: &str = "rscache-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(HarnessError::Config(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// One trial. Fields that do not apply to an experiment are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub max_load: Option<u32>,
    pub naive_rate: Option<f64>,
    pub pruned_rate: Option<f64>,
    pub naive_transmissions: Option<u64>,
    pub decode_ok: Option<bool>,
    pub bits_overhead: Option<u64>,
    pub round_count: Option<usize>,
    pub within_bound: Option<bool>,
}

impl TrialRecord {
    pub fn new(trial: u64, seed: u64) -> Self {
        TrialRecord {
            trial,
            seed,
            max_load: None,
            naive_rate: None,
            pruned_rate: None,
            naive_transmissions: None,
            decode_ok: None,
            bits_overhead: None,
            round_count: None,
            within_bound: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub mean_max_load: Option<f64>,
    pub max_max_load: Option<u32>,
    pub mean_naive_rate: Option<f64>,
    pub max_naive_rate: Option<f64>,
    pub bound: Option<f64>,
    pub fraction_within_bound: Option<f64>,
    pub decode_failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

impl Aggregate {
    pub fn from_records(records: &[TrialRecord], bound: Option<f64>) -> Self {
        let loads: Vec<u32> = records.iter().filter_map(|r| r.max_load).collect();
        let rates: Vec<f64> = records.iter().filter_map(|r| r.naive_rate).collect();
        let within: Vec<bool> = records.iter().filter_map(|r| r.within_bound).collect();
        let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        let load_f: Vec<f64> = loads.iter().map(|&l| f64::from(l)).collect();
        Aggregate {
            trials: records.len(),
            mean_max_load: mean(&load_f),
            max_max_load: loads.iter().copied().max(),
            mean_naive_rate: mean(&rates),
            max_naive_rate: rates.iter().copied().reduce(f64::max),
            bound,
            fraction_within_bound: (!within.is_empty())
                .then(|| within.iter().filter(|&&w| w).count() as f64 / within.len() as f64),
            decode_failures: records
                .iter()
                .filter(|r| r.decode_ok == Some(false))
                .count(),
            wall_time_ms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub experiment: String,
    pub parameters: serde_json::Value,
    pub records: Vec<TrialRecord>,
    pub aggregate: Aggregate,
    pub status: Status,
}

impl ExperimentReport {
    /// Status is `fail` if any trial failed to decode or `extra_ok` is false.
    pub fn new(
        experiment: &str,
        parameters: serde_json::Value,
        records: Vec<TrialRecord>,
        bound: Option<f64>,
        extra_ok: bool,
    ) -> Self {
        let aggregate = Aggregate::from_records(&records, bound);
        let status = if aggregate.decode_failures == 0 && extra_ok {
            Status::Pass
        } else {
            Status::Fail
        };
        ExperimentReport {
            schema: REPORT_SCHEMA.to_string(),
            experiment: experiment.to_string(),
            parameters,
            records,
            aggregate,
            status,
        }
    }

    pub fn write<W: Write>(&self, format: OutputFormat, mut w: W) -> Result<(), HarnessError> {
        match format {
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut w, self)?;
                w.write_all(b"\n")?;
            }
            OutputFormat::Csv => {
                writeln!(w, "# {REPORT_SCHEMA} {}", self.experiment)?;
                let mut csv = csv::Writer::from_writer(&mut w);
                for r in &self.records {
                    csv.serialize(r)?;
                }
                csv.flush()?;
            }
        }
        Ok(())
    }
}
