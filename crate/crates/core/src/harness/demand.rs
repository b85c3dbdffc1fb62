use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;

/// How users pick the file they request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandGen {
    /// User `u` requests file `u mod N`; all distinct when `K <= N`.
    Distinct,
    Uniform,
    /// Everyone requests file 0.
    Constant,
}

impl DemandGen {
    pub const ALL: [DemandGen; 3] = [DemandGen::Distinct, DemandGen::Uniform, DemandGen::Constant];
}

impl std::str::FromStr for DemandGen {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "distinct" => Ok(DemandGen::Distinct),
            "uniform" => Ok(DemandGen::Uniform),
            "constant" => Ok(DemandGen::Constant),
            other => Err(HarnessError::Config(format!(
                "unknown demand generator {other:?} (distinct, uniform, constant)"
            ))),
        }
    }
}

impl std::fmt::Display for DemandGen {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DemandGen::Distinct => "distinct",
            DemandGen::Uniform => "uniform",
            DemandGen::Constant => "constant",
        })
    }
}

pub fn generate_demands<R: Rng + ?Sized>(
    kind: DemandGen,
    users: usize,
    num_files: usize,
    rng: &mut R,
) -> Vec<usize> {
    match kind {
        DemandGen::Distinct => (0..users).map(|u| u % num_files).collect(),
        DemandGen::Uniform => (0..users).map(|_| rng.gen_range(0..num_files)).collect(),
        DemandGen::Constant => vec![0; users],
    }
}
