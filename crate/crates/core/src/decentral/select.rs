//! Choosing the number of virtual users `K'` and a family instance that
//! realizes it under a memory budget.

use num_rational::Ratio;
use serde::Serialize;

use super::DecentralError;
use crate::rsgraph::{Construction, FamilyCounts, GraphError};

// Formula outputs within this distance of an integer are treated as that
// integer before rounding up.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Binomial,
    Mn,
}

impl std::str::FromStr for FamilyKind {
    type Err = DecentralError;

    fn from_str(s: &str) -> Result<Self, DecentralError> {
        match s {
            "binomial" => Ok(FamilyKind::Binomial),
            "mn" => Ok(FamilyKind::Mn),
            other => Err(DecentralError::OutOfRange(format!(
                "unknown family {other:?}"
            ))),
        }
    }
}

/// Exact parameters of a realized family instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Realized {
    pub construction: Construction,
    /// Virtual users the instance provides (`>= k_prime`).
    pub num_users: u64,
    /// Subpacketization `F`.
    pub num_packets: u64,
    pub num_matchings: u64,
    pub rate: Ratio<u64>,
    pub memory_ratio: Ratio<u64>,
}

impl Realized {
    fn from_counts(construction: Construction, c: &FamilyCounts) -> Self {
        Realized {
            construction,
            num_users: c.num_users,
            num_packets: c.num_packets,
            num_matchings: c.num_matchings,
            rate: c.rate(),
            memory_ratio: c.memory_ratio(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KPrimeChoice {
    pub target_gain: f64,
    pub memory_ratio: f64,
    pub centralized_rate: f64,
    pub exponent: f64,
    pub k_prime: u64,
    pub realized: Realized,
}

fn check_inputs(g: f64, memory_ratio: f64, delta: f64) -> Result<(), DecentralError> {
    if !(g >= 1.0 && g.is_finite()) {
        return Err(DecentralError::OutOfRange(format!("gain {g} must be >= 1")));
    }
    if !(memory_ratio > 0.0 && memory_ratio < 1.0) {
        return Err(DecentralError::OutOfRange(format!(
            "memory ratio {memory_ratio} must lie in (0, 1)"
        )));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(DecentralError::OutOfRange(format!(
            "exponent {delta} must lie in [0, 1)"
        )));
    }
    Ok(())
}

fn ceil_count(x: f64) -> Result<u64, DecentralError> {
    if !x.is_finite() || x > 1e15 {
        return Err(DecentralError::OutOfRange(format!(
            "virtual user count {x} is not representable"
        )));
    }
    Ok(((x - CEIL_SLACK).ceil() as u64).max(1))
}

/// `ceil(g R_c / (1 - M/N))` when `delta == 0`, otherwise
/// `ceil((g / (1 - M/N))^(1 / (1 - delta)))`.
pub fn kprime_target(
    g: f64,
    memory_ratio: f64,
    centralized_rate: f64,
    delta: f64,
) -> Result<u64, DecentralError> {
    check_inputs(g, memory_ratio, delta)?;
    if !(centralized_rate > 0.0 && centralized_rate.is_finite()) {
        return Err(DecentralError::OutOfRange(format!(
            "centralized rate {centralized_rate} must be positive"
        )));
    }
    let x = if delta == 0.0 {
        g * centralized_rate / (1.0 - memory_ratio)
    } else {
        (g / (1.0 - memory_ratio)).powf(1.0 / (1.0 - delta))
    };
    ceil_count(x)
}

/// Larger root of `m x^2 - 2x + 1 = 0`, the subset-size ratio `n / a` whose
/// limiting memory ratio is `m`.
pub fn binomial_lambda(memory_ratio: f64) -> f64 {
    (1.0 + (1.0 - memory_ratio).sqrt()) / memory_ratio
}

fn within_budget(r: Ratio<u64>, budget: f64) -> bool {
    // (F - c) / F <= budget, compared on integers scaled by F
    (*r.numer() as f64) <= budget * (*r.denom() as f64) * (1.0 + 1e-12)
}

/// Candidate instances of a family, in order of increasing size, each the
/// smallest of its kind that fits the memory budget. Only counts are
/// computed; an instance may still be too large to build.
fn candidates(
    family: FamilyKind,
    memory_ratio: f64,
) -> impl Iterator<Item = Result<(Construction, FamilyCounts), GraphError>> {
    let lambda = binomial_lambda(memory_ratio);
    let mut a = 0u32;
    let mut users = 1u32;
    let mut done = false;
    std::iter::from_fn(move || loop {
        if done {
            return None;
        }
        let spec = match family {
            FamilyKind::Binomial => {
                a += 1;
                let start = ((lambda * f64::from(a)).round() as u32).max(a + 2);
                let found = (start..=crate::combinatorics::MAX_GROUND_SET).find_map(|n| {
                    let spec = Construction::Binomial { n, a };
                    let counts = spec.counts().ok()?;
                    within_budget(counts.memory_ratio(), memory_ratio).then_some(spec)
                });
                match found {
                    Some(spec) => spec,
                    None => {
                        done = true;
                        return None;
                    }
                }
            }
            FamilyKind::Mn => {
                users += 1;
                if users > crate::combinatorics::MAX_GROUND_SET {
                    done = true;
                    return None;
                }
                let s = (memory_ratio * f64::from(users) + 1e-12).floor() as u32;
                if s < 1 || s >= users {
                    continue;
                }
                Construction::Mn { users, s }
            }
        };
        match spec.counts() {
            Ok(c) => return Some(Ok((spec, c))),
            Err(e) => {
                done = true;
                return Some(Err(e));
            }
        }
    })
}

/// Evaluates the `K'` formula for the given centralized rate and finds the
/// smallest binomial-family instance within the memory budget providing at
/// least that many virtual users.
pub fn select_kprime(
    g: f64,
    memory_ratio: f64,
    centralized_rate: f64,
    delta: f64,
) -> Result<KPrimeChoice, DecentralError> {
    let k_prime = kprime_target(g, memory_ratio, centralized_rate, delta)?;
    for cand in candidates(FamilyKind::Binomial, memory_ratio) {
        let (spec, counts) = cand.map_err(|e| no_feasible(format!("K'={k_prime}: {e}")))?;
        if counts.num_users >= k_prime {
            return Ok(KPrimeChoice {
                target_gain: g,
                memory_ratio,
                centralized_rate,
                exponent: delta,
                k_prime,
                realized: Realized::from_counts(spec, &counts),
            });
        }
    }
    Err(no_feasible(format!("K'={k_prime}: family exhausted")))
}

/// Like [`select_kprime`], but takes `R_c` and `M/N` of each candidate
/// exactly, so the chosen instance satisfies the `K'` formula for its own
/// realized parameters.
pub fn select_for_family(
    family: FamilyKind,
    g: f64,
    memory_ratio: f64,
    delta: f64,
) -> Result<KPrimeChoice, DecentralError> {
    check_inputs(g, memory_ratio, delta)?;
    for cand in candidates(family, memory_ratio) {
        let (spec, counts) = cand.map_err(no_feasible)?;
        let rate = crate::rsgraph::ratio_f64(counts.rate());
        let exact_memory = crate::rsgraph::ratio_f64(counts.memory_ratio());
        let k_prime = kprime_target(g, exact_memory, rate, delta)?;
        if counts.num_users >= k_prime {
            return Ok(KPrimeChoice {
                target_gain: g,
                memory_ratio,
                centralized_rate: rate,
                exponent: delta,
                k_prime,
                realized: Realized::from_counts(spec, &counts),
            });
        }
    }
    Err(no_feasible("family exhausted"))
}

fn no_feasible(why: impl std::fmt::Display) -> DecentralError {
    DecentralError::NoFeasibleConstruction(why.to_string())
}
