//! Two-choice balls-and-bins processes: the static process and the
//! insert/delete process driven by an oblivious adversary.
//!
//! Every insertion draws its candidate bins one after another from a single
//! stream (`gen_range(0..num_bins)` per draw) and commits to the first
//! least-loaded candidate. The decentralized pool uses the same protocol, so
//! both produce the same loads from the same seed.

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CHOICES: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BinsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid churn script: {0}")]
    InvalidScript(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Ball {
    pub bin: usize,
    /// Occupancy of the bin right after this ball entered, itself included.
    pub height: u32,
    pub present: bool,
}

/// Loads, per-ball heights, and histograms of both kept up to date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinsState {
    loads: Vec<u32>,
    balls: Vec<Ball>,
    population: usize,
    max_load_seen: u32,
    // present balls by exact height, bins by exact load
    height_counts: Vec<u64>,
    load_counts: Vec<u64>,
}

impl BinsState {
    pub fn new(num_bins: usize) -> Result<Self, BinsError> {
        if num_bins == 0 {
            return Err(BinsError::InvalidParameter("need at least one bin".into()));
        }
        Ok(BinsState {
            loads: vec![0; num_bins],
            balls: Vec::new(),
            population: 0,
            max_load_seen: 0,
            height_counts: vec![0],
            load_counts: vec![num_bins as u64],
        })
    }

    pub fn num_bins(&self) -> usize {
        self.loads.len()
    }

    pub fn loads(&self) -> &[u32] {
        &self.loads
    }

    /// Every ball ever inserted; ball `t` (1-based insertion time) is at `t - 1`.
    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn population(&self) -> usize {
        self.population
    }

    /// Number of insertions so far.
    pub fn inserted(&self) -> usize {
        self.balls.len()
    }

    pub fn max_load(&self) -> u32 {
        (0..self.load_counts.len())
            .rev()
            .find(|&l| self.load_counts[l] > 0)
            .unwrap_or(0) as u32
    }

    pub fn max_load_seen(&self) -> u32 {
        self.max_load_seen
    }

    /// Draws `choices` bins and inserts into the first least-loaded one.
    /// Returns the insertion time of the new ball.
    pub fn insert<R: Rng + ?Sized>(&mut self, choices: usize, rng: &mut R) -> u64 {
        let n = self.loads.len();
        let mut best = rng.gen_range(0..n);
        for _ in 1..choices {
            let c = rng.gen_range(0..n);
            if self.loads[c] < self.loads[best] {
                best = c;
            }
        }
        self.insert_into(best)
    }

    /// Inserts directly into `bin`.
    pub fn insert_into(&mut self, bin: usize) -> u64 {
        let old = self.loads[bin] as usize;
        self.loads[bin] += 1;
        let height = self.loads[bin];
        self.load_counts[old] -= 1;
        bump(&mut self.load_counts, old + 1);
        bump(&mut self.height_counts, height as usize);
        self.balls.push(Ball {
            bin,
            height,
            present: true,
        });
        self.population += 1;
        self.max_load_seen = self.max_load_seen.max(height);
        self.balls.len() as u64
    }

    /// Removes the ball inserted at time `t` (1-based).
    pub fn delete(&mut self, t: u64) -> Result<(), BinsError> {
        let ball = usize::try_from(t)
            .ok()
            .filter(|&t| t >= 1)
            .and_then(|t| self.balls.get_mut(t - 1))
            .filter(|b| b.present)
            .ok_or_else(|| BinsError::InvalidScript(format!("ball {t} is not present")))?;
        ball.present = false;
        let (bin, height) = (ball.bin, ball.height as usize);
        let old = self.loads[bin] as usize;
        self.loads[bin] -= 1;
        self.load_counts[old] -= 1;
        self.load_counts[old - 1] += 1;
        self.height_counts[height] -= 1;
        self.population -= 1;
        Ok(())
    }

    /// Whether `mu_{>=k} >= nu_{>=k}` holds for every `k >= 1`, evaluated from
    /// the running histograms.
    pub fn heights_dominate_loads(&self) -> bool {
        let top = self.height_counts.len().max(self.load_counts.len());
        let (mut mu, mut nu) = (0u64, 0u64);
        for k in (1..top).rev() {
            mu += self.height_counts.get(k).copied().unwrap_or(0);
            nu += self.load_counts.get(k).copied().unwrap_or(0);
            if mu < nu {
                return false;
            }
        }
        true
    }
}

fn bump(counts: &mut Vec<u64>, at: usize) {
    if counts.len() <= at {
        counts.resize(at + 1, 0);
    }
    counts[at] += 1;
}

/// `K` balls into `K'` bins with two choices.
pub fn run_static<R: Rng + ?Sized>(
    balls: usize,
    bins: usize,
    rng: &mut R,
) -> Result<BinsState, BinsError> {
    run_static_with(balls, bins, DEFAULT_CHOICES, rng)
}

pub fn run_static_with<R: Rng + ?Sized>(
    balls: usize,
    bins: usize,
    choices: usize,
    rng: &mut R,
) -> Result<BinsState, BinsError> {
    if choices == 0 {
        return Err(BinsError::InvalidParameter(
            "need at least one choice".into(),
        ));
    }
    let mut state = BinsState::new(bins)?;
    for _ in 0..balls {
        state.insert(choices, rng);
    }
    Ok(state)
}

/// `K` initial insertions followed by `T` steps; step `j` deletes the ball
/// inserted at time `v_j`, then inserts a new ball.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChurnScript {
    population_cap: usize,
    deletions: Vec<u64>,
}

impl ChurnScript {
    pub fn new(population_cap: usize, deletions: Vec<u64>) -> Result<Self, BinsError> {
        let mut seen = HashSet::with_capacity(deletions.len());
        for (j, &v) in deletions.iter().enumerate() {
            let j = j as u64 + 1;
            let latest = population_cap as u64 + j - 1;
            if v == 0 || v > latest {
                return Err(BinsError::InvalidScript(format!(
                    "v_{j} = {v} must lie in 1..={latest}"
                )));
            }
            if !seen.insert(v) {
                return Err(BinsError::InvalidScript(format!(
                    "v_{j} = {v} deletes a ball that was already deleted"
                )));
            }
        }
        Ok(ChurnScript {
            population_cap,
            deletions,
        })
    }

    /// Parses `{"population_cap": K, "deletions": [v_1, ...]}`.
    pub fn from_json(text: &str) -> Result<Self, BinsError> {
        #[derive(Deserialize)]
        struct Raw {
            population_cap: usize,
            deletions: Vec<u64>,
        }
        let raw: Raw =
            serde_json::from_str(text).map_err(|e| BinsError::InvalidScript(e.to_string()))?;
        ChurnScript::new(raw.population_cap, raw.deletions)
    }

    pub fn population_cap(&self) -> usize {
        self.population_cap
    }

    pub fn deletions(&self) -> &[u64] {
        &self.deletions
    }

    pub fn churn_steps(&self) -> usize {
        self.deletions.len()
    }
}

/// How the oblivious adversary picks the ball removed at each step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adversary {
    /// Oldest surviving ball.
    Fifo,
    /// Newest surviving ball.
    Lifo,
    /// Uniform surviving ball, drawn from its own pre-committed stream.
    RandomFixed(u64),
    Explicit(Vec<u64>),
}

impl std::str::FromStr for Adversary {
    type Err = BinsError;

    /// `fifo`, `lifo`, `random[:seed]`, or `explicit:v1,v2,...`.
    fn from_str(s: &str) -> Result<Self, BinsError> {
        let bad = || BinsError::InvalidParameter(format!("unknown adversary {s:?}"));
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("fifo", None) => Ok(Adversary::Fifo),
            ("lifo", None) => Ok(Adversary::Lifo),
            ("random", None) => Ok(Adversary::RandomFixed(0)),
            ("random", Some(seed)) => seed.parse().map(Adversary::RandomFixed).map_err(|_| bad()),
            ("explicit", Some(list)) => list
                .split(',')
                .filter(|x| !x.trim().is_empty())
                .map(|x| x.trim().parse::<u64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()
                .map(Adversary::Explicit),
            _ => Err(bad()),
        }
    }
}

/// Fixes the whole deletion sequence before the process draws anything.
pub fn make_adversary(
    kind: &Adversary,
    population_cap: usize,
    steps: usize,
) -> Result<ChurnScript, BinsError> {
    if population_cap == 0 && steps > 0 {
        return Err(BinsError::InvalidScript(
            "no balls to delete with a zero population cap".into(),
        ));
    }
    let k = population_cap as u64;
    let deletions = match kind {
        Adversary::Explicit(v) => {
            if v.len() != steps {
                return Err(BinsError::InvalidScript(format!(
                    "explicit vector has {} entries for {steps} steps",
                    v.len()
                )));
            }
            v.clone()
        }
        Adversary::Fifo => {
            let mut alive: VecDeque<u64> = (1..=k).collect();
            (1..=steps as u64)
                .map(|j| {
                    let v = alive.pop_front().expect("population stays at K");
                    alive.push_back(k + j);
                    v
                })
                .collect()
        }
        Adversary::Lifo => {
            let mut alive: Vec<u64> = (1..=k).collect();
            (1..=steps as u64)
                .map(|j| {
                    let v = alive.pop().expect("population stays at K");
                    alive.push(k + j);
                    v
                })
                .collect()
        }
        Adversary::RandomFixed(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut alive: Vec<u64> = (1..=k).collect();
            (1..=steps as u64)
                .map(|j| {
                    let i = rng.gen_range(0..alive.len());
                    let v = alive.swap_remove(i);
                    alive.push(k + j);
                    v
                })
                .collect()
        }
    };
    ChurnScript::new(population_cap, deletions)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub step: u64,
    pub max_load: u32,
    pub population: usize,
}

#[derive(Debug, Clone)]
pub struct DynamicRun {
    pub state: BinsState,
    /// One point per time step, taken after that step's insertion.
    pub series: Vec<SeriesPoint>,
    /// Maximum bin load at any instant of the run.
    pub running_max: u32,
    /// Instants (after a deletion or an insertion) where some
    /// `mu_{>=k} < nu_{>=k}`.
    pub height_violations: usize,
}

/// Runs the insert/delete process for `script` with two choices.
pub fn run_dynamic<R: Rng + ?Sized>(
    script: &ChurnScript,
    bins: usize,
    rng: &mut R,
) -> Result<DynamicRun, BinsError> {
    run_dynamic_with(script, bins, DEFAULT_CHOICES, rng)
}

pub fn run_dynamic_with<R: Rng + ?Sized>(
    script: &ChurnScript,
    bins: usize,
    choices: usize,
    rng: &mut R,
) -> Result<DynamicRun, BinsError> {
    if choices == 0 {
        return Err(BinsError::InvalidParameter(
            "need at least one choice".into(),
        ));
    }
    let mut state = BinsState::new(bins)?;
    let mut series = Vec::with_capacity(script.population_cap + script.churn_steps());
    let mut violations = 0usize;
    let mut record = |state: &BinsState, violations: &mut usize| {
        if !state.heights_dominate_loads() {
            *violations += 1;
        }
        series.push(SeriesPoint {
            step: state.inserted() as u64,
            max_load: state.max_load(),
            population: state.population(),
        });
    };
    for _ in 0..script.population_cap {
        state.insert(choices, rng);
        record(&state, &mut violations);
    }
    for &v in &script.deletions {
        state.delete(v)?;
        if !state.heights_dominate_loads() {
            violations += 1;
        }
        state.insert(choices, rng);
        record(&state, &mut violations);
    }
    let running_max = state.max_load_seen();
    Ok(DynamicRun {
        state,
        series,
        running_max,
        height_violations: violations,
    })
}

/// `K/K' + ln ln K' / ln 2 + 9`.
pub fn bound_static(balls: u64, bins: u64) -> Result<f64, BinsError> {
    bound_with_slack(balls, bins, 9.0)
}

/// `K/K' + ln ln K' / ln 2 + slack`.
pub fn bound_with_slack(balls: u64, bins: u64, slack: f64) -> Result<f64, BinsError> {
    if bins < 3 {
        return Err(BinsError::InvalidParameter(format!(
            "the load bound needs at least 3 bins (got {bins})"
        )));
    }
    let kp = bins as f64;
    Ok(balls as f64 / kp + lnln_over_ln2(kp) + slack)
}

pub fn lnln_over_ln2(x: f64) -> f64 {
    x.ln().ln() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HistogramRow {
    pub k: u32,
    /// Present balls with height at least `k`.
    pub mu_ge: u64,
    /// Bins with load at least `k`.
    pub nu_ge: u64,
}

/// `mu_{>=k}` and `nu_{>=k}` for `k = 1 ..= max(height, load)`, recounted
/// from the balls and loads.
pub fn height_histogram(state: &BinsState) -> Vec<HistogramRow> {
    let top = state
        .balls
        .iter()
        .filter(|b| b.present)
        .map(|b| b.height)
        .chain(state.loads.iter().copied())
        .max()
        .unwrap_or(0);
    (1..=top)
        .map(|k| HistogramRow {
            k,
            mu_ge: state
                .balls
                .iter()
                .filter(|b| b.present && b.height >= k)
                .count() as u64,
            nu_ge: state.loads.iter().filter(|&&l| l >= k).count() as u64,
        })
        .collect()
}
