use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::demand::{generate_demands, DemandGen};
use super::report::{ExperimentReport, TrialRecord};
use super::{sub_seed, trial_seed, HarnessError};
use crate::ballsbins::{self, Adversary, SeriesPoint};
use crate::codec::{self, DemandVector, Library};
use crate::decentral::{self, FamilyKind, KPrimeChoice, RealDemands, ReplayAudit, VirtualPool};
use crate::rsgraph::{self, ratio_f64, Construction, RsGraph, SchemeParams};

// Sub-stream labels within a trial.
const LIBRARY_STREAM: u64 = 1;
const DEMAND_STREAM: u64 = 2;
const ADVERSARY_STREAM: u64 = 3;

/// A trial's record, an experiment-specific extra, and whether its
/// invariant held.
type TrialOutcome<T> = Result<(TrialRecord, T, bool), HarnessError>;

fn check_trials(trials: usize) -> Result<(), HarnessError> {
    if trials == 0 {
        return Err(HarnessError::Config("trials must be at least 1".into()));
    }
    Ok(())
}

/// Builds and validates a family instance.
pub fn construct(spec: Construction) -> Result<(RsGraph, SchemeParams), HarnessError> {
    let graph = spec.build()?;
    let params = rsgraph::scheme_params(&graph)?;
    Ok((graph, params))
}

#[derive(Debug, Clone, Serialize)]
pub struct CentralizedConfig {
    pub num_files: usize,
    pub packet_bytes: usize,
    pub demand: DemandGen,
    pub trials: usize,
    pub master_seed: u64,
}

fn centralized_inputs(
    graph: &RsGraph,
    cfg: &CentralizedConfig,
    trial: u64,
) -> Result<(u64, Library, DemandVector), HarnessError> {
    let seed = trial_seed(cfg.master_seed, trial);
    let library = Library::generate(
        cfg.num_files,
        graph.num_packets(),
        cfg.packet_bytes,
        sub_seed(seed, LIBRARY_STREAM),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, DEMAND_STREAM));
    let d = generate_demands(cfg.demand, graph.num_users(), cfg.num_files, &mut rng);
    Ok((seed, library, DemandVector::new(d, cfg.num_files)?))
}

/// The transmissions of trial `trial` of [`run_centralized`].
pub fn centralized_transmissions(
    graph: &RsGraph,
    cfg: &CentralizedConfig,
    trial: u64,
) -> Result<Vec<codec::Transmission>, HarnessError> {
    let (_, library, d) = centralized_inputs(graph, cfg, trial)?;
    Ok(codec::deliver(graph, &library, &d)?)
}

/// End-to-end delivery check on one graph. Refuses graphs that fail
/// validation. Each trial draws a fresh library and demand vector, and also
/// delivers a constant demand vector to confirm the transmission count does
/// not depend on the demands.
pub fn run_centralized(
    graph: &RsGraph,
    cfg: &CentralizedConfig,
) -> Result<ExperimentReport, HarnessError> {
    check_trials(cfg.trials)?;
    if cfg.num_files == 0 || cfg.packet_bytes == 0 {
        return Err(HarnessError::Config("N and B must be at least 1".into()));
    }
    let params = rsgraph::scheme_params(graph)?;
    if cfg.demand == DemandGen::Distinct && graph.num_users() > cfg.num_files {
        eprintln!(
            "warning: {} users but only {} files; distinct demands will repeat",
            graph.num_users(),
            cfg.num_files
        );
    }
    let results: Vec<Result<(TrialRecord, bool), HarnessError>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| {
            let (seed, library, d) = centralized_inputs(graph, cfg, i)?;
            let check = codec::verify_delivery(graph, &library, &d)?;
            let other = DemandVector::new(vec![0; graph.num_users()], cfg.num_files)?;
            let other_count = codec::deliver(graph, &library, &other)?.len();
            let mut rec = TrialRecord::new(i, seed);
            rec.decode_ok = Some(check.ok);
            rec.naive_transmissions = Some(check.num_transmissions as u64);
            rec.naive_rate = Some(ratio_f64(check.rate));
            rec.round_count = Some(1);
            Ok((rec, other_count == check.num_transmissions))
        })
        .collect();
    let mut records = Vec::with_capacity(cfg.trials);
    let mut invariant = true;
    for r in results {
        let (rec, same) = r?;
        invariant &= same;
        records.push(rec);
    }
    let parameters = json!({
        "config": cfg,
        "scheme": params,
        "rate": ratio_f64(params.rate),
        "memory_ratio": ratio_f64(params.memory_ratio),
        "rate_demand_invariant": invariant,
    });
    Ok(ExperimentReport::new(
        "centralized-sim",
        parameters,
        records,
        None,
        invariant,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecentralizedConfig {
    pub users: usize,
    pub gain: f64,
    pub memory_ratio: f64,
    pub delta: f64,
    pub family: FamilyKind,
    pub num_files: usize,
    pub packet_bytes: usize,
    pub demand: DemandGen,
    pub trials: usize,
    pub master_seed: u64,
    /// Encode and decode every round; otherwise only the rate is measured.
    pub verify_decode: bool,
}

/// Chooses `K'` and a family instance, then per trial places the users,
/// builds rounds, delivers, decodes and measures the rate against
/// `K (1 - M/N) / g + R_c (ln ln K' / ln 2 + 9)`.
///
/// Trial randomness: placement draws come from the trial seed itself, the
/// library and the demands from separate sub-streams.
pub fn run_decentralized(
    cfg: &DecentralizedConfig,
) -> Result<(ExperimentReport, KPrimeChoice), HarnessError> {
    check_trials(cfg.trials)?;
    if cfg.num_files == 0 || cfg.packet_bytes == 0 {
        return Err(HarnessError::Config("N and B must be at least 1".into()));
    }
    let k_cap = (cfg.users as u64).max(2);
    let choice = decentral::select_for_family(cfg.family, cfg.gain, cfg.memory_ratio, cfg.delta)?;
    let graph = Arc::new(choice.realized.construction.build()?);
    let template = VirtualPool::new(graph.clone(), k_cap)?;
    let t = graph.num_matchings() as u64;

    let results: Vec<TrialOutcome<Option<f64>>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(cfg.master_seed, i);
            let mut pool = template.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let joins = pool.place_all(cfg.users, &mut rng)?;
            let mut drng = ChaCha8Rng::seed_from_u64(sub_seed(seed, DEMAND_STREAM));
            let files = generate_demands(cfg.demand, cfg.users, cfg.num_files, &mut drng);
            let demands: RealDemands = joins.iter().map(|j| j.user).zip(files).collect();
            let plan = decentral::build_rounds(&pool, &demands)?;
            let rate = decentral::measure_rate(&pool, &plan, cfg.gain);

            let mut rec = TrialRecord::new(i, seed);
            rec.max_load = Some(rate.max_load);
            rec.naive_rate = Some(rate.naive_rate_f64());
            rec.pruned_rate = Some(rate.pruned_rate_f64());
            rec.round_count = Some(plan.rounds.len());
            rec.bits_overhead = Some(joins.iter().map(|j| j.bits_exchanged).sum());
            rec.within_bound = rate.within_bound();

            let counted = if cfg.verify_decode {
                let library = Library::generate(
                    cfg.num_files,
                    graph.num_packets(),
                    cfg.packet_bytes,
                    sub_seed(seed, LIBRARY_STREAM),
                )?;
                let out = decentral::deliver_decentralized(&pool, &library, &plan)?;
                rec.decode_ok = Some(out.all_decoded() && out.decoded_users == cfg.users);
                out.naive_transmissions
            } else {
                plan.naive_transmission_count
            };
            rec.naive_transmissions = Some(counted);
            let lemma_exact = counted == t * u64::from(rate.max_load);
            Ok((rec, rate.bound, lemma_exact))
        })
        .collect();

    let mut records = Vec::with_capacity(cfg.trials);
    let mut bound = None;
    let mut exact = true;
    for r in results {
        let (rec, b, e) = r?;
        bound = bound.or(b);
        exact &= e;
        records.push(rec);
    }
    let parameters = json!({
        "config": cfg,
        "selection": choice,
        "k_prime_realized": choice.realized.num_users,
        "subpacketization": choice.realized.num_packets,
        "centralized_rate": ratio_f64(choice.realized.rate),
        "memory_ratio_realized": ratio_f64(choice.realized.memory_ratio),
        "transmissions_equal_t_times_max_load": exact,
    });
    let report = ExperimentReport::new("decentralized-sim", parameters, records, bound, exact);
    Ok((report, choice))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BinsMode {
    Static,
    Churn,
}

impl std::str::FromStr for BinsMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "static" => Ok(BinsMode::Static),
            "churn" => Ok(BinsMode::Churn),
            other => Err(HarnessError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BallsBinsConfig {
    pub mode: BinsMode,
    pub balls: usize,
    pub bins: usize,
    pub steps: usize,
    pub adversary: Adversary,
    /// Candidate bins per insertion; the bound assumes 2.
    pub choices: usize,
    pub trials: usize,
    pub master_seed: u64,
    /// Additive constant of the load bound.
    pub slack: f64,
}

impl BallsBinsConfig {
    pub const STATIC_SLACK: f64 = 9.0;
    pub const CHURN_SLACK: f64 = 20.0;
}

/// Runs the static or churn process once per trial. Records the final max
/// load (static) or the running max load (churn). Returns the time series of
/// trial 0 in churn mode.
///
/// A `RandomFixed(s)` adversary gets a per-trial stream derived from the
/// trial seed and `s`; it is fixed before the process makes any draw.
pub fn run_ballsbins(
    cfg: &BallsBinsConfig,
) -> Result<(ExperimentReport, Option<Vec<SeriesPoint>>), HarnessError> {
    check_trials(cfg.trials)?;
    if cfg.bins == 0 {
        return Err(HarnessError::Config("need at least one bin".into()));
    }
    let bound = ballsbins::bound_with_slack(cfg.balls as u64, cfg.bins as u64, cfg.slack).ok();
    if let (BinsMode::Churn, Adversary::Explicit(_)) = (cfg.mode, &cfg.adversary) {
        ballsbins::make_adversary(&cfg.adversary, cfg.balls, cfg.steps)?;
    }

    let results: Vec<TrialOutcome<Option<Vec<SeriesPoint>>>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(cfg.master_seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut rec = TrialRecord::new(i, seed);
            let (max_load, series, heights_ok) = match cfg.mode {
                BinsMode::Static => {
                    let s = ballsbins::run_static_with(cfg.balls, cfg.bins, cfg.choices, &mut rng)?;
                    (s.max_load(), None, true)
                }
                BinsMode::Churn => {
                    let adversary = match &cfg.adversary {
                        Adversary::RandomFixed(s) => {
                            Adversary::RandomFixed(sub_seed(seed ^ s, ADVERSARY_STREAM))
                        }
                        other => other.clone(),
                    };
                    let script = ballsbins::make_adversary(&adversary, cfg.balls, cfg.steps)?;
                    let run =
                        ballsbins::run_dynamic_with(&script, cfg.bins, cfg.choices, &mut rng)?;
                    let series = (i == 0).then_some(run.series);
                    (run.running_max, series, run.height_violations == 0)
                }
            };
            rec.max_load = Some(max_load);
            rec.within_bound = bound.map(|b| f64::from(max_load) < b);
            Ok((rec, series, heights_ok))
        })
        .collect();

    let mut records = Vec::with_capacity(cfg.trials);
    let mut series = None;
    let mut heights_ok = true;
    for r in results {
        let (rec, s, ok) = r?;
        series = series.or(s);
        heights_ok &= ok;
        records.push(rec);
    }
    let parameters = json!({ "config": cfg, "heights_dominate_loads": heights_ok });
    let report = ExperimentReport::new("ballsbins", parameters, records, bound, heights_ok);
    Ok((report, series))
}

/// Writes a churn time series as CSV with a schema comment line.
pub fn write_series<W: std::io::Write>(
    series: &[SeriesPoint],
    mut w: W,
) -> Result<(), HarnessError> {
    writeln!(w, "# rscache-series/1")?;
    let mut csv = csv::Writer::from_writer(&mut w);
    for p in series {
        csv.serialize(p)?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ChurnConfig {
    pub construction: Construction,
    pub users: usize,
    pub steps: usize,
    pub adversary: Adversary,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChurnOutcome {
    pub events: Vec<decentral::Event>,
    pub final_loads: Vec<u32>,
    pub audit: ReplayAudit,
}

/// Drives a pool through joins and adversarial departures, then replays its
/// own event log through the auditor.
pub fn run_churn(cfg: &ChurnConfig) -> Result<ChurnOutcome, HarnessError> {
    let graph = Arc::new(cfg.construction.build()?);
    let k_cap = (cfg.users as u64).max(2);
    let mut pool = VirtualPool::new(graph, k_cap)?;
    let adversary = match &cfg.adversary {
        Adversary::RandomFixed(s) => {
            Adversary::RandomFixed(sub_seed(cfg.seed ^ s, ADVERSARY_STREAM))
        }
        other => other.clone(),
    };
    let script = ballsbins::make_adversary(&adversary, cfg.users, cfg.steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let events = decentral::run_churn(&mut pool, &script, &mut rng)?;
    let numbered: Vec<_> = events
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, e)| (i + 1, e))
        .collect();
    let audit = decentral::replay(&numbered, pool.num_slots(), k_cap)?;
    Ok(ChurnOutcome {
        events,
        final_loads: pool.loads().to_vec(),
        audit,
    })
}
