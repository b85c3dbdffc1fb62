//! Command-line front end: graph construction and validation, centralized
//! and decentralized delivery simulations, balls-and-bins experiments, and
//! event-log replay.
//!
//! Exit status: 0 pass, 1 property failure, 2 usage or configuration error.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use rscache::ballsbins::{Adversary, ChurnScript};
use rscache::codec;
use rscache::decentral::{self, FamilyKind};
use rscache::harness::{
    self, BallsBinsConfig, BinsMode, CentralizedConfig, ChurnConfig, DecentralizedConfig,
    DemandGen, ExperimentReport, HarnessError, OutputFormat, Status,
};
use rscache::rsgraph::{self, ratio_f64, Construction, GraphError, RsGraph, SchemeParams};

#[derive(Parser, Debug)]
#[command(
    name = "rscache",
    version,
    about = "Ruzsa-Szemerédi coded caching laboratory"
)]
struct Cli {
    /// Master seed; trial seeds are derived from it.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1)]
    trials: usize,
    /// Output file (graph for `construct`, report otherwise). Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "json")]
    format: OutputFormat,
    /// Include wall time in the aggregate (reports are then not reproducible byte for byte).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a graph family instance and print its scheme parameters.
    Construct {
        #[command(subcommand)]
        family: FamilyCmd,
    },
    /// Check a graph file for the Ruzsa-Szemerédi properties.
    Validate { graph: PathBuf },
    /// Place, deliver and decode on one graph; verify every user's file.
    CentralizedSim(CentralizedArgs),
    /// Two-choice placement over virtual users, round-based delivery.
    DecentralizedSim(DecentralizedArgs),
    /// Static or churn two-choice balls-and-bins process.
    Ballsbins(BallsBinsArgs),
    /// Run joins and adversarial departures on a pool and write the event log.
    Churn(ChurnArgs),
    /// Replay an event log and audit conservation and non-interference.
    ChurnReplay(ReplayArgs),
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum FamilyCmd {
    Binomial {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        a: u32,
    },
    Mn {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        s: u32,
    },
}

impl From<FamilyCmd> for Construction {
    fn from(f: FamilyCmd) -> Self {
        match f {
            FamilyCmd::Binomial { n, a } => Construction::Binomial { n, a },
            FamilyCmd::Mn { k, s } => Construction::Mn { users: k, s },
        }
    }
}

#[derive(Args, Debug)]
struct FamilyArgs {
    #[arg(long)]
    family: Option<FamilyKind>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    a: Option<u32>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    s: Option<u32>,
}

impl FamilyArgs {
    fn construction(&self) -> Result<Construction, HarnessError> {
        let need = |v: Option<u32>, name: &str| {
            v.ok_or_else(|| HarnessError::Config(format!("--{name} is required for this family")))
        };
        match self.family {
            Some(FamilyKind::Binomial) => Ok(Construction::Binomial {
                n: need(self.n, "n")?,
                a: need(self.a, "a")?,
            }),
            Some(FamilyKind::Mn) => Ok(Construction::Mn {
                users: need(self.k, "k")?,
                s: need(self.s, "s")?,
            }),
            None => Err(HarnessError::Config(
                "give --graph or --family with its parameters".into(),
            )),
        }
    }
}

#[derive(Args, Debug)]
struct CentralizedArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long = "files", default_value_t = 8)]
    num_files: usize,
    #[arg(long, default_value_t = codec::DEFAULT_PACKET_BYTES)]
    packet_bytes: usize,
    #[arg(long, default_value = "distinct")]
    demand: DemandGen,
    /// Write the first trial's transmissions as JSON lines.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecentralizedArgs {
    #[arg(long)]
    users: usize,
    #[arg(long)]
    gain: f64,
    #[arg(long)]
    memory_ratio: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value = "binomial")]
    family: FamilyKind,
    #[arg(long = "files", default_value_t = 32)]
    num_files: usize,
    #[arg(long, default_value_t = 8)]
    packet_bytes: usize,
    #[arg(long, default_value = "uniform")]
    demand: DemandGen,
    /// Measure rates only; skip encoding and decoding.
    #[arg(long)]
    no_decode: bool,
}

#[derive(Args, Debug)]
struct BallsBinsArgs {
    #[arg(long, default_value = "static")]
    mode: BinsMode,
    #[arg(long)]
    balls: usize,
    #[arg(long)]
    bins: usize,
    #[arg(long, default_value_t = 0)]
    steps: usize,
    /// fifo, lifo, random[:seed] or explicit:v1,v2,...
    #[arg(long, default_value = "fifo")]
    adversary: Adversary,
    /// Candidate bins per insertion.
    #[arg(long, default_value_t = 2)]
    choices: usize,
    /// JSON churn script; overrides --balls, --steps and --adversary.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Additive constant of the load bound (default 9 static, 20 churn).
    #[arg(long)]
    slack: Option<f64>,
    /// Write trial 0's running max-load series as CSV.
    #[arg(long)]
    series: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ChurnArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    users: usize,
    #[arg(long, default_value_t = 0)]
    steps: usize,
    #[arg(long, default_value = "fifo")]
    adversary: Adversary,
    /// Where to write the event log (JSON lines).
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    log: PathBuf,
    /// Number of virtual slots K'.
    #[arg(long)]
    slots: usize,
    /// Population bound K used for the per-join bit count.
    #[arg(long)]
    k_cap: u64,
}

enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Graph(GraphError::InvalidGraph(_)) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, HarnessError> {
    match &cli.command {
        Command::Construct { family } => cmd_construct(cli, (*family).into()),
        Command::Validate { graph } => cmd_validate(graph),
        Command::CentralizedSim(args) => cmd_centralized(cli, args),
        Command::DecentralizedSim(args) => cmd_decentralized(cli, args),
        Command::Ballsbins(args) => cmd_ballsbins(cli, args),
        Command::Churn(args) => cmd_churn(cli, args),
        Command::ChurnReplay(args) => cmd_replay(args),
    }
}

fn print_params(p: &SchemeParams) {
    println!("F\tK\tt\tr\tc\trate\tmemory_ratio");
    println!(
        "{}\t{}\t{}\t{}\t{}\t{} ({:.6})\t{} ({:.6})",
        p.subpacketization,
        p.num_users,
        p.num_matchings,
        p.avg_matching_size,
        p.min_right_degree,
        p.rate,
        ratio_f64(p.rate),
        p.memory_ratio,
        ratio_f64(p.memory_ratio)
    );
}

fn cmd_construct(cli: &Cli, spec: Construction) -> Result<Outcome, HarnessError> {
    let (graph, params) = harness::construct(spec)?;
    if let Some(path) = &cli.out {
        fs::write(path, graph.to_json())?;
    }
    print_params(&params);
    Ok(Outcome::Pass)
}

fn read_graph(path: &Path) -> Result<RsGraph, HarnessError> {
    let text = fs::read_to_string(path)?;
    Ok(RsGraph::from_json(&text)?)
}

fn cmd_validate(path: &Path) -> Result<Outcome, HarnessError> {
    let graph = read_graph(path)?;
    let report = rsgraph::validate_rs(&graph);
    println!(
        "partition: {}  matching: {}  induced: {}",
        ok_str(report.partition_ok),
        ok_str(report.matching_ok),
        ok_str(report.induced_ok)
    );
    for v in report.violations.iter().take(50) {
        println!("  {v}");
    }
    if report.violations.len() > 50 {
        println!("  ... {} more", report.violations.len() - 50);
    }
    match report.summary {
        Some(_) => {
            print_params(&rsgraph::scheme_params(&graph)?);
            Ok(Outcome::Pass)
        }
        None => {
            println!("invalid");
            Ok(Outcome::Fail)
        }
    }
}

fn ok_str(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn emit(
    cli: &Cli,
    report: &mut ExperimentReport,
    started: Instant,
) -> Result<Outcome, HarnessError> {
    if cli.timing {
        report.aggregate.wall_time_ms = Some(started.elapsed().as_millis() as u64);
    }
    match &cli.out {
        Some(path) => report.write(cli.format, BufWriter::new(File::create(path)?))?,
        None => report.write(cli.format, io::stdout().lock())?,
    }
    let a = &report.aggregate;
    let mut line = format!("{}: {} trials", report.experiment, a.trials);
    if let Some(m) = a.max_max_load {
        line += &format!(", max load {m}");
    }
    if let Some(r) = a.max_naive_rate {
        line += &format!(", max rate {r:.4}");
    }
    if let Some(b) = a.bound {
        line += &format!(", bound {b:.4}");
    }
    if let Some(f) = a.fraction_within_bound {
        line += &format!(", within bound {:.1}%", 100.0 * f);
    }
    line += &format!(", decode failures {}", a.decode_failures);
    line += match report.status {
        Status::Pass => " [pass]",
        Status::Fail => " [FAIL]",
    };
    eprintln!("{line}");
    Ok(match report.status {
        Status::Pass => Outcome::Pass,
        Status::Fail => Outcome::Fail,
    })
}

fn cmd_centralized(cli: &Cli, args: &CentralizedArgs) -> Result<Outcome, HarnessError> {
    let started = Instant::now();
    let graph = match &args.graph {
        Some(p) => read_graph(p)?,
        None => args.family.construction()?.build()?,
    };
    let cfg = CentralizedConfig {
        num_files: args.num_files,
        packet_bytes: args.packet_bytes,
        demand: args.demand,
        trials: cli.trials,
        master_seed: cli.seed,
    };
    let mut report = harness::run_centralized(&graph, &cfg)?;
    if let Some(path) = &args.dump {
        let tx = harness::centralized_transmissions(&graph, &cfg, 0)?;
        codec::write_dump(&tx, BufWriter::new(File::create(path)?))?;
    }
    emit(cli, &mut report, started)
}

fn cmd_decentralized(cli: &Cli, args: &DecentralizedArgs) -> Result<Outcome, HarnessError> {
    let started = Instant::now();
    let cfg = DecentralizedConfig {
        users: args.users,
        gain: args.gain,
        memory_ratio: args.memory_ratio,
        delta: args.delta,
        family: args.family,
        num_files: args.num_files,
        packet_bytes: args.packet_bytes,
        demand: args.demand,
        trials: cli.trials,
        master_seed: cli.seed,
        verify_decode: !args.no_decode,
    };
    let (mut report, choice) = harness::run_decentralized(&cfg)?;
    let r = &choice.realized;
    eprintln!(
        "{}: K'={} (needed {}), F={}, t={}, R_c={:.4}, M/N={:.4}",
        r.construction,
        r.num_users,
        choice.k_prime,
        r.num_packets,
        r.num_matchings,
        ratio_f64(r.rate),
        ratio_f64(r.memory_ratio)
    );
    emit(cli, &mut report, started)
}

fn cmd_ballsbins(cli: &Cli, args: &BallsBinsArgs) -> Result<Outcome, HarnessError> {
    let started = Instant::now();
    let (balls, steps, adversary) = match &args.script {
        Some(path) => {
            let script = ChurnScript::from_json(&fs::read_to_string(path)?)?;
            (
                script.population_cap(),
                script.churn_steps(),
                Adversary::Explicit(script.deletions().to_vec()),
            )
        }
        None => {
            let steps = match &args.adversary {
                Adversary::Explicit(v) if args.steps == 0 => v.len(),
                _ => args.steps,
            };
            (args.balls, steps, args.adversary.clone())
        }
    };
    let slack = args.slack.unwrap_or(match args.mode {
        BinsMode::Static => BallsBinsConfig::STATIC_SLACK,
        BinsMode::Churn => BallsBinsConfig::CHURN_SLACK,
    });
    let cfg = BallsBinsConfig {
        mode: args.mode,
        balls,
        bins: args.bins,
        steps,
        adversary,
        choices: args.choices,
        trials: cli.trials,
        master_seed: cli.seed,
        slack,
    };
    let (mut report, series) = harness::run_ballsbins(&cfg)?;
    if let (Some(path), Some(series)) = (&args.series, series) {
        harness::write_series(&series, BufWriter::new(File::create(path)?))?;
    }
    emit(cli, &mut report, started)
}

fn cmd_churn(cli: &Cli, args: &ChurnArgs) -> Result<Outcome, HarnessError> {
    let cfg = ChurnConfig {
        construction: args.family.construction()?,
        users: args.users,
        steps: args.steps,
        adversary: args.adversary.clone(),
        seed: cli.seed,
    };
    let outcome = harness::run_churn(&cfg)?;
    if let Some(path) = &args.events {
        decentral::write_event_log(&outcome.events, BufWriter::new(File::create(path)?))?;
    }
    let audit = &outcome.audit;
    println!(
        "events {}  joins {}  leaves {}  population {}  max load {}  bits {}  audit {}",
        audit.events,
        audit.joins,
        audit.leaves,
        audit.population,
        outcome.final_loads.iter().max().copied().unwrap_or(0),
        audit.bits_total,
        ok_str(audit.ok)
    );
    Ok(if audit.ok {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

fn cmd_replay(args: &ReplayArgs) -> Result<Outcome, HarnessError> {
    let text = fs::read_to_string(&args.log)?;
    let events = decentral::parse_event_log(&text)?;
    let audit = decentral::replay(&events, args.slots, args.k_cap)?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &audit)?;
    writeln!(out)?;
    if let Some(f) = &audit.failure {
        eprintln!("audit failed at line {}: {}", f.line, f.message);
    }
    Ok(if audit.ok {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}
