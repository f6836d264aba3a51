//! Command-line interface.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::{
    plot_data, resolve_reach_table, resolve_topology, run_instance, run_sweep, scenario_applies, write_csv,
    MetricsRecord, SweepConfig,
};
use crate::fmt::ScenarioKind;
use crate::oracle::verify_sharing_legality;
use crate::provision::{read_assignment_log, write_assignment_log, Planner};
use crate::spp::{Objective, ProtectionMode};
use crate::topology::Topology;
use crate::traffic::{calibrate_high_load, generate, CalibrationParams, TrafficConfig};

#[derive(Parser, Debug)]
#[command(name = "mgdm-spp", version, about = "Survivable provisioning over mode-group FMF networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Provision one request sequence and report its metrics.
    Run(RunArgs),
    /// Run the scenario x protection x regime x load grid.
    Sweep(SweepArgs),
    /// Find the high and low load request counts.
    Calibrate(CalibrateArgs),
    /// Check sharing legality of an assignment log.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct NetworkArgs {
    /// "german17" or a topology JSON file.
    #[arg(long)]
    pub topology: Option<String>,
    /// Reach table CSV.
    #[arg(long)]
    pub reach_table: Option<PathBuf>,
    /// Rescale link lengths so the longest link has this length.
    #[arg(long)]
    pub max_link_km: Option<f64>,
    #[arg(long)]
    pub wavelengths: Option<usize>,
    /// Candidate routes per search.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// TOML file with defaults for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub network: NetworkArgs,
    #[arg(long)]
    pub scenario: Option<String>,
    /// spp or dpp.
    #[arg(long)]
    pub mode: Option<String>,
    /// spectrum-first or mimo-first.
    #[arg(long)]
    pub objective: Option<String>,
    /// Number of requests to generate.
    #[arg(long, conflicts_with = "calibrate")]
    pub requests: Option<usize>,
    /// Use the calibrated high-load request count.
    #[arg(long)]
    pub calibrate: bool,
    /// Use the low load (half of high) when calibrating.
    #[arg(long, requires = "calibrate")]
    pub low: bool,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Label written into the regime column.
    #[arg(long)]
    pub regime: Option<String>,
    /// Metrics CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub assignments_out: Option<PathBuf>,
    #[arg(long)]
    pub dump_state: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Sweep TOML; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub wavelengths: Option<usize>,
    #[arg(long)]
    pub objective: Option<String>,
    /// Metrics CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON series for plotting.
    #[arg(long)]
    pub plot_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub network: NetworkArgs,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Mean rejection ratio that defines high load.
    #[arg(long)]
    pub target: Option<f64>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Assignment log CSV written by `run --assignments-out`.
    #[arg(long, alias = "log")]
    pub assignments: PathBuf,
}

/// Defaults read from `--config`; flags take precedence.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    topology: Option<String>,
    reach_table: Option<PathBuf>,
    max_link_km: Option<f64>,
    wavelengths: Option<usize>,
    k: Option<usize>,
    seed: Option<u64>,
    scenario: Option<String>,
    mode: Option<String>,
    objective: Option<String>,
    requests: Option<usize>,
    replicas: Option<usize>,
    target: Option<f64>,
    regime: Option<String>,
}

fn read_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let s = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str(&s).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
        }
    }
}

struct Network {
    topology: Topology,
    table: crate::fmt::ReachTable,
    wavelengths: usize,
    k: usize,
    seed: u64,
}

fn network(args: &NetworkArgs, file: &FileConfig) -> Result<Network> {
    let spec = args
        .topology
        .clone()
        .or_else(|| file.topology.clone())
        .unwrap_or_else(|| "german17".into());
    let mut topology = resolve_topology(&spec, None)?;
    if let Some(km) = args.max_link_km.or(file.max_link_km) {
        topology = topology.scale_link_lengths(km)?;
    }
    let table_path = args.reach_table.clone().or_else(|| file.reach_table.clone());
    let table = resolve_reach_table(table_path.as_deref().and_then(Path::to_str), None)?;
    let wavelengths = args.wavelengths.or(file.wavelengths).unwrap_or(100);
    let k = args.k.or(file.k).unwrap_or(3);
    if wavelengths == 0 || k == 0 {
        return Err(Error::InvalidArgument("wavelengths and k must be positive".into()));
    }
    Ok(Network {
        topology,
        table,
        wavelengths,
        k,
        seed: args.seed.or(file.seed).unwrap_or(1),
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run(args: RunArgs) -> Result<()> {
    let file = read_file_config(args.config.as_deref())?;
    let net = network(&args.network, &file)?;
    let scenario: ScenarioKind = args
        .scenario
        .or(file.scenario)
        .unwrap_or_else(|| "mgdm".into())
        .parse()?;
    let mode: ProtectionMode = args.mode.or(file.mode).unwrap_or_else(|| "spp".into()).parse()?;
    let objective: Objective = match args.objective.or(file.objective) {
        Some(s) => s.parse()?,
        None => Objective::default(),
    };
    if !scenario_applies(&net.table, scenario, &net.topology) {
        eprintln!(
            "warning: {scenario} reaches at most {} km but the shortest link is {:.3} km; every request will be rejected",
            net.table.max_reach_km(scenario),
            net.topology.min_link_km()
        );
    }
    let (count, load) = if args.calibrate {
        let mut p = CalibrationParams::high_load(&net.topology, &net.table, net.wavelengths, net.k, net.seed);
        if let Some(r) = args.replicas.or(file.replicas) {
            p.replicas = r;
        }
        if let Some(t) = file.target {
            p.target_rejection = t;
        }
        let c = calibrate_high_load(&p)?;
        if args.low {
            (c.low, "low")
        } else {
            (c.high, "high")
        }
    } else {
        (args.requests.or(file.requests).unwrap_or(100), "custom")
    };
    let requests = generate(
        &TrafficConfig {
            seed: net.seed,
            count,
        },
        &net.topology,
    );
    let mut planner = Planner::new(&net.topology, &net.table, scenario, net.k);
    planner.objective = objective;
    let result = run_instance(&planner, net.wavelengths, &requests, mode);
    let record = MetricsRecord {
        scenario,
        mode,
        regime: args.regime.or(file.regime).unwrap_or_else(|| "custom".into()),
        load: load.into(),
        seed: net.seed,
        metrics: result.metrics,
    };
    let mut out = output(args.out.as_deref())?;
    write_csv(&mut out, std::slice::from_ref(&record)).map_err(|e| Error::io("<output>", e))?;
    out.flush().map_err(|e| Error::io("<output>", e))?;
    if let Some(p) = &args.assignments_out {
        let f = File::create(p).map_err(|e| Error::io(p, e))?;
        write_assignment_log(BufWriter::new(f), &result.outcome.assignments)?;
    }
    if let Some(p) = &args.dump_state {
        std::fs::write(p, result.state.dump()).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let (mut config, base) = match &args.config {
        Some(p) => (SweepConfig::load(p)?, p.parent().map(Path::to_path_buf)),
        None => (SweepConfig::default(), None),
    };
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(r) = args.replicas {
        config.replicas = r;
    }
    if let Some(w) = args.wavelengths {
        config.wavelengths = w;
    }
    if let Some(o) = &args.objective {
        config.objective = o.parse()?;
    }
    let result = run_sweep(&config, base.as_deref())?;
    for l in &result.loads {
        eprintln!("regime {}: high load {} requests, low load {}", l.regime, l.high, l.low);
    }
    for (regime, scenario) in &result.skipped {
        eprintln!("regime {regime}: {scenario} skipped, its reach is shorter than every link");
    }
    let mut out = output(args.out.as_deref())?;
    write_csv(&mut out, &result.records).map_err(|e| Error::io("<output>", e))?;
    out.flush().map_err(|e| Error::io("<output>", e))?;
    if let Some(p) = &args.plot_out {
        let json = serde_json::to_string_pretty(&plot_data(&result.records))
            .map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(p, json + "\n").map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let file = read_file_config(args.config.as_deref())?;
    let net = network(&args.network, &file)?;
    let mut p = CalibrationParams::high_load(&net.topology, &net.table, net.wavelengths, net.k, net.seed);
    if let Some(r) = args.replicas.or(file.replicas) {
        p.replicas = r;
    }
    if let Some(t) = args.target.or(file.target) {
        p.target_rejection = t;
    }
    let c = calibrate_high_load(&p)?;
    println!("high={} low={} mean_rejection={:.6}", c.high, c.low, c.mean_rejection_at_high);
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let f = File::open(&args.assignments).map_err(|e| Error::io(&args.assignments, e))?;
    let records = read_assignment_log(f)?;
    let ok = verify_sharing_legality(&records)?;
    if ok {
        println!("legal: {} assignments", records.len());
    } else {
        println!("illegal sharing found");
    }
    Ok(ok)
}

/// Parses `args` and runs the command. Returns the process exit code:
/// 0 on success, 1 when verification finds illegal sharing, 2 on errors.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Calibrate(a) => calibrate(a).map(|_| true),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
