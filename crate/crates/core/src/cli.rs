//! `qdmem` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{
    bias_grid, build_histogram, default_energy_grid, emission_histogram, expected_histogram, filter_species,
    fit_exponential, memory_degree, spectral_map, Histogram,
};
use crate::engine::{evolve_master, run_shots, KmcError, MasterError, SteadyError};
use crate::levels::NUM_STATES;
use crate::pulses::{parse_protocol, ConfigError, ExperimentProtocol};
use crate::report::{
    histogram_csv, spectral_csv, to_json, write_file, CompareReport, EngineChoice, EngineSummary, RunManifest,
    RunSummary,
};

/// Semantic version plus the config schema version.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (config schema 1)");

#[derive(Debug, Parser)]
#[command(name = "qdmem", version = VERSION, about = "Quantum-dot electron-spin optical memory simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the protocol and write histogram CSV, summary JSON and manifest.
    Run(RunArgs),
    /// Steady-state spectral map over a bias sweep.
    SweepBias(SweepArgs),
    /// Run both engines and report their per-bin distance.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Protocol config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; never changes results.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Overrides `[run] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `[run] cycles`.
    #[arg(long)]
    pub cycles: Option<u64>,
    #[arg(long, value_enum, default_value = "kmc")]
    pub engine: EngineChoice,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub v_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub v_max: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub steps: u64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub cycles: Option<u64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error(transparent)]
    Kmc(#[from] KmcError),
    #[error(transparent)]
    Steady(#[from] SteadyError),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load(path: &Path) -> Result<ExperimentProtocol, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_protocol(&text).map_err(|e: ConfigError| CliError::Config(e.located(&path.display().to_string())))
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    write_file(dir, name, contents).map_err(io_err(&dir.join(name)))
}

#[cfg(feature = "parallel")]
fn with_jobs<T: Send>(jobs: Option<u32>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n as usize)
                .build()
                .map_err(|e| CliError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn with_jobs<T: Send>(_jobs: Option<u32>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    Ok(f())
}

fn apply_overrides(p: &mut ExperimentProtocol, seed: Option<u64>, cycles: Option<u64>) -> Result<(), CliError> {
    if let Some(s) = seed {
        p.seed = s;
    }
    if let Some(c) = cycles {
        p.cycles = c;
    }
    if p.cycles == 0 {
        return Err(CliError::Usage("cycles must be >= 1".into()));
    }
    Ok(())
}

fn initial_distribution(p: &ExperimentProtocol) -> [f64; NUM_STATES] {
    let mut p0 = [0.0; NUM_STATES];
    p0[p.initial_state.index()] = 1.0;
    p0
}

fn summarize(engine: &'static str, file: String, h: &Histogram, p: &ExperimentProtocol) -> EngineSummary {
    let a = &p.analysis;
    let read = a.read_window(p);
    let fit = a.fit_window(p, h);
    EngineSummary {
        engine,
        histogram_file: file,
        total_counts: h.total(),
        read_window_ns: read,
        fit_window_ns: fit,
        memory_degree: memory_degree(h, read).into(),
        lifetime: fit_exponential(h, fit).into(),
    }
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let c = &args.common;
    let mut p = load(&c.config)?;
    apply_overrides(&mut p, args.seed, args.cycles)?;
    prepare_out(&c.out)?;
    let manifest = RunManifest::new("run", &c.config, &p, args.engine, &c.out);
    write(&c.out, "manifest.json", &to_json(&manifest))?;

    let window = (0.0, p.period_ns);
    let bw = p.analysis.bin_width_ns;
    let species = p.analysis.species;
    let both = args.engine == EngineChoice::Both;
    let mut results = Vec::new();
    if matches!(args.engine, EngineChoice::Master | EngineChoice::Both) {
        say(c.quiet, "integrating master equation");
        let traj = evolve_master(&initial_distribution(&p), &p, p.dt_ns)?;
        let h = expected_histogram(&traj, &p, species, bw, window, p.cycles, true);
        let name = if both { "histogram_master.csv" } else { "histogram.csv" };
        write(&c.out, name, &histogram_csv(&h))?;
        results.push(summarize("master", name.into(), &h, &p));
    }
    if matches!(args.engine, EngineChoice::Kmc | EngineChoice::Both) {
        say(c.quiet, format!("simulating {} cycles", p.cycles));
        let run = with_jobs(c.jobs, || run_shots(&p, p.cycles, p.seed))??;
        let recs = filter_species(&run.records, species);
        let h = build_histogram(&recs, bw, window, p.cycles);
        let name = if both { "histogram_kmc.csv" } else { "histogram.csv" };
        write(&c.out, name, &histogram_csv(&h))?;
        results.push(summarize("kmc", name.into(), &h, &p));
    }
    let summary = RunSummary {
        config_hash: manifest.config_hash.clone(),
        seed: p.seed,
        cycles: p.cycles,
        species: species.map_or("all", |s| s.label()).to_string(),
        results,
    };
    for r in &summary.results {
        if let Some(m) = &r.memory_degree.value {
            say(c.quiet, format!("{}: D = {:.4} ± {:.4}", r.engine, m.degree, m.uncertainty));
        }
    }
    write(&c.out, "summary.json", &to_json(&summary))
}

#[derive(serde::Serialize)]
struct SweepSummary {
    config_hash: String,
    biases: Vec<f64>,
    dominant_species: Vec<Option<&'static str>>,
    energy_points: usize,
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let c = &args.common;
    if !(args.v_min < args.v_max) {
        return Err(CliError::Usage(format!(
            "--v-min ({}) must be below --v-max ({})",
            args.v_min, args.v_max
        )));
    }
    let p = load(&c.config)?;
    prepare_out(&c.out)?;
    let manifest = RunManifest::new("sweep-bias", &c.config, &p, EngineChoice::Master, &c.out);
    write(&c.out, "manifest.json", &to_json(&manifest))?;
    let biases = bias_grid(args.v_min, args.v_max, args.steps as usize);
    let energies = default_energy_grid(&p, &biases);
    say(c.quiet, format!("{} biases × {} energies", biases.len(), energies.len()));
    let map = spectral_map(&p, &biases, &energies)?;
    write(&c.out, "spectral_map.csv", &spectral_csv(&map))?;
    let summary = SweepSummary {
        config_hash: manifest.config_hash,
        biases: map.biases.clone(),
        dominant_species: map.dominant.iter().map(|d| d.map(|s| s.label())).collect(),
        energy_points: energies.len(),
    };
    write(&c.out, "sweep.json", &to_json(&summary))
}

fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let c = &args.common;
    let mut p = load(&c.config)?;
    apply_overrides(&mut p, args.seed, args.cycles)?;
    prepare_out(&c.out)?;
    let manifest = RunManifest::new("compare", &c.config, &p, EngineChoice::Both, &c.out);
    write(&c.out, "manifest.json", &to_json(&manifest))?;

    let window = (0.0, p.period_ns);
    let bw = p.analysis.bin_width_ns;
    let traj = evolve_master(&initial_distribution(&p), &p, p.dt_ns)?;
    let expected = expected_histogram(&traj, &p, None, bw, window, p.cycles, false);
    say(c.quiet, format!("simulating {} cycles", p.cycles));
    let run = with_jobs(c.jobs, || run_shots(&p, p.cycles, p.seed))??;
    let observed = emission_histogram(&run.events, &p, None, bw, window, p.cycles);
    let report = CompareReport::new(&p, p.cycles, p.seed, &expected, &observed);
    say(
        c.quiet,
        format!(
            "relative L2 = {:.4}, max |z| = {:.2}{}",
            report.relative_l2,
            report.max_abs_z,
            if report.insufficient_statistics { " (insufficient statistics)" } else { "" }
        ),
    );
    write(&c.out, "compare.json", &to_json(&report))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::SweepBias(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

/// Parses `std::env::args`, runs, and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
