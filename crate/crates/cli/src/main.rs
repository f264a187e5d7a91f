//! `qgm`: build QUBO models of assignment problems, inspect their penalty
//! bounds and spectral gaps, run the simulators and benchmark suites.

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use qgm_core::qubo::Formulation;

impl Cli {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Parser, Debug)]
#[command(name = "qgm", version, about = "Permutation-constrained QUBO toolkit")]
pub struct Cli {
    /// Seed for every random choice (0 when unset; presets keep their own).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file; the format follows its extension unless --format is set.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "QGM_WORKERS")]
    pub workers: Option<usize>,

    /// More log output (-v, -vv).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    /// Upper-triangular sparse text (models only).
    Txt,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the QUBO of an instance.
    Build(BuildArgs),
    /// Spectral-gap profiles across penalty scales.
    Gap(GapArgs),
    /// Solve one instance and report the sample distribution.
    Solve(SolveArgs),
    /// Run a benchmark suite from a spec file or preset.
    Bench(BenchArgs),
    /// Summarize a saved benchmark report.
    Report(ReportArgs),
    /// Write seeded random instances.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_parser = parse_formulation)]
    pub formulation: Formulation,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Args, Debug)]
pub struct GapArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_parser = parse_formulation)]
    pub formulation: Formulation,
    /// Comma-separated penalty scales.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub scales: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    /// Skip the coupling normalization of the spin model.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Brute,
    Sa,
    Schrodinger,
    Trotter,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Previously built model; otherwise the model is built from the instance.
    #[arg(long, conflicts_with_all = ["formulation", "scale"])]
    pub qubo: Option<PathBuf>,
    #[arg(long, value_parser = parse_formulation, required_unless_present = "qubo")]
    pub formulation: Option<Formulation>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, value_enum)]
    pub solver: SolverArg,
    #[arg(long, default_value_t = 100.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 10.0)]
    pub steps_per_unit: f64,
    /// Plateau in the anneal path as `u,fraction`.
    #[arg(long, value_parser = parse_pause)]
    pub pause: Option<(f64, f64)>,
    #[arg(long, default_value_t = 512)]
    pub slices: usize,
    #[arg(long, default_value_t = 500)]
    pub shots: usize,
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 500)]
    pub runs: usize,
    /// `auto`, `geometric:T_HI,T_LO` or `fixed:T`.
    #[arg(long, default_value = "auto", value_parser = parse_temperature)]
    pub temperature: qgm_core::anneal::TemperatureSchedule,
    /// Also write the energy histogram as CSV.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub spec: Option<PathBuf>,
    #[arg(long, value_parser = ["fig2", "fig3", "fig6", "supp-sa"])]
    pub preset: Option<String>,
    /// Per-run CSV table next to the JSON report.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sparsity: f64,
}

fn parse_formulation(s: &str) -> Result<Formulation, String> {
    s.parse::<Formulation>().map_err(|e| e.to_string())
}

fn parse_pause(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `u,fraction`")?;
    Ok((
        a.trim().parse().map_err(|_| format!("bad number `{a}`"))?,
        b.trim().parse().map_err(|_| format!("bad number `{b}`"))?,
    ))
}

fn parse_temperature(s: &str) -> Result<qgm_core::anneal::TemperatureSchedule, String> {
    use qgm_core::anneal::TemperatureSchedule as T;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad number `{v}`"));
    match s.split_once(':') {
        None if s == "auto" => Ok(T::Auto),
        Some(("fixed", t)) => Ok(T::Fixed { t: num(t)? }),
        Some(("geometric", r)) => {
            let (hi, lo) = r.split_once(',').ok_or("expected `geometric:T_HI,T_LO`")?;
            Ok(T::Geometric {
                t_hi: num(hi)?,
                t_lo: num(lo)?,
            })
        }
        _ => Err(format!("unknown temperature program `{s}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
