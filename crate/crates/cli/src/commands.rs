use anyhow::{bail, Context, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qgm_core::anneal::{success_probability, SampleSet, SuccessProbability};
use qgm_core::bench::{
    generate_instances, price_most_frequent, run_experiment, solve_model, BenchReport, ExperimentSpec, Solver,
    SolverParams,
};
use qgm_core::qap::{isometric_cost, permutation_extremes, DistanceData, QapInstance};
use qgm_core::qubo::{build, coupling_report, Formulation, QuboFile, QuboModel};
use qgm_core::spectral::gap_profile;
use qgm_core::{Error, Provenance};

use crate::{BenchArgs, BuildArgs, Cli, Command, Format, GapArgs, GenerateArgs, ReportArgs, SolveArgs, SolverArg};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Build(a) => build_cmd(cli, a),
        Command::Gap(a) => gap_cmd(cli, a),
        Command::Solve(a) => solve_cmd(cli, a),
        Command::Bench(a) => bench_cmd(cli, a),
        Command::Report(a) => report_cmd(cli, a),
        Command::Generate(a) => generate_cmd(cli, a),
    }
}

/// 2 for bad input, 3 when a solver gives up, 4 for size-cap refusals.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::SizeCap { .. } => 4,
                Error::NonConvergence(_) | Error::NonFinite { .. } => 3,
                _ => 2,
            };
        }
    }
    2
}

/// Output format: `--format` wins, then the extension of `--out`, then the
/// command's default.
fn output_format(cli: &Cli, default: Format) -> Result<Format> {
    if let Some(f) = cli.format {
        return Ok(f);
    }
    let Some(path) = &cli.out else {
        return Ok(default);
    };
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Ok(Format::Json),
        Some("csv") => Ok(Format::Csv),
        Some("txt") => Ok(Format::Txt),
        _ => bail!(Error::InvalidInput(format!(
            "cannot infer the output format of {}; use a .json, .csv or .txt name or pass --format",
            path.display()
        ))),
    }
}

fn emit(cli: &Cli, content: &str) -> Result<()> {
    match &cli.out {
        Some(path) => write_file(path, content),
        None => {
            print!("{content}");
            if !content.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

/// Reads a cost instance, or a pair of distance matrices (keys `d1`, `d2`)
/// that is turned into the isometric matching cost.
fn load_instance(path: &Path) -> Result<(QapInstance, String)> {
    let text = read_file(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(Error::from)
        .with_context(|| format!("parsing {}", path.display()))?;
    let inst = if value.get("d1").is_some() {
        isometric_cost(&DistanceData::from_json_str(&text).with_context(|| format!("parsing {}", path.display()))?)
    } else {
        QapInstance::from_json_str(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    Ok((inst, text))
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale.is_finite() && scale > 0.0) {
        bail!(Error::InvalidInput(format!(
            "scale must be positive and finite, got {scale}"
        )));
    }
    Ok(())
}

fn fmt_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn build_summary(model: &QuboModel) -> Result<String> {
    let report = coupling_report(model)?;
    Ok(format!(
        "formulation={} n={} dim={} scale={} lambda={} Q_prob=[{:.4}, {:.4}] Q_reg=[{:.4}, {:.4}] q_prob=[{:.4}, {:.4}] q_reg=[{:.4}, {:.4}]",
        model.formulation(),
        model.n(),
        model.dim(),
        model.scale(),
        fmt_list(&model.applied_lambdas()),
        report.q_prob.min,
        report.q_prob.max,
        report.q_reg.min,
        report.q_reg.max,
        report.lin_prob.min,
        report.lin_prob.max,
        report.lin_reg.min,
        report.lin_reg.max,
    ))
}

fn build_cmd(cli: &Cli, a: &BuildArgs) -> Result<()> {
    check_scale(a.scale)?;
    let (inst, text) = load_instance(&a.instance)?;
    let model = build(&inst, a.formulation, a.scale)?;
    let content = match output_format(cli, Format::Json)? {
        Format::Json => {
            let mut file = QuboFile::from(&model);
            file.provenance = Some(Provenance::new(None).with_input("instance", text.as_bytes()));
            to_json(&file)?
        }
        Format::Txt => model.to_sparse_text(),
        Format::Csv => bail!(Error::InvalidInput("a model is written as .json or .txt".into())),
    };
    let summary = build_summary(&model)?;
    emit(cli, &content)?;
    // Stdout carries the model itself when no file is named.
    if cli.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

#[derive(Serialize)]
struct GapOutput {
    provenance: Provenance,
    formulation: Formulation,
    normalized: bool,
    profiles: Vec<ScaledProfile>,
}

#[derive(Serialize)]
struct ScaledProfile {
    scale: f64,
    min_gap: f64,
    argmin_u: f64,
    profile: qgm_core::spectral::GapProfile,
}

fn gap_cmd(cli: &Cli, a: &GapArgs) -> Result<()> {
    if a.scales.is_empty() {
        bail!(Error::InvalidInput("no scales given".into()));
    }
    let (inst, text) = load_instance(&a.instance)?;
    let mut profiles = Vec::new();
    for &scale in &a.scales {
        check_scale(scale)?;
        let model = build(&inst, a.formulation, scale)?;
        let profile = gap_profile(&model, a.samples, !a.raw)
            .with_context(|| format!("gap profile of {} at scale {scale}", a.formulation))?;
        eprintln!(
            "scale={scale} min_gap={:.6e} at u={:.4}",
            profile.min_gap, profile.argmin_t
        );
        profiles.push(ScaledProfile {
            scale,
            min_gap: profile.min_gap,
            argmin_u: profile.argmin_t,
            profile,
        });
    }
    let content = match output_format(cli, Format::Csv)? {
        Format::Csv => {
            let mut out = String::from("scale,u,e0,e1,gap\n");
            for p in &profiles {
                for line in p.profile.to_csv().lines().skip(1) {
                    let _ = writeln!(out, "{:?},{line}", p.scale);
                }
            }
            out
        }
        Format::Json => to_json(&GapOutput {
            provenance: Provenance::new(None).with_input("instance", text.as_bytes()),
            formulation: a.formulation,
            normalized: !a.raw,
            profiles,
        })?,
        Format::Txt => bail!(Error::InvalidInput("gap profiles are written as .csv or .json".into())),
    };
    emit(cli, &content)
}

#[derive(Serialize)]
struct SolveSummary {
    solver: Solver,
    formulation: Formulation,
    n: usize,
    scale: f64,
    success: SuccessProbability,
    valid_fraction: f64,
    /// Assignment of the most frequent sample, when it decodes.
    most_frequent: Option<Vec<usize>>,
    /// Its permutation energy minus the optimum; the worst permutation's
    /// value when the sample is infeasible.
    normalized_energy: f64,
    optimal: bool,
}

#[derive(Serialize)]
struct SolveOutput {
    provenance: Provenance,
    summary: SolveSummary,
    samples: SampleSet,
}

fn solver_of(arg: SolverArg) -> Solver {
    match arg {
        SolverArg::Brute => Solver::Brute,
        SolverArg::Sa => Solver::Sa,
        SolverArg::Schrodinger => Solver::Schrodinger,
        SolverArg::Trotter => Solver::Trotter,
    }
}

fn solve_cmd(cli: &Cli, a: &SolveArgs) -> Result<()> {
    let (inst, text) = load_instance(&a.instance)?;
    let mut prov = Provenance::new(Some(cli.seed())).with_input("instance", text.as_bytes());
    let model = match &a.qubo {
        Some(path) => {
            let qtext = read_file(path)?;
            prov = prov.with_input("qubo", qtext.as_bytes());
            let model = QuboModel::from_json_str(&qtext).with_context(|| format!("parsing {}", path.display()))?;
            if model.n() != inst.n() {
                bail!(Error::InvalidInput(format!(
                    "the model is for n = {} but the instance has n = {}",
                    model.n(),
                    inst.n()
                )));
            }
            model
        }
        None => {
            let scale = a.scale.unwrap_or(1.0);
            check_scale(scale)?;
            let f = a.formulation.expect("clap requires a formulation without --qubo");
            build(&inst, f, scale)?
        }
    };
    let solver = solver_of(a.solver);
    let params = SolverParams {
        tau: a.tau,
        steps_per_unit: a.steps_per_unit,
        pause: a.pause,
        slices: a.slices,
        shots: a.shots,
        sweeps: a.sweeps,
        runs: a.runs,
        temperature: a.temperature,
        gap_samples: None,
    };
    let samples = solve_model(&model, solver, &params, cli.seed())?;
    let ext = permutation_extremes(&inst)?;
    let outcome = price_most_frequent(&samples, &inst, ext.best_energy, ext.worst_energy);
    let success = success_probability(&samples, &inst)?;
    let most_frequent = samples
        .most_frequent()
        .and_then(|e| samples.decode(e))
        .map(|p| p.assignment().to_vec());
    let summary = SolveSummary {
        solver,
        formulation: model.formulation(),
        n: model.n(),
        scale: model.scale(),
        success,
        valid_fraction: samples.valid_fraction(),
        most_frequent,
        normalized_energy: outcome.normalized_energy,
        optimal: outcome.success,
    };
    eprintln!(
        "solver={} success_probability={:.4} random_guess={:.4} valid_fraction={:.4} most_frequent={} normalized_energy={:.6} optimal={}",
        solver,
        summary.success.probability,
        summary.success.random_guess,
        summary.valid_fraction,
        summary
            .most_frequent
            .as_ref()
            .map_or_else(|| "infeasible".to_string(), |p| format!("{p:?}")),
        summary.normalized_energy,
        summary.optimal,
    );
    if let Some(path) = &a.histogram {
        write_file(path, &samples.histogram_csv(a.bins))?;
    }
    let content = match output_format(cli, Format::Json)? {
        Format::Json => to_json(&SolveOutput {
            provenance: prov,
            summary,
            samples,
        })?,
        Format::Csv => samples.histogram_csv(a.bins),
        Format::Txt => bail!(Error::InvalidInput("samples are written as .json or .csv".into())),
    };
    emit(cli, &content)
}

fn bench_cmd(cli: &Cli, a: &BenchArgs) -> Result<()> {
    let (spec, spec_text) = match (&a.spec, &a.preset) {
        (Some(path), _) => {
            let text = read_file(path)?;
            let spec = ExperimentSpec::from_json_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            (spec, Some(text))
        }
        (None, Some(name)) => {
            let mut spec = ExperimentSpec::preset(name)?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            (spec, None)
        }
        (None, None) => unreachable!("clap requires --spec or --preset"),
    };
    let report = run_experiment(&spec).context("benchmark run")?;
    for agg in &report.aggregates {
        eprintln!("{}", aggregate_line(agg));
    }
    if let Some(path) = &a.csv {
        write_file(path, &report.runs_csv())?;
    }
    let content = match output_format(cli, Format::Json)? {
        Format::Json => {
            let mut s = report.to_json_string()?;
            s.push('\n');
            s
        }
        Format::Csv => report.runs_csv(),
        Format::Txt => bail!(Error::InvalidInput("reports are written as .json or .csv".into())),
    };
    if let Some(text) = spec_text {
        log::info!("spec sha256 {}", qgm_core::sha256_hex(text.as_bytes()));
    }
    emit(cli, &content)
}

fn aggregate_line(agg: &qgm_core::bench::Aggregate) -> String {
    let mut line = format!(
        "{:<9} scale={:<5} mean_normalized_energy={:.6} success_rate={:.3} mean_success_probability={:.4}",
        agg.formulation.as_str(),
        agg.scale,
        agg.mean_normalized_energy,
        agg.success_rate,
        agg.mean_success_probability
    );
    if let Some(g) = agg.mean_min_gap {
        let _ = write!(line, " mean_min_gap={g:.6e}");
    }
    line
}

fn report_cmd(cli: &Cli, a: &ReportArgs) -> Result<()> {
    let text = read_file(&a.input)?;
    let report = BenchReport::from_json_str(&text).with_context(|| format!("parsing {}", a.input.display()))?;
    let content = match output_format(cli, Format::Txt)? {
        Format::Json => to_json(&report.aggregates)?,
        Format::Csv => report.aggregates_csv(),
        Format::Txt => {
            let s = &report.spec;
            let mut out = format!(
                "n={} instances={} solver={} seed={} sparsity={} random_guess={:.4}\n",
                s.n, s.num_instances, s.solver, s.seed, s.sparsity, report.random_guess
            );
            for agg in &report.aggregates {
                out.push_str(&aggregate_line(agg));
                out.push('\n');
            }
            out
        }
    };
    emit(cli, &content)
}

fn generate_cmd(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let spec = ExperimentSpec {
        n: a.n,
        num_instances: a.count,
        seed: cli.seed(),
        formulations: vec![Formulation::Baseline],
        scales: vec![1.0],
        sparsity: a.sparsity,
        solver: Solver::Brute,
        solver_params: SolverParams::default(),
    };
    if a.n == 0 || a.count == 0 {
        bail!(Error::InvalidInput("need n ≥ 1 and at least one instance".into()));
    }
    if !(0.0..=1.0).contains(&a.sparsity) {
        bail!(Error::InvalidInput(format!(
            "sparsity must lie in [0, 1], got {}",
            a.sparsity
        )));
    }
    let instances = generate_instances(&spec);
    if instances.len() == 1 {
        let mut s = instances[0].to_json_string()?;
        s.push('\n');
        return emit(cli, &s);
    }
    let dir: PathBuf = cli
        .out
        .clone()
        .ok_or_else(|| Error::InvalidInput("several instances need --out naming a directory".into()))?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for (i, inst) in instances.iter().enumerate() {
        let path = dir.join(format!("instance_{i:03}.json"));
        write_file(&path, &inst.to_json_string()?)?;
    }
    eprintln!("wrote {} instances to {}", instances.len(), dir.display());
    Ok(())
}
