//! `pflow` command-line front end.
//!
//! Settings resolve as flags over the `--config` JSON file over defaults;
//! the effective settings are echoed in every report.

mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pflow::drift::FunnelVariant;
use pflow::flow::{run_batch, CloudPolicy, Estimator, FlowConfig, MeasureSource};
use pflow::measures::{
    load_dataset, quantile_cloud, reference_sampler, Dataset, DensitySpec, FunnelSpec, GridFunction, Objective,
    RngStream, DENSITY_NAMES, OBJECTIVE_NAMES,
};
use pflow::metrics::{min_l1_distance, nearest_l1, sliced_w2, tail_table, wasserstein1_1d, TAIL_TABLE_LEVELS};
use pflow::optimize::{anneal_minimize, AnnealConfig};
use pflow::report::RunReport;
use pflow::schedule::Schedule;
use pflow::validation::{funnel_oracle, run_suite, Suite, FUNNEL_ORACLE_TOL};

/// Stream used for reference clouds in reports, away from trajectory streams.
const REFERENCE_STREAM: u64 = u64::MAX - 1;

#[derive(Debug)]
enum CliError {
    /// Bad flags, config or input files: exit 2.
    Usage(String),
    /// The run itself failed or a check did not pass: exit 1.
    Failure(String),
}

impl From<pflow::Error> for CliError {
    fn from(e: pflow::Error) -> Self {
        use pflow::Error as E;
        match e {
            E::InvalidArgument(_) | E::Domain(_) | E::Parse { .. } | E::Io(_) | E::Json(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser)]
#[command(name = "pflow", version, about = "Probability-flow sampling, generation and annealed minimization")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate new points from a dataset by following the empirical flow.
    Generate(GenerateArgs),
    /// Sample from a known density or the analytic funnel.
    Sample(SampleArgs),
    /// Minimize a built-in or tabulated objective by annealed sampling.
    Optimize(OptimizeArgs),
    /// Run the numerical check suites.
    Validate(ValidateArgs),
    /// Write the Gaussian max-coordinate tail table.
    TailTable(TailArgs),
}

#[derive(Args)]
struct Common {
    /// JSON file with settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record wall-clock time in the report (breaks byte-identical reruns).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset CSV, one point per row.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Start from plain N(0, I) instead of rescaling to |Y0|^2 = d.
    #[arg(long)]
    no_normalize: bool,
    #[arg(long)]
    schedule: Option<String>,
    /// Record the min-L1 distance of every sample to the dataset.
    #[arg(long)]
    score_against_data: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    /// Registry name, `funnel`, or `grid` together with --grid.
    #[arg(long)]
    density: Option<String>,
    /// Tabulated density CSV with a JSON sidecar.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Funnel steepness.
    #[arg(long)]
    alpha: Option<f64>,
    /// Funnel exponent variant; chosen by the quadrature oracle when absent.
    #[arg(long)]
    funnel_variant: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    mc_points: Option<usize>,
    /// Support scale in (0, 1].
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// ball | normal
    #[arg(long)]
    estimator: Option<String>,
    /// fresh-per-trajectory | shared-per-step | frozen
    #[arg(long)]
    cloud_policy: Option<String>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Histogram (1-D) or scatter (2-D and up) of the samples.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: Common,
    /// Registry name, or `grid` together with --grid.
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    mc_points: Option<usize>,
    #[arg(long)]
    inner_steps: Option<usize>,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    cloud_policy: Option<String>,
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// fast | full
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TailArgs {
    #[arg(long, default_value = "tail_table.csv")]
    out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenerateConfig {
    data: Option<PathBuf>,
    steps: usize,
    samples: usize,
    seed: u64,
    normalize_init: bool,
    schedule: Schedule,
    score_against_data: bool,
    out: PathBuf,
    report: PathBuf,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            data: None,
            steps: 50,
            samples: 10,
            seed: 0,
            normalize_init: true,
            schedule: Schedule::linear(),
            score_against_data: false,
            out: "samples.csv".into(),
            report: "report.json".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SampleConfig {
    density: Option<String>,
    grid: Option<PathBuf>,
    dim: Option<usize>,
    alpha: Option<f64>,
    funnel_variant: Option<FunnelVariant>,
    steps: usize,
    mc_points: usize,
    scale: f64,
    samples: usize,
    estimator: Estimator,
    cloud_policy: CloudPolicy,
    schedule: Schedule,
    normalize_init: bool,
    seed: u64,
    out: PathBuf,
    report: PathBuf,
    svg: Option<PathBuf>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            density: None,
            grid: None,
            dim: None,
            alpha: None,
            funnel_variant: None,
            steps: 50,
            mc_points: 20_000,
            scale: 1.0,
            samples: 1000,
            estimator: Estimator::Ball,
            cloud_policy: CloudPolicy::FreshPerTrajectory,
            schedule: Schedule::linear(),
            normalize_init: false,
            seed: 0,
            out: "samples.csv".into(),
            report: "report.json".into(),
            svg: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OptimizeConfig {
    objective: Option<String>,
    grid: Option<PathBuf>,
    dim: usize,
    anneal: AnnealConfig,
    seed: u64,
    history: PathBuf,
    report: PathBuf,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            objective: None,
            grid: None,
            dim: 2,
            anneal: AnnealConfig::default(),
            seed: 0,
            history: "history.json".into(),
            report: "report.json".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ValidateConfig {
    suite: Suite,
    seed: u64,
    report: Option<PathBuf>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { suite: Suite::Fast, seed: 0, report: None }
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", p.display())))
        }
    }
}

/// Parses a kebab-case enum value the same way the config file does.
fn parse_enum<T: DeserializeOwned>(flag: &str, value: &str) -> CliResult<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| usage(format!("invalid value `{value}` for --{flag}")))
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn finish_report(report: &mut RunReport, wall_ms: u64, timing: bool) {
    report.wall_ms = if timing { wall_ms } else { 0 };
}

fn cmd_generate(args: GenerateArgs) -> CliResult<()> {
    let mut cfg: GenerateConfig = load_config(args.common.config.as_deref())?;
    set(&mut cfg.data, args.data.map(Some));
    set(&mut cfg.steps, args.steps);
    set(&mut cfg.samples, args.samples);
    set(&mut cfg.seed, args.common.seed);
    set(&mut cfg.out, args.out);
    set(&mut cfg.report, args.report);
    if let Some(s) = args.schedule {
        cfg.schedule = s.parse()?;
    }
    if args.no_normalize {
        cfg.normalize_init = false;
    }
    if args.score_against_data {
        cfg.score_against_data = true;
    }
    let Some(path) = cfg.data.clone() else {
        return Err(usage(format!("--data is required\n\n{}", Cli::command().render_usage())));
    };
    let data = Arc::new(load_dataset(&path)?);
    let flow = FlowConfig { schedule: cfg.schedule, normalize_init: cfg.normalize_init, ..FlowConfig::generation(cfg.steps) };
    let batch = run_batch(&MeasureSource::Empirical(data.clone()), &flow, cfg.samples, cfg.seed)?;
    batch.samples.write_csv(&cfg.out)?;

    let mut report = RunReport::new("generate", &cfg, cfg.seed);
    report.absorb("", batch.report.clone());
    let nearest: Vec<Option<usize>> = batch.samples.iter().map(|p| nearest_l1(p, &data)).collect();
    report.metric("nearest_index", nearest);
    if cfg.score_against_data {
        let scores: Vec<f64> = batch.samples.iter().map(|p| min_l1_distance(p, &data)).collect::<pflow::Result<_>>()?;
        let worst = scores.iter().cloned().fold(0.0f64, f64::max);
        report.metric("min_l1", scores).metric("min_l1_max", worst);
    }
    finish_report(&mut report, batch.report.wall_ms, args.common.timing);
    report.write(&cfg.report)?;
    println!("wrote {} samples to {}", batch.samples.len(), cfg.out.display());
    Ok(())
}

fn density_registry() -> String {
    let mut names: Vec<&str> = DENSITY_NAMES.to_vec();
    names.extend(["funnel", "grid (with --grid FILE)"]);
    names.join(", ")
}

fn cmd_sample(args: SampleArgs) -> CliResult<()> {
    let mut cfg: SampleConfig = load_config(args.common.config.as_deref())?;
    set(&mut cfg.density, args.density.map(Some));
    set(&mut cfg.grid, args.grid.map(Some));
    set(&mut cfg.dim, args.dim.map(Some));
    set(&mut cfg.alpha, args.alpha.map(Some));
    set(&mut cfg.steps, args.steps);
    set(&mut cfg.mc_points, args.mc_points);
    set(&mut cfg.scale, args.scale);
    set(&mut cfg.samples, args.samples);
    set(&mut cfg.seed, args.common.seed);
    set(&mut cfg.out, args.out);
    set(&mut cfg.report, args.report);
    set(&mut cfg.svg, args.svg.map(Some));
    if let Some(v) = args.funnel_variant {
        cfg.funnel_variant = Some(v.parse()?);
    }
    if let Some(v) = args.estimator {
        cfg.estimator = parse_enum("estimator", &v)?;
    }
    if let Some(v) = args.cloud_policy {
        cfg.cloud_policy = parse_enum("cloud-policy", &v)?;
    }
    if let Some(s) = args.schedule {
        cfg.schedule = s.parse()?;
    }
    if !(cfg.scale > 0.0 && cfg.scale <= 1.0) {
        return Err(usage(format!("--scale must lie in (0, 1], got {}", cfg.scale)));
    }
    let Some(name) = cfg.density.clone() else {
        return Err(usage(format!("--density is required; known: {}", density_registry())));
    };
    let flow = FlowConfig {
        steps: cfg.steps,
        schedule: cfg.schedule,
        normalize_init: cfg.normalize_init,
        mc_points: cfg.mc_points,
        scale: cfg.scale,
        estimator: cfg.estimator,
        cloud_policy: cfg.cloud_policy,
        ..FlowConfig::default()
    };
    flow.validate()?;

    let mut notes = Vec::new();
    let mut extra: Vec<(String, serde_json::Value)> = Vec::new();
    let source = if name == "funnel" {
        let dim = cfg.dim.unwrap_or(2);
        let alpha = cfg.alpha.unwrap_or(1.0);
        let spec = FunnelSpec::new(alpha, dim)?;
        let variant = match cfg.funnel_variant {
            Some(v) => {
                extra.push(("funnel_variant_source".into(), "config".into()));
                v
            }
            None => {
                let oracle = funnel_oracle(alpha, cfg.seed)?;
                extra.push(("funnel_oracle".into(), serde_json::to_value(&oracle).unwrap_or_default()));
                extra.push(("funnel_variant_source".into(), "oracle".into()));
                oracle.matched(FUNNEL_ORACLE_TOL).ok_or_else(|| {
                    CliError::Failure(format!(
                        "no funnel variant matched the quadrature oracle (direct {:.4}, scaled {:.4})",
                        oracle.direct_error, oracle.scaled_error
                    ))
                })?
            }
        };
        extra.push(("funnel_variant".into(), variant.to_string().into()));
        MeasureSource::Funnel { spec, variant }
    } else {
        let spec = if name == "grid" {
            let path = cfg.grid.clone().ok_or_else(|| usage("--density grid needs --grid FILE"))?;
            DensitySpec::tabulated(GridFunction::load(path)?)?
        } else {
            DensitySpec::from_name(&name).map_err(|_| usage(format!("unknown density `{name}`; known: {}", density_registry())))?
        };
        if let Some(d) = cfg.dim {
            if d != spec.dim() {
                return Err(usage(format!("density `{name}` has dimension {}, not {d}", spec.dim())));
            }
        }
        MeasureSource::Density(Arc::new(spec))
    };
    if flow.cloud_policy != CloudPolicy::FreshPerTrajectory {
        notes.push(format!("proposal clouds reused across trajectories ({:?})", flow.cloud_policy));
    }

    let batch = run_batch(&source, &flow, cfg.samples, cfg.seed)?;
    batch.samples.write_csv(&cfg.out)?;
    let mut report = RunReport::new("sample", &cfg, cfg.seed);
    report.absorb("", batch.report.clone());
    for (k, v) in extra {
        report.metric(k, v);
    }
    for n in notes {
        report.note(n);
    }
    if !batch.samples.is_empty() {
        let mut rng = RngStream::new(cfg.seed, REFERENCE_STREAM);
        match &source {
            MeasureSource::Density(spec) if spec.dim() == 1 => {
                let w1 = wasserstein1_1d(&batch.samples, &quantile_cloud(spec, batch.samples.len())?)?;
                report.metric("w1_reference", w1);
            }
            MeasureSource::Density(spec) => {
                let reference = reference_sampler(spec, &mut rng, batch.samples.len())?;
                report.metric("sliced_w2_reference", sliced_w2(&batch.samples, &reference, 64, cfg.seed)?);
            }
            MeasureSource::Funnel { spec, .. } => {
                let flat: Vec<f64> = (0..batch.samples.len()).flat_map(|_| spec.sample(&mut rng)).collect();
                let reference = Dataset::from_flat(spec.dim, flat)?;
                report.metric("sliced_w2_reference", sliced_w2(&batch.samples, &reference, 64, cfg.seed)?);
            }
            MeasureSource::Empirical(_) => {}
        }
    }
    if let Some(path) = &cfg.svg {
        std::fs::write(path, plot(&source, &batch.samples, &name)).map_err(|e| usage(format!("cannot write svg: {e}")))?;
    }
    finish_report(&mut report, batch.report.wall_ms, args.common.timing);
    report.write(&cfg.report)?;
    println!("wrote {} samples to {}", batch.samples.len(), cfg.out.display());
    Ok(())
}

fn plot(source: &MeasureSource, samples: &Dataset, name: &str) -> String {
    match source {
        MeasureSource::Density(spec) if spec.dim() == 1 => {
            let values = samples.column(0);
            let spec = spec.clone();
            svg::histogram(name, &values, spec.lower()[0], spec.upper()[0], 60, move |x| spec.eval(&[x]))
        }
        MeasureSource::Density(spec) => {
            let pts: Vec<[f64; 2]> = samples.iter().map(|p| [p[0], p[1]]).collect();
            svg::scatter(name, &pts, [spec.lower()[0], spec.lower()[1]], [spec.upper()[0], spec.upper()[1]])
        }
        _ => {
            let pts: Vec<[f64; 2]> = samples.iter().map(|p| [p[0], p[1]]).collect();
            svg::scatter(name, &pts, [-4.0, -10.0], [4.0, 10.0])
        }
    }
}

fn cmd_optimize(args: OptimizeArgs) -> CliResult<()> {
    let mut cfg: OptimizeConfig = load_config(args.common.config.as_deref())?;
    set(&mut cfg.objective, args.objective.map(Some));
    set(&mut cfg.grid, args.grid.map(Some));
    set(&mut cfg.dim, args.dim);
    set(&mut cfg.anneal.rounds, args.rounds);
    set(&mut cfg.anneal.points_per_round, args.points);
    set(&mut cfg.anneal.mc_points, args.mc_points);
    set(&mut cfg.anneal.inner_steps, args.inner_steps);
    set(&mut cfg.anneal.beta0, args.beta0);
    set(&mut cfg.anneal.alpha0, args.alpha0);
    set(&mut cfg.seed, args.common.seed);
    set(&mut cfg.history, args.history);
    set(&mut cfg.report, args.report);
    if let Some(v) = args.cloud_policy {
        cfg.anneal.cloud_policy = parse_enum("cloud-policy", &v)?;
    }
    let Some(name) = cfg.objective.clone() else {
        return Err(usage(format!("--objective is required; known: {}, grid", OBJECTIVE_NAMES.join(", "))));
    };
    let objective = if name == "grid" {
        let path = cfg.grid.clone().ok_or_else(|| usage("--objective grid needs --grid FILE"))?;
        Objective::Tabulated(Arc::new(GridFunction::load(path)?))
    } else {
        name.parse::<Objective>().map_err(|e| usage(e.to_string()))?
    };
    if let Some(d) = objective.dim_hint() {
        if args.dim.is_some() && d != cfg.dim {
            return Err(usage(format!("tabulated objective has dimension {d}, not {}", cfg.dim)));
        }
        cfg.dim = d;
    }
    if cfg.dim == 0 {
        return Err(usage("--dim must be positive"));
    }
    cfg.anneal.validate()?;

    let start = std::time::Instant::now();
    let mut rng = RngStream::new(cfg.seed, 0);
    let result = anneal_minimize(|x: &[f64]| objective.eval(x), cfg.dim, &cfg.anneal, &mut rng)?;
    println!("M | x_* = argmin(U) | min(U)");
    for r in &result.history.rounds {
        let x: Vec<String> = r.x_star.iter().map(|v| format!("{v:.6}")).collect();
        println!("{} | {} | {:.12}", r.round + 1, x.join(", "), r.u_star);
    }
    let mut text = serde_json::to_string_pretty(&result).map_err(|e| CliError::Failure(e.to_string()))?;
    text.push('\n');
    std::fs::write(&cfg.history, text).map_err(|e| usage(format!("cannot write history: {e}")))?;

    let mut report = RunReport::new("optimize", &cfg, cfg.seed);
    report
        .metric("u_star", result.u_star)
        .metric("x_star", &result.x_star)
        .metric("rounds", result.history.rounds.len())
        .note("proposals are uniform on the search cube |x - x_*|_inf <= alpha_j, not a ball");
    if let Some((_, best)) = objective.known_minimum(cfg.dim) {
        report.metric("known_minimum", best).metric("gap", result.u_star - best);
    }
    finish_report(&mut report, start.elapsed().as_millis() as u64, args.common.timing);
    report.write(&cfg.report)?;
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> CliResult<()> {
    let mut cfg: ValidateConfig = load_config(args.common.config.as_deref())?;
    if let Some(s) = args.suite {
        cfg.suite = s.parse()?;
    }
    set(&mut cfg.seed, args.common.seed);
    set(&mut cfg.report, args.report.map(Some));
    let mut checks = run_suite(cfg.suite, cfg.seed);
    let total_ms: u64 = checks.iter().map(|c| c.wall_ms).sum();
    if !args.common.timing {
        checks.iter_mut().for_each(|c| c.wall_ms = 0);
    }
    let json = serde_json::to_string_pretty(&checks).map_err(|e| CliError::Failure(e.to_string()))?;
    println!("{json}");
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if let Some(path) = &cfg.report {
        let mut report = RunReport::new("validate", &cfg, cfg.seed);
        report.metric("checks", &checks).metric("passed", failed.is_empty());
        finish_report(&mut report, total_ms, args.common.timing);
        report.write(path)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(format!("failed checks: {}", failed.join(", "))))
    }
}

fn cmd_tail_table(args: TailArgs) -> CliResult<()> {
    let mut text = String::from("d");
    for m in TAIL_TABLE_LEVELS {
        text.push_str(&format!(",M={m}"));
    }
    text.push('\n');
    for (d, row) in tail_table() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        text.push_str(&format!("{d},{}\n", cells.join(",")));
    }
    std::fs::write(&args.out, &text).map_err(|e| usage(format!("cannot write {}: {e}", args.out.display())))?;
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match cli.cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Sample(a) => cmd_sample(a),
        Cmd::Optimize(a) => cmd_optimize(a),
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::TailTable(a) => cmd_tail_table(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
