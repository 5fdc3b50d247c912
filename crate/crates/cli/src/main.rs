//! `splq`: L-moments, minimum divergence fits, confidence statistics and the
//! simulation study from the command line.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

mod config;
mod format;
mod input;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use splq_core::divergence::Divergence;
use splq_core::estimator::{
    attach_asymptotics, fit_classical, fit_divergence, fit_wasserstein, ClassicalMethod, ConfidenceStat, FitOptions,
    FitReport, Plugin,
};
use splq_core::lmoments::{
    lmoment_ratios, sample_lmoments_u, sample_lmoments_v, CovarianceQuad, LmomentVector, SortedSample,
};
use splq_core::models::{Family, ModelKind, SplqModel};
use splq_core::sim::{l1_density_distance, plot_data, run_scenario, SimSummary};

use config::{FitConfig, SimulateConfig};
use format::{sig6, Table};
use input::Column;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<splq_core::Error> for CliError {
    fn from(e: splq_core::Error) -> Self {
        use splq_core::Error::*;
        match e {
            InvalidInput(_) | Domain { .. } | UnsupportedOrder { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "splq", version, about = "Minimum divergence estimation under L-moment constraints")]
struct Cli {
    /// Worker threads for the simulation engine (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample L-moments (V- and U-statistics) and L-moment ratios.
    Lmoments(LmomentsArgs),
    /// Fit a model by minimum divergence, transport, or a classical method.
    Fit(FitArgs),
    /// Fit by minimum divergence and report the S_n confidence statistic.
    Test(TestArgs),
    /// Run a simulation scenario from a config file.
    Simulate(SimulateArgs),
    /// L1 distance between two parameterized densities.
    Dist(DistArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV file with the observations.
    input: PathBuf,
    /// Column to read: 1-based index or header name.
    #[arg(long, default_value = "1")]
    col: Column,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum OutputFormat {
    #[default]
    Table,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t)]
    format: OutputFormat,
    /// Also write the JSON result to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LmomentsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Highest L-moment order.
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Divergence,
    Wasserstein,
    Lmom,
    Moment,
    Mle,
}

#[derive(Args)]
struct ModelArgs {
    /// TOML file with model, divergence, plug-in and solver options; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gpd-l234, weibull-l234 or orderstat3.
    #[arg(long)]
    model: Option<ModelKind>,
    /// chi2, kl, klm or power:<gamma>.
    #[arg(long = "div")]
    divergence: Option<Divergence>,
    /// Cdf used in the covariance plug-in.
    #[arg(long, value_enum)]
    plugin: Option<PluginArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PluginArg {
    Parametric,
    Empirical,
}

impl From<PluginArg> for Plugin {
    fn from(p: PluginArg) -> Self {
        match p {
            PluginArg::Parametric => Plugin::Parametric,
            PluginArg::Empirical => Plugin::Empirical,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Estimation method; the classical methods fit the GPD.
    #[arg(long, value_enum, default_value_t = Method::Divergence)]
    method: Method,
    /// Add covariance blocks and the S_n statistic (divergence fits only).
    #[arg(long)]
    asymptotics: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML scenario configuration.
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: OutputFormat,
}

#[derive(Args)]
struct DistArgs {
    /// First law as family:sigma,nu (family gpd or weibull).
    a: LawSpec,
    /// Second law as family:sigma,nu.
    b: LawSpec,
    #[arg(long, value_enum, default_value_t)]
    format: OutputFormat,
}

#[derive(Clone, Copy, Debug, Serialize)]
struct LawSpec {
    family: Family,
    sigma: f64,
    nu: f64,
}

impl std::str::FromStr for LawSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let err = || format!("expected family:sigma,nu (e.g. gpd:3,0.7), got '{s}'");
        let (family, params) = s.split_once(':').ok_or_else(err)?;
        let (sigma, nu) = params.split_once(',').ok_or_else(err)?;
        Ok(LawSpec {
            family: family.parse().map_err(|e: splq_core::Error| e.to_string())?,
            sigma: sigma.trim().parse().map_err(|_| err())?,
            nu: nu.trim().parse().map_err(|_| err())?,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Lmoments(a) => cmd_lmoments(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Dist(a) => cmd_dist(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn read_sample(args: &InputArgs) -> Result<SortedSample, CliError> {
    Ok(SortedSample::new(input::read_column(&args.input, &args.col)?)?)
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("results serialize to JSON")
}

/// Prints the table or JSON and writes the JSON file when asked.
fn emit<T: Serialize>(value: &T, table: impl FnOnce() -> String, out: &OutputArgs) -> Result<(), CliError> {
    let json = to_json(value);
    if let Some(path) = &out.output {
        write_file(path, &json)?;
    }
    match out.format {
        OutputFormat::Table => print!("{}", table()),
        OutputFormat::Json => println!("{json}"),
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct LmomentsOutput {
    n: usize,
    v: Vec<f64>,
    u: Option<Vec<f64>>,
    /// `(r, τ_r)` from the V-statistics.
    tau_v: Vec<(usize, f64)>,
    tau_u: Option<Vec<(usize, f64)>>,
}

fn cmd_lmoments(args: LmomentsArgs) -> Result<(), CliError> {
    let sample = read_sample(&args.input)?;
    if sample.len() < 2 {
        return Err(CliError::Usage("at least two observations are needed".into()));
    }
    let v = sample_lmoments_v(&sample, args.order)?;
    // the U-statistic of order r needs r observations
    let u = sample_lmoments_u(&sample, args.order.min(sample.len())).ok();
    let ratios = |l: &LmomentVector| lmoment_ratios(l).map(|r| r.tau).unwrap_or_default();
    let result = LmomentsOutput {
        n: sample.len(),
        tau_v: ratios(&v),
        tau_u: u.as_ref().map(ratios),
        v: v.values,
        u: u.map(|u| u.values),
    };
    emit(
        &result,
        || {
            let mut t = Table::new(["r", "l_r (V)", "l_r (U)"]);
            for (i, lv) in result.v.iter().enumerate() {
                let lu = result.u.as_ref().and_then(|u| u.get(i)).map_or("-".into(), |x| sig6(*x));
                t.row([(i + 1).to_string(), sig6(*lv), lu]);
            }
            for &(r, tv) in &result.tau_v {
                let tu = result
                    .tau_u
                    .as_ref()
                    .and_then(|u| u.iter().find(|(o, _)| *o == r))
                    .map_or("-".into(), |(_, x)| sig6(*x));
                t.row([format!("tau_{r}"), sig6(tv), tu]);
            }
            format!("n = {}\n{}", result.n, t.render())
        },
        &args.out,
    )
}

struct Resolved {
    model: SplqModel,
    divergence: Divergence,
    plugin: Plugin,
    options: FitOptions,
}

fn resolve(args: &ModelArgs) -> Result<Resolved, CliError> {
    let file: FitConfig = match &args.config {
        Some(p) => config::load(p)?,
        None => FitConfig::default(),
    };
    let kind = args.model.or(file.model).unwrap_or(ModelKind::GpdL234);
    Ok(Resolved {
        model: SplqModel::new(kind),
        divergence: args.divergence.or(file.divergence).unwrap_or(Divergence::Chi2),
        plugin: args.plugin.map(Plugin::from).or(file.plugin).unwrap_or_default(),
        options: file.options,
    })
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let sample = read_sample(&args.input)?;
    let r = resolve(&args.model)?;
    let classical = |m| {
        if r.model.kind() != ModelKind::GpdL234 {
            return Err(CliError::Usage("classical methods fit the GPD only; use --model gpd-l234".into()));
        }
        Ok(fit_classical(&sample, m)?)
    };
    let mut report = match args.method {
        Method::Divergence => fit_divergence(&sample, &r.model, r.divergence, &r.options)?,
        Method::Wasserstein => fit_wasserstein(&sample, &r.model, &r.options)?,
        Method::Lmom => classical(ClassicalMethod::Lmom)?,
        Method::Moment => classical(ClassicalMethod::Moment)?,
        Method::Mle => classical(ClassicalMethod::Mle)?,
    };
    if args.asymptotics {
        if args.method != Method::Divergence {
            return Err(CliError::Usage("--asymptotics applies to divergence fits only".into()));
        }
        attach_asymptotics(&mut report, &sample, &r.model, r.plugin, &CovarianceQuad::default())?;
    }
    emit(&report, || fit_table(&report), &args.out)
}

fn fit_table(report: &FitReport) -> String {
    let mut out = String::new();
    let mut head = Table::new(["field", "value"]);
    head.row(["model".to_string(), report.model.clone()]);
    head.row(["method".to_string(), report.method.clone()]);
    head.row(["n".to_string(), report.n.to_string()]);
    if let Some(c) = report.criterion {
        head.row(["criterion".to_string(), sig6(c)]);
    }
    if let Some(s) = report.diagnostics.inner_status {
        head.row(["inner status".to_string(), format!("{s:?}")]);
    }
    if let Some(loc) = report.location {
        head.row(["location".to_string(), sig6(loc)]);
    }
    head.row(["outer evals".to_string(), report.diagnostics.outer_evals.to_string()]);
    if report.diagnostics.degenerate {
        head.row(["degenerate".to_string(), "yes".to_string()]);
    }
    out.push_str(&head.render());
    out.push('\n');

    let mut t = Table::new(["parameter", "estimate", "std.err", "boundary"]);
    for (i, name) in report.param_names.iter().enumerate() {
        let se = report
            .covariance
            .as_ref()
            .map_or("-".into(), |c| sig6(c.cov_theta[i][i].max(0.0).sqrt()));
        let pinned = report.diagnostics.boundary.get(i).copied().unwrap_or(false);
        t.row([name.clone(), sig6(report.theta[i]), se, if pinned { "yes" } else { "no" }.into()]);
    }
    out.push_str(&t.render());
    if let Some(test) = &report.test {
        out.push('\n');
        out.push_str(&test_table(test));
    }
    out
}

fn test_table(t: &ConfidenceStat) -> String {
    let mut table = Table::new(["statistic", "value"]);
    table.row(["S_n".to_string(), sig6(t.s_n)]);
    table.row(["df".to_string(), t.df.to_string()]);
    table.row(["rank".to_string(), t.rank.to_string()]);
    table.row(["p-value".to_string(), sig6(t.p_value)]);
    table.row(["pseudo-inverse".to_string(), if t.pseudo_inverse { "yes" } else { "no" }.to_string()]);
    table.render()
}

fn cmd_test(args: TestArgs) -> Result<(), CliError> {
    let sample = read_sample(&args.input)?;
    let r = resolve(&args.model)?;
    let mut report = fit_divergence(&sample, &r.model, r.divergence, &r.options)?;
    attach_asymptotics(&mut report, &sample, &r.model, r.plugin, &CovarianceQuad::default())?;
    let test = report.test.expect("asymptotics attach the statistic");
    emit(&test, || test_table(&test), &args.out)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg: SimulateConfig = config::load(&args.config)?;
    let scenario = cfg.scenario.validate()?;
    let dir = args.out_dir.unwrap_or(cfg.output.dir);
    fs::create_dir_all(&dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;

    let out = run_scenario(&cfg.scenario, &cfg.options)?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    for rec in &out.records {
        csv.serialize(rec).map_err(|e| CliError::Numeric(e.to_string()))?;
    }
    let bytes = csv.into_inner().map_err(|e| CliError::Numeric(e.to_string()))?;
    write_file(&dir.join("replicates.csv"), &String::from_utf8_lossy(&bytes))?;
    write_file(&dir.join("summary.json"), &to_json(&out.summary))?;

    let plot = plot_data(&scenario, &out.summary, cfg.output.plot_points);
    let mut rows = String::from("curve,x,density\n");
    for (i, x) in plot.x.iter().enumerate() {
        rows.push_str(&format!("truth,{x},{}\n", plot.truth[i]));
    }
    for c in &plot.curves {
        for (x, d) in plot.x.iter().zip(&c.density) {
            rows.push_str(&format!("{},{x},{d}\n", c.estimator));
        }
    }
    write_file(&dir.join("plot.csv"), &rows)?;

    match args.format {
        OutputFormat::Table => print!("{}", summary_table(&out.summary)),
        OutputFormat::Json => println!("{}", to_json(&out.summary)),
    }
    Ok(())
}

fn summary_table(s: &SimSummary) -> String {
    let mut t = Table::new(["estimator", "parameter", "mean", "median", "std"]);
    for r in &s.parameters {
        t.row([
            r.estimator.clone(),
            r.parameter.clone(),
            sig6(r.summary.mean),
            sig6(r.summary.median),
            sig6(r.summary.std),
        ]);
    }
    let mut d = Table::new(["estimator", "L1 nominal", "L1 truth", "failures"]);
    for r in &s.distances {
        let failures = s.failures.iter().find(|(e, _)| *e == r.estimator).map_or(0, |f| f.1);
        d.row([r.estimator.clone(), sig6(r.l1.mean), sig6(r.l1_truth.mean), failures.to_string()]);
    }
    format!(
        "scenario {}, n = {}, {} replicates, seed {}\n{}\n{}",
        s.scenario,
        s.n,
        s.replicates,
        s.seed,
        t.render(),
        d.render()
    )
}

#[derive(Serialize)]
struct DistOutput {
    a: LawSpec,
    b: LawSpec,
    l1: f64,
}

fn cmd_dist(args: DistArgs) -> Result<(), CliError> {
    let a = args.a.family.law(args.a.sigma, args.a.nu)?;
    let b = args.b.family.law(args.b.sigma, args.b.nu)?;
    let l1 = l1_density_distance(&a, &b)?;
    match args.format {
        OutputFormat::Table => println!("{}", sig6(l1)),
        OutputFormat::Json => println!(
            "{}",
            to_json(&DistOutput {
                a: args.a,
                b: args.b,
                l1
            })
        ),
    }
    Ok(())
}
