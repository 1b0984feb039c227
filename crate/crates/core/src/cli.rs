//! Command-line experiment runner.
//!
//! Exit codes: 0 success, 1 invalid config or arguments, 2 divergence,
//! 3 I/O failure, 4 a `check` failed.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::annealing::Method;
use crate::config::{ExperimentConfig, OracleMethod};
use crate::error::{Error, Result};
use crate::experiment::Experiment;
use crate::game::{check_dissimilarity_growth, check_gradients, AggregativeGame, AverageOfAgents, DissimilarityGrowth, GradientReport};
use crate::metrics::{compare_costs, consensus_error, ensemble_run, social_cost_series, TestFunction};
use crate::oracle::{grid_search_social_optimum, multistart_descent, quadratic_nash, GRID_DIM_LIMIT};
use crate::plot::{self, Line};
use crate::schedule::ScheduleSet;
use crate::topology::{check_connected_in_expectation, ConnectivityReport, NetworkModel, CONNECTIVITY_TOL};
use crate::trace::{fingerprint, RunTrace};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGENCE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "coop-anneal", version, about = "Distributed annealing experiments for aggregative games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured method and write trace, metadata and plot data.
    Run(CommonArgs),
    /// Run `method` and `compare_with` on the same game, network and seed.
    Compare(CommonArgs),
    /// Connectivity, gradient, dissimilarity and schedule checks.
    Check(CommonArgs),
    /// Ground-truth social optimum by grid search or multistart descent.
    Oracle(OracleArgs),
    /// Independently seeded replicates with basin and cost statistics.
    Ensemble(EnsembleArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also render SVG charts.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ForceOracle {
    Auto,
    Grid,
    Multistart,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Overrides `oracle.method` from the config.
    #[arg(long, value_enum)]
    pub method: Option<ForceOracle>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Overrides `replicates` from the config.
    #[arg(long)]
    pub replicates: Option<usize>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

/// Parse `args` (program name first) and execute. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: &Command) -> Result<i32> {
    match command {
        Command::Run(args) => cmd_run(args).map(|_| 0),
        Command::Compare(args) => cmd_compare(args).map(|_| 0),
        Command::Check(args) => cmd_check(args).map(|r| if r.passed { 0 } else { EXIT_CHECK_FAILED }),
        Command::Oracle(args) => cmd_oracle(args).map(|_| 0),
        Command::Ensemble(args) => cmd_ensemble(args).map(|_| 0),
    }
}

fn load(args: &CommonArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut config = ExperimentConfig::load(&args.config).map_err(|e| match e {
        Error::Io(io) => Error::config("config", format!("cannot read {}: {io}", args.config.display())),
        other => other,
    })?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&config.output_dir));
    fs::create_dir_all(&out)?;
    Ok((config, out))
}

fn create(dir: &Path, name: &str, written: &mut Vec<String>) -> Result<BufWriter<File>> {
    written.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize, written: &mut Vec<String>) -> Result<()> {
    written.push(name.to_string());
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_svg(dir: &Path, name: &str, svg: String, written: &mut Vec<String>) -> Result<()> {
    written.push(name.to_string());
    fs::write(dir.join(name), svg)?;
    Ok(())
}

fn per_agent_lines(trace: &RunTrace, label: &str, value: impl Fn(&crate::trace::Record, usize) -> f64) -> Vec<Line> {
    (0..trace.n)
        .map(|i| Line {
            label: format!("{label} {i}"),
            points: trace.records.iter().map(|r| (r.k as f64, value(r, i))).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub fingerprint: String,
    pub method: Method,
    pub seed: u64,
    pub horizon: usize,
    pub records: usize,
    pub tail_window: usize,
    pub tail_average: Vec<f64>,
    pub final_x: Vec<f64>,
    pub final_xbar: Vec<f64>,
    pub tail_mean_cost: f64,
    pub consensus_tau: f64,
    pub consensus_first_decade_max: f64,
    pub consensus_last_decade_max: f64,
    pub artifacts: Vec<String>,
}

/// Files written by `run`, relative to the output directory.
pub fn run_artifact_names(fp: &str, svg: bool) -> Vec<String> {
    let mut names: Vec<String> = ["trace.csv", "consensus.csv", "tracking.csv", "trajectories.csv", "cost.csv"]
        .iter()
        .map(|s| format!("run-{fp}-{s}"))
        .collect();
    if svg {
        names.extend(["consensus", "tracking", "trajectories", "cost"].iter().map(|s| format!("run-{fp}-{s}.svg")));
    }
    names.push(format!("run-{fp}-meta.json"));
    names
}

pub fn cmd_run(args: &CommonArgs) -> Result<RunSummary> {
    let (config, out) = load(args)?;
    let exp = Experiment::build(&config)?;
    let trace = exp.run(config.method, config.horizon, config.seed)?;
    let fp = trace.fingerprint.clone();
    let prefix = format!("run-{fp}");
    let mut written = Vec::new();

    trace.write_csv(&exp.game, create(&out, &format!("{prefix}-trace.csv"), &mut written)?)?;
    let consensus = consensus_error(&trace, config.diagnostic_tau)?;
    plot::write_consensus_csv(&consensus, create(&out, &format!("{prefix}-consensus.csv"), &mut written)?)?;
    plot::write_tracking_csv(&trace, create(&out, &format!("{prefix}-tracking.csv"), &mut written)?)?;
    plot::write_trajectories_csv(&trace, create(&out, &format!("{prefix}-trajectories.csv"), &mut written)?)?;
    let costs = social_cost_series(&trace, &exp.game)?;
    plot::write_cost_csv(&costs, create(&out, &format!("{prefix}-cost.csv"), &mut written)?)?;

    if args.svg {
        let d = trace.d;
        let lines = (0..trace.n)
            .map(|i| Line {
                label: format!("agent {i}"),
                points: consensus.ks.iter().zip(&consensus.values).map(|(k, row)| (*k as f64, row[i])).collect(),
            })
            .collect::<Vec<_>>();
        let title = format!("(k+1)^{} |s_i - xbar|", config.diagnostic_tau);
        write_svg(&out, &format!("{prefix}-consensus.svg"), plot::svg_line_chart(&title, "k", "weighted error", &lines), &mut written)?;
        let mut lines = per_agent_lines(&trace, "s", |r, i| r.s[i * d]);
        lines.push(Line {
            label: "xbar".into(),
            points: trace.records.iter().map(|r| (r.k as f64, trace.xbar(r)[0])).collect(),
        });
        write_svg(&out, &format!("{prefix}-tracking.svg"), plot::svg_line_chart("s_i and xbar", "k", "value", &lines), &mut written)?;
        let lines = per_agent_lines(&trace, "x", |r, i| r.x[i * d]);
        write_svg(&out, &format!("{prefix}-trajectories.svg"), plot::svg_line_chart("x_i", "k", "decision", &lines), &mut written)?;
        let lines = [Line {
            label: config.method.to_string(),
            points: costs.iter().map(|(k, c)| (*k as f64, *c)).collect(),
        }];
        write_svg(&out, &format!("{prefix}-cost.svg"), plot::svg_line_chart("social cost", "k", "cost", &lines), &mut written)?;
    }

    let window = trace.tail_window();
    let tail_costs = &costs[costs.len() - window..];
    written.push(format!("{prefix}-meta.json"));
    let summary = RunSummary {
        fingerprint: fp.clone(),
        method: config.method,
        seed: config.seed,
        horizon: config.horizon,
        records: trace.records.len(),
        tail_window: window,
        tail_average: trace.tail_average(window),
        final_x: trace.final_state.x.clone(),
        final_xbar: trace.final_state.xbar(),
        tail_mean_cost: tail_costs.iter().map(|(_, c)| c).sum::<f64>() / window as f64,
        consensus_tau: consensus.tau,
        consensus_first_decade_max: consensus.first_decade_max(),
        consensus_last_decade_max: consensus.last_decade_max(),
        artifacts: written.clone(),
    };
    let meta = json!({ "config": config, "summary": summary });
    let mut scratch = Vec::new();
    write_json(&out, &format!("{prefix}-meta.json"), &meta, &mut scratch)?;

    println!("run {fp}: method {} seed {} horizon {}", config.method, config.seed, config.horizon);
    println!("  tail average  {:?}", summary.tail_average);
    println!("  tail cost     {}", summary.tail_mean_cost);
    println!(
        "  consensus     first-decade max {:.4}, last-decade max {:.4}",
        summary.consensus_first_decade_max, summary.consensus_last_decade_max
    );
    println!("  artifacts in  {}", out.display());
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    pub fingerprint: String,
    pub seed: u64,
    pub report: crate::metrics::CostComparison,
    pub tail_average_a: Vec<f64>,
    pub tail_average_b: Vec<f64>,
    pub artifacts: Vec<String>,
}

pub fn cmd_compare(args: &CommonArgs) -> Result<CompareSummary> {
    let (config, out) = load(args)?;
    let other = config
        .compare_with
        .ok_or_else(|| Error::config("compare_with", "compare needs a second method"))?;
    let exp = Experiment::build(&config)?;
    let a = exp.run(config.method, config.horizon, config.seed)?;
    let b = exp.run(other, config.horizon, config.seed)?;
    let window = a.tail_window();
    let report = compare_costs(&a, &b, &exp.game, window)?;
    let fp = fingerprint(&json!({ "compare": config }));
    let prefix = format!("compare-{fp}");
    let mut written = Vec::new();
    let (ca, cb) = (social_cost_series(&a, &exp.game)?, social_cost_series(&b, &exp.game)?);
    plot::write_compare_cost_csv(&ca, &cb, create(&out, &format!("{prefix}-cost.csv"), &mut written)?)?;
    if args.svg {
        let lines = [(config.method, &ca), (other, &cb)].map(|(m, s)| Line {
            label: m.to_string(),
            points: s.iter().map(|(k, c)| (*k as f64, *c)).collect(),
        });
        write_svg(&out, &format!("{prefix}-cost.svg"), plot::svg_line_chart("social cost", "k", "cost", &lines), &mut written)?;
    }
    written.push(format!("{prefix}.json"));
    let summary = CompareSummary {
        fingerprint: fp,
        seed: config.seed,
        tail_average_a: a.tail_average(window),
        tail_average_b: b.tail_average(window),
        report,
        artifacts: written,
    };
    write_json(&out, &format!("{prefix}.json"), &summary, &mut Vec::new())?;
    let r = &summary.report;
    println!("compare {}: window {} records", summary.fingerprint, r.window);
    println!("  {:<12} mean tail cost {}", r.method_a.to_string(), r.mean_cost_a);
    println!("  {:<12} mean tail cost {}", r.method_b.to_string(), r.mean_cost_b);
    match r.smaller {
        Some(m) => println!("  difference {} ({m} is smaller)", r.difference),
        None => println!("  difference {} (tie)", r.difference),
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleCheck {
    pub passed: bool,
    pub alpha_1: f64,
    pub beta_1: f64,
    pub gamma_1: f64,
    pub beta_cap: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    /// `None` for single-agent games, where connectivity is moot.
    pub connectivity: Option<ConnectivityReport>,
    pub gradients: GradientReport,
    pub dissimilarity: DissimilarityGrowth,
    pub dissimilarity_passed: bool,
    pub schedule: ScheduleCheck,
}

/// Number of random `(x, y)` probes used by the gradient check.
pub const GRADIENT_PROBES: usize = 64;
pub const DISSIMILARITY_SAMPLES: usize = 1000;

/// Schedule sanity: positive constants, positive and non-increasing
/// sequences from `k_guard` on, and `β^1` within the contraction cap.
pub fn check_schedule(sched: &ScheduleSet) -> ScheduleCheck {
    let mut problems = Vec::new();
    if let Err(e) = sched.validate() {
        problems.push(e.to_string());
    }
    let start = sched.k_guard.max(1);
    for k in start..start + 2000 {
        let (a0, b0, g0) = (sched.alpha(k), sched.beta(k), sched.gamma(k));
        let (a1, b1, g1) = (sched.alpha(k + 1), sched.beta(k + 1), sched.gamma(k + 1));
        if !(a0 > 0.0 && b0 > 0.0 && g0 > 0.0) || a1 > a0 || b1 > b0 || g1 > g0 {
            problems.push(format!("sequences not positive and non-increasing at k = {k}"));
            break;
        }
    }
    if let Some(cap) = sched.beta_cap {
        if sched.beta(1) > cap {
            problems.push(format!("beta(1) = {} exceeds the cap {cap}", sched.beta(1)));
        }
    }
    ScheduleCheck {
        passed: problems.is_empty(),
        alpha_1: sched.alpha(1),
        beta_1: sched.beta(1),
        gamma_1: sched.gamma(1),
        beta_cap: sched.beta_cap,
        message: if problems.is_empty() { "ok".into() } else { problems.join("; ") },
    }
}

/// All standing-assumption checks for one game/network/schedule triple.
/// Gradient probes and dissimilarity samples are drawn inside `init_box`.
pub fn run_checks<G: AggregativeGame + ?Sized>(
    game: &G,
    network: &NetworkModel,
    sched: &ScheduleSet,
    init_box: (f64, f64),
    seed: u64,
) -> Result<CheckReport> {
    let connectivity = if game.agents() >= 2 {
        Some(check_connected_in_expectation(network, CONNECTIVITY_TOL)?)
    } else {
        None
    };
    let d = game.dim();
    let (lo, hi) = init_box;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<f64> { (0..d).map(|_| if lo < hi { rng.random_range(lo..hi) } else { lo }).collect() };
    let probes: Vec<(Vec<f64>, Vec<f64>)> = (0..GRADIENT_PROBES).map(|_| (draw(), draw())).collect();
    let gradients = check_gradients(game, &probes);
    let radius = lo.abs().max(hi.abs()).max(1.0) * ((2 * d) as f64).sqrt();
    let dissimilarity = check_dissimilarity_growth(
        game,
        &AverageOfAgents(game),
        DISSIMILARITY_SAMPLES,
        (radius, 4.0 * radius),
        seed,
    )?;
    let dissimilarity_passed = !dissimilarity.small.unbounded_suspect && dissimilarity.small.max_sup().is_finite();
    let schedule = check_schedule(sched);
    let passed = connectivity.as_ref().is_none_or(|c| c.passed) && gradients.passed() && dissimilarity_passed && schedule.passed;
    Ok(CheckReport {
        passed,
        connectivity,
        gradients,
        dissimilarity,
        dissimilarity_passed,
        schedule,
    })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn cmd_check(args: &CommonArgs) -> Result<CheckReport> {
    let (config, out) = load(args)?;
    let exp = Experiment::build(&config)?;
    let report = run_checks(&exp.game, &exp.network, &exp.schedule, config.init_box(), config.seed)?;
    let fp = fingerprint(&json!({ "check": config }));
    write_json(&out, &format!("check-{fp}.json"), &report, &mut Vec::new())?;
    match &report.connectivity {
        Some(c) => println!("{} connectivity     lambda2(mean L) = {:.6} (tol {})", verdict(c.passed), c.lambda2_bar, c.tol),
        None => println!("SKIP connectivity     single agent"),
    }
    let g = &report.gradients;
    println!(
        "{} gradients        max relative error {:.3e} over {} probes",
        verdict(g.passed()),
        g.max_rel_error,
        g.probes
    );
    let ds = &report.dissimilarity;
    println!(
        "{} dissimilarity    sup {:.4} at radius {:.2}; sup {:.4} at radius {:.2}{}",
        verdict(report.dissimilarity_passed),
        ds.small.max_sup(),
        ds.small.radius,
        ds.large.max_sup(),
        ds.large.radius,
        if ds.flagged { " (grows with radius: bounded only on bounded sets)" } else { "" }
    );
    println!("{} schedule         {}", verdict(report.schedule.passed), report.schedule.message);
    println!("{} overall", verdict(report.passed));
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    pub fingerprint: String,
    pub game: crate::config::GameSpec,
    pub search_box: (f64, f64),
    pub result: crate::oracle::OracleResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nash: Option<Vec<f64>>,
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<OracleSummary> {
    let (config, out) = load(&args.common)?;
    let exp = Experiment::build(&config)?;
    let spec = &config.oracle;
    let bounds = spec.search_box.unwrap_or_else(|| config.init_box());
    let method = match args.method {
        Some(ForceOracle::Auto) => OracleMethod::Auto,
        Some(ForceOracle::Grid) => OracleMethod::Grid,
        Some(ForceOracle::Multistart) => OracleMethod::Multistart,
        None => spec.method,
    };
    let joint = exp.game.agents() * exp.game.dim();
    let result = match method {
        OracleMethod::Grid => grid_search_social_optimum(&exp.game, bounds, spec.resolution)?,
        OracleMethod::Auto if joint <= GRID_DIM_LIMIT => grid_search_social_optimum(&exp.game, bounds, spec.resolution)?,
        _ => multistart_descent(&exp.game, bounds, spec.starts, spec.budget, spec.seed)?,
    };
    let nash = match &exp.game {
        crate::experiment::BuiltGame::Quadratic(q) => Some(quadratic_nash(q)),
        _ => None,
    };
    let fp = fingerprint(&json!({ "oracle": config, "method": format!("{method:?}") }));
    let summary = OracleSummary {
        fingerprint: fp.clone(),
        game: config.game.clone(),
        search_box: bounds,
        result,
        nash,
    };
    write_json(&out, &format!("oracle-{fp}.json"), &summary, &mut Vec::new())?;
    println!("oracle {fp}: {}", summary.result.provenance);
    println!("  point {:?}", summary.result.point);
    println!("  value {}", summary.result.value);
    if let Some(ne) = &summary.nash {
        println!("  nash  {ne:?}");
    }
    Ok(summary)
}

pub fn cmd_ensemble(args: &EnsembleArgs) -> Result<crate::metrics::EnsembleStats> {
    let (config, out) = load(&args.common)?;
    let replicates = args.replicates.unwrap_or(config.replicates);
    let tests: Vec<TestFunction> = config
        .ensemble
        .iter()
        .map(|e| TestFunction::ball_indicator(e.reference.clone(), e.radius))
        .collect();
    let stats = ensemble_run(&config, replicates, &tests)?;
    let fp = fingerprint(&json!({ "ensemble": config, "replicates": replicates }));
    let mut written = Vec::new();
    {
        use std::io::Write;
        let mut f = create(&out, &format!("ensemble-{fp}-tails.csv"), &mut written)?;
        writeln!(f, "replicate,seed,tail_average,endpoint")?;
        let completed: Vec<u64> = stats
            .seeds
            .iter()
            .copied()
            .filter(|s| !stats.failures.iter().any(|f| f.seed == *s))
            .collect();
        for ((seed, tail), end) in completed.iter().zip(&stats.tail_averages).zip(&stats.endpoints) {
            let r = stats.seeds.iter().position(|s| s == seed).unwrap_or(0);
            writeln!(f, "{r},{seed},{},{}", crate::trace::join(tail), crate::trace::join(end))?;
        }
    }
    write_json(&out, &format!("ensemble-{fp}.json"), &json!({ "config": config, "stats": stats }), &mut written)?;
    println!("ensemble {fp}: {} of {} replicates completed", stats.completed, stats.replicates);
    for f in &stats.failures {
        println!("  replicate {} (seed {}) failed: {}", f.replicate, f.seed, f.error);
    }
    if let Some(frac) = stats.basin_fraction {
        println!("  basin fraction {frac}");
    }
    println!("  mean tail cost {}", stats.mean_tail_cost);
    Ok(stats)
}
