//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
//! failures while running.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use crate::agent::{A2cAgent, GainTuner};
use crate::harness::{
    evaluate_baseline, evaluate_held_out, export_results, fit_coefficients, read_steps_csv, replot,
    run_experiment, sample_apples, write_coefficients_csv, ExperimentPlan, ExperimentSpec, FourWayTable,
    HarnessError, HeldOutReport, Joint, Scale, SimulatedArm, TEST_APPLE_STREAM, TRAIN_APPLE_STREAM,
};
use crate::neuralnet::{agent_layers, load_checkpoint, Mlp};
use crate::numfmt::sig9;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "pid-a2c", version, about = "Actor-critic PID gain tuning for a simulated two-link arm")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an agent and write the run directory.
    Train(RunArgs),
    /// Evaluate the hand-tuned baseline gains.
    Baseline(BaselineArgs),
    /// Evaluate a trained actor on freshly sampled held-out apples.
    Test(TestArgs),
    /// Fit reward-on-gain regression coefficients from stored records.
    Coeffs(CoeffsArgs),
    /// Regenerate the SVG charts of a run directory.
    Replot(ReplotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    Desk,
    Paper,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Paper => Scale::Paper,
        }
    }
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the step-count preset in the config.
    #[arg(long, value_enum)]
    pub scale: Option<ScaleArg>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Output directory; must not exist or be empty.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Directory for `baseline.json`; stdout only when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Directory for `test.csv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the held-out set; defaults to the run's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of held-out apples; defaults to the run's test count.
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CoeffsArgs {
    /// Run directory to analyse.
    #[arg(long)]
    pub run: PathBuf,
    /// Directory for `coefficients.csv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Single-actuator J1 run, for the four-way table.
    #[arg(long, requires = "j2_run")]
    pub j1_run: Option<PathBuf>,
    /// Single-actuator J2 run, for the four-way table.
    #[arg(long, requires = "j1_run")]
    pub j2_run: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplotArgs {
    #[arg(long)]
    pub run: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Plant(_) => Failure::Usage(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Baseline(a) => cmd_baseline(&a),
        Command::Test(a) => cmd_test(&a),
        Command::Coeffs(a) => cmd_coeffs(&a),
        Command::Replot(a) => replot(&a.run).map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn load_plan(args: &SpecArgs) -> Result<ExperimentPlan, Failure> {
    let mut spec = ExperimentSpec::load(&args.config)
        .map_err(|e| Failure::Usage(anyhow!(e).context("cannot read config")))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(scale) = args.scale {
        spec.scale = scale.into();
    }
    spec.resolve().map_err(|e| Failure::Usage(e.into()))
}

fn ensure_empty_dir(dir: &Path) -> Result<(), Failure> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir)
            .with_context(|| format!("{} is not a readable directory", dir.display()))
            .map_err(Failure::Usage)?;
        if entries.next().is_some() {
            return Err(Failure::Usage(anyhow!(
                "output directory {} is not empty",
                dir.display()
            )));
        }
    }
    Ok(())
}

fn ensure_separate(run: &Path, out: &Path) -> Result<(), Failure> {
    let same = match (run.canonicalize(), out.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if same {
        return Err(Failure::Usage(anyhow!("--out must differ from the run directory")));
    }
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(runtime)
}

fn cmd_train(args: &RunArgs) -> Result<(), Failure> {
    let plan = load_plan(&args.spec)?;
    ensure_empty_dir(&args.out)?;
    info!(
        "training {:?} for {} steps (seed {})",
        plan.mode,
        plan.learning_steps,
        plan.seed()
    );
    let artifact = run_experiment(&plan)?;
    export_results(&args.out, &artifact)?;
    let learned: Vec<f64> = artifact.learning_records().map(|r| r.reward).collect();
    let tail = &learned[learned.len() - (learned.len() / 10).max(1).min(learned.len())..];
    println!(
        "steps {}  baseline {}  final-10% mean reward {}",
        learned.len(),
        sig9(artifact.baseline.mean),
        sig9(tail.iter().sum::<f64>() / tail.len().max(1) as f64)
    );
    if let Some(step) = artifact.aborted {
        return Err(runtime(anyhow!(
            "training stopped after a double fault at step {step}; partial results written"
        )));
    }
    Ok(())
}

fn cmd_baseline(args: &BaselineArgs) -> Result<(), Failure> {
    let plan = load_plan(&args.spec)?;
    let apples = if plan.mode.is_multi() {
        let mut rng = crate::harness::seeded_rng(plan.seed(), TRAIN_APPLE_STREAM);
        sample_apples(plan.workspace(), plan.train_apples, &mut rng)
    } else {
        vec![plan.apple]
    };
    let mut arm = SimulatedArm::new(plan.sim().clone())?;
    let stats = evaluate_baseline(&mut arm, &apples, plan.baseline_runs_per_apple())?;
    println!("baseline mean {}  std {}  runs {}", sig9(stats.mean), sig9(stats.std), stats.n);
    if let Some(out) = &args.out {
        fs::create_dir_all(out)
            .with_context(|| format!("cannot create {}", out.display()))
            .map_err(runtime)?;
        let path = out.join("baseline.json");
        let text = serde_json::to_string_pretty(&json!({ "apples": apples, "stats": stats })).map_err(runtime)?;
        fs::write(&path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(runtime)?;
    }
    Ok(())
}

fn read_meta(run: &Path) -> Result<serde_json::Value, Failure> {
    let path = run.join("meta.json");
    let text = fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(runtime)?;
    serde_json::from_str(&text)
        .with_context(|| format!("corrupt {}", path.display()))
        .map_err(runtime)
}

fn run_plan(run: &Path) -> Result<ExperimentPlan, Failure> {
    let meta = read_meta(run)?;
    let spec: ExperimentSpec = serde_json::from_value(meta["plan"]["spec"].clone())
        .with_context(|| format!("{} has no usable plan", run.join("meta.json").display()))
        .map_err(runtime)?;
    spec.resolve().map_err(Failure::from)
}

fn cmd_test(args: &TestArgs) -> Result<(), Failure> {
    let plan = run_plan(&args.run)?;
    ensure_separate(&args.run, &args.out)?;
    let (actor, _) = load_checkpoint(&args.run.join("actor")).map_err(runtime)?;
    let critic = match load_checkpoint(&args.run.join("critic")) {
        Ok((c, _)) => c,
        Err(_) => Mlp::zeros(&agent_layers(1)).map_err(runtime)?,
    };
    let agent = A2cAgent::from_networks(plan.agent.clone(), actor, critic).map_err(runtime)?;
    if agent.n_joints() != plan.tuned_joints.len() {
        return Err(runtime(anyhow!("checkpoint does not match the run's tuned joints")));
    }
    let count = args
        .count
        .unwrap_or(if plan.test_apples > 0 { plan.test_apples } else { 30 });
    let mut rng = crate::harness::seeded_rng(args.seed.unwrap_or(plan.seed()), TEST_APPLE_STREAM);
    let apples = sample_apples(plan.workspace(), count, &mut rng);
    let mut arm = SimulatedArm::new(plan.sim().clone())?;
    let report = evaluate_held_out(&agent, &mut arm, &plan.tuned_joints, &apples)?;
    write_test_csv(&args.out.join("test.csv"), &report)?;
    println!(
        "improved on {} of {} held-out apples ({})",
        report.improved,
        report.rows.len(),
        sig9(report.fraction)
    );
    Ok(())
}

fn write_test_csv(path: &Path, report: &HeldOutReport) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(runtime)?;
    let mut header = vec!["x", "y", "z"];
    header.extend(["j1_kp", "j1_ki", "j1_kd", "j2_kp", "j2_ki", "j2_kd"]);
    header.extend(["reward", "baseline_reward", "crash_reason", "improved"]);
    w.write_record(&header).map_err(runtime)?;
    for r in &report.rows {
        let mut row = vec![sig9(r.apple.x), sig9(r.apple.y), sig9(r.apple.z)];
        for g in &r.gains {
            row.extend(g.as_array().map(sig9));
        }
        row.push(sig9(r.reward));
        row.push(sig9(r.baseline_reward));
        row.push(r.crash.map(|c| c.as_str()).unwrap_or("").to_string());
        row.push(u8::from(r.improved).to_string());
        w.write_record(&row).map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    Ok(())
}

fn tuned_joints(run: &Path) -> Result<Vec<Joint>, Failure> {
    Ok(run_plan(run)?.tuned_joints)
}

fn cmd_coeffs(args: &CoeffsArgs) -> Result<(), Failure> {
    ensure_separate(&args.run, &args.out)?;
    let fit = |run: &Path| -> Result<_, Failure> {
        let records = read_steps_csv(&run.join("steps.csv"))?;
        let joints = tuned_joints(run)?;
        fit_coefficients(&records, &joints).map_err(runtime)
    };
    let report = fit(&args.run)?;
    write_coefficients_csv(&args.out.join("coefficients.csv"), &report)?;
    for (label, table) in [
        ("crashes excluded", &report.crashes_excluded),
        ("crashes included", &report.crashes_included),
    ] {
        println!("{label} (n = {})", table.n);
        for (name, c) in table.names.iter().zip(&table.coefficients) {
            println!("  {name:<6} {}", sig9(*c));
        }
    }
    if let (Some(j1), Some(j2)) = (&args.j1_run, &args.j2_run) {
        let table = FourWayTable::assemble(&report, &fit(j1)?, &fit(j2)?)?;
        let path = args.out.join("coefficients_four_way.csv");
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(runtime)?;
        let panels = table.panels();
        w.write_record([
            "term",
            "together_crashes_excluded",
            "independent_crashes_excluded",
            "together_crashes_included",
            "independent_crashes_included",
        ])
        .map_err(runtime)?;
        for (i, name) in table.names.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend(panels.iter().map(|(_, v)| sig9(v[i])));
            w.write_record(&row).map_err(runtime)?;
        }
        w.flush().map_err(runtime)?;
    }
    Ok(())
}
