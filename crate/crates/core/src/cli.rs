//! Command-line front end. Every file it writes lives under `--out`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::admm::{AdmmState, IterateRecord};
use crate::bench::{
    checkpoint_hook, compare, evaluate, test_rollouts, train_admm_pb, train_cbf_baseline, Bench, ExperimentConfig,
    IndicatorReport, Method,
};
use crate::error::{Error, Result};
use crate::io::{
    create_csv, load_checkpoint, read_json, read_loss_trace, save_checkpoint, write_iterate_log, write_json,
    write_loss_trace, write_trajectories, CheckpointHeader,
};
use crate::selftest::{gradient_check, projection_check, GradientCheckConfig, ProjectionCheckConfig};
use crate::stable_ops::ThetaVector;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "admmpb", version, about = "Constrained performance boosting with ADMM")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// experiment configuration (JSON); built-in defaults when omitted
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// overrides the seed of the configuration
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// reduced preset: 4 training scenarios, T = 100, 150 ADMM iterations
    #[arg(long, global = true)]
    pub desk_scale: bool,
    /// worker threads for scenario evaluation (default: available cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the operator with ADMM-PB and evaluate it on the test bank
    TrainAdmm {
        /// also save `checkpoint_<j>.bin` every this many iterations
        /// (overrides `admm.checkpoint_every`; 0 disables)
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Train CBF-penalty baselines (the configured sweep unless --omega is given)
    TrainBaseline {
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Evaluate a saved checkpoint on the test bank
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// loss trace CSV used for the total-variation indicator
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Build the indicator table from saved reports
    Compare,
    /// Run the gradient and projection self-checks
    Selftest,
}

/// Parses `argv` and runs the command. Returns the process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return EXIT_OK;
            }
            let rendered = e.render().to_string();
            if !rendered.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return EXIT_USAGE;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            EXIT_RUNTIME
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

/// Configuration after applying the file, the preset and the seed override.
pub fn resolve_config(global: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(path) => read_json::<ExperimentConfig>(path)?,
        None => ExperimentConfig::default(),
    };
    if global.desk_scale {
        cfg = cfg.desk_scale();
    }
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<()> {
    let out = &cli.global.out;
    match &cli.command {
        Command::Selftest => selftest(),
        Command::Compare => {
            let table = compare_reports(out)?;
            print!("{}", table);
            Ok(())
        }
        Command::TrainAdmm { checkpoint_every } => {
            let bench = prepare(&cli.global)?;
            let every = checkpoint_every.unwrap_or(bench.config.admm.checkpoint_every);
            train_admm(&bench, out, every)
        }
        Command::TrainBaseline { omega } => {
            let bench = prepare(&cli.global)?;
            let omegas = match omega {
                Some(w) => vec![*w],
                None => bench.config.baseline.omegas.clone(),
            };
            for w in omegas {
                train_baseline(&bench, out, w)?;
            }
            Ok(())
        }
        Command::Eval { checkpoint, trace } => {
            let bench = prepare(&cli.global)?;
            eval_checkpoint(&bench, out, checkpoint, trace.as_deref())
        }
    }
}

fn prepare(global: &GlobalArgs) -> Result<Bench> {
    let cfg = resolve_config(global)?;
    fs::create_dir_all(&global.out)?;
    write_json(&global.out.join("config.json"), &cfg)?;
    Bench::new(cfg)
}

fn header(bench: &Bench) -> CheckpointHeader {
    let op = &bench.config.operator;
    CheckpointHeader::new(op.dims, op.kappa, op.prescale, bench.config.seed)
}

fn write_run(
    bench: &Bench,
    dir: &Path,
    method: Method<'_>,
    theta: &ThetaVector,
    trace: &[f64],
) -> Result<IndicatorReport> {
    save_checkpoint(&dir.join("checkpoint.bin"), &header(bench), theta)?;
    write_loss_trace(create_csv(&dir.join("loss_trace.csv"))?, trace)?;
    let rollouts = test_rollouts(bench, theta)?;
    write_trajectories(create_csv(&dir.join("test_trajectories.csv"))?, &rollouts, &bench.test)?;
    let report = crate::bench::indicators_from_rollouts(&bench.config, method, &rollouts, trace)?;
    write_json(&dir.join("indicators.json"), &report)?;
    Ok(report)
}

fn summarize(report: &IndicatorReport) {
    eprintln!(
        "{}: dL = {:.6e}, L_LQ = {:.4}, L_ca = {:.4}, V = {:.6}, V*L_LQ = {:.4}",
        report.method, report.delta_loss, report.lq_mean, report.ca_mean, report.violation, report.violation_times_lq
    );
}

fn train_admm(bench: &Bench, out: &Path, checkpoint_every: usize) -> Result<()> {
    let dir = out.join("admm");
    fs::create_dir_all(&dir)?;
    let head = header(bench);
    let mut save =
        |j: usize, theta: &ThetaVector| save_checkpoint(&dir.join(format!("checkpoint_{j}.bin")), &head, theta);
    let mut hook = checkpoint_hook(checkpoint_every, &mut save);
    let mut progress = |state: &AdmmState, rec: &IterateRecord| {
        if rec.j.is_multiple_of(10) {
            eprintln!(
                "j = {:4}  |r| = {:.3e}  |delta| = {:.3e}  rho = {:.3e}  eta = {:.1e}  loss = {:.4}",
                rec.j, rec.norm_r, rec.norm_delta, rec.rho, rec.eta, rec.train_loss
            );
        }
        hook(state, rec)
    };
    let run = train_admm_pb(bench, Some(&mut progress))?;
    write_iterate_log(create_csv(&dir.join("iterates.csv"))?, &run.log)?;
    let method = Method {
        name: "ADMM-PB",
        omega: None,
    };
    let report = write_run(bench, &dir, method, &run.theta, &run.loss_trace)?;
    eprintln!(
        "ADMM-PB finished after {} iterations (converged: {})",
        run.log.len(),
        run.converged
    );
    summarize(&report);
    Ok(())
}

pub fn baseline_dir(out: &Path, omega: f64) -> PathBuf {
    out.join("baseline").join(format!("omega_{omega}"))
}

fn train_baseline(bench: &Bench, out: &Path, omega: f64) -> Result<()> {
    let dir = baseline_dir(out, omega);
    fs::create_dir_all(&dir)?;
    let run = train_cbf_baseline(bench, omega)?;
    let method = Method {
        name: "CBF",
        omega: Some(omega),
    };
    let report = write_run(bench, &dir, method, &run.theta, &run.loss_trace)?;
    summarize(&report);
    Ok(())
}

fn eval_checkpoint(bench: &Bench, out: &Path, checkpoint: &Path, trace: Option<&Path>) -> Result<()> {
    let (head, theta) = load_checkpoint(checkpoint)?;
    let op = &bench.config.operator;
    if head.dims != op.dims || head.kappa != op.kappa || head.prescale != op.prescale {
        return Err(Error::Checkpoint(format!(
            "checkpoint operator (dims {:?}, kappa {}, prescale {}) does not match the configuration",
            head.dims, head.kappa, head.prescale
        )));
    }
    let trace = match trace {
        Some(p) => read_loss_trace(fs::File::open(p)?)?,
        None => Vec::new(),
    };
    let dir = out.join("eval");
    fs::create_dir_all(&dir)?;
    let method = Method {
        name: "eval",
        omega: None,
    };
    let report = evaluate(bench, method, &theta, &trace)?;
    let rollouts = test_rollouts(bench, &theta)?;
    write_trajectories(create_csv(&dir.join("test_trajectories.csv"))?, &rollouts, &bench.test)?;
    write_json(&dir.join("indicators.json"), &report)?;
    summarize(&report);
    Ok(())
}

/// Reads `admm/indicators.json` and every `baseline/omega_*/indicators.json`
/// under `out`, writes `table3.csv` and returns the text rendering.
pub fn compare_reports(out: &Path) -> Result<String> {
    let admm_path = out.join("admm").join("indicators.json");
    let mut missing = Vec::new();
    if !admm_path.is_file() {
        missing.push(admm_path.display().to_string());
    }
    let mut baselines: Vec<IndicatorReport> = Vec::new();
    let base_dir = out.join("baseline");
    if base_dir.is_dir() {
        let mut dirs: Vec<PathBuf> = fs::read_dir(&base_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("indicators.json").is_file())
            .collect();
        dirs.sort();
        for d in dirs {
            baselines.push(read_json(&d.join("indicators.json"))?);
        }
    }
    if baselines.is_empty() {
        missing.push(format!("{}/omega_*/indicators.json", base_dir.display()));
    }
    if !missing.is_empty() {
        return Err(Error::MissingReports(missing.join(", ")));
    }
    baselines.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap_or(std::cmp::Ordering::Equal));
    let admm: IndicatorReport = read_json(&admm_path)?;
    let table = compare(&admm, &baselines)?;
    fs::write(out.join("table3.csv"), table.to_csv()?)?;
    Ok(table.to_text())
}

fn selftest() -> Result<()> {
    let grad_cfg = GradientCheckConfig::default();
    let grad = gradient_check(&grad_cfg)?;
    println!(
        "gradient check: {} instances, {} coordinates, max relative error {:.3e}",
        grad.instances, grad.coordinates_checked, grad.max_relative_error
    );
    let proj = projection_check(&ProjectionCheckConfig::default())?;
    println!(
        "projection check: {} instances, max oracle gap {:.3e}, idempotent {}, max expansion {:.3e}",
        proj.instances, proj.max_oracle_gap, proj.idempotent, proj.max_expansion
    );
    let mut failures = Vec::new();
    if !(grad.max_relative_error < 1e-4) {
        failures.push("gradient check");
    }
    if !(proj.max_oracle_gap <= 2e-3 && proj.idempotent && proj.max_expansion <= 1e-12) {
        failures.push("projection check");
    }
    if failures.is_empty() {
        println!("selftest passed");
        Ok(())
    } else {
        Err(Error::SelfTest(failures.join(", ")))
    }
}
