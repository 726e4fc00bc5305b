use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use elastic_pinn::harness::check::{self, CheckOptions};
use elastic_pinn::harness::{self, parse_hidden, ConfigFile, REPORT_FILE};
use elastic_pinn::loss::LossKind;
use elastic_pinn::problems::ProblemName;
use elastic_pinn::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "elastic-pinn", version, about = "Physics-informed neural networks for linear elastostatics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model for one benchmark problem.
    Solve(SolveArgs),
    /// Run the finite-difference and closed-form verification suites.
    Check(CheckArgs),
}

fn hidden_list(s: &str) -> Result<Vec<usize>, String> {
    parse_hidden(s).ok_or_else(|| format!("expected comma-separated widths, got `{s}`"))
}

#[derive(Args)]
struct SolveArgs {
    /// rod1d, plate2d, plate2d-patch, cube3d or cube3d-patch.
    #[arg(long)]
    problem: Option<ProblemName>,
    /// collocation or energy.
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Directory for fields.csv, report.json and model.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Hidden layer widths, e.g. 20,20,20.
    #[arg(long, value_parser = hidden_list)]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    threads: Option<usize>,
    /// Sample points per axis.
    #[arg(long)]
    resolution: Option<usize>,
    /// One network for all displacement components.
    #[arg(long)]
    shared_network: bool,
    /// Progress line period in iterations (0 for none).
    #[arg(long)]
    log_every: Option<usize>,
    /// Stop when the gradient's largest component falls to this.
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Stop when several consecutive steps change the loss by less than this
    /// relative amount.
    #[arg(long)]
    rel_loss_tol: Option<f64>,
    /// Key-value settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl SolveArgs {
    fn to_config(&self) -> ConfigFile {
        ConfigFile {
            problem: self.problem,
            loss: self.loss,
            seed: self.seed,
            max_iter: self.max_iter,
            out: self.out.clone(),
            hidden: self.hidden.clone(),
            threads: self.threads,
            resolution: self.resolution,
            shared_network: self.shared_network.then_some(true),
            log_every: self.log_every,
            grad_tol: self.grad_tol,
            rel_loss_tol: self.rel_loss_tol,
        }
    }
}

#[derive(Args)]
struct CheckArgs {
    /// Random networks per topology.
    #[arg(long, default_value_t = CheckOptions::default().networks)]
    networks: usize,
    #[arg(long, default_value_t = CheckOptions::default().seed)]
    seed: u64,
}

fn solve(args: &SolveArgs) -> anyhow::Result<ExitCode> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => ConfigFile::default(),
    };
    let config = file.merge(args.to_config()).to_run_config()?;
    match harness::run(&config) {
        Ok(outcome) => {
            let r = &outcome.report;
            println!("problem      {}", r.problem);
            println!("loss         {}", r.loss);
            println!("seed         {}", r.seed);
            println!("iterations   {} ({:?})", r.iterations, r.converged_by);
            println!("final loss   {:.10e}", r.final_loss);
            println!("train time   {:.3} s", r.wall_time_s);
            for (field, v) in &r.rms {
                println!("rms {:<8} {:.3e}", field, v);
            }
            if let Some(dir) = &config.output_dir {
                println!("written to   {}", dir.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(Error::Diverged { iteration }) => {
            eprintln!("error: training diverged at iteration {iteration}");
            if let Some(dir) = &config.output_dir {
                eprintln!("diagnostic report: {}", dir.join(REPORT_FILE).display());
            }
            Ok(ExitCode::from(EXIT_DIVERGED))
        }
        Err(e) => Err(e.into()),
    }
}

fn run_checks(args: &CheckArgs) -> anyhow::Result<ExitCode> {
    let opts = CheckOptions {
        networks: args.networks,
        seed: args.seed,
        ..Default::default()
    };
    let results = check::run_all(&opts)?;
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("{} checks, {} failed", results.len(), failed);
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match &cli.command {
        Command::Solve(args) => solve(args),
        Command::Check(args) => run_checks(args),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_FAILURE)
    })
}
