//! Training runs: build a problem, train its networks, evaluate the fields,
//! score them against the analytic solution and write the results out.
//!
//! A run directory holds three files:
//!
//! - `fields.csv`: one row per sample point, see [`FieldSnapshot`];
//! - `report.json`: a serialized [`TrainReport`];
//! - `model.txt`: the trained networks, readable with
//!   [`deserialize_model`](crate::network::deserialize_model).

pub mod check;
mod config;
mod export;
mod fields;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{parse_hidden, ConfigFile};
pub use export::{export_fields, export_report, read_fields, read_report};
pub use fields::{rms_error, FieldSnapshot};

use crate::error::{Error, Result};
use crate::loss::{Loss, LossBreakdown, LossKind};
use crate::network::{serialize_model, FieldModel};
use crate::optimizer::{minimize_with_callback, ConvergedBy, Evaluation, HistoryEntry, Objective, OptOptions};
use crate::problems::{ProblemName, ProblemSpec};

pub const FIELDS_FILE: &str = "fields.csv";
pub const REPORT_FILE: &str = "report.json";
pub const MODEL_FILE: &str = "model.txt";

/// Relative loss change that ends an energy run: `10⁷·ε`, the customary
/// L-BFGS-B default. The node-sampled potential energy is unbounded below,
/// so driving it further lets the network exploit the quadrature.
pub const ENERGY_REL_LOSS_TOL: f64 = 1e7 * f64::EPSILON;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemName,
    pub loss: LossKind,
    pub seed: u64,
    /// Replaces the problem's hidden layer widths.
    pub hidden_layers: Option<Vec<usize>>,
    /// Replaces the problem's sample grid resolution.
    pub points_per_axis: Option<usize>,
    pub shared_network: bool,
    pub optimizer: OptOptions,
    pub output_dir: Option<PathBuf>,
    /// Worker threads for loss evaluation. Results do not depend on it.
    pub threads: usize,
}

impl RunConfig {
    /// Default settings; energy runs use [`ENERGY_REL_LOSS_TOL`].
    pub fn new(problem: ProblemName, loss: LossKind) -> Self {
        let mut optimizer = OptOptions::default();
        if loss == LossKind::Energy {
            optimizer.rel_loss_tol = ENERGY_REL_LOSS_TOL;
        }
        RunConfig {
            problem,
            loss,
            seed: 0,
            hidden_layers: None,
            points_per_axis: None,
            shared_network: false,
            optimizer,
            output_dir: None,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        if let Some(h) = &self.hidden_layers {
            if h.is_empty() || h.contains(&0) {
                return Err(Error::InvalidConfig(format!("bad hidden layer widths {h:?}")));
            }
        }
        Ok(())
    }

    /// The problem with this run's overrides applied.
    pub fn build_problem(&self) -> Result<ProblemSpec> {
        let mut problem = self.problem.build_with_resolution(self.points_per_axis)?;
        if let Some(h) = &self.hidden_layers {
            problem.hidden_layers = h.clone();
        }
        problem.shared_network = self.shared_network;
        Ok(problem)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub problem: String,
    pub loss: LossKind,
    pub seed: u64,
    pub points_per_axis: usize,
    pub sample_points: usize,
    pub hidden_layers: Vec<usize>,
    pub networks: usize,
    pub parameters: usize,
    pub iterations: usize,
    pub function_evals: usize,
    pub converged_by: ConvergedBy,
    pub diverged: bool,
    pub final_loss: f64,
    pub final_terms: LossBreakdown,
    pub grad_inf_norm: f64,
    /// Seconds spent in the training loop only.
    pub wall_time_s: f64,
    /// RMS error per field column, for fields whose exact values are not
    /// identically zero. Empty when the problem has no closed-form solution.
    pub rms: BTreeMap<String, f64>,
    /// Starting point, then one entry per accepted step.
    pub loss_history: Vec<HistoryEntry<LossBreakdown>>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: TrainReport,
    pub snapshot: FieldSnapshot,
    pub model: FieldModel,
    pub problem: ProblemSpec,
}

struct TrainingObjective<'a> {
    model: &'a mut FieldModel,
    loss: &'a Loss,
}

impl Objective for TrainingObjective<'_> {
    type Terms = LossBreakdown;

    fn evaluate(&mut self, x: &[f64]) -> Evaluation<LossBreakdown> {
        self.model
            .set_params(x)
            .expect("optimizer keeps the parameter count");
        let (terms, grad) = self.loss.evaluate_with_gradient(self.model);
        Evaluation {
            value: terms.total(),
            gradient: grad.into_inner(),
            terms,
        }
    }
}

/// RMS error of every field column against the analytic solution.
pub fn rms_against(truth: &FieldSnapshot, pred: &FieldSnapshot) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for name in truth.columns().into_iter().skip(truth.dim) {
        let t = truth.field(&name).expect("column exists");
        let p = pred
            .field(&name)
            .ok_or_else(|| Error::InvalidConfig(format!("missing field {name}")))?;
        match rms_error(&t, &p) {
            Ok(v) => {
                out.insert(name, v);
            }
            Err(Error::ZeroNormalizer) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Trains one configuration end to end and writes its outputs when
/// `config.output_dir` is set.
///
/// A run whose loss becomes non-finite still writes its report, then
/// returns [`Error::Diverged`].
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &RunConfig) -> Result<RunOutcome> {
    let problem = config.build_problem()?;
    let mut model = problem.build_model(config.seed)?;
    let loss = Loss::for_problem(config.loss, &problem)?;
    let x0 = model.params();
    log::info!(
        "{} / {}: {} points, {} networks, {} parameters",
        problem.name,
        config.loss,
        problem.samples.interior.len(),
        model.nets().len(),
        x0.len()
    );

    let start = Instant::now();
    let result = {
        let mut objective = TrainingObjective {
            model: &mut model,
            loss: &loss,
        };
        minimize_with_callback(&mut objective, &x0, &config.optimizer, |p| {
            log::info!(
                "iter {:5}  loss {:.6e}  |grad| {:.3e}  evals {}",
                p.iteration,
                p.value,
                p.grad_inf_norm,
                p.function_evals
            );
        })?
    };
    let wall_time_s = start.elapsed().as_secs_f64();
    model.set_params(&result.x)?;

    let diverged = !result.final_loss.is_finite();
    let snapshot = FieldSnapshot::from_model(&problem, &model);
    let rms = match (&problem.oracle, diverged) {
        (Some(oracle), false) => rms_against(&FieldSnapshot::from_oracle(&problem, oracle), &snapshot)?,
        _ => BTreeMap::new(),
    };
    let report = TrainReport {
        problem: problem.name.to_string(),
        loss: config.loss,
        seed: config.seed,
        points_per_axis: problem.points_per_axis,
        sample_points: problem.samples.interior.len(),
        hidden_layers: problem.hidden_layers.clone(),
        networks: model.nets().len(),
        parameters: model.param_count(),
        iterations: result.iterations,
        function_evals: result.function_evals,
        converged_by: result.converged_by,
        diverged,
        final_loss: result.final_loss,
        final_terms: result.final_terms,
        grad_inf_norm: result.grad_inf_norm,
        wall_time_s,
        rms,
        loss_history: result.history,
    };
    log::info!(
        "finished after {} iterations ({:?}), loss {:.6e}, {:.2} s",
        report.iterations,
        report.converged_by,
        report.final_loss,
        report.wall_time_s
    );

    if let Some(dir) = &config.output_dir {
        write_outputs(dir, &report, &snapshot, &model)?;
    }
    if diverged {
        return Err(Error::Diverged {
            iteration: report.iterations,
        });
    }
    Ok(RunOutcome {
        report,
        snapshot,
        model,
        problem,
    })
}

fn write_outputs(dir: &Path, report: &TrainReport, snapshot: &FieldSnapshot, model: &FieldModel) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if !report.diverged {
        export_fields(snapshot, &dir.join(FIELDS_FILE))?;
        let path = dir.join(MODEL_FILE);
        fs::write(&path, serialize_model(model)).map_err(|e| Error::io(&path, e))?;
    }
    export_report(report, &dir.join(REPORT_FILE))
}
