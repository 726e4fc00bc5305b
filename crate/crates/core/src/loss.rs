//! Collocation and potential-energy losses.
//!
//! The collocation loss is
//!
//! ```text
//! L = (1/n)   Σ_points   Σ_α (σ_αβ,β + f_α)²
//!   + (1/m_t) Σ_boundary Σ_α (σ_αβ n_β − t̄_α)²
//! ```
//!
//! where the boundary sum runs over every traction patch and only over the
//! components a patch constrains. The energy loss is the total potential
//! energy `Π = ∫ ½ σ:ε dV − ∫_Γt u·t̄ dΓ − ∫ f·u dV` evaluated with the
//! problem's quadrature weights; traction-free faces contribute no work and
//! are skipped.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{
    self, DerivOrder, ParamGradient, Point, PointJet, PointwiseLoss, MAX_DIM,
};
use crate::error::{Error, Result};
use crate::mechanics::{
    self, equilibrium_adjoint, equilibrium_residual, stress_adjoint_to_gradient, Material,
    StressStrainState, Vector,
};
use crate::network::FieldModel;
use crate::problems::{FaceRole, ProblemSpec, SamplePointSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Collocation,
    Energy,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Collocation => "collocation",
            LossKind::Energy => "energy",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "collocation" => Ok(LossKind::Collocation),
            "energy" => Ok(LossKind::Energy),
            other => Err(Error::UnknownLoss(other.to_string())),
        }
    }
}

/// Named parts of a loss value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossBreakdown {
    Collocation {
        total: f64,
        governing_term: f64,
        traction_term: f64,
    },
    Energy {
        total: f64,
        internal_energy: f64,
        external_work: f64,
    },
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        match *self {
            LossBreakdown::Collocation { total, .. } | LossBreakdown::Energy { total, .. } => total,
        }
    }

    /// The two sub-terms in declaration order.
    pub fn terms(&self) -> (f64, f64) {
        match *self {
            LossBreakdown::Collocation {
                governing_term,
                traction_term,
                ..
            } => (governing_term, traction_term),
            LossBreakdown::Energy {
                internal_energy,
                external_work,
                ..
            } => (internal_energy, external_work),
        }
    }
}

/// Boundary points of all patches flattened, with per-point data.
#[derive(Clone, Debug)]
struct BoundaryData {
    points: Vec<Point>,
    weights: Vec<f64>,
    normals: Vec<Vector>,
    targets: Vec<Vector>,
    enforced: Vec<[bool; MAX_DIM]>,
}

impl BoundaryData {
    fn collect(samples: &SamplePointSet, keep: impl Fn(FaceRole) -> bool) -> Self {
        let mut b = BoundaryData {
            points: Vec::new(),
            weights: Vec::new(),
            normals: Vec::new(),
            targets: Vec::new(),
            enforced: Vec::new(),
        };
        for patch in samples.patches.iter().filter(|p| keep(p.role)) {
            for (x, w) in patch.points.iter().zip(&patch.weights) {
                b.points.push(*x);
                b.weights.push(*w);
                b.normals.push(patch.normal);
                b.targets.push(patch.traction.eval(x));
                b.enforced.push(patch.enforced);
            }
        }
        b
    }
}

fn check_samples(samples: &SamplePointSet, material: &Material) -> Result<()> {
    if samples.interior.is_empty() {
        return Err(Error::EmptyInterior);
    }
    let dim = material.dim();
    for patch in &samples.patches {
        let norm = patch.normal[..dim].iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NonUnitNormal { norm });
        }
    }
    Ok(())
}

/// Mean-square residual of equilibrium and traction conditions.
#[derive(Clone, Debug)]
pub struct CollocationLoss {
    material: Material,
    body_force: Vector,
    interior: Vec<Point>,
    boundary: BoundaryData,
}

impl CollocationLoss {
    pub fn new(samples: &SamplePointSet, material: Material, body_force: Vector) -> Result<Self> {
        check_samples(samples, &material)?;
        Ok(CollocationLoss {
            material,
            body_force,
            interior: samples.interior.clone(),
            boundary: BoundaryData::collect(samples, |_| true),
        })
    }

    pub fn for_problem(problem: &ProblemSpec) -> Result<Self> {
        Self::new(&problem.samples, problem.material, problem.body_force)
    }

    fn breakdown(&self, parts: &[f64]) -> LossBreakdown {
        let governing_term = parts[0];
        let traction_term = parts.get(1).copied().unwrap_or(0.0);
        LossBreakdown::Collocation {
            total: governing_term + traction_term,
            governing_term,
            traction_term,
        }
    }
}

impl PointwiseLoss for CollocationLoss {
    fn order(&self) -> DerivOrder {
        DerivOrder::Second
    }

    fn point_sets(&self) -> Vec<&[Point]> {
        vec![&self.interior, &self.boundary.points]
    }

    fn point_term(&self, set: usize, index: usize, jet: &PointJet, adjoint: &mut PointJet) -> f64 {
        let dim = self.material.dim();
        if set == 0 {
            let w = 1.0 / self.interior.len() as f64;
            let r = equilibrium_residual(&jet.d2u, &self.material, &self.body_force);
            let mut r_adj = [0.0; MAX_DIM];
            let mut value = 0.0;
            for a in 0..dim {
                value += r[a] * r[a];
                r_adj[a] = 2.0 * w * r[a];
            }
            equilibrium_adjoint(&r_adj, &self.material, &mut adjoint.d2u);
            w * value
        } else {
            let w = 1.0 / self.boundary.points.len() as f64;
            let b = &self.boundary;
            let (n, target, enforced) = (&b.normals[index], &b.targets[index], &b.enforced[index]);
            let state = StressStrainState::from_gradient(&jet.du, &self.material);
            let t = mechanics::apply(&state.stress, n, dim);
            let mut sigma_adj = [[0.0; MAX_DIM]; MAX_DIM];
            let mut value = 0.0;
            for a in (0..dim).filter(|&a| enforced[a]) {
                let e = t[a] - target[a];
                value += e * e;
                for c in 0..dim {
                    sigma_adj[a][c] = 2.0 * w * e * n[c];
                }
            }
            adjoint.du = stress_adjoint_to_gradient(&sigma_adj, &self.material);
            w * value
        }
    }
}

/// Total potential energy with quadrature weights from the sample set.
#[derive(Clone, Debug)]
pub struct EnergyLoss {
    material: Material,
    body_force: Vector,
    interior: Vec<Point>,
    interior_weights: Vec<f64>,
    loaded: BoundaryData,
}

impl EnergyLoss {
    pub fn new(samples: &SamplePointSet, material: Material, body_force: Vector) -> Result<Self> {
        check_samples(samples, &material)?;
        Ok(EnergyLoss {
            material,
            body_force,
            interior: samples.interior.clone(),
            interior_weights: samples.interior_weights.clone(),
            loaded: BoundaryData::collect(samples, |r| r == FaceRole::Loaded),
        })
    }

    pub fn for_problem(problem: &ProblemSpec) -> Result<Self> {
        Self::new(&problem.samples, problem.material, problem.body_force)
    }

    fn breakdown(&self, parts: &[f64]) -> LossBreakdown {
        // both sets report signed contributions to Π; work enters negatively
        let internal_energy = parts[0];
        let external_work = -parts.get(1).copied().unwrap_or(0.0);
        LossBreakdown::Energy {
            total: internal_energy - external_work,
            internal_energy,
            external_work,
        }
    }
}

impl PointwiseLoss for EnergyLoss {
    fn order(&self) -> DerivOrder {
        DerivOrder::First
    }

    fn point_sets(&self) -> Vec<&[Point]> {
        vec![&self.interior, &self.loaded.points]
    }

    fn point_term(&self, set: usize, index: usize, jet: &PointJet, adjoint: &mut PointJet) -> f64 {
        let dim = self.material.dim();
        if set == 0 {
            let w = self.interior_weights[index];
            let state = StressStrainState::from_gradient(&jet.du, &self.material);
            let mut density = 0.0;
            for a in 0..dim {
                for b in 0..dim {
                    density += 0.5 * state.stress[a][b] * state.strain[a][b];
                    adjoint.du[a][b] = w * state.stress[a][b];
                }
            }
            // body-force work is part of the volume term here so the two
            // point sets stay the two energy parts
            let mut body = 0.0;
            for a in 0..dim {
                body += self.body_force[a] * jet.u[a];
                adjoint.u[a] = -w * self.body_force[a];
            }
            w * (density - body)
        } else {
            let w = self.loaded.weights[index];
            let t = &self.loaded.targets[index];
            let mut work = 0.0;
            for a in 0..dim {
                work += jet.u[a] * t[a];
                adjoint.u[a] = -w * t[a];
            }
            -w * work
        }
    }
}

/// Either loss behind one interface, as selected at run time.
#[derive(Clone, Debug)]
pub enum Loss {
    Collocation(CollocationLoss),
    Energy(EnergyLoss),
}

impl Loss {
    pub fn for_problem(kind: LossKind, problem: &ProblemSpec) -> Result<Self> {
        Ok(match kind {
            LossKind::Collocation => Loss::Collocation(CollocationLoss::for_problem(problem)?),
            LossKind::Energy => Loss::Energy(EnergyLoss::for_problem(problem)?),
        })
    }

    pub fn kind(&self) -> LossKind {
        match self {
            Loss::Collocation(_) => LossKind::Collocation,
            Loss::Energy(_) => LossKind::Energy,
        }
    }

    fn inner(&self) -> &dyn PointwiseLoss {
        match self {
            Loss::Collocation(l) => l,
            Loss::Energy(l) => l,
        }
    }

    /// Loss value with its named parts and the parameter gradient.
    pub fn evaluate_with_gradient(&self, model: &FieldModel) -> (LossBreakdown, ParamGradient) {
        let (parts, grad) = autodiff::loss_parameter_gradient_by_set(model, self.inner());
        (self.breakdown(&parts), grad)
    }

    pub fn evaluate(&self, model: &FieldModel) -> LossBreakdown {
        let parts = autodiff::loss_value_by_set(model, self.inner());
        self.breakdown(&parts)
    }

    fn breakdown(&self, parts: &[f64]) -> LossBreakdown {
        match self {
            Loss::Collocation(l) => l.breakdown(parts),
            Loss::Energy(l) => l.breakdown(parts),
        }
    }
}

impl PointwiseLoss for Loss {
    fn order(&self) -> DerivOrder {
        self.inner().order()
    }

    fn point_sets(&self) -> Vec<&[Point]> {
        self.inner().point_sets()
    }

    fn point_term(&self, set: usize, index: usize, jet: &PointJet, adjoint: &mut PointJet) -> f64 {
        self.inner().point_term(set, index, jet, adjoint)
    }
}

/// Collocation loss of `model` on the given samples.
pub fn collocation_loss(
    model: &FieldModel,
    samples: &SamplePointSet,
    material: Material,
    body_force: Vector,
) -> Result<LossBreakdown> {
    let loss = CollocationLoss::new(samples, material, body_force)?;
    Ok(loss.breakdown(&autodiff::loss_value_by_set(model, &loss)))
}

/// Potential-energy loss of `model` on the given samples.
pub fn energy_loss(
    model: &FieldModel,
    samples: &SamplePointSet,
    material: Material,
    body_force: Vector,
) -> Result<LossBreakdown> {
    let loss = EnergyLoss::new(samples, material, body_force)?;
    Ok(loss.breakdown(&autodiff::loss_value_by_set(model, &loss)))
}
