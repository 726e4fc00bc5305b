//! Finite-difference and closed-form cross-checks.
//!
//! Every derivative the solver computes is compared with a central finite
//! difference, Richardson-extrapolated over steps `h` and `h/2`, evaluated
//! through an independent code path:
//!
//! - input derivatives: first derivatives against differences of
//!   [`FieldModel::forward`], second derivatives against differences of the
//!   first-derivative jets;
//! - loss parameter gradients against differences of the loss value;
//! - the equilibrium residual against differences of the stress field;
//! - closed-form solutions against equilibrium, traction and support
//!   conditions.
//!
//! A comparison counts when either side exceeds [`MAGNITUDE_FLOOR`] in
//! absolute value; its error is `|a − b| / max(|a|, |b|)`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{eval_jets, DerivOrder, Point, MAX_DIM};
use crate::error::Result;
use crate::loss::{Loss, LossKind};
use crate::mechanics::{equilibrium_residual, traction, StressStrainState, Tensor2};
use crate::network::{derive_seed, FieldModel};
use crate::problems::{FaceRole, ProblemName, ProblemSpec};

pub const MAGNITUDE_FLOOR: f64 = 1e-8;
pub const DERIVATIVE_TOL: f64 = 1e-5;
pub const ORACLE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOptions {
    /// Random networks per topology.
    pub networks: usize,
    /// Random points per network.
    pub points: usize,
    /// Parameter components differenced per network; all when larger than
    /// the parameter count.
    pub parameters: usize,
    /// Grid resolution of the problems used for loss gradients.
    pub resolution: usize,
    pub seed: u64,
    /// Finite-difference step for inputs and parameters.
    pub step: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            networks: 20,
            points: 4,
            parameters: 32,
            resolution: 5,
            seed: 2024,
            step: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub comparisons: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn new(name: String, tolerance: f64) -> Self {
        CheckResult {
            name,
            comparisons: 0,
            max_error: 0.0,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.comparisons > 0 && self.max_error <= self.tolerance
    }

    fn relative(&mut self, a: f64, b: f64) {
        let scale = a.abs().max(b.abs());
        if scale > MAGNITUDE_FLOOR {
            self.comparisons += 1;
            let err = (a - b).abs() / scale;
            self.max_error = if err.is_nan() { f64::INFINITY } else { self.max_error.max(err) };
        }
    }

    fn absolute(&mut self, v: f64) {
        self.comparisons += 1;
        self.max_error = if v.is_nan() { f64::INFINITY } else { self.max_error.max(v.abs()) };
    }
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<44} {:>6} comparisons, max error {:.2e} (tol {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.comparisons,
            self.max_error,
            self.tolerance
        )
    }
}

/// Richardson-extrapolated central difference of `f` at step `h`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, h: f64) -> f64 {
    let d = |f: &mut dyn FnMut(f64) -> f64, h: f64| (f(h) - f(-h)) / (2.0 * h);
    let coarse = d(&mut f, h);
    let fine = d(&mut f, 0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// Topologies whose networks differ: one per dimension.
pub const TOPOLOGIES: [ProblemName; 3] = [ProblemName::Rod1d, ProblemName::Plate2d, ProblemName::Cube3d];

fn random_point(rng: &mut impl Rng, dim: usize) -> Point {
    let mut p = [0.0; MAX_DIM];
    for v in p.iter_mut().take(dim) {
        *v = rng.random::<f64>();
    }
    p
}

fn shifted(x: &Point, axis: usize, t: f64) -> Point {
    let mut y = *x;
    y[axis] += t;
    y
}

/// Input first and second derivatives of random models with the problem's
/// topology and hard boundary conditions.
pub fn input_derivatives(name: ProblemName, opts: &CheckOptions) -> Result<CheckResult> {
    let problem = name.build_with_resolution(Some(2))?;
    let dim = problem.dim;
    let mut res = CheckResult::new(format!("input derivatives ({name})"), DERIVATIVE_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 1));
    for k in 0..opts.networks {
        let model = problem.build_model(derive_seed(opts.seed, 100 + k as u64))?;
        let points: Vec<Point> = (0..opts.points).map(|_| random_point(&mut rng, dim)).collect();
        let jets = eval_jets(&model, &points, DerivOrder::Second);
        for (x, jet) in points.iter().zip(&jets) {
            let u = model.forward(&x[..dim])?;
            for a in 0..dim {
                res.relative(jet.u[a], u[a]);
            }
            for b in 0..dim {
                for a in 0..dim {
                    let fd = central_difference(
                        |t| model.forward(&shifted(x, b, t)[..dim]).expect("valid input")[a],
                        opts.step,
                    );
                    res.relative(jet.du[a][b], fd);
                    for c in 0..dim {
                        let fd = central_difference(
                            |t| eval_jets(&model, &[shifted(x, c, t)], DerivOrder::First)[0].du[a][b],
                            opts.step,
                        );
                        res.relative(jet.d2u[a][b][c], fd);
                    }
                }
            }
        }
    }
    Ok(res)
}

/// Loss parameter gradients of random models on a coarse grid.
pub fn parameter_gradients(name: ProblemName, kind: LossKind, opts: &CheckOptions) -> Result<CheckResult> {
    let problem = name.build_with_resolution(Some(opts.resolution))?;
    let loss = Loss::for_problem(kind, &problem)?;
    let mut res = CheckResult::new(format!("{kind} parameter gradient ({name})"), DERIVATIVE_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 2));
    for k in 0..opts.networks {
        let mut model = problem.build_model(derive_seed(opts.seed, 200 + k as u64))?;
        let (_, grad) = loss.evaluate_with_gradient(&model);
        let theta = model.params();
        let n = theta.len();
        let chosen: Vec<usize> = if opts.parameters >= n {
            (0..n).collect()
        } else {
            sample(&mut rng, n, opts.parameters).into_vec()
        };
        for i in chosen {
            let fd = central_difference(
                |t| {
                    let mut p = theta.clone();
                    p[i] += t;
                    model.set_params(&p).expect("same length");
                    loss.evaluate(&model).total()
                },
                opts.step,
            );
            res.relative(grad.as_slice()[i], fd);
        }
        model.set_params(&theta)?;
    }
    Ok(res)
}

fn stress_at(model: &FieldModel, problem: &ProblemSpec, x: &Point) -> Tensor2 {
    let jet = &eval_jets(model, std::slice::from_ref(x), DerivOrder::First)[0];
    StressStrainState::from_gradient(&jet.du, &problem.material).stress
}

/// The equilibrium residual of random models against the divergence of
/// their stress field taken by differences.
pub fn equilibrium_residuals(name: ProblemName, opts: &CheckOptions) -> Result<CheckResult> {
    let problem = name.build_with_resolution(Some(2))?;
    let dim = problem.dim;
    let mut res = CheckResult::new(format!("equilibrium residual ({name})"), DERIVATIVE_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 3));
    for k in 0..opts.networks {
        let model = problem.build_model(derive_seed(opts.seed, 300 + k as u64))?;
        for _ in 0..opts.points {
            let x = random_point(&mut rng, dim);
            let jet = &eval_jets(&model, &[x], DerivOrder::Second)[0];
            let r = equilibrium_residual(&jet.d2u, &problem.material, &problem.body_force);
            for a in 0..dim {
                let mut div = problem.body_force[a];
                for b in 0..dim {
                    div += central_difference(|t| stress_at(&model, &problem, &shifted(&x, b, t))[a][b], opts.step);
                }
                res.relative(r[a], div);
            }
        }
    }
    Ok(res)
}

/// Equilibrium, traction and support conditions of a closed-form solution
/// at random points. `None` when the problem has no closed form.
pub fn oracle_consistency(name: ProblemName, opts: &CheckOptions) -> Result<Option<CheckResult>> {
    let problem = name.build_with_resolution(Some(3))?;
    let Some(oracle) = problem.oracle else {
        return Ok(None);
    };
    let dim = problem.dim;
    let mat = &problem.material;
    let mut res = CheckResult::new(format!("closed-form solution ({name})"), ORACLE_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 4));
    let h = 0.1;
    for _ in 0..100 {
        let x = random_point(&mut rng, dim);
        // Second derivatives by differences of the displacement itself.
        let mut d2u = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
        for b in 0..dim {
            for c in 0..dim {
                let u = |sb: f64, sc: f64| oracle.displacement(&shifted(&shifted(&x, b, sb * h), c, sc * h));
                let (pp, pm, mp, mm) = (u(1.0, 1.0), u(1.0, -1.0), u(-1.0, 1.0), u(-1.0, -1.0));
                for a in 0..dim {
                    d2u[a][b][c] = (pp[a] - pm[a] - mp[a] + mm[a]) / (4.0 * h * h);
                }
            }
        }
        let r = equilibrium_residual(&d2u, mat, &problem.body_force);
        let sigma = StressStrainState::from_gradient(&oracle.displacement_gradient(), mat).stress;
        let given = oracle.stress(&x);
        for a in 0..dim {
            res.absolute(r[a]);
            for b in 0..dim {
                res.absolute(sigma[a][b] - given[a][b]);
            }
        }
        for patch in &problem.samples.patches {
            let axis = (0..dim).find(|&a| patch.normal[a] != 0.0).expect("axis-aligned face");
            let mut y = random_point(&mut rng, dim);
            y[axis] = if patch.normal[axis] > 0.0 { 1.0 } else { 0.0 };
            let u = oracle.displacement(&y);
            match patch.role {
                FaceRole::Clamped => (0..dim).for_each(|a| res.absolute(u[a])),
                FaceRole::Symmetry { axis } => res.absolute(u[axis]),
                _ => {}
            }
            let t = traction(&sigma, &patch.normal, dim)?;
            let target = patch.traction.eval(&y);
            for a in (0..dim).filter(|&a| patch.enforced[a]) {
                res.absolute(t[a] - target[a]);
            }
        }
    }
    Ok(Some(res))
}

/// Every check, in a fixed order.
pub fn run_all(opts: &CheckOptions) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for name in TOPOLOGIES {
        out.push(input_derivatives(name, opts)?);
    }
    for name in TOPOLOGIES {
        for kind in [LossKind::Collocation, LossKind::Energy] {
            out.push(parameter_gradients(name, kind, opts)?);
        }
    }
    for name in TOPOLOGIES {
        out.push(equilibrium_residuals(name, opts)?);
    }
    for name in ProblemName::ALL {
        if let Some(r) = oracle_consistency(name, opts)? {
            out.push(r);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_is_fourth_order() {
        let d = central_difference(|t| (1.0 + t).exp(), 0.1);
        assert!((d - 1f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn comparisons_below_the_floor_are_skipped() {
        let mut r = CheckResult::new("x".into(), 1e-5);
        r.relative(1e-10, 2e-10);
        assert_eq!(r.comparisons, 0);
        assert!(!r.passed());
        r.relative(1.0, 1.0 + 1e-7);
        assert!(r.passed());
        r.relative(1.0, f64::NAN);
        assert!(!r.passed());
    }

    #[test]
    fn small_suite_passes() {
        let opts = CheckOptions {
            networks: 2,
            points: 2,
            parameters: 8,
            resolution: 3,
            ..Default::default()
        };
        for r in run_all(&opts).unwrap() {
            assert!(r.passed(), "{r}");
        }
    }
}
