//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The line search is the bracketing/zoom scheme of Nocedal & Wright
//! (Algorithms 3.5 and 3.6) with safeguarded cubic interpolation. One
//! iteration is one accepted parameter update; every accepted step
//! satisfies both strong-Wolfe conditions with the configured `c1`, `c2`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct OptOptions {
    /// Number of `(s, y)` pairs kept.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when `‖∇f‖_∞` drops to this value.
    pub grad_tol: f64,
    /// Stop when each of the last [`REL_LOSS_WINDOW`] steps reduced `f` by at
    /// most this fraction of `max(|f_k|, |f_{k+1}|, 1)`.
    pub rel_loss_tol: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    /// Progress callback period in iterations (0 disables it).
    pub log_every: usize,
    /// Function evaluations allowed per line search.
    pub max_line_search_evals: usize,
}

pub const REL_LOSS_WINDOW: usize = 3;

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions {
            memory: 10,
            max_iterations: 5000,
            grad_tol: 1e-8,
            rel_loss_tol: 1e-12,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            log_every: 10,
            max_line_search_evals: 40,
        }
    }
}

impl OptOptions {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::InvalidConfig("L-BFGS memory must be at least 1".into()));
        }
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "Wolfe constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if self.max_line_search_evals == 0 {
            return Err(Error::InvalidConfig("line search needs at least one evaluation".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergedBy {
    GradTol,
    RelLossTol,
    MaxIter,
    LineSearchFailure,
}

/// Function value, gradient, and whatever else the objective wants recorded
/// in the history alongside the value.
#[derive(Clone, Debug)]
pub struct Evaluation<T> {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub terms: T,
}

pub trait Objective {
    type Terms: Clone;

    fn evaluate(&mut self, x: &[f64]) -> Evaluation<Self::Terms>;
}

/// Adapts a `x ↦ (f, ∇f)` closure.
pub struct FnObjective<F>(pub F);

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Objective for FnObjective<F> {
    type Terms = ();

    fn evaluate(&mut self, x: &[f64]) -> Evaluation<()> {
        let (value, gradient) = (self.0)(x);
        Evaluation {
            value,
            gradient,
            terms: (),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry<T> {
    pub iteration: usize,
    pub value: f64,
    pub terms: T,
}

#[derive(Clone, Debug)]
pub struct OptResult<T> {
    pub x: Vec<f64>,
    pub final_loss: f64,
    pub final_terms: T,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub function_evals: usize,
    pub converged_by: ConvergedBy,
    /// Entry 0 is the starting point, then one entry per accepted step.
    pub history: Vec<HistoryEntry<T>>,
}

#[derive(Clone, Copy, Debug)]
pub struct Progress {
    pub iteration: usize,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub function_evals: usize,
}

/// Inverse-Hessian memory of the most recent curvature pairs.
#[derive(Clone, Debug, Default)]
pub struct OptState {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
}

impl OptState {
    fn new(capacity: usize) -> Self {
        OptState {
            pairs: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if !(sy > f64::EPSILON * yy) {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
        true
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `H g` by the two-loop recursion with `H₀ = γ I`,
    /// `γ = sᵀy / yᵀy` of the newest pair (1 when empty).
    pub fn apply_inverse_hessian(&self, g: &[f64]) -> Vec<f64> {
        let gamma = self.pairs.back().map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y));
        two_loop(self.pairs.iter().map(|(s, y, r)| (s.as_slice(), y.as_slice(), *r)), g, gamma)
    }
}

pub(crate) fn two_loop<'a>(
    pairs: impl DoubleEndedIterator<Item = (&'a [f64], &'a [f64], f64)> + Clone,
    g: &[f64],
    gamma: f64,
) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::new();
    for (s, y, rho) in pairs.clone().rev() {
        let a = rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    q.iter_mut().for_each(|v| *v *= gamma);
    for ((s, y, rho), a) in pairs.zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

struct Point<T> {
    x: Vec<f64>,
    eval: Evaluation<T>,
}

enum LineSearch<T> {
    Accepted(Point<T>),
    Failed,
}

struct Searcher<'a, O: Objective> {
    objective: &'a mut O,
    opts: &'a OptOptions,
    evals: &'a mut usize,
}

impl<O: Objective> Searcher<'_, O> {
    fn at(&mut self, x0: &[f64], d: &[f64], alpha: f64) -> Point<O::Terms> {
        let mut x = x0.to_vec();
        axpy(alpha, d, &mut x);
        *self.evals += 1;
        let eval = self.objective.evaluate(&x);
        Point { x, eval }
    }

    /// Strong-Wolfe search along `d` from `x0` (value `f0`, slope `dphi0 < 0`).
    fn search(&mut self, x0: &[f64], f0: f64, dphi0: f64, d: &[f64], alpha_init: f64) -> LineSearch<O::Terms> {
        let (c1, c2) = (self.opts.wolfe_c1, self.opts.wolfe_c2);
        let budget = self.opts.max_line_search_evals;
        let mut used = 0;

        // (alpha, f, dphi) of the previous trial
        let mut prev = (0.0, f0, dphi0);
        let mut alpha = alpha_init;
        let mut first = true;
        while used < budget {
            let p = self.at(x0, d, alpha);
            used += 1;
            let f = p.eval.value;
            let dphi = dot(&p.eval.gradient, d);
            if !f.is_finite() || !dphi.is_finite() {
                // overshoot into a non-finite region: bracket it
                return self.zoom(x0, f0, dphi0, d, prev, (alpha, f64::INFINITY, f64::NAN), &mut used);
            }
            if f > f0 + c1 * alpha * dphi0 || (!first && f >= prev.1) {
                return self.zoom(x0, f0, dphi0, d, prev, (alpha, f, dphi), &mut used);
            }
            if dphi.abs() <= -c2 * dphi0 {
                return LineSearch::Accepted(p);
            }
            if dphi >= 0.0 {
                return self.zoom(x0, f0, dphi0, d, (alpha, f, dphi), prev, &mut used);
            }
            prev = (alpha, f, dphi);
            alpha *= 2.0;
            first = false;
        }
        LineSearch::Failed
    }

    #[allow(clippy::too_many_arguments)]
    fn zoom(
        &mut self,
        x0: &[f64],
        f0: f64,
        dphi0: f64,
        d: &[f64],
        mut lo: (f64, f64, f64),
        mut hi: (f64, f64, f64),
        used: &mut usize,
    ) -> LineSearch<O::Terms> {
        let (c1, c2) = (self.opts.wolfe_c1, self.opts.wolfe_c2);
        while *used < self.opts.max_line_search_evals {
            let width = hi.0 - lo.0;
            if width.abs() <= f64::EPSILON * lo.0.abs().max(hi.0.abs()) {
                break;
            }
            let alpha = interpolate(lo, hi);
            let p = self.at(x0, d, alpha);
            *used += 1;
            let f = p.eval.value;
            let dphi = dot(&p.eval.gradient, d);
            if !f.is_finite() || !dphi.is_finite() || f > f0 + c1 * alpha * dphi0 || f >= lo.1 {
                hi = (alpha, if f.is_finite() { f } else { f64::INFINITY }, dphi);
            } else {
                if dphi.abs() <= -c2 * dphi0 {
                    return LineSearch::Accepted(p);
                }
                if dphi * (hi.0 - lo.0) >= 0.0 {
                    hi = lo;
                }
                lo = (alpha, f, dphi);
            }
        }
        LineSearch::Failed
    }
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, clamped
/// to the middle 80% of the interval; bisection when the cubic is unusable.
fn interpolate(a: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    let (lo, hi) = if a.0 < b.0 { (a.0, b.0) } else { (b.0, a.0) };
    let mid = 0.5 * (a.0 + b.0);
    if !(a.1.is_finite() && b.1.is_finite() && a.2.is_finite() && b.2.is_finite()) {
        return mid;
    }
    let d1 = a.2 + b.2 - 3.0 * (a.1 - b.1) / (a.0 - b.0);
    let disc = d1 * d1 - a.2 * b.2;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b.0 - a.0).signum() * disc.sqrt();
    let t = b.0 - (b.0 - a.0) * (b.2 + d2 - d1) / (b.2 - a.2 + 2.0 * d2);
    if !t.is_finite() {
        return mid;
    }
    let margin = 0.1 * (hi - lo);
    t.clamp(lo + margin, hi - margin)
}

/// Minimizes `objective` from `x0`.
pub fn minimize<O: Objective>(objective: &mut O, x0: &[f64], opts: &OptOptions) -> Result<OptResult<O::Terms>> {
    minimize_with_callback(objective, x0, opts, |_| {})
}

/// [`minimize`] with `callback` invoked every `opts.log_every` iterations.
pub fn minimize_with_callback<O: Objective>(
    objective: &mut O,
    x0: &[f64],
    opts: &OptOptions,
    mut callback: impl FnMut(&Progress),
) -> Result<OptResult<O::Terms>> {
    opts.validate()?;
    if !all_finite(x0) {
        return Err(Error::NonFiniteStart { what: "starting point" });
    }
    let mut evals = 1;
    let mut cur = Point {
        x: x0.to_vec(),
        eval: objective.evaluate(x0),
    };
    if !cur.eval.value.is_finite() {
        return Err(Error::NonFiniteStart { what: "loss" });
    }
    if cur.eval.gradient.len() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: x0.len(),
            got: cur.eval.gradient.len(),
        });
    }
    if !all_finite(&cur.eval.gradient) {
        return Err(Error::NonFiniteStart { what: "gradient" });
    }

    let mut history = vec![HistoryEntry {
        iteration: 0,
        value: cur.eval.value,
        terms: cur.eval.terms.clone(),
    }];
    let mut state = OptState::new(opts.memory);
    let mut iteration = 0;
    let mut small_steps = 0;
    let progress = |iteration, cur: &Point<O::Terms>, evals| Progress {
        iteration,
        value: cur.eval.value,
        grad_inf_norm: inf_norm(&cur.eval.gradient),
        function_evals: evals,
    };
    if opts.log_every > 0 {
        callback(&progress(0, &cur, evals));
    }

    let converged_by = loop {
        if inf_norm(&cur.eval.gradient) <= opts.grad_tol {
            break ConvergedBy::GradTol;
        }
        if iteration >= opts.max_iterations {
            break ConvergedBy::MaxIter;
        }

        let mut accepted = None;
        // second attempt restarts from steepest descent
        for attempt in 0..2 {
            if attempt == 1 {
                if state.is_empty() {
                    break;
                }
                state.clear();
            }
            let mut d: Vec<f64> = state.apply_inverse_hessian(&cur.eval.gradient);
            d.iter_mut().for_each(|v| *v = -*v);
            let mut dphi0 = dot(&cur.eval.gradient, &d);
            if !(dphi0 < 0.0) {
                state.clear();
                d = cur.eval.gradient.iter().map(|g| -g).collect();
                dphi0 = dot(&cur.eval.gradient, &d);
            }
            let alpha_init = if state.is_empty() {
                (1.0 / inf_norm(&cur.eval.gradient)).min(1.0)
            } else {
                1.0
            };
            let mut searcher = Searcher {
                objective: &mut *objective,
                opts,
                evals: &mut evals,
            };
            if let LineSearch::Accepted(p) = searcher.search(&cur.x, cur.eval.value, dphi0, &d, alpha_init) {
                accepted = Some(p);
                break;
            }
        }
        let Some(next) = accepted else {
            break ConvergedBy::LineSearchFailure;
        };

        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next
            .eval
            .gradient
            .iter()
            .zip(&cur.eval.gradient)
            .map(|(a, b)| a - b)
            .collect();
        state.push(s, y);

        let (f_old, f_new) = (cur.eval.value, next.eval.value);
        let rel = (f_old - f_new) / f_old.abs().max(f_new.abs()).max(1.0);
        small_steps = if rel <= opts.rel_loss_tol { small_steps + 1 } else { 0 };

        cur = next;
        iteration += 1;
        history.push(HistoryEntry {
            iteration,
            value: cur.eval.value,
            terms: cur.eval.terms.clone(),
        });
        if opts.log_every > 0 && iteration % opts.log_every == 0 {
            callback(&progress(iteration, &cur, evals));
        }
        if small_steps >= REL_LOSS_WINDOW {
            break ConvergedBy::RelLossTol;
        }
    };

    Ok(OptResult {
        grad_inf_norm: inf_norm(&cur.eval.gradient),
        final_loss: cur.eval.value,
        final_terms: cur.eval.terms,
        x: cur.x,
        iterations: iteration,
        function_evals: evals,
        converged_by,
        history,
    })
}
