//! Exact input derivatives of network outputs and exact parameter gradients
//! of losses built from them.
//!
//! Two routes compute the same input derivatives:
//!
//! * [`Dual2`] propagates value, gradient and Hessian through a network one
//!   point at a time ([`eval_with_input_derivatives`]);
//! * the batched engine pushes whole blocks of points through each layer as
//!   matrix products, keeps the intermediate jets, and then runs the
//!   reverse sweep that turns per-point adjoints of `(u, ∇u, ∇∇u)` into
//!   `∂L/∂θ` ([`loss_parameter_gradient`]).
//!
//! The second route is the one used for training; the first exists so the
//! two can be checked against each other and against finite differences.

mod batch;
mod dual;

pub use dual::Dual2;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{FieldModel, HardBcTransform, Network};

/// Largest supported spatial dimension and displacement component count.
pub const MAX_DIM: usize = 3;

/// Points always carry three coordinates; unused trailing ones are zero.
pub type Point = [f64; MAX_DIM];

/// Points per block in the batched engine. Fixed so that the order of the
/// final reduction does not depend on the number of threads.
pub const CHUNK: usize = 64;

/// Highest order of input derivative to propagate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DerivOrder {
    Value,
    First,
    Second,
}

impl DerivOrder {
    /// Number of jet channels per neuron: value, gradient entries, then the
    /// upper triangle of the Hessian.
    pub fn channels(self, dim: usize) -> usize {
        match self {
            DerivOrder::Value => 1,
            DerivOrder::First => 1 + dim,
            DerivOrder::Second => 1 + dim + dim * (dim + 1) / 2,
        }
    }
}

/// Upper-triangle index pairs of a `dim × dim` symmetric matrix, row by row.
pub(crate) fn hessian_pairs(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        1 => &[(0, 0)],
        2 => &[(0, 0), (0, 1), (1, 1)],
        3 => &[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)],
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Displacement, displacement gradient and Hessian at one point.
///
/// `du[α][β] = ∂u_α/∂x_β`, `d2u[α][β][γ] = ∂²u_α/∂x_β∂x_γ`. Entries beyond the
/// active dimension and component count are zero.
///
/// When used as an adjoint, every entry is treated as an independent
/// variable; the engine folds `d2u[α][β][γ]` and `d2u[α][γ][β]` together.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointJet {
    pub u: [f64; MAX_DIM],
    pub du: [[f64; MAX_DIM]; MAX_DIM],
    pub d2u: [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM],
}

/// Derivatives of the raw network outputs at `x`, via [`Dual2`].
pub fn eval_with_input_derivatives(net: &Network, x: &[f64]) -> Result<PointJet> {
    if x.len() != net.n_input() {
        return Err(Error::DimensionMismatch {
            expected: net.n_input(),
            got: x.len(),
        });
    }
    let dim = x.len();
    let inputs: Vec<Dual2> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| Dual2::variable(v, i, dim))
        .collect();
    let out = net.eval_dual2(&inputs)?;
    let mut jet = PointJet::default();
    for (a, d) in out.iter().enumerate() {
        jet.u[a] = d.value;
        for b in 0..dim {
            jet.du[a][b] = d.first[b];
            for c in 0..dim {
                jet.d2u[a][b][c] = d.second[b][c];
            }
        }
    }
    Ok(jet)
}

/// Same as [`eval_with_input_derivatives`] for a whole field model, with the
/// hard-BC transform included.
pub fn eval_model_with_input_derivatives(model: &FieldModel, x: &[f64]) -> Result<PointJet> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    let mut raw = PointJet::default();
    let mut offset = 0;
    for net in model.nets() {
        let j = eval_with_input_derivatives(net, x)?;
        for o in 0..net.n_output() {
            raw.u[offset + o] = j.u[o];
            raw.du[offset + o] = j.du[o];
            raw.d2u[offset + o] = j.d2u[o];
        }
        offset += net.n_output();
    }
    let mut p = [0.0; MAX_DIM];
    p[..x.len()].copy_from_slice(x);
    Ok(apply_hard_bc(&raw, model.bc(), &p, model.dim()))
}

/// `u = s·û` with `s = x_k − a`, so `∂_β u = δ_kβ û + s ∂_β û` and
/// `∂_βγ u = δ_kβ ∂_γ û + δ_kγ ∂_β û + s ∂_βγ û`.
pub fn apply_hard_bc(raw: &PointJet, bc: &HardBcTransform, x: &Point, dim: usize) -> PointJet {
    let mut jet = *raw;
    for (alpha, anchor) in bc.components.iter().enumerate() {
        let Some(anchor) = anchor else { continue };
        let k = anchor.axis;
        let s = x[k] - anchor.anchor;
        let (u, du, d2u) = (raw.u[alpha], &raw.du[alpha], &raw.d2u[alpha]);
        jet.u[alpha] = s * u;
        for b in 0..dim {
            jet.du[alpha][b] = s * du[b];
            for c in 0..dim {
                jet.d2u[alpha][b][c] = s * d2u[b][c];
            }
        }
        jet.du[alpha][k] += u;
        for c in 0..dim {
            jet.d2u[alpha][k][c] += du[c];
            jet.d2u[alpha][c][k] += du[c];
        }
    }
    jet
}

/// Transpose of [`apply_hard_bc`]'s linearization: maps adjoints of the
/// transformed jet back to adjoints of the raw network jet.
pub fn hard_bc_adjoint(adj: &PointJet, bc: &HardBcTransform, x: &Point, dim: usize) -> PointJet {
    let mut raw = *adj;
    for (alpha, anchor) in bc.components.iter().enumerate() {
        let Some(anchor) = anchor else { continue };
        let k = anchor.axis;
        let s = x[k] - anchor.anchor;
        let (u, du, d2u) = (adj.u[alpha], &adj.du[alpha], &adj.d2u[alpha]);
        raw.u[alpha] = s * u + du[k];
        for b in 0..dim {
            raw.du[alpha][b] = s * du[b] + d2u[k][b] + d2u[b][k];
            for c in 0..dim {
                raw.d2u[alpha][b][c] = s * d2u[b][c];
            }
        }
    }
    raw
}

/// `∂L/∂θ` in the model's canonical parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradient(pub Vec<f64>);

impl ParamGradient {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inf_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// A scalar loss that is a weighted sum of per-point terms, each a function
/// of the displacement jet at that point, plus an optional direct function
/// of the parameters.
pub trait PointwiseLoss: Sync {
    /// Highest input derivative any point term reads.
    fn order(&self) -> DerivOrder;

    /// Point sets the terms are evaluated on, e.g. interior and boundary.
    fn point_sets(&self) -> Vec<&[Point]>;

    /// Contribution of point `index` of set `set`. Must also write
    /// `∂term/∂jet` into `adjoint`, which arrives zeroed.
    fn point_term(&self, set: usize, index: usize, jet: &PointJet, adjoint: &mut PointJet) -> f64;

    /// Term depending on the parameters directly; adds its gradient into `grad`.
    fn parameter_term(&self, _params: &[f64], _grad: &mut [f64]) -> f64 {
        0.0
    }
}

/// Loss value and its exact gradient with respect to every model parameter.
///
/// Points are processed in blocks of [`CHUNK`]; blocks may run on the rayon
/// pool, but partial results are always summed in block order.
pub fn loss_parameter_gradient<L: PointwiseLoss + ?Sized>(
    model: &FieldModel,
    loss: &L,
) -> (f64, ParamGradient) {
    let (parts, grad) = loss_parameter_gradient_by_set(model, loss);
    (parts.iter().sum(), grad)
}

/// Like [`loss_parameter_gradient`], with the value split per point set.
/// The returned vector has one entry per point set followed by the
/// parameter term.
pub fn loss_parameter_gradient_by_set<L: PointwiseLoss + ?Sized>(
    model: &FieldModel,
    loss: &L,
) -> (Vec<f64>, ParamGradient) {
    let n = model.param_count();
    let sets = loss.point_sets();
    let parts: Vec<(usize, f64, Vec<f64>)> = chunks(&sets)
        .into_par_iter()
        .map(|(set, start, end)| {
            let mut grad = vec![0.0; n];
            let v = batch::chunk_value_and_grad(model, loss, set, start, &sets[set][start..end], Some(&mut grad));
            (set, v, grad)
        })
        .collect();
    let mut totals = vec![0.0; sets.len() + 1];
    let mut grad = vec![0.0; n];
    for (set, v, g) in parts {
        totals[set] += v;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let params = model.params();
    totals[sets.len()] = loss.parameter_term(&params, &mut grad);
    (totals, ParamGradient(grad))
}

/// Loss value alone, summed in the same order as [`loss_parameter_gradient`].
pub fn loss_value<L: PointwiseLoss + ?Sized>(model: &FieldModel, loss: &L) -> f64 {
    loss_value_by_set(model, loss).iter().sum()
}

/// Per-set loss values laid out as in [`loss_parameter_gradient_by_set`].
pub fn loss_value_by_set<L: PointwiseLoss + ?Sized>(model: &FieldModel, loss: &L) -> Vec<f64> {
    let sets = loss.point_sets();
    let parts: Vec<(usize, f64)> = chunks(&sets)
        .into_par_iter()
        .map(|(set, start, end)| {
            (set, batch::chunk_value_and_grad(model, loss, set, start, &sets[set][start..end], None))
        })
        .collect();
    let mut totals = vec![0.0; sets.len() + 1];
    for (set, v) in parts {
        totals[set] += v;
    }
    let params = model.params();
    let mut scratch = vec![0.0; params.len()];
    totals[sets.len()] = loss.parameter_term(&params, &mut scratch);
    totals
}

/// Transformed displacement jets at every point.
pub fn eval_jets(model: &FieldModel, points: &[Point], order: DerivOrder) -> Vec<PointJet> {
    let blocks: Vec<Vec<PointJet>> = points
        .par_chunks(CHUNK)
        .map(|block| batch::chunk_jets(model, block, order))
        .collect();
    blocks.into_iter().flatten().collect()
}

fn chunks(sets: &[&[Point]]) -> Vec<(usize, usize, usize)> {
    let mut items = Vec::new();
    for (s, pts) in sets.iter().enumerate() {
        let mut start = 0;
        while start < pts.len() {
            let end = (start + CHUNK).min(pts.len());
            items.push((s, start, end));
            start = end;
        }
    }
    items
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{derive_seed, init_network, Anchor, NetworkConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Point {
        let mut p = [0.0; MAX_DIM];
        for v in p.iter_mut().take(dim) {
            *v = rng.random::<f64>();
        }
        p
    }

    #[test]
    fn single_tanh_neuron_at_origin() {
        let mut net = init_network(&NetworkConfig::new(1, 1, vec![1], 0)).unwrap();
        net.set_params(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        let j = eval_with_input_derivatives(&net, &[0.0]).unwrap();
        assert_eq!((j.u[0], j.du[0][0], j.d2u[0][0][0]), (0.0, 1.0, 0.0));
    }

    #[test]
    fn identity_variable() {
        let x = Dual2::variable(0.7, 0, 1);
        assert_eq!((x.value, x.first[0], x.second[0][0]), (0.7, 1.0, 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let net = init_network(&NetworkConfig::new(2, 1, vec![3], 0)).unwrap();
        assert!(matches!(
            eval_with_input_derivatives(&net, &[0.1]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn batched_engine_matches_dual_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in 1..=3 {
            let cfgs: Vec<_> = (0..dim)
                .map(|k| NetworkConfig::new(dim, 1, vec![7, 6], derive_seed(dim as u64, k as u64)))
                .collect();
            let model = FieldModel::from_configs(dim, &cfgs, HardBcTransform::symmetry_planes(dim)).unwrap();
            let pts: Vec<Point> = (0..150).map(|_| random_point(&mut rng, dim)).collect();
            let jets = eval_jets(&model, &pts, DerivOrder::Second);
            for (p, jet) in pts.iter().zip(&jets) {
                let reference = eval_model_with_input_derivatives(&model, &p[..dim]).unwrap();
                for a in 0..dim {
                    assert!((jet.u[a] - reference.u[a]).abs() < 1e-13);
                    for b in 0..dim {
                        assert!((jet.du[a][b] - reference.du[a][b]).abs() < 1e-13);
                        for c in 0..dim {
                            assert!((jet.d2u[a][b][c] - reference.d2u[a][b][c]).abs() < 1e-12);
                            assert_eq!(jet.d2u[a][b][c].to_bits(), jet.d2u[a][c][b].to_bits());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn hard_bc_product_rule_with_frozen_network() {
        let net = init_network(&NetworkConfig::new(1, 1, vec![5, 5, 5], 1)).unwrap();
        let bc = HardBcTransform {
            components: vec![Some(Anchor { axis: 0, anchor: 0.0 })],
        };
        let model = FieldModel::new(1, vec![net.clone()], bc).unwrap();
        for &x in &[0.0, 0.25, 0.8, 1.0] {
            let raw = eval_with_input_derivatives(&net, &[x]).unwrap();
            let j = eval_model_with_input_derivatives(&model, &[x]).unwrap();
            assert_eq!(j.du[0][0], x * raw.du[0][0] + raw.u[0]);
            assert_eq!(j.d2u[0][0][0], x * raw.d2u[0][0][0] + raw.du[0][0] + raw.du[0][0]);
        }
    }

    #[test]
    fn hard_bc_adjoint_is_transpose() {
        // <A·raw, adj> == <raw, Aᵀ·adj> for random jets
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let bc = HardBcTransform {
            components: vec![
                Some(Anchor { axis: 1, anchor: 0.2 }),
                None,
                Some(Anchor { axis: 2, anchor: 0.0 }),
            ],
        };
        let rand_jet = |rng: &mut ChaCha8Rng| {
            let mut j = PointJet::default();
            for a in 0..3 {
                j.u[a] = rng.random::<f64>() - 0.5;
                for b in 0..3 {
                    j.du[a][b] = rng.random::<f64>() - 0.5;
                    for c in 0..3 {
                        j.d2u[a][b][c] = rng.random::<f64>() - 0.5;
                    }
                }
            }
            j
        };
        let dot = |x: &PointJet, y: &PointJet| {
            let mut s = 0.0;
            for a in 0..3 {
                s += x.u[a] * y.u[a];
                for b in 0..3 {
                    s += x.du[a][b] * y.du[a][b];
                    for c in 0..3 {
                        s += x.d2u[a][b][c] * y.d2u[a][b][c];
                    }
                }
            }
            s
        };
        for _ in 0..20 {
            let raw = rand_jet(&mut rng);
            let adj = rand_jet(&mut rng);
            let x = random_point(&mut rng, 3);
            let lhs = dot(&apply_hard_bc(&raw, &bc, &x, 3), &adj);
            let rhs = dot(&raw, &hard_bc_adjoint(&adj, &bc, &x, 3));
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    struct SumOfSquares;

    impl PointwiseLoss for SumOfSquares {
        fn order(&self) -> DerivOrder {
            DerivOrder::Value
        }
        fn point_sets(&self) -> Vec<&[Point]> {
            vec![]
        }
        fn point_term(&self, _: usize, _: usize, _: &PointJet, _: &mut PointJet) -> f64 {
            0.0
        }
        fn parameter_term(&self, params: &[f64], grad: &mut [f64]) -> f64 {
            for (g, p) in grad.iter_mut().zip(params) {
                *g += 2.0 * p;
            }
            params.iter().map(|p| p * p).sum()
        }
    }

    #[test]
    fn quadratic_in_parameters() {
        let model = FieldModel::new(
            1,
            vec![init_network(&NetworkConfig::new(1, 1, vec![5, 5, 5], 3)).unwrap()],
            HardBcTransform::none(1),
        )
        .unwrap();
        let (loss, grad) = loss_parameter_gradient(&model, &SumOfSquares);
        let p = model.params();
        assert_eq!(loss, p.iter().map(|v| v * v).sum::<f64>());
        for (g, v) in grad.as_slice().iter().zip(&p) {
            assert_eq!(*g, 2.0 * v);
        }
    }
}
