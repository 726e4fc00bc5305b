//! Block evaluation of networks on jets, and the reverse sweep.
//!
//! A block of `P` points is laid out as a `(width, C·P)` matrix per layer:
//! column `c·P + p` holds channel `c` of point `p`, where channel 0 is the
//! value, channels `1..=d` the input gradient and the rest the upper
//! Hessian triangle in [`hessian_pairs`] order. An affine layer then acts on
//! every channel with one matrix product; the bias only enters channel 0.

use ndarray::{s, Array2, Axis};

use super::{apply_hard_bc, hard_bc_adjoint, hessian_pairs, DerivOrder, Point, PointJet, PointwiseLoss};
use crate::network::{FieldModel, Network};

struct Trace {
    inputs: Array2<f64>,
    /// Pre-activation jets of each hidden layer.
    pre: Vec<Array2<f64>>,
    /// Post-activation jets of each hidden layer.
    post: Vec<Array2<f64>>,
    output: Array2<f64>,
}

fn input_jets(points: &[Point], dim: usize, order: DerivOrder) -> Array2<f64> {
    let p = points.len();
    let mut a = Array2::zeros((dim, order.channels(dim) * p));
    for (j, pt) in points.iter().enumerate() {
        for b in 0..dim {
            a[[b, j]] = pt[b];
        }
    }
    if order >= DerivOrder::First {
        for b in 0..dim {
            a.slice_mut(s![b, (1 + b) * p..(2 + b) * p]).fill(1.0);
        }
    }
    a
}

fn affine(net_layer: &crate::network::Layer, a: &Array2<f64>, p: usize) -> Array2<f64> {
    let mut z = net_layer.weights.dot(a);
    for (mut row, &b) in z.axis_iter_mut(Axis(0)).zip(net_layer.bias.iter()) {
        row.slice_mut(s![..p]).mapv_inplace(|v| v + b);
    }
    z
}

/// tanh applied channel-wise: `a = φ(z)`, `a_β = φ' z_β`,
/// `a_βγ = φ'' z_β z_γ + φ' z_βγ`.
fn activate(z: &Array2<f64>, dim: usize, order: DerivOrder, p: usize) -> Array2<f64> {
    let mut a = Array2::zeros(z.raw_dim());
    let pairs = hessian_pairs(dim);
    for (zr, mut ar) in z.outer_iter().zip(a.outer_iter_mut()) {
        let zr = zr.as_slice().expect("standard layout");
        let ar = ar.as_slice_mut().expect("standard layout");
        for j in 0..p {
            let t = zr[j].tanh();
            let d1 = 1.0 - t * t;
            ar[j] = t;
            if order == DerivOrder::Value {
                continue;
            }
            for b in 0..dim {
                ar[(1 + b) * p + j] = d1 * zr[(1 + b) * p + j];
            }
            if order == DerivOrder::Second {
                let d2 = -2.0 * t * d1;
                for (k, &(b, c)) in pairs.iter().enumerate() {
                    let ch = (1 + dim + k) * p + j;
                    ar[ch] = d2 * zr[(1 + b) * p + j] * zr[(1 + c) * p + j] + d1 * zr[ch];
                }
            }
        }
    }
    a
}

/// Reverse of [`activate`]: adjoints of `a` to adjoints of `z`.
fn activate_adjoint(z: &Array2<f64>, abar: &Array2<f64>, dim: usize, order: DerivOrder, p: usize) -> Array2<f64> {
    let mut zbar = Array2::zeros(z.raw_dim());
    let pairs = hessian_pairs(dim);
    for ((zr, ab), mut zb) in z.outer_iter().zip(abar.outer_iter()).zip(zbar.outer_iter_mut()) {
        let zr = zr.as_slice().expect("standard layout");
        let ab = ab.as_slice().expect("standard layout");
        let zb = zb.as_slice_mut().expect("standard layout");
        for j in 0..p {
            let t = zr[j].tanh();
            let d1 = 1.0 - t * t;
            let d2 = -2.0 * t * d1;
            let mut v = ab[j] * d1;
            if order >= DerivOrder::First {
                for b in 0..dim {
                    let ch = (1 + b) * p + j;
                    v += ab[ch] * d2 * zr[ch];
                    zb[ch] = ab[ch] * d1;
                }
            }
            if order == DerivOrder::Second {
                let d3 = d1 * (6.0 * t * t - 2.0);
                for (k, &(b, c)) in pairs.iter().enumerate() {
                    let ch = (1 + dim + k) * p + j;
                    let (cb, cc) = ((1 + b) * p + j, (1 + c) * p + j);
                    let g = ab[ch];
                    v += g * (d3 * zr[cb] * zr[cc] + d2 * zr[ch]);
                    zb[cb] += g * d2 * zr[cc];
                    zb[cc] += g * d2 * zr[cb];
                    zb[ch] = g * d1;
                }
            }
            zb[j] = v;
        }
    }
    zbar
}

fn forward(net: &Network, points: &[Point], dim: usize, order: DerivOrder) -> Trace {
    let p = points.len();
    let inputs = input_jets(points, dim, order);
    let layers = net.layers();
    let mut pre = Vec::with_capacity(layers.len() - 1);
    let mut post: Vec<Array2<f64>> = Vec::with_capacity(layers.len() - 1);
    for layer in &layers[..layers.len() - 1] {
        let a_prev = post.last().unwrap_or(&inputs);
        let z = affine(layer, a_prev, p);
        let a = activate(&z, dim, order, p);
        pre.push(z);
        post.push(a);
    }
    let output = affine(layers.last().expect("at least one layer"), post.last().unwrap_or(&inputs), p);
    Trace {
        inputs,
        pre,
        post,
        output,
    }
}

/// Accumulates `∂L/∂θ` for one network into `grad` (canonical order) given
/// the adjoint of its output jets.
fn backward(net: &Network, trace: &Trace, out_adj: Array2<f64>, dim: usize, order: DerivOrder, p: usize, grad: &mut [f64]) {
    let layers = net.layers();
    let mut offsets = Vec::with_capacity(layers.len());
    let mut off = 0;
    for layer in layers {
        offsets.push(off);
        off += layer.weights.len() + layer.bias.len();
    }

    let mut zbar = out_adj;
    for l in (0..layers.len()).rev() {
        let a_prev = if l == 0 { &trace.inputs } else { &trace.post[l - 1] };
        let layer = &layers[l];
        let gw = zbar.dot(&a_prev.t());
        let base = offsets[l];
        for (g, v) in grad[base..base + gw.len()].iter_mut().zip(gw.iter()) {
            *g += v;
        }
        let bbase = base + gw.len();
        for (i, row) in zbar.outer_iter().enumerate() {
            grad[bbase + i] += row.slice(s![..p]).sum();
        }
        if l == 0 {
            break;
        }
        let abar = layer.weights.t().dot(&zbar);
        zbar = activate_adjoint(&trace.pre[l - 1], &abar, dim, order, p);
    }
}

fn gather(out: &Array2<f64>, jets: &mut [PointJet], offset: usize, dim: usize, order: DerivOrder) {
    let p = jets.len();
    let pairs = hessian_pairs(dim);
    for (o, row) in out.outer_iter().enumerate() {
        let a = offset + o;
        let row = row.as_slice().expect("standard layout");
        for (j, jet) in jets.iter_mut().enumerate() {
            jet.u[a] = row[j];
            if order >= DerivOrder::First {
                for b in 0..dim {
                    jet.du[a][b] = row[(1 + b) * p + j];
                }
            }
            if order == DerivOrder::Second {
                for (k, &(b, c)) in pairs.iter().enumerate() {
                    let v = row[(1 + dim + k) * p + j];
                    jet.d2u[a][b][c] = v;
                    jet.d2u[a][c][b] = v;
                }
            }
        }
    }
}

fn scatter(adj: &[PointJet], n_out: usize, offset: usize, dim: usize, order: DerivOrder) -> Array2<f64> {
    let p = adj.len();
    let pairs = hessian_pairs(dim);
    let mut out = Array2::zeros((n_out, order.channels(dim) * p));
    for (o, mut row) in out.outer_iter_mut().enumerate() {
        let a = offset + o;
        let row = row.as_slice_mut().expect("standard layout");
        for (j, g) in adj.iter().enumerate() {
            row[j] = g.u[a];
            if order >= DerivOrder::First {
                for b in 0..dim {
                    row[(1 + b) * p + j] = g.du[a][b];
                }
            }
            if order == DerivOrder::Second {
                for (k, &(b, c)) in pairs.iter().enumerate() {
                    row[(1 + dim + k) * p + j] = if b == c {
                        g.d2u[a][b][b]
                    } else {
                        g.d2u[a][b][c] + g.d2u[a][c][b]
                    };
                }
            }
        }
    }
    out
}

pub(super) fn chunk_jets(model: &FieldModel, points: &[Point], order: DerivOrder) -> Vec<PointJet> {
    let dim = model.dim();
    let mut raw = vec![PointJet::default(); points.len()];
    let mut offset = 0;
    for net in model.nets() {
        let trace = forward(net, points, dim, order);
        gather(&trace.output, &mut raw, offset, dim, order);
        offset += net.n_output();
    }
    raw.iter()
        .zip(points)
        .map(|(r, x)| apply_hard_bc(r, model.bc(), x, dim))
        .collect()
}

/// Sum of the loss's point terms over one block; with `grad` present, also
/// adds the block's parameter gradient into it.
pub(super) fn chunk_value_and_grad<L: PointwiseLoss + ?Sized>(
    model: &FieldModel,
    loss: &L,
    set: usize,
    start: usize,
    points: &[Point],
    grad: Option<&mut [f64]>,
) -> f64 {
    let dim = model.dim();
    let order = loss.order();
    let p = points.len();

    let traces: Vec<Trace> = model
        .nets()
        .iter()
        .map(|net| forward(net, points, dim, order))
        .collect();
    let mut raw = vec![PointJet::default(); p];
    let mut offset = 0;
    for (net, trace) in model.nets().iter().zip(&traces) {
        gather(&trace.output, &mut raw, offset, dim, order);
        offset += net.n_output();
    }

    let mut total = 0.0;
    let mut raw_adj = vec![PointJet::default(); p];
    for (j, (r, x)) in raw.iter().zip(points).enumerate() {
        let jet = apply_hard_bc(r, model.bc(), x, dim);
        let mut adj = PointJet::default();
        total += loss.point_term(set, start + j, &jet, &mut adj);
        raw_adj[j] = hard_bc_adjoint(&adj, model.bc(), x, dim);
    }

    if let Some(grad) = grad {
        let mut offset = 0;
        let mut param_offset = 0;
        for (net, trace) in model.nets().iter().zip(&traces) {
            let out_adj = scatter(&raw_adj, net.n_output(), offset, dim, order);
            let n = net.param_count();
            backward(net, trace, out_adj, dim, order, p, &mut grad[param_offset..param_offset + n]);
            offset += net.n_output();
            param_offset += n;
        }
    }
    total
}
