//! Small-strain isotropic elasticity on displacement jets.
//!
//! Tensors are stored as `3 × 3` arrays and only the leading `dim × dim`
//! block is meaningful.

use serde::{Deserialize, Serialize};

use crate::autodiff::MAX_DIM;
use crate::error::{Error, Result};

pub type Tensor2 = [[f64; MAX_DIM]; MAX_DIM];
pub type Vector = [f64; MAX_DIM];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialMode {
    /// Uniaxial bar, `σ = E ε`.
    Bar1d,
    PlaneStress,
    Solid3d,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub lambda: f64,
    pub mu: f64,
    pub mode: MaterialMode,
}

/// Lamé constants `(λ, μ)` for the given mode.
///
/// Plane stress uses `λ = Eν / ((1+ν)(1−ν))`, solid uses
/// `λ = Eν / ((1+ν)(1−2ν))`; both share `μ = E / (2(1+ν))`. The bar never
/// reads them and reports the plane-stress pair.
pub fn lame_from_engineering(e: f64, nu: f64, mode: MaterialMode) -> Result<(f64, f64)> {
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::InvalidMaterial(format!("Young's modulus must be positive, got {e}")));
    }
    if mode == MaterialMode::Solid3d && nu == 0.5 {
        return Err(Error::InvalidMaterial(
            "incompressible material (ν = 0.5) has no finite λ".into(),
        ));
    }
    if !(nu > -1.0 && nu < 0.5) {
        return Err(Error::InvalidMaterial(format!(
            "Poisson ratio must lie in (-1, 0.5), got {nu}"
        )));
    }
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = match mode {
        MaterialMode::Bar1d | MaterialMode::PlaneStress => e * nu / ((1.0 + nu) * (1.0 - nu)),
        MaterialMode::Solid3d => e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
    };
    Ok((lambda, mu))
}

impl Material {
    pub fn new(e: f64, nu: f64, mode: MaterialMode) -> Result<Self> {
        let (lambda, mu) = lame_from_engineering(e, nu, mode)?;
        Ok(Material {
            youngs_modulus: e,
            poisson_ratio: nu,
            lambda,
            mu,
            mode,
        })
    }

    pub fn dim(&self) -> usize {
        match self.mode {
            MaterialMode::Bar1d => 1,
            MaterialMode::PlaneStress => 2,
            MaterialMode::Solid3d => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StressStrainState {
    pub strain: Tensor2,
    pub stress: Tensor2,
}

impl StressStrainState {
    pub fn from_gradient(du: &Tensor2, mat: &Material) -> Self {
        let strain = symmetric_part(du, mat.dim());
        StressStrainState {
            strain,
            stress: stress_from_strain(&strain, mat),
        }
    }
}

fn symmetric_part(g: &Tensor2, dim: usize) -> Tensor2 {
    let mut e = [[0.0; MAX_DIM]; MAX_DIM];
    for a in 0..dim {
        for b in 0..dim {
            e[a][b] = 0.5 * (g[a][b] + g[b][a]);
        }
    }
    e
}

/// `ε = ½(∇u + ∇uᵀ)`; needs as many displacement components as dimensions.
pub fn strain_from_gradient(du: &Tensor2, n_components: usize, dim: usize) -> Result<Tensor2> {
    if n_components != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: n_components,
        });
    }
    Ok(symmetric_part(du, dim))
}

/// `σ = λ tr(ε) I + 2μ ε`, or `σ = E ε` for the bar.
pub fn stress_from_strain(eps: &Tensor2, mat: &Material) -> Tensor2 {
    let dim = mat.dim();
    let mut sigma = [[0.0; MAX_DIM]; MAX_DIM];
    if mat.mode == MaterialMode::Bar1d {
        sigma[0][0] = mat.youngs_modulus * eps[0][0];
        return sigma;
    }
    let tr: f64 = (0..dim).map(|a| eps[a][a]).sum();
    for a in 0..dim {
        for b in 0..dim {
            sigma[a][b] = 2.0 * mat.mu * eps[a][b];
        }
        sigma[a][a] += mat.lambda * tr;
    }
    sigma
}

/// `r_α = σ_αβ,β + f_α`, expanded as
/// `(λ+μ) u_γ,γα + μ u_α,ββ + f_α` (bar: `E u_,xx + f`).
pub fn equilibrium_residual(d2u: &[[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM], mat: &Material, body_force: &Vector) -> Vector {
    let dim = mat.dim();
    let mut r = [0.0; MAX_DIM];
    if mat.mode == MaterialMode::Bar1d {
        r[0] = mat.youngs_modulus * d2u[0][0][0] + body_force[0];
        return r;
    }
    let (lm, mu) = (mat.lambda + mat.mu, mat.mu);
    for (a, ra) in r.iter_mut().enumerate().take(dim) {
        let grad_div: f64 = (0..dim).map(|g| d2u[g][g][a]).sum();
        let laplacian: f64 = (0..dim).map(|b| d2u[a][b][b]).sum();
        *ra = lm * grad_div + mu * laplacian + body_force[a];
    }
    r
}

/// `t = σ n` for a unit normal `n`.
pub fn traction(sigma: &Tensor2, n: &Vector, dim: usize) -> Result<Vector> {
    let norm = n[..dim].iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitNormal { norm });
    }
    Ok(apply(sigma, n, dim))
}

pub(crate) fn apply(sigma: &Tensor2, n: &Vector, dim: usize) -> Vector {
    let mut t = [0.0; MAX_DIM];
    for a in 0..dim {
        t[a] = (0..dim).map(|b| sigma[a][b] * n[b]).sum();
    }
    t
}

/// Pulls an adjoint of `σ` (any `dim × dim` matrix) back to an adjoint of
/// the displacement gradient through `σ(ε(∇u))`.
pub(crate) fn stress_adjoint_to_gradient(sigma_adj: &Tensor2, mat: &Material) -> Tensor2 {
    let dim = mat.dim();
    let mut e_adj = [[0.0; MAX_DIM]; MAX_DIM];
    if mat.mode == MaterialMode::Bar1d {
        e_adj[0][0] = mat.youngs_modulus * sigma_adj[0][0];
        return e_adj;
    }
    let tr: f64 = (0..dim).map(|a| sigma_adj[a][a]).sum();
    for a in 0..dim {
        for b in 0..dim {
            e_adj[a][b] = 2.0 * mat.mu * sigma_adj[a][b];
        }
        e_adj[a][a] += mat.lambda * tr;
    }
    symmetric_part(&e_adj, dim)
}

/// Adds the adjoint of [`equilibrium_residual`] with respect to `d2u` into `d2u_adj`.
pub(crate) fn equilibrium_adjoint(
    r_adj: &Vector,
    mat: &Material,
    d2u_adj: &mut [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM],
) {
    let dim = mat.dim();
    if mat.mode == MaterialMode::Bar1d {
        d2u_adj[0][0][0] += mat.youngs_modulus * r_adj[0];
        return;
    }
    let (lm, mu) = (mat.lambda + mat.mu, mat.mu);
    for a in 0..dim {
        for g in 0..dim {
            d2u_adj[g][g][a] += lm * r_adj[a];
            d2u_adj[a][g][g] += mu * r_adj[a];
        }
    }
}
