//! Benchmark problem definitions on the unit box `[0, 1]^d`.
//!
//! | name           | dim | grid | load on the far face          |
//! |----------------|-----|------|-------------------------------|
//! | `rod1d`        | 1   | 51   | `t̄ = 1` at `x = 1`            |
//! | `plate2d`      | 2   | 51²  | `t̄_x = cos(πy/2)` at `x = 1`  |
//! | `plate2d-patch`| 2   | 51²  | `t̄_x = 1` at `x = 1`          |
//! | `cube3d`       | 3   | 21³  | `t̄_z = cos(πx/2)cos(πy/2)` at `z = 1` |
//! | `cube3d-patch` | 3   | 21³  | `t̄_z = 1` at `z = 1`          |
//!
//! Faces through the origin are symmetry planes: the normal displacement is
//! pinned by the hard-BC transform and the tangential tractions must vanish.
//! Remaining faces are traction free. The rod's left end is clamped and
//! carries no traction condition.
//!
//! A boundary grid point that touches several faces belongs to exactly one
//! patch, chosen by role (loaded, then free, then symmetry) and then by the
//! lowest axis.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Point, MAX_DIM};
use crate::error::{Error, Result};
use crate::mechanics::{Material, MaterialMode, Tensor2, Vector};
use crate::network::{derive_seed, FieldModel, HardBcTransform, NetworkConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemName {
    Rod1d,
    Plate2d,
    Plate2dPatch,
    Cube3d,
    Cube3dPatch,
}

impl ProblemName {
    pub const ALL: [ProblemName; 5] = [
        ProblemName::Rod1d,
        ProblemName::Plate2d,
        ProblemName::Plate2dPatch,
        ProblemName::Cube3d,
        ProblemName::Cube3dPatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemName::Rod1d => "rod1d",
            ProblemName::Plate2d => "plate2d",
            ProblemName::Plate2dPatch => "plate2d-patch",
            ProblemName::Cube3d => "cube3d",
            ProblemName::Cube3dPatch => "cube3d-patch",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ProblemName::Rod1d => 1,
            ProblemName::Plate2d | ProblemName::Plate2dPatch => 2,
            ProblemName::Cube3d | ProblemName::Cube3dPatch => 3,
        }
    }

    /// Builds the problem at its default resolution.
    pub fn build(self) -> ProblemSpec {
        self.build_with_resolution(None)
            .expect("default resolutions are valid")
    }

    /// Builds the problem with `points_per_axis` grid points along each axis
    /// (`None` for the default).
    pub fn build_with_resolution(self, points_per_axis: Option<usize>) -> Result<ProblemSpec> {
        match self {
            ProblemName::Rod1d => build_rod_1d_with(points_per_axis.unwrap_or(51)),
            ProblemName::Plate2d => build_plate_2d_with(LoadKind::Cosine, points_per_axis.unwrap_or(51)),
            ProblemName::Plate2dPatch => build_plate_2d_with(LoadKind::UniformPatch, points_per_axis.unwrap_or(51)),
            ProblemName::Cube3d => build_cube_3d_with(LoadKind::Cosine, points_per_axis.unwrap_or(21)),
            ProblemName::Cube3dPatch => build_cube_3d_with(LoadKind::UniformPatch, points_per_axis.unwrap_or(21)),
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadKind {
    Cosine,
    UniformPatch,
}

/// Prescribed traction as a function of position.
#[derive(Clone, Debug, PartialEq)]
pub enum TractionLoad {
    Zero,
    Uniform(Vector),
    /// `t̄_component = Π_{a ∈ axes} cos(π x_a / 2)`, other components zero.
    Cosine { component: usize, axes: Vec<usize> },
}

impl TractionLoad {
    pub fn eval(&self, x: &Point) -> Vector {
        match self {
            TractionLoad::Zero => [0.0; MAX_DIM],
            TractionLoad::Uniform(t) => *t,
            TractionLoad::Cosine { component, axes } => {
                let mut t = [0.0; MAX_DIM];
                t[*component] = axes.iter().map(|&a| (FRAC_PI_2 * x[a]).cos()).product();
                t
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceRole {
    Loaded,
    Free,
    /// Symmetry plane normal to `axis`: only tangential tractions are enforced.
    Symmetry { axis: usize },
    /// Displacement fixed by the hard-BC transform; no traction condition.
    Clamped,
}

impl FaceRole {
    fn priority(self) -> u8 {
        match self {
            FaceRole::Loaded => 0,
            FaceRole::Free => 1,
            FaceRole::Symmetry { .. } => 2,
            FaceRole::Clamped => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPatch {
    pub name: String,
    pub role: FaceRole,
    pub normal: Vector,
    pub traction: TractionLoad,
    /// Traction components that are constrained on this patch.
    pub enforced: [bool; MAX_DIM],
    pub points: Vec<Point>,
    /// Surface quadrature weight `dΓ` of each point.
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePointSet {
    /// Every grid point of the closed domain.
    pub interior: Vec<Point>,
    /// Volume quadrature weight `dV` of each interior point.
    pub interior_weights: Vec<f64>,
    pub patches: Vec<BoundaryPatch>,
}

impl SamplePointSet {
    pub fn boundary_count(&self) -> usize {
        self.patches.iter().map(|p| p.points.len()).sum()
    }

    pub fn volume(&self) -> f64 {
        self.interior_weights.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleValidity {
    /// Closed-form solution of the benchmark itself.
    Exact,
    /// Constant-stress solution of a patch-test variant.
    PatchTest,
}

/// Uniaxial stress `σ_axis,axis = load` with all other stresses zero.
///
/// Displacements are `u_axis = (load/E) x_axis` and `u_j = −ν (load/E) x_j`
/// for the other components, which satisfies equilibrium with no body
/// force and the symmetry and free-face conditions of every benchmark box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticOracle {
    pub axis: usize,
    pub load: f64,
    pub material: Material,
    pub validity: OracleValidity,
}

impl AnalyticOracle {
    pub fn displacement_gradient(&self) -> Tensor2 {
        let mut g = [[0.0; MAX_DIM]; MAX_DIM];
        let dim = self.material.dim();
        let e = self.load / self.material.youngs_modulus;
        for a in 0..dim {
            g[a][a] = if a == self.axis { e } else { -self.material.poisson_ratio * e };
        }
        g
    }

    pub fn displacement(&self, x: &Point) -> Vector {
        let g = self.displacement_gradient();
        let mut u = [0.0; MAX_DIM];
        for a in 0..self.material.dim() {
            u[a] = g[a][a] * x[a];
        }
        u
    }

    pub fn strain(&self, _x: &Point) -> Tensor2 {
        self.displacement_gradient()
    }

    pub fn stress(&self, _x: &Point) -> Tensor2 {
        let mut s = [[0.0; MAX_DIM]; MAX_DIM];
        s[self.axis][self.axis] = self.load;
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub name: ProblemName,
    pub dim: usize,
    pub material: Material,
    pub body_force: Vector,
    pub points_per_axis: usize,
    pub spacing: f64,
    pub samples: SamplePointSet,
    pub hard_bc: HardBcTransform,
    /// Hidden widths of every displacement network.
    pub hidden_layers: Vec<usize>,
    /// Use one network with `dim` outputs instead of one network per component.
    pub shared_network: bool,
    pub oracle: Option<AnalyticOracle>,
}

impl ProblemSpec {
    /// Fresh networks for this problem; network `k` is seeded with
    /// `derive_seed(seed, k)`.
    pub fn build_model(&self, seed: u64) -> Result<FieldModel> {
        let configs: Vec<NetworkConfig> = if self.shared_network {
            vec![NetworkConfig::new(self.dim, self.dim, self.hidden_layers.clone(), derive_seed(seed, 0))]
        } else {
            (0..self.dim)
                .map(|k| NetworkConfig::new(self.dim, 1, self.hidden_layers.clone(), derive_seed(seed, k as u64)))
                .collect()
        };
        FieldModel::from_configs(self.dim, &configs, self.hard_bc.clone())
    }

    pub fn loaded_patches(&self) -> impl Iterator<Item = &BoundaryPatch> {
        self.samples
            .patches
            .iter()
            .filter(|p| p.role == FaceRole::Loaded)
    }
}

pub fn build_rod_1d() -> ProblemSpec {
    build_rod_1d_with(51).expect("valid default")
}

pub fn build_plate_2d(load: LoadKind) -> ProblemSpec {
    build_plate_2d_with(load, 51).expect("valid default")
}

pub fn build_cube_3d(load: LoadKind) -> ProblemSpec {
    build_cube_3d_with(load, 21).expect("valid default")
}

fn build_rod_1d_with(n: usize) -> Result<ProblemSpec> {
    let material = Material::new(10.0, 0.0, MaterialMode::Bar1d)?;
    let roles = |axis: usize, side: usize| {
        debug_assert_eq!(axis, 0);
        if side == 0 {
            FaceRole::Clamped
        } else {
            FaceRole::Loaded
        }
    };
    let load = TractionLoad::Uniform([1.0, 0.0, 0.0]);
    Ok(ProblemSpec {
        name: ProblemName::Rod1d,
        dim: 1,
        material,
        body_force: [0.0; MAX_DIM],
        points_per_axis: n,
        spacing: 1.0 / (n.max(2) - 1) as f64,
        samples: grid_samples(1, n, roles, &load)?,
        hard_bc: HardBcTransform::symmetry_planes(1),
        hidden_layers: vec![5, 5, 5],
        shared_network: false,
        oracle: Some(AnalyticOracle {
            axis: 0,
            load: 1.0,
            material,
            validity: OracleValidity::Exact,
        }),
    })
}

fn build_plate_2d_with(kind: LoadKind, n: usize) -> Result<ProblemSpec> {
    let material = Material::new(7.0, 0.3, MaterialMode::PlaneStress)?;
    let load = match kind {
        LoadKind::Cosine => TractionLoad::Cosine {
            component: 0,
            axes: vec![1],
        },
        LoadKind::UniformPatch => TractionLoad::Uniform([1.0, 0.0, 0.0]),
    };
    let roles = |axis: usize, side: usize| match (axis, side) {
        (a, 0) => FaceRole::Symmetry { axis: a },
        (0, _) => FaceRole::Loaded,
        _ => FaceRole::Free,
    };
    Ok(ProblemSpec {
        name: match kind {
            LoadKind::Cosine => ProblemName::Plate2d,
            LoadKind::UniformPatch => ProblemName::Plate2dPatch,
        },
        dim: 2,
        material,
        body_force: [0.0; MAX_DIM],
        points_per_axis: n,
        spacing: 1.0 / (n.max(2) - 1) as f64,
        samples: grid_samples(2, n, roles, &load)?,
        hard_bc: HardBcTransform::symmetry_planes(2),
        hidden_layers: vec![20, 20, 20],
        shared_network: false,
        oracle: (kind == LoadKind::UniformPatch).then_some(AnalyticOracle {
            axis: 0,
            load: 1.0,
            material,
            validity: OracleValidity::PatchTest,
        }),
    })
}

fn build_cube_3d_with(kind: LoadKind, n: usize) -> Result<ProblemSpec> {
    let material = Material::new(10.0, 0.25, MaterialMode::Solid3d)?;
    let load = match kind {
        LoadKind::Cosine => TractionLoad::Cosine {
            component: 2,
            axes: vec![0, 1],
        },
        LoadKind::UniformPatch => TractionLoad::Uniform([0.0, 0.0, 1.0]),
    };
    let roles = |axis: usize, side: usize| match (axis, side) {
        (a, 0) => FaceRole::Symmetry { axis: a },
        (2, _) => FaceRole::Loaded,
        _ => FaceRole::Free,
    };
    Ok(ProblemSpec {
        name: match kind {
            LoadKind::Cosine => ProblemName::Cube3d,
            LoadKind::UniformPatch => ProblemName::Cube3dPatch,
        },
        dim: 3,
        material,
        body_force: [0.0; MAX_DIM],
        points_per_axis: n,
        spacing: 1.0 / (n.max(2) - 1) as f64,
        samples: grid_samples(3, n, roles, &load)?,
        hard_bc: HardBcTransform::symmetry_planes(3),
        hidden_layers: vec![20, 20, 20, 20],
        shared_network: false,
        oracle: (kind == LoadKind::UniformPatch).then_some(AnalyticOracle {
            axis: 2,
            load: 1.0,
            material,
            validity: OracleValidity::PatchTest,
        }),
    })
}

/// Tensor-product trapezoid weight of grid index `i` along one axis.
fn trapezoid_weight(i: usize, n: usize) -> f64 {
    let h = 1.0 / (n - 1) as f64;
    if i == 0 || i == n - 1 {
        0.5 * h
    } else {
        h
    }
}

fn grid_samples(
    dim: usize,
    n: usize,
    roles: impl Fn(usize, usize) -> FaceRole,
    load: &TractionLoad,
) -> Result<SamplePointSet> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 grid points per axis, got {n}"
        )));
    }
    let coord = |i: usize| i as f64 / (n - 1) as f64;

    let mut patches: Vec<BoundaryPatch> = Vec::new();
    let mut face_index = Vec::new();
    for axis in 0..dim {
        for side in 0..2 {
            let role = roles(axis, side);
            if role == FaceRole::Clamped {
                face_index.push(None);
                continue;
            }
            let mut normal = [0.0; MAX_DIM];
            normal[axis] = if side == 0 { -1.0 } else { 1.0 };
            let mut enforced = [false; MAX_DIM];
            enforced[..dim].iter_mut().for_each(|e| *e = true);
            if let FaceRole::Symmetry { axis: a } = role {
                enforced[a] = false;
            }
            face_index.push(Some(patches.len()));
            patches.push(BoundaryPatch {
                name: format!("{}{}", ["x", "y", "z"][axis], side),
                role,
                normal,
                traction: if role == FaceRole::Loaded {
                    load.clone()
                } else {
                    TractionLoad::Zero
                },
                enforced,
                points: Vec::new(),
                weights: Vec::new(),
            });
        }
    }

    let total = n.pow(dim as u32);
    let mut interior = Vec::with_capacity(total);
    let mut interior_weights = Vec::with_capacity(total);
    let mut idx = [0usize; MAX_DIM];
    for flat in 0..total {
        let mut rem = flat;
        // last axis varies fastest
        for a in (0..dim).rev() {
            idx[a] = rem % n;
            rem /= n;
        }
        let mut p = [0.0; MAX_DIM];
        for a in 0..dim {
            p[a] = coord(idx[a]);
        }
        interior.push(p);
        interior_weights.push((0..dim).map(|a| trapezoid_weight(idx[a], n)).product());

        let mut best: Option<(u8, usize, usize, usize)> = None;
        for axis in 0..dim {
            let side = match idx[axis] {
                0 => 0,
                i if i == n - 1 => 1,
                _ => continue,
            };
            let Some(pi) = face_index[2 * axis + side] else { continue };
            let key = (patches[pi].role.priority(), axis, side, pi);
            if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                best = Some(key);
            }
        }
        if let Some((_, axis, _, pi)) = best {
            let w: f64 = (0..dim)
                .filter(|&a| a != axis)
                .map(|a| trapezoid_weight(idx[a], n))
                .product();
            patches[pi].points.push(p);
            patches[pi].weights.push(w);
        }
    }

    Ok(SamplePointSet {
        interior,
        interior_weights,
        patches,
    })
}
