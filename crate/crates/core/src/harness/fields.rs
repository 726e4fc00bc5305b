use crate::autodiff::{eval_jets, DerivOrder, Point, MAX_DIM};
use crate::error::{Error, Result};
use crate::mechanics::{StressStrainState, Tensor2, Vector};
use crate::network::FieldModel;
use crate::problems::{AnalyticOracle, ProblemSpec};

const AXES: [&str; 3] = ["x", "y", "z"];
const DISPLACEMENTS: [&str; 3] = ["U", "V", "W"];

/// Displacement, strain and stress at every sample point.
///
/// Column order is coordinates, displacements, normal strains, engineering
/// shear strains, normal stresses, shear stresses; in 2D that is
/// `x, y, U, V, eps_x, eps_y, gamma_xy, sigma_x, sigma_y, tau_xy`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSnapshot {
    pub dim: usize,
    pub points: Vec<Point>,
    pub displacement: Vec<Vector>,
    pub strain: Vec<Tensor2>,
    pub stress: Vec<Tensor2>,
}

fn shear_pairs(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        1 => &[],
        2 => &[(0, 1)],
        _ => &[(0, 1), (1, 2), (0, 2)],
    }
}

impl FieldSnapshot {
    pub fn from_model(problem: &ProblemSpec, model: &FieldModel) -> Self {
        let points = problem.samples.interior.clone();
        let jets = eval_jets(model, &points, DerivOrder::First);
        let mut snap = FieldSnapshot {
            dim: problem.dim,
            points,
            displacement: Vec::with_capacity(jets.len()),
            strain: Vec::with_capacity(jets.len()),
            stress: Vec::with_capacity(jets.len()),
        };
        for jet in &jets {
            let state = StressStrainState::from_gradient(&jet.du, &problem.material);
            snap.displacement.push(jet.u);
            snap.strain.push(state.strain);
            snap.stress.push(state.stress);
        }
        snap
    }

    /// The analytic fields sampled at the problem's points.
    pub fn from_oracle(problem: &ProblemSpec, oracle: &AnalyticOracle) -> Self {
        let points = problem.samples.interior.clone();
        FieldSnapshot {
            dim: problem.dim,
            displacement: points.iter().map(|x| oracle.displacement(x)).collect(),
            strain: points.iter().map(|x| oracle.strain(x)).collect(),
            stress: points.iter().map(|x| oracle.stress(x)).collect(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn columns(&self) -> Vec<String> {
        let d = self.dim;
        let mut cols: Vec<String> = AXES[..d].iter().map(|s| s.to_string()).collect();
        cols.extend(DISPLACEMENTS[..d].iter().map(|s| s.to_string()));
        cols.extend(AXES[..d].iter().map(|a| format!("eps_{a}")));
        cols.extend(shear_pairs(d).iter().map(|&(a, b)| format!("gamma_{}{}", AXES[a], AXES[b])));
        cols.extend(AXES[..d].iter().map(|a| format!("sigma_{a}")));
        cols.extend(shear_pairs(d).iter().map(|&(a, b)| format!("tau_{}{}", AXES[a], AXES[b])));
        cols
    }

    /// One row per point in [`columns`](Self::columns) order.
    pub fn row(&self, i: usize) -> Vec<f64> {
        let d = self.dim;
        let mut row = Vec::with_capacity(self.columns().len());
        row.extend_from_slice(&self.points[i][..d]);
        row.extend_from_slice(&self.displacement[i][..d]);
        row.extend((0..d).map(|a| self.strain[i][a][a]));
        row.extend(shear_pairs(d).iter().map(|&(a, b)| 2.0 * self.strain[i][a][b]));
        row.extend((0..d).map(|a| self.stress[i][a][a]));
        row.extend(shear_pairs(d).iter().map(|&(a, b)| self.stress[i][a][b]));
        row
    }

    /// Values of the named column at every point.
    pub fn field(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns().iter().position(|c| c == name)?;
        Some((0..self.len()).map(|i| self.row(i)[k]).collect())
    }

    /// Rebuilds a snapshot from rows in [`columns`](Self::columns) order.
    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidConfig(format!("bad dimension {dim}")));
        }
        let shears = shear_pairs(dim);
        let width = 4 * dim + 2 * shears.len();
        let mut snap = FieldSnapshot {
            dim,
            points: Vec::with_capacity(rows.len()),
            displacement: Vec::with_capacity(rows.len()),
            strain: Vec::with_capacity(rows.len()),
            stress: Vec::with_capacity(rows.len()),
        };
        for row in rows {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            let mut it = row.iter().copied();
            let mut next = || it.next().expect("length checked");
            let mut p = [0.0; MAX_DIM];
            let mut u = [0.0; MAX_DIM];
            let mut e = [[0.0; MAX_DIM]; MAX_DIM];
            let mut s = [[0.0; MAX_DIM]; MAX_DIM];
            (0..dim).for_each(|a| p[a] = next());
            (0..dim).for_each(|a| u[a] = next());
            (0..dim).for_each(|a| e[a][a] = next());
            for &(a, b) in shears {
                let g = next();
                e[a][b] = 0.5 * g;
                e[b][a] = 0.5 * g;
            }
            (0..dim).for_each(|a| s[a][a] = next());
            for &(a, b) in shears {
                let t = next();
                s[a][b] = t;
                s[b][a] = t;
            }
            snap.points.push(p);
            snap.displacement.push(u);
            snap.strain.push(e);
            snap.stress.push(s);
        }
        Ok(snap)
    }
}

/// Mean of squared pointwise errors, each scaled by the largest absolute
/// ground-truth value: `(1/n) Σ ((ω*_i − ω_i) / max|ω*|)²`.
pub fn rms_error(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    let scale = truth.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || scale.is_nan() {
        return Err(Error::ZeroNormalizer);
    }
    let sum: f64 = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| ((t - p) / scale).powi(2))
        .sum();
    Ok(sum / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_plate_2d, LoadKind};

    #[test]
    fn rms_examples() {
        assert_eq!(rms_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let v = rms_error(&[1.0, 2.0], &[1.1, 2.2]).unwrap();
        assert!((v - 0.00625).abs() < 1e-15);
        assert_eq!(rms_error(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(rms_error(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNormalizer)));
        assert!(matches!(rms_error(&[1.0], &[1.0, 0.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn plate_columns() {
        let plate = build_plate_2d(LoadKind::UniformPatch);
        let snap = FieldSnapshot::from_oracle(&plate, &plate.oracle.unwrap());
        assert_eq!(
            snap.columns(),
            ["x", "y", "U", "V", "eps_x", "eps_y", "gamma_xy", "sigma_x", "sigma_y", "tau_xy"]
        );
        assert_eq!(snap.len(), 2601);
        let sx = snap.field("sigma_x").unwrap();
        assert!(sx.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rows_roundtrip() {
        for dim in 1..=3 {
            let name = [
                crate::problems::ProblemName::Rod1d,
                crate::problems::ProblemName::Plate2dPatch,
                crate::problems::ProblemName::Cube3dPatch,
            ][dim - 1];
            let spec = name.build_with_resolution(Some(4)).unwrap();
            let snap = FieldSnapshot::from_oracle(&spec, &spec.oracle.unwrap());
            let rows: Vec<Vec<f64>> = (0..snap.len()).map(|i| snap.row(i)).collect();
            assert_eq!(rows[0].len(), snap.columns().len());
            let back = FieldSnapshot::from_rows(dim, &rows).unwrap();
            assert_eq!(back, snap);
        }
    }
}
