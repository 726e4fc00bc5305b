//! Second-order forward-mode dual numbers.
//!
//! A [`Dual2`] carries a value together with its gradient and Hessian with
//! respect to up to three independent variables. The Hessian is always
//! written one triangle at a time and mirrored, so `second[b][c]` and
//! `second[c][b]` are the same bits.

use std::ops::{Add, Mul, Neg, Sub};

use super::MAX_DIM;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual2 {
    pub value: f64,
    pub first: [f64; MAX_DIM],
    pub second: [[f64; MAX_DIM]; MAX_DIM],
    dim: usize,
}

impl Dual2 {
    pub fn constant(value: f64, dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "at most {MAX_DIM} independent variables");
        Dual2 {
            value,
            first: [0.0; MAX_DIM],
            second: [[0.0; MAX_DIM]; MAX_DIM],
            dim,
        }
    }

    /// The `index`-th independent variable evaluated at `value`.
    pub fn variable(value: f64, index: usize, dim: usize) -> Self {
        assert!(index < dim);
        let mut d = Self::constant(value, dim);
        d.first[index] = 1.0;
        d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Chain rule for a scalar function `g` given `g(v)`, `g'(v)`, `g''(v)`.
    pub fn chain(&self, g: f64, dg: f64, d2g: f64) -> Self {
        let mut out = Self::constant(g, self.dim);
        for b in 0..self.dim {
            out.first[b] = dg * self.first[b];
        }
        for b in 0..self.dim {
            for c in b..self.dim {
                let h = d2g * self.first[b] * self.first[c] + dg * self.second[b][c];
                out.second[b][c] = h;
                out.second[c][b] = h;
            }
        }
        out
    }

    pub fn tanh(&self) -> Self {
        let t = self.value.tanh();
        let dt = 1.0 - t * t;
        self.chain(t, dt, -2.0 * t * dt)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.value *= s;
        for b in 0..self.dim {
            out.first[b] *= s;
            for c in 0..self.dim {
                out.second[b][c] *= s;
            }
        }
        out
    }

    fn check_dims(&self, other: &Self) {
        assert_eq!(self.dim, other.dim, "mixing duals of different dimension");
    }
}

impl Add for Dual2 {
    type Output = Dual2;

    fn add(self, rhs: Dual2) -> Dual2 {
        self.check_dims(&rhs);
        let mut out = self;
        out.value += rhs.value;
        for b in 0..self.dim {
            out.first[b] += rhs.first[b];
            for c in 0..self.dim {
                out.second[b][c] += rhs.second[b][c];
            }
        }
        out
    }
}

impl Add<f64> for Dual2 {
    type Output = Dual2;

    fn add(mut self, rhs: f64) -> Dual2 {
        self.value += rhs;
        self
    }
}

impl Neg for Dual2 {
    type Output = Dual2;

    fn neg(self) -> Dual2 {
        self.scale(-1.0)
    }
}

impl Sub for Dual2 {
    type Output = Dual2;

    fn sub(self, rhs: Dual2) -> Dual2 {
        self + (-rhs)
    }
}

impl Mul<f64> for Dual2 {
    type Output = Dual2;

    fn mul(self, rhs: f64) -> Dual2 {
        self.scale(rhs)
    }
}

impl Mul for Dual2 {
    type Output = Dual2;

    fn mul(self, rhs: Dual2) -> Dual2 {
        self.check_dims(&rhs);
        let (u, v) = (&self, &rhs);
        let mut out = Self::constant(u.value * v.value, u.dim);
        for b in 0..u.dim {
            out.first[b] = u.first[b] * v.value + u.value * v.first[b];
        }
        for b in 0..u.dim {
            for c in b..u.dim {
                let h = u.second[b][c] * v.value
                    + u.first[b] * v.first[c]
                    + u.first[c] * v.first[b]
                    + u.value * v.second[b][c];
                out.second[b][c] = h;
                out.second[c][b] = h;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_at_origin() {
        let x = Dual2::variable(0.0, 0, 1);
        let t = x.tanh();
        assert_eq!(t.value, 0.0);
        assert_eq!(t.first[0], 1.0);
        assert_eq!(t.second[0][0], 0.0);
    }

    #[test]
    fn product_rule_matches_polynomial() {
        // f(x, y) = x^2 y at (2, 3): grad (12, 4), hess [[6, 4], [4, 0]]
        let x = Dual2::variable(2.0, 0, 2);
        let y = Dual2::variable(3.0, 1, 2);
        let f = x * x * y;
        assert_eq!(f.value, 12.0);
        assert_eq!(&f.first[..2], &[12.0, 4.0]);
        assert_eq!(f.second[0][0], 6.0);
        assert_eq!(f.second[0][1], 4.0);
        assert_eq!(f.second[1][0], 4.0);
        assert_eq!(f.second[1][1], 0.0);
    }

    #[test]
    fn tanh_composition_against_finite_differences() {
        let f = |x: f64, y: f64| (0.7 * x - 0.4 * y + 0.2).tanh() * (x + 2.0 * y);
        let (x0, y0) = (0.3, -0.5);
        let x = Dual2::variable(x0, 0, 2);
        let y = Dual2::variable(y0, 1, 2);
        let d = (x * 0.7 - y * 0.4 + 0.2).tanh() * (x + y * 2.0);

        let h = 1e-4;
        let fx = (f(x0 + h, y0) - f(x0 - h, y0)) / (2.0 * h);
        let fy = (f(x0, y0 + h) - f(x0, y0 - h)) / (2.0 * h);
        let fxy = (f(x0 + h, y0 + h) - f(x0 + h, y0 - h) - f(x0 - h, y0 + h)
            + f(x0 - h, y0 - h))
            / (4.0 * h * h);
        let fxx = (f(x0 + h, y0) - 2.0 * f(x0, y0) + f(x0 - h, y0)) / (h * h);
        assert!((d.first[0] - fx).abs() < 1e-7);
        assert!((d.first[1] - fy).abs() < 1e-7);
        assert!((d.second[0][1] - fxy).abs() < 1e-6);
        assert!((d.second[0][0] - fxx).abs() < 1e-6);
        assert_eq!(d.second[0][1].to_bits(), d.second[1][0].to_bits());
    }
}
