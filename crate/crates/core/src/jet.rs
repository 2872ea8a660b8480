//! Forward-mode derivative carriers.
//!
//! [`Jet`] is a scalar value together with its gradient with respect to the
//! chart coordinates (all seed directions propagated simultaneously).
//! [`MatJet`] extends the same idea to matrix-valued quantities and provides
//! the forward-mode rules for products, inverses and determinants:
//! d(M^-1) = -M^-1 dM M^-1 and d det M = det M * tr(M^-1 dM).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Value plus first-order partials of a scalar field at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, dim: usize) -> Self {
        Jet { value, grad: vec![0.0; dim] }
    }

    /// The jet of the coordinate function x_i.
    pub fn coordinate(value: f64, index: usize, dim: usize) -> Self {
        let mut grad = vec![0.0; dim];
        grad[index] = 1.0;
        Jet { value, grad }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.grad.iter().all(|d| d.is_finite())
    }

    fn zip(&self, other: &Jet, value: f64, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!(self.grad.len(), other.grad.len());
        let grad = self
            .grad
            .iter()
            .zip(&other.grad)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Jet { value, grad }
    }

    fn map(&self, value: f64, f: impl Fn(f64) -> f64) -> Jet {
        Jet { value, grad: self.grad.iter().map(|&d| f(d)).collect() }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.zip(other, self.value + other.value, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.zip(other, self.value - other.value, |a, b| a - b)
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let (u, v) = (self.value, other.value);
        self.zip(other, u * v, |du, dv| du * v + u * dv)
    }

    pub fn div(&self, other: &Jet) -> Jet {
        let (u, v) = (self.value, other.value);
        self.zip(other, u / v, |du, dv| (du * v - u * dv) / (v * v))
    }

    pub fn neg(&self) -> Jet {
        self.map(-self.value, |d| -d)
    }

    pub fn scale(&self, s: f64) -> Jet {
        self.map(s * self.value, |d| s * d)
    }

    /// Chain rule for a univariate function: value f(u), derivative f'(u).
    pub fn chain(&self, value: f64, deriv: f64) -> Jet {
        self.map(value, |d| deriv * d)
    }

    /// u^p for a constant exponent. Valid for negative bases when the
    /// power-rule path applies (integer exponents via powf semantics).
    pub fn powf_const(&self, p: f64) -> Jet {
        let u = self.value;
        self.chain(u.powf(p), p * u.powf(p - 1.0))
    }

    /// General u^w: requires u > 0 when dw != 0.
    pub fn pow(&self, other: &Jet) -> Result<Jet> {
        let exponent_varies = other.grad.iter().any(|&d| d != 0.0);
        if !exponent_varies {
            return Ok(self.powf_const(other.value));
        }
        if self.value <= 0.0 {
            return Err(Error::DomainError { function: "pow", argument: self.value });
        }
        let (u, w) = (self.value, other.value);
        let value = u.powf(w);
        let grad = self
            .grad
            .iter()
            .zip(&other.grad)
            .map(|(&du, &dw)| value * (dw * u.ln() + w * du / u))
            .collect();
        Ok(Jet { value, grad })
    }
}

/// A square-matrix value together with its partials in every chart direction.
#[derive(Debug, Clone)]
pub struct MatJet {
    pub val: DMatrix<f64>,
    /// grad[l] = component-wise partial derivative of the matrix along x_l.
    pub grad: Vec<DMatrix<f64>>,
}

impl MatJet {
    pub fn constant(val: DMatrix<f64>, dim: usize) -> Self {
        let n = val.nrows();
        MatJet { val, grad: vec![DMatrix::zeros(n, n); dim] }
    }

    /// Assemble from per-entry jets; `entries[(i, j)]` row-major.
    pub fn from_entries(n: usize, dim: usize, entry: impl Fn(usize, usize) -> Jet) -> Self {
        let mut val = DMatrix::zeros(n, n);
        let mut grad = vec![DMatrix::zeros(n, n); dim];
        for i in 0..n {
            for j in 0..n {
                let jet = entry(i, j);
                val[(i, j)] = jet.value;
                for l in 0..dim {
                    grad[l][(i, j)] = jet.grad[l];
                }
            }
        }
        MatJet { val, grad }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn add(&self, other: &MatJet) -> MatJet {
        MatJet {
            val: &self.val + &other.val,
            grad: self
                .grad
                .iter()
                .zip(&other.grad)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Product rule: d(MN) = dM N + M dN.
    pub fn mul(&self, other: &MatJet) -> MatJet {
        MatJet {
            val: &self.val * &other.val,
            grad: self
                .grad
                .iter()
                .zip(&other.grad)
                .map(|(da, db)| da * &other.val + &self.val * db)
                .collect(),
        }
    }

    /// d(M^-1) = -M^-1 dM M^-1.
    pub fn inverse(&self, point: &[f64]) -> Result<MatJet> {
        let inv = self
            .val
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularMetric { point: point.to_vec() })?;
        let grad = self
            .grad
            .iter()
            .map(|dm| -(&inv * dm * &inv))
            .collect();
        Ok(MatJet { val: inv, grad })
    }

    /// d det M = det M * tr(M^-1 dM).
    pub fn det(&self, point: &[f64]) -> Result<Jet> {
        let inv = self
            .val
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularMetric { point: point.to_vec() })?;
        let det = self.val.determinant();
        let grad = self
            .grad
            .iter()
            .map(|dm| det * (&inv * dm).trace())
            .collect();
        Ok(Jet { value: det, grad })
    }

    /// Scale by a scalar jet: d(sM) = ds M + s dM.
    pub fn scale_jet(&self, s: &Jet) -> MatJet {
        MatJet {
            val: s.value * &self.val,
            grad: self
                .grad
                .iter()
                .enumerate()
                .map(|(l, dm)| s.grad[l] * &self.val + s.value * dm)
                .collect(),
        }
    }

    pub fn trace_jet(&self) -> Jet {
        Jet {
            value: self.val.trace(),
            grad: self.grad.iter().map(|dm| dm.trace()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn fd_matrix(f: impl Fn(f64) -> DMatrix<f64>, x: f64, h: f64) -> DMatrix<f64> {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn jet_product_rule() {
        let x = Jet::coordinate(2.0, 0, 2);
        let y = Jet::coordinate(3.0, 1, 2);
        let p = x.mul(&y);
        assert_eq!(p.value, 6.0);
        assert_eq!(p.grad, vec![3.0, 2.0]);
    }

    #[test]
    fn matjet_inverse_and_det_match_finite_differences() {
        // M(t) = [[1 + t^2, t], [t, 2]], one seed direction.
        let m = |t: f64| dmatrix![1.0 + t * t, t; t, 2.0];
        let t0 = 0.7;
        let dm = dmatrix![2.0 * t0, 1.0; 1.0, 0.0];
        let jet = MatJet { val: m(t0), grad: vec![dm] };

        let inv = jet.inverse(&[t0]).unwrap();
        let fd_inv = fd_matrix(|t| m(t).try_inverse().unwrap(), t0, 1e-6);
        assert!((&inv.grad[0] - fd_inv).amax() < 1e-8);

        let det = jet.det(&[t0]).unwrap();
        let fd_det = (m(t0 + 1e-6).determinant() - m(t0 - 1e-6).determinant()) / 2e-6;
        assert!((det.grad[0] - fd_det).abs() < 1e-8);
    }

    #[test]
    fn pow_constant_exponent_handles_negative_base() {
        let x = Jet::coordinate(-1.5, 0, 1);
        let two = Jet::constant(2.0, 1);
        let p = x.pow(&two).unwrap();
        assert!((p.value - 2.25).abs() < 1e-15);
        assert!((p.grad[0] + 3.0).abs() < 1e-15);
    }
}
