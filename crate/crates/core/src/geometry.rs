//! Riemannian primitives on a single coordinate chart with a box domain:
//! metric and (1,1)-tensor fields built from scalar expressions, Christoffel
//! symbols, covariant derivatives, metric gradients and fixed-step geodesic
//! integration.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::jet::{Jet, MatJet};
#[cfg(test)]
use crate::tol;

/// A coordinate box; the chart's domain of validity.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDomain {
    box_: Vec<(f64, f64)>,
}

impl ChartDomain {
    pub fn new(box_: Vec<(f64, f64)>) -> Result<Self> {
        if box_.len() < 2 {
            return Err(Error::InvalidArgument("chart dimension must be at least 2".into()));
        }
        for &(lo, hi) in &box_ {
            if lo >= hi {
                return Err(Error::InvalidArgument(format!(
                    "invalid interval [{lo}, {hi}]"
                )));
            }
        }
        Ok(ChartDomain { box_ })
    }

    pub fn dim(&self) -> usize {
        self.box_.len()
    }

    pub fn interval(&self, axis: usize) -> (f64, f64) {
        self.box_[axis]
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.box_
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.box_.len()
            && point
                .iter()
                .zip(&self.box_)
                .all(|(&x, &(lo, hi))| x >= lo && x <= hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.box_.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Largest axis extent; the length scale for finite-difference steps.
    pub fn scale(&self) -> f64 {
        self.box_
            .iter()
            .map(|&(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }
}

/// Symmetric metric field; only the upper triangle is stored, mirrored on
/// construction.
#[derive(Debug, Clone)]
pub struct MetricField {
    dim: usize,
    /// Row-major upper triangle: entry (i, j) with i <= j at tri_index(i, j).
    upper: Vec<ScalarExpr>,
}

fn tri_index(dim: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < dim);
    i * dim - i * (i + 1) / 2 + j
}

impl MetricField {
    /// Build from a full component matrix; the lower triangle is ignored.
    pub fn from_components(components: Vec<Vec<ScalarExpr>>) -> Result<Self> {
        let dim = components.len();
        if dim < 2 || components.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidArgument("metric components must form an m x m array, m >= 2".into()));
        }
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for (i, row) in components.into_iter().enumerate() {
            for (j, e) in row.into_iter().enumerate() {
                if j >= i {
                    upper.push(e);
                }
            }
        }
        Ok(MetricField { dim, upper })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component(&self, i: usize, j: usize) -> &ScalarExpr {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &self.upper[tri_index(self.dim, i, j)]
    }

    pub fn components(&self) -> Vec<Vec<ScalarExpr>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.component(i, j).clone()).collect())
            .collect()
    }

    pub fn exprs(&self) -> impl Iterator<Item = &ScalarExpr> {
        self.upper.iter()
    }

    pub fn value_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.component(i, j).eval(point)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    pub fn jet_at(&self, point: &[f64]) -> Result<MatJet> {
        let m = self.dim;
        let mut jets: Vec<Option<Jet>> = vec![None; m * m];
        for i in 0..m {
            for j in i..m {
                let jet = self.component(i, j).eval_jet(point)?;
                jets[i * m + j] = Some(jet.clone());
                jets[j * m + i] = Some(jet);
            }
        }
        Ok(MatJet::from_entries(m, point.len(), |i, j| {
            jets[i * m + j].clone().expect("filled above")
        }))
    }

    /// Smallest eigenvalue of the evaluated matrix; positive-definiteness
    /// screen for sampled points.
    pub fn min_eigenvalue_at(&self, point: &[f64]) -> Result<f64> {
        let g = self.value_at(point)?;
        let eig = g.symmetric_eigenvalues();
        Ok(eig.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

/// Mixed-component (1,1)-tensor field T^i_j of scalar expressions.
#[derive(Debug, Clone)]
pub struct TensorField11 {
    dim: usize,
    components: Vec<ScalarExpr>,
}

impl TensorField11 {
    pub fn from_components(components: Vec<Vec<ScalarExpr>>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 || components.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidArgument("tensor components must form an m x m array".into()));
        }
        Ok(TensorField11 { dim, components: components.into_iter().flatten().collect() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component(&self, i: usize, j: usize) -> &ScalarExpr {
        &self.components[i * self.dim + j]
    }

    pub fn components(&self) -> Vec<Vec<ScalarExpr>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.component(i, j).clone()).collect())
            .collect()
    }

    pub fn exprs(&self) -> impl Iterator<Item = &ScalarExpr> {
        self.components.iter()
    }

    pub fn value_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let mut t = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(i, j)] = self.component(i, j).eval(point)?;
            }
        }
        Ok(t)
    }

    pub fn jet_at(&self, point: &[f64]) -> Result<MatJet> {
        let m = self.dim;
        let mut jets = Vec::with_capacity(m * m);
        for e in &self.components {
            jets.push(e.eval_jet(point)?);
        }
        Ok(MatJet::from_entries(m, point.len(), |i, j| jets[i * m + j].clone()))
    }

    /// True when every component is coordinate-free.
    pub fn is_constant(&self) -> bool {
        self.components.iter().all(|e| e.is_constant())
    }
}

/// Pointwise (1,1)-tensor evaluators: expression fields and composite fields
/// (such as the pair tensor A) share this surface so covariant derivatives
/// can differentiate through either.
pub trait Field11 {
    fn dim(&self) -> usize;
    fn value_at(&self, point: &[f64]) -> Result<DMatrix<f64>>;
    fn jet_at(&self, point: &[f64]) -> Result<MatJet>;
}

impl Field11 for TensorField11 {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        TensorField11::value_at(self, point)
    }
    fn jet_at(&self, point: &[f64]) -> Result<MatJet> {
        TensorField11::jet_at(self, point)
    }
}

/// Rank-3 array of Christoffel symbols; `gamma[k][(i, j)]` is
/// the coefficient of e_k in nabla_{e_i} e_j.
pub type Christoffels = Vec<DMatrix<f64>>;

/// Levi-Civita connection coefficients at a point:
/// Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij).
pub fn christoffel_at(g: &MetricField, point: &[f64]) -> Result<Christoffels> {
    let jet = g.jet_at(point)?;
    christoffel_from_jet(&jet, point)
}

pub fn christoffel_from_jet(gjet: &MatJet, point: &[f64]) -> Result<Christoffels> {
    let m = gjet.val.nrows();
    let inv = gjet
        .val
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMetric { point: point.to_vec() })?;
    let mut gamma = vec![DMatrix::zeros(m, m); m];
    for k in 0..m {
        for i in 0..m {
            for j in i..m {
                let mut sum = 0.0;
                for l in 0..m {
                    sum += inv[(k, l)]
                        * (gjet.grad[i][(j, l)] + gjet.grad[j][(i, l)] - gjet.grad[l][(i, j)]);
                }
                let v = 0.5 * sum;
                gamma[k][(i, j)] = v;
                gamma[k][(j, i)] = v;
            }
        }
    }
    Ok(gamma)
}

/// Covariant derivative of a (1,1)-tensor field:
/// (nabla_i T)^j_k = d_i T^j_k + Gamma^j_il T^l_k - Gamma^l_ik T^j_l.
///
/// Returns `cd[i]` = the matrix (nabla_i T)^j_k. The partials of T come from
/// its jet evaluator, i.e. the derivative is taken through the pointwise
/// construction of T, not through a symbolic closed form.
pub fn cov_deriv_11_at(t: &dyn Field11, g: &MetricField, point: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    let tjet = t.jet_at(point)?;
    let gamma = christoffel_at(g, point)?;
    Ok(cov_deriv_from_parts(&tjet, &gamma))
}

pub fn cov_deriv_from_parts(tjet: &MatJet, gamma: &Christoffels) -> Vec<DMatrix<f64>> {
    let m = tjet.val.nrows();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut cd = tjet.grad[i].clone();
        for j in 0..m {
            for k in 0..m {
                let mut corr = 0.0;
                for l in 0..m {
                    corr += gamma[j][(i, l)] * tjet.val[(l, k)] - gamma[l][(i, k)] * tjet.val[(j, l)];
                }
                cd[(j, k)] += corr;
            }
        }
        out.push(cd);
    }
    out
}

/// Metric gradient of a scalar: grad f = g^{ij} d_j f.
pub fn grad_scalar_at(
    g: &MetricField,
    f: &dyn Fn(&[f64]) -> Result<Jet>,
    point: &[f64],
) -> Result<DVector<f64>> {
    let jet = f(point)?;
    grad_from_jet(g, &jet, point)
}

pub fn grad_from_jet(g: &MetricField, jet: &Jet, point: &[f64]) -> Result<DVector<f64>> {
    let gval = g.value_at(point)?;
    let inv = gval
        .try_inverse()
        .ok_or_else(|| Error::SingularMetric { point: point.to_vec() })?;
    let df = DVector::from_column_slice(&jet.grad);
    Ok(inv * df)
}

/// Position and velocity of a geodesic.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TimeElapsed,
    LeftDomain,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<(f64, GeodesicState)>,
    pub step: f64,
    pub termination: Termination,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map(|(t, _)| *t).unwrap_or(0.0)
    }
}

fn geodesic_rhs(g: &MetricField, x: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let gamma = christoffel_at(g, x)?;
    let m = x.len();
    let mut acc = vec![0.0; m];
    for k in 0..m {
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += gamma[k][(i, j)] * v[i] * v[j];
            }
        }
        acc[k] = -s;
    }
    Ok((v.to_vec(), acc))
}

/// Classical fixed-step RK4 on the geodesic equation
/// xdd^k = -Gamma^k_ij xd^i xd^j. Integration stops early (truncating at the
/// last in-box sample) when the position exits the domain box.
pub fn integrate_geodesic(
    g: &MetricField,
    domain: &ChartDomain,
    init: &GeodesicState,
    duration: f64,
    h: f64,
) -> Result<Trajectory> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    if !domain.contains(&init.x) {
        return Err(Error::InvalidArgument("initial position is outside the domain box".into()));
    }
    let m = init.x.len();
    let mut samples = vec![(0.0, init.clone())];
    let mut x = init.x.clone();
    let mut v = init.v.clone();
    let mut t = 0.0;
    let n_steps = (duration / h).ceil() as usize;
    let mut termination = Termination::TimeElapsed;

    for step_idx in 0..n_steps {
        let dt = (duration - t).min(h);
        if dt <= 0.0 {
            break;
        }
        let (k1x, k1v) = geodesic_rhs(g, &x, &v)?;
        let probe = |fx: &[f64], fv: &[f64], s: f64| -> (Vec<f64>, Vec<f64>) {
            let px: Vec<f64> = (0..m).map(|i| x[i] + s * fx[i]).collect();
            let pv: Vec<f64> = (0..m).map(|i| v[i] + s * fv[i]).collect();
            (px, pv)
        };
        let (x2, v2) = probe(&k1x, &k1v, 0.5 * dt);
        let (k2x, k2v) = geodesic_rhs(g, &x2, &v2)?;
        let (x3, v3) = probe(&k2x, &k2v, 0.5 * dt);
        let (k3x, k3v) = geodesic_rhs(g, &x3, &v3)?;
        let (x4, v4) = probe(&k3x, &k3v, dt);
        let (k4x, k4v) = geodesic_rhs(g, &x4, &v4)?;

        let mut nx = vec![0.0; m];
        let mut nv = vec![0.0; m];
        for i in 0..m {
            nx[i] = x[i] + dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            nv[i] = v[i] + dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        if nx.iter().chain(nv.iter()).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        if !domain.contains(&nx) {
            termination = Termination::LeftDomain;
            break;
        }
        t += dt;
        x = nx;
        v = nv;
        samples.push((t, GeodesicState { x: x.clone(), v: v.clone() }));
        let _ = step_idx;
    }
    Ok(Trajectory { samples, step: h, termination })
}

/// Kinetic energy g(v, v) at a trajectory sample.
pub fn kinetic_energy(g: &MetricField, state: &GeodesicState) -> Result<f64> {
    let gval = g.value_at(&state.x)?;
    let v = DVector::from_column_slice(&state.v);
    Ok((&gval * &v).dot(&v))
}

/// Max |(nabla_i g)_jk| at a point; metric compatibility should make this
/// vanish identically.
pub fn metric_compat_defect(g: &MetricField, point: &[f64]) -> Result<f64> {
    let gjet = g.jet_at(point)?;
    let gamma = christoffel_from_jet(&gjet, point)?;
    let m = g.dim();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let mut v = gjet.grad[i][(j, k)];
                for l in 0..m {
                    v -= gamma[l][(i, j)] * gjet.val[(l, k)] + gamma[l][(i, k)] * gjet.val[(j, l)];
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

/// Parse helper: a metric field given by strings.
pub fn metric_from_strings(rows: &[Vec<String>], coords: &[String]) -> Result<MetricField> {
    let mut components = Vec::with_capacity(rows.len());
    for row in rows {
        let mut out = Vec::with_capacity(row.len());
        for s in row {
            out.push(crate::expr::parse_expr(s, coords)?);
        }
        components.push(out);
    }
    MetricField::from_components(components)
}

pub fn tensor_from_strings(rows: &[Vec<String>], coords: &[String]) -> Result<TensorField11> {
    let mut components = Vec::with_capacity(rows.len());
    for row in rows {
        let mut out = Vec::with_capacity(row.len());
        for s in row {
            out.push(crate::expr::parse_expr(s, coords)?);
        }
        components.push(out);
    }
    TensorField11::from_components(components)
}
