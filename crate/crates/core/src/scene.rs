//! The (g, gbar, P, Q, eps) structure: validation of the defining conditions,
//! the pair tensor A, the vector field Lambda, the 1-form Phi, residuals of
//! the defining equations, and metric reconstruction from (g, A, eps).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    christoffel_at, cov_deriv_from_parts, ChartDomain, Field11, MetricField,
    TensorField11,
};
use crate::jet::{Jet, MatJet};
use crate::sampling::sample_box;
use crate::tol;

/// A validated bundle of two metrics and the skew tensors P, Q on a chart.
///
/// Construction performs only structural checks (dimensions, the epsilon
/// exclusions); the numerical conditions are verified by [`validate_scene`].
#[derive(Debug, Clone)]
pub struct PQScene {
    pub chart: ChartDomain,
    pub coords: Vec<String>,
    pub epsilon: f64,
    pub g: MetricField,
    pub gbar: MetricField,
    pub p: TensorField11,
    pub q: TensorField11,
    pub name: Option<String>,
}

impl PQScene {
    pub fn new(
        chart: ChartDomain,
        coords: Vec<String>,
        epsilon: f64,
        g: MetricField,
        gbar: MetricField,
        p: TensorField11,
        q: TensorField11,
    ) -> Result<Self> {
        let m = chart.dim();
        if coords.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: coords.len() });
        }
        for (what, d) in [
            ("g", g.dim()),
            ("gbar", gbar.dim()),
            ("P", p.dim()),
            ("Q", q.dim()),
        ] {
            if d != m {
                return Err(Error::InvalidArgument(format!(
                    "{what} has dimension {d}, chart has {m}"
                )));
            }
        }
        if (epsilon - 1.0).abs() <= tol::EPS_INTEGER_TOL
            || (epsilon - (m as f64 + 1.0)).abs() <= tol::EPS_INTEGER_TOL
        {
            return Err(Error::EpsilonExcluded(epsilon));
        }
        Ok(PQScene { chart, coords, epsilon, g, gbar, p, q, name: None })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Exponent of the determinant ratio in the definition of A.
    fn det_exponent(&self) -> f64 {
        1.0 / (self.dim() as f64 + 1.0 - self.epsilon)
    }

    /// A = (det gbar / det g)^(1/(m+1-eps)) gbar^-1 g, values only.
    pub fn a_value_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.g.value_at(point)?;
        let gbar = self.gbar.value_at(point)?;
        let det_g = g.determinant();
        let det_gbar = gbar.determinant();
        if det_g.abs() < tol::DET_A_FLOOR || det_gbar.abs() < tol::DET_A_FLOOR {
            return Err(Error::SingularMetric { point: point.to_vec() });
        }
        let rho = (det_gbar / det_g).powf(self.det_exponent());
        let gbar_inv = gbar
            .try_inverse()
            .ok_or_else(|| Error::SingularMetric { point: point.to_vec() })?;
        Ok(rho * gbar_inv * g)
    }

    /// A with first-order partials, differentiated through the det-ratio,
    /// inverse and product composition.
    pub fn a_jet_at(&self, point: &[f64]) -> Result<MatJet> {
        let gjet = self.g.jet_at(point)?;
        let gbarjet = self.gbar.jet_at(point)?;
        a_jet_from_parts(&gjet, &gbarjet, self.epsilon, point)
    }

    /// trace A as a scalar jet.
    pub fn trace_a_jet_at(&self, point: &[f64]) -> Result<Jet> {
        Ok(self.a_jet_at(point)?.trace_jet())
    }

    /// Lambda = grad(trace A) / (2 (1 - eps)), gradient taken with g.
    pub fn lambda_at(&self, point: &[f64]) -> Result<DVector<f64>> {
        let trace = self.trace_a_jet_at(point)?;
        let grad = crate::geometry::grad_from_jet(&self.g, &trace, point)?;
        Ok(grad / (2.0 * (1.0 - self.epsilon)))
    }

    /// Phi = -g A^-1 Lambda as a covector.
    pub fn phi_at(&self, point: &[f64]) -> Result<DVector<f64>> {
        let a = self.a_value_at(point)?;
        let lambda = self.lambda_at(point)?;
        phi_from_lambda(&self.g.value_at(point)?, &a, &lambda, point)
    }

    /// Iterator over every scalar expression the scene is built from.
    pub fn exprs(&self) -> Vec<&crate::expr::ScalarExpr> {
        self.g
            .exprs()
            .chain(self.gbar.exprs())
            .chain(self.p.exprs())
            .chain(self.q.exprs())
            .collect()
    }
}

/// The A-field of a scene viewed as a pointwise (1,1)-tensor evaluator.
pub struct AField<'a>(pub &'a PQScene);

impl Field11 for AField<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        self.0.a_value_at(point)
    }
    fn jet_at(&self, point: &[f64]) -> Result<MatJet> {
        self.0.a_jet_at(point)
    }
}

pub(crate) fn a_jet_from_parts(
    gjet: &MatJet,
    gbarjet: &MatJet,
    epsilon: f64,
    point: &[f64],
) -> Result<MatJet> {
    let m = gjet.val.nrows();
    let det_g = gjet.det(point)?;
    let det_gbar = gbarjet.det(point)?;
    let ratio = det_gbar.div(&det_g);
    if ratio.value <= 0.0 {
        return Err(Error::SingularMetric { point: point.to_vec() });
    }
    let rho = ratio.powf_const(1.0 / (m as f64 + 1.0 - epsilon));
    let gbar_inv = gbarjet.inverse(point)?;
    Ok(gbar_inv.mul(gjet).scale_jet(&rho))
}

/// Phi = -g A^-1 Lambda.
pub fn phi_from_lambda(
    g: &DMatrix<f64>,
    a: &DMatrix<f64>,
    lambda: &DVector<f64>,
    point: &[f64],
) -> Result<DVector<f64>> {
    let a_inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularA { point: point.to_vec() })?;
    Ok(-(g * a_inv * lambda))
}

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

/// Which defining equation a residual refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationTag {
    /// The algebraic conditions on (P, Q, eps).
    Conditions,
    /// The connection-difference equation defining the equivalence.
    PqProj,
    /// The first-order PDE on A.
    Main,
    /// The Q-free specialization of the PDE.
    Projective,
    /// The P = Q = J specialization of the connection equation.
    HProjective,
}

impl EquationTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EquationTag::Conditions => "conditions",
            EquationTag::PqProj => "pqproj",
            EquationTag::Main => "main",
            EquationTag::Projective => "projective",
            EquationTag::HProjective => "hprojective",
        }
    }
}

/// Equation defect at a single point, with the magnitude of the largest term
/// entering the equation for relative comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualSample {
    pub point: Vec<f64>,
    pub residual: f64,
    pub scale: f64,
}

impl ResidualSample {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale.max(tol::SCALE_FLOOR)
    }
}

/// Aggregated residual statistics over a sample set.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub equation: EquationTag,
    pub samples: Vec<ResidualSample>,
    pub max_relative: f64,
    pub mean_relative: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl ResidualReport {
    pub fn from_samples(
        equation: EquationTag,
        samples: Vec<ResidualSample>,
        tolerance: f64,
    ) -> Self {
        let rels: Vec<f64> = samples.iter().map(ResidualSample::relative).collect();
        let max_relative = rels.iter().cloned().fold(0.0, f64::max);
        let mean_relative = if rels.is_empty() {
            0.0
        } else {
            rels.iter().sum::<f64>() / rels.len() as f64
        };
        ResidualReport {
            equation,
            samples,
            max_relative,
            mean_relative,
            tolerance,
            passed: max_relative <= tolerance,
        }
    }

    /// Worst sample (largest relative residual).
    pub fn worst(&self) -> Option<&ResidualSample> {
        self.samples
            .iter()
            .max_by(|a, b| a.relative().total_cmp(&b.relative()))
    }
}

fn norm(v: &DVector<f64>) -> f64 {
    v.norm()
}

/// Residual of the main PDE at a point, maximized over coordinate basis
/// vectors X = e_i, Y = e_k (the equation is bilinear in X, Y, so the frame
/// is exhaustive).
pub fn pde_residual_at(scene: &PQScene, point: &[f64]) -> Result<ResidualSample> {
    residual_main_like(scene, point, true)
}

/// Residual of the Q-free specialization at a point.
pub fn projective_residual_at(scene: &PQScene, point: &[f64]) -> Result<ResidualSample> {
    residual_main_like(scene, point, false)
}

fn residual_main_like(scene: &PQScene, point: &[f64], with_pq_terms: bool) -> Result<ResidualSample> {
    let m = scene.dim();
    let g = scene.g.value_at(point)?;
    let ajet = scene.a_jet_at(point)?;
    let gamma = christoffel_at(&scene.g, point)?;
    let cd = cov_deriv_from_parts(&ajet, &gamma);
    let lambda = scene.lambda_at(point)?;

    // The covariant derivative is a sum d_i A + Gamma A - A Gamma; its
    // summands enter the equation even where they cancel, so they take part
    // in the scale (otherwise identically-zero equations divide noise by
    // noise).
    let gamma_amax = gamma.iter().map(|k| k.amax()).fold(0.0, f64::max);
    let base_scale = ajet
        .grad
        .iter()
        .map(|d| d.amax())
        .fold(0.0, f64::max)
        .max(gamma_amax * ajet.val.amax());

    let g_lambda: DVector<f64> = &g * &lambda;
    let (qval, p_lambda, gq, g_p_lambda) = if with_pq_terms {
        let pval = scene.p.value_at(point)?;
        let qval = scene.q.value_at(point)?;
        let p_lambda: DVector<f64> = &pval * &lambda;
        let gq = &g * &qval;
        let g_p_lambda: DVector<f64> = &g * &p_lambda;
        (Some(qval), Some(p_lambda), Some(gq), Some(g_p_lambda))
    } else {
        (None, None, None, None)
    };

    let mut worst = 0.0f64;
    let mut scale = base_scale;
    for i in 0..m {
        for k in 0..m {
            let lhs: DVector<f64> = cd[i].column(k).into();
            let t1: DVector<f64> = g[(k, i)] * &lambda;
            let mut t2 = DVector::zeros(m);
            t2[i] = g_lambda[k];
            let mut rhs = &t1 + &t2;
            scale = scale.max(norm(&lhs)).max(norm(&t1)).max(norm(&t2));
            if with_pq_terms {
                let qval = qval.as_ref().unwrap();
                let p_lambda = p_lambda.as_ref().unwrap();
                let gq = gq.as_ref().unwrap();
                let g_p_lambda = g_p_lambda.as_ref().unwrap();
                let t3: DVector<f64> = gq[(k, i)] * p_lambda;
                let t4: DVector<f64> = g_p_lambda[k] * DVector::from(qval.column(i));
                scale = scale.max(norm(&t3)).max(norm(&t4));
                rhs += &t3 + &t4;
            }
            worst = worst.max(norm(&(lhs - rhs)));
        }
    }
    Ok(ResidualSample { point: point.to_vec(), residual: worst, scale: scale.max(tol::SCALE_FLOOR) })
}

/// Residual of the connection-difference equation at a point, with Phi
/// recovered from Lambda; both Christoffel sets are computed independently
/// from g and gbar.
pub fn connection_diff_residual_at(scene: &PQScene, point: &[f64]) -> Result<ResidualSample> {
    let m = scene.dim();
    let gamma = christoffel_at(&scene.g, point)?;
    let gamma_bar = christoffel_at(&scene.gbar, point)?;
    let phi = scene.phi_at(point)?;
    let pval = scene.p.value_at(point)?;
    let qval = scene.q.value_at(point)?;

    // phi_p[i] = Phi(P e_i)
    let phi_p: DVector<f64> = pval.transpose() * &phi;

    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let mut diff = DVector::zeros(m);
            let mut lhs_bar = DVector::zeros(m);
            let mut lhs_g = DVector::zeros(m);
            for k in 0..m {
                lhs_bar[k] = gamma_bar[k][(i, j)];
                lhs_g[k] = gamma[k][(i, j)];
                diff[k] = lhs_bar[k] - lhs_g[k];
            }
            let mut t1 = DVector::zeros(m);
            t1[j] = phi[i];
            let mut t2 = DVector::zeros(m);
            t2[i] = phi[j];
            let t3: DVector<f64> = phi_p[i] * DVector::from(qval.column(j));
            let t4: DVector<f64> = phi_p[j] * DVector::from(qval.column(i));
            let rhs = &t1 + &t2 - &t3 - &t4;
            scale = scale
                .max(norm(&lhs_bar))
                .max(norm(&lhs_g))
                .max(norm(&t1))
                .max(norm(&t2))
                .max(norm(&t3))
                .max(norm(&t4));
            worst = worst.max(norm(&(diff - rhs)));
        }
    }
    Ok(ResidualSample { point: point.to_vec(), residual: worst, scale: scale.max(tol::SCALE_FLOOR) })
}

/// Evaluate one residual suite over a seeded sample of the domain.
pub fn residual_report(
    scene: &PQScene,
    equation: EquationTag,
    n_samples: usize,
    seed: u64,
    tolerance: f64,
) -> Result<ResidualReport> {
    let points = sample_box(&scene.chart, n_samples, seed);
    let mut samples = Vec::with_capacity(points.len());
    for p in &points {
        let s = match equation {
            EquationTag::Main => pde_residual_at(scene, p)?,
            EquationTag::Projective => projective_residual_at(scene, p)?,
            EquationTag::PqProj | EquationTag::HProjective => {
                connection_diff_residual_at(scene, p)?
            }
            EquationTag::Conditions => {
                return Err(Error::InvalidArgument(
                    "use validate_scene for the algebraic conditions".into(),
                ))
            }
        };
        samples.push(s);
    }
    Ok(ResidualReport::from_samples(equation, samples, tolerance))
}

// ---------------------------------------------------------------------------
// Scene validation
// ---------------------------------------------------------------------------

/// One named validation check with its worst offender.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub max_relative: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub samples: usize,
    pub seed: u64,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> Vec<&ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

struct CheckAccum {
    name: &'static str,
    tolerance: f64,
    max_relative: f64,
    worst_point: Vec<f64>,
}

impl CheckAccum {
    fn new(name: &'static str, tolerance: f64) -> Self {
        CheckAccum { name, tolerance, max_relative: 0.0, worst_point: Vec::new() }
    }

    fn update(&mut self, rel: f64, point: &[f64]) {
        if rel > self.max_relative || self.worst_point.is_empty() {
            self.max_relative = rel;
            self.worst_point = point.to_vec();
        }
    }

    fn finish(self) -> ValidationCheck {
        ValidationCheck {
            name: self.name.to_string(),
            max_relative: self.max_relative,
            tolerance: self.tolerance,
            passed: self.max_relative <= self.tolerance,
            worst_point: self.worst_point,
        }
    }
}

fn skew_defect(metric: &DMatrix<f64>, t: &DMatrix<f64>) -> (f64, f64) {
    // g(T., .) + g(., T.) as matrices: G T + (G T)^T.
    let gt = metric * t;
    let defect = (&gt + gt.transpose()).amax();
    (defect, gt.amax())
}

/// Verify every algebraic condition of the structure at seeded sample points.
pub fn validate_scene(scene: &PQScene, n_samples: usize, seed: u64) -> Result<ValidationReport> {
    let m = scene.dim();
    let points = sample_box(&scene.chart, n_samples, seed);

    let mut pd_g = CheckAccum::new("g_positive_definite", 0.0);
    let mut pd_gbar = CheckAccum::new("gbar_positive_definite", 0.0);
    let mut skew_pg = CheckAccum::new("P_skew_wrt_g", tol::SCENE_INVARIANT_TOL);
    let mut skew_qg = CheckAccum::new("Q_skew_wrt_g", tol::SCENE_INVARIANT_TOL);
    let mut skew_pgbar = CheckAccum::new("P_skew_wrt_gbar", tol::SCENE_INVARIANT_TOL);
    let mut skew_qgbar = CheckAccum::new("Q_skew_wrt_gbar", tol::SCENE_INVARIANT_TOL);
    let mut pq_eps = CheckAccum::new("PQ_equals_eps_Id", tol::SCENE_INVARIANT_TOL);
    let mut commute_p = CheckAccum::new("A_commutes_with_P", tol::SCENE_INVARIANT_TOL);
    let mut commute_q = CheckAccum::new("A_commutes_with_Q", tol::SCENE_INVARIANT_TOL);
    let mut self_adj_g = CheckAccum::new("A_self_adjoint_wrt_g", tol::SELF_ADJOINT_TOL);
    let mut self_adj_gbar = CheckAccum::new("A_self_adjoint_wrt_gbar", tol::SELF_ADJOINT_TOL);
    let mut nondegenerate = CheckAccum::new("A_nondegenerate", 0.0);

    for point in &points {
        let gval = scene.g.value_at(point)?;
        let gbarval = scene.gbar.value_at(point)?;
        let pval = scene.p.value_at(point)?;
        let qval = scene.q.value_at(point)?;

        let min_g = scene.g.min_eigenvalue_at(point)?;
        let min_gbar = scene.gbar.min_eigenvalue_at(point)?;
        // Encode positive-definiteness as a residual: positive part of
        // (threshold - min eigenvalue), so zero means pass.
        pd_g.update((tol::METRIC_PD_MIN_EIG - min_g).max(0.0), point);
        pd_gbar.update((tol::METRIC_PD_MIN_EIG - min_gbar).max(0.0), point);
        if min_g <= tol::METRIC_PD_MIN_EIG || min_gbar <= tol::METRIC_PD_MIN_EIG {
            continue; // A is meaningless here; the PD check already failed.
        }

        let (d, s) = skew_defect(&gval, &pval);
        skew_pg.update(d / (1.0 + s), point);
        let (d, s) = skew_defect(&gval, &qval);
        skew_qg.update(d / (1.0 + s), point);
        let (d, s) = skew_defect(&gbarval, &pval);
        skew_pgbar.update(d / (1.0 + s), point);
        let (d, s) = skew_defect(&gbarval, &qval);
        skew_qgbar.update(d / (1.0 + s), point);

        let pq = &pval * &qval;
        let target = DMatrix::identity(m, m) * scene.epsilon;
        let pq_scale = 1.0 + pval.amax().max(qval.amax()).max(scene.epsilon.abs());
        pq_eps.update((&pq - target).amax() / pq_scale, point);

        let a = scene.a_value_at(point)?;
        let a_scale = 1.0 + a.amax();
        commute_p.update((&a * &pval - &pval * &a).amax() / (a_scale * (1.0 + pval.amax())), point);
        commute_q.update((&a * &qval - &qval * &a).amax() / (a_scale * (1.0 + qval.amax())), point);

        let ga = &gval * &a;
        self_adj_g.update((&ga - ga.transpose()).amax() / (1.0 + ga.amax()), point);
        let gbara = &gbarval * &a;
        self_adj_gbar.update((&gbara - gbara.transpose()).amax() / (1.0 + gbara.amax()), point);

        nondegenerate.update((tol::DET_A_FLOOR - a.determinant().abs()).max(0.0), point);
    }

    let checks: Vec<ValidationCheck> = vec![
        pd_g, pd_gbar, skew_pg, skew_qg, skew_pgbar, skew_qgbar, pq_eps, commute_p, commute_q,
        self_adj_g, self_adj_gbar, nondegenerate,
    ]
    .into_iter()
    .map(CheckAccum::finish)
    .collect();
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { checks, samples: points.len(), seed, passed })
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

/// Pointwise metric evaluator produced by [`reconstruct_gbar`]:
/// gbar = (det A)^(-1/(1-eps)) g A^-1.
pub struct ReconstructedMetric<'a> {
    g: &'a MetricField,
    a: &'a dyn Field11,
    epsilon: f64,
}

impl ReconstructedMetric<'_> {
    pub fn value_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let a = self.a.value_at(point)?;
        // Positivity gate: reconstruction is only defined for positive A. A is
        // g-self-adjoint by the caller's contract, so the eigenvalues of the
        // symmetric part estimate the spectrum well enough for the gate.
        let sym = (&a + a.transpose()) * 0.5;
        let min_sym = sym.symmetric_eigenvalues().min();
        if min_sym <= 0.0 {
            return Err(Error::NonPositiveA(min_sym));
        }
        let g = self.g.value_at(point)?;
        let det_a = a.determinant();
        if det_a.abs() < tol::DET_A_FLOOR {
            return Err(Error::SingularA { point: point.to_vec() });
        }
        let a_inv = a
            .try_inverse()
            .ok_or_else(|| Error::SingularA { point: point.to_vec() })?;
        let scale = det_a.powf(-1.0 / (1.0 - self.epsilon));
        Ok(scale * g * a_inv)
    }

    pub fn jet_at(&self, point: &[f64]) -> Result<MatJet> {
        let gjet = self.g.jet_at(point)?;
        let ajet = self.a.jet_at(point)?;
        let det = ajet.det(point)?;
        if det.value <= 0.0 {
            return Err(Error::NonPositiveA(det.value));
        }
        let scale = det.powf_const(-1.0 / (1.0 - self.epsilon));
        let a_inv = ajet.inverse(point)?;
        Ok(gjet.mul(&a_inv).scale_jet(&scale))
    }
}

/// The converse construction: from g and a positive g-self-adjoint solution A
/// commuting with P and Q, produce the partner metric evaluator.
pub fn reconstruct_gbar<'a>(
    g: &'a MetricField,
    a: &'a dyn Field11,
    epsilon: f64,
) -> ReconstructedMetric<'a> {
    ReconstructedMetric { g, a, epsilon }
}

/// compute_A applied to (g, gbar-evaluator): used by the round-trip identity
/// check against evaluator-backed metrics.
pub fn compute_a_from_values(
    g: &DMatrix<f64>,
    gbar: &DMatrix<f64>,
    epsilon: f64,
    point: &[f64],
) -> Result<DMatrix<f64>> {
    let m = g.nrows();
    let det_g = g.determinant();
    let det_gbar = gbar.determinant();
    if det_g.abs() < tol::DET_A_FLOOR || det_gbar.abs() < tol::DET_A_FLOOR {
        return Err(Error::SingularMetric { point: point.to_vec() });
    }
    let rho = (det_gbar / det_g).powf(1.0 / (m as f64 + 1.0 - epsilon));
    let gbar_inv = gbar
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMetric { point: point.to_vec() })?;
    Ok(rho * gbar_inv * g)
}
