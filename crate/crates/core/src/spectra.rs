//! Eigenstructure of the pair tensor A: the g-self-adjoint eigenproblem,
//! tolerance clustering, eigenvalue gradients by first-order perturbation,
//! branch tracing over sample paths, and the structural classification of a
//! scene (affine / projective / eps-class / inconsistent).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling::sample_box;
use crate::scene::{pde_residual_at, projective_residual_at, PQScene};
use crate::tol;

/// One eigenvalue cluster under the gap tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    pub value: f64,
    pub multiplicity: usize,
    pub members: Vec<usize>,
}

/// Sorted eigenvalues of A at a point with g-orthonormal eigenvectors and
/// tolerance-clustered multiplicities.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Columns are g-orthonormal eigenvectors matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub clusters: Vec<Cluster>,
    pub cluster_gap: f64,
}

impl Spectrum {
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    /// Index of the cluster containing eigenvalue index `i`.
    pub fn cluster_of(&self, i: usize) -> usize {
        self.clusters
            .iter()
            .position(|c| c.members.contains(&i))
            .expect("every index belongs to a cluster")
    }

    /// True when eigenvalue `i` is alone in its cluster and separated from
    /// the neighbouring clusters by more than `gap`.
    pub fn is_simple(&self, i: usize, gap: f64) -> bool {
        let c = self.cluster_of(i);
        if self.clusters[c].multiplicity != 1 {
            return false;
        }
        let v = self.eigenvalues[i];
        self.eigenvalues
            .iter()
            .enumerate()
            .all(|(j, &w)| j == i || (w - v).abs() > gap)
    }
}

/// Group sorted eigenvalues into clusters with consecutive gap <= delta.
pub fn cluster_eigenvalues(sorted: &[f64], delta: f64) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if (v - sorted[*c.members.last().unwrap()]).abs() <= delta => {
                c.members.push(i);
                c.multiplicity += 1;
                // Cluster value is the running mean of its members.
                c.value += (v - c.value) / c.multiplicity as f64;
            }
            _ => clusters.push(Cluster { value: v, multiplicity: 1, members: vec![i] }),
        }
    }
    clusters
}

/// Solve the g-self-adjoint eigenproblem for A at a point via the Cholesky
/// reduction: with G = L L^T, the symmetric matrix L^-1 (G A) L^-T has the
/// eigenvalues of A, and V = L^-T W is g-orthonormal.
pub fn eigen_at(scene: &PQScene, point: &[f64]) -> Result<Spectrum> {
    let g = scene.g.value_at(point)?;
    let a = scene.a_value_at(point)?;
    eigen_from_values(&g, &a, point)
}

pub fn eigen_from_values(g: &DMatrix<f64>, a: &DMatrix<f64>, point: &[f64]) -> Result<Spectrum> {
    let m = g.nrows();
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularMetric { point: point.to_vec() })?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMetric { point: point.to_vec() })?;
    let ga = g * a;
    let sym = &l_inv * &ga * l_inv.transpose();
    // Symmetrize to wash out round-off before the symmetric solver.
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(m, m);
    let back = l_inv.transpose();
    for (col, &i) in order.iter().enumerate() {
        let w = eig.eigenvectors.column(i);
        let v = &back * w;
        eigenvectors.set_column(col, &v);
    }
    let radius = eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let gap = tol::CLUSTER_GAP_FACTOR * (1.0 + radius);
    let clusters = cluster_eigenvalues(&eigenvalues, gap);
    Ok(Spectrum { eigenvalues, eigenvectors, clusters, cluster_gap: gap })
}

/// g-gradient of a simple eigenvalue branch by first-order perturbation:
/// d_w mu = v^T (d_w(GA) - mu d_w G) v / (v^T G v), partials by autodiff.
pub fn eigenvalue_gradient_at(
    scene: &PQScene,
    point: &[f64],
    branch: usize,
) -> Result<DVector<f64>> {
    let spectrum = eigen_at(scene, point)?;
    if branch >= spectrum.eigenvalues.len() {
        return Err(Error::InvalidArgument(format!("branch index {branch} out of range")));
    }
    if !spectrum.is_simple(branch, tol::SIMPLE_EIG_GAP) {
        let gap = spectrum
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != branch)
            .map(|(_, &w)| (w - spectrum.eigenvalues[branch]).abs())
            .fold(f64::INFINITY, f64::min);
        return Err(Error::ClusteredEigenvalue { branch, gap });
    }
    let mu = spectrum.eigenvalues[branch];
    let v: DVector<f64> = spectrum.eigenvectors.column(branch).into();

    let gjet = scene.g.jet_at(point)?;
    let ajet = scene.a_jet_at(point)?;
    let gajet = MatJetPair { g: &gjet, a: &ajet };
    let m = point.len();
    let mut dmu = DVector::zeros(m);
    let vgv = (&gjet.val * &v).dot(&v);
    for w in 0..m {
        let dga = gajet.d_ga(w);
        let dg = &gjet.grad[w];
        let num = (&dga * &v).dot(&v) - mu * (dg * &v).dot(&v);
        dmu[w] = num / vgv;
    }
    // Raise the differential with g.
    let g_inv = gjet
        .val
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMetric { point: point.to_vec() })?;
    Ok(g_inv * dmu)
}

struct MatJetPair<'a> {
    g: &'a crate::jet::MatJet,
    a: &'a crate::jet::MatJet,
}

impl MatJetPair<'_> {
    fn d_ga(&self, w: usize) -> DMatrix<f64> {
        &self.g.grad[w] * &self.a.val + &self.g.val * &self.a.grad[w]
    }
}

// ---------------------------------------------------------------------------
// Branch tracing
// ---------------------------------------------------------------------------

/// Eigenvalue branches matched along a connected sample path.
#[derive(Debug, Clone)]
pub struct EigenvalueTrace {
    /// Sample points in path order.
    pub points: Vec<Vec<f64>>,
    /// branch_values[b][s] = value of branch b at sample s.
    pub branch_values: Vec<Vec<f64>>,
    /// Per-branch max - min over the path.
    pub variation: Vec<f64>,
    /// Branch counts as constant when its variation is below delta_const.
    pub constant: Vec<bool>,
    pub delta_const: f64,
    /// Samples where nearest-value matching was ambiguous (skipped).
    pub ambiguous_samples: Vec<usize>,
    pub spectra: Vec<Spectrum>,
}

/// Trace eigenvalue branches over a path of sample points. Both the previous
/// and current eigenvalue lists are sorted, so the order-preserving identity
/// assignment is the nearest-value matching; samples where adjacent branches
/// enter or leave a near-degeneracy (a possible crossing) are flagged rather
/// than resolved, and multiplicity assertions skip them.
pub fn trace_branches(scene: &PQScene, path: &[Vec<f64>]) -> Result<EigenvalueTrace> {
    if path.is_empty() {
        return Err(Error::InvalidArgument("empty sample path".into()));
    }
    let m = scene.dim();
    let mut spectra = Vec::with_capacity(path.len());
    for p in path {
        spectra.push(eigen_at(scene, p)?);
    }
    let radius = spectra
        .iter()
        .map(Spectrum::spectral_radius)
        .fold(0.0, f64::max);
    let near_gap = tol::SIMPLE_EIG_GAP * (1.0 + radius);
    let mut branch_values: Vec<Vec<f64>> = vec![Vec::with_capacity(path.len()); m];
    for spec in &spectra {
        for b in 0..m {
            branch_values[b].push(spec.eigenvalues[b]);
        }
    }
    let mut ambiguous = Vec::new();
    let adjacent_degenerate = |spec: &Spectrum| -> Vec<bool> {
        (0..m.saturating_sub(1))
            .map(|b| (spec.eigenvalues[b + 1] - spec.eigenvalues[b]).abs() <= near_gap)
            .collect()
    };
    for s in 1..spectra.len() {
        let before = adjacent_degenerate(&spectra[s - 1]);
        let after = adjacent_degenerate(&spectra[s]);
        if before
            .iter()
            .zip(&after)
            .any(|(&b, &a)| b != a)
        {
            ambiguous.push(s);
        }
    }
    let delta_const = tol::CONST_BRANCH_FACTOR * (1.0 + radius);
    let variation: Vec<f64> = branch_values
        .iter()
        .map(|vals| {
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            max - min
        })
        .collect();
    let constant = variation.iter().map(|&v| v <= delta_const).collect();
    Ok(EigenvalueTrace {
        points: path.to_vec(),
        branch_values,
        variation,
        constant,
        delta_const,
        ambiguous_samples: ambiguous,
        spectra,
    })
}

/// Snake-ordered grid over the chart box (adjacent samples are neighbours,
/// as branch matching requires a connected path). `n` points per axis.
pub fn grid_path(chart: &crate::geometry::ChartDomain, n: usize) -> Vec<Vec<f64>> {
    let m = chart.dim();
    let axis_values: Vec<Vec<f64>> = (0..m)
        .map(|axis| {
            let (lo, hi) = chart.interval(axis);
            (0..n)
                .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
                .collect()
        })
        .collect();
    let total = n.pow(m as u32);
    let mut path = Vec::with_capacity(total);
    let mut idx = vec![0usize; m];
    for flat in 0..total {
        let mut rem = flat;
        for axis in (0..m).rev() {
            idx[axis] = rem % n;
            rem /= n;
        }
        // Boustrophedon: reverse an axis whenever the sum of the preceding
        // indices is odd, so consecutive points stay adjacent.
        let mut point = Vec::with_capacity(m);
        let mut prefix = 0usize;
        for axis in 0..m {
            let i = if prefix % 2 == 1 { n - 1 - idx[axis] } else { idx[axis] };
            point.push(axis_values[axis][i]);
            prefix += idx[axis];
        }
        path.push(point);
    }
    path
}

// ---------------------------------------------------------------------------
// Lemma-style checks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub worst: f64,
    pub tolerance: f64,
}

/// Gradient/eigenvector compatibility at simple-spectrum sample points:
/// (a) grad mu_i is g-orthogonal to every other eigenvector;
/// (b) grad mu_i lies in the mu_i eigenspace.
pub fn lemma_eigenvectors_check(scene: &PQScene, points: &[Vec<f64>]) -> Result<Vec<CheckOutcome>> {
    let mut worst_a = 0.0f64;
    let mut worst_b = 0.0f64;
    let mut used = 0usize;
    for p in points {
        let spectrum = eigen_at(scene, p)?;
        let m = scene.dim();
        let simple: Vec<usize> = (0..m)
            .filter(|&i| spectrum.is_simple(i, tol::SIMPLE_EIG_GAP))
            .collect();
        if simple.is_empty() {
            continue;
        }
        used += 1;
        let g = scene.g.value_at(p)?;
        let a = scene.a_value_at(p)?;
        let radius = spectrum.spectral_radius();
        for &i in &simple {
            let grad = eigenvalue_gradient_at(scene, p, i)?;
            let grad_norm = grad.norm();
            // (a) X(mu) = 0 for eigenvectors X of other eigenvalues.
            for j in 0..m {
                if j == i {
                    continue;
                }
                let vj: DVector<f64> = spectrum.eigenvectors.column(j).into();
                let pairing = ((&g * &grad).dot(&vj)).abs();
                let scale = (grad_norm * (&g * &vj).dot(&vj).sqrt()).max(tol::SCALE_FLOOR);
                worst_a = worst_a.max(pairing / scale.max(1e-300));
            }
            // (b) (A - mu_i) grad mu_i = 0.
            if grad_norm > 0.0 {
                let defect = (&a * &grad - spectrum.eigenvalues[i] * &grad).norm();
                worst_b = worst_b.max(defect / (grad_norm * (1.0 + radius)));
            }
        }
    }
    if used == 0 {
        return Err(Error::NoSimpleSpectrum);
    }
    Ok(vec![
        CheckOutcome {
            name: "grad_mu_orthogonal_to_other_eigenvectors".into(),
            passed: worst_a <= tol::GRAD_ORTHOGONALITY_TOL,
            detail: format!("max |g(grad mu_i, v_j)| / scale over {used} points"),
            worst: worst_a,
            tolerance: tol::GRAD_ORTHOGONALITY_TOL,
        },
        CheckOutcome {
            name: "grad_mu_in_own_eigenspace".into(),
            passed: worst_b <= tol::GRAD_EIGENSPACE_TOL,
            detail: format!("max |(A - mu_i) grad mu_i| / (|grad mu_i| scale) over {used} points"),
            worst: worst_b,
            tolerance: tol::GRAD_EIGENSPACE_TOL,
        },
    ])
}

#[derive(Debug, Clone, Serialize)]
pub struct DimCheckReport {
    pub checks: Vec<CheckOutcome>,
    pub non_constant_branches: Vec<usize>,
    pub multiplicities_seen: Vec<usize>,
    pub ambiguous_samples: usize,
    pub passed: bool,
}

/// Multiplicity of the non-constant eigenvalue branches must equal 1 - eps;
/// for eps != 0 every eigenspace must additionally be even-dimensional and
/// carry a full-rank restriction of g(P., .).
pub fn lemma_dim_check(scene: &PQScene, path: &[Vec<f64>]) -> Result<DimCheckReport> {
    let trace = trace_branches(scene, path)?;
    let expected = 1.0 - scene.epsilon;
    let mut checks = Vec::new();
    let mut non_constant = Vec::new();
    let mut mults_seen = Vec::new();
    let mut mult_ok = true;
    let mut worst_mult = 0.0f64;

    for (b, &is_const) in trace.constant.iter().enumerate() {
        if is_const {
            continue;
        }
        non_constant.push(b);
        for (s, spec) in trace.spectra.iter().enumerate() {
            if trace.ambiguous_samples.contains(&s) {
                continue;
            }
            // Find the cluster whose value is nearest the branch value.
            let v = trace.branch_values[b][s];
            let cluster = spec
                .clusters
                .iter()
                .min_by(|x, y| (x.value - v).abs().total_cmp(&(y.value - v).abs()))
                .expect("spectrum has clusters");
            let mult = cluster.multiplicity;
            if !mults_seen.contains(&mult) {
                mults_seen.push(mult);
            }
            let defect = (mult as f64 - expected).abs();
            worst_mult = worst_mult.max(defect);
            if defect != 0.0 {
                mult_ok = false;
            }
        }
    }
    checks.push(CheckOutcome {
        name: "non_constant_multiplicity_equals_one_minus_eps".into(),
        passed: mult_ok,
        detail: format!(
            "expected multiplicity {expected}, saw {mults_seen:?} on branches {non_constant:?}"
        ),
        worst: worst_mult,
        tolerance: 0.0,
    });

    if scene.epsilon != 0.0 {
        let mut even_ok = true;
        let mut rank_worst = f64::INFINITY;
        for (s, spec) in trace.spectra.iter().enumerate() {
            if trace.ambiguous_samples.contains(&s) {
                continue;
            }
            let g = scene.g.value_at(&trace.points[s])?;
            let pv = scene.p.value_at(&trace.points[s])?;
            for cluster in &spec.clusters {
                if cluster.multiplicity % 2 != 0 {
                    even_ok = false;
                    continue;
                }
                // g(P., .) restricted to the eigenspace, in the cluster basis.
                let k = cluster.multiplicity;
                let mut restricted = DMatrix::zeros(k, k);
                for (ai, &i) in cluster.members.iter().enumerate() {
                    for (bj, &j) in cluster.members.iter().enumerate() {
                        let vi: DVector<f64> = spec.eigenvectors.column(i).into();
                        let vj: DVector<f64> = spec.eigenvectors.column(j).into();
                        restricted[(ai, bj)] = (&g * &pv * &vj).dot(&vi);
                    }
                }
                let svd = restricted.clone().svd(false, false);
                let smax = svd.singular_values.max();
                let smin = svd.singular_values.min();
                rank_worst = rank_worst.min(smin / smax.max(tol::SCALE_FLOOR));
            }
        }
        checks.push(CheckOutcome {
            name: "eigenspaces_even_dimensional".into(),
            passed: even_ok,
            detail: "every eigenspace of A must be even-dimensional when eps != 0".into(),
            worst: if even_ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
        });
        checks.push(CheckOutcome {
            name: "p_form_full_rank_on_eigenspaces".into(),
            passed: rank_worst > tol::P_FORM_RANK_TOL,
            detail: "smallest relative singular value of g(P.,.) on eigenspaces".into(),
            worst: rank_worst,
            tolerance: tol::P_FORM_RANK_TOL,
        });
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(DimCheckReport {
        checks,
        non_constant_branches: non_constant,
        multiplicities_seen: mults_seen,
        ambiguous_samples: trace.ambiguous_samples.len(),
        passed,
    })
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Affine,
    ProjectiveEps0,
    PqEpsClass { epsilon: f64 },
    Inconsistent,
}

impl Verdict {
    pub fn as_str(&self) -> String {
        match self {
            Verdict::Affine => "affine".into(),
            Verdict::ProjectiveEps0 => "projective_eps0".into(),
            Verdict::PqEpsClass { epsilon } => format!("pq_eps_class({epsilon})"),
            Verdict::Inconsistent => "inconsistent".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub evidence: Vec<CheckOutcome>,
}

/// Classify a validated scene that satisfies the main PDE:
/// affine when Lambda vanishes everywhere; projective for eps = 0 with
/// P Lambda = 0 and the Q-free PDE satisfied; otherwise the eps-class gate
/// (odd negative integer eps, multiplicity check). Any violated expectation
/// yields `Inconsistent` with named evidence.
pub fn classify_pair(scene: &PQScene, n_samples: usize, seed: u64) -> Result<Classification> {
    let points = sample_box(&scene.chart, n_samples, seed);
    let mut evidence = Vec::new();

    // Gate: the scene must satisfy the main PDE to be a pair at all.
    let mut pde_worst = 0.0f64;
    for p in &points {
        pde_worst = pde_worst.max(pde_residual_at(scene, p)?.relative());
    }
    let pde_ok = pde_worst <= tol::RESIDUAL_TOL;
    evidence.push(CheckOutcome {
        name: "main_pde_residual".into(),
        passed: pde_ok,
        detail: "max relative residual of the defining PDE".into(),
        worst: pde_worst,
        tolerance: tol::RESIDUAL_TOL,
    });

    // Affine test: Lambda = 0 at every sample, relative to the size of A
    // per unit length of the chart.
    let mut lambda_worst = 0.0f64;
    let mut a_worst = 0.0f64;
    for p in &points {
        lambda_worst = lambda_worst.max(scene.lambda_at(p)?.norm());
        a_worst = a_worst.max(scene.a_value_at(p)?.amax());
    }
    let lambda_scale = (1.0 + a_worst) / scene.chart.scale();
    let affine = lambda_worst <= tol::AFFINE_LAMBDA_TOL * lambda_scale;
    evidence.push(CheckOutcome {
        name: "lambda_vanishes".into(),
        passed: affine,
        detail: "max |Lambda| over samples, scaled".into(),
        worst: lambda_worst / lambda_scale,
        tolerance: tol::AFFINE_LAMBDA_TOL,
    });

    if affine && pde_ok {
        return Ok(Classification { verdict: Verdict::Affine, evidence });
    }

    if scene.epsilon == 0.0 {
        // P Lambda = 0 and the Q-free PDE must hold.
        let mut p_lambda_worst = 0.0f64;
        let mut proj_worst = 0.0f64;
        for p in &points {
            let lambda = scene.lambda_at(p)?;
            let pv = scene.p.value_at(p)?;
            p_lambda_worst =
                p_lambda_worst.max((pv * &lambda).norm() / (1.0 + lambda.norm()));
            proj_worst = proj_worst.max(projective_residual_at(scene, p)?.relative());
        }
        let p_lambda_ok = p_lambda_worst <= tol::P_LAMBDA_TOL;
        let proj_ok = proj_worst <= tol::RESIDUAL_TOL;
        evidence.push(CheckOutcome {
            name: "p_lambda_vanishes".into(),
            passed: p_lambda_ok,
            detail: "max |P Lambda| / (1 + |Lambda|)".into(),
            worst: p_lambda_worst,
            tolerance: tol::P_LAMBDA_TOL,
        });
        evidence.push(CheckOutcome {
            name: "projective_pde_residual".into(),
            passed: proj_ok,
            detail: "max relative residual of the Q-free PDE".into(),
            worst: proj_worst,
            tolerance: tol::RESIDUAL_TOL,
        });
        let verdict = if pde_ok && p_lambda_ok && proj_ok {
            Verdict::ProjectiveEps0
        } else {
            Verdict::Inconsistent
        };
        return Ok(Classification { verdict, evidence });
    }

    // eps must be an odd negative integer.
    let rounded = scene.epsilon.round();
    let eps_ok = (scene.epsilon - rounded).abs() <= tol::EPS_INTEGER_TOL
        && rounded < 0.0
        && (rounded as i64).rem_euclid(2) == 1;
    evidence.push(CheckOutcome {
        name: "eps_is_odd_negative_integer".into(),
        passed: eps_ok,
        detail: format!("eps = {}", scene.epsilon),
        worst: (scene.epsilon - rounded).abs(),
        tolerance: tol::EPS_INTEGER_TOL,
    });

    let grid = grid_path(&scene.chart, 16);
    let dim_report = lemma_dim_check(scene, &grid)?;
    let dim_ok = dim_report.passed;
    evidence.extend(dim_report.checks.iter().cloned());

    let verdict = if pde_ok && eps_ok && dim_ok {
        Verdict::PqEpsClass { epsilon: rounded }
    } else {
        Verdict::Inconsistent
    };
    Ok(Classification { verdict, evidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::geometry::{metric_from_strings, ChartDomain, TensorField11};

    fn coords2() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    fn strings(rows: &[[&str; 2]; 2]) -> Vec<Vec<String>> {
        rows.iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    fn tensor(rows: &[[&str; 2]; 2], cs: &[String]) -> TensorField11 {
        TensorField11::from_components(
            rows.iter()
                .map(|r| r.iter().map(|s| parse_expr(s, cs).unwrap()).collect())
                .collect(),
        )
        .unwrap()
    }

    fn dini() -> PQScene {
        crate::scene::tests::dini_scene()
    }

    #[test]
    fn clustering_respects_tolerance() {
        let clusters = cluster_eigenvalues(&[2.0, 2.0 + 1e-12, 5.0], 1e-9);
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].multiplicity, 2);
        assert!((clusters[0].value - 2.0).abs() < 1e-9);
        assert_eq!(clusters[1].multiplicity, 1);
        assert_eq!(clusters[1].value, 5.0);
        // Multiplicities sum to m.
        assert_eq!(clusters.iter().map(|c| c.multiplicity).sum::<usize>(), 3);
    }

    #[test]
    fn identity_a_gives_single_cluster() {
        let cs = coords2();
        let g = metric_from_strings(&strings(&[["1", "0"], ["0", "1"]]), &cs).unwrap();
        let chart = ChartDomain::new(vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let z = tensor(&[["0", "0"], ["0", "0"]], &cs);
        let scene =
            PQScene::new(chart, cs.clone(), 0.0, g.clone(), g, z.clone(), z).unwrap();
        let spec = eigen_at(&scene, &[0.5, 0.5]).unwrap();
        assert_eq!(spec.clusters.len(), 1);
        assert_eq!(spec.clusters[0].multiplicity, 2);
        assert!((spec.clusters[0].value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dini_spectrum_is_simple_and_axis_aligned() {
        let scene = dini();
        let p = [0.4, 1.3];
        let spec = eigen_at(&scene, &p).unwrap();
        // Two simple eigenvalues Y < X.
        assert_eq!(spec.clusters.len(), 2);
        assert!((spec.eigenvalues[0] - p[1]).abs() < 1e-10);
        assert!((spec.eigenvalues[1] - (p[0] + 3.0)).abs() < 1e-10);
        // Eigenvectors g-orthonormal and axis-aligned.
        let g = scene.g.value_at(&p).unwrap();
        let vtgv = spec.eigenvectors.transpose() * &g * &spec.eigenvectors;
        assert!((vtgv - DMatrix::identity(2, 2)).amax() <= tol::ORTHONORMALITY_TOL);
        // Branch 0 (= Y) points along e2, branch 1 along e1.
        let v0: DVector<f64> = spec.eigenvectors.column(0).into();
        assert!(v0[0].abs() < 1e-8 * v0[1].abs());
        // A V = V diag(mu).
        let a = scene.a_value_at(&p).unwrap();
        let av = &a * &spec.eigenvectors;
        let vd = &spec.eigenvectors * DMatrix::from_diagonal(&DVector::from_vec(spec.eigenvalues.clone()));
        assert!((av - vd).amax() <= tol::EIGEN_RECONSTRUCTION_TOL * (1.0 + spec.spectral_radius()));
    }

    #[test]
    fn eigen_gradient_explicit_field() {
        // Pair tensor A = diag(x, 5) on Euclidean g, realized through
        // gbar = (det A)^-1 g A^-1 = diag(1/(5 x^2), 1/(25 x)):
        // grad of the x-branch is (1, 0), grad of the constant branch is 0.
        let cs = coords2();
        let g = metric_from_strings(&strings(&[["1", "0"], ["0", "1"]]), &cs).unwrap();
        let gbar = metric_from_strings(
            &strings(&[["1/(5*x^2)", "0"], ["0", "1/(25*x)"]]),
            &cs,
        )
        .unwrap();
        let chart = ChartDomain::new(vec![(1.0, 2.0), (0.0, 1.0)]).unwrap();
        let z = tensor(&[["0", "0"], ["0", "0"]], &cs);
        let scene = PQScene::new(chart, cs.clone(), 0.0, g, gbar, z.clone(), z).unwrap();
        let point = [1.5, 0.3];
        let a = scene.a_value_at(&point).unwrap();
        assert!((a[(0, 0)] - point[0]).abs() < 1e-12);
        assert!((a[(1, 1)] - 5.0).abs() < 1e-12);
        let spec = eigen_at(&scene, &point).unwrap();
        assert!((spec.eigenvalues[0] - point[0]).abs() < 1e-12);
        // Branch 0 is the x-eigenvalue: gradient (1, 0).
        let grad0 = eigenvalue_gradient_at(&scene, &point, 0).unwrap();
        assert!((grad0[0] - 1.0).abs() < 1e-10 && grad0[1].abs() < 1e-10, "{grad0:?}");
        let grad1 = eigenvalue_gradient_at(&scene, &point, 1).unwrap();
        assert!(grad1.amax() < 1e-10, "{grad1:?}");
    }

    #[test]
    fn branches_are_lipschitz_along_trajectories() {
        // Matched branch values change between consecutive trajectory samples
        // by no more than a gradient-based Lipschitz estimate times the step.
        use crate::geometry::{integrate_geodesic, GeodesicState};
        let scene = dini();
        let init = GeodesicState { x: vec![0.5, 1.5], v: vec![0.12, 0.15] };
        let h = 1e-2;
        let traj = integrate_geodesic(&scene.g, &scene.chart, &init, 1.0, h).unwrap();
        let path: Vec<Vec<f64>> = traj.samples.iter().map(|(_, s)| s.x.clone()).collect();
        let trace = trace_branches(&scene, &path).unwrap();
        let speed = traj
            .samples
            .iter()
            .map(|(_, s)| s.v.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        for b in 0..2 {
            let lipschitz = path
                .iter()
                .map(|p| {
                    eigenvalue_gradient_at(&scene, p, b)
                        .map(|grad| {
                            let g = scene.g.value_at(p).unwrap();
                            // |d mu| per unit coordinate length: lower the
                            // gradient back to the differential.
                            (g * grad).norm()
                        })
                        .unwrap_or(0.0)
                })
                .fold(0.0, f64::max);
            let bound = 2.0 * lipschitz * speed * h;
            for w in trace.branch_values[b].windows(2) {
                assert!(
                    (w[1] - w[0]).abs() <= bound,
                    "branch {b} jumped {} > {bound}",
                    (w[1] - w[0]).abs()
                );
            }
        }
    }

    #[test]
    fn dini_eigen_gradients_match_finite_differences() {
        let scene = dini();
        let p = [0.4, 1.3];
        for branch in 0..2 {
            let grad = eigenvalue_gradient_at(&scene, &p, branch).unwrap();
            // Oracle: central finite differences of the sorted eigenvalues,
            // raised with g.
            let h = 1e-6;
            let mut d = DVector::zeros(2);
            for i in 0..2 {
                let mut plus = p.to_vec();
                let mut minus = p.to_vec();
                plus[i] += h;
                minus[i] -= h;
                let ep = eigen_at(&scene, &plus).unwrap().eigenvalues[branch];
                let em = eigen_at(&scene, &minus).unwrap().eigenvalues[branch];
                d[i] = (ep - em) / (2.0 * h);
            }
            let g = scene.g.value_at(&p).unwrap();
            let oracle = g.try_inverse().unwrap() * d;
            assert!(
                (&grad - &oracle).amax() <= 1e-6 * (1.0 + grad.amax()),
                "branch {branch}: {grad:?} vs {oracle:?}"
            );
        }
        // Closed form: branches are Y and X, so the gradients point along the
        // axes with magnitude 1/(X - Y).
        let grad0 = eigenvalue_gradient_at(&scene, &p, 0).unwrap();
        let f = p[0] + 3.0 - p[1];
        assert!((grad0[1] - 1.0 / f).abs() < 1e-9);
        assert!(grad0[0].abs() < 1e-9);
    }

    #[test]
    fn clustered_eigenvalue_gradient_errors() {
        let cs = coords2();
        let g = metric_from_strings(&strings(&[["1", "0"], ["0", "1"]]), &cs).unwrap();
        let chart = ChartDomain::new(vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let z = tensor(&[["0", "0"], ["0", "0"]], &cs);
        let scene = PQScene::new(chart, cs.clone(), 0.0, g.clone(), g, z.clone(), z).unwrap();
        assert!(matches!(
            eigenvalue_gradient_at(&scene, &[0.5, 0.5], 0),
            Err(Error::ClusteredEigenvalue { .. })
        ));
    }

    #[test]
    fn constant_a_has_zero_gradients_and_constant_branches() {
        let cs = coords2();
        let g = metric_from_strings(&strings(&[["1", "0"], ["0", "1"]]), &cs).unwrap();
        let gbar = metric_from_strings(&strings(&[["2", "0"], ["0", "0.5"]]), &cs).unwrap();
        let chart = ChartDomain::new(vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let z = tensor(&[["0", "0"], ["0", "0"]], &cs);
        let scene = PQScene::new(chart, cs.clone(), 0.0, g, gbar, z.clone(), z).unwrap();
        let grad = eigenvalue_gradient_at(&scene, &[0.5, 0.5], 0).unwrap();
        assert!(grad.amax() < 1e-12);
        let trace = trace_branches(&scene, &grid_path(&scene.chart, 8)).unwrap();
        assert!(trace.constant.iter().all(|&c| c));
    }

    #[test]
    fn dini_branches_are_non_constant_multiplicity_one() {
        let scene = dini();
        let report = lemma_dim_check(&scene, &grid_path(&scene.chart, 16)).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.non_constant_branches.len(), 2);
        assert_eq!(report.multiplicities_seen, vec![1]);
    }

    #[test]
    fn dini_lemma_eigenvectors_passes() {
        let scene = dini();
        let points = sample_box(&scene.chart, 200, 42);
        let checks = lemma_eigenvectors_check(&scene, &points).unwrap();
        for c in &checks {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn corrupted_scene_fails_eigenspace_check() {
        // Perturbed gbar: A no longer solves the PDE, so grad mu is generally
        // not an eigenvector.
        let cs = coords2();
        let f = "x+3-y";
        let g = metric_from_strings(&strings(&[[f, "0"], ["0", f]]), &cs).unwrap();
        let gbar = metric_from_strings(
            &strings(&[
                ["(1+0.2*x*y)*(1/y-1/(x+3))/(x+3)", "0.02*x"],
                ["0.02*x", "(1/y-1/(x+3))/y"],
            ]),
            &cs,
        )
        .unwrap();
        let chart = ChartDomain::new(vec![(0.0, 1.0), (1.0, 2.0)]).unwrap();
        let z = tensor(&[["0", "0"], ["0", "0"]], &cs);
        let scene = PQScene::new(chart, cs.clone(), 0.0, g, gbar, z.clone(), z).unwrap();
        let points = sample_box(&scene.chart, 100, 42);
        let checks = lemma_eigenvectors_check(&scene, &points).unwrap();
        assert!(
            checks.iter().any(|c| !c.passed),
            "corrupted scene unexpectedly passed: {checks:?}"
        );
    }

    #[test]
    fn affine_scene_classifies_affine() {
        let cs = coords2();
        let g = metric_from_strings(&strings(&[["1", "0"], ["0", "1"]]), &cs).unwrap();
        let gbar = metric_from_strings(&strings(&[["4", "0"], ["0", "4"]]), &cs).unwrap();
        let chart = ChartDomain::new(vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let z = tensor(&[["0", "0"], ["0", "0"]], &cs);
        let scene = PQScene::new(chart, cs.clone(), 0.0, g, gbar, z.clone(), z).unwrap();
        let c = classify_pair(&scene, 100, 42).unwrap();
        assert_eq!(c.verdict, Verdict::Affine);
    }

    #[test]
    fn dini_classifies_projective() {
        let scene = dini();
        let c = classify_pair(&scene, 200, 42).unwrap();
        assert_eq!(c.verdict, Verdict::ProjectiveEps0, "{:?}", c.evidence);
    }
}
