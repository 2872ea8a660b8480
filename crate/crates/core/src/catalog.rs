//! Catalog of constructively verified scenes covering the three regimes
//! (affine, projective with eps = 0, h-projective with eps = -1), plus
//! deliberately broken scenes for negative controls.
//!
//! Gate-then-admit: constructed entries are admitted only after their
//! defining equation's residual passes at the stated tolerance; the
//! construction recipes are classical but are never trusted without this
//! run-time verification.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, ScalarExpr};
use crate::geometry::{ChartDomain, MetricField, TensorField11};
use crate::sampling::sample_box;
use crate::scene::{
    residual_report, validate_scene, EquationTag, PQScene, ResidualReport, ValidationReport,
};
use crate::scene_file::{DomainSpec, SceneFile};
use crate::spectra::Verdict;
use crate::tol;

const GATE_SAMPLES: usize = 1000;
const GATE_SEED: u64 = crate::tol::DEFAULT_SEED;

/// A verified catalog scene: the validation report and the admission gate are
/// re-run on every construction, never cached.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub scene: PQScene,
    pub expected_verdict: Verdict,
    pub provenance: String,
    pub validation: ValidationReport,
    /// The residual suite that admitted the entry (absent for affine pairs,
    /// whose gate is the validation itself plus identically zero residuals).
    pub admission: Option<ResidualReport>,
}

fn coord_names(m: usize) -> Vec<String> {
    match m {
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        _ => (1..=m).map(|i| format!("x{i}")).collect(),
    }
}

fn zero_tensor(m: usize, coords: &[String]) -> Result<TensorField11> {
    let zero = parse_expr("0", coords)?;
    TensorField11::from_components(vec![vec![zero; m]; m])
}

fn admit(
    name: &str,
    scene: PQScene,
    expected: Verdict,
    provenance: &str,
    gate: Option<EquationTag>,
) -> Result<CatalogEntry> {
    let validation = validate_scene(&scene, GATE_SAMPLES, GATE_SEED)?;
    if !validation.passed {
        let failing: Vec<String> = validation
            .failures()
            .iter()
            .map(|c| format!("{} (worst {:.3e} at {:?})", c.name, c.max_relative, c.worst_point))
            .collect();
        return Err(Error::Validation(format!(
            "catalog entry `{name}` rejected: {}",
            failing.join("; ")
        )));
    }
    let admission = match gate {
        Some(eq) => {
            let report = residual_report(&scene, eq, GATE_SAMPLES, GATE_SEED, tol::RESIDUAL_TOL)?;
            if !report.passed {
                return Err(Error::Validation(format!(
                    "catalog entry `{name}` rejected: {} residual gate failed \
                     (max relative {:.3e} > {:.1e})",
                    eq.as_str(),
                    report.max_relative,
                    report.tolerance
                )));
            }
            Some(report)
        }
        None => None,
    };
    Ok(CatalogEntry {
        name: name.to_string(),
        scene: scene.with_name(name),
        expected_verdict: expected,
        provenance: provenance.to_string(),
        validation,
        admission,
    })
}

/// Constant conformal pair: g the identity metric, gbar = c g on the unit
/// box, P = Q = 0, eps = 0. The pair tensor is c^(-1/(m+1)) Id.
pub fn make_affine_pair(m: usize, c: f64) -> Result<CatalogEntry> {
    if c <= 0.0 {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {c}")));
    }
    if m < 2 {
        return Err(Error::InvalidArgument("dimension must be at least 2".into()));
    }
    let coords = coord_names(m);
    let id_rows: Vec<Vec<String>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { "1".into() } else { "0".into() }).collect())
        .collect();
    let scaled_rows: Vec<Vec<String>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| if i == j { format!("{c}") } else { "0".into() })
                .collect()
        })
        .collect();
    let g = crate::geometry::metric_from_strings(&id_rows, &coords)?;
    let gbar = crate::geometry::metric_from_strings(&scaled_rows, &coords)?;
    let chart = ChartDomain::new(vec![(0.0, 1.0); m])?;
    let p = zero_tensor(m, &coords)?;
    let q = zero_tensor(m, &coords)?;
    let scene = PQScene::new(chart, coords, 0.0, g, gbar, p, q)?;
    let name = if m == 2 { "affine".to_string() } else { format!("affine_m{m}") };
    admit(
        &name,
        scene,
        Verdict::Affine,
        "constant conformal scaling of the flat metric; the connections coincide",
        None,
    )
}

/// The classical two-dimensional projectively equivalent pair
/// g = (X - Y)(dx^2 + dy^2), gbar = (1/Y - 1/X)(dx^2/X + dy^2/Y)
/// with X a function of x only and Y of y only, X > Y > 0 on the box.
pub fn make_dini_pair(x_text: &str, y_text: &str, box_: Vec<(f64, f64)>) -> Result<CatalogEntry> {
    let coords = coord_names(2);
    let big_x = parse_expr(x_text, &coords)?;
    let big_y = parse_expr(y_text, &coords)?;
    if big_x.depends_on(1) {
        return Err(Error::InvalidArgument("X must depend on x only".into()));
    }
    if big_y.depends_on(0) {
        return Err(Error::InvalidArgument("Y must depend on y only".into()));
    }
    let chart = ChartDomain::new(box_)?;

    // Ordering precondition X > Y > 0, checked at sample points.
    for point in sample_box(&chart, GATE_SAMPLES, GATE_SEED) {
        let xv = big_x.eval(&point)?;
        let yv = big_y.eval(&point)?;
        if !(xv > yv && yv > 0.0) {
            return Err(Error::Validation(format!(
                "ordering X > Y > 0 violated at {point:?}: X = {xv}, Y = {yv}"
            )));
        }
    }

    let shared = Arc::new(coords.clone());
    let one = || ScalarExpr::number(1.0, shared.clone());
    let zero = || ScalarExpr::number(0.0, shared.clone());
    let f = big_x.clone() - big_y.clone(); // X - Y
    let conf = one() / big_y.clone() - one() / big_x.clone(); // 1/Y - 1/X

    let g = MetricField::from_components(vec![
        vec![f.clone(), zero()],
        vec![zero(), f],
    ])?;
    let gbar = MetricField::from_components(vec![
        vec![conf.clone() / big_x, zero()],
        vec![zero(), conf / big_y],
    ])?;
    let p = zero_tensor(2, &coords)?;
    let q = zero_tensor(2, &coords)?;
    let scene = PQScene::new(chart, coords, 0.0, g, gbar, p, q)?;
    admit(
        "dini",
        scene,
        Verdict::ProjectiveEps0,
        "Dini/Levi-Civita projectively equivalent pair",
        Some(EquationTag::Projective),
    )
}

/// Stereographic-chart expressions for the round-sphere pair attached to a
/// constant symmetric positive-definite 3x3 form C: the pair tensor is the
/// tangential restriction of C, and gbar is reconstructed from it in closed
/// (rational) form. Admitted only if the Q-free PDE residual passes.
pub fn make_sphere_projective_pair(c: &DMatrix<f64>) -> Result<CatalogEntry> {
    if c.nrows() != 3 || c.ncols() != 3 {
        return Err(Error::InvalidArgument("C must be 3x3".into()));
    }
    if (c - c.transpose()).amax() > 1e-14 {
        return Err(Error::InvalidArgument("C must be symmetric".into()));
    }
    let eigs = c.clone().symmetric_eigenvalues();
    if eigs.min() <= 0.0 {
        return Err(Error::InvalidArgument("C must be positive definite".into()));
    }

    let coords = coord_names(2);
    let shared = Arc::new(coords.clone());
    let num = |v: f64| ScalarExpr::number(v, shared.clone());
    let x = ScalarExpr::coordinate(0, shared.clone());
    let y = ScalarExpr::coordinate(1, shared.clone());

    let x2 = x.clone().pow_int(2);
    let y2 = y.clone().pow_int(2);
    let s = num(1.0) + x2.clone() + y2.clone(); // 1 + r^2
    let s2 = s.clone().pow_int(2);

    // Partials of the stereographic embedding u(x, y), common denominator s^2.
    // du[a][i] = d u_a / d x_i.
    let du: [[ScalarExpr; 2]; 3] = [
        [
            num(2.0) * (num(1.0) + y2.clone() - x2.clone()) / s2.clone(),
            num(0.0) - num(4.0) * x.clone() * y.clone() / s2.clone(),
        ],
        [
            num(0.0) - num(4.0) * x.clone() * y.clone() / s2.clone(),
            num(2.0) * (num(1.0) + x2.clone() - y2.clone()) / s2.clone(),
        ],
        [
            num(4.0) * x.clone() / s2.clone(),
            num(4.0) * y.clone() / s2.clone(),
        ],
    ];

    // A_ij = (s^2 / 4) * sum_ab C_ab du[a][i] du[b][j]: the tangential
    // restriction of C expressed in chart components.
    let mut a_entries: Vec<Vec<ScalarExpr>> = Vec::with_capacity(2);
    for i in 0..2 {
        let mut row = Vec::with_capacity(2);
        for j in 0..2 {
            let mut sum: Option<ScalarExpr> = None;
            for a in 0..3 {
                for b in 0..3 {
                    let coeff = c[(a, b)];
                    if coeff == 0.0 {
                        continue;
                    }
                    let term = num(coeff) * du[a][i].clone() * du[b][j].clone();
                    sum = Some(match sum {
                        Some(acc) => acc + term,
                        None => term,
                    });
                }
            }
            let sum = sum.unwrap_or_else(|| num(0.0));
            row.push(s2.clone() / num(4.0) * sum);
        }
        a_entries.push(row);
    }

    // Round metric g = (4 / s^2) Id.
    let g_conf = num(4.0) / s2.clone();
    let g = MetricField::from_components(vec![
        vec![g_conf.clone(), num(0.0)],
        vec![num(0.0), g_conf.clone()],
    ])?;

    // Closed-form reconstruction for eps = 0:
    // gbar = (det A)^-1 G A^-1 = G adj(A) / (det A)^2, all rational.
    let det = a_entries[0][0].clone() * a_entries[1][1].clone()
        - a_entries[0][1].clone() * a_entries[1][0].clone();
    let det2 = det.pow_int(2);
    let gbar = MetricField::from_components(vec![
        vec![
            g_conf.clone() * a_entries[1][1].clone() / det2.clone(),
            num(0.0) - g_conf.clone() * a_entries[0][1].clone() / det2.clone(),
        ],
        vec![
            num(0.0) - g_conf.clone() * a_entries[1][0].clone() / det2.clone(),
            g_conf * a_entries[0][0].clone() / det2,
        ],
    ])?;

    let chart = ChartDomain::new(vec![(-0.5, 0.5), (-0.5, 0.5)])?;
    let p = zero_tensor(2, &coords)?;
    let q = zero_tensor(2, &coords)?;
    let scene = PQScene::new(chart, coords, 0.0, g, gbar, p, q)?;

    // Degenerate input C = multiple of Id gives a constant A, hence an
    // affine pair; allowed, flagged by the expected verdict.
    let off = c[(0, 1)].abs().max(c[(0, 2)].abs()).max(c[(1, 2)].abs());
    let diag_spread = (c[(0, 0)] - c[(1, 1)])
        .abs()
        .max((c[(0, 0)] - c[(2, 2)]).abs());
    let expected = if off < 1e-14 && diag_spread < 1e-14 {
        Verdict::Affine
    } else {
        Verdict::ProjectiveEps0
    };
    admit(
        "sphere",
        scene,
        expected,
        "round-sphere metric with the tangential restriction of a constant quadratic form",
        Some(EquationTag::Projective),
    )
}

/// Holomorphic-scaling pair on a stereographic chart: g the Fubini-Study
/// round metric, gbar its pullback under z -> lambda z, P = Q = J, eps = -1.
/// Admitted only if the connection-difference residual (with Phi recovered
/// from Lambda) passes.
pub fn make_cp1_hprojective_pair(lambda: f64) -> Result<CatalogEntry> {
    if lambda < 1.0 {
        return Err(Error::InvalidArgument(format!("lambda must be >= 1, got {lambda}")));
    }
    let coords = coord_names(2);
    let round = "4/(1+x^2+y^2)^2";
    let pulled = format!("(4*{lambda}^2)/(1+{lambda}^2*(x^2+y^2))^2");
    let rows = |diag: &str| -> Vec<Vec<String>> {
        vec![
            vec![diag.to_string(), "0".to_string()],
            vec!["0".to_string(), diag.to_string()],
        ]
    };
    let g = crate::geometry::metric_from_strings(&rows(round), &coords)?;
    let gbar = crate::geometry::metric_from_strings(&rows(&pulled), &coords)?;
    let j_rows: Vec<Vec<String>> = vec![
        vec!["0".into(), "-1".into()],
        vec!["1".into(), "0".into()],
    ];
    let p = crate::geometry::tensor_from_strings(&j_rows, &coords)?;
    let q = crate::geometry::tensor_from_strings(&j_rows, &coords)?;
    let chart = ChartDomain::new(vec![(-0.5, 0.5), (-0.5, 0.5)])?;
    let scene = PQScene::new(chart, coords, -1.0, g, gbar, p, q)?;
    let expected = if lambda == 1.0 {
        Verdict::Affine // identity pullback: gbar = g
    } else {
        Verdict::PqEpsClass { epsilon: -1.0 }
    };
    admit(
        "cp1",
        scene,
        expected,
        "hermitian pair pulled back under a holomorphic scaling of the chart",
        Some(EquationTag::HProjective),
    )
}

/// Every admitted entry of the default catalog. Gates re-run on every call.
pub fn entries() -> Result<Vec<CatalogEntry>> {
    Ok(vec![
        make_affine_pair(2, 4.0)?,
        make_affine_pair(3, 2.0)?,
        make_dini_pair("x+3", "y", vec![(0.0, 1.0), (1.0, 2.0)])?,
        make_sphere_projective_pair(&DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0, 3.0]))?,
        make_cp1_hprojective_pair(2.0)?,
    ])
}

pub fn entry_by_name(name: &str) -> Result<CatalogEntry> {
    match name {
        "affine" => make_affine_pair(2, 4.0),
        "affine_m3" => make_affine_pair(3, 2.0),
        "dini" => make_dini_pair("x+3", "y", vec![(0.0, 1.0), (1.0, 2.0)]),
        "sphere" => {
            make_sphere_projective_pair(&DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0, 3.0]))
        }
        "cp1" => make_cp1_hprojective_pair(2.0),
        _ => Err(Error::InvalidArgument(format!(
            "unknown catalog entry `{name}`; known: affine, affine_m3, dini, sphere, cp1, \
             broken_dini, broken_eps_even, invalid_eps1"
        ))),
    }
}

/// What a negative-control scene is expected to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeKind {
    /// Structurally valid; must fail the residual gates.
    GateFailure,
    /// Rejected before any numerics (invalid input).
    ValidationReject,
}

/// Deliberately broken scenes. They are emitted as scene files, never as
/// admitted entries.
pub fn negative_scenes() -> Vec<(String, SceneFile, NegativeKind)> {
    let dini_broken = SceneFile {
        name: Some("broken_dini".into()),
        notes: Some("gbar perturbed non-conformally by 1%; the pair equations fail".into()),
        dimension: 2,
        epsilon: 0.0,
        coords: vec!["x".into(), "y".into()],
        domain: DomainSpec { min: vec![0.0, 1.0], max: vec![1.0, 2.0] },
        g: vec![
            vec!["x+3-y".into(), "0".into()],
            vec!["0".into(), "x+3-y".into()],
        ],
        gbar: vec![
            vec!["1.01*(1/y-1/(x+3))/(x+3)".into(), "0".into()],
            vec!["0".into(), "(1/y-1/(x+3))/y".into()],
        ],
        p: vec![vec!["0".into(), "0".into()], vec!["0".into(), "0".into()]],
        q: vec![vec!["0".into(), "0".into()], vec!["0".into(), "0".into()]],
    };

    let sq2 = "1.4142135623730951";
    let eps_even = SceneFile {
        name: Some("broken_eps_even".into()),
        notes: Some(
            "eps = -2 with P = Q = sqrt(2) J on a non-affine pair; the conditions hold \
             but the PDE cannot"
                .into(),
        ),
        dimension: 2,
        epsilon: -2.0,
        coords: vec!["x".into(), "y".into()],
        domain: DomainSpec { min: vec![-0.5, -0.5], max: vec![0.5, 0.5] },
        g: vec![
            vec!["4/(1+x^2+y^2)^2".into(), "0".into()],
            vec!["0".into(), "4/(1+x^2+y^2)^2".into()],
        ],
        gbar: vec![
            vec!["(4*2^2)/(1+2^2*(x^2+y^2))^2".into(), "0".into()],
            vec!["0".into(), "(4*2^2)/(1+2^2*(x^2+y^2))^2".into()],
        ],
        p: vec![
            vec!["0".into(), format!("-{sq2}")],
            vec![sq2.into(), "0".into()],
        ],
        q: vec![
            vec!["0".into(), format!("-{sq2}")],
            vec![sq2.into(), "0".into()],
        ],
    };

    let eps_one = SceneFile {
        name: Some("invalid_eps1".into()),
        notes: Some("eps = 1 is excluded by the structure conditions".into()),
        dimension: 2,
        epsilon: 1.0,
        coords: vec!["x".into(), "y".into()],
        domain: DomainSpec { min: vec![0.0, 0.0], max: vec![1.0, 1.0] },
        g: vec![vec!["1".into(), "0".into()], vec!["0".into(), "1".into()]],
        gbar: vec![vec!["4".into(), "0".into()], vec!["0".into(), "4".into()]],
        p: vec![vec!["0".into(), "0".into()], vec!["0".into(), "0".into()]],
        q: vec![vec!["0".into(), "0".into()], vec!["0".into(), "0".into()]],
    };

    vec![
        ("broken_dini".to_string(), dini_broken, NegativeKind::GateFailure),
        ("broken_eps_even".to_string(), eps_even, NegativeKind::GateFailure),
        ("invalid_eps1".to_string(), eps_one, NegativeKind::ValidationReject),
    ]
}

pub fn negative_by_name(name: &str) -> Option<(SceneFile, NegativeKind)> {
    negative_scenes()
        .into_iter()
        .find(|(n, _, _)| n == name)
        .map(|(_, f, k)| (f, k))
}

/// Scene file for any catalog name, positive or negative.
pub fn scene_file_by_name(name: &str) -> Result<SceneFile> {
    if let Some((file, _)) = negative_by_name(name) {
        return Ok(file);
    }
    let entry = entry_by_name(name)?;
    Ok(SceneFile::from_scene(&entry.scene))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::pde_residual_at;
    use crate::spectra::{classify_pair, grid_path, lemma_dim_check};

    #[test]
    fn affine_entries_have_expected_a() {
        // (m=2, c=1): A = Id.
        let e = make_affine_pair(2, 1.0).unwrap();
        let a = e.scene.a_value_at(&[0.5, 0.5]).unwrap();
        assert!((a - DMatrix::identity(2, 2)).amax() < 1e-14);
        // (m=2, c=4): A = 2^(-2/3) Id.
        let e = make_affine_pair(2, 4.0).unwrap();
        let a = e.scene.a_value_at(&[0.5, 0.5]).unwrap();
        assert!((a[(0, 0)] - 2.0f64.powf(-2.0 / 3.0)).abs() < 1e-14);
        // (m=3, c=2): A = 2^(-1/4) Id.
        let e = make_affine_pair(3, 2.0).unwrap();
        let a = e.scene.a_value_at(&[0.5, 0.5, 0.5]).unwrap();
        assert!((a[(0, 0)] - 2.0f64.powf(-0.25)).abs() < 1e-14);
        assert_eq!(e.expected_verdict, Verdict::Affine);
    }

    #[test]
    fn dini_entry_admitted_and_classified() {
        let e = make_dini_pair("x+3", "y", vec![(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert!(e.validation.passed);
        let gate = e.admission.as_ref().unwrap();
        assert!(gate.passed && gate.max_relative <= tol::RESIDUAL_TOL);
        // P Lambda = 0 exactly (P = 0).
        let lam = e.scene.lambda_at(&[0.4, 1.3]).unwrap();
        let p = e.scene.p.value_at(&[0.4, 1.3]).unwrap();
        assert_eq!((p * lam).amax(), 0.0);
        // Multiplicities (1, 1).
        let report = lemma_dim_check(&e.scene, &grid_path(&e.scene.chart, 12)).unwrap();
        assert!(report.passed);
        assert_eq!(report.multiplicities_seen, vec![1]);
    }

    #[test]
    fn dini_ordering_violation_rejected() {
        // Y > X on part of the box.
        let err = make_dini_pair("x+1", "y", vec![(0.0, 1.0), (1.0, 2.0)]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn dini_construction_is_generic_in_x_and_y() {
        // Non-linear profile functions still pass the admission gate.
        let e = make_dini_pair("exp(x)+3", "y^2", vec![(0.0, 1.0), (1.0, 1.4)]).unwrap();
        assert!(e.admission.as_ref().unwrap().passed);
        let p = [0.5, 1.2];
        let a = e.scene.a_value_at(&p).unwrap();
        assert!((a[(0, 0)] - (p[0].exp() + 3.0)).abs() < 1e-12);
        assert!((a[(1, 1)] - p[1] * p[1]).abs() < 1e-12);
    }

    #[test]
    fn dini_mixed_variable_profiles_rejected() {
        assert!(make_dini_pair("x+y", "y", vec![(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(make_dini_pair("x+3", "x*y", vec![(0.0, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn sphere_accepts_non_diagonal_c() {
        let mut c = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0, 3.0]);
        c[(0, 1)] = 0.3;
        c[(1, 0)] = 0.3;
        c[(1, 2)] = 0.1;
        c[(2, 1)] = 0.1;
        let e = make_sphere_projective_pair(&c).unwrap();
        assert!(e.admission.as_ref().unwrap().passed);
        // A is the tangential restriction: at the chart origin the tangent
        // plane is spanned by the first two axes, so A = C's leading block.
        let a = e.scene.a_value_at(&[0.0, 0.0]).unwrap();
        assert!((a[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((a[(0, 1)] - 0.3).abs() < 1e-12);
        assert!((a[(1, 1)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_entry_gate_and_verdict() {
        let c = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0, 3.0]);
        let e = make_sphere_projective_pair(&c).unwrap();
        assert!(e.validation.passed);
        assert!(e.admission.as_ref().unwrap().passed);
        let verdict = classify_pair(&e.scene, 200, 42).unwrap();
        assert_eq!(verdict.verdict, e.expected_verdict, "{:?}", verdict.evidence);
    }

    #[test]
    fn sphere_identity_c_is_affine() {
        let e = make_sphere_projective_pair(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(e.expected_verdict, Verdict::Affine);
        // A is the identity: the restriction of Id is Id in chart components.
        let a = e.scene.a_value_at(&[0.2, -0.3]).unwrap();
        assert!((a - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn sphere_axially_degenerate_c() {
        let c = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 1.0, 2.0]);
        let e = make_sphere_projective_pair(&c).unwrap();
        let report = lemma_dim_check(&e.scene, &grid_path(&e.scene.chart, 12)).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn sphere_rejects_bad_c() {
        assert!(make_sphere_projective_pair(&DMatrix::from_diagonal(
            &nalgebra::dvector![1.0, -2.0, 3.0]
        ))
        .is_err());
        let mut asym = DMatrix::identity(3, 3);
        asym[(0, 1)] = 0.5;
        assert!(make_sphere_projective_pair(&asym).is_err());
    }

    #[test]
    fn cp1_entry_admitted() {
        let e = make_cp1_hprojective_pair(2.0).unwrap();
        assert!(e.validation.passed);
        assert!(e.admission.as_ref().unwrap().passed);
        assert_eq!(e.expected_verdict, Verdict::PqEpsClass { epsilon: -1.0 });
        // A is a multiple of the identity with the closed-form factor.
        let p = [0.2, 0.1];
        let a = e.scene.a_value_at(&p).unwrap();
        let r2 = p[0] * p[0] + p[1] * p[1];
        let mu = (1.0 + 4.0 * r2) / (2.0 * (1.0 + r2));
        assert!((a[(0, 0)] - mu).abs() < 1e-12);
        assert!((a[(1, 1)] - mu).abs() < 1e-12);
        assert!(a[(0, 1)].abs() < 1e-13);
        // Non-constant double branch: multiplicity 2 = 1 - (-1).
        let report = lemma_dim_check(&e.scene, &grid_path(&e.scene.chart, 12)).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.multiplicities_seen, vec![2]);
    }

    #[test]
    fn cp1_lambda_one_is_affine() {
        let e = make_cp1_hprojective_pair(1.0).unwrap();
        assert_eq!(e.expected_verdict, Verdict::Affine);
    }

    #[test]
    fn cp1_fails_projective_residual() {
        // The h-projective pair solves the full PDE but not the Q-free one:
        // J Lambda != 0 away from the chart origin.
        let e = make_cp1_hprojective_pair(2.0).unwrap();
        let report =
            residual_report(&e.scene, EquationTag::Projective, 200, 42, tol::RESIDUAL_TOL)
                .unwrap();
        assert!(!report.passed, "max rel {}", report.max_relative);
    }

    #[test]
    fn broken_dini_fails_gates_but_validates() {
        let (file, kind) = negative_by_name("broken_dini").unwrap();
        assert_eq!(kind, NegativeKind::GateFailure);
        let scene = file.to_scene().unwrap();
        assert!(validate_scene(&scene, 200, 42).unwrap().passed);
        for eq in [EquationTag::Main, EquationTag::PqProj, EquationTag::Projective] {
            let report = residual_report(&scene, eq, 200, 42, tol::RESIDUAL_TOL).unwrap();
            assert!(!report.passed);
            assert!(
                report.max_relative > tol::NEGATIVE_CONTROL_MIN,
                "{eq:?}: {}",
                report.max_relative
            );
        }
    }

    #[test]
    fn eps_even_scene_validates_but_is_inconsistent() {
        let (file, kind) = negative_by_name("broken_eps_even").unwrap();
        assert_eq!(kind, NegativeKind::GateFailure);
        let scene = file.to_scene().unwrap();
        let validation = validate_scene(&scene, 200, 42).unwrap();
        assert!(validation.passed, "{:?}", validation.failures());
        // PDE residual must be large: no non-affine solution exists for
        // even negative eps.
        let worst = sample_box(&scene.chart, 100, 42)
            .iter()
            .map(|p| pde_residual_at(&scene, p).unwrap().relative())
            .fold(0.0, f64::max);
        assert!(worst > tol::NEGATIVE_CONTROL_MIN, "worst {worst}");
        let verdict = classify_pair(&scene, 100, 42).unwrap();
        assert_eq!(verdict.verdict, Verdict::Inconsistent);
    }

    #[test]
    fn eps_one_scene_rejected_at_construction() {
        let (file, kind) = negative_by_name("invalid_eps1").unwrap();
        assert_eq!(kind, NegativeKind::ValidationReject);
        assert!(matches!(file.to_scene(), Err(Error::EpsilonExcluded(_))));
    }

    #[test]
    fn catalog_covers_all_three_regimes() {
        let entries = entries().unwrap();
        let verdicts: Vec<&Verdict> = entries.iter().map(|e| &e.expected_verdict).collect();
        assert!(verdicts.iter().any(|v| **v == Verdict::Affine));
        assert!(verdicts.iter().any(|v| **v == Verdict::ProjectiveEps0));
        assert!(verdicts
            .iter()
            .any(|v| **v == Verdict::PqEpsClass { epsilon: -1.0 }));
    }

    #[test]
    fn catalog_scene_files_roundtrip() {
        for name in ["affine", "dini", "sphere", "cp1"] {
            let file = scene_file_by_name(name).unwrap();
            let json = file.to_json();
            let re = SceneFile::from_json(&json).unwrap();
            assert_eq!(file, re);
            // The formatted sphere expressions re-evaluate identically.
            let s1 = file.to_scene().unwrap();
            let s2 = re.to_scene().unwrap();
            let p = s1.chart.center();
            assert_eq!(s1.gbar.value_at(&p).unwrap(), s2.gbar.value_at(&p).unwrap());
        }
    }
}
