//! Central tolerance and guard constants.
//!
//! Every threshold that decides a pass/fail anywhere in the crate lives here,
//! so reports can echo the exact values used.

/// Skewness, PQ = eps*Id and commutation checks on scene validation,
/// relative to the largest field magnitude at the sample point.
pub const SCENE_INVARIANT_TOL: f64 = 1e-9;

/// |G*A - (G*A)^T| relative bound: A must be self-adjoint w.r.t. both metrics.
pub const SELF_ADJOINT_TOL: f64 = 1e-10;

/// |det A| floor below which A counts as degenerate.
pub const DET_A_FLOOR: f64 = 1e-12;

/// Smallest admissible metric eigenvalue at a sample point.
pub const METRIC_PD_MIN_EIG: f64 = 1e-12;

/// Max relative residual for the defining-equation suites (Eqs. of motion of
/// the pair: connection difference, main PDE, projective specialization).
pub const RESIDUAL_TOL: f64 = 1e-7;

/// Deliberately broken scenes must exceed this residual.
pub const NEGATIVE_CONTROL_MIN: f64 = 1e-3;

/// Relative drift budget per unit time for the integrals F_t along geodesics.
pub const DRIFT_TOL: f64 = 1e-6;

/// Looser drift budget for regularized (eigenframe) evaluation.
pub const DRIFT_TOL_REGULARIZED: f64 = 1e-5;

/// Kinetic-energy relative drift per unit time at h = 1e-3.
pub const ENERGY_DRIFT_TOL: f64 = 1e-8;

/// Affine control scenes: F_t drift budget (equals the energy budget).
pub const DRIFT_TOL_AFFINE: f64 = 1e-8;

/// Poisson bracket magnitude relative to the product of gradient scales.
pub const BRACKET_TOL: f64 = 1e-5;

/// Forward-then-backward geodesic position mismatch at h = 1e-3, duration 0.5.
pub const REVERSIBILITY_TOL: f64 = 1e-6;

/// Metric compatibility: max |(nabla_i g)_jk| at sample points.
pub const METRIC_COMPAT_TOL: f64 = 1e-9;

/// Eigenvalue clustering gap, scaled by (1 + spectral radius).
pub const CLUSTER_GAP_FACTOR: f64 = 1e-7;

/// Constant-branch detection: branch variation below this (scaled by
/// 1 + spectral radius) counts as constant.
pub const CONST_BRANCH_FACTOR: f64 = 1e-6;

/// |A V - V diag(mu)| relative to the spectral radius.
pub const EIGEN_RECONSTRUCTION_TOL: f64 = 1e-9;

/// |V^T G V - Id| bound for the g-orthonormal eigenbasis.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Simple-eigenvalue gap required by the perturbation-formula gradient.
pub const SIMPLE_EIG_GAP: f64 = 1e-5;

/// Check (a) of the eigenvector lemma: |g(grad mu_i, v_j)| for j != i.
pub const GRAD_ORTHOGONALITY_TOL: f64 = 1e-7;

/// Check (b): |(A - mu_i) grad mu_i| relative to |grad mu_i| and spectrum scale.
pub const GRAD_EIGENSPACE_TOL: f64 = 1e-6;

/// compute_A(g, reconstruct_gbar(g, A, eps)) = A round-trip bound.
pub const ROUNDTRIP_TOL: f64 = 1e-10;

/// Off-H agreement of the eigenframe tensor T with its closed form.
pub const T_COINCIDENCE_TOL: f64 = 1e-9;

/// F_t is refused when t is within this distance of the spectrum of A.
pub const SPECTRUM_GUARD: f64 = 1e-8;

/// Condition estimate of (A - t Id) above which F_t evaluation errors out.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Non-c eigenvalue clusters must be separated from c by more than this.
pub const CLUSTER_SEPARATION: f64 = 1e-6;

/// Central finite-difference step for oracles and the bracket x-derivatives.
pub const FD_STEP: f64 = 1e-6;

/// Autodiff vs central finite differences: |ad - fd| <= tol * (1 + |ad|).
pub const AUTODIFF_FD_TOL: f64 = 1e-7;

/// |P Lambda| bound for eps = 0 scenes, relative to (1 + |Lambda|).
pub const P_LAMBDA_TOL: f64 = 1e-8;

/// Affine detection: |Lambda| bound scaled by the A/scale magnitude.
pub const AFFINE_LAMBDA_TOL: f64 = 1e-8;

/// eps must be an odd negative integer within this distance for the
/// eps-class verdict.
pub const EPS_INTEGER_TOL: f64 = 1e-9;

/// Smallest singular value of g(P.,.) restricted to an eigenspace,
/// relative to its largest entry.
pub const P_FORM_RANK_TOL: f64 = 1e-8;

/// Homogeneity F_t(s X) = s^2 F_t(X) relative bound.
pub const HOMOGENEITY_TOL: f64 = 1e-12;

/// Blow-up factor for the negative-exponent diagnostic.
pub const BLOWUP_RATIO: f64 = 1e6;

/// No-blow-up factor: regularized samples may not exceed this multiple of
/// the off-H magnitude.
pub const NO_BLOWUP_FACTOR: f64 = 10.0;

/// Floor applied to residual scales before division.
pub const SCALE_FLOOR: f64 = f64::EPSILON;

/// Default number of domain samples for residual reports and validation.
pub const DEFAULT_SAMPLES: usize = 1000;

/// Default RNG seed.
pub const DEFAULT_SEED: u64 = 42;

/// Default geodesic step size.
pub const DEFAULT_STEP: f64 = 1e-3;
