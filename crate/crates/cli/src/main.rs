//! Command-line front end: scene files in, machine-readable reports out.
//! Exit codes: 0 = all checks passed, 1 = a check failed (report written),
//! 2 = invalid input.

mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use pqproj_core::catalog;
use pqproj_core::error::Error;
use pqproj_core::geometry::{integrate_geodesic, GeodesicState, Termination};
use pqproj_core::integrals::{
    conservation_report, evaluate_along, phase_gradient, poisson_bracket_at, IntegralSpec,
    PhasePoint,
};
use pqproj_core::sampling::{sample_box, sample_momenta};
use pqproj_core::scene::{residual_report, validate_scene, EquationTag, PQScene};
use pqproj_core::scene_file::SceneFile;
use pqproj_core::spectra::{grid_path, lemma_dim_check, lemma_eigenvectors_check, trace_branches};
use pqproj_core::tol;

use report::{atomic_write, digest_bytes, emit, Report, Threshold};

const EXIT_OK: i32 = 0;
const EXIT_CHECK_FAILED: i32 = 1;
const EXIT_INVALID: i32 = 2;

#[derive(Parser)]
#[command(
    name = "pqproj",
    version,
    about = "Numerical certification of metric pairs: defining-equation residuals, \
             geodesic-flow integrals, and eigenvalue-structure checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EqArg {
    Main,
    Pqproj,
    Projective,
}

impl From<EqArg> for EquationTag {
    fn from(eq: EqArg) -> Self {
        match eq {
            EqArg::Main => EquationTag::Main,
            EqArg::Pqproj => EquationTag::PqProj,
            EqArg::Projective => EquationTag::Projective,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the algebraic structure conditions at sampled points.
    Validate {
        scene: PathBuf,
        #[arg(long, default_value_t = tol::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = tol::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residual report for one defining equation.
    Residuals {
        scene: PathBuf,
        #[arg(long, value_enum, default_value = "main")]
        eq: EqArg,
        #[arg(long, default_value_t = tol::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = tol::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigenvalue traces over a grid scan with the structure checks.
    Spectrum {
        scene: PathBuf,
        #[arg(long, default_value_t = 10)]
        grid: usize,
        #[arg(long, default_value_t = tol::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a geodesic and optionally dump the trajectory as CSV.
    Geodesic {
        scene: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        v0: Vec<f64>,
        #[arg(long = "T", default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = tol::DEFAULT_STEP)]
        h: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Conservation report for the integral family along one geodesic.
    Integrals {
        scene: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        t: Vec<f64>,
        /// Regularized spec as "c,k" (cluster value, multiplicity).
        #[arg(long, allow_hyphen_values = true)]
        regularized: Option<String>,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        v0: Vec<f64>,
        #[arg(long = "T", default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = tol::DEFAULT_STEP)]
        h: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise Poisson brackets at random phase points.
    Brackets {
        scene: PathBuf,
        /// Comma-separated "t:s" pairs, e.g. "0:5,5:6".
        #[arg(long, required = true, allow_hyphen_values = true)]
        pairs: String,
        #[arg(long = "phase-samples", default_value_t = 100)]
        phase_samples: usize,
        #[arg(long, default_value_t = tol::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structural classification verdict for a scene.
    Classify {
        scene: PathBuf,
        #[arg(long, default_value_t = tol::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = tol::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a catalog scene (positive entries re-run their admission gates).
    Catalog {
        name: String,
        /// Dimension for the affine pair.
        #[arg(long)]
        dim: Option<usize>,
        /// Conformal scale for the affine pair.
        #[arg(long)]
        scale: Option<f64>,
        /// X(x) for the projectively equivalent pair.
        #[arg(long = "x-expr")]
        x_expr: Option<String>,
        /// Y(y) for the projectively equivalent pair.
        #[arg(long = "y-expr")]
        y_expr: Option<String>,
        /// Domain box as "x_lo,x_hi,y_lo,y_hi".
        #[arg(long = "box", allow_hyphen_values = true)]
        box_: Option<String>,
        /// Quadratic form C as "c1,c2,c3" (diagonal) or
        /// "c11,c22,c33,c12,c13,c23".
        #[arg(long = "c-form", allow_hyphen_values = true)]
        c_form: Option<String>,
        /// Scaling parameter for the h-projective pair.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_INVALID
        }
    };
    std::process::exit(code);
}

struct LoadedScene {
    scene: PQScene,
    digest: String,
}

fn load_scene(path: &Path) -> Result<LoadedScene, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::InvalidArgument("scene file is not UTF-8".into()))?;
    let file = SceneFile::from_json(&text)?;
    let scene = file.to_scene()?;
    Ok(LoadedScene { scene, digest: digest_bytes(&bytes) })
}

fn parse_pairs(text: &str) -> Result<Vec<(f64, f64)>, Error> {
    text.split(',')
        .map(|chunk| {
            let (a, b) = chunk
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("bad pair `{chunk}`, expected t:s")))?;
            let t: f64 = a
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad number `{a}`")))?;
            let s: f64 = b
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad number `{b}`")))?;
            Ok((t, s))
        })
        .collect()
}

fn parse_numbers(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|chunk| {
            chunk
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad number `{chunk}`")))
        })
        .collect()
}

fn write_trajectory_csv(
    path: &Path,
    trajectory: &pqproj_core::geometry::Trajectory,
    f_columns: &[(String, Vec<f64>)],
) -> std::io::Result<()> {
    let m = trajectory
        .samples
        .first()
        .map(|(_, s)| s.x.len())
        .unwrap_or(0);
    let mut text = String::from("t");
    for i in 1..=m {
        text.push_str(&format!(",x{i}"));
    }
    for i in 1..=m {
        text.push_str(&format!(",v{i}"));
    }
    for (name, _) in f_columns {
        text.push_str(&format!(",{name}"));
    }
    text.push('\n');
    for (row, (t, state)) in trajectory.samples.iter().enumerate() {
        text.push_str(&format!("{t}"));
        for x in &state.x {
            text.push_str(&format!(",{x}"));
        }
        for v in &state.v {
            text.push_str(&format!(",{v}"));
        }
        for (_, values) in f_columns {
            text.push_str(&format!(",{}", values[row]));
        }
        text.push('\n');
    }
    atomic_write(path, &text)
}

fn run(command: Command) -> Result<i32, Error> {
    match command {
        Command::Validate { scene, samples, seed, out } => {
            let started = Instant::now();
            let loaded = load_scene(&scene)?;
            let validation = validate_scene(&loaded.scene, samples, seed)?;
            let passed = validation.passed;
            let report = Report {
                tool_version: env!("CARGO_PKG_VERSION"),
                scene_digest: loaded.digest,
                command: "validate".into(),
                seed,
                thresholds: vec![
                    Threshold { name: "scene_invariant_tol", value: tol::SCENE_INVARIANT_TOL },
                    Threshold { name: "self_adjoint_tol", value: tol::SELF_ADJOINT_TOL },
                    Threshold { name: "metric_pd_min_eig", value: tol::METRIC_PD_MIN_EIG },
                ],
                checks: serde_json::to_value(&validation)?,
                verdict: if passed { "pass".into() } else { "fail".into() },
                wall_clock_ms: started.elapsed().as_millis(),
            };
            emit(&report, out.as_deref())?;
            Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
        }

        Command::Residuals { scene, eq, samples, seed, out } => {
            let started = Instant::now();
            let loaded = load_scene(&scene)?;
            let tag: EquationTag = eq.into();
            let rep = residual_report(&loaded.scene, tag, samples, seed, tol::RESIDUAL_TOL)?;
            let passed = rep.passed;
            let summary = serde_json::json!({
                "equation": tag.as_str(),
                "samples": rep.samples.len(),
                "max_relative": rep.max_relative,
                "mean_relative": rep.mean_relative,
                "worst_point": rep.worst().map(|s| s.point.clone()),
            });
            let report = Report {
                tool_version: env!("CARGO_PKG_VERSION"),
                scene_digest: loaded.digest,
                command: format!("residuals --eq {}", tag.as_str()),
                seed,
                thresholds: vec![Threshold { name: "residual_tol", value: rep.tolerance }],
                checks: summary,
                verdict: if passed { "pass".into() } else { "fail".into() },
                wall_clock_ms: started.elapsed().as_millis(),
            };
            emit(&report, out.as_deref())?;
            Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
        }

        Command::Spectrum { scene, grid, seed, out } => {
            let started = Instant::now();
            let loaded = load_scene(&scene)?;
            let path = grid_path(&loaded.scene.chart, grid);
            let trace = trace_branches(&loaded.scene, &path)?;
            let dim_report = lemma_dim_check(&loaded.scene, &path)?;
            let eig_checks = match lemma_eigenvectors_check(&loaded.scene, &path) {
                Ok(checks) => serde_json::to_value(&checks)?,
                Err(Error::NoSimpleSpectrum) => {
                    serde_json::json!({"skipped": "no simple-spectrum sample points"})
                }
                Err(e) => return Err(e),
            };
            let eig_passed = eig_checks
                .as_array()
                .map(|arr| arr.iter().all(|c| c["passed"].as_bool().unwrap_or(false)))
                .unwrap_or(true);
            let passed = dim_report.passed && eig_passed;
            let branches = serde_json::json!({
                "variation": trace.variation,
                "constant": trace.constant,
                "delta_const": trace.delta_const,
                "ambiguous_samples": trace.ambiguous_samples.len(),
                "max_distinct_eigenvalues_seen": trace
                    .spectra
                    .iter()
                    .map(|s| s.clusters.len())
                    .max(),
            });
            let report = Report {
                tool_version: env!("CARGO_PKG_VERSION"),
                scene_digest: loaded.digest,
                command: format!("spectrum --grid {grid}"),
                seed,
                thresholds: vec![
                    Threshold { name: "cluster_gap_factor", value: tol::CLUSTER_GAP_FACTOR },
                    Threshold { name: "const_branch_factor", value: tol::CONST_BRANCH_FACTOR },
                    Threshold { name: "grad_orthogonality_tol", value: tol::GRAD_ORTHOGONALITY_TOL },
                    Threshold { name: "grad_eigenspace_tol", value: tol::GRAD_EIGENSPACE_TOL },
                ],
                checks: serde_json::json!({
                    "branches": branches,
                    "dim_check": serde_json::to_value(&dim_report)?,
                    "eigenvector_checks": eig_checks,
                }),
                verdict: if passed { "pass".into() } else { "fail".into() },
                wall_clock_ms: started.elapsed().as_millis(),
            };
            emit(&report, out.as_deref())?;
            Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
        }

        Command::Geodesic { scene, x0, v0, duration, h, csv } => {
            let loaded = load_scene(&scene)?;
            let init = GeodesicState { x: x0, v: v0 };
            let traj =
                integrate_geodesic(&loaded.scene.g, &loaded.scene.chart, &init, duration, h)?;
            if let Some(path) = csv {
                write_trajectory_csv(&path, &traj, &[])?;
            }
            let last = traj.samples.last().map(|(t, _)| *t).unwrap_or(0.0);
            eprintln!(
                "integrated {} samples to t = {last} ({})",
                traj.samples.len(),
                match traj.termination {
                    Termination::TimeElapsed => "time elapsed",
                    Termination::LeftDomain => "left domain",
                }
            );
            Ok(EXIT_OK)
        }

        Command::Integrals { scene, t, regularized, x0, v0, duration, h, csv, out } => {
            let started = Instant::now();
            let loaded = load_scene(&scene)?;
            let mut specs: Vec<IntegralSpec> = t.iter().map(|&t| IntegralSpec::plain(t)).collect();
            if let Some(text) = regularized {
                let values = parse_numbers(&text)?;
                if values.len() != 2 {
                    return Err(Error::InvalidArgument("--regularized expects \"c,k\"".into()));
                }
                let k = values[1] as usize;
                if values[1] != k as f64 || k == 0 {
                    return Err(Error::InvalidArgument(
                        "multiplicity k must be a positive integer".into(),
                    ));
                }
                specs.push(IntegralSpec::regularized(values[0], k)?);
            }
            let init = GeodesicState { x: x0, v: v0 };
            let traj =
                integrate_geodesic(&loaded.scene.g, &loaded.scene.chart, &init, duration, h)?;
            let drift = conservation_report(&loaded.scene, &traj, &specs)?;
            if let Some(path) = csv {
                let mut columns = Vec::new();
                for (idx, spec) in specs.iter().enumerate() {
                    let series = evaluate_along(&loaded.scene, &traj, spec)?;
                    columns.push((format!("F_t{}", idx + 1), series));
                }
                write_trajectory_csv(&path, &traj, &columns)?;
            }
            let passed = drift.passed;
            let report = Report {
                tool_version: env!("CARGO_PKG_VERSION"),
                scene_digest: loaded.digest,
                command: "integrals".into(),
                seed: tol::DEFAULT_SEED,
                thresholds: vec![
                    Threshold { name: "drift_tol_per_unit_time", value: tol::DRIFT_TOL },
                    Threshold { name: "drift_tol_regularized", value: tol::DRIFT_TOL_REGULARIZED },
                ],
                checks: serde_json::to_value(&drift)?,
                verdict: if passed { "pass".into() } else { "fail".into() },
                wall_clock_ms: started.elapsed().as_millis(),
            };
            emit(&report, out.as_deref())?;
            Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
        }

        Command::Brackets { scene, pairs, phase_samples, seed, out } => {
            let started = Instant::now();
            let loaded = load_scene(&scene)?;
            let pairs = parse_pairs(&pairs)?;
            let xs = sample_box(&loaded.scene.chart, phase_samples, seed);
            let ps = sample_momenta(loaded.scene.dim(), phase_samples, seed);
            let mut results = Vec::new();
            let mut all_ok = true;
            for &(t, s) in &pairs {
                let mut worst = 0.0f64;
                for (x, p) in xs.iter().zip(&ps) {
                    let phase = PhasePoint { x: x.clone(), p: p.clone() };
                    let bracket = poisson_bracket_at(&loaded.scene, t, s, &phase)?;
                    let scale = if t == s {
                        1.0
                    } else {
                        let gt = phase_gradient(&loaded.scene, t, &phase)?.norm();
                        let gs = phase_gradient(&loaded.scene, s, &phase)?.norm();
                        (gt * gs).max(tol::SCALE_FLOOR)
                    };
                    worst = worst.max(bracket.abs() / scale);
                }
                let passed = worst <= tol::BRACKET_TOL;
                all_ok &= passed;
                results.push(serde_json::json!({
                    "t": t, "s": s,
                    "max_relative_bracket": worst,
                    "passed": passed,
                }));
            }
            let report = Report {
                tool_version: env!("CARGO_PKG_VERSION"),
                scene_digest: loaded.digest,
                command: "brackets".into(),
                seed,
                thresholds: vec![Threshold { name: "bracket_tol", value: tol::BRACKET_TOL }],
                checks: serde_json::json!({ "pairs": results, "phase_samples": phase_samples }),
                verdict: if all_ok { "pass".into() } else { "fail".into() },
                wall_clock_ms: started.elapsed().as_millis(),
            };
            emit(&report, out.as_deref())?;
            Ok(if all_ok { EXIT_OK } else { EXIT_CHECK_FAILED })
        }

        Command::Classify { scene, samples, seed, out } => {
            let started = Instant::now();
            let loaded = load_scene(&scene)?;
            let validation = validate_scene(&loaded.scene, samples, seed)?;
            if !validation.passed {
                let report = Report {
                    tool_version: env!("CARGO_PKG_VERSION"),
                    scene_digest: loaded.digest,
                    command: "classify".into(),
                    seed,
                    thresholds: vec![],
                    checks: serde_json::to_value(&validation)?,
                    verdict: "invalid_scene".into(),
                    wall_clock_ms: started.elapsed().as_millis(),
                };
                emit(&report, out.as_deref())?;
                return Ok(EXIT_CHECK_FAILED);
            }
            let classification =
                pqproj_core::spectra::classify_pair(&loaded.scene, samples, seed)?;
            let verdict = classification.verdict.as_str();
            let consistent =
                classification.verdict != pqproj_core::spectra::Verdict::Inconsistent;
            let report = Report {
                tool_version: env!("CARGO_PKG_VERSION"),
                scene_digest: loaded.digest,
                command: "classify".into(),
                seed,
                thresholds: vec![
                    Threshold { name: "residual_tol", value: tol::RESIDUAL_TOL },
                    Threshold { name: "affine_lambda_tol", value: tol::AFFINE_LAMBDA_TOL },
                    Threshold { name: "p_lambda_tol", value: tol::P_LAMBDA_TOL },
                    Threshold { name: "eps_integer_tol", value: tol::EPS_INTEGER_TOL },
                ],
                checks: serde_json::to_value(&classification)?,
                verdict,
                wall_clock_ms: started.elapsed().as_millis(),
            };
            emit(&report, out.as_deref())?;
            Ok(if consistent { EXIT_OK } else { EXIT_CHECK_FAILED })
        }

        Command::Catalog { name, dim, scale, x_expr, y_expr, box_, c_form, lambda, out } => {
            // Negative scenes are emitted raw; positive entries re-run their
            // admission gates first.
            let file = if let Some((file, _)) = catalog::negative_by_name(&name) {
                file
            } else {
                let entry = match name.as_str() {
                    "affine" => catalog::make_affine_pair(dim.unwrap_or(2), scale.unwrap_or(4.0))?,
                    "dini" => {
                        let bx = match box_ {
                            Some(text) => {
                                let v = parse_numbers(&text)?;
                                if v.len() != 4 {
                                    return Err(Error::InvalidArgument(
                                        "--box expects x_lo,x_hi,y_lo,y_hi".into(),
                                    ));
                                }
                                vec![(v[0], v[1]), (v[2], v[3])]
                            }
                            None => vec![(0.0, 1.0), (1.0, 2.0)],
                        };
                        catalog::make_dini_pair(
                            x_expr.as_deref().unwrap_or("x+3"),
                            y_expr.as_deref().unwrap_or("y"),
                            bx,
                        )?
                    }
                    "sphere" => {
                        let c = match c_form {
                            Some(text) => {
                                let v = parse_numbers(&text)?;
                                match v.len() {
                                    3 => DMatrix::from_diagonal(&nalgebra::dvector![
                                        v[0], v[1], v[2]
                                    ]),
                                    6 => {
                                        let mut c = DMatrix::zeros(3, 3);
                                        c[(0, 0)] = v[0];
                                        c[(1, 1)] = v[1];
                                        c[(2, 2)] = v[2];
                                        c[(0, 1)] = v[3];
                                        c[(1, 0)] = v[3];
                                        c[(0, 2)] = v[4];
                                        c[(2, 0)] = v[4];
                                        c[(1, 2)] = v[5];
                                        c[(2, 1)] = v[5];
                                        c
                                    }
                                    _ => {
                                        return Err(Error::InvalidArgument(
                                            "--c-form expects 3 or 6 numbers".into(),
                                        ))
                                    }
                                }
                            }
                            None => DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0, 3.0]),
                        };
                        catalog::make_sphere_projective_pair(&c)?
                    }
                    "cp1" => catalog::make_cp1_hprojective_pair(lambda.unwrap_or(2.0))?,
                    other => catalog::entry_by_name(other)?,
                };
                SceneFile::from_scene(&entry.scene)
            };
            let json = file.to_json();
            match out {
                Some(path) => atomic_write(&path, &json)?,
                None => println!("{json}"),
            }
            Ok(EXIT_OK)
        }
    }
}
