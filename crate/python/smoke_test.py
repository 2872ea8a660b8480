#!/usr/bin/env python3
"""Smoke test for the pqproj Python bindings.

Builds the extension module if needed, imports it, and exercises the main
types and operations end to end. Exits non-zero on the first failure.

Usage: python3 python/smoke_test.py [--profile release|debug]
"""

import argparse
import pathlib
import shutil
import subprocess
import sys
import tempfile

REPO = pathlib.Path(__file__).resolve().parent.parent


def build_and_import(profile: str):
    lib = REPO / "target" / profile / "libpqproj.so"
    cmd = ["cargo", "build", "-p", "pqproj-py"]
    if profile == "release":
        cmd.append("--release")
    subprocess.run(cmd, cwd=REPO, check=True)
    if not lib.exists():
        sys.exit(f"extension library not found at {lib}")
    stage = pathlib.Path(tempfile.mkdtemp(prefix="pqproj_py_"))
    shutil.copy2(lib, stage / "pqproj.so")
    sys.path.insert(0, str(stage))
    import pqproj

    return pqproj


def approx(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--profile", default="release", choices=["release", "debug"])
    args = parser.parse_args()
    pqproj = build_and_import(args.profile)

    # Expressions: parse, evaluate, differentiate, round-trip.
    e = pqproj.parse_expr("4/(1+x^2+y^2)^2", ["x", "y"])
    assert approx(e.eval([0.0, 0.0]), 4.0)
    g = e.grad([0.3, -0.2])
    e2 = pqproj.parse_expr(str(e), ["x", "y"])
    assert approx(e2.eval([0.3, -0.2]), e.eval([0.3, -0.2]))
    h = 1e-6
    fd = (e.eval([0.3 + h, -0.2]) - e.eval([0.3 - h, -0.2])) / (2 * h)
    assert abs(g[0] - fd) <= 1e-8 * (1 + abs(g[0])), (g[0], fd)
    print("ok  expressions: parse/eval/grad/round-trip")

    # Catalog scenes and classification.
    names = pqproj.catalog_names()
    assert "dini" in names and "cp1" in names and "broken_dini" in names
    dini = pqproj.Scene.catalog("dini")
    assert dini.dimension == 2 and dini.epsilon == 0.0
    verdict = dini.classify(samples=300)
    assert verdict["verdict"] == "projective_eps0", verdict
    cp1 = pqproj.Scene.catalog("cp1")
    assert cp1.classify(samples=300)["verdict"] == "pq_eps_class(-1)"
    affine = pqproj.Scene.catalog("affine")
    assert affine.classify(samples=100)["verdict"] == "affine"
    print("ok  classification: affine / projective_eps0 / pq_eps_class(-1)")

    # Validation and residual reports.
    assert dini.validate(samples=300)["passed"]
    for eq in ("main", "pqproj", "projective"):
        rep = dini.residual_report(eq=eq, samples=300)
        assert rep["passed"] and rep["max_relative"] <= pqproj.RESIDUAL_TOL, rep
    broken = pqproj.Scene.catalog("broken_dini")
    rep = broken.residual_report(eq="main", samples=300)
    assert not rep["passed"] and rep["max_relative"] > 1e-3, rep
    print("ok  residuals: catalog passes, negative control fails")

    # Pair tensor structure at a point.
    a = dini.a_matrix([0.4, 1.3])
    assert approx(a[0][0], 3.4, 1e-9) and approx(a[1][1], 1.3, 1e-9)
    spec = dini.spectrum([0.4, 1.3])
    assert approx(spec["eigenvalues"][0], 1.3, 1e-9)
    assert [mult for _, mult in spec["clusters"]] == [1, 1]
    cp1_spec = cp1.spectrum([0.2, 0.1])
    assert [mult for _, mult in cp1_spec["clusters"]] == [2]
    print("ok  spectra: eigenvalues and cluster multiplicities")

    # Geodesics and conservation.
    traj = dini.geodesic([0.5, 1.5], [0.12, 0.15], duration=1.0, h=1e-3)
    assert traj["termination"] == "time-elapsed"
    report = dini.conservation([-2.0, 0.0, 5.0], [0.5, 1.5], [0.12, 0.15], duration=1.0, h=1e-3)
    assert report["passed"], report
    assert all(entry["relative_drift"] <= pqproj.DRIFT_TOL for entry in report["entries"])
    print("ok  conservation: drift within budget on the dini scene")

    # Brackets: exact zero on the diagonal, tiny off it.
    assert dini.poisson_bracket(5.0, 5.0, [0.4, 1.3], [0.2, -0.5]) == 0.0
    b = dini.poisson_bracket(5.0, 6.0, [0.4, 1.3], [0.2, -0.5])
    assert abs(b) < 1e-6, b
    print("ok  brackets: antisymmetry and commutation")

    # Regularized evaluation agrees with F_c off the eigenvalue level set,
    # and the exponent diagnostic shrinks approaching it.
    c = 3.5
    point, xv = [0.2, 1.4], [0.4, -0.2]
    assert approx(dini.f_c_regularized(c, 1, xv, point), dini.f_t(c, xv, point), 1e-9)
    near = dini.f_c_exponent_diag(c, 2, xv, [0.5 - 1e-6, 1.4])
    far = dini.f_c_exponent_diag(c, 2, xv, [0.2, 1.4])
    assert abs(near) < abs(far) * 1e-2, (near, far)
    print("ok  regularized integrals and exponent diagnostic")

    # Scene JSON round-trip.
    clone = pqproj.Scene.from_json(dini.to_json())
    assert clone.a_matrix([0.4, 1.3]) == dini.a_matrix([0.4, 1.3])
    print("ok  scene JSON round-trip")

    print("smoke test passed")


if __name__ == "__main__":
    main()
