"""Acceptance suite: one test per criterion, each recorded for the summary hook.

Run with ``pytest tests/test_acceptance.py -v`` (or execute this file).  The
finite-element criteria are marked ``slow`` and take about a minute together.
"""

import filecmp
import os
import sys
import time

import numpy as np
import pytest

from acceptance_record import record
from compound_krylov.fem import gen_checkerboard_problem, gen_hole_problem, sigma_of_l
from compound_krylov.harness import ExperimentConfig, error_vs_order, make_problem, run_offline
from compound_krylov.harness import run_online_eval
from compound_krylov.harness.experiments import build_bases, combine, evaluate_basis
from compound_krylov.krylov import cg_solve, cheb_bound
from compound_krylov.linearise import explicit_linearisation_power, normal_form
from compound_krylov.offline import build_ck1, build_ck2, build_ck_exact
from compound_krylov.paramsys import ParametricMatrix, evaluate, kron_power
from oracles import (
    dense_matrix,
    delta_truncate,
    energy,
    galerkin,
    kron_chain,
    max_principal_angle,
    orth,
    random_spd_terms,
)

EPS = np.finfo(float).eps

# subspace dimensions at FE dimension 961, order 5, cut-off 1e-7
TABLE_DIMS = {(2, 2): (21, 21), (2, 4): (77, 73), (4, 4): (178, 181)}


def _small_instances(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(2, 9))
        s = int(rng.integers(1, 4))
        k = int(rng.integers(1, 5))
        P = ParametricMatrix(random_spd_terms(rng, n, s))
        yield P, rng.standard_normal(n), rng.standard_normal(s), k


def _checkerboard_config(tmp_path, N=2, M=2, **kw):
    data = {"problem": {"kind": "checkerboard", "N": N, "M": M, "divisions": 32, "a": 20.0},
            "method": "ck1", "order": 5, "delta": 1e-7, "sample_count": 100, "rng_seed": 0,
            "output_dir": str(tmp_path)}
    data.update(kw)
    return ExperimentConfig.from_dict(data)


@pytest.fixture(scope="module")
def board22(tmp_path_factory):
    cfg = _checkerboard_config(tmp_path_factory.mktemp("b22"))
    return cfg, make_problem(cfg)


def test_criterion_1_linearisation_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for P, b, sigma, k in _small_instances(50, 1):
        lhs = explicit_linearisation_power(P, b, k) @ kron_power(sigma, k)
        np.testing.assert_array_equal(kron_power(sigma, k), kron_chain(sigma, k))
        A = dense_matrix(P.terms, sigma)
        rhs = np.linalg.matrix_power(A, k) @ b
        worst = max(worst, np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10.0
    record(1, ok, f"max rel err {worst:.2e} (tol 1e-10), {elapsed:.2f}s (limit 10s), 50 instances")
    assert ok


def test_criterion_2_normal_form():
    worst = 0.0
    for P, b, _, k in _small_instances(50, 1):
        L = explicit_linearisation_power(P, b, k)
        ref = L @ L.T
        worst = max(worst, np.linalg.norm(normal_form(P, b, k).M - ref) / np.linalg.norm(ref))
    ok = worst <= 1e-10
    record(2, ok, f"max rel Frobenius err {worst:.2e} (tol 1e-10), 50 instances")
    assert ok


def test_criterion_3_exact_inclusion():
    rng = np.random.default_rng(3)
    worst, checks = -np.inf, 0
    for _ in range(5):
        n, s = int(rng.integers(4, 9)), int(rng.integers(1, 4))
        P = ParametricMatrix(random_spd_terms(rng, n, s))
        b = rng.standard_normal(n)
        B = build_ck_exact(P, b, 4)
        for _ in range(20):
            sigma = rng.random(s) + 0.2
            A = dense_matrix(P.terms, sigma)
            x = np.linalg.solve(A, b)
            cg = cg_solve(P, sigma, b, 4, x_exact=x, compute_kappa=False).errors()
            for j in range(1, 5):
                ck = energy(A, x - galerkin(A, b, B.prefix(j).Q))
                worst = max(worst, ck - cg[j - 1])
                checks += 1
    ok = worst <= 1e-12
    record(3, ok, f"max (CK err - CG err) {worst:.2e} (tol 1e-12), {checks} checks")
    assert ok


def test_criterion_4_ck2_range():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(10):
        n, s = int(rng.integers(3, 9)), int(rng.integers(1, 4))
        P = ParametricMatrix(random_spd_terms(rng, n, s))
        b = rng.standard_normal(n)
        B = build_ck2(P, b, 4, 1e-14, variant="definition")
        Lhat = b[:, None]
        for k in range(1, 4):
            Lhat = delta_truncate(np.hstack([a @ Lhat for a in P.terms]), 1e-14)
            worst = max(worst, max_principal_angle(orth(B.carriers[k]), orth(Lhat)))
    ok = worst <= 1e-8
    record(4, ok, f"max principal angle {worst:.2e} rad (tol 1e-8), 10 instances, k <= 3")
    assert ok


def test_criterion_5_cg_bound():
    # errors are measured against a direct solve, so they cannot drop below
    # a few ulps of ||x||_A even where the bound itself does
    rng = np.random.default_rng(5)
    worst, floored, checks = 0.0, 0, 0
    for _ in range(100):
        n = int(rng.integers(2, 101))
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        A = (Q * np.logspace(0, rng.uniform(0, 4), n)) @ Q.T
        A = 0.5 * (A + A.T)
        b = rng.standard_normal(n)
        P = ParametricMatrix([A])
        x = np.linalg.solve(A, b)
        kappa = np.linalg.cond(A)
        xn = energy(A, x)
        for j, e in enumerate(cg_solve(P, [1.0], b, n, x_exact=x).errors(), start=1):
            bound = cheb_bound(kappa, j) * xn
            floored += bound < 10 * EPS * xn
            worst = max(worst, (e - bound) / xn)
            checks += 1
    ok = worst <= 10 * EPS
    record(5, ok, f"max (err - bound)/||x||_A {worst:.2e} (rounding floor {10 * EPS:.1e}), "
                  f"{checks} iterates, {floored} with bound below the floor")
    assert ok


@pytest.mark.slow
def test_criterion_6_checkerboard_dimensions():
    t0 = time.perf_counter()
    lines, ok = [], True
    for (N, M), targets in TABLE_DIMS.items():
        P = gen_checkerboard_problem(N, M, 32, 20.0)
        assert P.n == 961
        dims = (build_ck1(P.preconditioned, P.b, 5, 1e-7).dim,
                build_ck2(P.preconditioned, P.b, 5, 1e-7).dim)
        for d, t in zip(dims, targets):
            ok &= abs(d - t) <= 0.25 * t
        lines.append(f"{N}x{M} CK1 {dims[0]}/{targets[0]} CK2 {dims[1]}/{targets[1]}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    record(6, ok, "; ".join(lines) + f"; {elapsed:.1f}s (limit 300s)")
    assert ok


@pytest.mark.slow
def test_criterion_7_checkerboard_accuracy(board22):
    cfg, problem = board22
    errs = [e for _, _, e in error_vs_order(cfg, problem)]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    ok = monotone and errs[-1] <= 1e-4
    record(7, ok, "max rel err j=1..5: " + ", ".join(f"{e:.2e}" for e in errs)
           + f" (strictly decreasing: {monotone}, j=5 tol 1e-4)")
    assert ok


@pytest.mark.slow
def test_criterion_8_spectral_bounds(board22):
    _, problem = board22
    rng = np.random.default_rng(8)
    lo, hi = np.inf, -np.inf
    for sigma in 1.0 + 19.0 * rng.random((20, 4)):
        lam = np.linalg.eigvalsh(evaluate(problem.P, sigma))
        lo, hi = min(lo, lam[0]), max(hi, lam[-1])
    ok_board = lo >= 1.0 - 1e-8 and hi <= 20.0 + 1e-8
    a = 0.32
    hole = gen_hole_problem(36, a)
    alpha, beta = 1 - 3 * a, 1 / (1 - 3 * a)
    hlo, hhi = np.inf, -np.inf
    for l in np.concatenate([rng.uniform(-0.3, 0.3, 10), [-0.319, 0.319]]):
        lam = np.linalg.eigvalsh(evaluate(hole.preconditioned, sigma_of_l(l, a)))
        hlo, hhi = min(hlo, lam[0]), max(hhi, lam[-1])
    ok_hole = hlo >= alpha - 1e-8 and hhi <= beta + 1e-8
    ok = ok_board and ok_hole
    record(8, ok, f"checkerboard eig range [{lo:.6f}, {hi:.6f}] in [1, 20]; hole eig range "
                  f"[{hlo:.4f}, {hhi:.4f}] in [{alpha:.2f}, {beta:.2f}]")
    assert ok


@pytest.mark.slow
def test_criterion_9_hole_trend(tmp_path):
    cfg = ExperimentConfig.from_dict({
        "problem": {"kind": "hole", "divisions": 36, "a": 0.32, "l_max": 0.3},
        "method": "ck1", "order": 5, "delta": 1e-7, "sample_count": 7,
        "output_dir": str(tmp_path)})
    problem = make_problem(cfg)
    assert problem.P.n == 1088
    parts, ok = [], True
    for method in ("ck1", "ck2"):
        cfg.method = method
        bases = build_bases(cfg, problem)
        union = combine(bases)
        dims = [b.dim for b in bases] + [union.dim]
        ok &= all(120 <= d <= 480 for d in dims)
        ls = np.array([-0.3, 0.0, 0.3])
        sig = np.array([sigma_of_l(l, 0.32) for l in ls])
        rep = evaluate_basis(problem, union, sig, np.column_stack([np.ones(3), ls]), 5,
                             ls, with_cg=False)
        err = rep.column("anorm_error")
        ok &= err[0] > err[1] and err[2] > err[1]
        sig = sigma_of_l(0.1, 0.32)[None]
        by_j = []
        for j in range(1, 6):
            rep = evaluate_basis(problem, combine(bases, j), sig, np.array([[1.0, 0.1]]), j,
                                 with_cg=False)
            by_j.append(rep.column("rel_anorm_error")[0])
        y = np.log10(by_j)
        slope, icpt = np.polyfit(np.arange(1, 6), y, 1)
        resid = y - (slope * np.arange(1, 6) + icpt)
        r2 = 1 - resid @ resid / np.sum((y - y.mean()) ** 2)
        ok &= slope < 0 and r2 >= 0.9
        parts.append(f"{method} dims {dims[0]}/{dims[1]} union {dims[2]}, err l=-0.3/0/0.3 "
                     f"{err[0]:.1e}/{err[1]:.1e}/{err[2]:.1e}, l=0.1 slope {slope:.2f} R2 {r2:.3f}")
    record(9, ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_criterion_10_delta_sweep(board22):
    cfg, problem = board22
    sigmas = np.random.Generator(np.random.PCG64(0)).random((100, 4)) * 19.0 + 1.0
    parts, ok = [], True
    for method in ("ck1", "ck2"):
        errs = []
        for delta in (1e-3, 1e-5, 1e-7, 1e-9):
            B = (build_ck1 if method == "ck1" else build_ck2)(problem.P, problem.rhs[:, 0], 5, delta)
            rep = evaluate_basis(problem, B, sigmas, np.ones((100, 1)), 5, with_cg=False)
            errs.append(rep.max_error())
        ok &= all(b <= a for a, b in zip(errs, errs[1:]))
        parts.append(f"{method} " + ", ".join(f"{e:.3e}" for e in errs))
    record(10, ok, "max rel err for delta 1e-3,1e-5,1e-7,1e-9: " + "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_criterion_11_determinism(tmp_path):
    configs = {
        "board": {"problem": {"kind": "checkerboard", "N": 2, "M": 2, "divisions": 32},
                  "method": "ck1", "order": 5, "sample_count": 20, "rng_seed": 11},
        "hole": {"problem": {"kind": "hole", "divisions": 18}, "method": "ck2", "order": 4,
                 "sample_count": 9},
    }
    compared, mismatched = 0, []
    for name, data in configs.items():
        for run in ("a", "b"):
            cfg = ExperimentConfig.from_dict({**data, "output_dir": str(tmp_path / name / run)})
            basis, _ = run_offline(cfg)
            run_online_eval(cfg, basis)
        a, b = tmp_path / name / "a", tmp_path / name / "b"
        for f in sorted(os.listdir(a)):
            if f.endswith(".csv"):
                compared += 1
                if not filecmp.cmp(a / f, b / f, shallow=False):
                    mismatched.append(f"{name}/{f}")
    ok = compared > 0 and not mismatched
    record(11, ok, f"{compared} CSV files compared, mismatches: {mismatched or 'none'}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
