"""Offline builds, batched online evaluation and CSV reports."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..krylov import cg_solve, cheb_bound, direct_solve, spectral_bounds
from ..offline import ReducedBasis, build_basis, load_basis, save_basis, union_basis
from ..online import compress, solve_online
from ..paramsys import ParameterBox, ParametricMatrix, a_norm, load_family
from .config import ExperimentConfig

log = logging.getLogger(__name__)

FAILED = "failed"
BUILD_REPORT_COLUMNS = ("step", "k_rank", "sv_max", "sv_min_retained", "sv_first_discarded")
SINGULAR_VALUE_COLUMNS = ("step", "position", "value", "retained")


@dataclass
class ProblemInstance:
    """Everything the pipeline needs from a problem source.

    ``rhs`` has one column per load.  With several loads the solution for a
    sample is ``sum_q weights[q] * x_q``; the hole problem uses
    weights ``(1, l)``.
    """

    P: ParametricMatrix
    rhs: np.ndarray
    box: ParameterBox
    kind: str
    alpha: float | None = None
    beta: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def n_loads(self) -> int:
        return self.rhs.shape[1]


def make_problem(config: ExperimentConfig) -> ProblemInstance:
    opts = config.problem
    if config.kind == "checkerboard":
        from ..fem import gen_checkerboard_problem
        fp = gen_checkerboard_problem(int(opts["N"]), int(opts["M"]), int(opts["divisions"]),
                                      float(opts["a"]))
        return ProblemInstance(fp.preconditioned, fp.rhs, fp.box, "checkerboard",
                               fp.alpha, fp.beta)
    if config.kind == "hole":
        from ..fem import gen_hole_problem
        fp = gen_hole_problem(int(opts["divisions"]), float(opts["a"]))
        return ProblemInstance(fp.preconditioned, fp.rhs, fp.box, "hole", fp.alpha, fp.beta,
                               {"a": float(opts["a"]), "l_max": float(opts["l_max"])})
    P, b, meta = load_family(opts["path"])
    if b is None:
        raise FileNotFoundError(f"{opts['path']} has no b.mtx")
    rhs = b.reshape(P.n, -1)
    lower, upper = opts.get("lower"), opts.get("upper")
    if lower is None or upper is None:
        if "box" not in meta:
            raise ValueError("matrices problem needs lower/upper bounds (none stored in meta.json)")
        lower = meta["box"]["lower"] if lower is None else lower
        upper = meta["box"]["upper"] if upper is None else upper
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (P.s,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (P.s,))
    return ProblemInstance(P, rhs[:, :1], ParameterBox(lower, upper), "matrices",
                           meta.get("alpha"), meta.get("beta"))


def sample_sigmas(box: ParameterBox, count: int, seed: int) -> np.ndarray:
    """``count`` componentwise-uniform samples from ``box`` (rows).

    Draws come from a PCG64 generator seeded with ``seed`` and are mapped as
    ``u * (upper - lower) + lower`` with ``u`` in ``[0, 1)``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random((count, box.s))
    return u * (box.upper - box.lower) + box.lower


def evaluation_points(config: ExperimentConfig, problem: ProblemInstance):
    """Parameter vectors and load weights for the online stage.

    Returns ``(sigmas, weights, labels)`` where ``labels`` is the swept
    translation for the hole problem and ``None`` otherwise.
    """
    if problem.kind == "hole":
        from ..fem import sigma_of_l
        l_max = problem.info["l_max"]
        ls = np.linspace(-l_max, l_max, config.sample_count)
        sigmas = np.array([sigma_of_l(l, problem.info["a"]) for l in ls])
        weights = np.column_stack([np.ones_like(ls), ls])
        return sigmas, weights, ls
    sigmas = sample_sigmas(problem.box, config.sample_count, config.rng_seed)
    return sigmas, np.ones((len(sigmas), 1)), None


def build_bases(config: ExperimentConfig, problem: ProblemInstance) -> list[ReducedBasis]:
    """One basis per load column."""
    kwargs = {"variant": config.variant} if config.method == "ck2" else {}
    return [build_basis(config.method, problem.P, problem.rhs[:, q], config.order,
                        config.cutoffs(), **kwargs)
            for q in range(problem.n_loads)]


def combine(bases, order: int | None = None) -> ReducedBasis:
    """Shared basis for all loads, optionally truncated to a lower order."""
    if order is not None:
        bases = [b.prefix(order) for b in bases]
    return bases[0] if len(bases) == 1 else union_basis(bases)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def build_report_rows(basis: ReducedBasis) -> list[tuple]:
    rows = []
    for k, (r, sv) in enumerate(zip(basis.ranks, basis.spectra), start=1):
        sv = np.asarray(sv)
        rows.append((k, r,
                     sv[0] if sv.size else None,
                     sv[r - 1] if r > 0 else None,
                     sv[r] if r < sv.size else None))
    return rows


def dump_singular_values(basis: ReducedBasis, path) -> None:
    """Every examined singular value per step, flagged retained or discarded."""
    rows = []
    for k, (r, sv) in enumerate(zip(basis.ranks, basis.spectra), start=1):
        for pos, value in enumerate(np.asarray(sv), start=1):
            rows.append((k, pos, value, int(pos <= r)))
    write_csv(path, SINGULAR_VALUE_COLUMNS, rows)


def _suffix(q: int) -> str:
    return "" if q == 0 else f"_load{q}"


def run_offline(config: ExperimentConfig, problem: ProblemInstance | None = None):
    """Build, persist and report the reduced basis.

    Writes ``basis/`` (shared basis), ``build_report.csv`` and
    ``singular_values.csv`` (with a ``_load<q>`` suffix for extra loads) and
    ``timing.json`` to ``config.output_dir``.  Returns ``(basis, bases)``.
    """
    problem = problem or make_problem(config)
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    bases = build_bases(config, problem)
    basis = combine(bases)
    wall = time.perf_counter() - t0
    save_basis(basis, os.path.join(out, "basis"))
    for q, b in enumerate(bases):
        write_csv(os.path.join(out, f"build_report{_suffix(q)}.csv"), BUILD_REPORT_COLUMNS,
                  build_report_rows(b))
        dump_singular_values(b, os.path.join(out, f"singular_values{_suffix(q)}.csv"))
    _update_timing(out, {"offline_seconds": wall, "dimension": basis.dim})
    log.info("offline: %s order %d, dimension %d, %.2fs", config.method, config.order,
             basis.dim, wall)
    return basis, bases


def _update_timing(out, entries: dict) -> None:
    path = os.path.join(out, "timing.json")
    data = {}
    if os.path.exists(path):
        with open(path) as fh:
            data = json.load(fh)
    data.update(entries)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class ErrorReport:
    columns: list
    rows: list
    failures: int = 0

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([np.nan if r[i] == FAILED else r[i] for r in self.rows], dtype=float)

    def max_error(self, relative: bool = True) -> float:
        return float(np.nanmax(self.column("rel_anorm_error" if relative else "anorm_error")))

    def to_csv(self, path) -> None:
        write_csv(path, self.columns, self.rows)


def evaluate_basis(problem: ProblemInstance, basis: ReducedBasis, sigmas, weights,
                   order: int, labels=None, workers: int = 1, with_cg: bool = True) -> ErrorReport:
    """Compare reduced solutions with direct solves at each sample.

    ``order`` sets the CG iteration count used for the ``cg_error_j`` and
    ``cheb_bound`` reference columns.
    """
    P = problem.P
    sigmas = np.atleast_2d(np.asarray(sigmas, dtype=float))
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    RS = compress(P, problem.rhs, basis)
    solutions = solve_online(RS, sigmas, workers=workers)

    def row(i):
        sigma, w, sol = sigmas[i], weights[i], solutions[i]
        b = problem.rhs @ w
        head = list(sigma) + ([labels[i]] if labels is not None else [])
        try:
            if not sol.ok:
                raise np.linalg.LinAlgError(sol.error)
            x = direct_solve(P, sigma, b)
            xhat = sol.x @ w
            err = a_norm(P, sigma, x - xhat)
            xnorm = a_norm(P, sigma, x)
            rel = err / xnorm if xnorm > 0 else 0.0
            cg_err = cgb = None
            if with_cg:
                cg_err = cg_solve(P, sigma, b, order, x_exact=x, compute_kappa=False).errors()[-1]
                if problem.alpha is not None and problem.beta is not None:
                    kappa = problem.beta / problem.alpha
                else:
                    lo, hi = spectral_bounds(P, sigma)
                    kappa = hi / lo
                cgb = cheb_bound(kappa, order) * xnorm
            return head + [err, rel, cg_err, basis.dim, cgb], False
        except (np.linalg.LinAlgError, ValueError) as exc:
            log.warning("sample %d failed: %s", i, exc)
            return head + [FAILED, FAILED, FAILED, basis.dim, FAILED], True

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(row, range(len(sigmas))))
    else:
        results = [row(i) for i in range(len(sigmas))]
    columns = [f"sigma_{i}" for i in range(1, P.s + 1)]
    if labels is not None:
        columns.append("l")
    columns += ["anorm_error", "rel_anorm_error", "cg_error_j", "reduced_dim", "cheb_bound"]
    return ErrorReport(columns, [r for r, _ in results], sum(f for _, f in results))


def read_sigmas(path, s: int) -> np.ndarray:
    """Batch input CSV with header ``sigma_1,...,sigma_s``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = [f"sigma_{i}" for i in range(1, s + 1)]
        if [h.strip() for h in header] != expected:
            raise ValueError(f"{path}: header must be {','.join(expected)}")
        rows = [[float(v) for v in r] for r in reader if r]
    if any(len(r) != s for r in rows):
        raise ValueError(f"{path}: every row needs {s} values")
    return np.array(rows, dtype=float).reshape(-1, s)


def run_online_eval(config: ExperimentConfig, basis: ReducedBasis | str,
                    problem: ProblemInstance | None = None, sigmas=None) -> ErrorReport:
    """Online stage: reduced solves at the configured samples, written to ``errors.csv``.

    ``sigmas`` overrides the sampled parameters (single-load problems only).
    """
    problem = problem or make_problem(config)
    if isinstance(basis, str):
        basis = load_basis(basis)
    if basis.n != problem.P.n:
        raise ValueError(f"basis has n = {basis.n}, problem has n = {problem.P.n}")
    if sigmas is None:
        sigmas, weights, labels = evaluation_points(config, problem)
    else:
        if problem.n_loads != 1:
            raise ValueError("explicit sigma lists are only supported for single-load problems")
        sigmas = np.atleast_2d(np.asarray(sigmas, dtype=float))
        weights, labels = np.ones((len(sigmas), 1)), None
    os.makedirs(config.output_dir, exist_ok=True)
    t0 = time.perf_counter()
    report = evaluate_basis(problem, basis, sigmas, weights, config.order, labels,
                            workers=config.workers)
    _update_timing(config.output_dir, {"online_seconds": time.perf_counter() - t0})
    report.to_csv(os.path.join(config.output_dir, "errors.csv"))
    return report


def error_vs_order(config: ExperimentConfig, problem: ProblemInstance | None = None,
                   bases=None) -> list[tuple[int, int, float]]:
    """``(j, dim, max relative error)`` for the nested bases ``j = 1 .. order``."""
    problem = problem or make_problem(config)
    bases = bases or build_bases(config, problem)
    sigmas, weights, labels = evaluation_points(config, problem)
    out = []
    for j in range(1, config.order + 1):
        basis = combine(bases, j)
        rep = evaluate_basis(problem, basis, sigmas, weights, j, labels, with_cg=False)
        out.append((j, basis.dim, rep.max_error()))
    return out
