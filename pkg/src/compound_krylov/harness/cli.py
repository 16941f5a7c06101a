"""Command line entry point ``ck``.

Exit codes: 0 success, 2 when some online samples failed, 1 on fatal errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from ..fem import (
    gen_checkerboard_problem,
    gen_hole_problem,
    load_mesh,
    save_mesh,
    structured_square_mesh,
    validate_mesh,
)
from ..fem.mesh import checkerboard_tags, square_with_hole_mesh
from .config import load_config
from .experiments import read_sigmas, run_offline, run_online_eval, make_problem

log = logging.getLogger("compound_krylov")


def _cmd_offline(args) -> int:
    config = load_config(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    basis, _ = run_offline(config)
    print(f"basis dimension {basis.dim} written to {os.path.join(config.output_dir, 'basis')}")
    return 0


def _report_status(report, config) -> int:
    print(f"{len(report.rows)} samples, max relative A-norm error "
          f"{report.max_error():.3e}, errors in {os.path.join(config.output_dir, 'errors.csv')}")
    if report.failures:
        print(f"{report.failures} samples failed", file=sys.stderr)
        return 2
    return 0


def _cmd_online(args) -> int:
    config = load_config(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    problem = make_problem(config)
    sigmas = read_sigmas(args.sigmas, problem.P.s) if args.sigmas else None
    report = run_online_eval(config, args.basis, problem, sigmas)
    return _report_status(report, config)


def _cmd_eval(args) -> int:
    config = load_config(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    problem = make_problem(config)
    basis, _ = run_offline(config, problem)
    report = run_online_eval(config, basis, problem)
    return _report_status(report, config)


def _cmd_mesh_gen(args) -> int:
    if args.kind == "square":
        mesh = structured_square_mesh(args.divisions)
    elif args.kind == "checkerboard":
        mesh = structured_square_mesh(args.divisions)
        mesh.tags = checkerboard_tags(mesh, args.N, args.M)
    else:
        mesh = square_with_hole_mesh(args.divisions)
    save_mesh(mesh, args.out)
    print(f"{mesh.num_nodes} nodes, {mesh.num_triangles} triangles, "
          f"{mesh.free_nodes.size} free nodes -> {args.out}")
    if args.export:
        if args.kind == "hole":
            problem = gen_hole_problem(args.divisions, args.a if args.a is not None else 0.32)
        else:
            N, M = (1, 1) if args.kind == "square" else (args.N, args.M)
            problem = gen_checkerboard_problem(N, M, args.divisions,
                                               args.a if args.a is not None else 20.0)
        problem.export(args.export)
        print(f"preconditioned family (n={problem.n}, s={problem.s}) -> {args.export}")
    return 0


def _cmd_mesh_validate(args) -> int:
    mesh = load_mesh(args.path)
    problems = validate_mesh(mesh)
    for p in problems:
        print(p)
    if problems:
        return 1
    print(f"ok: {mesh.num_nodes} nodes, {mesh.num_triangles} triangles")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ck", description="Compound Krylov reduced solvers")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("offline", help="build and save a reduced basis")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_offline)

    p = sub.add_parser("online", help="evaluate a saved basis at sampled parameters")
    p.add_argument("--config", required=True)
    p.add_argument("--basis", required=True, help="directory written by 'ck offline'")
    p.add_argument("--sigmas", help="CSV with header sigma_1,...,sigma_s")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_online)

    p = sub.add_parser("eval", help="offline build followed by online evaluation")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("mesh", help="generate or validate meshes")
    msub = p.add_subparsers(dest="mesh_command", required=True)
    g = msub.add_parser("gen")
    g.add_argument("--kind", choices=("square", "checkerboard", "hole"), default="square")
    g.add_argument("--divisions", type=int, default=32)
    g.add_argument("--N", type=int, default=2)
    g.add_argument("--M", type=int, default=2)
    g.add_argument("--a", type=float, help="parameter box bound used with --export")
    g.add_argument("--out", required=True)
    g.add_argument("--export", help="also write the preconditioned family to this directory")
    g.set_defaults(func=_cmd_mesh_gen)
    v = msub.add_parser("validate")
    v.add_argument("path")
    v.set_defaults(func=_cmd_mesh_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # fatal errors map to exit code 1
        log.debug("fatal", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
