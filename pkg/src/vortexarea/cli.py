"""Command line entry point: one subcommand per operation, JSON on stdout, CSV side files."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .area import functional_F2l, functional_Fl, half_cylinder_field, restrict_half, vortex_graph_area
from .errors import ValidationError, VortexError
from .model import (
    BoundaryTrace,
    ConvexProfile,
    ProblemParams,
    RectDomain,
    SolverOptions,
    build_chart,
)
from .optimize import OptimizeOptions, find_threshold, optimize_profile, value_curve
from .plateau import solve_minimal_graph
from .sequences import WHICH, sequence_area
from .symmetrize import (
    CARTESIAN,
    CYLINDER,
    classical_steiner,
    cylindrical_steiner,
    random_solid,
    read_vox,
    voxel_perimeter,
    voxel_volume,
    write_vox,
)

log = logging.getLogger("vortexarea")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _positive_float(name):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number") from None
        if not (math.isfinite(v) and v > 0):
            raise argparse.ArgumentTypeError(f"{name} must be positive")
        return v

    return conv


def _nonneg_float(text):
    v = float(text)
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError("value must be nonnegative")
    return v


def _common(p, seed, threads, verbose):
    p.add_argument("--seed", type=int, default=seed, help="seed of the random generator (random solids)")
    p.add_argument("--threads", type=int, default=threads, help="worker processes; VORTEX_THREADS overrides")
    p.add_argument("-v", "--verbose", action="store_true", default=verbose, help="diagnostics on stderr")


def build_parser():
    p = _Parser(prog="vortexarea", description="Relaxed area of the vortex map and the free-boundary Plateau problem.")
    _common(p, 0, 1, False)
    # the common flags are accepted after the subcommand too; there they only override when given
    common = _Parser(add_help=False)
    _common(common, argparse.SUPPRESS, argparse.SUPPRESS, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    a = sub.add_parser("area", help="vortex graph area, F_2l or F_l")
    a.add_argument("--functional", choices=("vortex", "F2l", "Fl"), default="vortex")
    a.add_argument("--l", type=_positive_float("l"), required=True)
    a.add_argument("--epsilon", type=_nonneg_float, default=0.0)
    a.add_argument("--grid", type=int, default=129, help="nodes per side of the chart")
    a.add_argument("--method", choices=("closed", "quadrature"), default="closed")
    a.add_argument("--h-file", help="profile JSON; without it the flat profile and the half-cylinder field are used")

    s = sub.add_parser("solve", help="minimal graph over the subgraph of a profile")
    s.add_argument("--l", type=_positive_float("l"), required=True)
    s.add_argument("--h-file", required=True)
    s.add_argument("--grid", type=int, default=65)
    s.add_argument("--tol", type=_positive_float("tol"), default=1e-8)
    s.add_argument("--max-iter", type=int, default=500)
    s.add_argument("--out", help="CSV of the field (w1,w2,value)")

    o = sub.add_parser("optimize", help="optimal profile and branch for one l")
    o.add_argument("--l", type=_positive_float("l"), required=True)
    o.add_argument("--knots", type=int, default=17)
    o.add_argument("--grid", type=int, default=65)
    o.add_argument("--tol", type=_positive_float("tol"), default=1e-8, help="inner residual tolerance")
    o.add_argument("--method", choices=("gradient", "coordinate"), default="gradient")
    o.add_argument("--out", help="JSON of the nontrivial profile")

    t = sub.add_parser("threshold", help="bisection for the radius where the two branches exchange")
    t.add_argument("--lo", type=_positive_float("lo"), default=0.5)
    t.add_argument("--hi", type=_positive_float("hi"), default=1.5)
    t.add_argument("--tol-l", type=_positive_float("tol-l"), default=0.01)
    t.add_argument("--knots", type=int, default=17)
    t.add_argument("--grid", type=int, default=65)

    q = sub.add_parser("sequence", help="graph area of an approximating map")
    q.add_argument("--which", choices=WHICH, required=True)
    q.add_argument("--l", type=_positive_float("l"), required=True)
    q.add_argument("--k", type=int, default=64)
    q.add_argument("--grid", type=int, default=64, help="cells per piece of the polar grid")
    q.add_argument("--opt-grid", type=int, default=65, help="chart nodes for the recovery optimizer")
    q.add_argument("--out", help="CSV of the sampled map (r,theta,u1,u2)")

    y = sub.add_parser("symmetrize", help="Steiner symmetrization of a .vox solid")
    y.add_argument("--mode", choices=("cylindrical", "classical"), required=True)
    y.add_argument("--in", dest="inp", help="input .vox; without it a random solid is drawn from --seed")
    y.add_argument("--out", help="output .vox")
    y.add_argument("--axis", type=int, default=2, choices=(0, 1, 2))
    y.add_argument("--dims", type=int, nargs=3, default=(32, 32, 32), help="dims of the random solid")
    y.add_argument("--l", type=_positive_float("l"), default=1.0, help="cylinder length of the random solid")

    c = sub.add_parser("value-curve", help="F_star and relaxed area over a list of radii")
    c.add_argument("--l-list", required=True, help="comma separated radii")
    c.add_argument("--knots", type=int, default=17)
    c.add_argument("--grid", type=int, default=65)
    c.add_argument("--out", help="CSV with header l,F,branch,relaxed_area")
    return p


def _threads(args):
    env = os.environ.get("VORTEX_THREADS")
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError("VORTEX_THREADS must be an integer", VORTEX_THREADS=env) from None
    else:
        n = args.threads
    if n < 1:
        raise ValidationError("thread count must be >= 1", threads=n)
    return n


def _load_profile(path, l):
    try:
        with open(path) as f:
            h = ConvexProfile.from_dict(json.load(f))
    except OSError as exc:
        raise ValidationError(f"cannot read profile: {exc}", path=path) from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"profile is not JSON: {exc}", path=path) from None
    if abs(h.l - l) > 1e-12:
        raise ValidationError("profile knots do not cover [0, 2l]", l=l, profile_l=h.l)
    return h.validate()


def _write_field_csv(path, psi):
    w1 = psi.chart.node_w1()
    w2 = psi.chart.node_w2()
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["w1", "w2", "value"])
        for a, b, v in zip(w1.ravel(), w2.ravel(), psi.values.ravel()):
            wr.writerow([repr(float(a)), repr(float(b)), repr(float(v))])


def _solver_opts(args):
    return SolverOptions(tol_res=args.tol, max_iter=getattr(args, "max_iter", 500))


def cmd_area(args):
    p = ProblemParams(args.l, args.epsilon)
    if args.functional == "vortex":
        return {"value": vortex_graph_area(p, args.method), "grid": None}
    grid = RectDomain.from_nodes(args.l, args.grid)
    if args.h_file:
        h = _load_profile(args.h_file, args.l)
        psi = None if h.degenerate else solve_minimal_graph(build_chart(h, grid))[0]
    else:
        h = ConvexProfile.constant(args.l, 3, 1.0)
        psi = half_cylinder_field(build_chart(h, grid))
    if args.functional == "F2l":
        value = functional_F2l(h, psi)
    else:
        value = functional_Fl(h, None if psi is None else restrict_half(psi))
    return {"value": value, "grid": args.grid}


def cmd_solve(args):
    h = _load_profile(args.h_file, args.l)
    chart = build_chart(h, RectDomain.from_nodes(args.l, args.grid))
    psi, rep = solve_minimal_graph(chart, BoundaryTrace(), _solver_opts(args))
    if args.out:
        _write_field_csv(args.out, psi)
    return {"F_value": functional_F2l(h, psi), "residual": rep.residual, "iters": rep.iters, "report": rep.to_dict()}


def _optimize_opts(args, method="gradient"):
    return OptimizeOptions(grid=args.grid, method=method, solver=SolverOptions(tol_res=getattr(args, "tol", 1e-8)))


def cmd_optimize(args):
    r = optimize_profile(args.l, args.knots, _optimize_opts(args, args.method))
    if args.out:
        with open(args.out, "w") as f:
            json.dump(r.h_nontrivial.to_dict(), f, indent=1)
    out = r.summary()
    out["h_star"] = r.h_star.to_dict()
    return out


def cmd_threshold(args):
    return find_threshold(args.lo, args.hi, args.tol_l, args.knots, _optimize_opts(args)).to_dict()


def cmd_sequence(args):
    if args.k < 2:
        raise ValidationError("k must be >= 2", k=args.k)
    optimum = None
    if args.which == "recovery":
        optimum = optimize_profile(args.l, 17, OptimizeOptions(grid=args.opt_grid))
    out, u = sequence_area(args.which, args.l, args.k, args.grid, optimum=optimum)
    if args.out:
        R, T = np.meshgrid(u.r, u.theta, indexing="ij")
        with open(args.out, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["r", "theta", "u1", "u2"])
            for row in zip(R.ravel(), T.ravel(), u.u1.ravel(), u.u2.ravel()):
                wr.writerow([repr(float(x)) for x in row])
    return out


def cmd_symmetrize(args, rng):
    if args.inp:
        try:
            solid = read_vox(args.inp)
        except OSError as exc:
            raise ValidationError(f"cannot read solid: {exc}", path=args.inp) from None
    else:
        geometry = CYLINDER if args.mode == "cylindrical" else CARTESIAN
        solid = random_solid(rng, args.dims, geometry, l=args.l)
    if args.mode == "cylindrical":
        if solid.geometry != CYLINDER:
            raise ValidationError("cylindrical mode needs a cylinder solid", geometry=solid.geometry)
        out = cylindrical_steiner(solid)
    else:
        if solid.geometry != CARTESIAN:
            raise ValidationError("classical mode needs a cartesian solid", geometry=solid.geometry)
        out = classical_steiner(solid, args.axis)
    if args.out:
        write_vox(args.out, out)
    return {
        "geometry": solid.geometry,
        "dims": list(solid.dims),
        "volume_in": voxel_volume(solid),
        "volume_out": voxel_volume(out),
        "perimeter_in": voxel_perimeter(solid),
        "perimeter_out": voxel_perimeter(out),
        "unchanged": out == solid,
    }


def cmd_value_curve(args, threads):
    try:
        ls = [float(x) for x in args.l_list.split(",") if x.strip()]
    except ValueError:
        raise ValidationError("l-list must be comma separated numbers", l_list=args.l_list) from None
    if not ls:
        raise ValidationError("l-list is empty")
    rows = value_curve(ls, args.knots, _optimize_opts(args), threads=threads)
    if args.out:
        with open(args.out, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["l", "F", "branch", "relaxed_area"])
            for r in rows:
                wr.writerow([repr(r["l"]), repr(r["F"]), r["branch"], repr(r["relaxed_area"])])
    return {"rows": rows}


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _emit(obj, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(obj, default=_json_default, sort_keys=True) + "\n")
    stream.flush()


def dispatch(args) -> int:
    """Run one subcommand and print its JSON result; returns the exit code."""
    t0 = time.perf_counter()
    threads = _threads(args)
    rng = np.random.default_rng(args.seed)
    echo = {k: v for k, v in sorted(vars(args).items()) if k != "verbose"}
    echo["threads"] = threads
    if args.command == "area":
        result = cmd_area(args)
    elif args.command == "solve":
        result = cmd_solve(args)
    elif args.command == "optimize":
        result = cmd_optimize(args)
    elif args.command == "threshold":
        result = cmd_threshold(args)
    elif args.command == "sequence":
        result = cmd_sequence(args)
    elif args.command == "symmetrize":
        result = cmd_symmetrize(args, rng)
    else:
        result = cmd_value_curve(args, threads)
    result.update(version=__version__, config_echo=echo, runtime_ms=1000.0 * (time.perf_counter() - t0))
    _emit(result)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
        return dispatch(args)
    except VortexError as exc:
        log.error("%s: %s", exc.code, exc.message)
        _emit({"error": exc.to_dict(), "version": __version__})
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
