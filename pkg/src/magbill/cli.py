"""Command-line frontend.

Exit codes: 0 success (or a passing check), 1 a numeric check failed its
tolerance, 2 invalid input or a violated precondition. ``MAGBILL_SEED`` in the
environment overrides ``--seed``.
"""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import algebra, dynamics, integrals, outer
from .dynamics import LarmorState, fmt
from .errors import MagBillError
from .geom import MagneticParams, make_rng, parse_boundary
from .integrals import CheckReport
from .poly import read_poly

OUTER_COLUMNS = ["step", "px", "py", "s_tangency", "ox", "oy"]
LYAPUNOV_COLUMNS = ["start_id", "cx", "cy", "exponent", "stderr", "iterations", "complete"]


class UsageError(Exception):
    """Bad flag values that argparse cannot catch by itself."""


def _floats(text, n, what):
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != n:
        raise UsageError(f"{what} needs {n} comma-separated numbers, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise UsageError(f"bad number in {what} {text!r}") from exc


def _seed(args):
    env = os.environ.get("MAGBILL_SEED")
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"MAGBILL_SEED must be an integer, got {env!r}") from exc
    return args.seed


def _params(args, boundary):
    if args.beta is None and args.r is None:
        raise UsageError("give --beta or --r")
    params = MagneticParams(args.beta) if args.beta is not None else MagneticParams.from_radius(args.r)
    params.require_admissible(boundary)
    return params


def _integral(spec, params):
    if spec == "circle":
        return integrals.circle_integral(params.beta)
    if spec.startswith("file:"):
        return integrals.read_velocity_poly(spec[5:])
    raise UsageError(f"--integral must be 'circle' or 'file:PATH', got {spec!r}")


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _target(path):
    return sys.stdout if path in (None, "-") else path


def _finish_check(report, args):
    _emit(report.to_json(), args.report)
    status = "pass" if report.passed else "FAIL"
    print(f"{report.check}: {status} max_abs_residual={fmt(report.max_abs_residual)} tolerance={fmt(report.tolerance)}",
          file=sys.stderr if args.report in (None, "-") else sys.stdout)
    return 0 if report.passed else 1


# -- subcommands ---------------------------------------------------------------------


def cmd_simulate(args):
    boundary = parse_boundary(args.boundary)
    params = _params(args, boundary)
    if (args.start is None) == (args.center is None):
        raise UsageError("give exactly one of --start x,y,theta or --center x,y")
    if args.start is not None:
        x, y, theta = _floats(args.start, 3, "--start")
        start = LarmorState.from_angle(x, y, theta, params)
    else:
        start = _floats(args.center, 2, "--center")
    phi = _integral(args.integral, params) if args.integral else None
    orb = dynamics.orbit(start, boundary, params, args.steps, integral=phi)
    dynamics.write_orbit_csv(orb, _target(args.out))
    if orb.error is not None:
        print(f"magbill: orbit stopped after {len(orb) - 1} steps: {orb.error}", file=sys.stderr)
        return 2
    return 0


def cmd_portrait(args):
    boundary = parse_boundary(args.boundary)
    params = _params(args, boundary)
    portrait = dynamics.phase_portrait(boundary, params, args.seeds, args.iters, seed=_seed(args))
    dynamics.write_portrait_csv(portrait, _target(args.out))
    if args.svg:
        dynamics.write_portrait_svg(portrait, args.svg, boundary, params.r)
    for k, why in sorted(portrait.errors.items()):
        print(f"magbill: orbit {k} stopped early ({why})", file=sys.stderr)
    return 0


def cmd_check_integral(args):
    boundary = parse_boundary(args.boundary)
    params = _params(args, boundary)
    phi = _integral(args.integral, params)
    res = integrals.integral_residuals(phi, boundary, params, args.samples, seed=_seed(args))
    report = CheckReport("integral", res.size, float(np.mean(res)) if res.size else 0.0,
                         float(np.max(res)) if res.size else 0.0, args.tolerance)
    return _finish_check(report, args)


def cmd_check_remarkable(args):
    boundary = parse_boundary(args.boundary)
    params = _params(args, boundary)
    F = read_poly(args.poly)
    pts = integrals.parallel_samples(boundary, params, args.side, args.samples)
    mean, dev = integrals.rem3_residual(F, pts, params.beta)
    report = CheckReport("remarkable", len(pts), mean, dev, args.tolerance)
    return _finish_check(report, args)


def cmd_check_rem1(args):
    boundary = parse_boundary(args.boundary)
    params = _params(args, boundary)
    F = read_poly(args.poly)
    ladder = [float(e) for e in args.eps_ladder.split(",") if e.strip()]
    if len(ladder) < 2 or any(not e > 0 for e in ladder) or len(set(ladder)) != len(ladder):
        raise UsageError("--eps-ladder needs at least two distinct positive values")
    ts = make_rng(_seed(args)).uniform(0.0, boundary.period, size=args.samples)
    ratios = [integrals.rem1_eps_check(F, boundary, params, t, case=args.case, eps_ladder=ladder) for t in ts]
    ratios = np.array([q for q in ratios if q is not None], dtype=float)
    if ratios.size == 0:
        raise UsageError("the closed-form cubic coefficient vanishes at every sample; the check carries no information")
    dev = np.abs(ratios - 1.0)
    report = CheckReport("rem1", ratios.size, float(np.mean(ratios)), float(np.max(dev)), args.tolerance)
    return _finish_check(report, args)


def cmd_check_equivalence(args):
    boundary = parse_boundary(args.boundary)
    params = _params(args, boundary)
    worst = outer.equivalence_check(boundary, params, args.samples, seed=_seed(args))
    report = CheckReport("equivalence", args.samples, worst, worst, args.tolerance)
    return _finish_check(report, args)


def _offset_poly(args):
    if args.poly:
        return read_poly(args.poly)
    if args.a is None or args.b is None or args.r is None:
        raise UsageError("give --a, --b and --r (or --poly PATH)")
    return algebra.ellipse_offset_poly(args.a, args.b, args.r)


def cmd_offset(args):
    action = args.action
    if action == "scan":
        if args.a is None or args.b is None:
            raise UsageError("scan needs --a and --b")
        if args.r_min is None or args.r_max is None:
            raise UsageError("scan needs --r-min and --r-max")
        bound = args.a * args.a / args.b
        if not args.r_min > bound or args.r_max < args.r_min:
            raise UsageError(f"scan range must satisfy a^2/b = {bound:.17g} < r-min <= r-max")
        grid = np.linspace(args.r_min, args.r_max, args.r_steps) if args.r_steps > 0 else []
        entries = algebra.r_scan(args.a, args.b, grid)
        _emit(json.dumps(algebra.scan_to_dict(entries), indent=2), args.report)
        return 0 if all(e.certified for e in entries) else 1
    f = _offset_poly(args)
    if action == "eval":
        if args.point is None:
            raise UsageError("eval needs --point x,y")
        p = np.array(_floats(args.point, 2, "--point"))
        value = float(f(p[0], p[1]))
        scaled = abs(value) / float(algebra.residual_scale(f, p))
        _emit(json.dumps({"point": p.tolist(), "value": value, "scaled_residual": scaled}, indent=2), args.report)
        return 0
    if action == "vanish":
        if args.poly:
            raise UsageError("vanish checks the built-in ellipse offset; drop --poly")
        worst = algebra.offset_vanishing_check(args.a, args.b, args.r, args.samples)
        return _finish_check(CheckReport("offset_vanish", 2 * args.samples, worst, worst, args.tolerance), args)
    if action == "singular":
        closed = None
        if not args.poly:
            closed = algebra.ellipse_offset_singular_points(args.a, args.b, args.r, f=f)
        report = algebra.obstruction_report(f, n_starts=args.starts, seed=_seed(args), closed_form=closed)
        _emit(report.to_json(), args.report)
        return 0
    if action == "infinity":
        pts = algebra.infinity_report(f)
        _emit(json.dumps([p.to_dict() for p in pts], indent=2), args.report)
        return 0
    raise UsageError(f"unknown action {action!r}")


def cmd_outer(args):
    gamma = parse_boundary(args.gamma)
    config = outer.OuterConfig(gamma, args.orientation, args.r)
    start = _floats(args.start, 2, "--start")
    orb = outer.outer_orbit(start, config, args.steps)
    out = _target(args.out)
    with dynamics.open_text(out) as fh:
        w = csv.writer(fh)
        w.writerow(OUTER_COLUMNS)
        for k in range(len(orb.points)):
            w.writerow([k, fmt(orb.points[k, 0]), fmt(orb.points[k, 1]), fmt(orb.s_tangency[k]),
                        fmt(orb.centers[k, 0]), fmt(orb.centers[k, 1])])
    if orb.error is not None:
        print(f"magbill: outer orbit stopped after {len(orb.points)} steps: {orb.error}", file=sys.stderr)
        return 2
    return 0


def cmd_lyapunov(args):
    boundary = parse_boundary(args.boundary)
    params = _params(args, boundary)
    seed = _seed(args)
    if args.center:
        starts = np.array([_floats(args.center, 2, "--center")])
    else:
        starts = dynamics.sample_phase_space(boundary, params.r, args.starts, make_rng(seed))
    est = dynamics.lyapunov_scan(starts, boundary, params, args.iters, seed=seed)
    out = _target(args.out)
    with dynamics.open_text(out) as fh:
        w = csv.writer(fh)
        w.writerow(LYAPUNOV_COLUMNS)
        for k, (p, e) in enumerate(zip(starts, est)):
            w.writerow([k, fmt(p[0]), fmt(p[1]), fmt(e.exponent), fmt(e.stderr), e.iterations, int(e.complete)])
    finite = [e.exponent for e in est if math.isfinite(e.exponent)]
    if finite:
        print(f"magbill: max exponent {fmt(max(finite))} over {len(finite)} starts", file=sys.stderr)
    return 0


# -- parser ------------------------------------------------------------------------------


def _field_flags(p, out=True):
    p.add_argument("--boundary", required=True, help="circle:d=..  ellipse:a=..,b=..  fourier:base=..,terms=k:amp:phase;..")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--beta", type=float, help="field magnitude (Larmor radius 1/beta)")
    g.add_argument("--r", type=float, help="Larmor radius")
    p.add_argument("--seed", type=int, default=0)
    if out:
        p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")


def _check_flags(p, tolerance, samples):
    _field_flags(p, out=False)
    p.add_argument("--samples", type=int, default=samples)
    p.add_argument("--tolerance", type=float, default=tolerance)
    p.add_argument("--report", default=None, help="JSON report path (default stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="magbill", description="Magnetic and outer magnetic billiards.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="follow one orbit and write the impacts as CSV")
    _field_flags(p)
    p.add_argument("--start", help="x,y,theta (velocity angle in radians)")
    p.add_argument("--center", help="x,y Larmor center")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--integral", help="circle or file:PATH, evaluated after each reflection")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("portrait", help="phase portrait from random centers")
    _field_flags(p)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--svg", help="optional static SVG path")
    p.set_defaults(func=cmd_portrait)

    p = sub.add_parser("check", help="numerical verification checks")
    checks = p.add_subparsers(dest="check", required=True)
    c = checks.add_parser("integral", help="constancy of a velocity-polynomial integral")
    _check_flags(c, 1e-9, 1000)
    c.add_argument("--integral", default="circle", help="circle or file:PATH")
    c.set_defaults(func=cmd_check_integral)
    c = checks.add_parser("remarkable", help="H(F) + beta |grad F|^3 constant on a parallel curve")
    _check_flags(c, 1e-9, 1024)
    c.add_argument("--poly", required=True)
    c.add_argument("--side", choices=["plus", "minus"], default="plus")
    c.set_defaults(func=cmd_check_remarkable)
    c = checks.add_parser("rem1", help="extrapolated eps^3 coefficient against its closed form")
    _check_flags(c, 1e-5, 20)
    c.add_argument("--poly", required=True)
    c.add_argument("--eps-ladder", default="1e-2,5e-3,2.5e-3")
    c.add_argument("--case", choices=["a", "b"], default="a")
    c.set_defaults(func=cmd_check_rem1)
    c = checks.add_parser("equivalence", help="outer map on the inner parallel curve against M")
    _check_flags(c, 1e-8, 500)
    c.set_defaults(func=cmd_check_equivalence)

    p = sub.add_parser("offset", help="ellipse offset polynomial and its singularities")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--poly", help="use a polynomial file instead of the ellipse offset")
    p.add_argument("--action", required=True, choices=["eval", "vanish", "singular", "infinity", "scan"])
    p.add_argument("--point", help="x,y for eval")
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--starts", type=int, default=2000, help="Newton starts of the singular point search")
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--r-steps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None, help="JSON output path (default stdout)")
    p.set_defaults(func=cmd_offset)

    p = sub.add_parser("outer", help="orbit of the outer magnetic billiard")
    p.add_argument("--gamma", required=True, help="boundary spec of the curve Gamma")
    p.add_argument("--orientation", choices=["cw", "ccw"], default="ccw")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--start", required=True, help="x,y")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_outer)

    p = sub.add_parser("lyapunov", help="largest Lyapunov exponent of M from random centers")
    _field_flags(p)
    p.add_argument("--iters", type=int, default=10000)
    p.add_argument("--starts", type=int, default=50)
    p.add_argument("--center", help="single x,y start instead of random ones")
    p.set_defaults(func=cmd_lyapunov)
    return parser


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("steps", "seeds", "iters", "samples", "starts", "r_steps"):
        value = getattr(args, name, None)
        if isinstance(value, int) and value < 0:
            print(f"magbill: error: --{name.replace('_', '-')} must be non-negative", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except (MagBillError, UsageError, ValueError, OSError) as exc:
        print(f"magbill: error: {exc}", file=sys.stderr)
        return 2


def main(argv=None):
    sys.exit(run(argv))
