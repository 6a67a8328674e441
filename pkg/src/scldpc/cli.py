"""Command-line front end: ``scldpc <command> [flags]``.

Every run writes its outputs plus a JSON manifest (parameters, version,
backend, wall time, sha256 of every output) into ``--out``.  Flags may also
come from ``--config FILE`` holding ``key = value`` lines (or a previous
manifest); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, _kernels
from .bec import bec_bp_threshold
from .channels import BAWGN, BEC, BSC, ChannelParam, param_from_entropy
from .coupling import CoupledSpec
from .de import ScheduleSpec, bp_threshold, run_forward_de, trace_csv
from .density import GridSpec
from .ebp import (AnchorError, MaxwellError, anchored_fp, curve_csv, default_anchors,
                  fp_profile_report, maxwell_bound, profile_csv, trace_ebp,
                  uncoupled_stable_entropy)
from .errors import NoBracketError, SpecError
from .rates import design_rate, plateau_breakpoint, rateloss_sweep, sweep_csv

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_BRACKET = 3
EXIT_PARTIAL = 4


class PartialFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _add_ensemble(p):
    g = p.add_argument_group("ensemble")
    g.add_argument("--l", type=int, default=3, help="variable degree")
    g.add_argument("--r", type=int, default=6, help="check degree")
    g.add_argument("--coupled", action="store_true", help="line topology on positions -L..L")
    g.add_argument("--L", type=int, default=None, help="chain half-length (line topology)")
    g.add_argument("--w", type=int, default=None, help="smoothing window")
    g.add_argument("--circular", action="store_true", help="circular topology on K positions")
    g.add_argument("--one-sided", dest="one_sided", action="store_true",
                   help="one-sided termination on K positions")
    g.add_argument("--K", type=int, default=None, help="number of positions (circular, one-sided)")
    g.add_argument("--alpha", type=float, default=0.0, help="merge fraction (one-sided)")
    g.add_argument("--kappa", type=_floats, default=None,
                   help="known fractions, comma separated; padded with zeros")


def _add_family(p, default=BEC):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--bec", dest="family", action="store_const", const=BEC)
    g.add_argument("--bsc", dest="family", action="store_const", const=BSC)
    g.add_argument("--bawgn", dest="family", action="store_const", const=BAWGN)
    p.set_defaults(family=default)


def _add_grid(p):
    g = p.add_argument_group("quantization")
    g.add_argument("--llr-max", dest="llr_max", type=float, default=25.0)
    g.add_argument("--bins", type=int, default=2048)


def _add_common(p):
    p.add_argument("--config", default=None, help="key = value file or manifest")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--prefix", default="", help="prefix for output file names")
    p.add_argument("--threads", type=int, default=1, help="cap on worker threads")


def build_parser():
    parser = argparse.ArgumentParser(prog="scldpc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="design rate of an ensemble")
    _add_ensemble(p)
    _add_common(p)

    p = sub.add_parser("threshold", help="BP threshold by bisection")
    _add_ensemble(p)
    _add_family(p)
    _add_grid(p)
    _add_common(p)
    p.add_argument("--tol", type=float, default=None,
                   help="bracket width (eps for BEC, entropy otherwise)")
    p.add_argument("--tol-b", dest="tol_b", type=float, default=1e-9)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    p.add_argument("--lo", type=float, default=0.0, help="lower end of the search bracket")
    p.add_argument("--hi", type=float, default=1.0, help="upper end of the search bracket")
    p.add_argument("--density", action="store_true",
                   help="use the density engine for the BEC as well")
    p.add_argument("--trace", action="store_true",
                   help="also export the DE trace at the threshold's failing end")
    p.add_argument("--schedule", default="parallel", choices=["parallel", "round_robin", "random"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sections-per-step", dest="sections_per_step", type=int, default=1)

    for name, text in (("ebp", "trace an EBP GEXIT curve"),
                       ("maxwell", "Maxwell upper bound from the EBP curve")):
        p = sub.add_parser(name, help=text)
        _add_ensemble(p)
        _add_family(p)
        _add_grid(p)
        _add_common(p)
        p.add_argument("--anchors", type=int, default=200, help="number of uniform anchors")
        p.add_argument("--anchor-list", dest="anchor_list", type=_floats, default=None)
        p.add_argument("--refine", type=int, default=4, help="sub-anchors on vertical parts")
        p.add_argument("--cold", action="store_true", help="solve every anchor from scratch")
        p.add_argument("--tol", type=float, default=1e-9, help="fixed-point residual")
        p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
        p.add_argument("--failure-fraction", dest="failure_fraction", type=float, default=0.25)
        if name == "maxwell":
            p.add_argument("--rate", type=float, default=None,
                           help="rate to balance (default: design rate)")

    p = sub.add_parser("sweep", help="threshold against the boundary effective erasure")
    p.add_argument("--l", type=int, default=3)
    p.add_argument("--r", type=int, default=6)
    p.add_argument("--w", type=int, default=3)
    p.add_argument("--K", type=int, default=200)
    p.add_argument("--deltas", type=_floats, default=None, help="comma separated delta grid")
    p.add_argument("--delta-min", dest="delta_min", type=float, default=0.0)
    p.add_argument("--delta-max", dest="delta_max", type=float, default=0.4)
    p.add_argument("--delta-steps", dest="delta_steps", type=int, default=9)
    p.add_argument("--positions", type=lambda t: [int(v) for v in t.split(",")], default=None)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    p.add_argument("--breakpoint", action="store_true",
                   help="also locate where the threshold leaves its plateau")
    p.add_argument("--eta", type=float, default=1e-4,
                   help="drop below the plateau that defines the breakpoint")
    p.add_argument("--failure-fraction", dest="failure_fraction", type=float, default=0.25)
    _add_common(p)

    p = sub.add_parser("fp", help="special fixed point and its section profile")
    _add_ensemble(p)
    _add_family(p, default=BAWGN)
    _add_grid(p)
    _add_common(p)
    p.add_argument("--anchor", type=float, default=None, help="average section entropy")
    p.add_argument("--entropy", type=float, default=None,
                   help="channel entropy used to pick the default anchor")
    p.add_argument("--sigma", type=float, default=None, help="BAWGN sigma instead of --entropy")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    return parser


def _load_config(path):
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = None
    if isinstance(data, dict):
        params = dict(data.get("params", data))
        if "command" in data:
            params["command"] = data["command"]
        return params
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"config line without '=': {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    args = parser.parse_args(argv)
    if not known.config:
        return args
    config = _load_config(known.config)
    if config.get("command", args.command) != args.command:
        raise SpecError(f"config was written by '{config['command']}', not '{args.command}'")
    cmd_parser = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in cmd_parser._actions}
    defaults = {}
    for key, value in config.items():
        if key in ("command", "config"):
            continue
        if key not in actions:
            raise SpecError(f"unknown config key {key!r} for command {args.command}")
        act = actions[key]
        if isinstance(value, str) and act.type is not None:
            value = act.type(value)
        elif isinstance(value, str) and isinstance(act, argparse._StoreTrueAction):
            value = value.lower() in ("1", "true", "yes", "on")
        defaults[key] = value
    cmd_parser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _spec(args) -> CoupledSpec:
    l, r = args.l, args.r
    w = args.w
    if args.circular or args.one_sided:
        if args.K is None:
            raise SpecError("--K is required for circular and one-sided ensembles")
        w = 3 if w is None else w
        kappa = None
        if args.kappa is not None:
            if len(args.kappa) > args.K:
                raise SpecError("more kappa entries than positions")
            kappa = list(args.kappa) + [0.0] * (args.K - len(args.kappa))
        if args.circular:
            return CoupledSpec.circular(l, r, args.K, w, kappa)
        return CoupledSpec.one_sided(l, r, args.K, w, args.alpha, kappa)
    if args.coupled or args.L is not None:
        L = 16 if args.L is None else args.L
        w = 3 if w is None else w
        if args.kappa is not None:
            raise SpecError("--kappa needs --circular")
        return CoupledSpec.line(l, r, L, w)
    if args.kappa is not None:
        raise SpecError("--kappa needs --circular")
    return CoupledSpec.uncoupled(l, r)


def _grid(args):
    return GridSpec(args.llr_max, args.bins)


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

class Run:
    def __init__(self, args):
        self.args = args
        self.outputs = {}
        self.results = {}
        self.start = time.perf_counter()
        os.makedirs(args.out, exist_ok=True)

    def path(self, name):
        return os.path.join(self.args.out, f"{self.args.prefix}{name}")

    def write(self, name, text):
        path = self.path(name)
        with open(path, "w") as fh:
            fh.write(text)
        self.outputs[os.path.basename(path)] = hashlib.sha256(text.encode()).hexdigest()

    def write_table(self, stem, csv_text):
        """Write ``stem.csv`` and its whitespace-separated ``stem.dat`` twin."""
        self.write(f"{stem}.csv", csv_text)
        lines = csv_text.splitlines()
        dat = ["# " + " ".join(lines[0].split(","))]
        dat += [" ".join(line.split(",")) for line in lines[1:]]
        self.write(f"{stem}.dat", "\n".join(dat) + "\n")

    def manifest(self, spec=None):
        params = {k: v for k, v in vars(self.args).items() if k not in ("config",)}
        data = {
            "command": self.args.command,
            "params": params,
            "ensemble": spec.describe() if spec is not None else None,
            "version": __version__,
            "backend": _kernels.BACKEND,
            "wall_time_s": round(time.perf_counter() - self.start, 3),
            "results": self.results,
            "outputs": self.outputs,
        }
        path = self.path("manifest.json")
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
        return path


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _num(v, digits=6):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return f"{v:.{digits}f}"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_rate(args, run):
    spec = _spec(args)
    rate = design_rate(spec)
    run.results["rate"] = round(rate, 12)
    print(f"rate {_num(rate)}")
    return spec


def cmd_threshold(args, run):
    spec = _spec(args)
    family = args.family
    if family == BEC and not args.density:
        tol = args.tol or 1e-5
        eps = bec_bp_threshold(spec, tol=tol, lo=args.lo, hi=args.hi,
                               max_iters=args.max_iters or 20000)
        run.results.update(param=round(eps, 10), entropy=round(eps, 10))
        print(f"threshold BEC eps {_num(eps)} entropy {_num(eps)}")
        return spec
    grid = _grid(args)
    tol = args.tol or 1e-3
    res = bp_threshold(family, spec, grid=grid, tol=tol, lo=args.lo, hi=args.hi,
                       tol_B=args.tol_b, max_iters=args.max_iters or 2000)
    run.results.update(param=round(res.param.value, 10), entropy=round(res.entropy, 10),
                       bracket=[round(b, 10) for b in res.bracket], probes=res.probes)
    print(f"threshold {family} param {_num(res.param.value)} entropy {_num(res.entropy)}")
    if args.trace:
        from .channels import channel_density
        c = channel_density(param_from_entropy(family, res.bracket[1]), grid)
        sched = ScheduleSpec(args.schedule, args.seed, args.sections_per_step)
        _, rep = run_forward_de(c, spec, sched, tol_B=args.tol_b, max_iters=args.max_iters or 2000)
        run.write_table("trace", trace_csv(rep))
    return spec


def _anchors(args):
    if args.anchor_list:
        return args.anchor_list
    return default_anchors(args.anchors)


def _curve(args, run, spec):
    grid = _grid(args)
    curve = trace_ebp(args.family, spec, _anchors(args), grid=grid, warm=not args.cold,
                      tol=args.tol, max_iters=args.max_iters, refine=args.refine)
    run.write_table("curve", curve_csv(curve))
    total = len(curve.points) + len([g for g in curve.gaps
                                     if g not in {p.anchor for p in curve.points}])
    run.results["points"] = len(curve.points)
    run.results["gaps"] = curve.gaps
    h, _ = curve.arrays()
    if len(h):
        run.results["min_h_channel"] = round(float(h.min()), 10)
        print(f"leftmost channel entropy {_num(float(h.min()))}")
    failed = len(curve.gaps) / max(total, 1)
    return curve, failed


def cmd_ebp(args, run):
    spec = _spec(args)
    _, failed = _curve(args, run, spec)
    print(f"gaps {failed:.3f} of anchors")
    if failed > args.failure_fraction:
        raise PartialFailure(f"{failed:.1%} of anchors failed")
    return spec


def cmd_maxwell(args, run):
    spec = _spec(args)
    rate = args.rate if args.rate is not None else design_rate(spec)
    curve, failed = _curve(args, run, spec)
    bound = maxwell_bound(curve, rate)
    run.results.update(rate=round(rate, 12), maxwell=round(bound, 10))
    print(f"maxwell bound entropy {_num(bound)} at rate {_num(rate)}")
    if failed > args.failure_fraction:
        raise PartialFailure(f"{failed:.1%} of anchors failed")
    return spec


def cmd_sweep(args, run):
    spec = CoupledSpec.circular(args.l, args.r, args.K, args.w)
    if args.deltas:
        grid = args.deltas
    else:
        grid = list(np.linspace(args.delta_min, args.delta_max, args.delta_steps))
    rows = rateloss_sweep(args.w, args.K, grid, positions=args.positions, l=args.l, r=args.r,
                          tol=args.tol, max_iters=args.max_iters)
    run.write_table("sweep", sweep_csv(rows))
    for row in rows:
        print(f"delta {row.delta:.6f} eps_bp {row.epsilon_bp:.6f} rate {row.design_rate:.6f}")
    if args.breakpoint:
        plateau, point = plateau_breakpoint(args.w, args.K, args.eta, positions=args.positions,
                                            l=args.l, r=args.r, max_iters=args.max_iters)
        run.results.update(plateau=round(plateau, 8), breakpoint=round(point, 6))
        print(f"breakpoint delta {point:.6f} (plateau {plateau:.6f}, eta {args.eta:g})")
    failed = sum(not r_.ok for r_ in rows) / max(len(rows), 1)
    if failed > args.failure_fraction:
        raise PartialFailure(f"{failed:.1%} of grid points failed")
    return spec


def cmd_fp(args, run):
    spec = _spec(args)
    grid = _grid(args)
    family = args.family
    anchor = args.anchor
    if anchor is None:
        if args.sigma is not None:
            target = ChannelParam(family, args.sigma)
        elif args.entropy is not None:
            target = param_from_entropy(family, args.entropy)
        else:
            raise SpecError("fp needs --anchor, --entropy or --sigma")
        stable = uncoupled_stable_entropy(family, target.value, spec, grid)
        anchor = default_fp_anchor(stable)
        run.results["stable_entropy_at_target"] = round(stable, 10)
    point = anchored_fp(family, spec, anchor, grid=grid, tol=args.tol, max_iters=args.max_iters)
    rep = fp_profile_report(point, spec, grid)
    run.write_table("profile", profile_csv(rep))
    run.results.update(anchor=round(anchor, 10), param=_num(point.param_value, 10),
                       h_channel=round(point.h_channel, 10), g_value=round(point.g_value, 10),
                       residual=point.residual, unimodal=rep.unimodal,
                       boundary_entropy=round(rep.boundary_entropy, 10),
                       middle_entropy=round(rep.middle_entropy, 10),
                       uncoupled_entropy=round(rep.uncoupled_entropy, 10))
    print(f"anchor {_num(anchor)} param {_num(point.param_value)} "
          f"channel entropy {_num(point.h_channel)}")
    print(f"unimodal {rep.unimodal} boundary {_num(rep.boundary_entropy)} "
          f"middle {_num(rep.middle_entropy)} uncoupled {_num(rep.uncoupled_entropy)}")
    if not point.converged:
        raise PartialFailure("fixed point did not converge")
    return spec


def default_fp_anchor(stable_entropy: float) -> float:
    """Anchor for a fixed point whose plateau sits at the uncoupled stable entropy.

    The wave fronts at both ends take up a fixed number of sections, so on
    chains of moderate length 0.6 of the plateau height leaves a flat middle.
    """
    return 0.6 * stable_entropy


COMMANDS = {
    "rate": cmd_rate, "threshold": cmd_threshold, "ebp": cmd_ebp,
    "maxwell": cmd_maxwell, "sweep": cmd_sweep, "fp": cmd_fp,
}


def _set_threads(n):
    if n and _kernels.BACKEND == "numba":
        import numba
        numba.config.THREADING_LAYER = "workqueue"
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(parser, argv)
    except (SpecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    _set_threads(args.threads)
    run = Run(args)
    spec = None
    code = EXIT_OK
    try:
        spec = COMMANDS[args.command](args, run)
    except (SpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_SPEC
    except NoBracketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_BRACKET
    except (PartialFailure, MaxwellError, AnchorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_PARTIAL
    run.results["exit_code"] = code
    run.manifest(spec)
    return code


if __name__ == "__main__":
    sys.exit(main())
