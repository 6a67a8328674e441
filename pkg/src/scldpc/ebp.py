"""Fixed points at prescribed entropy, EBP GEXIT curves and the Maxwell bound.

A point of the curve is found by running DE with the channel re-chosen after
every round so that the average section entropy stays at the anchor value.
The entropy functional is linear and the variable-node convolution is
bilinear, so the average entropy after the channel convolution equals the
entropy of the channel convolved with the average pre-channel density; each
channel solve therefore needs one convolution per probe.

On the BEC the whole procedure runs on erasure probabilities.  There the
channel solve is closed form and the erasure probability may exceed 1: those
points are not physical channels but complete the curve so that its area is
the design rate.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from . import _kernels
from .channels import (BAWGN, BEC, BSC, ChannelParam, _bawgn_mass, channel_density,
                       channel_entropy, gexit_rows, param_from_entropy)
from .coupling import CoupledSpec, EdgeGraph, compile_graph
from .de import Constellation, DensityEngine, run_forward_de
from .density import (GridSpec, delta_zero, entropy_rows, var_conv_rows,
                      var_power_rows)
from .errors import SpecError

ANCHOR_TOL = 1e-8


class AnchorError(RuntimeError):
    """No channel in the family reaches the requested anchor."""


class MaxwellError(RuntimeError):
    """The curve never accumulates enough area."""


@dataclass
class EbpPoint:
    anchor: float
    family: str
    param_value: float
    h_channel: float
    g_value: float
    residual: float
    fp_summary: np.ndarray
    iterations: int = 0
    converged: bool = True
    state: object = field(default=None, repr=False)

    @property
    def physical(self) -> bool:
        """False for extended BEC points with erasure probability above 1."""
        return not (self.family == BEC and self.param_value > 1.0)

    @property
    def param(self) -> ChannelParam:
        if not self.physical:
            raise ValueError(f"erasure probability {self.param_value} is not a channel")
        return ChannelParam(self.family, self.param_value)


@dataclass
class EbpCurve:
    points: list
    spec: CoupledSpec
    family: str
    gaps: list = field(default_factory=list)      # anchors that failed

    def arrays(self):
        h = np.array([p.h_channel for p in self.points])
        g = np.array([p.g_value for p in self.points])
        return h, g


# ---------------------------------------------------------------------------
# anchored fixed points
# ---------------------------------------------------------------------------

def _family(family):
    family = family.upper()
    if family == BSC:
        raise SpecError("EBP curves are provided for BEC and BAWGN only")
    if family not in (BEC, BAWGN):
        raise SpecError(f"unknown channel family {family!r}")
    return family


def anchored_fp(family: str, spec: CoupledSpec, anchor: float, init=None,
                grid: GridSpec | None = None, tol: float = 1e-9, max_iters: int | None = None,
                graph: EdgeGraph | None = None, engine: DensityEngine | None = None) -> EbpPoint:
    """Fixed point whose average section entropy equals ``anchor``.

    ``init`` is a starting constellation (a Constellation for BAWGN, an
    erasure vector for BEC) or an :class:`EbpPoint` to warm-start from.
    Iterates until the largest per-section Bhattacharyya change is below
    ``tol``; ``converged`` is False if ``max_iters`` ran out first.
    """
    family = _family(family)
    if not 0.0 < anchor <= 1.0:
        raise ValueError(f"anchor must lie in (0, 1], got {anchor}")
    graph = graph or compile_graph(spec)
    if isinstance(init, EbpPoint):
        init = init.state
    if family == BEC:
        return _anchored_bec(spec, graph, anchor, init, tol, max_iters or 200000)
    grid = grid or GridSpec()
    return _anchored_density(family, spec, graph, grid, anchor, init, tol, max_iters or 2000,
                             engine or DensityEngine(graph, grid))


def _anchored_bec(spec, graph, anchor, init, tol, max_iters):
    S = graph.sections
    keep = 1.0 - graph.kappa
    x = np.full(S, anchor) if init is None else np.array(init, dtype=np.float64)
    arrays = graph.arrays()
    eps = math.nan
    residual = math.inf
    it = 0
    while it < max_iters:
        it += 1
        g = _kernels.bec_step(keep, x, graph.l, *arrays)
        eps = anchor * S / g.sum()
        new = eps * g
        residual = float(np.max(np.abs(new - x)))
        x = new
        if residual < tol:
            break
    gex = _kernels.bec_step(keep, x, graph.l + 1, *arrays)
    return EbpPoint(anchor, BEC, float(eps), float(eps), float(gex.mean()), residual,
                    x.copy(), it, residual < tol, x.copy())


def _pre_channel(engine, X):
    fin, inf = engine.incoming(X)
    v_fin, v_inf = var_power_rows(fin, inf, engine.graph.l - 1, engine.grid)
    return (fin, inf), (v_fin, v_inf)


def _bawgn_rows(sigma, grid, R):
    if math.isinf(sigma):
        fin = np.zeros((R, grid.size))
        fin[:, grid.zero_index] = 1.0
        return fin, np.zeros(R)
    return np.tile(_bawgn_mass(sigma, grid.llr_max, grid.bins), (R, 1)), np.zeros(R)


def _solve_sigma(avg_fin, avg_inf, anchor, grid, guess):
    """sigma at which the entropy of c_sigma * (average density) is ``anchor``."""

    def f(t):
        cf, ci = _bawgn_rows(math.exp(t), grid, 1)
        fin, _ = var_conv_rows(cf, ci, avg_fin, avg_inf, grid)
        return float(entropy_rows(fin, grid)[0]) - anchor

    lo_lim, hi_lim = math.log(1e-2), math.log(1e3)
    t0 = math.log(guess) if guess and math.isfinite(guess) else 0.0
    lo, hi = t0 - 0.02, t0 + 0.02
    flo, fhi = f(lo), f(hi)
    step = 0.05
    while flo > 0:
        if lo <= lo_lim:
            raise AnchorError(f"anchor {anchor} needs sigma below {math.exp(lo_lim)}")
        hi, fhi = lo, flo
        lo = max(lo - step, lo_lim)
        flo = f(lo)
        step *= 2
    step = 0.05
    while fhi < 0:
        if hi >= hi_lim:
            raise AnchorError(f"anchor {anchor} needs sigma above {math.exp(hi_lim)}")
        lo, flo = hi, fhi
        hi = min(hi + step, hi_lim)
        fhi = f(hi)
        step *= 2
    t = optimize.brentq(f, lo, hi, xtol=1e-13, rtol=1e-15)
    return math.exp(t)


def _anchored_density(family, spec, graph, grid, anchor, init, tol, max_iters, engine):
    S = graph.sections
    kappa = graph.kappa
    keep = 1.0 - kappa
    if anchor >= 1.0:
        X = Constellation.uniform(delta_zero(grid), spec.positions)
        return EbpPoint(1.0, family, math.inf, 1.0, 1.0, 0.0, X.entropies(), 0, True, X)
    if init is None:
        start = channel_density(param_from_entropy(family, anchor), grid)
        X = Constellation.uniform(start, spec.positions)
    else:
        X = init.copy()
    sigma = None
    residual = math.inf
    it = 0
    while it < max_iters:
        it += 1
        _, (v_fin, v_inf) = _pre_channel(engine, X)
        avg_fin = (keep[:, None] * v_fin).sum(axis=0, keepdims=True) / S
        avg_inf = np.array([(keep * v_inf).sum() / S + kappa.sum() / S])
        sigma = _solve_sigma(avg_fin, avg_inf, anchor, grid, sigma)
        cf, ci = _bawgn_rows(sigma, grid, S)
        fin, inf = var_conv_rows(cf, ci, v_fin, v_inf, grid)
        if np.any(kappa > 0):
            fin = fin * keep[:, None]
            inf = inf * keep + kappa
        old_b = X.battacharyyas()
        X = Constellation(grid, fin, inf, X.positions)
        residual = float(np.max(np.abs(X.battacharyyas() - old_b)))
        if residual < tol:
            break
    (u_fin, u_inf), _ = _pre_channel(engine, X)
    e_fin, _ = var_power_rows(u_fin, u_inf, graph.l, grid)
    param = ChannelParam(family, sigma)
    g = float((keep * gexit_rows(param, e_fin, grid)).mean())
    return EbpPoint(anchor, family, sigma, channel_entropy(param), g, residual,
                    X.entropies(), it, residual < tol, X)


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

def default_anchors(n: int = 200) -> np.ndarray:
    """``n`` uniform anchors in (0, 1]."""
    return np.arange(1, n + 1) / n


def trace_ebp(family: str, spec: CoupledSpec, anchors: Sequence[float],
              grid: GridSpec | None = None, warm: bool = True, tol: float = 1e-9,
              max_iters: int | None = None, refine: int = 0) -> EbpCurve:
    """Anchored fixed points for every anchor, traced from the (1, 1) end.

    With ``warm`` each solve starts from the previous fixed point.  Anchors
    whose solve fails or does not converge are recorded in ``gaps``.
    ``refine`` > 1 inserts that many sub-anchors between neighbours where
    the curve is close to vertical.
    """
    family = _family(family)
    anchors = np.asarray(sorted(set(float(a) for a in anchors)))
    if anchors.size == 0 or anchors[0] <= 0 or anchors[-1] > 1:
        raise ValueError("anchors must lie in (0, 1]")
    grid = grid or GridSpec()
    graph = compile_graph(spec)
    engine = DensityEngine(graph, grid) if family != BEC else None
    curve = _trace(family, spec, anchors, grid, graph, engine, warm, tol, max_iters)
    if refine and refine > 1 and len(curve.points) > 2:
        extra = _vertical_anchors(curve, refine)
        if extra.size:
            merged = np.union1d(anchors, extra)
            curve = _trace(family, spec, merged, grid, graph, engine, warm, tol, max_iters)
    return curve


def _trace(family, spec, anchors, grid, graph, engine, warm, tol, max_iters):
    points, gaps = [], []
    prev = None
    for a in anchors[::-1]:
        try:
            pt = anchored_fp(family, spec, a, init=prev if warm else None, grid=grid, tol=tol,
                             max_iters=max_iters, graph=graph, engine=engine)
        except AnchorError:
            gaps.append(float(a))
            continue
        if not pt.converged:
            gaps.append(float(a))
        points.append(pt)
        prev = pt
    points.reverse()
    return EbpCurve(points, spec, family, sorted(gaps))


def _vertical_anchors(curve, factor):
    h, g = curve.arrays()
    a = np.array([p.anchor for p in curve.points])
    out = []
    for k in range(len(a) - 1):
        if abs(h[k + 1] - h[k]) < 0.1 * abs(g[k + 1] - g[k]):
            out.extend(np.linspace(a[k], a[k + 1], factor + 1)[1:-1])
    return np.array(out)


def maxwell_bound(curve: EbpCurve | Sequence, rate: float) -> float:
    """Channel entropy where the area swept from (1, 1) reaches ``rate``.

    ``curve`` is an :class:`EbpCurve` or a sequence of (h, g) pairs ordered
    by anchor.  The area is accumulated by the trapezoid rule along the
    curve from its (1, 1) end, with signed entropy steps, and the crossing is
    located by linear interpolation of the area inside the segment.
    """
    if not 0.0 < rate < 1.0:
        raise ValueError(f"rate must lie in (0, 1), got {rate}")
    if isinstance(curve, EbpCurve):
        h, g = curve.arrays()
    else:
        pts = np.asarray(curve, dtype=np.float64)
        h, g = pts[:, 0], pts[:, 1]
    h, g = h[::-1], g[::-1]
    if abs(h[0] - 1.0) > 1e-9 or abs(g[0] - 1.0) > 1e-9:
        raise MaxwellError("the curve must start at the trivial point (1, 1)")
    area = 0.0
    for k in range(len(h) - 1):
        step = 0.5 * (g[k] + g[k + 1]) * (h[k] - h[k + 1])
        if area + step >= rate and step > 0:
            t = (rate - area) / step
            return float(h[k] + t * (h[k + 1] - h[k]))
        area += step
    raise MaxwellError(f"area under the curve only reaches {area:.6f} < {rate}")


def curve_area(curve: EbpCurve) -> float:
    """Signed area swept along the whole curve from (1, 1)."""
    h, g = curve.arrays()
    h, g = h[::-1], g[::-1]
    return float(np.sum(0.5 * (g[1:] + g[:-1]) * (h[:-1] - h[1:])))


# ---------------------------------------------------------------------------
# profiles of special fixed points
# ---------------------------------------------------------------------------

@dataclass
class ProfileReport:
    positions: np.ndarray
    entropies: np.ndarray
    unimodal: bool
    boundary_entropy: float
    middle_entropy: float
    uncoupled_entropy: float
    middle_gap: float
    h_channel: float
    param_value: float


def is_unimodal(values, tol: float = 1e-9) -> bool:
    """Non-decreasing from both ends up to the largest entry."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return True
    peak = int(np.argmax(v))
    left = np.all(np.diff(v[:peak + 1]) >= -tol)
    right = np.all(np.diff(v[peak:]) <= tol)
    return bool(left and right)


def uncoupled_stable_entropy(family: str, param_value: float, spec: CoupledSpec,
                             grid: GridSpec | None = None) -> float:
    """Entropy of the forward-DE fixed point of the underlying (l, r) ensemble."""
    family = _family(family)
    base = CoupledSpec.uncoupled(spec.l, spec.r)
    if family == BEC:
        from .bec import bec_run
        return float(bec_run(param_value, base, tol=1e-13, max_iters=10**6).x[0])
    grid = grid or GridSpec()
    c = channel_density(ChannelParam(family, param_value), grid)
    X, _ = run_forward_de(c, base, tol_B=1e-12, max_iters=20000)
    return float(X.entropies()[0])


def fp_profile_report(point: EbpPoint, spec: CoupledSpec, grid: GridSpec | None = None,
                      tol: float = 1e-9) -> ProfileReport:
    """Section-entropy profile of a fixed point compared with the uncoupled one."""
    ent = np.asarray(point.fp_summary, dtype=np.float64)
    S = len(ent)
    mid = S // 2
    if point.physical and point.h_channel < 1.0:
        unc = uncoupled_stable_entropy(point.family, point.param_value, spec, grid)
    else:
        unc = math.nan
    return ProfileReport(
        positions=spec.positions, entropies=ent, unimodal=is_unimodal(ent, tol),
        boundary_entropy=float(max(ent[0], ent[-1])), middle_entropy=float(ent[mid]),
        uncoupled_entropy=unc, middle_gap=float(abs(ent[mid] - unc)),
        h_channel=point.h_channel, param_value=point.param_value,
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return f"{v:.10f}"


def _emit(rows, header, path):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def curve_csv(curve: EbpCurve, path=None) -> str:
    """CSV with columns anchor, param_value, h_channel, g_value, residual."""
    rows = [[_fmt(p.anchor), _fmt(p.param_value), _fmt(p.h_channel), _fmt(p.g_value),
             f"{p.residual:.3e}"] for p in curve.points]
    return _emit(rows, ["anchor", "param_value", "h_channel", "g_value", "residual"], path)


def profile_csv(report: ProfileReport, path=None) -> str:
    """CSV with columns position, entropy."""
    rows = [[int(p), _fmt(float(e))] for p, e in zip(report.positions, report.entropies)]
    return _emit(rows, ["position", "entropy"], path)


__all__ = [
    "AnchorError", "MaxwellError", "EbpPoint", "EbpCurve", "anchored_fp", "default_anchors",
    "trace_ebp", "maxwell_bound", "curve_area", "ProfileReport", "is_unimodal",
    "uncoupled_stable_entropy", "fp_profile_report", "curve_csv", "profile_csv",
]
