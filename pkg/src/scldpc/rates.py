"""Design rates of the coupled ensembles and the boundary rate-loss experiments."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .bec import bec_bp_threshold, bec_run
from .coupling import CIRCULAR, LINE, UNCOUPLED, CoupledSpec
from .errors import NoBracketError, SpecError


def _boundary_loss(r, w):
    """w + 1 - 2 sum_{i=0}^{w} (i/w)^r, exactly."""
    return w + 1 - 2 * sum(Fraction(i, w) ** r for i in range(w + 1))


def design_rate_coupled(l: int, r: int, L: int, w: int) -> float:
    """Design rate of the (l, r, L, w) line ensemble (needs w <= 2L)."""
    if w > 2 * L:
        raise SpecError(f"the closed form needs w <= 2L, got w={w}, L={L}")
    if w < 1 or L < 1:
        raise SpecError("need w >= 1 and L >= 1")
    ratio = Fraction(l, r)
    return float(1 - ratio - ratio * _boundary_loss(r, w) / (2 * L + 1))


def design_rate_circular(l: int, r: int, K: int, w: int, kappa: Sequence[float] | None = None) -> float:
    """Design rate of the circular ensemble with known fractions ``kappa``."""
    kap = np.zeros(K) if kappa is None else np.asarray(kappa, dtype=np.float64)
    if kap.shape != (K,):
        raise SpecError(f"kappa must have {K} entries")
    if np.any((kap < 0) | (kap > 1)):
        raise SpecError("kappa entries must lie in [0, 1]")
    free = float(np.sum(1.0 - kap))
    if free <= 0:
        raise SpecError("kappa cannot freeze every position")
    frozen_socket = np.array([np.mean(kap[(k - np.arange(w)) % K]) for k in range(K)])
    excess = float(np.sum(kap - frozen_socket ** r))
    return 1.0 - l / r - (l / r) * excess / free


def design_rate_one_sided(l: int, r: int, K: int, w: int, alpha: float = 0.0) -> float:
    """Design rate of the one-sided ensemble on positions 0..K-1.

    Only the left boundary loses rate, half of what both boundaries of the
    line ensemble lose over the same number of positions.  Merging a
    fraction ``alpha`` of position-0 checks removes alpha*M*l/r checks.
    """
    if K < w:
        raise SpecError(f"need K >= w, got K={K}, w={w}")
    if not 0.0 <= alpha <= 1.0:
        raise SpecError(f"merge fraction must lie in [0, 1], got {alpha}")
    ratio = Fraction(l, r)
    base = 1 - ratio - ratio * _boundary_loss(r, w) / (2 * K)
    return float(base) + alpha * (l / r) / K


def design_rate(spec: CoupledSpec) -> float:
    """Dispatch on the topology of ``spec``."""
    if spec.topology == UNCOUPLED:
        return 1.0 - spec.l / spec.r
    if spec.topology == LINE:
        if spec.kappa is not None:
            raise SpecError("known fractions are supported on the circular topology only")
        return design_rate_coupled(spec.l, spec.r, spec.L, spec.w)
    if spec.topology == CIRCULAR:
        return design_rate_circular(spec.l, spec.r, spec.K, spec.w, spec.kappa)
    if spec.kappa is not None:
        raise SpecError("known fractions are supported on the circular topology only")
    return design_rate_one_sided(spec.l, spec.r, spec.K, spec.w, spec.alpha)


# ---------------------------------------------------------------------------
# boundary experiments on the circular BEC ensemble
# ---------------------------------------------------------------------------

@dataclass
class BoundaryResult:
    deltas: dict
    epsilon_bp: float
    kappa: np.ndarray
    design_rate: float


def _iters(K):
    return max(20000, 2000 * K)


def boundary_threshold(deltas: Mapping[int, float], K: int, w: int, l: int = 3, r: int = 6,
                       tol: float = 1e-5, max_iters: int | None = None) -> BoundaryResult:
    """BP threshold when boundary position k carries effective erasure ``deltas[k]``.

    Fixing the effective erasure probabilities and bisecting the bulk
    erasure probability solves delta_k = (1 - kappa_k) eps exactly; the
    known fractions follow as kappa_k = 1 - delta_k / eps.
    """
    spec = CoupledSpec.circular(l, r, K, w)
    dmap = {int(k) % K: float(d) for k, d in deltas.items()}
    if any(d < 0 for d in dmap.values()):
        raise SpecError("effective erasure probabilities must be non-negative")
    lo = max(dmap.values(), default=0.0)
    eps = bec_bp_threshold(spec, tol=tol, delta=dmap, lo=lo, hi=1.0,
                           max_iters=max_iters or _iters(K))
    kappa = np.zeros(K)
    for k, d in dmap.items():
        kappa[k] = 1.0 - d / eps
    return BoundaryResult(dmap, eps, kappa, design_rate_circular(l, r, K, w, kappa))


@dataclass
class SweepRow:
    delta: float
    epsilon_bp: float
    kappa: float
    design_rate: float
    w: int
    K: int
    ok: bool = True


def rateloss_sweep(w: int, K: int, delta_grid: Sequence[float], positions: Sequence[int] | None = None,
                   l: int = 3, r: int = 6, tol: float = 1e-5,
                   max_iters: int | None = None) -> list:
    """Threshold against the effective boundary erasure delta.

    The boundary is ``positions`` (default the w-1 contiguous positions
    0..w-2), all carrying the same delta.  Grid points without a bracket are
    kept with ``ok=False``.
    """
    positions = list(range(w - 1)) if positions is None else list(positions)
    rows = []
    for d in delta_grid:
        try:
            res = boundary_threshold({p: d for p in positions}, K, w, l, r, tol, max_iters)
        except NoBracketError:
            rows.append(SweepRow(float(d), float("nan"), float("nan"), float("nan"), w, K, False))
            continue
        rows.append(SweepRow(float(d), res.epsilon_bp, float(res.kappa[positions[0]]),
                             res.design_rate, w, K))
    return rows


def saturation_breakpoint(w: int, K: int, eps_test: float, positions: Sequence[int] | None = None,
                          l: int = 3, r: int = 6, lo: float = 0.0, hi: float = 0.4,
                          tol: float = 1e-3, max_iters: int | None = None) -> float:
    """Largest boundary delta at which forward DE still decodes at ``eps_test``.

    Decoding at fixed channel is monotone in delta, so this is a bisection.
    With ``eps_test`` just below the saturated threshold it locates where
    the threshold leaves its plateau.
    """
    positions = list(range(w - 1)) if positions is None else list(positions)
    spec = CoupledSpec.circular(l, r, K, w)
    iters = max_iters or _iters(K)

    def decodes(d):
        return bec_run(eps_test, spec, delta={p: d for p in positions}, max_iters=iters).decoded

    if not decodes(lo):
        raise NoBracketError(f"no decoding at delta={lo}, eps={eps_test}")
    if decodes(hi):
        raise NoBracketError(f"still decoding at delta={hi}, eps={eps_test}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if decodes(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def plateau_breakpoint(w: int, K: int, eta: float = 1e-4, delta_ref: float = 0.05,
                       positions: Sequence[int] | None = None, l: int = 3, r: int = 6,
                       tol: float = 2e-3, max_iters: int | None = None) -> tuple:
    """(plateau threshold, breakpoint delta).

    The plateau is the threshold at the small boundary erasure ``delta_ref``,
    resolved to 2e-6; the breakpoint is where the threshold has dropped by
    ``eta`` below it.
    """
    plateau = boundary_threshold({p: delta_ref for p in (positions or range(w - 1))}, K, w, l, r,
                                 tol=2e-6, max_iters=max_iters).epsilon_bp
    point = saturation_breakpoint(w, K, plateau - eta, positions, l, r, lo=delta_ref,
                                  tol=tol, max_iters=max_iters)
    return plateau, point


def sweep_csv(rows: Sequence[SweepRow], path=None) -> str:
    """CSV with columns delta, epsilon_bp, kappa, design_rate, w, K."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["delta", "epsilon_bp", "kappa", "design_rate", "w", "K"])
    for row in rows:
        wr.writerow([f"{row.delta:.6f}", f"{row.epsilon_bp:.6f}", f"{row.kappa:.6f}",
                     f"{row.design_rate:.6f}", row.w, row.K])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


__all__ = [
    "design_rate_coupled", "design_rate_circular", "design_rate_one_sided", "design_rate",
    "BoundaryResult", "boundary_threshold", "SweepRow", "rateloss_sweep",
    "saturation_breakpoint", "plateau_breakpoint", "sweep_csv",
]
