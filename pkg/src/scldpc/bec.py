"""Scalar density evolution for the BEC.

On the erasure channel every message density is ``x Delta_0 + (1-x)
Delta_inf``, so a constellation is a vector of erasure probabilities and the
whole iteration runs in the compiled kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import _kernels
from .coupling import CoupledSpec, EdgeGraph, compile_graph
from .errors import NoBracketError

TO_ZERO = "to_zero"
STALLED = "stalled_nonzero"
MAX_ITERS = "max_iters"
_REASONS = (TO_ZERO, STALLED, MAX_ITERS)

# decoded means every error probability (x/2 on the BEC) is below 1e-10
ZERO_TOL = 2e-10
MAX_ITERS_SCALAR = 20000


@dataclass
class BecRun:
    x: np.ndarray
    iterations: int
    stop_reason: str

    @property
    def decoded(self) -> bool:
        return self.stop_reason == TO_ZERO


def effective_erasure(eps: float, graph: EdgeGraph, delta: Mapping | None = None) -> np.ndarray:
    """Per-section probability that a variable is free and erased.

    Normally ``(1 - kappa_i) * eps``; ``delta`` maps section indices to a
    fixed value that overrides this (the boundary parametrisation by the
    effective erasure probability).
    """
    eff = (1.0 - graph.kappa) * eps
    if delta:
        for i, d in delta.items():
            eff[i] = d
    return eff


def _graph(spec, check_profile, graph):
    if graph is not None:
        return graph
    return compile_graph(spec, check_profile)


def bec_de_step(eps: float, x, spec: CoupledSpec, check_profile: Mapping | None = None,
                graph: EdgeGraph | None = None, delta: Mapping | None = None) -> np.ndarray:
    """One parallel update of the erasure-probability constellation."""
    g = _graph(spec, check_profile, graph)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.sections,):
        raise ValueError(f"constellation has shape {x.shape}, expected ({g.sections},)")
    if np.any((x < 0) | (x > 1)):
        raise ValueError("erasure probabilities must lie in [0, 1]")
    eff = effective_erasure(eps, g, delta)
    return _kernels.bec_step(eff, x, g.l, *g.arrays())


def bec_run(eps: float, spec: CoupledSpec, check_profile: Mapping | None = None,
            x0=None, graph: EdgeGraph | None = None, delta: Mapping | None = None,
            max_iters: int = MAX_ITERS_SCALAR, tol: float = 1e-9,
            zero_tol: float = ZERO_TOL) -> BecRun:
    """Forward DE from the all-erased start (or ``x0``) until a stop rule fires."""
    g = _graph(spec, check_profile, graph)
    eff = effective_erasure(eps, g, delta)
    start = np.ones(g.sections) if x0 is None else np.array(x0, dtype=np.float64)
    x, it, code = _kernels.bec_forward(eff, start, g.l, *g.arrays(),
                                       int(max_iters), float(tol), float(zero_tol))
    return BecRun(np.asarray(x), int(it), _REASONS[code])


def bec_bp_threshold(spec: CoupledSpec, check_profile: Mapping | None = None,
                     tol: float = 1e-5, delta: Mapping | None = None,
                     max_iters: int = MAX_ITERS_SCALAR, lo: float = 0.0,
                     hi: float = 1.0) -> float:
    """Bisect the erasure probability at which forward DE stops decoding.

    Probes below a failed one are warm-started from its final constellation:
    by monotonicity that point dominates the fixed point at any smaller
    erasure probability, so the outcome is unchanged.
    """
    g = _graph(spec, check_profile, None)
    if not bec_run(lo, spec, graph=g, delta=delta, max_iters=max_iters).decoded:
        raise NoBracketError(f"forward DE does not decode at eps={lo}")
    top = bec_run(hi, spec, graph=g, delta=delta, max_iters=max_iters)
    if top.decoded:
        raise NoBracketError(f"forward DE decodes at eps={hi}")
    warm = top.x
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        run = bec_run(mid, spec, graph=g, delta=delta, x0=warm, max_iters=max_iters)
        if run.decoded:
            lo = mid
        else:
            hi = mid
            warm = run.x
    return 0.5 * (lo + hi)


__all__ = [
    "TO_ZERO", "STALLED", "MAX_ITERS", "ZERO_TOL", "BecRun",
    "effective_erasure", "bec_de_step", "bec_run", "bec_bp_threshold",
]
