"""Density evolution on quantized L-densities for uncoupled and coupled ensembles."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import ChannelParam, channel_density, param_from_entropy
from .coupling import CoupledSpec, EdgeGraph, compile_graph
from .density import (Density, GridSpec, GridMismatchError, battacharyya_rows, chk_power,
                      chk_power_rows, chk_conv_rows, entropy_rows, error_prob_rows,
                      mix_rows, var_conv, var_conv_rows, var_power, var_power_rows)
from .errors import NoBracketError, SpecError

TO_ZERO = "to_zero"
STALLED = "stalled_nonzero"
MAX_ITERS = "max_iters"

DECODED_ERROR_PROB = 1e-10
TOL_B = 1e-9
MAX_ITERS_DENSITY = 2000

PARALLEL = "parallel"
ROUND_ROBIN = "round_robin"
RANDOM = "random"


@dataclass(frozen=True)
class ScheduleSpec:
    """Which sections are updated together.

    ``parallel`` updates all sections at once, ``round_robin`` one section at
    a time in position order and ``random`` updates ``sections_per_step``
    sections at a time in the order of a fresh random permutation per sweep,
    so every section is touched once per sweep.
    """

    kind: str = PARALLEL
    seed: int = 0
    sections_per_step: int = 1

    def __post_init__(self):
        if self.kind not in (PARALLEL, ROUND_ROBIN, RANDOM):
            raise SpecError(f"unknown schedule {self.kind!r}")
        if self.sections_per_step < 1:
            raise SpecError("sections_per_step must be >= 1")

    @classmethod
    def parallel(cls):
        return cls(PARALLEL)

    @classmethod
    def round_robin(cls):
        return cls(ROUND_ROBIN)

    @classmethod
    def random(cls, seed, sections_per_step=1):
        return cls(RANDOM, int(seed), int(sections_per_step))

    def sweeps(self, S):
        """Yield, sweep after sweep, the list of section batches."""
        if self.kind == PARALLEL:
            while True:
                yield [np.arange(S)]
        elif self.kind == ROUND_ROBIN:
            while True:
                yield [np.array([i]) for i in range(S)]
        else:
            rng = np.random.default_rng(self.seed)
            k = self.sections_per_step
            while True:
                perm = rng.permutation(S)
                yield [np.sort(perm[a:a + k]) for a in range(0, S, k)]


@dataclass
class Constellation:
    """Section densities stored as rows: ``fin`` is (S, size), ``inf`` is (S,)."""

    grid: GridSpec
    fin: np.ndarray
    inf: np.ndarray
    positions: np.ndarray

    @classmethod
    def uniform(cls, d: Density, positions):
        positions = np.asarray(positions)
        S = len(positions)
        return cls(d.grid, np.tile(d.mass, (S, 1)), np.full(S, d.inf_mass), positions)

    @classmethod
    def from_densities(cls, densities: Sequence[Density], positions=None):
        grid = densities[0].grid
        for d in densities:
            if d.grid != grid:
                raise GridMismatchError("constellation densities live on different grids")
        if positions is None:
            positions = np.arange(len(densities))
        return cls(grid, np.stack([d.mass for d in densities]),
                   np.array([d.inf_mass for d in densities]), np.asarray(positions))

    def __len__(self):
        return len(self.inf)

    def __getitem__(self, i) -> Density:
        return Density(self.grid, self.fin[i], float(self.inf[i]), _checked=False)

    def densities(self) -> list:
        return [self[i] for i in range(len(self))]

    def copy(self):
        return Constellation(self.grid, self.fin.copy(), self.inf.copy(), self.positions.copy())

    def entropies(self):
        return entropy_rows(self.fin, self.grid)

    def battacharyyas(self):
        return battacharyya_rows(self.fin, self.grid)

    def error_probs(self):
        return error_prob_rows(self.fin, self.grid)


@dataclass
class DEReport:
    """Outcome of forward DE; traces have one row per sweep (row 0 is the start)."""

    iterations: int
    entropy: np.ndarray
    battacharyya: np.ndarray
    error_prob: np.ndarray
    stop_reason: str
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def converged(self) -> bool:
        return self.stop_reason != MAX_ITERS

    @property
    def decoded(self) -> bool:
        return self.stop_reason == TO_ZERO


class DensityEngine:
    """Applies the compiled coupled update to a constellation.

    Check messages are computed once per edge type and shared by every
    section that uses that type.
    """

    def __init__(self, graph: EdgeGraph, grid: GridSpec):
        self.graph = graph
        self.grid = grid
        g = graph
        self._factors = []            # per factor: (socket indices, weights, multiplicity)
        for f in range(len(g.fexp)):
            sl = slice(g.wptr[f], g.wptr[f + 1])
            self._factors.append((g.widx[sl], g.wval[sl], int(g.fexp[f])))
        self._type_factors = [list(range(g.tptr[t], g.tptr[t + 1])) for t in range(g.types)]
        self._incid = [(g.eidx[g.eptr[i]:g.eptr[i + 1]], g.eval[g.eptr[i]:g.eptr[i + 1]])
                       for i in range(g.sections)]

    def _average(self, X, fin0, inf0, f):
        idx, wts, _ = self._factors[f]
        fins = [fin0 if s < 0 else X.fin[s] for s in idx]
        infs = [inf0 if s < 0 else X.inf[s] for s in idx]
        return mix_rows(wts, [a[None, :] for a in fins], [np.atleast_1d(b) for b in infs])

    def messages(self, X: Constellation, types):
        """Check-to-variable densities for the given edge types."""
        grid = self.grid
        zero_fin = np.zeros(grid.size)
        facs = sorted({f for t in types for f in self._type_factors[t] if self._factors[f][2] > 0})
        avg = {f: self._average(X, zero_fin, 1.0, f) for f in facs}
        powered = {}
        by_exp = {}
        for f in facs:
            by_exp.setdefault(self._factors[f][2], []).append(f)
        for n, fs in by_exp.items():
            fin = np.concatenate([avg[f][0] for f in fs])
            inf = np.concatenate([avg[f][1] for f in fs])
            pf, pi = chk_power_rows(fin, inf, n, grid)
            for k, f in enumerate(fs):
                powered[f] = (pf[k:k + 1], pi[k:k + 1])
        out = {}
        for t in types:
            parts = [powered[f] for f in self._type_factors[t] if f in powered]
            if not parts:
                out[t] = (zero_fin[None, :].copy(), np.ones(1))
                continue
            fin, inf = parts[0]
            for pf, pi in parts[1:]:
                fin, inf = chk_conv_rows(fin, inf, pf, pi, grid)
            out[t] = (fin, inf)
        return out

    def incoming(self, X: Constellation, sections=None) -> tuple:
        """Average check-to-variable density of each section, as rows."""
        if sections is None:
            sections = np.arange(self.graph.sections)
        types = sorted({int(t) for i in sections for t in self._incid[i][0]})
        msg = self.messages(X, types)
        fins, infs = [], []
        for i in sections:
            idx, wts = self._incid[i]
            fi, ii = mix_rows(wts, [msg[int(t)][0] for t in idx], [msg[int(t)][1] for t in idx])
            fins.append(fi)
            infs.append(ii)
        return np.concatenate(fins), np.concatenate(infs)

    def update(self, c: Density, X: Constellation, sections) -> tuple:
        """New densities for ``sections`` computed from the current ``X``."""
        grid = self.grid
        fin, inf = self.incoming(X, sections)
        fin, inf = var_power_rows(fin, inf, self.graph.l - 1, grid)
        R = len(sections)
        fin, inf = var_conv_rows(np.tile(c.mass, (R, 1)), np.full(R, c.inf_mass), fin, inf, grid)
        kappa = self.graph.kappa[np.asarray(sections)]
        if np.any(kappa > 0):
            keep = 1.0 - kappa
            fin = fin * keep[:, None]
            inf = inf * keep + kappa
        return fin, inf


def _check_channel(c: Density, grid: GridSpec):
    if c.grid != grid:
        raise GridMismatchError(f"channel density grid {c.grid} differs from {grid}")


def de_step_uncoupled(c: Density, x: Density, l: int, r: int) -> Density:
    """One round of the uncoupled recursion: c * (x^[r-1])^(l-1)."""
    if c.grid != x.grid:
        raise GridMismatchError("channel and message densities live on different grids")
    return var_conv(c, var_power(chk_power(x, r - 1), l - 1))


def g_map(window: Sequence[Density], l: int, r: int, w: int) -> Density:
    """Coupled update without the channel for the window x_{i-w+1} .. x_{i+w-1}."""
    if len(window) != 2 * w - 1:
        raise ValueError(f"window must hold 2w-1 = {2 * w - 1} densities, got {len(window)}")
    grid = window[0].grid
    fins = np.stack([d.mass for d in window])[:, None, :]
    infs = np.array([[d.inf_mass] for d in window])
    if any(d.grid != grid for d in window):
        raise GridMismatchError("window densities live on different grids")
    inner = []
    wts = np.full(w, 1.0 / w)
    for j in range(w):
        picks = [j - k + w - 1 for k in range(w)]
        af, ai = mix_rows(wts, fins[picks], infs[picks])
        inner.append(chk_power_rows(af, ai, r - 1, grid))
    uf, ui = mix_rows(wts, [f for f, _ in inner], [i for _, i in inner])
    vf, vi = var_power_rows(uf, ui, l - 1, grid)
    return Density(grid, vf[0], float(vi[0]), _checked=False)


def de_step_coupled(c: Density, X: Constellation, spec: CoupledSpec,
                    graph: EdgeGraph | None = None) -> Constellation:
    """One parallel update of every section."""
    graph = graph or compile_graph(spec)
    if len(X) != graph.sections:
        raise SpecError(f"constellation has {len(X)} sections, spec needs {graph.sections}")
    _check_channel(c, X.grid)
    eng = DensityEngine(graph, X.grid)
    fin, inf = eng.update(c, X, np.arange(graph.sections))
    return Constellation(X.grid, fin, inf, X.positions.copy())


def run_forward_de(c: Density, spec: CoupledSpec, schedule: ScheduleSpec | None = None,
                   tol_B: float = TOL_B, max_iters: int = MAX_ITERS_DENSITY,
                   x0: Constellation | None = None, graph: EdgeGraph | None = None,
                   engine: DensityEngine | None = None) -> tuple:
    """Forward DE from the all-Delta_0 constellation (or ``x0``).

    Stops when every section's error probability is below 1e-10 (to_zero),
    when the largest per-section Bhattacharyya change over a sweep is below
    ``tol_B`` (stalled_nonzero), or after ``max_iters`` sweeps.
    """
    schedule = schedule or ScheduleSpec.parallel()
    graph = graph or compile_graph(spec)
    grid = c.grid
    eng = engine or DensityEngine(graph, grid)
    S = graph.sections
    if x0 is None:
        fin = np.zeros((S, grid.size))
        fin[:, grid.zero_index] = 1.0
        X = Constellation(grid, fin, np.zeros(S), spec.positions)
    else:
        if len(x0) != S:
            raise SpecError(f"start constellation has {len(x0)} sections, spec needs {S}")
        X = x0.copy()
    ent = [X.entropies()]
    bha = [X.battacharyyas()]
    err = [X.error_probs()]
    reason = MAX_ITERS
    it = 0
    sweeps = schedule.sweeps(S)
    while it < max_iters:
        batches = next(sweeps)
        for sel in batches:
            fin, inf = eng.update(c, X, sel)
            X.fin[sel] = fin
            X.inf[sel] = inf
        it += 1
        ent.append(X.entropies())
        bha.append(X.battacharyyas())
        err.append(X.error_probs())
        if np.all(err[-1] < DECODED_ERROR_PROB):
            reason = TO_ZERO
            break
        if np.max(np.abs(bha[-1] - bha[-2])) < tol_B:
            reason = STALLED
            break
    report = DEReport(it, np.array(ent), np.array(bha), np.array(err), reason,
                      np.asarray(X.positions))
    return X, report


@dataclass
class ThresholdResult:
    param: ChannelParam
    entropy: float
    bracket: tuple          # (decoding entropy, failing entropy)
    probes: int


def bp_threshold(family: str, spec: CoupledSpec, grid: GridSpec | None = None,
                 tol: float = 1e-3, lo: float = 0.0, hi: float = 1.0,
                 tol_B: float = TOL_B, max_iters: int = MAX_ITERS_DENSITY) -> ThresholdResult:
    """Bisect the channel entropy separating decoding from stalling.

    ``lo``/``hi`` is the starting entropy bracket; both ends are checked
    first.  Probes below a failing one start from its final constellation,
    which by monotonicity dominates the fixed point reached from Delta_0.
    """
    grid = grid or GridSpec()
    graph = compile_graph(spec)
    eng = DensityEngine(graph, grid)

    def probe(h, x0=None):
        c = channel_density(param_from_entropy(family, h), grid)
        return run_forward_de(c, spec, tol_B=tol_B, max_iters=max_iters, x0=x0,
                              graph=graph, engine=eng)

    X_hi, rep = probe(hi)
    if rep.decoded:
        raise NoBracketError(f"forward DE decodes at entropy {hi}")
    X_lo, rep = probe(lo, X_hi)
    if not rep.decoded:
        raise NoBracketError(f"forward DE does not decode at entropy {lo}")
    warm = X_hi
    probes = 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        X, rep = probe(mid, warm)
        probes += 1
        if rep.decoded:
            lo = mid
        else:
            hi = mid
            warm = X
    h = 0.5 * (lo + hi)
    return ThresholdResult(param_from_entropy(family, h), h, (lo, hi), probes)


def trace_csv(report: DEReport, path=None) -> str:
    """DE trace as CSV: iteration, position, entropy, battacharyya, error_prob."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["iteration", "position", "entropy", "battacharyya", "error_prob"])
    for it in range(report.entropy.shape[0]):
        for s, pos in enumerate(report.positions):
            wr.writerow([it, int(pos), f"{report.entropy[it, s]:.12e}",
                         f"{report.battacharyya[it, s]:.12e}", f"{report.error_prob[it, s]:.12e}"])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


__all__ = [
    "TO_ZERO", "STALLED", "MAX_ITERS", "ScheduleSpec", "Constellation", "DEReport",
    "DensityEngine", "de_step_uncoupled", "g_map", "de_step_coupled", "run_forward_de",
    "ThresholdResult", "bp_threshold", "trace_csv",
]
