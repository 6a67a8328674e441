"""Quantized symmetric L-densities and their two convolution algebras.

A density lives on the lattice ``y_k = (k - N) * step`` for ``k = 0..2N``
(``N = bins / 2``, ``step = llr_max / N``), so it has ``bins + 1`` finite
cells, one of them exactly at 0, plus a separate atom at ``+inf``.

Variable-node convolution adds LLRs, which maps the lattice onto itself, so
it is an exact discrete convolution; results beyond ``+-llr_max`` saturate
into the extreme cells.  Check-node convolution applies the tanh rule pair
by pair and splits each output value across its two neighbouring cells so
that mass and mean are preserved.

Most of the engine works on *batches*: a 2-D array of finite masses (one
row per density) plus a vector of ``+inf`` masses.  The ``Density`` class is
the public single-density face of the same functions.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.fft

from . import _kernels

LN2 = math.log(2.0)

# Below this many non-zero cells in either operand the direct convolution is
# cheaper than an FFT and, unlike the FFT, exact.
_DIRECT_NNZ = 32
# FFT round-off floor (relative to the product of operand masses).
_FFT_FLOOR = 1e-15


class GridMismatchError(ValueError):
    """Raised when two densities on different grids are combined."""


@dataclass(frozen=True)
class GridSpec:
    llr_max: float = 25.0
    bins: int = 2048
    overflow_to_inf: bool = False

    def __post_init__(self):
        if not (self.llr_max > 0 and math.isfinite(self.llr_max)):
            raise ValueError(f"llr_max must be positive, got {self.llr_max}")
        if self.bins < 16 or self.bins % 2:
            raise ValueError(f"bins must be even and >= 16, got {self.bins}")

    @property
    def half(self) -> int:
        return self.bins // 2

    @property
    def size(self) -> int:
        return self.bins + 1

    @property
    def step(self) -> float:
        return 2.0 * self.llr_max / self.bins

    @property
    def zero_index(self) -> int:
        return self.half

    @property
    def centers(self) -> np.ndarray:
        return _centers(self.llr_max, self.bins)


@lru_cache(maxsize=None)
def _centers(llr_max, bins):
    half = bins // 2
    c = (np.arange(bins + 1) - half) * (llr_max / half)
    c.setflags(write=False)
    return c


@lru_cache(maxsize=8)
def _chk_table(llr_max, bins):
    half = bins // 2
    step = llr_max / half
    mags = np.arange(half + 1) * step
    a = mags[:, None]
    b = mags[None, :]
    # 2 atanh(tanh(a/2) tanh(b/2)) for a, b >= 0, written to stay accurate
    # when both tanh factors round to 1.
    v = np.log1p(np.exp(-(a + b))) + np.minimum(a, b) - np.log1p(np.exp(-np.abs(a - b)))
    pos = np.clip(v / step, 0.0, float(half))
    lo = np.floor(pos).astype(np.int32)
    frac = pos - lo
    frac[lo == half] = 0.0
    # Runs of constant output cell along each row, restricted to j > i.
    # f(a, b) is non-decreasing in b, so each row has at most ~ln2/step runs.
    ptr = [0]
    starts = []
    stops = []
    for i in range(half + 1):
        row = lo[i, i + 1:]
        if len(row):
            cut = np.flatnonzero(np.diff(row)) + 1
            edges = np.concatenate(([0], cut, [len(row)])) + i + 1
            starts.extend(edges[:-1])
            stops.extend(edges[1:])
        ptr.append(len(starts))
    runs = tuple(np.asarray(v, dtype=np.int64) for v in (ptr, starts, stops))
    return (np.ascontiguousarray(lo), np.ascontiguousarray(frac)) + runs


@lru_cache(maxsize=8)
def _kernel_vectors(llr_max, bins):
    y = _centers(llr_max, bins)
    ent = np.logaddexp(0.0, -y) / LN2
    bhat = np.exp(-0.5 * y)
    for v in (ent, bhat):
        v.setflags(write=False)
    return ent, bhat


@dataclass(frozen=True, eq=False)
class Density:
    """Finite masses on the grid lattice plus an atom at ``+inf``."""

    grid: GridSpec
    mass: np.ndarray
    inf_mass: float = 0.0
    _checked: bool = field(default=True, repr=False)

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.shape != (self.grid.size,):
            raise ValueError(f"mass must have shape ({self.grid.size},), got {mass.shape}")
        if mass.flags.writeable:
            mass = mass.copy()
            mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "inf_mass", float(self.inf_mass))
        if self._checked:
            if mass.min(initial=0.0) < 0.0 or self.inf_mass < 0.0:
                raise ValueError("density masses must be non-negative")
            total = mass.sum() + self.inf_mass
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"density total mass is {total!r}, expected 1")

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum() + self.inf_mass)

    @property
    def zero_mass(self) -> float:
        return float(self.mass[self.grid.zero_index])

    def is_close(self, other: "Density", atol: float = 1e-12) -> bool:
        _same_grid(self, other)
        return (abs(self.inf_mass - other.inf_mass) <= atol
                and bool(np.all(np.abs(self.mass - other.mass) <= atol)))

    def __repr__(self):
        return (f"Density(llr_max={self.grid.llr_max}, bins={self.grid.bins}, "
                f"zero={self.zero_mass:.6g}, inf={self.inf_mass:.6g}, H={entropy(self):.6g})")


def _from_rows(grid, fin, inf, row=0):
    return Density(grid, fin[row], float(inf[row]), _checked=False)


def _rows(*densities):
    grid = _same_grid(*densities)
    fin = np.stack([d.mass for d in densities])
    inf = np.array([d.inf_mass for d in densities])
    return grid, fin, inf


def _same_grid(*densities):
    grid = densities[0].grid
    for d in densities[1:]:
        if d.grid != grid:
            raise GridMismatchError(f"incompatible grids: {grid} vs {d.grid}")
    return grid


# ---------------------------------------------------------------------------
# batch kernels: fin is (R, size), inf is (R,)
# ---------------------------------------------------------------------------

def _saturate(full, grid):
    """Fold a full linear convolution back onto the lattice."""
    N = grid.half
    n = grid.size
    out = full[:, N:N + n].copy()
    out[:, 0] += full[:, :N].sum(axis=1)
    top = full[:, N + n:].sum(axis=1)
    if grid.overflow_to_inf:
        return out, top
    out[:, -1] += top
    return out, np.zeros(len(out))


def _lin_conv_rows(fa, fb):
    """Row-wise full convolution.

    Rows where either operand has at most ``_DIRECT_NNZ`` nonzeros are done
    exactly in direct form, the rest by FFT.  The choice is made per row so
    that a row's result does not depend on what it is batched with.
    """
    nnz = np.minimum(np.count_nonzero(fa, axis=1), np.count_nonzero(fb, axis=1))
    direct = nnz <= _DIRECT_NNZ
    out = np.empty((fa.shape[0], fa.shape[1] + fb.shape[1] - 1))
    if direct.any():
        a, b = fa[direct], fb[direct]
        swap = np.count_nonzero(a, axis=1) > np.count_nonzero(b, axis=1)
        a2 = np.where(swap[:, None], b, a)
        b2 = np.where(swap[:, None], a, b)
        out[direct] = _kernels.lin_conv(np.ascontiguousarray(a2), np.ascontiguousarray(b2))
    if not direct.all():
        keep = ~direct
        out[keep] = _fft_conv(fa[keep], fb[keep])
    return out


def _fft_conv(fa, fb):
    n_out = fa.shape[1] + fb.shape[1] - 1
    nfft = scipy.fft.next_fast_len(n_out, real=True)
    spec = scipy.fft.rfft(fa, nfft, axis=1) * scipy.fft.rfft(fb, nfft, axis=1)
    full = scipy.fft.irfft(spec, nfft, axis=1)[:, :n_out]
    target = fa.sum(axis=1) * fb.sum(axis=1)
    full[full < _FFT_FLOOR * target[:, None]] = 0.0
    got = full.sum(axis=1)
    scale = np.divide(target, got, out=np.zeros_like(got), where=got > 0)
    return full * scale[:, None]


_MASS_SLACK = 1e-14


def _unit_mass(fin, inf):
    # operands are probability densities; pinning the result to mass 1 keeps
    # rounding from compounding geometrically over many DE rounds
    # (rows already within _MASS_SLACK are left alone so identities stay exact)
    total = fin.sum(axis=1) + inf
    fix = (total > 0) & (np.abs(total - 1.0) > _MASS_SLACK)
    if not fix.any():
        return fin, inf
    scale = np.where(fix, 1.0 / np.where(fix, total, 1.0), 1.0)
    return fin * scale[:, None], inf * scale


def _is_zero_atom(fin, inf, grid):
    return (inf == 0.0) & (fin[:, grid.zero_index] == 1.0)


def _pin_atoms(fin, inf, fa, ia, fb, ib, grid, absorbing, neutral):
    """Overwrite rows where an operand is an atom with the exact answer.

    ``neutral`` and ``absorbing`` say which atom (``"zero"`` or ``"inf"``)
    plays which role for the convolution at hand.
    """
    test = {"zero": lambda f, i: _is_zero_atom(f, i, grid), "inf": lambda f, i: i == 1.0}
    for f_op, i_op, f_other, i_other in ((fa, ia, fb, ib), (fb, ib, fa, ia)):
        keep = test[neutral](f_op, i_op)
        if keep.any():
            fin[keep] = f_other[keep]
            inf[keep] = i_other[keep]
    for f_op, i_op in ((fa, ia), (fb, ib)):
        hit = test[absorbing](f_op, i_op)
        if hit.any():
            fin[hit] = f_op[hit]
            inf[hit] = i_op[hit]
    return fin, inf


def var_conv_rows(fa, ia, fb, ib, grid):
    fin, spill = _saturate(_lin_conv_rows(fa, fb), grid)
    inf = ia + ib - ia * ib + spill
    fin, inf = _unit_mass(fin, inf)
    return _pin_atoms(fin, inf, fa, ia, fb, ib, grid, absorbing="inf", neutral="zero")


def _split_signs(fin, N):
    pos = np.ascontiguousarray(fin[:, N:])
    neg = np.zeros_like(pos)
    neg[:, 1:] = fin[:, N - 1::-1]
    return pos, neg


def chk_conv_rows(fa, ia, fb, ib, grid, same=False):
    N = grid.half
    table = _chk_table(grid.llr_max, grid.bins)
    ap, an = _split_signs(fa, N)
    if same:
        bp, bn = ap, an
    else:
        bp, bn = _split_signs(fb, N)
    outp, outn = _kernels.chk_pairs(ap, an, bp, bn, *table, bool(same))
    fin = np.empty_like(fa)
    fin[:, N:] = outp[:, :N + 1]
    fin[:, N] += outn[:, 0]
    fin[:, :N] = outn[:, N:0:-1]
    fin += ia[:, None] * fb + ib[:, None] * fa
    fin, inf = _unit_mass(fin, ia * ib)
    return _pin_atoms(fin, inf, fa, ia, fb, ib, grid, absorbing="zero", neutral="inf")


def var_power_rows(fin, inf, n, grid):
    return _power(fin, inf, n, grid, var_conv_rows, _delta_zero_rows)


def chk_power_rows(fin, inf, n, grid):
    return _power(fin, inf, n, grid, chk_conv_rows, _delta_inf_rows)


def _delta_zero_rows(R, grid):
    fin = np.zeros((R, grid.size))
    fin[:, grid.zero_index] = 1.0
    return fin, np.zeros(R)


def _delta_inf_rows(R, grid):
    return np.zeros((R, grid.size)), np.ones(R)


def _power(fin, inf, n, grid, conv, identity):
    if n < 0:
        raise ValueError(f"power must be non-negative, got {n}")
    if n == 0:
        return identity(len(fin), grid)
    extra = {"same": True} if conv is chk_conv_rows else {}
    result = None
    base = (fin, inf)
    while True:
        if n & 1:
            result = base if result is None else conv(*result, *base, grid)
        n >>= 1
        if not n:
            break
        base = conv(*base, *base, grid, **extra)
    f, i = result
    return (f.copy() if f is fin else f), (i.copy() if i is inf else i)


def mix_rows(weights, fins, infs):
    """Sequential convex combination; ``fins`` is (K, R, size)."""
    fin = weights[0] * fins[0]
    inf = weights[0] * infs[0]
    for w, f, i in zip(weights[1:], fins[1:], infs[1:]):
        fin = fin + w * f
        inf = inf + w * i
    return fin, inf


def entropy_rows(fin, grid):
    ent, _ = _kernel_vectors(grid.llr_max, grid.bins)
    return fin @ ent


def battacharyya_rows(fin, grid):
    _, bhat = _kernel_vectors(grid.llr_max, grid.bins)
    return fin @ bhat


def error_prob_rows(fin, grid):
    N = grid.half
    return fin[:, :N].sum(axis=1) + 0.5 * fin[:, N]


# ---------------------------------------------------------------------------
# public single-density API
# ---------------------------------------------------------------------------

def delta_zero(grid: GridSpec) -> Density:
    """Erasure density: unit mass at LLR 0."""
    fin, inf = _delta_zero_rows(1, grid)
    return _from_rows(grid, fin, inf)


def delta_inf(grid: GridSpec) -> Density:
    """Perfect-knowledge density: unit mass at ``+inf``."""
    fin, inf = _delta_inf_rows(1, grid)
    return _from_rows(grid, fin, inf)


def bec_density(grid: GridSpec, erasure: float) -> Density:
    """``erasure * Delta_0 + (1 - erasure) * Delta_inf``."""
    if not 0.0 <= erasure <= 1.0:
        raise ValueError(f"erasure probability must lie in [0, 1], got {erasure}")
    mass = np.zeros(grid.size)
    mass[grid.zero_index] = erasure
    return Density(grid, mass, 1.0 - erasure)


def from_atoms(grid: GridSpec, values: Sequence[float], weights: Sequence[float]) -> Density:
    """Place point masses on the lattice, splitting each between its two
    neighbouring cells so mass and mean are kept.  ``+inf`` values go to the
    infinity atom; finite values beyond the grid saturate."""
    mass = np.zeros(grid.size)
    inf = 0.0
    for y, p in zip(values, weights):
        if p < 0:
            raise ValueError("atom weights must be non-negative")
        if y == math.inf:
            inf += p
            continue
        pos = min(max(y / grid.step + grid.half, 0.0), float(grid.bins))
        k = int(math.floor(pos))
        t = pos - k
        if k >= grid.bins:
            mass[grid.bins] += p
        else:
            mass[k] += p * (1.0 - t)
            mass[k + 1] += p * t
    return Density(grid, mass, inf)


def var_conv(a: Density, b: Density) -> Density:
    """Variable-node convolution (LLR addition)."""
    grid, fin, inf = _rows(a, b)
    out = var_conv_rows(fin[:1], inf[:1], fin[1:], inf[1:], grid)
    return _from_rows(grid, *out)


def chk_conv(a: Density, b: Density) -> Density:
    """Check-node convolution (tanh rule)."""
    grid, fin, inf = _rows(a, b)
    out = chk_conv_rows(fin[:1], inf[:1], fin[1:], inf[1:], grid)
    return _from_rows(grid, *out)


def var_power(a: Density, n: int) -> Density:
    out = var_power_rows(a.mass[None, :], np.array([a.inf_mass]), n, a.grid)
    return _from_rows(a.grid, *out)


def chk_power(a: Density, n: int) -> Density:
    out = chk_power_rows(a.mass[None, :], np.array([a.inf_mass]), n, a.grid)
    return _from_rows(a.grid, *out)


def mix(weights: Sequence[float], densities: Sequence[Density]) -> Density:
    """Convex combination of densities."""
    if len(weights) != len(densities) or not densities:
        raise ValueError("weights and densities must be non-empty and of equal length")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"mixing weights must be non-negative and sum to 1, got sum {w.sum()!r}")
    grid, fin, inf = _rows(*densities)
    out = mix_rows(w, fin[:, None, :], inf[:, None])
    return _from_rows(grid, *out)


def entropy(a: Density) -> float:
    """Base-2 entropy functional, ``sum a(y) log2(1 + e^-y)``."""
    return float(entropy_rows(a.mass[None, :], a.grid)[0])


def battacharyya(a: Density) -> float:
    return float(battacharyya_rows(a.mass[None, :], a.grid)[0])


def error_prob(a: Density) -> float:
    """Mass on negative LLRs plus half the mass at zero."""
    return float(error_prob_rows(a.mass[None, :], a.grid)[0])


def symmetry_deficit(a: Density) -> float:
    """Total positive part of ``a(-y) - e^-y a(y)`` (0 for exactly symmetric)."""
    y = a.grid.centers
    m = a.mass
    with np.errstate(over="ignore"):
        gap = m[::-1] - np.exp(-y) * m
    return float(np.sum(np.maximum(gap[np.isfinite(gap)], 0.0)))


# ---------------------------------------------------------------------------
# text serialisation
# ---------------------------------------------------------------------------

def dump_density(a: Density, path=None) -> str:
    """Write ``a`` as CSV (bin_center, mass) with a ``#`` header.  Floats are
    written with ``repr`` so a load gives back identical bits."""
    buf = io.StringIO()
    buf.write(f"# llr_max={a.grid.llr_max!r}\n")
    buf.write(f"# bins={a.grid.bins}\n")
    buf.write(f"# overflow_to_inf={int(a.grid.overflow_to_inf)}\n")
    buf.write(f"# inf_mass={a.inf_mass!r}\n")
    buf.write("bin_center,mass\n")
    for y, m in zip(a.grid.centers, a.mass):
        buf.write(f"{float(y)!r},{float(m)!r}\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def load_density(source) -> Density:
    """Inverse of :func:`dump_density`; accepts a path or the CSV text."""
    text = source
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text()
    header = {}
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value.strip()
        elif line and not line.startswith("bin_center"):
            y, m = line.split(",")
            rows.append((float(y), float(m)))
    grid = GridSpec(float(header["llr_max"]), int(header["bins"]),
                    bool(int(header.get("overflow_to_inf", "0"))))
    centers = np.array([r[0] for r in rows])
    if len(rows) != grid.size or not np.array_equal(centers, grid.centers):
        raise ValueError("density file does not match its grid header")
    return Density(grid, np.array([r[1] for r in rows]), float(header["inf_mass"]))
