"""BMS channel families, their L-densities and the GEXIT functional."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .density import Density, GridSpec, bec_density, delta_inf, delta_zero, entropy, entropy_rows, from_atoms

BEC = "BEC"
BSC = "BSC"
BAWGN = "BAWGN"
FAMILIES = (BEC, BSC, BAWGN)


@dataclass(frozen=True)
class ChannelParam:
    """A member of one of the three channel families.

    ``value`` is the erasure probability for BEC, the crossover probability
    for BSC and the noise standard deviation for BAWGN (``0`` and ``inf`` are
    accepted as the noiseless and useless limits).
    """

    family: str
    value: float

    def __post_init__(self):
        fam = self.family.upper()
        if fam not in FAMILIES:
            raise ValueError(f"unknown channel family {self.family!r}")
        object.__setattr__(self, "family", fam)
        v = float(self.value)
        object.__setattr__(self, "value", v)
        if fam == BEC and not 0.0 <= v <= 1.0:
            raise ValueError(f"BEC erasure probability must lie in [0, 1], got {v}")
        if fam == BSC and not 0.0 <= v <= 0.5:
            raise ValueError(f"BSC crossover probability must lie in [0, 1/2], got {v}")
        if fam == BAWGN and not v >= 0.0:
            raise ValueError(f"BAWGN sigma must be non-negative, got {v}")

    def __str__(self):
        return f"{self.family}({self.value:.10g})"


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-(p * math.log2(p) + (1 - p) * math.log2(1 - p)))


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def _gaussian_on_lattice(grid: GridSpec, mean: float, std: float) -> np.ndarray:
    """Project N(mean, std^2) onto the lattice with linear hat functions.

    This keeps mass and mean exactly (up to the saturated tails), matching the
    two-cell split used for point masses.
    """
    y = grid.centers
    step = grid.step
    z = (y - mean) / std
    cdf = special.ndtr(z)
    sf = special.ndtr(-z)
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    # probability and first moment of each cell [y_k, y_k+1]; upper-tail
    # forms are used right of the mean to avoid cancellation
    upper = z[:-1] > 0
    prob = np.where(upper, sf[:-1] - sf[1:], cdf[1:] - cdf[:-1])
    lower_m = mean * cdf - std * pdf          # int_{-inf}^{y} t a(t) dt
    upper_m = mean * sf + std * pdf           # int_{y}^{inf} t a(t) dt
    moment = np.where(upper, upper_m[:-1] - upper_m[1:], lower_m[1:] - lower_m[:-1])
    right = np.clip((moment - y[:-1] * prob) / step, 0.0, None)
    right = np.minimum(right, np.clip(prob, 0.0, None))
    left = np.clip(prob, 0.0, None) - right
    mass = np.zeros(grid.size)
    mass[:-1] += left
    mass[1:] += right
    mass[0] += cdf[0]
    mass[-1] += sf[-1]
    return mass / mass.sum()


def channel_density(param: ChannelParam, grid: GridSpec) -> Density:
    """L-density of the channel, conditioned on the all-zero codeword."""
    v = param.value
    if param.family == BEC:
        return bec_density(grid, v)
    if param.family == BSC:
        if v == 0.0:
            return delta_inf(grid)
        if v == 0.5:
            return delta_zero(grid)
        m = math.log((1 - v) / v)
        return from_atoms(grid, [m, -m], [1 - v, v])
    if v == 0.0:
        return delta_inf(grid)
    if math.isinf(v):
        return delta_zero(grid)
    return Density(grid, _bawgn_mass(v, grid.llr_max, grid.bins))


@lru_cache(maxsize=256)
def _bawgn_mass(sigma, llr_max, bins):
    mass = _gaussian_on_lattice(GridSpec(llr_max, bins), 2.0 / sigma**2, 2.0 / sigma)
    mass.setflags(write=False)
    return mass


@lru_cache(maxsize=4096)
def _bawgn_entropy(sigma: float) -> float:
    mean = 2.0 / sigma**2
    std = 2.0 / sigma

    def f(z):
        return math.exp(-0.5 * z * z) * np.logaddexp(0.0, -(mean + std * z))

    val, _ = integrate.quad(f, -40.0, 40.0, epsabs=1e-15, epsrel=1e-13, limit=400,
                            points=[-mean / std])
    return float(val / math.sqrt(2 * math.pi) / math.log(2.0))


def channel_entropy(param: ChannelParam) -> float:
    """Entropy of the channel in bits (1 minus capacity)."""
    v = param.value
    if param.family == BEC:
        return v
    if param.family == BSC:
        return binary_entropy(v)
    if v == 0.0:
        return 0.0
    if math.isinf(v):
        return 1.0
    return _bawgn_entropy(v)


def param_from_entropy(family: str, h: float) -> ChannelParam:
    """Channel parameter whose entropy is ``h``."""
    family = family.upper()
    if not 0.0 <= h <= 1.0:
        raise ValueError(f"entropy must lie in [0, 1], got {h}")
    if family == BEC:
        return ChannelParam(BEC, h)
    if family == BSC:
        if h == 0.0:
            return ChannelParam(BSC, 0.0)
        if h == 1.0:
            return ChannelParam(BSC, 0.5)
        p = optimize.brentq(lambda q: binary_entropy(q) - h, 1e-300, 0.5, xtol=1e-300, rtol=1e-15)
        return ChannelParam(BSC, p)
    if family != BAWGN:
        raise ValueError(f"unknown channel family {family!r}")
    if h == 0.0:
        return ChannelParam(BAWGN, 0.0)
    if h == 1.0:
        return ChannelParam(BAWGN, math.inf)
    lo, hi = math.log(0.5), math.log(2.0)
    while _bawgn_entropy(math.exp(lo)) > h:
        lo -= 1.0
    while _bawgn_entropy(math.exp(hi)) < h:
        hi += 1.0
    t = optimize.brentq(lambda s: _bawgn_entropy(math.exp(s)) - h, lo, hi, xtol=1e-15, rtol=1e-15)
    return ChannelParam(BAWGN, math.exp(t))


# ---------------------------------------------------------------------------
# GEXIT
# ---------------------------------------------------------------------------

def _trapezoid_nodes(sigma: float):
    """Uniform z-nodes for the kernel integrals.

    Spacing is min(0.5, s/3) with s = 2/sigma the LLR standard deviation; the
    range covers 40 standard deviations around both the Gaussian centre and
    its e^{-z}-tilted centre (mean - s^2), which dominates for large y.
    """
    mean = 2.0 / sigma**2
    std = 2.0 / sigma
    h = min(0.5, std / 3.0)
    z0 = mean - std * std - 40.0 * std
    z1 = mean + 40.0 * std
    n = int(math.ceil((z1 - z0) / h)) + 1
    z = np.linspace(z0, z1, n)
    logw = -((z - mean) ** 2) * sigma**2 / 8.0
    return z, logw


def gexit_kernel(sigma: float, y) -> np.ndarray | float:
    """BAWGN GEXIT kernel l(sigma, y).

    Ratio of the two z-integrals of the Gaussian weight against the logistic
    1/(1+e^{z+y}) and 1/(1+e^z), evaluated by the trapezoid rule (which
    converges geometrically here since both integrands are analytic in a
    strip).  l(sigma, 0) = 1, l decreases in y, l(sigma, +inf) = 0; for y < 0
    the kernel exceeds 1.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    scalar = np.ndim(y) == 0
    yy = np.atleast_1d(np.asarray(y, dtype=np.float64))
    z, logw = _trapezoid_nodes(sigma)
    den = np.sum(np.exp(logw + _log_logistic(-z)))
    out = np.zeros(yy.shape)
    finite = np.isfinite(yy)
    neg_inf = np.isneginf(yy)
    if np.any(finite):
        arg = z[None, :] + yy[finite][:, None]
        out[finite] = np.exp(logw[None, :] + _log_logistic(-arg)).sum(axis=1) / den
    if np.any(neg_inf):
        out[neg_inf] = np.sum(np.exp(logw)) / den
    return float(out[0]) if scalar else out


def _log_logistic(x):
    """log(1 / (1 + e^{-x}))."""
    return -np.logaddexp(0.0, -x)


@lru_cache(maxsize=64)
def _kernel_on_grid(sigma, llr_max, bins):
    k = gexit_kernel(sigma, GridSpec(llr_max, bins).centers)
    k.setflags(write=False)
    return k


def gexit_rows(param: ChannelParam, fin: np.ndarray, grid: GridSpec) -> np.ndarray:
    """GEXIT of each row of finite masses (the +inf atom contributes 0)."""
    if param.family == BSC:
        raise ValueError("no GEXIT kernel is provided for the BSC family")
    if param.family == BEC:
        return entropy_rows(fin, grid)
    sigma = param.value
    if sigma == 0.0:
        return np.zeros(len(fin))
    if math.isinf(sigma):
        # the Gaussian weight collapses onto z = 0
        return fin @ (2.0 * np.exp(_log_logistic(-grid.centers)))
    return fin @ _kernel_on_grid(sigma, grid.llr_max, grid.bins)


def gexit(param: ChannelParam, a: Density) -> float:
    """GEXIT functional G(c, a).

    For BAWGN this integrates ``a`` against :func:`gexit_kernel`.  For the BEC
    the kernel is the entropy kernel, so on erasure-type densities the value
    is the erasure probability.
    """
    return float(gexit_rows(param, a.mass[None, :], a.grid)[0])


__all__ = [
    "BEC", "BSC", "BAWGN", "FAMILIES", "ChannelParam", "binary_entropy",
    "channel_density", "channel_entropy", "param_from_entropy",
    "gexit_kernel", "gexit", "gexit_rows", "entropy",
]
