"""Coupled ensemble descriptions and their compiled edge graphs.

Every ensemble variant is reduced to the same bipartite bookkeeping that the
density engine and the scalar BEC engine consume:

* *sections* are the variable positions, each with a known fraction kappa_i;
* *edge types* describe what a check node sends back along one edge.  A type
  is a product of factors ``(socket weights, multiplicity)``: the outgoing
  message is the check-combination of ``multiplicity`` independent incoming
  messages, each drawn from the socket-weighted mixture of section messages.
  Socket index -1 stands for a position outside the chain (reads Delta_inf);
* *edge incidence* ``E[i, t]`` is the probability that an edge of a variable
  in section ``i`` lands in a check of type ``t``.

For the standard line ensemble with check nodes at positions [-L, L+w-1]
the variable update reads
``x_i = c * ( (1/w) sum_j ((1/w) sum_k x_{i+j-k}) ^[r-1] ) ^(l-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import SpecError

LINE = "line"
CIRCULAR = "circular"
ONE_SIDED = "one_sided"
UNCOUPLED = "uncoupled"
TOPOLOGIES = (LINE, CIRCULAR, ONE_SIDED, UNCOUPLED)


@dataclass(frozen=True)
class CoupledSpec:
    """An (l, r) ensemble coupled along a line, a circle or a one-sided line.

    ``L`` is used by the line topology (positions -L..L), ``K`` by the
    circular and one-sided ones (positions 0..K-1).  ``kappa`` holds the
    known fraction per section and ``alpha`` the fraction of position-0
    checks merged into position-1 checks (one-sided only).
    """

    l: int
    r: int
    L: int = 1
    w: int = 1
    topology: str = LINE
    K: int | None = None
    alpha: float = 0.0
    kappa: tuple | None = None

    def __post_init__(self):
        if self.kappa is not None:
            object.__setattr__(self, "kappa", tuple(float(k) for k in self.kappa))
        self.validate()

    @classmethod
    def uncoupled(cls, l, r):
        return cls(l, r, L=0, w=1, topology=UNCOUPLED)

    @classmethod
    def line(cls, l, r, L, w, kappa=None):
        return cls(l, r, L=L, w=w, topology=LINE, kappa=kappa)

    @classmethod
    def circular(cls, l, r, K, w, kappa=None):
        return cls(l, r, L=0, w=w, topology=CIRCULAR, K=K, kappa=kappa)

    @classmethod
    def one_sided(cls, l, r, K, w, alpha=0.0, kappa=None):
        return cls(l, r, L=0, w=w, topology=ONE_SIDED, K=K, alpha=alpha, kappa=kappa)

    def validate(self):
        if self.topology not in TOPOLOGIES:
            raise SpecError(f"unknown topology {self.topology!r}")
        if int(self.l) != self.l or self.l < 2:
            raise SpecError(f"variable degree must be an integer >= 2, got {self.l}")
        if int(self.r) != self.r or self.r <= self.l:
            raise SpecError(f"check degree must be an integer > l, got {self.r}")
        if int(self.w) != self.w or self.w < 1:
            raise SpecError(f"window must be an integer >= 1, got {self.w}")
        if self.topology == LINE:
            # w <= 2L is only needed by the closed-form design rate
            if self.L < 1:
                raise SpecError(f"line topology needs L >= 1, got {self.L}")
        if self.topology in (CIRCULAR, ONE_SIDED):
            if self.K is None or int(self.K) != self.K or self.K < 1:
                raise SpecError(f"{self.topology} topology needs an integer K >= 1")
            if self.w > self.K:
                raise SpecError(f"{self.topology} topology needs w <= K, got w={self.w}, K={self.K}")
        if self.topology == UNCOUPLED and self.w != 1:
            raise SpecError("uncoupled ensemble has w = 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise SpecError(f"merge fraction must lie in [0, 1], got {self.alpha}")
        if self.alpha > 0 and (self.topology != ONE_SIDED or self.w < 2):
            raise SpecError("check merging needs the one-sided topology with w >= 2")
        if self.kappa is not None:
            if len(self.kappa) != self.sections:
                raise SpecError(f"kappa has {len(self.kappa)} entries, expected {self.sections}")
            if any(not 0.0 <= k <= 1.0 for k in self.kappa):
                raise SpecError("kappa entries must lie in [0, 1]")
            if all(k == 1.0 for k in self.kappa):
                raise SpecError("kappa cannot freeze every section")

    @property
    def sections(self) -> int:
        if self.topology == LINE:
            return 2 * self.L + 1
        if self.topology == UNCOUPLED:
            return 1
        return int(self.K)

    @property
    def positions(self) -> np.ndarray:
        if self.topology == LINE:
            return np.arange(-self.L, self.L + 1)
        return np.arange(self.sections)

    def kappa_vector(self) -> np.ndarray:
        if self.kappa is None:
            return np.zeros(self.sections)
        return np.array(self.kappa, dtype=np.float64)

    def with_kappa(self, kappa):
        return CoupledSpec(self.l, self.r, self.L, self.w, self.topology, self.K, self.alpha,
                           None if kappa is None else tuple(kappa))

    def describe(self) -> dict:
        d = {"l": self.l, "r": self.r, "w": self.w, "topology": self.topology}
        if self.topology == LINE:
            d["L"] = self.L
        if self.topology in (CIRCULAR, ONE_SIDED):
            d["K"] = self.K
        if self.topology == ONE_SIDED:
            d["alpha"] = self.alpha
        if self.kappa is not None:
            d["kappa"] = list(self.kappa)
        return d


@dataclass
class EdgeGraph:
    """CSR form of the edge-type bookkeeping (see module docstring)."""

    sections: int
    l: int
    tptr: np.ndarray      # type t owns factors tptr[t]:tptr[t+1]
    fexp: np.ndarray      # multiplicity of each factor
    wptr: np.ndarray      # factor f owns sockets wptr[f]:wptr[f+1]
    widx: np.ndarray      # section index or -1
    wval: np.ndarray
    eptr: np.ndarray      # section i owns incidences eptr[i]:eptr[i+1]
    eidx: np.ndarray
    eval: np.ndarray
    kappa: np.ndarray
    labels: list = field(default_factory=list)

    @property
    def types(self) -> int:
        return len(self.tptr) - 1

    def arrays(self):
        return (self.tptr, self.fexp, self.wptr, self.widx, self.wval,
                self.eptr, self.eidx, self.eval)


def _apply_profile(factors_of, incid, profile, r):
    """Split each single-factor check type by a per-position degree profile."""
    if not profile:
        return factors_of, incid
    new_types, mapping = [], {}
    for t, factors in enumerate(factors_of):
        key, facs = factors
        pos = key[1] if isinstance(key, tuple) and key[0] == "chk" else None
        dist = profile.get(pos) if pos is not None else None
        if dist is None:
            mapping[t] = [(len(new_types), 1.0)]
            new_types.append(factors)
            continue
        if len(facs) != 1:
            raise SpecError("degree profiles apply to single-factor check types only")
        total = sum(dist.values())
        if abs(total - 1.0) > 1e-12 or any(v < 0 for v in dist.values()):
            raise SpecError(f"degree profile at position {pos} must be a distribution")
        mapping[t] = []
        for d, p in sorted(dist.items()):
            if int(d) != d or d < 1:
                raise SpecError(f"check degree {d} in profile is not a positive integer")
            if p == 0:
                continue
            mapping[t].append((len(new_types), p))
            new_types.append(((key[0], pos, int(d)), [(facs[0][0], int(d) - 1)]))
    new_incid = []
    for row in incid:
        out = []
        for t, e in row:
            out.extend((nt, e * p) for nt, p in mapping[t])
        new_incid.append(out)
    return new_types, new_incid


def compile_graph(spec: CoupledSpec, check_profile: Mapping | None = None) -> EdgeGraph:
    """Build the edge graph of ``spec``.

    ``check_profile`` optionally maps a check position to an edge-perspective
    degree distribution ``{degree: probability}`` replacing the regular
    degree ``r`` there (line, circular and uncoupled topologies).
    """
    l, r, w = spec.l, spec.r, spec.w
    S = spec.sections
    types = []     # (label, [(sockets [(section, weight)], mult)])
    incid = [[] for _ in range(S)]

    if spec.topology == UNCOUPLED:
        types.append((("chk", 0), [([(0, 1.0)], r - 1)]))
        incid[0].append((0, 1.0))
    elif spec.topology == LINE:
        L = spec.L
        first = -L
        for p in range(-L, L + w):
            sockets = []
            for k in range(w):
                v = p - k
                sockets.append((v - first if -L <= v <= L else -1, 1.0 / w))
            types.append((("chk", p), [(sockets, r - 1)]))
        for i in range(S):
            for j in range(w):
                incid[i].append((i + j, 1.0 / w))
    elif spec.topology == CIRCULAR:
        K = spec.K
        for p in range(K):
            sockets = [((p - k) % K, 1.0 / w) for k in range(w)]
            types.append((("chk", p), [(sockets, r - 1)]))
        for i in range(K):
            for j in range(w):
                incid[i].append(((i + j) % K, 1.0 / w))
    else:
        types, incid = _one_sided(spec)

    if check_profile:
        if spec.topology == ONE_SIDED:
            raise SpecError("degree profiles are not supported for the one-sided topology")
        types, incid = _apply_profile(types, incid, dict(check_profile), r)

    tptr, fexp, wptr, widx, wval = [0], [], [0], [], []
    for _, facs in types:
        for sockets, mult in facs:
            fexp.append(mult)
            for s, v in sockets:
                widx.append(s)
                wval.append(v)
            wptr.append(len(widx))
        tptr.append(len(fexp))
    eptr, eidx, evals = [0], [], []
    for row in incid:
        for t, e in row:
            eidx.append(t)
            evals.append(e)
        eptr.append(len(eidx))
    i64 = np.int64
    return EdgeGraph(
        sections=S, l=l,
        tptr=np.array(tptr, i64), fexp=np.array(fexp, i64),
        wptr=np.array(wptr, i64), widx=np.array(widx, i64), wval=np.array(wval, np.float64),
        eptr=np.array(eptr, i64), eidx=np.array(eidx, i64), eval=np.array(evals, np.float64),
        kappa=spec.kappa_vector(), labels=[lab for lab, _ in types],
    )


def _one_sided(spec):
    """Standard left boundary, loss-free right boundary, optional merging.

    Check positions 0..K-1 are the usual ones (sockets left of position 0
    read Delta_inf).  Every edge that would reach a check position >= K goes
    to a single pool of degree-r checks at position K whose sockets come
    from section K-m with probability 2(w-m)/(w(w-1)).

    With merging (alpha > 0) the checks at positions 0 and 1 are taken with
    their literal degrees, r/w sockets per reachable section (2 and 4 for
    (3, 6, w=3)).  A fraction alpha of the position-0 checks is merged into
    position-1 checks, giving nodes with 2r/w sockets on section 0 and r/w
    on section 1.  What an edge sees then depends on the section it leaves
    from, so these checks get one edge type per source section.
    """
    r, w, K, alpha = spec.r, spec.w, spec.K, spec.alpha
    types = []
    index = {}

    def window(p):
        return [((p - k) if 0 <= p - k < K else -1, 1.0 / w) for k in range(w)]

    for p in range(K):
        index[p] = len(types)
        types.append((("chk", p), [(window(p), r - 1)]))
    if w > 1:
        index["end"] = len(types)
        norm = w * (w - 1) / 2.0
        tail = [(K - m, (w - m) / norm) for m in range(1, w)]
        types.append((("end", K), [(tail, r - 1)]))
    if alpha > 0:
        if r % w:
            raise SpecError("check merging needs w to divide r")
        d = r // w

        def fixed(n0, n1):
            return [(f, n) for f, n in (([(0, 1.0)], n0), ([(1, 1.0)], n1)) if n > 0]

        for key, facs in ((("u0", 0), fixed(d - 1, 0)),
                          (("u1", 0), fixed(d - 1, d)), (("u1", 1), fixed(d, d - 1)),
                          (("m", 0), fixed(2 * d - 1, d)), (("m", 1), fixed(2 * d, d - 1))):
            index[key] = len(types)
            types.append((("fixed",) + key, facs))

    incid = [[] for _ in range(K)]
    for i in range(K):
        for j in range(w):
            p = i + j
            if p >= K:
                incid[i].append((index["end"], 1.0 / w))
            elif p <= 1 and alpha > 0:
                plain = index[("u0", i)] if p == 0 else index[("u1", i)]
                incid[i].append((plain, (1.0 - alpha) / w))
                incid[i].append((index[("m", i)], alpha / w))
            else:
                incid[i].append((index[p], 1.0 / w))
    return types, incid


__all__ = [
    "LINE", "CIRCULAR", "ONE_SIDED", "UNCOUPLED", "TOPOLOGIES",
    "SpecError", "CoupledSpec", "EdgeGraph", "compile_graph",
]
