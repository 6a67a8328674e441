import math

import numpy as np
from numba import njit


@njit(cache=True)
def _union_support(ap, an, bp, bn):
    n = ap.shape[0]
    lo = 0
    while lo < n and ap[lo] == 0.0 and an[lo] == 0.0 and bp[lo] == 0.0 and bn[lo] == 0.0:
        lo += 1
    hi = n
    while hi > lo and ap[hi - 1] == 0.0 and an[hi - 1] == 0.0 and bp[hi - 1] == 0.0 and bn[hi - 1] == 0.0:
        hi -= 1
    return lo, hi


@njit(cache=True, fastmath=True)
def chk_pairs(ap, an, bp, bn, lo, frac, run_ptr, run_start, run_stop, same):
    """Pairwise tanh-rule combination on magnitude/sign splits.

    ``ap[r, i]`` / ``an[r, i]`` hold the mass at LLR ``+i*step`` / ``-i*step``.
    ``lo[i, j] + frac[i, j]`` is the output magnitude (in steps) of combining
    magnitudes ``i`` and ``j``; the table is symmetric, so only ``j >= i`` is
    visited and both orderings are folded into one term.  For ``j > i`` the
    cells ``run_start[q]:run_stop[q]`` (``q`` in ``run_ptr[i]:run_ptr[i+1]``)
    share the same ``lo``, which turns the scatter into dot products.
    """
    R, n = ap.shape
    outp = np.zeros((R, n + 1))
    outn = np.zeros((R, n + 1))
    for r in range(R):
        pa = ap[r]
        na = an[r]
        pb = bp[r]
        nb = bn[r]
        u0, u1 = _union_support(pa, na, pb, nb)
        for i in range(u0, u1):
            api = pa[i]
            ani = na[i]
            bpi = pb[i]
            bni = nb[i]
            if api == 0.0 and ani == 0.0 and bpi == 0.0 and bni == 0.0:
                continue
            s = api * bpi + ani * bni
            d = api * bni + ani * bpi
            k = lo[i, i]
            t = frac[i, i]
            outp[r, k] += s * (1.0 - t)
            outp[r, k + 1] += s * t
            outn[r, k] += d * (1.0 - t)
            outn[r, k + 1] += d * t
            ft = frac[i]
            for q in range(run_ptr[i], run_ptr[i + 1]):
                j0 = run_start[q]
                if j0 >= u1:
                    break
                j1 = min(run_stop[q], u1)
                k = lo[i, j0]
                s0 = 0.0
                s1 = 0.0
                d0 = 0.0
                d1 = 0.0
                if same:
                    for j in range(j0, j1):
                        t = ft[j]
                        s = 2.0 * (api * pa[j] + ani * na[j])
                        d = 2.0 * (api * na[j] + ani * pa[j])
                        s0 += s
                        s1 += s * t
                        d0 += d
                        d1 += d * t
                else:
                    for j in range(j0, j1):
                        t = ft[j]
                        s = api * pb[j] + ani * nb[j] + bpi * pa[j] + bni * na[j]
                        d = api * nb[j] + ani * pb[j] + bpi * na[j] + bni * pa[j]
                        s0 += s
                        s1 += s * t
                        d0 += d
                        d1 += d * t
                outp[r, k] += s0 - s1
                outp[r, k + 1] += s1
                outn[r, k] += d0 - d1
                outn[r, k + 1] += d1
    return outp, outn


@njit(cache=True)
def lin_conv(a, b):
    """Row-wise full linear convolution, skipping zero entries of ``a``."""
    R, n = a.shape
    m = b.shape[1]
    out = np.zeros((R, n + m - 1))
    for r in range(R):
        b0 = 0
        b1 = m
        while b0 < b1 and b[r, b0] == 0.0:
            b0 += 1
        while b1 > b0 and b[r, b1 - 1] == 0.0:
            b1 -= 1
        for i in range(n):
            ai = a[r, i]
            if ai == 0.0:
                continue
            for j in range(b0, b1):
                out[r, i + j] += ai * b[r, j]
    return out


@njit(cache=True)
def _check_messages(x, tptr, fexp, wptr, widx, wval, y):
    for t in range(tptr.shape[0] - 1):
        logs = 0.0
        dead = False
        for f in range(tptr[t], tptr[t + 1]):
            if fexp[f] == 0:
                continue
            acc = 0.0
            for q in range(wptr[f], wptr[f + 1]):
                s = widx[q]
                if s >= 0:
                    acc += wval[q] * x[s]
            if acc >= 1.0:
                dead = True
                break
            logs += fexp[f] * math.log1p(-acc)
        y[t] = 1.0 if dead else -math.expm1(logs)


@njit(cache=True)
def bec_step(eff, x, l, tptr, fexp, wptr, widx, wval, eptr, eidx, eval_):
    """One parallel-schedule update of erasure probabilities."""
    S = x.shape[0]
    y = np.empty(tptr.shape[0] - 1)
    _check_messages(x, tptr, fexp, wptr, widx, wval, y)
    out = np.empty(S)
    for i in range(S):
        acc = 0.0
        for q in range(eptr[i], eptr[i + 1]):
            acc += eval_[q] * y[eidx[q]]
        out[i] = eff[i] * acc ** (l - 1)
    return out


@njit(cache=True)
def bec_forward(eff, x0, l, tptr, fexp, wptr, widx, wval, eptr, eidx, eval_,
                max_iters, tol, zero_tol):
    """Iterate ``bec_step`` until decoded, stalled or out of iterations.

    Returns ``(x, iterations, code)`` with code 0 = all entries below
    ``zero_tol``, 1 = max change below ``tol``, 2 = ``max_iters`` reached.
    """
    S = x0.shape[0]
    x = x0.copy()
    y = np.empty(tptr.shape[0] - 1)
    for it in range(1, max_iters + 1):
        _check_messages(x, tptr, fexp, wptr, widx, wval, y)
        change = 0.0
        top = 0.0
        for i in range(S):
            acc = 0.0
            for q in range(eptr[i], eptr[i + 1]):
                acc += eval_[q] * y[eidx[q]]
            v = eff[i] * acc ** (l - 1)
            dv = abs(v - x[i])
            if dv > change:
                change = dv
            if v > top:
                top = v
            x[i] = v
        if top < zero_tol:
            return x, it, 0
        if change < tol:
            return x, it, 1
    return x, max_iters, 2
