import numpy as np


def chk_pairs(ap, an, bp, bn, lo, frac, run_ptr, run_start, run_stop, same):
    R, n = ap.shape
    lo_flat = lo.ravel().astype(np.intp)
    t = frac.ravel()
    outp = np.zeros((R, n + 1))
    outn = np.zeros((R, n + 1))
    for r in range(R):
        s = (np.outer(ap[r], bp[r]) + np.outer(an[r], bn[r])).ravel()
        d = (np.outer(ap[r], bn[r]) + np.outer(an[r], bp[r])).ravel()
        outp[r] = (np.bincount(lo_flat, s * (1.0 - t), minlength=n + 1)
                   + np.bincount(lo_flat + 1, s * t, minlength=n + 1))[:n + 1]
        outn[r] = (np.bincount(lo_flat, d * (1.0 - t), minlength=n + 1)
                   + np.bincount(lo_flat + 1, d * t, minlength=n + 1))[:n + 1]
    return outp, outn


def lin_conv(a, b):
    R, n = a.shape
    m = b.shape[1]
    out = np.zeros((R, n + m - 1))
    for r in range(R):
        for i in np.flatnonzero(a[r]):
            out[r, i:i + m] += a[r, i] * b[r]
    return out


def _dense(ptr, idx, val, n_rows, n_cols):
    mat = np.zeros((n_rows, n_cols))
    for row in range(n_rows):
        for q in range(ptr[row], ptr[row + 1]):
            if idx[q] >= 0:
                mat[row, idx[q]] += val[q]
    return mat


def _compile(x, tptr, fexp, wptr, widx, wval, eptr, eidx, eval_):
    S = x.shape[0]
    T = tptr.shape[0] - 1
    F = fexp.shape[0]
    W = _dense(wptr, widx, wval, F, S)
    E = _dense(eptr, eidx, eval_, S, T)
    owner = np.repeat(np.arange(T), np.diff(tptr))
    return W, E, owner, T


def _checks(W, fexp, owner, T, x):
    acc = np.minimum(W @ x, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(fexp > 0, fexp * np.log1p(-acc), 0.0)
    logs = np.bincount(owner, terms, minlength=T)
    return -np.expm1(logs)


def bec_step(eff, x, l, tptr, fexp, wptr, widx, wval, eptr, eidx, eval_):
    W, E, owner, T = _compile(x, tptr, fexp, wptr, widx, wval, eptr, eidx, eval_)
    return eff * (E @ _checks(W, fexp, owner, T, x)) ** (l - 1)


def bec_forward(eff, x0, l, tptr, fexp, wptr, widx, wval, eptr, eidx, eval_,
                max_iters, tol, zero_tol):
    W, E, owner, T = _compile(x0, tptr, fexp, wptr, widx, wval, eptr, eidx, eval_)
    x = x0.copy()
    for it in range(1, max_iters + 1):
        new = eff * (E @ _checks(W, fexp, owner, T, x)) ** (l - 1)
        change = np.max(np.abs(new - x))
        x = new
        if x.max() < zero_tol:
            return x, it, 0
        if change < tol:
            return x, it, 1
    return x, max_iters, 2
