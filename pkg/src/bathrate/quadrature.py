"""Vectorized adaptive Gauss-Kronrod quadrature and series acceleration.

Everything here works on *batches* of intervals at once: an integrand is
called as ``f(x, *args)`` with ``x`` of shape ``(n, 15)`` and every entry of
``args`` of shape ``(n, 1)``, so a single numpy call evaluates all nodes of
all intervals.  The oscillatory integrals of the kernel and rate modules are
built from these pieces: split at the zeros of the oscillating factor,
integrate each half-period panel adaptively, and accelerate the alternating
sequence of partial sums with Wynn's epsilon algorithm.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import QuadratureWarning

# 15-point Kronrod rule with its embedded 7-point Gauss rule (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes in the ascending layout.
GAUSS_WEIGHTS[1::2] = np.concatenate([_WG[:-1], _WG[::-1]])

_EPS = np.finfo(float).eps


def _args_column(args, n):
    out = []
    for a in args:
        a = np.asarray(a)
        if a.ndim == 0:
            out.append(a)
        else:
            out.append(a.reshape(n, 1))
    return out


def gk15(f, a, b, args=()):
    """Apply the 15-point Kronrod rule to every interval ``[a_i, b_i]``.

    Returns ``(result, abserr)`` using the QUADPACK error heuristic.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = center[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(x, *_args_column(args, n)), dtype=float)
    fx = np.broadcast_to(fx, x.shape)
    # row-wise reductions keep each interval's result independent of the batch
    rk = (fx * KRONROD_WEIGHTS).sum(axis=1)
    rg = (fx * GAUSS_WEIGHTS).sum(axis=1)
    resabs = (np.abs(fx) * KRONROD_WEIGHTS).sum(axis=1)
    mean = 0.5 * rk
    resasc = (np.abs(fx - mean[:, None]) * KRONROD_WEIGHTS).sum(axis=1)
    ah = np.abs(half)
    result = rk * half
    err = np.abs((rk - rg) * half)
    resasc = resasc * ah
    resabs = resabs * ah
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    err = np.where(resabs > np.finfo(float).tiny / (50 * _EPS),
                   np.maximum(50 * _EPS * resabs, err), err)
    return result, err


def integrate_intervals(f, a, b, args=(), epsabs=1e-12, epsrel=1e-12,
                        max_rounds=60):
    """Adaptively integrate ``f`` over each interval of a batch.

    Each interval is bisected until every piece meets
    ``err <= max(epsabs * width_fraction, epsrel * |piece|)``.  Returns the
    integral and the accumulated error estimate per input interval.  Results
    for one interval do not depend on which other intervals share the batch.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n = a.shape[0]
    args = [np.broadcast_to(np.asarray(x, dtype=float), (n,)).copy()
            if np.ndim(x) else np.asarray(x, dtype=float) for x in args]
    total = np.zeros(n)
    total_err = np.zeros(n)
    if n == 0:
        return total, total_err
    width0 = np.abs(b - a)
    owner = np.arange(n)
    cur_a, cur_b = a, b
    cur_args = args
    for _ in range(max_rounds):
        res, err = gk15(f, cur_a, cur_b, cur_args)
        w = np.abs(cur_b - cur_a)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(width0[owner] > 0, w / width0[owner], 1.0)
        tol = np.maximum(epsabs * frac, epsrel * np.abs(res))
        ok = (err <= tol) | (w <= 64 * _EPS * np.maximum(np.abs(cur_a), np.abs(cur_b)))
        if np.any(ok):
            total += np.bincount(owner[ok], weights=res[ok], minlength=n)
            total_err += np.bincount(owner[ok], weights=err[ok], minlength=n)
        bad = ~ok
        if not np.any(bad):
            return total, total_err
        ba, bb = cur_a[bad], cur_b[bad]
        mid = 0.5 * (ba + bb)
        cur_a = np.concatenate([ba, mid])
        cur_b = np.concatenate([mid, bb])
        owner = np.concatenate([owner[bad], owner[bad]])
        cur_args = [np.concatenate([x[bad], x[bad]]) if np.ndim(x) else x
                    for x in cur_args]
        # keep each owner's children contiguous and ordered left to right
        order = np.lexsort((cur_a, owner))
        cur_a, cur_b, owner = cur_a[order], cur_b[order], owner[order]
        cur_args = [x[order] if np.ndim(x) else x for x in cur_args]
    res, err = gk15(f, cur_a, cur_b, cur_args)
    total += np.bincount(owner, weights=res, minlength=n)
    total_err += np.bincount(owner, weights=err, minlength=n)
    warnings.warn("adaptive quadrature hit its subdivision limit",
                  QuadratureWarning, stacklevel=2)
    return total, total_err


def integrate(f, a, b, breakpoints=None, epsabs=1e-12, epsrel=1e-12):
    """Scalar convenience wrapper: integrate a vectorized ``f(x)`` on [a, b]."""
    pts = [a] + sorted(p for p in (breakpoints or ()) if a < p < b) + [b]
    lo = np.array(pts[:-1], dtype=float)
    hi = np.array(pts[1:], dtype=float)
    vals, errs = integrate_intervals(lambda x: f(x), lo, hi,
                                     epsabs=epsabs / len(lo), epsrel=epsrel)
    return float(vals.sum()), float(errs.sum())


def geometric_breaks(lo, hi, first):
    """Breakpoints ``lo, lo+first, lo+2 first, lo+4 first, ...`` up to ``hi``."""
    pts = [lo]
    step = first
    while lo + step < hi:
        pts.append(lo + step)
        step *= 2.0
    pts.append(hi)
    return np.array(pts)


def wynn_epsilon(partial_sums):
    """Extrapolate the limit of each row of ``partial_sums`` (shape (n, K)).

    Returns ``(estimate, error)``; the estimate is taken from the even column
    of the epsilon table whose own convergence is best, the error is a
    conservative bound built from neighbouring table entries.
    """
    s = np.atleast_2d(np.asarray(partial_sums, dtype=float))
    n, k = s.shape
    est = s[:, -1].copy()
    err = np.abs(s[:, -1] - s[:, -2]) if k > 1 else np.full(n, np.inf)
    if k < 3:
        return est, err
    prev2 = np.zeros((n, k + 1))
    prev = s
    prev_even_last = s[:, -1]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for col in range(1, k):
            diff = prev[:, 1:] - prev[:, :-1]
            new = prev2[:, 1:prev.shape[1]] + 1.0 / diff
            prev2, prev = prev, new
            if col % 2 == 0 and new.shape[1] >= 2:
                cand = new[:, -1]
                cand_err = (np.abs(new[:, -1] - new[:, -2])
                            + np.abs(cand - prev_even_last))
                good = np.isfinite(cand) & np.isfinite(cand_err) & (cand_err < err)
                est = np.where(good, cand, est)
                err = np.where(good, cand_err, err)
                prev_even_last = np.where(np.isfinite(cand), cand, prev_even_last)
            if not np.any(np.isfinite(new)):
                break
    err = np.maximum(err, 16 * _EPS * np.abs(est))
    return est, err
