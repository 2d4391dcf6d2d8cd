"""Influence-functional kernels Q1(t), Q2(t) and the golden-rule coherence factor.

    Q1(t) = int_0^inf J(w)/w^2 sin(w t) dw
    Q2(t) = int_0^inf J(w)/w^2 (1 - cos(w t)) coth(w / 2T) dw
    coherence(t) = cos(Q1/pi) exp(-Q2/pi)

Numeric evaluation splits the frequency axis at the zeros of the oscillating
factor.  When the whole support needs at most ``DIRECT_PANELS`` half-periods
every panel is integrated and summed; otherwise the first ``ACCEL_PANELS``
panels are integrated and their alternating partial sums are extrapolated
with Wynn's epsilon algorithm.  Each density in a composite is handled on its
own frequency scale, and kernels add over parts.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import quadrature, spectral
from .errors import InvalidArgument, UnsupportedMode

ANALYTIC = "analytic-ohmic-expcut"
NUMERIC = "numeric"
MODES = (ANALYTIC, NUMERIC)

DIRECT_PANELS = 128
ACCEL_PANELS = 40
KERNEL_EPSABS = 1e-12
KERNEL_EPSREL = 1e-12
_MAX_INTERVALS = 200_000


def _as_times(t):
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("time must be finite")
    if np.any(arr < 0):
        raise InvalidArgument("time must be non-negative")
    return arr


def _subdivide(lo, hi, owner, h):
    """Split every [lo_i, hi_i] into ceil(width / h) equal pieces."""
    m = np.maximum(1, np.ceil((hi - lo) / h).astype(int))
    idx = np.repeat(np.arange(lo.size), m)
    # position of each piece inside its parent
    starts = np.cumsum(m) - m
    pos = np.arange(idx.size) - np.repeat(starts, m)
    width = (hi - lo) / m
    a = lo[idx] + pos * width[idx]
    b = np.where(pos == m[idx] - 1, hi[idx], a + width[idx])
    return a, b, owner[idx], idx


def _sum_pieces(f, a, b, tvals, idx, n_parent):
    vals, _ = quadrature.integrate_intervals(
        f, a, b, args=(tvals,), epsabs=KERNEL_EPSABS, epsrel=KERNEL_EPSREL)
    return np.bincount(idx, weights=vals, minlength=n_parent)


def _geometric_intervals(start, stop):
    """Per-row breakpoints start, 2 start, 4 start, ... capped at stop."""
    n = np.maximum(1, np.ceil(np.log2(stop / start)).astype(int))
    owner = np.repeat(np.arange(start.size), n)
    j = np.arange(owner.size) - np.repeat(np.cumsum(n) - n, n)
    lo = start[owner] * 2.0**j
    hi = np.minimum(2.0 * lo, stop[owner])
    keep = hi > lo
    return lo[keep], hi[keep], owner[keep]


# ------------------------------------------------------------ integrands

def _q1_integrand(spec):
    def f(w, t):
        return spectral.j_over_omega(spec, w) * t * np.sinc(w * t / np.pi)
    return f


def _omega_coth(w, temperature):
    """w coth(w / 2T); reduces to w at T = 0."""
    if temperature == 0:
        return w
    return 2.0 * temperature * spectral.x_coth_x(w / (2.0 * temperature))


def _q2_integrand(spec, temperature):
    def f(w, t):
        s = np.sinc(w * t / (2 * np.pi))
        return spectral.j_over_omega(spec, w) * _omega_coth(w, temperature) * 0.5 * t * t * s * s
    return f


def _g_integrand(spec, temperature, oscillate=False):
    """coth(w/2T) J(w)/w^2, optionally times cos(w t)."""
    def f(w, t):
        g = spectral.j_over_omega(spec, w) * _omega_coth(w, temperature) / (w * w)
        return g * np.cos(w * t) if oscillate else g
    return f


def _support(spec):
    if spec.family == spectral.TABULATED:
        return spec.table[0][0], spec.table[-1][0]
    return 0.0, spec.split


def _piece_width(spec):
    if spec.family == spectral.TABULATED:
        tw = np.array([p[0] for p in spec.table])
        return max(float(np.min(np.diff(tw))) if tw.size > 1 else spec.scale, 1e-300)
    return 0.5 * spec.scale


def _g_tail(spec, temperature, w_split):
    """int_{w_split}^inf coth J/w^2 dw for the exponential families."""
    if spec.family == spectral.TABULATED:
        return 0.0
    if spec.family == spectral.OHMIC:
        tail = 2 * np.pi * spec.alpha * special.exp1(w_split / spec.xi0)
    else:
        x = w_split / spec.xi0
        tail = spec.alpha * (1 + x) * math.exp(-x)
    if temperature > 0:
        tail *= 1.0 / math.tanh(w_split / (2 * temperature))
    return tail


def _chunks(t, per_t):
    size = max(1, _MAX_INTERVALS // max(per_t, 1))
    for start in range(0, t.size, size):
        yield slice(start, min(start + size, t.size))


def _panel_direct(f, spec, t):
    """Integrate f over the full support, cut into half-periods of width pi/t."""
    lo_s, hi_s = _support(spec)
    h = _piece_width(spec)
    out = np.zeros(t.size)
    n_panels = np.maximum(1, np.ceil(hi_s * t / np.pi)).astype(int)
    per_t = int(n_panels.max()) + int(math.ceil((hi_s - lo_s) / h))
    for sl in _chunks(t, per_t):
        tt = t[sl]
        npan = n_panels[sl]
        owner = np.repeat(np.arange(tt.size), npan)
        k = np.arange(owner.size) - np.repeat(np.cumsum(npan) - npan, npan)
        step = np.pi / tt[owner]
        lo = k * step
        hi = np.minimum(lo + step, hi_s)
        lo = np.maximum(lo, lo_s)
        keep = hi > lo
        lo, hi, owner = lo[keep], hi[keep], owner[keep]
        a, b, own, idx = _subdivide(lo, hi, owner, h)
        vals = _sum_pieces(f, a, b, tt[own], idx, lo.size)
        out[sl] = np.bincount(owner, weights=vals, minlength=tt.size)
    return out


def _panel_accel(f, spec, t, offset=0.0):
    """Extrapolated sum of the first ACCEL_PANELS half-period panels from offset/t."""
    h = _piece_width(spec)
    out = np.zeros(t.size)
    for sl in _chunks(t, ACCEL_PANELS * 4):
        tt = t[sl]
        owner = np.repeat(np.arange(tt.size), ACCEL_PANELS)
        k = np.tile(np.arange(ACCEL_PANELS), tt.size)
        step = np.pi / tt[owner]
        lo = offset / tt[owner] + k * step
        hi = lo + step
        a, b, own, idx = _subdivide(lo, hi, owner, h)
        vals = _sum_pieces(f, a, b, tt[own], idx, lo.size)
        partial = np.cumsum(vals.reshape(tt.size, ACCEL_PANELS), axis=1)
        est, _ = quadrature.wynn_epsilon(partial)
        out[sl] = est
    return out


def _needs_accel(spec, t):
    if spec.family == spectral.TABULATED:
        return np.zeros(t.shape, dtype=bool)
    return spec.split * t / np.pi > DIRECT_PANELS


def q1_numeric_leaf(spec, t):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    pos = t > 0
    if not np.any(pos):
        return out
    tp = t[pos]
    res = np.zeros(tp.size)
    f = _q1_integrand(spec)
    acc = _needs_accel(spec, tp)
    if np.any(~acc):
        res[~acc] = _panel_direct(f, spec, tp[~acc])
    if np.any(acc):
        res[acc] = _panel_accel(f, spec, tp[acc])
    out[pos] = res
    return out


def q2_numeric_leaf(spec, temperature, t):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    pos = t > 0
    if not np.any(pos):
        return out
    tp = t[pos]
    res = np.zeros(tp.size)
    acc = _needs_accel(spec, tp)
    full = _q2_integrand(spec, temperature)
    if np.any(~acc):
        res[~acc] = _panel_direct(full, spec, tp[~acc])
    if np.any(acc):
        ta = tp[acc]
        a = np.pi / (2 * ta)
        h = _piece_width(spec)
        # [0, a]: the full non-negative integrand up to the first zero of cos
        lo0 = np.zeros(ta.size)
        x0, x1, own, idx = _subdivide(lo0, a, np.arange(ta.size), h)
        head = _sum_pieces(full, x0, x1, ta[own], idx, ta.size)
        # [a, W]: non-oscillatory part on a geometric grid, analytic tail beyond
        w_split = spec.split
        lo, hi, own = _geometric_intervals(a, np.full(ta.size, w_split))
        x0, x1, own2, idx = _subdivide(lo, hi, own, 4 * spec.scale)
        vals = _sum_pieces(_g_integrand(spec, temperature), x0, x1, ta[own2], idx, lo.size)
        flat = np.bincount(own, weights=vals, minlength=ta.size)
        flat += _g_tail(spec, temperature, w_split)
        # [a, inf): cosine part, alternating panels between zeros of cos
        osc = _panel_accel(_g_integrand(spec, temperature, oscillate=True), spec, ta,
                           offset=np.pi / 2)
        res[acc] = head + flat - osc
    out[pos] = res
    return out


# --------------------------------------------------------------- evaluator

@dataclass(eq=False)
class BathKernels:
    """Q1/Q2 evaluator for a bath at a given temperature.

    ``mode="analytic-ohmic-expcut"`` uses the closed forms of the ohmic
    exponential-cutoff family; ``mode="numeric"`` integrates any density.
    Results are cached per time value; the cache never changes a result.
    """

    spec: spectral.SpectralDensity
    temperature: float = 0.0
    mode: str = NUMERIC
    cache: bool = True
    _store: dict = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise UnsupportedMode(f"unknown kernel mode {self.mode!r}")
        if not (math.isfinite(self.temperature) and self.temperature >= 0):
            raise InvalidArgument("temperature must be finite and >= 0")
        if self.mode == ANALYTIC and self.spec.family != spectral.OHMIC:
            raise UnsupportedMode("analytic kernels exist only for the ohmic exponential-cutoff family")

    @classmethod
    def for_spec(cls, spec, temperature=0.0, **kw):
        """Analytic kernels when the closed forms apply, numeric otherwise."""
        mode = ANALYTIC if (spec.family == spectral.OHMIC and temperature == 0) else NUMERIC
        return cls(spec, temperature, mode, **kw)

    @property
    def frequency_scales(self):
        return [p.scale for p in self.spec.leaves()]

    def describe(self):
        return {"spec": self.spec.describe(), "temperature": self.temperature, "mode": self.mode}

    # -- raw evaluation
    def _compute(self, t):
        if self.mode == ANALYTIC:
            a, x = self.spec.alpha, self.spec.xi0 * t
            q1 = 2 * np.pi * a * np.arctan(x)
            q2 = np.pi * a * np.log1p(x * x) if self.temperature == 0 else None
            return q1, q2
        q1 = np.zeros(t.shape)
        q2 = np.zeros(t.shape)
        for leaf in self.spec.leaves():
            q1 = q1 + q1_numeric_leaf(leaf, t)
            q2 = q2 + q2_numeric_leaf(leaf, self.temperature, t)
        return q1, q2

    def values(self, t):
        """(Q1(t), Q2(t)) for scalar or array t."""
        arr = _as_times(t)
        flat = arr.ravel()
        if self.mode == ANALYTIC and self.temperature > 0:
            raise UnsupportedMode("analytic Q2 is available only at zero temperature")
        if not self.cache or self.mode == ANALYTIC:
            q1, q2 = self._compute(flat)
        else:
            q1 = np.empty(flat.size)
            q2 = np.empty(flat.size)
            with self._lock:
                hits = [self._store.get(v) for v in flat.tolist()]
            miss = np.array([h is None for h in hits], dtype=bool)
            for i, h in enumerate(hits):
                if h is not None:
                    q1[i], q2[i] = h
            if np.any(miss):
                uniq, inv = np.unique(flat[miss], return_inverse=True)
                m1, m2 = self._compute(uniq)
                q1[miss], q2[miss] = m1[inv], m2[inv]
                with self._lock:
                    for v, a, b in zip(uniq.tolist(), m1.tolist(), m2.tolist()):
                        self._store[v] = (a, b)
        q1 = q1.reshape(arr.shape)
        q2 = q2.reshape(arr.shape)
        if arr.ndim == 0:
            return float(q1), float(q2)
        return q1, q2

    def q1(self, t):
        arr = _as_times(t)
        if self.mode == ANALYTIC:
            out = 2 * np.pi * self.spec.alpha * np.arctan(self.spec.xi0 * arr)
            return float(out) if arr.ndim == 0 else out
        if self.cache:
            return self.values(arr)[0]
        out = np.zeros(arr.shape)
        for leaf in self.spec.leaves():
            out = out + q1_numeric_leaf(leaf, arr.ravel()).reshape(arr.shape)
        return float(out) if arr.ndim == 0 else out

    def q2(self, t):
        return self.values(t)[1]

    def coherence(self, t):
        """cos(Q1/pi) exp(-Q2/pi)."""
        q1, q2 = self.values(t)
        out = np.cos(np.asarray(q1) / np.pi) * np.exp(-np.asarray(q2) / np.pi)
        return float(out) if np.ndim(out) == 0 else out

    def clear_cache(self):
        with self._lock:
            self._store.clear()


def q1(k, t):
    return k.q1(t)


def q2(k, t):
    return k.q2(t)


def coherence_factor(k, t):
    return k.coherence(t)


def kernel_table(k, times):
    """Rows of (t, Q1, Q2, coherence) for a debug dump."""
    times = _as_times(times)
    q1v, q2v = k.values(times)
    coh = np.cos(q1v / np.pi) * np.exp(-q2v / np.pi)
    return np.column_stack([times, q1v, q2v, coh])
