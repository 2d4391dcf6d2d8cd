"""Relaxation rates of a biased two-level system.

The golden-rule rate is

    Gamma(xi) = Delta^2 int_0^inf cos(xi t) cos(Q1(t)/pi) exp(-Q2(t)/pi) dt,

evaluated numerically for any bath.  For the ohmic exponential-cutoff bath
with alpha = 1/2 at T = 0 it reduces to the closed form
``pi Delta^2 / (2 xi0) * exp(-|xi| / xi0)``, the same exponential law as the
spin-bath reference rates ``Delta^2 / xi0 * exp(-|xi| / xi0)`` (optionally
with Gamma2 in place of xi0).
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__, quadrature, spectral
from .errors import (BathrateError, DivergenceError, InvalidArgument,
                     ValidityWarning)
from .kernels import BathKernels

GOLDEN_RULE = "golden-rule-numeric"
ANALYTIC = "analytic-eq26"
SPIN_BATH_EQ9 = "spin-bath-eq9"
SPIN_BATH_EQ10 = "spin-bath-eq10"
ED_ORACLE = "ed-oracle"
STOCHASTIC = "stochastic"
METHODS = (GOLDEN_RULE, ANALYTIC, SPIN_BATH_EQ9, SPIN_BATH_EQ10, ED_ORACLE, STOCHASTIC)

RATE_EPSREL = 1e-11
RATE_EPSABS = 1e-13           # in units of 1 / (slowest bath frequency)
RATE_PANELS = 40
COHERENCE_FLOOR = 1e-14
HIGHFREQ_CUTOFF_FACTOR = 500.0

# Multiplier of int J'/w^2 in the exponent of the tunnelling renormalization.
# 1/(2 pi) is the value implied by the long-time limit of exp(-Q2/pi).
DRESSING_STRATEGIES = {
    "kernel-consistent": 1.0 / (2.0 * math.pi),
    "adiabatic-1/pi": 1.0 / math.pi,
}
DEFAULT_DRESSING = "kernel-consistent"


@dataclass(frozen=True)
class TwoLevelParams:
    delta: float
    xi: float = 0.0
    gamma2: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise InvalidArgument("tunnelling element must be finite and non-negative")
        if not math.isfinite(self.xi):
            raise InvalidArgument("bias must be finite")
        if self.gamma2 is not None and not (math.isfinite(self.gamma2) and self.gamma2 > 0):
            raise InvalidArgument("gamma2 must be positive")

    def with_xi(self, xi):
        return replace(self, xi=float(xi))


@dataclass
class RatePoint:
    xi: float
    gamma: float | None
    sigma: float | None = None
    error: str | None = None


@dataclass
class RateCurve:
    method: str
    points: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidArgument(f"unknown rate method {self.method!r}")
        xs = [p.xi for p in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise InvalidArgument("rate curve bias values must be strictly increasing")
        for p in self.points:
            if p.gamma is not None and p.gamma < 0:
                raise InvalidArgument(f"negative rate at xi={p.xi}")

    @property
    def xi(self):
        return np.array([p.xi for p in self.points])

    @property
    def gamma(self):
        return np.array([np.nan if p.gamma is None else p.gamma for p in self.points])

    @property
    def failures(self):
        return [p for p in self.points if p.error is not None]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["xi", "gamma", "sigma", "method", "error"])
        for p in self.points:
            w.writerow([fmt(p.xi), fmt(p.gamma), fmt(p.sigma), self.method, p.error or ""])
        return buf.getvalue()

    def to_json(self):
        doc = {
            "schema_version": 1,
            "artifact_version": __version__,
            "method": self.method,
            "metadata": self.metadata,
            "points": [{"xi": p.xi, "gamma": p.gamma, "sigma": p.sigma, "error": p.error}
                       for p in self.points],
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def fmt(x):
    """17 significant digits, empty for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".17g")


# ------------------------------------------------------------ closed forms

def analytic_rate(p, xi0):
    """pi Delta^2 / (2 xi0) * exp(-|xi / xi0|)."""
    if not (math.isfinite(xi0) and xi0 > 0):
        raise InvalidArgument("xi0 must be positive")
    return math.pi * p.delta**2 / (2.0 * xi0) * math.exp(-abs(p.xi / xi0))


def spin_bath_rate(p, xi0):
    """Delta^2 / xi0 * exp(-|xi/xi0|), or Delta^2 / Gamma2 * exp(...) with Gamma2."""
    if not (math.isfinite(xi0) and xi0 > 0):
        raise InvalidArgument("xi0 must be positive")
    denom = xi0
    if p.gamma2 is not None:
        if p.gamma2 < xi0:
            raise InvalidArgument("spin-bath rate requires gamma2 >= xi0")
        denom = p.gamma2
    return p.delta**2 / denom * math.exp(-abs(p.xi / xi0))


def renormalized_rate(p, xi0, delta_effective):
    """Closed-form rate with the tunnelling element replaced by Delta_eff."""
    return analytic_rate(replace(p, delta=delta_effective), xi0)


# ------------------------------------------------------- renormalization

def dressing_integral(highfreq):
    """int_0^inf J'(w) / w^2 dw."""
    return spectral.moment(highfreq, -2)


def delta_eff(delta, highfreq, base_xi0=None, strategy=DEFAULT_DRESSING):
    """Tunnelling element dressed by a high-frequency bath, always <= delta."""
    c = DRESSING_STRATEGIES[strategy]
    if base_xi0 is not None:
        _check_highfreq_support(highfreq, base_xi0)
    return delta * math.exp(-c * dressing_integral(highfreq))


def _check_highfreq_support(highfreq, base_xi0):
    low = []
    for leaf in highfreq.leaves():
        if leaf.family == spectral.TABULATED:
            nz = [w for w, j in leaf.table if j > 0]
            if nz and nz[0] < 10 * base_xi0:
                low.append(leaf)
        elif leaf.alpha > 0 and leaf.xi0 < 10 * base_xi0:
            low.append(leaf)
    if low:
        warnings.warn("high-frequency density has weight below 10 xi0; "
                      "it will also change the low-frequency dynamics", ValidityWarning,
                      stacklevel=3)


def scale_density(spec, factor):
    if spec.family == spectral.COMPOSITE:
        return spectral.SpectralDensity(
            spectral.COMPOSITE, parts=tuple(scale_density(p, factor) for p in spec.parts))
    if spec.family == spectral.TABULATED:
        return spectral.tabulated([w for w, _ in spec.table], [j * factor for _, j in spec.table])
    return replace(spec, alpha=spec.alpha * factor)


def highfreq_template(xi0, cutoff_factor=HIGHFREQ_CUTOFF_FACTOR):
    """Unit-amplitude super-ohmic template with cutoff ``cutoff_factor * xi0``."""
    return spectral.superohmic(1.0, cutoff_factor * xi0)


def match_gamma2(delta, xi0, gamma2, template=None, strategy=DEFAULT_DRESSING):
    """High-frequency density J' with Delta_eff^2 / xi0 = Delta^2 / Gamma2.

    The template is rescaled so that int J'/w^2 dw = ln(Gamma2/xi0) / (2c),
    where c is the dressing-strategy constant.
    """
    if not (xi0 > 0 and math.isfinite(gamma2)):
        raise InvalidArgument("xi0 must be positive and gamma2 finite")
    if gamma2 < xi0:
        raise InvalidArgument("gamma2 >= xi0 is required; smaller gamma2 would need Delta_eff > Delta")
    if template is None:
        template = highfreq_template(xi0)
    c = DRESSING_STRATEGIES[strategy]
    target = math.log(gamma2 / xi0) / (2.0 * c)
    unit = dressing_integral(template)
    if unit <= 0:
        raise InvalidArgument("template has no weight")
    return scale_density(template, target / unit)


# --------------------------------------------------------- golden rule

def _check_validity(p, xi0):
    if p.delta > 0.1 * abs(p.xi):
        warnings.warn("golden rule is leading order in Delta; Delta > 0.1 |xi| here",
                      ValidityWarning, stacklevel=3)
    if p.delta > 0.1 * xi0:
        warnings.warn("golden rule is leading order in Delta; Delta > 0.1 xi0 here",
                      ValidityWarning, stacklevel=3)


def coherence_integral(k, xi, epsrel=RATE_EPSREL):
    """int_0^inf cos(xi t) coherence(t) dt (units of time)."""
    scales = k.frequency_scales
    w_hi, w_lo = max(scales), min(scales)
    epsabs = RATE_EPSABS / w_lo
    axi = abs(float(xi))
    f = lambda t: np.cos(axi * t) * k.coherence(t)

    def chunk(lo, hi):
        vals, _ = quadrature.integrate_intervals(f, lo, hi, epsabs=epsabs / max(len(lo), 1),
                                                 epsrel=epsrel)
        return vals

    # Non-oscillating head: [0, pi/(2|xi|)] on a doubling grid, stopped once
    # the coherence factor has fallen below the floor.
    t_head = math.pi / (2 * axi) if axi > 0 else math.inf
    tau = 1.0 / (8.0 * w_hi)
    t_cap = 1e9 / w_lo
    total = 0.0
    lo = 0.0
    step = tau
    stopped = False
    while lo < t_head:
        hi = min(lo + step, t_head)
        if hi > t_cap:
            break
        nb = 16
        edges = np.linspace(lo, hi, nb + 1)
        total += chunk(edges[:-1], edges[1:]).sum()
        lo = hi
        step = hi if hi > 0 else tau
        if abs(k.coherence(lo)) < COHERENCE_FLOOR:
            stopped = True
            break
    if lo < t_head:
        # power-law tail beyond lo, from the local logarithmic slope
        f1, f2 = k.coherence(lo / 2), k.coherence(lo)
        if f1 == 0 or f2 == 0:
            return total
        slope = math.log(abs(f1 / f2)) / math.log(2.0)
        if slope <= 1.0 + 1e-6:
            raise DivergenceError("coherence factor decays too slowly; the rate integral diverges")
        tail = f2 * lo / (slope - 1.0)
        if not stopped and abs(tail) > max(epsabs, epsrel * abs(total)) * 1e3:
            raise DivergenceError("rate integral not converged before the time cap")
        return total + tail * (1.0 if axi == 0 else 0.0)
    if abs(k.coherence(t_head)) < COHERENCE_FLOOR:
        return total
    # Oscillating body: panels between zeros of cos(xi t), accelerated.
    period = math.pi / axi
    n_pan = RATE_PANELS
    starts = t_head + period * np.arange(n_pan)
    edges = starts[:, None] + period * np.linspace(0.0, 1.0, 5)[None, :]
    vals = chunk(edges[:, :-1].ravel(), edges[:, 1:].ravel()).reshape(n_pan, 4).sum(axis=1)
    partial = total + np.cumsum(vals)
    est, err = quadrature.wynn_epsilon(partial[None, :])
    t_end = starts[-1] + period
    c_end, c_q = abs(k.coherence(t_end)), abs(k.coherence(t_end / 4))
    if c_end > 1e-10 and c_end >= 0.98 * c_q:
        raise DivergenceError("coherence factor does not decay; the rate integral diverges")
    if err[0] > max(1e3 * epsabs, 1e-6 * abs(est[0])):
        raise DivergenceError("oscillatory rate integral failed to converge")
    return float(est[0])


def golden_rule_rate(p, k):
    """Delta^2 int_0^inf cos(xi t) cos(Q1/pi) exp(-Q2/pi) dt."""
    if p.delta == 0:
        return 0.0
    _check_validity(p, min(k.frequency_scales))
    return p.delta**2 * coherence_integral(k, p.xi)


# ------------------------------------------------------------------ sweeps

@dataclass
class SweepContext:
    """Everything a sweep needs besides the bias grid."""

    xi0: float
    alpha: float = 0.5
    temperature: float = 0.0
    spec: spectral.SpectralDensity | None = None
    kernel_mode: str | None = None
    ed: dict = field(default_factory=dict)
    stochastic: dict = field(default_factory=dict)

    def bath(self):
        return self.spec if self.spec is not None else spectral.ohmic(self.alpha, self.xi0)

    def kernels(self):
        spec = self.bath()
        if self.kernel_mode is None:
            return BathKernels.for_spec(spec, self.temperature)
        return BathKernels(spec, self.temperature, self.kernel_mode)


def _point(method, p, ctx, kern):
    if method == ANALYTIC:
        return analytic_rate(p, ctx.xi0), None
    if method == SPIN_BATH_EQ9:
        return spin_bath_rate(replace(p, gamma2=None), ctx.xi0), None
    if method == SPIN_BATH_EQ10:
        if p.gamma2 is None:
            raise InvalidArgument("spin-bath-eq10 needs gamma2")
        return spin_bath_rate(p, ctx.xi0), None
    if method == GOLDEN_RULE:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            return golden_rule_rate(p, kern), None
    if method == ED_ORACLE:
        from . import oracle_ed
        return oracle_ed.spin_boson_rate(p, ctx.bath(), **ctx.ed)
    if method == STOCHASTIC:
        from . import stochastic
        rate, (lo, hi) = stochastic.measure_point(p, ctx.xi0, **ctx.stochastic)
        return rate, 0.5 * (hi - lo)
    raise InvalidArgument(f"unknown method {method!r}")


def _compute_point(args, kern=None):
    method, p, ctx = args
    if kern is None and method == GOLDEN_RULE:
        kern = ctx.kernels()
    try:
        gamma, sigma = _point(method, p, ctx, kern)
    except BathrateError as exc:
        return RatePoint(p.xi, None, None, f"{type(exc).__name__}: {exc}")
    if gamma < 0:
        if gamma > -1e-12 * max(p.delta**2 / ctx.xi0, 1e-300):
            gamma = 0.0
        else:
            return RatePoint(p.xi, None, None, "negative rate: golden rule invalid for this bath")
    return RatePoint(p.xi, float(gamma), None if sigma is None else float(sigma), None)


def rate_sweep(template, xi_grid, method, context, workers=1):
    """One rate per bias value; failed points are recorded, not dropped."""
    xi_grid = [float(x) for x in xi_grid]
    if any(b <= a for a, b in zip(xi_grid, xi_grid[1:])):
        raise InvalidArgument("bias grid must be strictly increasing")
    if method not in METHODS:
        raise InvalidArgument(f"unknown rate method {method!r}")
    jobs = [(method, template.with_xi(x), context) for x in xi_grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_compute_point, jobs))
    else:
        kern = context.kernels() if method == GOLDEN_RULE else None
        points = [_compute_point(job, kern) for job in jobs]
    return RateCurve(method=method, points=points, metadata=sweep_metadata(template, context))


def sweep_metadata(template, ctx):
    return {
        "delta": template.delta,
        "gamma2": template.gamma2,
        "xi0": ctx.xi0,
        "alpha": ctx.alpha,
        "temperature": ctx.temperature,
        "bath": ctx.bath().describe(),
        "tolerances": {"rate_epsrel": RATE_EPSREL, "rate_epsabs": RATE_EPSABS,
                       "spectral_epsabs": spectral.QUAD_EPSABS,
                       "spectral_epsrel": spectral.QUAD_EPSREL},
        "artifact_version": __version__,
    }
