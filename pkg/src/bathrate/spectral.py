"""Spectral densities J(w) of oscillator baths and the bias noise they induce.

Units: hbar = k_B = 1, every quantity in one energy unit.

Families
--------
``ohmic-exp-cutoff``
    J(w) = 2 pi alpha w exp(-w / xi0).  Ohmic at low frequency, peaked at
    w = xi0.  This is the simulator bath for a spin bath of width xi0.
``superohmic-exp-cutoff``
    J(w) = A w^3 / wc^2 exp(-w / wc).  Used as the high-frequency dressing
    bath; its integral of J/w^2 is exactly A.
``tabulated``
    Piecewise-linear through (w, J) samples, zero outside the table.
``composite``
    Pointwise sum of parts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

from . import quadrature
from .errors import DivergenceError, InvalidArgument, InvalidSpec

OHMIC = "ohmic-exp-cutoff"
SUPEROHMIC = "superohmic-exp-cutoff"
TABULATED = "tabulated"
COMPOSITE = "composite"
FAMILIES = (OHMIC, SUPEROHMIC, TABULATED, COMPOSITE)

# Integrals over [0, inf) are split here (in units of the part's scale);
# beyond the split an analytic tail is appended.
SPLIT_FACTOR = 30.0
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10


@dataclass(frozen=True)
class SpectralDensity:
    family: str
    alpha: float = 0.0
    xi0: float = 1.0
    table: tuple = ()
    parts: tuple = ()
    # amplitude/cutoff of the super-ohmic family live in alpha/xi0:
    # alpha -> A (dimensionless), xi0 -> wc.

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown spectral family {self.family!r}")
        if self.family in (OHMIC, SUPEROHMIC):
            if not (math.isfinite(self.alpha) and self.alpha >= 0):
                raise InvalidSpec("coupling must be finite and non-negative")
            if not (math.isfinite(self.xi0) and self.xi0 > 0):
                raise InvalidSpec("cutoff scale must be finite and positive")
        elif self.family == TABULATED:
            if len(self.table) == 0:
                raise InvalidSpec("tabulated spectral density has an empty table")
            w = np.array([p[0] for p in self.table], dtype=float)
            j = np.array([p[1] for p in self.table], dtype=float)
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(j))):
                raise InvalidSpec("table entries must be finite")
            if np.any(np.diff(w) <= 0):
                raise InvalidSpec("table frequencies must be strictly increasing")
            if np.any(w < 0) or np.any(j < 0):
                raise InvalidSpec("table entries must be non-negative")
        elif self.family == COMPOSITE:
            if not all(isinstance(p, SpectralDensity) for p in self.parts):
                raise InvalidSpec("composite parts must be spectral densities")

    @property
    def amplitude(self):
        return self.alpha

    @property
    def cutoff(self):
        return self.xi0

    def leaves(self):
        """Flatten composites into their non-composite parts."""
        if self.family == COMPOSITE:
            out = []
            for p in self.parts:
                out.extend(p.leaves())
            return out
        return [self]

    @property
    def scale(self):
        """Characteristic frequency of this (non-composite) density."""
        if self.family == TABULATED:
            return float(self.table[-1][0])
        if self.family == COMPOSITE:
            leaves = self.leaves()
            return max(p.scale for p in leaves) if leaves else 1.0
        return self.xi0

    @property
    def split(self):
        return SPLIT_FACTOR * self.scale

    def __call__(self, omega):
        return eval_j(self, omega)

    def describe(self):
        """JSON-friendly descriptor (round-trips through :func:`from_descriptor`)."""
        if self.family == COMPOSITE:
            return {"family": COMPOSITE, "parts": [p.describe() for p in self.parts]}
        if self.family == TABULATED:
            return {"family": TABULATED, "table": [list(p) for p in self.table]}
        if self.family == SUPEROHMIC:
            return {"family": SUPEROHMIC, "amplitude": self.alpha, "cutoff": self.xi0}
        return {"family": OHMIC, "alpha": self.alpha, "xi0": self.xi0}


def ohmic(alpha=0.5, xi0=1.0):
    return SpectralDensity(OHMIC, alpha=float(alpha), xi0=float(xi0))


def superohmic(amplitude, cutoff):
    return SpectralDensity(SUPEROHMIC, alpha=float(amplitude), xi0=float(cutoff))


def tabulated(omegas, values):
    table = tuple((float(w), float(j)) for w, j in zip(omegas, values))
    return SpectralDensity(TABULATED, table=table)


def compose(base, highfreq):
    """Total density ``base + highfreq``."""
    return SpectralDensity(COMPOSITE, parts=(base, highfreq))


def zero():
    return tabulated([0.0, 1.0], [0.0, 0.0])


def from_descriptor(d):
    fam = d.get("family", OHMIC)
    if fam == OHMIC:
        return ohmic(d.get("alpha", 0.5), d["xi0"])
    if fam == SUPEROHMIC:
        return superohmic(d["amplitude"], d["cutoff"])
    if fam == TABULATED:
        if "path" in d:
            return load_table(d["path"])
        t = d.get("table", [])
        return tabulated([p[0] for p in t], [p[1] for p in t])
    if fam == COMPOSITE:
        return SpectralDensity(COMPOSITE, parts=tuple(from_descriptor(p) for p in d["parts"]))
    raise InvalidSpec(f"unknown spectral family {fam!r}")


def load_table(path):
    """Read a two-column (w, J) CSV with a one-line header."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InvalidSpec(f"{path}: empty file")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InvalidSpec(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError as exc:
                raise InvalidSpec(f"{path}:{lineno}: {exc}") from None
    w = [r[0] for r in rows]
    if any(b <= a for a, b in zip(w, w[1:])):
        raise InvalidSpec(f"{path}: frequencies must be strictly increasing")
    return tabulated(w, [r[1] for r in rows])


def _check_finite(omega):
    w = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(w)):
        raise InvalidArgument("frequency must be finite")
    return w


def _eval(spec, w):
    fam = spec.family
    if fam == OHMIC:
        return np.where(w > 0, 2 * np.pi * spec.alpha * w * np.exp(-np.abs(w) / spec.xi0), 0.0)
    if fam == SUPEROHMIC:
        wc = spec.xi0
        return np.where(w > 0, spec.alpha * w**3 / wc**2 * np.exp(-np.abs(w) / wc), 0.0)
    if fam == TABULATED:
        tw = np.array([p[0] for p in spec.table])
        tj = np.array([p[1] for p in spec.table])
        out = np.interp(w, tw, tj, left=0.0, right=0.0)
        inside = (w >= tw[0]) & (w <= tw[-1]) & (w > 0)
        return np.where(inside, out, 0.0)
    total = np.zeros_like(w, dtype=float)
    for p in spec.parts:
        total = total + _eval(p, w)
    return total


def eval_j(spec, omega):
    """J(omega); zero for omega <= 0.  Accepts scalars or arrays."""
    w = _check_finite(omega)
    out = _eval(spec, w)
    return float(out) if np.ndim(out) == 0 else out


def j_over_omega(spec, w):
    """J(w)/w for w > 0, finite as w -> 0 for ohmic-like densities."""
    w = np.asarray(w, dtype=float)
    fam = spec.family
    if fam == OHMIC:
        return 2 * np.pi * spec.alpha * np.exp(-w / spec.xi0)
    if fam == SUPEROHMIC:
        wc = spec.xi0
        return spec.alpha * (w / wc) ** 2 * np.exp(-w / wc)
    if fam == TABULATED:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(w > 0, _eval(spec, w) / w, 0.0)
    total = np.zeros_like(w)
    for p in spec.parts:
        total = total + j_over_omega(p, w)
    return total


# ---------------------------------------------------------------- moments

def _table_moment(spec, power):
    """Exact integral of w^power * (piecewise-linear J) over the table."""
    tw = np.array([p[0] for p in spec.table])
    tj = np.array([p[1] for p in spec.table])
    total = 0.0
    for (w0, j0), (w1, j1) in zip(zip(tw[:-1], tj[:-1]), zip(tw[1:], tj[1:])):
        if j0 == 0 and j1 == 0:
            continue
        b = (j1 - j0) / (w1 - w0)
        a = j0 - b * w0          # J = a + b w on the segment
        if power == 0:
            total += 0.5 * (j0 + j1) * (w1 - w0)
        elif power == -1:
            if w0 == 0:
                if a != 0:
                    raise DivergenceError("integral of J/w diverges at w = 0")
                total += b * (w1 - w0)
            else:
                total += a * math.log(w1 / w0) + b * (w1 - w0)
        elif power == -2:
            if w0 == 0:
                raise DivergenceError("integral of J/w^2 diverges at w = 0")
            total += a * (1 / w0 - 1 / w1) + b * math.log(w1 / w0)
        else:
            p1 = power + 1
            p2 = power + 2
            total += a * (w1**p1 - w0**p1) / p1 + b * (w1**p2 - w0**p2) / p2
    return total


def moment(spec, power, method="closed"):
    """Integral of J(w) * w**power over [0, inf).

    ``method="closed"`` uses closed forms where they exist; ``"quadrature"``
    always integrates numerically (used to cross-check the closed forms).
    """
    if spec.family == COMPOSITE:
        return sum(moment(p, power, method) for p in spec.parts)
    if spec.family == TABULATED:
        _check_tail(spec, power)
        if method == "closed":
            return _table_moment(spec, power)
        return _quad_moment(spec, power)
    lowest = 1 if spec.family == OHMIC else 3
    if power + lowest <= -1:
        raise DivergenceError(f"integral of J w^{power} diverges at w = 0")
    if method == "closed":
        if spec.family == OHMIC:
            return 2 * np.pi * spec.alpha * special.gamma(2 + power) * spec.xi0 ** (2 + power)
        wc = spec.xi0
        return spec.alpha / wc**2 * special.gamma(4 + power) * wc ** (4 + power)
    return _quad_moment(spec, power)


def _analytic_tail(spec, power, w_split):
    """Integral of J w^power over [w_split, inf) for the exponential families."""
    if spec.family == OHMIC:
        s, pref, scale = 2 + power, 2 * np.pi * spec.alpha, spec.xi0
    else:
        s, pref, scale = 4 + power, spec.alpha / spec.xi0**2, spec.xi0
    x = w_split / scale
    if s > 0:
        return pref * scale**s * special.gamma(s) * special.gammaincc(s, x)
    # s == 0: exponential integral
    return pref * special.exp1(x)


def _quad_moment(spec, power):
    if spec.family == TABULATED:
        tw = [p[0] for p in spec.table]
        if power <= -2 and tw[0] == 0 and any(p[1] for p in spec.table[:2]):
            raise DivergenceError("integral of J/w^2 diverges at w = 0")
        lo, hi = tw[0], tw[-1]
        breaks = list(tw)
        f = lambda x: _eval(spec, x) * x**power
        val, _ = quadrature.integrate(f, lo, hi, breakpoints=breaks,
                                      epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL)
        return val
    w_split = spec.split
    scale = spec.scale
    f = lambda x: j_over_omega(spec, x) * x ** (power + 1)
    # geometric refinement towards w = 0 resolves any power-law behaviour
    breaks = quadrature.geometric_breaks(0.0, w_split, 1e-6 * scale)
    lo, hi = breaks[:-1], breaks[1:]
    vals, _ = quadrature.integrate_intervals(f, lo, hi, epsabs=QUAD_EPSABS / len(lo),
                                             epsrel=QUAD_EPSREL)
    return float(vals.sum()) + _analytic_tail(spec, power, w_split)


def _check_tail(spec, power):
    if power >= -1:
        js = [p[1] for p in spec.table]
        peak = max(js)
        if peak > 0 and js[-1] > 1e-8 * peak:
            raise DivergenceError(
                "tabulated density does not decay before the end of its table; "
                "extend the table so the tail is resolved")


def bias_variance(spec, method="closed"):
    """Zero-temperature variance of the bath bias operator, (2/pi) int J dw."""
    if spec.family == OHMIC and method == "closed":
        return 4.0 * spec.alpha * spec.xi0**2
    return 2.0 / np.pi * moment(spec, 0, method)


@dataclass(frozen=True)
class FluctuationStats:
    variance: float
    width: float
    correlation_rate: float

    def __post_init__(self):
        if self.variance < 0:
            raise InvalidArgument("variance must be non-negative")


def fluctuation_stats(spec, method="closed"):
    """Width and rate of the bias fluctuations a bath induces.

    The rate is the ratio int J dw / int (J/w) dw, which equals xi0 for the
    ohmic exponential-cutoff family.
    """
    var = bias_variance(spec, method)
    m0 = moment(spec, 0, method)
    m1 = moment(spec, -1, method)
    rate = m0 / m1 if m1 > 0 else 0.0
    return FluctuationStats(variance=float(var), width=math.sqrt(var),
                            correlation_rate=float(rate))


def power_spectrum(spec, temperature, omega):
    """S(w) = J(w) coth(w / 2T) for w > 0; exactly J(w) at T = 0."""
    if not (math.isfinite(temperature) and temperature >= 0):
        raise InvalidArgument("temperature must be finite and >= 0")
    w = _check_finite(omega)
    if np.any(w <= 0):
        raise InvalidArgument("power spectrum is defined for positive frequencies only")
    j = _eval(spec, w)
    if temperature == 0:
        out = j
    else:
        out = j * (1.0 / np.tanh(w / (2.0 * temperature)))
    return float(out) if np.ndim(out) == 0 else out


def x_coth_x(x):
    """x coth(x), with its series below x = 1e-6 (exact to double precision)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = x / np.tanh(np.where(small, 1.0, x))
    return np.where(small, 1.0 + x * x / 3.0, direct)
