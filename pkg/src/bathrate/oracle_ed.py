"""Exact-diagonalization oracle for small spin-boson and central-spin models.

The oscillator bath is replaced by a few Fock-truncated modes on a linear
frequency grid; the spin bath by a handful of Ising-coupled spins with weak
transverse fields.  States are evolved exactly (eigendecomposition when the
Hilbert space is small, Chebyshev expansion of the propagator otherwise) and
a relaxation rate is fitted to the decay of <tau_z>(t).

Basis ordering: the two-level system is the most significant tensor factor,
so a state reshaped to ``(2, -1)`` has the "up" well in row 0.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy import optimize, signal, special

from .errors import InsufficientDecay, InvalidArgument, PoorFitWarning, ResourceLimit
from . import spectral

DIMENSION_CAP = 200_000
SPIN_CAP = 12
DENSE_LIMIT = 4096
CHEBYSHEV_TOL = 1e-15


# --------------------------------------------------------------- oscillators

@dataclass(frozen=True)
class DiscretizedBath:
    omegas: tuple
    couplings: tuple
    n_max: int = 3

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        if len(self.omegas) != len(self.couplings):
            raise InvalidArgument("omegas and couplings differ in length")
        if np.any(w <= 0) or len(np.unique(w)) != len(w):
            raise InvalidArgument("mode frequencies must be distinct and positive")
        if self.n_max < 1:
            raise InvalidArgument("Fock truncation n_max must be >= 1")

    @property
    def n_modes(self):
        return len(self.omegas)

    @property
    def dimension(self):
        return 2 * self.n_max ** self.n_modes

    def reorganization_sum(self):
        """sum c_i^2 / omega_i, the discrete counterpart of (2/pi) int J dw."""
        c = np.asarray(self.couplings)
        return float(np.sum(c**2 / np.asarray(self.omegas)))

    def to_json(self):
        return json.dumps({"omegas": list(self.omegas), "couplings": list(self.couplings),
                           "n_max": self.n_max}, indent=2)


def discretize(spec, n_modes, omega_max, n_max=3):
    """Midpoint grid w_i = (i - 1/2) dw with c_i^2 = (2/pi) w_i J(w_i) dw."""
    if n_modes < 1:
        raise InvalidArgument("n_modes must be >= 1")
    if not omega_max > 0:
        raise InvalidArgument("omega_max must be positive")
    dw = omega_max / n_modes
    w = (np.arange(1, n_modes + 1) - 0.5) * dw
    c2 = (2.0 / math.pi) * w * spectral.eval_j(spec, w) * dw
    return DiscretizedBath(tuple(w.tolist()), tuple(np.sqrt(c2).tolist()), n_max)


def _embed(op, site, dims):
    """Sparse ``I x ... x op x ... x I`` acting on factor ``site``."""
    left = int(np.prod(dims[:site]))
    right = int(np.prod(dims[site + 1:]))
    out = sp.csr_matrix(op)
    if left > 1:
        out = sp.kron(sp.identity(left, format="csr"), out, format="csr")
    if right > 1:
        out = sp.kron(out, sp.identity(right, format="csr"), format="csr")
    return out


def _pauli():
    tx = np.array([[0.0, 1.0], [1.0, 0.0]])
    tz = np.array([[1.0, 0.0], [0.0, -1.0]])
    return tx, tz


def build_spin_boson(p, bath, cap=DIMENSION_CAP):
    """Sparse -D/2 tx - xi/2 tz + tz/2 sum c_i x_i + sum w_i (n_i + 1/2)."""
    dim = bath.dimension
    if dim > cap:
        raise ResourceLimit(f"Hilbert space dimension {dim} exceeds the cap {cap}")
    n = bath.n_max
    m = bath.n_modes
    nb = n ** m
    idx = np.arange(nb)
    energy = np.zeros(nb)
    rows, cols, vals = [], [], []
    for i, (w, c) in enumerate(zip(bath.omegas, bath.couplings)):
        stride = n ** (m - 1 - i)
        occ = (idx // stride) % n
        energy += w * (occ + 0.5)
        up = occ < n - 1
        src = idx[up]
        # <k+1| x |k> = sqrt((k+1) / (2 w))
        amp = 0.5 * c * np.sqrt((occ[up] + 1.0) / (2.0 * w))
        rows.append(src + stride)
        cols.append(src)
        vals.append(amp)
    r = np.concatenate(rows) if rows else np.zeros(0, int)
    cc = np.concatenate(cols) if cols else np.zeros(0, int)
    v = np.concatenate(vals) if vals else np.zeros(0)
    # upper block (tz = +1) gets +X/2, lower block -X/2; both symmetric
    all_r = [r, cc, r + nb, cc + nb, idx, idx + nb, idx, idx + nb]
    all_c = [cc, r, cc + nb, r + nb, idx + nb, idx, idx, idx + nb]
    all_v = [v, v, -v, -v,
             np.full(nb, -0.5 * p.delta), np.full(nb, -0.5 * p.delta),
             energy - 0.5 * p.xi, energy + 0.5 * p.xi]
    h = sp.coo_matrix((np.concatenate(all_v), (np.concatenate(all_r), np.concatenate(all_c))),
                      shape=(2 * nb, 2 * nb))
    return h.tocsr()


def polarized_ground_state(p, bath):
    """Bath ground state for the system frozen in the "up" well, tensored with up."""
    n = bath.n_max
    ladder = np.diag(np.sqrt(np.arange(1, n)), 1)
    state = np.ones(1)
    for w, c in zip(bath.omegas, bath.couplings):
        x = (ladder + ladder.T) / math.sqrt(2.0 * w)
        h = np.diag(w * (np.arange(n) + 0.5)) + 0.5 * c * x
        _, v = np.linalg.eigh(h)
        g = v[:, 0] * np.sign(v[0, 0] or 1.0)
        state = np.kron(state, g)
    return np.concatenate([state, np.zeros_like(state)]).astype(complex)


def vacuum_state(bath):
    nb = bath.n_max ** bath.n_modes
    psi = np.zeros(2 * nb, dtype=complex)
    psi[0] = 1.0
    return psi


# ----------------------------------------------------------------- spins

@dataclass(frozen=True)
class DiscretizedSpinBath:
    w_par: tuple
    w_perp: tuple
    pairs: tuple = ()
    seed: int | None = None

    def __post_init__(self):
        if len(self.w_par) != len(self.w_perp):
            raise InvalidArgument("w_par and w_perp differ in length")
        for k, kk, _ in self.pairs:
            if not (0 <= k < len(self.w_par) and 0 <= kk < len(self.w_par)) or k == kk:
                raise InvalidArgument(f"bad spin pair ({k}, {kk})")

    @property
    def n_spins(self):
        return len(self.w_par)

    def bias_width(self):
        """RMS of the bias shift 2 sum s_k w_par_k over uniform signs."""
        return 2.0 * math.sqrt(sum(w * w for w in self.w_par))

    def to_json(self):
        return json.dumps({"w_par": list(self.w_par), "w_perp": list(self.w_perp),
                           "pairs": [list(x) for x in self.pairs], "seed": self.seed},
                          indent=2)


def sample_spin_couplings(n_spins, xi0, seed, eta=0.2):
    """Uniform longitudinal couplings rescaled to 2 sqrt(sum w^2) = xi0."""
    if n_spins < 1 or not xi0 > 0:
        raise InvalidArgument("need n_spins >= 1 and xi0 > 0")
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.5, 1.5, n_spins)
    w *= xi0 / (2.0 * math.sqrt(np.sum(w * w)))
    return DiscretizedSpinBath(tuple(w.tolist()), tuple((eta * w).tolist()), (), seed)


def build_central_spin(p, bath, cap=SPIN_CAP):
    """-D/2 tx - xi/2 tz + tz sum w_par sz_k + sum w_perp sx_k + sum V sz sz."""
    n = bath.n_spins
    if n > cap:
        raise ResourceLimit(f"{n} bath spins exceed the cap {cap}")
    tx, tz = _pauli()
    dims = [2] * (n + 1)
    zdiag = 1.0 - 2.0 * np.indices(dims).reshape(n + 1, -1)  # +1 for up
    diag = -0.5 * p.xi * zdiag[0]
    for k, w in enumerate(bath.w_par):
        diag = diag + w * zdiag[0] * zdiag[k + 1]
    for k, kk, v in bath.pairs:
        diag = diag + v * zdiag[k + 1] * zdiag[kk + 1]
    h = sp.diags(diag).tocsr() - 0.5 * p.delta * _embed(tx, 0, dims)
    for k, w in enumerate(bath.w_perp):
        if w:
            h = h + w * _embed(tx, k + 1, dims)
    return h.tocsr()


def spin_product_state(bath, seed):
    """System up, bath spins in a random sz product state."""
    rng = np.random.default_rng([0 if seed is None else seed, 1])
    bits = rng.integers(0, 2, bath.n_spins)
    idx = 0
    for b in bits:
        idx = 2 * idx + int(b)
    psi = np.zeros(2 ** (bath.n_spins + 1), dtype=complex)
    psi[idx] = 1.0
    return psi


# -------------------------------------------------------------- evolution

@dataclass
class EvolutionResult:
    times: np.ndarray
    tau_z: np.ndarray
    norm_drift: float
    energy_drift: float
    equilibrium: float | None = None
    completed: bool = True

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "tau_z"])
        for t, z in zip(self.times, self.tau_z):
            w.writerow([format(float(t), ".17g"), format(float(z), ".17g")])
        return buf.getvalue()


def _tau_z(psi):
    half = psi.shape[0] // 2
    return float(np.vdot(psi[:half], psi[:half]).real - np.vdot(psi[half:], psi[half:]).real)


def _check_hermitian(h):
    diff = h - h.conj().T
    err = abs(diff).max() if sp.issparse(diff) else np.max(np.abs(diff))
    scale = abs(h).max() if sp.issparse(h) else np.max(np.abs(h))
    if err > 1e-12 * max(scale, 1.0):
        raise InvalidArgument(f"Hamiltonian is not Hermitian (max deviation {err:.3g})")


def _energy_scale(h):
    return max(float(abs(h).sum(axis=1).max()), 1e-300)


def evolve(h, initial, t_grid, method="auto", deadline=None):
    """Unitary evolution sampled on ``t_grid`` (must start at or after 0).

    ``deadline`` (a ``time.monotonic()`` value) stops Chebyshev stepping early;
    the result then covers a prefix of the grid and has ``completed=False``.
    """
    _check_hermitian(h)
    psi0 = np.asarray(initial, dtype=complex)
    nrm = np.linalg.norm(psi0)
    if abs(nrm - 1.0) > 1e-10:
        raise InvalidArgument("initial state must be normalized")
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0) or t_grid[0] < 0:
        raise InvalidArgument("time grid must be non-negative and increasing")
    dim = h.shape[0]
    if method == "auto":
        method = "eigh" if dim <= DENSE_LIMIT else "chebyshev"
    if method == "eigh":
        return _evolve_eigh(h, psi0, t_grid)
    if method == "chebyshev":
        return _evolve_chebyshev(h, psi0, t_grid, deadline)
    raise InvalidArgument(f"unknown propagation method {method!r}")


def _evolve_eigh(h, psi0, t_grid):
    dense = h.toarray() if sp.issparse(h) else np.asarray(h)
    e, v = scipy.linalg.eigh(dense)
    amp = v.conj().T @ psi0
    half = dense.shape[0] // 2
    vu, vd = v[:half], v[half:]
    out = np.empty(len(t_grid))
    norms = np.empty(len(t_grid))
    energies = np.empty(len(t_grid))
    step = max(1, 2_000_000 // dense.shape[0])
    for lo in range(0, len(t_grid), step):
        sl = slice(lo, lo + step)
        phases = amp[:, None] * np.exp(-1j * np.outer(e, t_grid[sl]))
        psi = v @ phases
        out[sl] = (np.sum(np.abs(psi[:half]) ** 2, axis=0)
                   - np.sum(np.abs(psi[half:]) ** 2, axis=0))
        norms[sl] = np.linalg.norm(psi, axis=0)
        energies[sl] = np.einsum("it,it->t", psi.conj(), dense @ psi).real
    # diagonal-ensemble average, grouping degenerate levels
    tz_nn = np.einsum("ij,ij->j", vu.conj(), vu).real - np.einsum("ij,ij->j", vd.conj(), vd).real
    weights = np.abs(amp) ** 2
    eq = _diagonal_ensemble(e, v, amp, half, weights, tz_nn)
    scale = _energy_scale(h)
    return EvolutionResult(t_grid, out, float(np.max(np.abs(norms - 1.0))),
                           float(np.max(np.abs(energies - energies[0])) / scale), eq)


def _diagonal_ensemble(e, v, amp, half, weights, tz_nn):
    tol = 1e-9 * max(1.0, float(np.max(np.abs(e))))
    groups = np.concatenate([[0], np.nonzero(np.diff(e) > tol)[0] + 1, [len(e)]])
    if len(groups) - 1 == len(e):
        return float(np.sum(weights * tz_nn))
    total = 0.0
    for a, b in zip(groups[:-1], groups[1:]):
        if b - a == 1:
            total += weights[a] * tz_nn[a]
            continue
        # projection of psi0 onto the degenerate subspace, then its tau_z
        proj = v[:, a:b] @ amp[a:b]
        total += _tau_z(proj)
    return float(total)


def _chebyshev_step(hn, psi, dt, center, radius):
    """exp(-i H dt) psi via a Chebyshev series; ``hn`` is H mapped onto [-1, 1]."""
    a = radius * dt
    m = int(a + 10 * a ** (1 / 3) + 20)
    while special.jv(m, a) > CHEBYSHEV_TOL and m < 10 * a + 200:
        m += 10
    coeffs = special.jv(np.arange(m + 1), a)
    apply = _real_apply(hn)
    t0 = psi
    t1 = -1j * apply(psi)
    out = coeffs[0] * t0 + 2 * coeffs[1] * t1
    for k in range(2, m + 1):
        t2 = -2j * apply(t1) + t0
        out += 2 * coeffs[k] * t2
        t0, t1 = t1, t2
    return np.exp(-1j * center * dt) * out


def _real_apply(h):
    if np.iscomplexobj(h.data):
        return lambda v: h @ v
    return lambda v: (h @ v.real) + 1j * (h @ v.imag)


def spectral_bounds(h):
    """Gershgorin interval containing the spectrum of a Hermitian matrix."""
    hc = sp.csr_matrix(h)
    d = hc.diagonal().real
    r = np.asarray(abs(hc).sum(axis=1)).ravel() - np.abs(d)
    return float(np.min(d - r)), float(np.max(d + r))


def _evolve_chebyshev(h, psi0, t_grid, deadline=None):
    h = sp.csr_matrix(h)
    lo, hi = spectral_bounds(h)
    center, radius = 0.5 * (hi + lo), max(0.5 * (hi - lo), 1e-300)
    hn = ((h - center * sp.identity(h.shape[0], format="csr")) / radius).tocsr()
    apply = _real_apply(h)
    psi = psi0.copy()
    t_now = 0.0
    out, norms, energies = [], [], []
    for t in t_grid:
        if deadline is not None and time.monotonic() > deadline:
            break
        if t > t_now:
            psi = _chebyshev_step(hn, psi, t - t_now, center, radius)
            t_now = t
        out.append(_tau_z(psi))
        norms.append(np.linalg.norm(psi))
        energies.append(np.vdot(psi, apply(psi)).real)
    n_done = len(out)
    scale = _energy_scale(h)
    norms, energies = np.array(norms), np.array(energies)
    norm_drift = float(np.max(np.abs(norms - 1.0))) if n_done else 0.0
    energy_drift = float(np.max(np.abs(energies - energies[0])) / scale) if n_done else 0.0
    return EvolutionResult(t_grid[:n_done], np.array(out), norm_drift, energy_drift, None,
                           completed=n_done == len(t_grid))


# ------------------------------------------------------------ rate fitting

def _is_oscillating(y):
    s = np.sign(y)
    s = s[s != 0]
    return np.count_nonzero(s[1:] != s[:-1]) > 2


def extract_rate(r, equilibrium=None, t_skip=5.0):
    """Fit <tau_z>(t) - equilibrium ~ A exp(-Gamma t) after ``t_skip``.

    Oscillating signals are fitted through the peaks of their envelope.  With
    no equilibrium given (and none attached to ``r``) a free constant offset
    is fitted.  Returns ``(gamma, standard_error)``.
    """
    gamma, err, _ = fit_relaxation(r, equilibrium, t_skip)
    return gamma, err


def fit_relaxation(r, equilibrium=None, t_skip=5.0):
    """Like :func:`extract_rate` but also returns the equilibrium used.

    A deviation from equilibrium that falls by e^2 and stays down is fitted
    sample by sample; an oscillating one through its peaks.  The window closes
    at the first point that has dropped by e^2, so late revivals of a finite
    system do not enter the fit.
    """
    t = np.asarray(r.times, dtype=float)
    z = np.asarray(r.tau_z, dtype=float)
    keep = t >= t_skip
    t, z = t[keep], z[keep]
    if len(t) < 4:
        raise InsufficientDecay("too few samples after the transient window")
    eq = equilibrium if equilibrium is not None else r.equilibrium
    if eq is None:
        return _fit_with_offset(t, z)
    y = z - eq
    ay = np.abs(y)
    if ay[0] <= 0:
        raise InsufficientDecay("signal starts at equilibrium")
    # A signal whose |y| drops to e^-2 and then quickly climbs back above
    # e^-1 is oscillating and is fitted through its peaks; otherwise every
    # sample is used.
    low = np.nonzero(ay < ay[0] * math.exp(-2.0))[0]
    oscillating = False
    if len(low):
        k = low[0]
        soon = t <= t[k] + (t[k] - t[0])
        oscillating = bool(np.any(ay[k:][soon[k:]] > ay[0] / math.e))
    if not oscillating:
        tt, yy = t, ay
    else:
        peaks, _ = signal.find_peaks(ay)
        idx = np.concatenate([[0], peaks])
        tt, yy = t[idx], ay[idx]
    crossed = np.nonzero(yy < yy[0] * math.exp(-2.0))[0]
    if len(crossed):
        stop = crossed[0] + 1
    else:
        stop = int(np.argmin(yy)) + 1
        if yy[stop - 1] > yy[0] / math.e:
            raise InsufficientDecay("signal did not decay by a factor e within the window")
    tt, yy = tt[:stop], yy[:stop]
    pos = yy > 0
    tt, yy = tt[pos], yy[pos]
    if len(tt) < 3:
        raise InsufficientDecay("too few envelope points to fit")
    slope, icpt = np.polyfit(tt, np.log(yy), 1)
    model = lambda x, a, g: a * np.exp(-g * (x - tt[0]))
    try:
        popt, pcov = optimize.curve_fit(model, tt, yy,
                                        p0=(math.exp(icpt + slope * tt[0]), max(-slope, 1e-12)))
    except RuntimeError as exc:
        raise InsufficientDecay(f"exponential fit failed: {exc}") from exc
    gamma = float(popt[1])
    if gamma <= 0:
        raise InsufficientDecay("fitted rate is not positive")
    resid = np.log(yy) - np.log(model(tt, *popt))
    if np.sqrt(np.mean(resid**2)) > 0.2:
        warnings.warn("decay envelope is far from a single exponential", PoorFitWarning,
                      stacklevel=3)
    err = float(math.sqrt(pcov[1, 1])) if np.isfinite(pcov[1, 1]) else math.inf
    return gamma, err, float(eq)


def _fit_with_offset(t, z):
    c0 = z[-1]
    span = np.max(np.abs(z - c0))
    if span <= 0:
        raise InsufficientDecay("signal is constant")
    if _is_oscillating(z - np.mean(z)):
        raise InsufficientDecay("oscillating signal needs an explicit equilibrium")
    g0 = 3.0 / max(t[-1] - t[0], 1e-300)
    model = lambda tt, a, g, c: a * np.exp(-g * (tt - t[0])) + c
    try:
        popt, pcov = optimize.curve_fit(model, t, z, p0=(z[0] - c0, g0, c0), maxfev=20000)
    except RuntimeError as exc:
        raise InsufficientDecay(f"exponential fit failed: {exc}") from exc
    _, gamma, c = popt
    if gamma <= 0 or math.exp(-gamma * (t[-1] - t[0])) > 1 / math.e:
        raise InsufficientDecay("signal did not decay by a factor e within the window")
    return float(gamma), float(math.sqrt(pcov[1, 1])), float(c)


def escape_rate(gamma, equilibrium, start=1.0):
    """Transition rate out of the initial well of a two-state master equation.

    For relaxation from ``start`` to ``equilibrium`` at total rate ``gamma``
    the forward rate is ``gamma * (start - equilibrium) / 2``; it equals
    ``gamma`` when the final state is the opposite well.
    """
    return gamma * (start - equilibrium) / 2.0


# ------------------------------------------------------------- drivers

def spin_boson_rate(p, spec, n_modes=8, n_max=3, omega_max=None, t_max=None,
                    n_times=400, cap=DIMENSION_CAP, initial="polarized", deadline=None):
    """Escape rate from exact spin-boson dynamics; returns ``(gamma, sigma)``.

    The run starts in the upper well (bias taken as -|xi|), the only
    direction in which a zero-temperature bath allows relaxation.
    """
    xi0 = spec.scale
    if omega_max is None:
        omega_max = 4.0 * xi0
    bath = discretize(spec, n_modes, omega_max, n_max)
    q = replace(p, xi=-abs(p.xi))
    h = build_spin_boson(q, bath, cap)
    psi = polarized_ground_state(q, bath) if initial == "polarized" else vacuum_state(bath)
    if t_max is None:
        t_max = 400.0 / xi0
    times = np.linspace(0.0, t_max, n_times)
    r = evolve(h, psi, times, deadline=deadline)
    gamma, err, eq = fit_relaxation(r, t_skip=5.0 / xi0)
    f = (1.0 - eq) / 2.0
    return escape_rate(gamma, eq), err * f


@dataclass
class SeedAverage:
    rate: float
    ci: tuple
    seed_rates: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    norm_drift: float = 0.0       # worst over all seeds
    energy_drift: float = 0.0


def _ensemble_fit(times, curves, eqs, t_skip):
    m = np.mean(curves, axis=0)
    eq = float(np.mean(eqs))
    r = EvolutionResult(times, m, 0.0, 0.0, eq)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PoorFitWarning)
        gamma, _ = extract_rate(r, t_skip=t_skip)
    return escape_rate(gamma, eq)


def central_spin_rate(p, xi0, n_spins=8, seeds=range(16), eta=0.2, t_max=None,
                      n_times=1500, n_boot=200, boot_seed=0):
    """Seed-averaged central-spin escape rate with a bootstrap interval.

    Each seed draws couplings and a bath product state; the rate is fitted
    to the seed-averaged <tau_z>(t), and the interval comes from resampling
    seeds with replacement (2.5 and 97.5 percentiles).
    """
    if t_max is None:
        t_max = 30.0 / (p.delta**2 / xi0)
    q = replace(p, xi=-abs(p.xi))
    times = np.linspace(0.0, t_max, n_times)
    t_skip = 5.0 / xi0
    curves, eqs, seed_rates, failures = [], [], [], []
    drift = [0.0, 0.0]
    for seed in seeds:
        bath = sample_spin_couplings(n_spins, xi0, seed, eta)
        r = evolve(build_central_spin(q, bath), spin_product_state(bath, seed), times)
        drift = [max(drift[0], r.norm_drift), max(drift[1], r.energy_drift)]
        curves.append(r.tau_z)
        eqs.append(r.equilibrium)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", PoorFitWarning)
                g, _ = extract_rate(r, t_skip=t_skip)
            seed_rates.append(escape_rate(g, r.equilibrium))
        except InsufficientDecay as exc:
            failures.append((seed, str(exc)))
    curves, eqs = np.array(curves), np.array(eqs)
    rate = _ensemble_fit(times, curves, eqs, t_skip)
    rng = np.random.default_rng(boot_seed)
    boots = []
    for _ in range(n_boot):
        pick = rng.integers(0, len(curves), len(curves))
        try:
            boots.append(_ensemble_fit(times, curves[pick], eqs[pick], t_skip))
        except InsufficientDecay:
            continue
    if len(boots) < n_boot // 2:
        raise InsufficientDecay("most bootstrap resamples show no measurable decay")
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return SeedAverage(rate, (float(lo), float(hi)), seed_rates, failures, *drift)


def bath_to_dict(bath):
    return asdict(bath)
