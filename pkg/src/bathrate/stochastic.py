"""Classical-noise twin of the bath: Ornstein-Uhlenbeck bias fluctuations.

The bias ``xi + dxi(t)`` fluctuates with stationary variance ``2 xi0^2`` and
correlation rate ``xi0``, the two numbers the matching argument fixes.  Each
realization is propagated exactly as a Bloch-vector rotation per step and the
ensemble-averaged <tau_z>(t) is fitted for a relaxation rate.

Realization ``i`` draws from ``SeedSequence([seed, i])``, so every number is
independent of how realizations are chunked or distributed over workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal

from . import __version__
from .errors import InsufficientDecay, InvalidArgument, PoorFitWarning
from .oracle_ed import EvolutionResult, extract_rate

CHUNK = 16         # fixed, so chunk contents never depend on the worker count
N_SAMPLES = 2000
MAX_WINDOW_DOUBLINGS = 4


@dataclass(frozen=True)
class NoiseModel:
    xi0: float
    dt: float
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.xi0) and self.xi0 > 0):
            raise InvalidArgument("xi0 must be positive")
        if not (self.dt > 0 and self.dt <= 0.1 / self.xi0 * (1 + 1e-12)):
            raise InvalidArgument("dt must be positive and at most 0.1 / xi0")

    @property
    def sigma(self):
        """Stationary standard deviation sqrt(2) xi0."""
        return math.sqrt(2.0) * self.xi0

    @property
    def variance(self):
        return 2.0 * self.xi0**2

    def autocorrelation(self, lag):
        return self.variance * np.exp(-self.xi0 * np.abs(lag))

    def generator(self, realization):
        return np.random.default_rng(np.random.SeedSequence([self.seed, realization]))


def ou_paths(m, n_steps, realizations):
    """Paths for the given realization indices, shape ``(len(realizations), n_steps)``.

    Uses the exact update x' = x e^{-xi0 dt} + sigma sqrt(1 - e^{-2 xi0 dt}) N(0, 1)
    started from a stationary draw.
    """
    if n_steps < 1:
        raise InvalidArgument("n_steps must be >= 1")
    decay = math.exp(-m.xi0 * m.dt)
    kick = m.sigma * math.sqrt(-math.expm1(-2.0 * m.xi0 * m.dt))
    out = np.empty((len(realizations), n_steps))
    for row, idx in enumerate(realizations):
        g = m.generator(idx)
        x0 = m.sigma * g.standard_normal()
        noise = g.standard_normal(n_steps - 1)
        out[row, 0] = x0
        if n_steps > 1:
            out[row, 1:], _ = signal.lfilter([kick], [1.0, -decay], noise, zi=[decay * x0])
    return out


def ou_trajectory(m, n_steps, realization=0):
    """One stationary OU sample path of ``n_steps`` points."""
    return ou_paths(m, n_steps, [realization])[0]


def _qmul(a, b):
    """Hamilton product of quaternion arrays with components on the last axis."""
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([aw * bw - ax * bx - ay * by - az * bz,
                     aw * bx + ax * bw + ay * bz - az * by,
                     aw * by - ax * bz + ay * bw + az * bx,
                     aw * bz + ax * by - ay * bx + az * bw], axis=-1)


def _step_quaternions(p, path, dt):
    """Unit quaternions of the per-step rotations about Omega by |Omega| dt."""
    ox = -p.delta
    oz = -(p.xi + path)
    w = np.sqrt(ox * ox + oz * oz)
    half = 0.5 * w * dt
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(w > 0, np.sin(half) / w, 0.5 * dt)
    q = np.zeros(path.shape + (4,))
    q[..., 0] = np.cos(half)
    q[..., 1] = ox * k
    q[..., 3] = oz * k
    return q


def _reduce_blocks(q):
    """Product q_last ... q_first along axis -2, by pairwise tree."""
    while q.shape[-2] > 1:
        if q.shape[-2] % 2:
            ident = np.zeros(q.shape[:-2] + (1, 4))
            ident[..., 0] = 1.0
            q = np.concatenate([q, ident], axis=-2)
        q = _qmul(q[..., 1::2, :], q[..., 0::2, :])
    return q[..., 0, :]


def _rotate_vector(q, v):
    """(w^2 - u.u) v + 2 (u.v) u + 2 w (u x v) for quaternions q = (w, u)."""
    w, x, y, z = np.moveaxis(q, -1, 0)
    vx, vy, vz = v
    scale = w * w - (x * x + y * y + z * z)
    dot2 = 2.0 * (x * vx + y * vy + z * vz)
    return np.stack([scale * vx + dot2 * x + 2.0 * w * (y * vz - z * vy),
                     scale * vy + dot2 * y + 2.0 * w * (z * vx - x * vz),
                     scale * vz + dot2 * z + 2.0 * w * (x * vy - y * vx)], axis=-1)


def propagate_bloch(p, path, dt, initial=(0.0, 0.0, 1.0), every=1, return_norm=False):
    """<tau_z>(t) for H = -(D/2) tx - ((xi + dxi(t))/2) tz, piecewise constant.

    ``path`` is one bias-noise path or a stack of them (rows).  The Bloch
    vector obeys ds/dt = Omega x s with Omega = (-Delta, 0, -(xi + dxi)); each
    step is the exact rotation about Omega by |Omega| dt.  Rotations are
    composed as quaternions, first within each block of ``every`` steps, then
    block by block; one sample per block (plus t = 0) is returned.
    """
    path = np.asarray(path, dtype=float)
    single = path.ndim == 1
    path = np.atleast_2d(path)
    s0 = np.asarray(initial, dtype=float)
    if abs(np.linalg.norm(s0) - 1.0) > 1e-12:
        raise InvalidArgument("initial Bloch vector must have unit length")
    n_real, n_steps = path.shape
    n_blocks = n_steps // every
    q = _step_quaternions(p, path[:, :n_blocks * every], dt)
    blocks = _reduce_blocks(q.reshape(n_real, n_blocks, every, 4))
    total = np.zeros((n_real, n_blocks + 1, 4))
    total[:, 0, 0] = 1.0
    acc = total[:, 0, :]
    for k in range(n_blocks):
        acc = _qmul(blocks[:, k, :], acc)
        total[:, k + 1, :] = acc
    vec = _rotate_vector(total, s0)
    out = vec[..., 2]
    res = out[0] if single else out
    if return_norm:
        drift = float(np.max(np.abs(np.linalg.norm(vec, axis=-1) - 1.0)))
        return res, drift
    return res


@dataclass
class DecayCurve:
    times: np.ndarray
    mean_tau_z: np.ndarray
    stderr: np.ndarray

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "mean_tau_z", "stderr"])
        for row in zip(self.times, self.mean_tau_z, self.stderr):
            w.writerow([format(float(x), ".17g") for x in row])
        return buf.getvalue()


@dataclass
class RateMeasurement:
    rate: float
    ci: tuple
    curve: DecayCurve
    manifest: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.rate, self.ci))

    def manifest_json(self):
        return json.dumps(self.manifest, indent=2, sort_keys=True)


def _chunk_curves(args):
    p, m, n_steps, realizations, every = args
    paths = ou_paths(m, n_steps, realizations)
    return propagate_bloch(p, paths, m.dt, every=every)


def ensemble_tau_z(p, m, n_realizations, t_max, n_samples=N_SAMPLES, workers=1):
    """Per-realization <tau_z> samples, shape (n_realizations, n_out), and times."""
    n_steps = max(1, int(round(t_max / m.dt)))
    every = max(1, n_steps // n_samples)
    n_steps = every * (n_steps // every)
    chunks = [(p, m, n_steps, list(range(i, min(i + CHUNK, n_realizations))), every)
              for i in range(0, n_realizations, CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_curves, chunks))
    else:
        parts = [_chunk_curves(c) for c in chunks]
    curves = np.concatenate(parts, axis=0)
    times = m.dt * every * np.arange(curves.shape[1])
    return times, curves


def _fit_mean(times, curves, t_skip):
    r = EvolutionResult(times, curves.mean(axis=0), 0.0, 0.0, 0.0)
    return extract_rate(r, equilibrium=0.0, t_skip=t_skip)[0]


def measure_rate(p, m, n_realizations=200, t_max=None, n_boot=200, workers=1,
                 n_samples=N_SAMPLES):
    """Relaxation rate of the ensemble-averaged <tau_z>(t) with a 95% bootstrap CI.

    Classical noise drives the populations towards equal occupation, so the
    fit is to <tau_z> ~ A exp(-Gamma t) with zero equilibrium.
    """
    if n_realizations < 2:
        raise InvalidArgument("need at least two realizations")
    t_skip = 5.0 / m.xi0
    adaptive = t_max is None
    t_max = default_t_max(p, m.xi0) if adaptive else t_max
    for attempt in range(MAX_WINDOW_DOUBLINGS + 1):
        times, curves = ensemble_tau_z(p, m, n_realizations, t_max, n_samples, workers)
        try:
            rate = _fit_mean(times, curves, t_skip)
            break
        except InsufficientDecay:
            if not adaptive or attempt == MAX_WINDOW_DOUBLINGS:
                raise
            t_max *= 2.0
    rng = np.random.default_rng(np.random.SeedSequence([m.seed, 2**31 - 1]))
    boots = []
    with warnings.catch_warnings():
        # resamples are noisier than the mean curve; only the main fit may warn
        warnings.simplefilter("ignore", PoorFitWarning)
        for _ in range(n_boot):
            pick = rng.integers(0, n_realizations, n_realizations)
            try:
                boots.append(_fit_mean(times, curves[pick], t_skip))
            except InsufficientDecay:
                continue
    lo, hi = np.percentile(boots, [2.5, 97.5]) if boots else (math.nan, math.nan)
    curve = DecayCurve(times, curves.mean(axis=0),
                       curves.std(axis=0, ddof=1) / math.sqrt(n_realizations))
    manifest = {
        "schema_version": 1,
        "artifact_version": __version__,
        "delta": p.delta, "xi": p.xi,
        "noise": asdict(m),
        "n_realizations": n_realizations, "t_max": float(t_max),
        "n_boot": n_boot, "rate": rate, "ci": [float(lo), float(hi)],
    }
    return RateMeasurement(float(rate), (float(lo), float(hi)), curve, manifest)


def default_t_max(p, xi0):
    """Window for an e^2 decay at Gamma ~ Delta^2 / (2 xi0); doubled on demand."""
    if p.delta == 0:
        raise InvalidArgument("no relaxation without tunnelling")
    return 4.0 * xi0 / p.delta**2


def measure_point(p, xi0, dt=None, n_realizations=200, seed=0, t_max=None, workers=1):
    """Rate and CI for one bias value, for use in sweeps."""
    m = NoiseModel(xi0, 0.1 / xi0 if dt is None else dt, seed)
    res = measure_rate(p, m, n_realizations, t_max, workers=workers)
    return res.rate, res.ci
