"""Run configuration: flat ``key = value`` files or JSON, validated in one pass.

Every energy (delta, xi0, gamma2, temperature, bias grid, omega_max) is in
the working unit chosen by ``unit``; preset energies are converted into it.
All problems found are reported together in one :class:`ConfigError`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import presets, rates, spectral
from .errors import ConfigError

FLOAT_KEYS = {"delta", "xi0", "gamma2", "alpha", "temperature", "xi_min", "xi_max",
              "omega_max", "eta", "dt", "ed_t_max"}
INT_KEYS = {"xi_count", "n_modes", "n_max", "n_spins", "seeds", "n_realizations", "seed",
            "ed_cap"}
BOOL_KEYS = {"compare"}
STR_KEYS = {"unit", "preset", "bath", "bath_table", "highfreq", "xi_spacing", "output"}
LIST_KEYS = {"methods"}
KNOWN = FLOAT_KEYS | INT_KEYS | BOOL_KEYS | STR_KEYS | LIST_KEYS | {"bath_descriptor"}


@dataclass
class RunConfig:
    params: rates.TwoLevelParams
    xi0: float
    alpha: float = 0.5
    temperature: float = 0.0
    bath: dict = field(default_factory=dict)
    highfreq: str = "none"
    xi_min: float = 0.0
    xi_max: float = 5.0
    xi_count: int = 21
    xi_spacing: str = "linear"
    methods: list = field(default_factory=lambda: [rates.ANALYTIC])
    compare: bool = False
    unit: str = "K"
    preset: str | None = None
    n_modes: int = 8
    n_max: int = 3
    omega_max: float | None = None
    ed_t_max: float | None = None
    ed_cap: int = 200_000
    n_spins: int = 8
    seeds: int = 16
    eta: float = 1.0
    n_realizations: int = 200
    dt: float | None = None
    seed: int = 0
    output: str = "out"

    def xi_grid(self):
        if self.xi_spacing == "log":
            return np.geomspace(self.xi_min, self.xi_max, self.xi_count)
        return np.linspace(self.xi_min, self.xi_max, self.xi_count)

    def base_bath(self):
        return spectral.from_descriptor(self.bath)

    def sweep_bath(self):
        """Bath used by numeric methods, with the matched J' added on request."""
        base = self.base_bath()
        if self.highfreq == "matched":
            jp = rates.match_gamma2(self.params.delta, self.xi0, self.params.gamma2)
            return spectral.compose(base, jp)
        return base

    def context(self):
        ed = {"n_modes": self.n_modes, "n_max": self.n_max, "omega_max": self.omega_max,
              "t_max": self.ed_t_max, "cap": self.ed_cap}
        st = {"dt": self.dt, "n_realizations": self.n_realizations, "seed": self.seed}
        return rates.SweepContext(xi0=self.xi0, alpha=self.alpha, temperature=self.temperature,
                                  spec=self.sweep_bath(), ed=ed, stochastic=st)

    def to_dict(self):
        d = asdict(self)
        d["params"] = asdict(self.params)
        return d


def parse_keyvalue(text, source="<config>"):
    """``key = value`` lines; ``#`` starts a comment.  Errors carry line numbers."""
    raw, issues = {}, []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            issues.append(f"{source}:{lineno}: expected 'key = value'")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            issues.append(f"{source}:{lineno}: empty key")
            continue
        if key in raw:
            issues.append(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = (value, f"{source}:{lineno}")
    if issues:
        raise ConfigError(issues)
    return raw


def _coerce(key, value, where, issues):
    if not isinstance(value, str):
        return value
    try:
        if key in FLOAT_KEYS:
            return None if value.lower() in ("", "none") else float(value)
        if key in INT_KEYS:
            return int(value)
        if key in BOOL_KEYS:
            low = value.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(f"not a boolean: {value!r}")
            return low in ("true", "yes", "1")
        if key in LIST_KEYS:
            return [v.strip() for v in value.split(",") if v.strip()]
    except ValueError as exc:
        issues.append(f"{where}: {key}: {exc}")
        return None
    return value


def load_config(path, overrides=None):
    """Read a key-value or JSON file, apply ``overrides`` and validate."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"]) from None
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from None
        if not isinstance(doc, dict):
            raise ConfigError([f"{path}: top level must be an object"])
        raw = {k: (v, f"{path}:{k}") for k, v in doc.items()}
    else:
        raw = parse_keyvalue(text, str(path))
    return build_config(raw, overrides, base_dir=path.parent)


def build_config(raw, overrides=None, base_dir=Path(".")):
    """Validate a mapping ``key -> (value, where)`` (or plain values)."""
    issues = []
    vals = {}
    merged = dict(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            merged[k] = (v, f"--{k.replace('_', '-')}")
    for key, item in merged.items():
        value, where = item if isinstance(item, tuple) else (item, key)
        if key not in KNOWN:
            issues.append(f"{where}: unknown key {key!r}")
            continue
        vals[key] = _coerce(key, value, where, issues)

    unit = vals.get("unit") or "K"
    if unit not in presets.UNITS:
        issues.append(f"unit: unknown unit {unit!r}; use one of {sorted(presets.UNITS)}")
        unit = "K"
    delta, xi0 = vals.get("delta"), vals.get("xi0")
    preset = vals.get("preset")
    if preset is not None:
        try:
            pr = presets.get_preset(preset)
            if delta is None and pr.delta is not None:
                delta = pr.energy("delta", unit)
            if xi0 is None and pr.xi0 is not None:
                xi0 = pr.energy("xi0", unit)
        except Exception as exc:
            issues.append(f"preset: {exc}")
    if delta is None:
        issues.append("delta: required (or a preset that provides it)")
    elif not (math.isfinite(delta) and delta >= 0):
        issues.append("delta: must be finite and non-negative")
    if xi0 is None:
        issues.append("xi0: required (or a preset that provides it)")
    elif not (math.isfinite(xi0) and xi0 > 0):
        issues.append("xi0: must be positive")
    gamma2 = vals.get("gamma2")
    if gamma2 is not None and xi0 is not None and xi0 > 0 and gamma2 < xi0:
        issues.append(f"gamma2: must satisfy gamma2 >= xi0 (got {gamma2} < {xi0})")
    alpha = vals.get("alpha", 0.5)
    if alpha is None or not alpha > 0:
        issues.append("alpha: must be positive")
    temperature = vals.get("temperature", 0.0)
    if temperature is None or temperature < 0:
        issues.append("temperature: must be >= 0")

    bath = _bath_descriptor(vals, alpha, xi0, base_dir, issues)

    count = vals.get("xi_count", 21)
    if count is None or count < 1:
        issues.append("xi_count: bias grid needs at least one point")
    spacing = vals.get("xi_spacing", "linear")
    if spacing not in ("linear", "log"):
        issues.append("xi_spacing: must be 'linear' or 'log'")
    xmin = vals.get("xi_min", 0.0)
    xmax_default = 5.0 * xi0 if xi0 else 5.0
    xmax = vals.get("xi_max", xmax_default)
    if xmin is not None and xmax is not None:
        if count and count > 1 and not xmax > xmin:
            issues.append("xi_max: must exceed xi_min")
        if spacing == "log" and xmin <= 0:
            issues.append("xi_min: log spacing needs xi_min > 0")

    methods = vals.get("methods", [rates.ANALYTIC]) or []
    if not methods:
        issues.append("methods: at least one method is required")
    for m in methods:
        if m not in rates.METHODS:
            issues.append(f"methods: unknown method {m!r}")
    if rates.SPIN_BATH_EQ10 in methods and gamma2 is None:
        issues.append("methods: spin-bath-eq10 needs gamma2")
    highfreq = vals.get("highfreq", "none")
    if highfreq not in ("none", "matched"):
        issues.append("highfreq: must be 'none' or 'matched'")
    elif highfreq == "matched" and gamma2 is None:
        issues.append("highfreq: 'matched' needs gamma2")
    for key in ("n_modes", "n_max", "n_spins", "seeds", "n_realizations", "ed_cap"):
        v = vals.get(key)
        if v is not None and v < 1:
            issues.append(f"{key}: must be >= 1")
    if vals.get("n_realizations") is not None and vals["n_realizations"] < 2:
        issues.append("n_realizations: must be >= 2")
    dt = vals.get("dt")
    if dt is not None and xi0 and (dt <= 0 or dt > 0.1 / xi0 * (1 + 1e-12)):
        issues.append("dt: must lie in (0, 0.1/xi0]")
    if issues:
        raise ConfigError(issues)

    extra = {k: vals[k] for k in ("n_modes", "n_max", "omega_max", "ed_t_max", "ed_cap",
                                   "n_spins", "seeds", "eta", "n_realizations", "dt", "seed",
                                   "output", "compare") if vals.get(k) is not None}
    return RunConfig(params=rates.TwoLevelParams(float(delta), 0.0,
                                                 None if gamma2 is None else float(gamma2)),
                     xi0=float(xi0), alpha=float(alpha), temperature=float(temperature),
                     bath=bath, highfreq=highfreq, xi_min=float(xmin), xi_max=float(xmax),
                     xi_count=int(count), xi_spacing=spacing, methods=list(methods),
                     unit=unit, preset=preset, **extra)


def _bath_descriptor(vals, alpha, xi0, base_dir, issues):
    if "bath_descriptor" in vals:
        d = vals["bath_descriptor"]
        try:
            spectral.from_descriptor(d)
        except Exception as exc:
            issues.append(f"bath_descriptor: {exc}")
        return d
    family = vals.get("bath", spectral.OHMIC)
    if family == spectral.OHMIC:
        return {"family": spectral.OHMIC, "alpha": alpha, "xi0": xi0}
    if family == spectral.TABULATED:
        table = vals.get("bath_table")
        if table is None:
            issues.append("bath_table: required for a tabulated bath")
            return {}
        p = Path(table)
        if not p.is_absolute():
            p = Path(base_dir) / p
        if not p.exists():
            issues.append(f"bath_table: file not found: {p}")
            return {}
        try:
            spec = spectral.load_table(p)
        except Exception as exc:
            issues.append(f"bath_table: {exc}")
            return {}
        return spec.describe()
    issues.append(f"bath: unsupported family {family!r} (use ohmic-exp-cutoff or tabulated"
                  ", or bath_descriptor in JSON)")
    return {}
