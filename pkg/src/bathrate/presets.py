"""Single-molecule-magnet presets and exact energy-unit conversion.

Anisotropy constants D and |E| are stored in kelvin; the Fe8 energy scales
in the units they are usually quoted in (microkelvin for Delta, millikelvin
for xi0).  Mn12 is tabulated with E = 0 even though a biaxial magnet should
have 0 < |E| < D; the value is kept as printed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import InvalidArgument

UNITS = {"K": Fraction(1), "mK": Fraction(1, 10**3), "uK": Fraction(1, 10**6)}


def convert(value, src, dst):
    """Convert an energy between K, mK and uK with exact rational factors."""
    try:
        factor = UNITS[src] / UNITS[dst]
    except KeyError as exc:
        raise InvalidArgument(f"unknown unit {exc.args[0]!r}; use one of {sorted(UNITS)}") from None
    if value is None:
        return None
    if isinstance(value, (int, Fraction)):
        return Fraction(value) * factor
    return float(Fraction(value) * factor)


@dataclass(frozen=True)
class SmmPreset:
    name: str
    S: Fraction
    D: float                       # K
    E: float                       # K
    delta: tuple | None = None     # (value, unit)
    xi0: tuple | None = None
    notes: str = ""

    def __post_init__(self):
        if not self.D > 0:
            raise InvalidArgument("D must be positive")
        if not abs(self.E) < self.D:
            raise InvalidArgument("|E| must be smaller than D")

    def energy(self, which, unit):
        """``delta`` or ``xi0`` in ``unit``; raises if the preset has none."""
        pair = getattr(self, which)
        if pair is None:
            raise InvalidArgument(f"preset {self.name} has no {which}; give it explicitly")
        value, src = pair
        return convert(value, src, unit)

    def row(self):
        return {"name": self.name, "S": str(self.S), "D_K": self.D, "E_K": self.E,
                "delta": "" if self.delta is None else f"{self.delta[0]} {self.delta[1]}",
                "xi0": "" if self.xi0 is None else f"{self.xi0[0]} {self.xi0[1]}",
                "notes": self.notes}


PRESETS = {p.name: p for p in (
    SmmPreset("Fe8", Fraction(10), 0.295, 0.056, (0.1, "uK"), (10, "mK"),
              "Delta ~ 0.1 uK, xi0 ~ 10 mK"),
    SmmPreset("Mn12", Fraction(10), 0.65, 0.0, None, None,
              "E = 0 as tabulated, although 0 < |E| < D is expected"),
    SmmPreset("Mn4-9/2", Fraction(9, 2), 0.68, 0.064),
    SmmPreset("Mn4-8", Fraction(8), 0.43, 0.029),
)}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidArgument(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
