"""Run configuration shared by the command-line front end."""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path


class AreaScaleMode(enum.Enum):
    C1_UNITS = "C1Units"
    UNIT_TOTAL = "UnitTotal"


@dataclass(frozen=True)
class RunConfig:
    """Tolerances and resolutions for one CLI invocation.

    Attributes
    ----------
    newton_tol
        Gradient norm accepted at a polished critical point.
    flow_tol
        Relative tolerance of the Runge-Kutta flow integrator.
    action_tol, area_tol
        Exactness and D-monotonicity thresholds for loop reports.
    loop_samples
        Samples per constructed loop; a power of two so halving is exact.
    """

    newton_tol: float = 1e-10
    flow_tol: float = 1e-10
    action_tol: float = 1e-6
    area_tol: float = 1e-6
    grid_density: int = 64
    loop_samples: int = 256
    psi_cap: float = 40.0
    area_scale_mode: AreaScaleMode = AreaScaleMode.C1_UNITS

    def __post_init__(self):
        for name in ("newton_tol", "flow_tol", "action_tol", "area_tol", "psi_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.grid_density < 4:
            raise ValueError("grid_density must be at least 4")
        n = self.loop_samples
        if n < 64 or n & (n - 1):
            raise ValueError("loop_samples must be a power of two >= 64")
        if not isinstance(self.area_scale_mode, AreaScaleMode):
            object.__setattr__(self, "area_scale_mode", AreaScaleMode(self.area_scale_mode))

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["area_scale_mode"] = self.area_scale_mode.value
        return out

    def with_scale(self, flag: str | None) -> "RunConfig":
        """Apply the ``--scale {c1,unit}`` flag."""
        if flag is None:
            return self
        mode = {"c1": AreaScaleMode.C1_UNITS, "unit": AreaScaleMode.UNIT_TOTAL}[flag]
        return replace(self, area_scale_mode=mode)
