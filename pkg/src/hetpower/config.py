"""Scenario configuration: reference defaults, strict JSON round-trip.

Every tunable of the reference scenario lives here. The JSON schema
mirrors the nested dataclasses; unknown keys are rejected so typos fail
loudly, and the fully-resolved configuration is embedded into every
output artifact for provenance.

Note on noise power: the link-budget references leave the receiver noise
unspecified. The default is thermal noise over 10 MHz with a 9 dB noise
figure, -174 + 70 + 9 = -95 dBm. It shifts absolute transmit powers but
cancels in the baseline/overlay power-gain ratio reported by campaigns.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .geometry import DEFAULT_GRID_OFFSET_KM, SECTORS_PER_SITE
from .propagation import PropagationParams


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0:
        raise ValueError("dBm undefined for non-positive power")
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class LayoutParams:
    cell_count: int = 19
    cell_radius_km: float = 1.0


@dataclass(frozen=True)
class OverlayParams:
    enabled: bool = True
    block_m: float = 200.0
    street_m: float = 30.0
    grid_offset_x_km: float = DEFAULT_GRID_OFFSET_KM[0]
    grid_offset_y_km: float = DEFAULT_GRID_OFFSET_KM[1]


@dataclass(frozen=True)
class ScenarioConfig:
    """All tunables of a simulation campaign (defaults: reference scenario)."""

    layout: LayoutParams = field(default_factory=LayoutParams)
    overlay: OverlayParams = field(default_factory=OverlayParams)
    propagation: PropagationParams = field(default_factory=PropagationParams)
    learning_power_W: float = 5.0
    common_rate_bps_hz: float = 1.0
    discard_count: int = 3
    discard_min: int = 3
    discard_max: int = 10
    drops: int = 100
    base_seed: int = 1
    cap_macro_dBm: float = 43.0
    cap_micro_dBm: float = 33.0
    cap_pico_dBm: float = 30.0
    noise_dBm: float = -95.0
    solver_mode: str = "auto"  # analytic | lp | auto
    discard_metric: str = "sinr"  # sinr | path_loss
    force_sleep: bool = True  # macro sectors with a better micro route stay silent
    placement_max_attempts: int = 10000
    sleep_threshold_W: float = 1e-3

    @property
    def target_sinr(self) -> float:
        """Common linear SINR target, 2**rate - 1."""
        return 2.0 ** self.common_rate_bps_hz - 1.0

    @property
    def noise_W(self) -> float:
        return dbm_to_watts(self.noise_dBm)

    @property
    def user_count(self) -> int:
        return self.layout.cell_count * SECTORS_PER_SITE

    def caps_W(self) -> dict:
        return {
            "macro": dbm_to_watts(self.cap_macro_dBm),
            "micro": dbm_to_watts(self.cap_micro_dBm),
            "pico": dbm_to_watts(self.cap_pico_dBm),
        }

    def validate(self) -> None:
        if self.layout.cell_count < 1:
            raise ConfigurationError("layout.cell_count must be >= 1")
        if self.layout.cell_radius_km <= 0:
            raise ConfigurationError("layout.cell_radius_km must be positive")
        self.propagation.validate()
        if self.learning_power_W <= 0:
            raise ConfigurationError("learning_power_W must be positive")
        if self.common_rate_bps_hz <= 0:
            raise ConfigurationError("common_rate_bps_hz must be positive")
        users = self.user_count
        for name in ("discard_count", "discard_min", "discard_max"):
            value = getattr(self, name)
            if not 0 <= value < users:
                raise ConfigurationError(
                    f"{name}={value} must be in [0, {users}) for {users} users"
                )
        if self.discard_min > self.discard_max:
            raise ConfigurationError("discard_min must be <= discard_max")
        if self.drops < 1:
            raise ConfigurationError("drops must be >= 1")
        if self.solver_mode not in ("analytic", "lp", "auto"):
            raise ConfigurationError(
                f"solver_mode={self.solver_mode!r} not in analytic|lp|auto"
            )
        if self.discard_metric not in ("sinr", "path_loss"):
            raise ConfigurationError(
                f"discard_metric={self.discard_metric!r} not in sinr|path_loss"
            )
        if self.placement_max_attempts < 1:
            raise ConfigurationError("placement_max_attempts must be >= 1")
        if self.sleep_threshold_W < 0:
            raise ConfigurationError("sleep_threshold_W must be >= 0")


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Fully-resolved nested dict (the provenance form)."""
    return dataclasses.asdict(cfg)


def _from_section(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigurationError(
            f"unknown key {path}.{sorted(unknown)[0]} (valid: {sorted(names)})"
        )
    return cls(**data)


def config_from_dict(data: dict) -> ScenarioConfig:
    """Strict parse: unknown keys anywhere raise ConfigurationError."""
    if not isinstance(data, dict):
        raise ConfigurationError("config root must be an object")
    sections = {"layout": LayoutParams, "overlay": OverlayParams, "propagation": PropagationParams}
    scalar_names = {
        f.name for f in dataclasses.fields(ScenarioConfig) if f.name not in sections
    }
    kwargs = {}
    for key, value in data.items():
        if key in sections:
            kwargs[key] = _from_section(sections[key], value, key)
        elif key in scalar_names:
            kwargs[key] = value
        else:
            raise ConfigurationError(
                f"unknown key {key} (valid: {sorted(scalar_names | set(sections))})"
            )
    try:
        cfg = ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    return cfg


def load_config(path) -> ScenarioConfig:
    """Read a JSON config file and validate it."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path}: invalid JSON ({exc})") from exc
    cfg = config_from_dict(data)
    cfg.validate()
    return cfg
