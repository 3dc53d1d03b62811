from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace


class ConfigError(ValueError):
    pass


class IntegrationMode(str, enum.Enum):
    STATUS_QUO = "StatusQuo"
    MODERATE = "Moderate"
    FULL = "Full"


class StrategyKind(str, enum.Enum):
    CDPA = "CDPA"
    SDPA = "SDPA"
    SCPA = "SCPA"


@dataclass(frozen=True)
class SimConfig:
    """Service and simulation parameters. Fleet size, penetration and the
    time step are desk-scale defaults."""

    max_wait_s: float = 600.0
    detour_factor: float = 0.4
    boarding_time_s: float = 60.0
    assignment_reward: float = 1e9
    cap_customers: int = 4
    cap_parcels: int = 8
    repo_period_s: float = 900.0
    parcel_deadline_s: float = 22 * 3600.0
    threshold: float = 0.8
    mode: IntegrationMode = IntegrationMode.FULL
    strategy: StrategyKind = StrategyKind.CDPA
    fleet_size: int = 20
    time_step_s: float = 60.0
    start_time_s: float = 0.0
    end_time_s: float = 86400.0
    seed: int = 0
    penetration: float = 1.0
    parcel_share: float = 0.1
    truck_capacity: int = 100
    scpa_background_dropoff: bool = True
    rebalancing: bool = True
    # cut-off for draining schedules after end_time_s
    drain_limit_s: float = 4 * 3600.0

    def __post_init__(self):
        object.__setattr__(self, "mode", IntegrationMode(self.mode))
        object.__setattr__(self, "strategy", StrategyKind(self.strategy))
        for name in ("max_wait_s", "boarding_time_s", "repo_period_s", "time_step_s"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must lie in [0, 1]")
        if self.detour_factor < 0:
            raise ConfigError("detour_factor must be >= 0")
        if not self.end_time_s > self.start_time_s:
            raise ConfigError("end_time_s must be greater than start_time_s")
        if self.cap_customers < 1 or self.cap_parcels < 1 or self.truck_capacity < 1:
            raise ConfigError("capacities must be >= 1")
        if self.fleet_size < 0:
            raise ConfigError("fleet_size must be >= 0")
        if not 0.0 <= self.penetration <= 1.0:
            raise ConfigError("penetration must lie in [0, 1]")
        if not 0.0 <= self.parcel_share <= 1.0:
            raise ConfigError("parcel_share must lie in [0, 1]")

    @property
    def max_travel_factor(self) -> float:
        return 1.0 + self.detour_factor

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, data: dict) -> "SimConfig":
        unknown = sorted(set(data) - set(cls.field_names()))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
