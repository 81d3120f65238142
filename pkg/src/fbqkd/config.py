"""Scenario configuration: one key-value tree with a versioned schema.

The tree aggregates every parameter of a link scenario. It loads from and
saves to JSON; unknown keys are rejected so a typo cannot silently fall
back to a default. All randomness of a scenario derives from the single
root seed via named substreams.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields, replace

from .channel import FiberSpool
from .detection import (
    DETECTOR_IDS,
    BackgroundConfig,
    DelayMap,
    DetectorConfig,
    NoiseConfig,
    PathLossTable,
    default_detectors,
)
from .errors import ConfigError
from .keyproc import SkrParams
from .photonics import ModulatorConfig, SourceConfig

SCHEMA_VERSION = 1

#: Measured added loss (dB) of the bench spool assemblies, as excess over
#: the bulk 0.19 dB/km coefficient.
SPOOL_EXCESS_DB = {0.0: 0.0, 2.6: 0.906, 8.0: 0.48, 10.6: 1.186, 26.0: 0.06}


@dataclass(frozen=True)
class TemperatureConfig:
    """Ambient-temperature process parameters (seeded from the root seed)."""

    initial_c: float = 22.0
    step_rms_per_600s: float = 0.03
    correlation_time_s: float = 1800.0

    def __post_init__(self):
        if self.step_rms_per_600s < 0:
            raise ConfigError("step_rms_per_600s must be >= 0")
        if self.correlation_time_s <= 0:
            raise ConfigError("correlation_time_s must be positive")


@dataclass(frozen=True)
class LockConfig:
    """Phase-compensation loop parameters."""

    cadence_s: float = 2.0
    sweep_points: int = 24
    sweep_noise_rel: float = 0.01
    proxy_factor: float = 1.0

    def __post_init__(self):
        if self.cadence_s <= 0:
            raise ConfigError("cadence_s must be positive")
        if self.sweep_points < 5:
            raise ConfigError("sweep_points must be >= 5")
        if not 0.0 <= self.sweep_noise_rel < 1.0:
            raise ConfigError("sweep_noise_rel must lie in [0, 1)")
        if self.proxy_factor <= 0:
            raise ConfigError("proxy_factor must be positive")


@dataclass(frozen=True)
class LinkConfig:
    """Full scenario parameter set."""

    schema_version: int = SCHEMA_VERSION
    source: SourceConfig = field(default_factory=SourceConfig)
    modulator: ModulatorConfig = field(default_factory=ModulatorConfig)
    spool: FiberSpool = field(default_factory=FiberSpool)
    temperature: TemperatureConfig = field(default_factory=TemperatureConfig)
    detectors: dict = field(default_factory=default_detectors)
    delays: DelayMap = field(default_factory=DelayMap)
    losses: PathLossTable = field(default_factory=PathLossTable)
    background: BackgroundConfig = field(default_factory=BackgroundConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    skr: SkrParams = field(default_factory=SkrParams)
    window_ps: int = 700
    lock: LockConfig = field(default_factory=LockConfig)
    drift_slope_deg_per_km_c: float | None = None
    seed: int = 20260810

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if set(self.detectors) != set(DETECTOR_IDS):
            raise ConfigError(f"detectors must cover exactly {DETECTOR_IDS}")
        if self.window_ps <= 0:
            raise ConfigError("window_ps must be positive")
        if self.window_ps / 2 >= self.delays.tau_ps / 2:
            raise ConfigError(
                f"window {self.window_ps} ps is too wide for the {self.delays.tau_ps} ps delay unit"
            )
        if self.drift_slope_deg_per_km_c is not None and self.drift_slope_deg_per_km_c <= 0:
            raise ConfigError("drift_slope_deg_per_km_c must be positive when set")


def default_link_config(**overrides) -> LinkConfig:
    """The calibrated bench scenario; keyword overrides replace whole fields."""
    base = LinkConfig(
        background=BackgroundConfig(
            alice_arm_hz=1.41762e6,
            bob_arm_hz=9.85862e6,
            bob_receiver_hz=3.08278e6,
        ),
        noise=NoiseConfig(p_werner=0.9213, x_flip_prob=0.05771),
    )
    return replace(base, **overrides) if overrides else base


def spool_for_length(length_km: float, base: FiberSpool | None = None) -> FiberSpool:
    """Spool of the given length; bench assemblies get their measured excess."""
    base = base or FiberSpool()
    excess = 0.0
    for anchor, value in SPOOL_EXCESS_DB.items():
        if abs(anchor - length_km) < 1e-9:
            excess = value
            break
    return replace(base, length_km=float(length_km), excess_loss_db=excess)


# ---------------------------------------------------------------------------
# strict (de)serialization

_LEAF_TYPES = (int, float, str, bool, type(None))


def _to_tree(value):
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            f.name: _to_tree(getattr(value, f.name))
            for f in fields(value)
            if not f.name.startswith("_")
        }
    if isinstance(value, dict):
        return {k: _to_tree(v) for k, v in value.items()}
    if isinstance(value, _LEAF_TYPES):
        return value
    raise ConfigError(f"cannot serialize value of type {type(value).__name__}")


def _from_tree(cls, tree, path):
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: expected an object, got {type(tree).__name__}")
    allowed = {f.name for f in fields(cls) if not f.name.startswith("_")}
    unknown = set(tree) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name.startswith("_") or f.name not in tree:
            continue
        value = tree[f.name]
        sub = _NESTED.get((cls, f.name))
        if sub is not None:
            value = _from_tree(sub, value, f"{path}.{f.name}")
        elif (cls, f.name) == (LinkConfig, "detectors"):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}.detectors: expected an object")
            value = {
                det: _from_tree(DetectorConfig, spec, f"{path}.detectors.{det}")
                for det, spec in value.items()
            }
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_NESTED = {
    (LinkConfig, "source"): SourceConfig,
    (LinkConfig, "modulator"): ModulatorConfig,
    (LinkConfig, "spool"): FiberSpool,
    (LinkConfig, "temperature"): TemperatureConfig,
    (LinkConfig, "delays"): DelayMap,
    (LinkConfig, "losses"): PathLossTable,
    (LinkConfig, "background"): BackgroundConfig,
    (LinkConfig, "noise"): NoiseConfig,
    (LinkConfig, "skr"): SkrParams,
    (LinkConfig, "lock"): LockConfig,
}


def config_to_dict(link: LinkConfig) -> dict:
    return _to_tree(link)


def config_from_dict(tree: dict) -> LinkConfig:
    return _from_tree(LinkConfig, tree, "link")


def save_config(link: LinkConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(link), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(path) -> LinkConfig:
    try:
        with open(path) as fh:
            tree = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(tree)
