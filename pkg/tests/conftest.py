"""Shared test helpers."""
from __future__ import annotations

from dataclasses import replace

import pytest

from fbqkd.config import LinkConfig, default_link_config
from fbqkd.detection import DETECTOR_IDS, BackgroundConfig, DetectorConfig, NoiseConfig, PathLossTable
from fbqkd.photonics import SourceConfig


@pytest.fixture(scope="session")
def default_link() -> LinkConfig:
    return default_link_config()


def clean_link(
    alice_db: float = 8.0,
    bob_db: float = 16.0,
    brightness: float = 3.125e6,
    p_werner: float = 1.0,
    x_flip: float = 0.0,
    seed: int = 7,
) -> LinkConfig:
    """A background-free link with uniform losses, for distribution checks.

    The default pair rate (0.5 MHz) keeps the accidental fraction below
    1e-3 so decoded outcomes reflect the state probabilities directly.
    """
    detectors = {
        did: DetectorConfig(id=did, dark_rate_hz=0.0, jitter_sigma_ps=35.0) for did in DETECTOR_IDS
    }
    return default_link_config(
        source=SourceConfig(
            brightness_hz_per_mw2=brightness,
            pump_power_mw=0.4,
            saturation_power_mw=1e6,
            car_target=20.0,
        ),
        losses=PathLossTable(
            alice_db={s: alice_db for s in "+-01"},
            bob_db={s: bob_db for s in "+-01"},
        ),
        background=BackgroundConfig(),
        noise=NoiseConfig(p_werner=p_werner, x_flip_prob=x_flip),
        detectors=detectors,
        seed=seed,
    )
