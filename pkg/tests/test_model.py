import numpy as np
import pytest
from dataclasses import replace

from conftest import clean_link
from fbqkd.coincidence import find_coincidences
from fbqkd.config import default_link_config, spool_for_length
from fbqkd.detection import simulate_streams
from fbqkd.model import detector_singles_hz, outcome_event_rates, predict


class TestPredictions:
    def test_shapes_and_bounds(self):
        pred = predict(default_link_config())
        assert 0.0 < pred.eps_z < 0.5
        assert 0.0 < pred.eps_x < 0.5
        assert 0.0 < pred.sifted_rate_hz < pred.total_rate_hz
        assert pred.sift_ratio == pytest.approx(pred.sifted_rate_hz / pred.total_rate_hz)
        assert pred.car > 1.0

    def test_longer_fiber_degrades_link(self):
        link = default_link_config()
        near = predict(replace(link, spool=spool_for_length(0.0)))
        far = predict(replace(link, spool=spool_for_length(26.0)))
        assert far.sifted_rate_hz < near.sifted_rate_hz
        assert far.eps_z > near.eps_z
        assert far.eps_x > near.eps_x
        assert far.skr_bps < near.skr_bps

    def test_event_rates_are_nonnegative(self):
        true, acc = outcome_event_rates(default_link_config())
        assert np.all(true >= 0) and np.all(acc >= 0)


class TestAgainstSimulation:
    def test_singles_rates_match_streams(self):
        link = clean_link(p_werner=0.9, seed=900)
        duration = 5.0
        streams = simulate_streams(link, duration)
        singles = detector_singles_hz(link)
        for det, times in streams.items():
            expected = singles[det] * duration
            if expected < 50:
                continue
            assert len(times) == pytest.approx(expected, abs=5 * np.sqrt(expected))

    def test_event_rate_matches_streams(self):
        link = default_link_config(seed=901)
        duration = 10.0
        streams = simulate_streams(link, duration)
        events = find_coincidences(streams, link.window_ps, link.delays)
        true, acc = outcome_event_rates(link)
        expected = (true + acc).sum() * duration
        assert len(events) == pytest.approx(expected, rel=0.05)
