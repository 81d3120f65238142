import numpy as np
import pytest
from dataclasses import replace

from conftest import clean_link
from fbqkd.coincidence import CoincidenceSet, find_coincidences
from fbqkd.detection import DETECTOR_IDS, OUTCOMES, DelayMap, simulate_streams
from fbqkd.errors import InsufficientDataError
from fbqkd.keyproc import (
    SiftedKey,
    SkrParams,
    binary_entropy,
    mann_kendall_pvalue,
    qber,
    sift,
    skr_lower_bound,
)


def events_for(outcomes, times=None):
    dm = DelayMap()
    rows = []
    for i, o in enumerate(outcomes):
        da, db = dm.detector_pair(o)
        t = (times or {}).get(i, 1000 * i)
        rows.append(
            (DETECTOR_IDS.index(da), DETECTOR_IDS.index(db), t, dm.delay_ps(o), OUTCOMES.index(o))
        )
    cols = list(zip(*rows))
    return CoincidenceSet(*cols)


class TestSift:
    def test_matched_z_events_all_kept(self):
        events = events_for(["00", "11", "01", "10"])
        key, ratio = sift(events)
        assert ratio == 1.0
        assert [b.alice_bit for b in key] == [0, 1, 0, 1]
        assert [b.bob_bit for b in key] == [0, 1, 1, 0]
        assert all(b.basis == "Z" for b in key)

    def test_uniform_outcomes_keep_half(self):
        events = events_for(list(OUTCOMES))
        key, ratio = sift(events)
        assert ratio == 0.5
        assert len(key) == 8

    def test_bit_mapping_in_x(self):
        key, _ = sift(events_for(["++", "--", "+-"]))
        assert [b.alice_bit for b in key] == [0, 1, 0]
        assert [b.bob_bit for b in key] == [0, 1, 1]

    def test_mismatched_bases_never_emit(self):
        for o in OUTCOMES:
            key, _ = sift(events_for([o]))
            matched = (o[0] in "+-") == (o[1] in "+-")
            assert len(key) == (1 if matched else 0)

    def test_empty_events(self):
        key, ratio = sift(CoincidenceSet.empty())
        assert len(key) == 0 and ratio == 0.0


class TestQber:
    def test_identical_strings(self):
        key, _ = sift(events_for(["00", "11", "00"]))
        rate, se = qber(key, "Z")
        assert rate == 0.0 and se == 0.0

    def test_complementary_strings(self):
        key, _ = sift(events_for(["01", "10", "01"]))
        rate, _ = qber(key, "Z")
        assert rate == 1.0

    def test_standard_error(self):
        key, _ = sift(events_for(["00"] * 3 + ["01"]))
        rate, se = qber(key, "Z")
        assert rate == pytest.approx(0.25)
        assert se == pytest.approx(np.sqrt(0.25 * 0.75 / 4))

    def test_empty_basis_rejected(self):
        key, _ = sift(events_for(["00"]))
        with pytest.raises(InsufficientDataError):
            qber(key, "X")


class TestBinaryEntropy:
    def test_maximum(self):
        assert binary_entropy(0.5) == 1.0

    def test_edge_convention(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_reference_value(self):
        assert binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-4)

    def test_domain_checked(self):
        with pytest.raises(ValueError):
            binary_entropy(-0.01)
        with pytest.raises(ValueError):
            binary_entropy(1.01)

    def test_array_input(self):
        out = binary_entropy(np.array([0.0, 0.5, 1.0]))
        assert np.allclose(out, [0.0, 1.0, 0.0])


class TestSkr:
    def test_noiseless_identity(self):
        params = SkrParams(f=1.0, sifting_ratio=0.5, qubit_rate_hz=800.0, alpha=0.7, eta=0.85)
        assert skr_lower_bound(0.0, 0.0, params) == 0.5 * 800.0 * 0.7 * 0.85

    def test_near_threshold_is_tiny(self):
        params = SkrParams(f=1.0, sifting_ratio=1.0, qubit_rate_hz=1.0)
        assert 0.0 <= skr_lower_bound(0.11, 0.11, params) < 1e-3

    def test_clamped_beyond_threshold(self):
        params = SkrParams(f=1.0, sifting_ratio=1.0, qubit_rate_hz=1.0)
        assert skr_lower_bound(0.12, 0.12, params) == 0.0

    def test_monotone_in_both_error_rates(self):
        params = SkrParams(f=1.1, sifting_ratio=0.5, qubit_rate_hz=100.0)
        grid = np.linspace(0.0, 0.2, 21)
        values = np.array([[skr_lower_bound(ez, ex, params) for ex in grid] for ez in grid])
        assert np.all(np.diff(values, axis=0) <= 1e-12)
        assert np.all(np.diff(values, axis=1) <= 1e-12)

    def test_linear_in_scale_factors(self):
        base = SkrParams(f=1.1, sifting_ratio=0.25, qubit_rate_hz=100.0, alpha=0.5, eta=0.5)
        v0 = skr_lower_bound(0.03, 0.05, base)
        assert skr_lower_bound(0.03, 0.05, replace(base, sifting_ratio=0.5)) == pytest.approx(2 * v0)
        assert skr_lower_bound(0.03, 0.05, replace(base, qubit_rate_hz=300.0)) == pytest.approx(3 * v0)
        assert skr_lower_bound(0.03, 0.05, replace(base, alpha=1.0)) == pytest.approx(2 * v0)
        assert skr_lower_bound(0.03, 0.05, replace(base, eta=0.25)) == pytest.approx(v0 / 2)

    def test_parameter_domains(self):
        with pytest.raises(ValueError):
            SkrParams(f=0.9)
        with pytest.raises(ValueError):
            SkrParams(sifting_ratio=0.0)
        with pytest.raises(ValueError):
            skr_lower_bound(0.6, 0.0, SkrParams())


class TestMannKendall:
    def test_strong_trend_detected(self):
        x = np.linspace(0, 1, 30) + 0.01 * np.random.default_rng(0).standard_normal(30)
        assert mann_kendall_pvalue(x) < 0.01

    def test_flat_noise_not_flagged(self):
        x = np.random.default_rng(3).standard_normal(30)
        assert mann_kendall_pvalue(x) > 0.05

    def test_short_series_rejected(self):
        with pytest.raises(InsufficientDataError):
            mann_kendall_pvalue([1.0, 2.0])


class TestZBasisImmunity:
    def test_z_errors_unchanged_by_constant_rotation(self):
        # matched-Z statistics do not depend on the shared phase
        results = []
        for theta in (0.0, 1.3):
            link = clean_link(p_werner=0.9, seed=400)
            streams = simulate_streams(link, 8.0, theta_of_t=lambda t, th=theta: np.full_like(t, th))
            events = find_coincidences(streams, link.window_ps, link.delays)
            key, _ = sift(events)
            rate, se = qber(key, "Z")
            results.append((rate, se, len(key)))
        (r0, s0, _), (r1, s1, _) = results
        assert abs(r0 - r1) <= 3 * np.hypot(s0, s1)
        # while the X statistics shift strongly
        xs = []
        for theta in (0.0, 1.3):
            link = clean_link(p_werner=0.9, seed=401)
            streams = simulate_streams(link, 8.0, theta_of_t=lambda t, th=theta: np.full_like(t, th))
            events = find_coincidences(streams, link.window_ps, link.delays)
            key, _ = sift(events)
            xs.append(qber(key, "X")[0])
        assert xs[1] - xs[0] > 0.1
