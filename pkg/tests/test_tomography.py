import numpy as np
import pytest
from scipy.linalg import sqrtm

from fbqkd import qstate, tomography
from fbqkd.errors import InsufficientDataError
from fbqkd.qstate import bell_state, noisy_state
from fbqkd.tomography import (
    TomographyRecord,
    TomographySetting,
    linear_inversion,
    measurement_matrix,
    mle_reconstruct,
    projector_set,
    simulate_counts,
    trace_distance,
)


def uhlmann_fidelity(rho, sigma):
    """Independent mixed-state fidelity for checking reconstructions."""
    root = sqrtm(rho)
    inner = sqrtm(root @ sigma @ root)
    return float(np.real(np.trace(inner)) ** 2)


def exact_frequency_records(rho, shots=10**6):
    """Counts set to shots * true probability (rounded), the no-noise limit."""
    records = []
    for setting in projector_set(shots):
        ket = setting.joint_ket()
        prob = float(np.real(ket.conj() @ rho @ ket))
        records.append(TomographyRecord(setting, int(round(shots * max(prob, 0.0)))))
    return records


class TestProjectorSet:
    def test_thirty_six_distinct_settings(self):
        settings = projector_set()
        assert len(settings) == 36
        assert len({(s.alice_projector, s.bob_projector) for s in settings}) == 36

    def test_informationally_complete(self):
        assert np.linalg.matrix_rank(measurement_matrix(projector_set()), tol=1e-10) == 16

    def test_matched_z_eigenprojectors_are_complete(self):
        rho = noisy_state(0.77, 0.4)
        total = 0.0
        for s in projector_set():
            if s.alice_projector in ("Z+", "Z-") and s.bob_projector in ("Z+", "Z-"):
                ket = s.joint_ket()
                total += float(np.real(ket.conj() @ rho @ ket))
        assert total == pytest.approx(1.0, abs=1e-12)


class TestSimulateCounts:
    def test_forbidden_outcome_never_fires(self):
        records = simulate_counts(bell_state(0.0), 5000, seed=3)
        for r in records:
            if {r.setting.alice_projector, r.setting.bob_projector} == {"Z+", "Z-"}:
                assert r.count == 0

    def test_fully_mixed_quarter_rate(self):
        records = simulate_counts(np.eye(4, dtype=complex) / 4, 20000, seed=4)
        rates = np.array([r.count / r.setting.shots for r in records])
        assert abs(rates.mean() - 0.25) < 0.005

    def test_deterministic_given_seed(self):
        a = simulate_counts(noisy_state(0.9, 0.3), 1000, seed=9)
        b = simulate_counts(noisy_state(0.9, 0.3), 1000, seed=9)
        assert [r.count for r in a] == [r.count for r in b]


class TestMle:
    def test_exact_frequencies_recover_pure_target(self):
        rho_hat = mle_reconstruct(exact_frequency_records(bell_state(0.0)))
        assert qstate.fidelity_to_pure(rho_hat, qstate.PSI_PLUS_KET) >= 0.999

    def test_self_consistency_on_noisy_state(self):
        rho_true = noisy_state(0.92, 0.0)
        rho_hat = mle_reconstruct(simulate_counts(rho_true, 10**6, seed=21))
        assert uhlmann_fidelity(rho_hat, rho_true) >= 0.99

    def test_recovered_coherence_phase(self):
        rho_hat = mle_reconstruct(simulate_counts(bell_state(np.pi / 2), 10**6, seed=22))
        assert abs(np.angle(rho_hat[3, 0]) - np.pi / 2) < 0.05

    def test_output_is_physical_even_for_noisy_counts(self):
        rng = np.random.default_rng(1)
        records = [
            TomographyRecord(s, int(rng.integers(0, 400))) for s in projector_set(400)
        ]
        rho_hat = qstate.validate_density_matrix(mle_reconstruct(records))
        assert np.trace(rho_hat).real == pytest.approx(1.0)

    def test_likelihood_never_decreases(self):
        records = simulate_counts(noisy_state(0.8, 1.0), 5000, seed=30)
        _, info = mle_reconstruct(records, full_output=True)
        assert np.all(np.diff(info["log_likelihood"]) >= 0)

    def test_linear_inversion_agrees_with_mle(self):
        rng = np.random.default_rng(17)
        for _ in range(3):
            p = rng.uniform(0.5, 1.0)
            theta = rng.uniform(0, 2 * np.pi)
            records = simulate_counts(noisy_state(p, theta), 10**6, seed=int(rng.integers(2**31)))
            assert trace_distance(linear_inversion(records), mle_reconstruct(records)) <= 0.02

    def test_rank_deficient_input_rejected(self):
        # dropping every Y projector breaks informational completeness
        records = [
            TomographyRecord(s, 10)
            for s in projector_set(100)
            if "Y" not in s.alice_projector and "Y" not in s.bob_projector
        ]
        with pytest.raises(InsufficientDataError):
            mle_reconstruct(records)


def test_records_csv_round_trip(tmp_path):
    records = simulate_counts(noisy_state(0.9, 0.1), 500, seed=8)
    path = tmp_path / "records.csv"
    tomography.write_records_csv(path, records)
    loaded = tomography.read_records_csv(path)
    assert loaded == records


def test_density_csv_blocks(tmp_path):
    rho = bell_state(0.6)
    path = tmp_path / "rho.csv"
    tomography.write_density_csv(path, rho)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 9
    assert lines[1].startswith("re,") and lines[5].startswith("im,")
