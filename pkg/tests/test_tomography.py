import math

import numpy as np
import pytest

from trianglet.errors import ContractViolation, ReconstructionFailed
from trianglet.measurement import diagonal_basis, product_projector
from trianglet.qmath import KET_0, DensityMatrix, born_prob, kron, pure_fidelity
from trianglet.states import apply_white_noise, bell_phi_plus, psi_r
from trianglet.tomography import (PROJECTORS, SETTINGS, TomographyCounts, expected_counts,
                                  fidelity_report, log_likelihood, log_likelihood_grad,
                                  mle_reconstruct, outcome_probabilities, params_to_rho,
                                  reconstruction_json, simulate_tomography, t_to_params)

SETTING_INDEX = {(s.basis_1, s.basis_2): i for i, s in enumerate(SETTINGS)}


class TestSettings:
    def test_nine_settings_four_outcomes(self):
        assert len(SETTINGS) == 9 and PROJECTORS.shape == (9, 4, 4, 4)
        assert np.allclose(PROJECTORS.sum(axis=1), np.eye(4))

    def test_unknown_basis(self):
        from trianglet.tomography import TomographySetting
        with pytest.raises(ContractViolation):
            TomographySetting("HV", "XY")


class TestSimulation:
    def test_product_state_hv(self):
        c = simulate_tomography(kron(KET_0, KET_0).density(), 500, 0)
        row = c.counts[SETTING_INDEX[("HV", "HV")]]
        assert list(row) == [500, 0, 0, 0]

    def test_maximally_mixed(self):
        n = 40_000
        c = simulate_tomography(DensityMatrix.maximally_mixed(4), n, 1)
        sigma = math.sqrt(n * 0.25 * 0.75)
        assert np.all(np.abs(c.counts - n / 4) < 5 * sigma)

    def test_psi_r_diagonal_correlations(self):
        n = 100_000
        rho = psi_r(0.4364).density()
        c = simulate_tomography(rho, n, 2).counts[SETTING_INDEX[("DA", "DA")]]
        d = diagonal_basis()
        for k, (o1, o2) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
            p = born_prob(rho, product_projector(d, o1, d, o2))
            assert abs(c[k] / n - p) < 4 * math.sqrt(p * (1 - p) / n)

    def test_zero_shots(self):
        with pytest.raises(ContractViolation):
            simulate_tomography(bell_phi_plus().density(), 0, 0)

    def test_deterministic(self):
        rho = bell_phi_plus().density()
        assert np.array_equal(simulate_tomography(rho, 100, 4).counts, simulate_tomography(rho, 100, 4).counts)

    def test_csv_round_trip(self, tmp_path):
        c = simulate_tomography(psi_r(0.5).density(), 1000, 3)
        c.to_csv(tmp_path / "c.csv")
        assert (tmp_path / "c.csv").read_text().startswith("setting_1,setting_2,outcome_1,outcome_2,count\n")
        assert np.array_equal(TomographyCounts.from_csv(tmp_path / "c.csv").counts, c.counts)

    def test_counts_shape(self):
        with pytest.raises(ContractViolation):
            TomographyCounts(np.ones((3, 4)))


class TestLikelihood:
    def test_parametrization_is_physical(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            DensityMatrix(params_to_rho(rng.normal(size=16)))

    def test_gradient_matches_finite_difference(self):
        counts = simulate_tomography(apply_white_noise(psi_r(0.6), 0.85), 2000, 5)
        x = np.random.default_rng(1).normal(size=16)
        g = log_likelihood_grad(x, counts)
        h = 1e-6
        fd = np.array([(log_likelihood(x + h * e, counts) - log_likelihood(x - h * e, counts)) / (2 * h)
                       for e in np.eye(16)])
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-4)

    def test_true_state_beats_mixed(self):
        rho = bell_phi_plus().density()
        counts = expected_counts(rho, 1000)
        x_mixed = t_to_params(np.eye(4) / 2)
        rec = mle_reconstruct(counts)
        assert rec.log_likelihood > log_likelihood(x_mixed, counts)


class TestReconstruction:
    def test_exact_phi_plus(self):
        rec = mle_reconstruct(expected_counts(bell_phi_plus().density(), 1e5))
        assert pure_fidelity(bell_phi_plus(), rec.rho) >= 1 - 1e-6

    def test_sampled_psi_r(self):
        rec = mle_reconstruct(simulate_tomography(psi_r(0.4364).density(), 100_000, 6))
        assert pure_fidelity(psi_r(0.4364), rec.rho) >= 0.999

    def test_monotone_trace(self):
        rec = mle_reconstruct(simulate_tomography(apply_white_noise(psi_r(0.4364), 0.95), 5000, 7))
        assert all(b >= a for a, b in zip(rec.trace, rec.trace[1:]))
        assert rec.iterations == len(rec.trace) - 1

    def test_deterministic(self):
        counts = simulate_tomography(psi_r(0.7).density(), 3000, 8)
        a, b = mle_reconstruct(counts), mle_reconstruct(counts)
        assert np.array_equal(a.rho.entries, b.rho.entries)

    def test_iteration_cap(self):
        counts = simulate_tomography(psi_r(0.7).density(), 3000, 8)
        with pytest.raises(ReconstructionFailed) as info:
            mle_reconstruct(counts, max_iter=1)
        assert isinstance(info.value.best_rho, DensityMatrix)

    def test_needs_shots_everywhere(self):
        c = np.full((9, 4), 10.0)
        c[3] = 0
        with pytest.raises(ContractViolation):
            mle_reconstruct(TomographyCounts(c))

    def test_outcome_probabilities_sum(self):
        p = outcome_probabilities(psi_r(0.3).density())
        assert np.allclose(p.sum(axis=1), 1.0)


class TestFidelityReport:
    def test_own_projector(self):
        rep = fidelity_report(bell_phi_plus().density(), bell_phi_plus())
        assert rep.fidelity == pytest.approx(1.0, abs=1e-15) and rep.std_error == 0.0

    def test_white_noise_within_ci(self):
        v = 0.9
        rho = apply_white_noise(bell_phi_plus(), v)
        counts = simulate_tomography(rho, 20_000, 9)
        rep = fidelity_report(mle_reconstruct(counts).rho, bell_phi_plus(), counts, n_boot=30, seed=1)
        assert abs(rep.fidelity - (v + (1 - v) / 4)) < 3 * rep.std_error
        assert len(rep.bootstrap) == 30

    def test_error_scales_as_inverse_sqrt_shots(self):
        rho = apply_white_noise(psi_r(0.4364), 0.9)
        errors = []
        for shots in (1_000, 10_000, 100_000, 1_000_000):
            counts = simulate_tomography(rho, shots, 1)
            rep = fidelity_report(mle_reconstruct(counts).rho, psi_r(0.4364), counts, n_boot=100, seed=2)
            errors.append(rep.std_error)
        slope = np.polyfit([3, 4, 5, 6], np.log10(errors), 1)[0]
        assert abs(slope + 0.5) < 0.12

    def test_json(self):
        import json
        counts = expected_counts(bell_phi_plus().density(), 1000)
        rec = mle_reconstruct(counts)
        doc = json.loads(reconstruction_json(rec, fidelity_report(rec.rho, bell_phi_plus()), "phi_plus"))
        assert np.array(doc["real"]).shape == (4, 4) and doc["fidelity"]["target"] == "phi_plus"
