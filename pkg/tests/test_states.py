import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trianglet.errors import AllLossError, ContractViolation, DomainError
from trianglet.qmath import KET_0, KET_1, kron, pure_fidelity
from trianglet.states import (KET_H, KET_V, PdlModel, StatePrepParams, apply_white_noise,
                              bell_phi_plus, correlation_visibility, eberhard_objective,
                              eberhard_state, optimize_theta, pdl_channel, pdl_eigenbasis,
                              pdl_filter, pdl_surviving_weight, psi_r, r_from_theta, source_state,
                              theta_from_r, visibility_for_fidelity)

# closed-form optimum: cos^2(theta*) = (sqrt(5) - 1)/2, evaluated with mpmath at 30 digits
THETA_STAR = 38.1727076270122474934683
R_STAR = 0.4643126132081269473385940
P0000_COND_STAR = 0.0901699437494742410229


class TestBasicStates:
    def test_source_state(self):
        assert np.allclose(source_state().amplitudes, [0, 1, 1, 0] / np.sqrt(2))

    def test_phi_plus(self):
        assert np.allclose(bell_phi_plus().amplitudes, [1, 0, 0, 1] / np.sqrt(2))

    def test_eberhard_amplitudes_at_38_2(self):
        # frozen from an mpmath evaluation of the defining formula
        amps = eberhard_state(38.2).amplitudes.real
        assert amps == pytest.approx([0.0, 0.6178908773233443, 0.6178908773233443,
                                      0.4862321744199738], abs=1e-12)

    def test_eberhard_ratio_is_tan_theta(self):
        a = eberhard_state(38.2).amplitudes.real
        assert a[3] / a[1] == pytest.approx(math.tan(math.radians(38.2)), rel=1e-12)

    def test_eberhard_domain(self):
        with pytest.raises(DomainError):
            eberhard_state(-90.0)
        eberhard_state(90.0)

    def test_psi_r_limits(self):
        assert np.allclose(psi_r(0.0).amplitudes, kron(KET_V, KET_H).amplitudes)
        assert pure_fidelity(source_state(), psi_r(1.0).density()) == pytest.approx(1.0)
        with pytest.raises(DomainError):
            psi_r(-0.1)


class TestThetaR:
    def test_theta_from_r_at_one(self):
        assert theta_from_r(1.0) == pytest.approx(0.0, abs=1e-12)

    def test_r_zero_rejected(self):
        with pytest.raises(DomainError):
            theta_from_r(0.0)

    def test_optimal_pair(self):
        assert theta_from_r(R_STAR) == pytest.approx(-THETA_STAR, abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_round_trip_r(self, r):
        assert r_from_theta(theta_from_r(r)) == pytest.approx(r, rel=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-89.0, 89.0))
    def test_round_trip_theta(self, theta):
        assert theta_from_r(r_from_theta(theta)) == pytest.approx(theta, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-3, 1.0))
    def test_reciprocal_r_flips_theta(self, r):
        assert theta_from_r(1.0 / r) == pytest.approx(-theta_from_r(r), abs=1e-9)


class TestOptimize:
    def test_closed_form(self):
        theta, r = optimize_theta()
        assert theta == pytest.approx(THETA_STAR, abs=1e-6)
        assert r == pytest.approx(R_STAR, abs=1e-7)

    def test_objective_value(self):
        assert eberhard_objective(THETA_STAR) == pytest.approx(P0000_COND_STAR, abs=1e-15)

    def test_objective_matches_born_rule(self):
        from trianglet.measurement import w_basis, product_projector
        from trianglet.qmath import born_prob

        w = w_basis(THETA_STAR)
        rho = eberhard_state(THETA_STAR).density()
        assert born_prob(rho, product_projector(w, 0, w, 0)) == pytest.approx(P0000_COND_STAR, abs=1e-14)


class TestPdl:
    def test_from_ratio(self):
        assert PdlModel.from_ratio(0.5) == PdlModel(1.0, 0.25)
        assert PdlModel.from_ratio(2.0) == PdlModel(0.25, 1.0)
        assert PdlModel.from_ratio(2.0).r == pytest.approx(2.0)

    def test_validation(self):
        with pytest.raises(ContractViolation):
            PdlModel(0.0, 0.5)
        with pytest.raises(ContractViolation):
            PdlModel(1.0, 0.5, 91.0)

    def test_eigenbasis_at_zero(self):
        p0, p1 = pdl_eigenbasis(0.0)
        assert np.allclose(p0.amplitudes, KET_V.amplitudes)
        assert np.allclose(p1.amplitudes, KET_H.amplitudes)

    def test_filter_aligned(self):
        assert np.allclose(pdl_filter(PdlModel(0.81, 0.25)), np.diag([0.9, 0.5]))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 5.0))
    def test_source_through_pdl_is_psi_r(self, r):
        out = pdl_channel(source_state(), PdlModel.from_ratio(r))
        assert pure_fidelity(psi_r(r), out) == pytest.approx(1.0, abs=1e-12)

    def test_surviving_weight(self):
        pdl = PdlModel.from_ratio(0.464)
        assert pdl_surviving_weight(source_state().density(), pdl) == pytest.approx((1 + 0.464 ** 2) / 2)

    def test_total_loss(self):
        with pytest.raises(AllLossError):
            pdl_channel(kron(KET_0, KET_1), PdlModel(1.0, 0.0))

    def test_misalignment_changes_state(self):
        pdl = PdlModel.from_ratio(0.464)
        a = pdl_channel(source_state(), pdl)
        b = pdl_channel(source_state(), pdl.with_gamma(4.0))
        assert np.max(np.abs(a.entries - b.entries)) > 1e-3


class TestNoise:
    def test_white_noise_fidelity(self):
        v = 0.9
        rho = apply_white_noise(bell_phi_plus(), v)
        assert pure_fidelity(bell_phi_plus(), rho) == pytest.approx(v + (1 - v) / 4)

    def test_visibility_for_fidelity(self):
        assert visibility_for_fidelity(0.98) == pytest.approx((4 * 0.98 - 1) / 3)
        with pytest.raises(DomainError):
            visibility_for_fidelity(0.2)

    @pytest.mark.parametrize("v", [0.0, 0.5, 0.989, 1.0])
    def test_correlation_visibility(self, v):
        assert correlation_visibility(apply_white_noise(bell_phi_plus(), v)) == pytest.approx(v)

    def test_bad_visibility(self):
        with pytest.raises(ContractViolation):
            apply_white_noise(bell_phi_plus(), 1.2)


class TestStatePrepParams:
    def test_needs_one(self):
        with pytest.raises(ContractViolation):
            StatePrepParams()

    def test_consistent_pair(self):
        p = StatePrepParams(r=R_STAR, theta=THETA_STAR)
        assert p.resolved_r == R_STAR

    def test_inconsistent_pair(self):
        with pytest.raises(ContractViolation):
            StatePrepParams(r=0.3, theta=THETA_STAR)

    def test_theta_resolves_to_attenuated_branch(self):
        assert StatePrepParams(theta=THETA_STAR).resolved_r == pytest.approx(R_STAR, abs=1e-12)
