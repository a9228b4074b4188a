import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trianglet.errors import ContractViolation, NumericalIntegrityError
from trianglet.qmath import (KET_0, KET_1, DensityMatrix, Ket, Projector, born_prob, born_probs,
                             ket, kron, partial_trace, pure_fidelity)
from trianglet.states import bell_phi_plus

finite = st.floats(-1, 1, allow_nan=False, allow_infinity=False)


def random_ket(dim, parts):
    v = np.array(parts[:dim]) + 1j * np.array(parts[dim:2 * dim])
    if np.linalg.norm(v) < 1e-3:
        v[0] += 1.0
    return Ket.normalized(v)


class TestKet:
    def test_rejects_unnormalized(self):
        with pytest.raises(ContractViolation):
            Ket(np.array([1.0, 1.0]))

    def test_rejects_bad_dimension(self):
        with pytest.raises(ContractViolation):
            Ket(np.ones(3) / np.sqrt(3))

    def test_normalized_constructor(self):
        k = Ket.normalized([3, 4])
        assert np.allclose(k.amplitudes, [0.6, 0.8])

    def test_zero_vector(self):
        with pytest.raises(ContractViolation):
            Ket.normalized([0, 0])

    def test_immutable(self):
        k = ket(1, 0)
        with pytest.raises(ValueError):
            k.amplitudes[0] = 0

    def test_inner_is_antilinear_in_bra(self):
        a = Ket.normalized([1, 1j])
        assert a.inner(a) == pytest.approx(1)
        assert a.inner(KET_1) == pytest.approx(-1j / np.sqrt(2))


class TestKron:
    def test_index_convention(self):
        # |1> (x) |0> sits at index 2
        assert np.array_equal(kron(KET_1, KET_0).amplitudes, [0, 0, 1, 0])

    def test_mixed_kinds_rejected(self):
        with pytest.raises(ContractViolation):
            kron(KET_0, KET_0.density())

    def test_two_qubit_factor_rejected(self):
        with pytest.raises(ContractViolation):
            kron(bell_phi_plus(), KET_0)

    def test_raw_arrays(self):
        out = kron(np.eye(2), np.diag([1, -1]))
        assert np.array_equal(out, np.diag([1, -1, 1, -1]))

    def test_density_and_projector(self):
        assert isinstance(kron(KET_0.density(), KET_1.density()), DensityMatrix)
        assert isinstance(kron(KET_0.projector(), KET_1.projector()), Projector)


class TestDensityMatrix:
    def test_rejects_non_hermitian(self):
        with pytest.raises(ContractViolation):
            DensityMatrix([[0.5, 0.1], [0.0, 0.5]])

    def test_rejects_wrong_trace(self):
        with pytest.raises(ContractViolation):
            DensityMatrix(np.eye(2))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(ContractViolation):
            DensityMatrix([[1.2, 0], [0, -0.2]])

    def test_from_unnormalized(self):
        rho = DensityMatrix.from_unnormalized(np.diag([2.0, 0, 0, 2.0]))
        assert np.allclose(np.diag(rho.entries), [0.5, 0, 0, 0.5])

    def test_projector_checks_idempotence(self):
        with pytest.raises(ContractViolation):
            Projector(np.eye(2) * 0.5)


class TestBorn:
    def test_computational(self):
        rho = kron(KET_0, KET_0).density()
        assert born_prob(rho, kron(KET_0, KET_0).projector()) == 1.0
        assert born_prob(rho, kron(KET_0, KET_1).projector()) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            born_prob(KET_0.density(), bell_phi_plus().projector())

    def test_fidelity_of_self(self):
        phi = bell_phi_plus()
        assert pure_fidelity(phi, phi.density()) == pytest.approx(1.0, abs=1e-15)

    def test_fidelity_rejects_non_hermitian_array(self):
        with pytest.raises(ContractViolation):
            pure_fidelity(KET_0, np.array([[1, 1], [0, 0]]))

    def test_out_of_range_probability_flagged(self):
        from trianglet.qmath import _check_prob

        with pytest.raises(NumericalIntegrityError):
            _check_prob(1.0 + 1e-6)

    def test_partial_trace_of_bell_pair(self):
        reduced = partial_trace(bell_phi_plus().density(), "first")
        assert np.allclose(reduced.entries, np.eye(2) / 2)

    def test_partial_trace_names_subsystem(self):
        rho = kron(KET_0, KET_1).density()
        assert np.allclose(partial_trace(rho, "first").entries, KET_1.density().entries)
        assert np.allclose(partial_trace(rho, "second").entries, KET_0.density().entries)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.lists(finite, min_size=8, max_size=8))
    def test_pure_density_is_valid(self, parts):
        rho = random_ket(4, parts).density()
        assert np.all(rho.eigenvalues() > -1e-12)
        assert abs(np.trace(rho.entries) - 1) < 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.lists(finite, min_size=8, max_size=8), st.lists(finite, min_size=8, max_size=8))
    def test_basis_probabilities_sum_to_one(self, parts, basis_parts):
        rho = random_ket(4, parts).density()
        q, _ = np.linalg.qr(np.array(basis_parts[:4])[:, None] * np.eye(4)
                            + 1j * np.outer(basis_parts[4:], basis_parts[:4]) + np.eye(4))
        basis = [Ket.normalized(q[:, i]) for i in range(4)]
        assert born_probs(rho, basis).sum() == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(finite, min_size=4, max_size=4), st.lists(finite, min_size=4, max_size=4))
    def test_partial_trace_of_product(self, a, b):
        ka, kb = random_ket(2, a), random_ket(2, b)
        rho = kron(ka, kb).density()
        assert np.allclose(partial_trace(rho, "second").entries, ka.density().entries, atol=1e-12)
        assert np.allclose(partial_trace(rho, "first").entries, kb.density().entries, atol=1e-12)
