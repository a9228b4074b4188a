"""Exact complex linear algebra for one and two qubits.

Only dimensions 2 and 4 are supported. Two-qubit objects use the row-major
Kronecker convention: ``|x> (x) |y>`` lives at index ``2*x + y``, the first
factor being the most significant bit.

All value types are immutable: their arrays are copied on construction and
flagged read-only.
"""

from __future__ import annotations

from typing import Union

import numpy as np

from .errors import ContractViolation, NumericalIntegrityError

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
IDEMPOTENT_TOL = 1e-10
BORN_SLACK = 1e-9

_DIMS = (2, 4)


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=complex, copy=True)
    out.flags.writeable = False
    return out


class Ket:
    """Normalized state vector of dimension 2 or 4."""

    __slots__ = ("_amplitudes",)

    def __init__(self, amplitudes):
        amps = _frozen(amplitudes)
        if amps.ndim != 1 or amps.shape[0] not in _DIMS:
            raise ContractViolation(f"ket must be a 2- or 4-vector, got shape {amps.shape}")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise ContractViolation(f"ket is not normalized (|psi|^2 = {norm2!r})")
        self._amplitudes = amps

    @classmethod
    def normalized(cls, amplitudes) -> "Ket":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm == 0.0:
            raise ContractViolation("cannot normalize the zero vector")
        return cls(amps / norm)

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amplitudes

    @property
    def dim(self) -> int:
        return self._amplitudes.shape[0]

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self._amplitudes, self._amplitudes.conj()))

    def projector(self) -> "Projector":
        return Projector(np.outer(self._amplitudes, self._amplitudes.conj()))

    def inner(self, other: "Ket") -> complex:
        """Return <self|other>."""
        return complex(np.vdot(self._amplitudes, other.amplitudes))

    def __repr__(self) -> str:
        return f"Ket({np.array2string(self._amplitudes, precision=6)})"


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix of size 2 or 4."""

    __slots__ = ("_entries",)

    def __init__(self, entries):
        m = _frozen(entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in _DIMS:
            raise ContractViolation(f"density matrix must be 2x2 or 4x4, got {m.shape}")
        herm_err = float(np.max(np.abs(m - m.conj().T)))
        if herm_err > HERMITIAN_TOL:
            raise ContractViolation(f"matrix is not Hermitian (max |M - M^dag| = {herm_err:.3g})")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ContractViolation(f"trace is {tr!r}, expected 1")
        lowest = float(np.linalg.eigvalsh(m)[0])
        if lowest < -PSD_TOL:
            raise ContractViolation(f"matrix is not PSD (lowest eigenvalue {lowest:.3g})")
        self._entries = m

    @classmethod
    def from_unnormalized(cls, matrix) -> "DensityMatrix":
        """Hermitize and rescale to unit trace; for outputs of trace-reducing maps."""
        m = np.asarray(matrix, dtype=complex)
        m = 0.5 * (m + m.conj().T)
        return cls(m / np.trace(m).real)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._entries)

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim})"


class Projector:
    """Hermitian idempotent matrix of size 2 or 4."""

    __slots__ = ("_entries",)

    def __init__(self, entries):
        m = _frozen(entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in _DIMS:
            raise ContractViolation(f"projector must be 2x2 or 4x4, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > IDEMPOTENT_TOL:
            raise ContractViolation("projector is not Hermitian")
        if np.max(np.abs(m @ m - m)) > IDEMPOTENT_TOL:
            raise ContractViolation("projector is not idempotent")
        self._entries = m

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]


QObject = Union[Ket, DensityMatrix, Projector, np.ndarray]


def kron(a: QObject, b: QObject) -> QObject:
    """Kronecker product of two single-qubit objects of the same kind.

    Kets give a Ket, density matrices a DensityMatrix, projectors a
    Projector; raw arrays of shape (2,) or (2, 2) give a raw array.
    """
    for kind in (Ket, DensityMatrix, Projector):
        if isinstance(a, kind) or isinstance(b, kind):
            if not (isinstance(a, kind) and isinstance(b, kind)):
                raise ContractViolation(
                    f"cannot kron {type(a).__name__} with {type(b).__name__}")
            if a.dim != 2 or b.dim != 2:
                raise ContractViolation("kron factors must be single-qubit")
            if kind is Ket:
                return Ket(np.kron(a.amplitudes, b.amplitudes))
            return kind(np.kron(a.entries, b.entries))
    xa, xb = np.asarray(a), np.asarray(b)
    if xa.shape != xb.shape or xa.shape not in ((2,), (2, 2)):
        raise ContractViolation(f"kron needs matching 2-dim factors, got {xa.shape} and {xb.shape}")
    return np.kron(xa, xb)


def _check_prob(value: float) -> float:
    if value < -BORN_SLACK or value > 1.0 + BORN_SLACK:
        raise NumericalIntegrityError(f"Born probability {value!r} outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def born_prob(rho: DensityMatrix, proj: Projector) -> float:
    """Tr(P rho), clamped into [0, 1]."""
    if rho.dim != proj.dim:
        raise ContractViolation(f"dimension mismatch: rho {rho.dim}, P {proj.dim}")
    value = float(np.trace(proj.entries @ rho.entries).real)
    return _check_prob(value)


def born_probs(rho: DensityMatrix, kets) -> np.ndarray:
    """Born probabilities <k|rho|k> for a sequence of kets, vectorized."""
    vecs = np.array([k.amplitudes for k in kets])
    if vecs.shape[1] != rho.dim:
        raise ContractViolation("dimension mismatch between kets and rho")
    values = np.einsum("ki,ij,kj->k", vecs.conj(), rho.entries, vecs).real
    return np.array([_check_prob(float(v)) for v in values])


def pure_fidelity(psi: Ket, rho: DensityMatrix | np.ndarray) -> float:
    """Fidelity <psi|rho|psi> of a state with a pure target."""
    if not isinstance(rho, DensityMatrix):
        m = np.asarray(rho, dtype=complex)
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ContractViolation("fidelity needs a Hermitian matrix")
        rho = DensityMatrix(m)
    if psi.dim != rho.dim:
        raise ContractViolation(f"dimension mismatch: psi {psi.dim}, rho {rho.dim}")
    value = np.vdot(psi.amplitudes, rho.entries @ psi.amplitudes)
    if abs(value.imag) >= 1e-10:
        raise NumericalIntegrityError(f"fidelity has imaginary part {value.imag:.3g}")
    return _check_prob(float(value.real))


def partial_trace(rho: DensityMatrix, subsystem: str) -> DensityMatrix:
    """Trace out ``subsystem`` ('first' or 'second') of a two-qubit state."""
    if rho.dim != 4:
        raise ContractViolation("partial_trace needs a 4x4 density matrix")
    t = rho.entries.reshape(2, 2, 2, 2)
    if subsystem == "first":
        reduced = np.einsum("ajak->jk", t)
    elif subsystem == "second":
        reduced = np.einsum("jaka->jk", t)
    else:
        raise ContractViolation(f"subsystem must be 'first' or 'second', not {subsystem!r}")
    return DensityMatrix(reduced)


def ket(*amplitudes) -> Ket:
    """Shorthand for an already-normalized Ket."""
    return Ket(np.array(amplitudes, dtype=complex))


KET_0 = ket(1, 0)
KET_1 = ket(0, 1)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
