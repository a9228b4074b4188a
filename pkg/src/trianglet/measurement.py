"""Single-qubit measurement bases and the outcome-label conventions.

A :class:`MeasurementBasis` stores its two vectors indexed by outcome bit, so
any label convention is carried by the basis itself. In particular Charlie's
H/V basis is ``(|V>, |H>)``: for him H reads as bit 1 and V as bit 0.

Polarization angles are measured from V (0 deg) towards H (90 deg).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ContractViolation, DomainError
from .qmath import Ket, Projector, kron
from .states import KET_H, KET_V, PdlModel, pdl_eigenbasis, theta_from_r

ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class MeasurementBasis:
    label: str
    vectors: tuple[Ket, Ket]

    def __post_init__(self):
        v0, v1 = self.vectors
        if v0.dim != 2 or v1.dim != 2:
            raise ContractViolation("measurement bases are single-qubit")
        if abs(v0.inner(v1)) > ORTHO_TOL:
            raise ContractViolation(f"basis {self.label!r} is not orthogonal")

    def vector(self, outcome: int) -> Ket:
        return self.vectors[outcome]

    def projector(self, outcome: int) -> Projector:
        return self.vectors[outcome].projector()

    def relabeled(self) -> "MeasurementBasis":
        """Same vectors with outcome labels 0 and 1 exchanged."""
        return MeasurementBasis(self.label, (self.vectors[1], self.vectors[0]))

    def in_frame(self, frame: "MeasurementBasis", label: str | None = None) -> "MeasurementBasis":
        """Reinterpret this basis's coordinates as coordinates along ``frame``."""
        f = np.column_stack([frame.vectors[0].amplitudes, frame.vectors[1].amplitudes])
        return MeasurementBasis(label or self.label,
                                tuple(Ket.normalized(f @ v.amplitudes) for v in self.vectors))

    def matrix(self) -> np.ndarray:
        """Rows are the basis vectors in outcome order."""
        return np.array([v.amplitudes for v in self.vectors])


@dataclass(frozen=True)
class BasisAngles:
    """Physical angles of one Alice/Bob basis pair.

    ``phi_B_prime`` is Bob's setting; ``phi_B`` the angle it realizes through the
    PDL (see :func:`compensation_angle`).
    """

    phi_A: float
    phi_B: float
    phi_B_prime: float


def computational_basis() -> MeasurementBasis:
    return MeasurementBasis("computational", (KET_H, KET_V))


def hv_basis(party: str) -> MeasurementBasis:
    """Polarization H/V measurement with the party's bit convention."""
    if party in ("A", "B"):
        return MeasurementBasis("computational", (KET_H, KET_V))
    if party == "C":
        return MeasurementBasis("computational", (KET_V, KET_H))
    raise ContractViolation(f"unknown party {party!r}")


def w_basis(theta: float) -> MeasurementBasis:
    """``|w0> = sin t|0> - cos t|1>``, ``|w1> = cos t|0> + sin t|1>``."""
    t = math.radians(theta)
    s, c = math.sin(t), math.cos(t)
    return MeasurementBasis("w_basis", (Ket(np.array([s, -c])), Ket(np.array([c, s]))))


def rotated_basis(phi: float) -> MeasurementBasis:
    """``|0> = sin p|H> + cos p|V>``, ``|1> = cos p|H> - sin p|V>``."""
    p = math.radians(phi)
    s, c = math.sin(p), math.cos(p)
    v0 = s * KET_H.amplitudes + c * KET_V.amplitudes
    v1 = c * KET_H.amplitudes - s * KET_V.amplitudes
    return MeasurementBasis(f"rotated({phi:g})", (Ket(v0), Ket(v1)))


def diagonal_basis() -> MeasurementBasis:
    h, v = KET_H.amplitudes, KET_V.amplitudes
    return MeasurementBasis("diagonal", (Ket((h + v) / math.sqrt(2)), Ket((h - v) / math.sqrt(2))))


def circular_basis() -> MeasurementBasis:
    h, v = KET_H.amplitudes, KET_V.amplitudes
    return MeasurementBasis("circular", (Ket((h + 1j * v) / math.sqrt(2)), Ket((h - 1j * v) / math.sqrt(2))))


def _tan_checked(angle_deg: float) -> float:
    c = math.cos(math.radians(angle_deg))
    if abs(c) < 1e-12:
        raise DomainError(f"tangent singular at {angle_deg} deg")
    return math.sin(math.radians(angle_deg)) / c


def compensation_angle(phi_B_prime: float, pdl: PdlModel) -> float:
    """Angle ``phi_B`` in (-90, 90) with ``tan phi_B = tan(phi_B' + gamma) sqrt(t_H/t_V)``."""
    if pdl.t_V <= 0:
        raise DomainError("compensation needs t_V > 0")
    t = _tan_checked(phi_B_prime + pdl.gamma_misalign)
    return math.degrees(math.atan(t * math.sqrt(pdl.t_H / pdl.t_V)))


def compensation_setting(phi_B: float, pdl: PdlModel) -> float:
    """Inverse of :func:`compensation_angle`: the setting realizing ``phi_B``."""
    if pdl.t_V <= 0:
        raise DomainError("compensation needs t_V > 0")
    t = _tan_checked(phi_B)
    return math.degrees(math.atan(t * math.sqrt(pdl.t_V / pdl.t_H))) - pdl.gamma_misalign


def pdl_frame_basis(phi: float, gamma_misalign: float) -> MeasurementBasis:
    """:func:`rotated_basis` with H and V replaced by the loss eigenaxes P1 and P0."""
    p0, p1 = pdl_eigenbasis(gamma_misalign)
    frame = MeasurementBasis("pdl_axes", (p1, p0))
    return rotated_basis(phi).in_frame(frame, label=f"rotated({phi:g};gamma={gamma_misalign:g})")


def design_angles(r: float) -> dict[str, BasisAngles]:
    """Physical angles turning ``psi_r(r)`` into the Eberhard measurement.

    Keys are ``"computational"`` and ``"w_basis"``. In both, phi_A = phi_B - 90.
    """
    pdl = PdlModel.from_ratio(r)
    phi_b = math.degrees(math.atan(math.sqrt(r)))
    offset = -theta_from_r(r)
    out = {}
    for kind, pb in (("computational", phi_b), ("w_basis", phi_b + offset)):
        out[kind] = BasisAngles(phi_A=pb - 90.0, phi_B=pb, phi_B_prime=compensation_setting(pb, pdl))
    return out


def product_projector(basis_1: MeasurementBasis, out_1: int,
                      basis_2: MeasurementBasis, out_2: int) -> Projector:
    return kron(basis_1.projector(out_1), basis_2.projector(out_2))


@dataclass(frozen=True)
class AbBases:
    """Alice's and Bob's bases on the AB link, keyed by their C-link bit.

    A C-bit of 1 selects the computational-type basis, 0 the w-type basis.
    """

    alice: Mapping[int, MeasurementBasis]
    bob: Mapping[int, MeasurementBasis]

    def for_outcomes(self, a_C: int, b_C: int) -> tuple[MeasurementBasis, MeasurementBasis]:
        return self.alice[a_C], self.bob[b_C]


def logical_ab_bases(theta: float) -> AbBases:
    comp, w = computational_basis(), w_basis(theta)
    return AbBases(alice={1: comp, 0: w}, bob={1: comp, 0: w})


def physical_ab_bases(pdl: PdlModel) -> AbBases:
    """Bases for the PDL-prepared state, with Bob compensating the loss axes.

    Bob keeps the settings ``phi_B'`` designed for aligned axes; under a
    misalignment ``gamma`` his realized angle follows :func:`compensation_angle`
    and is referenced to the rotated loss eigenaxes. The w-type bases use
    swapped labels so that outcome 0 is ``|w0>``.
    """
    angles = design_angles(pdl.r)
    alice, bob = {}, {}
    for bit, kind in ((1, "computational"), (0, "w_basis")):
        a = angles[kind]
        alice_basis = rotated_basis(a.phi_A)
        phi_b = compensation_angle(a.phi_B_prime, pdl)
        bob_basis = pdl_frame_basis(phi_b, pdl.gamma_misalign)
        if kind == "w_basis":
            alice_basis, bob_basis = alice_basis.relabeled(), bob_basis.relabeled()
        alice[bit], bob[bit] = alice_basis, bob_basis
    return AbBases(alice=alice, bob=bob)


def relabel_to_bits(rho, first_party: str, second_party: str):
    """Rewrite a two-photon polarization state in the two parties' bit labels.

    The result's computational basis is the parties' :func:`hv_basis` outcomes,
    so for a link ending at Charlie his H/V inversion is applied here.
    """
    from .qmath import DensityMatrix

    if isinstance(rho, Ket):
        rho = rho.density()
    u = np.kron(hv_basis(first_party).matrix(), hv_basis(second_party).matrix()).conj()
    return DensityMatrix(u @ rho.entries @ u.conj().T)
