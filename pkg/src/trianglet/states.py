"""State preparation for the three links of the triangle.

Polarization is encoded with ``|H> = |0>`` and ``|V> = |1>`` (Alice and Bob's
bit convention). Two-photon states list the signal photon (channel 1) first
and the idler photon (channel 2) second. The frequency degree of freedom is
never represented: a symmetric joint spectral amplitude is assumed, so the
source emits ``(|HV> + |VH>)/sqrt(2)`` directly.

Public angles are in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AllLossError, ContractViolation, DomainError
from .qmath import KET_0, KET_1, DensityMatrix, Ket, kron

KET_H = KET_0
KET_V = KET_1

# Coincidence weight below which post-selection is treated as total loss.
MIN_POSTSELECTED_WEIGHT = 1e-12


@dataclass(frozen=True)
class PdlModel:
    """Polarization-dependent loss on channel 2.

    ``t_H``/``t_V`` are the transmissions of H and V when the loss eigenaxes
    are aligned; ``gamma_misalign`` rotates those eigenaxes (degrees).
    """

    t_H: float
    t_V: float
    gamma_misalign: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.t_H <= 1.0:
            raise ContractViolation(f"t_H must lie in (0, 1], got {self.t_H}")
        if not 0.0 <= self.t_V <= 1.0:
            raise ContractViolation(f"t_V must lie in [0, 1], got {self.t_V}")
        if not -90.0 <= self.gamma_misalign <= 90.0:
            raise ContractViolation("gamma_misalign must lie in [-90, 90] degrees")

    @classmethod
    def from_ratio(cls, r: float, gamma_misalign: float = 0.0) -> "PdlModel":
        """Lossless on the stronger axis, ``r = sqrt(t_V/t_H)``."""
        if r < 0:
            raise DomainError("amplitude ratio must be non-negative")
        if r <= 1.0:
            return cls(1.0, r * r, gamma_misalign)
        return cls(1.0 / (r * r), 1.0, gamma_misalign)

    @property
    def r(self) -> float:
        return math.sqrt(self.t_V / self.t_H)

    def with_gamma(self, gamma_misalign: float) -> "PdlModel":
        return PdlModel(self.t_H, self.t_V, gamma_misalign)


@dataclass(frozen=True)
class StatePrepParams:
    """State-preparation knobs. ``r`` and ``theta`` must agree if both given."""

    r: Optional[float] = None
    theta: Optional[float] = None
    visibility_AC: float = 1.0
    visibility_BC: float = 1.0
    visibility_AB: float = 1.0

    def __post_init__(self):
        if self.r is None and self.theta is None:
            raise ContractViolation("one of r or theta is required")
        if self.r is not None and self.theta is not None:
            # psi_theta and psi_-theta are locally equivalent, so compare |theta|
            if abs(abs(theta_from_r(self.r)) - abs(self.theta)) > 1e-6:
                raise ContractViolation(
                    f"r={self.r} implies |theta|={abs(theta_from_r(self.r)):.6f} deg, "
                    f"inconsistent with theta={self.theta}")
        for name in ("visibility_AC", "visibility_BC", "visibility_AB"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ContractViolation(f"{name} must lie in [0, 1], got {v}")

    @property
    def resolved_r(self) -> float:
        return self.r if self.r is not None else r_from_theta(-abs(self.theta))

    @property
    def resolved_theta(self) -> float:
        return self.theta if self.theta is not None else theta_from_r(self.r)


def bell_phi_plus() -> Ket:
    return Ket(np.array([1, 0, 0, 1]) / math.sqrt(2))


def source_state() -> Ket:
    """Polarization state of the raw source, ``(|HV> + |VH>)/sqrt(2)``."""
    return Ket.normalized(kron(KET_H, KET_V).amplitudes + kron(KET_V, KET_H).amplitudes)


def eberhard_state(theta: float) -> Ket:
    """``[sin t |11> + cos t (|01> + |10>)] / sqrt(1 + cos^2 t)``."""
    if not -90.0 < theta <= 90.0:
        raise DomainError(f"theta must lie in (-90, 90] degrees, got {theta}")
    t = math.radians(theta)
    s, c = math.sin(t), math.cos(t)
    return Ket(np.array([0.0, c, c, s]) / math.sqrt(1.0 + c * c))


def psi_r(r: float) -> Ket:
    """``(|VH> + r |HV>) / sqrt(1 + r^2)``."""
    if r < 0:
        raise DomainError(f"r must be non-negative, got {r}")
    vh = kron(KET_V, KET_H).amplitudes
    hv = kron(KET_H, KET_V).amplitudes
    return Ket((vh + r * hv) / math.sqrt(1.0 + r * r))


def theta_from_r(r: float) -> float:
    """Eberhard angle equivalent to ``psi_r(r)``; sign follows ``r - 1``."""
    if r <= 0:
        raise DomainError("theta_from_r needs r > 0 (r = 0 is a product state)")
    d = math.sqrt(r * r - r + 1.0)
    return math.degrees(math.atan2((r - 1.0) / d, math.sqrt(r) / d))


def r_from_theta(theta: float) -> float:
    """Inverse of :func:`theta_from_r` on (-90, 90) degrees."""
    if not -90.0 < theta < 90.0:
        raise DomainError(f"theta must lie in (-90, 90) degrees, got {theta}")
    # tan(theta) = (r - 1)/sqrt(r): positive root of u^2 - tan(theta) u - 1 with u = sqrt(r)
    t = math.tan(math.radians(theta))
    u = 0.5 * (t + math.sqrt(t * t + 4.0))
    return u * u


def eberhard_objective(theta: float) -> float:
    """``p(0,0|0,0) = cos^4 t sin^2 t / (1 + cos^2 t)``."""
    c2 = math.cos(math.radians(theta)) ** 2
    return c2 * c2 * (1.0 - c2) / (1.0 + c2)


def _golden_max(f, lo: float, hi: float, xtol: float) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimize_theta(xtol: float = 1e-7) -> tuple[float, float]:
    """Angle in (0, 90) maximizing ``eberhard_objective`` and its PDL ratio.

    The returned ratio is the ``r < 1`` branch (attenuated V), i.e. the state
    equivalent to ``psi_{-theta*}``, which is locally equivalent to ``psi_{theta*}``.
    """
    theta_star = _golden_max(eberhard_objective, 0.0, 90.0, xtol)
    return theta_star, r_from_theta(-theta_star)


def pdl_eigenbasis(gamma_misalign: float) -> tuple[Ket, Ket]:
    """Loss eigenaxes ``(P0, P1)``; at zero misalignment ``(P0, P1) = (V, H)``."""
    g = math.radians(gamma_misalign)
    p0 = math.cos(g) * KET_V.amplitudes - math.sin(g) * KET_H.amplitudes
    p1 = math.sin(g) * KET_V.amplitudes + math.cos(g) * KET_H.amplitudes
    return Ket(p0), Ket(p1)


def pdl_filter(pdl: PdlModel) -> np.ndarray:
    """Single-photon amplitude filter acting on channel 2 (not trace preserving).

    P0 transmits with ``t_V`` and P1 with ``t_H``, so at zero misalignment the
    filter is ``diag(sqrt(t_H), sqrt(t_V))`` in the H/V basis.
    """
    p0, p1 = pdl_eigenbasis(pdl.gamma_misalign)
    return (math.sqrt(pdl.t_V) * np.outer(p0.amplitudes, p0.amplitudes.conj())
            + math.sqrt(pdl.t_H) * np.outer(p1.amplitudes, p1.amplitudes.conj()))


def pdl_kraus(pdl: PdlModel) -> np.ndarray:
    """Two-photon Kraus operator ``I (x) F`` of the coincidence-surviving branch."""
    return np.kron(np.eye(2), pdl_filter(pdl))


def pdl_surviving_weight(rho: DensityMatrix, pdl: PdlModel) -> float:
    """Coincidence probability ``Tr(K rho K^dag)`` before renormalization."""
    k = pdl_kraus(pdl)
    return float(np.trace(k @ rho.entries @ k.conj().T).real)


def pdl_channel(rho: DensityMatrix | Ket, pdl: PdlModel) -> DensityMatrix:
    """Coincidence-post-selected output of the PDL on channel 2."""
    if isinstance(rho, Ket):
        rho = rho.density()
    if rho.dim != 4:
        raise ContractViolation("pdl_channel acts on two-photon states")
    k = pdl_kraus(pdl)
    out = k @ rho.entries @ k.conj().T
    weight = float(np.trace(out).real)
    if weight < MIN_POSTSELECTED_WEIGHT:
        raise AllLossError(f"post-selected weight {weight:.3g} is numerically zero")
    return DensityMatrix.from_unnormalized(out)


def apply_white_noise(rho: DensityMatrix | Ket, visibility: float) -> DensityMatrix:
    """``V rho + (1 - V) I/d``."""
    if isinstance(rho, Ket):
        rho = rho.density()
    if not 0.0 <= visibility <= 1.0:
        raise ContractViolation(f"visibility must lie in [0, 1], got {visibility}")
    d = rho.dim
    return DensityMatrix(visibility * rho.entries + (1.0 - visibility) * np.eye(d) / d)


def visibility_for_fidelity(fidelity: float, dim: int = 4) -> float:
    """White-noise weight giving a pure target fidelity ``V + (1 - V)/d``."""
    if not 1.0 / dim <= fidelity <= 1.0:
        raise DomainError(f"fidelity {fidelity} unreachable with white noise in dim {dim}")
    return (dim * fidelity - 1.0) / (dim - 1.0)


def correlation_visibility(rho: DensityMatrix) -> float:
    """Computational-basis visibility ``(p_same - p_diff)/(p_same + p_diff)``."""
    diag = np.real(np.diag(rho.entries))
    same = diag[0] + diag[3]
    diff = diag[1] + diag[2]
    return float((same - diff) / (same + diff))
