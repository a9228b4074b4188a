"""Two-qubit projective tomography and maximum-likelihood reconstruction.

Nine local basis pairs from {H/V, D/A, R/L} give 36 outcome counts. The
estimate is ``rho = T^dag T / Tr(T^dag T)`` with ``T`` upper triangular
(16 real parameters), so every iterate is a physical state.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ContractViolation, ReconstructionFailed
from .measurement import MeasurementBasis, circular_basis, computational_basis, diagonal_basis
from .qmath import DensityMatrix, Ket, pure_fidelity

SETTING_NAMES = ("HV", "DA", "RL")
LL_TOL = 1e-10
PATIENCE = 3
MAX_ITER = 100_000
BOOTSTRAP_SAMPLES = 100
_PROB_FLOOR = 1e-300


def setting_bases() -> dict[str, MeasurementBasis]:
    return {"HV": computational_basis(), "DA": diagonal_basis(), "RL": circular_basis()}


@dataclass(frozen=True)
class TomographySetting:
    basis_1: str
    basis_2: str

    def __post_init__(self):
        if self.basis_1 not in SETTING_NAMES or self.basis_2 not in SETTING_NAMES:
            raise ContractViolation(f"unknown tomography setting {self}")


SETTINGS = tuple(TomographySetting(a, b) for a, b in product(SETTING_NAMES, SETTING_NAMES))


def _projector_stack() -> np.ndarray:
    """``P[s, k]``: 9 settings x 4 outcomes (k = 2 * o1 + o2) of 4x4 projectors."""
    bases = setting_bases()
    out = np.zeros((9, 4, 4, 4), dtype=complex)
    for s, st in enumerate(SETTINGS):
        b1, b2 = bases[st.basis_1], bases[st.basis_2]
        for o1, o2 in product((0, 1), (0, 1)):
            v = np.kron(b1.vector(o1).amplitudes, b2.vector(o2).amplitudes)
            out[s, 2 * o1 + o2] = np.outer(v, v.conj())
    return out


PROJECTORS = _projector_stack()


def outcome_probabilities(rho: DensityMatrix | np.ndarray) -> np.ndarray:
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    p = np.einsum("skij,ji->sk", PROJECTORS, m).real
    p = np.clip(p, 0.0, None)
    return p / p.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class TomographyCounts:
    """``counts[s, k]`` for setting ``SETTINGS[s]`` and outcome ``k = 2 o1 + o2``."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=float)
        if c.shape != (9, 4):
            raise ContractViolation(f"counts must be 9x4, got {c.shape}")
        if np.any(c < 0):
            raise ContractViolation("counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def shots(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["setting_1", "setting_2", "outcome_1", "outcome_2", "count"])
            for s, st in enumerate(SETTINGS):
                for o1, o2 in product((0, 1), (0, 1)):
                    w.writerow([st.basis_1, st.basis_2, o1, o2,
                                format(self.counts[s, 2 * o1 + o2], ".17g")])

    @classmethod
    def from_csv(cls, path) -> "TomographyCounts":
        c = np.zeros((9, 4))
        index = {(st.basis_1, st.basis_2): s for s, st in enumerate(SETTINGS)}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                s = index[(row["setting_1"], row["setting_2"])]
                c[s, 2 * int(row["outcome_1"]) + int(row["outcome_2"])] = float(row["count"])
        return cls(c)


def simulate_tomography(rho: DensityMatrix, shots_per_setting: int, seed) -> TomographyCounts:
    if shots_per_setting < 1:
        raise ContractViolation("shots_per_setting must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    probs = outcome_probabilities(rho)
    return TomographyCounts(np.array([rng.multinomial(shots_per_setting, p) for p in probs]))


def expected_counts(rho: DensityMatrix, shots_per_setting: float) -> TomographyCounts:
    """Noiseless counts ``shots * p``, the infinite-statistics limit."""
    return TomographyCounts(shots_per_setting * outcome_probabilities(rho))


# Cholesky parametrization: 4 real diagonal entries, then 6 complex upper entries.
_UPPER = [(i, j) for i in range(4) for j in range(i + 1, 4)]


def params_to_t(x: np.ndarray) -> np.ndarray:
    t = np.zeros((4, 4), dtype=complex)
    t[np.diag_indices(4)] = x[:4]
    for m, (i, j) in enumerate(_UPPER):
        t[i, j] = x[4 + 2 * m] + 1j * x[5 + 2 * m]
    return t


def t_to_params(t: np.ndarray) -> np.ndarray:
    x = np.zeros(16)
    x[:4] = np.real(np.diag(t))
    for m, (i, j) in enumerate(_UPPER):
        x[4 + 2 * m], x[5 + 2 * m] = t[i, j].real, t[i, j].imag
    return x


def params_to_rho(x: np.ndarray) -> np.ndarray:
    t = params_to_t(x)
    m = t.conj().T @ t
    return m / np.trace(m).real


def log_likelihood(x: np.ndarray, counts: TomographyCounts) -> float:
    """Multinomial log-likelihood up to a constant (the per-setting normalization cancels)."""
    rho = params_to_rho(x)
    p = np.einsum("skij,ji->sk", PROJECTORS, rho).real
    n = counts.counts
    mask = n > 0
    return float(np.sum(n[mask] * np.log(np.maximum(p[mask], _PROB_FLOOR))))


def log_likelihood_grad(x: np.ndarray, counts: TomographyCounts) -> np.ndarray:
    """Analytic gradient of :func:`log_likelihood` with respect to the 16 parameters."""
    t = params_to_t(x)
    m = t.conj().T @ t
    tr = np.trace(m).real
    rho = m / tr
    p = np.einsum("skij,ji->sk", PROJECTORS, rho).real
    n = counts.counts
    w = np.where(n > 0, n / np.maximum(p, _PROB_FLOOR), 0.0)
    # d/dM of sum n log(tr(P M)/tr M) = sum n P / tr(P M) - N I / tr M
    g = np.einsum("sk,skij->ij", w, PROJECTORS) / tr - n.sum() * np.eye(4) / tr
    # dL = 2 Re tr(G T^dag dT); per entry that is Re/Im of 2 (T G)_ij
    d = 2.0 * (t @ g)
    grad = np.zeros(16)
    grad[:4] = np.real(np.diag(d))
    for k, (i, j) in enumerate(_UPPER):
        grad[4 + 2 * k] = d[i, j].real
        grad[5 + 2 * k] = d[i, j].imag
    return grad


@dataclass(frozen=True)
class Reconstruction:
    rho: DensityMatrix
    log_likelihood: float
    iterations: int
    trace: tuple[float, ...]


def _line_search(f, x, fx, g, direction, step=1.0, c1=1e-4, shrink=0.5, max_halvings=60):
    slope = float(g @ direction)
    for _ in range(max_halvings):
        x_new = x + step * direction
        f_new = f(x_new)
        if f_new >= fx + c1 * step * slope:
            return x_new, f_new, step
        step *= shrink
    return x, fx, 0.0


def mle_reconstruct(counts: TomographyCounts, tol: float = LL_TOL, max_iter: int = MAX_ITER,
                    patience: int = PATIENCE) -> Reconstruction:
    """BFGS ascent on the log-likelihood from the maximally mixed state.

    Converged once ``patience`` successive iterations each improve the
    log-likelihood by less than ``tol``. Raises :class:`ReconstructionFailed`
    carrying the best iterate when ``max_iter`` is reached first.
    """
    if np.any(counts.shots < 1):
        raise ContractViolation("every setting needs at least one shot")
    f = lambda x: log_likelihood(x, counts)  # noqa: E731
    grad = lambda x: log_likelihood_grad(x, counts)  # noqa: E731
    x = t_to_params(np.eye(4) / 2.0)
    fx, g = f(x), grad(x)
    h = np.eye(16)
    trace = [fx]
    quiet = 0
    for it in range(1, max_iter + 1):
        direction = h @ g
        if g @ direction <= 0:
            h = np.eye(16)
            direction = g.copy()
        x_new, f_new, step = _line_search(f, x, fx, g, direction)
        if step == 0.0:
            # no ascent possible along the steepest direction either: stationary
            if np.array_equal(direction, g):
                quiet = patience
            h = np.eye(16)
        else:
            g_new = grad(x_new)
            s, y = x_new - x, g_new - g
            sy = float(s @ y)
            if sy < 0:  # ascent problem: curvature condition is s.(-y) > 0
                rho_k = -1.0 / sy
                v = np.eye(16) - rho_k * np.outer(s, -y)
                h = v @ h @ v.T + rho_k * np.outer(s, s)
            improvement = f_new - fx
            if improvement < 0:
                raise ReconstructionFailed("log-likelihood decreased",
                                           DensityMatrix.from_unnormalized(params_to_rho(x)), fx)
            quiet = quiet + 1 if improvement < tol else 0
            x, fx, g = x_new, f_new, g_new
        trace.append(fx)
        if quiet >= patience:
            return Reconstruction(DensityMatrix.from_unnormalized(params_to_rho(x)), fx, it, tuple(trace))
    raise ReconstructionFailed(f"no convergence within {max_iter} iterations",
                               DensityMatrix.from_unnormalized(params_to_rho(x)), fx)


@dataclass(frozen=True)
class FidelityReport:
    fidelity: float
    std_error: float
    bootstrap: tuple[float, ...]


def fidelity_report(rho_hat: DensityMatrix, target: Ket, counts: TomographyCounts | None = None,
                    n_boot: int = BOOTSTRAP_SAMPLES, seed=0) -> FidelityReport:
    """Fidelity with a parametric-bootstrap standard error.

    Resamples are drawn from ``rho_hat`` with the per-setting shot numbers of
    ``counts`` and reconstructed again. Without counts the error is zero.
    """
    f0 = pure_fidelity(target, rho_hat)
    if counts is None or n_boot == 0:
        return FidelityReport(f0, 0.0, ())
    probs = outcome_probabilities(rho_hat)
    shots = counts.shots.astype(np.int64)
    rng = np.random.Generator(np.random.PCG64(seed))
    values = []
    for _ in range(n_boot):
        sample = TomographyCounts(np.array([rng.multinomial(n, p) for n, p in zip(shots, probs)]))
        values.append(pure_fidelity(target, mle_reconstruct(sample).rho))
    return FidelityReport(f0, float(np.std(values, ddof=1)), tuple(values))


def reconstruction_json(rec: Reconstruction, report: FidelityReport, target_name: str) -> str:
    m = rec.rho.entries
    doc = {
        "real": [[float(v) for v in row] for row in m.real],
        "imag": [[float(v) for v in row] for row in m.imag],
        "log_likelihood": rec.log_likelihood,
        "iterations": rec.iterations,
        "fidelity": {"target": target_name, "value": report.fidelity,
                     "std_error": report.std_error, "bootstrap_samples": len(report.bootstrap)},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
