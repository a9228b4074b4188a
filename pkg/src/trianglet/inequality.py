"""The noise-robust triangle inequality and trilocal hidden-variable models.

Hidden-variable naming follows the network: ``beta`` is the AC source (seen
by Alice and Charlie), ``alpha`` the BC source (Bob and Charlie) and
``gamma`` the AB source (Alice and Bob). ``lam`` correlates the three.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ContractViolation, DomainError
from .protocol import OutcomeDistribution
from .stats import PValueInput, beta_win, pvalue_exact_log10

# Local bound of the perfect-correlation inequality for this strategy.
L_LOCAL = 0.0
# S_delta values up to this are reported as "holds" (rounding headroom only).
NOISE_FLOOR = 1e-9

SWEEP_HEADER = ("eps1", "eps2", "xi1", "xi2", "I", "S_delta", "beta_win", "log10_pvalue")


def _check_eps(eps1: float, eps2: float) -> None:
    if not 0.0 < eps1 <= 1.0:
        raise DomainError(f"eps1 must lie in (0, 1], got {eps1}")
    if eps2 < 1.0:
        raise DomainError(f"eps2 must be at least 1, got {eps2}")


def _positive_extremes(marginal: np.ndarray) -> tuple[float, float]:
    pos = marginal[marginal > 0]
    if pos.size == 0:
        raise DomainError("all marginal probabilities are zero")
    return float(pos.min()), float(pos.max())


def xi_coefficients(dist: OutcomeDistribution, eps1: float, eps2: float) -> tuple[float, float]:
    """Weights built from the extreme strictly positive marginals of a_C and b_C."""
    _check_eps(eps1, eps2)
    a_min, a_max = _positive_extremes(dist.marginal_a_C())
    b_min, b_max = _positive_extremes(dist.marginal_b_C())
    xi1 = eps1 ** 3 / eps2 ** 4 * a_min * b_min
    xi2 = eps2 ** 3 / eps1 ** 4 * a_max * b_max
    return xi1, xi2


def null_sum(dist: OutcomeDistribution) -> float:
    """``p(0,1,0,1) + p(1,0,1,0) + p(0,0,1,1)``."""
    return dist(0, 1, 0, 1) + dist(1, 0, 1, 0) + dist(0, 0, 1, 1)


def bell_I(dist: OutcomeDistribution, xi1: float, xi2: float) -> float:
    return xi1 * dist(0, 0, 0, 0) - xi2 * null_sum(dist)


def s_delta(dist: OutcomeDistribution, delta: float, eps1: float, eps2: float,
            L: float = L_LOCAL) -> float:
    """``I - xi1 xi2 L - xi1 delta``; with the default ``L = 0`` this is ``I - xi1 delta``."""
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"delta must lie in [0, 1], got {delta}")
    xi1, xi2 = xi_coefficients(dist, eps1, eps2)
    return bell_I(dist, xi1, xi2) - xi1 * xi2 * L - xi1 * delta


@dataclass(frozen=True)
class InequalityResult:
    eps1: float
    eps2: float
    xi1: float
    xi2: float
    delta: float
    I_value: float
    S_delta: float
    beta_win: float
    log10_pvalue: float = math.nan

    @property
    def violated(self) -> bool:
        return self.S_delta > 0.0

    @property
    def above_noise_floor(self) -> bool:
        return self.S_delta > NOISE_FLOOR

    def row(self) -> tuple:
        return (self.eps1, self.eps2, self.xi1, self.xi2, self.I_value, self.S_delta,
                self.beta_win, self.log10_pvalue)


def evaluate(dist: OutcomeDistribution, delta: float, eps1: float, eps2: float,
             win_counts: Optional[tuple[int, int]] = None, L: float = L_LOCAL) -> InequalityResult:
    """All inequality quantities at one ``(eps1, eps2)``.

    ``win_counts`` is ``(n, c)`` from :func:`trianglet.protocol.win_counts`;
    without it the p-value is NaN.
    """
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"delta must lie in [0, 1], got {delta}")
    xi1, xi2 = xi_coefficients(dist, eps1, eps2)
    i_val = bell_I(dist, xi1, xi2)
    s_val = i_val - xi1 * xi2 * L - xi1 * delta
    bw = beta_win(xi1, xi2)
    log_p = math.nan
    if win_counts is not None:
        n, c = win_counts
        if bw >= 1.0:
            # xi1/xi2 below double resolution: a local model wins every round
            log_p = 0.0
        else:
            log_p = pvalue_exact_log10(PValueInput(n=n, c=c, beta_win=bw))
    return InequalityResult(eps1, eps2, xi1, xi2, delta, i_val, s_val, bw, log_p)


def default_grid(n1: int = 50, n2: int = 50, eps1_range=(1e-2, 1.0),
                 eps2_range=(1.0, 1e2)) -> list[tuple[float, float]]:
    """Log-spaced ``(eps1, eps2)`` grid, eps1 varying slowest."""
    e1 = np.logspace(math.log10(eps1_range[0]), math.log10(eps1_range[1]), n1)
    e2 = np.logspace(math.log10(eps2_range[0]), math.log10(eps2_range[1]), n2)
    # pin the end points exactly so (1, 1) is on the grid
    e1[-1], e2[0] = eps1_range[1], eps2_range[0]
    return [(float(a), float(b)) for a in e1 for b in e2]


def sweep(dist: OutcomeDistribution, delta: float, grid: Sequence[tuple[float, float]],
          win_counts: Optional[tuple[int, int]] = None, L: float = L_LOCAL) -> list[InequalityResult]:
    if not grid:
        raise ContractViolation("grid is empty")
    return [evaluate(dist, delta, e1, e2, win_counts, L) for e1, e2 in grid]


def write_sweep_csv(results: Iterable[InequalityResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in results:
            w.writerow([format(v, ".17g") for v in r.row()])


# ---------------------------------------------------------------------------
# trilocal models

@dataclass(frozen=True)
class TrilocalModel:
    """Hidden-variable model with correlated sources.

    ``source[l, alpha, beta, gamma]`` is p(alpha, beta, gamma | lam). Responses
    are ``resp_a[beta, gamma, a_B, a_C]``, ``resp_b[alpha, gamma, b_A, b_C]`` and
    ``resp_c[alpha, beta, c_A, c_B]``.
    """

    eps1: float
    eps2: float
    prior: np.ndarray
    source: np.ndarray
    resp_a: np.ndarray
    resp_b: np.ndarray
    resp_c: np.ndarray

    def __post_init__(self):
        _check_eps(self.eps1, self.eps2)
        kl, ka, kb, kg = self.source.shape
        if self.prior.shape != (kl,):
            raise ContractViolation("prior and source disagree on the lambda alphabet")
        expect = {"resp_a": (kb, kg, 2, 2), "resp_b": (ka, kg, 2, 2), "resp_c": (ka, kb, 2, 2)}
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise ContractViolation(f"{name} has shape {getattr(self, name).shape}, want {shape}")
        tables = [(self.prior, None), (self.source, (1, 2, 3)),
                  (self.resp_a, (2, 3)), (self.resp_b, (2, 3)), (self.resp_c, (2, 3))]
        for arr, axes in tables:
            if np.any(arr < 0) or np.max(np.abs(arr.sum(axis=axes) - 1.0)) > 1e-12:
                raise ContractViolation("model tables must be normalized distributions")

    @property
    def alphabet_sizes(self) -> tuple[int, int, int, int]:
        kl, ka, kb, kg = self.source.shape
        return ka, kb, kg, kl

    def source_joint(self) -> np.ndarray:
        """``p(lam, alpha, beta, gamma)``."""
        return self.prior[:, None, None, None] * self.source

    def source_marginals(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        j = self.source_joint()
        return j.sum(axis=(0, 2, 3)), j.sum(axis=(0, 1, 3)), j.sum(axis=(0, 1, 2))

    def joint(self) -> np.ndarray:
        """``p[a_B, b_A, a_C, b_C, c_A, c_B]``."""
        return np.einsum("labg,bgxy,agzw,abuv->xzywuv", self.source_joint(),
                         self.resp_a, self.resp_b, self.resp_c)


def envelope_ratio_bounds(model: TrilocalModel) -> tuple[float, float]:
    """Min and max over (lam, alpha, beta, gamma) of p(.|lam) / p(alpha)p(beta)p(gamma)."""
    pa, pb, pg = model.source_marginals()
    prod = np.einsum("a,b,g->abg", pa, pb, pg)
    mask = prod > 0
    ratio = model.source[:, mask] / prod[mask]
    if np.any(model.source[:, ~mask] > 0):
        return 0.0, math.inf
    return float(ratio.min()), float(ratio.max())


def _sinkhorn(kernel: np.ndarray, rows: np.ndarray, cols: np.ndarray,
              tol: float = 1e-14, max_iter: int = 10_000) -> np.ndarray:
    j = kernel.copy()
    for _ in range(max_iter):
        j *= (rows / j.sum(axis=1))[:, None]
        j *= (cols / j.sum(axis=0))[None, :]
        if np.max(np.abs(j.sum(axis=1) - rows)) < tol:
            break
    return j


def _random_response(rng: np.random.Generator, shape: tuple[int, int], deterministic: bool) -> np.ndarray:
    if deterministic:
        out = np.zeros(shape + (4,))
        np.put_along_axis(out, rng.integers(0, 4, size=shape)[..., None], 1.0, axis=-1)
    else:
        out = rng.dirichlet(np.ones(4), size=shape)
    return out.reshape(shape + (2, 2))


def random_trilocal_model(k: int, eps1: float, eps2: float, seed, k_lambda: Optional[int] = None,
                          responses: str = "mixed", coupling: str = "random") -> TrilocalModel:
    """Random model whose sources respect the ``(eps1, eps2)`` envelope for every lambda.

    p(.|lam) = w p(alpha)p(beta)p(gamma) + (1 - w) q_lam where q_lam is a
    product of per-source couplings to lam with the same marginals, and w is
    the smallest weight meeting both envelope bounds. ``coupling="identity"``
    makes q_lam the fully correlated alpha = beta = gamma = lam.
    ``responses`` is ``"deterministic"``, ``"stochastic"`` or ``"mixed"``.
    """
    if k < 1:
        raise ContractViolation("alphabet size must be at least 1")
    _check_eps(eps1, eps2)
    rng = np.random.Generator(np.random.PCG64(seed))
    if coupling == "identity":
        kl = k
        p_l = np.full(k, 1.0 / k)
        margs = [p_l.copy() for _ in range(3)]
        couplings = [np.diag(p_l) for _ in range(3)]
    elif coupling == "random":
        kl = k_lambda if k_lambda is not None else int(rng.integers(1, k + 1))
        p_l = rng.dirichlet(np.ones(kl))
        margs = [rng.dirichlet(np.ones(k)) for _ in range(3)]
        couplings = [_sinkhorn(rng.exponential(size=(kl, k)) ** 3, p_l, m) for m in margs]
    else:
        raise ContractViolation(f"unknown coupling {coupling!r}")
    cond = [c / c.sum(axis=1, keepdims=True) for c in couplings]
    q = np.einsum("la,lb,lg->labg", *cond)
    prod = np.einsum("a,b,g->abg", *margs)
    m = float(np.max(q / prod[None]))
    w = eps1
    if m > eps2:
        w = max(w, (m - eps2) / (m - 1.0))
    w = min(w, 1.0)
    source = w * prod[None] + (1.0 - w) * q
    source /= source.sum(axis=(1, 2, 3), keepdims=True)

    if responses == "mixed":
        det = bool(rng.integers(0, 2))
    elif responses in ("deterministic", "stochastic"):
        det = responses == "deterministic"
    else:
        raise ContractViolation(f"unknown response kind {responses!r}")
    return TrilocalModel(eps1, eps2, p_l, source,
                         _random_response(rng, (k, k), det),
                         _random_response(rng, (k, k), det),
                         _random_response(rng, (k, k), det))


@dataclass(frozen=True)
class BoundCheck:
    dist: OutcomeDistribution
    delta: float
    S_delta: float
    holds: bool

    def __iter__(self):
        return iter((self.dist, self.delta, self.S_delta, self.holds))


def lhv_bound_check(model: TrilocalModel, L: float = L_LOCAL) -> BoundCheck:
    """Evaluate S_delta on the model's own distribution at its (eps1, eps2)."""
    p = model.joint()
    dist = OutcomeDistribution(p.sum(axis=(4, 5)))
    match = sum(p[:, :, a, b, a, b].sum() for a in (0, 1) for b in (0, 1))
    delta = min(max(1.0 - float(match), 0.0), 1.0)
    s = s_delta(dist, delta, model.eps1, model.eps2, L)
    return BoundCheck(dist, delta, s, s <= NOISE_FLOOR)


def _deterministic(shape: tuple[int, int], table) -> np.ndarray:
    """Response array from a function ``(x, y) -> (bit1, bit2)``."""
    out = np.zeros(shape + (2, 2))
    for x in range(shape[0]):
        for y in range(shape[1]):
            out[(x, y) + tuple(table(x, y))] = 1.0
    return out


def _independent_model(eps1, eps2, p_alpha, p_beta, p_gamma, ra, rb, rc) -> TrilocalModel:
    src = np.einsum("a,b,g->abg", p_alpha, p_beta, p_gamma)[None]
    return TrilocalModel(eps1, eps2, np.ones(1), src, ra, rb, rc)


def saturating_strategy(eps1: float = 1.0, eps2: float = 1.0) -> TrilocalModel:
    """Alice and Bob always output zeros while Charlie always outputs (1, 1)."""
    one = np.ones(1)
    return _independent_model(eps1, eps2, one, one, one,
                              _deterministic((1, 1), lambda b, g: (0, 0)),
                              _deterministic((1, 1), lambda a, g: (0, 0)),
                              _deterministic((1, 1), lambda a, b: (1, 1)))


def copy_strategy(eps1: float = 1.0, eps2: float = 1.0) -> TrilocalModel:
    """Every party outputs the uniform bits of its two sources (perfect correlation)."""
    half = np.full(2, 0.5)
    return _independent_model(eps1, eps2, half, half, half,
                              _deterministic((2, 2), lambda b, g: (g, b)),
                              _deterministic((2, 2), lambda a, g: (g, a)),
                              _deterministic((2, 2), lambda a, b: (b, a)))


def shared_ab_bit_strategy(t: float = 0.25, eps1: float = 1.0, eps2: float = 1.0) -> TrilocalModel:
    """Alice and Bob both output the AB-source bit g (P(g=1) = t) twice; Charlie outputs (0, 0).

    The sources are independent, yet for 0 < t < 1/2 the model has
    S_delta > 0 (closed form in :func:`shared_ab_bit_s_delta`).
    """
    one = np.ones(1)
    p_g = np.array([1.0 - t, t])
    return _independent_model(eps1, eps2, one, one, p_g,
                              _deterministic((1, 2), lambda b, g: (g, g)),
                              _deterministic((1, 2), lambda a, g: (g, g)),
                              _deterministic((1, 1), lambda a, b: (0, 0)))


def shared_ab_bit_s_delta(t: float, eps1: float = 1.0, eps2: float = 1.0) -> float:
    """Closed form of S_delta for :func:`shared_ab_bit_strategy` with ``0 < t < 1``.

    p(0,0,0,0) = 1 - t, the null cells vanish, Delta = t and the positive
    marginals of a_C and b_C are both {1 - t, t}.
    """
    lo = min(t, 1.0 - t)
    xi1 = eps1 ** 3 / eps2 ** 4 * lo * lo
    return xi1 * ((1.0 - t) - t)


def adversarial_models(eps1: float = 1.0, eps2: float = 1.0) -> list[tuple[str, TrilocalModel]]:
    return [("saturating", saturating_strategy(eps1, eps2)),
            ("copy", copy_strategy(eps1, eps2)),
            ("shared_ab_bit", shared_ab_bit_strategy(0.25, eps1, eps2))]


@dataclass(frozen=True)
class FuzzReport:
    n_models: int
    n_violations: int
    max_S_delta: float
    worst: str
    violations: tuple[tuple[str, float], ...]

    @property
    def all_hold(self) -> bool:
        return self.n_violations == 0


def fuzz_soundness(n_models: int, seed: int, max_k: int = 4,
                   include_adversarial: bool = True) -> FuzzReport:
    """Check the bound on random models plus the hand-built strategies.

    Each random model draws k in 1..max_k, eps1 log-uniform in [1e-2, 1] (with
    a quarter of models at exactly 1) and eps2 log-uniform in [1, 1e2].
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    child_seeds = np.random.SeedSequence(seed).spawn(n_models)
    cases: list[tuple[str, TrilocalModel]] = []
    if include_adversarial:
        cases += adversarial_models()
    results: list[tuple[str, float]] = []
    for name, model in cases:
        results.append((name, lhv_bound_check(model).S_delta))
    for i in range(n_models):
        k = int(rng.integers(1, max_k + 1))
        independent = rng.random() < 0.25
        eps1 = 1.0 if independent else float(10 ** rng.uniform(-2, 0))
        eps2 = 1.0 if independent else float(10 ** rng.uniform(0, 2))
        model = random_trilocal_model(k, eps1, eps2, child_seeds[i])
        results.append((f"random[{i}] k={k} eps1={eps1:.4g} eps2={eps2:.4g}",
                        lhv_bound_check(model).S_delta))
    bad = tuple((n, s) for n, s in results if s > NOISE_FLOOR)
    worst_name, worst_s = max(results, key=lambda item: item[1])
    return FuzzReport(len(results), len(bad), worst_s, worst_name, bad)
