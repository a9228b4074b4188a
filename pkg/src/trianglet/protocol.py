"""The triangle protocol: exact outcome distribution, sampling and event matching.

Every link state is held in the two parties' bit labels (Charlie's H/V
inversion already applied), first party first:

* ``rho_ac``: (Alice's a_C, Charlie's c_A)
* ``rho_bc``: (Bob's b_C, Charlie's c_B)
* ``rho_ab``: (Alice's a_B, Bob's b_A)

Alice and Bob measure their C-link photon in the computational basis, then
choose the AB-link basis from that bit (see :class:`~trianglet.measurement.AbBases`).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import ContractViolation, DomainError, TableExhaustedWarning
from .measurement import (AbBases, MeasurementBasis, computational_basis,
                          logical_ab_bases, physical_ab_bases, product_projector,
                          relabel_to_bits)
from .qmath import DensityMatrix, born_prob
from .states import (PdlModel, apply_white_noise, eberhard_state, optimize_theta,
                     pdl_channel, source_state, theta_from_r, visibility_for_fidelity)

FIELDS = ("a_B", "b_A", "a_C", "b_C", "c_A", "c_B")
DIST_FIELDS = FIELDS[:4]
SUM_TOL = 1e-10

# (a_C, b_C) -> index of the AB table consumed during matching
TABLE_FOR_BITS = {(1, 1): 0, (0, 0): 1, (1, 0): 2, (0, 1): 3}
STREAM_NAMES = ("ac", "bc", "t1", "t2", "t3", "t4")

# Calibration of the paper-like scenario: H/V visibilities of the AC and BC
# links, and white noise on the AB link matching its tomographic fidelity.
PAPER_VISIBILITY_AC = 0.989
PAPER_VISIBILITY_BC = 0.988
PAPER_FIDELITY_AB = 0.98
PAPER_R = 0.4364


class OutcomeDistribution:
    """``p[a_B, b_A, a_C, b_C]`` as a read-only 2x2x2x2 array."""

    __slots__ = ("_p",)

    def __init__(self, p):
        arr = np.array(p, dtype=float, copy=True).reshape(2, 2, 2, 2)
        if np.any(arr < 0):
            raise ContractViolation("probabilities must be non-negative")
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise ContractViolation(f"probabilities sum to {total!r}")
        arr.flags.writeable = False
        self._p = arr

    @classmethod
    def from_events(cls, events: "EventTable") -> "OutcomeDistribution":
        counts = events.distribution_counts()
        if counts.sum() == 0:
            raise DomainError("no events to estimate a distribution from")
        return cls(counts / counts.sum())

    @property
    def p(self) -> np.ndarray:
        return self._p

    def __call__(self, a_B: int, b_A: int, a_C: int, b_C: int) -> float:
        return float(self._p[a_B, b_A, a_C, b_C])

    def marginal_a_C(self) -> np.ndarray:
        return self._p.sum(axis=(0, 1, 3))

    def marginal_b_C(self) -> np.ndarray:
        return self._p.sum(axis=(0, 1, 2))

    def conditional(self, a_C: int, b_C: int) -> np.ndarray:
        """``p(a_B, b_A | a_C, b_C)``."""
        block = self._p[:, :, a_C, b_C]
        w = block.sum()
        if w <= 0:
            raise DomainError(f"(a_C, b_C) = ({a_C}, {b_C}) has zero probability")
        return block / w

    def rows(self):
        for idx in np.ndindex(2, 2, 2, 2):
            yield idx, float(self._p[idx])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DIST_FIELDS + ("p",))
            for idx, value in self.rows():
                w.writerow(list(idx) + [format(value, ".17g")])

    @classmethod
    def from_csv(cls, path) -> "OutcomeDistribution":
        p = np.zeros((2, 2, 2, 2))
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                p[tuple(int(row[k]) for k in DIST_FIELDS)] = float(row["p"])
        return cls(p)

    def __eq__(self, other) -> bool:
        return isinstance(other, OutcomeDistribution) and np.array_equal(self._p, other._p)

    def __repr__(self) -> str:
        return f"OutcomeDistribution(p0000={self._p[0, 0, 0, 0]:.6g})"


class EventTable:
    """Columns of outcome bits; a table carries only the fields it measured."""

    __slots__ = ("_columns",)

    def __init__(self, columns: Mapping[str, Sequence[int]]):
        cols = {}
        length = None
        for name in FIELDS:
            if name not in columns:
                continue
            col = np.array(columns[name], dtype=np.int8, copy=True)
            if col.ndim != 1:
                raise ContractViolation(f"column {name} must be one-dimensional")
            if col.size and (col.min() < 0 or col.max() > 1):
                raise ContractViolation(f"column {name} has non-bit values")
            if length is None:
                length = col.size
            elif col.size != length:
                raise ContractViolation("columns have different lengths")
            col.flags.writeable = False
            cols[name] = col
        unknown = set(columns) - set(FIELDS)
        if unknown:
            raise ContractViolation(f"unknown fields {sorted(unknown)}")
        if not cols:
            raise ContractViolation("an event table needs at least one field")
        self._columns = cols

    @property
    def fields(self) -> tuple[str, ...]:
        return tuple(self._columns)

    @property
    def counts(self) -> int:
        return len(self)

    def __len__(self) -> int:
        return next(iter(self._columns.values())).size

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._columns[name]
        except KeyError:
            raise ContractViolation(f"table has no field {name!r}") from None

    def has(self, *names: str) -> bool:
        return all(n in self._columns for n in names)

    @property
    def records(self) -> list[tuple]:
        """Rows as 6-tuples in :data:`FIELDS` order, ``None`` where absent."""
        cols = [self._columns.get(n) for n in FIELDS]
        return [tuple(None if c is None else int(c[i]) for c in cols) for i in range(len(self))]

    def head(self, n: int) -> "EventTable":
        return EventTable({k: v[:n] for k, v in self._columns.items()})

    def distribution_counts(self) -> np.ndarray:
        if not self.has(*DIST_FIELDS):
            raise ContractViolation("table lacks a_B, b_A, a_C or b_C")
        flat = (8 * self["a_B"].astype(np.int64) + 4 * self["b_A"]
                + 2 * self["a_C"] + self["b_C"])
        return np.bincount(flat, minlength=16).reshape(2, 2, 2, 2).astype(float)

    def to_csv(self, path) -> None:
        text = [",".join(FIELDS)]
        cols = [self._columns.get(n) for n in FIELDS]
        as_str = [None if c is None else c.astype(str) for c in cols]
        for i in range(len(self)):
            text.append(",".join("" if c is None else c[i] for c in as_str))
        Path(path).write_text("\n".join(text) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "EventTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != FIELDS:
                raise ContractViolation(f"unexpected event header {header}")
            rows = list(reader)
        if not rows:
            raise ContractViolation(f"{path} holds no events")
        present = [j for j, v in enumerate(rows[0]) if v != ""]
        cols = {FIELDS[j]: [int(r[j]) for r in rows] for j in present}
        return cls(cols)

    def __eq__(self, other) -> bool:
        return (isinstance(other, EventTable) and self.fields == other.fields
                and all(np.array_equal(self[k], other[k]) for k in self.fields))

    def __repr__(self) -> str:
        return f"EventTable(n={len(self)}, fields={self.fields})"


@dataclass(frozen=True)
class SampleSizes:
    n_ac: int = 407_545
    n_bc: int = 407_545
    n_tables: tuple[int, int, int, int] = (108_286, 102_071, 101_857, 115_729)

    def __post_init__(self):
        if min(self.n_ac, self.n_bc, *self.n_tables) < 1:
            raise ContractViolation("sample sizes must be at least 1")
        if len(self.n_tables) != 4:
            raise ContractViolation("four AB table sizes are required")


@dataclass(frozen=True)
class SimulationScenario:
    rho_ac: DensityMatrix
    rho_bc: DensityMatrix
    rho_ab: DensityMatrix
    ab_bases: AbBases
    theta: float
    pdl: Optional[PdlModel] = None
    visibility_ab: float = 1.0
    sizes: SampleSizes = field(default_factory=SampleSizes)
    seed: int = 0

    def __post_init__(self):
        for name in ("rho_ac", "rho_bc", "rho_ab"):
            if getattr(self, name).dim != 4:
                raise ContractViolation(f"{name} must be a two-qubit state")
        if not 0 <= self.seed < 2 ** 64:
            raise ContractViolation("seed must be a 64-bit unsigned integer")


def ideal_scenario(theta: Optional[float] = None, sizes: SampleSizes | None = None,
                   seed: int = 0) -> SimulationScenario:
    """Bell pairs on the C links and the Eberhard state measured in logical bases."""
    if theta is None:
        theta = optimize_theta()[0]
    phi = relabel_to_bits(source_state(), "A", "C")
    return SimulationScenario(
        rho_ac=phi, rho_bc=relabel_to_bits(source_state(), "B", "C"),
        rho_ab=eberhard_state(theta).density(), ab_bases=logical_ab_bases(theta),
        theta=theta, sizes=sizes or SampleSizes(), seed=seed)


def _ab_state(pdl: PdlModel, visibility_ab: float) -> DensityMatrix:
    return apply_white_noise(pdl_channel(source_state(), pdl), visibility_ab)


def physical_scenario(r: float, visibility_ac: float = 1.0, visibility_bc: float = 1.0,
                      visibility_ab: float = 1.0, gamma_misalign: float = 0.0,
                      pdl: PdlModel | None = None, sizes: SampleSizes | None = None,
                      seed: int = 0) -> SimulationScenario:
    """Source states through the PDL and white noise, measured at physical angles.

    ``pdl`` overrides ``r``/``gamma_misalign`` when given (e.g. custom t_H, t_V).
    """
    if pdl is None:
        pdl = PdlModel.from_ratio(r, gamma_misalign)
    rho_ac = apply_white_noise(relabel_to_bits(source_state(), "A", "C"), visibility_ac)
    rho_bc = apply_white_noise(relabel_to_bits(source_state(), "B", "C"), visibility_bc)
    return SimulationScenario(
        rho_ac=rho_ac, rho_bc=rho_bc, rho_ab=_ab_state(pdl, visibility_ab),
        ab_bases=physical_ab_bases(pdl), theta=theta_from_r(pdl.r), pdl=pdl,
        visibility_ab=visibility_ab, sizes=sizes or SampleSizes(), seed=seed)


def paper_like_scenario(sizes: SampleSizes | None = None, seed: int = 0,
                        r: float = PAPER_R) -> SimulationScenario:
    return physical_scenario(
        r, visibility_ac=PAPER_VISIBILITY_AC, visibility_bc=PAPER_VISIBILITY_BC,
        visibility_ab=visibility_for_fidelity(PAPER_FIDELITY_AB), sizes=sizes, seed=seed)


def link_probabilities(rho: DensityMatrix, basis_1: MeasurementBasis,
                       basis_2: MeasurementBasis) -> np.ndarray:
    """2x2 Born table ``p(x, y)`` for a product measurement."""
    p = np.array([[born_prob(rho, product_projector(basis_1, x, basis_2, y))
                   for y in (0, 1)] for x in (0, 1)])
    return p / p.sum()


def ab_conditionals(scenario: SimulationScenario) -> np.ndarray:
    """``q[a_B, b_A, a_C, b_C] = p(a_B, b_A | bases chosen by a_C, b_C)``."""
    q = np.zeros((2, 2, 2, 2))
    for a_c in (0, 1):
        for b_c in (0, 1):
            alice, bob = scenario.ab_bases.for_outcomes(a_c, b_c)
            q[:, :, a_c, b_c] = link_probabilities(scenario.rho_ab, alice, bob)
    return q


def exact_joint(scenario: SimulationScenario) -> np.ndarray:
    """Full ``p[a_B, b_A, a_C, b_C, c_A, c_B]`` including Charlie's bits."""
    comp = computational_basis()
    p_ac = link_probabilities(scenario.rho_ac, comp, comp)   # [a_C, c_A]
    p_bc = link_probabilities(scenario.rho_bc, comp, comp)   # [b_C, c_B]
    return np.einsum("xyab,au,bv->xyabuv", ab_conditionals(scenario), p_ac, p_bc)


def exact_distribution(scenario: SimulationScenario) -> OutcomeDistribution:
    return OutcomeDistribution(exact_joint(scenario).sum(axis=(4, 5)))


def exact_delta(scenario: SimulationScenario) -> float:
    """``1 - p(a_C = c_A, b_C = c_B)`` from the Born rule."""
    j = exact_joint(scenario).sum(axis=(0, 1))
    match = sum(j[a, b, a, b] for a in (0, 1) for b in (0, 1))
    return float(1.0 - match)


def _generator(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def stream_seeds(root_seed: int) -> dict[str, np.random.SeedSequence]:
    """Independent child streams for the six sampling stages."""
    children = np.random.SeedSequence(root_seed).spawn(len(STREAM_NAMES))
    return dict(zip(STREAM_NAMES, children))


def sample_link(rho: DensityMatrix, basis_1: MeasurementBasis, basis_2: MeasurementBasis,
                n: int, seed, fields: tuple[str, str] = ("a_B", "b_A")) -> EventTable:
    """Draw ``n`` i.i.d. outcome pairs; ``fields`` names the two columns.

    ``seed`` is an int or a :class:`numpy.random.SeedSequence`; the generator
    is always PCG64.
    """
    if n < 1:
        raise ContractViolation("n must be at least 1")
    p = link_probabilities(rho, basis_1, basis_2).ravel()
    idx = _generator(seed).choice(4, size=n, p=p)
    return EventTable({fields[0]: idx >> 1, fields[1]: idx & 1})


def sample_tables(scenario: SimulationScenario) -> dict[str, EventTable]:
    """The six raw tables: the two C links and the four AB basis combinations."""
    seeds = stream_seeds(scenario.seed)
    comp = computational_basis()
    s = scenario.sizes
    out = {
        "ac": sample_link(scenario.rho_ac, comp, comp, s.n_ac, seeds["ac"], ("a_C", "c_A")),
        "bc": sample_link(scenario.rho_bc, comp, comp, s.n_bc, seeds["bc"], ("b_C", "c_B")),
    }
    for bits, k in TABLE_FOR_BITS.items():
        alice, bob = scenario.ab_bases.for_outcomes(*bits)
        name = f"t{k + 1}"
        out[name] = sample_link(scenario.rho_ab, alice, bob, s.n_tables[k], seeds[name])
    return out


@dataclass(frozen=True)
class MatchResult:
    events: EventTable
    dropped: int

    @property
    def partial(self) -> bool:
        return self.dropped > 0


def match_events_detailed(t_ac: EventTable, t_bc: EventTable,
                          ab_tables: Sequence[EventTable]) -> MatchResult:
    """FIFO matching; stops at the first pair whose AB table is exhausted."""
    if len(ab_tables) != 4:
        raise ContractViolation("four AB tables are required")
    n = min(len(t_ac), len(t_bc))
    a_c, c_a = t_ac["a_C"][:n], t_ac["c_A"][:n]
    b_c, c_b = t_bc["b_C"][:n], t_bc["c_B"][:n]
    which = np.empty(n, dtype=np.int64)
    for (x, y), k in TABLE_FOR_BITS.items():
        which[(a_c == x) & (b_c == y)] = k
    rank = np.empty(n, dtype=np.int64)
    cut = n
    for k in range(4):
        pos = np.flatnonzero(which == k)
        rank[pos] = np.arange(pos.size)
        size = len(ab_tables[k])
        if pos.size > size:
            cut = min(cut, int(pos[size]))
    which, rank = which[:cut], rank[:cut]
    a_b = np.empty(cut, dtype=np.int8)
    b_a = np.empty(cut, dtype=np.int8)
    for k in range(4):
        sel = which == k
        a_b[sel] = ab_tables[k]["a_B"][rank[sel]]
        b_a[sel] = ab_tables[k]["b_A"][rank[sel]]
    events = EventTable({"a_B": a_b, "b_A": b_a, "a_C": a_c[:cut], "b_C": b_c[:cut],
                         "c_A": c_a[:cut], "c_B": c_b[:cut]})
    return MatchResult(events, n - cut)


def match_events(t_ac: EventTable, t_bc: EventTable, t1: EventTable, t2: EventTable,
                 t3: EventTable, t4: EventTable) -> EventTable:
    """Join C-link rounds with AB outcomes drawn from the table their bits select.

    (a_C, b_C) = (1,1) reads t1, (0,0) t2, (1,0) t3 and (0,1) t4, each in
    first-in-first-out order. If a table runs dry the output is truncated and
    a :class:`TableExhaustedWarning` reports the number of dropped pairs.
    """
    res = match_events_detailed(t_ac, t_bc, (t1, t2, t3, t4))
    if res.partial:
        warnings.warn(TableExhaustedWarning(
            f"AB table exhausted; dropped {res.dropped} of "
            f"{res.dropped + len(res.events)} pairs"), stacklevel=2)
    return res.events


def run_pipeline(scenario: SimulationScenario) -> MatchResult:
    t = sample_tables(scenario)
    return match_events_detailed(t["ac"], t["bc"], (t["t1"], t["t2"], t["t3"], t["t4"]))


def delta_from(events: EventTable) -> float:
    """Fraction of rounds where ``(a_C, b_C) != (c_A, c_B)``."""
    if not events.has("a_C", "b_C", "c_A", "c_B"):
        raise ContractViolation("delta needs a_C, b_C, c_A and c_B")
    if len(events) == 0:
        raise DomainError("cannot estimate delta from an empty table")
    miss = (events["a_C"] != events["c_A"]) | (events["b_C"] != events["c_B"])
    return float(np.mean(miss))


def win_counts(events: EventTable) -> tuple[int, int]:
    """``(n, c)`` of the win/lose game.

    A win is (0,0,0,0) with Charlie matching. Losses are the three null cells
    and every round where Charlie mismatches; all other rounds are discarded.
    """
    if not events.has(*FIELDS):
        raise ContractViolation("win counting needs all six fields")
    a_b, b_a, a_c, b_c = (events[k] for k in DIST_FIELDS)
    charlie_ok = (a_c == events["c_A"]) & (b_c == events["c_B"])
    win = charlie_ok & (a_b == 0) & (b_a == 0) & (a_c == 0) & (b_c == 0)
    null = (((a_b == 0) & (b_a == 0) & (a_c == 1) & (b_c == 1))
            | ((a_b == 0) & (b_a == 1) & (a_c == 0) & (b_c == 1))
            | ((a_b == 1) & (b_a == 0) & (a_c == 1) & (b_c == 0)))
    lose = ~charlie_ok | null
    c = int(np.count_nonzero(win))
    return c + int(np.count_nonzero(lose & ~win)), c


def scenario_at_misalignment(scenario: SimulationScenario, gamma_misalign: float) -> SimulationScenario:
    if scenario.pdl is None:
        raise ContractViolation("misalignment needs a PDL-prepared scenario")
    pdl = scenario.pdl.with_gamma(gamma_misalign)
    return replace(scenario, pdl=pdl, rho_ab=_ab_state(pdl, scenario.visibility_ab),
                   ab_bases=physical_ab_bases(pdl))


def misalignment_sweep(scenario: SimulationScenario,
                       gamma_range: Iterable[float]) -> list[tuple[float, OutcomeDistribution]]:
    """Distribution versus PDL eigenaxis rotation, with Bob's settings held fixed."""
    out = []
    for g in gamma_range:
        if not -90.0 < g < 90.0:
            raise DomainError(f"misalignment {g} outside (-90, 90) degrees")
        out.append((float(g), exact_distribution(scenario_at_misalignment(scenario, g))))
    return out
