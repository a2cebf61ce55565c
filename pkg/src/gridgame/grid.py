"""Network data model, reduced susceptance matrix, and angle sensitivity matrix.

The DC model keeps a single per-unit susceptance per branch.  Removing the
slack bus row/column from the weighted graph Laplacian gives the reduced
susceptance matrix; its inverse maps net injections to bus voltage angles.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DisconnectedNetwork, DuplicateBus, SingularMatrix, UnknownBus, ValidationError

BusId = int


class BusKind(enum.Enum):
    SLACK = "slack"
    GENERATOR = "generator"
    LOAD = "load"
    MICROGRID = "microgrid"


@dataclass(frozen=True)
class Bus:
    """One bus; powers are per-unit on the network base.

    Load buses carry no fixed generation and generator buses carry no load;
    microgrid buses carry a load plus a strategic generator owned by the
    game layer.
    """

    id: BusId
    kind: BusKind
    p_load: float = 0.0
    p_gen_fixed: float = 0.0

    def __post_init__(self):
        if self.id <= 0:
            raise ValidationError(f"bus id must be a positive integer, got {self.id}")
        if self.p_load < 0 or self.p_gen_fixed < 0:
            raise ValidationError(f"bus {self.id}: negative load or generation")
        if self.kind is BusKind.LOAD and self.p_gen_fixed != 0.0:
            raise ValidationError(f"load bus {self.id} must have zero fixed generation")
        if self.kind is BusKind.GENERATOR and self.p_load != 0.0:
            raise ValidationError(f"generator bus {self.id} must have zero load")


@dataclass(frozen=True)
class Branch:
    """A transmission line with per-unit series susceptance."""

    from_bus: BusId
    to_bus: BusId
    susceptance: float
    in_service: bool = True

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValidationError(f"branch {self.from_bus}-{self.to_bus} is a self loop")
        if self.in_service and not self.susceptance > 0.0:
            raise ValidationError(
                f"branch {self.from_bus}-{self.to_bus}: in-service susceptance must be > 0"
            )


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    base_mva: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DuplicateBus(f"duplicate bus ids: {dupes}")
        slacks = [b.id for b in self.buses if b.kind is BusKind.SLACK]
        if len(slacks) != 1:
            raise ValidationError(f"exactly one slack bus required, found {slacks}")
        known = set(ids)
        for br in self.branches:
            for end in (br.from_bus, br.to_bus):
                if end not in known:
                    raise UnknownBus(f"branch {br.from_bus}-{br.to_bus}: unknown bus {end}")

    @property
    def slack(self) -> BusId:
        return next(b.id for b in self.buses if b.kind is BusKind.SLACK)

    def bus(self, bus_id: BusId) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise UnknownBus(f"no bus {bus_id} in network")

    def non_slack_ids(self) -> tuple[BusId, ...]:
        """Non-slack bus ids in ascending order (the matrix ordering)."""
        return tuple(sorted(b.id for b in self.buses if b.kind is not BusKind.SLACK))


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ReducedSusceptance:
    """Reduced Laplacian of the in-service graph (slack row/column deleted)."""

    matrix: np.ndarray
    bus_order: tuple[BusId, ...]

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen_array(self.matrix))
        object.__setattr__(self, "bus_order", tuple(self.bus_order))

    def index_of(self, bus_id: BusId) -> int:
        try:
            return self.bus_order.index(bus_id)
        except ValueError:
            raise UnknownBus(f"bus {bus_id} not in matrix ordering") from None


@dataclass(frozen=True)
class SensitivityMatrix:
    """Inverse of the reduced susceptance matrix: theta = S @ P."""

    matrix: np.ndarray
    bus_order: tuple[BusId, ...]

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen_array(self.matrix))
        object.__setattr__(self, "bus_order", tuple(self.bus_order))

    def index_of(self, bus_id: BusId) -> int:
        try:
            return self.bus_order.index(bus_id)
        except ValueError:
            raise UnknownBus(f"bus {bus_id} not in matrix ordering") from None


@dataclass(frozen=True)
class Lemma1Violation:
    """One failed structural property of a sensitivity matrix."""

    prop: str  # "symmetry" | "nonnegativity" | "positive_diagonal"
    row: int
    col: int
    value: float

    def __str__(self):
        return f"{self.prop} violated at ({self.row}, {self.col}): {self.value!r}"


def build_reduced_susceptance(net: Network) -> ReducedSusceptance:
    """Assemble the reduced Laplacian over in-service branches.

    Raises DisconnectedNetwork if the in-service graph does not connect every
    bus to the slack (the matrix would be singular).
    """
    ids = [b.id for b in net.buses]
    if len(set(ids)) != len(ids):
        raise DuplicateBus(f"duplicate bus ids: {sorted(ids)}")

    order = net.non_slack_ids()
    pos = {bus_id: k for k, bus_id in enumerate(order)}
    all_pos = {b.id: k for k, b in enumerate(sorted(net.buses, key=lambda b: b.id))}

    live = [br for br in net.branches if br.in_service]
    n_all = len(net.buses)
    if n_all > 1:
        rows = [all_pos[br.from_bus] for br in live]
        cols = [all_pos[br.to_bus] for br in live]
        adj = coo_matrix((np.ones(len(live)), (rows, cols)), shape=(n_all, n_all))
        n_comp, _ = connected_components(adj, directed=False)
        if n_comp != 1:
            raise DisconnectedNetwork(
                f"in-service graph splits into {n_comp} components"
            )

    n = len(order)
    mat = np.zeros((n, n))
    for br in live:
        b = br.susceptance
        i = pos.get(br.from_bus)
        j = pos.get(br.to_bus)
        if i is not None and j is not None:
            mat[i, j] -= b
            mat[j, i] -= b
        if i is not None:
            mat[i, i] += b
        if j is not None:
            mat[j, j] += b
    return ReducedSusceptance(matrix=mat, bus_order=order)


def build_sensitivity(rb: ReducedSusceptance) -> SensitivityMatrix:
    """Invert the reduced Laplacian by a Cholesky solve against the identity."""
    n = rb.matrix.shape[0]
    try:
        cho = scipy.linalg.cho_factor(rb.matrix)
        s = scipy.linalg.cho_solve(cho, np.eye(n))
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularMatrix(f"reduced susceptance matrix is not SPD: {exc}") from exc
    if not np.all(np.isfinite(s)):
        raise SingularMatrix("sensitivity solve produced non-finite entries")
    # Cholesky round-trip leaves ~1e-16 asymmetry; the exact matrix is symmetric.
    s = 0.5 * (s + s.T)
    return SensitivityMatrix(matrix=s, bus_order=rb.bus_order)


def validate_lemma1(s: SensitivityMatrix) -> list[Lemma1Violation]:
    """Check symmetry, entrywise nonnegativity, and positive diagonal.

    Returns an empty list when the matrix has all three properties; otherwise
    one record per offending entry.
    """
    m = s.matrix
    n = m.shape[0]
    scale = np.abs(m).max() if m.size else 0.0
    out: list[Lemma1Violation] = []
    for i in range(n):
        if not m[i, i] > 0.0:
            out.append(Lemma1Violation("positive_diagonal", i, i, float(m[i, i])))
    for i in range(n):
        for j in range(i + 1, n):
            if abs(m[i, j] - m[j, i]) > 1e-10 * scale:
                out.append(Lemma1Violation("symmetry", i, j, float(m[i, j] - m[j, i])))
    for i in range(n):
        for j in range(n):
            if m[i, j] < -1e-12:
                out.append(Lemma1Violation("nonnegativity", i, j, float(m[i, j])))
    return out
