"""The strategic layer: player economics, best responses, and equilibrium solvers.

Each microgrid chooses its generation to trade sale revenue against its
generation cost and a quadratic penalty on its bus voltage angle.  The
angle penalty couples players through the sensitivity matrix; the game has
a unique equilibrium computed here both directly (active-set reduction of
the fixed-point system) and via a weighted social-cost minimizer that
serves as an independent oracle.

All solver math is per-unit; `cost` reports dollars with the energy terms
scaled to MW, matching how the prices are quoted.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    MaxIterationsExceeded,
    NoConvergentActiveSet,
    SingularReducedSystem,
    ValidationError,
)
from .grid import BusId, BusKind, Network, SensitivityMatrix, _frozen_array
from .powerflow import AngleProfile, InjectionVector, solve_angles


@dataclass(frozen=True)
class PlayerParams:
    """Per-microgrid economics; powers per-unit, prices $/MWh."""

    bus: BusId
    psi: float
    eta: float
    p_load: float
    p_gen_max: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValidationError(f"player at bus {self.bus}: eta must be > 0")
        if self.p_gen_max < 0 or self.p_load < 0:
            raise ValidationError(f"player at bus {self.bus}: negative load or capacity")


@dataclass(frozen=True)
class Market:
    zeta: float

    def __post_init__(self):
        if not np.isfinite(self.zeta):
            raise ValidationError("market price zeta must be finite")


@dataclass(frozen=True, eq=False)
class GameSpec:
    net: Network
    s: SensitivityMatrix
    players: tuple[PlayerParams, ...]
    market: Market
    team_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "players", tuple(self.players))
        if self.team_weights is not None:
            object.__setattr__(self, "team_weights", tuple(self.team_weights))
        if self.s.bus_order != self.net.non_slack_ids():
            raise ValidationError("sensitivity matrix ordering does not match network")
        if not self.players:
            raise ValidationError("at least one player required")
        buses = [p.bus for p in self.players]
        if len(set(buses)) != len(buses):
            raise ValidationError(f"duplicate player buses: {buses}")
        for p in self.players:
            bus = self.net.bus(p.bus)
            if bus.kind is not BusKind.MICROGRID:
                raise ValidationError(f"player bus {p.bus} is not a microgrid bus")
            if bus.p_load != p.p_load:
                raise ValidationError(
                    f"player at bus {p.bus}: load {p.p_load} disagrees with network {bus.p_load}"
                )
        if self.team_weights is not None:
            w = self.team_weights
            if len(w) != len(self.players):
                raise ValidationError("team_weights length must match player count")
            if any(not (0.0 < a < 1.0) for a in w) or abs(sum(w) - 1.0) > 1e-9:
                raise ValidationError("team_weights must lie in (0,1) and sum to 1")

    @property
    def player_buses(self) -> tuple[BusId, ...]:
        return tuple(p.bus for p in self.players)

    def player_index_of(self, bus: BusId) -> int:
        for k, p in enumerate(self.players):
            if p.bus == bus:
                return k
        raise ValidationError(f"no player at bus {bus}")


@dataclass(frozen=True)
class PlayerDerived:
    gamma: float
    s_ii: float
    p_min: float
    p_max: float

    def __post_init__(self):
        if not self.s_ii > 0:
            raise ValidationError("player diagonal sensitivity must be positive")
        if self.p_min > self.p_max:
            raise ValidationError("empty feasible interval for player")


class PlayerStatus(enum.Enum):
    INNER = "inner"
    AT_ZERO_GEN = "at_zero_gen"
    AT_CAPACITY = "at_capacity"


@dataclass(frozen=True, eq=False)
class Equilibrium:
    player_buses: tuple[BusId, ...]
    p_net: np.ndarray
    p_gen: np.ndarray
    angles: AngleProfile
    active_set: tuple[PlayerStatus, ...]

    def __post_init__(self):
        object.__setattr__(self, "p_net", _frozen_array(self.p_net))
        object.__setattr__(self, "p_gen", _frozen_array(self.p_gen))


def derive_player(spec: GameSpec, i: int) -> PlayerDerived:
    """Closed-form per-player constants used by every update rule."""
    p = spec.players[i]
    s_ii = float(spec.s.matrix[spec.s.index_of(p.bus), spec.s.index_of(p.bus)])
    gamma = (spec.market.zeta - p.psi) / (p.eta**2 * s_ii)
    return PlayerDerived(
        gamma=gamma, s_ii=s_ii, p_min=-p.p_load, p_max=p.p_gen_max - p.p_load
    )


def cost(spec: GameSpec, i: int, p_gen_i: float, theta_i: float) -> float:
    """Hourly cost in dollars: generation cost minus sale revenue plus the
    angle-regulation penalty.  Energy terms are converted to MW."""
    p = spec.players[i]
    base = spec.net.base_mva
    return (
        p.psi * p_gen_i * base
        + spec.market.zeta * (p.p_load - p_gen_i) * base
        + 0.5 * p.eta**2 * theta_i**2
    )


def best_response(d: PlayerDerived, g_bar_minus_i: float) -> float:
    """Net injection minimizing the player's cost given everyone else's
    aggregate angle contribution, clamped to the feasible interval."""
    return min(d.p_max, max(d.p_min, (d.gamma - g_bar_minus_i) / d.s_ii))


def _player_positions(spec: GameSpec) -> np.ndarray:
    return np.array([spec.s.index_of(p.bus) for p in spec.players])


def _fixed_injections(spec: GameSpec) -> np.ndarray:
    """Net injections of every non-player bus (players zeroed)."""
    order = spec.s.bus_order
    player_set = set(spec.player_buses)
    vals = np.zeros(len(order))
    for k, bus_id in enumerate(order):
        if bus_id in player_set:
            continue
        b = spec.net.bus(bus_id)
        vals[k] = b.p_gen_fixed - b.p_load
    return vals


def aggregate_others(spec: GameSpec, i: int, p_d: np.ndarray) -> float:
    """g_bar for player i: angle contribution of every injection but its own."""
    pos = _player_positions(spec)
    full = _fixed_injections(spec)
    full[pos] = p_d
    row = spec.s.matrix[pos[i]]
    return float(row @ full - row[pos[i]] * p_d[i])


def _reduced_cost_pu(spec: GameSpec, i: int, p_net_i: float, g_bar: float) -> float:
    """Player cost with the angle eliminated, all terms per-unit.

    This is the objective whose stationary point the closed-form response
    hits; the oracle searches it directly.
    """
    p = spec.players[i]
    d_s_ii = spec.s.matrix[spec.s.index_of(p.bus), spec.s.index_of(p.bus)]
    theta = d_s_ii * p_net_i + g_bar
    p_gen = p_net_i + p.p_load
    return (
        p.psi * p_gen
        + spec.market.zeta * (p.p_load - p_gen)
        + 0.5 * p.eta**2 * theta**2
    )


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def brute_force_best_response(
    spec: GameSpec, i: int, others_fixed: np.ndarray | InjectionVector
) -> float:
    """Independent oracle for the closed-form response: dense grid search of
    the reduced cost followed by golden-section refinement.

    `others_fixed` holds net injections for every non-slack bus in matrix
    order; the entry at player i's own bus is ignored.
    """
    vals = others_fixed.values if isinstance(others_fixed, InjectionVector) else np.asarray(others_fixed, dtype=float)
    pos = spec.s.index_of(spec.players[i].bus)
    row = spec.s.matrix[pos]
    g_bar = float(row @ vals - row[pos] * vals[pos])
    d = derive_player(spec, i)

    lo, hi = d.p_min, d.p_max
    if hi - lo <= 0.0:
        return lo
    xs = np.linspace(lo, hi, 100_001)
    theta = d.s_ii * xs + g_bar
    p = spec.players[i]
    f = (p.psi - spec.market.zeta) * xs + 0.5 * p.eta**2 * theta**2
    k = int(np.argmin(f))
    h = (hi - lo) / 100_000
    a = max(lo, xs[k] - h)
    b = min(hi, xs[k] + h)

    def fun(x):
        return _reduced_cost_pu(spec, i, x, g_bar)

    # golden-section to 1e-9 on the bracketing interval
    touches_lo = a <= lo
    touches_hi = b >= hi
    c = b - _GOLDEN * (b - a)
    e = a + _GOLDEN * (b - a)
    fc, fe = fun(c), fun(e)
    while b - a > 1e-9:
        if fc < fe:
            b, e, fe = e, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, e, fe
            e = a + _GOLDEN * (b - a)
            fe = fun(e)
    best = 0.5 * (a + b)
    # a clamped optimum must land exactly on the bound
    if touches_lo and fun(lo) <= fun(best):
        return lo
    if touches_hi and fun(hi) <= fun(best):
        return hi
    return best


def _solve_partition(
    spec: GameSpec,
    status: list[PlayerStatus],
    pos: np.ndarray,
    pfix: np.ndarray,
    derived: list[PlayerDerived],
) -> np.ndarray:
    """Solve the fixed-point system for the inner players of a partition,
    with boundary players' known injections moved to the right-hand side."""
    n = len(status)
    s = spec.s.matrix
    p_d = np.empty(n)
    for k in range(n):
        if status[k] is PlayerStatus.AT_ZERO_GEN:
            p_d[k] = derived[k].p_min
        elif status[k] is PlayerStatus.AT_CAPACITY:
            p_d[k] = derived[k].p_max
    inner = [k for k in range(n) if status[k] is PlayerStatus.INNER]
    if not inner:
        return p_d
    m = len(inner)
    h = np.empty((m, m))
    q = np.empty(m)
    for a, k in enumerate(inner):
        row = s[pos[k]]
        s_kk = derived[k].s_ii
        q_a = derived[k].gamma / s_kk - (row @ pfix) / s_kk
        for b_, j in enumerate(inner):
            h[a, b_] = row[pos[j]] / s_kk
        for j in range(n):
            if status[j] is not PlayerStatus.INNER:
                q_a -= (row[pos[j]] / s_kk) * p_d[j]
        q[a] = q_a
    try:
        sol = np.linalg.solve(h, q)
    except np.linalg.LinAlgError as exc:
        raise SingularReducedSystem(
            f"reduced system singular for inner set {inner}"
        ) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularReducedSystem(f"reduced solve non-finite for inner set {inner}")
    p_d[inner] = sol
    return p_d


def _equilibrium_from(spec: GameSpec, p_d: np.ndarray, status: list[PlayerStatus]) -> Equilibrium:
    pos = _player_positions(spec)
    full = _fixed_injections(spec)
    full[pos] = p_d
    inj = InjectionVector(values=full, bus_order=spec.s.bus_order)
    angles = solve_angles(spec.s, inj)
    loads = np.array([p.p_load for p in spec.players])
    return Equilibrium(
        player_buses=spec.player_buses,
        p_net=p_d,
        p_gen=p_d + loads,
        angles=angles,
        active_set=tuple(status),
    )


def solve_ne_direct(spec: GameSpec) -> Equilibrium:
    """Unique Nash equilibrium by active-set reduction.

    Starts from the all-inner partition; a player whose inner solution
    leaves its interval moves to that bound, a boundary player whose
    unconstrained response re-enters moves back, one player per pass
    (lowest index first).  Terminates because each consistent partition has
    a unique solution and a detected repeat is a numerical pathology.
    """
    n = len(spec.players)
    pos = _player_positions(spec)
    pfix = _fixed_injections(spec)
    derived = [derive_player(spec, k) for k in range(n)]
    status = [PlayerStatus.INNER] * n
    seen: set[tuple[PlayerStatus, ...]] = set()

    while True:
        key = tuple(status)
        if key in seen or len(seen) > 2**n:
            raise NoConvergentActiveSet(
                f"active-set iteration revisited partition {key}"
            )
        seen.add(key)
        p_d = _solve_partition(spec, status, pos, pfix, derived)

        s = spec.s.matrix
        full = pfix.copy()
        full[pos] = p_d
        moved = False
        for k in range(n):
            row = s[pos[k]]
            g_bar = float(row @ full - row[pos[k]] * p_d[k])
            d = derived[k]
            unconstrained = (d.gamma - g_bar) / d.s_ii
            if status[k] is PlayerStatus.INNER:
                if p_d[k] <= d.p_min:
                    status[k] = PlayerStatus.AT_ZERO_GEN
                    moved = True
                    break
                if p_d[k] >= d.p_max:
                    status[k] = PlayerStatus.AT_CAPACITY
                    moved = True
                    break
            elif status[k] is PlayerStatus.AT_ZERO_GEN:
                if unconstrained > d.p_min:
                    status[k] = PlayerStatus.INNER
                    moved = True
                    break
            else:
                if unconstrained < d.p_max:
                    status[k] = PlayerStatus.INNER
                    moved = True
                    break
        if moved:
            continue
        return _equilibrium_from(spec, p_d, status)


def _team_objective_terms(spec: GameSpec):
    """Quadratic data of the weighted team objective over player net injections."""
    pos = _player_positions(spec)
    pfix = _fixed_injections(spec)
    s_rows = spec.s.matrix[pos][:, :]  # player rows over all buses
    s_dd = spec.s.matrix[np.ix_(pos, pos)]
    t = s_rows @ pfix  # fixed part of each player's angle
    alpha = np.array(spec.team_weights)
    eta2 = np.array([p.eta**2 for p in spec.players])
    lin = alpha * np.array([p.psi - spec.market.zeta for p in spec.players])
    return s_dd, t, alpha, eta2, lin


def solve_team(spec: GameSpec, max_iterations: int = 100_000) -> Equilibrium:
    """Weighted social-cost minimizer by projected gradient descent.

    Deliberately independent of the active-set path: plain descent with
    backtracking, per-player interval projection, stopping on a small
    projected gradient or a fully stalled line search.
    """
    if spec.team_weights is None:
        raise ValidationError("solve_team requires team_weights")
    n = len(spec.players)
    derived = [derive_player(spec, k) for k in range(n)]
    lo = np.array([d.p_min for d in derived])
    hi = np.array([d.p_max for d in derived])
    s_dd, t, alpha, eta2, lin = _team_objective_terms(spec)

    def grad(p_d: np.ndarray) -> np.ndarray:
        theta = s_dd @ p_d + t
        return lin + (alpha * eta2 * theta) @ s_dd

    def value(p_d: np.ndarray) -> float:
        theta = s_dd @ p_d + t
        return float(lin @ p_d + 0.5 * np.sum(alpha * eta2 * theta**2))

    # curvature bound gives the natural initial step
    q = (s_dd * (alpha * eta2)[:, None]).T @ s_dd
    lip = float(np.linalg.eigvalsh(0.5 * (q + q.T)).max())
    step0 = 1.0 / lip if lip > 0 else 1.0

    p = np.clip(np.zeros(n), lo, hi)
    for _ in range(max_iterations):
        g = grad(p)
        step = 2.0 * step0
        f0 = value(p)
        while True:
            cand = np.clip(p - step * g, lo, hi)
            decrement = g @ (p - cand)
            if value(cand) <= f0 - 0.5 * decrement + 1e-300:
                break
            step *= 0.5
            if step < 1e-18 * step0:
                cand = p  # line search stalled at float noise
                break
        proj_grad = (p - np.clip(p - step0 * g, lo, hi)) / step0
        displacement = np.linalg.norm(cand - p, np.inf)
        if (
            np.linalg.norm(proj_grad, np.inf) <= 1e-9
            or displacement <= 1e-13 * max(1.0, float(np.abs(p).max()))
        ):
            p = cand
            break
        p = cand
    else:
        raise MaxIterationsExceeded(
            f"projected gradient did not converge in {max_iterations} iterations"
        )

    status = []
    for k in range(n):
        if p[k] <= lo[k]:
            status.append(PlayerStatus.AT_ZERO_GEN)
        elif p[k] >= hi[k]:
            status.append(PlayerStatus.AT_CAPACITY)
        else:
            status.append(PlayerStatus.INNER)
    return _equilibrium_from(spec, p, status)


def loss_of_efficiency(spec: GameSpec) -> float:
    """Weighted social cost at the equilibrium over that at the team optimum."""
    if spec.team_weights is None:
        raise ValidationError("loss_of_efficiency requires team_weights")
    ne = solve_ne_direct(spec)
    tp = solve_team(spec)
    pos = _player_positions(spec)

    def social(eq: Equilibrium) -> float:
        total = 0.0
        for k, w in enumerate(spec.team_weights):
            theta_k = float(eq.angles.values[pos[k]])
            total += w * cost(spec, k, float(eq.p_gen[k]), theta_k)
        return total

    loe = social(ne) / social(tp)
    # equality of the two solutions is an infinite-angle-weight limit; at
    # finite weights the equilibrium can cost up to ~1e-6 relative more
    if not (0.0 < loe <= 1.0 + 1e-6):
        raise ValidationError(f"loss of efficiency {loe} outside (0, 1]")
    return loe
