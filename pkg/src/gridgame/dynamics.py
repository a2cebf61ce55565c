"""Decentralized update schemes and their convergence diagnostics.

Three schemes share one core update: compute each player's aggregate
angle contribution from a snapshot of the bus angles (exactly what a PMU
at the bus measures), then apply the clamped response.  The synchronous
scheme updates everyone each step; the random and PMU-driven schemes
update each player with its own probability.  Because the random scheme's
aggregate and the PMU measurement are algebraically identical, the two
stochastic schemes produce bit-identical trajectories under one seed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleInitial, ValidationError
from .game import Equilibrium, GameSpec, PlayerStatus, derive_player, _fixed_injections, _player_positions
from .grid import BusId, _frozen_array
from .powerflow import AngleProfile


class Scheme(enum.Enum):
    IUA = "iua"  # synchronous
    RUA = "rua"  # random per-player updates
    PDA = "pda"  # PMU-measurement-driven random updates


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Scheme
    tau: tuple[float, ...] | None = None
    delta: float = 1e-6
    max_steps: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.tau is not None:
            object.__setattr__(self, "tau", tuple(self.tau))
        if self.scheme is Scheme.IUA:
            if self.tau is not None:
                raise ValidationError("tau is meaningless for the synchronous scheme")
        else:
            if self.tau is None:
                raise ValidationError(f"{self.scheme.value} requires update probabilities tau")
            if any(not (0.0 < t < 1.0) for t in self.tau):
                raise ValidationError("every tau must lie strictly in (0, 1)")
        if not self.delta > 0:
            raise ValidationError("stopping tolerance delta must be > 0")
        if self.max_steps < 1:
            raise ValidationError("max_steps must be at least 1")


@dataclass(frozen=True)
class ContractionReport:
    ratio_max: float
    c1: float
    c2: float | None
    iua_condition_met: bool
    rua_condition_met: bool | None


@dataclass(frozen=True)
class TerminalStatus:
    converged: bool
    step: int


@dataclass(frozen=True, eq=False)
class Trajectory:
    player_buses: tuple[BusId, ...]
    gens: np.ndarray          # (steps+1, players) per-unit generation
    angles: np.ndarray        # (steps+1, players) radians at the player buses
    step_changes: np.ndarray  # (steps+1,) infinity-norm change, step 0 is 0
    errors: np.ndarray | None  # (steps+1,) distance to a reference equilibrium
    status: TerminalStatus
    events_applied: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gens", _frozen_array(self.gens))
        object.__setattr__(self, "angles", _frozen_array(self.angles))
        object.__setattr__(self, "step_changes", _frozen_array(self.step_changes))
        if self.errors is not None:
            object.__setattr__(self, "errors", _frozen_array(self.errors))


def measured_aggregate(s_ii: float, theta_i: float, p_i: float) -> float:
    """Everyone else's angle contribution at a bus, recovered from the local
    angle measurement and the player's own injection."""
    return theta_i - s_ii * p_i


def check_conditions(spec: GameSpec, cfg: SchemeConfig) -> ContractionReport:
    """Contraction constants of the update map and the scheme conditions."""
    pos = _player_positions(spec)
    s = spec.s.matrix
    n = len(pos)
    ratio_max = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                ratio_max = max(ratio_max, s[pos[i], pos[j]] / s[pos[i], pos[i]])
    c1 = ratio_max * (n - 1)
    # strict inequalities decided with a margin so float rounding cannot
    # flip an exactly-critical case
    eps = 1e-9
    if cfg.tau is not None:
        if len(cfg.tau) != n:
            raise ValidationError(f"{len(cfg.tau)} tau values for {n} players")
        tau_hi, tau_lo = max(cfg.tau), min(cfg.tau)
        c2 = tau_hi * c1 + (1.0 - tau_lo)
        rua_met = tau_hi * c1 <= tau_lo * (1.0 - eps)
    else:
        c2 = None
        rua_met = None
    return ContractionReport(
        ratio_max=ratio_max,
        c1=c1,
        c2=c2,
        iua_condition_met=c1 <= 1.0 - eps,
        rua_condition_met=rua_met,
    )


class _Engine:
    """Precomputed per-spec state for fast stepping."""

    def __init__(self, spec: GameSpec):
        self.spec = spec
        self.pos = _player_positions(spec)
        self.pfix = _fixed_injections(spec)
        self.s = spec.s.matrix
        derived = [derive_player(spec, k) for k in range(len(spec.players))]
        self.gamma = np.array([d.gamma for d in derived])
        self.s_ii = np.array([d.s_ii for d in derived])
        self.p_min = np.array([d.p_min for d in derived])
        self.p_max = np.array([d.p_max for d in derived])
        self.loads = np.array([p.p_load for p in spec.players])
        self.buses = spec.player_buses

    def full_injections(self, state: np.ndarray) -> np.ndarray:
        full = self.pfix.copy()
        full[self.pos] = state
        return full

    def player_angles(self, state: np.ndarray) -> np.ndarray:
        return (self.s @ self.full_injections(state))[self.pos]

    def responses(self, state: np.ndarray) -> np.ndarray:
        """Clamped response of every player against a snapshot of state."""
        theta = self.player_angles(state)
        g_bar = measured_aggregate(self.s_ii, theta, state)
        return np.minimum(self.p_max, np.maximum(self.p_min, (self.gamma - g_bar) / self.s_ii))

    def feasible(self, state: np.ndarray) -> bool:
        return bool(np.all(state >= self.p_min - 1e-12) and np.all(state <= self.p_max + 1e-12))


def step_iua(spec: GameSpec, state: np.ndarray) -> np.ndarray:
    """All players apply their clamped response simultaneously."""
    return _Engine(spec).responses(np.asarray(state, dtype=float))


def step_rua(spec: GameSpec, state: np.ndarray, rng: np.random.Generator, tau) -> np.ndarray:
    """Each player applies its response with its probability, else holds.

    Aggregates are evaluated against the previous step's vector for every
    player (synchronous evaluation, asynchronous commit).
    """
    state = np.asarray(state, dtype=float)
    resp = _Engine(spec).responses(state)
    mask = rng.random(len(state)) < np.asarray(tau, dtype=float)
    return np.where(mask, resp, state)


def step_pda(spec: GameSpec, state: np.ndarray, rng: np.random.Generator, tau) -> np.ndarray:
    """PMU-driven update: identical arithmetic to the random scheme, with the
    aggregate read off the measured angle snapshot."""
    state = np.asarray(state, dtype=float)
    resp = _Engine(spec).responses(state)
    mask = rng.random(len(state)) < np.asarray(tau, dtype=float)
    return np.where(mask, resp, state)


def run(
    spec: GameSpec,
    cfg: SchemeConfig,
    initial: np.ndarray | None = None,
    timeline=None,
    reference: Equilibrium | None = None,
) -> Trajectory:
    """Iterate the configured scheme, applying any timed fault events.

    Events fire after the update of their step and before the next step's
    measurements.  The run terminates once the step change and the
    fixed-point residual both drop to the stopping tolerance and no events
    remain, or at the step cap.  The default start is zero generation.
    """
    from .faults import apply_fault  # cycle: faults builds on game specs

    events = list(timeline.events) if timeline is not None else []
    engine = _Engine(spec)
    n0 = len(spec.players)
    orig_buses = list(spec.player_buses)

    if cfg.tau is not None and len(cfg.tau) != n0:
        raise ValidationError(f"{len(cfg.tau)} tau values for {n0} players")
    tau_by_bus = dict(zip(orig_buses, cfg.tau)) if cfg.tau is not None else {}

    if initial is None:
        state = -engine.loads.copy()
    else:
        state = np.asarray(initial, dtype=float).copy()
        if state.shape != (n0,):
            raise InfeasibleInitial(f"initial state must have {n0} entries")
    if not engine.feasible(state):
        raise InfeasibleInitial("initial net injections violate a player's interval")

    rng = np.random.default_rng(cfg.seed)
    live = list(orig_buses)

    ref_by_bus = (
        dict(zip(reference.player_buses, reference.p_net)) if reference is not None else None
    )

    def record_row(state):
        gens = np.zeros(n0)
        angs = np.zeros(n0)
        theta = engine.s @ engine.full_injections(state)
        for col, bus in enumerate(orig_buses):
            if bus in live:
                k = live.index(bus)
                gens[col] = state[k] + engine.loads[k]
            angs[col] = theta[spec.s.index_of(bus)] if bus in spec.s.bus_order else 0.0
        return gens, angs

    def error_of(state):
        if ref_by_bus is None:
            return None
        diffs = [
            abs(state[live.index(b)] - ref_by_bus[b]) for b in live if b in ref_by_bus
        ]
        return max(diffs) if diffs else 0.0

    gens0, angs0 = record_row(state)
    gens_rows = [gens0]
    ang_rows = [angs0]
    changes = [0.0]
    errors = [error_of(state)] if reference is not None else None
    applied = []

    # events with at_step 0 fire before the first update
    def apply_due(step):
        nonlocal spec, engine, state, live
        due = [ev for ev in events if ev.at_step == step]
        if not due:
            return
        for ev in due:
            spec_new = apply_fault(spec, ev)
            new_buses = list(spec_new.player_buses)
            state = np.array(
                [state[live.index(b)] for b in new_buses], dtype=float
            )
            spec = spec_new
            live = new_buses
            applied.append((step, ev))
            events.remove(ev)
        engine = _Engine(spec)

    apply_due(0)

    status = TerminalStatus(converged=False, step=cfg.max_steps)
    for n in range(1, cfg.max_steps + 1):
        resp = engine.responses(state)
        if cfg.scheme is Scheme.IUA:
            new_state = resp
        else:
            tau_arr = np.array([tau_by_bus[b] for b in live])
            mask = rng.random(len(live)) < tau_arr
            new_state = np.where(mask, resp, state)

        change = float(np.max(np.abs(new_state - state))) if len(state) else 0.0
        state = new_state

        gens_n, angs_n = record_row(state)
        gens_rows.append(gens_n)
        ang_rows.append(angs_n)
        changes.append(change)
        if errors is not None:
            errors.append(error_of(state))

        residual = float(np.max(np.abs(engine.responses(state) - state)))
        done = change <= cfg.delta and residual <= cfg.delta and not events

        apply_due(n)

        if done:
            status = TerminalStatus(converged=True, step=n)
            break

    return Trajectory(
        player_buses=tuple(orig_buses),
        gens=np.array(gens_rows),
        angles=np.array(ang_rows),
        step_changes=np.array(changes),
        errors=np.array(errors, dtype=float) if errors is not None else None,
        status=status,
        events_applied=tuple(applied),
    )


def contraction_diagnostic(traj: Trajectory, reference: Equilibrium) -> np.ndarray:
    """Per-step decay ratios of the infinity-norm distance to the equilibrium.

    Ratios are reported only where the current error exceeds float noise.
    """
    ref = dict(zip(reference.player_buses, reference.p_gen))
    cols = [k for k, b in enumerate(traj.player_buses) if b in ref]
    target = np.array([ref[traj.player_buses[k]] for k in cols])
    errs = np.max(np.abs(traj.gens[:, cols] - target), axis=1)
    ratios = []
    for n in range(len(errs) - 1):
        if errs[n] > 1e-12:
            ratios.append(errs[n + 1] / errs[n])
    return np.array(ratios)
