"""Structural fault models: generator outage, microgrid shutdown, line trip.

Every application is a pure function from one game spec to a new one; the
original is never touched, so a simulation can roll forward through a
timeline while callers keep the pre-fault spec for comparison.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Union

from .errors import UnknownTarget, ValidationError
from .game import Equilibrium, GameSpec, solve_ne_direct
from .grid import BusId, BusKind, Network, build_reduced_susceptance, build_sensitivity


@dataclass(frozen=True)
class GeneratorOutage:
    bus: BusId


@dataclass(frozen=True)
class MicrogridShutdown:
    bus: BusId


@dataclass(frozen=True)
class LineTrip:
    from_bus: BusId
    to_bus: BusId


Fault = Union[GeneratorOutage, MicrogridShutdown, LineTrip]


@dataclass(frozen=True)
class FaultEvent:
    at_step: int
    kind: Fault

    def __post_init__(self):
        if self.at_step < 0:
            raise ValidationError("fault step must be nonnegative")

    def target_key(self):
        k = self.kind
        if isinstance(k, LineTrip):
            return ("line", min(k.from_bus, k.to_bus), max(k.from_bus, k.to_bus))
        return ("bus", k.bus)


@dataclass(frozen=True)
class ScenarioTimeline:
    events: tuple[FaultEvent, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        steps = [ev.at_step for ev in self.events]
        if steps != sorted(steps):
            raise ValidationError("fault events must be sorted by step")
        seen = set()
        for ev in self.events:
            key = (ev.at_step, ev.target_key())
            if key in seen:
                raise ValidationError(
                    f"multiple events for target {ev.target_key()} at step {ev.at_step}"
                )
            seen.add(key)


def apply_fault(spec: GameSpec, ev: FaultEvent | Fault) -> GameSpec:
    """Return the spec with one fault applied.

    A generator outage zeroes the bus's fixed generation; a microgrid
    shutdown removes the player but keeps its bus and load; a line trip
    de-energizes every parallel branch of the pair and rebuilds the
    sensitivity matrix.
    """
    kind = ev.kind if isinstance(ev, FaultEvent) else ev
    if isinstance(kind, GeneratorOutage):
        return _generator_outage(spec, kind.bus)
    if isinstance(kind, MicrogridShutdown):
        return _microgrid_shutdown(spec, kind.bus)
    if isinstance(kind, LineTrip):
        return _line_trip(spec, kind.from_bus, kind.to_bus)
    raise UnknownTarget(f"unrecognized fault kind {kind!r}")


def _replace_bus(net: Network, bus_id: BusId, **changes) -> Network:
    buses = tuple(
        dataclasses.replace(b, **changes) if b.id == bus_id else b for b in net.buses
    )
    return Network(buses=buses, branches=net.branches, base_mva=net.base_mva)


def _generator_outage(spec: GameSpec, bus_id: BusId) -> GameSpec:
    try:
        bus = spec.net.bus(bus_id)
    except Exception as exc:
        raise UnknownTarget(f"no bus {bus_id} for generator outage") from exc
    if bus.kind is not BusKind.GENERATOR:
        raise UnknownTarget(f"bus {bus_id} is not a fixed-generator bus")
    net = _replace_bus(spec.net, bus_id, p_gen_fixed=0.0)
    return GameSpec(
        net=net, s=spec.s, players=spec.players, market=spec.market,
        team_weights=spec.team_weights,
    )


def _microgrid_shutdown(spec: GameSpec, bus_id: BusId) -> GameSpec:
    if bus_id not in spec.player_buses:
        raise UnknownTarget(f"bus {bus_id} is not an active player")
    keep = [k for k, p in enumerate(spec.players) if p.bus != bus_id]
    if not keep:
        raise ValidationError("cannot shut down the last remaining player")
    players = tuple(spec.players[k] for k in keep)
    weights = spec.team_weights
    if weights is not None:
        remaining = [weights[k] for k in keep]
        total = sum(remaining)
        weights = tuple(w / total for w in remaining)
    return GameSpec(
        net=spec.net, s=spec.s, players=players, market=spec.market,
        team_weights=weights,
    )


def _line_trip(spec: GameSpec, from_bus: BusId, to_bus: BusId) -> GameSpec:
    pair = {from_bus, to_bus}
    hit = [br for br in spec.net.branches if {br.from_bus, br.to_bus} == pair]
    if not hit:
        raise UnknownTarget(f"no branch between buses {from_bus} and {to_bus}")
    branches = tuple(
        dataclasses.replace(br, in_service=False)
        if {br.from_bus, br.to_bus} == pair
        else br
        for br in spec.net.branches
    )
    net = Network(buses=spec.net.buses, branches=branches, base_mva=spec.net.base_mva)
    s = build_sensitivity(build_reduced_susceptance(net))  # DisconnectedNetwork propagates
    return GameSpec(
        net=net, s=s, players=spec.players, market=spec.market,
        team_weights=spec.team_weights,
    )


def post_fault_equilibrium(spec: GameSpec, ev: FaultEvent | Fault) -> Equilibrium:
    """Equilibrium of the faulted system; the reference any re-converging
    trajectory should land on."""
    return solve_ne_direct(apply_fault(spec, ev))
