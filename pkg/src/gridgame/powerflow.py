"""DC power-flow evaluation on top of a precomputed sensitivity matrix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DimensionMismatch, UnknownBus
from .grid import Branch, BusId, BusKind, Network, SensitivityMatrix, _frozen_array


@dataclass(frozen=True)
class InjectionVector:
    """Per-unit net injection for every non-slack bus, in matrix order."""

    values: np.ndarray
    bus_order: tuple[BusId, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        object.__setattr__(self, "bus_order", tuple(self.bus_order))
        if self.values.ndim != 1 or len(self.values) != len(self.bus_order):
            raise DimensionMismatch(
                f"{len(self.values)} values for {len(self.bus_order)} buses"
            )
        if not np.all(np.isfinite(self.values)):
            raise DimensionMismatch("injection vector has non-finite entries")


@dataclass(frozen=True)
class AngleProfile:
    """Bus voltage angles in radians for every non-slack bus; slack fixed at 0."""

    values: np.ndarray
    bus_order: tuple[BusId, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        object.__setattr__(self, "bus_order", tuple(self.bus_order))
        if self.values.ndim != 1 or len(self.values) != len(self.bus_order):
            raise DimensionMismatch(
                f"{len(self.values)} angles for {len(self.bus_order)} buses"
            )

    def at(self, bus_id: BusId) -> float:
        try:
            return float(self.values[self.bus_order.index(bus_id)])
        except ValueError:
            raise UnknownBus(f"bus {bus_id} not in angle profile") from None


def injections_from_state(
    net: Network, microgrid_gen: Mapping[BusId, float]
) -> InjectionVector:
    """Net injection per non-slack bus: fixed generation plus microgrid
    generation minus load.  Microgrid buses missing from the map inject
    their load deficit only."""
    kinds = {b.id: b for b in net.buses}
    for bus_id in microgrid_gen:
        if bus_id not in kinds:
            raise UnknownBus(f"microgrid generation given for unknown bus {bus_id}")
        if kinds[bus_id].kind is not BusKind.MICROGRID:
            raise UnknownBus(f"bus {bus_id} is not a microgrid bus")
    order = net.non_slack_ids()
    vals = np.empty(len(order))
    for k, bus_id in enumerate(order):
        b = kinds[bus_id]
        vals[k] = b.p_gen_fixed + microgrid_gen.get(bus_id, 0.0) - b.p_load
    return InjectionVector(values=vals, bus_order=order)


def solve_angles(s: SensitivityMatrix, p: InjectionVector) -> AngleProfile:
    """theta = S @ P."""
    if p.bus_order != s.bus_order:
        raise DimensionMismatch("injection ordering differs from matrix ordering")
    return AngleProfile(values=s.matrix @ p.values, bus_order=s.bus_order)


def line_flows(
    net: Network, theta: AngleProfile
) -> dict[tuple[BusId, BusId], float]:
    """Per-unit flow for every branch pair and both directions.

    Parallel branches are aggregated; out-of-service pairs report zero flow.
    """
    if theta.bus_order != net.non_slack_ids():
        raise DimensionMismatch("angle ordering does not match the network")
    slack = net.slack
    ang = {bus_id: theta.values[k] for k, bus_id in enumerate(theta.bus_order)}
    ang[slack] = 0.0

    eff: dict[tuple[BusId, BusId], float] = {}
    for br in net.branches:
        key = (br.from_bus, br.to_bus) if br.from_bus < br.to_bus else (br.to_bus, br.from_bus)
        eff.setdefault(key, 0.0)
        if br.in_service:
            eff[key] += br.susceptance

    flows: dict[tuple[BusId, BusId], float] = {}
    for (i, j), b in eff.items():
        f = b * (ang[i] - ang[j])
        flows[(i, j)] = f
        flows[(j, i)] = -f
    return flows


def slack_injection(net: Network, p: InjectionVector) -> float:
    """Residual injection at the slack so the network sums to zero."""
    return float(-np.sum(p.values))
