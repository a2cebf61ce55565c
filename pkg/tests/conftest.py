import numpy as np
import pytest

import gridgame as gg


def make_three_bus(eta=10.0, cap=100.0):
    """Two players on a hand-solvable triangle-free net: exact S = [[.1,.1],[.1,.3]]."""
    net = gg.Network(
        buses=(
            gg.Bus(id=3, kind=gg.BusKind.SLACK),
            gg.Bus(id=1, kind=gg.BusKind.MICROGRID, p_load=0.0),
            gg.Bus(id=2, kind=gg.BusKind.MICROGRID, p_load=10.0),
        ),
        branches=(gg.Branch(3, 1, 10.0), gg.Branch(1, 2, 5.0)),
    )
    s = gg.build_sensitivity(gg.build_reduced_susceptance(net))
    players = (
        gg.PlayerParams(bus=1, psi=120.0, eta=eta, p_load=0.0, p_gen_max=cap),
        gg.PlayerParams(bus=2, psi=120.0, eta=eta, p_load=10.0, p_gen_max=cap),
    )
    return gg.GameSpec(net=net, s=s, players=players, market=gg.Market(140.0),
                       team_weights=(0.5, 0.5))


@pytest.fixture
def three_bus():
    return make_three_bus()


def random_network(rng, n_min=4, n_max=20, b_lo=0.5, b_hi=20.0):
    """Random tree plus random chords, all buses load-kind except a slack."""
    n = int(rng.integers(n_min, n_max + 1))
    branches = []
    for k in range(2, n + 1):
        parent = int(rng.integers(1, k))
        branches.append(gg.Branch(parent, k, float(rng.uniform(b_lo, b_hi))))
    n_chords = int(rng.integers(0, n))
    have = {(br.from_bus, br.to_bus) for br in branches}
    for _ in range(n_chords):
        i, j = sorted(rng.choice(np.arange(1, n + 1), size=2, replace=False).tolist())
        if (i, j) in have or (j, i) in have:
            continue
        have.add((i, j))
        branches.append(gg.Branch(int(i), int(j), float(rng.uniform(b_lo, b_hi))))
    slack = int(rng.integers(1, n + 1))
    buses = tuple(
        gg.Bus(id=k, kind=gg.BusKind.SLACK if k == slack else gg.BusKind.LOAD,
               p_load=0.0 if k == slack else float(rng.uniform(0.0, 1.0)))
        for k in range(1, n + 1)
    )
    return gg.Network(buses=buses, branches=tuple(branches))


def random_game_spec(rng, n_min=4, n_max=12, eta_lo=3e4, eta_hi=1e5,
                     require_condition=False, interior_only=False, max_tries=500):
    """Random spec in the angle-dominated regime the solvers are built for.

    interior_only restricts to specs whose equilibrium keeps every player
    strictly inside its interval; the team optimum coincides with the game
    solution there.
    """
    for _ in range(max_tries):
        net = random_network(rng, n_min, n_max, b_lo=0.5, b_hi=10.0)
        non_slack = net.non_slack_ids()
        n_players = int(rng.integers(2, min(4, len(non_slack)) + 1))
        player_buses = sorted(
            int(b) for b in rng.choice(non_slack, size=n_players, replace=False)
        )
        buses = []
        for b in net.buses:
            if b.id in player_buses:
                buses.append(gg.Bus(id=b.id, kind=gg.BusKind.MICROGRID,
                                    p_load=float(rng.uniform(0.2, 1.5))))
            elif b.kind is not gg.BusKind.SLACK and rng.random() < 0.3:
                buses.append(gg.Bus(id=b.id, kind=gg.BusKind.GENERATOR,
                                    p_gen_fixed=float(rng.uniform(0.0, 2.0))))
            else:
                buses.append(b)
        net = gg.Network(buses=tuple(buses), branches=net.branches)
        s = gg.build_sensitivity(gg.build_reduced_susceptance(net))
        zeta = float(rng.uniform(100.0, 160.0))
        psi_hi = zeta - 10.0 if interior_only else 150.0
        players = tuple(
            gg.PlayerParams(
                bus=pb,
                psi=float(rng.uniform(60.0, max(61.0, psi_hi))),
                eta=float(rng.uniform(eta_lo, eta_hi)),
                p_load=net.bus(pb).p_load,
                p_gen_max=float(rng.uniform(0.3, 2.5)) + (2.0 if interior_only else 0.0),
            )
            for pb in player_buses
        )
        raw = rng.uniform(0.5, 1.5, size=n_players)
        weights = tuple(float(w) for w in raw / raw.sum())
        spec = gg.GameSpec(net=net, s=s, players=players, market=gg.Market(zeta),
                           team_weights=weights)
        if require_condition:
            cfg = gg.SchemeConfig(scheme=gg.Scheme.IUA, delta=1e-6, max_steps=10, seed=0)
            if not gg.check_conditions(spec, cfg).iua_condition_met:
                continue
        if interior_only:
            eq = gg.solve_ne_direct(spec)
            if any(st is not gg.PlayerStatus.INNER for st in eq.active_set):
                continue
        return spec
    raise RuntimeError("could not draw a spec satisfying the requested filters")


@pytest.fixture(scope="session")
def ieee14():
    """The bundled calibrated 14-bus scenario."""
    return gg.load_scenario(gg.ieee14_scenario_path())
