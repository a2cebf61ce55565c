import numpy as np
import pytest

import gridgame as gg
from gridgame.grid import Lemma1Violation

from conftest import random_network


def simple_net(branches, n, slack=1):
    buses = tuple(
        gg.Bus(id=k, kind=gg.BusKind.SLACK if k == slack else gg.BusKind.LOAD)
        for k in range(1, n + 1)
    )
    brs = tuple(
        gg.Branch(f, t, b, in_service=(rest[0] if rest else True))
        for (f, t, b, *rest) in branches
    )
    return gg.Network(buses=buses, branches=brs)


def test_reduced_susceptance_three_bus():
    net = simple_net([(3, 1, 10.0), (1, 2, 5.0)], 3, slack=3)
    rb = gg.build_reduced_susceptance(net)
    assert rb.bus_order == (1, 2)
    np.testing.assert_allclose(rb.matrix, [[15.0, -5.0], [-5.0, 5.0]])


def test_reduced_susceptance_single_line():
    net = simple_net([(2, 1, 4.0)], 2, slack=2)
    rb = gg.build_reduced_susceptance(net)
    np.testing.assert_allclose(rb.matrix, [[4.0]])


def test_reduced_susceptance_disconnection():
    net = simple_net([(3, 1, 10.0), (1, 2, 5.0, False)], 3, slack=3)
    with pytest.raises(gg.DisconnectedNetwork):
        gg.build_reduced_susceptance(net)


def test_parallel_branches_sum():
    net = simple_net([(2, 1, 4.0), (2, 1, 6.0)], 2, slack=2)
    rb = gg.build_reduced_susceptance(net)
    np.testing.assert_allclose(rb.matrix, [[10.0]])


def test_duplicate_bus_rejected():
    buses = (
        gg.Bus(id=1, kind=gg.BusKind.SLACK),
        gg.Bus(id=2, kind=gg.BusKind.LOAD),
        gg.Bus(id=2, kind=gg.BusKind.LOAD),
    )
    with pytest.raises(gg.DuplicateBus):
        gg.Network(buses=buses, branches=(gg.Branch(1, 2, 1.0),))


def test_sensitivity_hand_inverse():
    net = simple_net([(3, 1, 10.0), (1, 2, 5.0)], 3, slack=3)
    s = gg.build_sensitivity(gg.build_reduced_susceptance(net))
    np.testing.assert_allclose(s.matrix, [[0.1, 0.1], [0.1, 0.3]], atol=1e-12)


def test_sensitivity_scalar():
    net = simple_net([(2, 1, 4.0)], 2, slack=2)
    s = gg.build_sensitivity(gg.build_reduced_susceptance(net))
    np.testing.assert_allclose(s.matrix, [[0.25]])


def test_sensitivity_solves_identity():
    rng = np.random.default_rng(42)
    for _ in range(20):
        net = random_network(rng)
        rb = gg.build_reduced_susceptance(net)
        s = gg.build_sensitivity(rb)
        n = rb.matrix.shape[0]
        np.testing.assert_allclose(s.matrix @ rb.matrix, np.eye(n), atol=1e-9)


def test_sensitivity_singular_rejected():
    rb = gg.ReducedSusceptance(matrix=np.zeros((2, 2)), bus_order=(1, 2))
    with pytest.raises(gg.SingularMatrix):
        gg.build_sensitivity(rb)


def test_lemma1_pass():
    s = gg.SensitivityMatrix(matrix=np.array([[0.1, 0.1], [0.1, 0.3]]), bus_order=(1, 2))
    assert gg.validate_lemma1(s) == []


def test_lemma1_negative_entry():
    s = gg.SensitivityMatrix(matrix=np.array([[0.1, -0.2], [-0.2, 0.3]]), bus_order=(1, 2))
    violations = gg.validate_lemma1(s)
    assert len(violations) == 2  # both symmetric entries flagged
    assert all(v.prop == "nonnegativity" for v in violations)
    assert (violations[0].row, violations[0].col) == (0, 1)


def test_lemma1_asymmetry_and_diagonal():
    s = gg.SensitivityMatrix(matrix=np.array([[0.0, 0.2], [0.1, 0.3]]), bus_order=(1, 2))
    props = {v.prop for v in gg.validate_lemma1(s)}
    assert "symmetry" in props
    assert "positive_diagonal" in props
    assert all(isinstance(v, Lemma1Violation) for v in gg.validate_lemma1(s))


def test_lemma1_random_networks():
    rng = np.random.default_rng(7)
    for _ in range(200):
        net = random_network(rng)
        s = gg.build_sensitivity(gg.build_reduced_susceptance(net))
        assert gg.validate_lemma1(s) == []


def test_bridge_removal_disconnects_chord_removal_does_not():
    rng = np.random.default_rng(11)
    checked_bridge = checked_chord = 0
    for _ in range(40):
        net = random_network(rng, n_min=5, n_max=12)
        for k, br in enumerate(net.branches):
            branches = tuple(
                b if i != k else gg.Branch(b.from_bus, b.to_bus, b.susceptance, False)
                for i, b in enumerate(net.branches)
            )
            reduced = gg.Network(buses=net.buses, branches=branches)
            others = [
                (b.from_bus, b.to_bus) for i, b in enumerate(net.branches) if i != k
            ]
            bridge = _is_bridge(net, (br.from_bus, br.to_bus), others)
            if bridge:
                checked_bridge += 1
                with pytest.raises(gg.DisconnectedNetwork):
                    gg.build_reduced_susceptance(reduced)
            else:
                checked_chord += 1
                gg.build_reduced_susceptance(reduced)
    assert checked_bridge and checked_chord


def _is_bridge(net, edge, other_edges):
    nodes = {b.id for b in net.buses}
    adj = {n: set() for n in nodes}
    for f, t in other_edges:
        adj[f].add(t)
        adj[t].add(f)
    seen = {next(iter(nodes))}
    stack = [next(iter(nodes))]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) != len(nodes)


def test_kind_invariants():
    with pytest.raises(gg.ValidationError):
        gg.Bus(id=1, kind=gg.BusKind.LOAD, p_gen_fixed=1.0)
    with pytest.raises(gg.ValidationError):
        gg.Bus(id=1, kind=gg.BusKind.GENERATOR, p_load=1.0)
    with pytest.raises(gg.ValidationError):
        gg.Branch(1, 1, 2.0)
    with pytest.raises(gg.ValidationError):
        gg.Branch(1, 2, -2.0)
