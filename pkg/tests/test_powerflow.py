import numpy as np
import pytest

import gridgame as gg

from conftest import random_network


def net_with_roles():
    return gg.Network(
        buses=(
            gg.Bus(id=2, kind=gg.BusKind.SLACK),
            gg.Bus(id=3, kind=gg.BusKind.MICROGRID, p_load=1.2),
            gg.Bus(id=1, kind=gg.BusKind.GENERATOR, p_gen_fixed=2.8),
            gg.Bus(id=4, kind=gg.BusKind.LOAD, p_load=1.0),
        ),
        branches=(gg.Branch(2, 1, 5.0), gg.Branch(2, 3, 4.0), gg.Branch(3, 4, 3.0)),
    )


def test_injection_from_state_microgrid():
    inj = gg.injections_from_state(net_with_roles(), {3: 0.551})
    k = inj.bus_order.index(3)
    assert inj.values[k] == pytest.approx(-0.649)


def test_injection_fixed_generator():
    inj = gg.injections_from_state(net_with_roles(), {})
    assert inj.values[inj.bus_order.index(1)] == pytest.approx(2.8)


def test_injection_all_zero():
    net = gg.Network(
        buses=(gg.Bus(id=1, kind=gg.BusKind.SLACK), gg.Bus(id=2, kind=gg.BusKind.LOAD)),
        branches=(gg.Branch(1, 2, 1.0),),
    )
    inj = gg.injections_from_state(net, {})
    np.testing.assert_array_equal(inj.values, [0.0])


def test_injection_unknown_bus():
    with pytest.raises(gg.UnknownBus):
        gg.injections_from_state(net_with_roles(), {99: 0.1})
    with pytest.raises(gg.UnknownBus):
        gg.injections_from_state(net_with_roles(), {4: 0.1})  # not a microgrid


def test_solve_angles_hand():
    s = gg.SensitivityMatrix(matrix=np.array([[0.1, 0.1], [0.1, 0.3]]), bus_order=(1, 2))
    p = gg.InjectionVector(values=np.array([1.0, -1.0]), bus_order=(1, 2))
    theta = gg.solve_angles(s, p)
    np.testing.assert_allclose(theta.values, [0.0, -0.2], atol=1e-15)


def test_solve_angles_zero():
    s = gg.SensitivityMatrix(matrix=np.array([[0.25]]), bus_order=(7,))
    theta = gg.solve_angles(s, gg.InjectionVector(values=np.array([0.0]), bus_order=(7,)))
    np.testing.assert_array_equal(theta.values, [0.0])


def test_solve_angles_dimension_mismatch():
    s = gg.SensitivityMatrix(matrix=np.array([[0.25]]), bus_order=(7,))
    p = gg.InjectionVector(values=np.array([0.0]), bus_order=(8,))
    with pytest.raises(gg.DimensionMismatch):
        gg.solve_angles(s, p)


def test_solve_angles_round_trip_and_linearity():
    rng = np.random.default_rng(3)
    for _ in range(25):
        net = random_network(rng)
        rb = gg.build_reduced_susceptance(net)
        s = gg.build_sensitivity(rb)
        n = len(s.bus_order)
        p1 = gg.InjectionVector(values=rng.normal(size=n), bus_order=s.bus_order)
        p2 = gg.InjectionVector(values=rng.normal(size=n), bus_order=s.bus_order)
        th1 = gg.solve_angles(s, p1)
        np.testing.assert_allclose(rb.matrix @ th1.values, p1.values, atol=1e-9)
        a, b = rng.normal(size=2)
        combo = gg.InjectionVector(values=a * p1.values + b * p2.values,
                                   bus_order=s.bus_order)
        th_combo = gg.solve_angles(s, combo)
        th2 = gg.solve_angles(s, p2)
        np.testing.assert_allclose(
            th_combo.values, a * th1.values + b * th2.values, atol=1e-10
        )


def test_line_flow_direct_formula():
    net = gg.Network(
        buses=(gg.Bus(id=1, kind=gg.BusKind.SLACK), gg.Bus(id=2, kind=gg.BusKind.LOAD),
               gg.Bus(id=3, kind=gg.BusKind.LOAD)),
        branches=(gg.Branch(1, 2, 1.0), gg.Branch(2, 3, 5.0)),
    )
    theta = gg.AngleProfile(values=np.array([0.1, 0.06]), bus_order=(2, 3))
    flows = gg.line_flows(net, theta)
    assert flows[(2, 3)] == pytest.approx(0.2)
    assert flows[(3, 2)] == pytest.approx(-0.2)


def test_line_flow_out_of_service_zero():
    net = gg.Network(
        buses=(gg.Bus(id=1, kind=gg.BusKind.SLACK), gg.Bus(id=2, kind=gg.BusKind.LOAD),
               gg.Bus(id=3, kind=gg.BusKind.LOAD)),
        branches=(gg.Branch(1, 2, 1.0), gg.Branch(1, 3, 2.0),
                  gg.Branch(2, 3, 5.0, in_service=False)),
    )
    theta = gg.AngleProfile(values=np.array([0.4, -0.3]), bus_order=(2, 3))
    flows = gg.line_flows(net, theta)
    assert flows[(2, 3)] == 0.0
    assert flows[(3, 2)] == 0.0


def test_nodal_balance_random_networks():
    rng = np.random.default_rng(5)
    for _ in range(100):
        net = random_network(rng, n_min=4, n_max=12)
        s = gg.build_sensitivity(gg.build_reduced_susceptance(net))
        p = gg.InjectionVector(values=rng.normal(size=len(s.bus_order)),
                               bus_order=s.bus_order)
        theta = gg.solve_angles(s, p)
        flows = gg.line_flows(net, theta)
        slack = net.slack
        for k, bus in enumerate(s.bus_order):
            out = sum(f for (i, j), f in flows.items() if i == bus)
            assert out == pytest.approx(p.values[k], abs=1e-9)
        slack_out = sum(f for (i, j), f in flows.items() if i == slack)
        assert slack_out == pytest.approx(gg.slack_injection(net, p), abs=1e-9)


def test_slack_injection():
    net = net_with_roles()
    p = gg.InjectionVector(values=np.array([1.0, -1.0, 0.0]), bus_order=(1, 3, 4))
    assert gg.slack_injection(net, p) == 0.0
    p2 = gg.InjectionVector(values=np.array([2.8, 0.0, 0.0]), bus_order=(1, 3, 4))
    assert gg.slack_injection(net, p2) == pytest.approx(-2.8)
