import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import build
from manetlab.link import (
    BROADCAST,
    FaultModel,
    Frame,
    LinkMode,
    Medium,
    MediumModel,
    NotAssociated,
    PowerSaveModel,
    UnknownNode,
    power_save_delay,
)
from manetlab.sim import SeededRng, Simulator


def ibss(positions, faults=None, model=None):
    sim = Simulator()
    m = Medium(sim, model)
    for n, p in positions.items():
        m.add_node(n, p)
        m.set_fault(n, (faults or {}).get(n, FaultModel.NONE))
        m.set_up(n, True)
        m.associate(n, "net", LinkMode.IBSS)
    return sim, m


def test_chain_neighbors():
    _, m = ibss({"A": (0, 0), "B": (40, 0), "C": (80, 0)})
    assert m.neighbors("B") == {"A", "C"}
    assert m.neighbors("A") == {"B"}
    assert m.collision_domain("A") == frozenset("ABC")


def test_single_node_has_no_neighbors():
    _, m = ibss({"A": (0, 0)})
    assert m.neighbors("A") == set()


def test_driver_without_ibss_is_invisible():
    _, m = ibss({"A": (0, 0), "B": (10, 0), "C": (20, 0)}, {"B": FaultModel.DRIVER_NO_IBSS})
    assert m.neighbors("B") == set()
    assert "B" not in m.neighbors("A") | m.neighbors("C")


def test_unknown_node():
    _, m = ibss({"A": (0, 0)})
    with pytest.raises(UnknownNode):
        m.neighbors("Z")


def test_different_ssid_not_neighbors():
    sim, m = ibss({"A": (0, 0), "B": (10, 0)})
    m.associate("B", "other", LinkMode.IBSS)
    assert m.neighbors("A") == set()


def test_frame_invariants():
    with pytest.raises(ValueError):
        Frame("A", "B", 0)
    assert Frame("A", BROADCAST, 10).multicast


def test_medium_model_invariants():
    with pytest.raises(ValueError):
        MediumModel(contention_overhead=1.0)
    with pytest.raises(ValueError):
        MediumModel(nominal_capacity=0)
    with pytest.raises(ValueError):
        PowerSaveModel(dtim_period=0)


def test_one_frame_airtime_and_accounting():
    sim, m = ibss({"A": (0, 0), "B": (10, 0)})
    got = []
    m.receiver = lambda node, f: got.append((sim.now, node))
    out = m.transmit(Frame("A", "B", 1500))
    # 1500 B * 8 / 24e6 b/s
    assert out == [("B", 500)]
    sim.run_until(1_000_000)
    assert got == [(1000, "B")]  # airtime plus 0.5 ms processing
    assert m.medium_busy_airtime("A", (0, 1_000_000)) == (0.0005, 0.0)
    assert m.medium_busy_airtime("B", (0, 1_000_000)) == (0.0, 0.0005)


def test_idle_node_has_no_airtime():
    _, m = ibss({"A": (0, 0), "B": (10, 0)})
    assert m.medium_busy_airtime("A", (0, 5_000_000)) == (0.0, 0.0)


def test_unicast_to_non_neighbor_is_a_silent_loss():
    sim, m = ibss({"A": (0, 0), "C": (80, 0)})
    assert m.transmit(Frame("A", "C", 100)) == []
    assert m.losses == 1


def test_transmit_requires_association():
    sim, m = ibss({"A": (0, 0), "B": (10, 0)})
    m.set_up("A", False)
    with pytest.raises(NotAssociated):
        m.transmit(Frame("A", "B", 100))


def test_in_flight_frame_lost_when_receiver_leaves():
    sim, m = ibss({"A": (0, 0), "B": (10, 0)})
    got = []
    m.receiver = lambda node, f: got.append(node)
    assert m.transmit(Frame("A", "B", 1500))
    m.disassociate("B")
    sim.run_until(10_000)
    assert got == [] and m.losses == 1


def test_fake_ap_hub_relays_and_departure_partitions():
    sim, m = ibss({"D": (20, 10), "A": (0, 0), "C": (40, 0)}, {"D": FaultModel.FAKE_AP_IBSS})
    assert m.hub("net") == "D"
    assert m.neighbors("A") == {"D", "C"}
    sent = m.frames_sent
    out = m.transmit(Frame("A", "C", 1470))
    assert [r for r, _ in out] == ["C"]
    assert m.frames_sent - sent == 2  # via the hub
    m.disassociate("D")
    assert m.transmit(Frame("A", "C", 1470)) == []
    assert m.neighbors("A") == set()


def test_infrastructure_relays_through_ap():
    sim = Simulator()
    m = Medium(sim)
    for n, p, mode in (("A", (0, 0), LinkMode.STATION), ("B", (40, 0), LinkMode.AP), ("C", (80, 0), LinkMode.STATION)):
        m.add_node(n, p)
        m.set_up(n, True)
        m.associate(n, "office", mode)
    assert m.neighbors("A") == {"B", "C"}
    sent = m.frames_sent
    assert [r for r, _ in m.transmit(Frame("A", "C", 1470))] == ["C"]
    assert m.frames_sent - sent == 2


@given(st.integers(0, 2**63))
def test_power_save_delay_range(seed):
    d = power_save_delay(SeededRng(seed), PowerSaveModel())
    assert 0.0 <= d <= 2 * 0.1024


def test_relay_splits_airtime_between_tx_and_rx():
    from manetlab.harness.scenario import FlowSpec

    emu = build({"A": (0.0, 0.0), "B": (40.0, 0.0), "C": (80.0, 0.0)},
                flows=[FlowSpec("A", "C", start=10.0, stop=30.0)], duration=30.0)
    emu.sim.run_until(22_000_000)
    tx, rx = emu.medium.medium_busy_airtime("B", (20_000_000, 21_000_000))
    # B relays every payload it hears; A's and B's frames share the channel equally
    assert tx == pytest.approx(0.5, abs=0.01)
    assert rx == pytest.approx(0.5, abs=0.01)
    assert tx + rx <= 1.0


positions = st.dictionaries(
    st.sampled_from("ABCDEF"),
    st.tuples(st.floats(0, 120), st.floats(0, 120)),
    min_size=2,
    max_size=6,
)


@settings(max_examples=40, deadline=None)
@given(positions, st.lists(st.tuples(st.integers(0, 5), st.integers(0, 6), st.integers(1, 1500), st.integers(0, 3000)), max_size=40))
def test_delivery_within_neighborhood_and_ledger_bounds(pos, frames):
    sim, m = ibss(pos)
    nodes = sorted(pos)
    deliveries = []
    m.receiver = lambda node, f: deliveries.append((node, f))
    expected = {}
    for i, (si, di, size, gap) in enumerate(frames):
        sim.run_until(sim.now + gap)
        src = nodes[si % len(nodes)]
        dst = BROADCAST if di >= len(nodes) else nodes[di]
        if dst == src:
            continue
        f = Frame(src, dst, size, payload=i)
        out = m.transmit(f)
        nbrs = m.neighbors(src)
        for r, _ in out:
            assert r in nbrs
        expected[i] = sorted(r for r, _ in out)
    sim.run_until(sim.now + 10**7)
    got = {}
    for node, f in deliveries:
        got.setdefault(f.payload, []).append(node)
    assert {k: sorted(v) for k, v in got.items()} == {k: v for k, v in expected.items() if v}
    window = (0, sim.now)
    span = (window[1] - window[0]) / 1e6
    for dom in {m.collision_domain(n) for n in nodes}:
        assert sum(m.medium_busy_airtime(n, window)[0] for n in dom) <= span + 1e-9
    for n in nodes:
        tx, rx = m.nic_busy(n, window)
        assert tx + rx <= span + 1e-9
