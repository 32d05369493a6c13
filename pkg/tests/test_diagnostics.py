import statistics

import pytest

from conftest import build
from manetlab.diagnostics import Unreachable, ping, position_log, route_dump, route_rows, traceroute
from manetlab.link import Trajectory


def oracle_one_hop_rtt():
    # two 64-byte frames at 24 Mbit/s, each followed by 0.5 ms processing
    return 2 * (64 * 8 / 24e6 + 0.0005)


def test_single_hop_ping_rtt():
    emu = build({"A": (0.0, 0.0), "C": (30.0, 0.0)})
    emu.sim.run_until(10_000_000)
    recs = ping(emu.net, "A", "C", count=10)
    assert len(recs) == 10 and not any(r.lost for r in recs)
    med = statistics.median(r.rtt for r in recs)
    assert med == pytest.approx(oracle_one_hop_rtt(), rel=0.01)
    for r in recs:
        assert r.rtt >= 2 * 64 * 8 / 24e6


def test_multi_hop_ping_about_twice(chain):
    recs = ping(chain.net, "A", "C", count=10)
    med = statistics.median(r.rtt for r in recs)
    assert med == pytest.approx(2 * oracle_one_hop_rtt(), rel=0.25)


def test_ping_record_shape(chain):
    recs = ping(chain.net, "A", "B", count=3, interval=0.5)
    assert [r.seq for r in recs] == [0, 1, 2]
    assert all((r.rtt is None) == r.lost for r in recs)
    assert recs[1].sent_at - recs[0].sent_at == 500_000


def test_infrastructure_ping_spread():
    emu = build({"A": (0.0, 0.0), "B": (40.0, 0.0), "C": (80.0, 0.0)}, mode="infrastructure", ap="B",
                routing="static")
    emu.sim.run_until(1_000_000)
    recs = ping(emu.net, "A", "C", count=30)
    rtts = [r.rtt for r in recs]
    assert max(rtts) <= 2 * 0.2048 + 0.01
    assert max(rtts) > 0.1


def test_traceroute_chain(chain):
    hops = traceroute(chain.net, "A", "C")
    assert [n for n, _ in hops] == ["B", "C"]
    assert len(hops) == chain.net.host("A").routes()[chain.net.host("C").address].hops


def test_traceroute_single_hop(chain):
    assert [n for n, _ in traceroute(chain.net, "A", "B")] == ["B"]


def test_traceroute_before_convergence():
    emu = build({"A": (0.0, 0.0), "B": (40.0, 0.0), "C": (80.0, 0.0)})
    with pytest.raises(Unreachable):
        traceroute(emu.net, "A", "C", wait=0.05)


def test_route_dump(chain):
    rows = route_rows(chain.net, "A")
    b, c = (str(chain.net.host(x).address) for x in "BC")
    assert [(r[3], r[2], r[1]) for r in rows] == [("B", 1, b), ("C", 2, b)]
    assert route_dump(chain.net, "A") == route_dump(chain.net, "A")
    chain.net.host("A").stop_routing()
    assert route_rows(chain.net, "A") == []


def test_position_log():
    static = position_log({"A": Trajectory((3.0, 4.0))}, 10.0)
    assert len(static) == 11 and {s.position for s in static} == {(3.0, 4.0)}
    times = [s.time for s in static]
    assert times == sorted(set(times))
    moving = position_log({"A": Trajectory((0, 0), [(100, 100, 0)])}, 100.0)
    assert moving[50].position == (50.0, 0.0)


def test_mobility_breaks_link_and_pings_fail():
    from manetlab.harness import NodeSpec

    nodes = [NodeSpec("A", (0.0, 0.0)), NodeSpec("B", (20.0, 0.0), [[10.0, 20.0, 0.0], [20.0, 120.0, 0.0]])]
    emu = build(nodes, duration=30.0)
    emu.sim.run_until(5_000_000)
    recs = ping(emu.net, "A", "B", count=20)
    first_loss = next(r for r in recs if r.lost)
    log = position_log(emu.trajectories, 30.0)
    # the first lost echo follows the moment B left radio range
    out_of_range = next(s.time for s in log if s.node == "B" and s.position[0] > 50.0)
    assert first_loss.sent_at >= out_of_range - 1_000_000
    assert all(r.lost for r in recs if r.sent_at > out_of_range)
