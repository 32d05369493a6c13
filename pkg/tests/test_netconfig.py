import ipaddress
import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from manetlab.link import FaultModel, LinkMode, Medium
from manetlab.netconfig import (
    AddressConflict,
    DriverError,
    IfaceState,
    IpConfig,
    NetConfig,
    NetConfigError,
    NetworkProfile,
    NetworkStore,
    StoreParseError,
    address_hash,
    default_ip,
)
from manetlab.sim import Simulator

MANET = NetworkProfile("manet")


def setup_world(positions, faults=None):
    sim = Simulator()
    m = Medium(sim)
    for n, p in positions.items():
        m.add_node(n, p)
        m.set_fault(n, (faults or {}).get(n, FaultModel.NONE))
    return sim, m, NetConfig(sim, m)


def hash_by_hand(s):
    h = 0
    for ch in s:
        h = h * 31 + ord(ch)
    return h % 65536


@pytest.mark.parametrize("node, addr", [("A", "169.254.1.66"), ("B", "169.254.1.67")])
def test_default_ip_examples(node, addr):
    cfg = default_ip(node)
    assert str(cfg.address) == addr
    assert cfg.prefix == 16 and cfg.gateway is None


@given(st.text(min_size=1, max_size=12))
def test_default_ip_formula(node):
    h = hash_by_hand(node)
    assert address_hash(node) == h
    addr = default_ip(node).address
    assert addr in ipaddress.IPv4Network("169.254.0.0/16")
    assert str(addr) == f"169.254.{1 + (h // 256) % 254}.{1 + h % 254}"


def test_ip_config_rejects_network_and_broadcast():
    with pytest.raises(ValueError):
        IpConfig(ipaddress.IPv4Address("169.254.0.0"), 16)
    with pytest.raises(ValueError):
        IpConfig(ipaddress.IPv4Address("169.254.255.255"), 16)


def test_setup_runs_four_steps_in_order():
    sim, m, nc = setup_world({"A": (0, 0)})
    report = nc.one_step_setup("A", MANET)
    assert [s.name for s in report.steps] == ["interface-down", "store-updated", "associate", "ip-config"]
    assert report.ok
    assert nc.iface_state("A") is IfaceState.ASSOCIATED
    assert str(nc.ip("A").address) == "169.254.1.66"
    assert nc.store("A").ibss_only_visible


def test_driver_failure_aborts_at_step_three_with_store_modified():
    sim, m, nc = setup_world({"A": (0, 0)}, {"A": FaultModel.DRIVER_NO_IBSS})
    with pytest.raises(DriverError) as exc:
        nc.one_step_setup("A", MANET)
    steps = exc.value.report.steps
    assert len(steps) == 3 and not steps[-1].ok
    assert nc.iface_state("A") is IfaceState.UP_UNASSOCIATED
    assert nc.store("A").profiles == [MANET]


def test_address_conflict():
    sim, m, nc = setup_world({"A": (0, 0), "B": (5, 0)})
    nc.one_step_setup("A", MANET)
    with pytest.raises(AddressConflict):
        nc.one_step_setup("B", MANET, default_ip("A"))


def test_repeat_setup_is_idempotent():
    sim, m, nc = setup_world({"A": (0, 0)})
    nc.store("A").upsert(NetworkProfile("home", "infrastructure", 5))
    nc.one_step_setup("A", MANET)
    before = nc.store("A").serialize()
    nc.one_step_setup("A", MANET)
    assert nc.store("A").serialize() == before
    assert m.is_associated("A")


def test_visible_networks():
    sim, m, nc = setup_world({"A": (0, 0)})
    assert nc.visible_networks("A") == []
    home = NetworkProfile("home", "infrastructure", 5)
    nc.store("A").upsert(home)
    nc.store("A").upsert(NetworkProfile("manet", "ibss", 1))
    assert [p.ssid for p in nc.visible_networks("A")] == ["home", "manet"]
    nc.store("A").ibss_only_visible = True
    assert [p.ssid for p in nc.visible_networks("A")] == ["manet"]


def test_ibss_only_flag_blocks_infrastructure():
    sim, m, nc = setup_world({"A": (0, 0)})
    nc.one_step_setup("A", MANET)
    with pytest.raises(NetConfigError):
        nc.join_infrastructure("A", NetworkProfile("home", "infrastructure"), LinkMode.STATION)
    assert m.mode("A") is LinkMode.IBSS


def test_teardown_is_inverse_and_idempotent():
    sim, m, nc = setup_world({"A": (0, 0), "B": (10, 0)})
    nc.one_step_setup("A", MANET)
    nc.one_step_setup("B", MANET)
    assert m.neighbors("B") == {"A"}
    nc.teardown("A")
    store = nc.store("A")
    assert not any(p.mode == "ibss" for p in store.profiles) and not store.ibss_only_visible
    assert nc.iface_state("A") is IfaceState.DOWN
    assert m.neighbors("B") == set()
    nc.teardown("A")
    assert nc.iface_state("A") is IfaceState.DOWN


@pytest.mark.parametrize("n", [2, 3, 5])
def test_full_mesh_after_setup(n):
    ids = [chr(65 + i) for i in range(n)]
    sim, m, nc = setup_world({x: (3.0 * i, 0.0) for i, x in enumerate(ids)})
    for x in ids:
        nc.one_step_setup(x, MANET)
    for a, b in itertools.permutations(ids, 2):
        assert b in m.neighbors(a)


profiles = st.builds(
    NetworkProfile,
    ssid=st.text(min_size=1, max_size=10).filter(lambda s: "\n" not in s and "\r" not in s),
    mode=st.sampled_from(["ibss", "infrastructure"]),
    priority=st.integers(-5, 20),
)


@given(st.lists(profiles, max_size=5), st.booleans())
def test_store_round_trip(ps, flag):
    store = NetworkStore(list(ps), flag)
    assert NetworkStore.parse(store.serialize()) == store


def test_store_parse_errors():
    with pytest.raises(StoreParseError):
        NetworkStore.parse("network {\n\tssid=unquoted\n}\n")
    with pytest.raises(StoreParseError):
        NetworkStore.parse("network {\n\tssid=\"x\"\n")
