import sys

import pytest

from manetlab.harness import Emulation, NodeSpec
from manetlab.harness.scenario import RoutingSpec, Scenario


def build(nodes, *, mode="ibss", ap=None, routing="olsr", params=None, flows=(), duration=60.0, seed=1, **kw):
    """Started emulation over ``nodes`` = {id: (x, y)} or a list of NodeSpec."""
    if isinstance(nodes, dict):
        nodes = [NodeSpec(k, v) for k, v in nodes.items()]
    s = Scenario(
        "t",
        list(nodes),
        seed=seed,
        duration=duration,
        mode=mode,
        ap=ap,
        routing=RoutingSpec(routing, dict(params or {})),
        flows=list(flows),
        **kw,
    )
    emu = Emulation(s)
    emu.start()
    return emu


@pytest.fixture
def chain():
    emu = build({"A": (0.0, 0.0), "B": (40.0, 0.0), "C": (80.0, 0.0)})
    emu.sim.run_until(15_000_000)
    return emu


def pytest_terminal_summary(terminalreporter):
    for name, mod in list(sys.modules.items()):
        if name.endswith("test_acceptance") and hasattr(mod, "RESULTS") and mod.RESULTS:
            terminalreporter.section("acceptance criteria")
            for line in mod.RESULTS:
                terminalreporter.write_line(line)

