import json
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manetlab.harness import (
    FlowSpec,
    NodeSpec,
    ParseError,
    Scenario,
    ValidationError,
    builtin_scenarios,
    emit_csv,
    load_scenario,
    run,
    run_batch,
    taxonomy_report,
    with_traffic,
)
from manetlab.harness.cli import main
from manetlab.harness.scenario import (
    RoutingSpec,
    dump_scenario,
    parse_scenario,
    scenario_from_dict,
    scenario_to_dict,
    validate,
)
from manetlab.harness.taxonomy import BUILTIN_PROFILES, TechnologyProfile
from manetlab.link import LinkMode

SMALL = Scenario("small", [NodeSpec("A", (0.0, 0.0)), NodeSpec("C", (30.0, 0.0))], duration=14.0,
                 flows=[FlowSpec("A", "C", start=11.0, stop=13.0)])


def test_builtin_multihop_file():
    s = load_scenario("ibss_mh")
    assert [(n.id, n.position) for n in s.nodes] == [("A", (0.0, 0.0)), ("B", (40.0, 0.0)), ("C", (80.0, 0.0))]
    assert s.medium.radio_range == 50.0 and s.routing.package == "olsr"
    assert [(f.src, f.dst, f.kind) for f in s.flows] == [("A", "C", "udp-saturation")]


def test_builtin_topologies():
    from manetlab.harness import Emulation

    b = builtin_scenarios()
    assert set(b) == {"infra", "ibss_sh", "ibss_mh"}
    sh, mh, infra = (Emulation(b[k]) for k in ("ibss_sh", "ibss_mh", "infra"))
    for e in (sh, mh, infra):
        e.start()
    assert "C" in sh.medium.neighbors("A")
    assert "C" not in mh.medium.neighbors("A")
    assert "C" not in infra.medium.radio_neighbors("A")
    assert infra.medium.mode("B") is LinkMode.AP


def test_validation_errors():
    with pytest.raises(ValidationError):
        validate(replace(SMALL, nodes=[]))
    with pytest.raises(ValidationError):
        validate(replace(SMALL, routing=RoutingSpec("batman")))
    with pytest.raises(ValidationError):
        validate(replace(SMALL, mode="infrastructure", ap="Z"))
    with pytest.raises(ValidationError):
        validate(replace(SMALL, flows=[FlowSpec("A", "Q")]))
    with pytest.raises(ValidationError):
        validate(replace(SMALL, flows=[FlowSpec("A", "C", start=20.0)]))
    with pytest.raises(ValidationError):
        validate(replace(SMALL, nodes=[NodeSpec("A"), NodeSpec("C", ip="169.254.1.66")]))


def test_parse_error_reports_line():
    with pytest.raises(ParseError) as exc:
        parse_scenario('{\n  "name": "x",\n  "nodes": [,]\n}')
    assert exc.value.line == 3


def test_parse_error_reports_field():
    with pytest.raises(ParseError) as exc:
        parse_scenario(json.dumps({"name": "x", "nodes": [{"id": "A", "colour": "red"}]}))
    assert exc.value.field == "nodes[0].colour"
    with pytest.raises(ParseError) as exc:
        parse_scenario(json.dumps({"name": "x", "nodes": [{"id": "A", "fault": "melted"}]}))
    assert exc.value.field == "nodes[0].fault"


def test_golden_files_round_trip():
    for name, s in builtin_scenarios().items():
        assert parse_scenario(dump_scenario(s)) == s


@settings(max_examples=30)
@given(
    st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=1, max_size=5),
    st.integers(0, 2**31),
    st.floats(1, 500),
)
def test_scenario_dict_round_trip(points, seed, duration):
    nodes = [NodeSpec(f"N{i}", p) for i, p in enumerate(points)]
    s = Scenario("h", nodes, seed=seed, duration=duration)
    assert scenario_from_dict(scenario_to_dict(s)) == s


def test_csv_outputs_and_accounting(tmp_path):
    b = run(SMALL)
    files = emit_csv(b, tmp_path)
    names = {f.name for f in files}
    assert {"throughput.csv", "ping.csv", "battery.csv", "routes.csv", "drops.csv"} <= names
    heads = {n: (tmp_path / n).read_text().splitlines()[0] for n in names if n.endswith(".csv")}
    assert heads["throughput.csv"] == "time_s,flow,bits_per_s"
    assert heads["ping.csv"] == "seq,rtt_ms,lost"
    assert heads["battery.csv"] == "node,percent,interval_s"
    assert heads["routes.csv"] == "node,destination,next_hop,hops,converged_s"
    assert heads["drops.csv"] == "node,reason,count"
    label = SMALL.flows[0].label
    series = b.throughput[label]
    assert len(series) == 14
    assert sum(series) == b.delivered_bytes[label] * 8
    assert len((tmp_path / "throughput.csv").read_text().splitlines()) == 15


def test_ping_series_csv_rows(tmp_path):
    s = with_traffic(load_scenario("ibss_sh"), "ping-series")
    emit_csv(run(s), tmp_path)
    assert len((tmp_path / "ping.csv").read_text().splitlines()) == 31


def test_batch_seeds_and_dirs(tmp_path):
    bundles = run_batch(replace(SMALL, seed=7), 3, tmp_path)
    assert [b.seed for b in bundles] == [7, 8, 9]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["rep_0", "rep_1", "rep_2"]


def test_same_seed_same_bytes(tmp_path):
    for d in ("a", "b"):
        emit_csv(run(SMALL), tmp_path / d)
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_taxonomy_rows():
    rows = {p.name: p for p in BUILTIN_PROFILES}
    assert rows["WiFi Direct"].multi_hop == "no"
    assert rows["AdHocDroid"].other_systems == "partial"
    assert rows["Serval"].any_app == "no"
    extra = TechnologyProfile("Mine", "yes", "yes", "no", "no", "no")
    assert taxonomy_report("csv", (extra,)).splitlines()[-1] == "Mine,yes,yes,no,no,no"
    with pytest.raises(ValueError):
        TechnologyProfile("Bad", "maybe", "yes", "yes", "yes", "yes")


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["taxonomy", "--format", "csv"]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "x", "nodes": []}))
    assert main(["run", "--scenario", str(bad)]) == 2
    assert main(["run", "--scenario", "no-such-file.json"]) == 2
    good = tmp_path / "s.json"
    good.write_text(dump_scenario(SMALL))
    assert main(["run", "--scenario", str(good), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "throughput.csv").exists()
    manifest = tmp_path / "m.json"
    manifest.write_text('{"name": "olsr", "protocol": "olsr"}')
    assert main(["run", "--scenario", str(good), "--package", str(manifest)]) == 2


def test_cli_traceroute_and_scenarios(capsys):
    assert main(["scenarios"]) == 0
    assert main(["traceroute", "--scenario", "ibss_mh", "--src", "A", "--dst", "C"]) == 0
    out = capsys.readouterr().out
    assert " B " in out and " C " in out
