import json

import pytest

from rollupcrowd.cli import main
from rollupcrowd.errors import BadParams, ConfigError, FixtureMissing, UnknownAttack, UnknownSeries
from rollupcrowd.harness.attacks import ATTACKS, run_attack
from rollupcrowd.harness.bench import bench_checks, gas_compare, run_bench, time_overhead
from rollupcrowd.harness.report import SERIES_COLUMNS, MetricsReport, plot_data
from rollupcrowd.harness.scenario import bundled_scenario, execute, load_scenario, parse_scenario, run_scenario

MINIMAL = {
    "name": "mini",
    "seed": 1,
    "population": {"requesters": 1, "workers": 1, "evaluators": 1},
    "script": [
        {"op": "create_task", "requester": "r0", "task": "t", "amount": 5},
        {"op": "register_evaluator", "evaluator": "e0", "task": "t"},
        {"op": "place_bid", "worker": "w0", "task": "t", "bid": "b"},
        {"op": "accept_bids", "requester": "r0", "task": "t", "bids": ["b"]},
        {"op": "submit_solution", "worker": "w0", "task": "t", "bid": "b"},
        {"op": "evaluate", "task": "t"},
    ],
}


def test_happy_path_is_byte_identical(tmp_path):
    path = bundled_scenario("happy_path")
    a = run_scenario(path, tmp_path / "a")
    b = run_scenario(path, tmp_path / "b")
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    assert a.summary["task_states"] == {"logo": "Settled", "survey": "Settled"}
    escrow = a.summary["escrow"]
    assert escrow["Locked"] == 0 and sum(escrow.values()) == a.summary["total_deposited"]
    assert all(s["ok"] for s in a.summary["steps"])
    assert b.summary["state_root"] == a.summary["state_root"]


@pytest.mark.parametrize("layer", ["l1", "direct"])
def test_happy_path_layers_agree(layer):
    sc = load_scenario(bundled_scenario("happy_path"))
    assert execute(sc, "l2")[0].state.state_root() == execute(sc, layer)[0].state.state_root()


def test_minimal_scenario():
    world, log = execute(parse_scenario(MINIMAL))
    assert [s["ok"] for s in log] == [True] * 6
    assert log[-1]["settlements"][0]["payout"] == 5


def test_protocol_errors_are_logged_not_raised():
    data = json.loads(json.dumps(MINIMAL))
    data["script"].insert(1, {"op": "place_bid", "worker": "w0", "task": "t", "bid": "x", "deposit": 0})
    _, log = execute(parse_scenario(data))
    assert log[1] == {"step": 1, "op": "place_bid", "at": 0.0, "ok": False, "error": "InsufficientDeposit"}


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(extra=1),
        lambda d: d.pop("seed"),
        lambda d: d["script"].append({"op": "create_task", "requester": "r9", "task": "u", "amount": 1}),
        lambda d: d["script"].append({"op": "fly", "task": "t"}),
        lambda d: d["script"].append({"op": "evaluate", "task": "nope"}),
        lambda d: d["script"][0].update(colour="red"),
        lambda d: d.update(profiles={"w7": {}}),
        lambda d: d.update(layer="l3"),
        lambda d: d.update(block_time=0),
    ],
)
def test_config_errors(mutate):
    data = json.loads(json.dumps(MINIMAL))
    mutate(data)
    with pytest.raises(ConfigError):
        parse_scenario(data)


def test_missing_fixture():
    sc = parse_scenario({**MINIMAL, "gas_fixture_path": "/nonexistent/gas.json"})
    with pytest.raises(FixtureMissing):
        execute(sc)


def test_unknown_bundled():
    with pytest.raises(ConfigError):
        bundled_scenario("nope")


def test_plot_data_headers():
    report = gas_compare([1, 20])
    text = plot_data(report, "gas")
    assert text.splitlines()[0] == ",".join(SERIES_COLUMNS["gas"])
    assert len(text.splitlines()) == 3
    with pytest.raises(UnknownSeries):
        plot_data(report, "nope")
    with pytest.raises(UnknownSeries):
        plot_data(report, "throughput")


def test_report_round_trip():
    report = gas_compare([5])
    assert MetricsReport.from_json(report.to_json()) == report


def test_gas_compare_checks():
    assert all(bench_checks(gas_compare()).values())


def test_time_overhead_checks():
    report = time_overhead([1, 20, 50])
    assert all(bench_checks(report).values())


@pytest.mark.parametrize("kw", [{"kind": "nope"}, {"kind": "gas_compare", "n": 0}, {"kind": "l1_throughput", "block_time": -1}])
def test_bench_params(kw):
    with pytest.raises(BadParams):
        run_bench(**kw)


@pytest.mark.parametrize("name", sorted(ATTACKS))
def test_attacks_defended(name):
    report = run_attack(name, "direct")
    assert report.verdict == "DEFENDED", report.checks


def test_unknown_attack():
    with pytest.raises(UnknownAttack):
        run_attack("rowhammer")


def test_cli_scenario_and_export(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ROLLUPCROWD_OUT", str(tmp_path))
    assert main(["scenario", "happy_path"]) == 0
    assert (tmp_path / "happy_path" / "report.json").is_file()
    out = tmp_path / "rep.csv"
    assert main(["export", "--series", "reputation_series", "--out", str(out)]) == 0
    assert out.read_text().startswith("interaction,identity,score\n")
    assert "state_root=" in capsys.readouterr().out


def test_cli_config_errors(tmp_path, monkeypatch):
    monkeypatch.setenv("ROLLUPCROWD_OUT", str(tmp_path))
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x"}')
    assert main(["scenario", str(bad)]) == 2
    assert main(["scenario", "no_such_bundle"]) == 2
    assert main(["export", "--series", "gas", "--out", str(tmp_path / "g.csv")]) == 2


def test_cli_bench_and_attack(tmp_path, monkeypatch):
    monkeypatch.setenv("ROLLUPCROWD_OUT", str(tmp_path))
    assert main(["bench", "gas_compare", "--n", "25"]) == 0
    assert main(["export", "--series", "batches", "--out", str(tmp_path / "b.csv")]) == 2
    assert main(["export", "--series", "gas", "--out", str(tmp_path / "g.csv")]) == 0
    assert main(["attack", "sybil"]) == 0
    assert json.loads((tmp_path / "attacks" / "sybil.json").read_text())["verdict"] == "DEFENDED"
