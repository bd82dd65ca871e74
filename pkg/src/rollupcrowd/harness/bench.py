"""Benchmark workloads: L1-vs-L2 gas, L1 throughput/latency sweeps and
per-call-count time overhead, all in simulated time."""
from __future__ import annotations

import math
from statistics import fmean
from typing import Iterable, Sequence

from ..errors import BadParams
from ..gas import GasSchedule
from ..ledger import L1Chain, L1Transaction, tx_id
from ..oracle import AggregationPolicy, RatingBundle
from ..protocol import FunctionClass
from ..rollup import Rollup
from .report import MetricsReport
from .world import World

TABLE_II_CALLS = (1, 2, 5, 10, 15, 20, 25)
OVERHEAD_CALLS = (1, 5, 10, 20, 50, 100)
DEFAULT_RATES = (10, 25, 50, 100, 150, 200, 300, 400, 500)
DEFAULT_BLOCK_GAS_LIMIT = 30_000_000
BENCH_KINDS = ("gas_compare", "l1_throughput", "time_overhead")


def _check_counts(ns: Iterable[int]) -> list[int]:
    ns = list(ns)
    if not ns or any(not isinstance(n, int) or n < 1 for n in ns):
        raise BadParams("call counts must be positive integers")
    return ns


def _create_tasks(world: World, n: int, at: float = 0.0) -> None:
    for i in range(n):
        world.call("r0", "create_task", at=at, task_cid=world.cid(f"bench/task/{i}"), amount=10 + i,
                   kind="ProblemSolving", deposit=10 + i)


def gas_row(n: int, schedule: GasSchedule | None = None, block_time: float = 3.0) -> dict:
    """Measure ``n`` simultaneous CreateTask calls on a single-layer and a
    dual-layer deployment."""
    schedule = schedule or GasSchedule.load()
    single = World.build({"requesters": 1}, "l1", schedule=schedule, block_time=block_time)
    _create_tasks(single, n)
    single.finish()
    l1_total = sum(t.gas_used for t in single.gateway.l1_txs)

    dual = World.build({"requesters": 1}, "l2", schedule=schedule, block_time=block_time)
    _create_tasks(dual, n)
    dual.finish()
    gas = dual.gateway.gas_totals()
    return {
        "n_calls": n,
        "l1_total": l1_total,
        "l2_commit": gas.commit,
        "l2_verify": gas.verify,
        "l2_execute": gas.execute,
        "l2_total": gas.total,
        "n_batches": len(dual.gateway.postings),
        "l1_blocks_used": len({t.block for t in single.gateway.l1_txs}),
    }


def gas_compare(ns: Sequence[int] = TABLE_II_CALLS, block_time: float = 3.0, schedule: GasSchedule | None = None) -> MetricsReport:
    ns = _check_counts(ns)
    schedule = schedule or GasSchedule.load()
    rows = [gas_row(n, schedule, block_time) for n in ns]
    fixture = {}
    for row in rows:
        ref = schedule.table_ii.get(row["n_calls"])
        if ref is not None:
            fixture[str(row["n_calls"])] = (
                ref["commit"] == row["l2_commit"] and ref["verify"] == row["l2_verify"]
                and ref["execute"] == row["l2_execute"] and ref["l2_total"] == row["l2_total"]
                and ref["l1_total"] == row["l1_total"]
            )
    ratios = {str(r["n_calls"]): r["l1_total"] / r["l2_total"] for r in rows}
    return MetricsReport(
        name="gas_compare",
        gas={"rows": rows},
        series={"gas": rows},
        summary={"fixture_match": fixture, "l1_over_l2": ratios},
    )


def l1_sweep_point(rate: int, block_time: float, duration: float, gas_limit: int | None,
                   schedule: GasSchedule) -> dict:
    """Open-loop CreateTask load at ``rate`` tx/s for ``duration`` seconds."""
    chain = L1Chain(schedule, block_time, gas_limit=gas_limit)
    n = int(round(rate * duration))
    for j in range(n):
        # arrivals at interval midpoints keep them off block boundaries
        at = (j + 0.5) / rate
        digest = tx_id("payload", rate, j)
        chain.submit_tx(L1Transaction(tx_id("bench", rate, block_time, j), FunctionClass.CREATE_TASK, digest, submitted_at=at))
    chain.run_until(duration)
    done = [t for t in chain.txs.values() if t.included_at is not None]
    return {
        "block_time": block_time,
        "send_rate": rate,
        "throughput": len(done) / duration,
        "mean_latency": fmean(t.included_at - t.submitted_at for t in done) if done else math.inf,
        "included": len(done),
        "backlog": n - len(done),
    }


def l1_throughput(
    block_times: Sequence[float] = (1, 3, 5),
    rates: Sequence[int] = DEFAULT_RATES,
    duration: float = 60.0,
    gas_limit: int | None = DEFAULT_BLOCK_GAS_LIMIT,
    schedule: GasSchedule | None = None,
) -> MetricsReport:
    if not block_times or any(b <= 0 for b in block_times):
        raise BadParams("block times must be positive")
    if not rates or any(r <= 0 for r in rates):
        raise BadParams("send rates must be positive")
    if duration <= 0 or any(duration % b for b in block_times):
        raise BadParams("duration must be a positive multiple of every block time")
    schedule = schedule or GasSchedule.load()
    rows = [l1_sweep_point(r, b, duration, gas_limit, schedule) for b in block_times for r in sorted(rates)]
    return MetricsReport(
        name="l1_throughput",
        throughput=max(r["throughput"] for r in rows),
        series={"throughput": rows},
        summary={"duration": duration, "gas_limit": gas_limit, "clock": "simulated seconds"},
    )


def _overhead_world(kind: FunctionClass, n: int, block_time: float) -> tuple[World, list[tuple[str, str, dict]]]:
    """Prepare state directly so only the measured calls go through the rollup."""
    world = World.build({"requesters": 1, "workers": 1, "evaluators": 1}, "direct", block_time=block_time)
    calls = []
    for i in range(n):
        task = world.cid(f"ovh/task/{i}")
        if kind is FunctionClass.CREATE_TASK:
            calls.append(("r0", "create_task", {"task_cid": task, "amount": 10, "kind": "ProblemSolving", "deposit": 10}))
            continue
        bid = world.cid(f"ovh/bid/{i}")
        world.call("r0", "create_task", task_cid=task, amount=10, kind="ProblemSolving", deposit=10)
        world.call("e0", "register_evaluator", task=task)
        world.call("w0", "place_bid", task=task, bid_cid=bid)
        world.call("r0", "accept_bid", task=task, bid_cid=bid)
        sub = {"task": task, "bid_cid": bid, "solution_cid": world.cid(f"ovh/sol/{i}")}
        if kind is FunctionClass.SUBMIT_SOLUTION:
            calls.append(("w0", "submit_solution", sub))
            continue
        world.call("w0", "submit_solution", **sub)
        world.call(world.state.oracle_id, "distribute_evaluators", task=task, seed=i)
        world.oracle.submit_rating(RatingBundle(world.id("e0"), task, bid, world.agent(world.id("e0"), task, bid, world.state)))
        calls.append((world.state.oracle_id, "settle", {"task": task, "aggregated": {bid: world.oracle.aggregate(task, bid, AggregationPolicy())}}))
    return world, calls


def time_overhead(ns: Sequence[int] = OVERHEAD_CALLS, block_time: float = 3.0, batch_timer: float = 5.0,
                  send_rate: float = 10.0, schedule: GasSchedule | None = None) -> MetricsReport:
    """Submit ``n`` calls sequentially at ``send_rate`` and time first
    submission to last finalization."""
    ns = _check_counts(ns)
    if send_rate <= 0:
        raise BadParams("send_rate must be positive")
    schedule = schedule or GasSchedule.load()
    reference = schedule.raw.get("table_i_wallclock_seconds", {})
    rows = []
    for kind in (FunctionClass.CREATE_TASK, FunctionClass.SUBMIT_SOLUTION, FunctionClass.CALCULATE_NEW_REP):
        for n in ns:
            world, calls = _overhead_world(kind, n, block_time)
            chain = L1Chain(schedule, block_time)
            rollup = Rollup(world.state, chain, schedule, batch_timer)
            for j, (sender, action, args) in enumerate(calls):
                at = j / send_rate
                rollup.run_until(at)
                rollup.submit(world.names.get(sender, sender), action, args, at=at)
            while len(rollup.finalized) < n:
                rollup.run_until(chain.next_block_time)
            published = None
            if n in reference.get("calls", []):
                published = reference[kind.value][reference["calls"].index(n)]
            rows.append({
                "function_class": kind.value,
                "n_calls": n,
                "simulated_seconds": max(tx.finalized_at for tx in rollup.finalized),
                "published_wallclock_seconds": published,
            })
    return MetricsReport(
        name="time_overhead",
        series={"time_overhead": rows},
        summary={
            "note": "simulated submit-to-finality seconds; published values are wall-clock and not comparable",
            "block_time": block_time,
            "batch_timer": batch_timer,
            "send_rate": send_rate,
        },
    )


def run_bench(kind: str, n: int | None = None, block_time: float | None = None, seed: int = 0) -> MetricsReport:
    """CLI entry. ``seed`` is accepted for interface symmetry; every bench
    workload is fully deterministic."""
    if kind not in BENCH_KINDS:
        raise BadParams(f"unknown bench kind {kind!r}")
    if block_time is not None and block_time <= 0:
        raise BadParams("block time must be positive")
    if n is not None and n < 1:
        raise BadParams("n must be positive")
    if kind == "gas_compare":
        return gas_compare([n] if n else TABLE_II_CALLS, block_time or 3.0)
    if kind == "l1_throughput":
        return l1_throughput([block_time] if block_time else (1, 3, 5))
    return time_overhead([n] if n else OVERHEAD_CALLS, block_time or 3.0)


def bench_checks(report: MetricsReport) -> dict[str, bool]:
    """Shape properties each bench must satisfy."""
    checks: dict[str, bool] = {}
    if report.name == "gas_compare":
        checks["fixture_rows_exact"] = all(report.summary["fixture_match"].values())
        rows = {r["n_calls"]: r for r in report.series["gas"]}
        if 20 in rows:
            checks["ratio_at_20_at_least_20x"] = rows[20]["l1_total"] / rows[20]["l2_total"] >= 20
        checks["batches_are_ceil_n_over_20"] = all(r["n_batches"] == math.ceil(n / 20) for n, r in rows.items())
    elif report.name == "l1_throughput":
        rows = report.series["throughput"]
        by_bt: dict[float, list[dict]] = {}
        for r in rows:
            by_bt.setdefault(r["block_time"], []).append(r)
        checks["latency_non_decreasing_in_send_rate"] = all(
            all(a["mean_latency"] <= b["mean_latency"] + 1e-9 for a, b in zip(rs, rs[1:])) for rs in by_bt.values()
        )
        checks["throughput_never_exceeds_send_rate"] = all(r["throughput"] <= r["send_rate"] + 1e-9 for r in rows)
        checks["saturation_knee_exists"] = all(rs[-1]["backlog"] > 0 for rs in by_bt.values())
        bts = sorted(by_bt)
        lowest_rate = [by_bt[b][0]["mean_latency"] for b in bts]
        checks["latency_grows_with_block_time"] = all(a < b for a, b in zip(lowest_rate, lowest_rate[1:]))
    elif report.name == "time_overhead":
        rows = report.series["time_overhead"]
        by_cls: dict[str, list[dict]] = {}
        for r in rows:
            by_cls.setdefault(r["function_class"], []).append(r)
        checks["elapsed_non_decreasing_in_calls"] = all(
            all(a["simulated_seconds"] <= b["simulated_seconds"] for a, b in zip(rs, rs[1:])) for rs in by_cls.values()
        )
    return checks
