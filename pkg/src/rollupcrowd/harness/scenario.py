"""Scenario configs: parsing, validation and deterministic execution."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from ..errors import ConfigError, FixtureMissing, ProtocolError
from ..gas import GasSchedule
from ..oracle import AggregationPolicy
from ..protocol import FunctionClass, TaskKind
from ..rollup import Rollup
from .report import MetricsReport, write_report
from .world import LAYERS, ROLE_PREFIX, World

OUTPUT_ENV = "ROLLUPCROWD_OUT"
DEFAULT_OUTPUT = "rollupcrowd-out"

TOP_KEYS = {"name", "seed", "block_time", "layer", "batch_timer", "gas_fixture_path",
            "population", "profiles", "adversarial_evaluators", "script"}
REQUIRED = {"name", "seed", "population", "script"}

# op -> (required keys, optional keys); every step also takes "at"
OPS: dict[str, tuple[set[str], set[str]]] = {
    "create_task": ({"requester", "task", "amount"}, {"kind", "deposit", "alpha", "sensing"}),
    "place_bid": ({"worker", "task", "bid"}, {"deposit"}),
    "register_evaluator": ({"evaluator", "task"}, set()),
    "accept_bids": ({"requester", "task", "bids"}, set()),
    "submit_solution": ({"worker", "task", "bid"}, set()),
    "evaluate": ({"task"}, {"seed", "min_quorum", "method"}),
    "cancel_task": ({"requester", "task"}, set()),
    "revoke": ({"identity"}, set()),
}
IDENTITY_KEYS = ("requester", "worker", "evaluator", "identity")


@dataclass
class Scenario:
    name: str
    seed: int
    population: dict[str, int]
    script: list[dict]
    block_time: float = 3.0
    layer: str = "l2"
    batch_timer: float = 5.0
    gas_fixture_path: str | None = None
    profiles: dict[str, dict] = field(default_factory=dict)
    adversarial_evaluators: list[str] = field(default_factory=list)
    base_dir: Path | None = None

    def identity_names(self) -> set[str]:
        names = set()
        for key, (prefix, _) in ROLE_PREFIX.items():
            names.update(f"{prefix}{i}" for i in range(self.population.get(key, 0)))
        return names

    def schedule(self) -> GasSchedule:
        if self.gas_fixture_path is None:
            return GasSchedule.load()
        path = Path(self.gas_fixture_path)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        if not path.is_file():
            raise FixtureMissing(str(path))
        return GasSchedule.load(path)


def parse_scenario(data: Any, base_dir: Path | None = None) -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    missing = REQUIRED - set(data)
    if missing:
        raise ConfigError(f"missing keys: {sorted(missing)}")
    pop = data["population"]
    if not isinstance(pop, dict) or set(pop) - set(ROLE_PREFIX):
        raise ConfigError("population must map requesters/workers/evaluators to counts")
    if any(not isinstance(v, int) or v < 0 for v in pop.values()):
        raise ConfigError("population counts must be non-negative integers")
    if not isinstance(data["seed"], int) or isinstance(data["seed"], bool):
        raise ConfigError("seed must be an integer")
    if data.get("layer", "l2") not in LAYERS:
        raise ConfigError(f"layer must be one of {LAYERS}")
    bt = data.get("block_time", 3.0)
    if not isinstance(bt, (int, float)) or bt <= 0:
        raise ConfigError("block_time must be positive")
    sc = Scenario(
        name=str(data["name"]),
        seed=data["seed"],
        population={k: int(v) for k, v in pop.items()},
        script=list(data["script"]),
        block_time=float(bt),
        layer=data.get("layer", "l2"),
        batch_timer=float(data.get("batch_timer", 5.0)),
        gas_fixture_path=data.get("gas_fixture_path"),
        profiles=dict(data.get("profiles", {})),
        adversarial_evaluators=list(data.get("adversarial_evaluators", [])),
        base_dir=base_dir,
    )
    _validate_script(sc)
    return sc


def _validate_script(sc: Scenario) -> None:
    people = sc.identity_names()
    for name in list(sc.profiles) + sc.adversarial_evaluators:
        if name not in people:
            raise ConfigError(f"unknown identity {name!r}")
    tasks: set[str] = set()
    last_at = 0.0
    for i, step in enumerate(sc.script):
        if not isinstance(step, dict) or "op" not in step:
            raise ConfigError(f"step {i}: missing op")
        op = step["op"]
        if op not in OPS:
            raise ConfigError(f"step {i}: unknown op {op!r}")
        required, optional = OPS[op]
        keys = set(step) - {"op", "at"}
        if required - keys:
            raise ConfigError(f"step {i}: missing {sorted(required - keys)}")
        if keys - required - optional:
            raise ConfigError(f"step {i}: unknown keys {sorted(keys - required - optional)}")
        at = step.get("at", last_at)
        if not isinstance(at, (int, float)) or at < last_at:
            raise ConfigError(f"step {i}: 'at' must be non-decreasing")
        last_at = at
        for key in IDENTITY_KEYS:
            if key in step and step[key] not in people:
                raise ConfigError(f"step {i}: unknown identity {step[key]!r}")
        if op == "create_task":
            tasks.add(step["task"])
            if "kind" in step:
                try:
                    TaskKind(step["kind"])
                except ValueError:
                    raise ConfigError(f"step {i}: unknown task kind {step['kind']!r}") from None
        elif "task" in step and step["task"] not in tasks:
            raise ConfigError(f"step {i}: unknown task {step['task']!r}")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"no such scenario file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return parse_scenario(data, path.parent)


def bundled_scenario(name: str) -> Path:
    ref = resources.files("rollupcrowd").joinpath(f"data/scenarios/{name}.json")
    if not ref.is_file():
        raise ConfigError(f"no bundled scenario {name!r}")
    return Path(str(ref))


def build_world(sc: Scenario, layer: str | None = None) -> World:
    return World.build(
        sc.population,
        layer or sc.layer,
        block_time=sc.block_time,
        schedule=sc.schedule(),
        batch_timer=sc.batch_timer,
        profiles=sc.profiles,
        adversarial=set(sc.adversarial_evaluators),
    )


def execute(sc: Scenario, layer: str | None = None) -> tuple[World, list[dict]]:
    """Run the script; returns the world and a log of step outcomes."""
    world = build_world(sc, layer)
    handles: dict[str, str] = {}
    log = []

    def task_cid(name: str) -> str:
        return handles[f"task:{name}"]

    def bid_cid(task: str, bid: str) -> str:
        key = f"bid:{task}:{bid}"
        if key not in handles:
            handles[key] = world.cid(f"{sc.name}/bid/{task}/{bid}")
        return handles[key]

    for i, step in enumerate(sc.script):
        op = step["op"]
        at = float(step.get("at", world.chain.now))
        world.advance(at)
        outcome: dict[str, Any] = {"step": i, "op": op, "at": at}
        try:
            if op == "create_task":
                cid = world.cid(f"{sc.name}/task/{step['task']}")
                handles[f"task:{step['task']}"] = cid
                if "sensing" in step:
                    world.sensing[cid] = dict(step["sensing"])
                world.call(
                    step["requester"], "create_task", at=at, task_cid=cid, amount=step["amount"],
                    kind=step.get("kind", TaskKind.PROBLEM_SOLVING.value),
                    deposit=step.get("deposit", step["amount"]), alpha=step.get("alpha", 0.5),
                )
            elif op == "place_bid":
                args = {"task": task_cid(step["task"]), "bid_cid": bid_cid(step["task"], step["bid"])}
                if "deposit" in step:
                    args["deposit"] = step["deposit"]
                world.call(step["worker"], "place_bid", at=at, **args)
            elif op == "register_evaluator":
                world.call(step["evaluator"], "register_evaluator", at=at, task=task_cid(step["task"]))
            elif op == "accept_bids":
                world.call(step["requester"], "accept_bids", at=at, task=task_cid(step["task"]),
                           bid_cids=[bid_cid(step["task"], b) for b in step["bids"]])
            elif op == "submit_solution":
                sol = world.cid(f"{sc.name}/solution/{step['task']}/{step['bid']}")
                world.call(step["worker"], "submit_solution", at=at, task=task_cid(step["task"]),
                           bid_cid=bid_cid(step["task"], step["bid"]), solution_cid=sol)
            elif op == "evaluate":
                policy = AggregationPolicy(min_quorum=step.get("min_quorum", 1), method=step.get("method", "mean"))
                seed = step.get("seed", f"{sc.seed}/{step['task']}")
                settlements = world.evaluate(task_cid(step["task"]), _seed_hex(seed), policy, at=at)
                outcome["settlements"] = [
                    {"worker": world.ids_to_names.get(s.worker, s.worker), "task_rating": s.task_rating,
                     "score": s.record.score, "payout": s.payout}
                    for s in settlements
                ]
            elif op == "cancel_task":
                world.call(step["requester"], "cancel_task", at=at, task=task_cid(step["task"]))
            elif op == "revoke":
                world.call(world.admin, "revoke", at=at, identity=world.id(step["identity"]))
            outcome["ok"] = True
        except KeyError as exc:
            raise ConfigError(f"step {i}: unresolved reference {exc}") from None
        except ConfigError:
            raise
        except ProtocolError as exc:
            outcome["ok"] = False
            outcome["error"] = type(exc).__name__
        log.append(outcome)
    world.finish()
    world.task_names = {v: k.split(":", 1)[1] for k, v in handles.items() if k.startswith("task:")}
    return world, log


def _seed_hex(seed: Any) -> str:
    return hashlib.sha256(str(seed).encode()).hexdigest()


def collect_report(sc: Scenario, world: World, log: list[dict]) -> MetricsReport:
    chain = world.chain
    latencies = []
    if isinstance(world.gateway, Rollup):
        for t in world.gateway.finalized:
            latencies.append({
                "tx_id": t.id, "function_class": t.function_class.value, "submitted_at": t.submitted_at,
                "finalized_at": t.finalized_at, "latency": t.finalized_at - t.submitted_at,
            })
        batches = [
            {"batch_index": p.batch.index, "n_txs": len(p.batch.txs), "commit_gas": p.gas.commit,
             "verify_gas": p.gas.verify, "execute_gas": p.gas.execute, "total_gas": p.gas.total}
            for p in world.gateway.postings
        ]
    else:
        for t in getattr(world.gateway, "l1_txs", []):
            if t.included_at is not None:
                latencies.append({
                    "tx_id": t.id, "function_class": t.function_class.value, "submitted_at": t.submitted_at,
                    "finalized_at": t.included_at, "latency": t.included_at - t.submitted_at,
                })
        batches = []
    per_function: dict[str, int] = {}
    for t in chain.txs.values():
        if t.included_at is not None:
            per_function[t.function_class.value] = per_function.get(t.function_class.value, 0) + t.gas_used
    elapsed = chain.now - chain.genesis_time
    state = world.state
    rep_series = []
    for ident in sorted(state.rep_history):
        name = world.ids_to_names.get(ident, ident)
        for k, score in enumerate(state.rep_history[ident], start=1):
            rep_series.append({"interaction": k, "identity": name, "score": score})
    rep_series.sort(key=lambda r: (r["identity"], r["interaction"]))
    blocks = [
        {"height": b.height, "timestamp": b.timestamp, "tx_count": len(b.transactions), "gas_total": b.gas_total}
        for b in chain.blocks
    ]
    return MetricsReport(
        name=sc.name,
        throughput=(len(latencies) / elapsed) if elapsed > 0 else 0.0,
        latencies=latencies,
        gas={"per_function": per_function, "per_batch": batches, "l1_total": sum(per_function.values())},
        reputation_series=rep_series,
        series={"batches": batches, "blocks": blocks},
        summary={
            "layer": world.layer,
            "seed": sc.seed,
            "state_root": state.state_root(),
            "escrow": state.escrow_totals(),
            "total_deposited": state.total_deposited,
            "task_states": {world.task_names.get(k, k): t.state.value for k, t in sorted(state.tasks.items())},
            "steps": log,
            "events": {c.value: sum(1 for e, _ in state.events if e is c) for c in FunctionClass},
        },
    )


def output_dir(default: str | Path | None = None) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or default or DEFAULT_OUTPUT)


def run_scenario(path: str | Path, out_dir: str | Path | None = None, layer: str | None = None) -> MetricsReport:
    sc = load_scenario(path)
    world, log = execute(sc, layer)
    report = collect_report(sc, world, log)
    target = Path(out_dir) if out_dir is not None else output_dir() / sc.name
    write_report(report, target)
    if isinstance(world.gateway, Rollup):
        (target / "batches.csv").write_text(world.gateway.export_batches_csv())
    (target / "ratings.jsonl").write_text(world.oracle.export_archive())
    (target / "roster.jsonl").write_text(world.state.registrar.export_roster())
    return report
