"""Oracle network model: collects evaluator ratings off-chain, validates
them, aggregates per submission and settles the task on-chain."""
from __future__ import annotations

import json
import math
import statistics
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Protocol

from .content_store import ContentStore
from .errors import (
    DuplicateRating,
    NotAssignedEvaluator,
    QuorumNotMet,
    RangeViolation,
    WrongState,
)
from .protocol import (
    ORACLE_ID,
    CrowdProtocol,
    TaskKind,
    TaskState,
    canonical_json,
    components_for,
)


class Gateway(Protocol):
    state: CrowdProtocol

    def submit(self, sender: str, action: str, args: Mapping[str, Any] | None = None, at: float | None = None) -> Any: ...


@dataclass(frozen=True)
class RatingBundle:
    evaluator: str
    task: str
    bid_cid: str
    components: Mapping[str, float]


@dataclass(frozen=True)
class AggregationPolicy:
    weights: Mapping[str, float] | None = None  # None means uniform
    min_quorum: int = 1
    method: str = "mean"

    def __post_init__(self):
        if self.min_quorum < 1:
            raise ValueError("min_quorum must be at least 1")
        if self.method not in ("mean", "median"):
            raise ValueError(f"unknown aggregation method {self.method!r}")
        if self.weights is not None:
            if any(w < 0 for w in self.weights.values()):
                raise ValueError("weights must be non-negative")
            if abs(sum(self.weights.values()) - 1.0) > 1e-9:
                raise ValueError("weights must sum to 1")


def validate_components(kind: TaskKind, components: Mapping[str, float]) -> None:
    names = components_for(kind)
    if set(components) != set(names):
        raise RangeViolation(f"expected components {sorted(names)}, got {sorted(components)}")
    for name in names:
        v = components[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise RangeViolation(f"{name} must be a finite number")
    if kind is TaskKind.PROBLEM_SOLVING:
        for name in names:
            if not 0.0 <= components[name] <= 1.0:
                raise RangeViolation(f"{name}={components[name]} not in [0, 1]")
    else:
        lo, hi = components["lower_bound"], components["upper_bound"]
        if not lo < hi:
            raise RangeViolation("lower bound must be below upper bound")
        for name in ("observed", "truth"):
            if not lo <= components[name] <= hi:
                raise RangeViolation(f"{name} outside sensing range")
        if not 0.0 <= components["contextual"] <= 1.0:
            raise RangeViolation("contextual not in [0, 1]")


def weighted_mean(values: list[float], weights: list[float]) -> float:
    total = math.fsum(weights)
    m = math.fsum(v * w for v, w in zip(values, weights)) / total
    # keep the result inside the hull of the inputs despite rounding
    return min(max(values), max(min(values), m))


# evaluator agent: (evaluator, task, bid_cid, protocol) -> component scores
Agent = Callable[[str, str, str, CrowdProtocol], Mapping[str, float]]


@dataclass
class OracleNetwork:
    gateway: Gateway
    store: ContentStore = field(default_factory=ContentStore)
    node_count: int = 4
    principal: str = ORACLE_ID
    bundles: dict[tuple[str, str], dict[str, RatingBundle]] = field(default_factory=dict)
    archive: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()

    @property
    def state(self) -> CrowdProtocol:
        return self.gateway.state

    def submit_rating(self, bundle: RatingBundle, at: float = 0.0) -> str:
        task = self.state.tasks.get(bundle.task)
        if task is None or task.state is not TaskState.UNDER_EVALUATION:
            raise WrongState("task is not under evaluation")
        if bundle.evaluator not in self.state.evaluator_set_for(bundle.task, bundle.bid_cid):
            raise NotAssignedEvaluator(f"{bundle.evaluator[:8]} is not assigned to {bundle.bid_cid[:8]}")
        validate_components(task.kind, bundle.components)
        record = {
            "task": bundle.task,
            "bid": bundle.bid_cid,
            "evaluator": bundle.evaluator,
            "components": dict(bundle.components),
            "timestamp": at,
        }
        with self._lock:
            slot = self.bundles.setdefault((bundle.task, bundle.bid_cid), {})
            if bundle.evaluator in slot:
                raise DuplicateRating(bundle.evaluator)
            slot[bundle.evaluator] = bundle
            self.archive.append(record)
        return self.store.put(canonical_json(record).encode())

    def aggregate(self, task: str, bid_cid: str, policy: AggregationPolicy = AggregationPolicy()) -> dict[str, float]:
        slot = self.bundles.get((task, bid_cid), {})
        if len(slot) < policy.min_quorum:
            raise QuorumNotMet(f"{len(slot)} ratings, need {policy.min_quorum}")
        evaluators = sorted(slot)
        if policy.weights is None:
            weights = [1.0] * len(evaluators)
        else:
            weights = [policy.weights.get(e, 0.0) for e in evaluators]
            if math.fsum(weights) <= 0:
                raise QuorumNotMet("no weighted ratings present")
        names = sorted(next(iter(slot.values())).components)
        out = {}
        for name in names:
            values = [slot[e].components[name] for e in evaluators]
            if policy.method == "median":
                out[name] = statistics.median(values)
            else:
                out[name] = weighted_mean(values, weights)
        return out

    def run_evaluation_round(
        self,
        task: str,
        seed: int | str,
        agent: Agent,
        policy: AggregationPolicy = AggregationPolicy(),
        at: float | None = None,
    ):
        """Distribute evaluators, collect one bundle per assigned evaluator,
        aggregate and settle."""
        seed_arg = seed if isinstance(seed, (int, str)) else bytes(seed).hex()
        sets = self.gateway.submit(self.principal, "distribute_evaluators", {"task": task, "seed": seed_arg}, at=at)
        t = self.state.tasks[task]
        for bid_cid, members in zip(t.set_bids, sets):
            for ev in members:
                components = agent(ev, task, bid_cid, self.state)
                self.submit_rating(RatingBundle(ev, task, bid_cid, dict(components)), at=at or 0.0)
        aggregated = {bid: self.aggregate(task, bid, policy) for bid in t.set_bids}
        return self.gateway.submit(self.principal, "settle", {"task": task, "aggregated": aggregated}, at=at)

    def export_archive(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.archive)
