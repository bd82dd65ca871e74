"""Scripted adversaries for the reputation and payment attacks.

Each attack builds a fresh world, runs the adversary, and checks whether
the relevant defence predicates held.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..errors import (
    DuplicateTag,
    MissingRatings,
    ProtocolError,
    QuorumNotMet,
    Unauthorized,
    UnknownAttack,
    WrongState,
)
from ..oracle import AggregationPolicy, RatingBundle
from ..protocol import DepositState, TaskState
from ..registrar import Role, tag_from_label
from ..reputation import value_rating
from .world import World

DEFENDED = "DEFENDED"
VULNERABLE = "VULNERABLE"


@dataclass
class AttackReport:
    name: str
    checks: dict[str, bool] = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return DEFENDED if self.checks and all(self.checks.values()) else VULNERABLE

    def to_dict(self) -> dict:
        return {"name": self.name, "verdict": self.verdict, "checks": self.checks, "details": self.details}


def _rejected(fn: Callable[[], object], *errors: type[ProtocolError]) -> bool:
    try:
        fn()
    except errors:
        return True
    except ProtocolError:
        return False
    return False


def _run_task(world: World, requester: str, worker: str, evaluators: list[str], amount: int, name: str,
              seed: str, policy: AggregationPolicy = AggregationPolicy(), at: float = 0.0):
    """Full lifecycle of a single-bid task; returns the settlement list."""
    task = world.cid(f"task/{name}")
    bid = world.cid(f"bid/{name}/{worker}")
    world.call(requester, "create_task", at=at, task_cid=task, amount=amount, kind="ProblemSolving", deposit=amount)
    for ev in evaluators:
        world.call(ev, "register_evaluator", at=at, task=task)
    world.call(worker, "place_bid", at=at, task=task, bid_cid=bid)
    world.call(requester, "accept_bid", at=at, task=task, bid_cid=bid)
    world.call(worker, "submit_solution", at=at, task=task, bid_cid=bid, solution_cid=world.cid(f"sol/{name}"))
    return task, bid, world.evaluate(task, seed, policy, at=at)


def sybil(layer: str = "l2") -> AttackReport:
    world = World.build({"requesters": 1, "workers": 1}, layer)
    rep = AttackReport("sybil")
    fresh = tag_from_label("sybil/fresh-account")
    rep.checks["non_admin_cannot_register"] = _rejected(
        lambda: world.call("w0", "register", dedup_tag=fresh.hex(), role="Worker"), Unauthorized)
    same_person = tag_from_label("person/w0")
    rep.checks["duplicate_tag_rejected"] = _rejected(
        lambda: world.call(world.admin, "register", dedup_tag=same_person.hex(), role="Worker"), DuplicateTag)
    rep.checks["duplicate_tag_other_role_rejected"] = _rejected(
        lambda: world.call(world.admin, "register", dedup_tag=same_person.hex(), role="Evaluator"), DuplicateTag)
    outsider = "ab" * 32
    rep.checks["unregistered_cannot_transact"] = _rejected(
        lambda: world.call(outsider, "create_task", task_cid=world.cid("sybil/task"), amount=1,
                           kind="ProblemSolving", deposit=1), Unauthorized)
    rep.details["workers"] = sum(1 for i in world.state.registrar.identities() if i.role is Role.WORKER)
    world.finish()
    return rep


def whitewash(layer: str = "l2") -> AttackReport:
    world = World.build({"requesters": 1, "workers": 1, "evaluators": 1}, layer,
                        profiles={"w0": {"completeness": 0.0, "quality": 0.0, "contextual": 0.0}})
    rep = AttackReport("whitewash")
    _run_task(world, "r0", "w0", ["e0"], 10, "ww-1", "ww")
    score = world.state.record_for(world.id("w0")).score
    rep.details["score_before_exit"] = score
    rep.checks["bad_work_lowered_reputation"] = score < world.state.r_init
    world.call(world.admin, "revoke", identity=world.id("w0"))
    task = world.cid("task/ww-2")
    world.call("r0", "create_task", task_cid=task, amount=10, kind="ProblemSolving", deposit=10)
    rep.checks["revoked_identity_cannot_bid"] = _rejected(
        lambda: world.call("w0", "place_bid", task=task, bid_cid=world.cid("bid/ww-2")), Unauthorized)
    rep.checks["reentry_with_same_tag_rejected"] = _rejected(
        lambda: world.call(world.admin, "register", dedup_tag=tag_from_label("person/w0").hex(), role="Worker"),
        DuplicateTag)
    world.finish()
    return rep


def collusion(layer: str = "l2", farm_size: int = 50) -> AttackReport:
    """A requester farms micro-tasks at the minimum amount to a confederate."""
    perfect = {"completeness": 1.0, "quality": 1.0, "contextual": 1.0}
    world = World.build({"requesters": 2, "workers": 2, "evaluators": 3}, layer,
                        profiles={"w0": perfect, "w1": perfect})
    rep = AttackReport("collusion")
    a_min, a_max = 1, 100
    # an honest requester establishes the market's amount range
    for amount in (a_min, a_max):
        world.call("r1", "create_task", task_cid=world.cid(f"market/{amount}"), amount=amount,
                   kind="ProblemSolving", deposit=amount)
    r_init = world.state.r_init
    farm_ratings = []
    for i in range(farm_size):
        _, _, settled = _run_task(world, "r0", "w0", ["e0", "e1", "e2"], a_min, f"farm-{i}", f"farm-{i}", at=float(i))
        farm_ratings.append(settled[0].task_rating)
    farm_gain = world.state.record_for(world.id("w0")).score - r_init
    bounds = world.state.bounds
    _, _, legit = _run_task(world, "r1", "w1", ["e0", "e1", "e2"], a_max, "legit", "legit", at=float(farm_size))
    legit_gain = legit[0].record.score - r_init
    rep.details.update(farm_gain=farm_gain, legit_gain=legit_gain, farm_tasks=farm_size,
                       max_farm_rating=max(farm_ratings), legit_rating=legit[0].task_rating)
    rep.checks["farm_value_rating_zero"] = value_rating(a_min, bounds) == 0.0
    rep.checks["farm_gain_below_one_legit_task"] = farm_gain < legit_gain
    world.finish()
    return rep


def freeride(layer: str = "l2") -> AttackReport:
    world = World.build({"requesters": 1, "workers": 1, "evaluators": 2}, layer,
                        profiles={"w0": {"completeness": 0.05, "quality": 0.05, "contextual": 0.1}})
    rep = AttackReport("freeride")
    oracle = world.state.oracle_id
    task = world.cid("task/fr")
    bid = world.cid("bid/fr")
    world.call("r0", "create_task", task_cid=task, amount=40, kind="ProblemSolving", deposit=40)
    world.call("e0", "register_evaluator", task=task)
    world.call("e1", "register_evaluator", task=task)
    world.call("w0", "place_bid", task=task, bid_cid=bid)
    world.call("r0", "accept_bid", task=task, bid_cid=bid)
    rep.checks["no_evaluation_before_submission"] = _rejected(
        lambda: world.call(oracle, "distribute_evaluators", task=task, seed="00" * 32), WrongState)
    world.call("w0", "submit_solution", task=task, bid_cid=bid, solution_cid=world.cid("sol/fr-empty"))
    rep.checks["worker_cannot_self_settle"] = _rejected(
        lambda: world.call("w0", "settle", task=task, aggregated={bid: {"completeness": 1, "quality": 1, "contextual": 1}}),
        Unauthorized)
    rep.checks["settle_requires_ratings"] = _rejected(
        lambda: world.call(oracle, "settle", task=task, aggregated={}), MissingRatings)
    world.call(oracle, "distribute_evaluators", task=task, seed="11" * 32)
    rep.checks["aggregate_requires_quorum"] = _rejected(
        lambda: world.oracle.aggregate(task, bid, AggregationPolicy(min_quorum=2)), QuorumNotMet)
    paid_before = sum(p[2] for p in world.state.payouts if p[1] == world.id("w0"))
    rep.checks["no_payout_without_evaluation"] = paid_before == 0
    # the oracle now collects real ratings; the free-rider's empty work is rated accordingly
    for ev in world.state.evaluator_set_for(task, bid):
        world.oracle.submit_rating(RatingBundle(ev, task, bid, world.agent(ev, task, bid, world.state)))
    settled = world.call(oracle, "settle", task=task, aggregated={bid: world.oracle.aggregate(task, bid, AggregationPolicy(min_quorum=2))})
    deposit = world.state.deposits[f"{task}/bid/{bid}"]
    rep.details.update(task_rating=settled[0].task_rating, payout=settled[0].payout)
    rep.checks["low_effort_unpaid_and_slashed"] = settled[0].payout == 0 and deposit.state is DepositState.SLASHED
    world.finish()
    return rep


def falsereport(layer: str = "l2") -> AttackReport:
    world = World.build({"requesters": 1, "workers": 1, "evaluators": 1}, layer)
    rep = AttackReport("falsereport")
    amount = 50
    task = world.cid("task/fp")
    bid = world.cid("bid/fp")
    world.call("r0", "create_task", task_cid=task, amount=amount, kind="ProblemSolving", deposit=amount)
    world.call("e0", "register_evaluator", task=task)
    world.call("w0", "place_bid", task=task, bid_cid=bid)
    world.call("r0", "accept_bid", task=task, bid_cid=bid)
    escrow = world.state.deposits[f"{task}/requester"]
    rep.checks["reward_locked_before_work"] = escrow.state is DepositState.LOCKED and escrow.amount >= amount
    rep.checks["requester_cannot_cancel_after_accept"] = _rejected(
        lambda: world.call("r0", "cancel_task", task=task), WrongState)
    world.call("w0", "submit_solution", task=task, bid_cid=bid, solution_cid=world.cid("sol/fp"))
    rep.checks["requester_cannot_settle"] = _rejected(
        lambda: world.call("r0", "settle", task=task, aggregated={bid: {"completeness": 0, "quality": 0, "contextual": 0}}),
        Unauthorized)
    settled = world.evaluate(task, "fp")
    rep.checks["worker_paid_from_escrow"] = settled[0].payout == amount and settled[0].payout <= escrow.amount
    rep.checks["no_double_settlement"] = _rejected(
        lambda: world.call(world.state.oracle_id, "settle", task=task, aggregated={}), WrongState)
    rep.checks["task_settled"] = world.state.tasks[task].state is TaskState.SETTLED
    rep.details.update(payout=settled[0].payout, escrow=escrow.amount)
    world.finish()
    return rep


def badmouth(layer: str = "l2", raters: int = 5, honest_score: float = 0.9) -> AttackReport:
    profile = {"completeness": honest_score, "quality": honest_score, "contextual": honest_score}
    world = World.build({"requesters": 1, "workers": 1, "evaluators": raters}, layer,
                        profiles={"w0": profile}, adversarial={"e0"})
    rep = AttackReport("badmouth")
    evaluators = [f"e{i}" for i in range(raters)]
    task, bid, settled = _run_task(world, "r0", "w0", evaluators, 10, "bm", "bm", AggregationPolicy(min_quorum=raters))
    agg = world.oracle.aggregate(task, bid)
    median = world.oracle.aggregate(task, bid, AggregationPolicy(method="median"))
    shift = honest_score - agg["quality"]
    rep.details.update(aggregated=agg["quality"], median=median["quality"], shift=shift, raters=raters,
                       task_rating=settled[0].task_rating, payout=settled[0].payout)
    rep.checks["shift_at_most_range_over_k"] = shift <= 1.0 / raters + 1e-12
    rep.checks["aggregate_at_least_0.72"] = agg["quality"] >= (raters - 1) * honest_score / raters - 1e-12
    rep.checks["honest_worker_still_paid"] = settled[0].payout > 0
    world.finish()
    return rep


ATTACKS: dict[str, Callable[..., AttackReport]] = {
    "sybil": sybil,
    "whitewash": whitewash,
    "collusion": collusion,
    "freeride": freeride,
    "falsereport": falsereport,
    "badmouth": badmouth,
}


def run_attack(name: str, layer: str = "l2") -> AttackReport:
    if name not in ATTACKS:
        raise UnknownAttack(name)
    return ATTACKS[name](layer)
