"""On-chain crowdsourcing logic: task lifecycle, escrow, bidding, evaluator
assignment and reputation settlement.

``CrowdProtocol`` is a plain state machine. It can be driven directly or by
the rollup aggregator through :meth:`CrowdProtocol.apply`; both routes run the
same code, which is what makes the state roots comparable.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Sequence

from . import assignment
from .errors import (
    AlreadyEnrolled,
    BidNotAccepted,
    ConflictOfInterest,
    DuplicateBid,
    DuplicateTask,
    InsufficientDeposit,
    MissingRatings,
    NotAssignedWorker,
    NotEnoughEvaluators,
    RangeViolation,
    Unauthorized,
    UnknownBid,
    UnknownTask,
    WrongState,
)
from .registrar import Registrar, Role, identity_handle, tag_from_label
from .reputation import (
    AmountBounds,
    ProblemSolvingScores,
    RatingWeights,
    ReputationRecord,
    SensingScores,
    distortion_rating,
    effort_rating,
    task_rating,
    update_bounds,
    update_reputation,
    value_rating,
)

ORACLE_ID = identity_handle(tag_from_label("oracle-network"))


class TaskKind(str, Enum):
    PROBLEM_SOLVING = "ProblemSolving"
    KNOWLEDGE_ACQUISITION = "KnowledgeAcquisition"


class TaskState(str, Enum):
    OPEN = "Open"
    BIDDING = "Bidding"
    IN_PROGRESS = "InProgress"
    UNDER_EVALUATION = "UnderEvaluation"
    SETTLED = "Settled"
    CANCELLED = "Cancelled"


class DepositState(str, Enum):
    LOCKED = "Locked"
    RELEASED = "Released"
    SLASHED = "Slashed"


class FunctionClass(str, Enum):
    CREATE_TASK = "CreateTask"
    SUBMIT_SOLUTION = "SubmitSolution"
    CALCULATE_NEW_REP = "CalculateNewRep"
    ROLLUP_COMMIT = "RollupCommit"
    ROLLUP_PROVE = "RollupProve"
    ROLLUP_EXECUTE = "RollupExecute"
    REGISTER = "Register"
    OTHER = "Other"


PROBLEM_SOLVING_COMPONENTS = ("completeness", "quality", "contextual")
SENSING_COMPONENTS = ("observed", "truth", "lower_bound", "upper_bound", "contextual")


def components_for(kind: TaskKind) -> tuple[str, ...]:
    return PROBLEM_SOLVING_COMPONENTS if kind is TaskKind.PROBLEM_SOLVING else SENSING_COMPONENTS


@dataclass
class Bid:
    cid: str
    submitter: str
    accepted: bool = False
    submission: str | None = None


@dataclass
class Task:
    cid: str
    requester: str
    amount: int
    kind: TaskKind
    alpha: float = 0.5
    bids: dict[str, Bid] = field(default_factory=dict)
    evaluators: list[str] = field(default_factory=list)
    evaluator_sets: list[list[str]] = field(default_factory=list)
    set_bids: list[str] = field(default_factory=list)
    state: TaskState = TaskState.OPEN

    def accepted_bids(self) -> list[Bid]:
        return [b for b in self.bids.values() if b.accepted]


@dataclass
class Deposit:
    owner: str
    task: str
    amount: int
    state: DepositState = DepositState.LOCKED


@dataclass(frozen=True)
class Settlement:
    worker: str
    bid: str
    task_rating: float
    record: ReputationRecord
    payout: int


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _require_amount(name: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise RangeViolation(f"{name} must be a non-negative integer amount")
    return value


class CrowdProtocol:
    def __init__(
        self,
        registrar: Registrar | None = None,
        *,
        weights: RatingWeights = RatingWeights(),
        r_init: float = 0.5,
        t_min: float = 0.5,
        worker_deposit_ratio: float = 0.1,
        oracle_id: str = ORACLE_ID,
    ):
        self.registrar = registrar if registrar is not None else Registrar()
        self.weights = weights
        # validates t_min >= r_init
        ReputationRecord(r_init, 0, r_init, t_min)
        self.r_init = r_init
        self.t_min = t_min
        self.worker_deposit_ratio = worker_deposit_ratio
        self.oracle_id = oracle_id
        self.tasks: dict[str, Task] = {}
        self.deposits: dict[str, Deposit] = {}
        self.total_deposited = 0
        self.payouts: list[list] = []  # [task, worker, amount]
        self.refunds: list[list] = []  # [task, requester, amount]
        self.bounds: AmountBounds | None = None
        self.reputation: dict[str, ReputationRecord] = {}
        self.rep_history: dict[str, list[float]] = {}
        # not part of the state root: a log of emitted transactions per function class
        self.events: list[tuple[FunctionClass, str]] = []

    # -- access helpers -------------------------------------------------

    def authorized(self, sender: str) -> bool:
        return sender == self.oracle_id or self.registrar.is_active(sender)

    def _require_role(self, caller: str, role: Role) -> None:
        if not self.registrar.check_access(caller, role):
            raise Unauthorized(f"{caller[:8]} lacks active {role.value} role")

    def _require_oracle(self, caller: str) -> None:
        if caller != self.oracle_id:
            raise Unauthorized("only the oracle principal may call this")

    def _task(self, task: str) -> Task:
        try:
            return self.tasks[task]
        except KeyError:
            raise UnknownTask(task) from None

    def _lock(self, key: str, owner: str, task: str, amount: int) -> None:
        self.deposits[key] = Deposit(owner, task, amount)
        self.total_deposited += amount

    def _finish(self, key: str, state: DepositState) -> None:
        dep = self.deposits[key]
        if dep.state is not DepositState.LOCKED:
            raise WrongState(f"deposit {key} already {dep.state.value}")
        dep.state = state

    def record_for(self, worker: str) -> ReputationRecord:
        return self.reputation.get(worker) or ReputationRecord(self.r_init, 0, self.r_init, self.t_min)

    # -- registrar passthrough -------------------------------------------

    def register(self, caller: str, dedup_tag: bytes | str, role: Role | str):
        ident = self.registrar.register(caller, dedup_tag, role)
        self.events.append((FunctionClass.REGISTER, caller))
        return ident

    def revoke(self, caller: str, identity: str) -> None:
        self.registrar.revoke(caller, identity)
        self.events.append((FunctionClass.REGISTER, caller))

    # -- task lifecycle ---------------------------------------------------

    def create_task(
        self,
        caller: str,
        task_cid: str,
        amount: int,
        kind: TaskKind | str,
        deposit: int,
        alpha: float = 0.5,
    ) -> str:
        self._require_role(caller, Role.REQUESTER)
        kind = TaskKind(kind)
        amount = _require_amount("amount", amount)
        deposit = _require_amount("deposit", deposit)
        if not 0.0 <= alpha <= 1.0:
            raise RangeViolation("alpha must lie in [0, 1]")
        if task_cid in self.tasks:
            raise DuplicateTask(task_cid)
        if deposit < amount:
            raise InsufficientDeposit(f"deposit {deposit} below reward {amount}")
        self.bounds = update_bounds(self.bounds, amount)
        self.tasks[task_cid] = Task(task_cid, caller, amount, kind, alpha)
        self._lock(f"{task_cid}/requester", caller, task_cid, deposit)
        self.events.append((FunctionClass.CREATE_TASK, caller))
        return task_cid

    def min_worker_deposit(self, task: str) -> int:
        return math.ceil(self._task(task).amount * self.worker_deposit_ratio)

    def place_bid(self, caller: str, task: str, bid_cid: str, deposit: int | None = None) -> None:
        self._require_role(caller, Role.WORKER)
        t = self._task(task)
        if t.state not in (TaskState.OPEN, TaskState.BIDDING):
            raise WrongState(f"task is {t.state.value}")
        if any(b.submitter == caller for b in t.bids.values()):
            raise DuplicateBid(f"{caller[:8]} already bid on this task")
        if bid_cid in t.bids:
            raise DuplicateBid(bid_cid)
        if caller in t.evaluators:
            raise ConflictOfInterest("evaluators cannot bid on the task they rate")
        minimum = self.min_worker_deposit(task)
        deposit = minimum if deposit is None else _require_amount("deposit", deposit)
        if deposit < minimum:
            raise InsufficientDeposit(f"worker deposit {deposit} below {minimum}")
        t.bids[bid_cid] = Bid(bid_cid, caller)
        t.state = TaskState.BIDDING
        self._lock(f"{task}/bid/{bid_cid}", caller, task, deposit)
        self.events.append((FunctionClass.OTHER, caller))

    def accept_bids(self, caller: str, task: str, bid_cids: Sequence[str]) -> None:
        t = self._task(task)
        if caller != t.requester or not self.registrar.check_access(caller, Role.REQUESTER):
            raise Unauthorized("only the task requester may accept bids")
        if t.state is TaskState.OPEN:
            raise UnknownBid("task has no bids")
        if t.state is not TaskState.BIDDING:
            raise WrongState(f"task is {t.state.value}")
        if not bid_cids:
            raise UnknownBid("no bid given")
        for cid in bid_cids:
            if cid not in t.bids:
                raise UnknownBid(cid)
        for cid in bid_cids:
            t.bids[cid].accepted = True
        t.state = TaskState.IN_PROGRESS
        self.events.append((FunctionClass.OTHER, caller))

    def accept_bid(self, caller: str, task: str, bid_cid: str) -> None:
        self.accept_bids(caller, task, [bid_cid])

    def submit_solution(self, caller: str, task: str, bid_cid: str, solution_cid: str) -> None:
        self._require_role(caller, Role.WORKER)
        t = self._task(task)
        bid = t.bids.get(bid_cid)
        if bid is None:
            raise UnknownBid(bid_cid)
        if bid.submitter != caller:
            raise NotAssignedWorker("bid belongs to another worker")
        if not bid.accepted:
            raise BidNotAccepted(bid_cid)
        if t.state is not TaskState.IN_PROGRESS or bid.submission is not None:
            raise WrongState(f"task is {t.state.value}")
        bid.submission = solution_cid
        if all(b.submission is not None for b in t.accepted_bids()):
            t.state = TaskState.UNDER_EVALUATION
        self.events.append((FunctionClass.SUBMIT_SOLUTION, caller))

    def register_evaluator(self, caller: str, task: str) -> None:
        self._require_role(caller, Role.EVALUATOR)
        t = self._task(task)
        if t.state not in (TaskState.OPEN, TaskState.BIDDING):
            raise WrongState(f"task is {t.state.value}")
        if caller == t.requester or any(b.submitter == caller for b in t.bids.values()):
            raise ConflictOfInterest("evaluator must be independent of the task")
        if caller in t.evaluators:
            raise AlreadyEnrolled(caller)
        t.evaluators.append(caller)
        self.events.append((FunctionClass.OTHER, caller))

    def cancel_task(self, caller: str, task: str) -> None:
        t = self._task(task)
        if caller != t.requester:
            raise Unauthorized("only the requester may cancel")
        if t.state not in (TaskState.OPEN, TaskState.BIDDING):
            raise WrongState(f"task is {t.state.value}")
        for key, dep in self.deposits.items():
            if dep.task == task and dep.state is DepositState.LOCKED:
                dep.state = DepositState.RELEASED
        t.state = TaskState.CANCELLED
        self.events.append((FunctionClass.OTHER, caller))

    def distribute_evaluators(self, caller: str, task: str, seed: bytes | str | int) -> list[list[str]]:
        self._require_oracle(caller)
        t = self._task(task)
        if t.state is not TaskState.UNDER_EVALUATION:
            raise WrongState(f"task is {t.state.value}")
        submitted = [b.cid for b in t.accepted_bids() if b.submission is not None]
        if not submitted or len(t.evaluators) < len(submitted):
            raise NotEnoughEvaluators(f"{len(t.evaluators)} evaluators for {len(submitted)} submissions")
        sets = assignment.partition(t.evaluators, len(submitted), assignment.seed_bytes(seed), task.encode())
        t.evaluator_sets = sets
        t.set_bids = submitted
        self.events.append((FunctionClass.OTHER, caller))
        return [list(s) for s in sets]

    def evaluator_set_for(self, task: str, bid_cid: str) -> list[str]:
        t = self._task(task)
        try:
            return t.evaluator_sets[t.set_bids.index(bid_cid)]
        except ValueError:
            return []

    def compute_task_rating(self, task: Task, components: Mapping[str, float]) -> float:
        assert self.bounds is not None
        v = value_rating(task.amount, self.bounds)
        if task.kind is TaskKind.PROBLEM_SOLVING:
            second = effort_rating(
                ProblemSolvingScores(
                    components["completeness"], components["quality"], components["contextual"],
                    task.alpha, 1.0 - task.alpha,
                )
            )
        else:
            second = distortion_rating(
                SensingScores(
                    components["observed"], components["truth"],
                    components["lower_bound"], components["upper_bound"], components["contextual"],
                )
            )
        return task_rating(v, second, components["contextual"], self.weights)

    def settle(self, caller: str, task: str, aggregated: Mapping[str, Mapping[str, float]]) -> list[Settlement]:
        self._require_oracle(caller)
        t = self._task(task)
        if t.state is not TaskState.UNDER_EVALUATION:
            raise WrongState(f"task is {t.state.value}")
        covered = [b for b in t.accepted_bids() if b.submission is not None]
        needed = components_for(t.kind)
        for b in covered:
            comp = aggregated.get(b.cid)
            if comp is None or any(k not in comp for k in needed):
                raise MissingRatings(b.cid)
        ratings = {b.cid: self.compute_task_rating(t, aggregated[b.cid]) for b in covered}

        share = t.amount // len(covered)
        results = []
        paid = 0
        for b in covered:
            t_r = ratings[b.cid]
            record = update_reputation(self.record_for(b.submitter), t_r)
            self.reputation[b.submitter] = record
            self.rep_history.setdefault(b.submitter, []).append(record.score)
            key = f"{task}/bid/{b.cid}"
            if t_r >= self.t_min:
                payout = share
                self._finish(key, DepositState.RELEASED)
            else:
                payout = 0
                self._finish(key, DepositState.SLASHED)
            if payout:
                self.payouts.append([task, b.submitter, payout])
            paid += payout
            results.append(Settlement(b.submitter, b.cid, t_r, record, payout))
            self.events.append((FunctionClass.CALCULATE_NEW_REP, caller))
        for b in t.bids.values():
            if not b.accepted:
                self._finish(f"{task}/bid/{b.cid}", DepositState.RELEASED)
        req_key = f"{task}/requester"
        self._finish(req_key, DepositState.RELEASED)
        refund = self.deposits[req_key].amount - paid
        if refund:
            self.refunds.append([task, t.requester, refund])
        t.state = TaskState.SETTLED
        return results

    # -- dispatch ----------------------------------------------------------

    ACTIONS: dict[str, FunctionClass] = {
        "register": FunctionClass.REGISTER,
        "revoke": FunctionClass.REGISTER,
        "create_task": FunctionClass.CREATE_TASK,
        "place_bid": FunctionClass.OTHER,
        "accept_bid": FunctionClass.OTHER,
        "accept_bids": FunctionClass.OTHER,
        "submit_solution": FunctionClass.SUBMIT_SOLUTION,
        "register_evaluator": FunctionClass.OTHER,
        "cancel_task": FunctionClass.OTHER,
        "distribute_evaluators": FunctionClass.OTHER,
        "settle": FunctionClass.CALCULATE_NEW_REP,
    }

    def apply(self, action: str, caller: str, args: Mapping[str, Any]) -> Any:
        if action not in self.ACTIONS:
            raise ValueError(f"unknown action {action!r}")
        return getattr(self, action)(caller, **args)

    # -- queries & serialization ------------------------------------------

    def view_task(self, task: str, viewer: str | None = None) -> dict:
        t = self._task(task)
        view = _task_to_dict(t)
        if viewer is not None and self.registrar.check_access(viewer, Role.WORKER):
            view.pop("evaluators")
            view.pop("evaluator_sets")
            view.pop("set_bids")
        return view

    def escrow_totals(self) -> dict[str, int]:
        totals = {s.value: 0 for s in DepositState}
        for dep in self.deposits.values():
            totals[dep.state.value] += dep.amount
        return totals

    def to_dict(self) -> dict:
        return {
            "registrar": self.registrar.to_dict(),
            "config": {
                "weights": [self.weights.w_value, self.weights.w_second, self.weights.w_contextual],
                "r_init": self.r_init,
                "t_min": self.t_min,
                "worker_deposit_ratio": self.worker_deposit_ratio,
                "oracle_id": self.oracle_id,
            },
            "tasks": {k: _task_to_dict(t) for k, t in self.tasks.items()},
            "deposits": {
                k: [d.owner, d.task, d.amount, d.state.value] for k, d in self.deposits.items()
            },
            "total_deposited": self.total_deposited,
            "payouts": self.payouts,
            "refunds": self.refunds,
            "bounds": None if self.bounds is None else [self.bounds.a_min, self.bounds.a_max],
            "reputation": {
                k: [r.score, r.submissions, r.r_init, r.t_min] for k, r in self.reputation.items()
            },
            "rep_history": self.rep_history,
        }

    def serialize(self) -> str:
        return canonical_json(self.to_dict())

    def state_root(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> CrowdProtocol:
        cfg = data["config"]
        p = cls(
            Registrar.from_dict(data["registrar"]),
            weights=RatingWeights(*cfg["weights"]),
            r_init=cfg["r_init"],
            t_min=cfg["t_min"],
            worker_deposit_ratio=cfg["worker_deposit_ratio"],
            oracle_id=cfg["oracle_id"],
        )
        p.tasks = {k: _task_from_dict(v) for k, v in data["tasks"].items()}
        p.deposits = {k: Deposit(o, t, a, DepositState(s)) for k, (o, t, a, s) in data["deposits"].items()}
        p.total_deposited = data["total_deposited"]
        p.payouts = [list(x) for x in data["payouts"]]
        p.refunds = [list(x) for x in data["refunds"]]
        p.bounds = None if data["bounds"] is None else AmountBounds(*data["bounds"])
        p.reputation = {k: ReputationRecord(s, n, r, t) for k, (s, n, r, t) in data["reputation"].items()}
        p.rep_history = {k: list(v) for k, v in data["rep_history"].items()}
        return p

    @classmethod
    def deserialize(cls, text: str) -> CrowdProtocol:
        return cls.from_dict(json.loads(text))


def _task_to_dict(t: Task) -> dict:
    return {
        "cid": t.cid,
        "requester": t.requester,
        "amount": t.amount,
        "kind": t.kind.value,
        "alpha": t.alpha,
        "bids": [[b.cid, b.submitter, b.accepted, b.submission] for b in t.bids.values()],
        "evaluators": list(t.evaluators),
        "evaluator_sets": [list(s) for s in t.evaluator_sets],
        "set_bids": list(t.set_bids),
        "state": t.state.value,
    }


def _task_from_dict(d: dict) -> Task:
    return Task(
        cid=d["cid"],
        requester=d["requester"],
        amount=d["amount"],
        kind=TaskKind(d["kind"]),
        alpha=d["alpha"],
        bids={c: Bid(c, s, a, sub) for c, s, a, sub in d["bids"]},
        evaluators=list(d["evaluators"]),
        evaluator_sets=[list(s) for s in d["evaluator_sets"]],
        set_bids=list(d["set_bids"]),
        state=TaskState(d["state"]),
    )
