"""Wiring for a simulated deployment: named population, protocol, ledgers
and oracle, driven through either the rollup or direct calls."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from ..content_store import ContentStore
from ..errors import ExecutionFailed
from ..gas import GasSchedule
from ..ledger import L1Chain
from ..oracle import AggregationPolicy, OracleNetwork
from ..protocol import CrowdProtocol, TaskKind
from ..registrar import Registrar, Role, tag_from_label
from ..reputation import RatingWeights
from ..rollup import DirectGateway, Rollup

ROLE_PREFIX = {"requesters": ("r", Role.REQUESTER), "workers": ("w", Role.WORKER), "evaluators": ("e", Role.EVALUATOR)}
LAYERS = ("l2", "l1", "direct")

DEFAULT_PROFILE = {"completeness": 0.9, "quality": 0.9, "contextual": 0.9, "observed": None}


@dataclass
class World:
    protocol: CrowdProtocol
    names: dict[str, str]
    layer: str = "l2"
    block_time: float = 3.0
    schedule: GasSchedule = field(default_factory=GasSchedule.load)
    batch_timer: float = 5.0
    gas_limit: int | None = None
    profiles: dict[str, dict] = field(default_factory=dict)
    adversarial: set[str] = field(default_factory=set)
    sensing: dict[str, dict] = field(default_factory=dict)  # task cid -> truth/bounds

    def __post_init__(self):
        if self.layer not in LAYERS:
            raise ValueError(f"layer must be one of {LAYERS}")
        self.store = ContentStore()
        self.chain = L1Chain(self.schedule, self.block_time, gas_limit=self.gas_limit)
        if self.layer == "l2":
            self.gateway = Rollup(self.protocol, self.chain, self.schedule, self.batch_timer)
        else:
            # direct mode keeps the chain idle; l1 mode posts every call
            self.gateway = DirectGateway(self.protocol, self.chain if self.layer == "l1" else None)
        self.oracle = OracleNetwork(self.gateway, self.store)
        self.ids_to_names = {v: k for k, v in self.names.items()}
        self.task_names: dict[str, str] = {}

    @classmethod
    def build(
        cls,
        population: Mapping[str, int],
        layer: str = "l2",
        *,
        weights: RatingWeights = RatingWeights(),
        t_min: float = 0.5,
        r_init: float = 0.5,
        **kwargs,
    ) -> World:
        protocol = CrowdProtocol(Registrar(), weights=weights, t_min=t_min, r_init=r_init)
        names = populate(protocol, population)
        return cls(protocol, names, layer, **kwargs)

    @property
    def state(self) -> CrowdProtocol:
        return self.gateway.state

    @property
    def admin(self) -> str:
        return self.state.registrar.admin_id

    def id(self, name: str) -> str:
        return self.names[name]

    def cid(self, text: str) -> str:
        return self.store.put(text.encode())

    def call(self, who: str, action: str, at: float | None = None, **args: Any) -> Any:
        sender = self.names.get(who, who)
        try:
            return self.gateway.submit(sender, action, args, at=at)
        except ExecutionFailed as exc:
            # the rollup dropped the tx; surface the protocol's own error
            raise exc.cause from None

    def advance(self, t: float) -> None:
        self.gateway.run_until(t)

    def finish(self) -> None:
        self.gateway.drain()

    def agent(self, evaluator: str, task: str, bid_cid: str, state: CrowdProtocol) -> dict[str, float]:
        """Deterministic evaluator behaviour: honest evaluators report the
        worker's profile; adversarial ones report the worst possible scores."""
        t = state.tasks[task]
        worker = self.ids_to_names.get(t.bids[bid_cid].submitter, "")
        profile = {**DEFAULT_PROFILE, **self.profiles.get(worker, {})}
        bad = self.ids_to_names.get(evaluator) in self.adversarial
        if t.kind is TaskKind.PROBLEM_SOLVING:
            if bad:
                return {"completeness": 0.0, "quality": 0.0, "contextual": 0.0}
            return {k: float(profile[k]) for k in ("completeness", "quality", "contextual")}
        sense = self.sensing.get(task, {"truth": 0.5, "lower_bound": 0.0, "upper_bound": 1.0})
        observed = profile["observed"] if profile["observed"] is not None else sense["truth"]
        if bad:
            observed = sense["lower_bound"] if sense["truth"] - sense["lower_bound"] > sense["upper_bound"] - sense["truth"] else sense["upper_bound"]
        return {
            "observed": float(observed),
            "truth": float(sense["truth"]),
            "lower_bound": float(sense["lower_bound"]),
            "upper_bound": float(sense["upper_bound"]),
            "contextual": 0.0 if bad else float(profile["contextual"]),
        }

    def evaluate(self, task: str, seed: int | str, policy: AggregationPolicy = AggregationPolicy(), at: float | None = None):
        return self.oracle.run_evaluation_round(task, seed, self.agent, policy, at=at)


def populate(protocol: CrowdProtocol, population: Mapping[str, int], label: str = "") -> dict[str, str]:
    """Register ``r0.., w0.., e0..`` identities at genesis; returns name -> handle."""
    names = {}
    admin = protocol.registrar.admin_id
    for key, (prefix, role) in ROLE_PREFIX.items():
        for i in range(int(population.get(key, 0))):
            name = f"{prefix}{i}"
            ident = protocol.registrar.register(admin, tag_from_label(f"{label}person/{name}"), role)
            names[name] = ident.id
    return names
