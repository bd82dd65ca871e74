"""Reputation-based crowdsourcing over a simulated L1 chain and zkRollup."""

from .content_store import ContentStore, cid_of
from .gas import GasSchedule, StageGas
from .ledger import L1Chain, L1Transaction
from .oracle import AggregationPolicy, OracleNetwork, RatingBundle
from .protocol import CrowdProtocol, FunctionClass, TaskKind, TaskState
from .registrar import Registrar, Role, tag_from_label
from .rollup import Batch, DirectGateway, Rollup

__all__ = [
    "AggregationPolicy",
    "Batch",
    "ContentStore",
    "CrowdProtocol",
    "DirectGateway",
    "FunctionClass",
    "GasSchedule",
    "L1Chain",
    "L1Transaction",
    "OracleNetwork",
    "RatingBundle",
    "Registrar",
    "Role",
    "Rollup",
    "StageGas",
    "TaskKind",
    "TaskState",
    "cid_of",
    "tag_from_label",
]

__version__ = "0.1.0"
