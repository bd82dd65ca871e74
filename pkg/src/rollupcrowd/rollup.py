"""zkRollup aggregator model.

Transactions are executed optimistically on a staging copy of the protocol
state, sealed into batches of at most 20, and posted to L1 as three
transactions (commit, prove, execute). The "validity proof" is a hash
commitment over the batch; verification recomputes it and replays the batch
from the archived pre-state.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from .content_store import cid_of, is_cid
from .errors import EmptyQueue, ExecutionFailed, ProtocolError, Unauthorized
from .gas import GasSchedule, StageGas
from .ledger import Block, L1Chain, L1Transaction, tx_id
from .protocol import CrowdProtocol, FunctionClass, canonical_json

DEFAULT_BATCH_TIMER = 5.0


class L2Status(str, Enum):
    PENDING = "Pending"
    BATCHED = "Batched"
    FINALIZED = "Finalized"


@dataclass
class L2Transaction:
    function_class: FunctionClass
    sender: str
    action: str
    args: dict[str, Any]
    nonce: int
    submitted_at: float = 0.0
    status: L2Status = field(default=L2Status.PENDING, compare=False)
    finalized_at: float | None = field(default=None, compare=False)

    def wire(self) -> list:
        return [self.function_class.value, self.sender, self.action, self.args, self.nonce, self.submitted_at]

    @property
    def payload_digest(self) -> str:
        return cid_of(canonical_json([self.action, self.args]).encode())

    @property
    def id(self) -> str:
        return hashlib.sha256(canonical_json(self.wire()).encode()).hexdigest()

    @classmethod
    def from_wire(cls, w: list) -> L2Transaction:
        cls_name, sender, action, args, nonce, submitted_at = w
        return cls(FunctionClass(cls_name), sender, action, args, nonce, submitted_at)


def proof_digest(index: int, pre_root: str, post_root: str, tx_ids: list[str]) -> str:
    return hashlib.sha256(canonical_json([index, pre_root, post_root, tx_ids]).encode()).hexdigest()


@dataclass(frozen=True)
class MockProof:
    digest: str


@dataclass(frozen=True)
class Batch:
    index: int
    txs: tuple[L2Transaction, ...]
    pre_state_root: str
    post_state_root: str
    proof: MockProof

    def to_bytes(self) -> bytes:
        return canonical_json(
            {
                "index": self.index,
                "pre": self.pre_state_root,
                "post": self.post_state_root,
                "proof": self.proof.digest,
                "txs": [t.wire() for t in self.txs],
            }
        ).encode()

    @classmethod
    def from_bytes(cls, raw: bytes) -> Batch:
        """Strict decode: anything that does not re-encode to the same bytes is rejected."""
        data = json.loads(raw.decode("utf-8"))
        if set(data) != {"index", "pre", "post", "proof", "txs"}:
            raise ValueError("unexpected batch fields")
        batch = cls(
            data["index"],
            tuple(L2Transaction.from_wire(w) for w in data["txs"]),
            data["pre"],
            data["post"],
            MockProof(data["proof"]),
        )
        if batch.to_bytes() != raw:
            raise ValueError("non-canonical batch encoding")
        return batch


@dataclass
class BatchPosting:
    batch: Batch
    gas: StageGas
    commit_tx: str
    prove_tx: str
    execute_tx: str
    sealed_at: float
    finalized_at: float | None = None

    @property
    def l1_refs(self) -> tuple[str, str, str]:
        return (self.commit_tx, self.prove_tx, self.execute_tx)


class Rollup:
    def __init__(
        self,
        protocol: CrowdProtocol,
        chain: L1Chain,
        schedule: GasSchedule | None = None,
        batch_timer: float = DEFAULT_BATCH_TIMER,
    ):
        self.schedule = schedule or chain.schedule
        self.capacity = self.schedule.batch_capacity
        self.chain = chain
        self.batch_timer = batch_timer
        committed = protocol.serialize()
        self.state = CrowdProtocol.deserialize(committed)  # staging copy
        self.committed_root = protocol.state_root()
        self.archive: dict[str, str] = {self.committed_root: committed}
        self.pending: list[L2Transaction] = []
        self.postings: list[BatchPosting] = []
        self.finalized: list[L2Transaction] = []
        self._nonce = 0
        self._lock = threading.RLock()
        self._last_seal = chain.now
        chain.listeners.append(self.on_block)

    @property
    def batches(self) -> list[Batch]:
        return [p.batch for p in self.postings]

    def submit(self, sender: str, action: str, args: Mapping[str, Any] | None = None, at: float | None = None) -> Any:
        """Wrap a protocol call in an L2 transaction and enqueue it."""
        if action not in CrowdProtocol.ACTIONS:
            raise ValueError(f"unknown action {action!r}")
        with self._lock:
            tx = L2Transaction(
                CrowdProtocol.ACTIONS[action],
                sender,
                action,
                dict(args or {}),
                self._nonce,
                self.chain.now if at is None else at,
            )
            result = self.enqueue(tx)
            return result

    def enqueue(self, tx: L2Transaction) -> Any:
        with self._lock:
            if not self.state.authorized(tx.sender):
                raise Unauthorized(f"{tx.sender[:8]} is not an active principal")
            if len(self.pending) >= self.capacity:
                self.seal_batch(at=tx.submitted_at)
            try:
                result = self.state.apply(tx.action, tx.sender, tx.args)
            except ProtocolError as exc:
                raise ExecutionFailed(exc) from exc
            self._nonce = max(self._nonce, tx.nonce) + 1
            tx.status = L2Status.PENDING
            self.pending.append(tx)
            return result

    def seal_batch(self, at: float | None = None) -> Batch:
        with self._lock:
            if not self.pending:
                raise EmptyQueue("no pending L2 transactions")
            at = self.chain.now if at is None else at
            txs = tuple(self.pending[: self.capacity])
            del self.pending[: len(txs)]
            pre_root = self.committed_root
            post_state = _replay(self.archive[pre_root], txs)
            post_root = post_state.state_root()
            index = len(self.postings)
            proof = MockProof(proof_digest(index, pre_root, post_root, [t.id for t in txs]))
            batch = Batch(index, txs, pre_root, post_root, proof)
            self.archive[post_root] = post_state.serialize()
            self.committed_root = post_root

            stages = self.schedule.batch_stages(len(txs))
            # proofs/executions queued alongside an unposted batch are aggregated
            aggregated = any(self.chain.txs[p.prove_tx].included_at is None for p in self.postings)
            marginal = self.schedule.aggregated_stage_marginal
            gas = StageGas(
                stages.commit,
                marginal if aggregated else stages.verify,
                marginal if aggregated else stages.execute,
            )
            refs = []
            for stage, cls, g in (
                ("commit", FunctionClass.ROLLUP_COMMIT, gas.commit),
                ("prove", FunctionClass.ROLLUP_PROVE, gas.verify),
                ("execute", FunctionClass.ROLLUP_EXECUTE, gas.execute),
            ):
                l1 = L1Transaction(tx_id(stage, index, proof.digest), cls, proof.digest, submitted_at=at, fixed_gas=g)
                refs.append(self.chain.submit_tx(l1))
            for t in txs:
                t.status = L2Status.BATCHED
            self.postings.append(BatchPosting(batch, gas, *refs, sealed_at=at))
            self._last_seal = at
            return batch

    def flush(self, at: float | None = None) -> list[Batch]:
        out = []
        while self.pending:
            out.append(self.seal_batch(at))
        return out

    def tick(self, now: float) -> list[Batch]:
        """Timer-driven sealing: seal everything once the oldest pending tx has waited ``batch_timer``."""
        if self.pending and now - self.pending[0].submitted_at >= self.batch_timer:
            return self.flush(now)
        return []

    def run_until(self, t: float) -> None:
        """Advance L1 block production to ``t``, ticking the batch timer before each block."""
        while self.chain.next_block_time <= t:
            self.tick(self.chain.next_block_time)
            self.chain.produce_block()

    def drain(self) -> None:
        """Seal everything and produce blocks until every L2 transaction is final."""
        self.flush(self.chain.now)
        while any(p.finalized_at is None for p in self.postings):
            self.chain.produce_block()

    def on_block(self, block: Block) -> None:
        included = set(block.transactions)
        for p in self.postings:
            if p.finalized_at is None and p.execute_tx in included:
                p.finalized_at = block.timestamp
                for t in p.batch.txs:
                    t.status = L2Status.FINALIZED
                    t.finalized_at = block.timestamp
                    self.finalized.append(t)

    def verify_batch(self, batch: Batch | bytes) -> bool:
        if isinstance(batch, (bytes, bytearray)):
            try:
                batch = Batch.from_bytes(bytes(batch))
            except (ValueError, TypeError, KeyError, UnicodeDecodeError):
                return False
        try:
            if not (is_cid(batch.pre_state_root) and is_cid(batch.post_state_root)):
                return False
            if not 1 <= len(batch.txs) <= self.capacity:
                return False
            expected = proof_digest(batch.index, batch.pre_state_root, batch.post_state_root, [t.id for t in batch.txs])
            if expected != batch.proof.digest:
                return False
            pre = self.archive.get(batch.pre_state_root)
            if pre is None:
                return False
            return _replay(pre, batch.txs).state_root() == batch.post_state_root
        except (ProtocolError, ValueError, TypeError, KeyError):
            return False

    def export_batches_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["batch_index", "n_txs", "commit_gas", "verify_gas", "execute_gas", "total_gas"])
        for p in self.postings:
            w.writerow([p.batch.index, len(p.batch.txs), p.gas.commit, p.gas.verify, p.gas.execute, p.gas.total])
        return buf.getvalue()

    def gas_totals(self) -> StageGas:
        return StageGas(
            sum(p.gas.commit for p in self.postings),
            sum(p.gas.verify for p in self.postings),
            sum(p.gas.execute for p in self.postings),
        )


def _replay(serialized_state: str, txs) -> CrowdProtocol:
    state = CrowdProtocol.deserialize(serialized_state)
    for t in txs:
        if not state.authorized(t.sender):
            raise Unauthorized(t.sender)
        if CrowdProtocol.ACTIONS.get(t.action) is not t.function_class:
            raise ValueError("function class does not match action")
        state.apply(t.action, t.sender, t.args)
    return state


class DirectGateway:
    """Applies protocol calls immediately. With a chain attached, each call is
    also posted as an individual L1 transaction (single-layer deployment)."""

    def __init__(self, protocol: CrowdProtocol, chain: L1Chain | None = None):
        self.state = protocol
        self.chain = chain
        self.l1_txs: list[L1Transaction] = []
        self._nonce = 0

    def submit(self, sender: str, action: str, args: Mapping[str, Any] | None = None, at: float | None = None) -> Any:
        args = dict(args or {})
        if not self.state.authorized(sender):
            raise Unauthorized(f"{sender[:8]} is not an active principal")
        result = self.state.apply(action, sender, args)
        if self.chain is not None:
            digest = cid_of(canonical_json([action, args]).encode())
            tx = L1Transaction(
                tx_id("l1", sender, action, self._nonce, digest),
                CrowdProtocol.ACTIONS[action],
                digest,
                submitted_at=self.chain.now if at is None else at,
            )
            self.chain.submit_tx(tx)
            self.l1_txs.append(tx)
        self._nonce += 1
        return result

    def run_until(self, t: float) -> None:
        if self.chain is not None:
            self.chain.run_until(t)

    def drain(self) -> None:
        if self.chain is not None:
            while self.chain.pending():
                self.chain.produce_block()
