"""Simulated Layer-1 chain: one honest PoA sequencer producing a block every
``block_time`` simulated seconds."""
from __future__ import annotations

import csv
import hashlib
import io
import threading
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from typing import Callable

from .content_store import is_cid
from .errors import MalformedTx
from .gas import GasSchedule
from .protocol import FunctionClass, canonical_json

ZERO_HASH = "0" * 64


def tx_id(*parts: object) -> str:
    return hashlib.sha256(canonical_json([str(p) for p in parts]).encode()).hexdigest()


@dataclass
class L1Transaction:
    id: str
    function_class: FunctionClass
    payload_digest: str
    submitted_at: float = 0.0
    fixed_gas: int | None = None  # preset by the rollup for its postings
    gas_used: int = 0
    included_at: float | None = None
    block: int | None = None


@dataclass(frozen=True)
class Block:
    height: int
    parent: str
    timestamp: float
    transactions: tuple[str, ...]
    gas_total: int
    hash: str = field(default="", compare=False)

    def compute_hash(self) -> str:
        return hashlib.sha256(
            canonical_json([self.height, self.parent, self.timestamp, list(self.transactions), self.gas_total]).encode()
        ).hexdigest()


class L1Chain:
    def __init__(
        self,
        schedule: GasSchedule | None = None,
        block_time: float = 3.0,
        genesis_time: float = 0.0,
        gas_limit: int | None = None,
    ):
        if block_time <= 0:
            raise ValueError("block_time must be positive")
        self.schedule = schedule or GasSchedule.load()
        self.block_time = block_time
        self.genesis_time = genesis_time
        self.gas_limit = gas_limit
        genesis = Block(0, ZERO_HASH, genesis_time, (), 0)
        self.blocks: list[Block] = [replace(genesis, hash=genesis.compute_hash())]
        self.txs: dict[str, L1Transaction] = {}
        self._queue: deque[L1Transaction] = deque()
        self._lock = threading.Lock()
        self.listeners: list[Callable[[Block], None]] = []

    @property
    def now(self) -> float:
        return self.blocks[-1].timestamp

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    @property
    def next_block_time(self) -> float:
        return self.genesis_time + len(self.blocks) * self.block_time

    def submit_tx(self, tx: L1Transaction) -> str:
        if not (is_cid(tx.id) and tx.id != ZERO_HASH):
            raise MalformedTx("transaction id must be a non-zero 32-byte hex hash")
        if not isinstance(tx.function_class, FunctionClass):
            raise MalformedTx(f"unknown function class {tx.function_class!r}")
        if not is_cid(tx.payload_digest):
            raise MalformedTx("payload digest must be a CID")
        if tx.fixed_gas is not None and tx.fixed_gas <= 0:
            raise MalformedTx("fixed gas must be positive")
        with self._lock:
            if tx.id in self.txs:
                raise MalformedTx(f"duplicate transaction {tx.id}")
            self.txs[tx.id] = tx
            self._queue.append(tx)
        return tx.id

    def pending(self) -> int:
        return len(self._queue)

    def produce_block(self) -> Block:
        ts = self.next_block_time
        included: list[L1Transaction] = []
        per_class: Counter[FunctionClass] = Counter()
        gas_total = 0
        with self._lock:
            while self._queue and self._queue[0].submitted_at <= ts:
                tx = self._queue[0]
                if tx.fixed_gas is not None:
                    gas = tx.fixed_gas
                else:
                    gas = self.schedule.lookup_gas(tx.function_class, per_class[tx.function_class] + 1)
                if self.gas_limit is not None and included and gas_total + gas > self.gas_limit:
                    break
                self._queue.popleft()
                per_class[tx.function_class] += 1
                tx.gas_used = gas
                tx.included_at = ts
                tx.block = len(self.blocks)
                gas_total += gas
                included.append(tx)
            parent = self.head
            block = Block(len(self.blocks), parent.hash, ts, tuple(t.id for t in included), gas_total)
            block = replace(block, hash=block.compute_hash())
            self.blocks.append(block)
        for listener in self.listeners:
            listener(block)
        return block

    def run_until(self, t: float) -> list[Block]:
        out = []
        while self.next_block_time <= t:
            out.append(self.produce_block())
        return out

    def verify_chain(self) -> bool:
        for prev, blk in zip(self.blocks, self.blocks[1:]):
            if blk.parent != prev.hash or blk.compute_hash() != blk.hash:
                return False
            if blk.height != prev.height + 1 or blk.timestamp != self.genesis_time + blk.height * self.block_time:
                return False
            if blk.gas_total != sum(self.txs[t].gas_used for t in blk.transactions):
                return False
        return True

    def export_blocks_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["height", "timestamp", "tx_count", "gas_total"])
        for b in self.blocks:
            w.writerow([b.height, b.timestamp, len(b.transactions), b.gas_total])
        return buf.getvalue()
