"""Seeded evaluator shuffling and set assignment."""
from __future__ import annotations

import hashlib
from typing import Sequence, TypeVar

T = TypeVar("T")


def seed_bytes(seed: int | bytes | str) -> bytes:
    """Normalise a seed to 32 bytes. 64-char hex strings and 32-byte values
    are used as-is; integers and other strings are hashed."""
    if isinstance(seed, int):
        return hashlib.sha256(b"rollupcrowd/seed/" + seed.to_bytes(8, "big", signed=True)).digest()
    if isinstance(seed, str):
        try:
            raw = bytes.fromhex(seed)
        except ValueError:
            raw = seed.encode()
    else:
        raw = bytes(seed)
    if len(raw) != 32:
        return hashlib.sha256(raw).digest()
    return raw


def prf(seed: bytes, salt: bytes, index: int) -> int:
    """Counter-mode PRF: H(seed || salt || index) as a 256-bit integer."""
    return int.from_bytes(hashlib.sha256(seed + salt + index.to_bytes(8, "big")).digest(), "big")


def shuffle(items: Sequence[T], seed: bytes, salt: bytes = b"") -> list[T]:
    out = list(items)
    n = len(out)
    for i in range(n):
        j = i + prf(seed, salt, i) % (n - i)
        out[i], out[j] = out[j], out[i]
    return out


def partition(items: Sequence[T], num_sets: int, seed: bytes, salt: bytes = b"") -> list[list[T]]:
    """Shuffle, then deal item ``i`` into set ``i mod num_sets``."""
    if num_sets < 1:
        raise ValueError("num_sets must be positive")
    sets: list[list[T]] = [[] for _ in range(num_sets)]
    for i, item in enumerate(shuffle(items, seed, salt)):
        sets[i % num_sets].append(item)
    return sets
