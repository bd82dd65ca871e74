"""Content-addressed blob store: the off-chain home of task specs, bids,
solutions and rating bundles."""
from __future__ import annotations

import hashlib
import os
import re
import threading
from pathlib import Path

from .errors import CidCollision, EmptyContent, NotFound

Cid = str

_CID_RE = re.compile(r"[0-9a-f]{64}")


def cid_of(content: bytes) -> Cid:
    return hashlib.sha256(content).hexdigest()


def is_cid(value: object) -> bool:
    return isinstance(value, str) and _CID_RE.fullmatch(value) is not None


class ContentStore:
    """In-memory store, optionally mirrored to ``root`` as one file per CID."""

    def __init__(self, root: str | os.PathLike | None = None):
        self._blobs: dict[Cid, bytes] = {}
        self._lock = threading.Lock()
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    def put(self, content: bytes) -> Cid:
        content = bytes(content)
        if not content:
            raise EmptyContent("cannot store empty content")
        cid = cid_of(content)
        with self._lock:
            existing = self._blobs.get(cid)
            if existing is None and self.root is not None:
                existing = self._read_file(cid)
            if existing is not None:
                if existing != content:
                    raise CidCollision(cid)
                self._blobs[cid] = existing
                return cid
            self._blobs[cid] = content
            if self.root is not None:
                tmp = self.root / f".{cid}.tmp"
                tmp.write_bytes(content)
                os.replace(tmp, self.root / cid)
        return cid

    def get(self, cid: Cid) -> bytes:
        with self._lock:
            blob = self._blobs.get(cid)
            if blob is None and self.root is not None and is_cid(cid):
                blob = self._read_file(cid)
                if blob is not None:
                    self._blobs[cid] = blob
        if blob is None:
            raise NotFound(cid)
        return blob

    def __contains__(self, cid: object) -> bool:
        try:
            self.get(cid)  # type: ignore[arg-type]
        except NotFound:
            return False
        return True

    def __len__(self) -> int:
        return len(self._blobs)

    def _read_file(self, cid: Cid) -> bytes | None:
        path = self.root / cid  # type: ignore[operator]
        if not path.is_file():
            return None
        return path.read_bytes()
