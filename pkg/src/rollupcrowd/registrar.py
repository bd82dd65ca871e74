"""Identity issuance, role-based access control and deduplication."""
from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .errors import AlreadyRevoked, DuplicateTag, Unauthorized, UnknownIdentity


class Role(str, Enum):
    ADMIN = "Admin"
    REQUESTER = "Requester"
    WORKER = "Worker"
    EVALUATOR = "Evaluator"


class Status(str, Enum):
    ACTIVE = "Active"
    REVOKED = "Revoked"


@dataclass(frozen=True)
class Identity:
    id: str  # 32-byte handle as lowercase hex
    role: Role
    dedup_tag: str
    status: Status = Status.ACTIVE


def tag_from_label(label: str) -> bytes:
    """Derive a 32-byte dedup commitment from a human label (test and scenario helper)."""
    return hashlib.sha256(b"rollupcrowd/dedup/" + label.encode()).digest()


def _normalize_tag(tag: bytes | str) -> str:
    raw = bytes.fromhex(tag) if isinstance(tag, str) else bytes(tag)
    if len(raw) != 32:
        raise ValueError("dedup_tag must be 32 bytes")
    return raw.hex()


def identity_handle(dedup_tag: bytes | str) -> str:
    return hashlib.sha256(b"rollupcrowd/identity/" + bytes.fromhex(_normalize_tag(dedup_tag))).hexdigest()


ADMIN_TAG = tag_from_label("registrar-admin")


class Registrar:
    """Single-admin registrar. Dedup tags are remembered forever, so a revoked
    identity cannot come back under a fresh handle."""

    def __init__(self, admin_tag: bytes = ADMIN_TAG):
        self._lock = threading.Lock()
        self._identities: dict[str, Identity] = {}
        self._tags: set[str] = set()
        admin = Identity(identity_handle(admin_tag), Role.ADMIN, _normalize_tag(admin_tag))
        self._identities[admin.id] = admin
        self._tags.add(admin.dedup_tag)
        self.admin_id = admin.id

    def register(self, caller: str, dedup_tag: bytes | str, role: Role | str) -> Identity:
        role = Role(role)
        tag = _normalize_tag(dedup_tag)
        with self._lock:
            if not self._is(caller, Role.ADMIN):
                raise Unauthorized(f"{caller[:8]} cannot register identities")
            if tag in self._tags:
                raise DuplicateTag(tag)
            ident = Identity(identity_handle(tag), role, tag)
            self._identities[ident.id] = ident
            self._tags.add(tag)
            return ident

    def revoke(self, caller: str, identity_id: str) -> None:
        with self._lock:
            if not self._is(caller, Role.ADMIN):
                raise Unauthorized(f"{caller[:8]} cannot revoke identities")
            ident = self._identities.get(identity_id)
            if ident is None:
                raise UnknownIdentity(identity_id)
            if ident.status is Status.REVOKED:
                raise AlreadyRevoked(identity_id)
            self._identities[identity_id] = Identity(ident.id, ident.role, ident.dedup_tag, Status.REVOKED)

    def check_access(self, identity_id: str, required_role: Role | str) -> bool:
        return self._is(identity_id, Role(required_role))

    def is_active(self, identity_id: str) -> bool:
        ident = self._identities.get(identity_id)
        return ident is not None and ident.status is Status.ACTIVE

    def get(self, identity_id: str) -> Identity:
        try:
            return self._identities[identity_id]
        except KeyError:
            raise UnknownIdentity(identity_id) from None

    def identities(self) -> Iterable[Identity]:
        return (self._identities[k] for k in sorted(self._identities))

    def _is(self, identity_id: str, role: Role) -> bool:
        ident = self._identities.get(identity_id)
        return ident is not None and ident.status is Status.ACTIVE and ident.role is role

    def export_roster(self) -> str:
        """JSON lines, one ``{id_hex, role, status}`` object per identity."""
        lines = [
            json.dumps({"id_hex": i.id, "role": i.role.value, "status": i.status.value}, sort_keys=True)
            for i in self.identities()
        ]
        return "".join(line + "\n" for line in lines)

    def to_dict(self) -> dict:
        return {
            "admin": self.admin_id,
            "identities": [
                [i.id, i.role.value, i.dedup_tag, i.status.value] for i in self.identities()
            ],
            "tags": sorted(self._tags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Registrar:
        reg = cls.__new__(cls)
        reg._lock = threading.Lock()
        reg.admin_id = data["admin"]
        reg._identities = {
            i: Identity(i, Role(role), tag, Status(status)) for i, role, tag, status in data["identities"]
        }
        reg._tags = set(data["tags"])
        return reg
