"""Hashing and signature primitives shared by every other module.

The Merkle hashing follows the usual transparency-log convention: leaves are
hashed with a 0x00 domain-separation prefix, interior nodes with 0x01, and the
empty tree hashes to the digest of the empty string. The hash is pluggable so
tests can swap in a cheap truncated variant for exhaustive oracles.

Signatures are deterministic HMAC-SHA256 tags over an in-memory key registry:
each signer id maps to one secret, secrets are fixed at construction time, and
signing the same payload twice yields identical bytes. This gives verifiable,
reproducible signatures without real key management.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Iterable, Mapping

DIGEST_LEN = 32

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"


class CryptoError(Exception):
    pass


class UnknownSignerError(CryptoError):
    pass


class HashScheme:
    """Domain-separated tree hash. Digests are always 32 bytes."""

    name = "sha256"

    def _digest(self, data: bytes) -> bytes:
        return hashlib.sha256(data).digest()

    def hash_leaf(self, payload: bytes) -> bytes:
        return self._digest(LEAF_PREFIX + payload)

    def hash_node(self, left: bytes, right: bytes) -> bytes:
        if len(left) != DIGEST_LEN or len(right) != DIGEST_LEN:
            raise CryptoError("node children must be 32-byte digests")
        return self._digest(NODE_PREFIX + left + right)

    def empty_root(self) -> bytes:
        return self._digest(b"")


class TruncatedHashScheme(HashScheme):
    """SHA-256 truncated to a few bytes and zero-padded back to 32.

    Only for brute-force test oracles where hashing dominates runtime;
    the digest length is preserved so all interfaces stay unchanged.
    """

    def __init__(self, width: int = 4) -> None:
        if not 1 <= width <= DIGEST_LEN:
            raise ValueError("width out of range")
        self._width = width
        self.name = f"sha256/{width * 8}"

    def _digest(self, data: bytes) -> bytes:
        return hashlib.sha256(data).digest()[: self._width].ljust(DIGEST_LEN, b"\x00")


SHA256 = HashScheme()


@dataclass(frozen=True)
class Signature:
    signer_id: str
    value: bytes

    def __post_init__(self) -> None:
        if not self.signer_id:
            raise ValueError("signer_id must be non-empty")


def _derive_secret(signer_id: str) -> bytes:
    return hashlib.sha256(b"postcert-signing-key:" + signer_id.encode("utf-8")).digest()


class KeyRegistry:
    """Immutable mapping from signer ids to HMAC secrets.

    Secrets default to a deterministic derivation from the signer id so that
    simulator runs reproduce byte-for-byte; explicit secrets may be supplied
    for isolation tests.
    """

    def __init__(self, secrets: Mapping[str, bytes] | None = None) -> None:
        self._secrets: dict[str, bytes] = dict(secrets or {})

    @classmethod
    def with_signers(cls, signer_ids: Iterable[str]) -> "KeyRegistry":
        return cls({signer_id: _derive_secret(signer_id) for signer_id in signer_ids})

    def has(self, signer_id: str) -> bool:
        return signer_id in self._secrets

    def signer_ids(self) -> list[str]:
        return sorted(self._secrets)

    def sign(self, signer_id: str, payload: bytes) -> Signature:
        secret = self._secrets.get(signer_id)
        if secret is None:
            raise UnknownSignerError(f"unknown signer: {signer_id}")
        tag = hmac.new(secret, payload, hashlib.sha256).digest()
        return Signature(signer_id=signer_id, value=tag)

    def verify(self, signature: Signature, payload: bytes) -> bool:
        secret = self._secrets.get(signature.signer_id)
        if secret is None:
            return False
        expected = hmac.new(secret, payload, hashlib.sha256).digest()
        return hmac.compare_digest(expected, signature.value)
