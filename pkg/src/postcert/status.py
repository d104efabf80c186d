"""Signed revocation statuses with the CA/Browser-forum validity rules.

Statuses are short-lived signed assertions (GOOD / REVOKED / UNKNOWN) with a
validity window of 8 hours to 10 days. An honest CA only issues a non-good
status after it holds evidence that the corresponding postcertificate reached
a log, and an updated status must be republished before the deadline derived
from the validity period.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .certs import CertRef, Postcertificate
from .crypto import KeyRegistry, Signature
from .encoding import ByteReader, ByteWriter, register_artifact, text_block
from .log import SCT, LogEntry
from .timeutil import DAY_MS, HOUR_MS

VALIDITY_MIN_MS = 8 * HOUR_MS
VALIDITY_MAX_MS = 10 * DAY_MS
_SHORT_VALIDITY_MS = 16 * HOUR_MS
_UPDATE_CAP_MS = 4 * DAY_MS


class StatusError(Exception):
    def __init__(self, code: str, detail: str = "") -> None:
        super().__init__(f"{code}{': ' + detail if detail else ''}")
        self.code = code


class StatusKind(enum.Enum):
    GOOD = "GOOD"
    REVOKED = "REVOKED"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class StatusValue:
    kind: StatusKind
    reason: str | None = None
    invalidation_date: int | None = None

    @classmethod
    def good(cls) -> "StatusValue":
        return cls(StatusKind.GOOD)

    @classmethod
    def revoked(cls, reason: str = "unspecified", invalidation_date: int | None = None) -> "StatusValue":
        return cls(StatusKind.REVOKED, reason, invalidation_date)

    @classmethod
    def unknown(cls) -> "StatusValue":
        return cls(StatusKind.UNKNOWN)


@dataclass(frozen=True)
class RevocationStatus:
    cert_ref: CertRef
    value: StatusValue
    t: int
    validity_ms: int
    signature: Signature

    def covers(self, at: int) -> bool:
        """Validity windows are half-open: [t, t + validity)."""
        return self.t <= at < self.t + self.validity_ms


def status_signing_payload(cert_ref: CertRef, value: StatusValue, t: int, validity_ms: int) -> bytes:
    w = ByteWriter()
    w.text(cert_ref.issuer)
    w.u64(cert_ref.serial)
    w.text(value.kind.value)
    w.boolean(value.reason is not None)
    if value.reason is not None:
        w.text(value.reason)
    w.optional_i64(value.invalidation_date)
    w.i64(t)
    w.u64(validity_ms)
    return w.getvalue()


def _enc_status(w: ByteWriter, status: RevocationStatus) -> None:
    w.text(status.cert_ref.issuer)
    w.u64(status.cert_ref.serial)
    w.text(status.value.kind.value)
    w.boolean(status.value.reason is not None)
    if status.value.reason is not None:
        w.text(status.value.reason)
    w.optional_i64(status.value.invalidation_date)
    w.i64(status.t)
    w.u64(status.validity_ms)
    w.text(status.signature.signer_id)
    w.blob(status.signature.value)


def _dec_status(r: ByteReader) -> RevocationStatus:
    issuer = r.text()
    serial = r.u64()
    kind = StatusKind(r.text())
    reason = r.text() if r.boolean() else None
    invalidation = r.optional_i64()
    t = r.i64()
    validity = r.u64()
    sig = Signature(r.text(), r.blob())
    return RevocationStatus(CertRef(issuer, serial), StatusValue(kind, reason, invalidation), t, validity, sig)


register_artifact(7, RevocationStatus, _enc_status, _dec_status)


def status_to_text(status: RevocationStatus) -> str:
    from .encoding import encode_artifact

    fields = [
        ("issuer", status.cert_ref.issuer),
        ("serial", status.cert_ref.serial),
        ("status", status.value.kind.value),
        ("reason", status.value.reason),
        ("t", status.t),
        ("validity_ms", status.validity_ms),
    ]
    return text_block("status", fields, encode_artifact(status))


def _evidence_matches(evidence: SCT | LogEntry | None, cert_ref: CertRef) -> bool:
    if evidence is None:
        return False
    if isinstance(evidence, LogEntry):
        payload = evidence.decoded()
        return isinstance(payload, Postcertificate) and payload.target_ref == cert_ref
    return True  # an SCT is a log's inclusion promise; binding is checked downstream


def issue_status(
    registry: KeyRegistry,
    ca_key_id: str,
    cert_ref: CertRef,
    value: StatusValue,
    now: int,
    validity_ms: int,
    *,
    evidence: SCT | LogEntry | None = None,
    honest: bool = True,
) -> RevocationStatus:
    """Sign a status assertion timestamped at the CA's clock ``now``.

    With ``honest=True`` a non-good status requires evidence of a logged
    postcertificate (an SCT or a published entry for the same certificate).
    """
    if not VALIDITY_MIN_MS <= validity_ms <= VALIDITY_MAX_MS:
        raise StatusError("validity-out-of-range", f"{validity_ms}ms")
    if honest and value.kind is not StatusKind.GOOD and not _evidence_matches(evidence, cert_ref):
        raise StatusError("missing-postcertificate-evidence", f"{cert_ref}")
    sig = registry.sign(ca_key_id, status_signing_payload(cert_ref, value, now, validity_ms))
    return RevocationStatus(cert_ref, value, now, validity_ms, sig)


def verify_status(status: RevocationStatus, registry: KeyRegistry) -> bool:
    payload = status_signing_payload(status.cert_ref, status.value, status.t, status.validity_ms)
    return registry.verify(status.signature, payload)


def status_update_deadline(validity_ms: int) -> int:
    """Longest allowed delay before an updated status must be available.

    Half the validity period for windows shorter than 16 hours, otherwise
    min(validity - 8h, 4 days). Both branches meet at 8h for a 16h window.
    """
    if not VALIDITY_MIN_MS <= validity_ms <= VALIDITY_MAX_MS:
        raise StatusError("validity-out-of-range", f"{validity_ms}ms")
    if validity_ms < _SHORT_VALIDITY_MS:
        return validity_ms // 2
    return min(validity_ms - VALIDITY_MIN_MS, _UPDATE_CAP_MS)


def contradiction_set(statuses: list[RevocationStatus], at: int) -> list[tuple[int, int]]:
    """Index pairs of simultaneously-valid statuses whose kinds disagree.

    Overlapping windows with differing kinds are reported, never adjudicated;
    which assertion wins is a policy question outside this toolkit.
    """
    covering = [(i, s) for i, s in enumerate(statuses) if s.covers(at)]
    conflicts: list[tuple[int, int]] = []
    for a in range(len(covering)):
        for b in range(a + 1, len(covering)):
            i, si = covering[a]
            j, sj = covering[b]
            if si.cert_ref == sj.cert_ref and si.value.kind is not sj.value.kind:
                conflicts.append((i, j))
    return conflicts
