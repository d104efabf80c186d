"""Construction and verification of CA misbehavior proofs.

Three CA misbehavior cases are covered:

  M1  missing status update: the CA still vouches GOOD after the revocation
      deadline for a logged postcertificate has passed;
  M2  incorrect status update: the CA serves some other wrong status after
      the deadline;
  M3  early non-good status: the CA serves a non-good status although no
      trusted log holds a postcertificate submitted before it.

The revocation deadline can be anchored at submission time (in which case it
must exceed the log's maximum merge delay) or at publication time (any
positive value). M1/M2 proofs bundle the published entry, a covering tree
head, an inclusion proof and the offending status; M3 proofs bundle the early
status plus one sufficiently late tree head per trusted log, and verification
exhaustively scans those logs for a counterexample entry.

A separate disclosure proof covers misbehaving logs that return an SCT and
then never publish the entry within the maximum merge delay.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .certs import CertRef, Postcertificate, REQUESTED_STATUS_REVOKED
from .crypto import HashScheme, KeyRegistry, SHA256
from .encoding import ByteReader, ByteWriter, decode_artifact, encode_artifact, register_artifact, text_block
from .log import (
    LogEntry,
    MerkleAuditProof,
    SCT,
    STH,
    verify_audit_proof,
    verify_sth,
)
from .status import RevocationStatus, StatusKind, verify_status


class MrdMode(enum.Enum):
    FROM_SUBMISSION = "FROM_SUBMISSION"
    FROM_PUBLICATION = "FROM_PUBLICATION"


@dataclass(frozen=True)
class MrdPolicy:
    """Revocation-deadline policy: anchor mode, deadline, and merge delay."""

    mode: MrdMode
    mrd_ms: int
    mmd_ms: int

    def __post_init__(self) -> None:
        if self.mmd_ms <= 0:
            raise ValueError("mmd must be positive")
        if self.mode is MrdMode.FROM_SUBMISSION and self.mrd_ms <= self.mmd_ms:
            raise ValueError("submission-anchored deadline must exceed the mmd")
        if self.mode is MrdMode.FROM_PUBLICATION and self.mrd_ms <= 0:
            raise ValueError("publication-anchored deadline must be positive")


class Case(enum.Enum):
    M1_MISSING_UPDATE = "M1"
    M2_INCORRECT_STATUS = "M2"
    M3_EARLY_STATUS = "M3"
    LOG_FORGET = "LOG_FORGET"


@dataclass(frozen=True)
class TrustedLogSet:
    log_ids: frozenset[str]

    def __post_init__(self) -> None:
        if not self.log_ids:
            raise ValueError("trusted log set must be non-empty")

    @classmethod
    def of(cls, *log_ids: str) -> "TrustedLogSet":
        return cls(frozenset(log_ids))

    def __contains__(self, log_id: str) -> bool:
        return log_id in self.log_ids

    def sorted(self) -> list[str]:
        return sorted(self.log_ids)


@dataclass(frozen=True)
class MisbehaviorProofM12:
    entry: LogEntry
    sth: STH
    status: RevocationStatus
    audit: MerkleAuditProof


@dataclass(frozen=True)
class MisbehaviorProofM3:
    status: RevocationStatus
    sth_set: tuple[STH, ...]

    def sth_for(self, log_id: str) -> STH | None:
        for sth in self.sth_set:
            if sth.log_id == log_id:
                return sth
        return None


@dataclass(frozen=True)
class SctDisclosureProof:
    sct: SCT
    sth: STH


@dataclass(frozen=True)
class Verdict:
    proven: bool
    reason: str | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.proven


PROVEN = Verdict(True)


def _rejected(reason: str, detail: str = "") -> Verdict:
    return Verdict(False, reason, detail)


class InsufficientEvidenceError(Exception):
    pass


# Proof-time arithmetic ----------------------------------------------------------

def earliest_proof_time(
    case: Case,
    policy: MrdPolicy,
    *,
    entry: LogEntry | None = None,
    covering_sth: STH | None = None,
    status: RevocationStatus | None = None,
) -> int:
    """Earliest instant at which the given case becomes provable.

    M1/M2 anchored at submission: entry submission time plus the deadline.
    M1/M2 anchored at publication: the earliest detected covering tree head's
    timestamp plus the deadline. M3: status time plus the merge delay, in
    both modes.
    """
    if case in (Case.M1_MISSING_UPDATE, Case.M2_INCORRECT_STATUS):
        if entry is None:
            raise ValueError("entry evidence required")
        if policy.mode is MrdMode.FROM_SUBMISSION:
            return entry.t_submission + policy.mrd_ms
        if covering_sth is None:
            raise ValueError("covering tree head required in publication mode")
        if covering_sth.log_id != entry.log_id or covering_sth.treesize <= entry.number:
            raise ValueError("tree head does not cover the entry")
        return covering_sth.t + policy.mrd_ms
    if case is Case.M3_EARLY_STATUS:
        if status is None:
            raise ValueError("status evidence required")
        return status.t + policy.mmd_ms
    raise ValueError(f"no proof time defined for {case}")


# Verifiers ----------------------------------------------------------------------

def _status_is_incorrect(status: RevocationStatus, post: Postcertificate, strict: bool) -> bool:
    """Compare the served status against the postcertificate's request.

    Default compares only the status class (the request asks for REVOKED);
    strict mode additionally treats a REVOKED answer with the wrong reason
    code as incorrect.
    """
    if post.status != REQUESTED_STATUS_REVOKED:
        raise ValueError(f"unexpected requested status {post.status!r}")
    if status.value.kind is not StatusKind.REVOKED:
        return True
    if strict:
        requested_reason = post.revocation_ext.reason_code
        if (status.value.reason or "unspecified") != requested_reason:
            return True
    return False


def verify_m12(
    proof: MisbehaviorProofM12,
    policy: MrdPolicy,
    trusted: TrustedLogSet,
    registry: KeyRegistry,
    *,
    scheme: HashScheme = SHA256,
    strict_status: bool = False,
) -> Verdict:
    """Check an M1/M2 evidence bundle; the verdict carries the first failure."""
    sth = proof.sth
    entry = proof.entry
    if sth.log_id not in trusted:
        return _rejected("untrusted-log", sth.log_id)
    if not verify_sth(sth, registry):
        return _rejected("bad-sth-signature")
    if entry.log_id != sth.log_id:
        return _rejected("log-mismatch", f"{entry.log_id} != {sth.log_id}")
    if entry.number >= sth.treesize:
        return _rejected("entry-not-covered", f"{entry.number} >= {sth.treesize}")
    if proof.audit.entry_number != entry.number or not verify_audit_proof(
        entry.payload, proof.audit, sth, scheme
    ):
        return _rejected("bad-audit-proof")
    payload = decode_artifact(entry.payload)
    if not isinstance(payload, Postcertificate):
        return _rejected("not-a-postcertificate")
    if not verify_status(proof.status, registry):
        return _rejected("bad-status-signature")
    if proof.status.cert_ref != payload.target_ref:
        return _rejected("certificate-mismatch")
    if not _status_is_incorrect(proof.status, payload, strict_status):
        return _rejected("status-not-incorrect")
    t_proof = earliest_proof_time(
        Case.M1_MISSING_UPDATE, policy, entry=entry, covering_sth=sth
    )
    if proof.status.t < t_proof:
        return _rejected("status-too-early", f"{proof.status.t} < {t_proof}")
    return PROVEN


def verify_m3(
    proof: MisbehaviorProofM3,
    policy: MrdPolicy,
    trusted: TrustedLogSet,
    registry: KeyRegistry,
    log_readers: dict[str, object],
) -> Verdict:
    """Check an M3 bundle by exhaustively scanning every trusted log.

    The bundle must carry one verifying tree head per trusted log, each
    timestamped at or after status time plus the merge delay; the scan then
    looks for any postcertificate entry for the same certificate submitted
    before the status. Finding one refutes the claim.
    """
    status = proof.status
    if status.value.kind is StatusKind.GOOD:
        return _rejected("status-not-nongood")
    if not verify_status(status, registry):
        return _rejected("bad-status-signature")
    t_proof = status.t + policy.mmd_ms
    for log_id in trusted.sorted():
        sth = proof.sth_for(log_id)
        if sth is None:
            return _rejected("missing-log-coverage", log_id)
        if not verify_sth(sth, registry):
            return _rejected("bad-sth-signature", log_id)
        if sth.t < t_proof:
            return _rejected("sth-too-early", f"{log_id}: {sth.t} < {t_proof}")
    for log_id in trusted.sorted():
        sth = proof.sth_for(log_id)
        reader = log_readers.get(log_id)
        if reader is None:
            return _rejected("entries-unavailable", log_id)
        entries = reader.get_entries(0, sth.treesize - 1) if sth.treesize else []
        if len(entries) < sth.treesize:
            return _rejected("entries-unavailable", f"{log_id}: {len(entries)}/{sth.treesize}")
        for entry in entries:
            payload = decode_artifact(entry.payload)
            if not isinstance(payload, Postcertificate):
                continue
            if payload.target_ref == status.cert_ref and entry.t_submission < status.t:
                return _rejected("counterexample-entry", f"{log_id}#{entry.number}")
    return PROVEN


def verify_sct_disclosure(
    proof: SctDisclosureProof,
    mmd_ms: int,
    trusted: TrustedLogSet,
    registry: KeyRegistry,
    log_readers: dict[str, object],
    *,
    scheme: HashScheme = SHA256,
) -> Verdict:
    """Check that a log promised inclusion and broke the promise.

    Proven when the SCT verifies, the same log's tree head is dated past the
    SCT timestamp plus the merge delay, and no entry below that tree size
    hashes to the promised leaf.
    """
    sct, sth = proof.sct, proof.sth
    if sct.log_id not in trusted:
        return _rejected("untrusted-log", sct.log_id)
    if sth.log_id != sct.log_id:
        return _rejected("log-mismatch")
    if sct.signature.signer_id != sct.log_id or not registry.verify(
        sct.signature,
        _sct_payload_bytes(sct),
    ):
        return _rejected("bad-sct-signature")
    if not verify_sth(sth, registry):
        return _rejected("bad-sth-signature")
    if sth.t < sct.timestamp + mmd_ms:
        return _rejected("sth-too-early", f"{sth.t} < {sct.timestamp + mmd_ms}")
    reader = log_readers.get(sct.log_id)
    if reader is None:
        return _rejected("entries-unavailable", sct.log_id)
    entries = reader.get_entries(0, sth.treesize - 1) if sth.treesize else []
    if len(entries) < sth.treesize:
        return _rejected("entries-unavailable", sct.log_id)
    for entry in entries:
        if scheme.hash_leaf(entry.payload) == sct.entry_hash:
            return _rejected("entry-published", f"#{entry.number}")
    return PROVEN


def _sct_payload_bytes(sct: SCT) -> bytes:
    from .log import sct_signing_payload

    return sct_signing_payload(sct.log_id, sct.timestamp, sct.entry_hash)


# Proof building from observations ------------------------------------------------

@dataclass
class ObservationBag:
    """Everything a third-party monitor has seen plus read access to logs."""

    policy: MrdPolicy
    trusted: TrustedLogSet
    registry: KeyRegistry
    statuses: list[RevocationStatus] = field(default_factory=list)
    sth_observations: list[STH] = field(default_factory=list)
    scts: list[SCT] = field(default_factory=list)
    log_readers: dict[str, object] = field(default_factory=dict)
    scheme: HashScheme = SHA256
    _postcert_scan: list[tuple[LogEntry, Postcertificate]] | None = None


def _scan_postcerts(obs: ObservationBag) -> list[tuple[LogEntry, Postcertificate]]:
    if obs._postcert_scan is None:
        found: list[tuple[LogEntry, Postcertificate]] = []
        for log_id in obs.trusted.sorted():
            reader = obs.log_readers.get(log_id)
            if reader is None:
                continue
            size = reader.published_size()
            for entry in reader.get_entries(0, size - 1) if size else []:
                payload = decode_artifact(entry.payload)
                if isinstance(payload, Postcertificate):
                    found.append((entry, payload))
        obs._postcert_scan = found
    return obs._postcert_scan


def _postcert_entries(obs: ObservationBag, target: CertRef | None) -> list[LogEntry]:
    return [
        entry
        for entry, payload in _scan_postcerts(obs)
        if target is None or payload.target_ref == target
    ]


def _earliest_covering_sth(obs: ObservationBag, entry: LogEntry) -> STH | None:
    """First observed tree head covering the entry, in observation order."""
    for sth in obs.sth_observations:
        if sth.log_id == entry.log_id and sth.treesize > entry.number:
            return sth
    reader = obs.log_readers.get(entry.log_id)
    if reader is not None:
        sth = reader.latest_sth()
        if sth.treesize > entry.number:
            return sth
    return None


def _pick_m12_evidence(
    obs: ObservationBag, target: CertRef | None, want_good: bool, strict: bool
) -> MisbehaviorProofM12:
    candidates = _postcert_entries(obs, target)
    if not candidates:
        raise InsufficientEvidenceError("insufficient-evidence: no logged postcertificate")
    best: tuple[int, MisbehaviorProofM12] | None = None
    for entry in candidates:
        sth = _earliest_covering_sth(obs, entry)
        if sth is None:
            continue
        post = decode_artifact(entry.payload)
        t_proof = earliest_proof_time(
            Case.M1_MISSING_UPDATE, obs.policy, entry=entry, covering_sth=sth
        )
        for status in obs.statuses:
            if status.cert_ref != post.target_ref or status.t < t_proof:
                continue
            if want_good:
                if status.value.kind is not StatusKind.GOOD:
                    continue
            else:
                if status.value.kind is StatusKind.GOOD:
                    continue
                if not _status_is_incorrect(status, post, strict):
                    continue
            reader = obs.log_readers.get(entry.log_id)
            if reader is None:
                continue
            audit = reader.audit_proof(entry.number, sth.treesize)
            proof = MisbehaviorProofM12(entry=entry, sth=sth, status=status, audit=audit)
            key = status.t
            if best is None or key < best[0]:
                best = (key, proof)
    if best is None:
        raise InsufficientEvidenceError(
            "insufficient-evidence: no offending status at or after the proof time"
        )
    return best[1]


def _pick_m3_evidence(obs: ObservationBag, target: CertRef | None) -> MisbehaviorProofM3:
    nongood = sorted(
        (
            s
            for s in obs.statuses
            if s.value.kind is not StatusKind.GOOD and (target is None or s.cert_ref == target)
        ),
        key=lambda s: s.t,
    )
    if not nongood:
        raise InsufficientEvidenceError("insufficient-evidence: no non-good status observed")
    last_error = "insufficient-evidence: no tree heads past the proof time"
    for status in nongood:
        t_proof = status.t + obs.policy.mmd_ms
        sths: list[STH] = []
        for log_id in obs.trusted.sorted():
            chosen: STH | None = None
            for sth in obs.sth_observations:
                if sth.log_id == log_id and sth.t >= t_proof:
                    chosen = sth
                    break
            if chosen is None:
                reader = obs.log_readers.get(log_id)
                if reader is not None:
                    latest = reader.latest_sth()
                    if latest.t >= t_proof:
                        chosen = latest
            if chosen is None:
                break
            sths.append(chosen)
        if len(sths) == len(obs.trusted.log_ids):
            return MisbehaviorProofM3(status=status, sth_set=tuple(sths))
    raise InsufficientEvidenceError(last_error)


def _pick_sct_disclosure(obs: ObservationBag) -> SctDisclosureProof:
    for sct in sorted(obs.scts, key=lambda s: (s.timestamp, s.log_id)):
        reader = obs.log_readers.get(sct.log_id)
        if reader is None:
            continue
        size = reader.published_size()
        published = any(
            obs.scheme.hash_leaf(entry.payload) == sct.entry_hash
            for entry in (reader.get_entries(0, size - 1) if size else [])
        )
        if published:
            continue
        deadline = sct.timestamp + obs.policy.mmd_ms
        for sth in obs.sth_observations:
            if sth.log_id == sct.log_id and sth.t >= deadline:
                return SctDisclosureProof(sct=sct, sth=sth)
        latest = reader.latest_sth()
        if latest.t >= deadline:
            return SctDisclosureProof(sct=sct, sth=latest)
    raise InsufficientEvidenceError("insufficient-evidence: every promised entry was published")


def build_proof(
    case: Case,
    obs: ObservationBag,
    *,
    target: CertRef | None = None,
    strict_status: bool = False,
):
    """Assemble the minimal evidence bundle for ``case`` from observations.

    Raises InsufficientEvidenceError when the observations cannot support the
    claim, which is the expected outcome on honest traces.
    """
    if case is Case.M1_MISSING_UPDATE:
        return _pick_m12_evidence(obs, target, want_good=True, strict=strict_status)
    if case is Case.M2_INCORRECT_STATUS:
        return _pick_m12_evidence(obs, target, want_good=False, strict=strict_status)
    if case is Case.M3_EARLY_STATUS:
        return _pick_m3_evidence(obs, target)
    if case is Case.LOG_FORGET:
        return _pick_sct_disclosure(obs)
    raise ValueError(f"unknown case {case}")


# Serialization --------------------------------------------------------------------

def _enc_m12(w: ByteWriter, proof: MisbehaviorProofM12) -> None:
    w.blob(encode_artifact(proof.entry))
    w.blob(encode_artifact(proof.sth))
    w.blob(encode_artifact(proof.status))
    w.blob(encode_artifact(proof.audit))


def _dec_m12(r: ByteReader) -> MisbehaviorProofM12:
    entry = decode_artifact(r.blob())
    sth = decode_artifact(r.blob())
    status = decode_artifact(r.blob())
    audit = decode_artifact(r.blob())
    return MisbehaviorProofM12(entry=entry, sth=sth, status=status, audit=audit)


def _enc_m3(w: ByteWriter, proof: MisbehaviorProofM3) -> None:
    w.blob(encode_artifact(proof.status))
    w.u32(len(proof.sth_set))
    for sth in proof.sth_set:
        w.blob(encode_artifact(sth))


def _dec_m3(r: ByteReader) -> MisbehaviorProofM3:
    status = decode_artifact(r.blob())
    sths = tuple(decode_artifact(r.blob()) for _ in range(r.u32()))
    return MisbehaviorProofM3(status=status, sth_set=sths)


def _enc_disclosure(w: ByteWriter, proof: SctDisclosureProof) -> None:
    w.blob(encode_artifact(proof.sct))
    w.blob(encode_artifact(proof.sth))


def _dec_disclosure(r: ByteReader) -> SctDisclosureProof:
    return SctDisclosureProof(sct=decode_artifact(r.blob()), sth=decode_artifact(r.blob()))


register_artifact(8, MisbehaviorProofM12, _enc_m12, _dec_m12)
register_artifact(9, MisbehaviorProofM3, _enc_m3, _dec_m3)
register_artifact(10, SctDisclosureProof, _enc_disclosure, _dec_disclosure)


def proof_to_text(proof) -> str:
    """Human-readable disclosure form with the exact bytes appended."""
    if isinstance(proof, MisbehaviorProofM12):
        fields = [
            ("log_id", proof.entry.log_id),
            ("entry_number", proof.entry.number),
            ("entry_t_submission", proof.entry.t_submission),
            ("sth_t", proof.sth.t),
            ("sth_treesize", proof.sth.treesize),
            ("status_kind", proof.status.value.kind.value),
            ("status_t", proof.status.t),
        ]
        return text_block("misbehavior-m12", fields, encode_artifact(proof))
    if isinstance(proof, MisbehaviorProofM3):
        fields = [
            ("status_kind", proof.status.value.kind.value),
            ("status_t", proof.status.t),
            ("logs", ",".join(s.log_id for s in proof.sth_set)),
        ]
        return text_block("misbehavior-m3", fields, encode_artifact(proof))
    if isinstance(proof, SctDisclosureProof):
        fields = [
            ("log_id", proof.sct.log_id),
            ("sct_timestamp", proof.sct.timestamp),
            ("sth_t", proof.sth.t),
            ("sth_treesize", proof.sth.treesize),
        ]
        return text_block("sct-disclosure", fields, encode_artifact(proof))
    raise TypeError(f"not a proof: {type(proof).__name__}")
