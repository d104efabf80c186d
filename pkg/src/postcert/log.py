"""Append-only transparency log with SCT/STH issuance and proof serving.

The log validates submission chains, answers an SCT immediately, and merges
the entry into its Merkle tree after a configurable publication delay that is
never allowed to exceed the maximum merge delay. Entries merge in submission
order, so entry numbers are dense and submission timestamps non-decreasing.

Signing cadence is configurable: BUSY logs sign a tree head whenever the
published set changes, UNBUSY logs sign one tree head per merged entry, and
PERIODIC logs re-sign on a fixed interval whether or not anything changed.
``get_sth`` can also reproduce two real-world response pathologies, returning
out-of-order or lagging tree heads with a configured probability while
``get_entries`` keeps serving everything already merged.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass

from .certs import (
    Certificate,
    Postcertificate,
    PostcertScheme,
    TrustStore,
    ValidationContext,
    decode_payload,
    encode_payload,
    validate_chain,
)
from .crypto import HashScheme, KeyRegistry, SHA256, Signature
from .encoding import ByteReader, ByteWriter, register_artifact, text_block
from .merkle import MerkleTree, root_from_audit_path, verify_consistency
from .timeutil import DAY_MS, SECOND_MS


class LogError(Exception):
    """Submission or query failure; ``code`` is a stable machine label."""

    def __init__(self, code: str, detail: str = "") -> None:
        super().__init__(f"{code}{': ' + detail if detail else ''}")
        self.code = code
        self.detail = detail


ERR_CHAIN_REJECTED = "chain-rejected"
ERR_LOG_FROZEN = "log-frozen"


class UpdateClass(enum.Enum):
    BUSY = "BUSY"
    UNBUSY = "UNBUSY"
    PERIODIC = "PERIODIC"


class DuplicatePolicy(enum.Enum):
    RETURN_OLD_SCT = "RETURN_OLD_SCT"
    REINSERT = "REINSERT"


class SthCacheMode(enum.Enum):
    NONE = "NONE"
    OUT_OF_ORDER = "OUT_OF_ORDER"
    LAGGING = "LAGGING"


@dataclass(frozen=True)
class SCT:
    log_id: str
    timestamp: int
    entry_hash: bytes
    signature: Signature


@dataclass(frozen=True)
class LogEntry:
    payload: bytes
    t_submission: int
    log_id: str
    number: int

    def decoded(self) -> Certificate | Postcertificate:
        return decode_payload(self.payload)


@dataclass(frozen=True)
class STH:
    log_id: str
    t: int
    treesize: int
    root_hash: bytes
    signature: Signature


@dataclass(frozen=True)
class MerkleAuditProof:
    entry_number: int
    treesize: int
    path: tuple[bytes, ...]


def sct_signing_payload(log_id: str, timestamp: int, entry_hash: bytes) -> bytes:
    w = ByteWriter()
    w.text(log_id)
    w.i64(timestamp)
    w.blob(entry_hash)
    return w.getvalue()


def sth_signing_payload(log_id: str, t: int, treesize: int, root_hash: bytes) -> bytes:
    w = ByteWriter()
    w.text(log_id)
    w.i64(t)
    w.u64(treesize)
    w.blob(root_hash)
    return w.getvalue()


def verify_sct(sct: SCT, payload: bytes, registry: KeyRegistry, scheme: HashScheme = SHA256) -> bool:
    if sct.entry_hash != scheme.hash_leaf(payload):
        return False
    if sct.signature.signer_id != sct.log_id:
        return False
    return registry.verify(sct.signature, sct_signing_payload(sct.log_id, sct.timestamp, sct.entry_hash))


def verify_sth(sth: STH, registry: KeyRegistry) -> bool:
    if sth.signature.signer_id != sth.log_id:
        return False
    return registry.verify(
        sth.signature, sth_signing_payload(sth.log_id, sth.t, sth.treesize, sth.root_hash)
    )


def verify_audit_proof(
    payload: bytes, proof: MerkleAuditProof, sth: STH, scheme: HashScheme = SHA256
) -> bool:
    if proof.treesize != sth.treesize:
        return False
    root = root_from_audit_path(
        scheme.hash_leaf(payload), proof.entry_number, proof.treesize, proof.path, scheme
    )
    return root is not None and root == sth.root_hash


def verify_consistency_sths(
    sth_a: STH, sth_b: STH, path: tuple[bytes, ...], scheme: HashScheme = SHA256
) -> bool:
    if sth_a.log_id != sth_b.log_id:
        return False
    return verify_consistency(
        sth_a.treesize, sth_b.treesize, sth_a.root_hash, sth_b.root_hash, path, scheme
    )


# Codecs -----------------------------------------------------------------------

def _enc_sig(w: ByteWriter, sig: Signature) -> None:
    w.text(sig.signer_id)
    w.blob(sig.value)


def _dec_sig(r: ByteReader) -> Signature:
    return Signature(r.text(), r.blob())


def _enc_sct(w: ByteWriter, sct: SCT) -> None:
    w.text(sct.log_id)
    w.i64(sct.timestamp)
    w.blob(sct.entry_hash)
    _enc_sig(w, sct.signature)


def _dec_sct(r: ByteReader) -> SCT:
    return SCT(r.text(), r.i64(), r.blob(), _dec_sig(r))


def _enc_sth(w: ByteWriter, sth: STH) -> None:
    w.text(sth.log_id)
    w.i64(sth.t)
    w.u64(sth.treesize)
    w.blob(sth.root_hash)
    _enc_sig(w, sth.signature)


def _dec_sth(r: ByteReader) -> STH:
    return STH(r.text(), r.i64(), r.u64(), r.blob(), _dec_sig(r))


def _enc_entry(w: ByteWriter, entry: LogEntry) -> None:
    w.blob(entry.payload)
    w.i64(entry.t_submission)
    w.text(entry.log_id)
    w.u64(entry.number)


def _dec_entry(r: ByteReader) -> LogEntry:
    return LogEntry(r.blob(), r.i64(), r.text(), r.u64())


def _enc_audit(w: ByteWriter, proof: MerkleAuditProof) -> None:
    w.u64(proof.entry_number)
    w.u64(proof.treesize)
    w.u32(len(proof.path))
    for node in proof.path:
        w.blob(node)


def _dec_audit(r: ByteReader) -> MerkleAuditProof:
    number = r.u64()
    treesize = r.u64()
    path = tuple(r.blob() for _ in range(r.u32()))
    return MerkleAuditProof(number, treesize, path)


register_artifact(3, SCT, _enc_sct, _dec_sct)
register_artifact(4, STH, _enc_sth, _dec_sth)
register_artifact(5, LogEntry, _enc_entry, _dec_entry)
register_artifact(6, MerkleAuditProof, _enc_audit, _dec_audit)


def sth_to_text(sth: STH) -> str:
    from .encoding import encode_artifact

    fields = [
        ("log_id", sth.log_id),
        ("t", sth.t),
        ("treesize", sth.treesize),
        ("root_hash", sth.root_hash.hex()),
    ]
    return text_block("sth", fields, encode_artifact(sth))


# Publication delay models -----------------------------------------------------

class DelayModel:
    """Sampler for submission-to-merge delays, parsed from a config string.

    Supported forms (values are durations in milliseconds):
      fixed:X            constant delay
      uniform:LO:HI      uniform
      exp:MEAN           exponential
      minmedmax:A:B:C    10% mass at A, 10% at C, log-interpolated in between,
                         with true median exactly B
      grid:A:B:C:N       deterministic ascending quantile grid over N
                         submissions; realizes min/median/max of A/B/C exactly
    """

    def __init__(self, spec: str) -> None:
        self.spec = spec
        parts = spec.split(":")
        self.kind = parts[0]
        args = [float(p) for p in parts[1:]]
        if self.kind == "fixed" and len(args) == 1:
            pass
        elif self.kind == "uniform" and len(args) == 2 and args[0] <= args[1]:
            pass
        elif self.kind == "exp" and len(args) == 1:
            pass
        elif self.kind == "minmedmax" and len(args) == 3 and args[0] <= args[1] <= args[2]:
            pass
        elif self.kind == "grid" and len(args) == 4 and args[0] <= args[1] <= args[2]:
            pass
        else:
            raise ValueError(f"bad delay spec: {spec!r}")
        self.args = args

    @staticmethod
    def _log_interp(lo: float, hi: float, frac: float) -> float:
        if lo <= 0:
            return lo + (hi - lo) * frac
        return lo * (hi / lo) ** frac

    def _quantile(self, lo: float, med: float, hi: float, u: float) -> float:
        if u < 0.5:
            return self._log_interp(lo, med, u * 2.0)
        return self._log_interp(med, hi, (u - 0.5) * 2.0)

    def sample(self, rng: random.Random, index: int) -> int:
        if self.kind == "fixed":
            return int(self.args[0])
        if self.kind == "uniform":
            return int(round(rng.uniform(self.args[0], self.args[1])))
        if self.kind == "exp":
            return int(round(rng.expovariate(1.0 / max(self.args[0], 1.0))))
        if self.kind == "minmedmax":
            lo, med, hi = self.args
            u = rng.random()
            if u < 0.1:
                return int(lo)
            if u >= 0.9:
                return int(hi)
            return int(round(self._quantile(lo, med, hi, (u - 0.1) / 0.8)))
        # grid: ascending quantiles indexed by the submission counter
        lo, med, hi, n = self.args
        count = max(int(n), 1)
        k = index % count
        if count == 1:
            return int(med)
        u = k / (count - 1)
        if k == 0:
            return int(lo)
        if k == count - 1:
            return int(hi)
        if abs(u - 0.5) < 1e-12:
            return int(med)
        return int(round(self._quantile(lo, med, hi, u)))


# Log configuration --------------------------------------------------------------

@dataclass(frozen=True)
class LogConfig:
    mmd_ms: int = DAY_MS
    clock_offset_ms: int = 0
    update_class: UpdateClass = UpdateClass.BUSY
    update_interval_ms: int | None = None
    publication_delay: str = f"fixed:{SECOND_MS}"
    duplicate_policy: DuplicatePolicy = DuplicatePolicy.RETURN_OLD_SCT
    sth_cache: SthCacheMode = SthCacheMode.NONE
    sth_cache_p: float = 0.0
    accept_self_signed: bool = False
    frozen: bool = False
    forget: bool = False

    def __post_init__(self) -> None:
        if self.mmd_ms <= 0:
            raise ValueError("mmd must be positive")
        if not 0.0 <= self.sth_cache_p <= 1.0:
            raise ValueError("sth_cache_p must be in [0, 1]")
        if self.update_class is UpdateClass.PERIODIC:
            if not self.update_interval_ms or self.update_interval_ms <= 0:
                raise ValueError("PERIODIC requires a positive update_interval_ms")
            if self.update_interval_ms >= self.mmd_ms:
                raise ValueError("PERIODIC interval must stay below the mmd")
        DelayModel(self.publication_delay)


@dataclass
class _Pending:
    ready_at: int
    payload: bytes
    sct_timestamp: int


class CtLog:
    """In-memory transparency log bound to one signing key.

    All methods take the current reference-clock time; the log's own clock is
    the reference plus its configured offset. State advances lazily: any read
    or write first merges every pending entry whose merge time has arrived and
    signs the tree heads its update class calls for, with exact timestamps.
    """

    def __init__(
        self,
        log_id: str,
        registry: KeyRegistry,
        trust: TrustStore,
        config: LogConfig | None = None,
        *,
        scheme: HashScheme = SHA256,
        seed: int = 0,
        start_time_ms: int = 0,
    ) -> None:
        self.log_id = log_id
        self.registry = registry
        self.trust = trust
        self.config = config or LogConfig()
        self.scheme = scheme
        self.rng = random.Random(f"{seed}:{log_id}")
        self.entries: list[LogEntry] = []
        self.sth_history: list[STH] = []
        self.tree = MerkleTree(scheme)
        self._pending: list[_Pending] = []
        self._pending_head = 0
        self._merge_t_ref: list[int] = []
        self._sct_by_payload: dict[bytes, SCT] = {}
        self._number_by_leaf_hash: dict[bytes, int] = {}
        self._last_merge_t = start_time_ms
        self._last_tick = start_time_ms
        self._now = start_time_ms
        self._delay_model = DelayModel(self.config.publication_delay)
        self._submission_index = 0
        self._drop_serials: set[int] = set()
        self.frozen = self.config.frozen
        self._sign_sth(start_time_ms)

    # -- internal machinery

    def _log_clock(self, t_ref: int) -> int:
        return t_ref + self.config.clock_offset_ms

    def _sign_sth(self, t_ref: int) -> STH:
        t_log = self._log_clock(t_ref)
        size = len(self.entries)
        root = self.tree.root(size)
        sig = self.registry.sign(self.log_id, sth_signing_payload(self.log_id, t_log, size, root))
        sth = STH(self.log_id, t_log, size, root, sig)
        self.sth_history.append(sth)
        return sth

    def _merge_one(self, pending: _Pending, t_ref: int) -> None:
        number = len(self.entries)
        entry = LogEntry(
            payload=pending.payload,
            t_submission=pending.sct_timestamp,
            log_id=self.log_id,
            number=number,
        )
        self.entries.append(entry)
        leaf = self.tree.append(pending.payload)
        self._number_by_leaf_hash.setdefault(leaf, number)
        self._merge_t_ref.append(t_ref)

    def advance(self, now: int) -> None:
        """Merge due entries and sign tree heads up to reference time ``now``."""
        if now < self._now:
            return
        self._now = now
        interval = self.config.update_interval_ms
        periodic = self.config.update_class is UpdateClass.PERIODIC
        while True:
            merge_t: int | None = None
            if self._pending_head < len(self._pending):
                head = self._pending[self._pending_head]
                merge_t = max(head.ready_at, self._last_merge_t)
                if merge_t > now:
                    merge_t = None
            tick_t: int | None = None
            if periodic:
                tick_t = self._last_tick + interval
                if tick_t > now:
                    tick_t = None
            if merge_t is None and tick_t is None:
                break
            if tick_t is not None and (merge_t is None or tick_t <= merge_t):
                self._last_tick = tick_t
                self._sign_sth(tick_t)
                continue
            # Merge every queued entry due at this instant, then sign per class.
            batch_t = merge_t
            merged = 0
            while self._pending_head < len(self._pending):
                head = self._pending[self._pending_head]
                head_t = max(head.ready_at, self._last_merge_t)
                if head_t != batch_t:
                    break
                self._merge_one(head, batch_t)
                self._last_merge_t = batch_t
                self._pending_head += 1
                merged += 1
                if self.config.update_class is UpdateClass.UNBUSY:
                    self._sign_sth(batch_t)
            if merged and self.config.update_class is UpdateClass.BUSY:
                self._sign_sth(batch_t)
            if self._pending_head == len(self._pending):
                self._pending.clear()
                self._pending_head = 0

    def _publication_delay(self) -> int:
        delay = self._delay_model.sample(self.rng, self._submission_index)
        cap = self.config.mmd_ms
        if self.config.update_class is UpdateClass.PERIODIC:
            cap -= self.config.update_interval_ms or 0
        return max(0, min(delay, cap))

    # -- log operations

    def drop_serial(self, serial: int) -> None:
        """Silently forget future submissions whose TBS serial matches."""
        self._drop_serials.add(serial)

    def freeze(self) -> None:
        self.frozen = True

    def submit(
        self,
        payload: Certificate | Postcertificate,
        chain: list[Certificate],
        now: int,
    ) -> SCT:
        self.advance(now)
        if self.frozen:
            raise LogError(ERR_LOG_FROZEN, self.log_id)
        context = ValidationContext.LOG_CA_ISSUED
        if (
            isinstance(payload, Postcertificate)
            and payload.scheme is PostcertScheme.SELF_SIGNED
            and self.config.accept_self_signed
        ):
            context = ValidationContext.LOG_SELF_SIGNED
        verdict = validate_chain(payload, chain, context, self.registry, self.trust)
        if not verdict:
            raise LogError(ERR_CHAIN_REJECTED, verdict.reason or "")
        payload_bytes = encode_payload(payload)
        if self.config.duplicate_policy is DuplicatePolicy.RETURN_OLD_SCT:
            previous = self._sct_by_payload.get(payload_bytes)
            if previous is not None:
                return previous
        timestamp = self._log_clock(now)
        entry_hash = self.scheme.hash_leaf(payload_bytes)
        sig = self.registry.sign(
            self.log_id, sct_signing_payload(self.log_id, timestamp, entry_hash)
        )
        sct = SCT(self.log_id, timestamp, entry_hash, sig)
        forget = self.config.forget or payload.tbs.serial in self._drop_serials
        if not forget:
            self._pending.append(
                _Pending(ready_at=now + self._publication_delay(), payload=payload_bytes,
                         sct_timestamp=timestamp)
            )
        self._sct_by_payload.setdefault(payload_bytes, sct)
        self._submission_index += 1
        return sct

    def sign_tree_head(self, now: int) -> STH:
        self.advance(now)
        return self._sign_sth(now)

    def latest_sth(self) -> STH:
        return self.sth_history[-1]

    def get_sth(self, now: int) -> STH:
        self.advance(now)
        latest = self.sth_history[-1]
        mode = self.config.sth_cache
        if mode is SthCacheMode.NONE or len(self.sth_history) < 2:
            return latest
        if self.rng.random() >= self.config.sth_cache_p:
            return latest
        if mode is SthCacheMode.OUT_OF_ORDER:
            return self.rng.choice(self.sth_history[:-1])
        # LAGGING: a cached tree head that excludes already-retrievable entries.
        size = len(self.entries)
        stale = [sth for sth in self.sth_history if sth.treesize < size]
        if not stale:
            return latest
        return self.rng.choice(stale)

    def published_size(self, now: int | None = None) -> int:
        if now is not None:
            self.advance(now)
        return len(self.entries)

    def merge_time_ref(self, number: int) -> int:
        """Reference-clock instant at which entry ``number`` was published."""
        return self._merge_t_ref[number]

    def get_entries(self, start: int, end: int, now: int | None = None) -> list[LogEntry]:
        if now is not None:
            self.advance(now)
        if start < 0 or end < start:
            raise ValueError("invalid entry range")
        return self.entries[start : min(end + 1, len(self.entries))]

    def audit_proof(self, entry_number: int, treesize: int) -> MerkleAuditProof:
        if not 0 <= entry_number < treesize <= len(self.entries):
            raise LogError("entry-out-of-range", f"{entry_number}/{treesize}")
        return MerkleAuditProof(entry_number, treesize, self.tree.audit_path(entry_number, treesize))

    def get_proof_by_hash(self, leaf_hash: bytes, treesize: int) -> MerkleAuditProof:
        number = self._number_by_leaf_hash.get(leaf_hash)
        if number is None:
            raise LogError("unknown-leaf-hash")
        return self.audit_proof(number, treesize)

    def consistency_proof(self, first: int, second: int) -> tuple[bytes, ...]:
        if not 0 <= first <= second <= len(self.entries):
            raise LogError("size-out-of-range", f"{first}/{second}")
        return self.tree.consistency_path(first, second)


# Snapshots ----------------------------------------------------------------------

def log_snapshot_text(log: CtLog) -> str:
    """Serialize published entries and tree-head history to one text blob."""
    lines = [f"log id={log.log_id} scheme={log.scheme.name} size={len(log.entries)}"]
    for entry in log.entries:
        lines.append(
            f"entry number={entry.number} t_submission={entry.t_submission} "
            f"payload={entry.payload.hex()}"
        )
    for sth in log.sth_history:
        lines.append(
            f"sth t={sth.t} treesize={sth.treesize} root={sth.root_hash.hex()} "
            f"signer={sth.signature.signer_id} sig={sth.signature.value.hex()}"
        )
    return "\n".join(lines) + "\n"


class SnapshotLogReader:
    """Read-only view reconstructed from a snapshot, able to serve proofs."""

    def __init__(self, log_id: str, entries: list[LogEntry], sths: list[STH],
                 scheme: HashScheme = SHA256) -> None:
        self.log_id = log_id
        self.entries = entries
        self.sth_history = sths
        self.scheme = scheme
        self.tree = MerkleTree(scheme)
        self._number_by_leaf_hash: dict[bytes, int] = {}
        for entry in entries:
            leaf = self.tree.append(entry.payload)
            self._number_by_leaf_hash.setdefault(leaf, entry.number)

    @classmethod
    def from_text(cls, text: str, scheme: HashScheme = SHA256) -> "SnapshotLogReader":
        log_id = ""
        entries: list[LogEntry] = []
        sths: list[STH] = []
        for line in text.splitlines():
            if not line.strip():
                continue
            kind, _, rest = line.partition(" ")
            fields = dict(item.split("=", 1) for item in rest.split())
            if kind == "log":
                log_id = fields["id"]
            elif kind == "entry":
                entries.append(
                    LogEntry(
                        payload=bytes.fromhex(fields["payload"]),
                        t_submission=int(fields["t_submission"]),
                        log_id=log_id,
                        number=int(fields["number"]),
                    )
                )
            elif kind == "sth":
                sths.append(
                    STH(
                        log_id=log_id,
                        t=int(fields["t"]),
                        treesize=int(fields["treesize"]),
                        root_hash=bytes.fromhex(fields["root"]),
                        signature=Signature(fields["signer"], bytes.fromhex(fields["sig"])),
                    )
                )
        return cls(log_id, entries, sths, scheme)

    def latest_sth(self) -> STH:
        return self.sth_history[-1]

    def get_sth(self, now: int | None = None) -> STH:
        return self.sth_history[-1]

    def published_size(self, now: int | None = None) -> int:
        return len(self.entries)

    def get_entries(self, start: int, end: int, now: int | None = None) -> list[LogEntry]:
        if start < 0 or end < start:
            raise ValueError("invalid entry range")
        return self.entries[start : min(end + 1, len(self.entries))]

    def audit_proof(self, entry_number: int, treesize: int) -> MerkleAuditProof:
        if not 0 <= entry_number < treesize <= len(self.entries):
            raise LogError("entry-out-of-range", f"{entry_number}/{treesize}")
        return MerkleAuditProof(entry_number, treesize, self.tree.audit_path(entry_number, treesize))

    def get_proof_by_hash(self, leaf_hash: bytes, treesize: int) -> MerkleAuditProof:
        number = self._number_by_leaf_hash.get(leaf_hash)
        if number is None:
            raise LogError("unknown-leaf-hash")
        return self.audit_proof(number, treesize)

    def consistency_proof(self, first: int, second: int) -> tuple[bytes, ...]:
        if not 0 <= first <= second <= len(self.entries):
            raise LogError("size-out-of-range", f"{first}/{second}")
        return self.tree.consistency_path(first, second)
