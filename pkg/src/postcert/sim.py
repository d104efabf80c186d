"""Deterministic discrete-event simulation of CAs, clients, logs and monitors.

One virtual reference clock drives a min-heap event loop; every actor sees
reference time plus its configured offset, and every random draw comes from a
per-actor generator seeded from the scenario seed, so a scenario replays
byte-for-byte. Honest actors follow the protocol (submit the postcertificate,
monitor logs, update the status before the deadline, timestamp the revoked
status after the earliest SCT); a misbehaving actor realizes exactly its
configured deviation and nothing else.

At the horizon the run optionally audits itself: measured delay breakdowns go
through the bound checker, and a third-party monitor view of the trace is fed
to the misbehavior proof builders. Violations and proof attempts land in the
trace alongside the protocol events.
"""

from __future__ import annotations

import enum
import heapq
import random
from dataclasses import dataclass, field, replace

from .certs import (
    CertRef,
    Certificate,
    Postcertificate,
    PostcertScheme,
    TbsCertificate,
    TrustStore,
    make_postcertificate,
    sign_certificate,
)
from .crypto import KeyRegistry, SHA256
from .encoding import encode_artifact
from .log import CtLog, LogConfig, LogError, SCT
from .misbehavior import (
    Case,
    InsufficientEvidenceError,
    MrdMode,
    MrdPolicy,
    ObservationBag,
    TrustedLogSet,
    build_proof,
    earliest_proof_time,
    verify_m12,
    verify_m3,
    verify_sct_disclosure,
)
from .probe import binary_search_size
from .status import (
    RevocationStatus,
    StatusValue,
    issue_status,
    status_update_deadline,
)
from .delays import DelayBreakdown, check_bounds
from .timeutil import DAY_MS, HOUR_MS, MINUTE_MS, SECOND_MS
from .trace import (
    DiscoveryRecord,
    EventKind,
    ProofRecord,
    SthObservation,
    SubmissionRecord,
    TraceEvent,
    ViolationRecord,
)

CERT_LIFETIME_MS = 400 * DAY_MS
_BACKGROUND_SERIAL_BASE = 1_000_000


class ScenarioError(Exception):
    pass


class AllLogsRejectedError(Exception):
    def __init__(self, failures: list[tuple[str, str]]) -> None:
        super().__init__(f"all-logs-rejected: {failures}")
        self.failures = failures


class CaMisbehavior(enum.Enum):
    NONE = "NONE"
    M1_SKIP_UPDATE = "M1_SKIP_UPDATE"
    M2_WRONG_STATUS = "M2_WRONG_STATUS"
    M3_EARLY_REVOKE = "M3_EARLY_REVOKE"


@dataclass(frozen=True)
class SimLogConfig:
    log_id: str
    config: LogConfig = field(default_factory=LogConfig)
    background_per_hour: float = 0.0
    operator: str = ""
    trusted: bool = True


@dataclass(frozen=True)
class SimCaConfig:
    ca_id: str
    poll_interval_ms: int = 10 * MINUTE_MS
    status_validity_ms: int = 10 * HOUR_MS
    update_delay_ms: int = 30 * MINUTE_MS
    processing_delay_ms: int = 1 * HOUR_MS
    clock_offset_ms: int = 0
    misbehavior: CaMisbehavior = CaMisbehavior.NONE
    monitored_logs: tuple[str, ...] = ()  # empty means all scenario logs


@dataclass(frozen=True)
class SimClientConfig:
    client_id: str
    submit_copies: int = 2
    sct_handoff: bool = False
    handoff_delay_ms: int = MINUTE_MS
    avoid_issuer_log: bool = False
    scheme: PostcertScheme = PostcertScheme.CA_ISSUED


@dataclass(frozen=True)
class ProbeConfig:
    sth_interval_ms: int = 10 * SECOND_MS
    size_interval_ms: int = 0
    submit_interval_ms: int = 0
    submit_limit: int = 0  # per log; 0 means unlimited
    logs: tuple[str, ...] = ()  # empty means all scenario logs


@dataclass(frozen=True)
class ScheduledEvent:
    t: int
    kind: str
    params: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    horizon_ms: int
    policy: MrdPolicy
    logs: tuple[SimLogConfig, ...]
    cas: tuple[SimCaConfig, ...]
    clients: tuple[SimClientConfig, ...]
    probe: ProbeConfig | None = None
    schedule: tuple[ScheduledEvent, ...] = ()
    build_proofs: bool = True
    check_delay_bounds: bool = True


def validate_scenario(scenario: Scenario) -> None:
    if scenario.horizon_ms <= 0:
        raise ScenarioError("invalid-scenario: horizon must be positive")
    ids: set[str] = set()
    for group in (scenario.logs, scenario.cas, scenario.clients):
        for actor in group:
            actor_id = getattr(actor, "log_id", None) or getattr(actor, "ca_id", None) or getattr(
                actor, "client_id"
            )
            if actor_id in ids:
                raise ScenarioError(f"invalid-scenario: duplicate actor id {actor_id}")
            ids.add(actor_id)
    if not scenario.logs:
        raise ScenarioError("invalid-scenario: at least one log required")
    log_ids = {l.log_id for l in scenario.logs}
    seen_serials: dict[str, set[int]] = {}
    for event in scenario.schedule:
        if event.t < 0 or event.t > scenario.horizon_ms:
            raise ScenarioError(f"invalid-scenario: event at t={event.t} outside horizon")
        if event.kind == "issue":
            ca = event.params.get("ca")
            serial = int(event.params.get("serial", "-1"))
            if ca not in {c.ca_id for c in scenario.cas}:
                raise ScenarioError(f"invalid-scenario: unknown ca {ca!r}")
            if serial in seen_serials.setdefault(ca, set()):
                raise ScenarioError(f"invalid-scenario: duplicate serial {serial} for {ca}")
            seen_serials[ca].add(serial)
        elif event.kind in ("freeze-log", "drop-entry"):
            if event.params.get("log") not in log_ids:
                raise ScenarioError(f"invalid-scenario: unknown log {event.params.get('log')!r}")
        elif event.kind in ("revoke-request", "revoke-direct"):
            pass
        else:
            raise ScenarioError(f"invalid-scenario: unknown event kind {event.kind!r}")


def derive_seed(seed: int, label: str) -> str:
    return f"{seed}:{label}"


def multi_log_submit(
    postcert: Postcertificate,
    chain: list[Certificate],
    logs: list[CtLog],
    k: int,
    now: int,
    *,
    skip_operator: str | None = None,
    operators: dict[str, str] | None = None,
) -> tuple[list[SCT], list[tuple[str, str]]]:
    """Submit one postcertificate to ``k`` distinct logs.

    Logs operated by ``skip_operator`` are skipped. Rejections are collected
    and returned; if no log accepts, the whole submission fails.
    """
    if k > len(logs):
        raise ValueError("k exceeds the number of candidate logs")
    scts: list[SCT] = []
    failures: list[tuple[str, str]] = []
    for log in logs:
        if len(scts) >= k:
            break
        if skip_operator and operators and operators.get(log.log_id) == skip_operator:
            continue
        try:
            scts.append(log.submit(postcert, chain, now))
        except LogError as exc:
            failures.append((log.log_id, exc.code))
    if not scts:
        raise AllLogsRejectedError(failures)
    return scts, failures


@dataclass
class _IssuedCert:
    serial: int
    cert: Certificate
    postcert: Postcertificate
    chain: list[Certificate]
    client_id: str


@dataclass
class _Milestones:
    serial: int
    ca_id: str
    pathway: str = "POSTCERT"
    t_request: int | None = None
    t_receive: int | None = None
    t_processed: int | None = None
    t_first_submit: int | None = None
    submit_log_ids: list[str] = field(default_factory=list)
    t_handoff: int | None = None
    discovery_log: str | None = None
    t_discovery: int | None = None
    t_update: int | None = None


class _CaActor:
    def __init__(self, sim: "Simulation", config: SimCaConfig) -> None:
        self.sim = sim
        self.config = config
        self.ca_id = config.ca_id
        self.issued: dict[int, _IssuedCert] = {}
        self.current_value: dict[int, StatusValue] = {}
        self.evidence: dict[int, object] = {}
        self.known_sct_ts: dict[int, int] = {}
        self.handled: set[int] = set()
        self.cursors: dict[str, int] = {}
        self.refresh_ms = status_update_deadline(config.status_validity_ms)
        root_tbs = TbsCertificate(
            serial=0,
            subject=self.ca_id,
            issuer=self.ca_id,
            not_before=0,
            not_after=CERT_LIFETIME_MS * 4,
            public_key_id=self.ca_id,
        )
        self.root_cert = sign_certificate(sim.registry, self.ca_id, root_tbs)

    def clock(self, t_ref: int) -> int:
        return t_ref + self.config.clock_offset_ms

    def monitored(self) -> list[str]:
        if self.config.monitored_logs:
            return list(self.config.monitored_logs)
        return [l.log_id for l in self.sim.scenario.logs]

    # -- certificate lifecycle

    def issue(self, client: "_ClientActor", serial: int, now: int) -> None:
        leaf_key = f"{client.client_id}/{serial}"
        tbs = TbsCertificate(
            serial=serial,
            subject=f"{client.client_id}.example",
            issuer=self.ca_id,
            not_before=now,
            not_after=now + CERT_LIFETIME_MS,
            public_key_id=leaf_key,
        )
        cert = sign_certificate(self.sim.registry, self.ca_id, tbs)
        scheme = client.config.scheme
        if scheme is PostcertScheme.CA_ISSUED:
            postcert = make_postcertificate(cert, scheme, self.sim.registry)
            chain = [self.root_cert]
        else:
            postcert = make_postcertificate(cert, scheme, self.sim.registry)
            chain = [cert, self.root_cert]
        issued = _IssuedCert(serial, cert, postcert, chain, client.client_id)
        self.issued[serial] = issued
        self.current_value[serial] = StatusValue.good()
        client.wallet[serial] = issued
        self._emit_status(serial, now)
        self.sim.schedule(now + self.refresh_ms, lambda t: self._refresh(serial, t))

    def _refresh(self, serial: int, now: int) -> None:
        if now > self.sim.scenario.horizon_ms:
            return
        self._emit_status(serial, now)
        self.sim.schedule(now + self.refresh_ms, lambda t: self._refresh(serial, t))

    def _emit_status(self, serial: int, now: int, *, t_override: int | None = None) -> RevocationStatus:
        value = self.current_value[serial]
        ref = CertRef(self.ca_id, serial)
        honest = self.config.misbehavior is not CaMisbehavior.M3_EARLY_REVOKE
        status = issue_status(
            self.sim.registry,
            self.ca_id,
            ref,
            value,
            t_override if t_override is not None else self.clock(now),
            self.config.status_validity_ms,
            evidence=self.evidence.get(serial),
            honest=honest,
        )
        self.sim.emit(now, self.ca_id, EventKind.STATUS, status)
        return status

    # -- monitoring

    def monitor_tick(self, now: int) -> list[DiscoveryRecord]:
        """Fetch new entries from every monitored log and react to
        postcertificates for certificates this CA issued."""
        discoveries: list[DiscoveryRecord] = []
        for log_id in self.monitored():
            log = self.sim.logs[log_id]
            cursor = self.cursors.get(log_id, 0)
            size = log.published_size(now)
            if size <= cursor:
                continue
            for entry in log.get_entries(cursor, size - 1):
                payload = entry.decoded()
                if not isinstance(payload, Postcertificate):
                    continue
                if payload.tbs.issuer != self.ca_id:
                    continue
                serial = payload.tbs.serial
                if serial not in self.issued:
                    continue
                record = DiscoveryRecord(self.ca_id, log_id, entry.number, now, via="poll")
                discoveries.append(record)
                self.sim.emit(now, self.ca_id, EventKind.DISCOVERY, record)
                self._on_revocation_evidence(serial, entry, log_id, now)
            self.cursors[log_id] = size
        return discoveries

    def on_sct_handoff(self, serial: int, scts: list[SCT], now: int) -> None:
        if serial not in self.issued:
            return
        record = DiscoveryRecord(self.ca_id, scts[0].log_id if scts else "-", 0, now, via="sct-handoff")
        self.sim.emit(now, self.ca_id, EventKind.DISCOVERY, record)
        milestones = self.sim.milestones.get(serial)
        if milestones is not None and milestones.t_handoff is None:
            milestones.t_handoff = now
        for sct in scts:
            self.known_sct_ts[serial] = max(self.known_sct_ts.get(serial, 0), sct.timestamp)
        self.evidence.setdefault(serial, scts[0] if scts else None)
        self._maybe_schedule_update(serial, now)

    def _on_revocation_evidence(self, serial: int, entry, log_id: str, now: int) -> None:
        self.known_sct_ts[serial] = max(self.known_sct_ts.get(serial, 0), entry.t_submission)
        self.evidence.setdefault(serial, entry)
        milestones = self.sim.milestones.get(serial)
        if milestones is not None and milestones.t_discovery is None:
            milestones.t_discovery = now
            milestones.discovery_log = log_id
        self._maybe_schedule_update(serial, now)

    def _maybe_schedule_update(self, serial: int, now: int) -> None:
        if serial in self.handled:
            return
        self.handled.add(serial)
        if self.config.misbehavior is CaMisbehavior.M1_SKIP_UPDATE:
            return  # keeps re-issuing GOOD on the refresh cycle
        wrong = self.config.misbehavior is CaMisbehavior.M2_WRONG_STATUS
        self.sim.schedule(
            now + self.config.update_delay_ms,
            lambda t: self._apply_update(serial, t, wrong=wrong),
        )

    def _apply_update(self, serial: int, now: int, *, wrong: bool) -> None:
        issued = self.issued[serial]
        if wrong:
            value = StatusValue.unknown()
        else:
            ext = issued.postcert.revocation_ext
            value = StatusValue.revoked(ext.reason_code, ext.invalidation_date)
        self.current_value[serial] = value
        # Revoked statuses must be timestamped after the earliest SCT issued
        # for the postcertificate, whatever the clock skew.
        t_status = max(self.clock(now), self.known_sct_ts.get(serial, 0) + 1)
        self._emit_status(serial, now, t_override=t_status)
        milestones = self.sim.milestones.get(serial)
        if milestones is not None and milestones.t_update is None:
            milestones.t_update = now

    # -- direct (current-pathway) revocation requests

    def on_direct_request(self, serial: int, now: int) -> None:
        milestones = self.sim.milestones.setdefault(serial, _Milestones(serial, self.ca_id))
        milestones.pathway = "CURRENT"
        milestones.t_receive = now
        self.sim.schedule(now + self.config.processing_delay_ms, lambda t: self._process_direct(serial, t))

    def _process_direct(self, serial: int, now: int) -> None:
        issued = self.issued.get(serial)
        if issued is None:
            return
        milestones = self.sim.milestones[serial]
        milestones.t_processed = now
        if self.config.misbehavior is CaMisbehavior.M3_EARLY_REVOKE:
            # Skips the mandatory postcertificate submission entirely.
            if serial not in self.handled:
                self.handled.add(serial)
                ext = issued.postcert.revocation_ext
                self.current_value[serial] = StatusValue.revoked(ext.reason_code)
                self._emit_status(serial, now)
                if milestones.t_update is None:
                    milestones.t_update = now
            return
        # Honest flow: submit the postcertificate first, then update.
        scts = self.sim.submit_postcert(
            actor=self.ca_id,
            issued=issued,
            k=min(2, len(self.sim.logs)),
            now=now,
            milestones=milestones,
        )
        for sct in scts:
            self.known_sct_ts[serial] = max(self.known_sct_ts.get(serial, 0), sct.timestamp)
        self.evidence.setdefault(serial, scts[0] if scts else None)
        self._maybe_schedule_update(serial, now)


class _ClientActor:
    def __init__(self, sim: "Simulation", config: SimClientConfig) -> None:
        self.sim = sim
        self.config = config
        self.client_id = config.client_id
        self.wallet: dict[int, _IssuedCert] = {}

    def revoke_via_logs(self, serial: int, now: int, k: int | None = None) -> None:
        issued = self.wallet.get(serial)
        if issued is None:
            raise ScenarioError(f"invalid-scenario: client holds no certificate {serial}")
        milestones = self.sim.milestones.setdefault(
            serial, _Milestones(serial, issued.cert.tbs.issuer)
        )
        milestones.t_request = now
        copies = k if k is not None else self.config.submit_copies
        skip = issued.cert.tbs.issuer if self.config.avoid_issuer_log else None
        scts = self.sim.submit_postcert(
            actor=self.client_id,
            issued=issued,
            k=copies,
            now=now,
            milestones=milestones,
            skip_operator=skip,
        )
        if self.config.sct_handoff and scts:
            ca = self.sim.cas[issued.cert.tbs.issuer]
            self.sim.schedule(
                now + self.config.handoff_delay_ms,
                lambda t: ca.on_sct_handoff(serial, scts, t),
            )


class Simulation:
    def __init__(self, scenario: Scenario) -> None:
        validate_scenario(scenario)
        self.scenario = scenario
        signers = (
            [l.log_id for l in scenario.logs]
            + [c.ca_id for c in scenario.cas]
            + ["background-ca", "background-key", "probe-ca", "probe-key"]
        )
        for event in scenario.schedule:
            if event.kind == "issue":
                signers.append(f"{event.params['client']}/{event.params['serial']}")
        self.registry = KeyRegistry.with_signers(signers)
        self.trust = TrustStore()
        self.milestones: dict[int, _Milestones] = {}
        self._events: list[tuple[int, int, object]] = []
        self._heap_seq = 0
        self._trace: list[tuple[int, str, EventKind, object]] = []
        self._rng_bg: dict[str, random.Random] = {}
        self._bg_serial = _BACKGROUND_SERIAL_BASE
        self._probe_serial = 0
        self._submission_events: list[int] = []  # trace indexes needing entry resolution

        bg_tbs = TbsCertificate(
            serial=0, subject="background-ca", issuer="background-ca",
            not_before=0, not_after=CERT_LIFETIME_MS * 4, public_key_id="background-ca",
        )
        self.background_root = sign_certificate(self.registry, "background-ca", bg_tbs)
        self.trust.add(self.background_root)
        probe_tbs = TbsCertificate(
            serial=0, subject="probe-ca", issuer="probe-ca",
            not_before=0, not_after=CERT_LIFETIME_MS * 4, public_key_id="probe-ca",
        )
        self.probe_root = sign_certificate(self.registry, "probe-ca", probe_tbs)
        self.trust.add(self.probe_root)

        self.cas: dict[str, _CaActor] = {}
        for ca_config in scenario.cas:
            actor = _CaActor(self, ca_config)
            self.cas[ca_config.ca_id] = actor
            self.trust.add(actor.root_cert)
        self.clients: dict[str, _ClientActor] = {
            c.client_id: _ClientActor(self, c) for c in scenario.clients
        }
        self.logs: dict[str, CtLog] = {}
        for sim_log in scenario.logs:
            self.logs[sim_log.log_id] = CtLog(
                sim_log.log_id,
                self.registry,
                self.trust,
                sim_log.config,
                seed=scenario.seed,
            )
        self.operators = {l.log_id: l.operator for l in scenario.logs if l.operator}
        trusted_ids = [l.log_id for l in scenario.logs if l.trusted]
        self.trusted = TrustedLogSet.of(*trusted_ids) if trusted_ids else None

    # -- plumbing

    def schedule(self, t: int, callback) -> None:
        heapq.heappush(self._events, (t, self._heap_seq, callback))
        self._heap_seq += 1

    def emit(self, t: int, actor: str, kind: EventKind, artifact: object) -> int:
        self._trace.append((t, actor, kind, artifact))
        return len(self._trace) - 1

    # -- shared submission helper

    def submit_postcert(
        self,
        actor: str,
        issued: _IssuedCert,
        k: int,
        now: int,
        milestones: _Milestones,
        skip_operator: str | None = None,
    ) -> list[SCT]:
        payload_bytes = encode_artifact(issued.postcert)
        payload_hash = SHA256.hash_leaf(payload_bytes)
        scts: list[SCT] = []
        submitted = 0
        for sim_log in self.scenario.logs:
            if submitted >= k:
                break
            if skip_operator and self.operators.get(sim_log.log_id) == skip_operator:
                continue
            log = self.logs[sim_log.log_id]
            try:
                sct = log.submit(issued.postcert, issued.chain, now)
            except LogError as exc:
                record = SubmissionRecord(
                    log_id=sim_log.log_id, t_request=now, t_response=now,
                    payload_hash=payload_hash, sct=None, error=exc.code,
                )
                self.emit(now, actor, EventKind.SUBMIT, record)
                continue
            submitted += 1
            scts.append(sct)
            record = SubmissionRecord(
                log_id=sim_log.log_id, t_request=now, t_response=now,
                payload_hash=payload_hash, sct=sct,
            )
            self._submission_events.append(
                self.emit(now, actor, EventKind.SUBMIT, record)
            )
            self.emit(now, actor, EventKind.SCT, sct)
            if milestones.t_first_submit is None:
                milestones.t_first_submit = now
            milestones.submit_log_ids.append(sim_log.log_id)
        if not scts:
            raise AllLogsRejectedError([("*", "rejected")])
        return scts

    def _filler_cert(self, issuer: str, key_id: str, serial: int, now: int) -> Certificate:
        tbs = TbsCertificate(
            serial=serial,
            subject=f"filler-{serial}.example",
            issuer=issuer,
            not_before=now,
            not_after=now + CERT_LIFETIME_MS,
            public_key_id=key_id,
        )
        return sign_certificate(self.registry, issuer, tbs)

    # -- background load

    def _schedule_background(self, sim_log: SimLogConfig) -> None:
        rate = sim_log.background_per_hour
        if rate <= 0:
            return
        rng = random.Random(derive_seed(self.scenario.seed, f"bg:{sim_log.log_id}"))
        self._rng_bg[sim_log.log_id] = rng

        def arrival(now: int) -> None:
            if now > self.scenario.horizon_ms:
                return
            self._bg_serial += 1
            cert = self._filler_cert("background-ca", "background-key", self._bg_serial, now)
            try:
                self.logs[sim_log.log_id].submit(cert, [self.background_root], now)
            except LogError:
                pass
            gap = max(1, int(rng.expovariate(rate / HOUR_MS)))
            self.schedule(now + gap, arrival)

        first = max(1, int(rng.expovariate(rate / HOUR_MS)))
        self.schedule(first, arrival)

    # -- probe actor

    def _probe_logs(self) -> list[str]:
        probe = self.scenario.probe
        if probe and probe.logs:
            return list(probe.logs)
        return [l.log_id for l in self.scenario.logs]

    def _schedule_probe(self) -> None:
        probe = self.scenario.probe
        if probe is None:
            return

        def sth_tick(now: int) -> None:
            if now > self.scenario.horizon_ms:
                return
            for log_id in self._probe_logs():
                obs = SthObservation(now, now, self.logs[log_id].get_sth(now))
                self.emit(now, "probe", EventKind.STH, obs)
            self.schedule(now + probe.sth_interval_ms, sth_tick)

        self.schedule(probe.sth_interval_ms, sth_tick)

        if probe.size_interval_ms:
            def size_tick(now: int) -> None:
                if now > self.scenario.horizon_ms:
                    return
                for log_id in self._probe_logs():
                    record = binary_search_size(self.logs[log_id], now)
                    self.emit(now, "probe", EventKind.SIZE, record)
                self.schedule(now + probe.size_interval_ms, size_tick)

            # offset size probes so they interleave with tree-head probes
            self.schedule(probe.size_interval_ms // 2 + 1, size_tick)

        if probe.submit_interval_ms:
            submitted = {log_id: 0 for log_id in self._probe_logs()}

            def submit_tick(now: int) -> None:
                if now > self.scenario.horizon_ms:
                    return
                if probe.submit_limit and all(
                    count >= probe.submit_limit for count in submitted.values()
                ):
                    return
                for log_id in self._probe_logs():
                    if probe.submit_limit and submitted[log_id] >= probe.submit_limit:
                        continue
                    submitted[log_id] += 1
                    self._probe_serial += 1
                    cert = self._filler_cert(
                        "probe-ca", "probe-key", _BACKGROUND_SERIAL_BASE * 2 + self._probe_serial, now
                    )
                    payload_hash = SHA256.hash_leaf(encode_artifact(cert))
                    try:
                        sct = self.logs[log_id].submit(cert, [self.probe_root], now)
                    except LogError as exc:
                        record = SubmissionRecord(log_id, now, now, payload_hash, None, error=exc.code)
                        self.emit(now, "probe", EventKind.SUBMIT, record)
                        continue
                    record = SubmissionRecord(log_id, now, now, payload_hash, sct)
                    self._submission_events.append(self.emit(now, "probe", EventKind.SUBMIT, record))
                    self.emit(now, "probe", EventKind.SCT, sct)
                self.schedule(now + probe.submit_interval_ms, submit_tick)

            self.schedule(probe.submit_interval_ms, submit_tick)

    # -- scheduled scenario events

    def _dispatch(self, event: ScheduledEvent, now: int) -> None:
        params = event.params
        if event.kind == "issue":
            ca = self.cas[params["ca"]]
            client = self.clients[params["client"]]
            ca.issue(client, int(params["serial"]), now)
        elif event.kind == "revoke-request":
            client = self.clients[params["client"]]
            k = int(params["k"]) if "k" in params else None
            client.revoke_via_logs(int(params["serial"]), now, k)
        elif event.kind == "revoke-direct":
            serial = int(params["serial"])
            delivery = int(params.get("delivery", "0"))
            issuer = None
            for ca in self.cas.values():
                if serial in ca.issued:
                    issuer = ca
                    break
            if issuer is None:
                raise ScenarioError(f"invalid-scenario: no issuer for serial {serial}")
            milestones = self.milestones.setdefault(serial, _Milestones(serial, issuer.ca_id))
            milestones.t_request = now
            self.schedule(now + delivery, lambda t: issuer.on_direct_request(serial, t))
        elif event.kind == "freeze-log":
            self.logs[params["log"]].freeze()
        elif event.kind == "drop-entry":
            self.logs[params["log"]].drop_serial(int(params["serial"]))

    # -- post-run auditing

    def _resolve_submissions(self) -> None:
        for index in self._submission_events:
            t, actor, kind, record = self._trace[index]
            log = self.logs.get(record.log_id)
            if log is None or record.sct is None:
                continue
            number = log._number_by_leaf_hash.get(record.sct.entry_hash)
            if number is not None:
                self._trace[index] = (t, actor, kind, replace(record, final_entry_number=number))

    def _breakdown_for(self, m: _Milestones) -> DelayBreakdown | None:
        if m.t_update is None:
            return None
        if m.pathway == "CURRENT":
            if m.t_request is None or m.t_receive is None or m.t_processed is None:
                return None
            return DelayBreakdown.current(
                delivery=m.t_receive - m.t_request,
                processing=m.t_processed - m.t_receive,
                update=m.t_update - m.t_processed,
            )
        if m.t_first_submit is None:
            return None
        if m.t_handoff is not None and (m.t_discovery is None or m.t_handoff <= m.t_discovery):
            # Out-of-band SCT handoff: the handoff plays the publication role.
            return DelayBreakdown.postcert(
                publication=m.t_handoff - m.t_first_submit,
                discovery=0,
                update=m.t_update - m.t_handoff,
            )
        if m.t_discovery is None or m.discovery_log is None:
            return None
        log = self.logs[m.discovery_log]
        entry_number = None
        for number, entry in enumerate(log.entries):
            payload = entry.decoded()
            if isinstance(payload, Postcertificate) and payload.tbs.serial == m.serial and \
                    payload.tbs.issuer == m.ca_id:
                entry_number = number
                break
        if entry_number is None:
            return None
        t_publish = log.merge_time_ref(entry_number)
        return DelayBreakdown.postcert(
            publication=t_publish - m.t_first_submit,
            discovery=m.t_discovery - t_publish,
            update=m.t_update - m.t_discovery,
        )

    def _check_bounds(self, horizon: int) -> None:
        for serial in sorted(self.milestones):
            m = self.milestones[serial]
            ca = self.cas.get(m.ca_id)
            if ca is not None and ca.config.misbehavior is not CaMisbehavior.NONE:
                continue
            breakdown = self._breakdown_for(m)
            if breakdown is None:
                continue
            for violation in check_bounds(breakdown, self.scenario.policy):
                record = ViolationRecord(
                    context=f"serial={serial}",
                    kind=violation.kind,
                    limit_ms=violation.limit_ms,
                    actual_ms=violation.actual_ms,
                )
                self.emit(horizon, "auditor", EventKind.VIOLATION, record)

    def observation_bag(self) -> ObservationBag:
        """Third-party monitor view: observed statuses, tree heads and SCTs,
        plus read access to the final log states."""
        if self.trusted is None:
            raise ScenarioError("invalid-scenario: no trusted logs")
        bag = ObservationBag(
            policy=self.scenario.policy,
            trusted=self.trusted,
            registry=self.registry,
        )
        for t, actor, kind, artifact in self._trace:
            if kind is EventKind.STATUS:
                bag.statuses.append(artifact)
            elif kind is EventKind.STH:
                bag.sth_observations.append(artifact.sth)
            elif kind is EventKind.SUBMIT and getattr(artifact, "sct", None) is not None:
                bag.scts.append(artifact.sct)
        bag.log_readers = dict(self.logs)
        return bag

    def _build_proofs(self, horizon: int) -> None:
        bag = self.observation_bag()
        for case in (Case.M1_MISSING_UPDATE, Case.M2_INCORRECT_STATUS, Case.M3_EARLY_STATUS,
                     Case.LOG_FORGET):
            try:
                proof = build_proof(case, bag)
            except InsufficientEvidenceError:
                continue
            if case in (Case.M1_MISSING_UPDATE, Case.M2_INCORRECT_STATUS):
                verdict = verify_m12(proof, bag.policy, bag.trusted, self.registry)
                t_proof = earliest_proof_time(case, bag.policy, entry=proof.entry, covering_sth=proof.sth)
            elif case is Case.M3_EARLY_STATUS:
                verdict = verify_m3(proof, bag.policy, bag.trusted, self.registry, bag.log_readers)
                t_proof = proof.status.t + bag.policy.mmd_ms
            else:
                verdict = verify_sct_disclosure(
                    proof, bag.policy.mmd_ms, bag.trusted, self.registry, bag.log_readers
                )
                t_proof = proof.sct.timestamp + bag.policy.mmd_ms
            record = ProofRecord(
                case=case.value,
                proven=verdict.proven,
                reason=verdict.reason or "",
                t_proof=t_proof,
                bundle=encode_artifact(proof),
            )
            self.emit(horizon, "auditor", EventKind.PROOF, record)

    def _ca_poll(self, ca: _CaActor, now: int) -> None:
        if now > self.scenario.horizon_ms:
            return
        ca.monitor_tick(now)
        self.schedule(now + ca.config.poll_interval_ms, lambda t, ca=ca: self._ca_poll(ca, t))

    # -- main loop

    def run(self) -> list[TraceEvent]:
        scenario = self.scenario
        for sim_log in scenario.logs:
            self._schedule_background(sim_log)
        self._schedule_probe()
        for ca in self.cas.values():
            self.schedule(ca.config.poll_interval_ms, lambda t, ca=ca: self._ca_poll(ca, t))
        for event in scenario.schedule:
            self.schedule(event.t, lambda t, e=event: self._dispatch(e, t))

        while self._events:
            t, _, callback = heapq.heappop(self._events)
            if t > scenario.horizon_ms:
                break
            callback(t)

        for log in self.logs.values():
            log.advance(scenario.horizon_ms)
        self._resolve_submissions()
        if scenario.check_delay_bounds:
            self._check_bounds(scenario.horizon_ms)
        if scenario.build_proofs:
            self._build_proofs(scenario.horizon_ms)

        events = []
        for seq, (t, actor, kind, artifact) in enumerate(self._trace):
            events.append(TraceEvent(t, seq, actor, kind, encode_artifact(artifact)))
        return events


def run(scenario: Scenario) -> list[TraceEvent]:
    """Run a scenario to its horizon and return the trace."""
    return Simulation(scenario).run()


# Scenario file round trip -----------------------------------------------------------

def _fmt_fields(pairs: list[tuple[str, object]]) -> str:
    return " ".join(f"{k}={v}" for k, v in pairs)


def scenario_to_text(scenario: Scenario) -> str:
    from .log import DuplicatePolicy, SthCacheMode, UpdateClass  # local names for values

    lines = [
        _fmt_fields(
            [
                ("scenario", scenario.name),
                ("seed", scenario.seed),
                ("horizon", scenario.horizon_ms),
                ("mrd_mode", scenario.policy.mode.value),
                ("mrd", scenario.policy.mrd_ms),
                ("mmd", scenario.policy.mmd_ms),
                ("build_proofs", int(scenario.build_proofs)),
                ("check_bounds", int(scenario.check_delay_bounds)),
            ]
        )
    ]
    for l in scenario.logs:
        c = l.config
        lines.append(
            "log "
            + _fmt_fields(
                [
                    ("id", l.log_id),
                    ("mmd", c.mmd_ms),
                    ("offset", c.clock_offset_ms),
                    ("class", c.update_class.value),
                    ("interval", c.update_interval_ms or 0),
                    ("delay", c.publication_delay),
                    ("dup", c.duplicate_policy.value),
                    ("cache", c.sth_cache.value),
                    ("cache_p", c.sth_cache_p),
                    ("self_signed", int(c.accept_self_signed)),
                    ("frozen", int(c.frozen)),
                    ("forget", int(c.forget)),
                    ("background", l.background_per_hour),
                    ("operator", l.operator or "-"),
                    ("trusted", int(l.trusted)),
                ]
            )
        )
    for ca in scenario.cas:
        lines.append(
            "ca "
            + _fmt_fields(
                [
                    ("id", ca.ca_id),
                    ("poll", ca.poll_interval_ms),
                    ("validity", ca.status_validity_ms),
                    ("update", ca.update_delay_ms),
                    ("processing", ca.processing_delay_ms),
                    ("offset", ca.clock_offset_ms),
                    ("misbehavior", ca.misbehavior.value),
                    ("monitors", ",".join(ca.monitored_logs) or "-"),
                ]
            )
        )
    for client in scenario.clients:
        lines.append(
            "client "
            + _fmt_fields(
                [
                    ("id", client.client_id),
                    ("copies", client.submit_copies),
                    ("handoff", int(client.sct_handoff)),
                    ("handoff_delay", client.handoff_delay_ms),
                    ("avoid_issuer", int(client.avoid_issuer_log)),
                    ("scheme", client.scheme.value),
                ]
            )
        )
    if scenario.probe is not None:
        p = scenario.probe
        lines.append(
            "probe "
            + _fmt_fields(
                [
                    ("sth", p.sth_interval_ms),
                    ("size", p.size_interval_ms),
                    ("submit", p.submit_interval_ms),
                    ("submit_limit", p.submit_limit),
                    ("logs", ",".join(p.logs) or "-"),
                ]
            )
        )
    for event in scenario.schedule:
        pairs = [("t", event.t), ("kind", event.kind)] + sorted(event.params.items())
        lines.append("event " + _fmt_fields(pairs))
    return "\n".join(lines) + "\n"


def scenario_from_text(text: str) -> Scenario:
    from .log import DuplicatePolicy, SthCacheMode, UpdateClass

    header: dict[str, str] = {}
    logs: list[SimLogConfig] = []
    cas: list[SimCaConfig] = []
    clients: list[SimClientConfig] = []
    probe: ProbeConfig | None = None
    schedule: list[ScheduledEvent] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("scenario="):
            header = dict(item.split("=", 1) for item in line.split())
            continue
        kind, _, rest = line.partition(" ")
        fields = dict(item.split("=", 1) for item in rest.split())
        if kind == "log":
            interval = int(fields["interval"]) or None
            logs.append(
                SimLogConfig(
                    log_id=fields["id"],
                    config=LogConfig(
                        mmd_ms=int(fields["mmd"]),
                        clock_offset_ms=int(fields["offset"]),
                        update_class=UpdateClass(fields["class"]),
                        update_interval_ms=interval,
                        publication_delay=fields["delay"],
                        duplicate_policy=DuplicatePolicy(fields["dup"]),
                        sth_cache=SthCacheMode(fields["cache"]),
                        sth_cache_p=float(fields["cache_p"]),
                        accept_self_signed=bool(int(fields["self_signed"])),
                        frozen=bool(int(fields["frozen"])),
                        forget=bool(int(fields["forget"])),
                    ),
                    background_per_hour=float(fields["background"]),
                    operator="" if fields["operator"] == "-" else fields["operator"],
                    trusted=bool(int(fields["trusted"])),
                )
            )
        elif kind == "ca":
            monitors = () if fields["monitors"] == "-" else tuple(fields["monitors"].split(","))
            cas.append(
                SimCaConfig(
                    ca_id=fields["id"],
                    poll_interval_ms=int(fields["poll"]),
                    status_validity_ms=int(fields["validity"]),
                    update_delay_ms=int(fields["update"]),
                    processing_delay_ms=int(fields["processing"]),
                    clock_offset_ms=int(fields["offset"]),
                    misbehavior=CaMisbehavior(fields["misbehavior"]),
                    monitored_logs=monitors,
                )
            )
        elif kind == "client":
            clients.append(
                SimClientConfig(
                    client_id=fields["id"],
                    submit_copies=int(fields["copies"]),
                    sct_handoff=bool(int(fields["handoff"])),
                    handoff_delay_ms=int(fields["handoff_delay"]),
                    avoid_issuer_log=bool(int(fields["avoid_issuer"])),
                    scheme=PostcertScheme(fields["scheme"]),
                )
            )
        elif kind == "probe":
            probe = ProbeConfig(
                sth_interval_ms=int(fields["sth"]),
                size_interval_ms=int(fields["size"]),
                submit_interval_ms=int(fields["submit"]),
                submit_limit=int(fields.get("submit_limit", "0")),
                logs=() if fields["logs"] == "-" else tuple(fields["logs"].split(",")),
            )
        elif kind == "event":
            params = {k: v for k, v in fields.items() if k not in ("t", "kind")}
            schedule.append(ScheduledEvent(t=int(fields["t"]), kind=fields["kind"], params=params))
        else:
            raise ScenarioError(f"invalid-scenario: unknown line {line!r}")
    if not header:
        raise ScenarioError("invalid-scenario: missing scenario header")
    policy = MrdPolicy(
        mode=MrdMode(header["mrd_mode"]), mrd_ms=int(header["mrd"]), mmd_ms=int(header["mmd"])
    )
    return Scenario(
        name=header["scenario"],
        seed=int(header["seed"]),
        horizon_ms=int(header["horizon"]),
        policy=policy,
        logs=tuple(logs),
        cas=tuple(cas),
        clients=tuple(clients),
        probe=probe,
        schedule=tuple(schedule),
        build_proofs=bool(int(header.get("build_proofs", "1"))),
        check_delay_bounds=bool(int(header.get("check_bounds", "1"))),
    )
