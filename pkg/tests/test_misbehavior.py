"""Misbehavior proof-time formulas, verifier predicates and builders."""

from __future__ import annotations

import dataclasses
import random

import pytest

from postcert.certs import CertRef, PostcertScheme, make_postcertificate
from postcert.crypto import KeyRegistry, Signature
from postcert.log import CtLog, LogConfig, LogEntry, STH, UpdateClass
from postcert.misbehavior import (
    Case,
    InsufficientEvidenceError,
    MisbehaviorProofM12,
    MisbehaviorProofM3,
    MrdMode,
    MrdPolicy,
    ObservationBag,
    SctDisclosureProof,
    TrustedLogSet,
    build_proof,
    earliest_proof_time,
    proof_to_text,
    verify_m12,
    verify_m3,
    verify_sct_disclosure,
)
from postcert.status import StatusValue, issue_status
from postcert.timeutil import DAY_MS, HOUR_MS, MINUTE_MS

MMD = DAY_MS
SUB_POLICY = MrdPolicy(MrdMode.FROM_SUBMISSION, mrd_ms=48 * HOUR_MS, mmd_ms=MMD)
PUB_POLICY = MrdPolicy(MrdMode.FROM_PUBLICATION, mrd_ms=24 * HOUR_MS, mmd_ms=MMD)


# -- policy invariants

def test_policy_validation():
    with pytest.raises(ValueError):
        MrdPolicy(MrdMode.FROM_SUBMISSION, mrd_ms=MMD, mmd_ms=MMD)
    with pytest.raises(ValueError):
        MrdPolicy(MrdMode.FROM_PUBLICATION, mrd_ms=0, mmd_ms=MMD)
    MrdPolicy(MrdMode.FROM_PUBLICATION, mrd_ms=1, mmd_ms=MMD)


# -- proof-time formulas (hand-evaluated expectations)

def _entry(t_submission: int, number: int = 0, log_id: str = "log1") -> LogEntry:
    return LogEntry(b"\x02payload", t_submission, log_id, number)


def _sth(t: int, treesize: int, log_id: str = "log1") -> STH:
    return STH(log_id, t, treesize, b"\x00" * 32, Signature(log_id, b"\x00" * 32))


def test_proof_time_m12_from_submission():
    entry = _entry(100 * HOUR_MS)
    policy = MrdPolicy(MrdMode.FROM_SUBMISSION, mrd_ms=48 * HOUR_MS, mmd_ms=MMD)
    assert earliest_proof_time(Case.M1_MISSING_UPDATE, policy, entry=entry) == 148 * HOUR_MS


def test_proof_time_m12_from_publication():
    entry = _entry(100 * HOUR_MS, number=4)
    sth = _sth(101 * HOUR_MS, treesize=5)
    policy = MrdPolicy(MrdMode.FROM_PUBLICATION, mrd_ms=24 * HOUR_MS, mmd_ms=MMD)
    result = earliest_proof_time(
        Case.M2_INCORRECT_STATUS, policy, entry=entry, covering_sth=sth
    )
    assert result == 125 * HOUR_MS


def test_proof_time_m3_ignores_mode(registry):
    status = issue_status(
        registry, "ca1", CertRef("ca1", 7), StatusValue.revoked(), 50 * HOUR_MS,
        10 * HOUR_MS, honest=False,
    )
    for policy in (SUB_POLICY, PUB_POLICY):
        assert earliest_proof_time(Case.M3_EARLY_STATUS, policy, status=status) == 74 * HOUR_MS


def test_proof_time_rejects_non_covering_sth():
    entry = _entry(0, number=9)
    sth = _sth(HOUR_MS, treesize=9)  # 9 <= 9: not covering
    with pytest.raises(ValueError):
        earliest_proof_time(Case.M1_MISSING_UPDATE, PUB_POLICY, entry=entry, covering_sth=sth)


# -- end-to-end world helpers

class World:
    """One CA, two logs, one revoked-by-postcertificate certificate."""

    def __init__(self, *, submit_at: int = 10 * HOUR_MS) -> None:
        self.registry = KeyRegistry.with_signers(["ca1", "log1", "log2", "leaf"])
        from postcert.certs import TbsCertificate, TrustStore, sign_certificate

        root_tbs = TbsCertificate(
            serial=0, subject="ca1", issuer="ca1",
            not_before=0, not_after=10**13, public_key_id="ca1",
        )
        self.root = sign_certificate(self.registry, "ca1", root_tbs)
        self.trust = TrustStore([self.root])
        leaf_tbs = TbsCertificate(
            serial=7, subject="site.example", issuer="ca1",
            not_before=0, not_after=10**13, public_key_id="leaf",
        )
        self.cert = sign_certificate(self.registry, "ca1", leaf_tbs)
        self.post = make_postcertificate(self.cert, PostcertScheme.CA_ISSUED, self.registry)
        self.ref = CertRef("ca1", 7)
        config = LogConfig(publication_delay=f"fixed:{30 * MINUTE_MS}",
                           update_class=UpdateClass.BUSY)
        self.logs = {
            "log1": CtLog("log1", self.registry, self.trust, config, seed=1),
            "log2": CtLog("log2", self.registry, self.trust, config, seed=2),
        }
        self.trusted = TrustedLogSet.of("log1", "log2")
        self.sct = self.logs["log1"].submit(self.post, [self.root], now=submit_at)
        self.submit_at = submit_at
        self.publish_at = submit_at + 30 * MINUTE_MS

    def advance(self, now: int) -> None:
        for log in self.logs.values():
            log.advance(now)

    def entry(self) -> LogEntry:
        self.advance(self.publish_at)
        return self.logs["log1"].get_entries(0, 0)[0]

    def covering_sth(self, at: int | None = None) -> STH:
        self.advance(at or self.publish_at)
        return self.logs["log1"].latest_sth()

    def audit(self, sth: STH):
        return self.logs["log1"].audit_proof(0, sth.treesize)

    def status(self, value: StatusValue, t: int):
        return issue_status(
            self.registry, "ca1", self.ref, value, t, 10 * HOUR_MS, honest=False,
        )

    def bag(self, policy: MrdPolicy, statuses, sths=None) -> ObservationBag:
        return ObservationBag(
            policy=policy,
            trusted=self.trusted,
            registry=self.registry,
            statuses=list(statuses),
            sth_observations=list(sths or []),
            log_readers=dict(self.logs),
        )


def _m12_proof(world: World, policy: MrdPolicy, status) -> MisbehaviorProofM12:
    entry = world.entry()
    sth = world.covering_sth()
    return MisbehaviorProofM12(entry=entry, sth=sth, status=status, audit=world.audit(sth))


def test_m2_wrong_status_after_deadline_proven():
    world = World()
    entry = world.entry()
    sth = world.covering_sth()
    t_proof = earliest_proof_time(
        Case.M2_INCORRECT_STATUS, PUB_POLICY, entry=entry, covering_sth=sth
    )
    status = world.status(StatusValue.good(), t_proof + HOUR_MS)
    proof = _m12_proof(world, PUB_POLICY, status)
    verdict = verify_m12(proof, PUB_POLICY, world.trusted, world.registry)
    assert verdict.proven


def test_m12_flips_exactly_at_t_proof():
    for policy in (SUB_POLICY, PUB_POLICY):
        world = World()
        entry = world.entry()
        sth = world.covering_sth()
        t_proof = earliest_proof_time(
            Case.M1_MISSING_UPDATE, policy, entry=entry, covering_sth=sth
        )
        early = _m12_proof(world, policy, world.status(StatusValue.good(), t_proof - 1))
        at = _m12_proof(world, policy, world.status(StatusValue.good(), t_proof))
        late = _m12_proof(world, policy, world.status(StatusValue.good(), t_proof + 1))
        assert verify_m12(early, policy, world.trusted, world.registry).reason == "status-too-early"
        assert verify_m12(at, policy, world.trusted, world.registry).proven
        assert verify_m12(late, policy, world.trusted, world.registry).proven


def test_m12_rejects_untrusted_log():
    world = World()
    status = world.status(StatusValue.good(), 10 * DAY_MS)
    proof = _m12_proof(world, PUB_POLICY, status)
    narrow = TrustedLogSet.of("log2")
    assert verify_m12(proof, PUB_POLICY, narrow, world.registry).reason == "untrusted-log"


def test_m12_rejects_bad_sth_signature():
    world = World()
    status = world.status(StatusValue.good(), 10 * DAY_MS)
    proof = _m12_proof(world, PUB_POLICY, status)
    bad_sth = dataclasses.replace(proof.sth, signature=Signature("log1", b"\x00" * 32))
    bad = dataclasses.replace(proof, sth=bad_sth)
    assert verify_m12(bad, PUB_POLICY, world.trusted, world.registry).reason == "bad-sth-signature"


def test_m12_rejects_mismatched_audit_treesize():
    world = World()
    entry = world.entry()
    first_sth = world.covering_sth()
    # grow the log so a bigger tree head exists
    extra = make_postcertificate(
        world.cert, PostcertScheme.CA_ISSUED, world.registry, reason="superseded"
    )
    world.logs["log1"].submit(extra, [world.root], now=world.publish_at + HOUR_MS)
    world.advance(world.publish_at + 2 * HOUR_MS)
    big_sth = world.logs["log1"].latest_sth()
    assert big_sth.treesize > first_sth.treesize
    status = world.status(StatusValue.good(), 10 * DAY_MS)
    mismatched = MisbehaviorProofM12(
        entry=entry, sth=big_sth, status=status, audit=world.audit(first_sth)
    )
    verdict = verify_m12(mismatched, PUB_POLICY, world.trusted, world.registry)
    assert verdict.reason == "bad-audit-proof"


def test_m12_rejects_certificate_mismatch():
    world = World()
    other_ref = CertRef("ca1", 999)
    status = issue_status(
        world.registry, "ca1", other_ref, StatusValue.good(), 10 * DAY_MS,
        10 * HOUR_MS, honest=False,
    )
    proof = _m12_proof(world, PUB_POLICY, status)
    verdict = verify_m12(proof, PUB_POLICY, world.trusted, world.registry)
    assert verdict.reason == "certificate-mismatch"


def test_m12_rejects_correct_revoked_status():
    world = World()
    status = world.status(StatusValue.revoked("unspecified"), 10 * DAY_MS)
    proof = _m12_proof(world, PUB_POLICY, status)
    verdict = verify_m12(proof, PUB_POLICY, world.trusted, world.registry)
    assert verdict.reason == "status-not-incorrect"


def test_m12_strict_mode_flags_wrong_reason():
    world = World()
    status = world.status(StatusValue.revoked("superseded"), 10 * DAY_MS)
    proof = _m12_proof(world, PUB_POLICY, status)
    default = verify_m12(proof, PUB_POLICY, world.trusted, world.registry)
    strict = verify_m12(proof, PUB_POLICY, world.trusted, world.registry, strict_status=True)
    assert default.reason == "status-not-incorrect"
    assert strict.proven


def test_m12_unknown_status_counts_as_incorrect():
    world = World()
    status = world.status(StatusValue.unknown(), 10 * DAY_MS)
    proof = _m12_proof(world, PUB_POLICY, status)
    assert verify_m12(proof, PUB_POLICY, world.trusted, world.registry).proven


def test_m12_verdict_totality_random_tampering():
    world = World()
    status = world.status(StatusValue.good(), 10 * DAY_MS)
    proof = _m12_proof(world, PUB_POLICY, status)
    rng = random.Random(7)
    for _ in range(50):
        field = rng.choice(["entry", "sth", "status", "audit"])
        tampered = proof
        if field == "entry":
            tampered = dataclasses.replace(
                proof, entry=dataclasses.replace(proof.entry, number=rng.randrange(10))
            )
        elif field == "sth":
            tampered = dataclasses.replace(
                proof, sth=dataclasses.replace(proof.sth, treesize=rng.randrange(5))
            )
        elif field == "status":
            tampered = dataclasses.replace(
                proof, status=world.status(StatusValue.good(), rng.randrange(10 * DAY_MS))
            )
        else:
            tampered = dataclasses.replace(
                proof, audit=dataclasses.replace(proof.audit, entry_number=rng.randrange(8))
            )
        verdict = verify_m12(tampered, PUB_POLICY, world.trusted, world.registry)
        assert verdict.proven or verdict.reason  # total: PROVEN or reasoned rejection


# -- M3

def _m3_world_without_postcert():
    registry = KeyRegistry.with_signers(["ca1", "log1", "log2", "leaf"])
    from postcert.certs import TbsCertificate, TrustStore, sign_certificate

    root = sign_certificate(registry, "ca1", TbsCertificate(
        serial=0, subject="ca1", issuer="ca1",
        not_before=0, not_after=10**13, public_key_id="ca1",
    ))
    trust = TrustStore([root])
    config = LogConfig(update_class=UpdateClass.PERIODIC, update_interval_ms=HOUR_MS,
                       publication_delay="fixed:60000")
    logs = {
        "log1": CtLog("log1", registry, trust, config, seed=1),
        "log2": CtLog("log2", registry, trust, config, seed=2),
    }
    return registry, trust, root, logs


def test_m3_revocation_without_postcertificate_proven(registry):
    reg, trust, root, logs = _m3_world_without_postcert()
    status = issue_status(
        reg, "ca1", CertRef("ca1", 7), StatusValue.revoked(), 5 * HOUR_MS,
        10 * HOUR_MS, honest=False,
    )
    t_proof = status.t + MMD
    for log in logs.values():
        log.advance(t_proof + HOUR_MS)
    sths = tuple(log.latest_sth() for log in logs.values())
    proof = MisbehaviorProofM3(status=status, sth_set=sths)
    verdict = verify_m3(proof, PUB_POLICY, TrustedLogSet.of("log1", "log2"), reg, logs)
    assert verdict.proven


def test_m3_counterexample_entry_rejects():
    world = World()
    # status issued after the postcertificate submission: honest, refutable
    status = world.status(StatusValue.revoked(), world.sct.timestamp + HOUR_MS)
    t_proof = status.t + MMD
    world.advance(t_proof + HOUR_MS)
    for log in world.logs.values():
        log.sign_tree_head(t_proof + HOUR_MS)
    sths = tuple(log.latest_sth() for log in world.logs.values())
    proof = MisbehaviorProofM3(status=status, sth_set=sths)
    verdict = verify_m3(proof, PUB_POLICY, world.trusted, world.registry, world.logs)
    assert verdict.reason == "counterexample-entry"


def test_m3_boundary_is_strict_before():
    """An entry submitted exactly at the status time is not a counterexample."""
    world = World()
    status = world.status(StatusValue.revoked(), world.sct.timestamp)
    t_proof = status.t + MMD
    world.advance(t_proof + HOUR_MS)
    for log in world.logs.values():
        log.sign_tree_head(t_proof + HOUR_MS)
    sths = tuple(log.latest_sth() for log in world.logs.values())
    proof = MisbehaviorProofM3(status=status, sth_set=sths)
    verdict = verify_m3(proof, PUB_POLICY, world.trusted, world.registry, world.logs)
    assert verdict.proven


def test_m3_missing_log_coverage_rejects():
    reg, trust, root, logs = _m3_world_without_postcert()
    status = issue_status(
        reg, "ca1", CertRef("ca1", 7), StatusValue.revoked(), 5 * HOUR_MS,
        10 * HOUR_MS, honest=False,
    )
    t_proof = status.t + MMD
    logs["log1"].advance(t_proof + HOUR_MS)
    proof = MisbehaviorProofM3(status=status, sth_set=(logs["log1"].latest_sth(),))
    verdict = verify_m3(proof, PUB_POLICY, TrustedLogSet.of("log1", "log2"), reg, logs)
    assert verdict.reason == "missing-log-coverage"


def test_m3_flips_exactly_at_t_proof():
    reg, trust, root, logs = _m3_world_without_postcert()
    status = issue_status(
        reg, "ca1", CertRef("ca1", 7), StatusValue.revoked(), 5 * HOUR_MS,
        10 * HOUR_MS, honest=False,
    )
    t_proof = status.t + MMD
    for log in logs.values():
        log.advance(t_proof + HOUR_MS)
    trusted = TrustedLogSet.of("log1", "log2")

    def sths_at(t: int) -> tuple[STH, ...]:
        from postcert.log import sth_signing_payload

        out = []
        for log in logs.values():
            size = log.published_size()
            root_hash = log.tree.root(size)
            sig = reg.sign(log.log_id, sth_signing_payload(log.log_id, t, size, root_hash))
            out.append(STH(log.log_id, t, size, root_hash, sig))
        return tuple(out)

    early = MisbehaviorProofM3(status=status, sth_set=sths_at(t_proof - 1))
    at = MisbehaviorProofM3(status=status, sth_set=sths_at(t_proof))
    assert verify_m3(early, PUB_POLICY, trusted, reg, logs).reason == "sth-too-early"
    assert verify_m3(at, PUB_POLICY, trusted, reg, logs).proven


def test_m3_rejects_good_status():
    world = World()
    status = world.status(StatusValue.good(), HOUR_MS)
    proof = MisbehaviorProofM3(status=status, sth_set=())
    verdict = verify_m3(proof, PUB_POLICY, world.trusted, world.registry, world.logs)
    assert verdict.reason == "status-not-nongood"


# -- SCT disclosure (log misbehavior)

def test_sct_disclosure_proven_when_entry_never_published():
    registry = KeyRegistry.with_signers(["ca1", "log1", "leaf"])
    from postcert.certs import TbsCertificate, TrustStore, sign_certificate

    root = sign_certificate(registry, "ca1", TbsCertificate(
        serial=0, subject="ca1", issuer="ca1",
        not_before=0, not_after=10**13, public_key_id="ca1",
    ))
    trust = TrustStore([root])
    cert = sign_certificate(registry, "ca1", TbsCertificate(
        serial=7, subject="x.example", issuer="ca1",
        not_before=0, not_after=10**13, public_key_id="leaf",
    ))
    post = make_postcertificate(cert, PostcertScheme.CA_ISSUED, registry)
    config = LogConfig(update_class=UpdateClass.PERIODIC, update_interval_ms=HOUR_MS,
                       publication_delay="fixed:1000", forget=True)
    log = CtLog("log1", registry, trust, config, seed=3)
    sct = log.submit(post, [root], now=HOUR_MS)
    log.advance(sct.timestamp + MMD + 2 * HOUR_MS)
    sth = log.latest_sth()
    assert sth.t >= sct.timestamp + MMD
    proof = SctDisclosureProof(sct=sct, sth=sth)
    verdict = verify_sct_disclosure(
        proof, MMD, TrustedLogSet.of("log1"), registry, {"log1": log}
    )
    assert verdict.proven
    # same evidence against an honest log that did publish: rejected
    honest_config = dataclasses.replace(config, forget=False)
    honest = CtLog("log1", registry, trust, honest_config, seed=3)
    honest_sct = honest.submit(post, [root], now=HOUR_MS)
    honest.advance(honest_sct.timestamp + MMD + 2 * HOUR_MS)
    honest_proof = SctDisclosureProof(sct=honest_sct, sth=honest.latest_sth())
    verdict = verify_sct_disclosure(
        honest_proof, MMD, TrustedLogSet.of("log1"), registry, {"log1": honest}
    )
    assert verdict.reason == "entry-published"


# -- builders

def test_build_proof_fails_on_honest_observations():
    world = World()
    # honest: GOOD before revocation, REVOKED after the SCT
    good = world.status(StatusValue.good(), world.submit_at - HOUR_MS)
    revoked = world.status(StatusValue.revoked(), world.sct.timestamp + 2 * HOUR_MS)
    horizon = world.sct.timestamp + 3 * DAY_MS
    world.advance(horizon)
    for log in world.logs.values():
        log.sign_tree_head(horizon)
    sths = [log.latest_sth() for log in world.logs.values()]
    bag = world.bag(PUB_POLICY, [good, revoked], sths)
    for case in (Case.M1_MISSING_UPDATE, Case.M2_INCORRECT_STATUS, Case.LOG_FORGET):
        with pytest.raises(InsufficientEvidenceError):
            build_proof(case, bag)
    m3 = build_proof(Case.M3_EARLY_STATUS, bag)
    verdict = verify_m3(m3, PUB_POLICY, world.trusted, world.registry, world.logs)
    assert not verdict.proven


def test_build_m1_bundle_accepted_by_verifier():
    world = World()
    entry = world.entry()
    sth = world.covering_sth()
    t_proof = earliest_proof_time(
        Case.M1_MISSING_UPDATE, PUB_POLICY, entry=entry, covering_sth=sth
    )
    stale_good = world.status(StatusValue.good(), t_proof + HOUR_MS)
    bag = world.bag(PUB_POLICY, [stale_good], [sth])
    proof = build_proof(Case.M1_MISSING_UPDATE, bag)
    assert verify_m12(proof, PUB_POLICY, world.trusted, world.registry).proven


def test_build_m1_insufficient_before_t_proof():
    world = World()
    entry = world.entry()
    sth = world.covering_sth()
    t_proof = earliest_proof_time(
        Case.M1_MISSING_UPDATE, PUB_POLICY, entry=entry, covering_sth=sth
    )
    early_good = world.status(StatusValue.good(), t_proof - 1)
    bag = world.bag(PUB_POLICY, [early_good], [sth])
    with pytest.raises(InsufficientEvidenceError):
        build_proof(Case.M1_MISSING_UPDATE, bag)


def test_proof_text_round_trip():
    world = World()
    status = world.status(StatusValue.good(), 10 * DAY_MS)
    proof = _m12_proof(world, PUB_POLICY, status)
    from postcert.encoding import text_block_bytes
    from postcert.encoding import decode_artifact

    text = proof_to_text(proof)
    assert decode_artifact(text_block_bytes(text)) == proof


def test_mode_ordering_of_proof_times():
    """Publication-anchored proofs come no later whenever the publication
    delay stays below the deadline difference."""
    rng = random.Random(21)
    for _ in range(100):
        submit_t = rng.randrange(0, 10**9)
        pub_delay = rng.randrange(0, MMD)
        mrd_b = rng.randrange(1, 24 * HOUR_MS)
        mrd_a = MMD + mrd_b
        entry = _entry(submit_t)
        sth = _sth(submit_t + pub_delay, treesize=1)
        t_sub = earliest_proof_time(
            Case.M1_MISSING_UPDATE,
            MrdPolicy(MrdMode.FROM_SUBMISSION, mrd_a, MMD),
            entry=entry,
        )
        t_pub = earliest_proof_time(
            Case.M1_MISSING_UPDATE,
            MrdPolicy(MrdMode.FROM_PUBLICATION, mrd_b, MMD),
            entry=entry,
            covering_sth=sth,
        )
        if pub_delay <= mrd_a - mrd_b:
            assert t_pub <= t_sub
