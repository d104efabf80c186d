"""Log behavior: SCT issuance, publication, tree heads, pathologies, snapshots."""

from __future__ import annotations

import random

import pytest

from postcert.certs import PostcertScheme, TbsCertificate, make_postcertificate, sign_certificate
from postcert.crypto import SHA256
from postcert.encoding import encode_artifact
from postcert.log import (
    CtLog,
    DuplicatePolicy,
    ERR_CHAIN_REJECTED,
    ERR_LOG_FROZEN,
    LogConfig,
    LogError,
    SnapshotLogReader,
    SthCacheMode,
    UpdateClass,
    log_snapshot_text,
    verify_audit_proof,
    verify_consistency_sths,
    verify_sct,
    verify_sth,
)
from postcert.timeutil import HOUR_MS, MINUTE_MS, SECOND_MS

from oracles import BruteForceTree


def _make_log(registry, trust, **config) -> CtLog:
    config.setdefault("publication_delay", "fixed:1000")
    return CtLog("log1", registry, trust, LogConfig(**config), seed=42)


def _cert_factory(registry):
    counter = iter(range(1000, 100000))

    def make(now: int = 0):
        serial = next(counter)
        tbs = TbsCertificate(
            serial=serial, subject=f"s{serial}.example", issuer="ca1",
            not_before=0, not_after=10**12, public_key_id="leaf-key-1",
        )
        return sign_certificate(registry, "ca1", tbs)

    return make


def test_submit_returns_verifiable_sct(registry, trust, ca_root, leaf_cert):
    log = _make_log(registry, trust)
    sct = log.submit(leaf_cert, [ca_root], now=1000)
    assert sct.log_id == "log1"
    assert sct.timestamp == 1000  # zero clock offset
    assert verify_sct(sct, encode_artifact(leaf_cert), registry)


def test_entry_published_within_mmd(registry, trust, ca_root, leaf_cert):
    log = _make_log(registry, trust, mmd_ms=HOUR_MS, publication_delay=f"fixed:{10 * MINUTE_MS}")
    sct = log.submit(leaf_cert, [ca_root], now=0)
    assert log.published_size(5 * MINUTE_MS) == 0
    assert log.published_size(10 * MINUTE_MS) == 1
    covering = [s for s in log.sth_history if s.treesize >= 1]
    assert covering and covering[0].t <= sct.timestamp + HOUR_MS
    entry = log.get_entries(0, 0)[0]
    assert entry.t_submission == sct.timestamp


def test_chain_rejected(registry, trust, leaf_cert):
    log = _make_log(registry, trust)
    with pytest.raises(LogError) as err:
        log.submit(leaf_cert, [leaf_cert], now=0)
    assert err.value.code == ERR_CHAIN_REJECTED


def test_frozen_log_rejects(registry, trust, ca_root, leaf_cert):
    log = _make_log(registry, trust, frozen=True)
    with pytest.raises(LogError) as err:
        log.submit(leaf_cert, [ca_root], now=0)
    assert err.value.code == ERR_LOG_FROZEN


def test_forget_mode_returns_sct_but_never_publishes(registry, trust, ca_root, leaf_cert):
    log = _make_log(registry, trust, forget=True, mmd_ms=HOUR_MS)
    sct = log.submit(leaf_cert, [ca_root], now=0)
    assert sct is not None
    assert log.published_size(10 * HOUR_MS) == 0


def test_duplicate_return_old_sct_is_byte_identical(registry, trust, ca_root, leaf_cert):
    log = _make_log(registry, trust)
    first = log.submit(leaf_cert, [ca_root], now=1000)
    second = log.submit(leaf_cert, [ca_root], now=99000)
    assert encode_artifact(first) == encode_artifact(second)
    assert log.published_size(10 * HOUR_MS) == 1


def test_duplicate_reinsert_creates_two_entries(registry, trust, ca_root, leaf_cert):
    log = _make_log(registry, trust, duplicate_policy=DuplicatePolicy.REINSERT)
    first = log.submit(leaf_cert, [ca_root], now=1000)
    second = log.submit(leaf_cert, [ca_root], now=99000)
    assert first.timestamp != second.timestamp
    entries = log.get_entries(0, 10, now=10 * HOUR_MS)
    assert len(entries) == 2
    assert entries[0].payload == entries[1].payload
    assert entries[0].t_submission != entries[1].t_submission


def test_self_signed_acceptance_is_config_gated(registry, trust, ca_root, leaf_cert):
    post = make_postcertificate(leaf_cert, PostcertScheme.SELF_SIGNED, registry)
    plain = _make_log(registry, trust)
    with pytest.raises(LogError):
        plain.submit(post, [leaf_cert, ca_root], now=0)
    modified = _make_log(registry, trust, accept_self_signed=True)
    sct = modified.submit(post, [leaf_cert, ca_root], now=0)
    assert sct is not None


def test_sign_tree_head_matches_oracle(registry, trust, ca_root):
    rng = random.Random(5)
    make = _cert_factory(registry)
    log = _make_log(registry, trust, publication_delay="fixed:0")
    payloads = []
    now = 0
    for _ in range(100):
        now += rng.randrange(1, 5000)
        cert = make()
        payloads.append(encode_artifact(cert))
        log.submit(cert, [ca_root], now=now)
    sth = log.sign_tree_head(now + 1)
    assert sth.treesize == 100
    oracle = BruteForceTree(payloads)
    assert sth.root_hash == oracle.root(100)
    assert verify_sth(sth, registry)


def test_empty_log_sth(registry, trust):
    log = _make_log(registry, trust)
    sth = log.sign_tree_head(0)
    assert sth.treesize == 0
    assert sth.root_hash == SHA256.empty_root()


def test_single_entry_root_is_leaf_hash(registry, trust, ca_root, leaf_cert):
    log = _make_log(registry, trust, publication_delay="fixed:0")
    log.submit(leaf_cert, [ca_root], now=5)
    sth = log.sign_tree_head(6)
    assert sth.root_hash == SHA256.hash_leaf(encode_artifact(leaf_cert))


def test_sth_monotone_treesize(registry, trust, ca_root):
    make = _cert_factory(registry)
    log = _make_log(registry, trust, publication_delay="uniform:0:60000")
    now = 0
    for _ in range(50):
        now += 10_000
        log.submit(make(), [ca_root], now=now)
    log.advance(now + HOUR_MS)
    sizes = [s.treesize for s in log.sth_history]
    assert sizes == sorted(sizes)
    times = [s.t for s in log.sth_history]
    assert times == sorted(times)


def test_entry_numbers_dense_and_t_submission_monotone(registry, trust, ca_root):
    make = _cert_factory(registry)
    log = _make_log(registry, trust, publication_delay="uniform:0:600000")
    now = 0
    for _ in range(80):
        now += 7_000
        log.submit(make(), [ca_root], now=now)
    entries = log.get_entries(0, 100, now=now + HOUR_MS)
    assert [e.number for e in entries] == list(range(len(entries)))
    stamps = [e.t_submission for e in entries]
    assert stamps == sorted(stamps)


def test_get_entries_range_semantics(registry, trust, ca_root):
    make = _cert_factory(registry)
    log = _make_log(registry, trust, publication_delay="fixed:0")
    for i in range(5):
        log.submit(make(), [ca_root], now=i + 1)
    log.advance(100)
    assert len(log.get_entries(0, 2)) == 3
    assert len(log.get_entries(0, 99)) == 5
    assert log.get_entries(5, 9) == []
    with pytest.raises(ValueError):
        log.get_entries(3, 2)


def test_audit_and_consistency_proofs_verify(registry, trust, ca_root):
    make = _cert_factory(registry)
    log = _make_log(registry, trust, publication_delay="fixed:0")
    payloads = []
    for i in range(20):
        cert = make()
        payloads.append(encode_artifact(cert))
        log.submit(cert, [ca_root], now=i + 1)
    log.advance(100)
    sth_small = log.sign_tree_head(101)
    # grow further
    for i in range(12):
        cert = make()
        payloads.append(encode_artifact(cert))
        log.submit(cert, [ca_root], now=200 + i)
    log.advance(400)
    sth_big = log.sign_tree_head(401)
    proof = log.audit_proof(7, sth_big.treesize)
    assert verify_audit_proof(payloads[7], proof, sth_big)
    assert not verify_audit_proof(payloads[8], proof, sth_big)
    mismatched = log.audit_proof(7, sth_small.treesize)
    assert not verify_audit_proof(payloads[7], mismatched, sth_big)
    path = log.consistency_proof(sth_small.treesize, sth_big.treesize)
    assert verify_consistency_sths(sth_small, sth_big, path)
    with pytest.raises(LogError):
        log.audit_proof(99, 200)


def test_get_proof_by_hash(registry, trust, ca_root, leaf_cert):
    log = _make_log(registry, trust, publication_delay="fixed:0")
    log.submit(leaf_cert, [ca_root], now=1)
    log.advance(10)
    leaf_hash = SHA256.hash_leaf(encode_artifact(leaf_cert))
    proof = log.get_proof_by_hash(leaf_hash, 1)
    assert proof.entry_number == 0


def test_periodic_log_signs_on_interval_even_without_change(registry, trust):
    log = _make_log(
        registry, trust,
        update_class=UpdateClass.PERIODIC, update_interval_ms=120 * SECOND_MS,
    )
    log.advance(10 * MINUTE_MS)
    times = [s.t for s in log.sth_history]
    assert times == [0] + [120_000 * k for k in range(1, 6)]


def test_unbusy_log_signs_one_sth_per_entry(registry, trust, ca_root):
    make = _cert_factory(registry)
    log = _make_log(
        registry, trust, update_class=UpdateClass.UNBUSY, publication_delay="fixed:1000"
    )
    for i in range(4):
        log.submit(make(), [ca_root], now=1000 * i)
    log.advance(MINUTE_MS)
    increments = [
        b.treesize - a.treesize for a, b in zip(log.sth_history, log.sth_history[1:])
    ]
    assert increments == [1, 1, 1, 1]


def test_busy_log_batches_simultaneous_merges(registry, trust, ca_root):
    make = _cert_factory(registry)
    log = _make_log(registry, trust, update_class=UpdateClass.BUSY, publication_delay="fixed:1000")
    for _ in range(3):
        log.submit(make(), [ca_root], now=0)
    log.advance(MINUTE_MS)
    assert log.sth_history[-1].treesize == 3
    assert len(log.sth_history) == 2  # initial empty head + one batch head


def test_out_of_order_fraction_of_responses(registry, trust, ca_root):
    make = _cert_factory(registry)
    log = _make_log(
        registry, trust,
        sth_cache=SthCacheMode.OUT_OF_ORDER, sth_cache_p=0.10,
        publication_delay="fixed:100",
    )
    regressions = 0
    best = None
    calls = 10_000
    now = 0
    for _ in range(calls):
        now += 1000
        log.submit(make(), [ca_root], now=now)
        sth = log.get_sth(now + 500)
        key = (sth.t, sth.treesize)
        if best is not None and (key[0] < best[0] or key[1] < best[1]):
            regressions += 1
        else:
            best = key
    assert abs(regressions / calls - 0.10) < 0.02


def test_lagging_log_serves_entries_beyond_advertised_size(registry, trust, ca_root):
    make = _cert_factory(registry)
    log = _make_log(
        registry, trust,
        sth_cache=SthCacheMode.LAGGING, sth_cache_p=1.0,
        publication_delay="fixed:100",
    )
    now = 0
    for _ in range(50):
        now += 1000
        log.submit(make(), [ca_root], now=now)
    log.advance(now + 1000)
    sth = log.get_sth(now + 1000)
    size = log.published_size()
    assert sth.treesize < size
    highest = log.get_entries(size - 1, size - 1)[0]
    assert highest.number >= sth.treesize  # index M >= advertised N


def test_honest_get_sth_is_monotone(registry, trust, ca_root):
    make = _cert_factory(registry)
    log = _make_log(registry, trust, publication_delay="fixed:100")
    previous = None
    now = 0
    for _ in range(200):
        now += 1000
        log.submit(make(), [ca_root], now=now)
        sth = log.get_sth(now + 500)
        if previous is not None:
            assert (sth.t, sth.treesize) >= previous
        previous = (sth.t, sth.treesize)


def test_append_only_consistency_between_all_honest_sths(registry, trust, ca_root):
    make = _cert_factory(registry)
    log = _make_log(registry, trust, publication_delay="fixed:0")
    for i in range(30):
        log.submit(make(), [ca_root], now=i + 1)
        log.sign_tree_head(i + 1)
    heads = log.sth_history
    for a in range(0, len(heads), 7):
        for b in range(a, len(heads), 5):
            path = log.consistency_proof(heads[a].treesize, heads[b].treesize)
            assert verify_consistency_sths(heads[a], heads[b], path)


def test_clock_offset_shifts_sct_and_sth_timestamps(registry, trust, ca_root, leaf_cert):
    log = _make_log(registry, trust, clock_offset_ms=2500)
    sct = log.submit(leaf_cert, [ca_root], now=1000)
    assert sct.timestamp == 3500
    sth = log.sign_tree_head(2000)
    assert sth.t == 4500


def test_snapshot_round_trip_serves_same_proofs(registry, trust, ca_root):
    make = _cert_factory(registry)
    log = _make_log(registry, trust, publication_delay="fixed:0")
    for i in range(9):
        log.submit(make(), [ca_root], now=i + 1)
    log.advance(100)
    final = log.sign_tree_head(101)
    reader = SnapshotLogReader.from_text(log_snapshot_text(log))
    assert reader.log_id == "log1"
    assert reader.published_size() == 9
    assert reader.latest_sth() == final
    for i in range(9):
        assert reader.audit_proof(i, 9) == log.audit_proof(i, 9)
    assert reader.consistency_proof(4, 9) == log.consistency_proof(4, 9)
