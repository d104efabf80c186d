"""Command-line entry points: simulate, analyze, verify-proof, classify,
project-growth, probe.

Exit codes: 0 success, 1 usage error, 2 proof verification rejected,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .encoding import DecodeError, decode_artifact, text_block_bytes
from .log import SnapshotLogReader, log_snapshot_text
from .misbehavior import (
    MisbehaviorProofM12,
    MisbehaviorProofM3,
    MrdMode,
    MrdPolicy,
    SctDisclosureProof,
    TrustedLogSet,
    proof_to_text,
    verify_m12,
    verify_m3,
    verify_sct_disclosure,
)
from .crypto import KeyRegistry
from .presets import PRESETS, build_preset, default_policy
from .probe import (
    AnalysisError,
    classify,
    clock_offsets,
    collision_report,
    growth_projection,
    lagging_fraction,
    out_of_order_fraction,
    percentile_summary,
    request_processing_stats,
    sth_update_rate,
    submission_to_publication,
)
from .sim import Simulation, scenario_from_text
from .timeutil import parse_duration_ms
from .trace import (
    EventKind,
    ObservationSet,
    SthObservation,
    observations_from_events,
    read_trace,
    trace_to_text,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REJECTED = 2
EXIT_IO = 3


def _policy_from_args(args: argparse.Namespace) -> MrdPolicy:
    mode = MrdMode.FROM_SUBMISSION if args.mrd_mode == "submission" else MrdMode.FROM_PUBLICATION
    if args.mrd is None and args.mmd is None:
        return default_policy(mode)
    base = default_policy(mode)
    mrd = parse_duration_ms(args.mrd) if args.mrd else base.mrd_ms
    mmd = parse_duration_ms(args.mmd) if args.mmd else base.mmd_ms
    return MrdPolicy(mode, mrd_ms=mrd, mmd_ms=mmd)


def _cmd_simulate(args: argparse.Namespace) -> int:
    if args.scenario:
        try:
            scenario = scenario_from_text(Path(args.scenario).read_text())
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        policy = _policy_from_args(args)
        scenario = build_preset(args.preset, args.seed, policy)
    sim = Simulation(scenario)
    events = sim.run()
    text = trace_to_text(events)
    try:
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        if args.dump_logs:
            dump_dir = Path(args.dump_logs)
            dump_dir.mkdir(parents=True, exist_ok=True)
            for log_id, log in sim.logs.items():
                (dump_dir / f"{log_id}.log").write_text(log_snapshot_text(log))
        if args.emit_proofs:
            proof_dir = Path(args.emit_proofs)
            proof_dir.mkdir(parents=True, exist_ok=True)
            for event in events:
                if event.kind is EventKind.PROOF:
                    record = event.artifact()
                    name = f"{record.case.lower()}-{'proven' if record.proven else 'rejected'}.proof"
                    proof = decode_artifact(record.bundle)
                    (proof_dir / name).write_text(proof_to_text(proof))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    proven = [e.artifact() for e in events if e.kind is EventKind.PROOF]
    for record in proven:
        verdict = "PROVEN" if record.proven else f"REJECTED({record.reason})"
        print(f"proof {record.case}: {verdict} t_proof={record.t_proof}", file=sys.stderr)
    return EXIT_OK


def _load_trace(path: str) -> list:
    with open(path) as stream:
        return read_trace(stream)


def render_report(obs: ObservationSet, readers: dict[str, SnapshotLogReader]) -> str:
    """Aligned per-log metric tables plus machine-readable record lines."""
    lines: list[str] = []
    records: list[str] = []
    header = (
        f"{'log':<16}{'n':>6}{'p10':>12}{'p25':>12}{'p50':>12}{'p75':>12}"
        f"{'p90':>12}{'mean':>12}"
    )
    lines.append("# submission-to-publication delay (ms)")
    lines.append(header)
    for log_id in obs.log_ids():
        sths = obs.sths.get(log_id, [])
        delays = []
        for record in obs.submissions.get(log_id, []):
            if record.final_entry_number is None:
                continue
            try:
                delays.append(submission_to_publication(record, sths))
            except AnalysisError:
                continue
        if not delays:
            continue
        summary = percentile_summary(delays)
        lines.append(
            f"{log_id:<16}{summary.count:>6}{summary.p10:>12.0f}{summary.p25:>12.0f}"
            f"{summary.p50:>12.0f}{summary.p75:>12.0f}{summary.p90:>12.0f}{summary.mean:>12.1f}"
        )
        records.append(
            f"metric log={log_id} name=sub-to-pub-p50 value={summary.p50:.0f}"
        )
    lines.append("")
    lines.append("# update-behavior classes")
    for log_id in obs.log_ids():
        try:
            log_class = classify(obs.sths.get(log_id, []), obs.submissions.get(log_id, []))
            rendered = log_class.render()
        except AnalysisError as exc:
            rendered = f"insufficient-data ({exc.code})"
        rate = sth_update_rate(obs.sths.get(log_id, []))
        lines.append(f"{log_id:<16}{rendered}  sth-updates={rate.render()}")
        records.append(f"metric log={log_id} name=class value={rendered}")
        records.append(f"metric log={log_id} name=sth-rate value={rate.render()}")
    lines.append("")
    lines.append("# response pathologies")
    for log_id in obs.log_ids():
        sths = obs.sths.get(log_id, [])
        fraction_ooo = out_of_order_fraction(sths)
        fraction_lag = lagging_fraction(sths, obs.sizes.get(log_id, []))
        lines.append(f"{log_id:<16}out_of_order={fraction_ooo:.4f} lagging={fraction_lag:.4f}")
        records.append(f"metric log={log_id} name=out-of-order value={fraction_ooo:.4f}")
        records.append(f"metric log={log_id} name=lagging value={fraction_lag:.4f}")
    lines.append("")
    lines.append("# request processing (ms)")
    for log_id in obs.log_ids():
        submissions = obs.submissions.get(log_id, [])
        if not any(s.ok for s in submissions):
            continue
        summary = request_processing_stats(submissions)
        lines.append(f"{log_id:<16}{summary.render()}")
    per_log_scts: dict[str, list[tuple[int, int]]] = {}
    for log_id, submissions in obs.submissions.items():
        samples = [(s.sct.timestamp, s.t_response) for s in submissions if s.ok]
        if len(samples) >= 3:
            per_log_scts[log_id] = samples
    if len(per_log_scts) >= 2:
        lines.append("")
        lines.append("# pairwise clock offsets (ms)")
        log_ids, matrix = clock_offsets(per_log_scts)
        lines.append(f"{'':<16}" + "".join(f"{l:>14}" for l in log_ids))
        for log_id, row in zip(log_ids, matrix):
            lines.append(f"{log_id:<16}" + "".join(f"{value:>14.0f}" for value in row))
            for other, value in zip(log_ids, row):
                records.append(
                    f"metric log={log_id} name=offset-vs-{other} value={value:.0f}"
                )
    if readers:
        lines.append("")
        lines.append("# entry collisions")
        for log_id in sorted(readers):
            groups = collision_report(readers[log_id].entries)
            for group in groups:
                lines.append(
                    f"{log_id:<16}payload={group.payload_hash.hex()[:16]} "
                    f"numbers={list(group.entry_numbers)} timestamps={list(group.timestamps)}"
                )
                records.append(
                    f"metric log={log_id} name=collision value={len(group.entry_numbers)}"
                )
            if not groups:
                lines.append(f"{log_id:<16}none")
    if obs.violations:
        lines.append("")
        lines.append("# delay-bound violations")
        for violation in obs.violations:
            lines.append(
                f"{violation.context:<16}{violation.kind} actual={violation.actual_ms} "
                f"limit={violation.limit_ms}"
            )
    if obs.proofs:
        lines.append("")
        lines.append("# misbehavior proofs")
        for record in obs.proofs:
            verdict = "PROVEN" if record.proven else f"REJECTED({record.reason})"
            lines.append(f"{record.case:<16}{verdict} t_proof={record.t_proof}")
    lines.append("")
    lines.append("# records")
    lines.extend(records)
    return "\n".join(lines) + "\n"


def _read_log_dumps(path: str | None) -> dict[str, SnapshotLogReader]:
    readers: dict[str, SnapshotLogReader] = {}
    if not path:
        return readers
    for file in sorted(Path(path).glob("*.log")):
        reader = SnapshotLogReader.from_text(file.read_text())
        readers[reader.log_id] = reader
    return readers


def _cmd_analyze(args: argparse.Namespace) -> int:
    try:
        events = _load_trace(args.trace)
        readers = _read_log_dumps(args.logs)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    obs = observations_from_events(events)
    report = render_report(obs, readers)
    if args.out:
        try:
            Path(args.out).write_text(report)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        sys.stdout.write(report)
    return EXIT_OK


def _cmd_classify(args: argparse.Namespace) -> int:
    try:
        events = _load_trace(args.trace)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    obs = observations_from_events(events)
    for log_id in obs.log_ids():
        try:
            log_class = classify(obs.sths.get(log_id, []), obs.submissions.get(log_id, []))
            print(f"{log_id} {log_class.render()}")
        except AnalysisError as exc:
            print(f"{log_id} insufficient-data ({exc.code})")
    return EXIT_OK


def _cmd_verify_proof(args: argparse.Namespace) -> int:
    try:
        text = Path(args.proof).read_text()
        bundle = decode_artifact(text_block_bytes(text))
        readers = _read_log_dumps(args.logs)
    except (OSError, DecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    policy = _policy_from_args(args)
    if args.trusted:
        trusted = TrustedLogSet.of(*args.trusted.split(","))
    elif readers:
        trusted = TrustedLogSet.of(*readers.keys())
    else:
        print("error: --trusted or --logs required", file=sys.stderr)
        return EXIT_USAGE
    signer_ids = set(trusted.sorted())
    if isinstance(bundle, MisbehaviorProofM12):
        signer_ids.add(bundle.status.signature.signer_id)
        signer_ids.add(bundle.sth.log_id)
    elif isinstance(bundle, MisbehaviorProofM3):
        signer_ids.add(bundle.status.signature.signer_id)
    registry = KeyRegistry.with_signers(sorted(signer_ids))
    if isinstance(bundle, MisbehaviorProofM12):
        verdict = verify_m12(bundle, policy, trusted, registry)
    elif isinstance(bundle, MisbehaviorProofM3):
        verdict = verify_m3(bundle, policy, trusted, registry, readers)
    elif isinstance(bundle, SctDisclosureProof):
        verdict = verify_sct_disclosure(bundle, policy.mmd_ms, trusted, registry, readers)
    else:
        print("error: not a proof bundle", file=sys.stderr)
        return EXIT_USAGE
    if verdict.proven:
        print("PROVEN")
        return EXIT_OK
    print(f"REJECTED({verdict.reason})")
    return EXIT_REJECTED


def _cmd_project_growth(args: argparse.Namespace) -> int:
    history: list[float] = []
    if args.history:
        try:
            for line in Path(args.history).read_text().splitlines():
                line = line.strip()
                if line:
                    history.append(float(line.split()[-1]))
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
    elif args.trace:
        try:
            events = _load_trace(args.trace)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        obs = observations_from_events(events)
        sths = obs.sths.get(args.log or (obs.log_ids()[0] if obs.log_ids() else ""), [])
        sizes = [o.sth.treesize for o in sorted(sths, key=lambda o: o.t_response)]
        history = [float(max(sizes[: i + 1])) for i in range(len(sizes))]
    if not history:
        print("error: no history", file=sys.stderr)
        return EXIT_USAGE
    try:
        projected = growth_projection(history, args.fraction)
    except AnalysisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for original, scaled in zip(history, projected):
        print(f"{original:.0f} {scaled:.2f}")
    return EXIT_OK


def _cmd_probe(args: argparse.Namespace) -> int:
    from .httpapi import HttpLogReader
    from .probe import binary_search_size
    from .trace import TraceEvent, write_trace
    from .encoding import encode_artifact as enc

    if not args.target.startswith("http"):
        # scenario target: run the named preset (its probe actor records the
        # observations) and write the resulting trace
        from .sim import Simulation
        from .trace import write_trace as write

        name = args.target.removeprefix("scenario:")
        try:
            scenario = build_preset(name, args.seed)
        except KeyError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        events = Simulation(scenario).run()
        try:
            with open(args.out, "w") as stream:
                write(events, stream)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"recorded {len(events)} events from scenario {name!r}", file=sys.stderr)
        return EXIT_OK
    reader = HttpLogReader(args.target)
    duration_ms = parse_duration_ms(args.duration)
    sth_interval = parse_duration_ms(args.sth_interval)
    size_interval = parse_duration_ms(args.size_interval) if args.size_interval else 0
    events: list[TraceEvent] = []
    seq = 0
    started = time.monotonic()
    next_size = started + (size_interval / 1000.0) / 2 if size_interval else None
    while (time.monotonic() - started) * 1000 < duration_ms:
        t_request = int(time.time() * 1000)
        sth = reader.get_sth()
        t_response = int(time.time() * 1000)
        obs = SthObservation(t_request, t_response, sth)
        events.append(TraceEvent(t_request, seq, "probe", EventKind.STH, enc(obs)))
        seq += 1
        if next_size is not None and time.monotonic() >= next_size:
            probe = binary_search_size(reader, int(time.time() * 1000))
            events.append(TraceEvent(probe.t, seq, "probe", EventKind.SIZE, enc(probe)))
            seq += 1
            next_size += size_interval / 1000.0
        time.sleep(sth_interval / 1000.0)
    try:
        with open(args.out, "w") as stream:
            write_trace(events, stream)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"recorded {len(events)} observations", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="postcert",
        description="Revocation transparency toolkit: simulate, analyze, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_policy_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--mrd-mode", choices=["submission", "publication"],
                       default="publication")
        p.add_argument("--mrd", help="revocation deadline, e.g. 8h")
        p.add_argument("--mmd", help="maximum merge delay, e.g. 24h")

    p_sim = sub.add_parser("simulate", help="run a scenario and write its trace")
    p_sim.add_argument("--preset", choices=sorted(PRESETS), default="normal")
    p_sim.add_argument("--scenario", help="scenario file (overrides --preset)")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", help="trace output path (default stdout)")
    p_sim.add_argument("--dump-logs", help="directory for per-log snapshots")
    p_sim.add_argument("--emit-proofs", help="directory for proof bundles")
    add_policy_flags(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_an = sub.add_parser("analyze", help="compute the metrics report for a trace")
    p_an.add_argument("--trace", required=True)
    p_an.add_argument("--logs", help="directory of log snapshots (collision report)")
    p_an.add_argument("--out", help="report output path (default stdout)")
    p_an.set_defaults(func=_cmd_analyze)

    p_cl = sub.add_parser("classify", help="print per-log update-behavior class")
    p_cl.add_argument("--trace", required=True)
    p_cl.set_defaults(func=_cmd_classify)

    p_vp = sub.add_parser("verify-proof", help="verify a misbehavior proof bundle")
    p_vp.add_argument("--proof", required=True)
    p_vp.add_argument("--logs", help="directory of log snapshots (M3 scans)")
    p_vp.add_argument("--trusted", help="comma-separated trusted log ids")
    add_policy_flags(p_vp)
    p_vp.set_defaults(func=_cmd_verify_proof)

    p_gr = sub.add_parser("project-growth", help="scale a size history by (1+fraction)")
    p_gr.add_argument("--fraction", type=float, required=True)
    p_gr.add_argument("--history", help="file with one size per line")
    p_gr.add_argument("--trace", help="derive the history from a trace")
    p_gr.add_argument("--log", help="log id when deriving from a trace")
    p_gr.set_defaults(func=_cmd_project_growth)

    p_pr = sub.add_parser("probe", help="record observations from a live endpoint")
    p_pr.add_argument("--target", required=True,
                      help="base URL of a log, or scenario:<preset-name>")
    p_pr.add_argument("--out", required=True)
    p_pr.add_argument("--seed", type=int, default=0)
    p_pr.add_argument("--duration", default="10s")
    p_pr.add_argument("--sth-interval", default="1s")
    p_pr.add_argument("--size-interval", default="")
    p_pr.set_defaults(func=_cmd_probe)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
