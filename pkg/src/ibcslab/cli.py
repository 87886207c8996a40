"""Command-line surface for sessions and batch experiments.

Subcommands: `prove` and `verify` run one argument session (in memory,
over TCP, or offline against a stored transcript); `soundness` compares
exhaustive oracles against scripted adversaries; `extract` runs the
hybrid-value chain, the failure-event counters, and the knowledge
pipeline. Every report is machine-readable JSON that embeds the argument
vector it was produced from, so any report can be reproduced exactly:

    {"experiment": ..., "artifact_version": ..., "config": {"argv": [...],
     ...resolved values...}, "results": {...}}

All numbers are deterministic functions of the config (one master seed
expands into per-session and per-trial streams by labeled derivation), and
no timestamps are embedded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import threading
from fractions import Fraction
from pathlib import Path

from . import __version__
from .adversaries import make_adversary
from .errors import IbcsError, InfeasibleError, InstanceError, ParameterError
from .extraction import (
    end_to_end_knowledge,
    hoeffding_radius,
    hybrid_value,
    measure_acceptance,
    run_events_experiment,
    theorem_bounds,
)
from .ibcs import ArgumentProver, arg_setup, arg_verify, comm_stats
from .iop import brute_force_soundness
from .prng import Prng, derive, seed_root
from .toys import (
    GraphColoringIop,
    SumcheckIop,
    find_coloring,
    load_graph_text,
    load_sumcheck_text,
    sumcheck_exact_cheat_value,
)
from . import transport

DEFAULT_LAMBDA = 128
DEFAULT_ADVERSARIES = "optimal,withholder,grinder:1,equivocator,abort"


def load_instance_path(path: str, spec_hint: str | None):
    """Sniff a text instance file: graph records or a sumcheck header."""
    text = Path(path).read_text()
    first = next(
        (line.strip() for line in text.splitlines() if line.split("#", 1)[0].strip()),
        "",
    )
    kind = spec_hint or ("gc" if first.split()[0] in ("v", "e", "w") else "sumcheck")
    if kind == "gc":
        instance, witness = load_graph_text(text)
        return instance, witness
    if kind == "sumcheck":
        return load_sumcheck_text(text), ()
    raise InstanceError(f"unknown spec selector {kind!r}")


def build_protocol(instance):
    return transport.protocol_for_instance(instance)


def setup_for(instance, protocol, security_bits: int):
    bound = len(transport.encode_instance(instance))
    return arg_setup(security_bits, bound, protocol.spec)


def parse_witness_flag(value: str):
    return tuple(int(f) for f in value.replace(",", " ").split())


def resolve_witness(protocol, file_witness, flag_value):
    if flag_value is not None:
        return parse_witness_flag(flag_value)
    if file_witness is not None and file_witness != ():
        return file_witness
    if isinstance(protocol, GraphColoringIop):
        found = find_coloring(protocol.instance)
        if found is None:
            raise InstanceError("instance is not 3-colorable and no witness was given")
        return found
    return ()


def emit(report: dict, out_path: str | None) -> str:
    blob = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(blob + "\n")
    print(blob)
    return blob


def config_block(args, argv: list[str], **extra) -> dict:
    kept = []
    skip = False
    for token in argv:
        if skip:
            skip = False
            continue
        if token in ("--out", "--transcript-out"):
            skip = True
            continue
        kept.append(token)
    block = {"argv": kept, "seed": args.seed, "lambda": args.security}
    block.update(extra)
    return block


def _check_formula(params, result) -> dict:
    """Formula-vs-wire assertion for one session result (prover side)."""
    stats = comm_stats(params, result.transcript)
    sent = result.counters.sent_protocol_bits
    recv = result.counters.recv_protocol_bits
    if (sent, recv) not in (
        (stats.prover_to_verifier_bits, stats.verifier_to_prover_bits),
        (stats.verifier_to_prover_bits, stats.prover_to_verifier_bits),
    ):
        raise ParameterError(
            "communication accounting mismatch: "
            f"formula {stats.prover_to_verifier_bits}/{stats.verifier_to_prover_bits} bits, "
            f"wire {sent}/{recv} bits"
        )
    return stats.to_dict()


def cmd_prove(args, argv) -> int:
    instance, file_witness = load_instance_path(args.instance, args.spec)
    protocol = build_protocol(instance)
    params = setup_for(instance, protocol, args.security)
    witness = resolve_witness(protocol, file_witness, args.witness)
    prover = ArgumentProver(protocol, params, witness)

    if args.transport == "memory":
        chan_p, chan_v = transport.memory_channel_pair()
        prng = Prng(derive(seed_root(args.seed), "session", 0))
        box: dict = {}

        def run_verifier():
            box["verifier"] = transport.run_session(
                "verifier", chan_v, params, protocol, prng=prng
            )

        thread = threading.Thread(target=run_verifier)
        thread.start()
        result = transport.run_session("prover", chan_p, params, protocol, prover=prover)
        thread.join()
        verifier_result = box["verifier"]
        decision = verifier_result.decision
    else:
        host, port = args.connect.rsplit(":", 1)
        channel = transport.tcp_connect(host, int(port))
        transport.send_public_setup(channel, params, instance)
        result = transport.run_session("prover", channel, params, protocol, prover=prover)
        channel.close()
        decision = result.decision

    stats = _check_formula(params, result)
    blob = transport.serialize_transcript(params, result.transcript)
    if args.out:
        Path(args.out).write_bytes(blob)
    report = {
        "experiment": "prove",
        "artifact_version": __version__,
        "config": config_block(args, argv, instance=args.instance, transport=args.transport),
        "results": {
            "decision": decision,
            "message_count": result.transcript.message_count,
            "comm": stats,
            "counters": result.counters.to_dict(),
            "transcript_sha256": hashlib.sha256(blob).hexdigest(),
        },
    }
    emit(report, args.json)
    return 0 if decision == 1 else 1


def cmd_verify(args, argv) -> int:
    if args.transcript:
        data = Path(args.transcript).read_bytes()
        params, protocol, transcript = transport.parse_transcript(data)
        decision = arg_verify(params, protocol, transcript)
        report = {
            "experiment": "verify",
            "artifact_version": __version__,
            "config": config_block(args, argv, transcript=str(args.transcript)),
            "results": {
                "decision": decision,
                "message_count": transcript.message_count,
                "comm": comm_stats(params, transcript).to_dict(),
            },
        }
        emit(report, args.json)
        return 0 if decision == 1 else 1

    host, port = args.listen.rsplit(":", 1)
    listener = transport.tcp_listen(host, int(port))
    if args.ready_fd is not None:
        actual = listener.getsockname()[1]
        with open(args.ready_fd, "w") as fh:
            fh.write(str(actual))
    channel = transport.tcp_accept(listener)
    bound, vc_params, instance = transport.recv_public_setup(channel)
    if args.instance:
        own_instance, _ = load_instance_path(args.instance, args.spec)
        if own_instance != instance:
            raise InstanceError("peer proposed a different instance than configured")
    protocol = build_protocol(instance)
    params = arg_setup(vc_params.security_bits, bound, protocol.spec)
    if params.vc != vc_params:
        raise ParameterError("peer parameters do not match the derived parameters")
    prng = Prng(derive(seed_root(args.seed), "session", 0))
    result = transport.run_session("verifier", channel, params, protocol, prng=prng)
    channel.close()
    listener.close()
    stats = _check_formula(params, result)
    blob = transport.serialize_transcript(params, result.transcript)
    if args.out:
        Path(args.out).write_bytes(blob)
    report = {
        "experiment": "verify",
        "artifact_version": __version__,
        "config": config_block(args, argv, transport="tcp"),
        "results": {
            "decision": result.decision,
            "message_count": result.transcript.message_count,
            "comm": stats,
            "counters": result.counters.to_dict(),
            "transcript_sha256": hashlib.sha256(blob).hexdigest(),
        },
    }
    emit(report, args.json)
    return 0 if result.decision == 1 else 1


def _iop_soundness_oracle(protocol):
    """Exact oracle value with the method that produced it."""
    try:
        return brute_force_soundness(protocol), "strategy-enumeration"
    except InfeasibleError:
        if isinstance(protocol, SumcheckIop):
            try:
                return sumcheck_exact_cheat_value(protocol.instance), "cheat-program"
            except InfeasibleError:
                pass
        return None, "infeasible"


def cmd_soundness(args, argv) -> int:
    instance, file_witness = load_instance_path(args.instance, args.spec)
    protocol = build_protocol(instance)
    if protocol.in_language() and not args.force:
        print(
            "error: instance is in the language; not a soundness instance "
            "(use --force to measure anyway)",
            file=sys.stderr,
        )
        return 2
    params = setup_for(instance, protocol, args.security)
    oracle_value, oracle_kind = _iop_soundness_oracle(protocol)
    radius = hoeffding_radius(args.trials)
    results: dict = {
        "iop_soundness": None
        if oracle_value is None
        else {"fraction": str(oracle_value), "value": float(oracle_value)},
        "oracle": oracle_kind,
        "epsilon": args.epsilon,
        "trials": args.trials,
        "radius": radius,
        "adversaries": {},
    }
    exit_code = 0
    if oracle_value is None:
        results["note"] = "exhaustive oracle infeasible at the configured budget"
        emit(
            {
                "experiment": "soundness",
                "artifact_version": __version__,
                "config": config_block(
                    args, argv, instance=args.instance, adversaries=args.adversary
                ),
                "results": results,
            },
            args.json,
        )
        return 2
    bounds = theorem_bounds(protocol.spec, Fraction(0), Fraction(0), Fraction(args.epsilon), oracle_value)
    threshold = float(bounds.soundness_bound) + 3 * radius
    results["bound"] = {
        "soundness_bound": float(bounds.soundness_bound),
        "threshold_with_slack": threshold,
    }
    all_pass = True
    for name in args.adversary.split(","):
        name = name.strip()
        adversary = make_adversary(name, protocol, params, file_witness or None)
        estimate = measure_acceptance(
            protocol, params, adversary, args.trials, args.seed, label=f"accept:{name}"
        )
        ok = estimate.value <= threshold
        all_pass = all_pass and ok
        results["adversaries"][name] = {"acceptance": estimate.to_dict(), "pass": ok}
    results["pass"] = all_pass
    if not all_pass:
        exit_code = 1
    emit(
        {
            "experiment": "soundness",
            "artifact_version": __version__,
            "config": config_block(
                args, argv, instance=args.instance, adversaries=args.adversary
            ),
            "results": results,
        },
        args.json,
    )
    return exit_code


def cmd_extract(args, argv) -> int:
    instance, file_witness = load_instance_path(args.instance, args.spec)
    protocol = build_protocol(instance)
    params = setup_for(instance, protocol, args.security)
    adversary = make_adversary(args.adversary, protocol, params, file_witness or None)
    k = protocol.spec.rounds

    chain = {}
    for oracle_rounds in range(k + 1):
        est = hybrid_value(
            protocol,
            params,
            adversary,
            oracle_rounds,
            args.trials,
            args.seed,
            args.epsilon,
        )
        chain[str(oracle_rounds)] = est.to_dict()
    slack = 3 * (chain["0"]["radius"] + chain[str(k)]["radius"])
    chain_ok = chain["0"]["value"] <= chain[str(k)]["value"] + args.epsilon + slack

    events = {}
    events_ok = True
    for round_index in range(1, k + 1):
        counters = run_events_experiment(
            protocol, params, adversary, round_index, args.trials, args.seed, args.epsilon
        )
        rate = counters.missing / counters.trials
        bound = float(counters.missing_bound) + 3 * hoeffding_radius(counters.trials)
        ok = rate <= bound and not counters.binding_pairs
        events_ok = events_ok and ok
        entry = counters.to_dict()
        entry.update({"missing_rate": rate, "missing_threshold": bound, "pass": ok})
        events[str(round_index)] = entry

    acceptance = measure_acceptance(protocol, params, adversary, args.trials, args.seed)
    outcomes = [
        end_to_end_knowledge(
            protocol, params, adversary, args.epsilon, args.seed, label=f"knowledge:{i}"
        )
        for i in range(args.knowledge_trials)
    ]
    successes = sum(1 for o in outcomes if o.success)
    rate = successes / args.knowledge_trials
    k_radius = hoeffding_radius(args.knowledge_trials)
    knowledge_floor = acceptance.value - args.epsilon - 3 * (acceptance.radius + k_radius)
    knowledge_ok = rate >= knowledge_floor

    results = {
        "hybrid_chain": chain,
        "chain_check": {
            "h0": chain["0"]["value"],
            "hk": chain[str(k)]["value"],
            "epsilon": args.epsilon,
            "slack": slack,
            "pass": chain_ok,
        },
        "events": events,
        "knowledge": {
            "trials": args.knowledge_trials,
            "successes": successes,
            "rate": rate,
            "radius": k_radius,
            "acceptance": acceptance.to_dict(),
            "floor": knowledge_floor,
            "pass": knowledge_ok,
        },
        "pass": chain_ok and events_ok and knowledge_ok,
    }
    emit(
        {
            "experiment": "extract",
            "artifact_version": __version__,
            "config": config_block(
                args, argv, instance=args.instance, adversary=args.adversary
            ),
            "results": results,
        },
        args.json,
    )
    return 0 if results["pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ibcslab",
        description="commit-and-open argument sessions and rewinding experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--instance", help="instance file (graph or sumcheck text)")
        p.add_argument("--spec", choices=("gc", "sumcheck"), help="instance kind override")
        p.add_argument("--lambda", dest="security", type=int, default=DEFAULT_LAMBDA)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--json", help="also write the JSON report to this path")

    p = sub.add_parser("prove", help="run one session as the prover")
    common(p)
    p.add_argument("--witness", help="witness symbols, comma or space separated")
    p.add_argument("--transport", choices=("memory", "tcp"), default="memory")
    p.add_argument("--connect", help="host:port of the listening verifier")
    p.add_argument("--out", help="write the transcript file here")
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("verify", help="verify live over TCP or replay a transcript")
    common(p)
    p.add_argument("--listen", help="host:port to accept one session on")
    p.add_argument("--transcript", help="verify a stored transcript file")
    p.add_argument("--out", help="write the observed transcript file here")
    p.add_argument("--ready-fd", help=argparse.SUPPRESS)  # test hook: report bound port
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("soundness", help="oracle vs scripted adversaries")
    common(p)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--adversary", default=DEFAULT_ADVERSARIES)
    p.add_argument("--force", action="store_true", help="measure even in-language instances")
    p.set_defaults(func=cmd_soundness)

    p = sub.add_parser("extract", help="hybrid chain, failure events, knowledge pipeline")
    common(p)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=2_000)
    p.add_argument("--knowledge-trials", type=int, default=200)
    p.add_argument("--adversary", default="honest")
    p.set_defaults(func=cmd_extract)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("prove", "soundness", "extract") and not args.instance:
        parser.error(f"{args.command} requires --instance")
    if args.command == "verify" and not (args.listen or args.transcript):
        parser.error("verify requires --listen or --transcript")
    if args.command == "prove" and args.transport == "tcp" and not args.connect:
        parser.error("tcp transport requires --connect")
    try:
        return args.func(args, argv)
    except IbcsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
