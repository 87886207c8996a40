"""Commit-and-open compiler from a public-coin IOP to a succinct argument.

Per round the prover commits to its proof string (padded to the longest
round length with the reserved symbol), the verifier answers with fresh
randomness, and after the last challenge the prover opens exactly the
positions the IOP verifier queries. The argument verifier accepts iff the
IOP decision accepts on the opened answers, every opening verifies against
its commitment, and opened padding positions carry the reserved symbol.

A session prover is any object with the three-method interface of
`ArgumentProver` (`start`, `next_commitment`, `final_response`); the
scripted adversaries implement the same contract, and all states must be
deep-copyable so they can be snapshotted and rewound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from .errors import ParameterError, ProtocolViolation
from .iop import IopProtocol, IopSpec
from .prng import Bits
from .vc import (
    Commitment,
    CommitAux,
    Opening,
    VcParams,
    vc_commit,
    vc_gen,
    vc_open,
)
from . import vc as _vc

PAD_SYMBOL = 0

# Wire size of a commitment: 32-byte root plus 4-byte committed length.
COMMITMENT_WIRE_BYTES = _vc.DIGEST_BYTES + 4
COMMITMENT_WIRE_BITS = 8 * COMMITMENT_WIRE_BYTES
DIGEST_BITS = 8 * _vc.DIGEST_BYTES

FinalResponse = tuple  # tuple[Opening, ...], one opening per round


@dataclass(frozen=True)
class ArgParams:
    vc: VcParams
    instance_bound: int
    iop_spec: IopSpec

    def __post_init__(self):
        if self.instance_bound < 1:
            raise ParameterError("instance size bound must be at least 1")
        if self.vc.capacity != self.iop_spec.max_proof_length:
            raise ParameterError("commitment capacity must equal the longest round")
        if self.vc.symbol_bits != self.iop_spec.symbol_bits:
            raise ParameterError("commitment symbol width must match the alphabet")


def arg_setup(
    security_bits: int,
    instance_bound: int,
    iop_spec: IopSpec,
    domain_tag: bytes = _vc.DEFAULT_DOMAIN_TAG,
) -> ArgParams:
    """One commitment parameter set sized for the longest round."""
    params = vc_gen(
        security_bits,
        capacity=iop_spec.max_proof_length,
        symbol_bits=iop_spec.symbol_bits,
        domain_tag=domain_tag,
    )
    return ArgParams(vc=params, instance_bound=instance_bound, iop_spec=iop_spec)


def pad_proof_string(spec: IopSpec, symbols: Sequence[int]) -> tuple[int, ...]:
    return tuple(symbols) + (PAD_SYMBOL,) * (spec.max_proof_length - len(symbols))


@dataclass(frozen=True)
class Transcript:
    instance: Any
    commitments: tuple[Commitment, ...]
    challenges: tuple[Bits, ...]
    response: tuple[Opening, ...]

    @property
    def rounds(self) -> int:
        return len(self.commitments)

    @property
    def message_count(self) -> int:
        # k commitments, k challenges, one batched final response.
        return 2 * self.rounds + 1


@dataclass(frozen=True)
class _ProverState:
    next_round: int
    iop_state: Any
    padded: tuple[tuple[int, ...], ...]
    auxes: tuple[CommitAux, ...]
    challenges: tuple[Bits, ...]


class ArgumentProver:
    """Honest argument prover: commit round by round, then open the queries."""

    def __init__(self, protocol: IopProtocol, params: ArgParams, witness):
        if params.iop_spec != protocol.spec:
            raise ParameterError("parameters were generated for a different IOP shape")
        self.protocol = protocol
        self.params = params
        self.witness = witness

    def start(self) -> _ProverState:
        return _ProverState(1, None, (), (), ())

    def next_commitment(self, state: _ProverState, challenge: Bits | None):
        spec = self.protocol.spec
        i = state.next_round
        if i > spec.rounds:
            raise ProtocolViolation("all commitment rounds already sent")
        if i == 1:
            if challenge is not None:
                raise ProtocolViolation("round 1 takes no incoming challenge")
            proof, iop_state = self.protocol.prover_init(self.witness)
            challenges = state.challenges
        else:
            if challenge is None:
                raise ProtocolViolation(f"round {i} requires the round-{i - 1} challenge")
            proof, iop_state = self.protocol.prover_next(state.iop_state, challenge)
            challenges = state.challenges + (challenge,)
        padded = pad_proof_string(spec, proof.symbols)
        cm, aux = vc_commit(self.params.vc, padded)
        new_state = _ProverState(
            next_round=i + 1,
            iop_state=iop_state,
            padded=state.padded + (padded,),
            auxes=state.auxes + (aux,),
            challenges=challenges,
        )
        return cm, new_state

    def final_response(self, state: _ProverState, challenge: Bits):
        spec = self.protocol.spec
        if state.next_round != spec.rounds + 1:
            raise ProtocolViolation("final response requested before all commitments")
        challenges = state.challenges + (challenge,)
        plan = self.protocol.verifier_query(challenges)
        return tuple(
            vc_open(self.params.vc, state.auxes[i], plan.per_round[i])
            for i in range(spec.rounds)
        )


def arg_verify(params: ArgParams, protocol: IopProtocol, transcript: Transcript) -> int:
    """1 iff the transcript is accepting; malformed shapes yield 0."""
    spec = protocol.spec
    k = spec.rounds
    if transcript.instance != protocol.instance:
        return 0
    if len(transcript.commitments) != k or len(transcript.challenges) != k:
        return 0
    if len(transcript.response) != k:
        return 0
    try:
        plan = protocol.verifier_query(transcript.challenges)
    except ProtocolViolation:
        return 0
    answers = []
    for i in range(k):
        cm = transcript.commitments[i]
        opening = transcript.response[i]
        if cm.length != params.vc.capacity:
            return 0
        if opening.positions != plan.per_round[i]:
            return 0
        # Queried positions past the round's own length must open to the
        # padding symbol; the honest query function never emits them.
        for q, a in zip(opening.positions, opening.answers):
            if q > spec.proof_lengths[i] and a != PAD_SYMBOL:
                return 0
        if not _vc.vc_check(params.vc, cm, opening.positions, opening.answers, opening.proof):
            return 0
        answers.append(opening.answers)
    return protocol.verifier_decide(transcript.challenges, answers)


def position_bits(proof_length: int) -> int:
    """Bits to index one position of a length-l round: ceil(log2 l)."""
    return (proof_length - 1).bit_length()


@dataclass(frozen=True)
class RoundCost:
    commitment_bits: int
    position_bits: int
    answer_bits: int
    proof_bits: int

    @property
    def prover_bits(self) -> int:
        return self.commitment_bits + self.position_bits + self.answer_bits + self.proof_bits


@dataclass(frozen=True)
class CommStats:
    """Exact per-direction protocol bit counts for one transcript."""

    rounds: tuple[RoundCost, ...]
    challenge_bits: tuple[int, ...]
    generator_bits: int

    @property
    def prover_to_verifier_bits(self) -> int:
        return sum(r.prover_bits for r in self.rounds)

    @property
    def verifier_to_prover_bits(self) -> int:
        return sum(self.challenge_bits)

    @property
    def message_count(self) -> int:
        return 2 * len(self.rounds) + 1

    def to_dict(self) -> dict:
        return {
            "prover_to_verifier_bits": self.prover_to_verifier_bits,
            "verifier_to_prover_bits": self.verifier_to_prover_bits,
            "generator_bits": self.generator_bits,
            "message_count": self.message_count,
            "challenge_bits": list(self.challenge_bits),
            "rounds": [
                {
                    "commitment_bits": r.commitment_bits,
                    "position_bits": r.position_bits,
                    "answer_bits": r.answer_bits,
                    "proof_bits": r.proof_bits,
                }
                for r in self.rounds
            ],
        }


def comm_stats(params: ArgParams, transcript: Transcript) -> CommStats:
    """Evaluate the communication formula on a transcript.

    Prover-to-verifier: sum over rounds of |cm_i| plus q_i times
    (ceil(log2 l_i) plus the symbol width) plus the opening proof digests.
    Verifier-to-prover: the challenge widths. The transport layer counts
    the same quantities on the wire; sessions assert they agree exactly.
    """
    spec = params.iop_spec
    rounds = []
    for i in range(spec.rounds):
        opening = transcript.response[i]
        q = spec.query_counts[i]
        rounds.append(
            RoundCost(
                commitment_bits=COMMITMENT_WIRE_BITS,
                position_bits=q * position_bits(spec.proof_lengths[i]),
                answer_bits=q * spec.symbol_bits,
                proof_bits=DIGEST_BITS * len(opening.proof),
            )
        )
    return CommStats(
        rounds=tuple(rounds),
        challenge_bits=tuple(bits.nbits for bits in transcript.challenges),
        generator_bits=8 * len(params.vc.to_bytes()),
    )
