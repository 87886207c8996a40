"""Rewinding-extraction laboratory: samplers, reductors, hybrids, bounds.

The reduction rebuilds a prover's round-i proof string by rewinding it:
take a snapshot of the adversary at the start of round i's continuation,
rerun it to the end under fresh challenges, and whenever the run wins the
round-i game and its round-i query set covers new positions, record that
opening into a knowledge set. Stopping after a uniformly random number of
rewinds caps the probability that the real verifier later queries a
position the knowledge set missed: coverage can grow at most l_i times, so
a random stop out of T rewinds is exposed with probability at most l_i/T.

Each round gets an error share of epsilon/2k: half of the per-round budget
is reserved for any degradation of the prover's behaviour under rewinding,
which exact snapshots (deep copies) make identically zero, and the other
half caps the missing-position probability through the rewind count
T = ceil(l_max / (epsilon/2k)). The experiments report every estimate with
an explicit confidence radius, so the analytic bounds can be checked
against measured frequencies at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

from .adversaries import snapshot, state_digest
from .errors import IbcsError, ParameterError, ProtocolViolation
from .ibcs import PAD_SYMBOL, ArgParams
from .iop import IopProtocol, ProofString
from .prng import Bits, Prng, derive, seed_root
from .vc import vc_check

CONFIDENCE_DELTA = 1e-6


def hoeffding_radius(trials: int, delta: float = CONFIDENCE_DELTA) -> float:
    """Two-sided deviation radius at confidence 1 - delta."""
    if trials < 1:
        raise ParameterError("radius needs at least one trial")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * trials))


@dataclass
class KnowledgeSet:
    """Accepted openings for one round; coverage grows strictly per entry."""

    proof_length: int
    triples: list[tuple[tuple[int, ...], tuple[int, ...], tuple[bytes, ...]]] = field(
        default_factory=list
    )
    coverage: set[int] = field(default_factory=set)

    def covers(self, positions: Sequence[int]) -> bool:
        return set(positions) <= self.coverage

    def add(self, positions, answers, proof):
        new = set(positions) - self.coverage
        if not new:
            raise ParameterError("knowledge set entries must add coverage")
        if any(not 1 <= q <= self.proof_length for q in positions):
            raise ParameterError("knowledge set position outside the proof string")
        self.triples.append((tuple(positions), tuple(answers), tuple(proof)))
        self.coverage |= new
        assert len(self.triples) <= self.proof_length


@dataclass(frozen=True)
class ExtractedOracle:
    round_index: int
    covered: frozenset
    symbols: tuple[int, ...]


@dataclass(frozen=True)
class RewindBudget:
    max_rewinds: int
    stop_time: int
    error_share: Fraction

    def __post_init__(self):
        if not 0 <= self.stop_time <= self.max_rewinds:
            raise ParameterError("stop time must lie in [0, T]")


def rewind_budget_limit(max_proof_length: int, error_share: Fraction) -> int:
    """T = ceil(l_max / (epsilon / 2k)), the rewind count per round."""
    if error_share <= 0:
        raise ParameterError("error share must be positive")
    return math.ceil(Fraction(max_proof_length) / error_share)


def error_share(epsilon: float, rounds: int) -> Fraction:
    if not 0 < epsilon <= 1:
        raise ParameterError("epsilon must be in (0, 1]")
    return Fraction(epsilon) / (2 * rounds)


@dataclass(frozen=True)
class ArgContext:
    """Everything fixed when round i's continuation is rewound."""

    params: ArgParams
    protocol: IopProtocol
    round_index: int
    commitments: tuple  # cm_1 .. cm_i
    challenges: tuple[Bits, ...]  # r_1 .. r_{i-1}
    oracles: tuple[ExtractedOracle, ...]  # rounds 1 .. i-1


@dataclass
class SamplerStats:
    rewinds: int = 0
    accepted: int = 0
    recorded: int = 0
    voided: int = 0


def run_continuation(adversary, state, ctx: ArgContext, continuation: Sequence[Bits]):
    """Play rounds i+1..k and the final opening from a snapshot.

    `continuation` supplies (r_i, ..., r_k). Returns the tail commitments
    and the final response (None on abort).
    """
    spec = ctx.protocol.spec
    i = ctx.round_index
    tail = []
    current = state
    for m in range(i + 1, spec.rounds + 1):
        cm, current = adversary.next_commitment(current, continuation[m - 1 - i])
        tail.append(cm)
    response = adversary.final_response(current, continuation[-1])
    return tuple(tail), response


def _openings_ok(params: ArgParams, commitments, plan, response, rounds) -> bool:
    """Commitment-side checks for the given 1-based rounds."""
    spec = params.iop_spec
    for j in rounds:
        cm = commitments[j - 1]
        opening = response[j - 1]
        if cm.length != params.vc.capacity:
            return False
        if opening.positions != plan.per_round[j - 1]:
            return False
        for q, a in zip(opening.positions, opening.answers):
            if q > spec.proof_lengths[j - 1] and a != PAD_SYMBOL:
                return False
        if not vc_check(params.vc, cm, opening.positions, opening.answers, opening.proof):
            return False
    return True


def _routed_answers(protocol, plan, oracles, response, oracle_rounds: int):
    """Answers with rounds <= oracle_rounds read from extracted oracles."""
    answers = []
    for j, queries in enumerate(plan.per_round, start=1):
        if j <= oracle_rounds:
            symbols = oracles[j - 1].symbols
            answers.append(tuple(symbols[q - 1] for q in queries))
        else:
            answers.append(response[j - 1].answers)
    return tuple(answers)


def game_predicate(ctx: ArgContext, continuation, tail_commitments, response) -> bool:
    """The round-i win predicate: decision on oracles below i plus openings,
    and commitment checks from round i on."""
    if response is None:
        return False
    protocol, params = ctx.protocol, ctx.params
    i = ctx.round_index
    full = ctx.challenges + tuple(continuation)
    try:
        plan = protocol.verifier_query(full)
    except ProtocolViolation:
        return False
    commitments = ctx.commitments + tail_commitments
    if len(response) != protocol.spec.rounds:
        return False
    if not _openings_ok(params, commitments, plan, response, range(i, protocol.spec.rounds + 1)):
        return False
    answers = _routed_answers(protocol, plan, ctx.oracles, response, i - 1)
    return bool(protocol.verifier_decide(full, answers))


def sampler(adversary, state, ctx: ArgContext, iterations: int, prng: Prng):
    """Collect accepted round-i openings over `iterations` rewinds.

    Each rewind runs from a snapshot and the snapshot is discarded
    afterwards, which is the classical stand-in for state repair; the
    adversary state passed in is certified unchanged on return.
    """
    spec = ctx.protocol.spec
    i = ctx.round_index
    before = state_digest(state)
    knowledge = KnowledgeSet(proof_length=spec.proof_lengths[i - 1])
    stats = SamplerStats()
    for _ in range(iterations):
        stats.rewinds += 1
        continuation = tuple(
            prng.take_bits(spec.randomness_bits[m]) for m in range(i - 1, spec.rounds)
        )
        try:
            tail, response = run_continuation(adversary, snapshot(state), ctx, continuation)
        except IbcsError:
            stats.voided += 1
            continue
        if not game_predicate(ctx, continuation, tail, response):
            continue
        stats.accepted += 1
        full = ctx.challenges + continuation
        queries = ctx.protocol.verifier_query(full).per_round[i - 1]
        if not knowledge.covers(queries):
            opening = response[i - 1]
            knowledge.add(opening.positions, opening.answers, opening.proof)
            stats.recorded += 1
    if state_digest(state) != before:
        raise ProtocolViolation("rewinding mutated the adversary state")
    return knowledge, stats


def fill_oracle(round_index: int, proof_length: int, knowledge: KnowledgeSet) -> ExtractedOracle:
    """First write wins: later triples never overwrite earlier positions."""
    symbols = [PAD_SYMBOL] * proof_length
    covered: set[int] = set()
    for positions, answers, _ in knowledge.triples:
        for q, a in zip(positions, answers):
            if q not in covered:
                covered.add(q)
                symbols[q - 1] = a
    return ExtractedOracle(round_index, frozenset(covered), tuple(symbols))


def reductor(
    adversary,
    state,
    ctx: ArgContext,
    share: Fraction,
    prng: Prng,
    stop: str = "uniform",
):
    """Rewind round i and rebuild its proof string from the knowledge set.

    `stop="uniform"` draws the stopping time uniformly from [0, T], which
    is what the missing-position bound requires; `stop="full"` always runs
    all T rewinds and is what the knowledge extractor uses, since coverage
    only grows with more rewinds.
    """
    spec = ctx.protocol.spec
    i = ctx.round_index
    limit = rewind_budget_limit(spec.max_proof_length, share)
    if stop == "uniform":
        stop_time = prng.take_below(limit + 1)
    elif stop == "full":
        stop_time = limit
    else:
        raise ParameterError(f"unknown stopping rule {stop!r}")
    budget = RewindBudget(max_rewinds=limit, stop_time=stop_time, error_share=share)
    knowledge, stats = sampler(adversary, state, ctx, stop_time, prng)
    oracle = fill_oracle(i, spec.proof_lengths[i - 1], knowledge)
    return oracle, knowledge, budget, stats


# ---------------------------------------------------------------------------
# the extracted IOP prover
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _ExtractorState:
    adversary_state: Any
    commitments: tuple
    challenges: tuple[Bits, ...]
    oracles: tuple[ExtractedOracle, ...]


class ExtractorIopProver:
    """IOP prover built from an argument adversary by per-round rewinding.

    Round i: advance the adversary one commitment, run the reductor on the
    round-i continuation, and emit the reconstructed string as the IOP
    message. Thanks to exact snapshots the adversary continues from the
    same state the reductor received.
    """

    def __init__(
        self,
        protocol: IopProtocol,
        params: ArgParams,
        adversary,
        epsilon: float,
        prng: Prng,
        stop: str = "uniform",
    ):
        self.protocol = protocol
        self.params = params
        self.adversary = adversary
        self.share = error_share(epsilon, protocol.spec.rounds)
        self.prng = prng
        self.stop = stop
        self.budgets: list[RewindBudget] = []

    def _extract_round(self, adv_state, commitments, challenges, oracles):
        i = len(commitments) + 1
        prev = challenges[-1] if challenges else None
        cm, rho = self.adversary.next_commitment(adv_state, prev)
        ctx = ArgContext(
            params=self.params,
            protocol=self.protocol,
            round_index=i,
            commitments=commitments + (cm,),
            challenges=challenges,
            oracles=oracles,
        )
        oracle, _, budget, _ = reductor(
            self.adversary, rho, ctx, self.share, self.prng, stop=self.stop
        )
        self.budgets.append(budget)
        state = _ExtractorState(
            adversary_state=rho,
            commitments=commitments + (cm,),
            challenges=challenges,
            oracles=oracles + (oracle,),
        )
        return ProofString(i, oracle.symbols), state

    def first(self):
        return self._extract_round(self.adversary.start(), (), (), ())

    def next_round(self, state: _ExtractorState, challenge: Bits):
        return self._extract_round(
            state.adversary_state,
            state.commitments,
            state.challenges + (challenge,),
            state.oracles,
        )


def build_iop_prover(
    protocol: IopProtocol,
    params: ArgParams,
    adversary,
    epsilon: float,
    prng: Prng,
    stop: str = "uniform",
) -> ExtractorIopProver:
    return ExtractorIopProver(protocol, params, adversary, epsilon, prng, stop=stop)


# ---------------------------------------------------------------------------
# hybrid experiments
# ---------------------------------------------------------------------------


@dataclass
class TrialRecord:
    """Everything one hybrid run produces, for any routing to be evaluated."""

    challenges: tuple[Bits, ...]
    commitments: tuple
    oracles: tuple[ExtractedOracle, ...]
    knowledge: tuple[KnowledgeSet, ...]
    budgets: tuple[RewindBudget, ...]
    response: tuple | None
    voided: bool = False


def run_hybrid_trial(
    protocol: IopProtocol,
    params: ArgParams,
    adversary,
    oracle_rounds: int,
    epsilon: float,
    prng: Prng,
) -> TrialRecord:
    """One execution with rounds 1..oracle_rounds rewound and extracted."""
    spec = protocol.spec
    k = spec.rounds
    if not 0 <= oracle_rounds <= k:
        raise ParameterError("oracle rounds must lie in [0, k]")
    share = error_share(epsilon, k) if oracle_rounds else None
    challenges: list[Bits] = []
    commitments = []
    oracles: tuple[ExtractedOracle, ...] = ()
    knowledge: tuple[KnowledgeSet, ...] = ()
    budgets: tuple[RewindBudget, ...] = ()
    state = adversary.start()
    try:
        for i in range(1, k + 1):
            prev = challenges[-1] if challenges else None
            cm, state = adversary.next_commitment(state, prev)
            commitments.append(cm)
            if i <= oracle_rounds:
                ctx = ArgContext(
                    params=params,
                    protocol=protocol,
                    round_index=i,
                    commitments=tuple(commitments),
                    challenges=tuple(challenges),
                    oracles=oracles,
                )
                oracle, kset, budget, _ = reductor(adversary, state, ctx, share, prng)
                oracles += (oracle,)
                knowledge += (kset,)
                budgets += (budget,)
            challenges.append(prng.take_bits(spec.randomness_bits[i - 1]))
        response = adversary.final_response(state, challenges[-1])
    except IbcsError:
        return TrialRecord(
            tuple(challenges), tuple(commitments), oracles, knowledge, budgets,
            response=None, voided=True,
        )
    return TrialRecord(
        tuple(challenges), tuple(commitments), oracles, knowledge, budgets, response
    )


def accept_under_routing(
    protocol: IopProtocol, params: ArgParams, record: TrialRecord, oracle_rounds: int
) -> int:
    """Hybrid verifier: oracles answer rounds <= oracle_rounds, openings the
    rest; commitment checks apply to every round."""
    if record.response is None:
        return 0
    if oracle_rounds > len(record.oracles):
        raise ParameterError("routing needs more oracles than the trial extracted")
    try:
        plan = protocol.verifier_query(record.challenges)
    except ProtocolViolation:
        return 0
    if len(record.response) != protocol.spec.rounds:
        return 0
    if not _openings_ok(
        params, record.commitments, plan, record.response,
        range(1, protocol.spec.rounds + 1),
    ):
        return 0
    answers = _routed_answers(protocol, plan, record.oracles, record.response, oracle_rounds)
    return protocol.verifier_decide(record.challenges, answers)


@dataclass(frozen=True)
class Estimate:
    successes: int
    trials: int
    radius: float

    @property
    def value(self) -> float:
        return self.successes / self.trials

    def to_dict(self) -> dict:
        return {
            "successes": self.successes,
            "trials": self.trials,
            "value": self.value,
            "radius": self.radius,
        }


def hybrid_value(
    protocol: IopProtocol,
    params: ArgParams,
    adversary,
    oracle_rounds: int,
    trials: int,
    seed: int,
    epsilon: float,
    predicate: Callable[[Any], bool] | None = None,
    label: str = "hybrid",
) -> Estimate:
    """Monte-Carlo estimate of the hybrid's acceptance with confidence radius."""
    if trials < 1:
        raise ParameterError("at least one trial required")
    root = seed_root(seed)
    if predicate is not None and not predicate(protocol.instance):
        return Estimate(0, trials, hoeffding_radius(trials))
    successes = 0
    for trial in range(trials):
        prng = Prng(derive(root, label, oracle_rounds, trial))
        record = run_hybrid_trial(protocol, params, adversary, oracle_rounds, epsilon, prng)
        successes += accept_under_routing(protocol, params, record, oracle_rounds)
    return Estimate(successes, trials, hoeffding_radius(trials))


def measure_acceptance(
    protocol: IopProtocol,
    params: ArgParams,
    adversary,
    trials: int,
    seed: int,
    label: str = "accept",
) -> Estimate:
    """Plain argument acceptance: the zero-oracle hybrid."""
    return hybrid_value(
        protocol, params, adversary, 0, trials, seed, epsilon=1.0, label=label
    )


# ---------------------------------------------------------------------------
# failure events
# ---------------------------------------------------------------------------


@dataclass
class EventCounters:
    """Counts from the coupled hybrid pair at one round.

    `disagreements` is the answer-conflict event: the final opening passes
    its commitment check yet contradicts the extracted string at a shared
    queried position. `missing` counts accepted final runs whose query set
    left coverage: exactly the uniform-stop event the l/T bound governs.
    `raw_missing` drops the acceptance gate (diagnostic only).
    """

    round_index: int
    max_rewinds: int
    proof_length: int
    trials: int = 0
    voided: int = 0
    disagreements: int = 0
    missing: int = 0
    raw_missing: int = 0
    accept_openings: int = 0
    accept_oracle: int = 0
    binding_pairs: list = field(default_factory=list)

    @property
    def missing_bound(self) -> Fraction:
        return Fraction(self.proof_length, self.max_rewinds)

    def to_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "max_rewinds": self.max_rewinds,
            "proof_length": self.proof_length,
            "trials": self.trials,
            "voided": self.voided,
            "disagreements": self.disagreements,
            "missing": self.missing,
            "raw_missing": self.raw_missing,
            "accept_openings": self.accept_openings,
            "accept_oracle": self.accept_oracle,
            "missing_bound": float(self.missing_bound),
            "binding_breaks": len(self.binding_pairs),
        }


def run_events_experiment(
    protocol: IopProtocol,
    params: ArgParams,
    adversary,
    round_index: int,
    trials: int,
    seed: int,
    epsilon: float,
    label: str = "events",
) -> EventCounters:
    """Couple the opening-routed and oracle-routed verifiers at one round."""
    spec = protocol.spec
    if not 1 <= round_index <= spec.rounds:
        raise ParameterError("event round must lie in [1, k]")
    share = error_share(epsilon, spec.rounds)
    counters = EventCounters(
        round_index=round_index,
        max_rewinds=rewind_budget_limit(spec.max_proof_length, share),
        proof_length=spec.proof_lengths[round_index - 1],
    )
    root = seed_root(seed)
    for trial in range(trials):
        counters.trials += 1
        prng = Prng(derive(root, label, round_index, trial))
        record = run_hybrid_trial(protocol, params, adversary, round_index, epsilon, prng)
        if record.voided:
            counters.voided += 1
            continue
        counters.accept_openings += accept_under_routing(
            protocol, params, record, round_index - 1
        )
        counters.accept_oracle += accept_under_routing(protocol, params, record, round_index)
        if record.response is None:
            continue
        plan = protocol.verifier_query(record.challenges)
        queries = plan.per_round[round_index - 1]
        oracle = record.oracles[round_index - 1]
        opening = record.response[round_index - 1]
        new_positions = [q for q in queries if q not in oracle.covered]
        if new_positions:
            counters.raw_missing += 1
            # The bound governs the accepting-run event: an accepted rewind
            # with new positions is exactly one more coverage step.
            i = round_index
            ctx = ArgContext(
                params=params,
                protocol=protocol,
                round_index=i,
                commitments=record.commitments[:i],
                challenges=record.challenges[: i - 1],
                oracles=record.oracles[: i - 1],
            )
            tail = record.commitments[i:]
            continuation = record.challenges[i - 1 :]
            if game_predicate(ctx, continuation, tail, record.response):
                counters.missing += 1
        cm = record.commitments[round_index - 1]
        opening_ok = vc_check(
            params.vc, cm, opening.positions, opening.answers, opening.proof
        )
        if opening_ok and opening.positions == queries:
            conflicts = [
                q
                for q, a in zip(opening.positions, opening.answers)
                if q in oracle.covered and oracle.symbols[q - 1] != a
            ]
            if conflicts:
                counters.disagreements += 1
                pair = _binding_pair(
                    params, record.knowledge[round_index - 1], cm, opening, conflicts
                )
                if pair is not None:
                    counters.binding_pairs.append(pair)
    return counters


def _binding_pair(params, knowledge: KnowledgeSet, cm, opening, conflicts):
    """If a conflict yields two verifying openings, surface the witness pair."""
    for q in conflicts:
        for positions, answers, proof in knowledge.triples:
            if q in positions:
                idx = positions.index(q)
                if answers[idx] == opening.answers[opening.positions.index(q)]:
                    continue
                if vc_check(params.vc, cm, positions, answers, proof):
                    return {
                        "position": q,
                        "commitment_root": cm.root.hex(),
                        "opening_a": (opening.positions, opening.answers),
                        "opening_b": (positions, answers),
                    }
    return None


# ---------------------------------------------------------------------------
# bound calculator and knowledge pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoremBounds:
    soundness_bound: Any
    knowledge_bound: Any
    iop_soundness: Any
    iop_knowledge: Any
    transformation_loss: Any

    def to_dict(self) -> dict:
        out = {
            "soundness_bound": float(self.soundness_bound),
            "transformation_loss": float(self.transformation_loss),
            "iop_soundness": float(self.iop_soundness),
        }
        if self.knowledge_bound is not None:
            out["knowledge_bound"] = float(self.knowledge_bound)
            out["iop_knowledge"] = float(self.iop_knowledge)
        return out


def theorem_bounds(
    spec,
    vc_binding_error,
    vc_collapsing_error,
    epsilon,
    iop_soundness,
    iop_knowledge=None,
) -> TheoremBounds:
    """Soundness and knowledge bounds for the compiled argument.

    Loss term: k * (binding + l_max * collapsing) + epsilon, added to the
    IOP's own soundness (and knowledge) error. Exact for exact input types.
    """
    for name, value in (
        ("vc_binding_error", vc_binding_error),
        ("vc_collapsing_error", vc_collapsing_error),
        ("epsilon", epsilon),
        ("iop_soundness", iop_soundness),
    ):
        if not 0 <= value <= 1:
            raise ParameterError(f"{name} must lie in [0, 1]")
    if iop_knowledge is not None and not 0 <= iop_knowledge <= 1:
        raise ParameterError("iop_knowledge must lie in [0, 1]")
    k = spec.rounds
    l_max = spec.max_proof_length
    loss = k * (vc_binding_error + l_max * vc_collapsing_error) + epsilon
    return TheoremBounds(
        soundness_bound=iop_soundness + loss,
        knowledge_bound=None if iop_knowledge is None else iop_knowledge + loss,
        iop_soundness=iop_soundness,
        iop_knowledge=iop_knowledge,
        transformation_loss=loss,
    )


@dataclass
class KnowledgeOutcome:
    success: bool
    witness: Any
    oracles: tuple[ExtractedOracle, ...]
    budgets: tuple[RewindBudget, ...]

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "witness": list(self.witness) if self.witness is not None else None,
            "covered": [sorted(o.covered) for o in self.oracles],
            "rewinds": [b.stop_time for b in self.budgets],
        }


def end_to_end_knowledge(
    protocol: IopProtocol,
    params: ArgParams,
    adversary,
    epsilon: float,
    seed: int,
    label: str = "knowledge",
) -> KnowledgeOutcome:
    """Extract a witness from an argument adversary via the IOP extractor.

    The extractor drives the reduction's IOP prover with the full rewind
    budget per round (coverage is monotone in the number of rewinds, and
    the uniform stopping time matters only for the coupling bound), then
    hands the extracted oracles to the IOP's own extractor. Failure is
    reported, never silent.
    """
    root = seed_root(seed)
    prng = Prng(derive(root, label, "rewind"))
    prover = build_iop_prover(protocol, params, adversary, epsilon, prng, stop="full")
    driver = Prng(derive(root, label, "challenges"))
    proof, state = prover.first()
    for i in range(2, protocol.spec.rounds + 1):
        challenge = driver.take_bits(protocol.spec.randomness_bits[i - 2])
        proof, state = prover.next_round(state, challenge)
    oracles = state.oracles
    witness = protocol.extract_witness([(o.covered, o.symbols) for o in oracles])
    success = protocol.check_witness(witness)
    return KnowledgeOutcome(
        success=success,
        witness=witness if success else None,
        oracles=oracles,
        budgets=tuple(prover.budgets),
    )
