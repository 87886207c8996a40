from __future__ import annotations

import math
from fractions import Fraction

import pytest

from ibcslab.adversaries import (
    Withholder,
    always_abort,
    grinder_on_leading_bits,
    honest_wrapper,
)
from ibcslab.errors import ParameterError, ProtocolViolation
from ibcslab.extraction import (
    ArgContext,
    KnowledgeSet,
    RewindBudget,
    build_iop_prover,
    end_to_end_knowledge,
    error_share,
    fill_oracle,
    hoeffding_radius,
    hybrid_value,
    measure_acceptance,
    reductor,
    rewind_budget_limit,
    run_events_experiment,
    run_hybrid_trial,
    sampler,
    theorem_bounds,
)
from ibcslab.iop import IopSpec, iop_interact
from ibcslab.prng import Prng, derive, seed_root
from ibcslab.toys import is_proper_coloring


def test_hoeffding_radius_formula():
    assert math.isclose(
        hoeffding_radius(10_000), math.sqrt(math.log(2 / 1e-6) / 20_000)
    )
    with pytest.raises(ParameterError):
        hoeffding_radius(0)


def test_rewind_budget_example():
    # l_max = 64, epsilon = 0.5, k = 2: T = 64 / 0.125 = 512
    assert rewind_budget_limit(64, error_share(0.5, 2)) == 512
    assert rewind_budget_limit(3, error_share(0.5, 1)) == 12
    with pytest.raises(ParameterError):
        RewindBudget(max_rewinds=4, stop_time=5, error_share=Fraction(1, 4))


def test_knowledge_set_invariants():
    kset = KnowledgeSet(proof_length=3)
    kset.add((1, 2), (5, 6), ())
    assert kset.coverage == {1, 2}
    with pytest.raises(ParameterError):
        kset.add((1, 2), (5, 6), ())  # no new coverage
    with pytest.raises(ParameterError):
        kset.add((7,), (1,), ())  # outside the proof string
    kset.add((2, 3), (9, 9), ())
    assert kset.coverage == {1, 2, 3}
    assert len(kset.triples) == 2


def test_fill_oracle_first_write_wins():
    kset = KnowledgeSet(proof_length=4)
    kset.add((1, 2), (5, 6), ())
    kset.add((2, 3), (9, 7), ())  # overlaps position 2 with a new answer
    oracle = fill_oracle(1, 4, kset)
    assert oracle.symbols == (5, 6, 7, 0)
    assert oracle.covered == frozenset({1, 2, 3})


def test_fill_oracle_empty_knowledge():
    oracle = fill_oracle(2, 3, KnowledgeSet(proof_length=3))
    assert oracle.symbols == (0, 0, 0)
    assert oracle.covered == frozenset()


def test_fill_oracle_single_triple():
    kset = KnowledgeSet(proof_length=3)
    kset.add((2,), (1,), ())
    oracle = fill_oracle(1, 3, kset)
    assert oracle.symbols == (0, 1, 0)


def _round1_context(protocol, params, adversary):
    state = adversary.start()
    cm, rho = adversary.next_commitment(state, None)
    ctx = ArgContext(
        params=params,
        protocol=protocol,
        round_index=1,
        commitments=(cm,),
        challenges=(),
        oracles=(),
    )
    return ctx, rho


def test_sampler_zero_iterations(k3_setup):
    protocol, params, witness = k3_setup
    honest = honest_wrapper(protocol, params, witness)
    ctx, rho = _round1_context(protocol, params, honest)
    kset, stats = sampler(honest, rho, ctx, 0, Prng(seed_root(1)))
    assert kset.coverage == set()
    assert stats.rewinds == 0


def test_sampler_covers_all_queryable_positions(k3_setup):
    # enumeration oracle: the positions the query function can ever emit
    protocol, params, witness = k3_setup
    queryable = set()
    for edge_index in range(len(protocol.instance.edges)):
        queryable.update(protocol.query_plan((edge_index,)).per_round[0])
    honest = honest_wrapper(protocol, params, witness)
    ctx, rho = _round1_context(protocol, params, honest)
    kset, stats = sampler(honest, rho, ctx, 100, Prng(derive(seed_root(2), "cover")))
    assert kset.coverage == queryable
    assert stats.accepted == 100
    assert len(kset.triples) <= protocol.spec.proof_lengths[0]


def test_sampler_abort_adversary_collects_nothing(k3_setup):
    protocol, params, witness = k3_setup
    adv = always_abort(protocol, honest_wrapper(protocol, params, witness))
    ctx, rho = _round1_context(protocol, params, adv)
    kset, stats = sampler(adv, rho, ctx, 50, Prng(seed_root(3)))
    assert kset.coverage == set()
    assert stats.accepted == 0


def test_sampler_counts_crashes_as_voided(k3_setup):
    protocol, params, witness = k3_setup
    honest = honest_wrapper(protocol, params, witness)

    class Crashing:
        def start(self):
            return honest.start()

        def next_commitment(self, state, challenge):
            return honest.next_commitment(state, challenge)

        def final_response(self, state, challenge):
            raise ProtocolViolation("synthetic crash")

    adv = Crashing()
    ctx, rho = _round1_context(protocol, params, adv)
    kset, stats = sampler(adv, rho, ctx, 10, Prng(seed_root(4)))
    assert stats.voided == 10
    assert kset.coverage == set()


def test_sampler_isolates_mutating_adversaries(k3_setup):
    """A prover that scribbles on its state cannot leak across rewinds: each
    continuation runs on a snapshot, so the base state stays byte-identical
    and repeated sampling replays the same knowledge set."""
    protocol, params, witness = k3_setup
    honest = honest_wrapper(protocol, params, witness)

    class Mutating:
        def start(self):
            return (honest.start(), [0])

        def next_commitment(self, state, challenge):
            inner, cell = state
            cm, inner = honest.next_commitment(inner, challenge)
            return cm, (inner, cell)

        def final_response(self, state, challenge):
            inner, cell = state
            cell[0] += 1  # mutation visible only inside this rewind's copy
            return honest.final_response(inner, challenge)

    adv = Mutating()
    state0 = adv.start()
    cm, rho = adv.next_commitment(state0, None)
    from ibcslab.adversaries import state_digest

    ctx = ArgContext(
        params=params, protocol=protocol, round_index=1,
        commitments=(cm,), challenges=(), oracles=(),
    )
    before = state_digest(rho)
    first, _ = sampler(adv, rho, ctx, 20, Prng(seed_root(5)))
    assert state_digest(rho) == before
    again, _ = sampler(adv, rho, ctx, 20, Prng(seed_root(5)))
    assert again.triples == first.triples


def test_reductor_budget_and_fill(k3_setup):
    protocol, params, witness = k3_setup
    honest = honest_wrapper(protocol, params, witness)
    ctx, rho = _round1_context(protocol, params, honest)
    share = error_share(0.5, 1)
    oracle, knowledge, budget, _ = reductor(
        honest, rho, ctx, share, Prng(derive(seed_root(6), "red"))
    )
    assert budget.max_rewinds == rewind_budget_limit(3, share)
    assert 0 <= budget.stop_time <= budget.max_rewinds
    for q in oracle.covered:
        assert oracle.symbols[q - 1] == witness[q - 1]
    for q in set(range(1, 4)) - oracle.covered:
        assert oracle.symbols[q - 1] == 0


def test_reductor_stop_time_spans_range(k3_setup):
    protocol, params, witness = k3_setup
    honest = honest_wrapper(protocol, params, witness)
    ctx, rho = _round1_context(protocol, params, honest)
    share = error_share(0.5, 1)
    stops = set()
    for i in range(200):
        _, _, budget, _ = reductor(
            honest, rho, ctx, share, Prng(derive(seed_root(7), "stop", i))
        )
        stops.add(budget.stop_time)
    assert min(stops) == 0
    assert max(stops) == rewind_budget_limit(3, share)


def test_extracted_prover_emits_proper_coloring_mostly(k3_setup):
    protocol, params, witness = k3_setup
    honest = honest_wrapper(protocol, params, witness)
    epsilon = 0.5
    trials = 400
    proper = 0
    for i in range(trials):
        prng = Prng(derive(seed_root(8), "build", i))
        prover = build_iop_prover(protocol, params, honest, epsilon, prng)
        proof, _ = prover.first()
        proper += is_proper_coloring(protocol.instance, proof.symbols)
    rate = proper / trials
    assert rate >= 1 - epsilon - 3 * hoeffding_radius(trials)


def test_extracted_prover_from_abort_is_blank_and_rejected(k3_setup):
    protocol, params, witness = k3_setup
    adv = always_abort(protocol, honest_wrapper(protocol, params, witness))
    prng = Prng(derive(seed_root(9), "blank"))
    prover = build_iop_prover(protocol, params, adv, 0.5, prng)
    proof, _ = prover.first()
    assert proof.symbols == (0, 0, 0)
    result = iop_interact(protocol, build_iop_prover(
        protocol, params, adv, 0.5, Prng(derive(seed_root(9), "blank2"))
    ), Prng(derive(seed_root(9), "verify")))
    assert result.accept == 0


def test_extracted_prover_is_deterministic_per_seed(k3_setup):
    protocol, params, witness = k3_setup
    honest = honest_wrapper(protocol, params, witness)
    outs = []
    for _ in range(2):
        prng = Prng(derive(seed_root(10), "det"))
        prover = build_iop_prover(protocol, params, honest, 0.5, prng)
        proof, _ = prover.first()
        outs.append(proof)
    assert outs[0] == outs[1]


def test_hybrid_zero_is_plain_acceptance(k3_setup):
    protocol, params, witness = k3_setup
    honest = honest_wrapper(protocol, params, witness)
    est = hybrid_value(protocol, params, honest, 0, 200, seed=11, epsilon=0.5)
    assert est.value == 1.0


def test_hybrid_full_abort_is_zero(k3_setup):
    protocol, params, witness = k3_setup
    adv = always_abort(protocol, honest_wrapper(protocol, params, witness))
    est = hybrid_value(protocol, params, adv, 1, 100, seed=12, epsilon=0.5)
    assert est.value == 0.0


def test_hybrid_chain_honest(k3_setup):
    protocol, params, witness = k3_setup
    honest = honest_wrapper(protocol, params, witness)
    epsilon = 0.5
    h0 = hybrid_value(protocol, params, honest, 0, 600, seed=13, epsilon=epsilon)
    h1 = hybrid_value(protocol, params, honest, 1, 600, seed=13, epsilon=epsilon)
    assert h0.value <= h1.value + epsilon + 3 * (h0.radius + h1.radius)


def test_events_honest_never_disagrees(k3_setup):
    protocol, params, witness = k3_setup
    honest = honest_wrapper(protocol, params, witness)
    counters = run_events_experiment(protocol, params, honest, 1, 500, seed=14, epsilon=0.5)
    assert counters.disagreements == 0
    assert counters.binding_pairs == []
    assert counters.trials == 500


def test_events_withholder_bound(k3_setup):
    protocol, params, witness = k3_setup
    withholder = Withholder(
        protocol, honest_wrapper(protocol, params, witness), lambda r, q: q == 1
    )
    counters = run_events_experiment(
        protocol, params, withholder, 1, 2000, seed=15, epsilon=0.5
    )
    rate = counters.missing / counters.trials
    assert rate <= float(counters.missing_bound) + 3 * hoeffding_radius(2000)
    assert counters.binding_pairs == []


def test_events_rate_nonincreasing_with_larger_budget(k3_setup):
    # halving epsilon doubles T; the missing rate should not grow beyond noise
    protocol, params, witness = k3_setup
    withholder = Withholder(
        protocol, honest_wrapper(protocol, params, witness), lambda r, q: q == 1
    )
    wide = run_events_experiment(protocol, params, withholder, 1, 3000, seed=16, epsilon=0.5)
    tight = run_events_experiment(protocol, params, withholder, 1, 3000, seed=16, epsilon=0.25)
    slack = 3 * (hoeffding_radius(3000) + hoeffding_radius(3000))
    assert tight.missing / tight.trials <= wide.missing / wide.trials + slack
    assert tight.max_rewinds == 2 * wide.max_rewinds


def test_theorem_bounds_pinned_example():
    spec = IopSpec(
        rounds=2, alphabet_size=4, symbol_bits=2, proof_lengths=(8, 8),
        randomness_bits=(72, 72), query_counts=(2, 2), relation_id="x",
    )
    bounds = theorem_bounds(
        spec, Fraction(1, 100), Fraction(1, 1000), Fraction(1, 10), Fraction(5, 6)
    )
    assert bounds.soundness_bound == Fraction(5, 6) + 2 * (
        Fraction(1, 100) + 8 * Fraction(1, 1000)
    ) + Fraction(1, 10)
    assert bounds.knowledge_bound is None
    with_knowledge = theorem_bounds(
        spec, Fraction(1, 100), Fraction(1, 1000), Fraction(1, 10), Fraction(5, 6),
        iop_knowledge=Fraction(1, 2),
    )
    assert with_knowledge.knowledge_bound == Fraction(1, 2) + with_knowledge.transformation_loss


def test_theorem_bounds_zero_vc_terms():
    spec = IopSpec(
        rounds=1, alphabet_size=3, symbol_bits=2, proof_lengths=(4,),
        randomness_bits=(72,), query_counts=(2,), relation_id="x",
    )
    bounds = theorem_bounds(spec, 0, 0, Fraction(1, 10), Fraction(5, 6))
    assert bounds.soundness_bound == Fraction(5, 6) + Fraction(1, 10)


def test_theorem_bounds_monotone_sweep():
    spec = IopSpec(
        rounds=2, alphabet_size=4, symbol_bits=2, proof_lengths=(8, 8),
        randomness_bits=(72, 72), query_counts=(2, 2), relation_id="x",
    )
    grid = [0.0, 0.01, 0.05, 0.2]
    base = (0.01, 0.001, 0.1, 0.5)
    for position in range(4):
        previous = None
        for value in grid:
            args = list(base)
            args[position] = value
            bound = theorem_bounds(spec, *args).soundness_bound
            if previous is not None:
                assert bound >= previous
            previous = bound


def test_theorem_bounds_rejects_out_of_range():
    spec = IopSpec(
        rounds=1, alphabet_size=3, symbol_bits=2, proof_lengths=(4,),
        randomness_bits=(72,), query_counts=(2,), relation_id="x",
    )
    with pytest.raises(ParameterError):
        theorem_bounds(spec, -0.1, 0, 0.1, 0.5)
    with pytest.raises(ParameterError):
        theorem_bounds(spec, 0, 0, 0.1, 1.5)


def test_end_to_end_knowledge_honest(k3_setup):
    protocol, params, witness = k3_setup
    honest = honest_wrapper(protocol, params, witness)
    for seed in range(30):
        outcome = end_to_end_knowledge(protocol, params, honest, epsilon=0.25, seed=seed)
        assert outcome.success
        assert is_proper_coloring(protocol.instance, outcome.witness)


def test_end_to_end_knowledge_abort_fails_loudly(k3_setup):
    protocol, params, witness = k3_setup
    adv = always_abort(protocol, honest_wrapper(protocol, params, witness))
    outcome = end_to_end_knowledge(protocol, params, adv, epsilon=0.25, seed=0)
    assert not outcome.success
    assert outcome.witness is None
    acceptance = measure_acceptance(protocol, params, adv, 200, seed=1)
    assert acceptance.value == 0.0  # the knowledge inequality holds vacuously


def test_end_to_end_knowledge_grinder(k3_setup):
    protocol, params, witness = k3_setup
    grinder = grinder_on_leading_bits(
        protocol, honest_wrapper(protocol, params, witness), 1
    )
    trials = 60
    successes = sum(
        end_to_end_knowledge(protocol, params, grinder, epsilon=0.25, seed=s).success
        for s in range(trials)
    )
    acceptance = measure_acceptance(protocol, params, grinder, 2000, seed=2)
    floor = acceptance.value - 0.25 - 3 * (acceptance.radius + hoeffding_radius(trials))
    assert successes / trials >= floor


def test_run_hybrid_trial_records_budgets(sumcheck_true_setup):
    protocol, params = sumcheck_true_setup
    honest = honest_wrapper(protocol, params, ())
    prng = Prng(derive(seed_root(20), "trial"))
    record = run_hybrid_trial(protocol, params, honest, 2, 0.5, prng)
    assert len(record.oracles) == 2
    assert len(record.budgets) == 2
    expected_limit = rewind_budget_limit(
        protocol.spec.max_proof_length, error_share(0.5, 2)
    )
    assert all(b.max_rewinds == expected_limit for b in record.budgets)
