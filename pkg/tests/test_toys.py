from __future__ import annotations

import itertools
from fractions import Fraction

import pytest

from ibcslab.errors import InstanceError, ProtocolViolation
from ibcslab.prng import Bits
from ibcslab.toys import (
    GraphColoringInstance,
    SumcheckCheatPlan,
    SumcheckInstance,
    best_coloring,
    canonical_graph,
    dump_graph_text,
    dump_sumcheck_text,
    find_coloring,
    gc_pcp,
    is_proper_coloring,
    load_graph_text,
    load_sumcheck_text,
    poly_eval,
    sumcheck_exact_cheat_value,
    sumcheck_iop,
)
from helpers import make_sumcheck


def test_graph_instance_validation():
    with pytest.raises(InstanceError):
        GraphColoringInstance(3, ())
    with pytest.raises(InstanceError):
        GraphColoringInstance(3, ((1, 1),))
    with pytest.raises(InstanceError):
        GraphColoringInstance(3, ((2, 1),))
    with pytest.raises(InstanceError):
        GraphColoringInstance(2, ((1, 3),))
    assert canonical_graph(3, [(3, 1), (2, 1)]).edges == ((1, 2), (1, 3))


def test_gc_query_plan_first_edge(k3):
    protocol = gc_pcp(k3)
    # edge index 0 is (1, 2) in canonical order
    assert protocol.query_plan((0,)).per_round == ((1, 2),)


def test_gc_decide(k3):
    protocol = gc_pcp(k3)
    assert protocol.decide((0,), [(0, 1)]) == 1
    assert protocol.decide((0,), [(2, 2)]) == 0
    assert protocol.decide((0,), [(3, 1)]) == 0  # out-of-alphabet symbol


def test_gc_prover_emits_witness(k3):
    protocol = gc_pcp(k3)
    proof, _ = protocol.prover_init((0, 1, 2))
    assert proof.symbols == (0, 1, 2)
    with pytest.raises(ProtocolViolation):
        protocol.prover_next(("gc-done",), Bits(72, 0))
    with pytest.raises(InstanceError):
        protocol.prover_init((0, 1))


def test_gc_knowledge_threshold(k4):
    # any proof accepted with probability above 1 - 1/|E| is a proper coloring
    protocol = gc_pcp(k4)
    edges = k4.edges
    threshold = 1 - Fraction(1, len(edges))
    for coloring in itertools.product(range(3), repeat=4):
        sat = Fraction(
            sum(1 for u, v in edges if coloring[u - 1] != coloring[v - 1]), len(edges)
        )
        if sat > threshold:
            assert is_proper_coloring(k4, coloring)


def test_single_edge_graph_is_satisfiable():
    graph = canonical_graph(2, [(1, 2)])
    assert find_coloring(graph) is not None
    assert best_coloring(graph)[1] == 1


def test_petersen_is_three_colorable(petersen):
    coloring = find_coloring(petersen)
    assert coloring is not None
    assert is_proper_coloring(petersen, coloring)


def test_best_coloring_on_k4(k4):
    coloring, value = best_coloring(k4)
    assert value == Fraction(5, 6)
    sat = sum(1 for u, v in k4.edges if coloring[u - 1] != coloring[v - 1])
    assert Fraction(sat, len(k4.edges)) == value


def test_sumcheck_instance_validation():
    with pytest.raises(InstanceError):
        SumcheckInstance(4, 1, 1, (0, 0), 0)  # not prime
    with pytest.raises(InstanceError):
        SumcheckInstance(5, 1, 1, (0,), 0)  # wrong table size
    with pytest.raises(InstanceError):
        SumcheckInstance(5, 1, 1, (0, 9), 0)  # out of field


def test_sumcheck_round_polynomials():
    # g(X1, X2) = X1*X2 over F5: g_1(X) = X, then g_2(X) = 3X after r1 = 3
    inst = SumcheckInstance(5, 2, 1, (0, 0, 0, 1), 1)
    protocol = sumcheck_iop(inst)
    proof, state = protocol.prover_init(())
    assert proof.symbols == (0, 1)
    proof2, _ = protocol.prover_next(state, Bits(protocol.spec.randomness_bits[0], 3))
    assert proof2.symbols == (0, 3)


def test_sumcheck_decide_identities():
    inst = SumcheckInstance(5, 2, 1, (0, 0, 0, 1), 1)
    protocol = sumcheck_iop(inst)
    # honest tables for challenges (3, 4): g_1 = X, g_2 = 3X
    assert protocol.decide((3, 4), [(0, 1), (0, 3)]) == 1
    assert protocol.decide((3, 4), [(1, 1), (0, 3)]) == 0  # wrong claimed sum
    assert protocol.decide((3, 4), [(0, 1), (1, 3)]) == 0  # chain broken
    assert protocol.decide((3, 4), [(0, 1), (0, 4)]) == 0  # final check fails


def test_sumcheck_prover_rejects_bad_challenge_width(sumcheck_true):
    protocol = sumcheck_iop(sumcheck_true)
    _, state = protocol.prover_init(())
    with pytest.raises(ProtocolViolation):
        protocol.prover_next(state, Bits(8, 0))


def test_sumcheck_zero_polynomial_accepts_everywhere():
    inst = SumcheckInstance(5, 2, 1, (0, 0, 0, 0), 0)
    protocol = sumcheck_iop(inst)
    proof, _ = protocol.prover_init(())
    assert proof.symbols == (0, 0)
    assert protocol.in_language()


def test_cheat_plan_matches_brute_force_small():
    from ibcslab.iop import brute_force_soundness

    for claim_shift in (1, 2):
        inst = make_sumcheck(p=5, n=1, d=1, coeffs=(2, 3), false_claim=False)
        inst = SumcheckInstance(5, 1, 1, (2, 3), (inst.claimed_sum + claim_shift) % 5)
        assert sumcheck_exact_cheat_value(inst) == brute_force_soundness(sumcheck_iop(inst))


def test_cheat_plan_respects_nd_over_p_ceiling(sumcheck_false):
    value = sumcheck_exact_cheat_value(sumcheck_false)
    n, d, p = (
        sumcheck_false.variables,
        sumcheck_false.degree,
        sumcheck_false.prime,
    )
    assert 0 < value <= Fraction(n * d, p)


def test_cheat_plan_tables_obey_constraints(sumcheck_false):
    plan = SumcheckCheatPlan(sumcheck_false)
    p = sumcheck_false.prime
    table1 = plan.table_for((), sumcheck_false.claimed_sum)
    assert (poly_eval(table1, 0, p) + poly_eval(table1, 1, p)) % p == sumcheck_false.claimed_sum
    required = poly_eval(table1, 7, p)
    table2 = plan.table_for((7,), required)
    assert (poly_eval(table2, 0, p) + poly_eval(table2, 1, p)) % p == required


def test_graph_text_roundtrip(petersen):
    witness = find_coloring(petersen)
    text = dump_graph_text(petersen, witness)
    instance, parsed_witness = load_graph_text(text)
    assert instance == petersen
    assert parsed_witness == witness
    with pytest.raises(InstanceError):
        load_graph_text("e 1 2\n")  # missing header
    with pytest.raises(InstanceError):
        load_graph_text("v 2\nq 1\n")


def test_sumcheck_text_roundtrip(sumcheck_true):
    text = dump_sumcheck_text(sumcheck_true)
    assert load_sumcheck_text(text) == sumcheck_true
    with pytest.raises(InstanceError):
        load_sumcheck_text("5 1\n")
