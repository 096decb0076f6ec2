import itertools
import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from byzlab.mpc import (
    Circuit,
    CoalitionTooLarge,
    DegreeTooHigh,
    FieldTooSmall,
    Gate,
    InconsistentShares,
    MismatchedSession,
    NotEnoughShares,
    ShareVector,
    Tape,
    ThresholdTooHigh,
    add_shares,
    and_circuit,
    circuit_from_dict,
    circuit_to_dict,
    evaluate_circuit,
    evaluate_poly,
    interpolate_at,
    is_prime,
    mul_with_reduction,
    plain_evaluate,
    privacy_audit,
    reconstruct,
    reduction_matrix,
    share,
    sum_circuit,
)


def test_is_prime_small_and_default():
    assert [q for q in range(30) if is_prime(q)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert is_prime(2147483647) and not is_prime(2147483647 * 3)


def test_zero_threshold_shares_are_the_secret():
    v = share(4, 0, 5, random.Random(0), 7)
    assert v.shares == (4,) * 5


def test_share_example():
    # g(x) = 3 + 2x over GF(7) at 1, 2, 3
    expected = tuple(evaluate_poly([3, 2], a, 7) for a in (1, 2, 3))
    assert expected == (5, 0, 2)
    assert share(3, 1, 3, Tape([2]), 7).shares == expected


@pytest.mark.parametrize("subset", [(0, 1), (0, 2), (1, 2), (0, 1, 2)])
def test_reconstruct_example(subset):
    v = ShareVector((5, 0, 2), (1, 2, 3), 1, 7)
    assert reconstruct(v, subset) == 3


def test_reconstruct_single_share_t0():
    assert reconstruct(ShareVector((6, 6), (1, 2), 0, 7), [1]) == 6


def test_reconstruct_detects_tampering():
    v = ShareVector((5, 0, 3), (1, 2, 3), 1, 7)
    with pytest.raises(InconsistentShares):
        reconstruct(v)


def test_reconstruct_needs_enough_shares():
    with pytest.raises(NotEnoughShares):
        reconstruct(ShareVector((5, 0, 2), (1, 2, 3), 1, 7), [0])


def test_field_too_small():
    with pytest.raises(FieldTooSmall):
        share(1, 1, 3, random.Random(0), 3)


@pytest.mark.parametrize("secret", range(7))
def test_share_reconstruct_gf7(secret):
    rng = random.Random(secret)
    for t in range(3):
        assert reconstruct(share(secret, t, 5, rng, 7)) == secret


def test_add_zero_sharing():
    rng = random.Random(1)
    a = share(4, 1, 3, rng, 7)
    assert reconstruct(add_shares(a, share(0, 1, 3, rng, 7))) == 4


def test_add_example():
    rng = random.Random(2)
    assert reconstruct(add_shares(share(3, 1, 3, rng, 7), share(5, 1, 3, rng, 7))) == (3 + 5) % 7


def test_add_mismatched_session():
    with pytest.raises(MismatchedSession):
        add_shares(share(1, 1, 3, random.Random(0), 7), share(1, 1, 3, random.Random(0), 11))


def test_sum_of_many_sharings_exhaustive():
    p, n, t = 11, 3, 1
    rng = random.Random(3)
    table = [[share(s, t, n, rng, p) for s in range(p)] for _ in range(5)]
    for k in range(1, 6):
        for secrets in itertools.product(range(p), repeat=k):
            acc = table[0][secrets[0]]
            for i, s in enumerate(secrets[1:], 1):
                acc = add_shares(acc, table[i][s])
            assert reconstruct(acc) == sum(secrets) % p


def test_linearity_exhaustive_gf5():
    for x, y, ra, rb in itertools.product(range(5), repeat=4):
        a, b = share(x, 1, 3, Tape([ra]), 5), share(y, 1, 3, Tape([rb]), 5)
        assert reconstruct(add_shares(a, b)) == (reconstruct(a) + reconstruct(b)) % 5


def test_perfect_secrecy_single_share():
    p = 5
    for player in range(3):
        marginals = set()
        for secret in range(p):
            counts = Counter(share(secret, 1, 3, Tape([r]), p).shares[player] for r in range(p))
            assert counts == Counter(range(p))
            marginals.add(tuple(sorted(counts.items())))
        assert len(marginals) == 1


def _truncate_then_evaluate(coeffs, t, alphas, p):
    return tuple(evaluate_poly(coeffs[: t + 1], a, p) for a in alphas)


def test_reduction_identity_on_low_degree():
    C = reduction_matrix((1, 2, 3, 4, 5), 2, 11)
    for coeffs in itertools.product(range(11), repeat=3):
        a = [evaluate_poly(coeffs, x, 11) for x in C.alphas]
        assert C.apply(a) == tuple(a)


def test_reduction_example():
    C = reduction_matrix((1, 2, 3), 1, 7)
    a = [evaluate_poly([1, 1, 1], x, 7) for x in (1, 2, 3)]
    assert C.apply(a) == _truncate_then_evaluate([1, 1, 1], 1, (1, 2, 3), 7) == (2, 3, 4)


@pytest.mark.parametrize("seed", range(100))
def test_reduction_random_polynomials(seed):
    rng = random.Random(seed)
    p, t = 101, 2
    alphas = tuple(rng.sample(range(1, p), 5))
    coeffs = [rng.randrange(p) for _ in range(2 * t + 1)]
    C = reduction_matrix(alphas, t, p)
    a = [evaluate_poly(coeffs, x, p) for x in alphas]
    assert C.apply(a) == _truncate_then_evaluate(coeffs, t, alphas, p)


def test_reduction_degree_too_high():
    with pytest.raises(DegreeTooHigh):
        reduction_matrix((1, 2, 3, 4), 2, 7)


def test_mul_example():
    rng = random.Random(4)
    a, b = share(2, 1, 3, rng, 7), share(3, 1, 3, rng, 7)
    assert reconstruct(mul_with_reduction(a, b, reduction_matrix((1, 2, 3), 1, 7), rng)) == 6


def test_mul_by_one():
    rng = random.Random(5)
    for s in range(7):
        a = share(s, 1, 3, rng, 7)
        assert reconstruct(mul_with_reduction(a, share(1, 1, 3, rng, 7), rng=rng)) == s


@pytest.mark.parametrize("rerandomize", [True, False])
def test_mul_exhaustive_gf5(rerandomize):
    rng = random.Random(6)
    for x, y in itertools.product(range(5), repeat=2):
        prod = mul_with_reduction(share(x, 1, 3, rng, 5), share(y, 1, 3, rng, 5), rng=rng,
                                  rerandomize=rerandomize)
        assert reconstruct(prod) == x * y % 5  # also checks degree <= t on all 3 shares


def test_mul_degree_too_high():
    rng = random.Random(0)
    with pytest.raises(DegreeTooHigh):
        mul_with_reduction(share(1, 1, 2, rng, 7), share(1, 1, 2, rng, 7), rng=rng)


def test_mul_rejects_foreign_matrix():
    rng = random.Random(0)
    a = share(1, 1, 3, rng, 7)
    with pytest.raises(MismatchedSession):
        mul_with_reduction(a, a, reduction_matrix((1, 2, 3), 1, 11), rng)


@pytest.mark.parametrize("x,y", list(itertools.product((0, 1), repeat=2)))
def test_and_circuit(x, y):
    res = evaluate_circuit(and_circuit(), {0: x, 1: y}, 3, 1, random.Random(7), 7)
    assert res.outputs == {i: {3: x & y} for i in range(3)}


def test_vote_tally():
    votes = {0: 1, 1: 0, 2: 1, 3: 1}
    res = evaluate_circuit(sum_circuit(4), votes, 4, 1, random.Random(8), 11)
    assert {i: v[max(v)] for i, v in res.outputs.items()} == {i: 3 for i in range(4)}


def test_identity_circuit():
    gates = [Gate("input", player=i) for i in range(3)]
    gates += [Gate("output", (i,), player=i) for i in range(3)]
    res = evaluate_circuit(Circuit(tuple(gates)), {0: 4, 1: 0, 2: 6}, 3, 1, random.Random(9), 7)
    assert res.outputs == {0: {3: 4}, 1: {4: 0}, 2: {5: 6}}


def test_threshold_too_high():
    with pytest.raises(ThresholdTooHigh):
        evaluate_circuit(and_circuit(), {0: 1, 1: 1}, 3, 2, random.Random(0), 7)


def _random_circuit(rng, n):
    gates = [Gate("input", player=rng.randrange(n)) for _ in range(rng.randint(1, 4))]
    if rng.random() < 0.3:
        gates.append(Gate("const", value=rng.randrange(20)))
    for _ in range(rng.randint(1, 5)):
        op = rng.choice(["add", "mul"])
        gates.append(Gate(op, (rng.randrange(len(gates)), rng.randrange(len(gates)))))
    wires = len(gates)
    for _ in range(rng.randint(1, 3)):
        gates.append(Gate("output", (rng.randrange(wires),), player=rng.choice([None, *range(n)])))
    return Circuit(tuple(gates))


@pytest.mark.parametrize("seed", range(1000))
def test_circuit_correctness_seeded(seed):
    rng = random.Random(seed)
    n = rng.choice([3, 4])
    p = rng.choice([5, 7, 11])
    circuit = _random_circuit(rng, n)
    per = Counter(g.player for g in circuit.gates if g.op == "input")
    inputs = {pl: [rng.randrange(p) for _ in range(k)] for pl, k in per.items()}
    res = evaluate_circuit(circuit, inputs, n, 1, rng, p)
    assert res.outputs == plain_evaluate(circuit, inputs, p, n)


def test_views_record_what_players_see():
    res = evaluate_circuit(and_circuit(), {0: 1, 1: 1}, 3, 1, random.Random(1), 7)
    kinds = {entry[0] for entry in res.views[2]}
    assert {"recv", "rand", "open", "out"} <= kinds
    assert ("input", 0, 1) in res.views[0]


def test_privacy_audit_sum_gf5():
    result = privacy_audit(sum_circuit(3), [0], 3, 1, 5)
    assert result.passed and result.runs == 5**6


def test_privacy_audit_sum_gf3_is_rejected():
    # three players need three distinct nonzero points; GF(3) has two
    with pytest.raises(FieldTooSmall):
        privacy_audit(sum_circuit(3), [0], 3, 1, 3)


def test_privacy_audit_majority_rejected():
    with pytest.raises(CoalitionTooLarge):
        privacy_audit(and_circuit(), [0, 1], 3, 1, 5)


def test_privacy_audit_constant_circuit():
    c = Circuit((Gate("input", player=0), Gate("input", player=1), Gate("const", value=2),
                 Gate("output", (2,))))
    assert privacy_audit(c, [1], 3, 1, 5).passed


def test_privacy_audit_detects_leak():
    # output only to player 1 and player 0's input shared in the clear (t=0)
    c = Circuit((Gate("input", player=0), Gate("input", player=2), Gate("add", (0, 1)),
                 Gate("output", (2,), player=1)))
    result = privacy_audit(c, [2], 3, 0, 5)
    assert not result.passed and result.witness is not None


def _linear_coefficient_seen_by_player0(res, p):
    opened = {e[2]: e[3] for e in res.views[0] if e[0] == "open"}
    (x1, y1), (x2, y2) = ((1 + mu, opened[mu]) for mu in (1, 2))
    return (y2 - y1) * pow(x2 - x1, -1, p) % p


def test_truncation_without_rerandomizing_leaks():
    # x0 = 0: the product polynomial's linear term is a1 * x1, where a1 is
    # player 0's own coefficient, so the opened output reveals x1
    p = 7
    for seed in range(30):
        for x1 in (0, 1):
            res = evaluate_circuit(and_circuit(), {0: 0, 1: x1}, 3, 1, random.Random(seed), p,
                                   rerandomize=False)
            a1 = next(e[2] for e in res.views[0] if e[0] == "rand")
            assert _linear_coefficient_seen_by_player0(res, p) == a1 * x1 % p


def test_rerandomizing_hides_linear_term():
    p = 7
    seen = Counter()
    for seed in range(200):
        res = evaluate_circuit(and_circuit(), {0: 0, 1: 0}, 3, 1, random.Random(seed), p)
        seen[_linear_coefficient_seen_by_player0(res, p)] += 1
    assert len(seen) == p


def test_circuit_file_roundtrip():
    d = circuit_to_dict(and_circuit(), 7, 3, 1)
    c, params = circuit_from_dict(d)
    assert c == and_circuit() and params == {"p": 7, "n": 3, "t": 1}
    assert circuit_to_dict(c, **params) == d


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 12), min_size=2, max_size=6, unique=True), st.integers(0, 12))
def test_interpolation_recovers_polynomial(xs, seed):
    p = 13
    xs = [x for x in xs if x]  # points must be nonzero for sharing, fine here too
    if len(xs) < 2:
        return
    rng = random.Random(seed)
    coeffs = [rng.randrange(p) for _ in range(len(xs))]
    ys = [evaluate_poly(coeffs, x, p) for x in xs]
    assert interpolate_at(xs, ys, 0, p) == coeffs[0]
