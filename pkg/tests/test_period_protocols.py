import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from congestion_window.errors import ParameterError
from congestion_window.period_protocols import (CumulativeM, LConsecutive, Percentage, SlidingWindow,
                                                Status, evaluate, format_spec, init_refresh,
                                                is_monotone, parse_spec, refresh_evaluate,
                                                verify_witness)

U, C = Status.UNCONGESTED, Status.CONGESTED


def all_vectors(max_len):
    for n in range(1, max_len + 1):
        yield from itertools.product((0, 1), repeat=n)


def test_examples():
    r = evaluate(SlidingWindow(3, 2), [0, 0, 1, 0])
    assert (r.status, r.witness) == (U, 1)
    r = evaluate(LConsecutive(2), [0, 1, 0, 0, 1])
    assert (r.status, r.witness) == (U, 3)
    assert evaluate(CumulativeM(2), [1, 0, 1, 0]).status is U
    assert evaluate(CumulativeM(2), [1, 0, 1, 0]).witness is None
    assert evaluate(Percentage(50), [0, 1]).status is U
    assert evaluate(Percentage(100), [0, 1]).status is C


@pytest.mark.parametrize("spec", [SlidingWindow(3, 1), LConsecutive(1), CumulativeM(1), Percentage(1)])
def test_all_congested_period(spec):
    assert evaluate(spec, [1] * 9).status is C


def test_empty_period_rejected():
    with pytest.raises(ParameterError):
        evaluate(LConsecutive(1), [])


def test_window_longer_than_period_is_congested():
    assert evaluate(SlidingWindow(5, 1), [0, 0, 0]).status is C


def test_verify_witness_examples():
    assert verify_witness(SlidingWindow(3, 2), [0, 0, 1, 0], 1)
    assert verify_witness(SlidingWindow(3, 2), [0, 0, 1, 0], 2)
    assert not verify_witness(SlidingWindow(3, 2), [1, 1, 0, 1], 2)
    assert not verify_witness(LConsecutive(2), [0, 1, 0, 0, 1], 1)
    assert verify_witness(LConsecutive(2), [0, 1, 0, 0, 1], 3)


@pytest.mark.parametrize("w", [0, -1, 3, 10, 1.0, None])
def test_verify_witness_out_of_range_is_false(w):
    assert verify_witness(SlidingWindow(3, 2), [0, 0, 1, 0], w) is False


def test_verify_witness_needs_window_protocol():
    with pytest.raises(ParameterError):
        verify_witness(CumulativeM(1), [0], 1)


def test_refresh_examples():
    st_ = init_refresh(SlidingWindow(3, 2), [1, 1, 1])
    assert st_.status is C
    assert refresh_evaluate(SlidingWindow(3, 2), st_.state, [0, 0]).status is U
    st_ = init_refresh(LConsecutive(3), [0, 0])
    r = refresh_evaluate(LConsecutive(3), st_.state, [0])
    assert (r.status, r.witness) == (U, 1)
    for spec in (SlidingWindow(2, 1), LConsecutive(2), CumulativeM(2), Percentage(50)):
        base = init_refresh(spec, [1, 0, 1])
        again = refresh_evaluate(spec, base.state, [])
        assert (again.status, again.witness) == (base.status, base.witness)


def test_is_monotone():
    assert is_monotone(SlidingWindow(3, 2))
    assert is_monotone(LConsecutive(3))
    assert is_monotone(CumulativeM(3))
    assert not is_monotone(Percentage(50))


@pytest.mark.parametrize("text,spec", [
    ("sw:N=144,K=89", SlidingWindow(144, 89)),
    ("lconsec:L=50", LConsecutive(50)),
    ("cum:M=10", CumulativeM(10)),
    ("pct:x=75", Percentage(75)),
    ("pct:x=12.5", Percentage(Fraction(25, 2))),
])
def test_spec_text_round_trip(text, spec):
    assert parse_spec(text) == spec
    assert parse_spec(format_spec(spec)) == spec


@pytest.mark.parametrize("text", ["sw:N=3", "sw:N=3,K=4", "lconsec:L=0", "foo:L=1", "pct:x=101",
                                  "cum:M=-1", "sw:N=a,K=1", ""])
def test_bad_spec_text(text):
    with pytest.raises(ParameterError):
        parse_spec(text)


def test_spec_invariants():
    with pytest.raises(ParameterError):
        SlidingWindow(0, 0)
    with pytest.raises(ParameterError):
        LConsecutive(0)
    with pytest.raises(ParameterError):
        Percentage(-1)


# --------------------------------------------------------------------------
# Exhaustive checks


def brute_uncongested(N, K, pe):
    return any(N - sum(pe[s:s + N]) >= K for s in range(len(pe) - N + 1))


def test_witness_soundness_and_completeness_exhaustive():
    specs = [SlidingWindow(N, K) for N in range(1, 7) for K in range(1, N + 1)]
    for pe in all_vectors(14):
        for spec in specs:
            r = evaluate(spec, pe)
            expected = brute_uncongested(spec.N, spec.K, pe)
            assert r.uncongested == expected
            valid = [w for w in range(1, len(pe) + 1) if verify_witness(spec, pe, w)]
            assert bool(valid) == expected
            if expected:
                assert r.witness == valid[0]


def test_sliding_window_specializes_to_l_consecutive():
    for L in range(1, 7):
        for pe in all_vectors(14):
            a, b = evaluate(SlidingWindow(L, L), pe), evaluate(LConsecutive(L), pe)
            assert (a.status, a.witness) == (b.status, b.witness)


def test_percentage_counterexample():
    spec = Percentage(100)
    assert evaluate(spec, [0, 0]).status is U
    assert evaluate(spec, [0, 0, 1, 1]).status is C


def test_percentage_uses_exact_comparison():
    # 1/3 of 3 blocks is exactly the threshold
    assert evaluate(Percentage(Fraction(100, 3)), [0, 1, 1]).status is U
    assert evaluate(Percentage(Fraction(100, 3) + Fraction(1, 10**9)), [0, 1, 1]).status is C


def random_spec(rng):
    kind = rng.randrange(3)
    if kind == 0:
        N = rng.randint(1, 8)
        return SlidingWindow(N, rng.randint(1, N))
    if kind == 1:
        return LConsecutive(rng.randint(1, 6))
    return CumulativeM(rng.randint(0, 10))


def test_monotone_specs_survive_contiguous_inclusion():
    rng = random.Random(1234)
    checked = 0
    for _ in range(20_000):
        spec = random_spec(rng)
        n = rng.randint(1, 40)
        pe2 = [int(rng.random() < 0.6) for _ in range(n)]
        i = rng.randint(0, n - 1)
        j = rng.randint(i + 1, n)
        if evaluate(spec, pe2[i:j]).uncongested:
            checked += 1
            assert evaluate(spec, pe2).uncongested
    assert checked >= 1000


bits = st.lists(st.integers(0, 1), min_size=1, max_size=60)
specs = st.one_of(
    st.builds(lambda N, k: SlidingWindow(N, 1 + k % N), st.integers(1, 8), st.integers(0, 7)),
    st.builds(LConsecutive, st.integers(1, 6)),
    st.builds(CumulativeM, st.integers(0, 10)),
    st.builds(Percentage, st.integers(0, 100)),
)


@given(specs, bits, st.lists(st.integers(0, 60), max_size=4))
def test_refresh_matches_full_evaluation(spec, pe, cuts):
    cuts = sorted({c % len(pe) for c in cuts} | {0, len(pe)})
    result = None
    for lo, hi in zip(cuts, cuts[1:]):
        chunk = pe[lo:hi]
        result = init_refresh(spec, chunk) if result is None else refresh_evaluate(spec, result.state, chunk)
    full = evaluate(spec, pe)
    assert result.status is full.status
    assert result.witness == full.witness


@given(st.integers(1, 8), st.integers(0, 7), bits)
def test_sliding_window_state_stays_small(N, k, pe):
    spec = SlidingWindow(N, 1 + k % N)
    state = init_refresh(spec).state
    for b in pe:
        state = refresh_evaluate(spec, state, [b]).state
        assert len(state.tail) <= N - 1
