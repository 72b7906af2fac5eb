import itertools
import math

import numpy as np
import pytest

from congestion_window.adversary_sim import (AttackEstimate, AttackScenario, apply_adversary,
                                             brute_force_attack_prob, is_best_manipulation,
                                             simulate_attack, sweep, sweep_csv, uncongested_rows)
from congestion_window.errors import ParameterError
from congestion_window.exact_analysis import attack_prob_consec, bound_sw
from congestion_window.period_protocols import (CumulativeM, Direction, LConsecutive, Percentage,
                                                SlidingWindow, evaluate)

UNC, CON = Direction.UNCONGESTION, Direction.CONGESTION


def test_apply_adversary_examples():
    assert list(apply_adversary([1, 1, 0], [0, 1, 0], UNC)) == [1, 0, 0]
    assert list(apply_adversary([1, 0, 1], [0, 0, 0], CON)) == [1, 0, 1]
    assert list(apply_adversary([0, 0, 1], [1, 1, 1], CON)) == [1, 1, 1]
    with pytest.raises(ParameterError):
        apply_adversary([1, 0], [1], UNC)


def test_simulation_trivial_cases():
    sc = AttackScenario(SlidingWindow(2, 1), UNC, 2, alpha=1.0, p=1.0, trials=500)
    assert simulate_attack(sc).success_rate == 1.0
    sc = AttackScenario(SlidingWindow(2, 1), UNC, 2, alpha=0.0, p=1.0, trials=500)
    est = simulate_attack(sc)
    assert est.success_rate == 0.0
    assert est.std_error == 0.0
    assert est.rule_of_three == pytest.approx(3 / 500)


def test_scenario_validation():
    with pytest.raises(ParameterError):
        AttackScenario(LConsecutive(1), UNC, 0, 0.3, 0.5, 10)
    with pytest.raises(ParameterError):
        AttackScenario(LConsecutive(1), UNC, 3, 1.3, 0.5, 10)
    with pytest.raises(ParameterError):
        AttackScenario(LConsecutive(1), UNC, 3, 0.3, 0.5, 0)


def test_estimate_std_error():
    est = AttackEstimate(25, 100)
    assert est.std_error == pytest.approx(math.sqrt(0.25 * 0.75 / 100))
    assert est.rule_of_three is None


def test_brute_force_examples():
    assert brute_force_attack_prob(LConsecutive(1), UNC, 2, 0.33, 0.85) == pytest.approx(1 - 0.5695 ** 2, abs=1e-12)
    assert brute_force_attack_prob(SlidingWindow(2, 2), UNC, 1, 0.0, 1.0) == 0
    assert brute_force_attack_prob(SlidingWindow(2, 1), CON, 2, 0.0, 0.0) == 0
    with pytest.raises(ParameterError):
        brute_force_attack_prob(LConsecutive(1), UNC, 15, 0.3, 0.5)


def test_vectorized_predicate_matches_evaluate():
    rng = np.random.default_rng(3)
    specs = [SlidingWindow(4, 2), SlidingWindow(1, 1), LConsecutive(3), CumulativeM(5), Percentage(40),
             SlidingWindow(30, 3)]
    zeros = (rng.random((400, 17)) < 0.4).astype(np.int8)
    for spec in specs:
        fast = uncongested_rows(spec, zeros)
        slow = [evaluate(spec, list(1 - row)).uncongested for row in zeros]
        assert list(fast) == slow


OPTIMALITY_SPECS = [SlidingWindow(3, 2), SlidingWindow(4, 1), SlidingWindow(5, 5), LConsecutive(2),
                    CumulativeM(3), Percentage(50), Percentage(100)]


def all_flip_is_optimal(spec, direction, n):
    """Exhaustive over every (period, control mask) pair of length ``n``.

    The manipulation set of (pe, mask) is every vector agreeing with pe off
    the mask.  Some member has the target verdict iff a target vector
    projects onto pe's honest bits; all-flip must then hit the target too.
    """
    size = 1 << n
    codes = np.arange(size)
    good = np.array([evaluate(spec, [(c >> b) & 1 for b in range(n)]).status is direction.target
                     for c in codes])
    targets = codes[good]
    for mask in range(size):
        reachable = np.zeros(size, dtype=bool)
        reachable[targets & ~mask] = True
        honest = np.unique(codes & ~mask)
        flipped = honest if direction is UNC else honest | mask
        if not np.array_equal(reachable[honest], good[flipped]):
            return False
    return True


def test_all_flip_is_optimal_exhaustive():
    for n in range(1, 11):
        for spec in OPTIMALITY_SPECS:
            for direction in (UNC, CON):
                assert all_flip_is_optimal(spec, direction, n), (spec, direction, n)


def test_is_best_manipulation_small_exhaustive():
    for n in range(1, 7):
        for spec in OPTIMALITY_SPECS:
            for direction in (UNC, CON):
                for pe_code, ctrl_code in itertools.product(range(1 << n), repeat=2):
                    pe = [(pe_code >> i) & 1 for i in range(n)]
                    ctrl = [(ctrl_code >> i) & 1 for i in range(n)]
                    assert is_best_manipulation(spec, direction, pe, ctrl)


def test_simulation_matches_exact_markov_value():
    sc = AttackScenario(LConsecutive(2), UNC, 2, 0.33, 0.85, trials=1_000_000, seed=1)
    est = simulate_attack(sc)
    exact = float(attack_prob_consec(UNC, 2, 2, 0.33, 0.85))
    assert abs(est.success_rate - exact) <= 3 * est.std_error


@pytest.mark.parametrize("spec,direction,n,alpha,p", [
    (SlidingWindow(3, 2), UNC, 8, 0.2, 0.85), (SlidingWindow(3, 2), CON, 8, 0.33, 0.15),
    (CumulativeM(4), CON, 9, 0.3, 0.4), (Percentage(60), UNC, 7, 0.25, 0.5),
    (LConsecutive(3), CON, 10, 0.33, 0.15),
])
def test_simulation_agrees_with_oracle(spec, direction, n, alpha, p):
    exact = brute_force_attack_prob(spec, direction, n, alpha, p)
    est = simulate_attack(AttackScenario(spec, direction, n, alpha, p, trials=40_000, seed=8))
    sigma = math.sqrt(exact * (1 - exact) / est.trials)
    assert abs(est.success_rate - exact) <= 4 * sigma + 1e-12


@pytest.mark.parametrize("direction,p", [(UNC, 0.85), (CON, 0.15)])
def test_bounds_dominate_simulation(direction, p):
    for N, K, n in [(6, 4, 40), (10, 6, 60), (5, 3, 5)]:
        est = simulate_attack(AttackScenario(SlidingWindow(N, K), direction, n, 0.33, p, 20_000, seed=2))
        assert est.success_rate <= float(bound_sw(direction, N, K, n, 0.33, p)) + 4 * est.std_error


def test_success_non_decreasing_in_alpha():
    template = AttackScenario(SlidingWindow(8, 5), CON, 40, 0.0, 0.15, 20_000, seed=4)
    rows = sweep(template, "alpha", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    for a, b in zip(rows, rows[1:]):
        tol = 4 * math.hypot(a.estimate.std_error, b.estimate.std_error)
        assert b.estimate.success_rate >= a.estimate.success_rate - tol


def test_results_independent_of_workers_and_chunking(monkeypatch):
    sc = AttackScenario(SlidingWindow(5, 3), CON, 30, 0.33, 0.15, trials=5_000, seed=99)
    single = simulate_attack(sc)
    monkeypatch.setattr("congestion_window.adversary_sim._BATCH_CELLS", 30 * 700)
    assert simulate_attack(sc) == single
    assert simulate_attack(sc, workers=3) == single


def test_sweep_axes_and_csv():
    template = AttackScenario(SlidingWindow(4, 2), CON, 16, 0.33, 0.15, 2_000, seed=1)
    rows = sweep(template, "K", [1, 2, 3, 4])
    assert [r.axis_value for r in rows] == [1, 2, 3, 4]
    rates = [r.estimate.success_rate for r in rows]
    assert rates == sorted(rates)  # larger K is harder to satisfy
    assert sweep(template, "n", []) == []
    text = sweep_csv(rows)
    assert text.splitlines()[0] == "axis_value,success_rate,std_error,trials"
    assert len(text.splitlines()) == 5
    with pytest.raises(ParameterError):
        sweep(template, "L", [2])
    with pytest.raises(ParameterError):
        sweep(template, "beta", [2])


def test_sweep_over_n_is_non_increasing_for_congestion():
    template = AttackScenario(SlidingWindow(12, 7), CON, 12, 0.33, 0.15, 20_000, seed=5)
    rows = sweep(template, "n", [12, 24, 48, 96])
    for a, b in zip(rows, rows[1:]):
        tol = 4 * math.hypot(a.estimate.std_error, b.estimate.std_error)
        assert b.estimate.success_rate <= a.estimate.success_rate + tol


def test_oracle_is_existential_over_manipulations():
    # Percentage is not monotone in general, but zeros only ever help it,
    # so the oracle and the all-flip simulation must still agree exactly.
    for n in range(1, 7):
        for direction in (UNC, CON):
            exact = brute_force_attack_prob(Percentage(50), direction, n, 0.4, 0.6)
            total = 0.0
            for outcome in itertools.product(range(3), repeat=n):  # 0 adversary, 1 congested, 2 free
                pe = [1 if o == 1 else 0 for o in outcome]
                ctrl = [1 if o == 0 else 0 for o in outcome]
                w = math.prod(0.4 if o == 0 else 0.6 * 0.6 if o == 1 else 0.6 * 0.4 for o in outcome)
                verdict = evaluate(Percentage(50), apply_adversary(pe, ctrl, direction)).status
                total += w * (verdict is direction.target)
            assert exact == pytest.approx(total, abs=1e-12)
