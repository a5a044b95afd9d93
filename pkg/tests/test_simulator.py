import itertools
import math

import numpy as np
import pytest

from classview.policy import alpha_from_scan_ratio
from classview.simulator import (
    CostMatrix,
    DripCosts,
    Schedule,
    StubbornCosts,
    adversarial_family,
    last_reorg_before,
    measured_ratio,
    nonmonotone_demo,
    opt_schedule,
    random_monotone_costs,
    run_always,
    run_never,
    run_threshold,
    schedule_cost,
)


def matrix_from_rule(n, s, rule, sigma=0.0, allow_nonmonotone=False, enforce_cap=True):
    c = np.zeros((n + 1, n + 1))
    for a in range(n + 1):
        for b in range(a, n + 1):
            c[a, b] = rule(a, b)
    return CostMatrix(
        c, s, sigma=sigma, allow_nonmonotone=allow_nonmonotone, enforce_cap=enforce_cap
    )


def brute_force_opt(costs):
    """Enumerate every schedule over rounds 1..N; the independent oracle."""
    best_cost = math.inf
    best = None
    for size in range(costs.N + 1):
        for combo in itertools.combinations(range(1, costs.N + 1), size):
            sched = Schedule((0,) + combo)
            cost = schedule_cost(sched, costs)
            if cost < best_cost:
                best_cost = cost
                best = sched
    return best, best_cost


class TestSchedule:
    def test_must_start_at_zero(self):
        with pytest.raises(ValueError):
            Schedule((1, 2))

    def test_must_increase(self):
        with pytest.raises(ValueError):
            Schedule((0, 3, 3))

    def test_last_reorg_before(self):
        sched = Schedule((0, 3, 7))
        assert last_reorg_before(sched, 5) == 3
        assert last_reorg_before(Schedule((0,)), 12) == 0
        assert last_reorg_before(sched, 7) == 7

    def test_text_round_trip(self):
        sched = Schedule((0, 2, 9))
        assert Schedule.from_text(sched.to_text()) == sched


class TestScheduleCost:
    def test_never_reorganize(self):
        costs = matrix_from_rule(5, 10.0, lambda s, i: 1.0 if i > 0 else 0.0)
        assert schedule_cost(Schedule((0,)), costs) == 5.0

    def test_reorganize_every_round_zero_costs(self):
        costs = matrix_from_rule(4, 10.0, lambda s, i: 0.0)
        assert schedule_cost(Schedule((0, 1, 2, 3, 4)), costs) == 40.0

    def test_enumerated_terms(self):
        # c[s][i] = i - s, schedule (0, 2): c[0][1] + c[2][2] + c[2][3] + S
        costs = matrix_from_rule(3, 2.0, lambda s, i: float(i - s), enforce_cap=False)
        assert schedule_cost(Schedule((0, 2)), costs) == 1.0 + 0.0 + 1.0 + 2.0


class TestCostMatrix:
    def test_rejects_nonmonotone_by_default(self):
        c = np.zeros((3, 3))
        c[0, 2] = 0.1
        c[1, 2] = 0.5  # rebuilding later costs more: not allowed
        with pytest.raises(ValueError):
            CostMatrix(c, 1.0)
        CostMatrix(c, 1.0, allow_nonmonotone=True)

    def test_rejects_costs_beyond_reorg_cost(self):
        c = np.zeros((2, 2))
        c[0, 1] = 2.0
        with pytest.raises(ValueError):
            CostMatrix(c, 1.0)

    def test_text_round_trip(self):
        rng = np.random.default_rng(0)
        costs = random_monotone_costs(6, 2.0, 0.5, rng)
        back = CostMatrix.from_text(costs.to_text())
        assert back.N == costs.N and back.S == costs.S and back.sigma == costs.sigma
        for s in range(costs.N + 1):
            for i in range(s, costs.N + 1):
                assert back.cost(s, i) == costs.cost(s, i)

    def test_random_generator_respects_premises(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(1, 30))
            sigma = float(rng.uniform(0.05, 1.0))
            costs = random_monotone_costs(n, 1.0, sigma, rng)
            for i in range(1, n + 1):
                col = [costs.cost(s, i) for s in range(i + 1)]
                assert all(a >= b - 1e-15 for a, b in zip(col, col[1:]))
                assert all(0 <= v <= sigma + 1e-12 for v in col)
            assert all(costs.cost(i, i) == 0.0 for i in range(n + 1))


class TestOptSchedule:
    def test_all_zero_costs_never_reorganizes(self):
        costs = matrix_from_rule(6, 5.0, lambda s, i: 0.0)
        sched, cost = opt_schedule(costs)
        assert sched == Schedule((0,))
        assert cost == 0.0

    def test_matches_enumeration_on_random_matrices(self):
        rng = np.random.default_rng(7)
        for trial in range(60):
            n = 1 + trial % 10
            costs = random_monotone_costs(n, 1.0, float(rng.uniform(0.1, 1.0)), rng)
            sched, cost = opt_schedule(costs)
            _, best = brute_force_opt(costs)
            assert schedule_cost(sched, costs) == best
            assert cost == pytest.approx(best, rel=1e-9, abs=1e-12)

    def test_matches_enumeration_nonmonotone(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            n = int(rng.integers(1, 9))
            c = np.triu(rng.uniform(0, 1, size=(n + 1, n + 1)))
            costs = CostMatrix(c, 1.0, allow_nonmonotone=True)
            sched, _ = opt_schedule(costs)
            _, best = brute_force_opt(costs)
            assert schedule_cost(sched, costs) == best

    def test_tie_break_prefers_fewer_reorgs(self):
        costs = matrix_from_rule(3, 1.0, lambda s, i: 0.0)
        sched, _ = opt_schedule(costs)
        assert sched.reorg_count == 0

    def test_tie_break_lexicographic(self):
        # (0,1) and (0,2) both cost exactly S; the earlier rebuild round wins
        def rule(s, i):
            return 1.0 if s == 0 and i >= 2 else 0.0

        costs = matrix_from_rule(3, 1.0, rule)
        assert schedule_cost(Schedule((0, 1)), costs) == schedule_cost(Schedule((0, 2)), costs)
        sched, _ = opt_schedule(costs)
        assert sched == Schedule((0, 1))

    def test_longer_horizon_never_cheaper(self):
        rng = np.random.default_rng(9)
        base = random_monotone_costs(20, 1.0, 0.6, rng)
        prev = 0.0
        for n in range(1, 21):
            sub = CostMatrix(base._c[: n + 1, : n + 1], 1.0, sigma=0.6)
            _, cost = opt_schedule(sub)
            assert cost >= prev - 1e-12
            prev = cost


class TestRunThreshold:
    def test_all_zero_costs(self):
        costs = matrix_from_rule(6, 5.0, lambda s, i: 0.0)
        sched, cost = run_threshold(costs, alpha=1.0)
        assert sched == Schedule((0,))
        assert cost == 0.0

    def test_hand_traced_constant_costs(self):
        # S=4, alpha=1, every round costs 2: rebuild at 3, 6, 9
        costs = matrix_from_rule(10, 4.0, lambda s, i: 2.0 if i > s else 0.0, sigma=0.5)
        sched, cost = run_threshold(costs, alpha=1.0)
        assert sched == Schedule((0, 3, 6, 9))
        assert cost == 7 * 2.0 + 3 * 4.0

    def test_never_beats_optimum(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            n = int(rng.integers(1, 40))
            costs = random_monotone_costs(n, 1.0, float(rng.uniform(0.1, 1.0)), rng)
            _, paid = run_threshold(costs)
            _, best = opt_schedule(costs)
            assert best <= paid + 1e-12

    def test_competitive_bound_sample(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            n = int(rng.integers(2, 60))
            sigma = float(rng.uniform(0.05, 1.0))
            costs = random_monotone_costs(n, 1.0, sigma, rng)
            alpha = alpha_from_scan_ratio(sigma)
            _, paid = run_threshold(costs, alpha=alpha)
            _, best = opt_schedule(costs)
            assert paid <= (1 + alpha + sigma) * best + costs.S + 1e-9

    def test_is_online(self):
        # mutating costs the strategy has not yet paid cannot change its past
        rng = np.random.default_rng(12)
        costs = random_monotone_costs(30, 1.0, 0.8, rng)
        sched, _ = run_threshold(costs, alpha=1.0)
        cut = 15
        mutated = costs._c.copy()
        mutated[:, cut + 1 :] *= 0.0
        mut = CostMatrix(mutated, 1.0, sigma=0.8)
        sched2, _ = run_threshold(mut, alpha=1.0)
        assert [u for u in sched.rounds if u <= cut] == [u for u in sched2.rounds if u <= cut]


class TestAdversary:
    def test_threshold_ratio_approaches_two(self):
        family = adversarial_family(beta=1.0, sigma=0.0, eps=1e-3, horizon=12000)
        ratio = measured_ratio(lambda c: run_threshold(c, alpha=1.0), family)
        assert 1.95 <= ratio <= 2.05

    def test_always_rebuild_is_terrible(self):
        family = adversarial_family(beta=1.0, sigma=0.0, eps=1e-3, horizon=12000)
        assert measured_ratio(run_always, family) > 5.0

    def test_never_rebuild_is_terrible(self):
        family = adversarial_family(beta=1.0, sigma=0.0, eps=1e-3, horizon=12000)
        assert measured_ratio(run_never, family) > 5.0

    def test_drip_members_are_monotone(self):
        for member in adversarial_family(beta=1.0, sigma=0.0, eps=0.01, horizon=500):
            for i in range(1, member.N + 1):
                col = [member.cost(s, i) for s in range(i + 1)]
                assert all(a >= b for a, b in zip(col, col[1:]))


class TestNonmonotone:
    def test_report_ratios_grow_linearly(self):
        report = nonmonotone_demo(horizons=(10, 100, 1000))
        for name, series in report["ratios"].items():
            ratios = [r for _, r in series]
            assert ratios[0] < ratios[1] < ratios[2], name
            assert ratios[2] / ratios[1] == pytest.approx(10.0, rel=0.35), name

    def test_never_strategy_ratio_is_n_over_s(self):
        costs = StubbornCosts(100, 4.0, magic=1)
        _, paid = run_never(costs)
        _, best = opt_schedule(costs)
        assert paid == 100.0
        assert best == 4.0
