import json
from fractions import Fraction

import numpy as np
import pytest

import oracles
from quasistate.born import (ChainError, JointChain, PreparedSystem, build_chain, fine_grain,
                             induced_quasi_state, monte_carlo, pointer_powers, pointer_probability,
                             rationalize, recorded_pointer, swap_segments, swap_test)
from quasistate.trajectory import (ConstantPure, Piecewise, PowerMartingale, TrajectoryError,
                                   Window, generate, windows)


def test_prepared_system_normalized():
    with pytest.raises(ValueError):
        PreparedSystem((0.5, 0.5))
    s = PreparedSystem.from_powers([0.7, 0.3])
    assert s.powers == pytest.approx([0.7, 0.3])


def test_frozen_chain_constant():
    sys = PreparedSystem((0.6, 0.8j))
    chain = build_chain(sys, [1, 2], "frozen", steps=20)
    assert np.all(chain.trajectory.samples == chain.trajectory.samples[0])
    assert chain.trajectory.samples[0] == pytest.approx([0.6, 0.8j])


def test_two_equal_sectors_split_power():
    chain = build_chain(PreparedSystem.from_powers([0.5, 0.5]), [1, 2], steps=40, dt=0.25)
    ps = pointer_powers(chain, Window(0, 40))
    assert ps.per_basis_power == pytest.approx((0.0, 5.0, 5.0))


def test_martingale_chain_normalized_over_seeds():
    sys = PreparedSystem.from_powers([0.5, 0.3, 0.2])
    worst = 0.0
    for seed in range(100):
        chain = build_chain(sys, [0, 1, 2], "power-martingale", steps=200, seed=seed)
        n = np.sum(np.abs(chain.trajectory.samples) ** 2, axis=1)
        worst = max(worst, float(np.max(np.abs(n - 1))))
    assert worst < 1e-9


def test_uncovered_sector_rejected():
    with pytest.raises(ChainError):
        build_chain(PreparedSystem.from_powers([0.5, 0.5]), [1])
    with pytest.raises(ChainError):
        build_chain(PreparedSystem.from_powers([0.5, 0.5]), [0, 1], "wobble")


def test_pointer_probability_two_sectors():
    chain = build_chain(PreparedSystem.from_powers([0.5, 0.5]), [1, 2], steps=10)
    assert pointer_probability(chain, Window(0, 10)) == pytest.approx([0, 0.5, 0.5])


def test_pointer_probability_single_sector():
    chain = build_chain(PreparedSystem((1.0,)), [1], steps=10)
    assert pointer_probability(chain, Window(0, 10)) == pytest.approx([0, 1])


def test_pointer_probability_grouping():
    chain = build_chain(PreparedSystem.from_powers([0.5, 0.3, 0.2]), [1, 1, 2], steps=10)
    p = pointer_probability(chain, Window(0, 10))
    assert p == pytest.approx([0, 0.8, 0.2], abs=1e-12)
    assert abs(p.sum() - 1) < 1e-9


def test_pointer_probability_sums_to_one_every_window():
    sys = PreparedSystem.from_powers([0.4, 0.3, 0.2, 0.1])
    chain = build_chain(sys, [1, 1, 2, 3], "power-martingale", steps=500, seed=9)
    for w in windows(chain.trajectory, 50, kappa=0):
        assert abs(pointer_probability(chain, w).sum() - 1) < 1e-9


def test_induced_quasi_state_pointer_one():
    chain = build_chain(PreparedSystem.from_powers([0.6, 0.4, 0.0]), [1, 1, 2], steps=10)
    q = induced_quasi_state(chain, Window(0, 10))
    assert recorded_pointer(q) == 1


def test_balanced_chain_records_nothing():
    # a perfectly good sector decomposition, but nothing dominates
    chain = build_chain(PreparedSystem.from_powers([0.5, 0.5]), [1, 2], steps=10)
    assert induced_quasi_state(chain, Window(0, 10)) is None
    assert recorded_pointer(None) is None


def test_induced_quasi_state_permutation_invariant():
    sys = PreparedSystem.from_powers([0.5, 0.3, 0.2])
    chain = build_chain(sys, [1, 2, 2], "power-martingale", steps=60, seed=3)
    perm = np.random.default_rng(1).permutation(60)
    shuffled = chain.with_trajectory(chain.trajectory.with_samples(chain.trajectory.samples[perm]))
    w = Window(0, 60)
    assert induced_quasi_state(chain, w, 0.5) == induced_quasi_state(shuffled, w, 0.5)


def test_swap_identical_segments():
    chain = build_chain(PreparedSystem.from_powers([0.7, 0.3]), [1, 2], "power-martingale",
                        steps=40, seed=2)
    assert swap_test(chain, Window(0, 40), (5, 10), (5, 10))


def test_swap_within_window_random_instances():
    rng = np.random.default_rng(4)
    for _ in range(100):
        dim = int(rng.integers(2, 5))
        sys = PreparedSystem.from_powers(rng.dirichlet(np.ones(dim)))
        chain = build_chain(sys, list(rng.integers(0, 3, size=dim)), "power-martingale",
                            steps=60, seed=int(rng.integers(1000)))
        w = Window(int(rng.integers(0, 20)), 40)
        n = int(rng.integers(1, 11))
        a0 = w.start + int(rng.integers(0, 40 - 2 * n + 1))
        b0 = a0 + n + int(rng.integers(0, w.stop - a0 - 2 * n + 1))
        assert swap_test(chain, w, (a0, a0 + n), (b0, b0 + n), 0.5)


def test_swap_across_windows_counterexample():
    sched = Piecewise(((0, ConstantPure(0)), (10, ConstantPure(1))))
    traj = generate(sched, 2, 20, 1.0)
    chain = JointChain(traj, (1, 2))
    assert recorded_pointer(induced_quasi_state(chain, Window(0, 10))) == 1
    assert not swap_test(chain, Window(0, 10), (0, 6), (10, 16))


def test_swap_segment_errors():
    traj = generate(ConstantPure(0), 2, 20, 1.0)
    with pytest.raises(ChainError):
        swap_segments(traj, (0, 5), (3, 8))
    with pytest.raises(ChainError):
        swap_segments(traj, (0, 5), (10, 16))
    with pytest.raises(ChainError):
        swap_segments(traj, (15, 20), (18, 23))


def test_monte_carlo_pure_preparation_exact():
    res = monte_carlo(PreparedSystem.from_powers([1.0, 0.0]), [0, 1], 2000, seed=1)
    assert res.counts == (2000, 0)
    assert res.unfixated == 0


def test_monte_carlo_balanced_within_three_sigma():
    res = monte_carlo(PreparedSystem.from_powers([0.5, 0.5]), [0, 1], 20000, seed=5)
    assert np.all(res.within(3.0))
    assert res.unfixated_rate < 0.01


def test_monte_carlo_independent_of_threads():
    sys = PreparedSystem.from_powers([0.6, 0.3, 0.1])
    a = monte_carlo(sys, [0, 1, 2], 5000, seed=3, block_size=1000, threads=1)
    b = monte_carlo(sys, [0, 1, 2], 5000, seed=3, block_size=1000, threads=3)
    assert a.counts == b.counts


def test_monte_carlo_grouped_pointers():
    res = monte_carlo(PreparedSystem.from_powers([0.5, 0.3, 0.2]), [1, 1, 2], 10000, seed=2)
    assert res.analytic == pytest.approx((0.0, 0.8, 0.2))
    assert np.all(res.within(3.0))


def test_monte_carlo_budget_exhaustion_reported():
    sys = PreparedSystem.from_powers([0.5, 0.5])
    res = monte_carlo(sys, [1, 2], 500, seed=0, step_budget=5, window=5)
    assert res.unfixated > 0
    # an unfixated run can still have one pointer dominating its last window
    assert 0 < res.null_count <= res.unfixated
    assert res.counts[0] == res.null_count
    dropped = monte_carlo(sys, [1, 2], 500, seed=0, step_budget=5, window=5, exclude_null=True)
    assert dropped.counts[0] == 0
    assert dropped.tallied == 500 - dropped.null_count


def test_born_report_fields():
    res = monte_carlo(PreparedSystem.from_powers([0.7, 0.3]), [0, 1], 1000, seed=0)
    data = json.loads(json.dumps(res.to_json()))
    for key in ("config", "analytic_probability", "empirical_frequency", "standard_error",
                "unfixated_rate"):
        assert key in data
    assert data["config"]["seed"] == 0


def test_monte_carlo_rejects_zero_trials():
    with pytest.raises(ValueError):
        monte_carlo(PreparedSystem.from_powers([1.0]), [0], 0)


def test_martingale_generator_rejects_bad_powers():
    with pytest.raises(TrajectoryError):
        generate(PowerMartingale((0.5, 0.6)), 2, 10, 1.0)


@pytest.mark.parametrize("probs,counts,unit", [
    (("1/2", "1/2"), (1, 1), Fraction(1, 2)),
    (("7/10", "2/10", "1/10"), (7, 2, 1), Fraction(1, 10)),
    (("1/3", "1/6", "1/2"), (2, 1, 3), Fraction(1, 6)),
])
def test_fine_grain(probs, counts, unit):
    ca = fine_grain(probs)
    assert ca.counts == counts and ca.unit == unit
    assert ca.probabilities() == tuple(Fraction(p) for p in probs)
    assert sum(m * ca.unit for m in ca.counts) == 1
    want_counts, want_unit = oracles.lcd_counts(probs)
    assert list(ca.counts) == want_counts and ca.unit == want_unit


def test_fine_grain_slot_permutation():
    ca = fine_grain(["3/8", "1/8", "1/2"])
    slots = ca.slots()
    rng = np.random.default_rng(0)
    for _ in range(20):
        order = [slots[i] for i in rng.permutation(len(slots))]
        assert ca.partial_sums_of(order) == ca.probabilities()


def test_fine_grain_rejects_bad_sum():
    with pytest.raises(ValueError):
        fine_grain(["1/2", "1/3"])
    with pytest.raises(ValueError):
        fine_grain(["3/2", "-1/2"])


def test_rationalize_sums_to_one():
    r = rationalize([0.7, 0.2, 0.1], 1000)
    assert sum(r) == 1
    assert r == (Fraction(7, 10), Fraction(1, 5), Fraction(1, 10))
    r = rationalize([1 / 3, 1 / 3, 1 / 3], 100)
    assert sum(r) == 1 and max(r) - min(r) == Fraction(1, 100)
