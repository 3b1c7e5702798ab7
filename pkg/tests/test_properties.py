import math
from fractions import Fraction

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from quasistate.born import fine_grain
from quasistate.channel import ALICE_TAG, alice_criterion, alice_machine, decode, noise_machine, run_channel
from quasistate.consistency import induce_process
from quasistate.projection import (PowerSpectrum, enumerate_partitions, maximal_from_spectrum,
                                   power_spectrum, q_single_spectrum)
from quasistate.trajectory import (Frozen, PowerMartingale, RandomFast, Window, generate, tensor,
                                   windows)

seeds = st.integers(0, 2**32 - 1)
powers = st.lists(st.one_of(st.just(0.0), st.floats(0.0, 1.0)), min_size=2, max_size=5)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, dim=st.integers(1, 5), steps=st.integers(2, 80), t_c=st.floats(1.0, 20.0))
def test_random_fast_normalized(seed, dim, steps, t_c):
    traj = generate(RandomFast(t_c), dim, steps, 1.0, seed)
    n = np.sum(np.abs(traj.samples) ** 2, axis=1)
    assert np.max(np.abs(n - 1)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=seeds, w=st.lists(st.floats(0.01, 1.0), min_size=2, max_size=4))
def test_martingale_normalized(seed, w):
    p = tuple(np.array(w) / sum(w))
    assume(abs(sum(p) - 1) < 1e-12)
    traj = generate(PowerMartingale(p, None, 8), len(p), 50, 1.0, seed)
    n = np.sum(np.abs(traj.samples) ** 2, axis=1)
    assert np.max(np.abs(n - 1)) < 1e-9


@given(steps=st.integers(2, 200), length=st.integers(1, 200))
def test_window_tiling(steps, length):
    assume(length <= steps)
    traj = generate(Frozen((1.0, 0.0)), 2, steps, 1.0)
    ws = windows(traj, length, kappa=0)
    assert ws[0].start == 0
    assert all(a.stop == b.start for a, b in zip(ws, ws[1:]))
    assert 0 <= steps - ws[-1].stop < length


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=st.integers(2, 60))
def test_window_power_permutation_invariant(seed, n):
    traj = generate(RandomFast(2.0), 3, n, 0.5, seed)
    perm = np.random.default_rng(seed).permutation(n)
    a = power_spectrum(traj, Window(0, n))
    b = power_spectrum(traj.with_samples(traj.samples[perm]), Window(0, n))
    assert a.per_basis_power == b.per_basis_power
    assert abs(a.total_power - n * 0.5) <= 1e-9 * n * 0.5


@settings(max_examples=30, deadline=None)
@given(s1=seeds, s2=seeds, d1=st.integers(1, 3), d2=st.integers(1, 3))
def test_tensor_normalized(s1, s2, d1, d2):
    a = generate(RandomFast(1.0), d1, 20, 1.0, s1)
    b = generate(RandomFast(1.0), d2, 20, 1.0, s2)
    n = np.sum(np.abs(tensor(a, b).samples) ** 2, axis=1)
    assert np.max(np.abs(n - 1)) < 1e-9


@given(p=powers, theta=st.floats(0.1, 5.0))
def test_q_single_fires_iff_ratio_reaches_theta(p, theta):
    q = q_single_spectrum(PowerSpectrum.from_powers(p), theta)
    ratios = []
    for k in range(len(p)):
        rest = math.fsum(p[j] for j in range(len(p)) if j != k)
        ratios.append(0.0 if p[k] == 0 else (math.inf if rest == 0 else p[k] / rest))
    if q is None:
        assert all(r < theta for r in ratios)
    else:
        k = q.indices[0]
        assert ratios[k] >= theta and ratios[k] == max(ratios)


@settings(max_examples=150, deadline=None)
@given(p=powers, amin=st.sampled_from([0.5, 1.0, 2.0]))
def test_maximal_matches_oracle(p, amin):
    got = maximal_from_spectrum(PowerSpectrum.from_powers(p), amin)
    want = oracles.brute_force_maximal(p, amin)
    if want is None:
        assert got is None
        return
    assert got is not None and got.N == want["N"]
    assert got.tied == want["tied"]
    if not want["tied"]:
        assert got.indices == want["dominants"]


@settings(max_examples=150, deadline=None)
@given(p=powers)
def test_quasi_state_invariants(p):
    q = maximal_from_spectrum(PowerSpectrum.from_powers(p), 1.0)
    if q is None:
        return
    assert q.norm_error() < 1e-9
    assert len(set(q.indices)) == q.N >= 1
    assert all(a > 1.0 for a in q.alphas)
    blocks = q.partition.blocks
    assert sorted(k for b in blocks for k in b) == list(range(len(p)))
    assert all(len(b) >= 2 for b in blocks)


@given(p=powers)
def test_partitions_disjoint_and_admissible(p):
    for part in enumerate_partitions(len(p), PowerSpectrum.from_powers(p), 1.0):
        flat = [k for b in part.blocks for k in b]
        assert len(flat) == len(set(flat)) == len(p)
        assert all(a > 1.0 for a in part.alphas)


@given(nums=st.lists(st.integers(0, 50), min_size=1, max_size=6))
def test_fine_grain_exact(nums):
    assume(sum(nums) > 0)
    probs = [Fraction(n, sum(nums)) for n in nums]
    ca = fine_grain(probs)
    assert list(ca.probabilities()) == probs
    assert sum(m * ca.unit for m in ca.counts) == 1


@settings(max_examples=20, deadline=None)
@given(seed=seeds, n_noise=st.integers(0, 4), ticks=st.integers(1, 200))
def test_records_reproduce_alice(seed, n_noise, ticks):
    noise = [noise_machine(4, seed + j, mimic=(j % 2 == 0)) for j in range(n_noise)]
    stream = run_channel(alice_machine(3), noise, ticks, seed=seed)
    recs = decode(stream, alice_criterion(n_pointers=3))
    alice = [m for m in stream if m.sender_tag == ALICE_TAG]
    assert [(r.time, r.content) for r in recs] == [
        (m.emit_time, "ready" if m.kind == "status" else f"P{m.value}") for m in alice]


@given(trans=st.lists(st.integers(0, 4), min_size=5, max_size=5), start=st.integers(0, 4),
       n=st.integers(2, 30))
def test_induce_recovers_reachable_transitions(trans, start, n):
    trace = [start]
    for _ in range(n - 1):
        trace.append(trans[trace[-1]])
    p = induce_process([f"s{s}" for s in trace])
    want = {f"s{a}": f"s{trans[a]}" for a in trace[:-1]}
    assert p.transitions == want and p.deterministic
