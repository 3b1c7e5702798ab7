"""Pointer quasi-states of a measurement chain and their statistics.

A :class:`JointChain` stores one amplitude trace per einselected joint
component ``|s_k>|a_k>|e_k>|o_k>`` together with the pointer each component
reports. Pointer ``0`` is the null reading registered when no interaction is
detected, so the pointer probabilities of a window always sum to one.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

from .config import DEFAULT, Thresholds
from .projection import PowerSpectrum, QuasiState, maximal_from_spectrum
from .trajectory import (
    Frozen,
    GeneratorSpec,
    PowerMartingale,
    Trajectory,
    TrajectoryError,
    Window,
    generate,
    martingale_step,
    spec_from_dict,
)


class ChainError(ValueError):
    """Invalid chain, pointer map or segment request."""


@dataclass(frozen=True)
class PreparedSystem:
    """State ``sum_k xi_k |s_k>`` of the measured system."""

    coefficients: tuple[complex, ...]
    labels: tuple[str, ...] | None = None
    eps_norm: float = DEFAULT.eps_norm

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if not coeffs:
            raise ChainError("a prepared system needs at least one coefficient")
        norm = math.fsum(abs(c) ** 2 for c in coeffs)
        if abs(norm - 1.0) > self.eps_norm:
            raise ChainError(f"coefficients are not normalized (sum |xi|^2 = {norm!r})")
        labels = self.labels or tuple(f"s{k}" for k in range(len(coeffs)))
        if len(labels) != len(coeffs):
            raise ChainError("one label per coefficient is required")
        object.__setattr__(self, "labels", tuple(labels))

    @classmethod
    def from_powers(cls, powers: Sequence[float]) -> "PreparedSystem":
        return cls(tuple(math.sqrt(p) for p in powers))

    @property
    def powers(self) -> np.ndarray:
        return np.abs(np.asarray(self.coefficients)) ** 2

    @property
    def phases(self) -> np.ndarray:
        return np.angle(np.asarray(self.coefficients))


def _pointer_tuple(pointer_map, n_sectors: int) -> tuple[int, ...]:
    if isinstance(pointer_map, Mapping):
        missing = [k for k in range(n_sectors) if k not in pointer_map]
        if missing:
            raise ChainError(f"pointer map does not cover sectors {missing}")
        return tuple(int(pointer_map[k]) for k in range(n_sectors))
    pm = tuple(int(i) for i in pointer_map)
    if len(pm) != n_sectors:
        raise ChainError(f"pointer map covers {len(pm)} sectors, chain has {n_sectors}")
    return pm


@dataclass(frozen=True, eq=False)
class JointChain:
    """Sector amplitude traces plus the sector-to-pointer map."""

    trajectory: Trajectory
    pointer_map: tuple[int, ...]
    n_pointers: int | None = None

    def __post_init__(self):
        pm = _pointer_tuple(self.pointer_map, self.trajectory.dim)
        object.__setattr__(self, "pointer_map", pm)
        n = max(pm) + 1 if self.n_pointers is None else int(self.n_pointers)
        if n < 1 or min(pm) < 0 or max(pm) >= n:
            raise ChainError(f"pointer indices {pm} out of range for {n} pointers")
        object.__setattr__(self, "n_pointers", n)

    @property
    def n_sectors(self) -> int:
        return self.trajectory.dim

    def grouping(self) -> np.ndarray:
        """``(n_sectors, n_pointers)`` 0/1 matrix of the pointer map."""
        g = np.zeros((self.n_sectors, self.n_pointers))
        g[np.arange(self.n_sectors), self.pointer_map] = 1.0
        return g

    def with_trajectory(self, traj: Trajectory) -> "JointChain":
        return JointChain(traj, self.pointer_map, self.n_pointers)


def build_chain(sys: PreparedSystem, pointer_map, dynamics: str | GeneratorSpec | Mapping = "frozen",
                steps: int = 100, dt: float = 1.0, seed: int = 0, resolution: int = 16,
                n_pointers: int | None = None) -> JointChain:
    """Evolve the sector amplitudes from ``xi_k(0) = xi_k``.

    ``dynamics`` is ``"frozen"``, ``"power-martingale"`` or any generator
    kind from :mod:`quasistate.trajectory` of matching dimension.
    """
    dim = len(sys.coefficients)
    pm = _pointer_tuple(pointer_map, dim)
    if dynamics == "frozen":
        spec = Frozen(sys.coefficients)
    elif dynamics == "power-martingale":
        spec = PowerMartingale(tuple(sys.powers), tuple(sys.phases), resolution)
    elif isinstance(dynamics, Mapping):
        spec = spec_from_dict(dynamics)
    elif isinstance(dynamics, str):
        raise ChainError(f"unknown dynamics {dynamics!r}")
    else:
        spec = dynamics
    traj = generate(spec, dim, steps, dt, seed)
    labels = tuple(f"{lab}|a{k}|e{k}|o{k}" for k, lab in enumerate(sys.labels))
    traj = Trajectory(traj.dt, traj.samples, traj.t_c, labels)
    return JointChain(traj, pm, n_pointers)


def pointer_powers(chain: JointChain, w: Window) -> PowerSpectrum:
    """Window power grouped by pointer."""
    w.check(chain.trajectory)
    block = chain.trajectory.powers()[w.start:w.stop]
    dt = chain.trajectory.dt
    sums = [math.fsum(col) * dt for col in block.T]
    grouped = [math.fsum(s for s, i in zip(sums, chain.pointer_map) if i == ptr)
               for ptr in range(chain.n_pointers)]
    return PowerSpectrum.from_powers(grouped, w)


def pointer_probability(chain: JointChain, w: Window) -> np.ndarray:
    """Probability of each pointer being reported in ``w``: the grouped
    window power divided by the window duration."""
    spec = pointer_powers(chain, w)
    return np.array(spec.per_basis_power) / w.duration(chain.trajectory.dt)


def induced_quasi_state(chain: JointChain, w: Window, alpha_min: float = DEFAULT.alpha_min,
                        thresholds: Thresholds = DEFAULT) -> QuasiState | None:
    """Quasi-state over pointers induced in ``w``; ``None`` when no pointer
    dominates."""
    return maximal_from_spectrum(pointer_powers(chain, w), alpha_min, thresholds)


def recorded_pointer(q: QuasiState | None) -> int | None:
    """The single pointer a quasi-state reports, or ``None``."""
    if q is None or q.N != 1:
        return None
    return q.indices[0]


def swap_segments(traj: Trajectory, seg_a: tuple[int, int], seg_b: tuple[int, int]) -> Trajectory:
    (a0, a1), (b0, b1) = seg_a, seg_b
    if a1 - a0 != b1 - b0 or a1 <= a0:
        raise ChainError(f"segments {seg_a} and {seg_b} must be non-empty and of equal length")
    if min(a0, b0) < 0 or max(a1, b1) > traj.steps:
        raise ChainError("segments must lie inside the trajectory")
    if a0 < b1 and b0 < a1 and seg_a != seg_b:
        raise ChainError(f"segments {seg_a} and {seg_b} overlap")
    samples = np.array(traj.samples)
    samples[a0:a1], samples[b0:b1] = traj.samples[b0:b1], traj.samples[a0:a1]
    return traj.with_samples(samples)


def swap_test(chain: JointChain, w: Window, seg_a: tuple[int, int], seg_b: tuple[int, int],
              alpha_min: float = DEFAULT.alpha_min, thresholds: Thresholds = DEFAULT) -> bool:
    """Whether exchanging two sample ranges leaves the induced quasi-state of
    ``w`` unchanged.

    Segments are half-open ``(start, stop)`` sample ranges. Both inside
    ``w`` always gives ``True``; segments may also reach outside ``w``,
    which is how cross-window counterexamples are built.
    """
    before = induced_quasi_state(chain, w, alpha_min, thresholds)
    swapped = chain.with_trajectory(swap_segments(chain.trajectory, seg_a, seg_b))
    return before == induced_quasi_state(swapped, w, alpha_min, thresholds)


# -- Monte Carlo -------------------------------------------------------------


@dataclass
class BornResult:
    analytic: tuple[float, ...]
    counts: tuple[int, ...]
    trials: int
    unfixated: int
    null_count: int
    exclude_null: bool
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def tallied(self) -> int:
        return sum(self.counts)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array(self.counts) / max(self.tallied, 1)

    @property
    def stderr(self) -> np.ndarray:
        """Binomial standard error at the analytic probability."""
        p = np.array(self.analytic)
        return np.sqrt(p * (1 - p) / max(self.tallied, 1))

    @property
    def unfixated_rate(self) -> float:
        return self.unfixated / self.trials

    def within(self, n_sigma: float = 3.0) -> np.ndarray:
        dev = np.abs(self.frequencies - np.array(self.analytic))
        return dev <= n_sigma * self.stderr + 1e-15

    def to_json(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "analytic_probability": list(self.analytic),
            "counts": list(self.counts),
            "empirical_frequency": self.frequencies.tolist(),
            "standard_error": self.stderr.tolist(),
            "trials": self.trials,
            "unfixated_rate": self.unfixated_rate,
            "null_rate": self.null_count / self.trials,
        }


def _run_block(p0: np.ndarray, grouping: np.ndarray, n: int, budget: int, window: int,
               resolution: int, dt: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Window pointer powers after ``budget`` samples, and fixation flags."""
    p = np.tile(p0, (n, 1))
    win = np.zeros_like(p)
    wstart = budget - window
    live = np.flatnonzero(p.max(axis=1) < 1.0)
    for t in range(budget):
        if t >= wstart:
            win += p
        if t == budget - 1:
            break
        if live.size == 0:
            # every row sits on a vertex; later samples repeat the current one
            win += p * (budget - max(t + 1, wstart))
            break
        stepped = martingale_step(p[live], resolution, rng)
        p[live] = stepped
        live = live[stepped.max(axis=1) < 1.0]
    return (win * dt) @ grouping, p.max(axis=1) == 1.0


def monte_carlo(sys: PreparedSystem, pointer_map, trials: int, seed: int = 0, *,
                alpha_min: float = DEFAULT.alpha_min, step_budget: int = 10_000,
                window: int = 100, resolution: int = 16, dt: float = 1.0,
                n_pointers: int | None = None, exclude_null: bool = False,
                block_size: int = 8192, threads: int = 1,
                thresholds: Thresholds = DEFAULT) -> BornResult:
    """Tally the pointer recorded at the end of many martingale runs.

    Each trial starts from the prepared powers and runs
    :class:`~quasistate.trajectory.PowerMartingale` dynamics for
    ``step_budget`` samples; the induced quasi-state of the final ``window``
    samples names the recorded pointer. Windows without a single recorded
    pointer count as pointer 0, or are dropped with ``exclude_null``.

    Trials run in blocks of ``block_size``; block ``b`` draws from
    ``SeedSequence(seed, spawn_key=(b,))``, so results do not depend on
    ``threads``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not 1 <= window <= step_budget:
        raise ValueError("window must lie within the step budget")
    p0 = sys.powers
    pm = _pointer_tuple(pointer_map, len(p0))
    probe = JointChain(Trajectory(dt, np.tile(np.asarray(sys.coefficients), (2, 1))), pm, n_pointers)
    grouping = probe.grouping()
    analytic = tuple(float(x) for x in p0 @ grouping)

    sizes = [block_size] * (trials // block_size)
    if trials % block_size:
        sizes.append(trials % block_size)

    def job(b: int):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        return _run_block(p0, grouping, sizes[b], step_budget, window, resolution, dt, rng)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(b) for b in range(len(sizes))]
    win = np.concatenate([w for w, _ in parts])
    fixed = np.concatenate([f for _, f in parts])

    rows, inverse = np.unique(win, axis=0, return_inverse=True)
    wobj = Window(step_budget - window, window)
    outcome_of_row = np.empty(len(rows), dtype=int)
    for r, row in enumerate(rows):
        q = maximal_from_spectrum(PowerSpectrum.from_powers(row, wobj), alpha_min, thresholds)
        ptr = recorded_pointer(q)
        outcome_of_row[r] = -1 if ptr is None else ptr
    outcomes = outcome_of_row[inverse.ravel()]
    null_count = int(np.sum(outcomes < 0))
    if exclude_null:
        outcomes = outcomes[outcomes >= 0]
    else:
        outcomes = np.where(outcomes < 0, 0, outcomes)
    counts = np.bincount(outcomes, minlength=probe.n_pointers)
    config = {
        "preparation": [[c.real, c.imag] for c in sys.coefficients],
        "pointer_map": list(pm),
        "trials": trials,
        "seed": seed,
        "alpha_min": alpha_min,
        "step_budget": step_budget,
        "window": window,
        "resolution": resolution,
        "dt": dt,
        "exclude_null": exclude_null,
        "block_size": block_size,
        "thresholds": thresholds.to_dict(),
    }
    return BornResult(analytic, tuple(int(c) for c in counts), trials, int(np.sum(~fixed)),
                      null_count, exclude_null, config)


def born_report_json(result: BornResult) -> str:
    return json.dumps(result.to_json(), sort_keys=True, indent=2) + "\n"


# -- counter fine-graining ---------------------------------------------------


@dataclass(frozen=True)
class CounterAssignment:
    """``counts[i]`` equal-weight counter slots for pointer ``i``, each worth
    ``unit`` of probability."""

    counts: tuple[int, ...]
    unit: Fraction

    def partial_sum(self, i: int) -> Fraction:
        return self.counts[i] * self.unit

    def probabilities(self) -> tuple[Fraction, ...]:
        return tuple(self.partial_sum(i) for i in range(len(self.counts)))

    def slots(self) -> list[tuple[int, int]]:
        """Counter slots ``(pointer, j)`` in canonical order."""
        return [(i, j) for i, m in enumerate(self.counts) for j in range(m)]

    def partial_sums_of(self, slots: Sequence[tuple[int, int]]) -> tuple[Fraction, ...]:
        """Partial sums recomputed from an arbitrary ordering of the slots."""
        tally = [Fraction(0)] * len(self.counts)
        for i, _ in slots:
            tally[i] += self.unit
        return tuple(tally)


def fine_grain(probabilities: Sequence[Fraction | int | str]) -> CounterAssignment:
    """Split rational probabilities into counter slots of one common unit."""
    probs = [Fraction(p) for p in probabilities]
    if any(p < 0 for p in probs):
        raise ValueError("probabilities must be non-negative")
    if sum(probs) != 1:
        raise ValueError(f"probabilities sum to {sum(probs)}, not 1")
    denom = math.lcm(*(p.denominator for p in probs))
    counts = tuple(int(p * denom) for p in probs)
    return CounterAssignment(counts, Fraction(1, denom))


def rationalize(values: Sequence[float], denominator: int = 10**6) -> tuple[Fraction, ...]:
    """Rationals with the given denominator that sum to exactly one.

    Uses largest-remainder rounding so no entry moves by more than
    ``1/denominator``.
    """
    vals = np.asarray(values, dtype=float)
    if np.any(vals < 0) or vals.sum() <= 0:
        raise ValueError("values must be non-negative with a positive sum")
    scaled = vals / vals.sum() * denominator
    base = np.floor(scaled).astype(np.int64)
    short = denominator - int(base.sum())
    order = np.argsort(-(scaled - base), kind="stable")
    base[order[:short]] += 1
    return tuple(Fraction(int(b), denominator) for b in base)
