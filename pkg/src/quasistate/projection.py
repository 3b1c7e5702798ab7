"""Amplifying projections of trajectories onto quasi-states.

Within a window the power carried by basis index ``k`` is the Riemann sum
``sum_m |lambda_k(t_m)|**2 * dt``. Sums use :func:`math.fsum`, which is
correctly rounded and therefore independent of sample order: permuting the
samples inside a window leaves every spectrum, and everything computed from
it, bit-for-bit unchanged.

A quasi-state picks one dominant index from each block of a partition of
the basis. ``None`` plays the role of the zero vector throughout: it is what
a projection returns when nothing dominates.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .config import DEFAULT, Thresholds
from .trajectory import Trajectory, Window, windows


class BruteForceLimitError(ValueError):
    """Dimension too large for the exhaustive partition search."""


@dataclass(frozen=True)
class PowerSpectrum:
    """Integrated power per basis index over one window."""

    window: Window | None
    per_basis_power: tuple[float, ...]
    total_power: float

    @property
    def dim(self) -> int:
        return len(self.per_basis_power)

    @classmethod
    def from_powers(cls, powers: Sequence[float], window: Window | None = None) -> "PowerSpectrum":
        per = tuple(float(p) for p in powers)
        if any(p < 0 or math.isnan(p) for p in per):
            raise ValueError("powers must be non-negative")
        return cls(window, per, math.fsum(per))


def power_spectrum(traj: Trajectory, w: Window) -> PowerSpectrum:
    w.check(traj)
    block = traj.powers()[w.start:w.stop]
    per = tuple(math.fsum(col) * traj.dt for col in block.T)
    return PowerSpectrum(w, per, math.fsum(per))


def block_dominance(powers: Sequence[float], block: Sequence[int]) -> tuple[int, float]:
    """Dominant index of ``block`` and its ratio to the rest of the block.

    The ratio is ``inf`` when the rest carries no power and ``0`` when the
    dominant itself carries none (an empty block amplifies nothing).
    """
    dom = max(block, key=lambda k: (powers[k], -k))
    top = powers[dom]
    rest = math.fsum(powers[k] for k in block if k != dom)
    if top == 0:
        return dom, 0.0
    if rest == 0:
        return dom, math.inf
    return dom, top / rest


def alpha_dispersion(alphas: Sequence[float], cap: float) -> tuple[float, bool]:
    """Population standard deviation of the ratios after clamping to ``cap``.

    Returns the dispersion and whether any ratio was clamped.
    """
    clamped = any(a > cap for a in alphas)
    vals = np.sort(np.minimum(np.asarray(alphas, dtype=float), cap))
    return float(np.std(vals)), clamped


def dispersion_tied(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks of basis indices, each with a dominant index.

    Blocks are stored sorted, and the block list itself sorted, so the tuple
    ``blocks`` doubles as the lexicographic tie-break key.
    """

    blocks: tuple[tuple[int, ...], ...]
    dominants: tuple[int, ...]
    alphas: tuple[float, ...]

    @property
    def N(self) -> int:
        return len(self.blocks)

    @classmethod
    def build(cls, powers: Sequence[float], blocks) -> "Partition":
        blocks = tuple(sorted(tuple(sorted(b)) for b in blocks))
        doms, alphas = zip(*(block_dominance(powers, b) for b in blocks)) if blocks else ((), ())
        return cls(blocks, tuple(doms), tuple(alphas))

    def dispersion(self, cap: float = DEFAULT.alpha_cap) -> tuple[float, bool]:
        return alpha_dispersion(self.alphas, cap)


@dataclass(frozen=True)
class QuasiState:
    """Weighted dominant components of one window.

    ``components`` holds ``(basis_index, beta_i)`` with ``beta_i**2`` the
    integrated power of that index, sorted by index; ``beta`` is the root of
    their summed powers. ``alphas`` are the dominance ratios of the
    components in the same order.
    """

    window: Window | None
    components: tuple[tuple[int, float], ...]
    beta: float
    alphas: tuple[float, ...]
    dispersion: float = 0.0
    clamped: bool = False
    tied: bool = False
    partition: Partition | None = None

    @property
    def N(self) -> int:
        return len(self.components)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.components)

    def normalized_weights(self) -> np.ndarray:
        return np.array([b for _, b in self.components]) / self.beta

    def norm_error(self) -> float:
        return abs(float(np.sum(self.normalized_weights() ** 2)) - 1.0)


def _from_partition(spec: PowerSpectrum, part: Partition, cap: float, tied: bool) -> QuasiState:
    p = spec.per_basis_power
    order = sorted(range(part.N), key=lambda i: part.dominants[i])
    comps = tuple((part.dominants[i], math.sqrt(p[part.dominants[i]])) for i in order)
    alphas = tuple(part.alphas[i] for i in order)
    beta = math.sqrt(math.fsum(p[k] for k, _ in comps))
    disp, clamped = alpha_dispersion(alphas, cap)
    return QuasiState(spec.window, comps, beta, alphas, disp, clamped, tied, part)


def q_single(traj: Trajectory, w: Window, theta: float = DEFAULT.theta) -> QuasiState | None:
    """Single-component projection.

    Fires when some index carries at least ``theta`` times the power of all
    other indices combined; the component keeps its integrated power as
    weight.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    return q_single_spectrum(power_spectrum(traj, w), theta)


def q_single_spectrum(spec: PowerSpectrum, theta: float = DEFAULT.theta) -> QuasiState | None:
    if spec.total_power == 0:
        return None
    p = spec.per_basis_power
    best_k, best_r = 0, -1.0
    for k in range(spec.dim):
        rest = math.fsum(p[j] for j in range(spec.dim) if j != k)
        r = math.inf if rest == 0 else p[k] / rest
        if r > best_r:
            best_k, best_r = k, r
    if p[best_k] == 0 or best_r < theta:
        return None
    return QuasiState(spec.window, ((best_k, math.sqrt(p[best_k])),), math.sqrt(p[best_k]),
                      (best_r,))


def admissible_blocks(powers: Sequence[float], alpha_min: float) -> dict[int, list]:
    """Blocks of size >= 2 whose dominance exceeds ``alpha_min``, keyed by
    their smallest index."""
    dim = len(powers)
    by_min: dict[int, list] = {i: [] for i in range(dim)}
    for size in range(2, dim + 1):
        for block in combinations(range(dim), size):
            dom, alpha = block_dominance(powers, block)
            if alpha > alpha_min:
                by_min[block[0]].append((block, dom, alpha))
    return by_min


def _covers(dim: int, by_min: dict[int, list], bound_n: int | None = None) -> Iterator[list]:
    """Exact covers of ``range(dim)`` by admissible blocks.

    ``bound_n`` is a mutable one-element list holding the best block count
    seen so far; branches that cannot reach it are cut.
    """
    chosen: list = []
    covered = [False] * dim

    def rec(uncovered: int):
        if uncovered == 0:
            yield list(chosen)
            return
        if bound_n is not None and len(chosen) + uncovered // 2 < bound_n[0]:
            return
        first = covered.index(False)
        for entry in by_min[first]:
            block = entry[0]
            if any(covered[k] for k in block):
                continue
            for k in block:
                covered[k] = True
            chosen.append(entry)
            yield from rec(uncovered - len(block))
            chosen.pop()
            for k in block:
                covered[k] = False

    yield from rec(dim)


def enumerate_partitions(dim: int, spectrum: PowerSpectrum, alpha_min: float = DEFAULT.alpha_min,
                         brute_force_limit: int = DEFAULT.brute_force_limit) -> list[Partition]:
    """Every partition of the basis into blocks of at least two indices in
    which each block's dominance ratio strictly exceeds ``alpha_min``."""
    if dim != spectrum.dim:
        raise ValueError(f"spectrum has dimension {spectrum.dim}, expected {dim}")
    if dim > brute_force_limit:
        raise BruteForceLimitError(
            f"dimension {dim} exceeds brute-force limit {brute_force_limit}; use greedy_partition"
        )
    p = spectrum.per_basis_power
    by_min = admissible_blocks(p, alpha_min)
    out = []
    for cover in _covers(dim, by_min):
        out.append(Partition.build(p, [blk for blk, _, _ in cover]))
    out.sort(key=lambda part: part.blocks)
    return out


def maximal_from_spectrum(spec: PowerSpectrum, alpha_min: float = DEFAULT.alpha_min,
                          thresholds: Thresholds = DEFAULT) -> QuasiState | None:
    """Maximal quasi-state of a spectrum.

    Among admissible partitions keep those with the most blocks, then those
    with the smallest ratio dispersion, then the lexicographically first
    block list. ``tied`` is set when the surviving candidates disagree on
    the dominant indices.
    """
    if spec.total_power == 0 or spec.dim < 2:
        return None
    cap = thresholds.alpha_cap
    if spec.dim > thresholds.brute_force_limit:
        if not thresholds.greedy_above_limit:
            raise BruteForceLimitError(
                f"dimension {spec.dim} exceeds brute-force limit {thresholds.brute_force_limit}"
            )
        part = greedy_partition(spec, alpha_min)
        return None if part is None else _from_partition(spec, part, cap, False)

    p = spec.per_basis_power
    by_min = admissible_blocks(p, alpha_min)
    best_n = [1]
    best_disp = math.inf
    best: list[tuple] = []
    for cover in _covers(spec.dim, by_min, best_n):
        n = len(cover)
        disp, _ = alpha_dispersion([a for _, _, a in cover], cap)
        if n > best_n[0] or not best:
            best_n[0], best_disp, best = n, disp, [(cover, disp)]
        elif n == best_n[0]:
            if dispersion_tied(disp, best_disp):
                best.append((cover, disp))
                best_disp = min(best_disp, disp)
            elif disp < best_disp:
                best_disp, best = disp, [(cover, disp)]
    if not best:
        return None
    parts = [Partition.build(p, [blk for blk, _, _ in c])
             for c, d in best if dispersion_tied(d, best_disp)]
    parts.sort(key=lambda part: part.blocks)
    tied = len({tuple(sorted(part.dominants)) for part in parts}) > 1
    return _from_partition(spec, parts[0], cap, tied)


def maximal_quasi_state(traj: Trajectory, w: Window, alpha_min: float = DEFAULT.alpha_min,
                        thresholds: Thresholds = DEFAULT) -> QuasiState | None:
    return maximal_from_spectrum(power_spectrum(traj, w), alpha_min, thresholds)


def q_general(traj: Trajectory, length_samples: int, alpha_min: float = DEFAULT.alpha_min,
              thresholds: Thresholds = DEFAULT) -> list[QuasiState | None]:
    """Maximal quasi-state of each consecutive non-overlapping window."""
    return [maximal_quasi_state(traj, w, alpha_min, thresholds)
            for w in windows(traj, length_samples, thresholds.kappa)]


def greedy_partition(spectrum: PowerSpectrum, alpha_min: float = DEFAULT.alpha_min
                     ) -> Partition | None:
    """Fast heuristic partition; admissible when returned, never claimed
    maximal.

    Pairs the strongest unused index with the weakest unused one while the
    pair is admissible, then attaches leftovers (strongest first) to the
    block that keeps the highest ratio. If a leftover fits nowhere, the
    number of pairs is reduced by one and the procedure restarts.
    """
    p = spectrum.per_basis_power
    dim = spectrum.dim
    if dim < 2:
        raise ValueError("greedy_partition needs dim >= 2")
    desc = sorted(range(dim), key=lambda k: (-p[k], k))
    asc = sorted(range(dim), key=lambda k: (p[k], k))

    for max_blocks in range(dim // 2, 0, -1):
        used = set()
        blocks: list[list[int]] = []
        for d in desc:
            if len(blocks) == max_blocks:
                break
            if d in used:
                continue
            partner = next((f for f in asc if f != d and f not in used), None)
            if partner is None:
                break
            if block_dominance(p, (d, partner))[1] > alpha_min:
                blocks.append([d, partner])
                used.update((d, partner))
        if not blocks:
            continue
        ok = True
        for left in (k for k in desc if k not in used):
            scored = [(block_dominance(p, b + [left])[1], -i) for i, b in enumerate(blocks)]
            alpha, neg_i = max(scored)
            if alpha <= alpha_min:
                ok = False
                break
            blocks[-neg_i].append(left)
        if ok:
            return Partition.build(p, blocks)
    return None


def spin_array_quasi_state(spins: Sequence[Trajectory], w: Window,
                           alpha_min: float = DEFAULT.alpha_min,
                           thresholds: Thresholds = DEFAULT) -> QuasiState | None:
    """Quasi-state of an array of independent two-level systems.

    Each spin is projected on its own two-dimensional space; spin ``s``
    contributes basis indices ``2*s`` (up) and ``2*s + 1`` (down).
    """
    comps, alphas, blocks, tied = [], [], [], False
    for s, spin in enumerate(spins):
        if spin.dim != 2:
            raise ValueError(f"spin {s} has dimension {spin.dim}, expected 2")
        q = maximal_quasi_state(spin, w, alpha_min, thresholds)
        if q is None:
            continue
        tied |= q.tied
        for (k, b), a in zip(q.components, q.alphas):
            comps.append((2 * s + k, b))
            alphas.append(a)
        blocks.append((2 * s, 2 * s + 1))
    if not comps:
        return None
    beta = math.sqrt(math.fsum(b * b for _, b in comps))
    disp, clamped = alpha_dispersion(alphas, thresholds.alpha_cap)
    part = Partition(tuple(blocks), tuple(k for k, _ in comps), tuple(alphas))
    return QuasiState(w, tuple(comps), beta, tuple(alphas), disp, clamped, tied, part)


# -- output ------------------------------------------------------------------


def write_quasi_states(seq: Sequence[QuasiState | None], path: str | Path,
                       wins: Sequence[Window], thresholds: Thresholds = DEFAULT,
                       alpha_min: float | None = None) -> Path:
    """CSV of a quasi-state sequence plus a ``.config.json`` sidecar.

    Rows are padded to the largest ``N`` in the sequence. Infinite ratios
    are written as ``inf``.
    """
    path = Path(path)
    if len(seq) != len(wins):
        raise ValueError("one window per quasi-state is required")
    width = max((q.N for q in seq if q is not None), default=0)
    header = ["window_start", "window_len", "N"]
    for i in range(1, width + 1):
        header += [f"comp_index_{i}", f"weight_{i}"]
    header += [f"alpha_{i}" for i in range(1, width + 1)]
    header += ["dispersion", "null_flag", "clamped_flag", "tie_flag"]
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for q, w in zip(seq, wins):
            row = [w.start, w.length]
            if q is None:
                row += [0] + [""] * (3 * width) + ["", 1, 0, 0]
            else:
                row.append(q.N)
                pad = width - q.N
                for k, b in q.components:
                    row += [k, format(b, ".17g")]
                row += ["", ""] * pad
                row += [format(a, ".17g") for a in q.alphas] + [""] * pad
                row += [format(q.dispersion, ".17g"), 0, int(q.clamped), int(q.tied)]
            out.writerow(row)
    cfg = thresholds.to_dict()
    if alpha_min is not None:
        cfg["alpha_min"] = alpha_min
    path.with_name(path.stem + ".config.json").write_text(
        json.dumps(cfg, sort_keys=True, indent=2) + "\n")
    return path
