"""Discrete-time trajectories of finite-dimensional state vectors.

A :class:`Trajectory` is a stack of complex amplitude vectors sampled every
``dt``. Time integrals over a window are left Riemann sums, so the power
carried by one sample is ``|amplitude|**2 * dt``.

Generators are pure functions of their seed::

    >>> traj = generate(ConstantPure(0), dim=2, steps=4, dt=0.5, seed=0)
    >>> traj.samples[0]
    array([1.+0.j, 0.+0.j])
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence, Union

import numpy as np

from .config import DEFAULT


class TrajectoryError(ValueError):
    """Invalid trajectory construction or generator request."""


class WindowError(ValueError):
    """A window that does not fit inside its trajectory."""


class ShortWindowWarning(UserWarning):
    """Window shorter than ``kappa * t_c``."""


def _as_samples(samples) -> np.ndarray:
    arr = np.array(samples, dtype=np.complex128)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise TrajectoryError(f"samples must be 2-d (steps, dim), got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled amplitude vectors ``samples[m, k]`` at ``t = m*dt``.

    ``t_c`` is the declared characteristic time of the dynamics. Instances
    are immutable; the sample array is marked read-only.
    """

    dt: float
    samples: np.ndarray
    t_c: float | None = None
    basis_labels: tuple[str, ...] | None = None
    unnormalized: bool = False
    eps_norm: float = DEFAULT.eps_norm

    def __post_init__(self):
        samples = _as_samples(self.samples)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if not self.dt > 0:
            raise TrajectoryError(f"dt must be positive, got {self.dt}")
        t_c = self.dt if self.t_c is None else float(self.t_c)
        if t_c < self.dt * (1 - 1e-12):
            raise TrajectoryError(f"t_c={t_c} is below the sampling step dt={self.dt}")
        object.__setattr__(self, "t_c", t_c)
        steps, dim = samples.shape
        if steps < 2:
            raise TrajectoryError("a trajectory needs at least 2 samples")
        if dim < 1:
            raise TrajectoryError("dimension must be at least 1")
        labels = self.basis_labels
        if labels is None:
            labels = tuple(str(k) for k in range(dim))
        labels = tuple(str(x) for x in labels)
        if len(labels) != dim:
            raise TrajectoryError(f"{len(labels)} basis labels for dimension {dim}")
        object.__setattr__(self, "basis_labels", labels)
        if not self.unnormalized:
            err = np.max(np.abs(np.sum(np.abs(samples) ** 2, axis=1) - 1.0))
            if err > self.eps_norm:
                raise TrajectoryError(
                    f"samples are not normalized (max deviation {err:.3g}); "
                    "pass unnormalized=True to allow this"
                )

    @property
    def steps(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps) * self.dt

    def powers(self) -> np.ndarray:
        """Per-sample squared magnitudes, shape ``(steps, dim)``."""
        return np.abs(self.samples) ** 2

    def with_samples(self, samples) -> "Trajectory":
        return Trajectory(
            self.dt, samples, self.t_c, self.basis_labels, self.unnormalized, self.eps_norm
        )

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.dt == other.dt
            and self.t_c == other.t_c
            and self.basis_labels == other.basis_labels
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None


@dataclass(frozen=True)
class Window:
    """``length`` consecutive samples starting at ``start``."""

    start: int
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise WindowError("window length must be at least 1 sample")
        if self.start < 0:
            raise WindowError("window start must be non-negative")

    @property
    def stop(self) -> int:
        return self.start + self.length

    def duration(self, dt: float) -> float:
        return self.length * dt

    def check(self, traj: Trajectory) -> None:
        if self.stop > traj.steps:
            raise WindowError(
                f"window [{self.start}, {self.stop}) exceeds trajectory of {traj.steps} samples"
            )


def windows(traj: Trajectory, length_samples: int, kappa: float = DEFAULT.kappa) -> list[Window]:
    """Tile ``traj`` from sample 0 with non-overlapping windows.

    Trailing samples that do not fill a whole window are dropped. A
    :class:`ShortWindowWarning` is issued when ``length_samples * dt`` is
    below ``kappa * t_c``.
    """
    if length_samples < 1:
        raise WindowError("length_samples must be at least 1")
    if length_samples > traj.steps:
        raise WindowError(
            f"window of {length_samples} samples exceeds trajectory of {traj.steps}"
        )
    if length_samples * traj.dt < kappa * traj.t_c * (1 - 1e-12):
        warnings.warn(
            f"window {length_samples * traj.dt:g} is shorter than {kappa:g} * t_c "
            f"({kappa * traj.t_c:g})",
            ShortWindowWarning,
            stacklevel=2,
        )
    count = traj.steps // length_samples
    return [Window(i * length_samples, length_samples) for i in range(count)]


def sparse_readout(traj: Trajectory, length_samples: int, offset: int = 0) -> np.ndarray:
    """One sample per window, taken ``offset`` samples into each window."""
    if not 0 <= offset < length_samples:
        raise WindowError("offset must lie inside the window")
    wins = windows(traj, length_samples, kappa=0.0)
    return np.array([traj.samples[w.start + offset] for w in wins])


def tensor(a: Trajectory, b: Trajectory) -> Trajectory:
    """Sample-wise Kronecker product.

    Basis labels follow lexicographic order ``a_i⊗b_j`` with the index of
    ``b`` running fastest, which matches ``np.kron``.
    """
    if a.dt != b.dt:
        raise TrajectoryError(f"mismatched dt: {a.dt} vs {b.dt}")
    if a.steps != b.steps:
        raise TrajectoryError(f"mismatched lengths: {a.steps} vs {b.steps}")
    joint = np.einsum("ti,tj->tij", a.samples, b.samples).reshape(a.steps, a.dim * b.dim)
    labels = tuple(f"{la}⊗{lb}" for la in a.basis_labels for lb in b.basis_labels)
    return Trajectory(
        a.dt,
        joint,
        max(a.t_c, b.t_c),
        labels,
        unnormalized=a.unnormalized or b.unnormalized,
        eps_norm=max(a.eps_norm, b.eps_norm),
    )


# -- generator kinds ---------------------------------------------------------


@dataclass(frozen=True)
class ConstantPure:
    """All amplitude on basis index ``k`` at every sample."""

    k: int = 0


@dataclass(frozen=True)
class Balanced:
    """Equal-magnitude superposition with the given signs (default all +)."""

    signs: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Frozen:
    """Time-independent amplitudes (renormalized on use)."""

    amplitudes: tuple[complex, ...]


@dataclass(frozen=True)
class RandomFast:
    """Random unit vectors redrawn every ``ceil(t_c/dt)`` steps, linearly
    interpolated in between and renormalized."""

    t_c: float


@dataclass(frozen=True)
class PowerMartingale:
    """Neutral resampling of component powers.

    Each step replaces the power vector ``p`` by ``Multinomial(resolution, p)
    / resolution``. The expected next value equals the current one, powers
    stay on the probability simplex, and a vertex once reached is never left,
    so component ``k`` ends up carrying all the power with probability equal
    to its initial power. Phases of the initial amplitudes are kept.
    """

    powers: tuple[float, ...]
    phases: tuple[float, ...] | None = None
    resolution: int = 16


@dataclass(frozen=True)
class Piecewise:
    """Concatenation of other kinds. ``schedule`` holds ``(start_step, kind)``
    pairs; the first start must be 0 and starts must increase."""

    schedule: tuple[tuple[int, Any], ...]


GeneratorSpec = Union[ConstantPure, Balanced, Frozen, RandomFast, PowerMartingale, Piecewise]

_KIND_NAMES = {
    "constant-pure": ConstantPure,
    "balanced-superposition": Balanced,
    "frozen": Frozen,
    "random-fast": RandomFast,
    "power-martingale": PowerMartingale,
    "piecewise": Piecewise,
}


def spec_from_dict(data: Mapping[str, Any]) -> GeneratorSpec:
    """Build a generator kind from its JSON form, e.g.
    ``{"kind": "random-fast", "t_c": 0.01}``."""
    data = dict(data)
    try:
        cls = _KIND_NAMES[data.pop("kind")]
    except KeyError as exc:
        raise TrajectoryError(f"unknown generator kind: {exc.args[0]!r}") from None
    if cls is Piecewise:
        sched = tuple((int(s), spec_from_dict(sub)) for s, sub in data["schedule"])
        return Piecewise(sched)
    if cls is Frozen:
        amps = tuple(complex(*a) if isinstance(a, (list, tuple)) else complex(a)
                     for a in data["amplitudes"])
        return Frozen(amps)
    for key in ("signs", "powers", "phases"):
        if data.get(key) is not None:
            data[key] = tuple(data[key])
    return cls(**data)


def spec_to_dict(spec: GeneratorSpec) -> dict[str, Any]:
    for name, cls in _KIND_NAMES.items():
        if type(spec) is cls:
            break
    else:
        raise TrajectoryError(f"unknown generator kind: {spec!r}")
    if isinstance(spec, Piecewise):
        return {"kind": name, "schedule": [[s, spec_to_dict(k)] for s, k in spec.schedule]}
    if isinstance(spec, Frozen):
        return {"kind": name, "amplitudes": [[a.real, a.imag] for a in map(complex, spec.amplitudes)]}
    out = {"kind": name}
    out.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in spec.__dict__.items()})
    return out


def martingale_step(powers: np.ndarray, resolution: int, rng: np.random.Generator) -> np.ndarray:
    """One resampling step for a batch of power vectors, shape ``(n, dim)``.

    The multinomial draw is decomposed into conditional binomials, one
    vectorized call per component.
    """
    n, dim = powers.shape
    counts = np.empty((n, dim), dtype=np.int64)
    left = np.full(n, resolution, dtype=np.int64)
    mass = np.ones(n)
    for k in range(dim - 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(mass > 0, powers[:, k] / mass, 0.0)
        c = rng.binomial(left, np.clip(frac, 0.0, 1.0))
        counts[:, k] = c
        left -= c
        mass = mass - powers[:, k]
    counts[:, dim - 1] = left
    return counts / resolution


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _random_unit(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    v = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    return _unit(v)


def _segment(spec, dim: int, n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    if isinstance(spec, ConstantPure):
        if not 0 <= spec.k < dim:
            raise TrajectoryError(f"basis index {spec.k} out of range for dim {dim}")
        out = np.zeros((n, dim), dtype=np.complex128)
        out[:, spec.k] = 1.0
        return out
    if isinstance(spec, Balanced):
        signs = np.ones(dim) if spec.signs is None else np.asarray(spec.signs, dtype=float)
        if signs.shape != (dim,) or not np.all(np.abs(signs) == 1):
            raise TrajectoryError(f"signs must be {dim} values of +1/-1")
        return np.tile(signs / math.sqrt(dim), (n, 1)).astype(np.complex128)
    if isinstance(spec, Frozen):
        amps = np.asarray(spec.amplitudes, dtype=np.complex128)
        if amps.shape != (dim,):
            raise TrajectoryError(f"expected {dim} amplitudes, got {amps.shape[0]}")
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise TrajectoryError("frozen amplitudes are all zero")
        return np.tile(amps / norm, (n, 1))
    if isinstance(spec, RandomFast):
        if spec.t_c <= 0:
            raise TrajectoryError("random-fast t_c must be positive")
        every = max(1, math.ceil(spec.t_c / dt - 1e-9))
        keys = _random_unit(rng, n // every + 2, dim)
        m = np.arange(n)
        j, frac = m // every, (m % every) / every
        mix = (1 - frac)[:, None] * keys[j] + frac[:, None] * keys[j + 1]
        norms = np.linalg.norm(mix, axis=1)
        # antipodal keyframes can cancel; fall back to the earlier keyframe
        bad = norms < 1e-12
        mix[bad] = keys[j[bad]]
        return _unit(mix)
    if isinstance(spec, PowerMartingale):
        p = np.asarray(spec.powers, dtype=float)
        if p.shape != (dim,) or np.any(p < 0):
            raise TrajectoryError(f"expected {dim} non-negative powers")
        if abs(p.sum() - 1.0) > DEFAULT.eps_norm:
            raise TrajectoryError(f"initial powers sum to {p.sum()}, not 1")
        if spec.resolution < 1:
            raise TrajectoryError("resolution must be positive")
        phases = np.zeros(dim) if spec.phases is None else np.asarray(spec.phases, dtype=float)
        rows = np.empty((n, dim))
        rows[0] = p
        for m in range(1, n):
            rows[m] = martingale_step(rows[m - 1][None, :], spec.resolution, rng)[0]
        return np.sqrt(rows) * np.exp(1j * phases)
    if isinstance(spec, Piecewise):
        raise TrajectoryError("piecewise schedules cannot be nested")
    raise TrajectoryError(f"unknown generator kind: {spec!r}")


def generate(spec: GeneratorSpec | Mapping[str, Any], dim: int, steps: int, dt: float,
             seed: int = 0) -> Trajectory:
    """Sample a normalized trajectory from a generator kind.

    The result depends only on ``(spec, dim, steps, dt, seed)``.
    """
    if isinstance(spec, Mapping):
        spec = spec_from_dict(spec)
    if dim < 1:
        raise TrajectoryError("dim must be at least 1")
    if steps < 2:
        raise TrajectoryError("steps must be at least 2")
    t_c = dt
    if isinstance(spec, Piecewise):
        starts = [s for s, _ in spec.schedule]
        if not starts or starts[0] != 0:
            raise TrajectoryError("piecewise schedule must start at step 0")
        if any(b <= a for a, b in zip(starts, starts[1:])) or starts[-1] >= steps:
            raise TrajectoryError(f"schedule indices {starts} out of range for {steps} steps")
        bounds = starts + [steps]
        parts = []
        for i, (_, sub) in enumerate(spec.schedule):
            rng = np.random.default_rng([seed, i])
            parts.append(_segment(sub, dim, bounds[i + 1] - bounds[i], dt, rng))
            if isinstance(sub, RandomFast):
                t_c = max(t_c, sub.t_c)
        samples = np.concatenate(parts)
    else:
        samples = _segment(spec, dim, steps, dt, np.random.default_rng(seed))
        if isinstance(spec, RandomFast):
            t_c = max(dt, spec.t_c)
    return Trajectory(dt, samples, t_c)


def spin_array(regime: str, M: int, steps: int, dt: float, seed: int = 0, *,
               n_pure: int = 0, tilt: float = 0.05, t_c: float | None = None,
               pure_positions: Sequence[int] | None = None) -> list[Trajectory]:
    """Per-spin trajectories of ``M`` independent spin-1/2 systems.

    ``regime`` is one of ``"random-fast"``, ``"balanced"``, ``"pure"`` or
    ``"mixed"``. In the mixed regime the spins at ``pure_positions``
    (default the first ``n_pure``) are pure and the rest sit near an equal
    superposition, with the larger component carrying ``0.5 + tilt`` of the
    power.
    """
    if M < 1:
        raise TrajectoryError("M must be at least 1")
    rng = np.random.default_rng(seed)
    spin_seeds = rng.integers(0, 2**63, size=M)
    ups = rng.integers(0, 2, size=M)
    signs = rng.choice([-1, 1], size=M)
    if regime == "random-fast":
        kind_t_c = 10 * dt if t_c is None else t_c
        return [generate(RandomFast(kind_t_c), 2, steps, dt, int(s)) for s in spin_seeds]
    if regime == "balanced":
        return [generate(Balanced((1, int(sg))), 2, steps, dt) for sg in signs]
    if regime == "pure":
        return [generate(ConstantPure(int(u)), 2, steps, dt) for u in ups]
    if regime == "mixed":
        if not 0 <= n_pure <= M:
            raise TrajectoryError("n_pure must lie in [0, M]")
        if not 0 <= tilt < 0.5:
            raise TrajectoryError("tilt must lie in [0, 0.5)")
        pure = set(range(n_pure) if pure_positions is None else pure_positions)
        big, small = math.sqrt(0.5 + tilt), math.sqrt(0.5 - tilt)
        out = []
        for i in range(M):
            if i in pure:
                out.append(generate(ConstantPure(int(ups[i])), 2, steps, dt))
            else:
                amps = (big, signs[i] * small) if ups[i] == 0 else (signs[i] * small, big)
                out.append(generate(Frozen(tuple(complex(a) for a in amps)), 2, steps, dt))
        return out
    raise TrajectoryError(f"unknown spin-array regime {regime!r}")


# -- serialization -----------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_trajectory(traj: Trajectory, path: str | Path, meta: bool = True) -> Path:
    """Write ``t,re_0,im_0,...`` CSV; with ``meta`` a ``.meta.json`` sidecar
    keeps ``dt``, ``t_c`` and the basis labels."""
    path = Path(path)
    header = ["t"]
    for k in range(traj.dim):
        header += [f"re_{k}", f"im_{k}"]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for m in range(traj.steps):
            row = [_fmt(m * traj.dt)]
            for z in traj.samples[m]:
                row += [_fmt(z.real), _fmt(z.imag)]
            writer.writerow(row)
    if meta:
        side = {
            "dt": traj.dt,
            "t_c": traj.t_c,
            "basis_labels": list(traj.basis_labels),
            "unnormalized": traj.unnormalized,
        }
        _meta_path(path).write_text(json.dumps(side, sort_keys=True, indent=2) + "\n")
    return path


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def load_trajectory(path: str | Path) -> Trajectory:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [[float(x) for x in row] for row in reader if row]
    if header[0] != "t" or (len(header) - 1) % 2:
        raise TrajectoryError(f"unexpected trajectory header {header[:3]}...")
    data = np.array(rows)
    samples = data[:, 1::2] + 1j * data[:, 2::2]
    meta_file = _meta_path(path)
    if meta_file.exists():
        side = json.loads(meta_file.read_text())
        return Trajectory(side["dt"], samples, side["t_c"], tuple(side["basis_labels"]),
                          unnormalized=side.get("unnormalized", False))
    return Trajectory(data[1, 0] - data[0, 0], samples)
