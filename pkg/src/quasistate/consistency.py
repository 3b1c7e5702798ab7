"""Interpretation maps, induced quasi-processes and commutation checks.

An observer is consistent when interpreting its quasi-states and then
applying the information dynamics gives the same label as letting the
physics run and interpreting afterwards. All checks work on discrete
quasi-state identifiers, so floating-point weights are quantized first.

Conventions
-----------
* A Null window (``None``) never takes part in a transition, neither as
  source nor as target.
* ``info_dynamics`` maps a label to a label or to a set of allowed labels.
  A set is needed when the next label depends on data the observer does
  not hold, e.g. which pointer a measurement will report.
* The induced apparatus-observer correlation is not observable from either
  leg alone and is not checked; reports list it under ``untested``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .born import JointChain, PreparedSystem, build_chain, induced_quasi_state, recorded_pointer
from .channel import (IDLE, alice_criterion, alice_machine, decode, noise_machine, pointer_of,
                      run_channel, Message, Record, _sym)
from .config import DEFAULT, Thresholds
from .projection import QuasiState, q_general
from .trajectory import ConstantPure, Piecewise, Trajectory, Window, generate, windows

READY_LABEL = "[A,ready]"
UNTESTED = ("induced apparatus-observer correlation",)


class UnresolvedIdentifierError(KeyError):
    """A quasi-state identifier or label with no entry in a table."""


class WindowMisalignmentError(ValueError):
    """Apparatus and observer sequences do not cover the same windows."""


def record_label(content: str, sender: str = "A") -> str:
    return f"[{sender},{content}]"


def quasi_state_id(q: QuasiState | None, digits: int = DEFAULT.quantize_digits) -> str | None:
    """Canonical identifier: sorted indices with normalized weights rounded
    to ``digits`` decimals. ``None`` for a Null window."""
    if q is None:
        return None
    if isinstance(q, str):
        return q
    w = q.normalized_weights()
    parts = [f"{k}:{round(float(x), digits):.{digits}f}" for k, x in zip(q.indices, w)]
    return "q[" + ",".join(parts) + "]"


def _ids(seq: Sequence[QuasiState | str | None], digits: int) -> list[str | None]:
    return [quasi_state_id(q, digits) for q in seq]


# -- quasi-processes ---------------------------------------------------------


@dataclass(frozen=True)
class QuasiProcess:
    """Transition map observed between consecutive non-Null windows.

    ``transitions`` keeps the first successor seen for each source;
    ``conflicts`` lists every source that was later seen with a different
    successor, with all successors in order of appearance.
    """

    transitions: dict[str, str]
    conflicts: dict[str, tuple[str, ...]]
    observed: frozenset[str]
    derived_from: str = ""

    @property
    def deterministic(self) -> bool:
        return not self.conflicts


def induce_process(quasi_seq: Sequence[QuasiState | str | None],
                   digits: int = DEFAULT.quantize_digits, derived_from: str = "") -> QuasiProcess:
    """Build the apparent transition map of a quasi-state sequence.

    Entries may be quasi-states, precomputed identifiers or ``None``.
    """
    if len(quasi_seq) < 2:
        raise ValueError("need at least two windows to observe a transition")
    ids = _ids(quasi_seq, digits)
    trans: dict[str, str] = {}
    seen: dict[str, list[str]] = {}
    for a, b in zip(ids, ids[1:]):
        if a is None or b is None:
            continue
        if a not in trans:
            trans[a] = b
            seen[a] = [b]
        elif b not in seen[a]:
            seen[a].append(b)
    conflicts = {k: tuple(v) for k, v in seen.items() if len(v) > 1}
    observed = frozenset(i for i in ids if i is not None)
    return QuasiProcess(trans, conflicts, observed, derived_from)


# -- diagram instances -------------------------------------------------------


def _allowed(value) -> frozenset[str]:
    if isinstance(value, str):
        return frozenset([value])
    return frozenset(value)


@dataclass(frozen=True)
class DiagramInstance:
    """Observer quasi-states, their interpretation, and the information
    dynamics the observer believes in."""

    quasi_seq: tuple[QuasiState | str | None, ...]
    interpretation: Mapping[str, str]
    info_dynamics: Mapping[str, Any]
    digits: int = DEFAULT.quantize_digits

    def ids(self) -> list[str | None]:
        return _ids(self.quasi_seq, self.digits)

    def interpret(self, qid: str) -> str:
        try:
            return self.interpretation[qid]
        except KeyError:
            raise UnresolvedIdentifierError(f"no interpretation for {qid}") from None

    def allowed_next(self, label: str) -> frozenset[str]:
        try:
            return _allowed(self.info_dynamics[label])
        except KeyError:
            raise UnresolvedIdentifierError(f"no information dynamics for {label}") from None

    def labels(self) -> list[str | None]:
        return [None if i is None else self.interpret(i) for i in self.ids()]

    def digest(self) -> str:
        payload = {
            "ids": self.ids(),
            "interpretation": dict(sorted(self.interpretation.items())),
            "info_dynamics": {k: sorted(_allowed(v)) for k, v in sorted(self.info_dynamics.items())},
            "digits": self.digits,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_interpretation(self, key: str, label: str) -> "DiagramInstance":
        table = dict(self.interpretation)
        table[key] = label
        return replace(self, interpretation=table)

    def with_dynamics(self, key: str, value) -> "DiagramInstance":
        table = dict(self.info_dynamics)
        table[key] = value
        return replace(self, info_dynamics=table)


@dataclass(frozen=True)
class Violation:
    check: str
    windows: tuple[int, ...]
    expected: tuple[str, ...]
    found: str | None

    def to_json(self) -> dict[str, Any]:
        return {"check": self.check, "windows": list(self.windows),
                "expected": list(self.expected), "found": self.found}


@dataclass
class DiagramReport:
    violations: list[Violation]
    checked: int
    digest: str
    digits: int
    untested: tuple[str, ...] = ()

    @property
    def vacuous(self) -> bool:
        return self.checked == 0

    @property
    def consistent(self) -> bool:
        return not self.violations

    def windows_flagged(self) -> set[int]:
        return {w for v in self.violations for w in v.windows}

    def to_json(self) -> dict[str, Any]:
        return {
            "digest": self.digest,
            "quantize_digits": self.digits,
            "checked": self.checked,
            "vacuous": self.vacuous,
            "consistent": self.consistent,
            "violations": [v.to_json() for v in self.violations],
            "untested": list(self.untested),
        }


def _diagram1_violations(d: DiagramInstance) -> tuple[list[Violation], int]:
    labels = d.labels()
    # resolve every label up front so a broken table fails even without pairs
    for lab in labels:
        if lab is not None:
            d.allowed_next(lab)
    out, checked = [], 0
    for i, (a, b) in enumerate(zip(labels, labels[1:])):
        if a is None or b is None:
            continue
        checked += 1
        allowed = d.allowed_next(a)
        if b not in allowed:
            out.append(Violation("diagram1", (i, i + 1), tuple(sorted(allowed)), b))
    return out, checked


def check_diagram1(d: DiagramInstance) -> DiagramReport:
    """Compare information dynamics with the interpreted quasi-process on
    every consecutive pair of non-Null windows."""
    viol, checked = _diagram1_violations(d)
    return DiagramReport(viol, checked, d.digest(), d.digits)


@dataclass(frozen=True)
class Measurement:
    """A chain, the pointer quasi-states it induces per window, and the
    observer's diagram instance over the same windows.

    ``pointer_labels`` maps a pointer index to the label the observer
    should hold when the apparatus reports that pointer.
    """

    chain: JointChain | None
    apparatus_seq: tuple[QuasiState | None, ...]
    observer: DiagramInstance
    pointer_labels: Mapping[int, str]
    ready_label: str = READY_LABEL

    @classmethod
    def from_chain(cls, chain: JointChain, window_length: int, observer: DiagramInstance,
                   pointer_labels: Mapping[int, str], alpha_min: float = DEFAULT.alpha_min,
                   thresholds: Thresholds = DEFAULT, ready_label: str = READY_LABEL) -> "Measurement":
        wins = windows(chain.trajectory, window_length, thresholds.kappa)
        seq = tuple(induced_quasi_state(chain, w, alpha_min, thresholds) for w in wins)
        return cls(chain, seq, observer, pointer_labels, ready_label)


def _check_alignment(m: Measurement) -> None:
    obs = m.observer.quasi_seq
    if len(obs) != len(m.apparatus_seq):
        raise WindowMisalignmentError(
            f"apparatus covers {len(m.apparatus_seq)} windows, observer {len(obs)}")
    for i, (a, o) in enumerate(zip(m.apparatus_seq, obs)):
        wa = getattr(a, "window", None)
        wo = getattr(o, "window", None)
        if wa is not None and wo is not None and (wa.start, wa.length) != (wo.start, wo.length):
            raise WindowMisalignmentError(f"window {i}: apparatus {wa}, observer {wo}")


def check_diagram2(m: Measurement) -> DiagramReport:
    """Check a measurement's observable legs.

    (a) every observed ready-to-pointer record transition is allowed by the
        information dynamics;
    (b) in every window where the apparatus reports a pointer, the observer
        holds that pointer's label;
    (c) the observer leg satisfies the single-observer check.

    Windows where the apparatus quasi-state is Null assert nothing in (b).
    """
    _check_alignment(m)
    obs = m.observer
    labels = obs.labels()
    pointer_set = set(m.pointer_labels.values()) - {m.ready_label}
    viol: list[Violation] = []
    checked = 0
    for i, (a, b) in enumerate(zip(labels, labels[1:])):
        if a == m.ready_label and b in pointer_set:
            checked += 1
            allowed = obs.allowed_next(a)
            if b not in allowed:
                viol.append(Violation("a", (i, i + 1), tuple(sorted(allowed)), b))
    for i, (q, lab) in enumerate(zip(m.apparatus_seq, labels)):
        ptr = recorded_pointer(q)
        if ptr is None:
            continue
        checked += 1
        expected = m.pointer_labels.get(ptr)
        if expected is None:
            raise UnresolvedIdentifierError(f"no label for pointer {ptr}")
        if lab != expected:
            viol.append(Violation("b", (i,), (expected,), lab))
    v1, c1 = _diagram1_violations(obs)
    viol += [replace(v, check="c") for v in v1]
    checked += c1
    return DiagramReport(viol, checked, obs.digest(), obs.digits, UNTESTED)


# -- fault injection ---------------------------------------------------------


@dataclass(frozen=True)
class Fault:
    """One corrupted table entry and the instance carrying it."""

    table: str
    key: str
    value: Any
    instance: DiagramInstance

    def touches(self, d: DiagramInstance, window: int) -> bool:
        """Whether ``window`` passes through the corrupted entry."""
        qid = d.ids()[window]
        if qid is None:
            return False
        if self.table == "interpretation":
            return qid == self.key
        return d.interpret(qid) == self.key


def single_entry_faults(d: DiagramInstance, labels: Sequence[str] | None = None) -> Iterator[Fault]:
    """Every corruption of one table entry into another label.

    Interpretation entries take each other label. Information-dynamics
    entries are replaced by each singleton outside the allowed set and by
    the allowed set with one member dropped.
    """
    if labels is None:
        labels = sorted(set(d.interpretation.values()))
    for key in sorted(d.interpretation):
        for lab in labels:
            if lab != d.interpretation[key]:
                yield Fault("interpretation", key, lab, d.with_interpretation(key, lab))
    for key in sorted(d.info_dynamics):
        allowed = _allowed(d.info_dynamics[key])
        for lab in labels:
            if lab not in allowed:
                yield Fault("info_dynamics", key, lab, d.with_dynamics(key, lab))
        if len(allowed) > 1:
            for lab in sorted(allowed):
                rest = frozenset(allowed - {lab})
                yield Fault("info_dynamics", key, rest, d.with_dynamics(key, rest))


# -- end-to-end scenario -----------------------------------------------------


@dataclass
class Scenario:
    chain: JointChain
    apparatus_pointers: list[int | None]
    stream: list[Message]
    records: list[Record]
    observer_trajectory: Trajectory
    measurement: Measurement


def _pure_schedule(states: Sequence[int], length: int) -> Piecewise:
    return Piecewise(tuple((i * length, ConstantPure(int(k))) for i, k in enumerate(states)))


def end_to_end_measurement(n_windows: int = 40, n_pointers: int = 3, window_length: int = 10,
                           n_noise: int = 3, seed: int = 0,
                           probabilities: Sequence[float] | None = None,
                           alpha_min: float = DEFAULT.alpha_min,
                           thresholds: Thresholds = DEFAULT) -> Scenario:
    """Chain, channel and observer wired together so the diagrams commute.

    Sector 0 is the ready sector (pointer 0) and sector ``n`` the outcome
    with pointer ``n``. Even windows sit in the ready sector; each odd
    window sits in an outcome drawn from ``probabilities``. The apparatus
    reports through the channel among ``n_noise`` other senders; the
    observer decodes the stream and its state follows the decoded records,
    one basis state per label.
    """
    rng = np.random.default_rng(seed)
    if probabilities is None:
        probabilities = np.full(n_pointers, 1.0 / n_pointers)
    outcomes = rng.choice(np.arange(1, n_pointers + 1), size=n_windows, p=probabilities)
    sectors = [0 if i % 2 == 0 else int(outcomes[i]) for i in range(n_windows)]
    steps = n_windows * window_length
    prep = PreparedSystem.from_powers([1.0] + [0.0] * n_pointers)
    chain = build_chain(prep, list(range(n_pointers + 1)), _pure_schedule(sectors, window_length),
                        steps=steps, dt=1.0, seed=seed)
    wins = windows(chain.trajectory, window_length, thresholds.kappa)
    app_seq = tuple(induced_quasi_state(chain, w, alpha_min, thresholds) for w in wins)
    pointers = [recorded_pointer(q) for q in app_seq]

    # the apparatus speaks once per window
    tape = [IDLE if not p else _sym(p) for p in pointers]
    noise = [noise_machine(5, int(s), mimic=(j == 0))
             for j, s in enumerate(rng.integers(2**31, size=n_noise))]
    stream = run_channel(alice_machine(n_pointers), noise, n_windows, seed=seed, alice_inputs=tape)
    records = decode(stream, alice_criterion(n_pointers=n_pointers))

    by_time = {r.time: r.content for r in records}
    obs_state = [pointer_of(by_time[t]) or 0 for t in range(n_windows)]
    obs_traj = generate(_pure_schedule(obs_state, window_length), n_pointers + 1, steps, 1.0, seed)
    obs_seq = tuple(q_general(obs_traj, window_length, alpha_min, thresholds))

    pointer_labels = {0: READY_LABEL}
    pointer_labels.update({n: record_label(f"P{n}") for n in range(1, n_pointers + 1)})
    interp = {}
    for k, lab in pointer_labels.items():
        pure = generate(ConstantPure(k), n_pointers + 1, window_length, 1.0)
        q = q_general(pure, window_length, alpha_min, thresholds)[0]
        interp[quasi_state_id(q, thresholds.quantize_digits)] = lab
    dyn: dict[str, Any] = {READY_LABEL: frozenset(pointer_labels[n] for n in range(1, n_pointers + 1))}
    dyn.update({pointer_labels[n]: READY_LABEL for n in range(1, n_pointers + 1)})
    observer = DiagramInstance(obs_seq, interp, dyn, thresholds.quantize_digits)
    meas = Measurement(chain, app_seq, observer, pointer_labels)
    return Scenario(chain, pointers, stream, records, obs_traj, meas)
