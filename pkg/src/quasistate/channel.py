"""Measurement as message passing between an apparatus and an observer.

The apparatus ("Alice") and any number of unrelated senders write messages
into a shared stream. The observer ("Bob") turns the stream into records
``[sender, content, time]`` using a criterion he must hold in advance.

Message framing
---------------
Words are strings over the 16 hex symbols ``0-9a-f``. A message body is a
word list; on the wire it is framed as ``<n>.`` followed by each word
prefixed by its length, both as one hex digit.

Alice's bodies are four one-symbol words ``[tag, kind, value, check]``
where ``kind`` is ``5`` (status) or ``9`` (pointer) and ``check`` is the sum
of the other three symbols modulo 16. The language of a sender is its tag
plus this checksum. Replacing any single word of a valid body changes the
symbol sum by a non-multiple of 16, so it is either rejected (the tag no
longer matches) or raises :class:`MalformedMessageError`; it never decodes
to a different record. The bound on silent mis-decoding under one-word
corruption is therefore :data:`SILENT_CORRUPTION_BOUND` = 0.
"""
from __future__ import annotations

import csv
import json
import re
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, Sequence

import numpy as np

ALPHABET = "0123456789abcdef"
ALICE_TAG = "a"
STATUS_KIND = "5"
POINTER_KIND = "9"
STATUS_NAMES = ("ready", "busy")
IDLE = "-"
SILENT_CORRUPTION_BOUND = 0.0


class ChannelError(ValueError):
    """Misconfigured channel or a sender breaking its rules."""


class MalformedMessageError(ValueError):
    """A body that claims Alice's language but fails to decode."""


def _sym(x: int) -> str:
    return ALPHABET[x % 16]


def checksum(words: Sequence[str]) -> str:
    return _sym(sum(ALPHABET.index(c) for w in words for c in w))


def encode_body(tag: str, kind: str, value: int) -> tuple[str, ...]:
    if not 0 <= value < 16:
        raise ChannelError(f"value {value} does not fit one symbol")
    head = (tag, kind, _sym(value))
    return head + (checksum(head),)


def frame(words: Sequence[str]) -> str:
    """Length-prefixed wire form of a word list."""
    if len(words) > 15:
        raise ChannelError("at most 15 words per message")
    parts = [f"{len(words):x}."]
    for w in words:
        if not 0 < len(w) <= 15 or any(c not in ALPHABET for c in w):
            raise ChannelError(f"invalid word {w!r}")
        parts.append(f"{len(w):x}{w}")
    return "".join(parts)


def unframe(text: str) -> tuple[str, ...]:
    count_txt, _, rest = text.partition(".")
    count = int(count_txt, 16)
    words, pos = [], 0
    for _ in range(count):
        n = int(rest[pos], 16)
        words.append(rest[pos + 1:pos + 1 + n])
        pos += 1 + n
    if pos != len(rest):
        raise ChannelError(f"trailing data in frame {text!r}")
    return tuple(words)


@dataclass(frozen=True)
class Message:
    """One message in the shared stream.

    ``sender_tag`` and ``kind`` are simulator bookkeeping; a decoder only
    ever sees ``body`` and ``emit_time``.
    """

    sender_tag: str
    body: tuple[str, ...]
    kind: str
    emit_time: int
    value: int | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "sender_tag": self.sender_tag,
            "body": frame(self.body),
            "kind": self.kind,
            "emit_time": self.emit_time,
            "value": self.value,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Message":
        return cls(data["sender_tag"], unframe(data["body"]), data["kind"],
                   int(data["emit_time"]), data.get("value"))


@dataclass(frozen=True)
class Record:
    """Bob's entry ``[sender, content, time]``."""

    sender: str
    content: str
    time: int


@dataclass(frozen=True)
class MooreMachine:
    """Deterministic finite automaton whose output depends on the state only."""

    states: tuple[Hashable, ...]
    inputs: tuple[Hashable, ...]
    transition: Mapping[tuple[Hashable, Hashable], Hashable]
    output: Mapping[Hashable, Any]
    initial: Hashable

    def __post_init__(self):
        states = set(self.states)
        if self.initial not in states:
            raise ChannelError(f"initial state {self.initial!r} not among states")
        for s in self.states:
            if s not in self.output:
                raise ChannelError(f"no output for state {s!r}")
            for a in self.inputs:
                nxt = self.transition.get((s, a), None)
                if nxt is None or nxt not in states:
                    raise ChannelError(f"transition from {s!r} on {a!r} is missing or invalid")

    def step(self, state, symbol):
        return self.transition[(state, symbol)]

    def run(self, inputs: Iterable) -> list:
        """Outputs of the initial state and of every state reached."""
        state = self.initial
        outs = [self.output[state]]
        for a in inputs:
            state = self.step(state, a)
            outs.append(self.output[state])
        return outs


def identification_experiment(pair: tuple[MooreMachine, MooreMachine], depth: int
                              ) -> tuple | None:
    """Shortest input of length at most ``depth`` on which the two machines
    produce different output sequences, or ``None``.

    Breadth-first over pairs of states; among inputs of minimal length the
    one first in input-alphabet order is returned.
    """
    a, b = pair
    if set(a.inputs) != set(b.inputs):
        raise ChannelError("machines must share an input alphabet")
    symbols = list(a.inputs)
    start = (a.initial, b.initial)
    if a.output[start[0]] != b.output[start[1]]:
        return ()
    seen = {start}
    frontier = deque([(start, ())])
    while frontier:
        (sa, sb), word = frontier.popleft()
        if len(word) >= depth:
            continue
        for sym in symbols:
            na, nb = a.step(sa, sym), b.step(sb, sym)
            nxt = word + (sym,)
            if a.output[na] != b.output[nb]:
                return nxt
            if (na, nb) not in seen:
                seen.add((na, nb))
                frontier.append(((na, nb), nxt))
    return None


def delayed_divergence_pair(agree_depth: int, inputs: Sequence = (0, 1)
                            ) -> tuple[MooreMachine, MooreMachine]:
    """Two machines whose outputs agree on every input of length
    ``<= agree_depth`` and differ on every input one symbol longer."""
    n = agree_depth + 2
    states = tuple(range(n))
    trans = {(s, x): min(s + 1, n - 1) for s in states for x in inputs}
    out_a = {s: 0 for s in states}
    out_b = {s: (1 if s == n - 1 else 0) for s in states}
    return (MooreMachine(states, tuple(inputs), trans, out_a, 0),
            MooreMachine(states, tuple(inputs), trans, out_b, 0))


# -- senders -----------------------------------------------------------------


def alice_machine(n_pointers: int) -> MooreMachine:
    """Apparatus that reports ``ready`` while idle and pointer ``i`` on the
    tick an interaction yields ``i``.

    Inputs are :data:`IDLE` or the pointer value as a one-symbol string.
    """
    if not 1 <= n_pointers <= 15:
        raise ChannelError("n_pointers must lie in [1, 15]")
    inputs = (IDLE,) + tuple(_sym(i) for i in range(1, n_pointers + 1))
    states = ("ready",) + tuple(f"P{i}" for i in range(1, n_pointers + 1))
    trans = {}
    for s in states:
        trans[(s, IDLE)] = "ready"
        for i in range(1, n_pointers + 1):
            trans[(s, _sym(i))] = f"P{i}"
    out = {"ready": ("status", 0)}
    out.update({f"P{i}": ("pointer", i) for i in range(1, n_pointers + 1)})
    return MooreMachine(states, inputs, trans, out, "ready")


def noise_machine(n_states: int, seed: int, mimic: bool = False) -> MooreMachine:
    """Random sender. Outputs are ``None`` (silent), a content pair in
    Alice's format, or a garbage word list. With ``mimic`` every output
    copies content Alice could send."""
    rng = np.random.default_rng(seed)
    states = tuple(range(n_states))
    inputs = ("0", "1")
    trans = {(s, x): int(rng.integers(n_states)) for s in states for x in inputs}
    out = {}
    for s in states:
        roll = rng.random()
        if mimic or roll < 0.5:
            if rng.random() < 0.5:
                out[s] = ("status", 0)
            else:
                out[s] = ("pointer", int(rng.integers(1, 4)))
        elif roll < 0.8:
            words = tuple("".join(rng.choice(list(ALPHABET), size=int(rng.integers(1, 4))))
                          for _ in range(int(rng.integers(1, 6))))
            out[s] = ("raw", words)
        else:
            out[s] = None
    return MooreMachine(states, inputs, trans, out, 0)


def _body_for(tag: str, out) -> tuple[str, ...]:
    kind, payload = out
    if kind == "status":
        return encode_body(tag, STATUS_KIND, payload)
    if kind == "pointer":
        return encode_body(tag, POINTER_KIND, payload)
    if kind == "raw":
        return (tag,) + tuple(payload)
    raise ChannelError(f"unknown output kind {kind!r}")


def draw_interactions(ticks: int, n_pointers: int, rate: float, seed: int) -> list[str]:
    """Alice's input tape: :data:`IDLE`, or a pointer symbol on the ticks an
    interaction happens (probability ``rate`` per tick)."""
    rng = np.random.default_rng(seed)
    hit = rng.random(ticks) < rate
    values = rng.integers(1, n_pointers + 1, size=ticks)
    return [(_sym(v) if h else IDLE) for h, v in zip(hit, values)]


def run_channel(alice: MooreMachine, noise_sources: Sequence[MooreMachine], ticks: int,
                seed: int = 0, alice_inputs: Sequence[str] | None = None,
                alice_tag: str = ALICE_TAG, noise_tags: Sequence[str] | None = None,
                interaction_rate: float = 0.3) -> list[Message]:
    """Interleave Alice's messages with those of the other senders.

    Each tick every sender consumes one input and emits its Moore output.
    The emission order within a tick is round-robin, rotated by the tick
    number plus a seeded jitter. Alice's machine is checked against her
    rules: only status or pointer content, and a pointer exactly on ticks
    whose input is an interaction.
    """
    if ticks < 1:
        raise ChannelError("ticks must be at least 1")
    if noise_tags is None:
        noise_tags = [t for t in ALPHABET if t != alice_tag][: len(noise_sources)]
    if len(noise_tags) != len(noise_sources):
        raise ChannelError("one tag per noise source is required")
    if alice_tag in noise_tags:
        raise ChannelError("noise sources must not use Alice's tag")
    rng = np.random.default_rng(seed)
    if alice_inputs is None:
        n_ptr = len(alice.inputs) - 1
        alice_inputs = draw_interactions(ticks, n_ptr, interaction_rate,
                                         int(rng.integers(2**63)))
    if len(alice_inputs) < ticks:
        raise ChannelError("alice_inputs shorter than the number of ticks")

    a_state = alice.initial
    n_states = [m.initial for m in noise_sources]
    stream: list[Message] = []
    n_src = 1 + len(noise_sources)
    for t in range(ticks):
        batch: list[Message | None] = []
        sym = alice_inputs[t]
        a_state = alice.step(a_state, sym)
        out = alice.output[a_state]
        if out is None or out[0] not in ("status", "pointer"):
            raise ChannelError(f"Alice emitted {out!r} at tick {t}")
        if (out[0] == "pointer") != (sym != IDLE):
            raise ChannelError(f"Alice's pointer output at tick {t} does not match her input")
        batch.append(Message(alice_tag, _body_for(alice_tag, out), out[0], t, out[1]))
        for i, m in enumerate(noise_sources):
            n_states[i] = m.step(n_states[i], m.inputs[int(rng.integers(len(m.inputs)))])
            nout = m.output[n_states[i]]
            if nout is None:
                batch.append(None)
            else:
                batch.append(Message(noise_tags[i], _body_for(noise_tags[i], nout), "noise", t))
        shift = (t + int(rng.integers(n_src))) % n_src
        for msg in batch[shift:] + batch[:shift]:
            if msg is not None:
                stream.append(msg)
    return stream


# -- decoding ----------------------------------------------------------------


@dataclass(frozen=True)
class Criterion:
    """Bob's prior knowledge: which bodies belong to Alice's language and
    how to read them."""

    recognizer: Callable[[Sequence[str]], bool]
    decoder: Callable[[Sequence[str]], str]
    sender_name: str = "A"


def decode_alice_body(body: Sequence[str], n_pointers: int = 15) -> str:
    if len(body) != 4 or any(len(w) != 1 or w not in ALPHABET for w in body):
        raise MalformedMessageError(f"bad framing: {list(body)}")
    tag, kind, value, check = body
    if checksum(body[:3]) != check:
        raise MalformedMessageError(f"checksum mismatch in {list(body)}")
    v = ALPHABET.index(value)
    if kind == STATUS_KIND:
        if v >= len(STATUS_NAMES):
            raise MalformedMessageError(f"unknown status {v}")
        return STATUS_NAMES[v]
    if kind == POINTER_KIND:
        if not 1 <= v <= n_pointers:
            raise MalformedMessageError(f"pointer {v} out of range")
        return f"P{v}"
    raise MalformedMessageError(f"unknown kind {kind!r}")


def alice_criterion(tag: str = ALICE_TAG, n_pointers: int = 15, sender_name: str = "A") -> Criterion:
    return Criterion(
        recognizer=lambda body: len(body) > 0 and body[0] == tag,
        decoder=lambda body: decode_alice_body(body, n_pointers),
        sender_name=sender_name,
    )


def decode(stream: Iterable[Message], crit: Criterion) -> list[Record]:
    """Records for the messages ``crit`` recognizes, in stream order.

    Raises :class:`MalformedMessageError` when a recognized body fails to
    decode.
    """
    out = []
    for msg in stream:
        if crit.recognizer(msg.body):
            out.append(Record(crit.sender_name, crit.decoder(msg.body), msg.emit_time))
    return out


_POINTER_RE = re.compile(r"P(\d+)$")


def pointer_of(content: str) -> int | None:
    m = _POINTER_RE.match(content)
    return int(m.group(1)) if m else None


def histogram(records: Iterable[Record], pointer_count: int) -> dict[int, list[int]]:
    """Arrival times of each pointer value, ``0 .. pointer_count-1``.

    Status records are skipped. The number of entries equals the number of
    pointer records.
    """
    hist: dict[int, list[int]] = {i: [] for i in range(pointer_count)}
    for rec in records:
        p = pointer_of(rec.content)
        if p is None:
            continue
        if not 0 <= p < pointer_count:
            raise ValueError(f"pointer value {p} out of range for {pointer_count} pointers")
        hist[p].append(rec.time)
    return hist


def single_word_corruptions(body: Sequence[str]) -> Iterator[tuple[int, tuple[str, ...]]]:
    """Every body differing from ``body`` in exactly one one-symbol word."""
    for pos, word in enumerate(body):
        for sym in ALPHABET:
            if sym != word:
                yield pos, tuple(body[:pos]) + (sym,) + tuple(body[pos + 1:])


def all_alice_bodies(n_pointers: int = 15, tag: str = ALICE_TAG) -> list[tuple[str, ...]]:
    bodies = [encode_body(tag, STATUS_KIND, v) for v in range(len(STATUS_NAMES))]
    bodies += [encode_body(tag, POINTER_KIND, i) for i in range(1, n_pointers + 1)]
    return bodies


# -- files -------------------------------------------------------------------


def dump_transcript_line(msg: Message) -> str:
    return json.dumps(msg.to_json(), sort_keys=True, separators=(",", ":"))


def write_transcript(stream: Iterable[Message], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        for msg in stream:
            fh.write(dump_transcript_line(msg) + "\n")
    return path


def read_transcript(path: str | Path) -> list[Message]:
    with Path(path).open() as fh:
        return [Message.from_json(json.loads(line)) for line in fh if line.strip()]


def write_records(records: Iterable[Record], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["sender", "content", "time"])
        for r in records:
            out.writerow([r.sender, r.content, r.time])
    return path


def write_histogram(hist: Mapping[int, Sequence[int]], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["pointer", "count", "times"])
        for p in sorted(hist):
            out.writerow([p, len(hist[p]), " ".join(map(str, hist[p]))])
    return path
