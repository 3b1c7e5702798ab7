"""Batch front-end: one JSON config in, files plus a manifest out.

Usage::

    python -m quasistate <generate|project|born|comm|consistency>
        [--config cfg.json] [--seed N] [--out DIR] [--threads N]

Every run writes ``config.json`` (the fully resolved configuration) and
``manifest.json`` (config digest, output files with sha256, wall-clock)
into the output directory.

Exit codes: 0 success, 2 invalid configuration or input, 3 file-system
error, 4 consistency violations found.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import born, channel, consistency
from .config import Thresholds
from .projection import q_general, q_single, spin_array_quasi_state, write_quasi_states
from .trajectory import (Trajectory, generate, load_trajectory, save_trajectory, spin_array,
                         windows)

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_VIOLATIONS = 0, 2, 3, 4


class Violations(Exception):
    """Raised by a subcommand that completed but found inconsistencies."""


DEFAULTS: dict[str, dict[str, Any]] = {
    "generate": {
        "preset": None,
        "generator": {"kind": "constant-pure", "k": 0},
        "dim": 2,
        "steps": 1000,
        "dt": 1.0,
        "M": 8,
        "n_pure": 3,
        "regime": "mixed",
        "tilt": 0.05,
    },
    "project": {
        "input": None,
        "generator": None,
        "dim": 2,
        "steps": 1000,
        "dt": 1.0,
        "window_length": 100,
        "projection": "maximal",
    },
    "born": {
        "powers": [0.5, 0.5],
        "pointer_map": None,
        "trials": 10000,
        "step_budget": 10000,
        "window": 100,
        "resolution": 16,
        "exclude_null": False,
    },
    "comm": {
        "replay": None,
        "ticks": 1000,
        "n_pointers": 3,
        "noise_sources": 3,
        "noise_states": 5,
        "mimic": True,
        "interaction_rate": 0.3,
    },
    "consistency": {
        "n_windows": 40,
        "n_pointers": 3,
        "window_length": 10,
        "n_noise": 3,
        "fault": None,
    },
}

PRESETS = {"spin-array": {"M": 8, "n_pure": 3, "regime": "mixed", "steps": 10000, "dt": 1.0}}


@dataclass
class ExperimentConfig:
    """Resolved parameters of one run."""

    command: str
    params: dict[str, Any]
    thresholds: Thresholds = field(default_factory=Thresholds)
    seed: int = 0
    threads: int = 1

    def to_dict(self) -> dict[str, Any]:
        return {"command": self.command, "params": self.params,
                "thresholds": self.thresholds.to_dict(), "seed": self.seed,
                "threads": self.threads}

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def resolve_config(command: str, raw: dict[str, Any] | None = None, seed: int | None = None,
                   threads: int | None = None) -> ExperimentConfig:
    """Merge a user config over the command's defaults and validate keys."""
    raw = dict(raw or {})
    params = dict(DEFAULTS[command])
    thresholds = Thresholds.from_dict(raw.pop("thresholds", None))
    cfg_seed = int(raw.pop("seed", 0))
    cfg_threads = int(raw.pop("threads", 1))
    raw.pop("command", None)
    user = raw.pop("params", {})
    user.update(raw)
    preset = user.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}")
        params.update(PRESETS[preset])
    unknown = set(user) - set(params)
    if unknown:
        raise ValueError(f"unknown {command} parameters: {sorted(unknown)}")
    params.update(user)
    seed = cfg_seed if seed is None else seed
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    threads = cfg_threads if threads is None else threads
    if threads < 1:
        raise ValueError("threads must be at least 1")
    return ExperimentConfig(command, params, thresholds, seed, threads)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, data: Any) -> Path:
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
    return path


# -- subcommands -------------------------------------------------------------


def cmd_generate(cfg: ExperimentConfig, out: Path) -> list[Path]:
    p = cfg.params
    if p["preset"] == "spin-array":
        spins = spin_array(p["regime"], int(p["M"]), int(p["steps"]), float(p["dt"]), cfg.seed,
                           n_pure=int(p["n_pure"]), tilt=float(p["tilt"]))
        return [save_trajectory(s, out / f"spin_{i}.csv") for i, s in enumerate(spins)]
    traj = generate(p["generator"], int(p["dim"]), int(p["steps"]), float(p["dt"]), cfg.seed)
    return [save_trajectory(traj, out / "trajectory.csv")]


def _project_inputs(cfg: ExperimentConfig) -> list[Trajectory]:
    p = cfg.params
    if p["input"] is not None:
        paths = p["input"] if isinstance(p["input"], list) else [p["input"]]
        return [load_trajectory(x) for x in paths]
    if p["generator"] is None:
        raise ValueError("project needs either 'input' or 'generator'")
    return [generate(p["generator"], int(p["dim"]), int(p["steps"]), float(p["dt"]), cfg.seed)]


def cmd_project(cfg: ExperimentConfig, out: Path) -> list[Path]:
    p, th = cfg.params, cfg.thresholds
    trajs = _project_inputs(cfg)
    length = int(p["window_length"])
    wins = windows(trajs[0], length, th.kappa)
    if len(trajs) > 1:
        seq = [spin_array_quasi_state(trajs, w, th.alpha_min, th) for w in wins]
    elif p["projection"] == "single":
        seq = [q_single(trajs[0], w, th.theta) for w in wins]
    elif p["projection"] == "maximal":
        seq = q_general(trajs[0], length, th.alpha_min, th)
    else:
        raise ValueError(f"unknown projection {p['projection']!r}")
    path = write_quasi_states(seq, out / "quasi_states.csv", wins, th, th.alpha_min)
    return [path, path.with_name(path.stem + ".config.json")]


def cmd_born(cfg: ExperimentConfig, out: Path) -> list[Path]:
    p, th = cfg.params, cfg.thresholds
    prep = born.PreparedSystem.from_powers(p["powers"])
    pm = p["pointer_map"] if p["pointer_map"] is not None else list(range(len(p["powers"])))
    res = born.monte_carlo(prep, pm, int(p["trials"]), cfg.seed, alpha_min=th.alpha_min,
                           step_budget=int(p["step_budget"]), window=int(p["window"]),
                           resolution=int(p["resolution"]), exclude_null=bool(p["exclude_null"]),
                           threads=cfg.threads, thresholds=th)
    path = out / "born_report.json"
    path.write_text(born.born_report_json(res))
    return [path]


def cmd_comm(cfg: ExperimentConfig, out: Path) -> list[Path]:
    p = cfg.params
    n_ptr = int(p["n_pointers"])
    if p["replay"] is not None:
        stream = channel.read_transcript(p["replay"])
    else:
        rng = np.random.default_rng(cfg.seed)
        seeds = rng.integers(2**31, size=int(p["noise_sources"]))
        noise = [channel.noise_machine(int(p["noise_states"]), int(s), mimic=bool(p["mimic"]) and j == 0)
                 for j, s in enumerate(seeds)]
        stream = channel.run_channel(channel.alice_machine(n_ptr), noise, int(p["ticks"]), cfg.seed,
                                     interaction_rate=float(p["interaction_rate"]))
    records = channel.decode(stream, channel.alice_criterion(n_pointers=n_ptr))
    hist = channel.histogram(records, n_ptr + 1)
    return [channel.write_transcript(stream, out / "transcript.jsonl"),
            channel.write_records(records, out / "records.csv"),
            channel.write_histogram(hist, out / "histogram.csv")]


def cmd_consistency(cfg: ExperimentConfig, out: Path) -> list[Path]:
    p, th = cfg.params, cfg.thresholds
    sc = consistency.end_to_end_measurement(int(p["n_windows"]), int(p["n_pointers"]),
                                            int(p["window_length"]), int(p["n_noise"]), cfg.seed,
                                            alpha_min=th.alpha_min, thresholds=th)
    meas = sc.measurement
    fault = p["fault"]
    if fault is not None:
        obs = meas.observer
        if fault["table"] == "interpretation":
            obs = obs.with_interpretation(fault["key"], fault["value"])
        elif fault["table"] == "info_dynamics":
            obs = obs.with_dynamics(fault["key"], fault["value"])
        else:
            raise ValueError(f"unknown fault table {fault['table']!r}")
        meas = consistency.replace(meas, observer=obs)
    r1 = consistency.check_diagram1(meas.observer)
    r2 = consistency.check_diagram2(meas)
    path = _write_json(out / "consistency_report.json",
                       {"diagram1": r1.to_json(), "diagram2": r2.to_json()})
    if not (r1.consistent and r2.consistent):
        raise Violations(path)
    return [path]


COMMANDS: dict[str, Callable[[ExperimentConfig, Path], list[Path]]] = {
    "generate": cmd_generate,
    "project": cmd_project,
    "born": cmd_born,
    "comm": cmd_comm,
    "consistency": cmd_consistency,
}


def run(cfg: ExperimentConfig, out: Path) -> tuple[list[Path], bool]:
    """Execute one subcommand and write config and manifest.

    Returns the output files and whether violations were found.
    """
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    violated = False
    try:
        files = COMMANDS[cfg.command](cfg, out)
    except Violations as exc:
        files, violated = [exc.args[0]], True
    elapsed = time.perf_counter() - t0
    cfg_path = _write_json(out / "config.json", cfg.to_dict())
    inputs = []
    for key in ("input", "replay"):
        val = cfg.params.get(key)
        if val:
            inputs += val if isinstance(val, list) else [val]
    manifest = {
        "config_digest": cfg.digest(),
        "inputs": [{"path": str(x), "sha256": _sha256(Path(x))} for x in inputs],
        "outputs": [{"path": f.name, "sha256": _sha256(f)} for f in [cfg_path] + files],
        "wall_clock_s": round(elapsed, 6),
        "violations": violated,
    }
    _write_json(out / "manifest.json", manifest)
    return files, violated


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quasistate", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON config file")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--threads", type=int, help="worker threads where supported")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = json.loads(args.config.read_text()) if args.config else {}
        cfg = resolve_config(args.command, raw, args.seed, args.threads)
        files, violated = run(cfg, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for f in files:
        print(f)
    if violated:
        print("consistency violations found", file=sys.stderr)
        return EXIT_VIOLATIONS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
