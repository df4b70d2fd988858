"""File formats: array text files, measure JSON, trajectory JSONL, edge lists.

Array files carry a header line ``m k flags`` (k = 0 means unit interval,
flags a comma-separated subset of {sym, zdiag} or ``-`` for none) followed by
m whitespace-separated rows.  All indices in files are 0-based.  Writers emit
canonical, sorted output so identical inputs always produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .arrays import Alphabet, EmpiricalMeasure, FiniteArray
from .errors import ConfigError

_FLAG_NAMES = {"sym": "symmetric", "zdiag": "zero_diagonal"}


def _format_entry(v: Any, alphabet: Alphabet) -> str:
    return str(int(v)) if alphabet.is_finite else repr(float(v))


def dump_array(y: FiniteArray) -> str:
    flags = ",".join(s for s, attr in _FLAG_NAMES.items() if getattr(y, attr)) or "-"
    k = y.alphabet.size if y.alphabet.is_finite else 0
    lines = [f"{y.side} {k} {flags}"]
    for row in y.values:
        lines.append(" ".join(_format_entry(v, y.alphabet) for v in row))
    return "\n".join(lines) + "\n"


def parse_array(text: str) -> FiniteArray:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ConfigError("empty array file")
    header = lines[0].split()
    if len(header) not in (2, 3):
        raise ConfigError(f"array header must be 'm k flags', got {lines[0]!r}")
    try:
        m, k = int(header[0]), int(header[1])
    except ValueError as exc:
        raise ConfigError(f"bad array header {lines[0]!r}") from exc
    flags = header[2] if len(header) == 3 else "-"
    kwargs = {"symmetric": False, "zero_diagonal": False}
    if flags != "-":
        for token in flags.split(","):
            if token not in _FLAG_NAMES:
                raise ConfigError(f"unknown array flag {token!r}")
            kwargs[_FLAG_NAMES[token]] = True
    if len(lines) != m + 1:
        raise ConfigError(f"expected {m} rows, found {len(lines) - 1}")
    alphabet = Alphabet.unit_interval() if k == 0 else Alphabet.finite(k)
    rows = [line.split() for line in lines[1:]]
    try:
        if k == 0:
            values = np.array([[float(tok) for tok in row] for row in rows], dtype=np.float64)
        else:
            values = np.array([[int(tok) for tok in row] for row in rows], dtype=np.int64)
    except ValueError as exc:
        raise ConfigError(f"bad array row: {exc}") from exc
    if values.ndim != 2 or values.shape != (m, m):
        raise ConfigError(f"expected an {m}x{m} array, got shape {values.shape}")
    try:
        return FiniteArray(values, alphabet, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def save_array(y: FiniteArray, path: str | Path) -> None:
    Path(path).write_text(dump_array(y))


def load_array(path: str | Path) -> FiniteArray:
    return parse_array(Path(path).read_text())


def alphabet_to_json(alphabet: Alphabet) -> dict:
    if alphabet.is_finite:
        return {"kind": "finite", "size": alphabet.size}
    return {"kind": "unit_interval"}


def alphabet_from_json(obj: Any) -> Alphabet:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"bad alphabet object: {obj!r}")
    if obj["kind"] == "finite":
        return Alphabet.finite(int(obj["size"]))
    if obj["kind"] == "unit_interval":
        return Alphabet.unit_interval()
    raise ConfigError(f"unknown alphabet kind {obj['kind']!r}")


def measure_to_json(mu: EmpiricalMeasure) -> dict:
    atoms = sorted(
        ((p.values.tolist(), float(w)) for p, w in mu.weights.items()),
        key=lambda item: item[0],
    )
    return {
        "n": mu.n,
        "alphabet": alphabet_to_json(mu.alphabet),
        "atoms": [{"pattern": pattern, "weight": weight} for pattern, weight in atoms],
    }


def measure_from_json(obj: Any) -> EmpiricalMeasure:
    try:
        alphabet = alphabet_from_json(obj["alphabet"])
        n = int(obj["n"])
        weights = {
            FiniteArray(np.array(atom["pattern"]), alphabet): float(atom["weight"])
            for atom in obj["atoms"]
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad measure object: {exc}") from exc
    return EmpiricalMeasure(n, alphabet, weights)


def save_measure(mu: EmpiricalMeasure, path: str | Path) -> None:
    Path(path).write_text(json.dumps(measure_to_json(mu), sort_keys=True) + "\n")


def load_measure(path: str | Path) -> EmpiricalMeasure:
    return measure_from_json(json.loads(Path(path).read_text()))


def load_edge_list(path: str | Path) -> tuple[int, list[tuple[int, int]]]:
    """Read one `u v` pair per line (0-based); vertex count is max index + 1."""
    edges: list[tuple[int, int]] = []
    top = -1
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"{path}:{lineno}: expected 'u v', got {line!r}")
        u, v = int(parts[0]), int(parts[1])
        if u < 0 or v < 0 or u == v:
            raise ConfigError(f"{path}:{lineno}: bad edge ({u}, {v})")
        edges.append((u, v))
        top = max(top, u, v)
    if top < 0:
        raise ConfigError(f"{path}: no edges")
    return top + 1, edges


def _state_to_json(y: FiniteArray) -> dict:
    flags = [s for s, attr in _FLAG_NAMES.items() if getattr(y, attr)]
    return {"alphabet": alphabet_to_json(y.alphabet), "flags": flags, "values": y.values.tolist()}


def _state_from_json(obj: Any) -> FiniteArray:
    alphabet = alphabet_from_json(obj["alphabet"])
    kwargs = {_FLAG_NAMES[f]: True for f in obj.get("flags", [])}
    return FiniteArray(np.array(obj["values"]), alphabet, **kwargs)


def save_trajectory(traj, path: str | Path) -> None:
    """One JSON object per line: snapshots, interleaved with events when logged.

    Event lines carry the ground-truth kind and the affected cells under the
    key ``changed``; the snapshot at the same time holds the post-jump state.
    """
    events = {e.time: e for e in (traj.event_log or [])}
    lines = []
    for t, state in zip(traj.times, traj.states):
        if t in events:
            e = events[t]
            lines.append(
                json.dumps(
                    {
                        "t": t,
                        "kind": e.kind,
                        "index": list(e.index) if isinstance(e.index, tuple) else e.index,
                        "changed": [list(c) for c in e.affected],
                    },
                    sort_keys=True,
                )
            )
        lines.append(json.dumps({"t": t, "state": _state_to_json(state)}, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def load_trajectory(path: str | Path):
    from .dynamics import GroundTruthEvent, Trajectory

    times: list[float] = []
    states: list[FiniteArray] = []
    events: list[GroundTruthEvent] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{lineno}: bad JSON: {exc}") from exc
        if "state" in obj:
            times.append(float(obj["t"]))
            states.append(_state_from_json(obj["state"]))
        elif "kind" in obj:
            index = obj.get("index")
            events.append(
                GroundTruthEvent(
                    time=float(obj["t"]),
                    kind=obj["kind"],
                    index=tuple(index) if isinstance(index, list) else index,
                    affected=tuple((int(i), int(j)) for i, j in obj.get("changed", [])),
                )
            )
        else:
            raise ConfigError(f"{path}:{lineno}: line is neither a snapshot nor an event")
    return Trajectory(times=times, states=states, event_log=events or None)


def load_json_config(path: str | Path) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return obj

