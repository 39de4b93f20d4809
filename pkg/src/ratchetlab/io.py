"""JSON and CSV serialization for machines, partitions, operators and q-machines."""

from __future__ import annotations

import csv
import io as _io
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .equivalence import Partition
from .errors import InvalidMachine, MachineFormatError
from .machine import Machine, forward_tables
from .qmachine import InvariantViolation, QMachine, phase_table, validate_qmachine
from .quantum import KrausChannel

# ----------------------------------------------------------------- helpers


def _parse_json(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise MachineFormatError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None


def _read(path) -> tuple[str, str]:
    path = Path(path)
    try:
        return path.read_text(), str(path)
    except OSError as e:
        raise MachineFormatError(f"{path}: {e.strerror or e}") from None


def _require(cond: bool, source: str, where: str, msg: str):
    if not cond:
        raise MachineFormatError(f"{source}: {where}: {msg}")


def _number(value, source: str, where: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), source, where, f"expected a number, got {value!r}")
    return float(value)


# ---------------------------------------------------------------- machines


def machine_from_dict(obj, source: str = "<input>") -> Machine:
    """Parse ``{"states", "alphabet", "transitions": [{"from", "symbol", "to", "prob"}]}``.

    Unlisted triples are zero; duplicate triples are rejected. Structural
    problems raise :class:`MachineFormatError` naming the offending field;
    the result is not checked for stochasticity (see :func:`validate`).
    """
    _require(isinstance(obj, dict), source, "top level", "expected a JSON object")
    for key in ("states", "alphabet", "transitions"):
        _require(key in obj, source, key, "missing field")
    states, alphabet, trans = obj["states"], obj["alphabet"], obj["transitions"]
    _require(isinstance(states, list) and states, source, "states", "expected a non-empty list")
    _require(isinstance(alphabet, list) and alphabet, source, "alphabet", "expected a non-empty list")
    _require(isinstance(trans, list), source, "transitions", "expected a list")
    states = [str(s) for s in states]
    alphabet = [str(x) for x in alphabet]
    _require(len(set(states)) == len(states), source, "states", "duplicate identifiers")
    _require(len(set(alphabet)) == len(alphabet), source, "alphabet", "duplicate identifiers")
    known = {"states": set(states), "alphabet": set(alphabet)}
    edges, seen = [], {}
    for i, t in enumerate(trans):
        where = f"transitions[{i}]"
        _require(isinstance(t, dict), source, where, "expected an object")
        for key in ("from", "symbol", "to", "prob"):
            _require(key in t, source, f"{where}.{key}", "missing field")
        src, sym, dst = str(t["from"]), str(t["symbol"]), str(t["to"])
        _require(src in known["states"], source, f"{where}.from", f"unknown state {src!r}")
        _require(dst in known["states"], source, f"{where}.to", f"unknown state {dst!r}")
        _require(sym in known["alphabet"], source, f"{where}.symbol", f"unknown symbol {sym!r}")
        p = _number(t["prob"], source, f"{where}.prob")
        key = (src, sym, dst)
        _require(key not in seen, source, where, f"duplicate triple {key} (first at transitions[{seen.get(key)}])")
        seen[key] = i
        edges.append((src, sym, dst, p))
    try:
        return Machine.from_edges(states, alphabet, edges)
    except InvalidMachine as e:
        raise MachineFormatError(f"{source}: {e}") from None


def machine_to_dict(machine: Machine) -> dict:
    return {
        "states": list(machine.states),
        "alphabet": list(machine.alphabet),
        "transitions": [{"from": s, "symbol": x, "to": t, "prob": p} for s, x, t, p in machine.edges()],
    }


def loads_machine(text: str, source: str = "<input>") -> Machine:
    return machine_from_dict(_parse_json(text, source), source)


def load_machine(path) -> Machine:
    text, source = _read(path)
    return loads_machine(text, source)


def dumps_machine(machine: Machine) -> str:
    return json.dumps(machine_to_dict(machine), indent=2) + "\n"


def dump_machine(machine: Machine, path) -> None:
    Path(path).write_text(dumps_machine(machine))


def builtin_machines() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("ratchetlab.machines").iterdir() if p.name.endswith(".json"))


def load_builtin(name: str) -> Machine:
    """Load one of the machine files shipped with the package."""
    res = resources.files("ratchetlab.machines") / f"{name}.json"
    if not res.is_file():
        raise MachineFormatError(f"no built-in machine {name!r}; available: {', '.join(builtin_machines())}")
    return loads_machine(res.read_text(), f"builtin:{name}")


def resolve_machine(spec: str) -> Machine:
    """A file path, or ``builtin:<name>`` for a shipped machine."""
    if spec.startswith("builtin:"):
        return load_builtin(spec.split(":", 1)[1])
    return load_machine(spec)


# -------------------------------------------------- partitions and channels


def partition_to_dict(partition: Partition) -> dict:
    return partition.to_json()


def partition_from_dict(obj, source: str = "<input>") -> Partition:
    _require(isinstance(obj, dict) and isinstance(obj.get("blocks"), list), source, "blocks", "expected a list of lists")
    blocks = []
    for i, b in enumerate(obj["blocks"]):
        _require(isinstance(b, list) and b, source, f"blocks[{i}]", "expected a non-empty list")
        blocks.append(tuple(str(s) for s in b))
    return Partition(tuple(blocks))


def labelled_matrix(matrix, rows, cols) -> dict:
    """Dense matrix with row and column labels."""
    return {"rows": list(rows), "columns": list(cols), "matrix": np.asarray(matrix, dtype=float).tolist()}


# ---------------------------------------------------------- complex arrays


def complex_to_json(a) -> list:
    """Nested lists ending in ``[re, im]`` pairs."""
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def complex_from_json(obj, source: str = "<input>", where: str = "matrix") -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise MachineFormatError(f"{source}: {where}: expected nested arrays of [re, im] pairs") from None
    _require(arr.ndim >= 1 and arr.shape[-1] == 2, source, where, f"innermost arrays must be [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def load_operator_problem(path) -> tuple[np.ndarray, np.ndarray, KrausChannel]:
    """Read ``{"rho", "sigma", "kraus": [...]}`` for a DPI check."""
    text, source = _read(path)
    obj = _parse_json(text, source)
    _require(isinstance(obj, dict), source, "top level", "expected a JSON object")
    for key in ("rho", "sigma", "kraus"):
        _require(key in obj, source, key, "missing field")
    rho = complex_from_json(obj["rho"], source, "rho")
    sigma = complex_from_json(obj["sigma"], source, "sigma")
    _require(isinstance(obj["kraus"], list) and obj["kraus"], source, "kraus", "expected a non-empty list")
    ops = [complex_from_json(k, source, f"kraus[{i}]") for i, k in enumerate(obj["kraus"])]
    return rho, sigma, KrausChannel(ops)


# --------------------------------------------------------------- q-machines


def load_phases(path, machine: Machine) -> np.ndarray:
    """Phases as ``{symbol: {state: radians}}`` or a ``[symbol][state]`` array."""
    text, source = _read(path)
    obj = _parse_json(text, source)
    if isinstance(obj, dict) and "phases" in obj:
        obj = obj["phases"]
    try:
        return phase_table(machine, obj)
    except (KeyError, ValueError, TypeError) as e:
        raise MachineFormatError(f"{source}: phases: {e}") from None


def qmachine_to_dict(qm: QMachine) -> dict:
    return {
        "kind": qm.kind,
        "source": machine_to_dict(qm.source),
        "phases": qm.phases.tolist(),
        "dimension": qm.dimension,
        "encodings": {s: complex_to_json(qm.encodings[i]) for i, s in enumerate(qm.source.states)},
        "kraus": {x: complex_to_json(qm.kraus[i]) for i, x in enumerate(qm.source.alphabet)},
        "rho": complex_to_json(qm.rho),
        "overlap": complex_to_json(qm.overlap),
    }


def qmachine_from_dict(obj, source: str = "<input>") -> QMachine:
    """Rebuild a q-machine and re-check every invariant."""
    _require(isinstance(obj, dict), source, "top level", "expected a JSON object")
    for key in ("kind", "source", "phases", "encodings", "kraus", "rho", "overlap"):
        _require(key in obj, source, key, "missing field")
    m = machine_from_dict(obj["source"], f"{source}: source")
    phases = phase_table(m, obj["phases"])
    _require(set(obj["encodings"]) == set(m.states), source, "encodings", "must have one entry per state")
    _require(set(obj["kraus"]) == set(m.alphabet), source, "kraus", "must have one entry per symbol")
    psi = np.array([complex_from_json(obj["encodings"][s], source, f"encodings.{s}") for s in m.states])
    kraus = [complex_from_json(obj["kraus"][x], source, f"kraus.{x}") for x in m.alphabet]
    qm = QMachine(
        m,
        phases,
        psi,
        kraus,
        complex_from_json(obj["rho"], source, "rho"),
        obj["kind"],
        complex_from_json(obj["overlap"], source, "overlap"),
    )
    problems = validate_qmachine(qm)
    if problems:
        raise InvariantViolation(f"{source}: " + "; ".join(problems))
    return qm


def dumps_qmachine(qm: QMachine) -> str:
    return json.dumps(qmachine_to_dict(qm), indent=2) + "\n"


def loads_qmachine(text: str, source: str = "<input>") -> QMachine:
    return qmachine_from_dict(_parse_json(text, source), source)


# ---------------------------------------------------------------------- CSV


def words_csv(machine: Machine, max_len: int, cap: int | None = None) -> str:
    """``length,word,probability`` for every word of positive probability."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["length", "word", "probability"])
    sep = "" if all(len(x) == 1 for x in machine.alphabet) else " "
    for words, table in forward_tables(machine, max_len, prune=True, cap=cap):
        if words.shape[1] == 0:
            continue
        probs = table.sum(axis=1)
        for row, p in zip(words, probs):
            w.writerow([words.shape[1], sep.join(machine.alphabet[i] for i in row), repr(float(p))])
    return buf.getvalue()
