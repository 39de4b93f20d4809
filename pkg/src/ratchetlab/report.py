"""Analysis reports: assembly, schema validation and text rendering."""

from __future__ import annotations

import hashlib
import json
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from . import tolerances as tol
from .equivalence import (
    forward_epsilon_machine,
    is_forward_epsilon_machine,
    is_reverse_epsilon_machine,
    predictive_partition,
    retrodictive_partition,
    reverse_epsilon_machine,
)
from .errors import RatchetError
from .info import K_B, classical_dissipation, classify_efficiency, entropy_rate_estimate, is_retrodictor
from .io import machine_to_dict
from .machine import Machine, is_counifilar, is_unifilar, validate
from .qmachine import (
    build_qmachine,
    build_reverse_qmachine,
    check_forward_efficiency,
    check_reverse_efficiency,
    memory_metrics,
    quantum_dissipation,
)

SCHEMA_VERSION = 1


def schema() -> dict:
    return json.loads((resources.files("ratchetlab") / "report.schema.json").read_text())


def validate_report(report: dict) -> None:
    jsonschema.validate(report, schema())


def input_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def provenance(source_bytes: bytes | None, **params) -> dict:
    return {
        "input_sha256": input_hash(source_bytes) if source_bytes is not None else None,
        "tool": "ratchetlab",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "tolerances": tol.as_dict(),
        "parameters": params,
    }


def _quantum_section(build, check, eps_builder, machine: Machine, t_max: int) -> dict:
    try:
        eps = eps_builder(machine)
        qm = build(eps)
    except RatchetError as e:
        return {"available": False, "reason": f"{type(e).__name__}: {e}"}
    verdict = check(qm, t_max=t_max, cross_check=False)
    try:
        trace = quantum_dissipation(qm, t_max).to_json()
    except RatchetError as e:
        trace = None
        reason = f"{type(e).__name__}: {e}"
    else:
        verdict.max_dissipation = max(r["dissipation"] for r in trace["records"])
        verdict.t_checked = t_max
        reason = None
    out = {
        "available": True,
        "epsilon_machine": machine_to_dict(eps),
        "dimension": qm.dimension,
        "verdict": verdict.to_json(),
        "memory": memory_metrics(qm),
        "dissipation": trace,
    }
    if reason:
        out["dissipation_unavailable"] = reason
    return out


def _forward_eps(m: Machine) -> Machine:
    return m if is_forward_epsilon_machine(m) else forward_epsilon_machine(m)


def _reverse_eps(m: Machine) -> Machine:
    return m if is_reverse_epsilon_machine(m) else reverse_epsilon_machine(m)


def analyze(machine: Machine, t_max: int = 6, source_bytes: bytes | None = None, seed: int = 0, t_max_quantum: int | None = None) -> dict:
    """Full analysis of a valid machine as a JSON-ready dict.

    The quantum sections use the forward and reverse epsilon-machines of the
    input's process; each reports ``available: false`` with the reason when
    the construction does not apply.
    """
    tq = min(t_max, 4) if t_max_quantum is None else t_max_quantum
    val = validate(machine)
    report = {
        "provenance": provenance(source_bytes, t_max=t_max, t_max_quantum=tq, seed=seed),
        "machine": {
            "states": list(machine.states),
            "alphabet": list(machine.alphabet),
            "n_edges": len(machine.edges()),
        },
        "validation": {
            "valid": val.valid,
            "violations": val.violations,
            "irreducible": val.irreducible,
            "column_residuals": val.column_residuals,
            "tolerance": tol.STOCHASTIC,
        },
    }
    if not val.valid:
        return report
    pi = machine.stationary
    report["machine"]["stationary"] = {"values": dict(zip(machine.states, pi.tolist())), "tolerance": tol.STATIONARY_ACCEPT}
    report["structure"] = {"unifilar": is_unifilar(machine), "counifilar": is_counifilar(machine)}
    report["partitions"] = {
        "retrodictive": retrodictive_partition(machine).to_json(),
        "predictive": predictive_partition(machine).to_json(),
    }
    rate = entropy_rate_estimate(machine)
    rate["tolerance"] = 1e-9 if rate["method"].startswith("unifilar") else 1e-6
    report["entropy_rate"] = rate
    verdict = classify_efficiency(machine)
    trace = classical_dissipation(machine, t_max)
    report["classical"] = {
        "verdict": verdict.to_json(),
        "retrodictor": is_retrodictor(machine, horizon=min(t_max, 6)),
        "dissipation": trace.to_json(),
        "consistent": verdict.efficient == (trace.max <= 1e-9),
        "memory": memory_metrics(machine),
    }
    report["forward_quantum"] = _quantum_section(build_qmachine, check_forward_efficiency, _forward_eps, machine, tq)
    report["reverse_quantum"] = _quantum_section(build_reverse_qmachine, check_reverse_efficiency, _reverse_eps, machine, tq)
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


# --------------------------------------------------------------------- text


def _trace_lines(trace: dict, temperature: float | None) -> list[str]:
    head = "    t   dissipation [bits]"
    if temperature is not None:
        head += f"   [J at {temperature:g} K]"
    lines = [head]
    for r in trace["records"]:
        line = f"  {r['t']:>3d}   {r['dissipation']:.6e}"
        if temperature is not None:
            line += f"   {r['dissipation'] * K_B * temperature * np.log(2):.6e}"
        lines.append(line)
    return lines


def _blocks(p: dict) -> str:
    return " | ".join("{" + ",".join(b) + "}" for b in p["blocks"])


def render_text(report: dict, temperature: float | None = None) -> str:
    m = report["machine"]
    out = [f"machine: {len(m['states'])} states, alphabet {{{','.join(m['alphabet'])}}}, {m['n_edges']} edges"]
    v = report["validation"]
    if not v["valid"]:
        out.append("INVALID: " + "; ".join(v["violations"]))
        return "\n".join(out) + "\n"
    out.append("stationary: " + ", ".join(f"{s}={p:.6g}" for s, p in m["stationary"]["values"].items()))
    st = report["structure"]
    out.append(f"unifilar: {st['unifilar']}   co-unifilar: {st['counifilar']}")
    out.append(f"retrodictive partition: {_blocks(report['partitions']['retrodictive'])}")
    out.append(f"predictive partition:   {_blocks(report['partitions']['predictive'])}")
    out.append(f"entropy rate: {report['entropy_rate']['rate']:.9g} bits/symbol ({report['entropy_rate']['method']})")
    c = report["classical"]
    out.append("")
    out.append(f"classical generator: {'efficient' if c['verdict']['efficient'] else 'inefficient'}")
    out.append(f"  memory H[pi] = {c['memory']['entropy']:.6g} bits, log2|S| = {c['memory']['log_dimension']:.6g}")
    out.extend(_trace_lines(c["dissipation"], temperature))
    for key, title in (("forward_quantum", "forward q-machine"), ("reverse_quantum", "reverse q-machine")):
        q = report[key]
        out.append("")
        if not q["available"]:
            out.append(f"{title}: not available ({q['reason']})")
            continue
        verdict = q["verdict"]
        out.append(f"{title}: d = {q['dimension']}, {'efficient' if verdict['efficient'] else 'inefficient'}")
        out.append(f"  memory H[rho] = {q['memory']['entropy']:.6g} bits, MCP {_blocks(verdict['mcp'])}")
        if q["dissipation"] is not None:
            out.extend(_trace_lines(q["dissipation"], temperature))
    return "\n".join(out) + "\n"
