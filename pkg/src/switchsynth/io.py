"""System description files, signal files and JSON reports.

System description (JSON)::

    {
      "subsystems": [{"id": 1, "A": [[0.4, 0.8], [-0.7, 0.6]]}, ...],
      "edges": [[1, 2], [3, 3], ...],
      "modes": [1, 2, 3],                       # optional; vertex order
      "q_matrices": [{"id": 1, "Q": [[...]]}],  # optional
      "epsilon": 0.001,                         # optional
      "gains_override": {                       # optional
        "log_mu": [{"edge": [1, 2], "value": -1.5}, ...],
        "log_lambda": [{"id": 1, "value": -0.2}, ...]
      }
    }

Signal file: a ``# period: P`` header (optionally ``# prelude: K``), then
one mode id per line, prelude first. Without a period header the ids are an
explicit finite prefix.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .certificates import GainTable, StabilityClass, Subsystem
from .graph import SwitchingSignal, Walk, build_graph
from .stability import asymptotic_check, switching_ratio
from .system import SwitchedSystem

__all__ = [
    "certificate_report",
    "format_signal",
    "load_system",
    "parse_mode",
    "parse_signal",
    "read_signal",
    "save_system",
    "synthesis_report",
    "system_from_dict",
    "system_to_dict",
    "verify_report",
    "write_signal",
]


def parse_mode(token: str):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        return token


def _key(v):
    return tuple(v) if isinstance(v, list) else v


def system_from_dict(data: dict) -> SwitchedSystem:
    subs = {}
    for entry in data.get("subsystems", []):
        mode = _key(entry["id"])
        if mode in subs:
            raise ValueError(f"duplicate subsystem id {mode!r}")
        subs[mode] = Subsystem(mode, entry["A"])
    modes = [_key(m) for m in data["modes"]] if "modes" in data else list(subs)
    graph = build_graph(modes, [(_key(k), _key(l)) for k, l in data.get("edges", [])])
    q = {}
    for entry in data.get("q_matrices", []):
        q[_key(entry["id"])] = np.asarray(entry["Q"], dtype=float)
    override = None
    if "gains_override" in data:
        go = data["gains_override"]
        log_mu = {tuple(_key(v) for v in item["edge"]): float(item["value"]) for item in go.get("log_mu", [])}
        for e in graph.edges:
            if e[0] == e[1]:
                log_mu.setdefault(e, 0.0)
        log_lambda = {_key(item["id"]): float(item["value"]) for item in go.get("log_lambda", [])}
        override = GainTable(log_mu, log_lambda)
    return SwitchedSystem(graph, subs, q, override, data.get("epsilon"))


def system_to_dict(system: SwitchedSystem) -> dict:
    data = {
        "modes": list(system.graph.vertices),
        "subsystems": [{"id": k, "A": s.A.tolist()} for k, s in system.subsystems.items()],
        "edges": [list(e) for e in system.graph.edges],
    }
    if system.q_matrices:
        data["q_matrices"] = [{"id": k, "Q": np.asarray(Q).tolist()} for k, Q in system.q_matrices.items()]
    if system.epsilon is not None:
        data["epsilon"] = system.epsilon
    if system.gains_override is not None:
        go = system.gains_override
        data["gains_override"] = {
            "log_mu": [{"edge": list(e), "value": v} for e, v in go.log_mu.items()],
            "log_lambda": [{"id": k, "value": v} for k, v in go.log_lambda.items()],
        }
    return data


def load_system(path) -> SwitchedSystem:
    with open(path) as fh:
        return system_from_dict(json.load(fh))


def save_system(system: SwitchedSystem, path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(system), indent=2) + "\n")


def format_signal(signal: SwitchingSignal) -> str:
    lines = []
    if signal.is_periodic:
        lines.append(f"# period: {len(signal.period)}")
        if signal.prelude:
            lines.append(f"# prelude: {len(signal.prelude)}")
        values = signal.prelude + signal.period
    else:
        lines.append(f"# prefix: {len(signal.prelude)}")
        values = signal.prelude
    lines.extend(str(v) for v in values)
    return "\n".join(lines) + "\n"


def parse_signal(text: str) -> SwitchingSignal:
    header = {}
    values = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            if val.strip():
                header[key.strip().lower()] = int(val)
            continue
        values.append(parse_mode(line))
    if "period" in header:
        p = header["period"]
        k = header.get("prelude", 0)
        if p < 1 or k + p != len(values):
            raise ValueError(f"signal file declares prelude {k} + period {p} but lists {len(values)} modes")
        return SwitchingSignal(prelude=values[:k], period=values[k:])
    if "prefix" in header and header["prefix"] != len(values):
        raise ValueError(f"signal file declares {header['prefix']} modes but lists {len(values)}")
    return SwitchingSignal(prelude=values)


def write_signal(signal: SwitchingSignal, path) -> None:
    Path(path).write_text(format_signal(signal))


def read_signal(path) -> SwitchingSignal:
    return parse_signal(Path(path).read_text())


def _finite(x):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _ratio_dict(rep) -> dict:
    return {
        "numerator": rep.numerator,
        "denominator": rep.denominator,
        "ratio": _finite(rep.ratio),
        "satisfied": rep.satisfied,
    }


def certificate_report(system: SwitchedSystem) -> dict:
    """Certificates (when matrices are known) and the gain table."""
    gains = system.gains
    classes = system.classes
    certs = []
    if system.gains_override is None:
        for k, c in system.certificates.items():
            certs.append(
                {
                    "id": k,
                    "class": c.cls.value,
                    "lambda": c.lam,
                    "log_lambda": gains.log_lambda[k],
                    "P": c.P.tolist(),
                    "A": system.subsystems[k].A.tolist(),
                }
            )
    else:
        for k in system.graph.vertices:
            certs.append({"id": k, "class": classes[k].value, "lambda": math.exp(gains.log_lambda[k]),
                          "log_lambda": gains.log_lambda[k]})
    table = [
        {"edge": list(e), "mu": math.exp(gains.log_mu[e]), "log_mu": gains.log_mu[e]}
        for e in system.graph.edges
    ]
    return {"modes": list(system.graph.vertices), "certificates": certs, "gains": table}


def synthesis_report(system: SwitchedSystem, result=None, status: str = "feasible", epsilon=None) -> dict:
    report = certificate_report(system)
    lp = {"status": status, "epsilon": epsilon}
    if result is not None:
        lp["method"] = result.method
        if result.flow is not None:
            lp["flow"] = [float(v) for v in result.flow.f]
            lp["support"] = [list(e) for e in result.flow.support]
        report["circuit"] = list(result.circuit.vertices)
        report["ratio"] = _ratio_dict(result.ratio)
        report["verdicts"] = {
            "frequency_ok": result.verdict.frequency_ok,
            "ratio_ok": result.verdict.ratio_ok,
            "trivial_case": result.verdict.trivial_case,
            "stabilizing": result.verdict.stabilizing,
            "multi_component": result.multi_component,
        }
        report["signal"] = {"period": list(result.signal.period), "prelude": list(result.signal.prelude)}
    report["lp"] = lp
    return report


def verify_report(report: dict) -> dict:
    """Recompute a synthesis report's verdicts from its own numbers.

    Returns the recomputed ratio and verdicts plus ``consistent``, which is
    true when they match what the report states.
    """
    def key(v):
        return _key(v)

    log_mu = {tuple(key(v) for v in g["edge"]): g["log_mu"] for g in report["gains"]}
    log_lambda = {key(c["id"]): c["log_lambda"] for c in report["certificates"]}
    classes = {key(c["id"]): StabilityClass(c["class"]) for c in report["certificates"]}
    gains = GainTable(log_mu, log_lambda)
    out = {"consistent": True}
    for c in report["certificates"]:
        if "P" in c and "A" in c:
            A = np.asarray(c["A"])
            P = np.asarray(c["P"])
            G = c["lambda"] * P - A.T @ P @ A
            if np.linalg.eigvalsh(0.5 * (G + G.T))[0] < -1e-9 * np.linalg.norm(P, 2):
                out["consistent"] = False
    if "circuit" not in report:
        return out
    circuit = Walk([key(v) for v in report["circuit"]])
    rep = switching_ratio(circuit, gains, classes)
    signal = SwitchingSignal(prelude=[key(v) for v in report["signal"]["prelude"]],
                             period=[key(v) for v in report["signal"]["period"]])
    verdict = asymptotic_check(signal, gains, classes)
    out["ratio"] = rep.ratio
    out["frequency_ok"] = verdict.frequency_ok
    out["ratio_ok"] = verdict.ratio_ok
    stated = report["verdicts"]
    stated_ratio = report["ratio"]["ratio"]
    stated_ratio = math.inf if stated_ratio == "inf" else stated_ratio
    out["consistent"] = bool(
        out["consistent"]
        and verdict.frequency_ok == stated["frequency_ok"]
        and verdict.ratio_ok == stated["ratio_ok"]
        and (rep.ratio == stated_ratio or abs(rep.ratio - stated_ratio) <= 1e-12 * max(1.0, abs(rep.ratio)))
    )
    return out
