"""Command-line entry point: ``switchsynth {certify,synthesize,check,simulate,oracle}``.

Exit statuses: 0 success, 2 input or validation error, 3 infeasible,
4 undecided.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys

import numpy as np

from .certificates import CertificateError, sample_certificate
from .graph import enumerate_circuits, signal_to_walk
from .io import (
    certificate_report,
    format_signal,
    load_system,
    parse_mode,
    read_signal,
    synthesis_report,
    verify_report,
    write_signal,
)
from .simulation import SimulationDiverged, simulate
from .stability import asymptotic_check, prefix_stats, switching_ratio
from .synthesis import DEFAULT_EPSILON, InfeasibleError, UndecidedError, synthesize

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_UNDECIDED = 4


class InputError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _table(headers, rows) -> str:
    cells = [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines)


def _parse_x0(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise InputError(f"--x0 expects comma-separated reals, got {text!r}") from None


def _parse_q(items) -> dict:
    out = {}
    for item in items or ():
        mode, sep, body = item.partition("=")
        if not sep:
            raise InputError(f"--q-matrix expects ID=[[...]], got {item!r}")
        try:
            out[parse_mode(mode)] = np.asarray(json.loads(body), dtype=float)
        except json.JSONDecodeError as exc:
            raise InputError(f"--q-matrix {mode}: {exc}") from None
    return out


def _load(args):
    system = load_system(args.input)
    q = _parse_q(getattr(args, "q_matrix", None))
    if q:
        unknown = [k for k in q if k not in system.subsystems]
        if unknown:
            raise InputError(f"--q-matrix names unknown mode {unknown[0]!r}")
        system = dataclasses.replace(system, q_matrices={**system.q_matrices, **q})
    return system


def _write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, allow_nan=False)
        fh.write("\n")


def cmd_certify(args) -> int:
    system = _load(args)
    report = certificate_report(system)
    rows = []
    if system.gains_override is None:
        rng = np.random.default_rng(args.seed)
        for c in report["certificates"]:
            cert = system.certificates[c["id"]]
            ok = sample_certificate(cert, system.matrix(c["id"]), rng=rng)
            rows.append((c["id"], c["class"], c["lambda"], c["log_lambda"], json.dumps(np.round(cert.P, 6).tolist()), ok))
            c["sampled_ok"] = ok
    else:
        rows = [(c["id"], c["class"], c["lambda"], c["log_lambda"], "-", "-") for c in report["certificates"]]
    print(_table(["mode", "class", "lambda", "ln lambda", "P", "sampled"], rows))
    print()
    print(_table(["from", "to", "mu", "ln mu"], [(g["edge"][0], g["edge"][1], g["mu"], g["log_mu"]) for g in report["gains"]]))
    if args.report:
        _write_json(args.report, report)
    return EXIT_OK


def cmd_synthesize(args) -> int:
    system = _load(args)
    epsilon = args.epsilon if args.epsilon is not None else (system.epsilon or DEFAULT_EPSILON)
    try:
        result = synthesize(system, epsilon, prefer_trivial=not args.no_trivial,
                            max_oracle_edges=args.max_oracle_edges)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if args.report:
            _write_json(args.report, synthesis_report(system, None, "infeasible", epsilon))
        return EXIT_INFEASIBLE
    except UndecidedError as exc:
        print(f"undecided: {exc}", file=sys.stderr)
        if args.report:
            _write_json(args.report, synthesis_report(system, None, "undecided", epsilon))
        return EXIT_UNDECIDED
    report = synthesis_report(system, result, "feasible", epsilon)
    check = verify_report(json.loads(json.dumps(report)))
    report["verification"] = {"consistent": check["consistent"]}
    r = result.ratio
    print(f"method:      {result.method}")
    print(f"circuit:     {','.join(map(str, result.circuit.vertices))}")
    print(f"numerator:   {_fmt(r.numerator)}")
    print(f"denominator: {_fmt(r.denominator)}")
    print(f"ratio:       {_fmt(r.ratio)}")
    print(f"switching:   {'ok' if result.verdict.frequency_ok else 'none (constant stable mode)'}")
    print(f"ratio < 1:   {result.verdict.ratio_ok}")
    if result.multi_component:
        print("note:        flow support had several components; one satisfying circuit was chosen")
    print(f"report re-check: {'consistent' if check['consistent'] else 'MISMATCH'}")
    if args.report:
        _write_json(args.report, report)
    if args.signal_out:
        write_signal(result.signal, args.signal_out)
    else:
        print()
        sys.stdout.write(format_signal(result.signal))
    return EXIT_OK


def _horizon(signal, requested):
    if requested is not None:
        if requested < 1:
            raise InputError("--horizon must be at least 1")
        return requested
    if signal.is_periodic:
        raise InputError("--horizon is required for a periodic signal")
    return len(signal.prelude) - 1


def cmd_check(args) -> int:
    system = _load(args)
    signal = read_signal(args.signal)
    T = _horizon(signal, args.horizon)
    signal_to_walk(signal, system.graph, T)
    gains, classes = system.gains, system.classes
    step = args.every or (len(signal.period) if signal.is_periodic else T)
    rows = []
    for t in list(range(step, T + 1, step)) or [T]:
        st = prefix_stats(signal, t)
        rep = switching_ratio(st, gains, classes)
        rows.append((t, st.n_switches, st.nu, rep.numerator, rep.denominator, rep.ratio))
    print(_table(["t", "switches", "nu", "numerator", "denominator", "ratio"], rows))
    if signal.is_periodic:
        v = asymptotic_check(signal, gains, classes)
        print()
        print(f"period ratio:          {_fmt(v.report.ratio)}")
        print(f"switching frequency:   {'bounded away from 0' if v.frequency_ok else 'tends to 0'}")
        print(f"ratio below 1:         {v.ratio_ok}")
        if v.trivial_case:
            print("constant stable mode:  yes")
        print(f"stabilizing:           {v.stabilizing}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    system = _load(args)
    if not system.subsystems:
        raise InputError("simulation needs mode matrices")
    signal = read_signal(args.signal)
    T = _horizon(signal, args.horizon)
    x0 = _parse_x0(args.x0) if args.x0 else np.ones(system.dim)
    if x0.size != system.dim:
        raise InputError(f"--x0 has dimension {x0.size}, system has {system.dim}")
    signal_to_walk(signal, system.graph, T)
    traj = simulate(system, signal, x0, T)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["t", "mode"] + [f"x_{i + 1}" for i in range(system.dim)] + ["norm", "lyap", "envelope"])
        for t in range(T + 1):
            lyap = repr(float(traj.lyap[t])) if traj.lyap is not None else ""
            env = repr(float(traj.envelope[t])) if traj.envelope is not None else ""
            w.writerow([t, traj.modes[t], *map(repr, map(float, traj.states[t])), repr(float(traj.norms[t])), lyap, env])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_oracle(args) -> int:
    system = _load(args)
    epsilon = args.epsilon if args.epsilon is not None else (system.epsilon or DEFAULT_EPSILON)
    g = system.graph
    max_len = args.max_len or len(g.edges)
    res = enumerate_circuits(g, max_len, args.max_circuits)
    gains, classes = system.gains, system.classes
    rows = []
    best = None
    for c in res.circuits:
        rep = switching_ratio(c, gains, classes)
        ok = rep.ratio <= 1 - epsilon
        rows.append((",".join(map(str, c.vertices)), rep.numerator, rep.denominator, rep.ratio, ok))
        if ok and (best is None or rep.ratio < best[1]):
            best = (c, rep.ratio)
    print(_table(["circuit", "numerator", "denominator", "ratio", f"<= 1-{epsilon:g}"], rows))
    print()
    print(f"circuits: {len(res.circuits)}{' (truncated)' if res.truncated else ''}")
    if best is None:
        print("no circuit meets the ratio condition")
        return EXIT_UNDECIDED if res.truncated else EXIT_INFEASIBLE
    print(f"best: {','.join(map(str, best[0].vertices))} ratio {_fmt(best[1])}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="switchsynth", description="Stabilizing switching signals for discrete-time switched linear systems.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("input", help="system description (JSON)")
        sp.add_argument("--q-matrix", action="append", metavar="ID=[[...]]", help="per-mode Q override (repeatable)")

    sp = sub.add_parser("certify", help="Lyapunov certificates and transition gains")
    common(sp)
    sp.add_argument("--seed", type=int, default=None, help="seed for sampled certificate checks")
    sp.add_argument("--report", help="write the JSON report here")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("synthesize", help="find a stabilizing periodic signal")
    common(sp)
    sp.add_argument("--epsilon", type=float, default=None, help=f"ratio margin (default {DEFAULT_EPSILON:g})")
    sp.add_argument("--max-oracle-edges", type=int, default=20,
                    help="largest graph handed to circuit enumeration when the LP route fails (default 20)")
    sp.add_argument("--no-trivial", action="store_true", help="do not shortcut to a stable self-loop")
    sp.add_argument("--report", help="write the JSON report here")
    sp.add_argument("--signal-out", help="write the signal file here (default: stdout)")
    sp.set_defaults(func=cmd_synthesize)

    sp = sub.add_parser("check", help="prefix statistics and verdicts for a signal")
    common(sp)
    sp.add_argument("signal", help="signal file")
    sp.add_argument("--horizon", type=int, default=None, help="time steps (required for periodic signals; default: length of a prefix signal)")
    sp.add_argument("--every", type=int, default=None, help="report every this many steps (default: one period)")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("simulate", help="trajectory as CSV")
    common(sp)
    sp.add_argument("signal", help="signal file")
    sp.add_argument("--x0", help="initial state, comma-separated (use --x0=-1,2 for negative leading values)")
    sp.add_argument("--horizon", type=int, default=None, help="time steps (required for periodic signals; default: length of a prefix signal)")
    sp.add_argument("--output", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("oracle", help="enumerate circuits and their ratios")
    common(sp)
    sp.add_argument("--epsilon", type=float, default=None, help=f"ratio margin (default {DEFAULT_EPSILON:g})")
    sp.add_argument("--max-len", type=int, default=None, help="longest circuit, in edges (default: edge count)")
    sp.add_argument("--max-circuits", type=int, default=None, help="stop after this many circuits")
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, CertificateError, ValueError, KeyError, OSError, json.JSONDecodeError, SimulationDiverged) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
