"""Stabilizing switching signals for discrete-time switched linear systems.

Pipeline: per-mode Lyapunov certificates, transition gains, a flow LP over
the admissibility graph, an Eulerian circuit of the LP support, and the
periodic signal that repeats it.
"""
from .certificates import (
    CertificateError,
    GainTable,
    StabilityClass,
    Subsystem,
    SubsystemCertificate,
    certificate_for,
    classify,
    gain_table,
    mu_gain,
    solve_discrete_lyapunov,
)
from .graph import (
    SwitchingSignal,
    TransitionGraph,
    Walk,
    build_graph,
    enumerate_circuits,
    incidence_matrix,
    signal_to_walk,
    walk_stats,
    walk_to_signal,
)
from .io import load_system, read_signal, save_system, write_signal
from .simulation import check_convergence, simulate, verify_envelope
from .stability import asymptotic_check, envelope, g_functions, prefix_stats, switching_ratio
from .synthesis import InfeasibleError, UndecidedError, build_lp, extract_circuit, synthesize
from .system import SwitchedSystem

__version__ = "0.1.0"

__all__ = [
    "CertificateError",
    "GainTable",
    "InfeasibleError",
    "StabilityClass",
    "Subsystem",
    "SubsystemCertificate",
    "SwitchedSystem",
    "SwitchingSignal",
    "TransitionGraph",
    "UndecidedError",
    "Walk",
    "asymptotic_check",
    "build_graph",
    "build_lp",
    "certificate_for",
    "check_convergence",
    "classify",
    "enumerate_circuits",
    "envelope",
    "extract_circuit",
    "g_functions",
    "gain_table",
    "incidence_matrix",
    "load_system",
    "mu_gain",
    "prefix_stats",
    "read_signal",
    "save_system",
    "signal_to_walk",
    "simulate",
    "solve_discrete_lyapunov",
    "switching_ratio",
    "synthesize",
    "verify_envelope",
    "walk_stats",
    "walk_to_signal",
    "write_signal",
]
