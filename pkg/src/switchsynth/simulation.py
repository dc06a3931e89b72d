"""Trajectories of ``x(t+1) = A_sigma(t) x(t)`` and checks against them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stability import signal_prefix, envelope_constant, g_series

__all__ = [
    "EnvelopeCheck",
    "SimulationDiverged",
    "Trajectory",
    "check_convergence",
    "product_form",
    "simulate",
    "verify_envelope",
]

DIVERGENCE_LIMIT = 1e300


class SimulationDiverged(OverflowError):
    pass


@dataclass
class Trajectory:
    states: np.ndarray
    modes: tuple
    norms: np.ndarray = field(repr=False)
    lyap: np.ndarray | None = field(default=None, repr=False)
    envelope: np.ndarray | None = field(default=None, repr=False)

    @property
    def T(self) -> int:
        return len(self.states) - 1

    @property
    def x0(self) -> np.ndarray:
        return self.states[0]


def simulate(system, sigma, x0, T: int, *, with_bounds: bool = True) -> Trajectory:
    """Iterate the switched system for ``T`` steps.

    ``modes[t] = sigma(t)`` for ``t = 0..T``; the last entry is the mode
    active at the final state (needed for its Lyapunov value) and is not
    applied. With certificates available the Lyapunov values and the norm
    envelope are recorded too.
    """
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    x = np.asarray(x0, dtype=float).reshape(-1)
    d = system.dim
    if x.shape != (d,):
        raise ValueError(f"x0 has dimension {x.size}, system has {d}")
    modes = signal_prefix(sigma, T)
    for t, m in enumerate(modes):
        if m not in system.subsystems:
            raise ValueError(f"t={t}: mode {m!r} is not in the family")
    states = np.empty((T + 1, d))
    states[0] = x
    for t in range(T):
        x = system.matrix(modes[t]) @ x
        if not np.all(np.isfinite(x)) or np.abs(x).max(initial=0.0) > DIVERGENCE_LIMIT:
            raise SimulationDiverged(f"state exceeded {DIVERGENCE_LIMIT:g} at t={t + 1}")
        states[t + 1] = x
    norms = np.linalg.norm(states, axis=1)
    traj = Trajectory(states, modes, norms)
    if with_bounds and system.subsystems and system.gains_override is None:
        certs = system.certificates
        traj.lyap = np.array([certs[m].V(s) for m, s in zip(modes, states)])
        if T >= 1:
            g1, g2 = g_series(modes, T, system.gains, system.classes)
        else:
            g1 = g2 = np.zeros(1)
        c = envelope_constant(certs)
        traj.envelope = c * norms[0] * np.exp(0.5 * (g2 - g1))
    return traj


def product_form(system, sigma, x0, T: int) -> np.ndarray:
    """``x(T)`` as one matrix product over holding intervals."""
    modes = signal_prefix(sigma, T)
    d = system.dim
    M = np.eye(d)
    t = 0
    while t < T:
        m = modes[t]
        run = 1
        while t + run < T and modes[t + run] == m:
            run += 1
        M = np.linalg.matrix_power(system.matrix(m), run) @ M
        t += run
    return M @ np.asarray(x0, dtype=float)


def check_convergence(traj: Trajectory, window: int, factor: float) -> bool:
    """Finite-horizon evidence of decay, not a proof of stability."""
    if window < 1:
        raise ValueError("window must be at least 1")
    n = traj.norms
    T = len(n) - 1
    ref = n[max(T - window, 0)]
    return bool(n[T] <= factor * ref and n[T] <= factor * n[0])


@dataclass
class EnvelopeCheck:
    ok: bool
    max_violation: float
    lyap_ok: bool
    norm_ok: bool
    worst_t: int


def verify_envelope(traj: Trajectory, certs, gains, sigma=None, classes=None, rtol: float = 1e-6) -> EnvelopeCheck:
    """Check the Lyapunov-level and norm-level bounds at every step.

    The violation at ``t`` is ``actual / bound - 1`` (positive means the
    bound failed); the worst one is reported.
    """
    T = traj.T
    modes = traj.modes if sigma is None else signal_prefix(sigma, T)
    if T >= 1:
        g1, g2 = g_series(modes, T, gains, classes)
    else:
        g1 = g2 = np.zeros(1)
    growth = np.exp(g2 - g1)
    V = np.array([certs[m].V(s) for m, s in zip(modes, traj.states)])
    lyap_bound = certs[modes[0]].V(traj.states[0]) * growth
    c = envelope_constant(certs)
    norm_bound = c * traj.norms[0] * np.sqrt(growth)

    def rel(actual, bound):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(bound > 0, actual / bound - 1.0, np.where(actual > 0, np.inf, -1.0))
        return out

    lv = rel(V, lyap_bound)
    nv = rel(traj.norms, norm_bound)
    worst = np.maximum(lv, nv)
    t_worst = int(np.argmax(worst))
    lyap_ok = bool(np.all(lv <= rtol))
    norm_ok = bool(np.all(nv <= rtol))
    return EnvelopeCheck(lyap_ok and norm_ok, float(worst[t_worst]), lyap_ok, norm_ok, t_worst)
