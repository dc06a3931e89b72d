"""Switching statistics and the asymptotic stability test on signals.

Counting conventions, for a horizon ``t``:

* ``rho[(k, l)]`` counts steps ``s < t`` with ``sigma(s) = k`` and
  ``sigma(s + 1) = l``;
* ``kappa[j]`` counts steps ``s < t`` with ``sigma(s) = j``;

so both sum to ``t`` and agree with the counts of the walk
``sigma(0), ..., sigma(t)``. The step spent in the current (unfinished)
holding interval is already inside ``kappa``; no separate tail term is
needed in ``g2``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Mapping

import numpy as np

from .certificates import GainTable, StabilityClass, SubsystemCertificate
from .graph import SwitchingSignal, Walk, walk_stats

__all__ = [
    "AsymptoticVerdict",
    "EnvelopeBound",
    "PrefixStats",
    "RatioReport",
    "asymptotic_check",
    "envelope",
    "envelope_constant",
    "g_functions",
    "g_series",
    "prefix_stats",
    "ratio_from_counts",
    "signal_prefix",
    "switching_ratio",
]

AS = StabilityClass.ASYMPTOTICALLY_STABLE
U = StabilityClass.UNSTABLE


@dataclass(frozen=True)
class PrefixStats:
    t: int
    n_switches: int
    nu: float
    rho: Counter
    kappa: Counter


def signal_prefix(sigma, t: int) -> tuple:
    """``sigma(0), ..., sigma(t)`` from a signal or an explicit sequence."""
    if isinstance(sigma, SwitchingSignal):
        return sigma.prefix(t)
    seq = tuple(sigma)
    if len(seq) < t + 1:
        raise ValueError(f"signal prefix has {len(seq)} values, horizon {t} needs {t + 1}")
    return seq[: t + 1]


def prefix_stats(sigma, t: int) -> PrefixStats:
    """Counts over ``sigma(0), ..., sigma(t)``."""
    if t < 1:
        raise ValueError("horizon must be at least 1")
    seq = signal_prefix(sigma, t)
    rho = Counter((seq[s], seq[s + 1]) for s in range(t))
    kappa = Counter(seq[:t])
    n_switches = sum(1 for s in range(1, t + 1) if seq[s] != seq[s - 1])
    return PrefixStats(t, n_switches, n_switches / t, rho, kappa)


@dataclass(frozen=True)
class RatioReport:
    numerator: float
    denominator: float
    ratio: float
    satisfied: bool


def _classes(gains: GainTable, classes) -> Mapping:
    return gains.classes() if classes is None else classes


def ratio_from_counts(rho: Mapping, kappa: Mapping, gains: GainTable, classes=None, margin: float = 0.0) -> RatioReport:
    """Weighted transition/activation ratio from raw counts.

    ``numerator = sum ln(mu) rho + sum_unstable |ln lam| kappa`` and
    ``denominator = sum_stable |ln lam| kappa``; marginal modes contribute to
    neither. A zero denominator gives ``inf`` and is never satisfied.
    """
    classes = _classes(gains, classes)
    num = 0.0
    for e, n in rho.items():
        if not n:
            continue
        if e not in gains.log_mu:
            raise KeyError(f"no gain for transition {e!r}")
        num += gains.log_mu[e] * n
    den = 0.0
    for j, n in kappa.items():
        if not n:
            continue
        if j not in gains.log_lambda or j not in classes:
            raise KeyError(f"no rate for mode {j!r}")
        if classes[j] is U:
            num += abs(gains.log_lambda[j]) * n
        elif classes[j] is AS:
            den += abs(gains.log_lambda[j]) * n
    ratio = num / den if den > 0 else math.inf
    return RatioReport(num, den, ratio, bool(den > 0 and ratio < 1.0 - margin))


def switching_ratio(stats, gains: GainTable, classes=None, margin: float = 0.0) -> RatioReport:
    """Ratio of the asymptotic test evaluated on a prefix or a walk."""
    if isinstance(stats, Walk):
        stats = walk_stats(stats)
    return ratio_from_counts(stats.rho, stats.kappa, gains, classes, margin)


@dataclass(frozen=True)
class AsymptoticVerdict:
    frequency_ok: bool
    ratio_ok: bool
    report: RatioReport
    trivial_case: bool = False

    @property
    def stabilizing(self) -> bool:
        return (self.frequency_ok and self.ratio_ok) or self.trivial_case


def asymptotic_check(sigma: SwitchingSignal, gains: GainTable, classes=None) -> AsymptoticVerdict:
    """Exact verdicts for a periodic signal, read off one period.

    Switching frequency stays bounded away from zero iff the period switches
    at least once. The prelude does not affect either limit.
    """
    if not isinstance(sigma, SwitchingSignal) or not sigma.is_periodic:
        raise ValueError("asymptotic verdicts need a periodic signal; use switching_ratio on prefixes")
    classes = _classes(gains, classes)
    period = sigma.period_walk()
    report = switching_ratio(period, gains, classes)
    switches = any(k != l for k, l in period.edges)
    modes = set(sigma.period)
    trivial = not switches and len(modes) == 1 and classes[next(iter(modes))] is AS
    if trivial:
        # constant stable signal: the numerator is identically zero
        return AsymptoticVerdict(False, True, report, trivial_case=True)
    return AsymptoticVerdict(switches, report.satisfied, report)


def g_series(sigma, T: int, gains: GainTable, classes=None) -> tuple[np.ndarray, np.ndarray]:
    """``g1(t)`` and ``g2(t)`` for ``t = 0..T`` in one pass."""
    classes = _classes(gains, classes)
    seq = signal_prefix(sigma, T)
    g1 = np.zeros(T + 1)
    g2 = np.zeros(T + 1)
    a = b = 0.0
    for s in range(T):
        j, nxt = seq[s], seq[s + 1]
        if j not in gains.log_lambda:
            raise KeyError(f"no rate for mode {j!r}")
        if (j, nxt) not in gains.log_mu:
            raise KeyError(f"no gain for transition {(j, nxt)!r}")
        if classes[j] is AS:
            a += abs(gains.log_lambda[j])
        elif classes[j] is U:
            b += abs(gains.log_lambda[j])
        b += gains.log_mu[(j, nxt)]
        g1[s + 1] = a
        g2[s + 1] = b
    return g1, g2


def g_functions(sigma, t: int, gains: GainTable, classes=None) -> tuple[float, float]:
    g1, g2 = g_series(sigma, t, gains, classes)
    return float(g1[t]), float(g2[t])


def envelope_constant(certs: Mapping[Hashable, SubsystemCertificate]) -> float:
    """``sqrt(lambda_max(sum P) / min lambda_min(P))``."""
    Ps = [c.P for c in certs.values()]
    top = np.linalg.eigvalsh(sum(Ps))[-1]
    bottom = min(np.linalg.eigvalsh(P)[0] for P in Ps)
    return float(math.sqrt(top / bottom))


@dataclass(frozen=True)
class EnvelopeBound:
    g1: float
    g2: float
    c: float
    bound: float
    lyap_bound: float


def envelope(certs, gains: GainTable, x0, sigma, t: int, classes=None) -> EnvelopeBound:
    """Norm and Lyapunov-level bounds on ``x(t)``.

    ``V_sigma(t)(x(t)) <= V_sigma(0)(x0) exp(g2 - g1)`` and
    ``||x(t)|| <= c ||x0|| exp((g2 - g1) / 2)``. The norm bound takes the
    square root of the Lyapunov growth factor because ``V`` is quadratic.
    """
    x0 = np.asarray(x0, dtype=float)
    if t == 0:
        g1 = g2 = 0.0
        first = signal_prefix(sigma, 0)[0]
    else:
        g1, g2 = g_functions(sigma, t, gains, classes)
        first = signal_prefix(sigma, t)[0]
    c = envelope_constant(certs)
    growth = math.exp(g2 - g1)
    bound = c * float(np.linalg.norm(x0)) * math.sqrt(growth)
    return EnvelopeBound(g1, g2, c, bound, certs[first].V(x0) * growth)
