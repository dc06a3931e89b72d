"""Per-mode quadratic Lyapunov-like certificates and transition gains.

Every mode ``A`` gets a pair ``(P, lam)`` with ``P`` symmetric positive
definite and ``A.T @ P @ A <= lam * P`` in the Loewner order, so that
``V(x) = x @ P @ x`` grows by at most ``lam`` per step. The gain ``mu`` of an
admissible transition ``k -> l`` is the smallest constant with
``V_l <= mu * V_k`` everywhere.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping

import numpy as np
import scipy.linalg

__all__ = [
    "CertificateError",
    "GainTable",
    "StabilityClass",
    "Subsystem",
    "SubsystemCertificate",
    "certificate_for",
    "classify",
    "gain_table",
    "mu_gain",
    "sample_certificate",
    "solve_discrete_lyapunov",
    "spectral_norm",
    "spectral_radius",
    "verify_certificate",
]

DEFAULT_TOL_CLASS = 1e-9


class CertificateError(RuntimeError):
    """No Lyapunov-like pair could be constructed for a mode."""


class StabilityClass(enum.Enum):
    ASYMPTOTICALLY_STABLE = "AS"
    MARGINALLY_STABLE = "MS"
    UNSTABLE = "U"

    @classmethod
    def from_log_lambda(cls, log_lam: float) -> "StabilityClass":
        if log_lam < 0:
            return cls.ASYMPTOTICALLY_STABLE
        if log_lam > 0:
            return cls.UNSTABLE
        return cls.MARGINALLY_STABLE


@dataclass(frozen=True)
class Subsystem:
    """One mode ``x(t+1) = A x(t)`` of the switched family."""

    id: Hashable
    A: np.ndarray = field(repr=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ValueError(f"mode {self.id!r}: A must be a nonempty square matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError(f"mode {self.id!r}: A has non-finite entries")
        rank = np.linalg.matrix_rank(A)
        if rank < A.shape[0]:
            raise ValueError(f"mode {self.id!r}: A is rank deficient (rank {rank} < {A.shape[0]})")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def dim(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class SubsystemCertificate:
    id: Hashable
    P: np.ndarray = field(repr=False)
    lam: float
    cls: StabilityClass

    def V(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.P @ x)


def _as_matrix(A) -> np.ndarray:
    return A.A if isinstance(A, Subsystem) else np.asarray(A, dtype=float)


def spectral_radius(A) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(_as_matrix(A)))))


def spectral_norm(A) -> float:
    A = _as_matrix(A)
    return math.sqrt(max(float(np.linalg.eigvalsh(A.T @ A)[-1]), 0.0))


def _unit_circle_semisimple(A: np.ndarray, tol: float) -> bool:
    d = A.shape[0]
    eigs = np.linalg.eigvals(A)
    on_circle = [z for z in eigs if abs(abs(z) - 1.0) <= max(tol, 1e-7)]
    scale = max(1.0, np.linalg.norm(A, 2))
    seen: list[complex] = []
    for z in on_circle:
        if any(abs(z - s) <= 1e-6 for s in seen):
            continue
        seen.append(z)
        algebraic = sum(1 for w in eigs if abs(w - z) <= 1e-6)
        sv = np.linalg.svd(A - z * np.eye(d), compute_uv=False)
        geometric = int(np.sum(sv <= 1e-8 * scale))
        if geometric < algebraic:
            return False
    return True


def classify(A, tol_class: float = DEFAULT_TOL_CLASS) -> StabilityClass:
    """Asymptotically stable / marginally stable / unstable.

    A spectral radius within ``tol_class`` of one is called marginal only when
    every unit-circle eigenvalue is semisimple (bounded powers); a defective
    one, e.g. a Jordan block at 1, is unstable.
    """
    if tol_class <= 0:
        raise ValueError("tol_class must be positive")
    if not isinstance(A, Subsystem):
        A = Subsystem("?", A)
    rho = spectral_radius(A.A)
    if rho < 1.0 - tol_class:
        return StabilityClass.ASYMPTOTICALLY_STABLE
    if rho > 1.0 + tol_class:
        return StabilityClass.UNSTABLE
    if _unit_circle_semisimple(A.A, tol_class):
        return StabilityClass.MARGINALLY_STABLE
    return StabilityClass.UNSTABLE


def solve_discrete_lyapunov(A, Q) -> np.ndarray:
    """Solve ``A.T @ P @ A - P + Q = 0`` for symmetric ``P``.

    Uses the Kronecker form ``(I - A.T kron A.T) vec(P) = vec(Q)``; fine for
    the small state dimensions this package targets.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    d = A.shape[0]
    if A.shape != (d, d) or Q.shape != (d, d):
        raise ValueError(f"shape mismatch: A {A.shape}, Q {Q.shape}")
    rho = float(np.max(np.abs(np.linalg.eigvals(A)))) if d else 0.0
    if rho >= 1.0:
        raise ValueError(f"no unique solution: spectral radius {rho:.6g} >= 1")
    K = np.eye(d * d) - np.kron(A.T, A.T)
    P = np.linalg.solve(K, Q.reshape(-1)).reshape(d, d)
    return 0.5 * (P + P.T)


def _marginal_P(A: np.ndarray, tol: float) -> np.ndarray | None:
    d = A.shape[0]
    if np.linalg.eigvalsh(A.T @ A)[-1] <= 1.0 + tol:
        return np.eye(d)

    # stable block first in an ordered real Schur form, then decouple it
    T, Z, n_stable = scipy.linalg.schur(A, output="real", sort=lambda re, im: math.hypot(re, im) < 1.0 - tol)
    S11 = T[:n_stable, :n_stable]
    S12 = T[:n_stable, n_stable:]
    S22 = T[n_stable:, n_stable:]
    X = scipy.linalg.solve_sylvester(S11, -S22, -S12) if n_stable and n_stable < d else np.zeros((n_stable, d - n_stable))
    # T = N blockdiag(S11, S22) N^-1 with N = [[I, X], [0, I]]; keep N^-1
    N_inv = np.eye(d)
    N_inv[:n_stable, n_stable:] = -X

    P_block = np.zeros((d, d))
    if n_stable:
        P_block[:n_stable, :n_stable] = solve_discrete_lyapunov(S11, np.eye(n_stable))
    if n_stable < d:
        # identity in the eigenbasis of the unit-circle block
        _, V = np.linalg.eig(S22)
        Vinv = np.linalg.inv(V)
        P22 = (Vinv.conj().T @ Vinv).real
        P_block[n_stable:, n_stable:] = 0.5 * (P22 + P22.T)

    # x = Z N y, so P = W^T P_block W with W = N^-1 Z^T
    W = N_inv @ Z.T
    P = W.T @ P_block @ W
    P = 0.5 * (P + P.T)
    if np.linalg.eigvalsh(P)[0] <= 0:
        return None
    gap = A.T @ P @ A - P
    if np.linalg.eigvalsh(0.5 * (gap + gap.T))[-1] > 1e-8 * np.linalg.norm(P, 2):
        return None
    return P


def certificate_for(A: Subsystem, Q=None, tol_class: float = DEFAULT_TOL_CLASS) -> SubsystemCertificate:
    """Build ``(P, lam)`` for one mode.

    Stable modes: ``P`` solves the discrete Lyapunov equation with ``Q``
    (identity by default) and ``lam = 1 - lambda_min(Q) / lambda_max(P)``.
    Unstable modes: ``P = I`` and ``lam = max(1 + 2 ||A||, ||A||^2)``.
    Marginal modes: ``lam = 1`` with ``P`` from the identity, or failing that
    from a block-diagonal construction in the Schur basis.
    """
    if not isinstance(A, Subsystem):
        A = Subsystem("?", A)
    d = A.dim
    cls = classify(A, tol_class)
    if cls is StabilityClass.ASYMPTOTICALLY_STABLE:
        Q = np.eye(d) if Q is None else np.asarray(Q, dtype=float)
        if Q.shape != (d, d) or not np.allclose(Q, Q.T):
            raise ValueError(f"mode {A.id!r}: Q must be symmetric {d}x{d}")
        q_min = np.linalg.eigvalsh(Q)[0]
        if q_min <= 0:
            raise ValueError(f"mode {A.id!r}: Q must be positive definite")
        P = solve_discrete_lyapunov(A.A, Q)
        lam = 1.0 - q_min / np.linalg.eigvalsh(P)[-1]
        return SubsystemCertificate(A.id, P, float(lam), cls)
    if cls is StabilityClass.UNSTABLE:
        # 1 + 2||A|| alone is too small once ||A|| > 1 + sqrt(2)
        norm = spectral_norm(A.A)
        return SubsystemCertificate(A.id, np.eye(d), max(1.0 + 2.0 * norm, norm * norm), cls)
    P = _marginal_P(A.A, tol_class)
    if P is None:
        raise CertificateError(f"no certificate found for marginally stable mode {A.id!r}")
    return SubsystemCertificate(A.id, P, 1.0, cls)


def verify_certificate(cert: SubsystemCertificate, A) -> bool:
    """True iff ``lam * P - A.T P A`` is PSD up to ``1e-9 * ||P||``."""
    A = _as_matrix(A)
    P = cert.P
    if A.shape != P.shape:
        return False
    G = cert.lam * P - A.T @ P @ A
    G = 0.5 * (G + G.T)
    return bool(np.linalg.eigvalsh(G)[0] >= -1e-9 * np.linalg.norm(P, 2))


def sample_certificate(cert: SubsystemCertificate, A, n: int = 1000, rng=None) -> bool:
    """Check ``V(Az) <= lam V(z)`` on ``n`` random unit vectors."""
    A = _as_matrix(A)
    rng = np.random.default_rng(rng)
    Z = rng.standard_normal((n, A.shape[0]))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    AZ = Z @ A.T
    v_next = np.einsum("ij,jk,ik->i", AZ, cert.P, AZ)
    v_now = np.einsum("ij,jk,ik->i", Z, cert.P, Z)
    return bool(np.all(v_next <= cert.lam * v_now * (1 + 1e-9)))


def _inv_sqrt(P: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(P)
    if w[0] <= 0:
        raise ValueError("matrix is not positive definite")
    return (U / np.sqrt(w)) @ U.T


def mu_gain(P_from, P_to) -> float:
    """Smallest ``mu`` with ``x' P_to x <= mu * x' P_from x`` for all ``x``."""
    P_from = np.asarray(P_from, dtype=float)
    P_to = np.asarray(P_to, dtype=float)
    if P_from.shape != P_to.shape or P_from.ndim != 2:
        raise ValueError(f"dimension mismatch: {P_from.shape} vs {P_to.shape}")
    if np.array_equal(P_from, P_to):
        return 1.0
    S = _inv_sqrt(P_from)
    M = S @ P_to @ S
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])


@dataclass(frozen=True)
class GainTable:
    """Log-gains on the admissible edges and log-rates per mode.

    Stored in log form because that is how they enter every ratio and how
    users override them.
    """

    log_mu: Mapping[tuple, float]
    log_lambda: Mapping[Hashable, float]

    @classmethod
    def from_values(cls, mu: Mapping[tuple, float], lam: Mapping[Hashable, float]) -> "GainTable":
        return cls({e: math.log(v) for e, v in mu.items()}, {j: math.log(v) for j, v in lam.items()})

    @property
    def mu(self) -> dict:
        return {e: math.exp(v) for e, v in self.log_mu.items()}

    @property
    def lam(self) -> dict:
        return {j: math.exp(v) for j, v in self.log_lambda.items()}

    def classes(self) -> dict:
        """Stability classes implied by the signs of the log-rates."""
        return {j: StabilityClass.from_log_lambda(v) for j, v in self.log_lambda.items()}


def gain_table(certs: Mapping[Hashable, SubsystemCertificate], edges) -> GainTable:
    log_mu = {}
    for k, l in edges:
        if k == l:
            log_mu[(k, l)] = 0.0
        else:
            log_mu[(k, l)] = math.log(mu_gain(certs[k].P, certs[l].P))
    log_lambda = {}
    for j, c in certs.items():
        log_lambda[j] = 0.0 if c.cls is StabilityClass.MARGINALLY_STABLE else math.log(c.lam)
    return GainTable(log_mu, log_lambda)
