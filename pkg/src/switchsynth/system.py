"""A switched system: mode matrices plus the admissible-transition graph."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Mapping

import numpy as np

from .certificates import (
    DEFAULT_TOL_CLASS,
    GainTable,
    Subsystem,
    SubsystemCertificate,
    certificate_for,
    gain_table,
)
from .graph import TransitionGraph, build_graph

__all__ = ["SwitchedSystem"]


@dataclass
class SwitchedSystem:
    """Modes, transition graph and optional overrides.

    ``gains_override`` replaces the certificate-derived gains entirely (used
    when only log-gains are known); the matrices may then be absent.
    """

    graph: TransitionGraph
    subsystems: dict = field(default_factory=dict)
    q_matrices: dict = field(default_factory=dict)
    gains_override: GainTable | None = None
    epsilon: float | None = None
    tol_class: float = DEFAULT_TOL_CLASS

    def __post_init__(self):
        dims = {s.dim for s in self.subsystems.values()}
        if len(dims) > 1:
            raise ValueError(f"subsystems have mixed dimensions {sorted(dims)}")
        for k, s in self.subsystems.items():
            if s.id != k:
                raise ValueError(f"subsystem keyed {k!r} has id {s.id!r}")
        missing = [v for v in self.graph.vertices if v not in self.subsystems]
        if self.gains_override is None and missing:
            raise ValueError(f"no matrix for mode {missing[0]!r}")
        extra = [k for k in self.subsystems if k not in self.graph._index]
        if extra:
            raise ValueError(f"mode {extra[0]!r} is not a graph vertex")
        if self.gains_override is not None:
            for e in self.graph.edges:
                if e not in self.gains_override.log_mu:
                    raise ValueError(f"gains override lacks transition {e!r}")
            for v in self.graph.vertices:
                if v not in self.gains_override.log_lambda:
                    raise ValueError(f"gains override lacks mode {v!r}")

    @classmethod
    def from_matrices(cls, matrices: Mapping[Hashable, object], edges, **kwargs) -> "SwitchedSystem":
        subs = {k: Subsystem(k, A) for k, A in matrices.items()}
        return cls(build_graph(list(matrices), edges), subs, **kwargs)

    @property
    def modes(self) -> tuple:
        return self.graph.vertices

    @property
    def dim(self) -> int | None:
        for s in self.subsystems.values():
            return s.dim
        return None

    @cached_property
    def certificates(self) -> dict[Hashable, SubsystemCertificate]:
        return {
            k: certificate_for(s, self.q_matrices.get(k), self.tol_class)
            for k, s in self.subsystems.items()
        }

    @cached_property
    def gains(self) -> GainTable:
        if self.gains_override is not None:
            return self.gains_override
        return gain_table(self.certificates, self.graph.edges)

    @property
    def classes(self) -> dict:
        if self.gains_override is not None:
            return self.gains_override.classes()
        return {k: c.cls for k, c in self.certificates.items()}

    def matrix(self, mode) -> np.ndarray:
        try:
            return self.subsystems[mode].A
        except KeyError:
            raise KeyError(f"no matrix for mode {mode!r}") from None
