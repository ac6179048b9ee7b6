"""Predictor-corrector path tracking for total-degree and parameter homotopies.

The predictor is classical RK4 on the Davidenko equation
``dz/dt = -H_z^{-1} H_t``; the corrector is at most ``corrector_iters``
Newton steps. Steps are halved on failure and grown by 1.5 after four
consecutive accepted steps.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from pfreal import _kernels

# accepted steps satisfy |H| <= max(corrector_tol, ROUNDING_FLOOR * |z|**2)
ROUNDING_FLOOR = _kernels.ROUNDING_FLOOR
from pfreal.linalg import SINGULAR_REL_TOL
from pfreal.network import PolySystem


class PathStatus(enum.IntEnum):
    SUCCESS = _kernels.SUCCESS
    DIVERGED = _kernels.DIVERGED
    MAX_STEPS = _kernels.MAX_STEPS
    SINGULAR_END = _kernels.SINGULAR_END


@dataclass(frozen=True)
class TrackOptions:
    initial_step: float = 0.05
    min_step: float = 1e-6
    max_step: float = 0.1
    corrector_tol: float = 1e-7
    corrector_iters: int = 3
    divergence_bound: float = 1e8
    max_steps: int = 10_000
    endgame_tol: float = 1e-12
    endgame_iters: int = 20
    max_condition: float = 1e12

    def __post_init__(self):
        if not 0 < self.min_step <= self.max_step < 1:
            raise ValueError("need 0 < min_step <= max_step < 1")
        if not self.min_step <= self.initial_step <= self.max_step:
            raise ValueError("initial_step outside [min_step, max_step]")

    def as_tuple(self):
        return (self.initial_step, self.min_step, self.max_step, self.corrector_tol,
                self.corrector_iters, self.divergence_bound, self.max_steps,
                self.endgame_tol, self.endgame_iters, self.max_condition, SINGULAR_REL_TOL)


DEFAULT_OPTIONS = TrackOptions()


def random_unit_complex(rng: np.random.Generator) -> complex:
    return complex(np.exp(2j * np.pi * rng.random()))


@dataclass(frozen=True)
class TotalDegree:
    """``gamma (1-t) G(z) + t F(z)`` with ``G_i = z_i**2 - 1``."""

    system: PolySystem
    target: np.ndarray
    gamma: complex

    kind = _kernels.TOTAL_DEGREE

    def kernel_args(self):
        b = np.asarray(self.target, dtype=np.complex128)
        return b, b, self.gamma, self.gamma

    def params_at(self, t: float) -> np.ndarray:
        return np.asarray(self.target, dtype=np.complex128)


@dataclass(frozen=True)
class ParameterSegment:
    """``F(z, p(t))`` with ``p(t) = (g1(1-t) b_from + g2 t b_to) / (t g2 + (1-t) g1)``."""

    system: PolySystem
    b_from: np.ndarray
    b_to: np.ndarray
    gamma1: complex
    gamma2: complex

    kind = _kernels.PARAMETER

    def kernel_args(self):
        return (np.asarray(self.b_from, dtype=np.complex128),
                np.asarray(self.b_to, dtype=np.complex128), self.gamma1, self.gamma2)

    def params_at(self, t: float) -> np.ndarray:
        bf, bt, g1, g2 = self.kernel_args()
        return _kernels.segment_params(float(t), bf, bt, g1, g2)


Homotopy = TotalDegree | ParameterSegment


@dataclass
class PathResult:
    status: PathStatus
    endpoint: np.ndarray
    steps: int
    residual: float
    condition: float = float("nan")
    trace: np.ndarray | None = field(default=None, repr=False)

    @property
    def success(self) -> bool:
        return self.status == PathStatus.SUCCESS


def total_degree_start(system: PolySystem, b, rng: np.random.Generator):
    """Total-degree homotopy to ``F(., b)`` and its ``2**(2(n-1))`` start points."""
    b = np.asarray(b, dtype=np.complex128)
    if b.shape != (system.n_params,):
        raise ValueError(f"need {system.n_params} parameters")
    hom = TotalDegree(system, b, random_unit_complex(rng))
    starts = np.array(list(product((1.0, -1.0), repeat=system.n_eqs)), dtype=np.complex128)
    return hom, starts


def parameter_segment(system: PolySystem, b_from, b_to, rng: np.random.Generator,
                      gammas: tuple[complex, complex] | None = None) -> ParameterSegment:
    b_from = np.asarray(b_from, dtype=np.complex128)
    b_to = np.asarray(b_to, dtype=np.complex128)
    if b_from.shape != b_to.shape:
        raise ValueError("parameter vectors differ in length")
    if gammas is None:
        gammas = (random_unit_complex(rng), random_unit_complex(rng))
    return ParameterSegment(system, b_from, b_to, complex(gammas[0]), complex(gammas[1]))


def homotopy_residual(hom: Homotopy, z, t: float) -> float:
    bf, bt, g1, g2 = hom.kernel_args()
    s = hom.system
    H, _, _ = _kernels.hom_eval(hom.kind, np.asarray(z, dtype=np.complex128), float(t),
                                bf, bt, g1, g2, s.edge_array, s.n, s.injection_array)
    return float(np.max(np.abs(H)))


def track_path(hom: Homotopy, start, opts: TrackOptions = DEFAULT_OPTIONS,
               record: bool = False) -> PathResult:
    z0 = np.asarray(start, dtype=np.complex128)
    bf, bt, g1, g2 = hom.kernel_args()
    s = hom.system
    status, z, steps, res, cond, trace = _kernels.track(
        hom.kind, z0, bf, bt, g1, g2, s.edge_array, s.n, s.injection_array,
        *opts.as_tuple(), record)
    return PathResult(PathStatus(status), z, int(steps), float(res), float(cond),
                      trace if record else None)


def track_all(hom: Homotopy, starts, opts: TrackOptions = DEFAULT_OPTIONS) -> list[PathResult]:
    """Track every start point; results are in start order."""
    starts = np.asarray(starts, dtype=np.complex128)
    if starts.size == 0:
        return []
    status, Z, steps, res, cond = track_batch(hom.system, hom.kind, starts,
                                              *hom.kernel_args(), opts)
    return [PathResult(PathStatus(int(s)), Z[i], int(steps[i]), float(res[i]), float(cond[i]))
            for i, s in enumerate(status)]


def track_batch(system: PolySystem, kind: int, starts, b_from, b_to, g1, g2,
                opts: TrackOptions = DEFAULT_OPTIONS):
    """Array-level batch tracking; ``g1``/``g2`` may be scalars or per-path arrays."""
    starts = np.ascontiguousarray(starts, dtype=np.complex128)
    m = starts.shape[0]
    G1 = np.broadcast_to(np.asarray(g1, dtype=np.complex128), (m,)).copy()
    G2 = np.broadcast_to(np.asarray(g2, dtype=np.complex128), (m,)).copy()
    return _kernels.track_many(kind, starts, np.asarray(b_from, dtype=np.complex128),
                               np.asarray(b_to, dtype=np.complex128), G1, G2,
                               system.edge_array, system.n, system.injection_array,
                               *opts.as_tuple())


def success_fraction(results: Sequence[PathResult]) -> float:
    if not results:
        return 1.0
    return sum(r.success for r in results) / len(results)


def write_trace_csv(result: PathResult, path) -> None:
    """Write a recorded trace as ``step,t,residual,norm`` rows."""
    if result.trace is None:
        raise ValueError("path was tracked without record=True")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "residual", "norm"])
        for i, (t, r, nz) in enumerate(result.trace):
            w.writerow([i, repr(float(t)), repr(float(r)), repr(float(nz))])
