"""Seed construction and monodromy population of the nontrivial solution set.

Solutions are stored one per symmetry orbit. A seed is found by fixing a
random complex point on the product of circles and solving the (linear,
underdetermined) flow equations for the susceptances.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from pfreal import _kernels
from pfreal.linalg import RankError, nullspace_vector, particular_solution
from pfreal.network import PolySystem, network_count_bounds, symmetry_group
from pfreal.tracker import DEFAULT_OPTIONS, TrackOptions, random_unit_complex, track_batch

log = logging.getLogger(__name__)

DEDUP_TOL = 1e-6  # relative; large-norm roots are only accurate to ~1e-8
NONTRIVIAL_TOL = 1e-8


class SeedError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeedPair:
    b_hat: np.ndarray
    point: np.ndarray


@dataclass(frozen=True)
class StoppingRule:
    """Stop at a known nontrivial count, else after ``quiet_loops`` loops without news."""

    known_count: int | None = None
    quiet_loops: int = 10
    loop_budget: int = 500

    @classmethod
    def for_system(cls, system: PolySystem, **kw) -> "StoppingRule":
        bounds = network_count_bounds(system.network)
        if bounds is None:
            return cls(None, **kw)
        total, nontrivial = bounds
        return cls(nontrivial if system.network.zero_injection else total, **kw)


class OrbitSet:
    """Registry of solutions modulo a sign-pattern symmetry group."""

    def __init__(self, group: np.ndarray, tol: float = DEDUP_TOL):
        self.group = np.asarray(group, dtype=float)
        self.tol = tol
        self._reps: list[np.ndarray] = []
        self.n_points = 0  # total orbit members, counting orbit sizes
        self.complete = False
        self.loops = 0
        self.singular_ends = 0

    @property
    def group_order(self) -> int:
        return len(self.group)

    @property
    def representatives(self) -> np.ndarray:
        if not self._reps:
            return np.zeros((0, self.group.shape[1]), dtype=np.complex128)
        return np.array(self._reps)

    def __len__(self):
        return len(self._reps)

    def find(self, point) -> int:
        """Index of the representative equivalent to ``point``, or -1."""
        if not self._reps:
            return -1
        imgs = self.group * point  # (g, N)
        R = np.asarray(self._reps)
        d = np.max(np.abs(R[:, None, :] - imgs[None, :, :]), axis=2).min(axis=1)
        i = int(np.argmin(d))
        return i if d[i] <= self.tol * (1.0 + np.max(np.abs(point))) else -1

    def add(self, point) -> bool:
        point = np.asarray(point, dtype=np.complex128)
        if self.find(point) >= 0:
            return False
        self._reps.append(point.copy())
        self.n_points += orbit_size(point, self.group, self.tol)
        return True

    def expanded(self) -> np.ndarray:
        """All orbit members, deduplicated."""
        out = OrbitSet(self.group[:1], self.tol)
        for r in self._reps:
            for s in self.group:
                out.add(s * r)
        return out.representatives


def orbit_size(point, group, tol: float = DEDUP_TOL) -> int:
    imgs: list[np.ndarray] = []
    scale = tol * (1.0 + np.max(np.abs(point)))
    for s in group:
        q = s * point
        if all(np.max(np.abs(q - r)) > scale for r in imgs):
            imgs.append(q)
    return len(imgs)


def is_nontrivial(point, tol: float = NONTRIVIAL_TOL) -> bool:
    h = len(point) // 2
    return bool(np.max(np.abs(point[h:])) > tol)


def construct_seed(system: PolySystem, rng: np.random.Generator, retries: int = 10) -> SeedPair:
    """Random point on the circles and susceptances making it a solution."""
    net = system.network
    nm1 = net.n - 1
    last = None
    for _ in range(retries):
        x = rng.standard_normal(nm1) + 1j * rng.standard_normal(nm1)
        y = np.sqrt(1.0 - x * x)
        z = np.concatenate((x, y))
        A = system.flow_matrix(z)
        try:
            if net.zero_injection:
                b = nullspace_vector(A, rng)
            else:
                b = particular_solution(A, system.injection_array, rng)
        except (RankError, ValueError) as exc:
            last = exc
            continue
        if np.linalg.norm(b) == 0 or system.residual(z, b) > 1e-10:
            last = SeedError("seed residual too large")
            continue
        return SeedPair(b, z)
    raise SeedError(f"could not construct a seed after {retries} draws: {last}")


def random_parameters(rng: np.random.Generator, size: int, scale: float = 1.0) -> np.ndarray:
    v = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return scale * v / np.linalg.norm(v)


def _leg(system, points, b_from, b_to, rng, opts):
    """Track points along one parameter segment; returns (endpoints, status)."""
    g1, g2 = random_unit_complex(rng), random_unit_complex(rng)
    status, Z, _, _, _ = track_batch(system, _kernels.PARAMETER, points, b_from, b_to, g1, g2, opts)
    return Z, status


def loop_once(system: PolySystem, b_hat, points, rng: np.random.Generator,
              group=None, opts: TrackOptions = DEFAULT_OPTIONS,
              b1=None, b2=None, known: OrbitSet | None = None):
    """Transport ``points`` around a random triangle ``b_hat -> b1 -> b2 -> b_hat``.

    Returns ``(new_points, singular_ends)``: endpoints not equivalent to any
    known point under ``group``, and how many paths ended singular on the
    last leg (back at ``b_hat``).
    """
    points = np.asarray(points, dtype=np.complex128)
    if points.size == 0:
        raise ValueError("need at least one point to loop")
    if group is None:
        group = symmetry_group(system.network)
    b_hat = np.asarray(b_hat, dtype=np.complex128)
    scale = float(np.linalg.norm(b_hat))
    b1 = random_parameters(rng, b_hat.size, scale) if b1 is None else np.asarray(b1, complex)
    b2 = random_parameters(rng, b_hat.size, scale) if b2 is None else np.asarray(b2, complex)
    if known is None:
        known = OrbitSet(group)
        for p in points:
            known.add(p)
    cur = points
    singular = 0
    for leg, (bf, bt) in enumerate(((b_hat, b1), (b1, b2), (b2, b_hat))):
        Z, status = _leg(system, cur, bf, bt, rng, opts)
        if leg == 2:
            singular = int(np.sum(status == _kernels.SINGULAR_END))
        cur = Z[status == _kernels.SUCCESS]
        if len(cur) == 0:
            break
    zero_p = system.network.zero_injection
    fresh = OrbitSet(group)
    for z in cur:
        if zero_p and not is_nontrivial(z):
            continue
        if system.scaled_residual(z, b_hat) > 1e-9:
            continue
        if known.find(z) < 0:
            fresh.add(z)
    return fresh.representatives, singular


def monodromy_solve(system: PolySystem, seed: SeedPair, stop: StoppingRule | None = None,
                    rng: np.random.Generator | None = None, group=None,
                    opts: TrackOptions = DEFAULT_OPTIONS) -> OrbitSet:
    """Populate orbit representatives at ``seed.b_hat`` from one seed solution."""
    rng = np.random.default_rng() if rng is None else rng
    stop = StoppingRule.for_system(system) if stop is None else stop
    group = symmetry_group(system.network) if group is None else np.asarray(group)
    orbits = OrbitSet(group)
    orbits.add(seed.point)
    return extend_orbits(system, seed.b_hat, orbits, stop, rng, opts)


def extend_orbits(system, b, orbits: OrbitSet, stop: StoppingRule, rng, opts=DEFAULT_OPTIONS,
                  max_loops: int | None = None) -> OrbitSet:
    """Run loops at ``b`` until the stopping rule fires or the budget runs out."""
    target = stop.known_count
    budget = stop.loop_budget if max_loops is None else max_loops
    quiet = 0
    for _ in range(budget):
        if target is not None and orbits.n_points >= target:
            orbits.complete = True
            return orbits
        new, singular = loop_once(system, b, orbits.representatives, rng, orbits.group, opts,
                                  known=orbits)
        orbits.loops += 1
        orbits.singular_ends += singular
        added = sum(orbits.add(p) for p in new)
        if added:
            quiet = 0
            log.debug("loop %d: %d new orbits (total %d)", orbits.loops, added, len(orbits))
        else:
            quiet += 1
            if target is None and quiet >= stop.quiet_loops:
                orbits.complete = True
                return orbits
    orbits.complete = target is not None and orbits.n_points >= target
    if not orbits.complete:
        log.info("loop budget exhausted with %d orbits", len(orbits))
    return orbits
