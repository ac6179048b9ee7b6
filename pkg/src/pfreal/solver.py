"""Solve the power flow system at real susceptances from a precomputed start set.

The start set (orbit representatives at a random complex parameter point)
is computed once per network by monodromy. Each call to :func:`solve_all`
then tracks one path per orbit, expands the orbits, repairs lost
endpoints with monodromy loops at the target, and classifies real roots.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from pfreal import _kernels
from pfreal.linalg import newton_refine
from pfreal.monodromy import (
    DEDUP_TOL, OrbitSet, StoppingRule, construct_seed, extend_orbits, is_nontrivial,
    monodromy_solve,
)
from pfreal.network import (
    ModelError, Network, PolySystem, build_system, cycle_graph,
    network_count_bounds, symmetry_group, trivial_solutions,
)
from pfreal.tracker import DEFAULT_OPTIONS, TrackOptions, random_unit_complex, track_batch

log = logging.getLogger(__name__)

REAL_TOL = 1e-8
REPAIR_ROUNDS = 3
REPAIR_LOOPS = 20
# endpoints this ill-conditioned sit on (or next to) a positive-dimensional component
DEGENERATE_COND = 1e8


def _c2l(a) -> list:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim == 1:
        return [[float(v.real), float(v.imag)] for v in a]
    return [_c2l(r) for r in a]


def _l2c(doc) -> np.ndarray:
    arr = np.asarray(doc, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


class IncompleteStartSet(RuntimeError):
    pass


@dataclass
class StartSet:
    network: Network
    b_hat: np.ndarray
    representatives: np.ndarray
    group: np.ndarray
    expected_nontrivial: int
    complete: bool
    manifest: dict = field(default_factory=dict)

    @property
    def group_order(self) -> int:
        return len(self.group)

    @property
    def n_paths(self) -> int:
        return len(self.representatives)

    @property
    def bipartite_action(self) -> bool:
        return self.group_order == 4

    def to_dict(self) -> dict:
        return {
            "network": self.network.to_dict(),
            "b_hat": _c2l(self.b_hat),
            "representatives": _c2l(self.representatives),
            "group": self.group.astype(int).tolist(),
            "expected_nontrivial": int(self.expected_nontrivial),
            "complete": bool(self.complete),
            "manifest": self.manifest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "StartSet":
        return cls(Network.from_dict(doc["network"]), _l2c(doc["b_hat"]),
                   _l2c(doc["representatives"]).reshape(-1, 2 * (doc["network"]["n"] - 1)),
                   np.asarray(doc["group"], dtype=float), int(doc["expected_nontrivial"]),
                   bool(doc["complete"]), dict(doc.get("manifest", {})))

    @classmethod
    def from_json(cls, text: str) -> "StartSet":
        return cls.from_dict(json.loads(text))

    @property
    def digest(self) -> str:
        """Content hash, excluding the manifest."""
        doc = self.to_dict()
        doc.pop("manifest")
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def build_start_set(net: Network, seed: int | None = None, bipartite: bool = True,
                    opts: TrackOptions = DEFAULT_OPTIONS,
                    stop: StoppingRule | None = None, attempts: int = 4) -> StartSet:
    """Seed + monodromy preprocessing for one network.

    If the loop budget runs out below a known count, a fresh seed point is
    drawn (up to ``attempts`` times); the most complete attempt is kept.
    """
    system = build_system(net)
    rng = np.random.default_rng(seed)
    group = symmetry_group(net, bipartite)
    stop = StoppingRule.for_system(system) if stop is None else stop
    best = None
    loops = 0
    for attempt in range(max(1, attempts)):
        sp = construct_seed(system, rng)
        orbits = monodromy_solve(system, sp, stop, rng, group, opts)
        loops += orbits.loops
        if best is None or orbits.n_points > best[1].n_points:
            best = (sp, orbits, attempt)
        if orbits.complete:
            break
    sp, orbits, attempt = best
    expected = stop.known_count if stop.known_count is not None else orbits.n_points
    manifest = {"seed": seed, "loops": loops, "attempts": attempt + 1, "dedup_tol": DEDUP_TOL,
                "group_order": len(group), "known_count": stop.known_count,
                "track_options": opts.__dict__.copy()}
    return StartSet(net, sp.b_hat, orbits.representatives, group, int(expected),
                    orbits.complete, manifest)


@dataclass
class SolutionSet:
    b: np.ndarray
    nontrivial: np.ndarray
    trivial: np.ndarray
    real_mask: np.ndarray
    expected_nontrivial: int
    degenerate: bool
    paths_tracked: int
    repair_loops: int = 0
    start_digest: str = ""

    @property
    def n_nontrivial(self) -> int:
        return len(self.nontrivial)

    @property
    def n_real_nontrivial(self) -> int:
        return int(np.sum(self.real_mask))

    @property
    def n_real(self) -> int:
        return self.n_real_nontrivial + len(self.trivial)

    @property
    def completeness(self) -> float:
        if self.expected_nontrivial == 0:
            return 1.0
        return self.n_nontrivial / self.expected_nontrivial

    @property
    def complete(self) -> bool:
        return self.n_nontrivial == self.expected_nontrivial and not self.degenerate

    @property
    def real_nontrivial(self) -> np.ndarray:
        return self.nontrivial[self.real_mask]

    def all_solutions(self) -> np.ndarray:
        return np.vstack((self.nontrivial.reshape(-1, self.trivial.shape[1]), self.trivial))

    def to_dict(self) -> dict:
        return {
            "b": np.asarray(self.b, dtype=float).tolist(),
            "nontrivial": _c2l(self.nontrivial) if len(self.nontrivial) else [],
            "real": self.real_mask.astype(bool).tolist(),
            "trivial": _c2l(self.trivial) if len(self.trivial) else [],
            "n_real_nontrivial": self.n_real_nontrivial,
            "n_real": self.n_real,
            "expected_nontrivial": self.expected_nontrivial,
            "completeness": self.completeness,
            "degenerate": self.degenerate,
            "paths_tracked": self.paths_tracked,
            "repair_loops": self.repair_loops,
            "start_set": self.start_digest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def classify_real(points, system: PolySystem, b, tol: float = REAL_TOL):
    """Real flags for refined points and the count of nontrivial real ones.

    A point is real when every imaginary part is below ``tol`` and Newton's
    method started from its real projection converges. Returns
    ``(mask, refined_points, nontrivial_real_count)``.
    """
    pts = np.asarray(points, dtype=np.complex128).reshape(-1, system.n_eqs)
    mask = np.zeros(len(pts), dtype=bool)
    out = pts.copy()
    for i, z in enumerate(pts):
        if np.max(np.abs(z.imag), initial=0.0) >= tol:
            continue
        r = newton_refine(system, b, z.real.astype(np.complex128))
        if r.converged and np.max(np.abs(r.point - z)) < math.sqrt(tol):
            mask[i] = True
            out[i] = r.point.real
    count = int(sum(1 for i in np.flatnonzero(mask) if is_nontrivial(out[i])))
    return mask, out, count


def _track_to(system, start: StartSet, b, rng, opts):
    g1, g2 = random_unit_complex(rng), random_unit_complex(rng)
    status, Z, _, _, _ = track_batch(system, _kernels.PARAMETER, start.representatives,
                                     start.b_hat, b, g1, g2, opts)
    return status, Z


def solve_all(net: Network, b, start: StartSet, rng: np.random.Generator | None = None,
              opts: TrackOptions = DEFAULT_OPTIONS, repair_rounds: int = REPAIR_ROUNDS,
              repair_loops: int = REPAIR_LOOPS, real_tol: float = REAL_TOL) -> SolutionSet:
    """All isolated solutions at real susceptances ``b`` (any nonzero scale)."""
    if not start.complete:
        raise IncompleteStartSet("start set is incomplete; rerun monodromy")
    if start.network != net:
        raise ModelError("start set belongs to a different network")
    b = np.asarray(b, dtype=float)
    if b.shape != (net.n_edges,):
        raise ValueError(f"need {net.n_edges} susceptances, got {b.shape}")
    norm = float(np.linalg.norm(b))
    if not np.isfinite(norm) or norm == 0.0:
        raise ValueError("susceptances must be finite and nonzero")
    rng = np.random.default_rng() if rng is None else rng
    system = build_system(net)
    bt = (b / norm).astype(np.complex128)
    zero_p = net.zero_injection

    orbits = OrbitSet(start.group)
    status, Z = _track_to(system, start, bt, rng, opts)
    singular = int(np.sum(status == _kernels.SINGULAR_END))
    for z in Z[status == _kernels.SUCCESS]:
        if (not zero_p or is_nontrivial(z)) and system.scaled_residual(z, bt) <= 1e-9:
            orbits.add(z)

    target = start.expected_nontrivial
    loops_used = 0
    if orbits.n_points < target:
        stop = StoppingRule(known_count=target)
        for _ in range(repair_rounds):
            if len(orbits) == 0:
                status, Z = _track_to(system, start, bt, rng, opts)
                singular += int(np.sum(status == _kernels.SINGULAR_END))
                for z in Z[status == _kernels.SUCCESS]:
                    if (not zero_p or is_nontrivial(z)) and system.scaled_residual(z, bt) <= 1e-9:
                        orbits.add(z)
                if len(orbits) == 0:
                    continue
            before = orbits.loops
            orbits.singular_ends = 0
            extend_orbits(system, bt, orbits, stop, rng, opts, max_loops=repair_loops)
            loops_used += orbits.loops - before
            singular += orbits.singular_ends
            if orbits.complete:
                break

    pts = orbits.expanded()
    found = len(pts)
    worst = max((system.scaled_condition(z, bt) for z in orbits.representatives),
                default=0.0)
    degenerate = found < target and (singular > 0 or worst > DEGENERATE_COND)
    if found > target:
        log.warning("found %d nontrivial solutions, more than the expected %d", found, target)
    mask, pts, _ = classify_real(pts, system, bt, real_tol)
    triv = trivial_solutions(net.n) if zero_p else np.zeros((0, net.n_vars), complex)
    return SolutionSet(b, pts, triv, mask, target, degenerate, start.n_paths,
                       loops_used, start.digest)


# --- theorem utilities -----------------------------------------------------

def max_real_construction(family: str, n: int) -> tuple[np.ndarray, int]:
    """Cycle susceptances attaining the generic maximum number of real solutions."""
    if family != "cycle":
        raise ModelError("only cycles have a known maximal construction")
    if n < 3:
        raise ModelError("need n >= 3")
    net = cycle_graph(n)
    b = np.ones(net.n_edges)
    if n % 4 == 0:
        b[net.edge_index(0, 1)] = -1.0
    return b, n * math.comb(n - 1, (n - 1) // 2)


def _rot(v, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def infinite_family_points(net: Network, rng: np.random.Generator, count: int = 50) -> np.ndarray:
    """Samples from the positive-dimensional real families at equal susceptances."""
    n = net.n
    fam = net.family
    pts = []
    for _ in range(count):
        V = np.zeros((n, 2))
        V[0] = (1.0, 0.0)
        if fam == "complete" and n >= 4:
            V[1] = (-1.0, 0.0)
            if n % 2 == 0:
                first = 2
            else:
                a = rng.uniform(0, 2 * math.pi)
                v3 = np.array([math.cos(a), math.sin(a)])
                V[3] = v3
                V[2] = _rot(v3, 2 * math.pi / 3)
                V[4] = _rot(v3, -2 * math.pi / 3)
                first = 5
            for k in range(first, n, 2):
                a = rng.uniform(0, 2 * math.pi)
                V[k] = (math.cos(a), math.sin(a))
                V[k + 1] = -V[k]
        elif fam == "cycle" and n % 4 == 0:
            u = rng.uniform(0, 2)
            incs = np.full(n, u)
            incs[rng.permutation(n)[: n // 2]] = 1.0 - u
            theta = math.pi * np.cumsum(incs)[: n - 1]
            V[1:] = np.column_stack((np.cos(theta), np.sin(theta)))
        else:
            raise ModelError(f"no infinite real family known for {net}")
        pts.append(np.concatenate((V[1:, 0], V[1:, 1])).astype(np.complex128))
    return np.array(pts)


def family_residuals(net: Network, b, samples: int = 50, rng=None) -> np.ndarray:
    rng = np.random.default_rng(0) if rng is None else rng
    system = build_system(net)
    return np.array([system.residual(z, b) for z in infinite_family_points(net, rng, samples)])


def verify_infinite_family(net: Network, b, samples: int = 50, rng=None,
                           tol: float = 1e-10) -> bool:
    """True iff every sampled family member solves the system at ``b``."""
    return bool(np.all(family_residuals(net, b, samples, rng) < tol))


def angle_sweep_count(net: Network, b, grid: int | None = None, iters: int = 40) -> int:
    """Nontrivial real solutions found by Newton polishing from an angle grid.

    Works in angle coordinates, where the circle equations hold identically
    and the flow at node k is ``sum_m b_km sin(theta_m - theta_k)``.
    """
    d = net.n - 1
    if grid is None:
        grid = max(4, int(round(4000 ** (1.0 / d))))
    b = np.asarray(b, dtype=float)
    E = np.array(net.edges)
    axes = [np.linspace(0, 2 * math.pi, grid, endpoint=False) + 0.1] * d
    th = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)

    def full(t):
        return np.hstack((np.zeros((len(t), 1)), t))

    def F_and_J(t):
        T = full(t)
        dk = T[:, E[:, 1]] - T[:, E[:, 0]]  # theta_m - theta_k
        s, c = np.sin(dk) * b, np.cos(dk) * b
        F = np.zeros((len(t), net.n))
        J = np.zeros((len(t), net.n, net.n))
        for e, (k, m) in enumerate(E):
            F[:, k] += s[:, e]
            F[:, m] -= s[:, e]
            J[:, k, m] += c[:, e]
            J[:, k, k] -= c[:, e]
            J[:, m, k] += c[:, e]
            J[:, m, m] -= c[:, e]
        return F[:, 1:], J[:, 1:, 1:]

    for _ in range(iters):
        F, J = F_and_J(th)
        th = th - np.einsum("nij,nj->ni", np.linalg.pinv(J, rcond=1e-12), F)
    F, _ = F_and_J(th)
    ok = np.max(np.abs(F), axis=1) < 1e-10
    sols = np.mod(th[ok], 2 * math.pi)
    nontriv = np.max(np.abs(np.sin(sols)), axis=1) > 1e-6
    found: list[np.ndarray] = []
    for s in sols[nontriv]:
        if all(np.max(np.abs(np.angle(np.exp(1j * (s - q))))) > 1e-6 for q in found):
            found.append(s)
    return len(found)


def check_tree_trivial(net: Network, trials: int = 100, rng=None,
                       grid: int | None = None) -> bool:
    """Angle-sweep check that random sphere susceptances give no nontrivial real solution."""
    if net.family != "tree":
        raise ModelError(f"{net} is not a tree")
    rng = np.random.default_rng(0) if rng is None else rng
    for _ in range(trials):
        b = rng.standard_normal(net.n_edges)
        b /= np.linalg.norm(b)
        if angle_sweep_count(net, b, grid) != 0:
            return False
    return True
