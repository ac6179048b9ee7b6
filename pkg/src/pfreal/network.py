"""Lossless PV-bus network model and the algebraic power flow system.

Node 0 is the slack bus with ``x0 = 1, y0 = 0``. For every other node ``k``
the unknowns are ``x_k, y_k`` and the equations are::

    x_k**2 + y_k**2 - 1 = 0
    sum_m b_km * (x_k * y_m - x_m * y_k) - P_k = 0

Points are stored as flat vectors ``(x_1, ..., x_{n-1}, y_1, ..., y_{n-1})``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, product

import numpy as np

from pfreal import _kernels


class ModelError(ValueError):
    """Raised for malformed or unsupported network descriptions."""


@dataclass(frozen=True)
class Network:
    """Connected simple graph with a slack node and optional injections.

    Edges are kept in canonical lexicographic order so that susceptance
    vectors are portable between runs.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    injections: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.n < 2:
            raise ModelError(f"need at least 2 nodes, got {self.n}")
        canon = []
        for e in self.edges:
            if len(e) != 2:
                raise ModelError(f"malformed edge {e!r}")
            k, m = int(e[0]), int(e[1])
            if k == m:
                raise ModelError(f"self loop at node {k}")
            if not (0 <= k < self.n and 0 <= m < self.n):
                raise ModelError(f"edge {e!r} references a node outside 0..{self.n - 1}")
            canon.append((min(k, m), max(k, m)))
        if len(set(canon)) != len(canon):
            raise ModelError("duplicate edges")
        object.__setattr__(self, "edges", tuple(sorted(canon)))
        inj = tuple(float(p) for p in self.injections) or (0.0,) * (self.n - 1)
        if len(inj) != self.n - 1:
            raise ModelError(f"expected {self.n - 1} injections, got {len(inj)}")
        object.__setattr__(self, "injections", inj)
        if not self._connected():
            raise ModelError("network graph is disconnected")

    def _connected(self) -> bool:
        seen = {0}
        queue = deque([0])
        while queue:
            k = queue.popleft()
            for m in self.neighbors[k]:
                if m not in seen:
                    seen.add(m)
                    queue.append(m)
        return len(seen) == self.n

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for k, m in self.edges:
            adj[k].append(m)
            adj[m].append(k)
        return tuple(tuple(sorted(a)) for a in adj)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_vars(self) -> int:
        return 2 * (self.n - 1)

    @property
    def zero_injection(self) -> bool:
        return all(p == 0.0 for p in self.injections)

    @cached_property
    def family(self) -> str | None:
        """``"cycle"``, ``"complete"``, ``"tree"`` or None, detected from structure."""
        n, m = self.n, self.n_edges
        if m == n - 1:
            return "tree"
        if n >= 3 and m == n * (n - 1) // 2:
            return "complete"
        if n >= 3 and m == n and all(len(a) == 2 for a in self.neighbors):
            return "cycle"
        return None

    @cached_property
    def bipartition(self) -> tuple[int, ...] | None:
        """Two-coloring with the slack node colored 0, or None if not bipartite."""
        color = [-1] * self.n
        color[0] = 0
        queue = deque([0])
        while queue:
            k = queue.popleft()
            for m in self.neighbors[k]:
                if color[m] < 0:
                    color[m] = 1 - color[k]
                    queue.append(m)
                elif color[m] == color[k]:
                    return None
        return tuple(color)

    @property
    def is_bipartite(self) -> bool:
        return self.bipartition is not None

    def edge_index(self, k: int, m: int) -> int:
        return self.edges.index((min(k, m), max(k, m)))

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges],
                "injections": list(self.injections)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Network":
        try:
            return cls(int(doc["n"]), tuple(tuple(e) for e in doc["edges"]),
                       tuple(doc.get("injections") or ()))
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed network document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Network":
        return cls.from_dict(json.loads(text))

    def __str__(self):
        return f"Network(n={self.n}, |E|={self.n_edges}, family={self.family})"


def cycle_graph(n: int) -> Network:
    if n < 3:
        raise ModelError("cycle needs n >= 3")
    return Network(n, tuple((k, (k + 1) % n) for k in range(n)))


def complete_graph(n: int) -> Network:
    if n < 3:
        raise ModelError("complete graph needs n >= 3")
    return Network(n, tuple(combinations(range(n), 2)))


def tree_from_edges(edges) -> Network:
    edges = [tuple(e) for e in edges]
    if not edges:
        raise ModelError("empty edge list")
    try:
        n = max(max(e) for e in edges) + 1
    except (TypeError, ValueError) as exc:
        raise ModelError(f"malformed edge list: {exc}") from exc
    if len(edges) != n - 1:
        raise ModelError(f"{len(edges)} edges on {n} nodes is not a tree")
    return Network(n, tuple(edges))  # raises if disconnected


def parse_topology(spec: str) -> Network:
    """Parse ``cycle:N``, ``complete:N`` or ``tree:0-1,1-2,...``."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "cycle":
            return cycle_graph(int(arg))
        if kind == "complete":
            return complete_graph(int(arg))
        if kind == "tree":
            pairs = [tuple(int(v) for v in tok.split("-")) for tok in arg.split(",") if tok]
            return tree_from_edges(pairs)
    except ValueError as exc:
        raise ModelError(f"bad topology {spec!r}: {exc}") from exc
    raise ModelError(f"unknown topology {spec!r}; use cycle:N, complete:N or tree:a-b,...")


@dataclass(frozen=True)
class PolySystem:
    """Structured evaluator for the power flow equations of one network.

    Circle equations occupy rows ``0..n-2`` and flow equations rows
    ``n-1..2n-3``. Parameters ``b`` are susceptances in canonical edge order.
    """

    network: Network

    @property
    def n(self) -> int:
        return self.network.n

    @property
    def n_eqs(self) -> int:
        return self.network.n_vars

    @property
    def n_params(self) -> int:
        return self.network.n_edges

    @cached_property
    def edge_array(self) -> np.ndarray:
        return np.array(self.network.edges, dtype=np.int64).reshape(-1, 2)

    @cached_property
    def injection_array(self) -> np.ndarray:
        return np.array(self.network.injections, dtype=np.complex128)

    def _check(self, z, b):
        z = np.asarray(z, dtype=np.complex128)
        b = np.asarray(b, dtype=np.complex128)
        if z.shape != (self.n_eqs,):
            raise ValueError(f"point must have {self.n_eqs} coordinates, got {z.shape}")
        if b.shape != (self.n_params,):
            raise ValueError(f"need {self.n_params} susceptances, got {b.shape}")
        return z, b

    def evaluate(self, z, b) -> np.ndarray:
        z, b = self._check(z, b)
        return _kernels.eval_system(z, b, self.edge_array, self.n, self.injection_array)

    def jacobian(self, z, b) -> np.ndarray:
        z, b = self._check(z, b)
        return _kernels.jacobian(z, b, self.edge_array, self.n)

    def residual(self, z, b) -> float:
        return float(np.max(np.abs(self.evaluate(z, b)), initial=0.0))

    def scaled_residual(self, z, b) -> float:
        """Residual divided by ``max(1, |z|**2)``, the rounding scale of the quadratics."""
        z = np.asarray(z, dtype=np.complex128)
        return self.residual(z, b) / max(1.0, float(np.max(np.abs(z), initial=0.0)) ** 2)

    def scaled_condition(self, z, b) -> float:
        """Condition number of the row/column-equilibrated Jacobian at ``z``."""
        z, b = self._check(z, b)
        J = _kernels.jacobian(z, b, self.edge_array, self.n)
        return float(_kernels.cond_scaled(J, z, 0.0))

    def flow_matrix(self, z) -> np.ndarray:
        """Coefficients ``A`` with ``flows(z, b) = A @ b`` (linear in ``b``)."""
        z = np.asarray(z, dtype=np.complex128)
        nm1 = self.n - 1
        A = np.zeros((nm1, self.n_params), dtype=np.complex128)
        x = np.concatenate(([1.0], z[:nm1]))
        y = np.concatenate(([0.0], z[nm1:]))
        for e, (k, m) in enumerate(self.network.edges):
            term = x[k] * y[m] - x[m] * y[k]
            if k > 0:
                A[k - 1, e] += term
            if m > 0:
                A[m - 1, e] -= term
        return A

    def constant_terms(self) -> np.ndarray:
        """Constant term of every equation (``-1`` for circles, ``-P_k`` for flows)."""
        nm1 = self.n - 1
        return np.concatenate((-np.ones(nm1), -np.asarray(self.network.injections)))


def build_system(net: Network) -> PolySystem:
    return PolySystem(net)


def split_point(z) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z)
    h = z.shape[-1] // 2
    return z[..., :h], z[..., h:]


def trivial_solutions(n: int) -> np.ndarray:
    """All ``2**(n-1)`` points with ``y = 0`` and ``x_k = +-1``, as rows."""
    if n < 2:
        raise ModelError("need n >= 2")
    xs = np.array(list(product((1.0, -1.0), repeat=n - 1)))
    return np.hstack((xs, np.zeros_like(xs))).astype(np.complex128)


def solution_count_bounds(family: str, n: int) -> tuple[int, int] | None:
    """Generic number of C* solutions and the nontrivial part, or None if unknown."""
    if n < 3:
        raise ModelError("count formulas need n >= 3")
    if family == "complete":
        total = math.comb(2 * n - 2, n - 1)
    elif family == "cycle":
        total = n * math.comb(n - 1, (n - 1) // 2)
    else:
        return None
    return total, total - 2 ** (n - 1)


def network_count_bounds(net: Network) -> tuple[int, int] | None:
    if net.family in ("cycle", "complete"):
        return solution_count_bounds(net.family, net.n)
    return None


def symmetry_group(net: Network, bipartite: bool = True) -> np.ndarray:
    """Sign patterns ``s`` (shape ``(g, 2(n-1))``) such that ``s * z`` maps solutions to solutions.

    Zero injection: y-negation, plus for bipartite graphs negation of every
    node in the class opposite the slack (order 4). Nonzero injection on a
    bipartite graph: the single involution fixing the power flows.
    Otherwise only the identity. ``bipartite=False`` ignores the bipartite
    actions.
    """
    nm1 = net.n - 1
    ident = np.ones(2 * nm1)
    yneg = np.concatenate((np.ones(nm1), -np.ones(nm1)))
    color = net.bipartition if bipartite else None
    if net.zero_injection:
        if color is None:
            return np.vstack((ident, yneg))
        far = np.array([-1.0 if color[k] == 1 else 1.0 for k in range(1, net.n)])
        flip = np.concatenate((far, far))
        return np.vstack((ident, yneg, flip, flip * yneg))
    if color is None:
        return ident[None, :]
    # slack class: (x, -y); opposite class: (-x, y)
    sx = np.array([-1.0 if color[k] == 1 else 1.0 for k in range(1, net.n)])
    return np.vstack((ident, np.concatenate((sx, -sx))))


def symmetry_orbit(point, net: Network, tol: float = 1e-12,
                   bipartite: bool = True) -> np.ndarray:
    """Distinct images of ``point`` under the network's symmetry group."""
    point = np.asarray(point, dtype=np.complex128)
    if point.shape != (net.n_vars,):
        raise ValueError(f"point must have {net.n_vars} coordinates")
    out: list[np.ndarray] = []
    for s in symmetry_group(net, bipartite):
        img = s * point
        if all(np.max(np.abs(img - q)) > tol for q in out):
            out.append(img)
    return np.array(out)


def verify_binomial_identity(k: int) -> bool:
    """Check ``sum_m C(2k-1, m) |2 + 2m - 2k| == 2k C(2k-1, k-1)`` in exact integers."""
    if k < 1:
        raise ValueError("k must be >= 1")
    lhs = sum(math.comb(2 * k - 1, m) * abs(2 + 2 * m - 2 * k) for m in range(2 * k))
    return lhs == 2 * k * math.comb(2 * k - 1, k - 1)
