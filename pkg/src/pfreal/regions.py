"""Solution regions on a 2-sphere slice of susceptance space.

Three edges are free and follow a unit direction ``(theta, phi)`` on an
equirectangular grid; every other edge is held at a fixed value. Each cell
is colored by its number of nontrivial real solutions.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from pfreal.distribution import trial_rng
from pfreal.network import Network, network_count_bounds
from pfreal.solver import StartSet, solve_all

log = logging.getLogger(__name__)

DEFAULT_COLORS: dict[int, tuple[int, int, int]] = {
    0: (0, 0, 255),      # blue
    2: (255, 0, 0),      # red
    4: (0, 160, 0),      # green
    6: (128, 0, 128),    # purple
    8: (255, 255, 0),    # yellow
    10: (0, 0, 0),       # black
    12: (255, 165, 0),   # orange
    14: (255, 192, 203),  # pink
}
WHITE = (255, 255, 255)
DEGENERATE_WARN = 0.05


@dataclass(frozen=True)
class RegionSpec:
    network: Network
    fixed: dict = field(default_factory=dict)  # (k, m) -> susceptance
    width: int = 400
    height: int = 200
    colormap: dict = field(default_factory=lambda: dict(DEFAULT_COLORS))

    def __post_init__(self):
        fixed = {}
        for e, v in self.fixed.items():
            k, m = sorted(int(i) for i in e)
            if (k, m) not in self.network.edges:
                raise ValueError(f"fixed edge {e!r} is not in the network")
            fixed[(k, m)] = float(v)
        object.__setattr__(self, "fixed", fixed)
        if len(self.free_edges) != 3:
            raise ValueError(f"need exactly 3 free edges, got {len(self.free_edges)}")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        bounds = network_count_bounds(self.network)
        if bounds is not None:
            missing = [c for c in range(0, bounds[1] + 1, 2) if c not in self.colormap]
            if missing:
                raise ValueError(f"colormap lacks counts {missing}")

    @property
    def free_edges(self) -> list[tuple[int, int]]:
        return [e for e in self.network.edges if e not in self.fixed]

    def directions(self):
        """Cell-center angles and unit vectors; row 0 is the northernmost band."""
        theta = -np.pi + (np.arange(self.width) + 0.5) * (2 * np.pi / self.width)
        phi = np.pi / 2 - (np.arange(self.height) + 0.5) * (np.pi / self.height)
        T, P = np.meshgrid(theta, phi)
        V = np.stack((np.cos(P) * np.cos(T), np.cos(P) * np.sin(T), np.sin(P)), axis=-1)
        return T, P, V

    def susceptances(self, v) -> np.ndarray:
        b = np.empty(self.network.n_edges)
        free = iter(v)
        for i, e in enumerate(self.network.edges):
            b[i] = self.fixed[e] if e in self.fixed else next(free)
        return b


@dataclass
class RegionGrid:
    spec: RegionSpec
    theta: np.ndarray
    phi: np.ndarray
    b: np.ndarray          # (height, width, |E|)
    counts: np.ndarray     # (height, width)
    degenerate: np.ndarray  # (height, width) bool
    metadata: dict = field(default_factory=dict)

    def write_csv(self, path) -> None:
        names = [f"b_{k}{m}" if max(k, m) < 10 else f"b_{k}_{m}" for k, m in self.spec.network.edges]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "theta", "phi", *names, "count", "degenerate"])
            H, W = self.counts.shape
            for r in range(H):
                for c in range(W):
                    w.writerow([r, c, repr(float(self.theta[r, c])), repr(float(self.phi[r, c])),
                                *(repr(float(x)) for x in self.b[r, c]),
                                int(self.counts[r, c]), int(self.degenerate[r, c])])


def _solve_cells(args):
    spec, start, seed, cells = args
    out = []
    for idx, b in cells:
        sol = solve_all(spec.network, b, start, trial_rng(seed, idx))
        out.append((idx, sol.n_real_nontrivial, sol.degenerate or not sol.complete))
    return out


def sample_region(spec: RegionSpec, start: StartSet, seed: int = 0, workers: int = 1,
                  chunk: int = 2000) -> RegionGrid:
    """Count nontrivial real solutions at every grid direction."""
    if not start.complete:
        raise ValueError("start set must be complete")
    if start.network != spec.network:
        raise ValueError("start set belongs to a different network")
    T, P, V = spec.directions()
    H, W = T.shape
    B = np.array([spec.susceptances(v) for v in V.reshape(-1, 3)]).reshape(H, W, -1)
    cells = list(enumerate(B.reshape(H * W, -1)))
    jobs = [(spec, start, seed, cells[k:k + chunk]) for k in range(0, len(cells), chunk)]
    counts = np.zeros(H * W, dtype=int)
    degenerate = np.zeros(H * W, dtype=bool)
    if workers <= 1 or len(jobs) <= 1:
        results = map(_solve_cells, jobs)
    else:
        pool = ProcessPoolExecutor(workers)
        results = pool.map(_solve_cells, jobs)
    for batch in results:
        for idx, count, bad in batch:
            counts[idx] = count
            degenerate[idx] = bad
    if workers > 1 and len(jobs) > 1:
        pool.shutdown()
    frac = float(degenerate.mean())
    meta = {"width": W, "height": H, "seed": seed, "free_edges": [list(e) for e in spec.free_edges],
            "fixed": {f"{k}-{m}": v for (k, m), v in spec.fixed.items()},
            "degenerate_cells": int(degenerate.sum()), "degenerate_fraction": frac,
            "counts_seen": sorted({int(c) for c in counts[~degenerate]})}
    if frac > DEGENERATE_WARN:
        meta["warning"] = f"{frac:.1%} of cells degenerate or incomplete"
        log.warning(meta["warning"])
    return RegionGrid(spec, T, P, B, counts.reshape(H, W), degenerate.reshape(H, W), meta)


def render_image(grid: RegionGrid, colormap: dict | None = None) -> bytes:
    """Binary PPM (P6), one pixel per cell; degenerate cells are white."""
    cmap = grid.spec.colormap if colormap is None else colormap
    H, W = grid.counts.shape
    seen = {int(c) for c in grid.counts[~grid.degenerate]}
    missing = sorted(seen - set(cmap))
    if missing:
        raise KeyError(f"no color for counts {missing}")
    lut = {k: np.array(v, dtype=np.uint8) for k, v in cmap.items()}
    img = np.empty((H, W, 3), dtype=np.uint8)
    for r in range(H):
        for c in range(W):
            img[r, c] = WHITE if grid.degenerate[r, c] else lut[int(grid.counts[r, c])]
    return f"P6\n{W} {H}\n255\n".encode() + img.tobytes()


def read_ppm(data: bytes) -> np.ndarray:
    """Pixels of a P6 image as an ``(H, W, 3)`` uint8 array."""
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6" or int(parts[3]) != 255:
        raise ValueError("not an 8-bit P6 image")
    W, H = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4], dtype=np.uint8, count=H * W * 3).reshape(H, W, 3)
