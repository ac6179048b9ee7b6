import numpy as np
import pytest

from pfreal.network import cycle_graph
from pfreal.regions import (
    DEFAULT_COLORS, WHITE, RegionGrid, RegionSpec, read_ppm, render_image, sample_region,
)


@pytest.fixture(scope="module")
def c3_grid(starts):
    st = starts("cycle", 3)
    return sample_region(RegionSpec(st.network, width=40, height=20), st, seed=1)


def test_spec_validation():
    with pytest.raises(ValueError):
        RegionSpec(cycle_graph(4))  # four free edges
    with pytest.raises(ValueError):
        RegionSpec(cycle_graph(4), {(0, 2): 1.0})
    with pytest.raises(ValueError):
        RegionSpec(cycle_graph(5), {(0, 1): 1.0, (1, 2): 1.0}, colormap={0: (0, 0, 0)})
    spec = RegionSpec(cycle_graph(4), {(1, 0): 0.1})
    assert spec.free_edges == [(0, 3), (1, 2), (2, 3)]
    b = spec.susceptances([1.0, 2.0, 3.0])
    assert b.tolist() == [0.1, 1.0, 2.0, 3.0]


def test_directions_unit():
    T, P, V = RegionSpec(cycle_graph(3), width=8, height=4).directions()
    assert V.shape == (4, 8, 3) and np.allclose(np.linalg.norm(V, axis=-1), 1.0)
    assert np.all(P[0] > 0) and np.all(P[-1] < 0)


def test_c3_two_colors(c3_grid):
    g = c3_grid
    assert set(np.unique(g.counts[~g.degenerate])) <= {0, 2}
    assert g.metadata["counts_seen"] == [0, 2]


def test_antipodal_invariance(c3_grid):
    g = c3_grid
    H, W = g.counts.shape
    for r in range(H):
        for c in range(W):
            rr, cc = H - 1 - r, (c + W // 2) % W
            assert np.allclose(g.b[rr, cc], -g.b[r, c])
            if not (g.degenerate[r, c] or g.degenerate[rr, cc]):
                assert g.counts[r, c] == g.counts[rr, cc]


def test_c3_permutation_symmetry(starts):
    from pfreal.solver import solve_all
    st = starts("cycle", 3)
    rng = np.random.default_rng(0)
    T, P, V = RegionSpec(st.network, width=40, height=20).directions()
    cells = V.reshape(-1, 3)[rng.choice(800, 100, replace=False)]
    for v in cells:
        base = solve_all(st.network, v, st, rng).n_real_nontrivial
        for perm in ((1, 2, 0), (2, 0, 1), (1, 0, 2)):
            assert solve_all(st.network, v[list(perm)], st, rng).n_real_nontrivial == base


def test_c4_fixed_edge(starts):
    st = starts("cycle", 4)
    g = sample_region(RegionSpec(st.network, {(0, 1): 0.1}, width=24, height=12), st)
    assert set(np.unique(g.counts[~g.degenerate])) <= {0, 4}


def test_render(c3_grid, tmp_path):
    data = render_image(c3_grid)
    img = read_ppm(data)
    assert data.startswith(b"P6\n40 20\n255\n") and img.shape == (20, 40, 3)
    colors = {tuple(p) for p in img.reshape(-1, 3)}
    assert colors <= {DEFAULT_COLORS[0], DEFAULT_COLORS[2], WHITE}
    c3_grid.write_csv(tmp_path / "g.csv")
    lines = open(tmp_path / "g.csv").read().splitlines()
    assert lines[0].startswith("row,col,theta,phi,b_01") and len(lines) == 801


def test_render_uniform_and_missing_color():
    spec = RegionSpec(cycle_graph(3), width=4, height=2)
    z = np.zeros((2, 4))
    g = RegionGrid(spec, z, z, np.zeros((2, 4, 3)), z.astype(int), z.astype(bool))
    assert np.all(read_ppm(render_image(g)) == DEFAULT_COLORS[0])
    g.degenerate[0, 0] = True
    assert tuple(read_ppm(render_image(g))[0, 0]) == WHITE
    g.counts[1, 1] = 16
    with pytest.raises(KeyError, match="16"):
        render_image(g)
