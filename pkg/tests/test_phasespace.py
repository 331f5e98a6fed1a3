import numpy as np
import pytest

from phasetop import phasespace
from phasetop.errors import ConfigError
from phasetop.phasespace import Manifold, build_grid, fundamental_domain, tr_image


def test_tr_image_sphere_equator():
    th, ph = tr_image(Manifold.SPHERE, (np.pi / 2, 0.0))
    assert th == pytest.approx(np.pi / 2)
    assert ph == pytest.approx(np.pi)


def test_tr_image_torus_fixed_lines():
    assert tr_image(Manifold.TORUS, (1.0, 0.0)) == (1.0, 0.0)
    q, p = tr_image(Manifold.TORUS, (0.7, 1.3))
    assert (q, p) == (0.7, pytest.approx(2 * np.pi - 1.3))


def test_tr_image_sphere_no_fixed_points():
    grid = build_grid(Manifold.SPHERE, 8, 16)
    assert np.all(grid.tau_vertex != np.arange(grid.n_vertices))


def test_build_grid_rejects_odd_or_small():
    with pytest.raises(ConfigError):
        build_grid(Manifold.SPHERE, 7, 16)
    with pytest.raises(ConfigError):
        build_grid(Manifold.TORUS, 8, 6)


def test_sphere_grid_counts():
    grid = build_grid(Manifold.SPHERE, 8, 16)
    assert grid.n_vertices == 2 + 7 * 16
    assert grid.n_plaquettes == 8 * 16
    # pole-adjacent plaquettes are triangles: the pole corner is repeated
    first = grid.plaquettes[0]
    assert first[0] == 0 and first[3] == 0
    last = grid.plaquettes[-1]
    assert last[1] == grid.n_vertices - 1 and last[2] == grid.n_vertices - 1
    # equator is a grid line at row n_lat/2
    eq = grid.row_vids(4)
    assert np.allclose(grid.points[eq, 0], np.pi / 2)


def test_torus_grid_counts():
    grid = build_grid(Manifold.TORUS, 8, 8)
    assert grid.n_vertices == 64
    assert grid.n_plaquettes == 64
    # p = 0 and p = pi are grid rows fixed pointwise by tau
    for row in (0, 4):
        vids = grid.row_vids(row)
        assert np.array_equal(grid.tau_vertex[vids], vids)


@pytest.mark.parametrize("manifold,n_lat,n_lon", [
    (Manifold.SPHERE, 8, 16),
    (Manifold.SPHERE, 10, 12),
    (Manifold.TORUS, 8, 8),
    (Manifold.TORUS, 12, 10),
])
def test_tau_is_an_involution(manifold, n_lat, n_lon):
    grid = build_grid(manifold, n_lat, n_lon)
    assert np.array_equal(grid.tau_vertex[grid.tau_vertex], np.arange(grid.n_vertices))
    assert np.array_equal(grid.tau_plaq[grid.tau_plaq], np.arange(grid.n_plaquettes))
    # tau of a plaquette is the plaquette of the tau'd corners (as a set)
    for pid in range(0, grid.n_plaquettes, 7):
        img = grid.tau_plaq[pid]
        assert set(grid.tau_vertex[grid.plaquettes[pid]]) == set(grid.plaquettes[img])


def test_tau_vertex_coordinates_match():
    grid = build_grid(Manifold.SPHERE, 8, 16)
    pts = grid.points
    img = phasespace.tr_image_batch(Manifold.SPHERE, pts)
    got = pts[grid.tau_vertex]
    # poles carry a conventional phi = 0; compare theta everywhere, phi off-pole
    assert np.allclose(got[:, 0], img[:, 0], atol=1e-12)
    off_pole = (grid.vertex_lat > 0) & (grid.vertex_lat < 8)
    dphi = np.mod(got[off_pole, 1] - img[off_pole, 1], 2 * np.pi)
    dphi = np.minimum(dphi, 2 * np.pi - dphi)
    assert np.max(dphi) <= 1e-12


def test_sphere_tau_maps_hemispheres():
    grid = build_grid(Manifold.SPHERE, 8, 16)
    north = [grid.vid(i, j) for i in range(4) for j in range(16) if i > 0] + [0]
    south = set(
        [grid.vid(i, j) for i in range(5, 9) for j in range(16) if i < 8]
        + [grid.n_vertices - 1]
    )
    assert set(grid.tau_vertex[north]) == south
    # equator maps to itself shifted by half a turn
    eq = grid.row_vids(4)
    assert np.array_equal(grid.tau_vertex[eq], np.roll(eq, -8))


def test_fundamental_domain_sphere():
    grid = build_grid(Manifold.SPHERE, 8, 16)
    dom = fundamental_domain(grid)
    assert dom.n_vertices == 1 + 4 * 16
    (eq,) = dom.boundary_loops
    assert np.array_equal(eq, grid.row_vids(4))
    # covering: domain plus its tau image is everything; overlap is the boundary
    all_vids = set(dom.vertex_ids) | set(grid.tau_vertex[dom.vertex_ids])
    assert all_vids == set(range(grid.n_vertices))
    overlap = set(dom.vertex_ids) & set(grid.tau_vertex[dom.vertex_ids])
    assert overlap == set(eq.tolist())


def test_fundamental_domain_torus():
    grid = build_grid(Manifold.TORUS, 8, 8)
    dom = fundamental_domain(grid)
    assert dom.n_vertices == 5 * 8
    lo, hi = dom.boundary_loops
    assert np.array_equal(lo, grid.row_vids(0))
    assert np.array_equal(hi, grid.row_vids(4))
    all_vids = set(dom.vertex_ids) | set(grid.tau_vertex[dom.vertex_ids])
    assert all_vids == set(range(grid.n_vertices))
    overlap = set(dom.vertex_ids) & set(grid.tau_vertex[dom.vertex_ids])
    assert overlap == set(lo.tolist()) | set(hi.tolist())


def test_transport_chains_sphere():
    grid = build_grid(Manifold.SPHERE, 8, 16)
    dom = fundamental_domain(grid)
    seed, chains = phasespace.transport_chains(dom)
    assert seed == 0
    assert len(chains) == 16
    for chain in chains:
        assert chain[0] == 0
        assert grid.vertex_lat[chain[-1]] == 4


def test_plaquette_solid_angles_sum_to_sphere_area():
    grid = build_grid(Manifold.SPHERE, 16, 32)
    omega = phasespace.plaquette_solid_angles(grid)
    assert omega.sum() == pytest.approx(4 * np.pi)
    assert np.all(omega > 0)


def test_boundary_loop_samples_operation():
    sphere = fundamental_domain(build_grid(Manifold.SPHERE, 8, 16))
    (eq,) = phasespace.boundary_loop_samples(sphere)
    assert np.allclose(sphere.grid.points[eq, 0], np.pi / 2)
    assert np.all(np.diff(sphere.grid.points[eq, 1]) > 0)  # increasing phi
    torus = fundamental_domain(build_grid(Manifold.TORUS, 8, 8))
    lo, hi = phasespace.boundary_loop_samples(torus)
    assert np.allclose(torus.grid.points[lo, 1], 0.0)
    assert np.allclose(torus.grid.points[hi, 1], np.pi)
    for loop in (lo, hi):
        assert np.all(np.diff(torus.grid.points[loop, 0]) > 0)  # increasing q
