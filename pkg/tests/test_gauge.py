import numpy as np
import pytest

from phasetop import bands, gauge, invariants, models, numkit
from phasetop.errors import DomainError
from phasetop.phasespace import Manifold, build_grid, fundamental_domain


def rotor_equator_loop(n_lat=16, n_lon=32, band=(0, 0)):
    h = models.rotor_spin(0.5)
    grid = build_grid(Manifold.SPHERE, n_lat, n_lon)
    spec = bands.spectrum_on_grid(h, grid)
    group = bands.group_for_range(spec, band[0], band[1], 0.5)
    dom = fundamental_domain(grid)
    frame = bands.smooth_frame(h, group, dom, spectrum=spec)
    return h, grid, dom, frame, bands.transition_loop_sphere(frame, h.t)


# ---------------------------------------------------------------------------
# normal forms


def test_normal_form_scalar():
    loop = gauge.normal_form_loop(1, 1, 32)
    phi = 2 * np.pi * np.arange(32) / 32
    assert np.allclose(loop.samples[:, 0, 0], np.exp(1j * phi))
    assert loop.symmetry_residual <= 1e-12


def test_normal_form_rank2_winds_twice():
    loop = gauge.normal_form_loop(2, 2, 64)
    assert np.allclose(loop.samples[0], np.eye(2))
    assert numkit.winding_number(loop.det_loop()) == 2
    assert loop.symmetry_residual <= 1e-12


def test_normal_form_parity_violation():
    with pytest.raises(DomainError):
        gauge.normal_form_loop(0, 1, 32)


# ---------------------------------------------------------------------------
# boundary gauge solve


def test_solve_gauge_identity_case():
    _, _, _, _, u = rotor_equator_loop()
    w = gauge.solve_equator_gauge(u, u)
    assert numkit.max_abs(w.samples[0] - np.eye(1)) <= 1e-12
    assert w.residual_pi <= 1e-12 and w.residual_2pi <= 1e-12
    assert gauge.gauge_relation_residual(u, u, w) <= 1e-10
    assert gauge.winding_obstruction(w) == 0


def test_solve_gauge_against_normal_form():
    h, grid, dom, frame, u = rotor_equator_loop()
    c = invariants.chern_winding_sphere(u)
    v = gauge.normal_form_loop(c, 1, grid.n_lon)
    w = gauge.solve_equator_gauge(u, v)
    assert w.residual_pi <= 1e-8
    assert w.residual_2pi <= 1e-8
    assert gauge.gauge_relation_residual(u, v, w) <= 1e-8
    assert gauge.winding_obstruction(w) == 0


@pytest.mark.parametrize("c_u,c_v,n_b", [(1, 1, 1), (1, 3, 1), (1, -3, 1),
                                         (2, 2, 2), (0, 4, 2), (-2, 2, 4)])
def test_obstruction_is_half_winding_difference(c_u, c_v, n_b):
    u = gauge.normal_form_loop(c_u, n_b, 128)
    v = gauge.normal_form_loop(c_v, n_b, 128)
    w = gauge.solve_equator_gauge(u, v)
    assert w.residual_pi <= 1e-10 and w.residual_2pi <= 1e-10
    assert gauge.winding_obstruction(w) == (c_v - c_u) // 2


def test_solve_gauge_rank2_model_loop():
    h = models.kramers_pair_sphere(epsilon=0.1, seed=0)
    grid = build_grid(Manifold.SPHERE, 16, 64)
    spec = bands.spectrum_on_grid(h, grid)
    group = bands.group_for_range(spec, 0, 1, 0.05)
    dom = fundamental_domain(grid)
    frame = bands.smooth_frame(h, group, dom, spectrum=spec)
    u = bands.transition_loop_sphere(frame, h.t)
    c = invariants.chern_winding_sphere(u)
    v = gauge.normal_form_loop(c, 2, grid.n_lon)
    w = gauge.solve_equator_gauge(u, v)
    assert w.residual_pi <= 1e-8 and w.residual_2pi <= 1e-8
    assert gauge.gauge_relation_residual(u, v, w) <= 1e-8
    assert gauge.winding_obstruction(w) == 0


# ---------------------------------------------------------------------------
# disk extension


def test_extend_identity_loop():
    _, grid, dom, _, _ = rotor_equator_loop()
    w = gauge.GaugeLoop(
        samples=np.broadcast_to(np.eye(1, dtype=complex), (grid.n_lon, 1, 1)).copy(),
        residual_pi=0.0, residual_2pi=0.0,
    )
    ext = gauge.extend_to_disk(w, dom)
    assert numkit.max_abs(ext.values - 1.0) <= 1e-12


def test_extend_contractible_scalar_loop_matches_explicit():
    # boundary e^{i sin(phi)} has winding 0 and the explicit interior field
    # e^{i r sin(phi)} extends it; the relaxed extension stays near it
    n_lat, n_lon = 16, 64
    grid = build_grid(Manifold.SPHERE, n_lat, n_lon)
    dom = fundamental_domain(grid)
    phi = 2 * np.pi * np.arange(n_lon) / n_lon
    w = gauge.GaugeLoop(
        samples=np.exp(1j * np.sin(phi))[:, None, None],
        residual_pi=0.0, residual_2pi=0.0,
    )
    ext = gauge.extend_to_disk(w, dom)
    eq = dom.local_index[dom.boundary_loops[0]]
    assert numkit.max_abs(ext.values[eq] - w.samples) <= 1e-12
    r = grid.vertex_lat[dom.vertex_ids] / (n_lat // 2)
    explicit = np.exp(1j * r * np.sin(phi[grid.vertex_lon[dom.vertex_ids]]))
    mismatch = np.max(np.abs(np.angle(ext.values[:, 0, 0] / explicit)))
    assert mismatch <= 0.35  # graph-harmonic vs separable profile, loose bound


def test_extend_rejects_nonzero_winding():
    n_lon = 32
    grid = build_grid(Manifold.SPHERE, 16, n_lon)
    dom = fundamental_domain(grid)
    phi = 2 * np.pi * np.arange(n_lon) / n_lon
    w = gauge.GaugeLoop(samples=np.exp(1j * phi)[:, None, None],
                        residual_pi=0.0, residual_2pi=0.0)
    with pytest.raises(DomainError):
        gauge.extend_to_disk(w, dom)


def test_extension_regauges_to_normal_form():
    h, grid, dom, frame, u = rotor_equator_loop()
    c = invariants.chern_winding_sphere(u)
    v = gauge.normal_form_loop(c, 1, grid.n_lon)
    w = gauge.solve_equator_gauge(u, v)
    ext = gauge.extend_to_disk(w, dom)
    regauged = gauge.regauge_frame(frame, ext)
    vloop = bands.transition_loop_sphere(regauged, h.t)
    assert numkit.max_abs(vloop.samples - v.samples) <= 1e-6


# ---------------------------------------------------------------------------
# torus skew congruence normal form


def torus_line_loops(epsilon=0.0, seed=2, n_lat=16, n_lon=128):
    h = models.torus_doubled_chern(m=1.0, epsilon=epsilon, seed=seed)
    grid = build_grid(Manifold.TORUS, n_lat, n_lon)
    spec = bands.spectrum_on_grid(h, grid)
    group = bands.group_for_range(spec, 0, 1, 0.05)
    dom = fundamental_domain(grid)
    frame = bands.smooth_frame(h, group, dom, spectrum=spec)
    u_plus, u_minus = bands.transition_loops_torus(frame, h.t)
    return u_plus, u_minus, invariants.chern_winding_torus(u_plus, u_minus)


def test_skew_normal_form_doubled_model():
    u_plus, u_minus, c = torus_line_loops()
    nf = gauge.skew_normal_form(u_plus, u_minus, c)
    assert nf.residual <= 1e-8
    wd = nf.windings
    assert wd["det_v_plus"] == c
    assert wd["det_v_minus"] == 0
    # extendability over the cylinder and the per-line det bookkeeping
    assert wd["det_w_plus"] - wd["det_w_minus"] == 0
    assert 2 * wd["det_w_plus"] == wd["det_v_plus"] - wd["det_u_plus"]
    assert 2 * wd["det_w_minus"] == wd["det_v_minus"] - wd["det_u_minus"]


def test_skew_normal_form_perturbed_model():
    u_plus, u_minus, c = torus_line_loops(epsilon=0.1, seed=5)
    nf = gauge.skew_normal_form(u_plus, u_minus, c)
    assert nf.residual <= 1e-8
    assert nf.windings["det_w_plus"] - nf.windings["det_w_minus"] == 0


def test_skew_normal_form_block_input_gives_identity():
    # a loop already in the canonical alpha = 0 block form: W must be the
    # identity family
    L, nb = 64, 4
    block = np.zeros((nb, nb), dtype=complex)
    for b in range(nb // 2):
        block[2 * b, 2 * b + 1] = -1.0
        block[2 * b + 1, 2 * b] = 1.0
    samples = np.broadcast_to(block, (L, nb, nb)).copy()
    loop = bands.TransitionLoop("torus-line", samples, 0.0, 0.0)
    nf = gauge.skew_normal_form(loop, loop, 0)
    assert numkit.max_abs(nf.w_minus - np.eye(nb)[None]) <= 1e-12
    assert numkit.max_abs(nf.target_minus - samples) <= 1e-12
    assert nf.residual <= 1e-12


def test_skew_normal_form_rejects_odd_chern():
    u_plus, u_minus, c = torus_line_loops()
    with pytest.raises(DomainError):
        gauge.skew_normal_form(u_plus, u_minus, 1)


def test_skew_normal_form_nontrivial_pairing_holonomy():
    # partner vector conj(U x1) sweeps a cone, so the pair-complement seeds
    # pick up a genuine compact-symplectic holonomy that must be distributed
    # along the loop for W to close
    L, nb, alpha = 256, 4, 0.8
    q = 2 * np.pi * np.arange(L) / L
    v0 = np.zeros((nb, nb), dtype=complex)
    for b in range(nb // 2):
        v0[2 * b, 2 * b + 1] = -1.0
        v0[2 * b + 1, 2 * b] = 1.0
    samples = np.empty((L, nb, nb), dtype=complex)
    for j, qq in enumerate(q):
        w = np.array([0, np.cos(alpha), np.sin(alpha) * np.cos(qq),
                      np.sin(alpha) * np.sin(qq)], dtype=complex)
        u3 = np.array([0, -np.sin(alpha), np.cos(alpha) * np.cos(qq),
                       np.cos(alpha) * np.sin(qq)], dtype=complex)
        u4 = np.array([0, 0, -np.sin(qq), np.cos(qq)], dtype=complex)
        x = np.column_stack([np.eye(nb, dtype=complex)[:, 0], w, u3, u4])
        samples[j] = x.conj() @ v0 @ x.conj().T
    loop = bands.TransitionLoop("torus-line", samples, 0.0, 0.0)
    nf = gauge.skew_normal_form(loop, loop, 0)
    assert nf.residual <= 1e-12
    rebuilt = np.einsum("vji,vjk,vkl->vil", nf.w_minus, samples, nf.w_minus)
    assert numkit.max_abs(rebuilt - nf.target_minus) <= 1e-12
    # and W itself closes as a loop: adjacent steps stay small across the seam
    seam = numkit.max_abs(nf.w_minus[0] - nf.w_minus[-1])
    step = max(numkit.max_abs(nf.w_minus[j + 1] - nf.w_minus[j]) for j in range(L - 1))
    assert seam <= 3 * step + 1e-12


def test_skew_normal_form_rank4_random_model():
    h = models.random_tri("torus", 4, seed=2001)
    grid = build_grid(Manifold.TORUS, 16, 128)
    spec = bands.spectrum_on_grid(h, grid)
    group = bands.BandGroup(0, 3, np.inf)
    dom = fundamental_domain(grid)
    frame = bands.smooth_frame(h, group, dom, spectrum=spec)
    u_plus, u_minus = bands.transition_loops_torus(frame, h.t)
    c = invariants.chern_winding_torus(u_plus, u_minus)
    nf = gauge.skew_normal_form(u_plus, u_minus, c)
    assert nf.residual <= 1e-12
    wd = nf.windings
    assert 2 * wd["det_w_plus"] == wd["det_v_plus"] - wd["det_u_plus"]
    assert 2 * wd["det_w_minus"] == wd["det_v_minus"] - wd["det_u_minus"]
    assert wd["det_w_plus"] - wd["det_w_minus"] == 0
