import numpy as np
import pytest

from phasetop import bands, invariants, models, numkit
from phasetop.errors import ConfigError, GapError, TrackingError
from phasetop.phasespace import Manifold, build_grid

SPHERE_GRID = build_grid(Manifold.SPHERE, 16, 32)
TORUS_GRID = build_grid(Manifold.TORUS, 16, 64)

# RandomTRI N_A=2 sphere seeds with known lower-band Chern (plaquette oracle,
# gap > 0.05 on a 16x32 grid)
SEED_C_PLUS_ONE = 0
SEED_C_MINUS_ONE = 6


def lower_band_chern(h, grid, gap_floor=0.05):
    spec = bands.spectrum_on_grid(h, grid)
    group = bands.group_for_range(spec, 0, 0, gap_floor)
    _, c = invariants.chern_plaquette(spec.band_vectors(group), grid)
    return c


def test_angular_momentum_algebra():
    jx, jy, jz = models.angular_momentum(1.5)
    comm = jx @ jy - jy @ jx
    assert numkit.max_abs(comm - 1j * jz) <= 1e-12
    casimir = jx @ jx + jy @ jy + jz @ jz
    assert numkit.max_abs(casimir - 1.5 * 2.5 * np.eye(4)) <= 1e-12


def test_spin_time_reversal_squares_to_minus_one():
    for j in (0.5, 1.5, 2.5):
        t = models.spin_time_reversal(j)
        assert numkit.max_abs(t.j @ t.j.conj() + np.eye(t.dim)) <= 1e-12


def test_rotor_spin_bands_and_gaps():
    h = models.rotor_spin(1.5)
    spec = bands.spectrum_on_grid(h, SPHERE_GRID)
    groups = bands.find_gapped_groups(spec, 1e-6)
    assert [g.rank for g in groups] == [1, 1, 1, 1]
    for g in groups[:-1]:
        assert g.min_gap == pytest.approx(1.0, abs=1e-9)


def test_rotor_spin_all_bands_odd_chern_and_sum_zero():
    h = models.rotor_spin(1.5, perturbation_strength=0.1, seed=2)
    spec = bands.spectrum_on_grid(h, SPHERE_GRID)
    groups = bands.find_gapped_groups(spec, 0.05)
    cs = []
    for g in groups:
        _, c = invariants.chern_plaquette(spec.band_vectors(g), SPHERE_GRID)
        cs.append(c)
    assert all(c % 2 == 1 for c in cs)
    assert sum(cs) == 0
    assert sorted(map(abs, cs)) == [1, 1, 3, 3]


def test_zoo_models_pass_check_tri():
    cases = [
        (models.rotor_spin(0.5, 0.2, seed=1), SPHERE_GRID),
        (models.kramers_pair_sphere(0.1, seed=1), SPHERE_GRID),
        (models.torus_doubled_chern(1.0, 0.1, seed=1), TORUS_GRID),
        (models.random_tri("sphere", 4, seed=1), SPHERE_GRID),
        (models.random_tri("torus", 4, seed=1), TORUS_GRID),
    ]
    for h, grid in cases:
        residual, ok = bands.check_tri(h, grid, 1e-9)
        assert ok, (h.label, residual)


def test_control_fails_check_tri_by_half_strength():
    strength = 0.6
    base = models.rotor_spin(0.5)
    for seed in range(5):
        control = models.tri_broken(base, strength, seed=seed)
        residual, ok = bands.check_tri(control, SPHERE_GRID, 1e-9)
        assert not ok
        assert residual >= strength / 2


def test_models_deterministic_under_seed():
    pts = SPHERE_GRID.points[:50]
    a = models.random_tri("sphere", 4, seed=42)(pts)
    b = models.random_tri("sphere", 4, seed=42)(pts)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, models.random_tri("sphere", 4, seed=43)(pts))


def test_build_dispatch_and_validation():
    h = models.build({"variant": "RotorSpin", "j": 0.5, "seed": 7})
    assert h.label == "RotorSpin" and h.n_a == 2
    with pytest.raises(ConfigError):
        models.build({"variant": "RotorSpin"})  # missing j
    with pytest.raises(ConfigError):
        models.build({"variant": "NoSuchModel"})
    with pytest.raises(ConfigError):
        models.build({"variant": "RotorSpin", "j": 0.5, "bogus": 1})
    broken = models.build({
        "variant": "TRIBrokenControl",
        "base": {"variant": "RotorSpin", "j": 0.5},
        "breaking_strength": 0.5,
    })
    assert broken.label == "TRIBrokenControl"


def test_kramers_pair_known_invariants():
    h = models.kramers_pair_sphere(epsilon=0.0)
    spec = bands.spectrum_on_grid(h, SPHERE_GRID)
    groups = bands.find_gapped_groups(spec, 1e-6)
    assert [g.rank for g in groups] == [2, 2]
    cs = [invariants.chern_plaquette(spec.band_vectors(g), SPHERE_GRID)[1]
          for g in groups]
    assert sorted(cs) == [-2, 2]


def test_torus_doubled_known_invariants():
    h = models.torus_doubled_chern(m=1.0)
    spec = bands.spectrum_on_grid(h, TORUS_GRID)
    groups = bands.find_gapped_groups(spec, 1e-6)
    assert [g.rank for g in groups] == [2, 2]
    cs = [invariants.chern_plaquette(spec.band_vectors(g), TORUS_GRID)[1]
          for g in groups]
    assert sorted(cs) == [-2, 2]
    assert bands.kramers_check(spec, TORUS_GRID) <= 1e-10


def test_random_seeds_have_frozen_chern():
    h_plus = models.random_tri("sphere", 2, cutoff=2, seed=SEED_C_PLUS_ONE)
    h_minus = models.random_tri("sphere", 2, cutoff=2, seed=SEED_C_MINUS_ONE)
    assert lower_band_chern(h_plus, SPHERE_GRID) == 1
    assert lower_band_chern(h_minus, SPHERE_GRID) == -1


# ---------------------------------------------------------------------------
# deformation paths


def test_tri_path_same_class_constant():
    h0 = models.rotor_spin(0.5)
    h1 = models.rotor_spin(0.5, perturbation_strength=0.2, seed=5)
    path = models.tri_path(h0, h1, SPHERE_GRID, (0, 0), steps=9, gap_floor=1e-3)
    assert path.verdict == "GAPPED-CONSTANT-C"
    assert path.chern == 1
    assert all(c == 1 for (_, _, c) in path.samples)


def test_tri_path_intermediate_fields_remain_tri():
    h0 = models.rotor_spin(0.5)
    h1 = models.rotor_spin(0.5, perturbation_strength=0.2, seed=5)

    def halfway(pts):
        return 0.5 * h0.evaluate(pts) + 0.5 * h1.evaluate(pts)

    h_mid = bands.HamiltonianField(2, Manifold.SPHERE, h0.t, halfway)
    residual, ok = bands.check_tri(h_mid, SPHERE_GRID, 1e-9)
    assert ok, residual


def test_tri_path_distinct_chern_detects_closing():
    h0 = models.random_tri("sphere", 2, cutoff=2, seed=SEED_C_PLUS_ONE)
    h1 = models.random_tri("sphere", 2, cutoff=2, seed=SEED_C_MINUS_ONE)
    path = models.tri_path(h0, h1, SPHERE_GRID, (0, 0), steps=21, gap_floor=1e-3)
    assert path.verdict == "GAP-CLOSES"
    lo, hi = path.closing_bracket
    assert 0.0 < lo < hi <= 1.0


def test_tri_path_kramers_to_trivial_closes():
    h0 = models.kramers_pair_sphere(epsilon=0.0)
    t = h0.t
    flat = np.kron(np.eye(2), np.diag([1.0, -1.0]))

    def const(pts):
        pts = np.atleast_2d(pts)
        return np.broadcast_to(flat.astype(complex), (pts.shape[0], 4, 4)).copy()

    h1 = bands.HamiltonianField(4, Manifold.SPHERE, t, const)
    residual, ok = bands.check_tri(h1, SPHERE_GRID, 1e-9)
    assert ok
    path = models.tri_path(h0, h1, SPHERE_GRID, (0, 1), steps=13, gap_floor=1e-3)
    assert path.verdict == "GAP-CLOSES"


def test_tri_path_rejects_mismatched_operators():
    h0 = models.rotor_spin(0.5)
    h1 = models.random_tri("torus", 2, seed=1)
    with pytest.raises(TrackingError):
        models.tri_path(h0, h1, SPHERE_GRID, (0, 0))


def test_tri_path_rejects_ungapped_endpoint():
    h0 = models.rotor_spin(0.5)
    h1 = models.torus_doubled_chern(m=2.0)  # wrong manifold anyway
    with pytest.raises(TrackingError):
        models.tri_path(h0, h1, SPHERE_GRID, (0, 0))
    ungapped = models.torus_doubled_chern(m=2.0)
    gapped = models.torus_doubled_chern(m=1.0)
    with pytest.raises(GapError):
        models.tri_path(gapped, ungapped, TORUS_GRID, (0, 1), gap_floor=1e-3)


def test_rotor_spin_five_halves_full_ladder():
    # six rank-1 bands with c = (5, 3, 1, -1, -3, -5): all odd, sum zero,
    # both Chern routes agreeing at every rung
    h = models.rotor_spin(2.5)
    grid = build_grid(Manifold.SPHERE, 32, 96)
    _, _, reports = invariants.analyze_model(
        h, grid, invariants.Tolerances(gap_floor=0.5)
    )
    cs = [r.c_plaquette for r in reports]
    assert cs == [5, 3, 1, -1, -3, -5]
    assert all(r.consistent and r.parity_ok for r in reports)
