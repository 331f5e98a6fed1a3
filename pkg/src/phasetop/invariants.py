"""Topological invariants: Chern numbers by two independent routes, the
Kane-Mele integer by boundary winding and by zero census, Berry curvature
fields, and the per-group verification pipeline.

Orientation convention.  Plaquette corner lists are stored in coordinate
orientation; Berry fluxes are accumulated traversing each plaquette in the
reverse (d(phi)^d(theta), dp^dq) order.  With that declared orientation the
lattice total (1/2pi) sum F_P equals the boundary-winding Chern number
c = wn det U (sphere) and c = wn det U+ - wn det U- (torus) exactly, so the
two pipelines can be required to agree integer-for-integer.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import numkit
from .bands import (
    AntiUnitary,
    BandGroup,
    Frame,
    HamiltonianField,
    TransitionLoop,
    check_tri,
    find_gapped_groups,
    frame_residuals,
    kramers_check,
    rotated_field,
    smooth_frame,
    spectrum_on_grid,
    transition_loop_sphere,
    transition_loops_torus,
)
from .errors import (
    BoundaryZeroError,
    DegenerateConfigurationError,
    DomainError,
    GapError,
    ResolutionError,
)
from .numkit import max_abs
from .phasespace import FundamentalDomain, Grid, Manifold, fundamental_domain, refine_grid


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds; the underlying identities are exact integers,
    floating-point pipelines need these cutoffs."""

    tri_tol: float = 1e-9
    gap_floor: float = 1e-6
    zero_floor: float = 1e-4
    evenness_rel: float = 1e-6
    link_floor: float = 1e-6
    flux_cap: float = np.pi - 0.1
    census_edge_cap: float = np.pi - 0.2
    max_grid_refinements: int = 1
    max_domain_rotations: int = 8
    max_loop_samples: int = 2 ** 14


@dataclass(frozen=True)
class CurvatureField:
    """Per-plaquette Berry flux (radians) over the closed manifold."""

    grid: Grid
    flux: np.ndarray
    total: float

    @property
    def chern(self) -> int:
        return int(round(self.total / (2.0 * np.pi)))


def chern_plaquette(vectors: np.ndarray, grid: Grid, *, link_floor: float = 1e-6,
                    flux_cap: float = np.pi - 0.1):
    """Gauge-invariant lattice Chern number from per-vertex spanning frames.

    vectors is a (V, N_A, N_B) stack of orthonormal columns spanning the band
    group at each vertex; no smoothness is required.  The link on an oriented
    edge is det(u(x)^dagger u(y)) normalized to unit modulus; the flux F_P is
    the principal-value arg of the link product around the plaquette in the
    declared flux orientation; c = (1/2pi) sum F_P is an exact integer.
    """
    plq = grid.plaquettes
    link_prod = np.ones(plq.shape[0], dtype=complex)
    for a in range(4):
        va = plq[:, a]
        vb = plq[:, (a + 1) % 4]
        ov = np.einsum("vji,vjk->vik", vectors[va].conj(), vectors[vb])
        dets = np.linalg.det(ov)
        mags = np.abs(dets)
        # self-links at a repeated pole corner are exactly 1 and harmless
        if np.any(mags <= link_floor):
            raise ResolutionError(
                "vanishing link modulus: band group aliased between adjacent "
                "vertices; refine the grid or re-check the gap"
            )
        link_prod *= dets / mags
    flux = -np.angle(link_prod)  # declared flux orientation (see module docstring)
    worst = float(np.max(np.abs(flux)))
    if worst >= flux_cap:
        raise ResolutionError(
            f"plaquette flux {worst:.3f} too close to pi; refine the grid"
        )
    total = float(flux.sum())
    c = total / (2.0 * np.pi)
    c_int = int(round(c))
    if abs(c - c_int) > 1e-6:
        raise ResolutionError(f"total flux/2pi = {c!r} is not an integer")
    return CurvatureField(grid=grid, flux=flux, total=total), c_int


def curvature_tr_evenness(curv: CurvatureField, grid: Grid) -> float:
    """Max |F_P - F_{tau(P)}|; zero for exactly TRI fields."""
    return float(np.max(np.abs(curv.flux - curv.flux[grid.tau_plaq])))


def evenness_tolerance(curv: CurvatureField, rel: float = 1e-6) -> float:
    return rel * float(np.max(np.abs(curv.flux))) + 1e-9


def chern_winding_sphere(loop: TransitionLoop) -> int:
    """Chern number as the winding of det U around the equator."""
    return numkit.winding_number(loop.det_loop())


def chern_winding_torus(u_plus: TransitionLoop, u_minus: TransitionLoop) -> int:
    """Chern number as wn det U+ - wn det U-; always even for TRI groups."""
    return numkit.winding_number(u_plus.det_loop()) - numkit.winding_number(
        u_minus.det_loop()
    )


@dataclass(frozen=True)
class MField:
    """Overlap matrix field M(x) = <u_n(x), T u_n'(x)> over a domain."""

    domain: FundamentalDomain
    values: np.ndarray           # (n_dom, N_B, N_B), skew-symmetric
    pf: np.ndarray | None        # (n_dom,) Pfaffians (even rank only)
    skew_residual: float
    small_pf_vertices: np.ndarray | None  # vids with |pf| below the zero floor

    @property
    def rank(self) -> int:
        return self.values.shape[1]


def m_field(frame: Frame, t: AntiUnitary, zero_floor: float = 1e-4) -> MField:
    """M(x) per domain vertex; skew-symmetry is exact for fermionic TR."""
    m = np.einsum("vji,vjk->vik", frame.data.conj(), t.apply(frame.data))
    skew = float(max_abs(m + m.transpose(0, 2, 1)))
    if skew > 1e-8:
        raise DomainError(f"M field is not skew-symmetric ({skew:.2e})")
    nb = m.shape[1]
    pf = None
    small = None
    if nb % 2 == 0:
        pf = np.array([numkit.pfaffian(m[v]) for v in range(m.shape[0])])
        small = frame.domain.vertex_ids[np.abs(pf) < zero_floor]
    return MField(domain=frame.domain, values=m, pf=pf,
                  skew_residual=skew, small_pf_vertices=small)


def _pf_on_loop(mf: MField, which: int, zero_floor: float) -> np.ndarray:
    loop = mf.domain.boundary_loops[which]
    pf = mf.pf[mf.domain.local_index[loop]]
    lo = float(np.min(np.abs(pf)))
    if lo <= zero_floor:
        raise BoundaryZeroError(
            f"|pf M| = {lo:.3e} <= zero floor {zero_floor:g} on a boundary loop; "
            "rotate the fundamental domain and retry"
        )
    return pf


def km_boundary(mf: MField, zero_floor: float = 1e-4) -> int:
    """Kane-Mele integer from Pfaffian winding along the domain boundary."""
    if mf.pf is None:
        raise DomainError("Kane-Mele index needs even band-group rank")
    grid = mf.domain.grid
    if grid.manifold == Manifold.SPHERE:
        return numkit.winding_number(_pf_on_loop(mf, 0, zero_floor))
    w0 = numkit.winding_number(_pf_on_loop(mf, 0, zero_floor))
    w1 = numkit.winding_number(_pf_on_loop(mf, 1, zero_floor))
    return w0 - w1


@dataclass(frozen=True)
class ZeroCensus:
    """Indexed zeros of pf M inside the fundamental domain."""

    entries: list          # (plaquette id, index) with nonzero index
    total: int


def km_census(mf: MField, edge_cap: float = np.pi - 0.2,
              hard_floor: float = 1e-12) -> ZeroCensus:
    """Per-plaquette winding of pf M over the domain interior.

    The sum of principal-value phase steps telescopes, so the census total
    equals the boundary winding exactly.  A step within `edge_cap` of pi means
    a zero sits essentially on an edge and its plaquette attribution is
    ambiguous: refine and retry.  (A plaquette that simply contains a zero has
    steps around pi/2; that is fine and expected.)
    """
    if mf.pf is None:
        raise DomainError("zero census needs even band-group rank")
    dom = mf.domain
    pf = mf.pf
    tiny = np.abs(pf) < hard_floor
    if np.any(tiny):
        raise DegenerateConfigurationError(
            f"pf M vanishes at {int(tiny.sum())} domain vertices; zeros are not "
            "isolated points (symmetric stratum)"
        )
    plq = dom.grid.plaquettes[dom.plaq_ids]
    loc = dom.local_index
    entries = []
    total = 0
    for pid, corners in zip(dom.plaq_ids, plq):
        vals = pf[loc[corners]]
        steps = np.angle(np.roll(vals, -1) / vals)
        if np.max(np.abs(steps)) >= edge_cap:
            raise ResolutionError(
                f"pf M phase step near pi on plaquette {int(pid)}; a zero lies "
                "on an edge, refine the grid"
            )
        w = float(steps.sum()) / (2.0 * np.pi)
        wi = int(round(w))
        if abs(w - wi) > 1e-6:
            raise ResolutionError("plaquette winding is not integral")
        if wi != 0:
            entries.append((int(pid), wi))
            total += wi
    return ZeroCensus(entries=entries, total=total)


@dataclass
class InvariantReport:
    """Everything the pipeline verifies for one gapped band group."""

    group_id: int
    first_band: int            # 1-based in reports
    last_band: int
    rank: int
    min_gap: float
    c_plaquette: int
    c_winding: int
    consistent: bool
    parity_ok: bool
    k: int | None = None
    km_relation_ok: bool | None = None
    census_total: int | None = None
    census_ok: bool | None = None
    census_entries: list = field(default_factory=list)
    census_same_sign: bool | None = None
    kramers_residual: float | None = None
    curvature_evenness: float | None = None
    evenness_ok: bool | None = None
    residuals: dict = field(default_factory=dict)
    grid_n_lat: int = 0
    grid_n_lon: int = 0
    refinements: int = 0
    domain_rotations: int = 0
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, val in out.items():
            if isinstance(val, (np.integer,)):
                out[key] = int(val)
            elif isinstance(val, (np.floating,)):
                out[key] = float(val)
        out["residuals"] = {k: float(v) for k, v in out["residuals"].items()}
        out["census_entries"] = [[int(p), int(w)] for p, w in out["census_entries"]]
        return out


_ROTATION_ANGLES = (0.0, 0.37, 0.81, 1.33, 1.91, 2.47, 2.95, 0.59)


def _km_with_rotations(h_field, group, grid, domain, frame, mf, tol):
    """Boundary winding and census, reseating the domain away from pf zeros.

    Returns (k, census, rotations_used, notes).  The boundary index k is kept
    as soon as one rotated domain has an admissible boundary; the census gets
    a few more rotations of its own when a zero hugs a plaquette edge, and is
    reported as undefined (with a note) when none works.
    """
    notes = []
    rotations = 0
    k = None
    census = None
    census_note = None
    for attempt, angle in enumerate(_ROTATION_ANGLES[: tol.max_domain_rotations]):
        if attempt > 0:
            rotations += 1
            h_rot = rotated_field(h_field, angle)
            spec = spectrum_on_grid(h_rot, grid)
            frame = smooth_frame(h_rot, group, domain, spectrum=spec)
            mf = m_field(frame, h_rot.t, tol.zero_floor)
        try:
            k_here = km_boundary(mf, tol.zero_floor)
        except BoundaryZeroError:
            continue
        if k is None:
            k = k_here
        elif k_here != k:
            # winding is domain-rotation invariant; a mismatch means the
            # boundary loop was under-resolved somewhere
            raise ResolutionError(
                f"boundary Pfaffian winding changed under domain rotation "
                f"({k} vs {k_here}); refine the grid"
            )
        try:
            census = km_census(mf, tol.census_edge_cap)
            census_note = None
            break
        except DegenerateConfigurationError as exc:
            census_note = f"census undefined: {exc}"
            break
        except ResolutionError as exc:
            census_note = f"census unresolved: {exc}"
            continue
    if k is None:
        raise DegenerateConfigurationError(
            "no admissible fundamental domain found: pf M not bounded away "
            f"from zero on any of {tol.max_domain_rotations} rotated boundaries"
        )
    if census_note:
        notes.append(census_note)
    return k, census, rotations, notes


def _verify_once(h_field: HamiltonianField, group: BandGroup, grid: Grid,
                 tol: Tolerances, group_id: int, refinements: int) -> InvariantReport:
    spectrum = spectrum_on_grid(h_field, grid)
    gaps = spectrum.boundary_gaps()
    bounding = []
    if group.first > 0:
        bounding.append(gaps[group.first - 1])
    if group.last < spectrum.n_a - 1:
        bounding.append(gaps[group.last])
    min_gap = float(min(bounding)) if bounding else np.inf
    if min_gap <= tol.gap_floor:
        raise GapError(f"group [{group.first}, {group.last}] not gapped on this grid")

    slabs = spectrum.band_vectors(group)
    curv, c_plq = chern_plaquette(
        slabs, grid, link_floor=tol.link_floor, flux_cap=tol.flux_cap
    )
    evenness = curvature_tr_evenness(curv, grid)
    evenness_ok = evenness <= evenness_tolerance(curv, tol.evenness_rel)

    domain = fundamental_domain(grid)
    frame = smooth_frame(h_field, group, domain, spectrum=spectrum)
    orth, span = frame_residuals(frame, slabs[domain.vertex_ids])

    residuals = {
        "frame_orthonormality": orth,
        "frame_span": span,
        "frame_max_step": frame.max_step,
        "frame_continuity_const": frame.continuity_const,
    }

    sphere = grid.manifold == Manifold.SPHERE
    if sphere:
        loop = transition_loop_sphere(frame, h_field.t)
        c_wind = chern_winding_sphere(loop)
        residuals["loop_unitarity"] = loop.unitarity
        residuals["loop_antisymmetry"] = loop.symmetry_residual
        kram = None
    else:
        u_plus, u_minus = transition_loops_torus(frame, h_field.t)
        c_wind = chern_winding_torus(u_plus, u_minus)
        residuals["loop_unitarity"] = max(u_plus.unitarity, u_minus.unitarity)
        residuals["loop_skewness"] = max(
            u_plus.symmetry_residual, u_minus.symmetry_residual
        )
        kram = kramers_check(spectrum, grid)

    consistent = c_plq == c_wind
    nb = group.rank
    parity_ok = (c_plq - nb) % 2 == 0 if sphere else (c_plq % 2 == 0 and nb % 2 == 0)

    report = InvariantReport(
        group_id=group_id,
        first_band=group.first + 1,
        last_band=group.last + 1,
        rank=nb,
        min_gap=min_gap,
        c_plaquette=c_plq,
        c_winding=c_wind,
        consistent=consistent,
        parity_ok=parity_ok,
        kramers_residual=kram,
        curvature_evenness=evenness,
        evenness_ok=evenness_ok,
        residuals=residuals,
        grid_n_lat=grid.n_lat,
        grid_n_lon=grid.n_lon,
        refinements=refinements,
    )

    if nb % 2 == 0:
        mf = m_field(frame, h_field.t, tol.zero_floor)
        residuals["m_skew"] = mf.skew_residual
        try:
            k, census, rotations, notes = _km_with_rotations(
                h_field, group, grid, domain, frame, mf, tol
            )
            report.k = k
            report.domain_rotations = rotations
            report.notes.extend(notes)
            report.km_relation_ok = 2 * k == c_plq
            if census is not None:
                report.census_total = census.total
                report.census_entries = census.entries
                report.census_ok = census.total == k
                signs = {np.sign(w) for _, w in census.entries}
                report.census_same_sign = len(signs) <= 1
        except DegenerateConfigurationError as exc:
            report.k = None
            report.km_relation_ok = None
            report.notes.append(f"KM index undefined: {exc}")
    else:
        report.notes.append("odd rank: Pfaffian and KM index undefined")

    return report


def verify_group(h_field: HamiltonianField, group: BandGroup, grid: Grid,
                 tol: Tolerances = Tolerances(), group_id: int = 0) -> InvariantReport:
    """Run every invariant check for one gapped group, refining the grid once
    on resolution failures or cross-method disagreement before giving up.

    A persisting c_plaquette != c_winding is returned with consistent=False
    rather than raised, so callers can surface it in reports.
    """
    refinements = 0
    while True:
        try:
            report = _verify_once(h_field, group, grid, tol, group_id, refinements)
        except ResolutionError:
            if refinements >= tol.max_grid_refinements or (
                grid.n_lon * 2 > tol.max_loop_samples
            ):
                raise
            grid = refine_grid(grid)
            refinements += 1
            continue
        if not report.consistent and refinements < tol.max_grid_refinements:
            grid = refine_grid(grid)
            refinements += 1
            continue
        if not report.consistent:
            report.notes.append(
                "cross-method Chern disagreement persisted after refinement"
            )
        return report


def analyze_model(h_field: HamiltonianField, grid: Grid,
                  tol: Tolerances = Tolerances()):
    """Spectra, group discovery, and per-group reports for a whole model.

    Returns (tri_residual, groups, reports).  Raises DomainError when the
    field is not TRI at tri_tol (controls are reported upstream).
    """
    tri_residual, ok = check_tri(h_field, grid, tol.tri_tol)
    if not ok:
        raise DomainError(
            f"field is not time-reversal invariant: residual {tri_residual:.3e} "
            f"> {tol.tri_tol:g}"
        )
    spectrum = spectrum_on_grid(h_field, grid)
    groups = find_gapped_groups(spectrum, tol.gap_floor)
    reports = [
        verify_group(h_field, g, grid, tol, group_id=i)
        for i, g in enumerate(groups)
    ]
    return tri_residual, groups, reports
