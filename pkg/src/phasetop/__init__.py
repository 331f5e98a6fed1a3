"""phasetop: topological invariants of fermionic time-reversal-invariant
band bundles over two-dimensional phase spaces (sphere and torus)."""

from .bands import (
    AntiUnitary,
    BandGroup,
    Frame,
    HamiltonianField,
    Spectrum,
    TransitionLoop,
    check_tri,
    find_gapped_groups,
    group_for_range,
    kramers_check,
    smooth_frame,
    spectrum_on_grid,
    symmetrize_tri,
    transition_loop_sphere,
    transition_loops_torus,
)
from .invariants import (
    CurvatureField,
    InvariantReport,
    MField,
    Tolerances,
    ZeroCensus,
    analyze_model,
    chern_plaquette,
    chern_winding_sphere,
    chern_winding_torus,
    curvature_tr_evenness,
    km_boundary,
    km_census,
    m_field,
    verify_group,
)
from .numkit import PhaseLoop, eigh, pfaffian, polar_unitary, winding_number
from .phasespace import (
    FundamentalDomain,
    Grid,
    Manifold,
    boundary_loop_samples,
    build_grid,
    fundamental_domain,
    refine_grid,
    tr_image,
)

__version__ = "0.1.0"

__all__ = [
    "AntiUnitary",
    "BandGroup",
    "CurvatureField",
    "Frame",
    "FundamentalDomain",
    "Grid",
    "HamiltonianField",
    "InvariantReport",
    "MField",
    "Manifold",
    "PhaseLoop",
    "Spectrum",
    "Tolerances",
    "TransitionLoop",
    "ZeroCensus",
    "analyze_model",
    "boundary_loop_samples",
    "build_grid",
    "check_tri",
    "chern_plaquette",
    "chern_winding_sphere",
    "chern_winding_torus",
    "curvature_tr_evenness",
    "eigh",
    "find_gapped_groups",
    "fundamental_domain",
    "group_for_range",
    "km_boundary",
    "km_census",
    "kramers_check",
    "m_field",
    "pfaffian",
    "polar_unitary",
    "refine_grid",
    "smooth_frame",
    "spectrum_on_grid",
    "symmetrize_tri",
    "tr_image",
    "transition_loop_sphere",
    "transition_loops_torus",
    "verify_group",
    "winding_number",
]
