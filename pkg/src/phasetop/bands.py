"""Fermionic time reversal, TRI Hamiltonian fields, band groups, and frames.

A time-reversal operator is T = J * complex conjugation with J unitary and
J conj(J) = -I (fermionic, T^2 = -1; equivalently J is skew-symmetric).
A Hamiltonian field is TRI when J conj(H(tau x)) J^dagger = H(x).

Frames over a fundamental domain are built by parallel transport with
polar-decomposition orthonormalization, seeded at a single vertex, so they
are continuous by construction.  Transition matrices relate a frame to the
time reverse of the frame on the opposite domain along the common boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import numkit
from .errors import DomainError, GapError, SingularityError
from .numkit import max_abs
from .phasespace import (
    FundamentalDomain,
    Grid,
    Manifold,
    transport_chains,
    tr_image_batch,
)


@dataclass(frozen=True)
class AntiUnitary:
    """Fermionic time reversal x -> J conj(x)."""

    j: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.j, dtype=complex)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise DomainError("J must be square")
        n = j.shape[0]
        if n % 2 != 0:
            raise DomainError("fermionic time reversal needs even dimension")
        if max_abs(j.conj().T @ j - np.eye(n)) > 1e-12:
            raise DomainError("J is not unitary within 1e-12")
        if max_abs(j @ j.conj() + np.eye(n)) > 1e-12:
            raise DomainError("J conj(J) != -I; operator does not square to -1")
        object.__setattr__(self, "j", j)

    @property
    def dim(self) -> int:
        return self.j.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Apply T to a vector, matrix of columns, or a stack of them."""
        x = np.asarray(x, dtype=complex)
        if x.ndim <= 2:
            return self.j @ x.conj()
        return np.einsum("ij,vjk->vik", self.j, x.conj())

    def conjugate_field(self, h_stack: np.ndarray) -> np.ndarray:
        """J conj(H) J^dagger applied to a stack of matrices."""
        return np.einsum(
            "ij,vjk,lk->vil", self.j, np.conj(h_stack), np.conj(self.j)
        )


@dataclass(frozen=True)
class HamiltonianField:
    """Hermitian matrix field over a phase space, with its TR metadata.

    evaluate maps an (m, 2) array of coordinate pairs to an (m, n_a, n_a)
    stack of Hermitian matrices.
    """

    n_a: int
    manifold: Manifold
    t: AntiUnitary
    evaluate: Callable[[np.ndarray], np.ndarray]
    label: str = ""
    params: dict = field(default_factory=dict)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.evaluate(np.atleast_2d(np.asarray(pts, dtype=float)))


def check_tri(h_field: HamiltonianField, grid: Grid, tol: float = 1e-9):
    """Max vertex residual of J conj(H(tau x)) J^dagger - H(x), and pass flag."""
    hs = h_field(grid.points)
    if hs.shape[1] != h_field.t.dim:
        raise DomainError("Hamiltonian and J dimensions differ")
    mapped = h_field.t.conjugate_field(hs[grid.tau_vertex])
    residual = max_abs(mapped - hs)
    return residual, residual <= tol


def symmetrize_tri(
    evaluate: Callable[[np.ndarray], np.ndarray],
    t: AntiUnitary,
    manifold: Manifold,
    label: str = "",
    params: dict | None = None,
) -> HamiltonianField:
    """TRI field from an arbitrary Hermitian field by group averaging:
    H(x) = (B(x) + J conj(B(tau x)) J^dagger) / 2."""
    manifold = Manifold(manifold)

    def tri_eval(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        direct = evaluate(pts)
        mirrored = evaluate(tr_image_batch(manifold, pts))
        return 0.5 * (direct + t.conjugate_field(mirrored))

    return HamiltonianField(
        n_a=t.dim, manifold=manifold, t=t, evaluate=tri_eval,
        label=label or "tri-symmetrized", params=dict(params or {}),
    )


def rotated_field(h_field: HamiltonianField, angle: float) -> HamiltonianField:
    """Precompose with a rotation of the domain (sphere: about the y axis;
    torus: shift of the q origin).  Both commute with time reversal, so the
    result is TRI with the same operator; used to reseat the fundamental
    domain away from Pfaffian zeros."""
    if h_field.manifold == Manifold.SPHERE:
        c, s = np.cos(angle), np.sin(angle)

        def rotated(pts: np.ndarray) -> np.ndarray:
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            th, ph = pts[:, 0], pts[:, 1]
            n = np.stack(
                [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1
            )
            rn = n.copy()
            rn[:, 0] = c * n[:, 0] + s * n[:, 2]
            rn[:, 2] = -s * n[:, 0] + c * n[:, 2]
            th2 = np.arccos(np.clip(rn[:, 2], -1.0, 1.0))
            ph2 = np.mod(np.arctan2(rn[:, 1], rn[:, 0]), 2.0 * np.pi)
            return h_field.evaluate(np.stack([th2, ph2], axis=1))

        new_eval = rotated
    else:

        def shifted(pts: np.ndarray) -> np.ndarray:
            pts = np.atleast_2d(np.asarray(pts, dtype=float)).copy()
            pts[:, 0] = np.mod(pts[:, 0] + angle, 2.0 * np.pi)
            return h_field.evaluate(pts)

        new_eval = shifted

    return HamiltonianField(
        n_a=h_field.n_a, manifold=h_field.manifold, t=h_field.t,
        evaluate=new_eval, label=h_field.label,
        params={**h_field.params, "domain_rotation": angle},
    )


@dataclass(frozen=True)
class Spectrum:
    """Per-vertex eigendecomposition over a grid, deterministic gauge."""

    grid: Grid
    energies: np.ndarray   # (V, N_A) ascending
    vectors: np.ndarray    # (V, N_A, N_A) unitary columns

    @property
    def n_a(self) -> int:
        return self.energies.shape[1]

    def band_vectors(self, group: "BandGroup") -> np.ndarray:
        return self.vectors[:, :, group.first : group.last + 1]

    def boundary_gaps(self) -> np.ndarray:
        """Min over vertices of the gap above each band (length N_A - 1)."""
        return np.min(np.diff(self.energies, axis=1), axis=0)


def spectrum_on_grid(h_field: HamiltonianField, grid: Grid) -> Spectrum:
    hs = h_field(grid.points)
    w, v = numkit.eigh_many(hs)
    return Spectrum(grid=grid, energies=w, vectors=v)


@dataclass(frozen=True)
class BandGroup:
    """Contiguous band index range [first, last] (0-based), gapped from the rest."""

    first: int
    last: int
    min_gap: float

    @property
    def rank(self) -> int:
        return self.last - self.first + 1


def find_gapped_groups(spectrum: Spectrum, gap_floor: float = 1e-6):
    """Maximal contiguous index ranges separated by gaps above the floor.

    The returned groups partition all bands; with no internal gap above the
    floor the single full-range group (min_gap = inf) is returned.
    """
    gaps = spectrum.boundary_gaps()
    cuts = [i for i, g in enumerate(gaps) if g > gap_floor]
    groups = []
    start = 0
    for c in cuts:
        groups.append((start, c))
        start = c + 1
    groups.append((start, spectrum.n_a - 1))
    out = []
    for a, b in groups:
        bounding = []
        if a > 0:
            bounding.append(gaps[a - 1])
        if b < spectrum.n_a - 1:
            bounding.append(gaps[b])
        out.append(BandGroup(a, b, float(min(bounding)) if bounding else np.inf))
    return out


def group_for_range(spectrum: Spectrum, first: int, last: int, gap_floor: float) -> BandGroup:
    """BandGroup for an explicit index range, verifying it is gapped."""
    gaps = spectrum.boundary_gaps()
    bounding = []
    if first > 0:
        bounding.append(gaps[first - 1])
    if last < spectrum.n_a - 1:
        bounding.append(gaps[last])
    min_gap = float(min(bounding)) if bounding else np.inf
    if min_gap <= gap_floor:
        raise GapError(
            f"bands [{first}, {last}] are not gapped: min boundary gap "
            f"{min_gap:.3e} <= floor {gap_floor:g}"
        )
    return BandGroup(first, last, min_gap)


@dataclass(frozen=True)
class Frame:
    """Orthonormal frame field spanning a band group over a fundamental domain."""

    domain: FundamentalDomain
    group: BandGroup
    data: np.ndarray         # (n_domain_vertices, N_A, N_B)
    max_step: float          # largest adjacent-vertex frame distance
    continuity_const: float  # max_step / grid spacing

    def at(self, vid: int) -> np.ndarray:
        return self.data[self.domain.local_index[vid]]

    def boundary_samples(self, which: int = 0) -> np.ndarray:
        loop = self.domain.boundary_loops[which]
        return self.data[self.domain.local_index[loop]]


def _transport(slab: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Move frame u into the eigenspace spanned by slab's columns.

    Projects onto the target eigenspace and re-orthonormalizes with the
    polar factor of the small overlap, i.e. discrete parallel transport.
    """
    overlap = slab.conj().T @ u
    try:
        return slab @ numkit.polar_unitary(overlap)
    except SingularityError as exc:
        raise SingularityError(
            "projector alignment is rank-deficient; refine the grid"
        ) from exc


def frame_residuals(frame: Frame, slabs: np.ndarray):
    """(orthonormality, span) residuals of a frame against eigenvector slabs."""
    data = frame.data
    nb = data.shape[2]
    eye = np.eye(nb)
    orth = max_abs(np.einsum("vij,vik->vjk", data.conj(), data) - eye)
    proj = np.einsum("vij,vkj->vik", slabs, slabs.conj())
    span = max_abs(data - np.einsum("vij,vjk->vik", proj, data))
    return float(orth), float(span)


def _continuity(domain: FundamentalDomain, data: np.ndarray):
    a = domain.local_index[domain.edges[:, 0]]
    b = domain.local_index[domain.edges[:, 1]]
    diffs = data[a] - data[b]
    max_step = float(np.max(np.sqrt(np.sum(np.abs(diffs) ** 2, axis=(1, 2)))))
    grid = domain.grid
    h = max(np.pi / grid.n_lat, 2.0 * np.pi / grid.n_lon)
    return max_step, max_step / h


def smooth_frame(
    h_field: HamiltonianField,
    group: BandGroup,
    domain: FundamentalDomain,
    spectrum: Spectrum | None = None,
) -> Frame:
    """Continuous orthonormal frame for a gapped group over the domain.

    Sphere: the eigenframe at the north pole is parallel-transported down
    every meridian; all meridians share the pole value, so the field is
    continuous across the domain.  Torus: the frame is transported along the
    p = 0 line, the loop holonomy is spread out as a fractional twist
    exp(-(q/2pi) log V0) to make it periodic in q, then each column is
    transported upward in p.
    """
    grid = domain.grid
    if spectrum is None:
        spectrum = spectrum_on_grid(h_field, grid)
    slabs = spectrum.band_vectors(group)
    n_dom = domain.n_vertices
    data = np.zeros((n_dom, h_field.n_a, group.rank), dtype=complex)
    loc = domain.local_index

    if grid.manifold == Manifold.SPHERE:
        seed_vid, chains = transport_chains(domain)
        seed = slabs[seed_vid]
        data[loc[seed_vid]] = seed
        for chain in chains:
            u = seed
            for vid in chain[1:]:
                u = _transport(slabs[vid], u)
                data[loc[vid]] = u
    else:
        seed_vid, (base, columns) = transport_chains(domain)
        L = grid.n_lon
        raw = [slabs[seed_vid]]
        for vid in base[1:]:
            raw.append(_transport(slabs[vid], raw[-1]))
        back = _transport(slabs[base[0]], raw[-1])
        holonomy = raw[0].conj().T @ back
        q_h, ph_h = numkit.unitary_gap_log(holonomy)
        for j, vid in enumerate(base):
            twist = numkit.unitary_power(q_h, ph_h, -j / L)
            data[loc[vid]] = raw[j] @ twist
        for column in columns:
            u = data[loc[column[0]]]
            for vid in column[1:]:
                u = _transport(slabs[vid], u)
                data[loc[vid]] = u

    max_step, const = _continuity(domain, data)
    frame = Frame(domain=domain, group=group, data=data,
                  max_step=max_step, continuity_const=const)
    return frame


@dataclass(frozen=True)
class TransitionLoop:
    """Unitary transition matrices sampled along a boundary loop."""

    kind: str                  # "sphere-equator" or "torus-line"
    samples: np.ndarray        # (L, N_B, N_B)
    unitarity: float
    symmetry_residual: float   # U(phi+pi)^t + U(phi) (sphere) or U + U^t (torus)

    @property
    def rank(self) -> int:
        return self.samples.shape[1]

    def det_loop(self) -> numkit.PhaseLoop:
        return numkit.PhaseLoop(np.linalg.det(self.samples))


def _unitarity(samples: np.ndarray) -> float:
    nb = samples.shape[1]
    prods = np.einsum("vji,vjk->vik", samples.conj(), samples)
    return float(max_abs(prods - np.eye(nb)))


def transition_loop_sphere(frame: Frame, t: AntiUnitary) -> TransitionLoop:
    """Equator transition matrices U with T u(phi+pi) = u(phi) U(phi)^t.

    Fermionic TR forces U(phi+pi)^t = -U(phi) exactly at sample level.
    """
    if frame.domain.grid.manifold != Manifold.SPHERE:
        raise DomainError("sphere transition loop requires a sphere frame")
    eq = frame.boundary_samples(0)
    L = eq.shape[0]
    shifted = t.apply(np.roll(eq, -L // 2, axis=0))
    u = np.einsum("vji,vjk->vik", eq.conj(), shifted).transpose(0, 2, 1)
    unit = _unitarity(u)
    if unit > 1e-9:
        raise DomainError(
            f"transition matrices not unitary ({unit:.2e}); frame does not span "
            "the band group or the gap failed"
        )
    anti = float(max_abs(np.roll(u, -L // 2, axis=0).transpose(0, 2, 1) + u))
    return TransitionLoop("sphere-equator", u, unit, anti)


def transition_loops_torus(frame: Frame, t: AntiUnitary):
    """Transition loops U+ (p=0) and U- (p=pi); both skew-symmetric unitary."""
    if frame.domain.grid.manifold != Manifold.TORUS:
        raise DomainError("torus transition loops require a torus frame")
    out = []
    for which in (0, 1):
        row = frame.boundary_samples(which)
        m = np.einsum("vji,vjk->vik", row.conj(), t.apply(row))
        u = m.transpose(0, 2, 1)
        unit = _unitarity(u)
        if unit > 1e-9:
            raise DomainError(
                f"TRI-line transition matrices not unitary ({unit:.2e})"
            )
        skew = float(max_abs(u + u.transpose(0, 2, 1)))
        out.append(TransitionLoop("torus-line", u, unit, skew))
    return out[0], out[1]


def kramers_check(spectrum: Spectrum, grid: Grid) -> float:
    """Max pairing residual |E_{2i} - E_{2i+1}| on the TRI lines p = 0, pi."""
    if grid.manifold != Manifold.TORUS:
        raise DomainError("Kramers pairing is defined on torus TRI lines only")
    if spectrum.n_a % 2 != 0:
        raise DomainError("Kramers check needs an even number of bands")
    rows = np.concatenate([grid.row_vids(0), grid.row_vids(grid.n_lat // 2)])
    e = spectrum.energies[rows]
    return float(np.max(np.abs(e[:, 0::2] - e[:, 1::2])))
