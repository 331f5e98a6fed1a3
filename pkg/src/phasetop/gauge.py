"""Gauge constructions: normal-form transition loops, the boundary gauge
solver and its winding obstruction, extension of a boundary gauge into the
hemisphere, and the skew congruence normal form on torus TRI lines.

The boundary solver works with the relation V(phi) = W(phi+pi)^t U(phi) W(phi)
that a frame change v = u conj(W) induces on transition matrices.  Solving it
gives W(0) = U(0)^{-1} V(0), a free continuous path to W(pi) = I, and
W(phi) = (V(psi) W(psi)^{-1} U(psi)^{-1})^t on the second half (psi = phi-pi);
both half-seam continuity checks then close exactly, given the fermionic
antisymmetry of U and V.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkit
from .bands import Frame, TransitionLoop
from .errors import BranchError, DomainError, ExtensionError
from .numkit import max_abs
from .phasespace import FundamentalDomain, Manifold


def normal_form_loop(c: int, n_b: int, samples: int) -> TransitionLoop:
    """Canonical transition loop diag(e^{i(c-N_B+1) phi}, e^{i phi}, ...).

    Exists only when c and N_B share parity; satisfies V(phi+pi)^t = -V(phi)
    identically and det winds c times.
    """
    if (c - n_b) % 2 != 0:
        raise DomainError(
            f"no normal form: Chern number {c} and rank {n_b} have different parity"
        )
    if samples % 2 != 0 or samples < 8:
        raise DomainError("normal form loop needs an even sample count >= 8")
    phi = 2.0 * np.pi * np.arange(samples) / samples
    v = np.zeros((samples, n_b, n_b), dtype=complex)
    v[:, 0, 0] = np.exp(1j * (c - n_b + 1) * phi)
    for k in range(1, n_b):
        v[:, k, k] = np.exp(1j * phi)
    anti = float(max_abs(np.roll(v, -samples // 2, axis=0).transpose(0, 2, 1) + v))
    return TransitionLoop("sphere-equator", v, 0.0, anti)


@dataclass(frozen=True)
class GaugeLoop:
    """Unitary gauge samples W on a boundary loop, with seam residuals."""

    samples: np.ndarray
    residual_pi: float
    residual_2pi: float

    @property
    def rank(self) -> int:
        return self.samples.shape[1]

    def det_loop(self) -> numkit.PhaseLoop:
        return numkit.PhaseLoop(np.linalg.det(self.samples))


_WAYPOINT_SEED = 20260809


def _geodesic(start: np.ndarray, end: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Samples of the unitary-group geodesic from start to end at fractions ts."""
    step = start.conj().T @ end
    try:
        q, ph = numkit.unitary_gap_log(step)
    except BranchError:
        # re-route via an intermediate waypoint when no branch cut exists
        rng = np.random.default_rng(_WAYPOINT_SEED)
        g = rng.standard_normal(step.shape) + 1j * rng.standard_normal(step.shape)
        way = np.linalg.qr(g)[0]
        first = _geodesic(start, start @ way, np.clip(2 * ts, 0, 1))
        second = _geodesic(start @ way, end, np.clip(2 * ts - 1, 0, 1))
        return np.where((ts <= 0.5)[:, None, None], first, second)
    return np.stack([start @ numkit.unitary_power(q, ph, t) for t in ts])


def solve_equator_gauge(u_loop: TransitionLoop, v_loop: TransitionLoop) -> GaugeLoop:
    """Boundary gauge W turning transition loop U into V (same rank, even L)."""
    u = u_loop.samples
    v = v_loop.samples
    if u.shape != v.shape:
        raise DomainError("transition loops must have equal rank and sampling")
    L = u.shape[0]
    if L % 2 != 0:
        raise DomainError("gauge solve needs an even sample count")
    half = L // 2

    w = np.empty_like(u)
    w0 = u[0].conj().T @ v[0]
    ts = np.arange(half + 1) / half
    w[: half + 1] = _geodesic(w0, np.eye(u.shape[1]), ts)
    for j in range(half + 1, L):
        psi = j - half
        w[j] = (v[psi] @ w[psi].conj().T @ u[psi].conj().T).T

    rel_pi = (v[0] @ w[0].conj().T @ u[0].conj().T).T
    rel_2pi = (v[half] @ w[half].conj().T @ u[half].conj().T).T
    return GaugeLoop(
        samples=w,
        residual_pi=float(max_abs(rel_pi - w[half])),
        residual_2pi=float(max_abs(rel_2pi - w[0])),
    )


def winding_obstruction(gauge: GaugeLoop) -> int:
    """wn det W; the boundary gauge extends to the disk iff this vanishes."""
    return numkit.winding_number(gauge.det_loop())


def gauge_relation_residual(u_loop, v_loop, gauge: GaugeLoop) -> float:
    """Max residual of V(phi) - W(phi+pi)^t U(phi) W(phi) over all samples."""
    u, v, w = u_loop.samples, v_loop.samples, gauge.samples
    L = u.shape[0]
    wp = np.roll(w, -L // 2, axis=0)
    rebuilt = np.einsum("vji,vjk,vkl->vil", wp, u, w)
    return float(max_abs(rebuilt - v))


@dataclass(frozen=True)
class DiskExtension:
    """Unitary field over the hemisphere matching a boundary gauge loop."""

    domain: FundamentalDomain
    values: np.ndarray      # (n_dom, N_B, N_B)
    sweeps: int
    max_interior_step: float
    boundary_step: float


def _retract_stack(stack: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Batched polar retraction with random unitary jitter on singular entries."""
    u, s, vh = np.linalg.svd(stack)
    bad = np.where(s[:, -1] <= 1e-10)[0]
    for idx in bad:
        a = stack[idx]
        for _ in range(4):
            g = rng.standard_normal(a.shape) + 1j * rng.standard_normal(a.shape)
            a = a + 1e-3 * np.linalg.qr(g)[0]
            try:
                u1, s1, vh1 = np.linalg.svd(a)
            except np.linalg.LinAlgError:
                continue
            if s1[-1] > 1e-10:
                u[idx], vh[idx] = u1, vh1
                break
        else:
            raise ExtensionError("polar retraction stayed singular after jitter")
    return u @ vh


def _harmonic_profile(w_b: np.ndarray, radii: np.ndarray, cols: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
    """Entrywise harmonic disk extension of the boundary loop, retracted.

    Boundary Fourier mode k is damped by r^{|k|}; at r = 0 only the loop mean
    survives, so the pole value is single-valued.  For zero-winding loops the
    harmonic matrix field stays well-conditioned and retracts cleanly.
    """
    L = w_b.shape[0]
    modes = np.fft.fft(w_b, axis=0) / L
    k = np.fft.fftfreq(L, d=1.0 / L)
    damp = radii[:, None] ** np.abs(k)[None, :]  # (n_vertices, L)
    phase = np.exp(1j * np.outer(cols * (2.0 * np.pi / L), k))
    weights = damp * phase
    field = np.einsum("vk,kij->vij", weights, modes)
    return _retract_stack(field, rng)


def extend_to_disk(gauge: GaugeLoop, domain: FundamentalDomain, *,
                   step_target: float = 0.2, max_sweeps: int = 2000,
                   seed: int = 0) -> DiskExtension:
    """Extend a zero-winding boundary gauge over the northern hemisphere.

    Initializes via a radial blend toward the identity with polar retraction
    and runs Jacobi smoothing sweeps (neighbor averages retracted back to the
    unitary group) until the largest interior neighbor step falls below
    step_target.  A blend whose retraction seeds defect pairs (boundary
    eigenvalues crossing -1 make it singular at mid-radius) stalls the
    sweeps; in that case the field is re-initialized from the entrywise
    harmonic extension of the boundary loop and re-smoothed.  Failure still
    raises; it is never silently accepted.
    """
    grid = domain.grid
    if grid.manifold != Manifold.SPHERE:
        raise DomainError("disk extension is defined over the sphere hemisphere")
    wn = winding_obstruction(gauge)
    if wn != 0:
        raise DomainError(
            f"boundary gauge has winding {wn}; only zero-winding loops extend"
        )
    w_b = gauge.samples
    L = w_b.shape[0]
    if L != grid.n_lon:
        raise DomainError("gauge loop sampling does not match the grid equator")
    nb = gauge.rank
    half = grid.n_lat // 2
    eye = np.eye(nb)
    rng = np.random.default_rng(seed)
    loc = domain.local_index

    radii = grid.vertex_lat[domain.vertex_ids] / half
    cols = grid.vertex_lon[domain.vertex_ids]

    boundary_mask = np.zeros(domain.n_vertices, dtype=bool)
    boundary_mask[loc[domain.boundary_loops[0]]] = True
    interior = np.where(~boundary_mask)[0]

    ea = loc[domain.edges[:, 0]]
    eb = loc[domain.edges[:, 1]]
    inner = ~(boundary_mask[ea] & boundary_mask[eb])
    iea, ieb = ea[inner], eb[inner]

    def interior_step(vals: np.ndarray) -> float:
        rel = np.einsum("eji,ejk->eik", vals[iea].conj(), vals[ieb])
        return float(np.max(np.abs(np.angle(np.linalg.eigvals(rel)))))

    def smooth(vals: np.ndarray, budget: int):
        sweeps = 0
        step = interior_step(vals)
        stall = 0
        prev = np.inf
        while step > step_target and sweeps < budget:
            acc = np.zeros_like(vals)
            np.add.at(acc, ea, vals[eb])
            np.add.at(acc, eb, vals[ea])
            vals = vals.copy()
            vals[interior] = _retract_stack(acc[interior], rng)
            sweeps += 1
            step = interior_step(vals)
            stall = stall + 1 if step > prev - 1e-4 else 0
            prev = step
            if stall >= 25:
                break  # defect pair: no longer improving
        return vals, step, sweeps

    blend = (1.0 - radii)[:, None, None] * eye[None] + radii[:, None, None] * w_b[cols]
    values = _retract_stack(blend, rng)
    values, step, sweeps = smooth(values, max_sweeps)

    if step > step_target:
        values = _harmonic_profile(w_b, radii, cols, rng)
        values[loc[domain.boundary_loops[0]]] = w_b
        values, step, extra = smooth(values, max_sweeps - sweeps)
        sweeps += extra

    if step > step_target:
        raise ExtensionError(
            f"smoothing did not reach step target {step_target} rad "
            f"(max step {step:.3f} after {sweeps} sweeps)"
        )

    rel = np.einsum("eji,ejk->eik", w_b.conj(), np.roll(w_b, -1, axis=0))
    bstep = float(np.max(np.abs(np.angle(np.linalg.eigvals(rel)))))
    return DiskExtension(domain=domain, values=values, sweeps=sweeps,
                         max_interior_step=step, boundary_step=bstep)


def regauge_frame(frame: Frame, extension: DiskExtension) -> Frame:
    """New frame v(x) = u(x) conj(W(x)) over the same domain."""
    if extension.domain is not frame.domain:
        raise DomainError("frame and extension live on different domains")
    data = np.einsum("vij,vjk->vik", frame.data, extension.values.conj())
    return Frame(domain=frame.domain, group=frame.group, data=data,
                 max_step=frame.max_step, continuity_const=frame.continuity_const)


# ---------------------------------------------------------------------------
# torus skew congruence normal form


@dataclass(frozen=True)
class SkewNormalForm:
    """Block-diagonal targets and congruence loops for the torus TRI lines."""

    target_plus: np.ndarray    # (L, N_B, N_B)
    target_minus: np.ndarray
    w_plus: np.ndarray
    w_minus: np.ndarray
    residual: float            # max |V - W^t U W| over lines and samples
    windings: dict             # det-winding bookkeeping


def _pair_congruence(u_samples: np.ndarray) -> np.ndarray:
    """Closed loop X(q) with X^t U X = blockdiag([[0,-1],[1,0]], ...).

    Pairs (x, conj(U x)) are built per sample with seeds parallel-transported
    in q; the seed-loop holonomy (a compact-symplectic element) is distributed
    along the loop so X closes.
    """
    L, nb, _ = u_samples.shape
    x_cols = np.empty((L, nb, nb), dtype=complex)

    def build(j: int, seeds):
        u = u_samples[j]
        cols = []
        used = np.zeros((nb, 0), dtype=complex)
        new_seeds = []
        for a in range(nb // 2):
            seed = seeds[a]
            if used.shape[1]:
                seed = seed - used @ (used.conj().T @ seed)
            nrm = np.linalg.norm(seed)
            if nrm < 0.2:
                raise BranchError(
                    "pairing transport lost continuity; refine the q sampling"
                )
            x = seed / nrm
            y = np.conj(u @ x)
            y = y - x * (x.conj() @ y)
            if used.shape[1]:
                y = y - used @ (used.conj().T @ y)
            y = y / np.linalg.norm(y)
            cols.extend([x, y])
            used = np.column_stack([used, x, y])
            new_seeds.append(x)
        return np.column_stack(cols), new_seeds

    seeds = [np.eye(nb, dtype=complex)[:, 2 * a] for a in range(nb // 2)]
    for j in range(L):
        x_cols[j], seeds = build(j, seeds)
    closed, _ = build(0, seeds)  # transport once more across the seam
    holonomy = x_cols[0].conj().T @ closed
    if max_abs(holonomy - np.eye(nb)) > 1e-12:
        q_h, ph_h = numkit.unitary_gap_log(holonomy)
        for j in range(L):
            x_cols[j] = x_cols[j] @ numkit.unitary_power(q_h, ph_h, -j / L)
    return x_cols


def _block_target(alphas: np.ndarray, nb: int) -> np.ndarray:
    """blockdiag([[0, -e^{i a1}], [e^{i a1}, 0]], rest with alpha = 0)."""
    L = alphas.shape[0]
    v = np.zeros((L, nb, nb), dtype=complex)
    phase = np.exp(1j * alphas)
    v[:, 0, 1] = -phase
    v[:, 1, 0] = phase
    for b in range(1, nb // 2):
        v[:, 2 * b, 2 * b + 1] = -1.0
        v[:, 2 * b + 1, 2 * b] = 1.0
    return v


def skew_normal_form(u_plus: TransitionLoop, u_minus: TransitionLoop,
                     c: int) -> SkewNormalForm:
    """Congruence of the TRI-line loops to the canonical skew block form.

    The p = 0 target carries the whole twist через alpha_1(q) = (c/2) q; the
    p = pi target has all alphas zero.  det-winding bookkeeping
    (wn det W = (wn det V - wn det U)/2 per line, difference zero) is
    returned for verification.
    """
    if c % 2 != 0:
        raise DomainError("torus Chern number must be even")
    nb = u_plus.rank
    if nb % 2 != 0 or u_minus.rank != nb:
        raise DomainError("skew normal form needs matching even ranks")
    L = u_plus.samples.shape[0]
    q = 2.0 * np.pi * np.arange(L) / L

    results = {}
    residual = 0.0
    for tag, loop, alphas in (
        ("plus", u_plus, 0.5 * c * q),
        ("minus", u_minus, np.zeros(L)),
    ):
        x = _pair_congruence(loop.samples)
        d = np.zeros((L, nb, nb), dtype=complex)
        for j in range(L):
            d[j] = np.eye(nb)
            d[j, 0, 0] = np.exp(1j * alphas[j])
        w = np.einsum("vij,vjk->vik", x, d)
        target = _block_target(alphas, nb)
        rebuilt = np.einsum("vji,vjk,vkl->vil", w, loop.samples, w)
        residual = max(residual, float(max_abs(rebuilt - target)))
        results[tag] = (target, w)

    target_p, w_p = results["plus"]
    target_m, w_m = results["minus"]
    windings = {
        "det_v_plus": numkit.winding_number(np.linalg.det(target_p)),
        "det_v_minus": numkit.winding_number(np.linalg.det(target_m)),
        "det_u_plus": numkit.winding_number(np.linalg.det(u_plus.samples)),
        "det_u_minus": numkit.winding_number(np.linalg.det(u_minus.samples)),
        "det_w_plus": numkit.winding_number(np.linalg.det(w_p)),
        "det_w_minus": numkit.winding_number(np.linalg.det(w_m)),
    }
    return SkewNormalForm(
        target_plus=target_p, target_minus=target_m,
        w_plus=w_p, w_minus=w_m, residual=residual, windings=windings,
    )
