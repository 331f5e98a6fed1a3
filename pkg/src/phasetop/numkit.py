"""Dense complex linear-algebra primitives.

Hermitian eigensolver with a reproducible eigenvector gauge, unitary polar
retraction, Pfaffian by skew-symmetric elimination, loop winding numbers,
and branch-tracked logarithms of unitary matrices.  Everything here is a
pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BranchError, DomainError, ResolutionError, SingularityError

HERMITICITY_TOL = 1e-10
SKEW_TOL = 1e-9
MAGNITUDE_FLOOR = 1e-10
MAX_LOOP_STEP = np.pi / 2


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def fix_phases(v: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Rescale each column so its first significant component is real positive.

    Works on stacks of matrices; the last two axes are (component, column).
    """
    v = np.array(v, dtype=complex, copy=True)
    lead = np.argmax(np.abs(v) > tol, axis=-2)
    taken = np.take_along_axis(v, lead[..., None, :], axis=-2)[..., 0, :]
    phases = taken / np.abs(taken)
    v *= phases.conj()[..., None, :]
    return v


def eigh(h: np.ndarray):
    """Eigendecomposition of a Hermitian matrix with deterministic ordering.

    Eigenvalues ascend and each eigenvector's first significant component is
    made real positive, so repeated runs give identical frames.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DomainError("eigh expects a square matrix")
    if max_abs(h - h.conj().T) > HERMITICITY_TOL:
        raise DomainError("matrix is not Hermitian within 1e-10")
    w, v = np.linalg.eigh(h)
    return w, fix_phases(v)


def eigh_many(hs: np.ndarray):
    """Batched eigh over a stack of Hermitian matrices (m, n, n)."""
    hs = np.asarray(hs, dtype=complex)
    if max_abs(hs - hs.conj().transpose(0, 2, 1)) > HERMITICITY_TOL:
        raise DomainError("batch contains a non-Hermitian matrix")
    w, v = np.linalg.eigh(hs)
    return w, fix_phases(v)


def polar_unitary(a: np.ndarray) -> np.ndarray:
    """Unitary factor of the polar decomposition A = U P.

    For a tall matrix this is the closest matrix with orthonormal columns in
    Frobenius distance.  Near-singular inputs are refused; the caller must
    jitter or refine instead of silently accepting a garbage direction.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise DomainError("polar_unitary expects a square or tall matrix")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if s[-1] <= 1e-10:
        raise SingularityError(
            f"smallest singular value {s[-1]:.3e} <= 1e-10; input is near-singular"
        )
    return u @ vh


def pfaffian(s: np.ndarray) -> complex:
    """Pfaffian of an even-dimensional skew-symmetric matrix.

    Skew-symmetric (Parlett-Reid style) elimination with partial pivoting,
    O(n^3).  pf(S)^2 = det(S) is the accuracy contract, checked in tests.
    """
    a = np.array(s, dtype=complex, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("pfaffian expects a square matrix")
    n = a.shape[0]
    if n % 2 != 0:
        raise DomainError("pfaffian requires even dimension")
    if max_abs(a + a.T) > SKEW_TOL:
        raise DomainError("matrix is not skew-symmetric within 1e-9")
    if n == 0:
        return 1.0 + 0.0j

    pf = 1.0 + 0.0j
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(a[k + 1:, k])))
        if kp != k + 1:
            a[[k + 1, kp], k:] = a[[kp, k + 1], k:]
            a[k:, [k + 1, kp]] = a[k:, [kp, k + 1]]
            pf = -pf
        if abs(a[k + 1, k]) < 1e-300:
            return 0.0 + 0.0j
        pf *= a[k, k + 1]
        if k + 2 < n:
            tau = a[k, k + 2:] / a[k, k + 1]
            col = a[k + 2:, k + 1]
            a[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return complex(pf)


@dataclass(frozen=True)
class PhaseLoop:
    """Samples of a nonvanishing complex function on a closed loop.

    Sample i sits at angle 2*pi*i/L; the loop wraps.  Magnitudes below the
    floor are refused at construction; step resolution is enforced when the
    winding number is taken.
    """

    samples: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.samples, dtype=complex).ravel()
        if z.size < 4:
            raise DomainError("a phase loop needs at least 4 samples")
        small = np.abs(z) <= MAGNITUDE_FLOOR
        if np.any(small):
            raise DomainError(
                f"{int(small.sum())} loop samples at or below magnitude floor "
                f"{MAGNITUDE_FLOOR:g}"
            )
        object.__setattr__(self, "samples", z)

    def __len__(self):
        return self.samples.size


def winding_number(loop) -> int:
    """Winding number from principal-value phase increments around the loop.

    Raises ResolutionError when any step reaches pi/2: the loop is declared
    under-resolved and the caller should double its sampling (capped at 2**14
    samples by the refinement contract).
    """
    if not isinstance(loop, PhaseLoop):
        loop = PhaseLoop(np.asarray(loop))
    z = loop.samples
    steps = np.angle(np.roll(z, -1) / z)
    worst = float(np.max(np.abs(steps)))
    if worst >= MAX_LOOP_STEP:
        raise ResolutionError(
            f"phase step {worst:.4f} rad >= pi/2; loop under-resolved, refine sampling"
        )
    total = float(steps.sum()) / (2.0 * np.pi)
    w = round(total)
    if abs(total - w) > 1e-6:
        raise ResolutionError(f"winding sum {total!r} is not integral")
    return int(w)


def unitary_gap_log(u: np.ndarray, min_gap: float = 1e-3):
    """Eigen-decompose a unitary matrix and choose log-branch phases.

    The branch cut is placed in the middle of the largest gap of the
    eigenphase spectrum on the unit circle, so fractional powers
    u^t = Q exp(i t phases) Q^dagger vary continuously in t and never jump
    across an eigenvalue.  Returns (q, phases) with u = q diag(exp(i phases)) q^dagger.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DomainError("unitary_gap_log expects a square matrix")
    t, q = scipy.linalg.schur(u, output="complex")
    d = np.diagonal(t).copy()
    if max_abs(t - np.diag(d)) > 1e-8 or max_abs(np.abs(d) - 1.0) > 1e-6:
        raise DomainError("matrix is not unitary")
    ph = np.angle(d)
    order = np.sort(ph)
    if order.size == 1:
        cut = order[0] + np.pi
    else:
        gaps = np.diff(order)
        wrap = 2.0 * np.pi - (order[-1] - order[0])
        i = int(np.argmax(gaps))
        if gaps[i] >= wrap:
            widest, cut = gaps[i], 0.5 * (order[i] + order[i + 1])
        else:
            widest, cut = wrap, order[-1] + 0.5 * wrap
        if widest < min_gap:
            raise BranchError("eigenphases leave no usable branch-cut gap")
    # phases live in (cut - 2*pi, cut], all at distance >= gap/2 from the cut
    rebased = cut - np.mod(cut - ph, 2.0 * np.pi)
    return q, rebased


def unitary_power(q: np.ndarray, phases: np.ndarray, t: float) -> np.ndarray:
    """u^t from the factors produced by unitary_gap_log."""
    return (q * np.exp(1j * t * phases)[None, :]) @ q.conj().T
