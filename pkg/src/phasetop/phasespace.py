"""Phase-space manifolds, time-reversal involutions, and tau-closed grids.

Two manifolds are supported: the two-sphere in spherical polars (theta, phi)
with the antipodal involution tau(theta, phi) = (pi - theta, phi + pi), and
the two-torus in canonical coordinates (q, p) with tau(q, p) = (q, -p).

Grids are built so that tau maps vertices to vertices and plaquettes to
plaquettes exactly (index-level pairing, no floating-point matching).
Plaquette corner lists are stored in coordinate orientation, d(theta)^d(phi)
and dq^dp positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, DomainError

TWO_PI = 2.0 * np.pi


class Manifold(str, Enum):
    SPHERE = "sphere"
    TORUS = "torus"


def tr_image(manifold: Manifold, point):
    """Time-reversal image of a phase-space point.

    The sphere involution is fixed-point free; on the torus the fixed-point
    set is exactly the two lines p = 0 and p = pi.
    """
    a, b = float(point[0]), float(point[1])
    if manifold == Manifold.SPHERE:
        return (np.pi - a, np.mod(b + np.pi, TWO_PI))
    return (a, np.mod(-b, TWO_PI))


def tr_image_batch(manifold: Manifold, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    out = np.empty_like(pts)
    if manifold == Manifold.SPHERE:
        out[:, 0] = np.pi - pts[:, 0]
        out[:, 1] = np.mod(pts[:, 1] + np.pi, TWO_PI)
    else:
        out[:, 0] = pts[:, 0]
        out[:, 1] = np.mod(-pts[:, 1], TWO_PI)
    return out


@dataclass(frozen=True)
class Grid:
    """tau-closed grid on a phase-space manifold.

    Sphere: rows are latitude lines theta_i = pi*i/n_lat (poles are single
    vertices, rows 0 and n_lat); columns are phi_j = 2*pi*j/n_lon.  Torus:
    rows are p_i = 2*pi*i/n_lat, columns q_j = 2*pi*j/n_lon, both periodic.

    plaquettes holds 4 corner vertex ids per cell in coordinate orientation;
    pole-adjacent sphere cells are triangles stored with the pole id repeated.
    """

    manifold: Manifold
    n_lat: int
    n_lon: int
    points: np.ndarray        # (V, 2) coordinates per vertex
    vertex_lat: np.ndarray    # (V,) row index
    vertex_lon: np.ndarray    # (V,) column index (0 for poles)
    plaquettes: np.ndarray    # (P, 4) corner vertex ids
    plaq_lat: np.ndarray      # (P,) latitude band index
    plaq_lon: np.ndarray      # (P,) column index
    tau_vertex: np.ndarray    # (V,)
    tau_plaq: np.ndarray      # (P,)

    @property
    def n_vertices(self) -> int:
        return self.points.shape[0]

    @property
    def n_plaquettes(self) -> int:
        return self.plaquettes.shape[0]

    def vid(self, i: int, j: int) -> int:
        """Vertex id for row i, column j (columns wrap)."""
        j = j % self.n_lon
        if self.manifold == Manifold.SPHERE:
            if i == 0:
                return 0
            if i == self.n_lat:
                return self.n_vertices - 1
            return 1 + (i - 1) * self.n_lon + j
        return (i % self.n_lat) * self.n_lon + j

    def row_vids(self, i: int) -> np.ndarray:
        return np.array([self.vid(i, j) for j in range(self.n_lon)], dtype=int)


def build_grid(manifold: Manifold, n_lat: int, n_lon: int) -> Grid:
    """Construct a tau-closed grid; subdivisions must be even and >= 8."""
    manifold = Manifold(manifold)
    for name, n in (("n_lat", n_lat), ("n_lon", n_lon)):
        if n < 8 or n % 2 != 0:
            raise ConfigError(f"{name} must be even and >= 8, got {n}")

    L = n_lon
    if manifold == Manifold.SPHERE:
        nv = 2 + (n_lat - 1) * L
        points = np.empty((nv, 2))
        vlat = np.empty(nv, dtype=int)
        vlon = np.zeros(nv, dtype=int)
        points[0] = (0.0, 0.0)
        vlat[0] = 0
        for i in range(1, n_lat):
            for j in range(L):
                v = 1 + (i - 1) * L + j
                points[v] = (np.pi * i / n_lat, TWO_PI * j / L)
                vlat[v], vlon[v] = i, j
        points[nv - 1] = (np.pi, 0.0)
        vlat[nv - 1] = n_lat

        def vid(i, j):
            if i == 0:
                return 0
            if i == n_lat:
                return nv - 1
            return 1 + (i - 1) * L + (j % L)

        tau_vertex = np.empty(nv, dtype=int)
        for i in range(n_lat + 1):
            for j in range(L):
                tau_vertex[vid(i, j)] = vid(n_lat - i, j + L // 2)

        plaqs, plat, plon = [], [], []
        for i in range(n_lat):
            for j in range(L):
                # coordinate orientation: (i,j) -> (i+1,j) -> (i+1,j+1) -> (i,j+1)
                plaqs.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)))
                plat.append(i)
                plon.append(j)
        tau_plaq = np.empty(len(plaqs), dtype=int)
        for i in range(n_lat):
            for j in range(L):
                tau_plaq[i * L + j] = (n_lat - 1 - i) * L + (j + L // 2) % L
    else:
        nv = n_lat * L
        points = np.empty((nv, 2))
        vlat = np.empty(nv, dtype=int)
        vlon = np.empty(nv, dtype=int)
        for i in range(n_lat):
            for j in range(L):
                v = i * L + j
                points[v] = (TWO_PI * j / L, TWO_PI * i / n_lat)  # (q, p)
                vlat[v], vlon[v] = i, j

        def vid(i, j):
            return (i % n_lat) * L + (j % L)

        tau_vertex = np.empty(nv, dtype=int)
        for i in range(n_lat):
            for j in range(L):
                tau_vertex[vid(i, j)] = vid((n_lat - i) % n_lat, j)

        plaqs, plat, plon = [], [], []
        for i in range(n_lat):
            for j in range(L):
                # coordinate orientation dq^dp: (i,j) -> (i,j+1) -> (i+1,j+1) -> (i+1,j)
                plaqs.append((vid(i, j), vid(i, j + 1), vid(i + 1, j + 1), vid(i + 1, j)))
                plat.append(i)
                plon.append(j)
        tau_plaq = np.empty(len(plaqs), dtype=int)
        for i in range(n_lat):
            for j in range(L):
                tau_plaq[i * L + j] = ((n_lat - 1 - i) % n_lat) * L + j

    return Grid(
        manifold=manifold,
        n_lat=n_lat,
        n_lon=n_lon,
        points=points,
        vertex_lat=vlat,
        vertex_lon=vlon,
        plaquettes=np.asarray(plaqs, dtype=int),
        plaq_lat=np.asarray(plat, dtype=int),
        plaq_lon=np.asarray(plon, dtype=int),
        tau_vertex=tau_vertex,
        tau_plaq=tau_plaq,
    )


def refine_grid(grid: Grid, factor: int = 2) -> Grid:
    return build_grid(grid.manifold, grid.n_lat * factor, grid.n_lon * factor)


@dataclass(frozen=True)
class FundamentalDomain:
    """Closed fundamental domain of the involution, with its boundary loops.

    Sphere: the closed northern hemisphere (rows 0 .. n_lat/2), boundary the
    equator.  Torus: the closed cylinder 0 <= p <= pi (rows 0 .. n_lat/2),
    boundaries the two TRI lines p = 0 and p = pi.
    """

    grid: Grid
    vertex_ids: np.ndarray            # domain vertices, fixed order
    local_index: np.ndarray           # grid vid -> local index (-1 outside)
    plaq_ids: np.ndarray              # plaquettes contained in the domain
    boundary_loops: tuple             # loops of vids, consistent orientation
    edges: np.ndarray = field(repr=False)  # (E, 2) vids of adjacent domain vertices

    @property
    def n_vertices(self) -> int:
        return self.vertex_ids.size

    def local(self, vids):
        return self.local_index[vids]


def fundamental_domain(grid: Grid) -> FundamentalDomain:
    half = grid.n_lat // 2
    L = grid.n_lon
    rows = range(half + 1)

    vids = []
    if grid.manifold == Manifold.SPHERE:
        vids.append(grid.vid(0, 0))
        for i in range(1, half + 1):
            vids.extend(grid.vid(i, j) for j in range(L))
        boundary = (grid.row_vids(half),)
    else:
        for i in rows:
            vids.extend(grid.vid(i, j) for j in range(L))
        boundary = (grid.row_vids(0), grid.row_vids(half))

    vertex_ids = np.asarray(vids, dtype=int)
    local = np.full(grid.n_vertices, -1, dtype=int)
    local[vertex_ids] = np.arange(vertex_ids.size)

    plaq_ids = np.where(grid.plaq_lat < half)[0]

    edges = []
    if grid.manifold == Manifold.SPHERE:
        for j in range(L):
            edges.append((grid.vid(0, 0), grid.vid(1, j)))
        for i in range(1, half + 1):
            for j in range(L):
                edges.append((grid.vid(i, j), grid.vid(i, j + 1)))
                if i < half:
                    edges.append((grid.vid(i, j), grid.vid(i + 1, j)))
    else:
        for i in range(half + 1):
            for j in range(L):
                edges.append((grid.vid(i, j), grid.vid(i, j + 1)))
                if i < half:
                    edges.append((grid.vid(i, j), grid.vid(i + 1, j)))

    return FundamentalDomain(
        grid=grid,
        vertex_ids=vertex_ids,
        local_index=local,
        plaq_ids=plaq_ids,
        boundary_loops=boundary,
        edges=np.asarray(edges, dtype=int),
    )


def boundary_loop_samples(domain: FundamentalDomain):
    """Ordered boundary vertex loops: equator (sphere) or p = 0, pi (torus)."""
    return domain.boundary_loops


def transport_chains(domain: FundamentalDomain):
    """Vertex chains for frame transport over the domain.

    Sphere: (seed vid = north pole, chains pole -> equator down each meridian).
    Torus: (seed vid = (q,p) = (0,0), base row chain along q, and one upward
    chain in p per column).
    """
    grid = domain.grid
    half = grid.n_lat // 2
    L = grid.n_lon
    if grid.manifold == Manifold.SPHERE:
        seed = grid.vid(0, 0)
        chains = [
            [grid.vid(i, j) for i in range(half + 1)]  # includes the pole
            for j in range(L)
        ]
        return seed, chains
    seed = grid.vid(0, 0)
    base = [grid.vid(0, j) for j in range(L)]
    columns = [[grid.vid(i, j) for i in range(half + 1)] for j in range(L)]
    return seed, (base, columns)


def plaquette_solid_angles(grid: Grid) -> np.ndarray:
    """Spherical area of each plaquette (sphere grids only)."""
    if grid.manifold != Manifold.SPHERE:
        raise DomainError("solid angles are defined for sphere grids")
    i = grid.plaq_lat
    th0 = np.pi * i / grid.n_lat
    th1 = np.pi * (i + 1) / grid.n_lat
    return (np.cos(th0) - np.cos(th1)) * (TWO_PI / grid.n_lon)
