import logging
from dataclasses import asdict, dataclass

import numpy as np

from cmctorus.exceptions import DomainError
from cmctorus.fields import values_of
from cmctorus.geometry import build_jet, jet_perturbed, normal_projection, normal_triple

DEFAULT_R0 = 0.3
EDGE_CHUNK = 512
HIT_TOL = 1e-12


@dataclass
class EmbeddingCertificate:
    r0_used: float
    star_shape_margin: float
    normal_proj_min: float
    containment_margin: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def _leaf_factors(grid, r):
    tbl = grid.tbl
    x, xp, zp = tbl.x[:, None], tbl.xp[:, None], tbl.zp[:, None]
    w = zp / x
    P = 1.0 + grid.eps * x * np.sin(grid.theta)[None, :]
    S = np.sqrt(xp ** 2 + (zp * P) ** 2) / x
    r1 = 1.0 - r * w
    return r1, 1.0 - r * w * P / S


def _star_margin(grid, r):
    r1, rho = _leaf_factors(grid, r)
    if np.any(r1 <= 0):
        return float(np.min(r1))
    return float(np.min(rho / r1))


def leaf_star_shape(grid, r):
    """
    min over (t, theta) of rho / (x r1) for the leaf X + r x N.

    rho = x (1 - r w P/S) is the polar radius of the leaf cross-section and
    r1 = 1 - r w with w = z'/x; when rho/x = r1 + r2 sin(theta) this is 1 - |r2/r1|.
    """
    r1, _ = _leaf_factors(grid, r)
    if np.any(r1 <= 0):
        raise DomainError(f"Leaf r={r} folds over: 1 - r z'/x reaches {float(np.min(r1)):.4g}")
    return _star_margin(grid, r)


def cross_section_polygon(grid, r, row):
    """Planar cross-section rho(theta) (cos theta, sin theta) of the leaf at grid row `row`."""
    _, rho = _leaf_factors(grid, r)
    radius = grid.tbl.x[row] * rho[row]
    return np.stack([radius * np.cos(grid.theta), radius * np.sin(grid.theta)], axis=-1)


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def polygon_simple(points):
    """True when no two non-adjacent edges of the closed polygon cross."""
    m = len(points)
    start, end = points, np.roll(points, -1, axis=0)
    i, j = np.triu_indices(m, k=2)
    keep = (j - i) % m != m - 1
    i, j = i[keep], j[keep]
    p, q, u, v = start[i], end[i], start[j], end[j]
    d1, d2 = _orient(p, q, u), _orient(p, q, v)
    d3, d4 = _orient(u, v, p), _orient(u, v, q)
    crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
    return not bool(np.any(crossing))


def leaf_immersion(grid, r, base=None):
    """Grid minimum of N . Y_t ^ Y_theta / (|X_t| |X_theta|) for the leaf Y = X + r x N."""
    base = base if base is not None else build_jet(grid)
    phi = r * np.broadcast_to(grid.tbl.x[:, None], grid.shape)
    leaf = jet_perturbed(base, phi, check=False)
    return float(np.min(normal_projection(base, leaf)))


def normal_triple_bound(grid, base=None):
    """max |N . N_t ^ N_theta|."""
    base = base if base is not None else build_jet(grid)
    return float(np.max(np.abs(normal_triple(base))))


def certify(grid, result, r0=DEFAULT_R0, base=None):
    """
    Embeddedness certificate for Y = X + phi N.

    Checks containment |phi| < r0 x, the star shape of both leaves at +-r0 and
    positivity of the normal projection of Y and of both leaves.

    Parameters:
        grid (TorusGrid): the torus the reduction ran on.
        result (ReductionResult or field): converged phi.
        r0 (float): tube parameter.
        base (SurfaceJet, optional): analytic jet of grid.

    Returns:
        EmbeddingCertificate
    """
    base = base if base is not None else build_jet(grid)
    phi = values_of(getattr(result, "phi", result))
    x = grid.tbl.x[:, None]
    containment = float(np.min(r0 - np.abs(phi) / x))
    star = min(_star_margin(grid, r0), _star_margin(grid, -r0))
    surface = jet_perturbed(base, phi, check=False)
    projection = min(float(np.min(normal_projection(base, surface))),
                     leaf_immersion(grid, r0, base), leaf_immersion(grid, -r0, base))
    passed = containment > 0 and star > 0 and projection > 0
    logging.debug(f"Certificate r0={r0}: containment {containment:.3e}, star {star:.3e}, projection {projection:.3e}")
    return EmbeddingCertificate(r0_used=r0, star_shape_margin=star, normal_proj_min=projection,
                                containment_margin=containment, passed=passed)


def largest_passing_r0(grid, result, r0_values, base=None):
    """The largest r0 in r0_values whose certificate passes, or None."""
    base = base if base is not None else build_jet(grid)
    for r0 in sorted(r0_values, reverse=True):
        if certify(grid, result, r0, base).passed:
            return r0
    return None


def _edges(triangles):
    pairs = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    return np.unique(np.sort(pairs, axis=1), axis=0)


def mesh_self_intersections(vertices, triangles):
    """
    Count (edge, triangle) pairs that cross, ignoring pairs sharing a vertex.

    Bounding boxes prune candidates; survivors go through the Moller-Trumbore
    segment test. A closed embedded mesh gives 0.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles)
    edges = _edges(triangles)
    tri = vertices[triangles]
    tmin, tmax = tri.min(axis=1), tri.max(axis=1)
    hits = 0
    for lo in range(0, len(edges), EDGE_CHUNK):
        chunk = edges[lo:lo + EDGE_CHUNK]
        seg = vertices[chunk]
        emin, emax = seg.min(axis=1), seg.max(axis=1)
        overlap = np.all((emin[:, None, :] <= tmax[None]) & (emax[:, None, :] >= tmin[None]), axis=-1)
        shared = np.zeros_like(overlap)
        for end in (0, 1):
            shared |= np.any(chunk[:, end, None, None] == triangles[None, :, :], axis=-1)
        ei, ti = np.nonzero(overlap & ~shared)
        if len(ei) == 0:
            continue
        origin = vertices[chunk[ei, 0]]
        direction = vertices[chunk[ei, 1]] - origin
        v0, v1, v2 = tri[ti, 0], tri[ti, 1], tri[ti, 2]
        e1, e2 = v1 - v0, v2 - v0
        p = np.cross(direction, e2)
        det = np.einsum("ij,ij->i", e1, p)
        valid = np.abs(det) > HIT_TOL * np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1) \
            * np.linalg.norm(direction, axis=1)
        inv = np.where(valid, 1.0 / np.where(valid, det, 1.0), 0.0)
        s = origin - v0
        u = np.einsum("ij,ij->i", s, p) * inv
        q = np.cross(s, e1)
        v = np.einsum("ij,ij->i", direction, q) * inv
        t = np.einsum("ij,ij->i", e2, q) * inv
        hit = valid & (u >= 0) & (v >= 0) & (u + v <= 1) & (t >= 0) & (t <= 1)
        hits += int(np.count_nonzero(hit))
    return hits
