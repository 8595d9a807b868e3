"""Compliance, local energies and the Dirichlet replacement of a solved field."""
from __future__ import annotations

import numpy as np

from ..geometry.graph import GlueGraph
from .force import ForceSpec
from .mesh import ConstrainedMesh
from .solver import DEFAULT_TOL, ScalarField, load_vector, solve_with_data


def conjugate(p: float) -> float:
    return p / (p - 1)


def compliance(mesh: ConstrainedMesh, field: ScalarField, f: ForceSpec) -> tuple[float, float]:
    """Compliance from the gradient, (1/p') int |grad u|^p, and from the work, (1/p') int f u."""
    pc = conjugate(field.p)
    g = field.element_gradients
    c_grad = float(np.dot(mesh.areas, np.hypot(g[:, 0], g[:, 1]) ** field.p)) / pc
    F = load_vector(mesh, f)
    F[mesh.dirichlet_mask] = 0.0
    c_work = float(np.dot(F, field.values)) / pc
    return c_grad, c_work


def _sector(p, q, r):
    cross = p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0]
    dot = (p * q).sum(-1)
    return 0.5 * r * r * np.arctan2(cross, dot)


def _edge_piece(a, b, r):
    """Signed area of disk(0, r) intersected with the triangle (0, a, b)."""
    d = b - a
    A = (d * d).sum(-1)
    B = 2 * (a * d).sum(-1)
    C = (a * a).sum(-1) - r * r
    disc = B * B - 4 * A * C
    hit = (disc > 0) & (A > 0)
    sq = np.sqrt(np.where(hit, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(hit, (-B - sq) / (2 * A), 1.0)
        t1 = np.where(hit, (-B + sq) / (2 * A), 1.0)
    t0 = np.clip(t0, 0.0, 1.0)
    t1 = np.clip(t1, t0, 1.0)
    pa = a + t0[..., None] * d
    pb = a + t1[..., None] * d
    inner = 0.5 * (pa[..., 0] * pb[..., 1] - pa[..., 1] * pb[..., 0])
    return _sector(a, pa, r) + inner + _sector(pb, b, r)


def triangle_disk_areas(mesh: ConstrainedMesh, x, r: float) -> np.ndarray:
    """Exact area of each triangle intersected with the disk B_r(x)."""
    P = mesh.nodes[mesh.triangles] - np.asarray(x, dtype=float)
    out = np.zeros(mesh.n_triangles)
    # triangles far from the disk contribute nothing
    rad = np.hypot(*(P - P.mean(axis=1, keepdims=True)).transpose(2, 0, 1)).max(axis=1)
    near = np.hypot(*P.mean(axis=1).T) < r + rad
    if not np.any(near):
        return out
    Q = P[near]
    area = sum(_edge_piece(Q[:, i], Q[:, (i + 1) % 3], r) for i in range(3))
    out[near] = np.clip(area, 0.0, mesh.areas[near])
    return out


def ball_energy(mesh: ConstrainedMesh, field: ScalarField, x, r: float) -> float:
    """int over B_r(x) of |grad u|^p with exact triangle-disk clipping."""
    if r <= 0:
        return 0.0
    g = field.element_gradients
    return float(np.dot(triangle_disk_areas(mesh, x, r), np.hypot(g[:, 0], g[:, 1]) ** field.p))


def local_energy(mesh: ConstrainedMesh, field: ScalarField, x, r: float) -> float:
    """Normalised local energy (1/r) int_{B_r(x)} |grad u|^p."""
    if r <= 0:
        raise ValueError("radius must be positive")
    return ball_energy(mesh, field, x, r) / r


def dirichlet_replacement(
    mesh: ConstrainedMesh,
    field: ScalarField,
    sigma: GlueGraph | None,
    x,
    r: float,
    tol: float = DEFAULT_TOL,
) -> ScalarField:
    """p-harmonic replacement of ``field`` inside B_r(x).

    Nodes strictly inside the ball and off the Dirichlet set are free; every
    other node keeps its value, so the trace on the ball boundary and on the
    glue set is that of ``field``. The source term is dropped. ``sigma`` is
    carried for the interface only: the glue nodes are already in the mesh's
    Dirichlet mask.
    """
    x = np.asarray(x, dtype=float)
    d = np.hypot(*(mesh.nodes - x).T)
    inside = d < r * (1 - 1e-12)
    free = np.flatnonzero(inside & ~mesh.dirichlet_mask)
    F = np.zeros(mesh.n_nodes)
    return solve_with_data(mesh, F, field.p, free, np.asarray(field.values, dtype=float), tol=tol, initial=field.values)


def replacement_support(mesh: ConstrainedMesh, x, r: float) -> np.ndarray:
    """Triangles with at least one node strictly inside the ball (where a replacement can differ)."""
    d = np.hypot(*(mesh.nodes - np.asarray(x, dtype=float)).T)
    inside = d < r * (1 - 1e-12)
    return np.flatnonzero(inside[mesh.triangles].any(axis=1))


def seminorm_on(mesh: ConstrainedMesh, field: ScalarField, tris) -> float:
    g = field.element_gradients[tris]
    return float(np.dot(mesh.areas[tris], np.hypot(g[:, 0], g[:, 1]) ** field.p))


def difference_energy(mesh: ConstrainedMesh, a: ScalarField, b: ScalarField, x, r: float) -> float:
    """int over B_r(x) of |grad a - grad b|^p."""
    dg = a.element_gradients - b.element_gradients
    return float(np.dot(triangle_disk_areas(mesh, x, r), np.hypot(dg[:, 0], dg[:, 1]) ** a.p))


def sup_norm(field: ScalarField) -> float:
    return float(np.max(np.abs(field.values), initial=0.0))
