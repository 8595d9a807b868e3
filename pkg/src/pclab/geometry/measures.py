"""Metric diagnostics on glue graphs: Hausdorff distance, flatness, density ratios."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import EmptyIntersection, EmptySet, NotOnSigma
from .domain import point_segment_distance
from .graph import GlueGraph

TOL_BETA = 5e-3
TOL_LEN = 1e-6
N_COARSE = 64
THETA_TOL = 1e-4


def sample_segments(a, b, spacing: float) -> np.ndarray:
    """Arclength-uniform samples (endpoints included) along each segment."""
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    out = []
    for p, q in zip(a, b):
        L = math.hypot(*(q - p))
        n = max(1, math.ceil(L / spacing))
        t = np.linspace(0.0, 1.0, n + 1)[:, None]
        out.append(p + t * (q - p))
    return np.vstack(out) if out else np.zeros((0, 2))


def sample_graph(graph: GlueGraph, spacing: float) -> np.ndarray:
    pts = sample_segments(graph.segments()[:, 0], graph.segments()[:, 1], spacing) if graph.n_edges else np.zeros((0, 2))
    iso = graph.vertices[graph.degrees() == 0]
    return np.vstack([pts, iso])


def hausdorff_distance(A, B) -> float:
    """Symmetric Hausdorff distance between two finite point samples."""
    A = np.asarray(A, dtype=float).reshape(-1, 2)
    B = np.asarray(B, dtype=float).reshape(-1, 2)
    if len(A) == 0 or len(B) == 0:
        raise EmptySet("Hausdorff distance to an empty set is not a number here")
    dab = cKDTree(B).query(A)[0].max()
    dba = cKDTree(A).query(B)[0].max()
    return float(max(dab, dba))


# ---------------------------------------------------------------------------
# disk clipping
# ---------------------------------------------------------------------------

def segment_disk_params(a, b, center, r):
    """Parameter interval ``[t0, t1]`` of each segment inside the closed disk (t0 > t1 when empty)."""
    a = np.asarray(a, dtype=float).reshape(-1, 2) - center
    b = np.asarray(b, dtype=float).reshape(-1, 2) - center
    d = b - a
    A = (d**2).sum(1)
    B = 2 * (a * d).sum(1)
    C = (a**2).sum(1) - r * r
    disc = B * B - 4 * A * C
    t0 = np.full(len(a), 1.0)
    t1 = np.full(len(a), 0.0)
    nz = A > 0
    ok = nz & (disc >= 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r0 = (-B - sq) / (2 * A)
        r1 = (-B + sq) / (2 * A)
    t0 = np.where(ok, np.maximum(r0, 0.0), t0)
    t1 = np.where(ok, np.minimum(r1, 1.0), t1)
    # zero-length segments: inside iff the point is
    pt_in = (~nz) & (C <= 0)
    t0 = np.where(pt_in, 0.0, t0)
    t1 = np.where(pt_in, 1.0, t1)
    return t0, t1


def clip_to_ball(graph: GlueGraph, x, r):
    """Pieces of the graph in the closed ball: ``(a, b)`` endpoint arrays, isolated points as a == b."""
    x = np.asarray(x, dtype=float)
    pieces_a, pieces_b = [], []
    if graph.n_edges:
        s = graph.segments()
        t0, t1 = segment_disk_params(s[:, 0], s[:, 1], x, r)
        keep = t1 >= t0
        d = s[:, 1] - s[:, 0]
        pieces_a.append(s[keep, 0] + t0[keep, None] * d[keep])
        pieces_b.append(s[keep, 0] + t1[keep, None] * d[keep])
    iso = graph.vertices[graph.degrees() == 0]
    if len(iso):
        iso = iso[np.hypot(*(iso - x).T) <= r * (1 + 1e-12)]
        pieces_a.append(iso)
        pieces_b.append(iso)
    if not pieces_a:
        return np.zeros((0, 2)), np.zeros((0, 2))
    return np.vstack(pieces_a), np.vstack(pieces_b)


def length_in_ball(graph: GlueGraph, x, r) -> float:
    """H^1 of the graph inside the disk, by exact segment clipping."""
    if graph.n_edges == 0:
        return 0.0
    s = graph.segments()
    t0, t1 = segment_disk_params(s[:, 0], s[:, 1], np.asarray(x, dtype=float), r)
    return float(np.sum(np.clip(t1 - t0, 0.0, None) * graph.edge_lengths()))


# ---------------------------------------------------------------------------
# flatness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatnessReport:
    center: tuple
    radius: float
    beta: float
    best_line_angle: float


def _beta_of_angles(thetas, x, r, ka, kb, spacing):
    """Normalized Hausdorff distance between the clipped set and diameters at ``thetas``."""
    thetas = np.atleast_1d(thetas)
    u = np.column_stack([np.cos(thetas), np.sin(thetas)])
    ends = np.concatenate([ka, kb])
    rel = ends - x
    # sup over K of the distance to the diameter: exact, attained at piece endpoints
    along = rel @ u.T  # (nk, nth)
    perp2 = (rel**2).sum(1)[:, None] - along**2
    excess = np.clip(np.abs(along) - r, 0.0, None)
    d1 = np.sqrt(np.clip(perp2, 0.0, None) + excess**2).max(axis=0)
    # sup over the diameter of the distance to K: sampled
    n = max(2, math.ceil(2 * r / spacing) + 1)
    s = np.linspace(-r, r, n)
    d2 = np.empty(len(thetas))
    for k, uu in enumerate(u):
        pts = x + s[:, None] * uu
        d2[k] = point_segment_distance(pts, ka, kb).min(axis=1).max()
    return np.maximum(d1, d2) / r


def flatness(graph: GlueGraph, x, r: float, spacing: float | None = None) -> FlatnessReport:
    """Flatness of the glue set in the closed ball B_r(x) about the best line through x.

    The line angle is chosen by a 64-angle scan followed by golden-section
    refinement (to 1e-4 rad) around each local minimum of the scan; ties go to
    the smallest angle.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    ka, kb = clip_to_ball(graph, x, r)
    if len(ka) == 0:
        raise EmptyIntersection("glue set misses the closed ball")
    spacing = r / 256.0 if spacing is None else spacing
    f = lambda th: float(_beta_of_angles(th, x, r, ka, kb, spacing)[0])
    grid = np.pi * np.arange(N_COARSE) / N_COARSE
    vals = _beta_of_angles(grid, x, r, ka, kb, spacing)
    prev, nxt = np.roll(vals, 1), np.roll(vals, -1)
    local = np.flatnonzero((vals <= prev) & (vals <= nxt))
    local = local[np.argsort(vals[local], kind="stable")][:6]
    best_th, best = float(grid[int(np.argmin(vals))]), float(vals.min())
    step = np.pi / N_COARSE
    invphi = (math.sqrt(5) - 1) / 2
    for i in local:
        lo, hi = grid[i] - step, grid[i] + step
        c = hi - invphi * (hi - lo)
        d = lo + invphi * (hi - lo)
        fc, fd = f(c), f(d)
        while hi - lo > THETA_TOL:
            if fc <= fd:
                hi, d, fd = d, c, fc
                c = hi - invphi * (hi - lo)
                fc = f(c)
            else:
                lo, c, fc = c, d, fd
                d = lo + invphi * (hi - lo)
                fd = f(d)
        th, val = (c, fc) if fc <= fd else (d, fd)
        th = th % np.pi
        if val < best - 1e-15 or (abs(val - best) <= 1e-15 and th < best_th):
            best, best_th = val, th
    return FlatnessReport(tuple(x.tolist()), float(r), float(min(best, math.sqrt(2) + TOL_BETA)), float(best_th % np.pi))


def distance_to_graph(graph: GlueGraph, x) -> float:
    x = np.asarray(x, dtype=float).reshape(1, 2)
    d = np.inf
    if graph.n_edges:
        s = graph.segments()
        d = point_segment_distance(x, s[:, 0], s[:, 1]).min()
    if graph.n_vertices:
        d = min(d, np.hypot(*(graph.vertices - x).T).min())
    return float(d)


def ahlfors_ratio(graph: GlueGraph, x, r: float, tol: float | None = None) -> float:
    """H^1(Sigma ∩ B_r(x)) / r for a centre on the glue set."""
    tol = graph.tol() if tol is None else tol
    if graph.is_empty() or distance_to_graph(graph, x) > tol:
        raise NotOnSigma("centre is not on the glue set")
    return length_in_ball(graph, x, r) / r


def circle_intersections(graph: GlueGraph, x, s: float, tol: float | None = None) -> np.ndarray:
    """Distinct points where the edges meet the circle of radius s about x."""
    if graph.n_edges == 0:
        return np.zeros((0, 2))
    tol = graph.tol() if tol is None else tol
    x = np.asarray(x, dtype=float)
    seg = graph.segments()
    a = seg[:, 0] - x
    d = seg[:, 1] - seg[:, 0]
    A = (d**2).sum(1)
    B = 2 * (a * d).sum(1)
    C = (a**2).sum(1) - s * s
    disc = B * B - 4 * A * C
    pts = []
    for k in range(len(seg)):
        if A[k] == 0:
            continue
        L = math.sqrt(A[k])
        tc = -B[k] / (2 * A[k])
        closest = a[k] + tc * d[k]
        if abs(math.hypot(*closest) - s) <= tol:
            # tangential grazing: one point
            if -tol / L <= tc <= 1 + tol / L:
                pts.append(seg[k, 0] + min(max(tc, 0.0), 1.0) * d[k])
            continue
        if disc[k] < 0:
            continue
        sq = math.sqrt(disc[k])
        for t in ((-B[k] - sq) / (2 * A[k]), (-B[k] + sq) / (2 * A[k])):
            if -tol / L <= t <= 1 + tol / L:
                pts.append(seg[k, 0] + min(max(t, 0.0), 1.0) * d[k])
    if not pts:
        return np.zeros((0, 2))
    pts = np.array(pts)
    keep = []
    for p in pts:
        if all(math.hypot(*(p - q)) > max(tol, 1e-12 * s) for q in keep):
            keep.append(p)
    return np.array(keep)


def count_circle_intersections(graph: GlueGraph, x, s: float, tol: float | None = None) -> int:
    if s <= 0:
        raise ValueError("radius must be positive")
    return int(len(circle_intersections(graph, x, s, tol)))
