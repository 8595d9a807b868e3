"""Minimal Steiner trees on four terminals."""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree

from .graph import GlueGraph, normalize

_SQ3 = math.sqrt(3.0)


def _equilateral_apex(a, b, away_from):
    """Third vertex of the equilateral triangle on ab, on the side opposite ``away_from``."""
    m = 0.5 * (a + b)
    d = b - a
    n = np.array([-d[1], d[0]]) * (_SQ3 / 2)
    c1, c2 = m + n, m - n
    return c1 if np.dot(c1 - away_from, c1 - away_from) >= np.dot(c2 - away_from, c2 - away_from) else c2


def _circumcenter(a, b, c):
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    return np.array([ux, uy])


def _angles_ok(s, nbrs, tol=1e-6):
    vecs = [q - s for q in nbrs]
    if any(np.hypot(*v) < 1e-14 for v in vecs):
        return False
    for u, v in itertools.combinations(vecs, 2):
        c = np.dot(u, v) / (np.hypot(*u) * np.hypot(*v))
        if abs(c + 0.5) > tol:
            return False
    return True


def _full_tree(a, b, c, d):
    """Full Steiner tree for topology ab|cd via Melzak's construction, or None when infeasible."""
    e1 = _equilateral_apex(a, b, 0.5 * (c + d))
    e2 = _equilateral_apex(c, d, 0.5 * (a + b))
    span = e2 - e1
    L = math.hypot(*span)
    if L == 0:
        return None
    u = span / L
    c1 = _circumcenter(a, b, e1)
    c2 = _circumcenter(c, d, e2)
    t1 = -2 * np.dot(e1 - c1, u)
    t2 = -2 * np.dot(e2 - c2, -u)
    if not (t1 > 0 and t2 > 0 and t1 + t2 < L):
        return None
    s1 = e1 + t1 * u
    s2 = e2 - t2 * u
    if not (_angles_ok(s1, [a, b, s2]) and _angles_ok(s2, [c, d, s1])):
        return None
    pts = np.array([a, b, c, d, s1, s2])
    edges = [(0, 4), (1, 4), (4, 5), (2, 5), (3, 5)]
    return pts, edges


def _fermat_point(a, b, c):
    """Fermat-Torricelli point; returns the obtuse vertex when an angle is >= 120 deg."""
    tri = [a, b, c]
    for i in range(3):
        p, q, r = tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]
        u, v = q - p, r - p
        nu, nv = np.hypot(*u), np.hypot(*v)
        if nu == 0 or nv == 0:
            return p.copy()
        if np.dot(u, v) / (nu * nv) <= -0.5:
            return p.copy()
    e = _equilateral_apex(a, b, c)
    cc = _circumcenter(a, b, e)
    span = c - e
    L = math.hypot(*span)
    w = span / L
    t = -2 * np.dot(e - cc, w)
    return e + t * w


def _tree_length(pts, edges):
    return float(sum(math.hypot(*(pts[i] - pts[j])) for i, j in edges))


def _mst(pts):
    n = len(pts)
    d = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
    t = minimum_spanning_tree(d).tocoo()
    return [(int(i), int(j)) for i, j in zip(t.row, t.col)]


def _candidates(p):
    yield p.copy(), _mst(p)
    for i, j, k, l in [(0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2)]:
        full = _full_tree(p[i], p[j], p[k], p[l])
        if full is not None:
            yield full
    # one Fermat point joining three terminals, fourth attached to one of them
    for trip in itertools.combinations(range(4), 3):
        (rest,) = set(range(4)) - set(trip)
        s = _fermat_point(*(p[t] for t in trip))
        pts = np.vstack([p, s])
        base = [(t, 4) for t in trip]
        for t in list(trip) + [4]:
            yield pts, base + [(rest, t)]


def steiner_connection_4(points) -> GlueGraph:
    """Shortest tree joining four points (at most two Steiner points).

    All full and degenerate Steiner topologies are evaluated in closed form
    and the shortest is returned. Coincident points are collapsed first; the
    tree of the remaining distinct points is returned.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(p) != 4:
        raise ValueError("need exactly four points")
    distinct = []
    for q in p:
        if all(math.hypot(*(q - r)) > 1e-12 * (1 + math.hypot(*q)) for r in distinct):
            distinct.append(q)
    p = np.array(distinct)
    if len(p) == 1:
        return GlueGraph.point(p[0])
    if len(p) < 4:
        return _steiner_small(p)
    best = None
    for pts, edges in _candidates(p):
        L = _tree_length(pts, edges)
        if best is None or L < best[0] - 1e-12:
            best = (L, pts, edges)
    _, pts, edges = best
    return normalize(GlueGraph(pts, np.array(edges, dtype=np.int64)))


def _steiner_small(p):
    if len(p) == 2:
        return GlueGraph(p, np.array([[0, 1]]))
    s = _fermat_point(p[0], p[1], p[2])
    pts = np.vstack([p, s])
    return normalize(GlueGraph(pts, np.array([[0, 3], [1, 3], [2, 3]])))


def mst_length(points) -> float:
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    return _tree_length(p, _mst(p))
