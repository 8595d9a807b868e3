"""Closed polygonal approximation of the membrane domain."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from matplotlib.path import Path
from scipy.spatial import cKDTree

from .graph import GEO_TOL_REL, planarize


def _signed_area(loop: np.ndarray) -> float:
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _loop_edges(loop):
    return np.stack([loop, np.roll(loop, -1, axis=0)], axis=1)


def point_segment_distance(pts, a, b):
    """Distances from points ``(n,2)`` to segments ``(m,2)``/``(m,2)``: returns ``(n, m)``."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    d = b - a
    L2 = (d**2).sum(1)
    rel = pts[:, None, :] - a[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(L2 > 0, (rel * d[None]).sum(-1) / L2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a[None] + t[..., None] * d[None]
    return np.hypot(*(pts[:, None, :] - proj).transpose(2, 0, 1))


@dataclass(frozen=True, eq=False)
class PolygonalDomain:
    """Outer counterclockwise loop plus optional clockwise holes."""

    boundary_loops: tuple

    def __post_init__(self):
        loops = []
        for k, loop in enumerate(self.boundary_loops):
            arr = np.array(loop, dtype=float).reshape(-1, 2)
            if len(arr) > 1 and np.allclose(arr[0], arr[-1]):
                arr = arr[:-1]
            if len(arr) < 3:
                raise ValueError("boundary loop needs at least 3 vertices")
            area = _signed_area(arr)
            if (k == 0 and area < 0) or (k > 0 and area > 0):
                arr = arr[::-1].copy()
            arr.setflags(write=False)
            loops.append(arr)
        if not loops:
            raise ValueError("domain needs an outer loop")
        object.__setattr__(self, "boundary_loops", tuple(loops))
        self._check_simple()

    def _check_simple(self):
        pts, edges = self.boundary_pslg()
        p2, e2, _, _ = planarize(pts, edges, self.tol())
        if len(p2) != len(pts) or len(e2) != len(edges):
            raise ValueError("boundary loops must be simple and mutually disjoint")
        outer = self.boundary_loops[0]
        for hole in self.boundary_loops[1:]:
            if not np.all(_even_odd(hole, [outer])):
                raise ValueError("holes must lie inside the outer loop")

    # -- constructors -----------------------------------------------------
    @classmethod
    def polygon(cls, outer, holes=()) -> "PolygonalDomain":
        return cls(tuple([outer, *holes]))

    @classmethod
    def rectangle(cls, x0, y0, x1, y1) -> "PolygonalDomain":
        return cls(([(x0, y0), (x1, y0), (x1, y1), (x0, y1)],))

    @classmethod
    def unit_square(cls) -> "PolygonalDomain":
        return cls.rectangle(0.0, 0.0, 1.0, 1.0)

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius=1.0, h=None, n=None) -> "PolygonalDomain":
        """Inscribed regular polygon; ``n`` defaults to ceil(2*pi*R/h) rounded up to a multiple of 4."""
        if n is None:
            if h is None:
                raise ValueError("give either h or n")
            n = max(16, math.ceil(2 * math.pi * radius / h))
        n = int(4 * math.ceil(n / 4))
        th = 2 * math.pi * np.arange(n) / n
        pts = np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)])
        return cls((pts,))

    # -- queries ----------------------------------------------------------
    @property
    def bbox(self) -> tuple[float, float, float, float]:
        o = self.boundary_loops[0]
        lo, hi = o.min(0), o.max(0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def diagonal(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return math.hypot(x1 - x0, y1 - y0)

    def tol(self) -> float:
        return GEO_TOL_REL * self.diagonal()

    def area(self) -> float:
        return sum(_signed_area(l) for l in self.boundary_loops)

    def boundary_segments(self) -> np.ndarray:
        return np.vstack([_loop_edges(l) for l in self.boundary_loops])

    def boundary_pslg(self):
        pts, edges, off = [], [], 0
        for l in self.boundary_loops:
            n = len(l)
            pts.append(l)
            edges.append(np.column_stack([np.arange(n), (np.arange(n) + 1) % n]) + off)
            off += n
        return np.vstack(pts), np.vstack(edges)

    def boundary_distance(self, points, cutoff: float | None = None) -> np.ndarray:
        """Distance to the boundary; with ``cutoff`` only values below it are exact (others are inf)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        seg = self.boundary_segments()
        out = np.full(len(pts), np.inf)
        if cutoff is None:
            cand = np.arange(len(pts))
        else:
            half = 0.5 * np.hypot(*(seg[:, 1] - seg[:, 0]).T).max()
            verts = np.vstack(self.boundary_loops)
            near = cKDTree(verts).query(pts, distance_upper_bound=half + cutoff)[0]
            cand = np.flatnonzero(np.isfinite(near))
        for chunk in np.array_split(cand, max(1, len(cand) // 2048)):
            if len(chunk):
                out[chunk] = point_segment_distance(pts[chunk], seg[:, 0], seg[:, 1]).min(axis=1)
        return out

    def contains(self, points, closed: bool = True, tol: float | None = None) -> np.ndarray:
        """Inside test; with ``closed`` points within ``tol`` of the boundary count as inside."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        inside = _even_odd(pts, self.boundary_loops)
        tol = self.tol() if tol is None else tol
        near = self.boundary_distance(pts, cutoff=tol) <= tol
        return inside | near if closed else inside & ~near

    def segment_inside(self, a, b, tol: float | None = None) -> np.ndarray:
        """True for segments lying in the closed domain (endpoints inside, no boundary crossing)."""
        a = np.asarray(a, dtype=float).reshape(-1, 2)
        b = np.asarray(b, dtype=float).reshape(-1, 2)
        tol = self.tol() if tol is None else tol
        ok = self.contains(a, tol=tol) & self.contains(b, tol=tol) & self.contains(0.5 * (a + b), tol=tol)
        seg = self.boundary_segments()
        c, d = seg[:, 0], seg[:, 1]
        for k in np.flatnonzero(ok):
            if _proper_cross_any(a[k], b[k], c, d, tol):
                ok[k] = False
        return ok

    def to_dict(self) -> dict:
        return {"kind": "polygon", "loops": [l.tolist() for l in self.boundary_loops]}


def _even_odd(pts, loops) -> np.ndarray:
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    inside = np.zeros(len(pts), dtype=bool)
    for loop in loops:
        inside ^= Path(loop).contains_points(pts)
    return inside


def _proper_cross_any(a, b, c, d, tol) -> bool:
    r = b - a
    s = d - c
    denom = r[0] * s[:, 1] - r[1] * s[:, 0]
    qp = c - a
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / denom
        u = (qp[:, 0] * r[1] - qp[:, 1] * r[0]) / denom
    Lr = math.hypot(*r)
    Ls = np.hypot(s[:, 0], s[:, 1])
    good = np.abs(denom) > 1e-14 * Lr * Ls
    good &= (t * Lr > tol) & ((1 - t) * Lr > tol) & (u * Ls > tol) & ((1 - u) * Ls > tol)
    return bool(np.any(good))
