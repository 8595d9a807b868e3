"""Conforming Delaunay triangulation of the domain with the glue set as embedded edges.

The glue edges and the domain boundary form a planar straight-line graph. Its
segments are split until every sub-segment has an empty diametral circle, so
each one is an edge of the Delaunay triangulation of the final point set.
Interior points start on a hexagonal lattice and are refined by circumcentre
insertion (Ruppert's rules, with concentric-shell splitting at input vertices).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from ..errors import GlueOutsideDomain, MeshFailure
from ..geometry.domain import PolygonalDomain
from ..geometry.graph import GlueGraph, normalize, planarize

log = logging.getLogger(__name__)

MIN_ANGLE_DEG = 20.0
_INPUT, _SEGMENT, _FREE = 0, 1, 2


@dataclass(frozen=True, eq=False)
class ConstrainedMesh:
    """Triangulation of the domain whose edges include every glue edge.

    ``dirichlet_mask`` marks nodes on the domain boundary or on the glue set;
    ``source_edge`` maps a sorted mesh-edge node pair to the id of the glue
    edge it lies on.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    dirichlet_mask: np.ndarray
    source_edge: dict
    h: float
    boundary_mask: np.ndarray = field(default=None)
    glue_mask: np.ndarray = field(default=None)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def shape_gradients(self) -> np.ndarray:
        """Gradients of the three P1 basis functions on each triangle, shape ``(nt, 3, 2)``."""
        p = self.nodes[self.triangles]
        g = np.empty((len(p), 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            g[:, i, 0] = p[:, j, 1] - p[:, k, 1]
            g[:, i, 1] = p[:, k, 0] - p[:, j, 0]
        return g / (2 * self.areas)[:, None, None]

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def free_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet_mask)

    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def min_angle(self) -> float:
        """Smallest interior angle over all triangles, in degrees."""
        return float(np.degrees(_triangle_angles(self.nodes, self.triangles).min()))

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes.tolist(),
            "triangles": self.triangles.tolist(),
            "dirichlet_mask": self.dirichlet_mask.astype(bool).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _triangle_angles(pts, tris):
    p = pts[tris]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        A = np.arccos(np.clip((b * b + c * c - a * a) / (2 * b * c), -1, 1))
        B = np.arccos(np.clip((a * a + c * c - b * b) / (2 * a * c), -1, 1))
    C = np.pi - A - B
    return np.column_stack([A, B, C])


def _hex_lattice(bbox, h):
    x0, y0, x1, y1 = bbox
    dy = h * math.sqrt(3) / 2
    ny = int(math.ceil((y1 - y0) / dy)) + 1
    nx = int(math.ceil((x1 - x0) / h)) + 2
    j = np.arange(ny)
    i = np.arange(nx)
    X = x0 + i[None, :] * h + 0.5 * h * (j[:, None] % 2)
    Y = np.broadcast_to(y0 + j[:, None] * dy, X.shape)
    return np.column_stack([X.ravel(), Y.ravel()])


def _check_glue_inside(domain, sigma, tol):
    if sigma.is_empty():
        return
    if not np.all(domain.contains(sigma.vertices, tol=tol)):
        raise GlueOutsideDomain("a glue vertex lies outside the domain")
    if sigma.n_edges:
        s = sigma.segments()
        if not np.all(domain.segment_inside(s[:, 0], s[:, 1], tol=tol)):
            raise GlueOutsideDomain("a glue edge leaves the domain")


def build_mesh(
    domain: PolygonalDomain,
    sigma: GlueGraph | None,
    h: float,
    pin_isolated_points: bool = True,
    min_angle: float = MIN_ANGLE_DEG,
    max_rounds: int = 80,
) -> ConstrainedMesh:
    """Triangulate ``domain`` with target size ``h`` so that every glue edge is a union of mesh edges.

    Nodes on the boundary and on the glue set are flagged in
    ``dirichlet_mask``. Isolated glue vertices are pinned only when
    ``pin_isolated_points`` is set.
    """
    if h <= 0:
        raise ValueError("mesh size must be positive")
    sigma = GlueGraph.empty() if sigma is None else normalize(sigma)
    tol = domain.tol()
    _check_glue_inside(domain, sigma, 10 * tol)

    bpts, bedges = domain.boundary_pslg()
    nb = len(bedges)
    pts_in = np.vstack([bpts, sigma.vertices]) if sigma.n_vertices else bpts
    edges_in = np.vstack([bedges, sigma.edges + len(bpts)]) if sigma.n_edges else bedges
    pts0, segs0, parents, vmap = planarize(pts_in, edges_in, 10 * tol)

    seg_boundary = np.array([any(p < nb for p in par) for par in parents], dtype=bool)
    seg_glue = np.array(
        [min((sigma.edge_ids[p - nb] for p in par if p >= nb), default=-1) for par in parents], dtype=np.int64
    )
    n0 = len(pts0)
    iso_glue = set()
    if sigma.n_vertices:
        deg = sigma.degrees()
        for k in np.flatnonzero(deg == 0):
            iso_glue.add(int(vmap[len(bpts) + k]))

    # per-point attributes
    pts = [p for p in pts0]
    kind = [_INPUT] * n0
    on_bnd = [False] * n0
    on_glue = [False] * n0
    point_seg = [-1] * n0  # PSLG segment a split point lies on
    incident = [set() for _ in range(n0)]
    for s, (i, j) in enumerate(segs0):
        incident[i].add(s)
        incident[j].add(s)
        for v in (i, j):
            on_bnd[v] |= bool(seg_boundary[s])
            on_glue[v] |= bool(seg_glue[s] >= 0)
    for v in iso_glue:
        if pin_isolated_points:
            on_glue[v] = True

    subsegs = [(int(i), int(j), s) for s, (i, j) in enumerate(segs0)]

    # initial free points on a hex lattice, away from every segment
    lattice = _hex_lattice(domain.bbox, h)
    lattice = lattice[domain.contains(lattice, closed=False)]
    samples = []
    for i, j in segs0:
        a, b = pts0[i], pts0[j]
        n = max(1, int(math.ceil(np.hypot(*(b - a)) / (h / 8))))
        t = np.linspace(0, 1, n + 1)[:, None]
        samples.append(a + t * (b - a))
    samples.append(pts0)
    dist = cKDTree(np.vstack(samples)).query(lattice)[0]
    lattice = lattice[dist > 0.55 * h]
    for p in lattice:
        pts.append(p)
        kind.append(_FREE)
        on_bnd.append(False)
        on_glue.append(False)
        point_seg.append(-1)

    h_floor = h / 64.0
    min_ang = math.radians(min_angle)
    tri = None
    final_ok = False
    for rnd in range(max_rounds):
        P = np.asarray(pts)
        K = np.asarray(kind)
        S = np.array([(i, j) for i, j, _ in subsegs], dtype=np.int64)
        a, b = P[S[:, 0]], P[S[:, 1]]
        L = np.hypot(*(b - a).T)
        mid = 0.5 * (a + b)
        tree = cKDTree(P)
        hits = tree.query_ball_point(mid, 0.5 * L * (1 + 1e-9))
        split = set(np.flatnonzero(L > h * (1 + 1e-9)).tolist())
        for k, lst in enumerate(hits):
            if len(lst) > 2 or any(v != S[k, 0] and v != S[k, 1] for v in lst):
                split.add(k)
        if split:
            _split_subsegments(sorted(split), subsegs, pts, kind, on_bnd, on_glue, point_seg, seg_boundary, seg_glue, h, P, L, mid)
            continue
        tri = Delaunay(P)
        T = tri.simplices
        inside = domain.contains(P[T].mean(axis=1), closed=False)
        T = T[inside]
        ang = _triangle_angles(P, T)
        pt = P[T]
        el = np.column_stack(
            [np.hypot(*(pt[:, 1] - pt[:, 2]).T), np.hypot(*(pt[:, 2] - pt[:, 0]).T), np.hypot(*(pt[:, 0] - pt[:, 1]).T)]
        )
        area = 0.5 * np.abs(
            (pt[:, 1, 0] - pt[:, 0, 0]) * (pt[:, 2, 1] - pt[:, 0, 1]) - (pt[:, 1, 1] - pt[:, 0, 1]) * (pt[:, 2, 0] - pt[:, 0, 0])
        )
        R = el.prod(axis=1) / (4 * np.maximum(area, 1e-300))
        skinny = (ang.min(axis=1) < min_ang) & (el.min(axis=1) > h_floor)
        big = R > h
        bad = np.flatnonzero(skinny | big).tolist()
        if bad:
            bad = [t for t in bad if not _is_apex_edge_triangle(T[t], el[t], K, point_seg, incident, segs0, skinny[t] and not big[t])]
        if not bad:
            final_ok = True
            break
        order = np.array(sorted(bad, key=lambda t: ang[t].min()), dtype=np.int64)
        cs = _circumcenters(pt[order])
        seg_tree = cKDTree(mid)
        cand = seg_tree.query_ball_point(np.nan_to_num(cs, posinf=1e300, neginf=-1e300), 0.5 * L.max() * (1 + 1e-9))
        to_split = set()
        ok = np.ones(len(order), dtype=bool)
        for n, lst in enumerate(cand):
            enc = [k for k in lst if np.hypot(*(cs[n] - mid[k])) < 0.5 * L[k] * (1 + 1e-9)]
            if enc:
                to_split.update(enc)
                ok[n] = False
        # flat slivers have no finite circumcentre
        ok &= np.isfinite(cs).all(axis=1)
        ok[ok] &= domain.contains(cs[ok], closed=False)
        spacing = 0.5 * el[order].min(axis=1)
        idx = np.flatnonzero(ok)
        if len(idx) > 1:
            pairs = cKDTree(cs[idx]).query_pairs(spacing[idx].max(), output_type="ndarray")
            drop = np.zeros(len(order), dtype=bool)
            for a_, b_ in sorted(map(tuple, pairs.tolist())):
                i1, i2 = idx[a_], idx[b_]
                if drop[i1] or drop[i2]:
                    continue
                if np.hypot(*(cs[i1] - cs[i2])) < spacing[i2]:
                    drop[i2] = True
            ok &= ~drop
        new_points = list(cs[ok])
        if to_split:
            _split_subsegments(sorted(to_split), subsegs, pts, kind, on_bnd, on_glue, point_seg, seg_boundary, seg_glue, h, P, L, mid)
        for c in new_points:
            pts.append(c)
            kind.append(_FREE)
            on_bnd.append(False)
            on_glue.append(False)
            point_seg.append(-1)
        if not to_split and not new_points:
            break
    if tri is None:
        raise MeshFailure("segment recovery did not converge")
    log.debug("mesh refinement finished after %d rounds", rnd + 1)
    if not final_ok:
        log.warning("mesh quality refinement stopped after %d rounds", max_rounds)

    P = np.asarray(pts)
    S = np.array([(i, j) for i, j, _ in subsegs], dtype=np.int64)
    if tri.points.shape[0] != len(P):
        tri = Delaunay(P)
    T = tri.simplices
    T = T[domain.contains(P[T].mean(axis=1), closed=False)]
    pt = P[T]
    sarea = (pt[:, 1, 0] - pt[:, 0, 0]) * (pt[:, 2, 1] - pt[:, 0, 1]) - (pt[:, 1, 1] - pt[:, 0, 1]) * (pt[:, 2, 0] - pt[:, 0, 0])
    T = np.where((sarea < 0)[:, None], T[:, [0, 2, 1]], T)
    T = T[np.abs(sarea) > 1e-14 * h * h]
    # drop points not used by any triangle (cannot normally happen)
    used = np.zeros(len(P), dtype=bool)
    used[T.ravel()] = True
    if not np.all(used):
        remap = -np.ones(len(P), dtype=np.int64)
        remap[used] = np.arange(used.sum())
        T = remap[T]
        S = remap[S]
        keep = used
    else:
        keep = np.ones(len(P), dtype=bool)
    nodes = P[keep]
    bmask = np.asarray(on_bnd)[keep]
    gmask = np.asarray(on_glue)[keep]

    mesh_edges = {tuple(e) for e in np.sort(np.vstack([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1).tolist()}
    source_edge = {}
    for (i, j), (_, _, s) in zip(S, subsegs):
        key = (int(min(i, j)), int(max(i, j)))
        if key not in mesh_edges:
            raise MeshFailure("a constrained segment is missing from the triangulation")
        if seg_glue[s] >= 0:
            source_edge[key] = int(seg_glue[s])
    covered = 0.5 * np.abs(sarea).sum()
    if abs(covered - domain.area()) > 1e-8 * domain.area():
        raise MeshFailure(f"triangulation covers area {covered:.12g}, domain has {domain.area():.12g}")
    m = ConstrainedMesh(
        nodes=nodes,
        triangles=T.astype(np.int64),
        dirichlet_mask=bmask | gmask,
        source_edge=source_edge,
        h=float(h),
        boundary_mask=bmask,
        glue_mask=gmask,
    )
    for arr in (m.nodes, m.triangles, m.dirichlet_mask, m.boundary_mask, m.glue_mask):
        arr.setflags(write=False)
    return m


def _circumcenters(p):
    ax, ay = p[:, 0, 0], p[:, 0, 1]
    bx, by = p[:, 1, 0], p[:, 1, 1]
    cx, cy = p[:, 2, 0], p[:, 2, 1]
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    d = np.where(d == 0, np.nan, d)
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    return np.column_stack([ux, uy])


def _segs_of(v, K, point_seg, incident):
    return incident[v] if K[v] == _INPUT else {point_seg[v]}


def _is_apex_edge_triangle(tri, el, K, point_seg, incident, segs0, quality_only):
    """Skinny triangles whose shortest edge joins two different segments meeting at an input vertex.

    Splitting those only moves the small angle closer to the apex.
    """
    if not quality_only:
        return False
    k = int(np.argmin(el))
    u, v = tri[(k + 1) % 3], tri[(k + 2) % 3]
    if K[u] == _FREE or K[v] == _FREE:
        return False
    su = _segs_of(u, K, point_seg, incident)
    sv = _segs_of(v, K, point_seg, incident)
    if su & sv:
        return False
    for a in su:
        for b in sv:
            if set(segs0[a].tolist()) & set(segs0[b].tolist()):
                return True
    return False


def _split_subsegments(indices, subsegs, pts, kind, on_bnd, on_glue, point_seg, seg_boundary, seg_glue, h, P, L, mid):
    removed = set()
    new_subsegs = []
    index_set = set(indices)
    for k, (i, j, s) in enumerate(subsegs):
        if k not in index_set:
            new_subsegs.append((i, j, s))
            continue
        a, b = np.asarray(pts[i]), np.asarray(pts[j])
        ia, ja = kind[i] == _INPUT, kind[j] == _INPUT
        if ia != ja:
            apex, other = (a, b) if ia else (b, a)
            length = L[k]
            d = h * 2.0 ** math.floor(math.log2((2 * length / 3) / h))
            c = apex + d * (other - apex) / length
        else:
            c = 0.5 * (a + b)
        v = len(pts)
        pts.append(c)
        kind.append(_SEGMENT)
        on_bnd.append(bool(seg_boundary[s]))
        on_glue.append(bool(seg_glue[s] >= 0))
        point_seg.append(s)
        new_subsegs.append((i, v, s))
        new_subsegs.append((v, j, s))
        # free points inside the diametral circle go away
        rad = 0.5 * L[k]
        d2 = np.hypot(*(P - mid[k]).T)
        for q in np.flatnonzero(d2 < rad * (1 + 1e-9)):
            if kind[q] == _FREE:
                removed.add(int(q))
    subsegs[:] = new_subsegs
    if removed:
        keep = [q for q in range(len(pts)) if q not in removed]
        remap = {q: n for n, q in enumerate(keep)}
        for lst in (pts, kind, on_bnd, on_glue, point_seg):
            lst[:] = [lst[q] for q in keep]
        subsegs[:] = [(remap[i], remap[j], s) for i, j, s in subsegs]
