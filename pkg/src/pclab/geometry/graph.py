"""Embedded planar glue graphs: storage, planarization, topology and JSON I/O."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

GEO_TOL_REL = 1e-9


def geo_tol(points: np.ndarray) -> float:
    """Snap tolerance: 1e-9 of the bounding-box diagonal (absolute 1e-9 for degenerate boxes)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return GEO_TOL_REL
    diag = float(np.hypot(*(pts.max(axis=0) - pts.min(axis=0))))
    return GEO_TOL_REL * diag if diag > 0 else GEO_TOL_REL


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GlueGraph:
    """Straight-line planar graph standing in for the glue set.

    Vertices are 2-D points, edges are vertex-index pairs. ``vertex_ids`` and
    ``edge_ids`` are stable labels that survive :func:`normalize` for the
    elements it does not touch.
    """

    vertices: np.ndarray
    edges: np.ndarray
    vertex_ids: tuple = field(default=None)
    edge_ids: tuple = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e) and (e.min() < 0 or e.max() >= len(v)):
            raise ValueError("edge references a missing vertex")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertex coordinates must be finite")
        object.__setattr__(self, "vertices", _readonly(v))
        object.__setattr__(self, "edges", _readonly(e))
        vids = tuple(range(len(v))) if self.vertex_ids is None else tuple(int(i) for i in self.vertex_ids)
        eids = tuple(range(len(e))) if self.edge_ids is None else tuple(int(i) for i in self.edge_ids)
        if len(vids) != len(v) or len(eids) != len(e):
            raise ValueError("id tuples must match vertex/edge counts")
        object.__setattr__(self, "vertex_ids", vids)
        object.__setattr__(self, "edge_ids", eids)

    # -- construction -----------------------------------------------------
    @classmethod
    def empty(cls) -> "GlueGraph":
        return cls(np.zeros((0, 2)), np.zeros((0, 2), dtype=np.int64))

    @classmethod
    def point(cls, xy) -> "GlueGraph":
        return cls([xy], np.zeros((0, 2), dtype=np.int64))

    @classmethod
    def polyline(cls, points, closed: bool = False) -> "GlueGraph":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        n = len(pts)
        edges = [(i, i + 1) for i in range(n - 1)]
        if closed and n > 2:
            edges.append((n - 1, 0))
        return cls(pts, np.array(edges, dtype=np.int64).reshape(-1, 2))

    @classmethod
    def union(cls, graphs: Iterable["GlueGraph"]) -> "GlueGraph":
        verts, edges, off = [], [], 0
        for g in graphs:
            verts.append(g.vertices)
            edges.append(g.edges + off)
            off += len(g.vertices)
        if not verts:
            return cls.empty()
        return cls(np.vstack(verts), np.vstack(edges))

    # -- basic measures ---------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def is_empty(self) -> bool:
        return self.n_vertices == 0

    def segments(self) -> np.ndarray:
        """Edge endpoints as an ``(m, 2, 2)`` array."""
        return self.vertices[self.edges]

    def edge_lengths(self) -> np.ndarray:
        s = self.segments()
        return np.hypot(*(s[:, 1] - s[:, 0]).T) if len(s) else np.zeros(0)

    def total_length(self) -> float:
        return float(np.sum(self.edge_lengths()))

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices)

    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def diameter(self) -> float:
        if self.n_vertices < 2:
            return 0.0
        v = self.vertices
        if self.n_vertices > 400:
            from scipy.spatial import ConvexHull

            try:
                v = v[ConvexHull(v).vertices]
            except Exception:
                pass
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    def tol(self) -> float:
        return geo_tol(self.vertices)

    # -- topology ---------------------------------------------------------
    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_vertices))
        for k, (i, j) in enumerate(self.edges):
            g.add_edge(int(i), int(j), index=k)
        return g

    def is_connected(self) -> bool:
        if self.n_vertices <= 1:
            return True
        return nx.is_connected(self.to_networkx())

    def connected_components(self) -> list[list[int]]:
        return [sorted(c) for c in nx.connected_components(self.to_networkx())]

    def neighbors(self) -> list[list[int]]:
        nb = [[] for _ in range(self.n_vertices)]
        for i, j in self.edges:
            nb[i].append(int(j))
            nb[j].append(int(i))
        return nb

    # -- editing helpers (return new graphs) -------------------------------
    def without_edges(self, edge_indices: Iterable[int], drop_isolated: bool = True) -> "GlueGraph":
        drop = set(int(k) for k in edge_indices)
        keep = [k for k in range(self.n_edges) if k not in drop]
        g = GlueGraph(self.vertices, self.edges[keep], self.vertex_ids, [self.edge_ids[k] for k in keep])
        return g.drop_isolated() if drop_isolated else g

    def drop_isolated(self) -> "GlueGraph":
        """Remove degree-0 vertices, except when the graph has no edges at all."""
        if self.n_edges == 0:
            return self
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.edges.ravel()] = True
        return self.subgraph_vertices(np.flatnonzero(used))

    def subgraph_vertices(self, keep: Sequence[int]) -> "GlueGraph":
        keep = np.asarray(keep, dtype=np.int64)
        remap = -np.ones(self.n_vertices, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        e = remap[self.edges] if self.n_edges else self.edges
        ok = np.all(e >= 0, axis=1) if len(e) else np.zeros(0, dtype=bool)
        return GlueGraph(
            self.vertices[keep],
            e[ok],
            [self.vertex_ids[i] for i in keep],
            [self.edge_ids[k] for k in np.flatnonzero(ok)],
        )

    def canonical_key(self, decimals: int = 10) -> str:
        """Hash of the rounded, order-independent edge set (plus isolated vertices)."""
        v = np.round(self.vertices, decimals) + 0.0
        segs = []
        for i, j in self.edges:
            a, b = tuple(v[i]), tuple(v[j])
            segs.append((a, b) if a <= b else (b, a))
        segs.sort()
        iso = sorted(tuple(v[i]) for i in np.flatnonzero(self.degrees() == 0))
        return hashlib.sha1(repr((segs, iso)).encode()).hexdigest()

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "edges": self.edges.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GlueGraph":
        verts = d.get("vertices", [])
        edges = d.get("edges", [])
        return cls(np.asarray(verts, dtype=float).reshape(-1, 2), np.asarray(edges, dtype=np.int64).reshape(-1, 2))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GlueGraph":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"GlueGraph(n_vertices={self.n_vertices}, n_edges={self.n_edges}, length={self.total_length():.6g})"


# ---------------------------------------------------------------------------
# planarization
# ---------------------------------------------------------------------------

def _merge_close(points, edges, parents, tol):
    n = len(points)
    if n == 0:
        return points, edges, parents, np.zeros(0, dtype=np.int64), False
    pairs = cKDTree(points).query_pairs(tol, output_type="ndarray")
    rep = np.arange(n)
    changed = len(pairs) > 0
    if changed:
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for a, b in pairs:
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        rep = np.array([find(i) for i in range(n)])
    keep = np.flatnonzero(rep == np.arange(n))
    new_index = -np.ones(n, dtype=np.int64)
    new_index[keep] = np.arange(len(keep))
    vmap = new_index[rep]
    points = points[keep]
    if len(edges):
        edges = vmap[edges]
    edges, parents, ch2 = _dedupe(edges, parents)
    return points, edges, parents, vmap, changed or ch2


def _dedupe(edges, parents):
    out_e, out_p, index = [], [], {}
    changed = False
    for (i, j), par in zip(edges, parents):
        i, j = int(i), int(j)
        if i == j:
            changed = True
            continue
        key = (min(i, j), max(i, j))
        if key in index:
            out_p[index[key]] = out_p[index[key]] | par
            changed = True
            continue
        index[key] = len(out_e)
        out_e.append([i, j])
        out_p.append(set(par))
    return np.array(out_e, dtype=np.int64).reshape(-1, 2), out_p, changed


def _t_junctions(points, edges, tol):
    """Vertices lying in the interior of a non-incident edge: {edge: [(t, vertex)]}."""
    splits = {}
    if len(edges) == 0 or len(points) == 0:
        return splits
    a = points[edges[:, 0]]
    b = points[edges[:, 1]]
    d = b - a
    L2 = (d**2).sum(1)
    for k in range(len(edges)):
        lo = np.minimum(a[k], b[k]) - tol
        hi = np.maximum(a[k], b[k]) + tol
        cand = np.flatnonzero(np.all((points >= lo) & (points <= hi), axis=1))
        if len(cand) == 0:
            continue
        cand = cand[(cand != edges[k, 0]) & (cand != edges[k, 1])]
        if len(cand) == 0:
            continue
        rel = points[cand] - a[k]
        t = rel @ d[k] / L2[k]
        perp = np.abs(rel[:, 0] * d[k, 1] - rel[:, 1] * d[k, 0]) / np.sqrt(L2[k])
        L = np.sqrt(L2[k])
        ok = (perp <= tol) & (t * L > tol) & ((1 - t) * L > tol)
        for tt, v in zip(t[ok], cand[ok]):
            splits.setdefault(k, []).append((float(tt), int(v)))
    return splits


def _crossings(points, edges, tol):
    """Proper interior crossings between edge pairs that share no endpoint."""
    m = len(edges)
    out = []
    if m < 2:
        return out
    a = points[edges[:, 0]]
    b = points[edges[:, 1]]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    d = b - a
    L = np.hypot(d[:, 0], d[:, 1])
    for k in range(m - 1):
        idx = np.arange(k + 1, m)
        box = np.all(lo[idx] <= hi[k] + tol, axis=1) & np.all(hi[idx] >= lo[k] - tol, axis=1)
        idx = idx[box]
        if len(idx) == 0:
            continue
        share = (
            (edges[idx, 0] == edges[k, 0])
            | (edges[idx, 0] == edges[k, 1])
            | (edges[idx, 1] == edges[k, 0])
            | (edges[idx, 1] == edges[k, 1])
        )
        idx = idx[~share]
        if len(idx) == 0:
            continue
        r = d[k]
        s = d[idx]
        denom = r[0] * s[:, 1] - r[1] * s[:, 0]
        qp = a[idx] - a[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / denom
            u = (qp[:, 0] * r[1] - qp[:, 1] * r[0]) / denom
        good = np.abs(denom) > 1e-14 * L[k] * L[idx]
        good &= (t * L[k] > tol) & ((1 - t) * L[k] > tol) & (u * L[idx] > tol) & ((1 - u) * L[idx] > tol)
        for j, tt, uu in zip(idx[good], t[good], u[good]):
            out.append((k, int(j), float(tt), float(uu)))
    return out


def planarize(points, edges, tol=None, parents=None):
    """Merge near-coincident vertices and split edges at crossings and T-junctions.

    Returns ``(points, edges, parents, vmap)``; ``parents[k]`` is the set of
    input edge indices that output edge ``k`` lies on and ``vmap`` maps input
    vertices to output vertices.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2).copy()
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2).copy()
    if tol is None:
        tol = geo_tol(points)
    if parents is None:
        parents = [{k} for k in range(len(edges))]
    vmap_total = np.arange(len(points))
    for _ in range(64):
        points, edges, parents, vmap, _ = _merge_close(points, edges, parents, tol)
        vmap_total = vmap[vmap_total]
        splits = _t_junctions(points, edges, tol)
        new_pts = []
        for k, j, t, u in _crossings(points, edges, tol):
            pa = points[edges[k, 0]] + t * (points[edges[k, 1]] - points[edges[k, 0]])
            vid = len(points) + len(new_pts)
            new_pts.append(pa)
            splits.setdefault(k, []).append((t, vid))
            splits.setdefault(j, []).append((u, vid))
        if not splits:
            break
        if new_pts:
            points = np.vstack([points, np.array(new_pts)])
        out_e, out_p = [], []
        for k, (i, j) in enumerate(edges):
            if k not in splits:
                out_e.append([i, j])
                out_p.append(parents[k])
                continue
            chain = [int(i)] + [v for _, v in sorted(splits[k])] + [int(j)]
            for s0, s1 in zip(chain[:-1], chain[1:]):
                out_e.append([s0, s1])
                out_p.append(set(parents[k]))
        edges = np.array(out_e, dtype=np.int64).reshape(-1, 2)
        parents = out_p
    return points, edges, parents, vmap_total


def normalize(graph: GlueGraph, tol: float | None = None) -> GlueGraph:
    """Merge vertices within the snap tolerance, split crossings, drop degenerate edges.

    Idempotent. Untouched vertices and edges keep their ids; new ones get
    fresh ids above the current maximum.
    """
    if graph.is_empty():
        return graph
    tol = graph.tol() if tol is None else tol
    n0 = graph.n_vertices
    pts, edges, parents, vmap = planarize(graph.vertices, graph.edges, tol)
    # vertex ids: first input vertex mapped to an output vertex donates its id
    vids = [None] * len(pts)
    for i_in in range(n0):
        o = vmap[i_in]
        if vids[o] is None:
            vids[o] = graph.vertex_ids[i_in]
    next_v = max(graph.vertex_ids, default=-1) + 1
    for o in range(len(pts)):
        if vids[o] is None:
            vids[o] = next_v
            next_v += 1
    # edges that are exactly an input edge keep its id
    orig = {}
    for k, (i, j) in enumerate(graph.edges):
        a, b = int(vmap[i]), int(vmap[j])
        orig.setdefault((min(a, b), max(a, b)), k)
    eids = []
    next_e = max(graph.edge_ids, default=-1) + 1
    for (i, j) in edges:
        key = (min(i, j), max(i, j))
        if key in orig:
            eids.append(graph.edge_ids[orig[key]])
        else:
            eids.append(next_e)
            next_e += 1
    if len(set(eids)) != len(eids):  # duplicates merged from several inputs
        seen, fixed = set(), []
        for e in eids:
            if e in seen:
                fixed.append(next_e)
                next_e += 1
            else:
                fixed.append(e)
                seen.add(e)
        eids = fixed
    return GlueGraph(pts, edges, vids, eids)


def find_loops(graph: GlueGraph) -> list[list[int]]:
    """Cycle basis as lists of edge indices; empty iff the graph is a forest."""
    if graph.n_edges == 0:
        return []
    g = graph.to_networkx()
    loops = []
    for comp in sorted(nx.connected_components(g), key=min):
        for cyc in nx.cycle_basis(g.subgraph(comp), root=min(comp)):
            ring = cyc + [cyc[0]]
            loops.append([g.edges[u, v]["index"] for u, v in zip(ring[:-1], ring[1:])])
    return loops


def cycle_rank(graph: GlueGraph) -> int:
    """E - V + (number of components)."""
    if graph.n_vertices == 0:
        return 0
    return graph.n_edges - graph.n_vertices + nx.number_connected_components(graph.to_networkx())


def subdivide(graph: GlueGraph, max_length: float) -> GlueGraph:
    """Split every edge longer than ``max_length`` into equal pieces."""
    if graph.n_edges == 0 or max_length <= 0:
        return graph
    L = graph.edge_lengths()
    if np.all(L <= max_length * (1 + 1e-12)):
        return graph
    verts = [graph.vertices]
    vids = list(graph.vertex_ids)
    edges, eids = [], []
    n = graph.n_vertices
    next_v = max(vids, default=-1) + 1
    next_e = max(graph.edge_ids, default=-1) + 1
    for k, (i, j) in enumerate(graph.edges):
        m = int(math.ceil(L[k] / max_length - 1e-12))
        if m <= 1:
            edges.append((int(i), int(j)))
            eids.append(graph.edge_ids[k])
            continue
        a, b = graph.vertices[i], graph.vertices[j]
        t = np.arange(1, m)[:, None] / m
        verts.append(a + t * (b - a))
        chain = [int(i)] + list(range(n, n + m - 1)) + [int(j)]
        vids.extend(range(next_v, next_v + m - 1))
        next_v += m - 1
        n += m - 1
        for u, v in zip(chain[:-1], chain[1:]):
            edges.append((u, v))
            eids.append(next_e)
            next_e += 1
    return GlueGraph(np.vstack(verts), np.array(edges, dtype=np.int64), vids, eids)
