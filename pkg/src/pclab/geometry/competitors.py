"""Local modifications of a glue set inside a ball (circle, chord + walls, Steiner)."""
from __future__ import annotations

import math

import numpy as np

from ..errors import Disconnected, NotAdmissible, WouldDisconnectAll
from .graph import GlueGraph, normalize
from .measures import TOL_BETA, flatness, segment_disk_params
from .steiner import steiner_connection_4


def outside_part(graph: GlueGraph, x, r, tol=None):
    """Part of the graph outside the open ball plus the points where it meets the circle.

    Vertices of the input that survive keep their exact coordinates.
    """
    x = np.asarray(x, dtype=float)
    tol = graph.tol() if tol is None else tol
    verts = [tuple(v) for v in graph.vertices]
    vid = {v: i for i, v in enumerate(verts)}
    new_pts, edges, exits = [], [], []

    def index_of(p):
        p = tuple(float(c) for c in p)
        if p in vid:
            return vid[p]
        vid[p] = len(verts) + len(new_pts)
        new_pts.append(p)
        return vid[p]

    dist = np.hypot(*(graph.vertices - x).T) if graph.n_vertices else np.zeros(0)
    keep_vertex = dist >= r - tol
    if graph.n_edges:
        s = graph.segments()
        t0, t1 = segment_disk_params(s[:, 0], s[:, 1], x, r)
        L = graph.edge_lengths()
        for k, (i, j) in enumerate(graph.edges):
            a, b = s[k]
            if t1[k] - t0[k] <= tol / max(L[k], 1e-300):
                edges.append((int(i), int(j)))
                for v in (i, j):
                    if abs(dist[v] - r) <= tol:
                        exits.append(int(v))
                continue
            if t0[k] * L[k] > tol:
                pa = a + t0[k] * (b - a)
                q = index_of(pa)
                edges.append((int(i), q))
                exits.append(q)
            elif abs(dist[i] - r) <= tol:
                exits.append(int(i))
            if (1 - t1[k]) * L[k] > tol:
                pb = a + t1[k] * (b - a)
                q = index_of(pb)
                edges.append((q, int(j)))
                exits.append(q)
            elif abs(dist[j] - r) <= tol:
                exits.append(int(j))
    pts = np.vstack([graph.vertices, np.array(new_pts).reshape(-1, 2)])
    used = np.zeros(len(pts), dtype=bool)
    if edges:
        used[np.array(edges).ravel()] = True
    used[: graph.n_vertices] |= keep_vertex & (graph.degrees() == 0)
    used[np.array(exits, dtype=np.int64)] = True
    g = GlueGraph(pts, np.array(edges, dtype=np.int64).reshape(-1, 2))
    keep = np.flatnonzero(used)
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    exits = sorted(set(int(remap[e]) for e in exits))
    return g.subgraph_vertices(keep), exits


def _require_outside(graph, x, r, tol):
    if graph.is_empty():
        raise WouldDisconnectAll("empty glue set")
    d = np.hypot(*(graph.vertices - np.asarray(x, dtype=float)).T)
    if np.all(d <= r + tol):
        raise WouldDisconnectAll("glue set lies entirely inside the closed ball")


def default_n_arc(r: float, h_sigma: float) -> int:
    return max(16, math.ceil(2 * math.pi * r / h_sigma))


def competitor_cut_circle(graph: GlueGraph, x, r: float, n_arc: int | None = None, h_sigma: float | None = None) -> GlueGraph:
    """Replace the glue set inside B_r(x) by an inscribed n_arc-gon of the circle.

    Stubs where the glue set leaves the ball are joined to their nearest
    polygon vertex.
    """
    tol = graph.tol()
    _require_outside(graph, x, r, tol)
    x = np.asarray(x, dtype=float)
    if n_arc is None:
        h = h_sigma if h_sigma is not None else (graph.edge_lengths().max() if graph.n_edges else r)
        n_arc = default_n_arc(r, h)
    out, exits = outside_part(graph, x, r, tol)
    if not exits:
        raise Disconnected("glue set does not reach the circle; the result would be disconnected")
    th = 2 * math.pi * np.arange(n_arc) / n_arc
    poly = x + r * np.column_stack([np.cos(th), np.sin(th)])
    base = out.n_vertices
    pts = np.vstack([out.vertices, poly])
    edges = [tuple(e) for e in out.edges.tolist()]
    edges += [(base + k, base + (k + 1) % n_arc) for k in range(n_arc)]
    for e in exits:
        d = np.hypot(*(poly - out.vertices[e]).T)
        k = int(np.argmin(d))
        if d[k] > tol:
            edges.append((e, base + k))
        else:
            pts[base + k] = out.vertices[e]
    return normalize(GlueGraph(pts, np.array(edges, dtype=np.int64)))


def competitor_cut_chord(
    graph: GlueGraph,
    x,
    r: float,
    beta_wall: float,
    angle: float | None = None,
    n_wall: int = 4,
) -> GlueGraph:
    """Replace the glue set inside B_r(x) by a diameter plus two short wall arcs.

    The diameter follows ``angle`` (default: the best flatness line). Each wall
    is an arc of the circle of angular half-width ``arcsin(beta_wall)`` centred
    at a chord end; walls are widened when needed to reach an exit point.
    """
    tol = graph.tol()
    x = np.asarray(x, dtype=float)
    rep = flatness(graph, x, r)
    _require_outside(graph, x, r, tol)
    if angle is None:
        if rep.beta > beta_wall + TOL_BETA:
            raise NotAdmissible(f"flatness {rep.beta:.4g} exceeds wall parameter {beta_wall:.4g}")
        angle = rep.best_line_angle
    w = math.asin(min(1.0, beta_wall))
    out, exits = outside_part(graph, x, r, tol)
    ends = [angle, angle + math.pi]
    arcs = {0: [ends[0] - w, ends[0] + w], 1: [ends[1] - w, ends[1] + w]}
    extra = {0: [], 1: []}
    for e in exits:
        v = out.vertices[e] - x
        phi = math.atan2(v[1], v[0])
        offs = [(phi - c + math.pi) % (2 * math.pi) - math.pi for c in ends]
        side = int(abs(offs[1]) < abs(offs[0]))
        off = offs[side]
        extra[side].append((ends[side] + off, e))
        arcs[side][0] = min(arcs[side][0], ends[side] + off)
        arcs[side][1] = max(arcs[side][1], ends[side] + off)
    pts = [out.vertices]
    edges = [tuple(e) for e in out.edges.tolist()]
    n = out.n_vertices
    chord_ids = []
    for side in (0, 1):
        lo, hi = arcs[side]
        angles = list(np.linspace(lo, ends[side], n_wall + 1)) + list(np.linspace(ends[side], hi, n_wall + 1))[1:]
        nodes = []  # (angle, vertex index)
        for a in angles:
            nodes.append((a, None))
        for a, e in extra[side]:
            nodes.append((a, e))
        nodes.sort(key=lambda t: (t[0], t[1] is None))
        ids = []
        for a, e in nodes:
            if e is not None:
                ids.append(e)
                continue
            p = x + r * np.array([math.cos(a), math.sin(a)])
            pts.append(p[None, :])
            ids.append(n)
            n += 1
            if a == ends[side]:
                chord_ids.append(ids[-1])
        edges += [(i, j) for i, j in zip(ids[:-1], ids[1:]) if i != j]
    edges.append((chord_ids[0], chord_ids[1]))
    return normalize(GlueGraph(np.vstack(pts), np.array(edges, dtype=np.int64)))


def competitor_steiner(graph: GlueGraph, v: int, r_s: float) -> GlueGraph:
    """Replace a degree-4 neighbourhood of vertex ``v`` by the Steiner tree of its four exits."""
    x = graph.vertices[v]
    tol = graph.tol()
    out, exits = outside_part(graph, x, r_s, tol)
    if len(exits) != 4:
        raise NotAdmissible(f"expected four exit points at hop radius {r_s}, found {len(exits)}")
    tree = steiner_connection_4(out.vertices[exits])
    return normalize(GlueGraph.union([out, tree]))


def wall_length(graph_before: GlueGraph, graph_after: GlueGraph, x, r) -> float:
    """Length of the wall arcs added by :func:`competitor_cut_chord` (diameter excluded)."""
    from .measures import length_in_ball

    kept = graph_before.total_length() - length_in_ball(graph_before, x, r)
    return graph_after.total_length() - kept - 2 * r
