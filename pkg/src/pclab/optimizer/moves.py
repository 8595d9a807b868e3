"""Connectivity-preserving local moves on glue graphs.

Every move returns a new graph or ``None`` when it does not apply to the
current graph. :func:`propose` normalizes the result, enforces the edge
length cap and the admissibility checks, and retries on failure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import NoFeasibleMove, PclabError
from ..geometry.competitors import competitor_cut_chord, competitor_cut_circle, competitor_steiner
from ..geometry.domain import PolygonalDomain
from ..geometry.graph import GlueGraph, find_loops, normalize, subdivide
from ..geometry.measures import flatness

MOVES = (
    "perturb_vertex",
    "split_edge",
    "collapse_edge",
    "grow_leaf",
    "prune_leaf",
    "remove_loop_arc",
    "steiner_merge",
    "cut_circle",
    "cut_chord",
)
MAX_RETRIES = 32


@dataclass(frozen=True)
class MovePool:
    """Enabled moves with their proposal weights and the step scale ``s_move``."""

    weights: dict = field(default_factory=lambda: {m: 1.0 for m in MOVES})
    s_move: float = 0.05

    def __post_init__(self):
        w = {str(k): float(v) for k, v in dict(self.weights).items()}
        for k, v in w.items():
            if k not in MOVES:
                raise ValueError(f"unknown move {k!r}")
            if v < 0:
                raise ValueError("move weights must be nonnegative")
        if not any(v > 0 for v in w.values()):
            raise ValueError("at least one move must have positive weight")
        if not self.s_move > 0:
            raise ValueError("s_move must be positive")
        object.__setattr__(self, "weights", w)

    @classmethod
    def only(cls, *moves, s_move: float = 0.05) -> "MovePool":
        return cls({m: 1.0 for m in moves}, s_move)

    @property
    def enabled(self) -> tuple:
        return tuple(m for m in MOVES if self.weights.get(m, 0.0) > 0)

    def with_moves(self, **weights) -> "MovePool":
        w = dict(self.weights)
        w.update(weights)
        return MovePool(w, self.s_move)

    def to_dict(self) -> dict:
        return {"weights": dict(self.weights), "s_move": self.s_move}

    @classmethod
    def from_dict(cls, d: dict) -> "MovePool":
        return cls(d.get("weights", {m: 1.0 for m in MOVES}), d.get("s_move", 0.05))


@dataclass(frozen=True)
class MoveContext:
    domain: PolygonalDomain
    sigma_h: float
    s_move: float
    max_length: float = math.inf

    @property
    def min_feature(self) -> float:
        # vertices closer than this are snapped together
        return self.sigma_h / 64.0


# ---------------------------------------------------------------------------
# elementary moves
# ---------------------------------------------------------------------------

def _rebuild(vertices, edges):
    return GlueGraph(np.asarray(vertices, dtype=float).reshape(-1, 2), np.asarray(edges, dtype=np.int64).reshape(-1, 2))


def perturb_vertex(g: GlueGraph, rng, ctx: MoveContext):
    if g.n_vertices == 0:
        return None
    v = int(rng.integers(g.n_vertices))
    verts = g.vertices.copy()
    verts[v] += rng.normal(0.0, ctx.s_move, 2)
    return GlueGraph(verts, g.edges, g.vertex_ids, g.edge_ids)


def split_edge(g: GlueGraph, rng, ctx: MoveContext):
    if g.n_edges == 0:
        return None
    k = int(rng.integers(g.n_edges))
    i, j = (int(t) for t in g.edges[k])
    a, b = g.vertices[i], g.vertices[j]
    d = b - a
    n = np.array([-d[1], d[0]]) / max(math.hypot(*d), 1e-300)
    mid = 0.5 * (a + b) + rng.normal(0.0, ctx.s_move) * n
    verts = np.vstack([g.vertices, mid])
    m = g.n_vertices
    edges = [tuple(e) for e in g.edges.tolist()]
    edges[k] = (i, m)
    edges.append((m, j))
    return _rebuild(verts, edges)


def collapse_edge(g: GlueGraph, rng, ctx: MoveContext):
    if g.n_edges == 0:
        return None
    k = int(rng.integers(g.n_edges))
    i, j = (int(t) for t in g.edges[k])
    verts = g.vertices.copy()
    verts[i] = 0.5 * (verts[i] + verts[j])
    edges = []
    for n, (a, b) in enumerate(g.edges.tolist()):
        if n == k:
            continue
        a = i if a == j else a
        b = i if b == j else b
        if a != b:
            edges.append((a, b))
    keep = [t for t in range(g.n_vertices) if t != j]
    return _rebuild(verts, edges).subgraph_vertices(keep)


def grow_leaf(g: GlueGraph, rng, ctx: MoveContext):
    if g.n_vertices == 0:
        return None
    v = int(rng.integers(g.n_vertices))
    th = rng.uniform(0.0, 2 * math.pi)
    ell = ctx.sigma_h * rng.uniform(0.5, 1.0)
    tip = g.vertices[v] + ell * np.array([math.cos(th), math.sin(th)])
    verts = np.vstack([g.vertices, tip])
    edges = np.vstack([g.edges, [[v, g.n_vertices]]])
    return _rebuild(verts, edges)


def prune_leaf(g: GlueGraph, rng, ctx: MoveContext):
    """Remove a degree-1 vertex and its edge; a lone point is never removed."""
    if g.n_edges == 0:
        return None
    leaves = np.flatnonzero(g.degrees() == 1)
    if len(leaves) == 0:
        return None
    v = int(leaves[rng.integers(len(leaves))])
    (k,) = np.flatnonzero((g.edges == v).any(axis=1))
    out = g.without_edges([int(k)], drop_isolated=False)
    keep = [t for t in range(g.n_vertices) if t != v]
    out = out.subgraph_vertices(keep)
    return out.drop_isolated() if out.n_edges else out


def _loop_arcs(g: GlueGraph, loop):
    """Split a loop (edge indices) into maximal chains between branch vertices."""
    deg = g.degrees()
    edges = [tuple(int(t) for t in g.edges[k]) for k in loop]
    # orient the loop as a vertex ring
    n = len(loop)
    if n < 2:
        return None
    a, b = edges[0]
    start = a if a not in edges[1] else b
    # ring[t] is the vertex where edge t begins
    ring = [start]
    for a, b in edges[:-1]:
        ring.append(b if a == ring[-1] else a)
    branch = [t for t in range(n) if deg[ring[t]] > 2]
    if len(branch) < 2:
        return None
    arcs = []
    for s, t in zip(branch, branch[1:] + [branch[0] + n]):
        arcs.append([loop[q % n] for q in range(s, t)])
    return arcs


def remove_loop_arc(g: GlueGraph, rng, ctx: MoveContext):
    """Cut a loop open by deleting one arc between branch points (one edge if it has fewer than two)."""
    loops = find_loops(g)
    if not loops:
        return None
    loop = loops[int(rng.integers(len(loops)))]
    arcs = _loop_arcs(g, loop)
    if arcs is None:
        drop = [loop[int(rng.integers(len(loop)))]]
    else:
        drop = arcs[int(rng.integers(len(arcs)))]
    return g.without_edges(drop, drop_isolated=True)


def steiner_merge(g: GlueGraph, rng, ctx: MoveContext):
    hubs = np.flatnonzero(g.degrees() == 4)
    if len(hubs) == 0:
        return None
    v = int(hubs[rng.integers(len(hubs))])
    inc = np.flatnonzero((g.edges == v).any(axis=1))
    r_s = 0.5 * float(g.edge_lengths()[inc].min())
    try:
        return competitor_steiner(g, v, r_s)
    except PclabError:
        return None


def _ball_center(g, rng, ctx):
    if g.n_vertices == 0:
        return None, None
    v = int(rng.integers(g.n_vertices))
    x = g.vertices[v]
    r = ctx.sigma_h * rng.uniform(0.5, 1.5)
    if ctx.domain.boundary_distance(x)[0] <= r:
        return None, None
    return x, r


def cut_circle(g: GlueGraph, rng, ctx: MoveContext):
    x, r = _ball_center(g, rng, ctx)
    if x is None:
        return None
    try:
        return competitor_cut_circle(g, x, r, h_sigma=ctx.sigma_h)
    except PclabError:
        return None


def cut_chord(g: GlueGraph, rng, ctx: MoveContext):
    x, r = _ball_center(g, rng, ctx)
    if x is None:
        return None
    try:
        beta = flatness(g, x, r).beta
        return competitor_cut_chord(g, x, r, beta_wall=min(1.0, beta + 0.01))
    except PclabError:
        return None


_MOVE_FUNCS = {
    "perturb_vertex": perturb_vertex,
    "split_edge": split_edge,
    "collapse_edge": collapse_edge,
    "grow_leaf": grow_leaf,
    "prune_leaf": prune_leaf,
    "remove_loop_arc": remove_loop_arc,
    "steiner_merge": steiner_merge,
    "cut_circle": cut_circle,
    "cut_chord": cut_chord,
}


def apply_move(name: str, g: GlueGraph, rng, ctx: MoveContext):
    return _MOVE_FUNCS[name](g, rng, ctx)


def admissible(g: GlueGraph, ctx: MoveContext) -> bool:
    """Connected, inside the closed domain, within the length budget."""
    if g.is_empty():
        return True
    if not g.is_connected():
        return False
    if g.total_length() > ctx.max_length:
        return False
    tol = 10 * ctx.domain.tol()
    if not np.all(ctx.domain.contains(g.vertices, tol=tol)):
        return False
    if g.n_edges:
        s = g.segments()
        if not np.all(ctx.domain.segment_inside(s[:, 0], s[:, 1], tol=tol)):
            return False
    return True


def propose(g: GlueGraph, pool: MovePool, rng, ctx: MoveContext):
    """Draw moves until one yields an admissible graph different from ``g``.

    Returns ``(candidate, move name)``.

    Raises
    ------
    NoFeasibleMove
        After ``MAX_RETRIES`` failed draws.
    """
    names = pool.enabled
    w = np.array([pool.weights[m] for m in names])
    w = w / w.sum()
    key = g.canonical_key()
    for _ in range(MAX_RETRIES):
        name = names[int(rng.choice(len(names), p=w))]
        cand = apply_move(name, g, rng, ctx)
        if cand is None:
            continue
        cand = subdivide(normalize(cand, tol=ctx.min_feature), ctx.sigma_h)
        if cand.canonical_key() == key or not admissible(cand, ctx):
            continue
        return cand, name
    raise NoFeasibleMove(f"no admissible move found in {MAX_RETRIES} draws from {names}")
