"""Penalised compliance C_p + lambda H^1 and its stochastic minimisation.

The chain is Metropolis simulated annealing over the move pool, followed by
a greedy tail at zero temperature and a systematic loop-opening pass.
Evaluations are cached by the canonical hash of the normalised graph.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import Disconnected, NoFeasibleMove
from ..geometry.graph import GlueGraph, find_loops, normalize
from ..pde.energy import compliance
from ..pde.mesh import build_mesh
from ..pde.solver import solve_p_poisson
from .moves import MoveContext, MovePool, _loop_arcs, propose

log = logging.getLogger(__name__)

MASK_FRACTION_MAX = 0.9
LENGTH_BUDGET = 100.0


@dataclass(frozen=True)
class AnnealSchedule:
    """Temperature schedule; ``T0 = 0`` gives a purely greedy chain."""

    T0: float = 1e-3
    cooling: float = 0.8
    epochs: int = 10
    proposals_per_epoch: int = 20
    seed: int = 0
    greedy_tail: int = 0
    loop_pass: bool = True

    def __post_init__(self):
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")
        if self.T0 < 0:
            raise ValueError("T0 must be nonnegative")
        if self.epochs < 0 or self.proposals_per_epoch < 0 or self.greedy_tail < 0:
            raise ValueError("counts must be nonnegative")

    def temperature(self, epoch: int) -> float:
        return self.T0 * self.cooling**epoch

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AnnealSchedule":
        return cls(**d)


@dataclass(frozen=True)
class Evaluation:
    F: float
    C: float
    L: float
    C_work: float
    masked_fraction: float
    n_vertices: int
    key: str

    def order_key(self, graph: GlueGraph):
        """Total order used for ties: F, then length, then vertex count, then coordinates."""
        verts = tuple(sorted(map(tuple, np.round(graph.vertices, 12).tolist())))
        return (self.F, self.L, self.n_vertices, verts)


@dataclass
class OptTrace:
    records: list = field(default_factory=list)
    best_timeline: list = field(default_factory=list)
    proposals: int = 0
    rejected: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def best_values(self) -> list:
        return [b for _, b in self.best_timeline]


def _pin_points(cfg) -> bool:
    # a single node carries capacity only when p > 2
    return cfg.p > 2


def evaluate(sigma: GlueGraph, cfg, cache: dict | None = None) -> Evaluation:
    """Objective F = C + lambda L with C the gradient form of the compliance.

    Raises
    ------
    Disconnected
        If ``sigma`` has more than one component.
    GlueOutsideDomain, SolverStalled
        Propagated from meshing and solving.
    """
    sigma = normalize(sigma)
    key = sigma.canonical_key()
    if cache is not None and key in cache:
        return cache[key]
    if not sigma.is_connected():
        raise Disconnected("glue set must be connected")
    mesh = build_mesh(cfg.domain, sigma, cfg.mesh_h, pin_isolated_points=_pin_points(cfg))
    u = solve_p_poisson(mesh, cfg.force, cfg.p, tol=cfg.solver_tol)
    c_grad, c_work = compliance(mesh, u, cfg.force)
    L = sigma.total_length()
    ev = Evaluation(
        F=c_grad + cfg.lam * L,
        C=c_grad,
        L=L,
        C_work=c_work,
        masked_fraction=float(mesh.dirichlet_mask.mean()),
        n_vertices=sigma.n_vertices,
        key=key,
    )
    if cache is not None:
        cache[key] = ev
    return ev


def _context(cfg, sigma0: GlueGraph, pool: MovePool) -> MoveContext:
    L0 = sigma0.total_length()
    budget = LENGTH_BUDGET * L0 if L0 > 0 else math.inf
    return MoveContext(cfg.domain, cfg.sigma_h, pool.s_move, budget)


def _better(a: Evaluation, ga: GlueGraph, b: Evaluation, gb: GlueGraph) -> bool:
    return a.order_key(ga) < b.order_key(gb)


def optimize(sigma0: GlueGraph, cfg, schedule: AnnealSchedule, pool: MovePool, snapshots: bool = False):
    """Anneal from ``sigma0``; returns the best graph seen and the trace.

    Solver errors abort the run; the partial trace is attached to the
    exception as ``trace``.
    """
    rng = np.random.default_rng(schedule.seed)
    cache: dict = {}
    cur = normalize(sigma0)
    if not cur.is_connected():
        raise Disconnected("initial glue set must be connected")
    ctx = _context(cfg, cur, pool)
    trace = OptTrace()
    try:
        cur_ev = evaluate(cur, cfg, cache)
        best, best_ev = cur, cur_ev
        trace.best_timeline.append((0, best_ev.F))
        trace.records.append(_record("init", -1, 0, cur_ev, cur_ev, best_ev))
        if snapshots:
            trace.snapshots["init"] = cur

        def step(epoch, T, tag_override=None):
            nonlocal cur, cur_ev, best, best_ev
            trace.proposals += 1
            try:
                cand, tag = propose(cur, pool, rng, ctx)
            except NoFeasibleMove:
                trace.rejected["no_move"] = trace.rejected.get("no_move", 0) + 1
                return False
            u = rng.random()
            ev = evaluate(cand, cfg, cache)
            if ev.masked_fraction > MASK_FRACTION_MAX:
                trace.rejected["proper"] = trace.rejected.get("proper", 0) + 1
                return True
            dF = ev.F - cur_ev.F
            if T > 0:
                accept = dF < 0 or u < math.exp(-dF / T)
            else:
                accept = _better(ev, cand, cur_ev, cur)
            if accept:
                prev = cur_ev
                cur, cur_ev = cand, ev
                if _better(ev, cand, best_ev, best):
                    best, best_ev = cand, ev
                trace.records.append(_record(tag, epoch, trace.proposals, prev, ev, best_ev))
                if snapshots:
                    trace.snapshots[ev.key] = cand
            trace.best_timeline.append((trace.proposals, best_ev.F))
            return True

        for epoch in range(schedule.epochs):
            T = schedule.temperature(epoch)
            for _ in range(schedule.proposals_per_epoch):
                if not step(epoch, T):
                    break
        # greedy tail from the best state
        cur, cur_ev = best, best_ev
        for _ in range(schedule.greedy_tail):
            if not step(schedule.epochs, 0.0):
                break
        if schedule.loop_pass:
            cur, cur_ev = _loop_pass(cur, cur_ev, cfg, cache, trace, schedule.epochs + 1, pool)
            if _better(cur_ev, cur, best_ev, best):
                best, best_ev = cur, cur_ev
            trace.best_timeline.append((trace.proposals, best_ev.F))
    except Exception as exc:
        exc.trace = trace
        raise
    return best, trace


def _loop_pass(cur, cur_ev, cfg, cache, trace, epoch, pool):
    """Try opening every loop arc in turn; keep any change that lowers F."""
    if "remove_loop_arc" not in pool.enabled:
        return cur, cur_ev
    changed = True
    while changed:
        changed = False
        for loop in find_loops(cur):
            arcs = _loop_arcs(cur, loop) or [[k] for k in loop]
            for arc in arcs:
                cand = normalize(cur.without_edges(arc, drop_isolated=True))
                if not cand.is_connected():
                    continue
                trace.proposals += 1
                ev = evaluate(cand, cfg, cache)
                if ev.masked_fraction <= MASK_FRACTION_MAX and _better(ev, cand, cur_ev, cur):
                    trace.records.append(_record("remove_loop_arc", epoch, trace.proposals, cur_ev, ev, ev))
                    cur, cur_ev = cand, ev
                    changed = True
                    break
            if changed:
                break
    return cur, cur_ev


def _record(tag, epoch, proposal, prev: Evaluation, ev: Evaluation, best: Evaluation) -> dict:
    return {
        "move": tag,
        "epoch": epoch,
        "proposal": proposal,
        "dC": ev.C - prev.C,
        "dL": ev.L - prev.L,
        "dF": ev.F - prev.F,
        "F": ev.F,
        "C": ev.C,
        "L": ev.L,
        "best_F": best.F,
        "snapshot": ev.key,
    }


def lambda_scan(cfg, lambdas, sigma0: GlueGraph | None = None, schedule=None, pool=None, threads: int = 1) -> dict:
    """One optimisation per lambda, all with the same seed.

    Returns a dict with ``rows`` (lambda, H1, F, C) and the bracket
    ``threshold`` = (largest lambda with H1 above ``cfg.sigma_h``, smallest
    lambda at or below it), either end None when not observed.
    """
    lambdas = [float(x) for x in lambdas]
    if any(x <= 0 for x in lambdas) or lambdas != sorted(lambdas):
        raise ValueError("lambda values must be positive and ascending")
    sigma0 = cfg.sigma0 if sigma0 is None else sigma0
    schedule = cfg.schedule if schedule is None else schedule
    pool = cfg.pool if pool is None else pool

    def run(lam):
        c = cfg.replace(lam=lam)
        best, _ = optimize(sigma0, c, schedule, pool)
        ev = evaluate(best, c)
        return {"lambda": lam, "H1": best.total_length(), "F": ev.F, "C": ev.C, "sigma": best.to_dict()}

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(run, lambdas))
    else:
        rows = [run(lam) for lam in lambdas]
    pos = [r["lambda"] for r in rows if r["H1"] > cfg.sigma_h]
    zero = [r["lambda"] for r in rows if r["H1"] <= cfg.sigma_h]
    lo = max(pos) if pos else None
    hi = min((z for z in zero if lo is None or z > lo), default=None)
    return {"rows": rows, "threshold": (lo, hi)}


__all__ = [
    "AnnealSchedule",
    "Evaluation",
    "OptTrace",
    "evaluate",
    "optimize",
    "lambda_scan",
]
