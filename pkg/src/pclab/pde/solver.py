"""Discrete p-Poisson solver on P1 elements.

The discrete energy is

    E(u) = (1/p) sum_T |grad u_T|^p |T| - F . u,   F_i = sum_{T ni i} f(c_T) |T| / 3,

minimised over nodal vectors that are fixed on the Dirichlet nodes. Damped
Newton runs on the regularised density (1/p) ((|g|^2 + eps^2)^(p/2) - eps^p)
for a decreasing sequence eps = 1e-2, 1e-3, ... times the gradient scale,
each stage warm-started from the previous one. The stopping test always uses
the gradient of the true energy. Within a stage the regularised energy never
increases; ``energy_history`` records ``(eps, value)`` pairs.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import SolverStalled
from .force import ForceSpec
from .mesh import ConstrainedMesh

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
EPS_START = 1e-2
EPS_LAST = 1e-14
ARMIJO_C = 1e-4
STAGE_STEPS = 30


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values of the displacement with per-triangle gradients."""

    values: np.ndarray
    p: float
    element_gradients: np.ndarray
    energy: float
    residual: float = float("nan")
    iterations: int = 0
    energy_history: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "p": self.p, "energy": self.energy}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def element_gradients(mesh: ConstrainedMesh, u) -> np.ndarray:
    return np.einsum("tia,ti->ta", mesh.shape_gradients, np.asarray(u, dtype=float)[mesh.triangles])


def load_vector(mesh: ConstrainedMesh, f: ForceSpec) -> np.ndarray:
    """One-point (centroid) quadrature of f against the hat functions."""
    w = f(mesh.centroids) * mesh.areas / 3.0
    return np.bincount(mesh.triangles.ravel(), weights=np.repeat(w, 3), minlength=mesh.n_nodes)


def energy_of(mesh: ConstrainedMesh, u, p: float, F) -> float:
    g = element_gradients(mesh, u)
    return float(np.dot(mesh.areas, np.hypot(g[:, 0], g[:, 1]) ** p) / p - np.dot(F, u))


def stiffness(mesh: ConstrainedMesh, coef=None) -> sp.csr_matrix:
    """P1 stiffness matrix with optional per-triangle scalar coefficient."""
    G = mesh.shape_gradients
    w = mesh.areas if coef is None else mesh.areas * coef
    Ke = w[:, None, None] * np.einsum("tia,tja->tij", G, G)
    return _assemble(mesh, Ke)


def _assemble(mesh, Ke):
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    return sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))


class _Problem:
    """Energy, gradient and Hessian restricted to a set of free nodes."""

    def __init__(self, mesh, p, F, free, u_fixed):
        self.mesh = mesh
        self.p = float(p)
        self.F = F
        self.free = free
        self.u_fixed = u_fixed
        self.G = mesh.shape_gradients
        self.A = mesh.areas
        K0 = stiffness(mesh).tocsc()[free][:, free]
        self._K0 = splu(K0.tocsc()) if len(free) else None

    def full(self, x):
        u = self.u_fixed.copy()
        u[self.free] = x
        return u

    def grads(self, u):
        return element_gradients(self.mesh, u)

    def energy(self, u, g=None):
        g = self.grads(u) if g is None else g
        return float(np.dot(self.A, np.hypot(g[:, 0], g[:, 1]) ** self.p) / self.p - np.dot(self.F, u))

    def gradient(self, u, g=None):
        g = self.grads(u) if g is None else g
        s = np.hypot(g[:, 0], g[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(s > 0, s ** (self.p - 2), 0.0)
        flux = (self.A * k)[:, None] * g
        r = np.einsum("tia,ta->ti", self.G, flux)
        r = np.bincount(self.mesh.triangles.ravel(), weights=r.ravel(), minlength=self.mesh.n_nodes) - self.F
        return r[self.free]

    def reg_energy(self, u, g, eps):
        s2 = (g**2).sum(1) + eps * eps
        return float(np.dot(self.A, s2 ** (self.p / 2) - eps**self.p) / self.p - np.dot(self.F, u))

    def reg_gradient(self, u, g, eps):
        s2 = (g**2).sum(1) + eps * eps
        flux = (self.A * s2 ** ((self.p - 2) / 2))[:, None] * g
        r = np.einsum("tia,ta->ti", self.G, flux)
        r = np.bincount(self.mesh.triangles.ravel(), weights=r.ravel(), minlength=self.mesh.n_nodes) - self.F
        return r[self.free]

    def hessian(self, g, eps):
        p = self.p
        s2 = (g**2).sum(1) + eps * eps
        k = s2 ** ((p - 2) / 2)
        c = (p - 2) * s2 ** ((p - 4) / 2)
        M = k[:, None, None] * np.eye(2)[None] + c[:, None, None] * g[:, :, None] * g[:, None, :]
        Ke = self.A[:, None, None] * np.einsum("tia,tab,tjb->tij", self.G, M, self.G)
        H = _assemble(self.mesh, Ke).tocsc()
        return H[self.free][:, self.free]

    def dual_norm(self, r):
        if self._K0 is None or len(r) == 0:
            return 0.0
        return float(math.sqrt(max(np.dot(r, self._K0.solve(r)), 0.0)))

    def precondition(self, r):
        return self._K0.solve(r)


def _initial_guess(prob: _Problem, u0=None):
    if u0 is not None:
        return prob.full(np.asarray(u0, dtype=float)[prob.free])
    mesh, free = prob.mesh, prob.free
    K = stiffness(mesh).tocsr()
    rhs = prob.F - K @ prob.u_fixed
    u = prob.u_fixed.copy()
    if len(free):
        u[free] = prob.precondition(rhs[free])
    if np.any(prob.u_fixed != 0) or prob.p == 2:
        return u
    # homogeneous data: rescale the linear solution to the best multiple for exponent p
    g = prob.grads(u)
    A = float(np.dot(prob.A, np.hypot(g[:, 0], g[:, 1]) ** prob.p))
    B = float(np.dot(prob.F, u))
    if A > 0 and B > 0:
        u *= (B / A) ** (1 / (prob.p - 1))
    return u


def _line_search(energy, u, E, d_full, slope, gd, g):
    alpha = 1.0
    slack = 1e-14 * (1 + abs(E))
    for _ in range(40):
        g_new = g + alpha * gd
        u_new = u + alpha * d_full
        E_new = energy(u_new, g_new)
        if E_new <= E + ARMIJO_C * alpha * slope + slack:
            return alpha, u_new, g_new, E_new
        alpha *= 0.5
    return 0.0, u, g, E


def _minimize(prob: _Problem, tol, max_newton, max_cg, u0=None):
    """Newton with eps continuation; stops once the true residual meets the target."""
    u = _initial_guess(prob, u0)
    g = prob.grads(u)
    E = prob.energy(u, g)
    history = []
    res = prob.dual_norm(prob.gradient(u, g))
    gscale = float(np.sqrt(np.dot(prob.A, (g**2).sum(1)) / max(prob.A.sum(), 1e-300)))
    if gscale == 0.0:
        gscale = 1.0
    it = 0
    k = -math.log10(EPS_START)
    while res > tol * (1 + abs(E)) and it < max_newton and k <= -math.log10(EPS_LAST):
        eps = gscale * 10.0**-k
        stage_tol = max(tol, 10.0 ** -(k + 1))
        energy = lambda v, gv, eps=eps: prob.reg_energy(v, gv, eps)  # noqa: E731
        Ee = energy(u, g)
        history.append((eps, Ee))
        steps = 0
        while it < max_newton and steps < STAGE_STEPS:
            r = prob.reg_gradient(u, g, eps)
            if prob.dual_norm(r) <= stage_tol * (1 + abs(Ee)):
                break
            it += 1
            steps += 1
            try:
                d = splu(prob.hessian(g, eps)).solve(-r)
            except RuntimeError:
                break
            slope = float(np.dot(r, d))
            if not slope < 0:
                break
            d_full = np.zeros_like(u)
            d_full[prob.free] = d
            gd = prob.grads(d_full)
            alpha, u, g, Ee = _line_search(energy, u, Ee, d_full, slope, gd, g)
            if alpha == 0.0:
                break
            history.append((eps, Ee))
        E = prob.energy(u, g)
        res = prob.dual_norm(prob.gradient(u, g))
        log.debug("eps=%.1e after %d newton steps: E=%.15g residual=%.3e", eps, it, E, res)
        k += 1
    if res > tol * (1 + abs(E)):
        log.info("newton stopped at residual %.3e; switching to preconditioned CG", res)
        u, g, E, r, res, n = _ncg(prob, u, g, E, prob.gradient(u, g), res, tol, max_cg, history)
        it += n
    if res > tol * (1 + abs(E)):
        raise SolverStalled(f"residual {res:.3e} above target {tol * (1 + abs(E)):.3e}", residual=res)
    return u, g, E, res, it, history


def _ncg(prob, u, g, E, r, res, tol, max_iter, history):
    """Polak-Ribiere nonlinear CG with the Laplacian as preconditioner."""
    z = prob.precondition(r)
    d = -z
    rz = float(np.dot(r, z))
    for k in range(1, max_iter + 1):
        slope = float(np.dot(r, d))
        if slope >= 0:
            d = -z
            slope = -rz
        d_full = np.zeros_like(u)
        d_full[prob.free] = d
        gd = prob.grads(d_full)
        alpha, u, g, E_new = _line_search_grow(prob.energy, u, E, d_full, slope, gd, g)
        if alpha == 0.0:
            return u, g, E, r, res, k
        E = E_new
        history.append((0.0, E))
        r_new = prob.gradient(u, g)
        z_new = prob.precondition(r_new)
        rz_new = float(np.dot(r_new, z_new))
        beta = max(0.0, (rz_new - float(np.dot(r, z_new))) / rz) if rz > 0 else 0.0
        r, z, rz = r_new, z_new, rz_new
        d = -z + beta * d
        res = math.sqrt(max(rz, 0.0))
        if res <= tol * (1 + abs(E)):
            return u, g, E, r, res, k
    return u, g, E, r, res, max_iter


def _line_search_grow(energy, u, E, d_full, slope, gd, g):
    # expand first (CG steps are not scaled), then backtrack
    alpha = 1.0
    slack = 1e-14 * (1 + abs(E))
    best = None
    for _ in range(30):
        E_new = energy(u + alpha * d_full, g + alpha * gd)
        if E_new <= E + ARMIJO_C * alpha * slope + slack:
            best = (alpha, E_new)
            alpha *= 2
            continue
        break
    if best is None:
        return _line_search(energy, u, E, d_full, slope, gd, g)
    a, E_new = best
    return a, u + a * d_full, g + a * gd, E_new


def solve_p_poisson(
    mesh: ConstrainedMesh,
    f: ForceSpec,
    p: float,
    tol: float = DEFAULT_TOL,
    max_newton: int = 200,
    max_cg: int = 2000,
    initial=None,
) -> ScalarField:
    """Minimise the discrete p-energy over fields vanishing on the Dirichlet nodes.

    Parameters
    ----------
    mesh : ConstrainedMesh
    f : ForceSpec
    p : float
        Exponent in (1, inf).
    tol : float
        Target for the residual, measured in the norm dual to the discrete
        H^1_0 seminorm, relative to ``1 + |E|``.
    initial : array, optional
        Starting nodal vector (Dirichlet entries are overwritten).

    Raises
    ------
    SolverStalled
        When neither Newton nor the CG fallback reaches ``tol``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    F = load_vector(mesh, f)
    F[mesh.dirichlet_mask] = 0.0
    return solve_with_data(mesh, F, p, mesh.free_nodes, np.zeros(mesh.n_nodes), tol, max_newton, max_cg, initial)


def solve_with_data(mesh, F, p, free, u_fixed, tol=DEFAULT_TOL, max_newton=200, max_cg=2000, initial=None) -> ScalarField:
    """General form: minimise over the ``free`` entries with the rest fixed to ``u_fixed``."""
    free = np.asarray(free, dtype=np.int64)
    u_fixed = np.asarray(u_fixed, dtype=float).copy()
    u_fixed[free] = 0.0
    prob = _Problem(mesh, p, np.asarray(F, dtype=float), free, u_fixed)
    u, g, E, res, it, hist = _minimize(prob, tol, max_newton, max_cg, initial)
    u = u.copy()
    g = g.copy()
    u.setflags(write=False)
    g.setflags(write=False)
    return ScalarField(values=u, p=float(p), element_gradients=g, energy=E, residual=res, iterations=it, energy_history=tuple(hist))
