"""Flux formulation and a posteriori certificates from the duality gap.

For an admissible flux sigma (-div sigma = f against every free hat function)
and any field u vanishing on the Dirichlet nodes,

    (1/p') int |sigma|^p'  >=  int f u - (1/p) int |grad u|^p,

with equality exactly at the solution, where sigma = |grad u|^(p-2) grad u.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NotACertificate
from .pde.force import ForceSpec
from .pde.mesh import ConstrainedMesh
from .pde.solver import DEFAULT_TOL, ScalarField, load_vector, stiffness

ADMISSIBLE_FACTOR = 1e2


@dataclass(frozen=True, eq=False)
class FluxField:
    sigma: np.ndarray
    p_conj: float

    @property
    def p(self) -> float:
        return self.p_conj / (self.p_conj - 1)

    def scaled(self, c: float) -> "FluxField":
        return FluxField(self.sigma * c, self.p_conj)

    def __add__(self, other: "FluxField") -> "FluxField":
        return FluxField(self.sigma + other.sigma, self.p_conj)


def flux_of(field: ScalarField) -> FluxField:
    """sigma_T = |grad u_T|^(p-2) grad u_T on every triangle."""
    g = np.asarray(field.element_gradients, dtype=float)
    s = np.hypot(g[:, 0], g[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(s > 0, s ** (field.p - 2), 0.0)
    return FluxField(k[:, None] * g, field.p / (field.p - 1))


def curl_flux(mesh: ConstrainedMesh, psi, p: float) -> FluxField:
    """Divergence-free flux (d psi/dy, -d psi/dx) of a P1 stream function.

    It is orthogonal to the gradient of every hat function whose support
    avoids the outer boundary, so adding it never changes the divergence
    residual.
    """
    g = np.einsum("tia,ti->ta", mesh.shape_gradients, np.asarray(psi, dtype=float)[mesh.triangles])
    return FluxField(np.column_stack([g[:, 1], -g[:, 0]]), p / (p - 1))


def _nodal_divergence(flux: FluxField, f: ForceSpec, mesh: ConstrainedMesh):
    w = np.einsum("tia,ta->ti", mesh.shape_gradients, flux.sigma) * mesh.areas[:, None]
    div = np.bincount(mesh.triangles.ravel(), weights=w.ravel(), minlength=mesh.n_nodes)
    return (div - load_vector(mesh, f))[mesh.free_nodes]


def divergence_residual(flux: FluxField, f: ForceSpec, mesh: ConstrainedMesh) -> float:
    """max over free hat functions phi of |int sigma . grad phi - int f phi| / |phi|_{H^1}."""
    if len(mesh.free_nodes) == 0:
        return 0.0
    r = _nodal_divergence(flux, f, mesh)
    kdiag = stiffness(mesh).diagonal()[mesh.free_nodes]
    return float(np.max(np.abs(r) / np.sqrt(kdiag)))


def dual_value(flux: FluxField, mesh: ConstrainedMesh) -> float:
    s = np.hypot(flux.sigma[:, 0], flux.sigma[:, 1])
    return float(np.dot(mesh.areas, s**flux.p_conj)) / flux.p_conj


def primal_value(field: ScalarField, f: ForceSpec, mesh: ConstrainedMesh) -> float:
    """int f u - (1/p) int |grad u|^p, i.e. minus the energy."""
    F = load_vector(mesh, f)
    F[mesh.dirichlet_mask] = 0.0
    g = field.element_gradients
    return float(np.dot(F, field.values) - np.dot(mesh.areas, np.hypot(g[:, 0], g[:, 1]) ** field.p) / field.p)


@dataclass(frozen=True)
class Certificate:
    primal: float
    dual: float
    gap: float
    residual: float
    p: float
    mesh_h: float

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def certificate(field, flux, f, mesh, tol: float = DEFAULT_TOL, require_admissible: bool = True) -> Certificate:
    """Primal and dual values with their gap.

    Raises
    ------
    NotACertificate
        If ``require_admissible`` and the divergence residual exceeds
        ``ADMISSIBLE_FACTOR * tol``.
    """
    res = divergence_residual(flux, f, mesh)
    if require_admissible and res > ADMISSIBLE_FACTOR * tol:
        raise NotACertificate(f"divergence residual {res:.3e} exceeds {ADMISSIBLE_FACTOR * tol:.1e}")
    primal = primal_value(field, f, mesh)
    dual = dual_value(flux, mesh)
    return Certificate(primal, dual, dual - primal, res, field.p, mesh.h)


def duality_gap(field, flux, f, mesh, tol: float = DEFAULT_TOL, require_admissible: bool = True) -> float:
    return certificate(field, flux, f, mesh, tol, require_admissible).gap
