import numpy as np
import pytest

from pclab.dual import certificate, curl_flux, divergence_residual, duality_gap, flux_of
from pclab.errors import NotACertificate
from pclab.pde.solver import solve_p_poisson


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_gap_is_tiny_at_the_solution(coarse_disk_mesh, unit_force, p):
    u = solve_p_poisson(coarse_disk_mesh, unit_force, p, tol=1e-10)
    cert = certificate(u, flux_of(u), unit_force, coarse_disk_mesh, tol=1e-8)
    assert abs(cert.gap) <= 1e-8 * cert.primal
    assert cert.residual <= 1e-6


def test_divergence_free_perturbation_keeps_admissibility(coarse_disk_mesh, unit_force, rng):
    u = solve_p_poisson(coarse_disk_mesh, unit_force, 2.0)
    sig = flux_of(u)
    psi = rng.normal(size=coarse_disk_mesh.n_nodes) * 0.01
    pert = sig + curl_flux(coarse_disk_mesh, psi, 2.0)
    r0 = divergence_residual(sig, unit_force, coarse_disk_mesh)
    r1 = divergence_residual(pert, unit_force, coarse_disk_mesh)
    assert r1 == pytest.approx(r0, abs=1e-12)
    # weak duality: any admissible flux bounds the primal from above
    assert duality_gap(u, pert, unit_force, coarse_disk_mesh, tol=1e-6) >= -1e-10


def test_scaled_flux_is_not_a_certificate(coarse_disk_mesh, unit_force):
    u = solve_p_poisson(coarse_disk_mesh, unit_force, 2.0)
    bad = flux_of(u).scaled(1.1)
    with pytest.raises(NotACertificate):
        certificate(u, bad, unit_force, coarse_disk_mesh)
    assert duality_gap(u, bad, unit_force, coarse_disk_mesh, require_admissible=False) > 0


def test_certificate_serialises(coarse_disk_mesh, unit_force):
    u = solve_p_poisson(coarse_disk_mesh, unit_force, 2.0)
    d = certificate(u, flux_of(u), unit_force, coarse_disk_mesh).to_dict()
    assert set(d) == {"primal", "dual", "gap", "residual", "p", "mesh_h"}
    assert np.isfinite(list(d.values())).all()
