import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pclab import regularity as reg
from pclab.config import RunConfig
from pclab.errors import NotAChordConfiguration, NotAdmissible, NotOnSigma
from pclab.geometry.graph import GlueGraph
from pclab.geometry.measures import TOL_LEN
from pclab.pde.energy import local_energy
from pclab.pde.force import ForceSpec
from pclab.pde.mesh import build_mesh
from pclab.pde.solver import solve_p_poisson

STEINER_DROP = 4 - math.sqrt(2) * (math.sqrt(3) + 1)
RADII = np.geomspace(0.4, 0.05, 7)


def cross(arm=0.5):
    return GlueGraph([(0, 0), (arm, 0), (0, arm), (-arm, 0), (0, -arm)], [(0, 1), (0, 2), (0, 3), (0, 4)])


@pytest.fixture(scope="module")
def cfg():
    return RunConfig(mesh_h=0.1, solver_tol=1e-6, lam=0.05)


def test_fit_recovers_power_law():
    r = np.geomspace(1, 0.01, 8)
    slope, r2, label = reg.fit_loglog(r, 3 * r**1.7)
    assert slope == pytest.approx(1.7)
    assert r2 == pytest.approx(1.0)
    assert label == "ok"


def test_fit_labels():
    r = np.geomspace(1, 0.1, 6)
    assert reg.fit_loglog(r, np.zeros(6))[2] == "degenerate_zero"
    assert reg.fit_loglog(r[:4], r[:4])[2] == "unreliable"
    noisy = np.array([1, 0.01, 1, 0.01, 1, 0.01])
    assert reg.fit_loglog(r, noisy)[2] == "unreliable"


def test_beta_of_segment_is_degenerate():
    g = GlueGraph.polyline([(-1, 0), (1, 0)])
    rep = reg.beta_decay(g, (0, 0), RADII)
    assert rep.label == "degenerate_zero"
    assert rep.to_report().verdict == "degenerate_zero"


def test_beta_of_parabola_decays_linearly():
    x = np.linspace(-0.6, 0.6, 241)
    g = GlueGraph.polyline(np.column_stack([x, x**2]))
    rep = reg.beta_decay(g, (0, 0), RADII)
    assert rep.fitted_exponent == pytest.approx(1.0, abs=0.2)


def test_beta_of_corner_is_scale_free():
    g = GlueGraph([(0, 0), (1, 0), (0, 1)], [(0, 1), (0, 2)])
    rep = reg.beta_decay(g, (0, 0), RADII)
    assert rep.fitted_exponent == pytest.approx(0.0, abs=0.05)


def test_beta_decay_preconditions():
    g = GlueGraph.polyline([(-1, 0), (1, 0)])
    with pytest.raises(NotOnSigma):
        reg.beta_decay(g, (0, 0.3), RADII)
    with pytest.raises(ValueError):
        reg.beta_decay(g, (0, 0), RADII, h=0.05)


def test_omega_of_zero_field_is_degenerate(coarse_disk_mesh):
    u = solve_p_poisson(coarse_disk_mesh, ForceSpec.constant(0.0), 2.0)
    g = GlueGraph.polyline([(-0.9, 0), (0.9, 0)])
    rep = reg.omega_decay(coarse_disk_mesh, u, g, (0, 0), np.geomspace(0.5, 0.15, 5), enforce_flatness=False)
    assert rep.label == "degenerate_zero"


def test_omega_needs_flatness(coarse_disk_mesh, unit_force):
    u = solve_p_poisson(coarse_disk_mesh, unit_force, 2.0)
    rep = reg.omega_decay(coarse_disk_mesh, u, cross(), (0, 0), np.geomspace(0.5, 0.15, 5))
    assert rep.label == "not_applicable"


def test_crack_law_on_a_coarse_mesh():
    mesh, u, sigma = reg.crack_field(2.0, 1 / 24)
    rep = reg.omega_decay(mesh, u, sigma, (0, 0), np.geomspace(0.4, 0.1, 6), kind="crack_law")
    assert 1.8 <= rep.fitted_exponent <= 2.2
    assert rep.verdict() == "pass"


def test_corner_decays_slower_than_flat():
    # positive data excites the r^(2/3) mode of the reentrant 270 degree sector
    p, h = 2.0, 1 / 24
    flat_mesh, flat_u, flat_sigma = reg.crack_field(p, h)
    from pclab.geometry.domain import PolygonalDomain
    from pclab.pde.solver import solve_with_data

    corner = GlueGraph([(0, 0), (1, 0), (0, 1)], [(0, 1), (0, 2)])
    mesh = build_mesh(PolygonalDomain.disk((0, 0), 1.0, h=h), corner, h)
    fixed = np.zeros(mesh.n_nodes)
    bnd = mesh.boundary_mask & ~mesh.glue_mask
    th = np.arctan2(mesh.nodes[bnd, 1], mesh.nodes[bnd, 0])
    fixed[bnd] = np.abs(np.sin(2 * th))
    u = solve_with_data(mesh, np.zeros(mesh.n_nodes), p, mesh.free_nodes, fixed)
    radii = np.geomspace(0.4, 0.1, 6)
    flat = reg.omega_decay(flat_mesh, flat_u, flat_sigma, (0, 0), radii, kind="crack_law")
    bent = reg.omega_decay(mesh, u, corner, (0, 0), radii, enforce_flatness=False)
    assert bent.fitted_exponent < 2.0 - 0.3
    assert bent.fitted_exponent < flat.fitted_exponent


def test_w_tau_without_samples_is_local_energy(cfg):
    g = GlueGraph.polyline([(-0.6, 0), (0.6, 0)])
    est = reg.w_tau_estimate(g, cfg, (0, 0), 0.3, tau=0.05, n_samples=0)
    mesh = build_mesh(cfg.domain, g, cfg.mesh_h)
    u = solve_p_poisson(mesh, cfg.force, cfg.p, tol=cfg.solver_tol)
    assert est.value == pytest.approx(local_energy(mesh, u, (0, 0), 0.3))
    assert est.n_candidates == 1


def test_w_tau_of_zero_force(cfg):
    c = cfg.replace(force=ForceSpec.constant(0.0))
    g = GlueGraph.polyline([(-0.6, 0), (0.6, 0)])
    assert reg.w_tau_estimate(g, c, (0, 0), 0.3).value == 0.0


def test_w_tau_monotone_in_samples_and_tau(cfg):
    g = GlueGraph.polyline([(-0.6, 0), (0, 0.01), (0.6, 0)])
    vals = [reg.w_tau_estimate(g, cfg, (0, 0), 0.3, tau=0.05, n_samples=n).value for n in (0, 2, 4)]
    assert vals[0] <= vals[1] <= vals[2]
    by_tau = [reg.w_tau_estimate(g, cfg, (0, 0), 0.3, tau=t, n_samples=4).value for t in (0.04, 0.08)]
    assert by_tau[0] <= by_tau[1]


def test_w_tau_rejects_rough_sets(cfg):
    with pytest.raises(NotAdmissible):
        reg.w_tau_estimate(cross(), cfg, (0, 0), 0.3, tau=0.05)


def test_offsets_are_nested():
    a = reg.w_tau_offsets(4, 0.1)
    b = reg.w_tau_offsets(8, 0.1)
    assert np.array_equal(a, b[:4])
    assert np.all(np.abs(b) <= 0.1)


def test_density_scan_on_diameter_and_cross():
    d = reg.density_scan(GlueGraph.polyline([(-1, 0), (1, 0)]), (0, 0), 0.8, tau=0.5)
    assert d.values["fraction_two"] == 1.0
    assert d.values["both_sides_rate"] == 1.0
    c = reg.density_scan(cross(), (0, 0), 0.8, tau=0.5)
    assert c.values["fraction_two"] == 0.0


def test_height_of_the_chord_itself():
    chk = reg.height_vs_excess(GlueGraph.polyline([(-1, 0), (1, 0)]), (0, 0), 0.5)
    assert chk.height == pytest.approx(0.0, abs=1e-12)
    assert chk.excess == pytest.approx(0.0, abs=1e-12)
    assert chk.holds


def test_height_of_a_circular_arc():
    # arc of sagitta s over the horizontal chord, closed-form length
    r, s = 0.5, 0.05
    a = math.sqrt(r * r - s * s)
    R = (a * a + s * s) / (2 * s)
    phi = np.linspace(-math.asin(a / R), math.asin(a / R), 400)
    arc = np.column_stack([R * np.sin(phi), s - R + R * np.cos(phi)])
    g = GlueGraph.polyline(np.vstack([[-1.0, 0.0], arc, [1.0, 0.0]]))
    chk = reg.height_vs_excess(g, (0, 0), r)
    assert chk.holds
    assert chk.height <= chk.bound
    arc_len = 2 * R * math.asin(a / R)
    assert chk.excess == pytest.approx(arc_len - 2 * a, rel=1e-3)
    assert chk.height == pytest.approx(s, rel=1e-3)


def test_height_preconditions():
    with pytest.raises(NotAChordConfiguration):
        reg.height_vs_excess(cross(), (0, 0), 0.3)
    bent = GlueGraph([(-1, 0), (0, 0), (0, 1)], [(0, 1), (1, 2)])
    with pytest.raises(NotAChordConfiguration):
        reg.height_vs_excess(bent, (0, 0), 0.5)


@st.composite
def flat_chords(draw):
    r = draw(st.floats(0.1, 2.0))
    phi = draw(st.floats(0, math.pi))
    n = draw(st.integers(1, 8))
    ts = sorted(draw(st.lists(st.floats(-0.95, 0.95), min_size=n, max_size=n, unique=True)))
    hs = draw(st.lists(st.floats(-0.08, 0.08), min_size=n, max_size=n))
    return r, phi, ts, hs


@given(flat_chords())
def test_height_estimate_property(case):
    r, phi, ts, hs = case
    u = np.array([math.cos(phi), math.sin(phi)])
    v = np.array([-u[1], u[0]])
    inner = [r * (t * u + h * math.sqrt(1 - t * t) * v) for t, h in zip(ts, hs)]
    pts = np.vstack([-1.5 * r * u, -r * u, *inner, r * u, 1.5 * r * u])
    chk = reg.height_vs_excess(GlueGraph.polyline(pts), (0, 0), r)
    assert chk.height <= math.sqrt(2 * r * chk.excess) + TOL_LEN * r


def test_quadruple_scan_geometry():
    rep = reg.quadruple_scan(cross(), None, r_s=0.1)
    (site,) = rep.values["sites"]
    assert site["dL"] == pytest.approx(-STEINER_DROP * 0.1, abs=1e-4)
    tree = GlueGraph([(0, 0), (1, 0), (0, 1), (-1, 0)], [(0, 1), (0, 2), (0, 3)])
    assert reg.quadruple_scan(tree).values["sites"] == []


def test_quadruple_scan_sign_decomposition(cfg):
    rep = reg.quadruple_scan(cross(0.4), cfg, r_s=0.1)
    (site,) = rep.values["sites"]
    assert site["dC"] >= -1e-6
    assert site["dF"] == pytest.approx(site["dC"] + cfg.lam * site["dL"], abs=1e-12)


def test_loop_certificate_cases(cfg):
    tree = GlueGraph.polyline([(-0.4, 0), (0.4, 0)])
    assert reg.loop_certificate(tree, cfg).verdict == "pass"
    loop = GlueGraph([(-0.4, 0), (0, 0), (0.15, 0.08), (0.15, -0.08)], [(0, 1), (1, 2), (2, 3), (3, 1)])
    assert reg.loop_certificate(loop, cfg).verdict == "fail"
    assert reg.loop_certificate(loop, cfg.replace(lam=0.0)).verdict == "lambda_zero_inconclusive"


def test_ahlfors_on_segment_and_star():
    seg = GlueGraph.polyline([(-0.5, 0), (0.5, 0)])
    rep = reg.ahlfors_certificate(seg, None, 20, radii=[0.05, 0.1, 0.2])
    assert 1 - 1e-9 <= rep.values["min_ratio"] and rep.values["max_ratio"] <= 2 + 1e-9
    star = GlueGraph([(0, 0), (0.5, 0), (-0.25, 0.43), (-0.25, -0.43)], [(0, 1), (0, 2), (0, 3)])
    rep = reg.ahlfors_certificate(star, None, 20, radii=[0.05, 0.1])
    assert rep.values["max_ratio"] <= 3 + 1e-9
    assert rep.verdict == "pass"


def test_report_layout():
    rep = reg.density_scan(GlueGraph.polyline([(-1, 0), (1, 0)]), (0, 0), 0.8, tau=0.5)
    d = json.loads(rep.to_json())
    assert set(d) == {"kind", "inputs", "values", "fitted_exponent", "verdict"}
    lines = rep.to_csv().strip().splitlines()
    assert lines[0].split(",")[:2] == ["s", "count"]
    assert len(lines) == 1 + reg.N_DENSITY
