"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is echoed in the terminal summary.
"""
import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from pclab import regularity as reg
from pclab.cli import run_scenario
from pclab.cli.pipeline import _interp_at, radial_oracle
from pclab.config import RunConfig
from pclab.dual import certificate, flux_of
from pclab.geometry.graph import GlueGraph, find_loops
from pclab.geometry.measures import TOL_BETA, flatness
from pclab.geometry.steiner import steiner_connection_4
from pclab.optimizer import AnnealSchedule, MovePool, lambda_scan, optimize
from pclab.pde.energy import compliance
from pclab.pde.force import ForceSpec
from pclab.pde.mesh import build_mesh
from pclab.pde.solver import solve_p_poisson
from pclab.geometry.domain import PolygonalDomain

H = 1 / 64
STEINER_4 = math.sqrt(2) * (math.sqrt(3) + 1)


def record(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def identity_error(mesh, u, f):
    cg, cw = compliance(mesh, u, f)
    return abs(cg - cw) / cg


@pytest.fixture(scope="module")
def radial():
    """Disk solves for p in {2, 1.5, 3, 4}, with wall time per p."""
    out = {}
    f = ForceSpec.constant(1.0)
    for p in (2.0, 1.5, 3.0, 4.0):
        t0 = time.perf_counter()
        dom = PolygonalDomain.disk((0.0, 0.0), 1.0, h=H)
        mesh = build_mesh(dom, GlueGraph.empty(), H)
        u = solve_p_poisson(mesh, f, p, tol=1e-8)
        out[p] = (mesh, u, time.perf_counter() - t0)
    return out


def test_criterion_01_radial_p2(radial):
    mesh, u, dt = radial[2.0]
    u0 = _interp_at(mesh, u, np.zeros(2))
    c = compliance(mesh, u, ForceSpec.constant(1.0))[0]
    eu, ec = abs(u0 - 0.25) / 0.25, abs(c - math.pi / 16) / (math.pi / 16)
    record(1, eu <= 0.02 and ec <= 0.02 and dt < 30, f"u(0)={u0:.6f} C={c:.6f} err_u={eu:.2e} err_C={ec:.2e} time={dt:.1f}s")


def test_criterion_02_radial_other_p(radial):
    errs = {}
    for p in (1.5, 3.0, 4.0):
        mesh, u, _ = radial[p]
        exact = radial_oracle(p)[0]
        errs[p] = abs(_interp_at(mesh, u, np.zeros(2)) - exact) / exact
    detail = " ".join(f"p={p}:err={e:.2e}" for p, e in errs.items())
    record(2, max(errs.values()) <= 0.02, detail)


def test_criterion_03_compliance_identity(radial):
    f = ForceSpec.constant(1.0)
    errs = {f"disk p={p}": identity_error(m, u, f) for p, (m, u, _) in radial.items()}
    dom = PolygonalDomain.disk((0.0, 0.0), 1.0, h=1 / 32)
    for name, g in {"segment": GlueGraph.polyline([(-0.5, 0), (0.5, 0)]), "cross": _cross(0.5)}.items():
        for p in (1.5, 3.0):
            mesh = build_mesh(dom, g, 1 / 32, pin_isolated_points=p > 2)
            errs[f"{name} p={p}"] = identity_error(mesh, solve_p_poisson(mesh, f, p, tol=1e-8), f)
    worst = max(errs, key=errs.get)
    record(3, errs[worst] <= 1e-2, f"{len(errs)} instances, worst {worst} rel={errs[worst]:.2e}")


def test_criterion_04_duality_gap():
    f = ForceSpec.constant(1.0)
    dom = PolygonalDomain.disk((0.0, 0.0), 1.0, h=H)
    mesh = build_mesh(dom, GlueGraph.empty(), H)
    parts, ok = [], True
    for p in (2.0, 1.5, 3.0):
        gaps, u = [], None
        for tol in (1e-4, 1e-6, 1e-8):
            u = solve_p_poisson(mesh, f, p, tol=tol)
            cert = certificate(u, flux_of(u), f, mesh, tol, require_admissible=False)
            gaps.append((abs(cert.gap), abs(cert.primal)))
        rel = gaps[-1][0] / gaps[-1][1]
        floor = 1e-12 * gaps[-1][1]
        mono = all(b <= 1.1 * a + floor for (a, _), (b, _) in zip(gaps, gaps[1:]))
        ok &= rel <= 1e-2 and mono
        parts.append(f"p={p}:rel={rel:.1e},gaps=" + "/".join(f"{g:.1e}" for g, _ in gaps))
    record(4, ok, " ".join(parts))


def test_criterion_05_crack_law():
    radii = np.geomspace(0.4, 0.05, 8)
    parts, ok = [], True
    for p in (1.5, 2.0, 3.0):
        t0 = time.perf_counter()
        mesh, u, sigma = reg.crack_field(p, H)
        rep = reg.omega_decay(mesh, u, sigma, (0, 0), radii, p=p, kind="crack_law")
        dt = time.perf_counter() - t0
        ok &= 1.8 <= rep.fitted_exponent <= 2.2 and dt < 120
        parts.append(f"p={p}:exp={rep.fitted_exponent:.3f},r2={rep.fit_r2:.3f},{dt:.0f}s")
    record(5, ok, " ".join(parts))


def _cross(a):
    return GlueGraph([(0, 0), (a, 0), (0, a), (-a, 0), (0, -a)], [(0, 1), (0, 2), (0, 3), (0, 4)])


def test_criterion_06_steiner():
    L = steiner_connection_4([(1, 0), (0, 1), (-1, 0), (0, -1)]).total_length()
    r_s = 0.1
    rep = reg.quadruple_scan(_cross(1.0), None, r_s=r_s)
    dL = rep.values["sites"][0]["dL"]
    expect = -(4 - STEINER_4) * r_s
    ok = abs(L - STEINER_4) <= 1e-6 and abs(dL - expect) <= 1e-3 * r_s
    record(6, ok, f"L={L:.9f} (err {abs(L - STEINER_4):.1e}) dL={dL:.6f} expected {expect:.6f}")


def test_criterion_07_beta_scaling():
    rng = np.random.default_rng(2024)
    bad = 0
    for _ in range(1000):
        n = rng.integers(2, 7)
        pts = rng.uniform(-1, 1, (n, 2))
        g = GlueGraph.polyline(pts)
        k = rng.integers(0, n - 1)
        x = pts[k] + rng.uniform() * (pts[k + 1] - pts[k])
        r, kappa = rng.uniform(0.05, 1.5), rng.uniform(0.05, 0.95)
        if flatness(g, x, kappa * r).beta > (2 / kappa) * flatness(g, x, r).beta + TOL_BETA:
            bad += 1
    record(7, bad == 0, f"1000 cases, {bad} violations")


def test_criterion_08_height_estimate():
    rng = np.random.default_rng(2025)
    bad, worst = 0, -math.inf
    for _ in range(1000):
        r, phi = rng.uniform(0.1, 2.0), rng.uniform(0, math.pi)
        n = rng.integers(1, 9)
        ts = np.sort(rng.uniform(-0.95, 0.95, n))
        hs = rng.uniform(-0.08, 0.08, n)
        u = np.array([math.cos(phi), math.sin(phi)])
        v = np.array([-u[1], u[0]])
        inner = [r * (t * u + s * math.sqrt(1 - t * t) * v) for t, s in zip(ts, hs)]
        pts = np.vstack([-1.5 * r * u, -r * u, *inner, r * u, 1.5 * r * u])
        chk = reg.height_vs_excess(GlueGraph.polyline(pts), (0, 0), r)
        slack = chk.height - math.sqrt(2 * r * chk.excess)
        worst = max(worst, slack / r)
        bad += not chk.holds
    record(8, bad == 0, f"1000 cases, {bad} violations, worst (height-sqrt(2r*excess))/r={worst:.2e}")


@pytest.fixture(scope="module")
def no_loop_run():
    cfg = RunConfig(
        lam=0.05,
        mesh_h=H,
        sigma_h=0.1,
        solver_tol=1e-6,
        sigma0_spec={"preset": "loop_on_segment", "size": 0.5},
    )
    sched = AnnealSchedule(T0=1e-3, epochs=3, proposals_per_epoch=15, seed=7, greedy_tail=40)
    t0 = time.perf_counter()
    best, trace = optimize(cfg.sigma0, cfg, sched, MovePool())
    return cfg, best, trace, time.perf_counter() - t0


def test_criterion_09_no_loops(no_loop_run):
    cfg, best, trace, dt = no_loop_run
    assert find_loops(cfg.sigma0)
    loops = find_loops(best)
    rep = reg.loop_certificate(best, cfg)
    ok = not loops and rep.verdict == "pass" and dt < 900
    record(9, ok, f"loops={len(loops)} certificate={rep.verdict} H1={best.total_length():.4f} time={dt:.0f}s")


def test_criterion_10_ahlfors(no_loop_run):
    cfg, best, _, _ = no_loop_run
    rep = reg.ahlfors_certificate(best, cfg.domain, n_centers=50, h=cfg.mesh_h)
    lo, hi = rep.values["min_ratio"], rep.values["max_ratio"]
    ok = rep.verdict == "pass" and lo >= 1 - 1e-6 and hi <= 20
    record(10, ok, f"min={lo:.6f} max={hi:.4f} radii=[{rep.inputs['radii'][0]:.4f},{rep.inputs['radii'][-1]:.4f}]")


def test_criterion_11_monotone_compliance():
    f = ForceSpec.constant(1.0)
    h = 1 / 32
    dom = PolygonalDomain.disk((0.0, 0.0), 1.0, h=h)
    seg = GlueGraph.polyline([(-0.5, 0), (0.5, 0)])
    pairs = [
        (2.0, GlueGraph.empty(), seg),
        (1.5, seg, _cross(0.5)),
        (3.0, GlueGraph.polyline([(-0.5, 0), (0.0, 0)]), GlueGraph.polyline([(-0.5, 0), (0.0, 0), (0.3, 0.4)])),
    ]
    parts, ok = [], True
    for p, small, big in pairs:
        cs = []
        for g in (small, big):
            mesh = build_mesh(dom, g, h, pin_isolated_points=p > 2)
            cs.append(compliance(mesh, solve_p_poisson(mesh, f, p, tol=1e-8), f)[0])
        ok &= cs[1] <= cs[0] * (1 + 1e-3)
        parts.append(f"p={p}:{cs[0]:.5f}->{cs[1]:.5f}")
    record(11, ok, " ".join(parts))


def test_criterion_12_lambda_scan():
    cfg = RunConfig(mesh_h=0.08, sigma_h=0.1, solver_tol=1e-6, sigma0_spec={"preset": "segment"})
    sched = AnnealSchedule(T0=1e-3, epochs=3, proposals_per_epoch=15, seed=3, greedy_tail=150)
    scan = lambda_scan(cfg, [0.01, 0.1, 1.0, 10.0], schedule=sched)
    h1 = {r["lambda"]: r["H1"] for r in scan["rows"]}
    ok = h1[0.01] > 0.1 and h1[10.0] <= cfg.sigma_h
    record(12, ok, "H1: " + " ".join(f"{k:g}->{v:.4f}" for k, v in h1.items()) + f" threshold={scan['threshold']}")


def test_criterion_13_determinism(tmp_path):
    scenario = {
        "name": "determinism",
        "mode": "optimize",
        "p": 2,
        "lambda": 0.05,
        "domain": {"kind": "disk", "center": [0, 0], "radius": 1},
        "mesh_h": 0.1,
        "solver_tol": 1e-6,
        "sigma0": {"preset": "loop_on_segment"},
        "schedule": {"T0": 0.001, "epochs": 2, "proposals_per_epoch": 5, "greedy_tail": 3},
        "diagnostics": ["compliance_identity", "duality_gap", "loop_certificate", "quadruple_scan"],
        "seed": 21,
    }
    path = tmp_path / "det.json"
    path.write_text(json.dumps(scenario))
    runs = []
    for k in range(2):
        code, _ = run_scenario(path, out=tmp_path / f"run{k}")
        data = json.loads((tmp_path / f"run{k}" / "results.json").read_text())
        data.pop("timestamp")
        runs.append((code, data))
    same = runs[0][1] == runs[1][1] and runs[0][0] == runs[1][0]
    record(13, same, f"exit codes {runs[0][0]}/{runs[1][0]}, results.json numeric content {'identical' if same else 'differs'}")
