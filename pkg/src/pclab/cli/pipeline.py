"""Scenario pipelines: mesh, solve, optionally optimise, then diagnostics."""
from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..config import SCHEMA_VERSION, RunConfig
from ..dual import certificate, flux_of
from ..errors import ConfigError, GlueOutsideDomain, NotOnSigma, PclabError
from ..geometry.graph import GlueGraph
from ..geometry.svg import to_svg
from ..optimizer.anneal import lambda_scan, optimize
from ..pde.energy import compliance
from ..pde.force import IntegrabilityWarning
from ..pde.mesh import build_mesh
from ..pde.solver import solve_p_poisson
from .. import regularity as reg

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
IDENTITY_TOL = 1e-2
GAP_TOL = 1e-2
ORACLE_TOL = 2e-2


def radial_oracle(p: float, f: float = 1.0, R: float = 1.0):
    """Centre value and compliance of the radial solution with u = 0 on |x| = R."""
    pc = p / (p - 1)
    u0 = ((p - 1) / p) * (f / 2) ** (1 / (p - 1)) * R**pc
    c = 2 * math.pi * (f / 2) ** pc * R ** (pc + 2) / (pc + 2) / pc
    return u0, c


def _interp_at(mesh, u, x):
    """P1 value at ``x`` (nearest node when outside every triangle)."""
    from matplotlib.tri import LinearTriInterpolator, Triangulation

    tri = Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles)
    v = LinearTriInterpolator(tri, np.asarray(u.values))(x[0], x[1])
    if np.ma.is_masked(v):
        return float(u.values[np.argmin(np.hypot(*(mesh.nodes - x).T))])
    return float(v)


class _State:
    """Everything the diagnostics may need about one solved glue set."""

    def __init__(self, cfg, sigma, mesh, u):
        self.cfg, self.sigma, self.mesh, self.u = cfg, sigma, mesh, u


def _default_center(sigma: GlueGraph, domain):
    if sigma.n_vertices == 0:
        x0, y0, x1, y1 = domain.bbox
        return np.array([(x0 + x1) / 2, (y0 + y1) / 2])
    c = sigma.vertices.mean(axis=0)
    return sigma.vertices[np.argmin(np.hypot(*(sigma.vertices - c).T))]


def _default_radii(st, center, n=6):
    bd = st.cfg.domain.boundary_distance(center)[0]
    hi = min(0.5 * bd, 0.4)
    lo = max(2.5 * st.mesh.h, hi / 8)
    return np.geomspace(hi, lo, n) if lo < hi else np.zeros(0)


def _diag_compliance_identity(st, prm):
    tol = prm.get("tol", IDENTITY_TOL)
    cg, cw = compliance(st.mesh, st.u, st.cfg.force)
    rel = abs(cg - cw) / cg if cg > 0 else abs(cg - cw)
    return reg.Report("compliance_identity", {"tol": tol}, {"C_grad": cg, "C_work": cw, "rel_diff": rel}, None, "pass" if rel <= tol else "fail")


def _diag_duality_gap(st, prm):
    tol = prm.get("tol", GAP_TOL)
    cert = certificate(st.u, flux_of(st.u), st.cfg.force, st.mesh, st.cfg.solver_tol, require_admissible=False)
    rel = abs(cert.gap) / abs(cert.primal) if cert.primal else abs(cert.gap)
    return reg.Report("duality_gap", {"tol": tol}, {**cert.to_dict(), "rel_gap": rel}, None, "pass" if rel <= tol else "fail")


def _diag_radial_oracle(st, prm):
    tol = prm.get("tol", ORACLE_TOL)
    spec = st.cfg.domain_spec
    if spec.get("kind") != "disk" or st.cfg.force.kind != "constant" or not st.sigma.is_empty():
        return reg.Report("radial_oracle", {"tol": tol}, {}, None, "not_applicable")
    R = float(spec.get("radius", 1.0))
    center = np.asarray(spec.get("center", (0.0, 0.0)), dtype=float)
    u0, c = radial_oracle(st.cfg.p, st.cfg.force.value, R)
    got_u0 = _interp_at(st.mesh, st.u, center)
    got_c = compliance(st.mesh, st.u, st.cfg.force)[0]
    eu, ec = abs(got_u0 - u0) / abs(u0), abs(got_c - c) / abs(c)
    vals = {"u0": got_u0, "u0_exact": u0, "C": got_c, "C_exact": c, "rel_err_u0": eu, "rel_err_C": ec}
    return reg.Report("radial_oracle", {"tol": tol, "p": st.cfg.p}, vals, None, "pass" if max(eu, ec) <= tol else "fail")


def _diag_loop(st, prm):
    return reg.loop_certificate(st.sigma, st.cfg)


def _diag_ahlfors(st, prm):
    return reg.ahlfors_certificate(
        st.sigma,
        st.cfg.domain,
        n_centers=int(prm.get("n_centers", 50)),
        radii=prm.get("radii"),
        h=st.mesh.h,
        ceiling=float(prm.get("ceiling", reg.AHLFORS_CEILING)),
    )


def _center_radii(st, prm):
    x = np.asarray(prm["center"], dtype=float) if "center" in prm else _default_center(st.sigma, st.cfg.domain)
    radii = np.asarray(prm["radii"], dtype=float) if "radii" in prm else _default_radii(st, x)
    return x, radii


def _diag_beta(st, prm):
    x, radii = _center_radii(st, prm)
    if st.sigma.is_empty() or len(radii) == 0:
        return reg.Report("beta_alpha", {}, {}, None, "not_applicable")
    try:
        return reg.beta_decay(st.sigma, x, radii, h=st.mesh.h).to_report()
    except NotOnSigma:
        return reg.Report("beta_alpha", {"center": x.tolist()}, {}, None, "not_applicable")


def _diag_omega(st, prm):
    x, radii = _center_radii(st, prm)
    if st.sigma.is_empty() or len(radii) == 0:
        return reg.Report("omega_decay", {}, {}, None, "not_applicable")
    rep = reg.omega_decay(st.mesh, st.u, st.sigma, x, radii, q=st.cfg.q, eps0=prm.get("eps0", reg.EPS0))
    return rep.to_report()


def _diag_quadruple(st, prm):
    return reg.quadruple_scan(st.sigma, st.cfg if prm.get("solve", True) else None, prm.get("r_s"))


def _diag_density(st, prm):
    x = np.asarray(prm["center"], dtype=float) if "center" in prm else _default_center(st.sigma, st.cfg.domain)
    if st.sigma.is_empty():
        return reg.Report("density_scan", {}, {}, None, "not_applicable")
    r1 = float(prm.get("r1", 0.5 * st.cfg.domain.boundary_distance(x)[0]))
    return reg.density_scan(st.sigma, x, r1, prm.get("tau", reg.TAU_DEFAULT))


def _diag_w_tau(st, prm):
    x = np.asarray(prm["center"], dtype=float) if "center" in prm else _default_center(st.sigma, st.cfg.domain)
    if st.sigma.is_empty():
        return reg.Report("w_tau", {}, {}, None, "not_applicable")
    r = float(prm.get("r", 0.25 * st.cfg.domain.boundary_distance(x)[0]))
    tau = float(prm.get("tau", reg.TAU_DEFAULT))
    try:
        return reg.w_tau_estimate(st.sigma, st.cfg, x, r, tau, int(prm.get("n_samples", reg.N_WTAU))).to_report()
    except PclabError as exc:
        return reg.Report("w_tau", {"center": x.tolist(), "r": r, "tau": tau}, {"reason": str(exc)}, None, "not_applicable")


DIAGNOSTICS = {
    "compliance_identity": _diag_compliance_identity,
    "duality_gap": _diag_duality_gap,
    "radial_oracle": _diag_radial_oracle,
    "loop_certificate": _diag_loop,
    "ahlfors_certificate": _diag_ahlfors,
    "beta_decay": _diag_beta,
    "omega_decay": _diag_omega,
    "quadruple_scan": _diag_quadruple,
    "density_scan": _diag_density,
    "w_tau": _diag_w_tau,
}


def _solve(cfg: RunConfig, sigma: GlueGraph):
    mesh = build_mesh(cfg.domain, sigma, cfg.mesh_h, pin_isolated_points=cfg.p > 2)
    return mesh, solve_p_poisson(mesh, cfg.force, cfg.p, tol=cfg.solver_tol)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def execute(cfg: RunConfig, out: Path, mode: str | None = None, snapshots: bool = False, threads: int = 1) -> dict:
    """Run one scenario and write its artifacts; returns the results dict.

    Raises whatever the geometry, meshing and solver layers raise.
    """
    mode = mode or cfg.mode
    out = Path(out)
    sigma = cfg.sigma0
    results = {
        "schema_version": SCHEMA_VERSION,
        "name": cfg.name,
        "mode": mode,
        "seed": cfg.seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "config": cfg.to_dict(),
    }
    trace_text = ""
    if mode in ("optimize", "lambda_scan"):
        if mode == "lambda_scan" or cfg.lambdas:
            scan = lambda_scan(cfg, cfg.lambdas, threads=threads)
            results["lambda_scan"] = {"rows": [{k: v for k, v in r.items() if k != "sigma"} for r in scan["rows"]], "threshold": list(scan["threshold"])}
        if mode == "optimize":
            sigma, trace = optimize(sigma, cfg, cfg.schedule, cfg.pool, snapshots=snapshots)
            trace_text = trace.to_jsonl()
            results["optimizer"] = {
                "proposals": trace.proposals,
                "accepted": len(trace.records) - 1,
                "rejected": trace.rejected,
                "best_F": trace.best_values()[-1],
            }
            if snapshots:
                for key, g in trace.snapshots.items():
                    _write(out / "snapshots" / f"{key[:16]}.svg", to_svg(g, cfg.domain))
    mesh, u = _solve(cfg, sigma)
    cg, cw = compliance(mesh, u, cfg.force)
    L = sigma.total_length()
    cert = certificate(u, flux_of(u), cfg.force, mesh, cfg.solver_tol, require_admissible=False)
    results.update(
        objective=cg + cfg.lam * L,
        compliance={"grad": cg, "work": cw},
        length=L,
        duality=cert.to_dict(),
        solver={"iterations": u.iterations, "residual": u.residual, "energy": u.energy},
        mesh={"n_nodes": mesh.n_nodes, "n_triangles": mesh.n_triangles, "h": mesh.h},
        sigma=sigma.to_dict(),
    )
    st = _State(cfg, sigma, mesh, u)
    reports, verdicts = [], {}
    for name in cfg.active_diagnostics:
        prm = dict(cfg.diagnostic_params.get(name, {}))
        rep = DIAGNOSTICS[name](st, prm)
        reports.append(rep.to_dict())
        verdicts[name] = rep.verdict
        _write(out / f"diag_{name}.csv", rep.to_csv())
    skipped = [d for d in cfg.diagnostics if d not in cfg.active_diagnostics]
    for name in skipped:
        verdicts[name] = "disabled"
    results["diagnostics"] = reports
    results["verdicts"] = verdicts
    results["failing"] = [k for k, v in verdicts.items() if v in reg.FAILING]
    _write(out / "results.json", json.dumps(reg._jsonable(results), indent=2, sort_keys=True))
    _write(out / "trace.jsonl", trace_text)
    _write(out / "sigma.json", sigma.to_json())
    _write(out / "sigma.svg", to_svg(sigma, cfg.domain))
    return results


def run_scenario(path, mode=None, seed=None, out=None, snapshots=False, threads=1) -> tuple[int, dict]:
    """Load, run and classify one scenario file; returns ``(exit code, results)``."""
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", IntegrabilityWarning)
            cfg = RunConfig.load(path)
        for w in caught:
            log.warning("%s", w.message)
        if seed is not None:
            cfg = cfg.replace(seed=int(seed), schedule=dataclasses.replace(cfg.schedule, seed=int(seed)))
        out = Path(out if out is not None else cfg.output_dir)
        results = execute(cfg, out, mode, snapshots, threads)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG, {"error": str(exc), "kind": "config"}
    except GlueOutsideDomain as exc:
        log.error("invalid glue set: %s", exc)
        return EXIT_CONFIG, {"error": str(exc), "kind": "config"}
    except PclabError as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER, {"error": str(exc), "kind": "solver"}
    if results["failing"]:
        log.error("failing verdicts: %s", ", ".join(results["failing"]))
        return EXIT_FAIL, results
    return EXIT_OK, results


def _suite_job(args):
    path, seed, out, snapshots = args
    code, res = run_scenario(path, None, seed, out, snapshots, 1)
    return code, res


def run_suite(directory, seed=None, out=None, snapshots=False, threads=1) -> tuple[int, list]:
    """Run every ``*.json`` scenario in ``directory``; writes summary.csv.

    Each scenario writes into ``<out>/<file stem>``. Exit code 2 for an empty
    directory, 1 if any scenario fails, else 0.
    """
    directory = Path(directory)
    files = sorted(directory.glob("*.json")) if directory.is_dir() else []
    if not files:
        log.error("no scenario files in %s", directory)
        return EXIT_CONFIG, []
    out = Path(out if out is not None else directory / "out")
    jobs = [(str(f), seed, str(out / f.stem), snapshots) for f in files]
    if threads > 1:
        with ProcessPoolExecutor(threads) as ex:
            done = list(ex.map(_suite_job, jobs))
    else:
        done = [_suite_job(j) for j in jobs]
    rows = []
    for f, (code, res) in zip(files, done):
        rows.append(
            {
                "scenario": f.stem,
                "exit_code": code,
                "status": "pass" if code == EXIT_OK else "fail",
                "failing": ";".join(res.get("failing", [])) or res.get("error", ""),
                "objective": res.get("objective", ""),
                "compliance": res.get("compliance", {}).get("grad", ""),
                "length": res.get("length", ""),
            }
        )
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return (EXIT_OK if all(r["exit_code"] == EXIT_OK for r in rows) else EXIT_FAIL), rows
