"""Run configuration: parsing, validation and serialisation."""
from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .geometry.domain import PolygonalDomain
from .geometry.graph import GlueGraph
from .optimizer.anneal import AnnealSchedule
from .optimizer.moves import MovePool
from .pde.force import ForceSpec, IntegrabilityWarning, q0, q1, q_admissible

SCHEMA_VERSION = "1.0"
MODES = ("solve", "optimize", "diagnose", "lambda_scan")
DECAY_DIAGNOSTICS = ("beta_decay", "omega_decay")


def load_schema() -> dict:
    return json.loads(resources.files("pclab").joinpath("config.schema.json").read_text())


def build_domain(spec: dict, h: float) -> PolygonalDomain:
    kind = spec.get("kind", "disk")
    if kind == "disk":
        return PolygonalDomain.disk(tuple(spec.get("center", (0.0, 0.0))), float(spec.get("radius", 1.0)), h=h, n=spec.get("n"))
    if kind == "rectangle":
        return PolygonalDomain.rectangle(*spec["bounds"])
    if kind == "unit_square":
        return PolygonalDomain.unit_square()
    if kind == "polygon":
        loops = spec["loops"]
        return PolygonalDomain.polygon(loops[0], loops[1:])
    raise ConfigError(f"unknown domain kind {kind!r}")


def build_sigma(spec) -> GlueGraph:
    """Glue graph from explicit ``vertices``/``edges`` or a named preset."""
    if spec is None:
        return GlueGraph.empty()
    if "preset" not in spec:
        return GlueGraph.from_dict(spec)
    name = spec["preset"]
    c = spec.get("center", (0.0, 0.0))
    r = float(spec.get("size", 0.5))
    cx, cy = float(c[0]), float(c[1])
    if name == "empty":
        return GlueGraph.empty()
    if name == "point":
        return GlueGraph.point((cx, cy))
    if name == "segment":
        return GlueGraph.polyline([(cx - r, cy), (cx + r, cy)])
    if name == "cross":
        return GlueGraph([(cx, cy), (cx + r, cy), (cx, cy + r), (cx - r, cy), (cx, cy - r)], [(0, 1), (0, 2), (0, 3), (0, 4)])
    if name == "loop_on_segment":
        # segment with a triangle loop hanging off its right end
        t = 0.6 * r
        pts = [(cx - r, cy), (cx, cy), (cx + t, cy + 0.5 * t), (cx + t, cy - 0.5 * t)]
        return GlueGraph(pts, [(0, 1), (1, 2), (2, 3), (3, 1)])
    raise ConfigError(f"unknown glue preset {name!r}")


@dataclass(frozen=True)
class RunConfig:
    """Everything a scenario needs; ``domain`` and ``sigma0`` are built from their specs."""

    p: float = 2.0
    q: float = math.inf
    lam: float = 0.05
    domain_spec: dict = field(default_factory=lambda: {"kind": "disk", "center": [0.0, 0.0], "radius": 1.0})
    force: ForceSpec = field(default_factory=ForceSpec)
    mesh_h: float = 1.0 / 64
    sigma_h: float | None = None
    solver_tol: float = 1e-8
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    pool: MovePool = field(default_factory=MovePool)
    diagnostics: tuple = ()
    diagnostic_params: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "out"
    name: str = "scenario"
    mode: str = "solve"
    sigma0_spec: dict | None = None
    lambdas: tuple = ()
    decay_enabled: bool = True

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigError("p must exceed 1")
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if not self.mesh_h > 0:
            raise ConfigError("mesh_h must be positive")
        if not self.solver_tol >= 0:
            raise ConfigError("solver_tol must be nonnegative")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if not q_admissible(self.p, self.q):
            raise ConfigError(f"q={self.q} is below q0(p)={q0(self.p):.6g}")
        if self.sigma_h is None:
            object.__setattr__(self, "sigma_h", float(self.mesh_h))
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if self.q <= q1(self.p):
            warnings.warn(
                f"q={self.q} does not exceed q1(p)={q1(self.p):.6g}: decay diagnostics disabled",
                IntegrabilityWarning,
                stacklevel=3,
            )
            object.__setattr__(self, "decay_enabled", False)
        if self.force.q != self.q:
            object.__setattr__(self, "force", dataclasses.replace(self.force, q=self.q))

    @cached_property
    def domain(self) -> PolygonalDomain:
        return build_domain(self.domain_spec, self.mesh_h)

    @cached_property
    def sigma0(self) -> GlueGraph:
        return build_sigma(self.sigma0_spec)

    @property
    def active_diagnostics(self) -> tuple:
        if self.decay_enabled:
            return self.diagnostics
        return tuple(d for d in self.diagnostics if d not in DECAY_DIAGNOSTICS)

    def replace(self, **kw) -> "RunConfig":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrabilityWarning)
            return dataclasses.replace(self, **kw)

    # -- serialisation ----------------------------------------------------
    def to_dict(self) -> dict:
        force = self.force.to_dict()
        force.pop("q", None)
        d = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "mode": self.mode,
            "p": self.p,
            "q": self.q if math.isfinite(self.q) else "inf",
            "lambda": self.lam,
            "domain": self.domain_spec,
            "force": force,
            "mesh_h": self.mesh_h,
            "sigma_h": self.sigma_h,
            "solver_tol": self.solver_tol,
            "schedule": self.schedule.to_dict(),
            "pool": self.pool.to_dict(),
            "diagnostics": list(self.diagnostics),
            "diagnostic_params": self.diagnostic_params,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "lambdas": list(self.lambdas),
        }
        if self.sigma0_spec is not None:
            d["sigma0"] = self.sigma0_spec
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict, validate: bool = True) -> "RunConfig":
        if validate:
            try:
                jsonschema.validate(d, load_schema())
            except jsonschema.ValidationError as exc:
                where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
                raise ConfigError(f"config field {where}: {exc.message}") from None
        q = d.get("q", "inf")
        q = math.inf if q == "inf" else float(q)
        seed = int(d.get("seed", 0))
        sched = dict(d.get("schedule", {}))
        sched.setdefault("seed", seed)
        try:
            return cls(
                p=float(d.get("p", 2.0)),
                q=q,
                lam=float(d.get("lambda", 0.05)),
                domain_spec=d.get("domain", {"kind": "disk", "center": [0.0, 0.0], "radius": 1.0}),
                force=ForceSpec.from_dict({**d.get("force", {}), "q": q}),
                mesh_h=float(d.get("mesh_h", 1.0 / 64)),
                sigma_h=d.get("sigma_h"),
                solver_tol=float(d.get("solver_tol", 1e-8)),
                schedule=AnnealSchedule.from_dict(sched),
                pool=MovePool.from_dict(d.get("pool", {})),
                diagnostics=tuple(d.get("diagnostics", ())),
                diagnostic_params=dict(d.get("diagnostic_params", {})),
                seed=seed,
                output_dir=str(d.get("output_dir", "out")),
                name=str(d.get("name", "scenario")),
                mode=str(d.get("mode", "solve")),
                sigma0_spec=d.get("sigma0"),
                lambdas=tuple(d.get("lambdas", ())),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_json(text)
