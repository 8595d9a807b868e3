"""Force term f and the integrability exponents attached to it."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator, RegularGridInterpolator

from ..errors import ConfigError

KINDS = ("constant", "radial", "grid", "table")


def q0(p: float) -> float:
    """Smallest admissible integrability exponent.

    For ``p == 2`` any ``q > 1`` works; the returned value 1.0 is then a
    strict lower bound (see :func:`q_admissible`).
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    if p < 2:
        return 2 * p / (3 * p - 2)
    return 1.0


def q1(p: float) -> float:
    """Exponent above which the regularity diagnostics apply."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    if p >= 2:
        return 2 * p / (2 * p - 1)
    return 2 * p / (3 * p - 3)


def q_admissible(p: float, q: float) -> bool:
    if p == 2:
        return q > 1
    return q >= q0(p)


def alpha_q(p: float, q: float) -> float:
    """Decay gain alpha(q); positive exactly when q > q1(p)."""
    pc = p / (p - 1)
    if p >= 2:
        return 1 + pc - 2 * pc / q
    return 3 * (p - 1) - 2 * p / q


def b_exponent(p: float, q: float, a: float = 0.25) -> float:
    """Decay exponent b = min(alpha(q)/2, ln(3/4)/ln(a)) for a contraction ratio a in (0, 1/2)."""
    if not 0 < a < 0.5:
        raise ValueError("a must lie in (0, 1/2)")
    return min(alpha_q(p, q) / 2, math.log(0.75) / math.log(a))


class IntegrabilityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ForceSpec:
    """Right-hand side f of the p-Poisson problem.

    kind
        ``constant`` (``value``), ``radial`` (piecewise-linear profile
        ``radii``/``values`` around ``center``, or ``func`` of the radius),
        ``grid`` (bilinear samples ``x``, ``y``, ``values`` of shape
        ``(len(y), len(x))``) or ``table`` (scattered ``points`` with
        ``values``, linear inside the hull, nearest outside).
    q
        integrability exponent used for the admissibility checks.
    """

    kind: str = "constant"
    value: float = 1.0
    center: tuple = (0.0, 0.0)
    radii: tuple = ()
    values: tuple = ()
    x: tuple = ()
    y: tuple = ()
    points: tuple = ()
    q: float = math.inf
    func: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown force kind {self.kind!r}")
        if self.kind == "radial" and self.func is None and len(self.radii) < 2:
            raise ConfigError("radial force needs at least two profile knots")
        if self.kind == "grid" and np.asarray(self.values).shape != (len(self.y), len(self.x)):
            raise ConfigError("grid values must have shape (len(y), len(x))")
        if self.kind == "table" and len(self.points) != len(self.values):
            raise ConfigError("table needs one value per point")

    @classmethod
    def constant(cls, c: float = 1.0, q: float = math.inf) -> "ForceSpec":
        return cls(kind="constant", value=float(c), q=q)

    def is_zero(self) -> bool:
        if self.kind == "constant":
            return self.value == 0.0
        if self.func is not None:
            return False
        return bool(np.all(np.asarray(self.values, dtype=float) == 0.0))

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        if self.kind == "constant":
            return np.full(len(pts), float(self.value))
        if self.kind == "radial":
            r = np.hypot(*(pts - np.asarray(self.center, dtype=float)).T)
            if self.func is not None:
                return np.asarray(self.func(r), dtype=float)
            return np.interp(r, self.radii, self.values)
        if self.kind == "grid":
            it = RegularGridInterpolator(
                (np.asarray(self.y, float), np.asarray(self.x, float)),
                np.asarray(self.values, float),
                bounds_error=False,
                fill_value=None,
            )
            return it(pts[:, ::-1])
        P = np.asarray(self.points, dtype=float)
        V = np.asarray(self.values, dtype=float)
        out = LinearNDInterpolator(P, V)(pts)
        miss = np.isnan(out)
        if np.any(miss):
            out[miss] = NearestNDInterpolator(P, V)(pts[miss])
        return out

    def check(self, p: float) -> None:
        """Raise when q is below q0(p); warn when q does not exceed q1(p)."""
        if not q_admissible(p, self.q):
            raise ConfigError(f"force integrability q={self.q} is below q0({p})={q0(p):.6g}")
        if self.q <= q1(p):
            warnings.warn(
                f"q={self.q} does not exceed q1({p})={q1(p):.6g}; decay diagnostics disabled",
                IntegrabilityWarning,
                stacklevel=2,
            )

    def lq_norm(self, mesh, q: float | None = None) -> float:
        """Centroid-quadrature L^q norm over the mesh."""
        q = self.q if q is None else q
        fv = np.abs(self(mesh.centroids))
        if math.isinf(q):
            return float(fv.max(initial=0.0))
        return float((fv**q @ mesh.areas) ** (1 / q))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "q": self.q if math.isfinite(self.q) else "inf"}
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind == "radial":
            d.update(center=list(self.center), radii=list(self.radii), values=list(self.values))
        elif self.kind == "grid":
            d.update(x=list(self.x), y=list(self.y), values=np.asarray(self.values).tolist())
        else:
            d.update(points=np.asarray(self.points).tolist(), values=list(self.values))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ForceSpec":
        d = dict(d)
        q = d.pop("q", math.inf)
        q = math.inf if q in ("inf", None) else float(q)
        kind = d.pop("kind", "constant")
        conv = {}
        for k, v in d.items():
            if k == "value":
                conv[k] = float(v)
            elif k == "values" and kind == "grid":
                conv[k] = tuple(tuple(float(c) for c in row) for row in v)
            elif k == "points":
                conv[k] = tuple(tuple(float(c) for c in pt) for pt in v)
            else:
                conv[k] = tuple(float(c) for c in v)
        return cls(kind=kind, q=q, **conv)
