"""Minimal SVG rendering of a glue graph over its domain."""
from __future__ import annotations

from .domain import PolygonalDomain
from .graph import GlueGraph


def to_svg(graph: GlueGraph, domain: PolygonalDomain, width: int = 480, stroke: float | None = None) -> str:
    x0, y0, x1, y1 = domain.bbox
    pad = 0.02 * max(x1 - x0, y1 - y0)
    x0, y0, x1, y1 = x0 - pad, y0 - pad, x1 + pad, y1 + pad
    height = int(round(width * (y1 - y0) / (x1 - x0)))
    sw = stroke if stroke is not None else 0.004 * max(x1 - x0, y1 - y0)
    # flip y so that the picture has the usual orientation
    tf = f'transform="translate(0,{y0 + y1}) scale(1,-1)"'
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="{x0:.6g} {y0:.6g} {x1 - x0:.6g} {y1 - y0:.6g}">',
        f"<g {tf}>",
    ]
    for loop in domain.boundary_loops:
        pts = " ".join(f"{x:.6g},{y:.6g}" for x, y in loop)
        out.append(f'<polygon points="{pts}" fill="#eef3f8" stroke="#333" stroke-width="{sw:.4g}"/>')
    for (i, j) in graph.edges:
        (ax, ay), (bx, by) = graph.vertices[i], graph.vertices[j]
        out.append(
            f'<line x1="{ax:.6g}" y1="{ay:.6g}" x2="{bx:.6g}" y2="{by:.6g}" '
            f'stroke="#c0392b" stroke-width="{2 * sw:.4g}" stroke-linecap="round"/>'
        )
    deg = graph.degrees()
    for k, (x, y) in enumerate(graph.vertices):
        if deg[k] != 2:
            out.append(f'<circle cx="{x:.6g}" cy="{y:.6g}" r="{2 * sw:.4g}" fill="#c0392b"/>')
    out.append("</g></svg>")
    return "\n".join(out) + "\n"
