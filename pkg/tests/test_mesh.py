import numpy as np
import pytest

from pclab.errors import GlueOutsideDomain
from pclab.geometry.domain import PolygonalDomain
from pclab.geometry.graph import GlueGraph
from pclab.pde.mesh import build_mesh


def test_empty_glue_mesh_covers_the_square():
    d = PolygonalDomain.unit_square()
    m = build_mesh(d, GlueGraph.empty(), 0.1)
    assert m.areas.sum() == pytest.approx(1.0)
    assert np.all(m.areas > 0)
    assert m.min_angle() >= 20.0 - 1e-6
    # boundary nodes are exactly the Dirichlet nodes
    on_edge = np.isclose(m.nodes, 0).any(axis=1) | np.isclose(m.nodes, 1).any(axis=1)
    assert np.array_equal(on_edge, m.dirichlet_mask)


def test_glue_edges_are_mesh_edges():
    d = PolygonalDomain.unit_square()
    g = GlueGraph.polyline([(0.2, 0.3), (0.8, 0.6)])
    m = build_mesh(d, g, 0.1)
    glue = m.nodes[m.glue_mask]
    # every glue node lies on the segment and the pieces tile it
    a, b = np.array([0.2, 0.3]), np.array([0.8, 0.6])
    t = (glue - a) @ (b - a) / ((b - a) @ (b - a))
    assert np.allclose(a + np.outer(t, b - a), glue, atol=1e-12)
    e = m.edges()
    on = m.glue_mask[e].all(axis=1)
    seg_len = np.hypot(*(m.nodes[e[on, 0]] - m.nodes[e[on, 1]]).T).sum()
    assert seg_len == pytest.approx(np.hypot(*(b - a)), rel=1e-9)


def test_isolated_point_is_pinned_on_request():
    d = PolygonalDomain.unit_square()
    g = GlueGraph.point((0.5, 0.5))
    pinned = build_mesh(d, g, 0.1, pin_isolated_points=True)
    loose = build_mesh(d, g, 0.1, pin_isolated_points=False)
    assert pinned.glue_mask.sum() == 1
    assert loose.glue_mask.sum() == 0


def test_glue_outside_is_rejected():
    with pytest.raises(GlueOutsideDomain):
        build_mesh(PolygonalDomain.unit_square(), GlueGraph.polyline([(0.5, 0.5), (1.5, 0.5)]), 0.1)


def test_mesh_size_controls_circumradius():
    m = build_mesh(PolygonalDomain.unit_square(), GlueGraph.empty(), 0.05)
    p = m.nodes[m.triangles]
    el = np.stack([np.hypot(*(p[:, i] - p[:, (i + 1) % 3]).T) for i in range(3)], axis=1)
    R = el.prod(axis=1) / (4 * m.areas)
    assert R.max() <= 0.05 * (1 + 1e-9)
