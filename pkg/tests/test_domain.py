import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pclab.geometry.domain import PolygonalDomain


def test_l_shape_area():
    d = PolygonalDomain.polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])
    assert d.area() == pytest.approx(3.0)
    inside = d.contains(np.array([[0.5, 0.5], [1.5, 1.5], [1.5, 0.5]]), closed=False)
    assert inside.tolist() == [True, False, True]


def test_square_with_hole():
    d = PolygonalDomain.polygon([(0, 0), (3, 0), (3, 3), (0, 3)], [[(1, 1), (2, 1), (2, 2), (1, 2)]])
    assert d.area() == pytest.approx(8.0)
    assert not d.contains(np.array([[1.5, 1.5]]), closed=False)[0]
    assert d.contains(np.array([[0.5, 1.5]]), closed=False)[0]


def test_disk_polygon_vertex_count_multiple_of_four():
    d = PolygonalDomain.disk((0, 0), 1.0, h=0.1)
    assert len(d.boundary_loops[0]) % 4 == 0
    assert d.area() == pytest.approx(math.pi, rel=5e-3)


def test_boundary_is_in_closed_domain_only():
    d = PolygonalDomain.unit_square()
    p = np.array([[1.0, 0.5]])
    assert d.contains(p, closed=True)[0]
    assert not d.contains(p, closed=False)[0]


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_boundary_distance_in_square(x, y):
    d = PolygonalDomain.unit_square()
    got = d.boundary_distance(np.array([[x, y]]))[0]
    assert got == pytest.approx(min(x, y, 1 - x, 1 - y), abs=1e-12)
