import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pclab.errors import Disconnected, NotAdmissible, WouldDisconnectAll
from pclab.geometry.competitors import competitor_cut_chord, competitor_cut_circle, competitor_steiner, wall_length
from pclab.geometry.graph import GlueGraph, find_loops
from pclab.geometry.measures import length_in_ball
from pclab.geometry.steiner import mst_length, steiner_connection_4

STEINER_SQUARE = math.sqrt(2) * (math.sqrt(3) + 1)


def cross(arm=1.0):
    return GlueGraph([(0, 0), (arm, 0), (0, arm), (-arm, 0), (0, -arm)], [(0, 1), (0, 2), (0, 3), (0, 4)])


def test_square_terminals_length():
    t = steiner_connection_4([(1, 0), (0, 1), (-1, 0), (0, -1)])
    assert t.total_length() == pytest.approx(STEINER_SQUARE, abs=1e-6)
    assert t.is_connected()
    assert find_loops(t) == []


def test_collinear_terminals_give_the_segment():
    t = steiner_connection_4([(0, 0), (1, 0), (2, 0), (3, 0)])
    assert t.total_length() == pytest.approx(3.0)


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=4, max_size=4))
def test_steiner_never_longer_than_mst(pts):
    pts = np.array(pts)
    t = steiner_connection_4(pts)
    assert t.total_length() <= mst_length(pts) + 1e-9
    assert t.is_connected()


@pytest.mark.parametrize("r_s", [0.05, 0.1, 0.3])
def test_steiner_competitor_on_cross(r_s):
    g = cross()
    out = competitor_steiner(g, 0, r_s)
    delta = out.total_length() - g.total_length()
    assert delta == pytest.approx(-(4 - STEINER_SQUARE) * r_s, abs=1e-3 * r_s)
    assert out.is_connected()


def test_cut_circle_keeps_connectivity_and_leaves_outside_untouched():
    g = GlueGraph.polyline([(-1, 0), (1, 0)])
    out = competitor_cut_circle(g, (0, 0), 0.3, n_arc=32)
    assert out.is_connected()
    assert len(find_loops(out)) == 1
    kept = g.total_length() - length_in_ball(g, (0, 0), 0.3)
    poly = 32 * 2 * 0.3 * math.sin(math.pi / 32)
    assert out.total_length() == pytest.approx(kept + poly, rel=1e-9)


def test_cut_circle_refuses_to_swallow_everything():
    with pytest.raises(WouldDisconnectAll):
        competitor_cut_circle(GlueGraph.polyline([(-0.1, 0), (0.1, 0)]), (0, 0), 0.5)


def test_cut_circle_needs_an_exit():
    g = GlueGraph.polyline([(0.6, 0), (1, 0)])
    with pytest.raises(Disconnected):
        competitor_cut_circle(g, (0, 0), 0.3)


def test_chord_on_a_bent_line():
    g = GlueGraph.polyline([(-1, 0), (0, 0.02), (1, 0)])
    out = competitor_cut_chord(g, (0, 0), 0.5, beta_wall=0.1)
    assert out.is_connected()
    # two walls of angular half-width asin(0.1), drawn as inscribed polylines
    walls = wall_length(g, out, (0, 0), 0.5)
    assert 0 < walls <= 4 * 0.5 * math.asin(0.1) + 1e-9


def test_chord_rejects_rough_sets():
    with pytest.raises(NotAdmissible):
        competitor_cut_chord(cross(), (0, 0), 0.5, beta_wall=0.05)
