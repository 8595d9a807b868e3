import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pclab.errors import ConfigError
from pclab.pde.force import ForceSpec, IntegrabilityWarning, alpha_q, b_exponent, q0, q1, q_admissible


@pytest.mark.parametrize("p,want", [(1.5, 3 / 2.5), (4 / 3, (8 / 3) / 2)])
def test_q0_below_two(p, want):
    assert q0(p) == pytest.approx(want)


def test_q0_above_two_is_one():
    assert q0(3.0) == 1.0
    assert q_admissible(2.0, 1.01)
    assert not q_admissible(2.0, 1.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_q1_values(p):
    want = 2 * p / (2 * p - 1) if p >= 2 else 2 * p / (3 * p - 3)
    assert q1(p) == pytest.approx(want)


@given(st.floats(1.05, 10.0))
def test_q1_not_below_q0(p):
    assert q1(p) >= q0(p) - 1e-12


@given(st.floats(1.05, 10.0), st.floats(0.0, 1.0))
def test_alpha_positive_exactly_above_q1(p, s):
    q = q1(p) * (1 + s) + 1e-6
    assert alpha_q(p, q) > 0
    assert 0 < b_exponent(p, q) <= math.log(0.75) / math.log(0.25)


def test_alpha_vanishes_at_q1():
    for p in (1.5, 2.0, 3.0):
        assert alpha_q(p, q1(p)) == pytest.approx(0.0, abs=1e-12)


def test_check_raises_below_q0_and_warns_at_q1():
    with pytest.raises(ConfigError):
        ForceSpec.constant(1.0, q=0.9 * q0(1.5)).check(1.5)
    with pytest.warns(IntegrabilityWarning):
        ForceSpec.constant(1.0, q=q1(1.5)).check(1.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ForceSpec.constant(1.0).check(1.5)


def test_radial_profile_interpolates():
    f = ForceSpec(kind="radial", center=(0.0, 0.0), radii=(0.0, 1.0), values=(2.0, 0.0))
    assert f(np.array([[0.5, 0.0], [0.0, 0.25]])) == pytest.approx([1.0, 1.5])


def test_grid_force_matches_its_nodes():
    x = (0.0, 0.5, 1.0)
    y = (0.0, 1.0)
    vals = ((0.0, 1.0, 2.0), (3.0, 4.0, 5.0))
    f = ForceSpec(kind="grid", x=x, y=y, values=vals)
    assert f(np.array([[0.5, 1.0], [0.25, 0.5]])) == pytest.approx([4.0, 2.0])


@pytest.mark.parametrize(
    "spec",
    [
        ForceSpec.constant(2.5),
        ForceSpec(kind="radial", center=(0.1, 0.0), radii=(0.0, 1.0), values=(1.0, 0.5), q=4.0),
        ForceSpec(kind="table", points=((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)), values=(1.0, 2.0, 3.0)),
    ],
)
def test_force_dict_round_trip(spec):
    back = ForceSpec.from_dict(spec.to_dict())
    pts = np.array([[0.2, 0.2], [0.05, 0.1]])
    assert back(pts) == pytest.approx(spec(pts))
    assert back.q == spec.q
