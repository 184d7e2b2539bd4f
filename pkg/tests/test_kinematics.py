import math

import pytest
from hypothesis import given, settings, strategies as st

from core.errors import ParameterError
from core.kinematics import direction_between, relative_travel_time, traversal_time
from core.models import Direction


def test_static_roi():
    for direction in Direction:
        assert traversal_time(direction, 2.0, 0.0, Direction.N) == pytest.approx(0.5)


def test_translating_roi_edge_times():
    assert traversal_time(Direction.N, 2.5, 1.0, Direction.N) == pytest.approx(1 / 1.5)
    assert traversal_time(Direction.S, 2.5, 1.0, Direction.N) == pytest.approx(1 / 3.5)
    assert traversal_time(Direction.E, 2.5, 1.0, Direction.N) == pytest.approx(1 / math.sqrt(5.25))


def test_relative_time_matches_edge_time():
    for direction in Direction:
        expected = traversal_time(direction, 2.5, 1.0, Direction.W)
        assert relative_travel_time(direction.dx, direction.dy, 2.5, 1.0, Direction.W) == pytest.approx(expected)


def test_zero_displacement():
    assert relative_travel_time(0, 0, 2.0, 1.0, Direction.N) == 0.0


@pytest.mark.parametrize('S_r, S_p', [(1.0, 1.0), (0.5, 1.0), (2.0, -0.1)])
def test_invalid_speeds(S_r, S_p):
    with pytest.raises(ParameterError):
        traversal_time(Direction.N, S_r, S_p, Direction.N)


def test_direction_between():
    assert direction_between((0, 0), (0, 1)) is Direction.N
    assert direction_between((3, 2), (2, 2)) is Direction.W
    with pytest.raises(ParameterError):
        direction_between((0, 0), (1, 1))


@settings(max_examples=50, deadline=None)
@given(S_p=st.floats(min_value=0.0, max_value=5.0), excess=st.floats(min_value=0.05, max_value=5.0),
       direction=st.sampled_from(list(Direction)), translation=st.sampled_from(list(Direction)))
def test_edge_time_between_extremes(S_p, excess, direction, translation):
    S_r = S_p + excess
    t = traversal_time(direction, S_r, S_p, translation)
    assert 1 / (S_r + S_p) - 1e-12 <= t <= 1 / (S_r - S_p) + 1e-12
