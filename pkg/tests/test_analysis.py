import math

import pytest
from hypothesis import given, settings, strategies as st

from core.analysis import (CompetitiveVariant, EdgeKind, audit_rewards, bounds_report, robot_scaling_holds,
                           brute_force_opt, competitive_rhs, floor_log2, lawnmower_lower_bound,
                           lower_bound_grid, special_case_bound, special_case_bounds, upper_bound)
from core.dfs_explorer import explore
from core.errors import ParameterError, SearchLimitError
from core.grid_world import generate_random_roi
from core.models import Direction, GridRoi
from tests.conftest import make_strip


@pytest.mark.parametrize('R, expected', [(1, 0), (2, 1), (3, 1), (4, 2), (20, 4), (64, 6)])
def test_floor_log2(R, expected):
    assert floor_log2(R) == expected


def test_upper_bound_values():
    assert upper_bound(120, 20, 20, 2.5, 1.0) == pytest.approx(53.3333333, rel=1e-6)
    assert upper_bound(50, 10, 1, 1.0, 0.0) == pytest.approx(100.0)
    assert upper_bound(1, 0, 4, 1.0, 0.0) == pytest.approx(2 / 3)


def test_upper_bound_rejects_bad_depth():
    with pytest.raises(ParameterError):
        upper_bound(10, 10, 2, 2.0, 1.0)
    with pytest.raises(ParameterError):
        upper_bound(10, 3, 2, 1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(C=st.integers(min_value=1, max_value=500), R=st.integers(min_value=1, max_value=64),
       S_p=st.floats(min_value=0.0, max_value=3.0), excess=st.floats(min_value=0.1, max_value=3.0),
       scale=st.floats(min_value=0.5, max_value=4.0))
def test_upper_bound_scales_with_speed(C, R, S_p, excess, scale):
    d_max = C // 2
    base = upper_bound(C, d_max, R, S_p + excess, S_p)
    scaled = upper_bound(C, d_max, R, scale * (S_p + excess), scale * S_p)
    assert scaled == pytest.approx(base / scale, rel=1e-9)


def test_special_cases():
    bounds = special_case_bounds(100, 10, 1, 2.0, 1.0)
    assert bounds.SRTR == pytest.approx(200.0)
    assert bounds.SRTR_tight == pytest.approx(400 / 3)
    assert bounds.SRSR is None
    assert bounds.SRTR_tight / bounds.SRTR == pytest.approx(2.0 / 3.0)

    static = special_case_bounds(100, 10, 1, 2.0, 0.0)
    assert static.SRSR == pytest.approx(100.0)
    assert static.SRTR_tight == pytest.approx(static.SRSR)
    assert special_case_bounds(100, 10, 4, 2.0, 1.0).MRSR == pytest.approx(upper_bound(100, 10, 4, 2.0, 0.0))


def test_special_case_that_does_not_apply():
    with pytest.raises(ParameterError):
        special_case_bound('SRTR', 100, 10, 2, 2.0, 1.0)
    with pytest.raises(ParameterError):
        special_case_bound('XYZ', 100, 10, 1, 2.0, 1.0)
    assert special_case_bound('SRTR', 100, 10, 1, 2.0, 1.0) == pytest.approx(200.0)


def test_lower_bound_values():
    assert lower_bound_grid(1, 5, 2.0, 1.0) == 0.0
    assert lower_bound_grid(121, 4, 1.5, 0.5) == pytest.approx(15.0)
    assert lower_bound_grid(101, 1, 1.0, 0.0) == pytest.approx(100.0)


def test_competitive_rhs_values():
    assert competitive_rhs(4.0, 1, 1.0, 0.0) == pytest.approx(10.0)
    assert competitive_rhs(0.0, 2, 1.0, 0.0) == pytest.approx(1.0)
    grid = competitive_rhs(3.0, 8, 2.0, 1.0, CompetitiveVariant.GRID)
    arbitrary = competitive_rhs(3.0, 8, 2.0, 1.0, CompetitiveVariant.ARBITRARY)
    assert arbitrary > grid
    with pytest.raises(ParameterError):
        competitive_rhs(-1.0, 1, 1.0, 0.0)


def test_bounds_report():
    report = bounds_report(120, 20, 20, 2.5, 1.0, opt=10.0)
    assert report.M == pytest.approx(7.5)
    assert report.competitive_ratio_grid == pytest.approx(22.4)
    assert report.to_dict()['competitive_ratio_grid'] == report.competitive_ratio_grid
    assert report.upper_bound == pytest.approx(upper_bound(120, 20, 20, 2.5, 1.0))
    assert report.special_case_bounds.SRTR is None
    assert bounds_report(10, 2, 1, 2.0, 0.0).competitive_rhs_grid is None


def test_audit_is_tight_on_a_path():
    run = explore(make_strip(7), 1, 1.0, 0.0)
    audit = audit_rewards(run)
    assert audit.ok
    assert audit.lhs == pytest.approx(6.0)
    assert audit.total == pytest.approx(6.0)
    assert audit.rhs == pytest.approx(6.0)
    assert run.ledger.by_kind(EdgeKind.RIB) == 0


def test_audit_rejects_edge_over_capacity():
    run = explore(make_strip(7), 1, 1.0, 0.0)
    assert all(e.reward_collected <= e.capacity for e in run.ledger.edges.values())
    first, second = list(run.ledger.edges.values())[:2]
    first.forward_collections, second.forward_collections = 2, 0
    audit = audit_rewards(run)
    assert audit.total == pytest.approx(audit.rhs)
    assert not audit.ok


def test_audit_single_cell():
    world = GridRoi(frozenset({(0, 0)}), Direction.N, 0.0, (0, 0))
    audit = audit_rewards(explore(world, 2, 2.0, 1.0))
    assert (audit.lhs, audit.total, audit.rhs) == (0.0, 0.0, 0.0)
    assert audit.ok


@pytest.mark.parametrize('seed, R', [(31, 1), (32, 4), (33, 20)])
def test_audit_on_random_runs(seed, R):
    world = generate_random_roi(120, seed, S_p=1.0)
    run = explore(world, R, 2.5, 1.0)
    audit = audit_rewards(run)
    assert audit.ok


def test_brute_force_square(two_by_two):
    assert brute_force_opt(two_by_two, 1, 1.0, 0.0) == pytest.approx(4.0)
    two = brute_force_opt(two_by_two, 2, 1.0, 0.0)
    assert two == pytest.approx(2 + math.sqrt(2))
    assert robot_scaling_holds(two, 4.0, 2)


def test_brute_force_small_cases():
    assert brute_force_opt(make_strip(3), 1, 1.0, 0.0) == pytest.approx(4.0)
    assert brute_force_opt(make_strip(1), 2, 2.0, 1.0) == 0.0
    with pytest.raises(SearchLimitError):
        brute_force_opt(make_strip(9), 1, 1.0, 0.0)
    with pytest.raises(SearchLimitError):
        brute_force_opt(make_strip(3), 3, 1.0, 0.0)


def test_competitive_ratio_holds_on_square(two_by_two):
    alg = explore(two_by_two, 1, 1.0, 0.0).alg_time
    opt = brute_force_opt(two_by_two, 1, 1.0, 0.0)
    assert alg <= competitive_rhs(opt, 1, 1.0, 0.0)


def test_lawnmower_on_strip():
    # one pass down the middle of the strip senses both end cells
    assert lawnmower_lower_bound(make_strip(10), 1, 1.0, 0.0) == pytest.approx(7.0)
    assert lawnmower_lower_bound(make_strip(10), 2, 1.0, 0.0) == pytest.approx(2.0)


def test_lawnmower_on_square():
    square = GridRoi(frozenset((x, y) for x in range(3) for y in range(3)), Direction.N, 0.0, (0, 0))
    assert lawnmower_lower_bound(square, 1, 1.0, 0.0) == pytest.approx(2.0)
    assert lawnmower_lower_bound(square, 2, 1.0, 0.0) == pytest.approx(1.0)
    # a robot in the middle of a one-column strip senses all three cells
    assert lawnmower_lower_bound(square, 3, 1.0, 0.0) == 0.0


def test_lawnmower_uses_crosswise_moves():
    # drift to the north: east-west moves take 1/sqrt(3), the pass needs 7 of them
    strip = make_strip(10, S_p=1.0, direction=Direction.N)
    assert lawnmower_lower_bound(strip, 1, 2.0, 1.0) == pytest.approx(7 / math.sqrt(3))


@pytest.mark.parametrize('R', [1, 2, 4])
def test_lawnmower_below_sparse_roi_run(R):
    world = generate_random_roi(30, 1719505092614187556, S_p=1.0)
    run = explore(world, R, 2.5, 1.0)
    assert lawnmower_lower_bound(world, R, 2.5, 1.0) <= run.alg_time
