import pytest
from hypothesis import given, settings, strategies as st

from core.errors import ParameterError
from core.grid_world import (enumerate_free_polyominoes, generate_random_roi, load_scenario,
                             save_scenario, sense_neighbors)
from core.models import Direction, GridRoi, reachable_cells


def test_single_cell_roi():
    roi = generate_random_roi(1, 7)
    assert roi.cells == frozenset({(0, 0)})
    assert roi.start_cell == (0, 0)


def test_same_seed_same_roi():
    a = generate_random_roi(80, 12345)
    b = generate_random_roi(80, 12345)
    assert a == b


def test_rejects_empty_roi():
    with pytest.raises(ParameterError):
        generate_random_roi(0, 1)


@settings(max_examples=25, deadline=None)
@given(C=st.integers(min_value=1, max_value=150), seed=st.integers(min_value=0, max_value=2**64 - 1))
def test_random_roi_is_connected(C, seed):
    roi = generate_random_roi(C, seed)
    assert roi.C == C
    assert reachable_cells(roi.cells, roi.start_cell) == roi.cells


def test_sense_neighbors(two_by_two):
    flags = sense_neighbors((0, 0), two_by_two)
    assert flags.north and flags.east
    assert not flags.south and not flags.west
    assert flags.get(Direction.E)


def test_sense_outside_roi(two_by_two):
    with pytest.raises(ParameterError):
        sense_neighbors((5, 5), two_by_two)


def test_disconnected_roi_rejected():
    with pytest.raises(ParameterError):
        GridRoi(frozenset({(0, 0), (2, 0)}), Direction.N, 0.0, (0, 0))


def test_scenario_file_round_trip(tmp_path):
    roi = generate_random_roi(30, 4, S_p=0.5)
    path = save_scenario(roi, tmp_path / 'maps' / 'roi.json')
    assert load_scenario(path) == roi


def test_broken_scenario_file(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"cells": [[0, 0]', encoding='utf-8')
    with pytest.raises(ParameterError):
        load_scenario(path)


def test_free_polyomino_counts():
    shapes = enumerate_free_polyominoes(6)
    counts = [sum(1 for s in shapes if len(s) == n) for n in range(1, 7)]
    assert counts == [1, 1, 2, 5, 12, 35]
    assert all(reachable_cells(s, min(s)) == s for s in shapes)
