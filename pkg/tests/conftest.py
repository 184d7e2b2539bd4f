import pytest

from core.models import Direction, GridRoi


def make_strip(length: int, S_p: float = 0.0, direction: Direction = Direction.N) -> GridRoi:
    """Horizontal 1 x length strip started at its west end."""
    return GridRoi(frozenset((x, 0) for x in range(length)), direction, S_p, (0, 0))


@pytest.fixture
def two_by_two() -> GridRoi:
    return GridRoi(frozenset({(0, 0), (1, 0), (1, 1), (0, 1)}), Direction.N, 0.0, (0, 0))


@pytest.fixture
def fork() -> GridRoi:
    return GridRoi(frozenset({(0, 0), (0, 1), (1, 0)}), Direction.E, 0.0, (0, 0))


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    """Run inside a scratch directory so results/ and logs/ stay out of the repo."""
    monkeypatch.chdir(tmp_path)
    return tmp_path
