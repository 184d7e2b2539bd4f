"""
Ground-truth grid environment: random ROI generation, perfect neighbor
sensing and scenario files.
"""

import json
from pathlib import Path
from typing import FrozenSet, List, Set, Tuple, Union

import numpy as np

from core.errors import ParameterError
from core.models import TIE_BREAK_ORDER, Cell, Direction, GridRoi, NeighborFlags, four_neighbors

SEED_MASK = (1 << 64) - 1


def generate_random_roi(C: int, seed: int, S_p: float = 1.0) -> GridRoi:
    """
    Grow a random 4-connected ROI by frontier growth from (0, 0).

    Args:
        C: Number of cells
        seed: 64-bit seed; the same (C, seed) always yields the same ROI
        S_p: Translation speed assigned to the ROI

    Returns:
        GridRoi with exactly C cells rooted at (0, 0)
    """
    if C < 1:
        raise ParameterError(f"An ROI needs at least one cell, got C={C}")

    rng = np.random.default_rng(int(seed) & SEED_MASK)
    translation_dir = TIE_BREAK_ORDER[int(rng.integers(len(TIE_BREAK_ORDER)))]

    start: Cell = (0, 0)
    cells: Set[Cell] = {start}
    frontier: List[Cell] = []
    in_frontier: Set[Cell] = set()

    def extend_frontier(cell: Cell) -> None:
        for neighbor in four_neighbors(cell):
            if neighbor not in cells and neighbor not in in_frontier:
                frontier.append(neighbor)
                in_frontier.add(neighbor)

    extend_frontier(start)
    while len(cells) < C:
        index = int(rng.integers(len(frontier)))
        # swap-pop keeps the frontier order a pure function of the draws
        frontier[index], frontier[-1] = frontier[-1], frontier[index]
        chosen = frontier.pop()
        in_frontier.discard(chosen)
        cells.add(chosen)
        extend_frontier(chosen)

    return GridRoi(frozenset(cells), translation_dir, S_p, start)


def sense_neighbors(cell: Cell, roi: GridRoi) -> NeighborFlags:
    """
    Perfect sensor: ROI membership of the four neighbors of ``cell``.

    Args:
        cell: A cell of the ROI
        roi: Ground-truth ROI

    Returns:
        NeighborFlags in (N, S, E, W) order
    """
    if cell not in roi.cells:
        raise ParameterError(f"Cell {cell} is outside the ROI")
    return NeighborFlags(
        north=Direction.N.step(cell) in roi.cells,
        south=Direction.S.step(cell) in roi.cells,
        east=Direction.E.step(cell) in roi.cells,
        west=Direction.W.step(cell) in roi.cells
    )


def load_scenario(path: Union[str, Path]) -> GridRoi:
    """
    Load a fixed map from a scenario file.

    Args:
        path: JSON file with cells, translation_dir, S_p and start_cell

    Returns:
        GridRoi described by the file
    """
    with open(path, 'r', encoding='utf-8') as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ParameterError(f"Scenario file {path} is not valid JSON: {e}") from e
    return GridRoi.from_dict(data)


def save_scenario(roi: GridRoi, path: Union[str, Path]) -> str:
    """
    Save an ROI as a scenario file.

    Args:
        roi: ROI to save
        path: Output path

    Returns:
        Path to the saved file
    """
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(json.dumps(roi.to_dict(), sort_keys=True, indent=2), encoding='utf-8')
    return str(output)


def _normalize(cells) -> Tuple[Cell, ...]:
    xmin = min(c[0] for c in cells)
    ymin = min(c[1] for c in cells)
    return tuple(sorted((x - xmin, y - ymin) for x, y in cells))


def _canonical(cells) -> Tuple[Cell, ...]:
    """Smallest normalized form over the eight rotations and reflections."""
    forms = []
    current = list(cells)
    for _ in range(4):
        current = [(-y, x) for x, y in current]
        forms.append(_normalize(current))
        forms.append(_normalize([(-x, y) for x, y in current]))
    return min(forms)


def enumerate_free_polyominoes(max_cells: int) -> List[FrozenSet[Cell]]:
    """
    All 4-connected cell sets of up to ``max_cells`` cells, up to symmetry.

    Args:
        max_cells: Largest size to enumerate

    Returns:
        Shapes ordered by size, then by canonical form
    """
    if max_cells < 1:
        raise ParameterError(f"max_cells must be at least 1, got {max_cells}")
    layer = {((0, 0),)}
    shapes: List[FrozenSet[Cell]] = [frozenset(((0, 0),))]
    for _ in range(max_cells - 1):
        grown = set()
        for shape in layer:
            occupied = set(shape)
            for cell in shape:
                for neighbor in four_neighbors(cell):
                    if neighbor not in occupied:
                        grown.add(_canonical(occupied | {neighbor}))
        layer = grown
        shapes.extend(frozenset(s) for s in sorted(layer))
    return shapes
