"""
Core data models for the ROI exploration simulator.
These models provide standardized data structures used throughout the application.
"""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import TYPE_CHECKING, Any, Dict, FrozenSet, Iterator, List, NamedTuple, Optional, Tuple

from core.errors import ParameterError

if TYPE_CHECKING:
    from core.analysis import RewardLedger
    from core.exploration_tree import ExplorationTree

Cell = Tuple[int, int]


class Direction(Enum):
    """Grid directions in the ROI frame; north is +y."""
    N = (0, 1)
    E = (1, 0)
    S = (0, -1)
    W = (-1, 0)

    @property
    def dx(self) -> int:
        return self.value[0]

    @property
    def dy(self) -> int:
        return self.value[1]

    def step(self, cell: Cell) -> Cell:
        """Return the 4-neighbor of ``cell`` in this direction."""
        return (cell[0] + self.dx, cell[1] + self.dy)

    @classmethod
    def parse(cls, value: Any) -> 'Direction':
        if isinstance(value, Direction):
            return value
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ParameterError(f"Unknown direction: {value!r}") from None


# Child ordering used wherever the DFS must break ties.
TIE_BREAK_ORDER: Tuple[Direction, ...] = (Direction.N, Direction.E, Direction.S, Direction.W)


class VertexState(IntEnum):
    """Exploration state of a tree vertex; values only increase."""
    UNEXPLORED = 0
    UNDER_EXPLORATION = 1
    EXPLORED = 2


class BeliefLabel(Enum):
    """Per-cell label of the belief map built from noisy detections."""
    UNKNOWN = 'unknown'
    NON_ROI = 'non_roi'
    ROI_UNEXPLORED = 'roi_unexplored'
    ROI_EXPLORED = 'roi_explored'

    @property
    def is_roi(self) -> bool:
        return self in (BeliefLabel.ROI_UNEXPLORED, BeliefLabel.ROI_EXPLORED)


def four_neighbors(cell: Cell) -> Iterator[Cell]:
    """Yield the 4-neighbors of a cell in tie-break order."""
    for direction in TIE_BREAK_ORDER:
        yield direction.step(cell)


def reachable_cells(cells: FrozenSet[Cell], start: Cell) -> FrozenSet[Cell]:
    """Cells of ``cells`` reachable from ``start`` through 4-adjacency."""
    if start not in cells:
        return frozenset()
    seen = {start}
    queue = deque([start])
    while queue:
        current = queue.popleft()
        for neighbor in four_neighbors(current):
            if neighbor in cells and neighbor not in seen:
                seen.add(neighbor)
                queue.append(neighbor)
    return frozenset(seen)


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive integer cell bounds."""
    xmin: int
    ymin: int
    xmax: int
    ymax: int

    def __post_init__(self):
        if self.xmax < self.xmin or self.ymax < self.ymin:
            raise ParameterError(f"Empty bounding box: {self}")

    @property
    def width(self) -> int:
        return self.xmax - self.xmin + 1

    @property
    def height(self) -> int:
        return self.ymax - self.ymin + 1

    @property
    def corners(self) -> Tuple[Cell, Cell, Cell, Cell]:
        return ((self.xmin, self.ymin), (self.xmax, self.ymin),
                (self.xmin, self.ymax), (self.xmax, self.ymax))

    def contains(self, cell: Cell) -> bool:
        return self.xmin <= cell[0] <= self.xmax and self.ymin <= cell[1] <= self.ymax

    def padded(self, margin: int) -> 'BoundingBox':
        return BoundingBox(self.xmin - margin, self.ymin - margin,
                           self.xmax + margin, self.ymax + margin)

    @classmethod
    def of(cls, cells) -> 'BoundingBox':
        xs = [c[0] for c in cells]
        ys = [c[1] for c in cells]
        return cls(min(xs), min(ys), max(xs), max(ys))


@dataclass(frozen=True)
class GridRoi:
    """
    Ground-truth ROI: a 4-connected set of unit cells in the ROI's co-moving
    frame plus the translation of that frame.
    """
    cells: FrozenSet[Cell]
    translation_dir: Direction
    S_p: float
    start_cell: Cell

    def __post_init__(self):
        object.__setattr__(self, 'cells', frozenset((int(x), int(y)) for x, y in self.cells))
        object.__setattr__(self, 'start_cell', (int(self.start_cell[0]), int(self.start_cell[1])))
        object.__setattr__(self, 'translation_dir', Direction.parse(self.translation_dir))

        if not self.cells:
            raise ParameterError("An ROI needs at least one cell")
        if self.start_cell not in self.cells:
            raise ParameterError(f"Start cell {self.start_cell} is not part of the ROI")
        if self.S_p < 0:
            raise ParameterError(f"ROI speed must be non-negative, got {self.S_p}")
        if len(reachable_cells(self.cells, self.start_cell)) != len(self.cells):
            raise ParameterError("ROI cells are not 4-connected")

    @property
    def C(self) -> int:
        return len(self.cells)

    @property
    def bounding_box(self) -> BoundingBox:
        return BoundingBox.of(self.cells)

    def with_speed(self, S_p: float) -> 'GridRoi':
        return GridRoi(self.cells, self.translation_dir, S_p, self.start_cell)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the scenario document layout."""
        return {
            'cells': [list(c) for c in sorted(self.cells)],
            'translation_dir': self.translation_dir.name,
            'S_p': self.S_p,
            'start_cell': list(self.start_cell)
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GridRoi':
        try:
            return cls(
                cells=frozenset(tuple(c) for c in data['cells']),
                translation_dir=data['translation_dir'],
                S_p=float(data['S_p']),
                start_cell=tuple(data['start_cell'])
            )
        except (KeyError, TypeError) as e:
            raise ParameterError(f"Malformed scenario document: {e}") from e


class NeighborFlags(NamedTuple):
    """ROI membership of the four neighbors of a cell."""
    north: bool
    south: bool
    east: bool
    west: bool

    def get(self, direction: Direction) -> bool:
        return {
            Direction.N: self.north,
            Direction.S: self.south,
            Direction.E: self.east,
            Direction.W: self.west
        }[direction]


class TrajectoryPoint(NamedTuple):
    vertex: int
    time: float


@dataclass(frozen=True)
class Move:
    """One edge traversal by a robot group."""
    group_id: int
    robots: Tuple[int, ...]
    source: int
    target: int
    depart: float
    arrive: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'group_id': self.group_id,
            'robots': list(self.robots),
            'source': self.source,
            'target': self.target,
            'depart': self.depart,
            'arrive': self.arrive
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Move':
        return cls(int(data['group_id']), tuple(int(r) for r in data['robots']),
                   int(data['source']), int(data['target']),
                   float(data['depart']), float(data['arrive']))


@dataclass(frozen=True)
class ExplorationParams:
    R: int
    S_r: float
    S_p: float
    C: int

    def to_dict(self) -> Dict[str, Any]:
        return {'R': self.R, 'S_r': self.S_r, 'S_p': self.S_p, 'C': self.C}


@dataclass
class ExplorationRun:
    """Outcome of one simulated exploration."""
    alg_time: float
    t_last: float
    trajectories: Dict[int, List[TrajectoryPoint]]
    tree: 'ExplorationTree'
    params: ExplorationParams
    moves: List[Move]
    finish_times: Dict[int, float]
    event_count: int
    d_max: int
    L: int
    last_leaf: int
    ledger: Optional['RewardLedger'] = None

    @property
    def visited_cells(self) -> FrozenSet[Cell]:
        return self.tree.cells()


@dataclass(frozen=True)
class SpecialCaseBounds:
    """Special-case upper bounds plus the tightened single-robot translating bound."""
    MRSR: Optional[float]
    SRTR: Optional[float]
    SRTR_tight: Optional[float]
    SRSR: Optional[float]

    def to_dict(self) -> Dict[str, Optional[float]]:
        return {'MRSR': self.MRSR, 'SRTR': self.SRTR,
                'SRTR_tight': self.SRTR_tight, 'SRSR': self.SRSR}


@dataclass(frozen=True)
class BoundsReport:
    """Closed-form bounds evaluated for one parameter set."""
    upper_bound: float
    lower_bound_grid: float
    competitive_rhs_grid: Optional[float]
    competitive_rhs_arbitrary: Optional[float]
    special_case_bounds: SpecialCaseBounds
    M: float
    competitive_ratio_grid: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'upper_bound': self.upper_bound,
            'lower_bound_grid': self.lower_bound_grid,
            'competitive_rhs_grid': self.competitive_rhs_grid,
            'competitive_rhs_arbitrary': self.competitive_rhs_arbitrary,
            'special_case_bounds': self.special_case_bounds.to_dict(),
            'M': self.M,
            'competitive_ratio_grid': self.competitive_ratio_grid
        }


@dataclass(frozen=True)
class AuditResult:
    """Both sides of the reward inequality for one run."""
    lhs: float
    total: float
    rhs: float
    backbone_length: int
    ok: bool


@dataclass(frozen=True)
class ApproximationReport:
    """Outer/inner and inner/best cell-count checks for one polygon."""
    lemma3_ok: bool
    lemma4_ok: bool
    C_out: int
    C_in: int
    C_best: int

    def to_dict(self) -> Dict[str, Any]:
        return {'lemma3_ok': self.lemma3_ok, 'lemma4_ok': self.lemma4_ok,
                'C_out': self.C_out, 'C_in': self.C_in, 'C_best': self.C_best}


@dataclass
class ConfusionCounts:
    """Per-detection confusion counts against ground truth."""
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def record(self, truth: bool, detection: bool) -> None:
        if truth and detection:
            self.tp += 1
        elif truth:
            self.fn += 1
        elif detection:
            self.fp += 1
        else:
            self.tn += 1

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> Dict[str, int]:
        return {'tp': self.tp, 'fp': self.fp, 'tn': self.tn, 'fn': self.fn}


class SweepKind(Enum):
    CELLS = 'cells'
    ROBOTS = 'robots'
    SPEED_RATIO = 'speed_ratio'
    SINGLE = 'single'

    @classmethod
    def parse(cls, value: Any) -> 'SweepKind':
        if isinstance(value, SweepKind):
            return value
        try:
            return cls[str(value).upper().replace('-', '_')]
        except KeyError:
            raise ParameterError(f"Unknown sweep: {value!r}") from None


@dataclass
class ExperimentConfig:
    """One sweep of the simulation protocol."""
    sweep: SweepKind = SweepKind.SINGLE
    cells: int = 120
    robots: int = 20
    speed_ratio: float = 2.5
    translation_speed: float = 1.0
    trials: int = 100
    master_seed: int = 2024
    grid: List[float] = field(default_factory=list)
    output_path: Optional[str] = None
    output_format: str = 'csv'
    workers: int = 1

    def __post_init__(self):
        self.sweep = SweepKind.parse(self.sweep)
        if self.speed_ratio <= 1:
            raise ParameterError(f"Speed ratio must exceed 1, got {self.speed_ratio}")
        if self.trials < 1:
            raise ParameterError(f"Need at least one trial, got {self.trials}")
        if self.output_format not in ('csv', 'json'):
            raise ParameterError(f"Unknown output format: {self.output_format}")

    def points(self) -> List[float]:
        """Sweep points; a SINGLE sweep has exactly one point."""
        if self.sweep is SweepKind.SINGLE or not self.grid:
            return [{SweepKind.CELLS: self.cells,
                     SweepKind.ROBOTS: self.robots,
                     SweepKind.SPEED_RATIO: self.speed_ratio}.get(self.sweep, self.cells)]
        return list(self.grid)

    def point_parameters(self, value: float) -> Tuple[int, int, float]:
        """(C, R, ratio) at a sweep point."""
        cells, robots, ratio = self.cells, self.robots, self.speed_ratio
        if self.sweep is SweepKind.CELLS:
            cells = int(value)
        elif self.sweep is SweepKind.ROBOTS:
            robots = int(value)
        elif self.sweep is SweepKind.SPEED_RATIO:
            ratio = float(value)
            if ratio <= 1:
                raise ParameterError(f"Speed ratio must exceed 1, got {ratio}")
        return cells, robots, ratio
