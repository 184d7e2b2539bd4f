"""
Bound evaluation and run auditing.

Closed-form upper/lower bounds and competitive-ratio right sides, the
reward replay used to audit a finished run, an exact makespan oracle for
tiny instances and the lawn-mower baseline.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from core.errors import AuditError, ParameterError, SearchLimitError
from core.exploration_tree import ExplorationTree
from core.kinematics import check_speeds, relative_travel_time, traversal_time
from core.models import (AuditResult, BoundsReport, Direction, ExplorationRun, GridRoi,
                         SpecialCaseBounds)

logger = logging.getLogger(__name__)

BOUND_SLACK = 1e-9
BRUTE_FORCE_MAX_CELLS = 8
BRUTE_FORCE_MAX_ROBOTS = 2
SENSING_STRIDE = 3


class CompetitiveVariant(Enum):
    GRID = 'grid'
    ARBITRARY = 'arbitrary'


class EdgeKind(Enum):
    RIB = 'rib'
    BACKBONE = 'backbone'


def floor_log2(R: int) -> int:
    if int(R) != R or R < 1:
        raise ParameterError(f"Robot count must be a positive integer, got {R}")
    return int(R).bit_length() - 1


def reward_layers(R: int) -> int:
    """Reward functions stacked on each backbone edge."""
    return 1 + floor_log2(R)


def relative_speed_factor(R: int, S_r: float, S_p: float) -> float:
    """M = (S_r - S_p)(1 + floor(log2 R))."""
    check_speeds(S_r, S_p)
    return (S_r - S_p) * reward_layers(R)


def upper_bound(C: int, d_max: int, R: int, S_r: float, S_p: float) -> float:
    """
    Worst-case exploration time of the recursive DFS.

    Returns:
        2(C + d_max floor(log2 R)) / ((S_r - S_p)(1 + floor(log2 R)))
    """
    if C < 1:
        raise ParameterError(f"C must be at least 1, got {C}")
    if not 0 <= d_max <= C - 1:
        raise ParameterError(f"d_max must lie in [0, C-1], got {d_max} for C={C}")
    return 2 * (C + d_max * floor_log2(R)) / relative_speed_factor(R, S_r, S_p)


def special_case_bounds(C: int, d_max: int, R: int, S_r: float, S_p: float) -> SpecialCaseBounds:
    """
    Upper bounds of the special cases; cases that do not apply are None.

    MRSR is always evaluated as the static multi-robot bound. The
    single-robot cases need R = 1, and SRSR also needs a static ROI.
    """
    check_speeds(S_r, S_p)
    single = R == 1
    return SpecialCaseBounds(
        MRSR=upper_bound(C, d_max, R, S_r, 0.0),
        SRTR=2 * C / (S_r - S_p) if single else None,
        SRTR_tight=2 * S_r * C / ((S_r + S_p) * (S_r - S_p)) if single else None,
        SRSR=2 * C / S_r if single and S_p == 0 else None
    )


def special_case_bound(case: str, C: int, d_max: int, R: int, S_r: float, S_p: float) -> float:
    """One special-case bound; raises when the parameters do not fit the case."""
    bounds = special_case_bounds(C, d_max, R, S_r, S_p).to_dict()
    if case not in bounds:
        raise ParameterError(f"Unknown special case: {case}")
    if bounds[case] is None:
        raise ParameterError(f"Case {case} does not apply to R={R}, S_p={S_p}")
    return bounds[case]


def lower_bound_grid(C: int, R: int, S_r: float, S_p: float) -> float:
    """(C - 1) / ((S_r + S_p) R): every other cell must be reached by someone."""
    if C < 1:
        raise ParameterError(f"C must be at least 1, got {C}")
    floor_log2(R)
    check_speeds(S_r, S_p)
    return (C - 1) / ((S_r + S_p) * R)


def competitive_ratio_grid(R: int, S_r: float, S_p: float) -> float:
    """Multiplicative factor of the grid competitive ratio."""
    return 2 * (S_r + S_p) * (R + floor_log2(R)) / relative_speed_factor(R, S_r, S_p)


def competitive_rhs(opt: float, R: int, S_r: float, S_p: float,
                    variant: CompetitiveVariant = CompetitiveVariant.GRID) -> float:
    """
    Right side of the competitive-ratio guarantee for a given OPT.

    Args:
        opt: Optimal exploration time
        R: Number of robots
        S_r, S_p: Robot and ROI speeds
        variant: GRID for grid ROIs, ARBITRARY for fat polygons

    Returns:
        Upper limit on the recursive DFS time
    """
    if opt < 0:
        raise ParameterError(f"OPT must be non-negative, got {opt}")
    M = relative_speed_factor(R, S_r, S_p)
    k = floor_log2(R)
    if CompetitiveVariant(variant) is CompetitiveVariant.GRID:
        return 2 * (S_r + S_p) * (R + k) / M * opt + 2 / M
    return 2 * (S_r + S_p) * (18 * R + k) / M * opt + 48 / M


def bounds_report(C: int, d_max: int, R: int, S_r: float, S_p: float,
                  opt: Optional[float] = None) -> BoundsReport:
    """Evaluate every closed-form bound for one parameter set."""
    return BoundsReport(
        upper_bound=upper_bound(C, d_max, R, S_r, S_p),
        lower_bound_grid=lower_bound_grid(C, R, S_r, S_p),
        competitive_rhs_grid=None if opt is None else competitive_rhs(opt, R, S_r, S_p, CompetitiveVariant.GRID),
        competitive_rhs_arbitrary=None if opt is None else competitive_rhs(
            opt, R, S_r, S_p, CompetitiveVariant.ARBITRARY),
        special_case_bounds=special_case_bounds(C, d_max, R, S_r, S_p),
        M=relative_speed_factor(R, S_r, S_p),
        competitive_ratio_grid=competitive_ratio_grid(R, S_r, S_p)
    )


def robot_scaling_holds(opt_multi: float, opt_single: float, R: int, slack: float = BOUND_SLACK) -> bool:
    """OPT with R robots <= OPT with one robot <= R times OPT with R robots."""
    return opt_multi <= opt_single + slack and opt_single <= R * opt_multi + slack


@dataclass
class EdgeReward:
    """Reward bookkeeping for the edge from a vertex to its parent."""
    edge: int
    kind: EdgeKind
    length: int
    layers: int
    forward_collections: int = 0
    backward_collections: int = 0

    @property
    def collected(self) -> int:
        return self.forward_collections + self.backward_collections

    @property
    def reward_collected(self) -> float:
        return float(self.collected * self.length)

    @property
    def capacity(self) -> int:
        return self.length * (2 if self.kind is EdgeKind.RIB else self.layers)


@dataclass
class RewardLedger:
    edges: Dict[int, EdgeReward] = field(default_factory=dict)
    backbone: List[int] = field(default_factory=list)
    backbone_length: int = 0
    layers: int = 1

    @property
    def total(self) -> float:
        return sum(e.reward_collected for e in self.edges.values())

    def by_kind(self, kind: EdgeKind) -> float:
        return sum(e.reward_collected for e in self.edges.values() if e.kind is kind)


def _new_ledger(tree: ExplorationTree, leaf: int, layers: int) -> RewardLedger:
    decomposition = tree.decompose(leaf=leaf)
    ledger = RewardLedger(backbone=decomposition.backbone,
                          backbone_length=decomposition.backbone_length, layers=layers)
    on_backbone = decomposition.backbone_set
    for vertex in tree.vertices.values():
        if vertex.parent is None:
            continue
        kind = EdgeKind.BACKBONE if vertex.id in on_backbone else EdgeKind.RIB
        ledger.edges[vertex.id] = EdgeReward(vertex.id, kind, vertex.edge_to_parent_length, layers)
    return ledger


def replay_rewards(run: ExplorationRun) -> RewardLedger:
    """
    Replay a run's edge traversals against the backbone ending at the last leaf.

    Rib edges pay once forward and once backward, to one robot per group.
    The first group to enter a backbone edge collects one layer per robot
    (up to the layer count); every later traversal collects one remaining
    layer.
    """
    tree = run.tree
    ledger = _new_ledger(tree, run.last_leaf, reward_layers(run.params.R))
    for move in run.moves:
        if tree[move.target].parent == move.source:
            edge, forward = ledger.edges[move.target], True
        elif tree[move.source].parent == move.target:
            edge, forward = ledger.edges[move.source], False
        else:
            raise AuditError(f"Move {move.source}->{move.target} does not follow a tree edge")

        if edge.kind is EdgeKind.RIB:
            if forward and edge.forward_collections == 0:
                edge.forward_collections = 1
            elif not forward and edge.backward_collections == 0:
                edge.backward_collections = 1
            continue

        remaining = edge.layers - edge.collected
        if remaining <= 0:
            continue
        if forward and edge.forward_collections == 0 and edge.backward_collections == 0:
            edge.forward_collections = min(len(move.robots), remaining)
        elif forward:
            edge.forward_collections += 1
        else:
            edge.backward_collections += 1
    return ledger


def audit_rewards(run: ExplorationRun, slack: float = BOUND_SLACK) -> AuditResult:
    """
    Check (S_r - S_p)(1 + floor(log2 R)) t_last <= collected <= 2(L - b) + (1 + floor(log2 R)) b.

    b is the length of the replay backbone. No edge may collect more than
    its capacity.
    """
    ledger = run.ledger if run.ledger is not None else replay_rewards(run)
    params = run.params
    lhs = relative_speed_factor(params.R, params.S_r, params.S_p) * run.t_last
    total = ledger.total
    b = ledger.backbone_length
    rhs = 2 * (run.L - b) + ledger.layers * b
    overfull = sorted(e.edge for e in ledger.edges.values() if e.reward_collected > e.capacity)
    ok = lhs <= total + slack and total <= rhs + slack and not overfull
    if not ok:
        logger.debug(f"Reward audit failed: lhs={lhs}, total={total}, rhs={rhs}, over capacity={overfull}")
    return AuditResult(lhs=lhs, total=total, rhs=rhs, backbone_length=b, ok=ok)


def brute_force_opt(world: GridRoi, R: int, S_r: float, S_p: float,
                    max_cells: int = BRUTE_FORCE_MAX_CELLS,
                    max_robots: int = BRUTE_FORCE_MAX_ROBOTS) -> float:
    """
    Exact optimal makespan for tiny instances.

    Every robot starts and ends at the start cell; hops between any two
    cells cost the straight-line relative travel time (robots may fly
    outside the ROI). Held-Karp over subsets gives the best single tour of
    every cell subset; with two robots the cells are split every way.

    Args:
        world: Ground-truth ROI (at most ``max_cells`` cells)
        R: Number of robots (at most ``max_robots``)
        S_r, S_p: Robot and ROI speeds

    Returns:
        Optimal exploration time
    """
    floor_log2(R)
    check_speeds(S_r, S_p)
    if world.C > max_cells or R > max_robots:
        raise SearchLimitError(f"Brute force limited to C <= {max_cells}, R <= {max_robots}; "
                               f"got C={world.C}, R={R}")

    start = world.start_cell
    others = sorted(c for c in world.cells if c != start)
    n = len(others)
    if n == 0:
        return 0.0

    def hop(a, b) -> float:
        return relative_travel_time(b[0] - a[0], b[1] - a[1], S_r, S_p, world.translation_dir)

    from_start = [hop(start, c) for c in others]
    to_start = [hop(c, start) for c in others]
    between = [[hop(a, b) for b in others] for a in others]

    full = (1 << n) - 1
    best_path = [[math.inf] * n for _ in range(full + 1)]
    for j in range(n):
        best_path[1 << j][j] = from_start[j]
    for mask in range(1, full + 1):
        for j in range(n):
            current = best_path[mask][j]
            if current == math.inf:
                continue
            for k in range(n):
                if mask & (1 << k):
                    continue
                candidate = current + between[j][k]
                if candidate < best_path[mask | (1 << k)][k]:
                    best_path[mask | (1 << k)][k] = candidate

    tour = [0.0] * (full + 1)
    for mask in range(1, full + 1):
        tour[mask] = min(best_path[mask][j] + to_start[j] for j in range(n) if mask & (1 << j))

    if R == 1:
        return tour[full]
    return min(max(tour[mask], tour[full ^ mask]) for mask in range(full + 1))


def _pass_centers(extent: int) -> List[int]:
    """Rows a sweep drives along; each one also senses the rows on either side."""
    passes = math.ceil(extent / SENSING_STRIDE)
    return [max(0, min(SENSING_STRIDE * k + 1, extent - 2)) for k in range(passes)]


def _row_sweep_time(rows: int, row_cells: int, along: Tuple[Direction, Direction],
                    across: Tuple[Direction, Direction], S_r: float, S_p: float,
                    translation_dir: Direction) -> float:
    """
    Boustrophedon passes over ``rows`` rows of ``row_cells`` cells.

    Passes alternate direction, so the cheaper direction gets the extra
    pass when their number is odd. Hops between passes all go one way,
    the cheaper of the two ``across`` directions.
    """
    first, second = sorted(traversal_time(d, S_r, S_p, translation_dir) for d in along)
    hop = min(traversal_time(d, S_r, S_p, translation_dir) for d in across)
    centers = _pass_centers(rows)
    passes = len(centers)
    sweep = (row_cells - 1) * (first * math.ceil(passes / 2) + second * (passes // 2))
    return sweep + (centers[-1] - centers[0]) * hop


def _strip_time(columns: int, height: int, S_r: float, S_p: float, translation_dir: Direction) -> float:
    horizontal = (Direction.E, Direction.W)
    vertical = (Direction.N, Direction.S)
    along_x = _row_sweep_time(height, columns, horizontal, vertical, S_r, S_p, translation_dir)
    along_y = _row_sweep_time(columns, height, vertical, horizontal, S_r, S_p, translation_dir)
    return min(along_x, along_y)


def lawnmower_lower_bound(world: GridRoi, R: int, S_r: float, S_p: float) -> float:
    """
    Makespan of R robots lawn-mowing the ROI's bounding box.

    The box is split into R strips along its width and, separately, along
    its height; the smaller makespan of the two is returned. A pass along
    a row senses the rows on both sides, so passes are three rows apart,
    and time is charged per move between cells. Transit from the start
    cell is ignored.
    """
    floor_log2(R)
    check_speeds(S_r, S_p)
    box = world.bounding_box
    direction = world.translation_dir

    split_x = _strip_time(math.ceil(box.width / R), box.height, S_r, S_p, direction)
    split_y = _strip_time(box.width, math.ceil(box.height / R), S_r, S_p, direction)
    return min(split_x, split_y)
