"""
Multi-robot recursive DFS over an unknown, translating grid ROI.

The simulation is event driven: each robot group has one pending arrival in
a time-ordered queue, and every arrival runs one step of the DFS rule.
Groups that arrive at the same vertex at the same time merge first.
"""

import heapq
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Protocol, Tuple, Union

from core.errors import ParameterError, SearchLimitError, TerminationError, TreeContractError
from core.exploration_tree import ExplorationTree
from core.grid_world import sense_neighbors
from core.kinematics import check_speeds, direction_between, traversal_time
from core.models import (TIE_BREAK_ORDER, BoundingBox, Cell, ExplorationParams, ExplorationRun,
                         GridRoi, Move, NeighborFlags, TrajectoryPoint, VertexState)
from utils.logging_utils import setup_logger

EVENT_BUDGET_FACTOR = 100
# arrival times closer than this are the same event
TIME_TOLERANCE = 1e-9


class NeighborSensor(Protocol):
    """What the explorer needs from a sensor."""

    def sense(self, cell: Cell) -> NeighborFlags:
        ...

    def on_visit(self, cell: Cell) -> None:
        ...


class PerfectSensor:
    """Noiseless neighbor sensor backed by the ground-truth ROI."""

    def __init__(self, world: GridRoi):
        self.world = world

    def sense(self, cell: Cell) -> NeighborFlags:
        return sense_neighbors(cell, self.world)

    def on_visit(self, cell: Cell) -> None:
        pass

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': 'perfect'}


@dataclass
class RobotGroup:
    """Robots moving together; ``location`` is the vertex of the pending arrival."""
    group_id: int
    robot_ids: Tuple[int, ...]
    location: int

    def to_dict(self) -> Dict[str, Any]:
        return {'group_id': self.group_id, 'robot_ids': list(self.robot_ids), 'location': self.location}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RobotGroup':
        return cls(int(data['group_id']), tuple(int(r) for r in data['robot_ids']), int(data['location']))


class Explorer:
    """
    Steppable simulation of the recursive DFS for R robots.

    The tree is shared by all groups (robots communicate at all times), so
    state changes made by one group are visible to the next step.
    """

    def __init__(self, world: GridRoi, R: int, S_r: float, S_p: float,
                 sensor: Optional[NeighborSensor] = None,
                 logs_path: Optional[Union[str, Path]] = None):
        """
        Initialize an exploration with all robots at the start cell.

        Args:
            world: Ground-truth ROI
            R: Number of robots
            S_r: Robot speed
            S_p: ROI speed
            sensor: Neighbor sensor (perfect sensing when None)
            logs_path: Directory for the explorer log file
        """
        if int(R) != R or R < 1:
            raise ParameterError(f"Need at least one robot, got R={R}")
        check_speeds(S_r, S_p)

        self.world = world
        self.params = ExplorationParams(int(R), float(S_r), float(S_p), world.C)
        self.sensor = sensor if sensor is not None else PerfectSensor(world)
        self.logger = setup_logger(self.__class__.__name__, logs_path)

        self.tree = ExplorationTree(world.start_cell)
        self.clock = 0.0
        self.groups: Dict[int, RobotGroup] = {0: RobotGroup(0, tuple(range(self.params.R)), self.tree.root)}
        self._queue: List[Tuple[float, int]] = [(0.0, 0)]
        self._next_group_id = 1
        self.trajectories: Dict[int, List[TrajectoryPoint]] = {r: [] for r in range(self.params.R)}
        self.moves: List[Move] = []
        self.finish_times: Dict[int, float] = {}
        self.t_last = 0.0
        self.last_leaf = self.tree.root
        self.event_count = 0
        self.max_events = EVENT_BUDGET_FACTOR * world.C * self.params.R

    @property
    def finished(self) -> bool:
        return not self._queue

    def advance(self, max_batches: Optional[int] = None) -> bool:
        """
        Process arrival batches (all arrivals within TIME_TOLERANCE of the earliest time).

        Args:
            max_batches: Stop after this many batches; run to completion when None

        Returns:
            True once every robot is back at the root
        """
        processed = 0
        while self._queue and (max_batches is None or processed < max_batches):
            self._process_batch()
            processed += 1
        return self.finished

    def _process_batch(self) -> None:
        time = self._queue[0][0]
        arrived = []
        while self._queue and self._queue[0][0] - time <= TIME_TOLERANCE:
            arrived.append(heapq.heappop(self._queue)[1])
        self.clock = time
        self.event_count += len(arrived)
        if self.event_count > self.max_events:
            raise TerminationError(
                f"Event budget {self.max_events} exceeded at t={time} (C={self.world.C}, R={self.params.R})")

        # merge co-located groups into the lowest id
        by_location: Dict[int, List[int]] = {}
        for group_id in sorted(arrived):
            by_location.setdefault(self.groups[group_id].location, []).append(group_id)
        survivors = []
        for group_ids in by_location.values():
            keeper = self.groups[group_ids[0]]
            for other_id in group_ids[1:]:
                keeper.robot_ids = tuple(sorted(keeper.robot_ids + self.groups.pop(other_id).robot_ids))
            survivors.append(keeper.group_id)

        for group_id in sorted(survivors):
            self.step(self.groups[group_id])

    def _candidates(self, vertex_id: int) -> List[int]:
        children = self.tree[vertex_id].children
        open_children = [c for c in children if self.tree[c].state is not VertexState.EXPLORED]
        return sorted(open_children, key=lambda c: (self.tree[c].state is not VertexState.UNEXPLORED,
                                                    children.index(c)))

    def step(self, group: RobotGroup) -> List[Tuple[int, int]]:
        """
        Run one DFS step for a group that just arrived at ``group.location``.

        Args:
            group: The arriving group

        Returns:
            (group id, next vertex) assignments; empty when the group finished
        """
        vertex_id = group.location
        vertex = self.tree[vertex_id]
        for robot in group.robot_ids:
            self.trajectories[robot].append(TrajectoryPoint(vertex_id, self.clock))

        if vertex.state is VertexState.UNEXPLORED:
            if not vertex.is_dummy:
                self.sensor.on_visit(vertex.cell)
                flags = self.sensor.sense(vertex.cell)
                new_cells = [d.step(vertex.cell) for d in TIE_BREAK_ORDER
                             if flags.get(d) and not self.tree.contains_cell(d.step(vertex.cell))]
                self.tree.attach_children(vertex_id, new_cells)
            if self.tree.is_leaf(vertex_id):
                self.tree.set_state(vertex_id, VertexState.EXPLORED)
                self._propagate_explored(vertex_id)
            else:
                self.tree.set_state(vertex_id, VertexState.UNDER_EXPLORATION)

        if self.tree.is_leaf(vertex_id) and not vertex.is_dummy:
            if self.clock > self.t_last + TIME_TOLERANCE:
                self.t_last, self.last_leaf = self.clock, vertex_id
            elif self.clock - self.t_last <= TIME_TOLERANCE and self.tree.is_leaf(self.last_leaf):
                self.last_leaf = min(self.last_leaf, vertex_id)

        candidates = self._candidates(vertex_id)
        if not candidates and vertex.state is not VertexState.EXPLORED:
            if not self.tree.children_explored(vertex_id):
                raise TreeContractError(f"Vertex {vertex_id} has open children but no candidates")
            self.tree.set_state(vertex_id, VertexState.EXPLORED)
            self._propagate_explored(vertex_id)

        if candidates:
            robots = group.robot_ids
            if len(candidates) >= 2 and len(robots) >= 2:
                half = math.ceil(len(robots) / 2)
                split = RobotGroup(self._next_group_id, robots[half:], vertex_id)
                self._next_group_id += 1
                self.groups[split.group_id] = split
                group.robot_ids = robots[:half]
                self._move(group, candidates[0])
                self._move(split, candidates[1])
                return [(group.group_id, candidates[0]), (split.group_id, candidates[1])]
            self._move(group, candidates[0])
            return [(group.group_id, candidates[0])]

        if vertex.parent is None:
            for robot in group.robot_ids:
                self.finish_times[robot] = self.clock
            del self.groups[group.group_id]
            return []

        self._move(group, vertex.parent)
        return [(group.group_id, vertex.parent)]

    def _propagate_explored(self, vertex_id: int) -> None:
        parent_id = self.tree[vertex_id].parent
        while parent_id is not None:
            parent = self.tree[parent_id]
            if parent.state is not VertexState.UNDER_EXPLORATION or not self.tree.children_explored(parent_id):
                break
            self.tree.set_state(parent_id, VertexState.EXPLORED)
            parent_id = parent.parent

    def edge_time(self, source: int, target: int) -> float:
        """Traversal time of a tree edge; edges into or out of dummies cost 0."""
        a = self.tree.position(source)
        b = self.tree.position(target)
        if a == b:
            return 0.0
        return traversal_time(direction_between(a, b), self.params.S_r, self.params.S_p,
                              self.world.translation_dir)

    def _move(self, group: RobotGroup, target: int) -> None:
        source = group.location
        if self.tree[source].state is VertexState.UNEXPLORED:
            raise TreeContractError(f"Group {group.group_id} leaving unvisited vertex {source}")
        arrive = self.clock + self.edge_time(source, target)
        self.moves.append(Move(group.group_id, group.robot_ids, source, target, self.clock, arrive))
        group.location = target
        heapq.heappush(self._queue, (arrive, group.group_id))

    def to_run(self) -> ExplorationRun:
        """
        Package a finished exploration.

        Returns:
            ExplorationRun with the reward ledger filled
        """
        from core.analysis import replay_rewards

        if not self.finished:
            raise TreeContractError("Exploration has not terminated yet")
        if self.tree[self.tree.root].state is not VertexState.EXPLORED:
            raise TreeContractError("Root is not explored at termination")

        decomposition = self.tree.decompose()
        run = ExplorationRun(
            alg_time=max(self.finish_times.values(), default=0.0),
            t_last=self.t_last,
            trajectories={r: list(points) for r, points in self.trajectories.items()},
            tree=self.tree,
            params=self.params,
            moves=list(self.moves),
            finish_times=dict(self.finish_times),
            event_count=self.event_count,
            d_max=decomposition.d_max,
            L=self.tree.L,
            last_leaf=self.last_leaf
        )
        run.ledger = replay_rewards(run)
        return run

    def to_state(self) -> Dict[str, Any]:
        """Serialize the simulation between batches."""
        return {
            'world': self.world.to_dict(),
            'params': self.params.to_dict(),
            'tree': self.tree.to_dict(),
            'clock': self.clock,
            'groups': [self.groups[g].to_dict() for g in sorted(self.groups)],
            'queue': [[t, g] for t, g in sorted(self._queue)],
            'next_group_id': self._next_group_id,
            'trajectories': {str(r): [[p.vertex, p.time] for p in points]
                             for r, points in sorted(self.trajectories.items())},
            'moves': [m.to_dict() for m in self.moves],
            'finish_times': {str(r): t for r, t in sorted(self.finish_times.items())},
            't_last': self.t_last,
            'last_leaf': self.last_leaf,
            'event_count': self.event_count
        }

    @classmethod
    def from_state(cls, state: Dict[str, Any], sensor: Optional[NeighborSensor] = None,
                   logs_path: Optional[Union[str, Path]] = None) -> 'Explorer':
        """Rebuild an explorer from ``to_state`` output."""
        world = GridRoi.from_dict(state['world'])
        params = state['params']
        explorer = cls(world, int(params['R']), float(params['S_r']), float(params['S_p']),
                       sensor=sensor, logs_path=logs_path)
        explorer.tree = ExplorationTree.from_dict(state['tree'])
        explorer.clock = float(state['clock'])
        explorer.groups = {g.group_id: g for g in (RobotGroup.from_dict(d) for d in state['groups'])}
        explorer._queue = [(float(t), int(g)) for t, g in state['queue']]
        heapq.heapify(explorer._queue)
        if any(g not in explorer.groups for _, g in explorer._queue):
            raise TreeContractError("Queued arrival for an unknown group")
        explorer._next_group_id = int(state['next_group_id'])
        explorer.trajectories = {int(r): [TrajectoryPoint(int(v), float(t)) for v, t in points]
                                 for r, points in state['trajectories'].items()}
        explorer.moves = [Move.from_dict(m) for m in state['moves']]
        explorer.finish_times = {int(r): float(t) for r, t in state['finish_times'].items()}
        explorer.t_last = float(state['t_last'])
        explorer.last_leaf = int(state['last_leaf'])
        explorer.event_count = int(state['event_count'])
        return explorer


def explore(world: GridRoi, R: int, S_r: float, S_p: float,
            logs_path: Optional[Union[str, Path]] = None) -> ExplorationRun:
    """
    Explore a ground-truth ROI with R robots using the recursive DFS.

    Args:
        world: Ground-truth ROI
        R: Number of robots
        S_r: Robot speed
        S_p: ROI speed

    Returns:
        Completed ExplorationRun
    """
    explorer = Explorer(world, R, S_r, S_p, logs_path=logs_path)
    explorer.advance()
    run = explorer.to_run()
    explorer.logger.debug(f"Explored C={world.C} with R={R}: ALG={run.alg_time:.4f}, "
                          f"events={run.event_count}")
    return run


def sweep_order(box: BoundingBox, start: Cell) -> List[Cell]:
    """Boustrophedon visiting order of a box entered at one of its corners."""
    if tuple(start) not in box.corners:
        raise ParameterError(f"Sweep must start at a corner of {box}, got {start}")
    xs = list(range(box.xmin, box.xmax + 1))
    ys = list(range(box.ymin, box.ymax + 1))
    if start[0] == box.xmax:
        xs.reverse()
    if start[1] == box.ymax:
        ys.reverse()
    order = []
    for row, y in enumerate(ys):
        for x in (xs if row % 2 == 0 else reversed(xs)):
            order.append((x, y))
    return order


def find_roi_sweep(bounding_box: BoundingBox, start: Cell, S_r: float, world: GridRoi,
                   detect: Optional[Callable[[Cell], bool]] = None) -> Tuple[Cell, float]:
    """
    Lawn-mow a bounding box until the ROI is seen.

    Args:
        bounding_box: Box known to intersect the ROI
        start: Corner of the box where the sweep begins
        S_r: Robot speed
        world: Ground-truth ROI
        detect: Classifier for the cell under the robot (ground truth when None)

    Returns:
        (first ROI cell seen, elapsed time)
    """
    if S_r <= 0:
        raise ParameterError(f"Robot speed must be positive, got {S_r}")
    for index, cell in enumerate(sweep_order(bounding_box, start)):
        seen = cell in world.cells if detect is None else detect(cell)
        # a false alarm is dismissed once the robot is over the cell
        if seen and cell in world.cells:
            return cell, index / S_r
    raise SearchLimitError(f"Sweep of {bounding_box} found no ROI cell")
