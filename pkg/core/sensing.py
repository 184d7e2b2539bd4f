"""
Noisy per-cell ROI detection and resumable exploration.

Each sensing event takes several images of a cell and calls it ROI on a
majority vote. Beliefs are sticky: once a cell is believed to be ROI it
stays ROI. Exploration state can be saved between event batches and
resumed later with identical results.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.dfs_explorer import Explorer, PerfectSensor
from core.errors import ParameterError, ResumeStateError, SimulationError
from core.models import (TIE_BREAK_ORDER, BeliefLabel, BoundingBox, Cell, ConfusionCounts, ExplorationRun,
                         Direction, GridRoi, NeighborFlags)

logger = logging.getLogger(__name__)

RESUME_FORMAT = 'roi-exploration-resume/1'


@dataclass(frozen=True)
class SensorModel:
    """Per-image error rates and the majority-vote rule."""
    p_fp: float
    p_fn: float
    samples_per_cell: int = 5
    majority_threshold: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        for name in ('p_fp', 'p_fn'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {value}")
        if not 0 < self.majority_threshold <= self.samples_per_cell:
            raise ParameterError(f"Majority threshold {self.majority_threshold} must lie in "
                                 f"(0, {self.samples_per_cell}]")

    @classmethod
    def from_settings(cls, settings: Dict[str, Any], rng_seed: int = 0) -> 'SensorModel':
        return cls(p_fp=float(settings['p_fp']), p_fn=float(settings['p_fn']),
                   samples_per_cell=int(settings.get('samples_per_cell', 5)),
                   majority_threshold=int(settings.get('majority_threshold', 3)),
                   rng_seed=rng_seed)

    def to_dict(self) -> Dict[str, Any]:
        return {'p_fp': self.p_fp, 'p_fn': self.p_fn, 'samples_per_cell': self.samples_per_cell,
                'majority_threshold': self.majority_threshold, 'rng_seed': self.rng_seed}


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def draw_detections(true_is_roi: bool, model: SensorModel, rng: np.random.Generator) -> np.ndarray:
    """Per-image detections for one cell, each flipped with its error rate."""
    error_rate = model.p_fn if true_is_roi else model.p_fp
    flipped = rng.random(model.samples_per_cell) < error_rate
    return flipped != bool(true_is_roi)


def classify_cell(true_is_roi: bool, model: SensorModel, rng: np.random.Generator) -> bool:
    """Majority vote over ``samples_per_cell`` images."""
    return int(draw_detections(true_is_roi, model, rng).sum()) >= model.majority_threshold


def cell_error_probability(p: float, samples: int = 5, threshold: int = 3, true_is_roi: bool = True) -> float:
    """
    Probability that the majority vote gets a cell wrong.

    Args:
        p: Per-image error rate (p_fn for ROI cells, p_fp otherwise)
        samples: Images per cell
        threshold: Positive images needed for an ROI call
        true_is_roi: Whether the cell really is ROI

    Returns:
        Cell-level miss (ROI) or false-alarm (non-ROI) probability
    """
    needed = samples - threshold + 1 if true_is_roi else threshold
    return sum(math.comb(samples, k) * p ** k * (1 - p) ** (samples - k) for k in range(needed, samples + 1))


class BeliefMap:
    """Per-cell labels over a fixed extent; cells default to UNKNOWN."""

    def __init__(self, extent: BoundingBox):
        self.extent = extent
        self.labels: Dict[Cell, BeliefLabel] = {}

    def contains(self, cell: Cell) -> bool:
        return self.extent.contains(cell)

    def label(self, cell: Cell) -> BeliefLabel:
        return self.labels.get(tuple(cell), BeliefLabel.UNKNOWN)

    def believed_roi(self) -> FrozenSet[Cell]:
        return frozenset(c for c, label in self.labels.items() if label.is_roi)

    def mark_explored(self, cell: Cell) -> None:
        if not self.contains(cell):
            raise ParameterError(f"Cell {cell} is outside the map extent {self.extent}")
        self.labels[tuple(cell)] = BeliefLabel.ROI_EXPLORED

    def to_dict(self) -> Dict[str, Any]:
        box = self.extent
        return {
            'extent': [box.xmin, box.ymin, box.xmax, box.ymax],
            'labels': [[c[0], c[1], self.labels[c].value] for c in sorted(self.labels)]
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'BeliefMap':
        belief = cls(BoundingBox(*(int(v) for v in data['extent'])))
        for x, y, value in data['labels']:
            belief.labels[(int(x), int(y))] = BeliefLabel(value)
        return belief


def update_belief(belief: BeliefMap, cell: Cell, detection: bool) -> None:
    """Apply one detection; ROI labels are never downgraded."""
    if not belief.contains(cell):
        raise ParameterError(f"Cell {cell} is outside the map extent {belief.extent}")
    current = belief.label(cell)
    if detection:
        if current is not BeliefLabel.ROI_EXPLORED:
            belief.labels[tuple(cell)] = BeliefLabel.ROI_UNEXPLORED
    elif not current.is_roi:
        belief.labels[tuple(cell)] = BeliefLabel.NON_ROI


class NoisySensor:
    """
    Neighbor sensor backed by the majority-vote classifier.

    Only cells inside the belief-map extent are ever sensed.
    """

    def __init__(self, world: GridRoi, model: SensorModel, margin: int = 2):
        self.world = world
        self.model = model
        self.margin = margin
        self.rng = make_rng(model.rng_seed)
        self.belief = BeliefMap(world.bounding_box.padded(margin))
        self.confusion = ConfusionCounts()
        self.believed_history: List[int] = []

    def on_visit(self, cell: Cell) -> None:
        self.belief.mark_explored(cell)

    def detect(self, cell: Cell) -> bool:
        """Classify the cell under the robot and record it in the belief map."""
        truth = cell in self.world.cells
        detection = classify_cell(truth, self.model, self.rng)
        self.confusion.record(truth, detection)
        if self.belief.contains(cell):
            update_belief(self.belief, cell, detection)
        return detection

    def sense(self, cell: Cell) -> NeighborFlags:
        flags = {}
        for direction in TIE_BREAK_ORDER:
            neighbor = direction.step(cell)
            if not self.belief.contains(neighbor):
                flags[direction] = False
                continue
            truth = neighbor in self.world.cells
            detection = classify_cell(truth, self.model, self.rng)
            self.confusion.record(truth, detection)
            update_belief(self.belief, neighbor, detection)
            flags[direction] = self.belief.label(neighbor).is_roi
        self.believed_history.append(len(self.belief.believed_roi()))
        return NeighborFlags(north=flags[Direction.N], south=flags[Direction.S],
                             east=flags[Direction.E], west=flags[Direction.W])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': 'noisy',
            'model': self.model.to_dict(),
            'margin': self.margin,
            'rng_state': self.rng.bit_generator.state,
            'belief_map': self.belief.to_dict(),
            'confusion': self.confusion.to_dict(),
            'believed_history': list(self.believed_history)
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], world: GridRoi) -> 'NoisySensor':
        sensor = cls(world, SensorModel(**data['model']), int(data['margin']))
        sensor.rng.bit_generator.state = data['rng_state']
        sensor.belief = BeliefMap.from_dict(data['belief_map'])
        sensor.confusion = ConfusionCounts(**data['confusion'])
        sensor.believed_history = [int(n) for n in data['believed_history']]
        return sensor


@dataclass
class NoisyExplorationResult:
    """A noisy run with its map-quality summary."""
    run: ExplorationRun
    belief_map: BeliefMap
    confusion: ConfusionCounts
    iou: float
    missed_cells: List[Cell] = field(default_factory=list)
    disconnected: bool = False
    believed_history: List[int] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        """Whether the believed-ROI cell count never shrank."""
        return all(a <= b for a, b in zip(self.believed_history, self.believed_history[1:]))

    def summary(self) -> Dict[str, Any]:
        return {
            'alg_time': self.run.alg_time,
            'vertices': len(self.run.tree),
            'believed_cells': len(self.belief_map.believed_roi()),
            'iou': self.iou,
            'missed_cells': len(self.missed_cells),
            'disconnected': self.disconnected,
            'monotone': self.monotone,
            **self.confusion.to_dict()
        }


def finish_noisy_run(explorer: Explorer) -> NoisyExplorationResult:
    sensor = explorer.sensor
    if not isinstance(sensor, NoisySensor):
        raise SimulationError("Explorer is not using a noisy sensor")
    run = explorer.to_run()
    believed = sensor.belief.believed_roi()
    truth = explorer.world.cells
    union = believed | truth
    iou = len(believed & truth) / len(union) if union else 1.0
    return NoisyExplorationResult(
        run=run,
        belief_map=sensor.belief,
        confusion=sensor.confusion,
        iou=iou,
        missed_cells=sorted(truth - run.visited_cells),
        # false negatives can cut true cells off from the explored component
        disconnected=not truth <= run.visited_cells,
        believed_history=list(sensor.believed_history)
    )


def noisy_explore(world: GridRoi, R: int, S_r: float, S_p: float, model: SensorModel,
                  margin: int = 2, logs_path: Optional[Union[str, Path]] = None) -> NoisyExplorationResult:
    """
    Run the recursive DFS with the majority-vote classifier as the sensor.

    Args:
        world: Ground-truth ROI
        R: Number of robots
        S_r, S_p: Robot and ROI speeds
        model: Classifier error model
        margin: Cells of padding around the ROI bounding box that may be sensed

    Returns:
        NoisyExplorationResult
    """
    explorer = Explorer(world, R, S_r, S_p, sensor=NoisySensor(world, model, margin), logs_path=logs_path)
    explorer.advance()
    return finish_noisy_run(explorer)


def save_resume_state(explorer: Explorer) -> str:
    """
    Serialize an exploration between event batches.

    Returns:
        Versioned JSON document (keys sorted)
    """
    document = {
        'format': RESUME_FORMAT,
        'explorer': explorer.to_state(),
        'sensor': explorer.sensor.to_dict()
    }
    return json.dumps(document, sort_keys=True)


def load_resume_state(document: Union[str, Dict[str, Any]],
                      logs_path: Optional[Union[str, Path]] = None) -> Explorer:
    """
    Rebuild an exploration from ``save_resume_state`` output.

    Args:
        document: JSON text or its parsed form

    Returns:
        Explorer ready to continue
    """
    try:
        data = json.loads(document) if isinstance(document, str) else document
        if not isinstance(data, dict) or data.get('format') != RESUME_FORMAT:
            found = data.get('format') if isinstance(data, dict) else type(data).__name__
            raise ResumeStateError(f"Unsupported resume document format: {found!r}")
        state = data['explorer']
        world = GridRoi.from_dict(state['world'])
        sensor_data = data['sensor']
        if sensor_data['kind'] == 'perfect':
            sensor = PerfectSensor(world)
        elif sensor_data['kind'] == 'noisy':
            sensor = NoisySensor.from_dict(sensor_data, world)
        else:
            raise ResumeStateError(f"Unknown sensor kind: {sensor_data['kind']!r}")
        return Explorer.from_state(state, sensor=sensor, logs_path=logs_path)
    except ResumeStateError:
        raise
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, SimulationError) as e:
        raise ResumeStateError(f"Cannot resume from document: {e}") from e


def save_resume_file(explorer: Explorer, path: Union[str, Path]) -> str:
    """Write a resume document next to its final path, then move it into place."""
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    partial = output.with_suffix(output.suffix + '.part')
    partial.write_text(save_resume_state(explorer), encoding='utf-8')
    partial.replace(output)
    return str(output)


def load_resume_file(path: Union[str, Path], logs_path: Optional[Union[str, Path]] = None) -> Explorer:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ResumeStateError(f"Cannot read resume file {path}: {e}") from e
    return load_resume_state(text, logs_path)


def run_segmented(world: GridRoi, R: int, S_r: float, S_p: float, model: SensorModel,
                  segment_batches: Sequence[int], margin: int = 2) -> Tuple[NoisyExplorationResult, List[str]]:
    """
    Run a noisy exploration in segments, saving and reloading between them.

    Args:
        segment_batches: Event batches to process before each save
        margin: Belief-map padding

    Returns:
        (result, resume documents written between segments)
    """
    explorer = Explorer(world, R, S_r, S_p, sensor=NoisySensor(world, model, margin))
    documents = []
    for batches in segment_batches:
        if explorer.advance(batches):
            break
        document = save_resume_state(explorer)
        documents.append(document)
        explorer = load_resume_state(document)
    explorer.advance()
    logger.debug(f"Segmented run finished after {len(documents)} saves")
    return finish_noisy_run(explorer), documents
