import json
import math

import numpy as np
import pytest

from core.dfs_explorer import Explorer, explore
from core.errors import ParameterError, ResumeStateError
from core.grid_world import generate_random_roi
from core.models import BeliefLabel, BoundingBox
from core.sensing import (BeliefMap, NoisySensor, SensorModel, cell_error_probability, classify_cell,
                          draw_detections, finish_noisy_run, load_resume_file, load_resume_state,
                          make_rng, noisy_explore, run_segmented, save_resume_file, save_resume_state,
                          update_belief)

FIELD_MODEL = SensorModel(p_fp=0.1, p_fn=0.2, rng_seed=7)


def test_cell_error_probability():
    assert cell_error_probability(0.2) == pytest.approx(0.05792, abs=1e-5)
    assert cell_error_probability(0.5) == pytest.approx(0.5)
    assert cell_error_probability(0.0) == 0.0
    assert cell_error_probability(0.1, true_is_roi=False) == pytest.approx(0.00856, abs=1e-5)


def test_invalid_sensor_model():
    with pytest.raises(ParameterError):
        SensorModel(p_fp=1.5, p_fn=0.1)
    with pytest.raises(ParameterError):
        SensorModel(p_fp=0.1, p_fn=0.1, samples_per_cell=5, majority_threshold=6)


def test_zero_error_classifier_is_exact():
    model = SensorModel(p_fp=0.0, p_fn=0.0)
    rng = make_rng(1)
    assert all(classify_cell(True, model, rng) for _ in range(50))
    assert not any(classify_cell(False, model, rng) for _ in range(50))


def test_per_image_error_rate():
    model = SensorModel(p_fp=0.1, p_fn=0.3)
    rng = make_rng(2024)
    images = np.concatenate([draw_detections(True, model, rng) for _ in range(20000)])
    rate = 1.0 - images.mean()
    sigma = math.sqrt(0.3 * 0.7 / images.size)
    assert abs(rate - 0.3) <= 3 * sigma


def test_cell_miss_rate():
    model = SensorModel(p_fp=0.1, p_fn=0.2)
    rng = make_rng(99)
    trials = 20000
    misses = sum(not classify_cell(True, model, rng) for _ in range(trials))
    p = cell_error_probability(0.2)
    assert abs(misses / trials - p) <= 3 * math.sqrt(p * (1 - p) / trials)


def test_belief_updates_are_sticky():
    belief = BeliefMap(BoundingBox(0, 0, 3, 3))
    update_belief(belief, (1, 1), False)
    assert belief.label((1, 1)) is BeliefLabel.NON_ROI
    update_belief(belief, (1, 1), True)
    assert belief.label((1, 1)) is BeliefLabel.ROI_UNEXPLORED
    update_belief(belief, (1, 1), False)
    assert belief.label((1, 1)) is BeliefLabel.ROI_UNEXPLORED

    belief.mark_explored((2, 2))
    update_belief(belief, (2, 2), True)
    update_belief(belief, (2, 2), False)
    assert belief.label((2, 2)) is BeliefLabel.ROI_EXPLORED
    assert belief.label((0, 3)) is BeliefLabel.UNKNOWN
    assert belief.believed_roi() == frozenset({(1, 1), (2, 2)})


def test_belief_extent_is_enforced():
    belief = BeliefMap(BoundingBox(0, 0, 1, 1))
    with pytest.raises(ParameterError):
        update_belief(belief, (5, 0), True)
    with pytest.raises(ParameterError):
        belief.mark_explored((-1, 0))


def test_noiseless_run_matches_perfect_sensing():
    world = generate_random_roi(80, 5, S_p=1.0)
    result = noisy_explore(world, 6, 2.5, 1.0, SensorModel(p_fp=0.0, p_fn=0.0))
    reference = explore(world, 6, 2.5, 1.0)
    assert result.run.alg_time == reference.alg_time
    assert result.iou == 1.0
    assert result.confusion.fp == 0 and result.confusion.fn == 0
    assert not result.disconnected
    assert result.missed_cells == []


def test_noisy_run_summary():
    world = generate_random_roi(60, 8, S_p=1.0)
    result = noisy_explore(world, 4, 2.5, 1.0, FIELD_MODEL)
    assert result.monotone
    assert 0.0 <= result.iou <= 1.0
    assert set(result.missed_cells) <= world.cells
    assert result.disconnected == bool(result.missed_cells)
    assert 0 < result.confusion.total <= 4 * len(result.believed_history)
    summary = result.summary()
    assert summary['monotone'] is True
    assert summary['believed_cells'] == len(result.belief_map.believed_roi())


def count_batches(world, R, model):
    explorer = Explorer(world, R, 2.5, 1.0, sensor=NoisySensor(world, model))
    batches = 1
    while not explorer.advance(1):
        batches += 1
    return batches


@pytest.mark.parametrize('seed', range(20))
def test_resume_matches_uninterrupted_run(seed):
    world = generate_random_roi(40, seed, S_p=1.0)
    model = SensorModel(p_fp=0.1, p_fn=0.2, rng_seed=seed)
    reference = noisy_explore(world, 4, 2.5, 1.0, model)

    total = count_batches(world, 4, model)
    cuts = np.sort(np.random.default_rng(seed).choice(np.arange(1, total), size=min(6, total - 1), replace=False))
    result, documents = run_segmented(world, 4, 2.5, 1.0, model, np.diff(cuts, prepend=0).tolist())

    assert len(documents) == len(cuts)
    assert all(json.loads(d)['format'] == 'roi-exploration-resume/1' for d in documents)
    assert result.run.alg_time == reference.run.alg_time
    assert (json.dumps(result.run.tree.to_dict(), sort_keys=True)
            == json.dumps(reference.run.tree.to_dict(), sort_keys=True))
    assert (json.dumps(result.belief_map.to_dict(), sort_keys=True)
            == json.dumps(reference.belief_map.to_dict(), sort_keys=True))
    assert result.confusion == reference.confusion


def test_resume_document_is_stable():
    world = generate_random_roi(40, 3, S_p=1.0)
    explorer = Explorer(world, 3, 2.5, 1.0, sensor=NoisySensor(world, FIELD_MODEL))
    explorer.advance(4)
    document = save_resume_state(explorer)
    assert save_resume_state(load_resume_state(document)) == document


def test_resume_file(tmp_path):
    world = generate_random_roi(40, 4, S_p=1.0)
    explorer = Explorer(world, 2, 2.5, 1.0, sensor=NoisySensor(world, FIELD_MODEL))
    explorer.advance(3)
    path = save_resume_file(explorer, tmp_path / 'state' / 'resume.json')
    resumed = load_resume_file(path)
    resumed.advance()
    explorer.advance()
    assert finish_noisy_run(resumed).run.alg_time == finish_noisy_run(explorer).run.alg_time
    assert not (tmp_path / 'state' / 'resume.json.part').exists()


@pytest.mark.parametrize('document', [
    'not json',
    '{"format": "roi-exploration-resume/0"}',
    '{"format": "roi-exploration-resume/1", "explorer": {}}',
    '[1, 2, 3]',
])
def test_corrupted_resume_document(document):
    with pytest.raises(ResumeStateError):
        load_resume_state(document)


def test_missing_resume_file(tmp_path):
    with pytest.raises(ResumeStateError):
        load_resume_file(tmp_path / 'nope.json')


def test_sensor_detect_updates_map():
    world = generate_random_roi(20, 8, S_p=1.0)
    sensor = NoisySensor(world, SensorModel(p_fp=0.0, p_fn=0.0, rng_seed=1))
    assert sensor.detect(world.start_cell)
    assert sensor.belief.label(world.start_cell) is BeliefLabel.ROI_UNEXPLORED
    outside = (world.bounding_box.xmax + 1, world.bounding_box.ymax)
    assert not sensor.detect(outside)
    assert (sensor.confusion.tp, sensor.confusion.tn) == (1, 1)
