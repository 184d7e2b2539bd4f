import pickle

import pandas as pd
import pytest

from core.errors import SweepAbortedError
from core.experiment_runner import (REPORT_COLUMNS, RESULT_COLUMNS, ExperimentHarness, aggregate_sweep,
                                    run_trial, trajectory_table, trial_seed)
from core.dfs_explorer import explore
from core.geometry import FatPolygon
from core.grid_world import save_scenario
from core.models import SweepKind
from ui.cli import main


@pytest.fixture
def harness(workspace):
    harness = ExperimentHarness(str(workspace / 'config.yaml'))
    harness.config.set('verification', 'QUICK', {
        'max_opt_cells': 4,
        'random_opt_seeds': 3,
        'fat_shapes': 2,
        'audit_trials': 2,
        'robot_scaling': True,
        'sensing_draws': 4000
    })
    return harness


def test_trial_seed_is_deterministic():
    assert trial_seed(2024, 120, 3) == trial_seed(2024, 120, 3)
    assert trial_seed(2024, 120, 3) != trial_seed(2024, 120, 4)
    assert trial_seed(2024, 120, 3) != trial_seed(2024, 80, 3)
    assert 0 <= trial_seed(1, 1, 0) < 2 ** 64


def test_run_trial_row():
    row = run_trial(120, 0, 120, 20, 2.5, 1.0, 2024, 1e-9)
    assert set(row) == set(RESULT_COLUMNS)
    assert row['S_r'] == pytest.approx(2.5)
    assert row['lower_bound_grid'] <= row['alg_time'] <= row['upper_bound']


def test_sweep_aborted_error_pickles():
    error = pickle.loads(pickle.dumps(SweepAbortedError('bound broken', 42)))
    assert error.seed == 42
    assert 'seed=42' in str(error)


def test_experiment_config(harness):
    config = harness.experiment_config('speed-ratio', trials=2, grid=None)
    assert config.sweep is SweepKind.SPEED_RATIO
    assert config.grid == [1.5, 2.0, 2.5, 3.0, 4.0]
    assert config.trials == 2
    single = harness.experiment_config()
    assert single.points() == [120]


def test_cells_sweep(harness, workspace):
    config = harness.experiment_config('cells', grid=[20, 40], trials=3, robots=4)
    table = harness.run_sweep(config)
    assert list(table.columns) == RESULT_COLUMNS
    assert len(table) == 6
    assert list(table['C']) == [20, 20, 20, 40, 40, 40]
    assert (table['alg_time'] <= table['upper_bound'] + 1e-9).all()
    assert table['lawnmower_ok'].all()

    summary = aggregate_sweep(table)
    assert list(summary['sweep_param']) == [20, 40]
    assert 'alg_time_mean' in summary.columns

    first = harness.save_table(table, str(workspace / 'a.csv'))
    second = harness.save_table(harness.run_sweep(config), str(workspace / 'b.csv'))
    assert open(first, 'rb').read() == open(second, 'rb').read()


def mean_alg_time(table):
    return table.groupby('sweep_param', sort=True)['alg_time'].mean()


def test_sweep_trends(harness):
    cells = mean_alg_time(harness.run_sweep(harness.experiment_config('cells', grid=[40, 80, 120], trials=8)))
    assert cells.is_monotonic_increasing and cells.is_unique

    robots_table = harness.run_sweep(harness.experiment_config('robots', grid=[1, 2, 4, 16], trials=8, cells=60))
    assert robots_table['lawnmower_ok'].all()
    robots = mean_alg_time(robots_table)
    assert robots.is_monotonic_decreasing

    ratios = mean_alg_time(harness.run_sweep(
        harness.experiment_config('speed-ratio', grid=[1.5, 2.5, 4.0], trials=8, cells=60)))
    assert ratios.is_monotonic_decreasing and ratios.is_unique


def test_robot_sweep_shares_worlds(harness):
    config = harness.experiment_config('robots', grid=[4, 16], trials=2, cells=60)
    table = harness.run_sweep(config)
    seeds = table.groupby('sweep_param')['seed'].apply(list)
    assert seeds[4] == seeds[16]


def test_parallel_sweep_matches_serial(harness):
    serial = harness.run_sweep(harness.experiment_config('cells', grid=[30], trials=4, robots=8))
    parallel = harness.run_sweep(harness.experiment_config('cells', grid=[30], trials=4, robots=8, workers=2))
    pd.testing.assert_frame_equal(serial, parallel)


def test_json_table(harness, workspace):
    table = harness.run_sweep(harness.experiment_config(trials=1, cells=20, robots=4))
    path = harness.save_table(table, output_format='json', name='single')
    assert path.endswith('single.json')
    assert len(pd.read_json(path)) == 1


def test_explore_scenario(harness, workspace, two_by_two):
    map_path = save_scenario(two_by_two, workspace / 'square.json')
    trajectory_path = str(workspace / 'trajectories.csv')
    summary = harness.explore_scenario(map_path=map_path, robots=1, speed_ratio=2.0, translation_speed=1.0,
                                       trajectory_path=trajectory_path)
    assert summary['checks_passed']
    assert summary['C'] == 4
    assert summary['special_SRTR'] is not None
    # 2 (S_r + S_p) R / (S_r - S_p) for one robot
    assert summary['competitive_ratio_grid'] == pytest.approx(6.0)
    trajectories = pd.read_csv(trajectory_path)
    assert set(trajectories['robot']) == {0}


def test_trajectory_table(two_by_two):
    run = explore(two_by_two, 2, 1.0, 0.0)
    table = trajectory_table(run)
    assert set(table['robot']) == {0, 1}
    assert table.groupby('robot')['time'].is_monotonic_increasing.all()


def test_noisy_scenario_with_pause(harness, workspace):
    resume_path = str(workspace / 'resume.json')
    paused = harness.noisy_explore_scenario(random_roi=(40, 2), robots=4, seed=5, resume_path=resume_path,
                                            max_batches=3)
    assert paused['finished'] is False
    finished = harness.noisy_explore_scenario(resume_path=resume_path)
    assert finished['finished'] is True
    assert finished['checks_passed']


def test_noisy_scenario_needs_resume_file_to_pause(harness):
    with pytest.raises(ValueError):
        harness.noisy_explore_scenario(random_roi=(40, 2), robots=4, max_batches=1)


def test_geometry_check(harness, workspace):
    table = harness.geometry_check(shapes=2, seed=3)
    assert len(table) == 2
    assert (table['lemma3_ok'] & table['lemma4_ok']).all()

    path = workspace / 'strip.json'
    path.write_text(__import__('json').dumps(FatPolygon.rectangle(-0.01, -0.01, 10.01, 1.01).to_dict()))
    row = harness.geometry_check(polygon_path=str(path)).iloc[0]
    assert row['unit_strip'] and not row['fat']
    assert (row['C_in'], row['C_out']) == (10, 36)


def test_quick_verification(harness):
    report = harness.run_verification('QUICK')
    assert list(report.columns) == REPORT_COLUMNS
    assert report['passed'].all(), report['detail'].tolist()
    assert set(report['check']) >= {'optimal_oracle', 'grid_approximation', 'run_invariants', 'cell_miss_rate'}


def test_cli_explore(workspace, capsys):
    code = main(['--config', str(workspace / 'config.yaml'), 'explore', '--random', '30', '3', '--robots', '4'])
    assert code == 0
    assert '"checks_passed": true' in capsys.readouterr().out


def test_cli_sweep(workspace):
    out = str(workspace / 'sweep.csv')
    code = main(['--config', str(workspace / 'config.yaml'), 'sweep', '--kind', 'cells', '--grid', '20', '30',
                 '--trials', '2', '--robots', '4', '--out', out])
    assert code == 0
    assert len(pd.read_csv(out)) == 4
    assert (workspace / 'sweep_summary.csv').exists()


def test_cli_reports_bad_parameters(workspace, capsys):
    code = main(['--config', str(workspace / 'config.yaml'), 'explore', '--random', '30', '3',
                 '--speed-ratio', '0.5'])
    assert code == 1
    assert 'Error' in capsys.readouterr().err
