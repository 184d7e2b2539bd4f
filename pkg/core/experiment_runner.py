"""
Main controller for the ROI exploration simulator.
Coordinates sweeps, verification suites and single-scenario runs.
"""

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from core.analysis import (audit_rewards, bounds_report, brute_force_opt, competitive_rhs,
                           lawnmower_lower_bound, lower_bound_grid, robot_scaling_holds, upper_bound)
from core.dfs_explorer import Explorer, explore, find_roi_sweep
from core.errors import SweepAbortedError
from core.geometry import (FatPolygon, is_fat, is_unit_strip, load_polygon, random_fat_polygon,
                           verify_approximation_bounds)
from core.grid_world import enumerate_free_polyominoes, generate_random_roi, load_scenario
from core.models import Direction, ExperimentConfig, ExplorationRun, GridRoi, SweepKind
from core.sensing import (NoisyExplorationResult, NoisySensor, SensorModel, cell_error_probability,
                          classify_cell, draw_detections, finish_noisy_run, load_resume_file, make_rng,
                          save_resume_file)
from utils.config_manager import ConfigManager
from utils.logging_utils import setup_logger

RESULT_COLUMNS = ['sweep_param', 'trial', 'seed', 'C', 'R', 'S_r', 'S_p', 'alg_time', 't_last', 'd_max', 'L',
                  'upper_bound', 'lower_bound_grid', 'lawnmower_bound', 'reward_lhs', 'reward_rhs', 'lawnmower_ok']
REPORT_COLUMNS = ['check', 'passed', 'cases', 'failures', 'detail']


def trial_seed(master_seed: int, C: int, trial: int) -> int:
    """
    64-bit ROI seed for one trial.

    Points of the ROBOTS and SPEED_RATIO sweeps share C, so they see the
    same ROIs trial by trial.
    """
    sequence = np.random.SeedSequence([int(master_seed), int(C), int(trial)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _bound_violations(world: GridRoi, run: ExplorationRun, slack: float) -> Tuple[Dict[str, float], List[str]]:
    params = run.params
    values = {
        'upper_bound': upper_bound(world.C, run.d_max, params.R, params.S_r, params.S_p),
        'lower_bound_grid': lower_bound_grid(world.C, params.R, params.S_r, params.S_p),
        'lawnmower_bound': lawnmower_lower_bound(world, params.R, params.S_r, params.S_p)
    }
    # reported only; never aborts a sweep
    values['lawnmower_ok'] = values['lawnmower_bound'] <= run.alg_time + slack
    audit = audit_rewards(run, slack)
    values.update(reward_lhs=audit.lhs, reward_total=audit.total, reward_rhs=audit.rhs)

    problems = []
    if run.visited_cells != world.cells:
        problems.append(f"{len(world.cells - run.visited_cells)} cells never explored")
    if len(run.finish_times) != params.R:
        problems.append(f"only {len(run.finish_times)} of {params.R} robots returned")
    if run.alg_time > values['upper_bound'] + slack:
        problems.append(f"ALG {run.alg_time} above upper bound {values['upper_bound']}")
    if values['lower_bound_grid'] > run.alg_time + slack:
        problems.append(f"ALG {run.alg_time} below grid lower bound {values['lower_bound_grid']}")
    if not audit.ok:
        problems.append(f"reward audit failed: {audit.lhs} <= {audit.total} <= {audit.rhs}")
    return values, problems


def run_trial(point: float, trial: int, C: int, R: int, ratio: float, S_p: float,
              master_seed: int, slack: float) -> Dict[str, Any]:
    """
    One sweep trial: generate, explore, evaluate bounds.

    Returns:
        Result row

    Raises:
        SweepAbortedError: when the run breaks an invariant
    """
    seed = trial_seed(master_seed, C, trial)
    S_r = ratio * S_p
    world = generate_random_roi(C, seed, S_p)
    run = explore(world, R, S_r, S_p)
    values, problems = _bound_violations(world, run, slack)
    if problems:
        raise SweepAbortedError(f"Trial {trial} at {point}: " + '; '.join(problems), seed)
    return {
        'sweep_param': point, 'trial': trial, 'seed': seed, 'C': C, 'R': R, 'S_r': S_r, 'S_p': S_p,
        'alg_time': run.alg_time, 't_last': run.t_last, 'd_max': run.d_max, 'L': run.L,
        'upper_bound': values['upper_bound'], 'lower_bound_grid': values['lower_bound_grid'],
        'lawnmower_bound': values['lawnmower_bound'], 'lawnmower_ok': values['lawnmower_ok'],
        'reward_lhs': values['reward_lhs'], 'reward_rhs': values['reward_rhs']
    }


def _run_trial_task(task: Tuple) -> Dict[str, Any]:
    return run_trial(*task)


def aggregate_sweep(table: pd.DataFrame) -> pd.DataFrame:
    """Mean, min and max per sweep point."""
    summary = table.groupby('sweep_param', sort=True)[
        ['alg_time', 'upper_bound', 'lower_bound_grid', 'lawnmower_bound']].agg(['mean', 'min', 'max'])
    summary.columns = [f"{name}_{stat}" for name, stat in summary.columns]
    return summary.reset_index()


def trajectory_table(run: ExplorationRun) -> pd.DataFrame:
    """One row per robot arrival."""
    rows = []
    for robot, points in sorted(run.trajectories.items()):
        for step, (vertex, time) in enumerate(points):
            x, y = run.tree.position(vertex)
            rows.append({'robot': robot, 'step': step, 'vertex': vertex, 'x': x, 'y': y, 'time': time,
                         'dummy': run.tree[vertex].is_dummy})
    return pd.DataFrame(rows, columns=['robot', 'step', 'vertex', 'x', 'y', 'time', 'dummy'])


class ExperimentHarness:
    """
    Main controller for the ROI exploration simulator.
    Coordinates all functionality between components.
    """

    def __init__(self, config_file: str = 'config.yaml'):
        """
        Initialize the harness.

        Args:
            config_file: Path to configuration file
        """
        self.config = ConfigManager(config_file)

        self.logger = setup_logger("ExperimentHarness", self.config.get_logs_path())
        self.logger.info("Experiment harness initialized")

        self._create_directories()

    def _create_directories(self) -> None:
        """Create necessary directories for the application."""
        Path(self.config.get_results_path()).mkdir(parents=True, exist_ok=True)
        Path(self.config.get_logs_path()).mkdir(parents=True, exist_ok=True)

    def experiment_config(self, sweep: Union[str, SweepKind] = SweepKind.SINGLE, **overrides) -> ExperimentConfig:
        """
        Build an ExperimentConfig from the configuration file.

        Args:
            sweep: Sweep kind
            **overrides: Values taking precedence over the file (None is ignored)

        Returns:
            ExperimentConfig
        """
        sweep = SweepKind.parse(sweep)
        settings = self.config.get_simulation_settings()
        harness = self.config.get_harness_settings()
        grids = self.config.get_sweep_grids()
        values = {
            'sweep': sweep,
            'cells': int(settings['cells']),
            'robots': int(settings['robots']),
            'speed_ratio': float(settings['speed_ratio']),
            'translation_speed': float(settings['translation_speed']),
            'trials': int(settings['trials']),
            'master_seed': int(settings['master_seed']),
            'grid': list(grids.get(sweep.value, [])),
            'output_format': harness['output_format'],
            'workers': int(harness['workers'])
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig(**values)

    def run_sweep(self, config: ExperimentConfig) -> pd.DataFrame:
        """
        Run every trial of a sweep.

        Args:
            config: Sweep description

        Returns:
            DataFrame with one row per trial, ordered by (point, trial)
        """
        points = config.points()
        self.logger.info(f"Starting {config.sweep.value} sweep over {points} with {config.trials} trials each")
        slack = float(self.config.get_harness_settings()['bound_slack'])

        tasks = []
        for index, point in enumerate(points):
            C, R, ratio = config.point_parameters(point)
            for trial in range(config.trials):
                tasks.append(((index, trial), (point, trial, C, R, ratio, config.translation_speed,
                                               config.master_seed, slack)))

        try:
            if config.workers > 1:
                with ProcessPoolExecutor(max_workers=config.workers) as pool:
                    rows = list(pool.map(_run_trial_task, [task for _, task in tasks]))
            else:
                rows = [run_trial(*task) for _, task in tasks]
        except SweepAbortedError as e:
            self.logger.error(f"Sweep aborted: {e}")
            raise
        except Exception as e:
            self.logger.error(f"Error running sweep: {str(e)}")
            raise

        ordered = [row for _, row in sorted(zip([key for key, _ in tasks], rows), key=lambda item: item[0])]
        table = pd.DataFrame(ordered, columns=RESULT_COLUMNS)
        for point, group in table.groupby('sweep_param', sort=True):
            self.logger.info(f"Point {point}: mean ALG {group['alg_time'].mean():.4f} over {len(group)} trials")
        misses = len(table) - int(table['lawnmower_ok'].sum())
        if misses:
            self.logger.warning(f"{misses} trials finished below the lawn-mower baseline")
        self.logger.info(f"Sweep complete: {len(table)} trials")
        return table

    def save_table(self, table: pd.DataFrame, output_path: Optional[str] = None,
                   output_format: str = 'csv', name: str = 'results') -> str:
        """
        Save a result table.

        Args:
            table: DataFrame to save
            output_path: File path (auto-generated in the results directory if None)
            output_format: 'csv' or 'json'
            name: File stem used when output_path is None

        Returns:
            Path to the saved file
        """
        if output_path is None:
            output_path = str(Path(self.config.get_results_path()) / f"{name}.{output_format}")
        path = Path(output_path)
        path.parent.mkdir(parents=True, exist_ok=True)

        try:
            if output_format == 'json':
                path.write_text(table.to_json(orient='records', indent=2), encoding='utf-8')
            else:
                table.to_csv(path, index=False)
            self.logger.info(f"Saved {len(table)} rows to {path}")
            return str(path)
        except Exception as e:
            self.logger.error(f"Error saving table {path}: {str(e)}")
            raise

    def _grid_world(self, map_path: Optional[str], random_roi: Optional[Tuple[int, int]],
                    S_p: float) -> GridRoi:
        if map_path is not None:
            return load_scenario(map_path).with_speed(S_p)
        if random_roi is None:
            settings = self.config.get_simulation_settings()
            random_roi = (int(settings['cells']), int(settings['master_seed']))
        C, seed = random_roi
        return generate_random_roi(C, seed, S_p)

    def explore_scenario(self, map_path: Optional[str] = None, random_roi: Optional[Tuple[int, int]] = None,
                         robots: Optional[int] = None, speed_ratio: Optional[float] = None,
                         translation_speed: Optional[float] = None,
                         trajectory_path: Optional[str] = None) -> Dict[str, Any]:
        """
        Explore one ROI and evaluate every bound against the run.

        Args:
            map_path: Scenario file (takes precedence over random_roi)
            random_roi: (C, seed) of a generated ROI
            robots, speed_ratio, translation_speed: Overrides of the configured values
            trajectory_path: Where to write per-robot arrivals (skipped if None)

        Returns:
            Dict summary; ``checks_passed`` is False when any bound is broken
        """
        settings = self.config.get_simulation_settings()
        R = int(robots if robots is not None else settings['robots'])
        S_p = float(translation_speed if translation_speed is not None else settings['translation_speed'])
        S_r = float(speed_ratio if speed_ratio is not None else settings['speed_ratio']) * S_p
        self.logger.info(f"Exploring scenario {map_path or random_roi} with R={R}, S_r={S_r}, S_p={S_p}")

        try:
            world = self._grid_world(map_path, random_roi, S_p)
            run = explore(world, R, S_r, S_p, logs_path=self.config.get_logs_path())
            slack = float(self.config.get_harness_settings()['bound_slack'])
            values, problems = _bound_violations(world, run, slack)
            report = bounds_report(world.C, run.d_max, R, S_r, S_p)
            specials = report.special_case_bounds.to_dict()

            if trajectory_path is not None:
                self.save_table(trajectory_table(run), trajectory_path)
            for problem in problems:
                self.logger.error(f"Invariant broken: {problem}")

            summary = {
                'C': world.C, 'R': R, 'S_r': S_r, 'S_p': S_p, 'translation_dir': world.translation_dir.name,
                'alg_time': run.alg_time, 't_last': run.t_last, 'd_max': run.d_max, 'L': run.L,
                'vertices': len(run.tree), 'events': run.event_count,
                **values, **{f"special_{k}": v for k, v in specials.items()},
                'competitive_ratio_grid': report.competitive_ratio_grid,
                'checks_passed': not problems, 'problems': problems
            }
            self.logger.info(f"Explored scenario: ALG={run.alg_time:.4f}, checks passed={not problems}")
            return summary

        except Exception as e:
            self.logger.error(f"Error exploring scenario: {str(e)}")
            raise

    def noisy_explore_scenario(self, map_path: Optional[str] = None, random_roi: Optional[Tuple[int, int]] = None,
                               robots: Optional[int] = None, speed_ratio: Optional[float] = None,
                               translation_speed: Optional[float] = None, seed: Optional[int] = None,
                               resume_path: Optional[str] = None,
                               max_batches: Optional[int] = None) -> Dict[str, Any]:
        """
        Field procedure with a noisy classifier: sweep the bounding box until
        the ROI is seen, then explore from there.

        With ``resume_path``, an existing resume file is continued; with
        ``max_batches`` as well, the run stops after that many event batches
        and its state is written to ``resume_path``.

        Returns:
            Dict summary; ``finished`` is False when the run was paused
        """
        settings = self.config.get_simulation_settings()
        sensing = self.config.get_sensing_settings()
        R = int(robots if robots is not None else settings['robots'])
        S_p = float(translation_speed if translation_speed is not None else settings['translation_speed'])
        S_r = float(speed_ratio if speed_ratio is not None else settings['speed_ratio']) * S_p
        seed = int(seed if seed is not None else settings['master_seed'])

        try:
            sweep_time = 0.0
            if resume_path is not None and Path(resume_path).exists():
                explorer = load_resume_file(resume_path, self.config.get_logs_path())
                self.logger.info(f"Resumed exploration from {resume_path} at t={explorer.clock:.4f}")
            else:
                world = self._grid_world(map_path, random_roi, S_p)
                model = SensorModel.from_settings(sensing, rng_seed=seed)
                sensor = NoisySensor(world, model, int(sensing['map_margin']))
                box = world.bounding_box
                entry, sweep_time = find_roi_sweep(box, box.corners[0], S_r, world, detect=sensor.detect)
                world = GridRoi(world.cells, world.translation_dir, S_p, entry)
                sensor.world = world
                explorer = Explorer(world, R, S_r, S_p, sensor=sensor, logs_path=self.config.get_logs_path())
                self.logger.info(f"ROI seen at {entry} after sweeping for {sweep_time:.4f}")

            finished = explorer.advance(max_batches)
            if not finished:
                if resume_path is None:
                    raise ValueError("Pausing a run needs a resume file")
                save_resume_file(explorer, resume_path)
                self.logger.info(f"Paused at t={explorer.clock:.4f}; state saved to {resume_path}")
                return {'finished': False, 'clock': explorer.clock, 'resume_path': resume_path,
                        'vertices': len(explorer.tree), 'checks_passed': True}

            result: NoisyExplorationResult = finish_noisy_run(explorer)
            summary = {'finished': True, 'sweep_time': sweep_time, **result.summary(),
                       'checks_passed': result.monotone}
            self.logger.info(f"Noisy exploration finished: IoU={result.iou:.3f}, "
                             f"confusion={result.confusion.to_dict()}")
            return summary

        except Exception as e:
            self.logger.error(f"Error in noisy exploration: {str(e)}")
            raise

    def geometry_check(self, polygon_path: Optional[str] = None, shapes: int = 10,
                       seed: int = 0) -> pd.DataFrame:
        """
        Check C_out <= 3 C_in + 6 and C_in <= 6 C_best on polygons.

        Args:
            polygon_path: Polygon file to check; random fat shapes when None
            shapes: Number of random shapes
            seed: First random-shape seed

        Returns:
            DataFrame with one row per polygon
        """
        geometry = self.config.get_geometry_settings()
        resolution = float(geometry['offset_resolution'])
        if polygon_path is not None:
            polygons = [(Path(polygon_path).name, load_polygon(polygon_path))]
        else:
            polygons = [(f"random-{s}", random_fat_polygon(s)) for s in range(seed, seed + shapes)]

        rows = []
        for name, polygon in polygons:
            report = verify_approximation_bounds(polygon, resolution)
            rows.append({'polygon': name, 'fat': is_fat(polygon, int(geometry['boundary_samples']),
                                                         int(geometry['ball_samples']),
                                                         float(geometry['fatness_tolerance']),
                                                         float(geometry['corner_angle_deg'])),
                         'unit_strip': is_unit_strip(polygon), **report.to_dict()})
        table = pd.DataFrame(rows)
        self.logger.info(f"Geometry check on {len(table)} polygons: "
                         f"{int((table['lemma3_ok'] & table['lemma4_ok']).sum())} passed")
        return table

    def run_verification(self, tier: str = 'QUICK') -> pd.DataFrame:
        """
        Run the verification suite.

        Args:
            tier: 'QUICK' or 'FULL'

        Returns:
            DataFrame with one row per check
        """
        counts = self.config.get_verification_settings(tier)
        settings = self.config.get_simulation_settings()
        self.logger.info(f"Running {tier.upper()} verification")

        rows = [
            self._verify_optimal(counts, int(settings['master_seed'])),
            self._verify_geometry(int(counts['fat_shapes'])),
            self._verify_audits(int(counts['audit_trials']), settings)
        ]
        if counts.get('sensing_draws'):
            rows.extend(self._verify_sensing(int(counts['sensing_draws']), int(settings['master_seed'])))

        report = pd.DataFrame(rows, columns=REPORT_COLUMNS)
        for _, row in report[~report['passed']].iterrows():
            self.logger.error(f"Verification check {row['check']} failed: {row['detail']}")
        self.logger.info(f"Verification complete: {int(report['passed'].sum())}/{len(report)} checks passed")
        return report

    def _verify_optimal(self, counts: Dict[str, Any], master_seed: int) -> Dict[str, Any]:
        max_cells = int(counts['max_opt_cells'])
        worlds = []
        for shape in enumerate_free_polyominoes(max_cells):
            for start in sorted(shape):
                worlds.append((f"shape{sorted(shape)}@{start}", shape, start))
        for k in range(int(counts['random_opt_seeds'])):
            seed = trial_seed(master_seed, max_cells, k)
            world = generate_random_roi(2 + k % (max_cells - 1), seed)
            worlds.append((f"seed={seed}", world.cells, world.start_cell))

        cases = 0
        failures = []
        for label, cells, start in worlds:
            for S_r, S_p in ((1.0, 0.0), (1.5, 0.5)):
                world = GridRoi(cells, Direction.N, S_p, start)
                optima = {}
                for R in (1, 2):
                    cases += 1
                    run = explore(world, R, S_r, S_p)
                    opt = brute_force_opt(world, R, S_r, S_p)
                    optima[R] = opt
                    audit = audit_rewards(run)
                    if run.alg_time > competitive_rhs(opt, R, S_r, S_p) + 1e-9:
                        failures.append(f"{label} R={R} S_p={S_p}: ALG above competitive bound")
                    if lower_bound_grid(world.C, R, S_r, S_p) > opt + 1e-9:
                        failures.append(f"{label} R={R} S_p={S_p}: OPT below grid lower bound")
                    if not audit.ok:
                        failures.append(f"{label} R={R} S_p={S_p}: reward audit failed")
                    if R == 1 and S_p > 0:
                        specials = bounds_report(world.C, run.d_max, R, S_r, S_p).special_case_bounds
                        if not run.alg_time <= specials.SRTR_tight + 1e-9 <= specials.SRTR + 2e-9:
                            failures.append(f"{label} S_p={S_p}: single-robot translating bound broken")
                if counts.get('robot_scaling') and not robot_scaling_holds(optima[2], optima[1], 2):
                    failures.append(f"{label} S_p={S_p}: OPT(2) <= OPT(1) <= 2 OPT(2) broken")

        return {'check': 'optimal_oracle', 'passed': not failures, 'cases': cases,
                'failures': len(failures), 'detail': '; '.join(failures[:10])}

    def _verify_geometry(self, shapes: int) -> Dict[str, Any]:
        resolution = float(self.config.get_geometry_settings()['offset_resolution'])
        failures = []
        witness = verify_approximation_bounds(FatPolygon.rectangle(-0.01, -0.01, 10.01, 1.01), resolution)
        if (witness.C_in, witness.C_out) != (10, 36):
            failures.append(f"strip witness gave C_in={witness.C_in}, C_out={witness.C_out}")
        for seed in range(shapes):
            report = verify_approximation_bounds(random_fat_polygon(seed), resolution)
            if not (report.lemma3_ok and report.lemma4_ok):
                failures.append(f"shape seed={seed}: {report.to_dict()}")
        return {'check': 'grid_approximation', 'passed': not failures, 'cases': shapes + 1,
                'failures': len(failures), 'detail': '; '.join(failures[:10])}

    def _verify_audits(self, trials: int, settings: Dict[str, Any]) -> Dict[str, Any]:
        slack = float(self.config.get_harness_settings()['bound_slack'])
        failures = []
        for trial in range(trials):
            try:
                row = run_trial(settings['cells'], trial, int(settings['cells']), int(settings['robots']),
                                float(settings['speed_ratio']), float(settings['translation_speed']),
                                int(settings['master_seed']), slack)
                if not row['lawnmower_ok']:
                    failures.append(f"Trial {trial}: ALG {row['alg_time']} below lawn-mower bound "
                                    f"{row['lawnmower_bound']}")
            except SweepAbortedError as e:
                failures.append(str(e))
        return {'check': 'run_invariants', 'passed': not failures, 'cases': trials,
                'failures': len(failures), 'detail': '; '.join(failures[:10])}

    def _verify_sensing(self, draws: int, seed: int) -> List[Dict[str, Any]]:
        sensing = self.config.get_sensing_settings()
        p_fp, p_fn = float(sensing['p_fp']), float(sensing['p_fn'])
        rng = make_rng(seed)
        rows = []

        # one model call yields ``draws`` independent images
        bulk = SensorModel(p_fp, p_fn, samples_per_cell=draws, majority_threshold=1)
        for label, truth, p in (('false_positive_rate', False, p_fp), ('false_negative_rate', True, p_fn)):
            rate = float((draw_detections(truth, bulk, rng) != truth).mean())
            sigma = np.sqrt(p * (1 - p) / draws)
            rows.append({'check': label, 'passed': abs(rate - p) <= 3 * sigma, 'cases': draws,
                         'failures': int(abs(rate - p) > 3 * sigma),
                         'detail': f"observed {rate:.5f}, expected {p:.5f}"})

        model = SensorModel(0.0, 0.2)
        expected = cell_error_probability(0.2, 5, 3, true_is_roi=True)
        misses = sum(not classify_cell(True, model, rng) for _ in range(draws))
        rate = misses / draws
        sigma = np.sqrt(expected * (1 - expected) / draws)
        rows.append({'check': 'cell_miss_rate', 'passed': abs(rate - expected) <= 3 * sigma, 'cases': draws,
                     'failures': int(abs(rate - expected) > 3 * sigma),
                     'detail': f"observed {rate:.5f}, expected {expected:.5f}"})
        return rows
