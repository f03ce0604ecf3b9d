from __future__ import annotations

import json
import logging
import math

from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from config import RunConfig
from constants import (
    ALPHA_PERCENT, CORPUS_FEATURES_FILE, CORPUS_PATHS_FILE, EVAL_DIR, LANDSCAPE_FILE, PATHS_FILE, SEARCH_DIR,
    SPACING_FILE, STATS_FILE, SVG_DIR, SWEEP_DIR, TRAJECTORIES_FILE, WORLD_FILE
)
from errors import BudgetExhaustedError, ConfigError, DegenerateError, NoPathError, TrailForgeError
from evaluation import (
    SweepRecord, aggregate_sweep, compare_curves, corpus_tests, dtw_curve, enumerate_alphas, enumerate_multipliers,
    group_table, paired_tests, read_table, summarise_groups, write_curve, write_table
)
from features import (
    FEATURE_NAMES, FeatureVector, RewardLandscape, combined_score, extract_features, fit_landscape, load_landscape,
    save_landscape
)
from ingest import (
    load_cell_paths, load_pois, load_roads, load_trajectories, map_real_trajectory, point_spacings, synth_corpus,
    write_cell_paths, write_trajectories
)
from planner import AlphaPolicy, GenerationRequest, SearchStats, dump_search, generate, load_search
from postprocess import SpacingModel, Trajectory, fit_spacing, spacing_from_moments, subsample
from render import render_heatmap, render_landscape, render_paths, render_search
from utils import Mode, SweepKind, format_float
from world import Cell, CellPath, GridWorld, MultiplierSet, build_world, load_world, save_world


logger = logging.getLogger(__name__)

STATS_COLUMNS = (
    ("id", "start_id", "row", "col", "seed", "distance", "mode", "status", "achieved_distance", "opened", "closed",
     "wall_time") + FEATURE_NAMES + ("score", "kept_points")
)

RECORD_COLUMNS = ("id", "start_id", "variant_id", "mode", "status", "opened", "closed", "wall_time") \
    + FEATURE_NAMES + ("score",)

OK = "ok"


@dataclass(frozen=True)
class GenerationTask:
    task_id: str
    start_id: int
    start: Cell
    seed: int
    target_distance: float
    mode: Mode
    multipliers: MultiplierSet
    alpha_policy: AlphaPolicy
    node_budget: int
    log_search: bool
    variant_id: float


@dataclass(frozen=True)
class TaskOutcome:
    task: GenerationTask
    status: str
    stats: SearchStats
    path: Optional[CellPath] = None
    achieved_distance: float = math.nan
    features: Optional[FeatureVector] = None
    score: float = math.nan
    trajectory: Optional[Trajectory] = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OK

    def as_record(self) -> SweepRecord:
        return SweepRecord(self.task.start_id, self.task.variant_id, self.task.mode, self.features, self.stats,
                           self.task.task_id, self.path, self.task.seed, self.score)


# Shared read-only state of a worker process
_worker_state = {}


def _init_worker(world: GridWorld, landscape: RewardLandscape, spacing: SpacingModel):
    _worker_state["world"] = world
    _worker_state["landscape"] = landscape
    _worker_state["spacing"] = spacing


def _run_task(task: GenerationTask) -> TaskOutcome:
    '''
    Generate, measure and subsample one path. Failures come back as outcomes
    so one bad instance never stops a batch
    '''

    world = _worker_state["world"]
    landscape = _worker_state["landscape"]
    spacing = _worker_state["spacing"]

    request = GenerationRequest(task.start, task.target_distance, task.multipliers, task.alpha_policy, task.mode,
                                landscape, task.seed, task.node_budget, task.log_search)
    try:
        result = generate(world, request)
    except BudgetExhaustedError as e:
        return TaskOutcome(task, "budget_exhausted", e.stats, error=str(e))
    except TrailForgeError as e:
        return TaskOutcome(task, "failed", SearchStats(), error=str(e))

    features = extract_features(result.path)
    score = combined_score(landscape, features) if landscape is not None else math.nan
    trajectory = subsample(result.path, spacing, world.cell_size_m, task.seed) if spacing is not None else None

    return TaskOutcome(task, OK, result.stats, result.path, result.achieved_distance, features, score, trajectory)


def _features_of(row) -> FeatureVector:
    return FeatureVector(int(row.total_length), *(float(getattr(row, name)) for name in FEATURE_NAMES[1:]))


def select_starts(world: GridWorld, count: int, seed: int) -> "list[Cell]":
    '''
    Distinct road cells drawn with the given seed
    '''

    cells = world.road_cells()
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(cells), size=min(count, len(cells)), replace=False)
    return [cells[int(i)] for i in picks]


def _subset(items: Sequence, limit: Optional[int], seed: int) -> list:
    '''
    A seeded subset of at most limit items, in their original order
    '''

    items = list(items)
    if limit is None or limit >= len(items):
        return items

    rng = np.random.default_rng(seed)
    picks = sorted(int(i) for i in rng.choice(len(items), size=limit, replace=False))
    return [items[i] for i in picks]


class TrailForge:
    '''
    Runs the experiment pipeline over one output directory: build the world and
    the reward landscape, then generate, sweep, evaluate and render against
    those artifacts
    '''

    def __init__(self, config: RunConfig, workers: int = 1):
        self.config = config
        self.workers = workers
        self.output_dir = Path(config.output_dir)

        self.world = None
        self.landscape = None
        self.spacing = None

    def build(self) -> dict:
        '''
        Build the world, the corpus, the reward landscape and the spacing model
        and write them to the output directory
        '''

        config = self.config
        if config.road_file is None:
            raise ConfigError("road_file is required to build a world")

        roads = load_roads(config.road_file)
        pois, rejected = load_pois(config.poi_file) if config.poi_file is not None else ([], 0)
        world = build_world(roads, pois, config.cell_size_m)

        corpus, spacing = self._corpus(world)
        corpus_features = [extract_features(path) for _, path in corpus]
        landscape = fit_landscape(corpus_features, config.max_trf, config.z_threshold, config.trf_middle)

        self.output_dir.mkdir(parents=True, exist_ok=True)
        save_world(world, self.output_dir / WORLD_FILE)
        save_landscape(landscape, self.output_dir / LANDSCAPE_FILE)
        self._save_spacing(spacing)
        write_cell_paths(corpus, self.output_dir / CORPUS_PATHS_FILE)
        write_table([{"id": path_id, **f.as_row()} for (path_id, _), f in zip(corpus, corpus_features)],
                    self.output_dir / CORPUS_FEATURES_FILE, ("id",) + FEATURE_NAMES)

        self.world, self.landscape, self.spacing = world, landscape, spacing

        logger.info(f"Built artifacts in {self.output_dir}")

        return {
            "rows": world.rows,
            "cols": world.cols,
            "road_cells": len(world.road_cells()),
            "pois": len(world.pois),
            "rejected_pois": rejected,
            "dropped_pois": world.dropped_pois,
            "corpus": len(corpus),
        }

    def _corpus(self, world: GridWorld) -> "tuple[list[tuple[str, CellPath]], SpacingModel]":
        config = self.config
        if config.corpus_file is None:
            walks = synth_corpus(world, config.corpus_size, config.corpus_seed, config.corpus_mean_steps)
            return [(f"walk{i}", path) for i, path in enumerate(walks)], \
                spacing_from_moments(config.spacing_mean_m, config.spacing_std_m)

        trajectories = load_trajectories(config.corpus_file)
        corpus = []
        for trajectory in trajectories:
            try:
                path = map_real_trajectory(world, trajectory)
            except NoPathError as e:
                logger.warning(f"Skipping trajectory {trajectory.id}: {e}")
                continue

            if len(path) < 2:
                logger.warning(f"Skipping trajectory {trajectory.id}: it maps onto a single cell")
                continue

            corpus.append((trajectory.id, path))

        logger.info(f"Mapped {len(corpus)} of {len(trajectories)} recorded trajectories")

        return corpus, fit_spacing(point_spacings(trajectories))

    def _save_spacing(self, spacing: SpacingModel):
        document = {
            "mu": format_float(spacing.mu),
            "sigma": format_float(spacing.sigma),
            "mean_m": format_float(spacing.mean),
            "std_m": format_float(spacing.std),
        }
        with open(self.output_dir / SPACING_FILE, "w", encoding="utf-8") as f:
            json.dump(document, f, indent=1, sort_keys=True)
            f.write("\n")

    def _artifact(self, name: str) -> Path:
        path = self.output_dir / name
        if not path.exists():
            raise ConfigError(f"{path} not found, run build first")

        return path

    def load(self):
        '''
        Read the built world, landscape and spacing model
        '''

        self.world = load_world(self._artifact(WORLD_FILE))
        self.landscape = load_landscape(self._artifact(LANDSCAPE_FILE))

        with open(self._artifact(SPACING_FILE), encoding="utf-8") as f:
            document = json.load(f)

        try:
            self.spacing = SpacingModel(float(document["mu"]), float(document["sigma"]))
        except (KeyError, ValueError) as e:
            raise DegenerateError(f"Malformed spacing file: {e}") from e

    def _run(self, tasks: "list[GenerationTask]") -> "list[TaskOutcome]":
        '''
        Run the tasks on the worker pool. Outcomes come back in task order
        whatever the scheduling
        '''

        init_args = (self.world, self.landscape, self.spacing)
        if self.workers > 1 and len(tasks) > 1:
            with Pool(processes=self.workers, initializer=_init_worker, initargs=init_args) as pool:
                outcomes = pool.map(_run_task, tasks, chunksize=1)
        else:
            _init_worker(*init_args)
            outcomes = [_run_task(task) for task in tasks]

        for outcome in outcomes:
            if not outcome.ok:
                logger.warning(f"{outcome.task.task_id}: {outcome.status}: {outcome.error}")

        failed = sum(1 for outcome in outcomes if not outcome.ok)
        logger.info(f"Ran {len(tasks)} generations on {self.workers} workers, {failed} failed")

        return outcomes

    def generate(self) -> "list[TaskOutcome]":
        '''
        One generation per start, seed, target distance and mode. Writes the
        subsampled trajectories, the raw paths, the statistics table and,
        when search logging is on, one search dump per generation
        '''

        self.load()
        config = self.config

        tasks = []
        for start_id, start in enumerate(select_starts(self.world, config.starts, config.seed)):
            for seed in range(config.seed, config.seed + config.seeds):
                for distance in config.distances:
                    for mode in config.modes:
                        tasks.append(GenerationTask(
                            f"s{start_id}-r{seed}-d{distance:g}-{mode.value}", start_id, start, seed, distance,
                            mode, config.multipliers, config.alpha_policy(distance), config.node_budget(distance),
                            config.log_search, distance,
                        ))

        outcomes = self._run(tasks)
        done = [outcome for outcome in outcomes if outcome.ok]

        write_trajectories([o.trajectory.to_raw(o.task.task_id, self.world.projection) for o in done],
                           self.output_dir / TRAJECTORIES_FILE)
        write_cell_paths([(o.task.task_id, o.path) for o in done], self.output_dir / PATHS_FILE)
        write_table([self._stats_row(o) for o in outcomes], self.output_dir / STATS_FILE, STATS_COLUMNS)

        if config.log_search:
            search_dir = self.output_dir / SEARCH_DIR
            search_dir.mkdir(exist_ok=True)
            for outcome in done:
                dump_search(outcome.stats, search_dir / f"{outcome.task.task_id}.csv")

        logger.info(f"Generated {len(done)} of {len(outcomes)} trajectories")

        return outcomes

    def _stats_row(self, outcome: TaskOutcome) -> dict:
        task = outcome.task
        row = {
            "id": task.task_id,
            "start_id": task.start_id,
            "row": task.start[0],
            "col": task.start[1],
            "seed": task.seed,
            "distance": float(task.target_distance),
            "mode": task.mode.value,
            "status": outcome.status,
            "achieved_distance": outcome.achieved_distance,
            "opened": outcome.stats.opened,
            "closed": outcome.stats.closed,
            "wall_time": outcome.stats.wall_time,
            "score": outcome.score,
            "kept_points": len(outcome.trajectory) if outcome.trajectory is not None else "",
        }
        if outcome.features is not None:
            row.update(outcome.features.as_row())

        return row

    def sweep(self, kind: SweepKind) -> "list[TaskOutcome]":
        '''
        Vary alpha (equal multipliers) or the multiplier permutation (alpha at
        half the distance) for every start and mode, then write the records,
        the per-variant summary, the group metrics of each mode and start over
        all variants, the DTW curves per start and the curve tests
        '''

        self.load()
        config = self.config
        distance = config.sweep_distance

        if kind is SweepKind.ALPHA:
            variants = [(alpha, MultiplierSet.uniform(), AlphaPolicy.from_percent(alpha, distance, config.epsilon))
                        for alpha in enumerate_alphas()]
        else:
            policy = AlphaPolicy.from_percent(ALPHA_PERCENT, distance, config.epsilon)
            permutations = _subset(enumerate(enumerate_multipliers()), config.max_permutations, config.seed)
            variants = [(float(index), m, policy) for index, m in permutations]

        starts = _subset(enumerate(select_starts(self.world, config.starts, config.seed)), config.max_starts,
                         config.seed)

        tasks = []
        for start_id, start in starts:
            for variant_id, multipliers, policy in variants:
                for mode in config.modes:
                    tasks.append(GenerationTask(
                        f"s{start_id}-{kind.value}{variant_id:g}-{mode.value}", start_id, start, config.seed,
                        distance, mode, multipliers, policy, config.node_budget(distance), False, variant_id,
                    ))

        outcomes = self._run(tasks)
        done = [outcome for outcome in outcomes if outcome.ok]

        sweep_dir = self.output_dir / SWEEP_DIR
        sweep_dir.mkdir(parents=True, exist_ok=True)
        prefix = kind.value

        write_table([self._record_row(o) for o in outcomes], sweep_dir / f"{prefix}_records.csv", RECORD_COLUMNS)
        write_cell_paths([(o.task.task_id, o.path) for o in done], sweep_dir / f"{prefix}_paths.txt")
        if done:
            records = [o.as_record() for o in done]
            write_table(aggregate_sweep(records), sweep_dir / f"{prefix}_summary.csv")
            write_table(group_table(records), sweep_dir / f"{prefix}_groups.csv")

        curves = {mode: {} for mode in config.modes}
        for mode in config.modes:
            for start_id, _ in starts:
                group = [o.path for o in done if o.task.mode is mode and o.task.start_id == start_id]
                if len(group) < 2:
                    logger.warning(f"Start {start_id} has {len(group)} {mode.value} paths, no DTW curve")
                    continue

                curve = dtw_curve(group)
                curves[mode][start_id] = curve
                write_curve(curve, sweep_dir / f"{prefix}_{mode.value}_s{start_id}.csv")

        if Mode.ATTRACTION in curves and Mode.FEATURE in curves:
            write_table(compare_curves(curves[Mode.ATTRACTION], curves[Mode.FEATURE]),
                        sweep_dir / f"{prefix}_curve_tests.csv", ("start_id", "pairs", "statistic", "p_value"))

        logger.info(f"{prefix} sweep: {len(done)} of {len(outcomes)} generations completed")

        return outcomes

    def _record_row(self, outcome: TaskOutcome) -> dict:
        row = {
            "id": outcome.task.task_id,
            "start_id": outcome.task.start_id,
            "variant_id": outcome.task.variant_id,
            "mode": outcome.task.mode.value,
            "status": outcome.status,
            "opened": outcome.stats.opened,
            "closed": outcome.stats.closed,
            "wall_time": outcome.stats.wall_time,
            "score": outcome.score,
        }
        if outcome.features is not None:
            row.update(outcome.features.as_row())

        return row

    def evaluate(self) -> "tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]":
        '''
        Summarise the generated trajectories per target distance and mode,
        test the two generators against each other and test each of them
        against the recorded corpus cut to the same distance

        :return the summary, the paired tests and the corpus tests
        '''

        paths = dict(load_cell_paths(self._artifact(PATHS_FILE)))
        corpus = [path for _, path in load_cell_paths(self._artifact(CORPUS_PATHS_FILE))]
        landscape = load_landscape(self._artifact(LANDSCAPE_FILE))

        stats = read_table(self._artifact(STATS_FILE))
        records = [
            SweepRecord(int(row.start_id), float(row.distance), Mode(row.mode), _features_of(row),
                        SearchStats(int(row.opened), int(row.closed), float(row.wall_time)), str(row.id),
                        paths[str(row.id)], int(row.seed), float(row.score))
            for row in stats[stats["status"] == OK].itertuples(index=False)
        ]

        if not records:
            raise DegenerateError("No completed generations to evaluate")

        summary = aggregate_sweep(records)
        groups = summarise_groups(group_table(records, ("variant_id", "mode", "start_id")), ("variant_id", "mode"))
        tests = paired_tests(records)
        against_corpus = corpus_tests(records, corpus, landscape)

        eval_dir = self.output_dir / EVAL_DIR
        eval_dir.mkdir(parents=True, exist_ok=True)
        write_table(summary, eval_dir / "summary.csv")
        write_table(groups, eval_dir / "groups.csv")
        write_table(tests, eval_dir / "tests.csv")
        write_table(against_corpus, eval_dir / "corpus_tests.csv")

        logger.info(f"Evaluated {len(records)} trajectories against {len(corpus)} recorded paths")

        return summary, tests, against_corpus

    def render(self) -> "list[Path]":
        '''
        SVG views of the built and generated artifacts: the attraction heat map,
        the landscape planes, the generated paths and every search dump
        '''

        self.load()
        svg_dir = self.output_dir / SVG_DIR
        svg_dir.mkdir(parents=True, exist_ok=True)
        written = []

        render_heatmap(self.world, self.config.multipliers, svg_dir / "heatmap.svg")
        written.append(svg_dir / "heatmap.svg")

        table = read_table(self._artifact(CORPUS_FEATURES_FILE))
        corpus = [_features_of(row) for row in table.itertuples(index=False)]

        render_landscape(self.landscape, corpus, svg_dir / "landscape.svg")
        written.append(svg_dir / "landscape.svg")

        paths_file = self.output_dir / PATHS_FILE
        if paths_file.exists():
            render_paths(self.world, [path for _, path in load_cell_paths(paths_file)], svg_dir / "paths.svg")
            written.append(svg_dir / "paths.svg")

        search_dir = self.output_dir / SEARCH_DIR
        if search_dir.is_dir():
            for dump in sorted(search_dir.glob("*.csv")):
                target = svg_dir / f"search_{dump.stem}.svg"
                render_search(self.world, load_search(dump), target)
                written.append(target)

        return written
