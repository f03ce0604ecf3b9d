from __future__ import annotations

import itertools
import logging
import math

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from scipy.spatial.distance import cdist
from scipy.stats import mannwhitneyu, norm, rankdata

from constants import ALPHA_SWEEP, BASE_MULTIPLIERS, FLOAT_FORMAT
from errors import DegenerateError
from features import FEATURE_NAMES, FeatureVector, combined_score, extract_features, group_metrics
from planner import SearchStats
from utils import Mode, step_cost
from world import CellPath, MultiplierSet


logger = logging.getLogger(__name__)

# Largest sample size for which the Wilcoxon null distribution is enumerated exactly
EXACT_WILCOXON_MAX_N = 25
MIN_WILCOXON_N = 5

STATS_FIELDS = ("wall_time", "opened", "closed")
GROUP_FIELDS = ("no_overlapping", "directions")
RECORD_KEYS = ("start_id", "variant_id", "mode", "seed")
SUMMARY_METRICS = STATS_FIELDS + FEATURE_NAMES + ("score",)

# Metrics compared between the two generators, and between each generator and the corpus
COMPARED_METRICS = FEATURE_NAMES + ("score", "closed", "opened", "wall_time") + GROUP_FIELDS
CORPUS_METRICS = FEATURE_NAMES + ("score",)

PAIRED_TEST_COLUMNS = ("variant_id", "metric", "pairs", "attraction_mean", "feature_mean", "statistic", "p_value")
CORPUS_TEST_COLUMNS = ("variant_id", "mode", "metric", "generated", "recorded", "generated_mean", "recorded_mean",
                       "statistic", "p_value")


@dataclass(frozen=True)
class SweepRecord:
    '''
    One generated path of a sweep or evaluation run. variant_id is the alpha
    percentage, the multiplier permutation index or the target distance
    '''

    start_id: int
    variant_id: float
    mode: Mode
    features: FeatureVector
    stats: SearchStats
    path_ref: str
    path: CellPath
    seed: int = 0
    score: float = math.nan

    def metric(self, name: str) -> float:
        if name in STATS_FIELDS:
            return float(getattr(self.stats, name))

        if name == "score":
            return self.score

        return float(getattr(self.features, name))


@dataclass(frozen=True)
class DtwCurve:
    distances: Tuple[float, ...]
    percentages: Tuple[float, ...]

    def __len__(self) -> int:
        return len(self.distances)


def dtw(a, b) -> float:
    '''
    Dynamic time warping distance with Euclidean local cost and no window

    :raise DegenerateError if either sequence is empty
    '''

    if len(a) == 0 or len(b) == 0:
        raise DegenerateError("DTW needs two nonempty sequences")

    cost = cdist(np.asarray(a, dtype=float).reshape(len(a), -1), np.asarray(b, dtype=float).reshape(len(b), -1))
    cost = cost.tolist()

    n, m = len(cost), len(cost[0])
    previous = [math.inf] * (m + 1)
    previous[0] = 0.0
    for i in range(n):
        current = [math.inf] * (m + 1)
        row = cost[i]
        for j in range(m):
            current[j + 1] = row[j] + min(previous[j + 1], current[j], previous[j])
        previous = current

    return previous[m]


def dtw_curve(group: Sequence) -> DtwCurve:
    '''
    Sorted DTW distances over every unordered pair of the group, each paired
    with its cumulative percentage of pairs
    '''

    if len(group) < 2:
        raise DegenerateError(f"A DTW curve needs at least 2 paths, got {len(group)}")

    sequences = [list(g.cells) if isinstance(g, CellPath) else g for g in group]
    distances = sorted(dtw(a, b) for a, b in itertools.combinations(sequences, 2))
    count = len(distances)

    return DtwCurve(tuple(distances), tuple(100.0 * (i + 1) / count for i in range(count)))


def _exact_tail_counts(doubled_ranks: "list[int]") -> "list[int]":
    '''
    Number of sign assignments reaching every possible sum of (doubled) ranks
    '''

    counts = [1] + [0] * sum(doubled_ranks)
    reach = 0
    for rank in doubled_ranks:
        reach += rank
        for total in range(reach, rank - 1, -1):
            counts[total] += counts[total - rank]

    return counts


def wilcoxon_signed_rank(x, y) -> "tuple[float, float]":
    '''
    Two-sided Wilcoxon signed-rank test on paired samples. The statistic is
    the rank sum of the negative differences x - y. Zero differences are
    dropped and tied ranks averaged. The null distribution is enumerated
    exactly up to 25 pairs and approximated by a normal above

    :return (statistic, p_value)
    :raise DegenerateError if all differences are zero or fewer than 5 remain
    '''

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DegenerateError("Wilcoxon samples must be paired one-dimensional sequences")

    d = x - y
    d = d[d != 0]
    if d.size == 0:
        raise DegenerateError("degenerate: all differences are zero")

    n = d.size
    if n < MIN_WILCOXON_N:
        raise DegenerateError(f"Wilcoxon needs at least {MIN_WILCOXON_N} nonzero differences, got {n}")

    ranks = rankdata(np.abs(d))
    statistic = float(ranks[d < 0].sum())

    if n <= EXACT_WILCOXON_MAX_N:
        doubled = [int(round(2 * r)) for r in ranks]
        counts = _exact_tail_counts(doubled)
        w = int(round(2 * statistic))
        below = sum(counts[:w + 1])
        above = sum(counts[w:])
        p_value = min(1.0, 2 * min(below, above) / 2 ** n)
    else:
        mean = n * (n + 1) / 4.0
        _, tie_sizes = np.unique(np.abs(d), return_counts=True)
        variance = n * (n + 1) * (2 * n + 1) / 24.0 - float(((tie_sizes ** 3) - tie_sizes).sum()) / 48.0
        z = max(0.0, abs(statistic - mean) - 0.5) / math.sqrt(variance)
        p_value = min(1.0, max(2.0 * float(norm.sf(z)), np.finfo(float).tiny))

    return statistic, p_value


def enumerate_multipliers() -> "list[MultiplierSet]":
    '''
    Every permutation of the base multiplier vector, in lexicographic order
    of the permutation indices
    '''

    return [MultiplierSet(tuple(BASE_MULTIPLIERS[i] for i in permutation))
            for permutation in itertools.permutations(range(len(BASE_MULTIPLIERS)))]


def enumerate_alphas() -> "list[float]":
    return [float(alpha) for alpha in ALPHA_SWEEP]


def _fmean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def _pstd(values) -> float:
    values = list(values)
    mean = _fmean(values)
    return math.sqrt(math.fsum((v - mean) ** 2 for v in values) / len(values))


def records_frame(records: Sequence[SweepRecord]) -> pd.DataFrame:
    '''
    One row per record with its keys, search statistics, features and score
    '''

    rows = [{
        "id": record.path_ref,
        "start_id": record.start_id,
        "variant_id": record.variant_id,
        "mode": record.mode.value,
        "seed": record.seed,
        **{name: record.metric(name) for name in SUMMARY_METRICS},
    } for record in records]

    return pd.DataFrame(rows, columns=("id",) + RECORD_KEYS + SUMMARY_METRICS)


def _summarise(frame: pd.DataFrame, keys: Sequence[str], metrics: Sequence[str]) -> pd.DataFrame:
    aggregations = {"count": (metrics[0], "size")}
    for name in metrics:
        aggregations[f"{name}_mean"] = (name, _fmean)
        aggregations[f"{name}_std"] = (name, _pstd)

    return frame.groupby(list(keys), sort=True).agg(**aggregations).reset_index()


def aggregate_sweep(records: Sequence[SweepRecord]) -> pd.DataFrame:
    '''
    Per (mode, variant) mean and population standard deviation of the search
    statistics, the path features and the score. Rows come out in mode then
    variant order whatever the input order
    '''

    if not records:
        raise DegenerateError("Nothing to aggregate")

    return _summarise(records_frame(records), ("mode", "variant_id"), SUMMARY_METRICS)


def group_table(records: Sequence[SweepRecord], keys: Sequence[str] = ("mode", "start_id")) -> pd.DataFrame:
    '''
    Group metrics of the paths sharing the given keys, which must pin the
    start. By default every variant of one mode and start forms a group
    '''

    if not records:
        raise DegenerateError("Nothing to group")

    frame = records_frame(records)
    frame["path"] = [record.path for record in records]

    rows = []
    for key, group in frame.groupby(list(keys), sort=True):
        metrics = group_metrics(list(group["path"]))
        rows.append((*key, len(group), metrics.no_overlapping, metrics.directions))

    return pd.DataFrame(rows, columns=list(keys) + ["paths", *GROUP_FIELDS])


def summarise_groups(groups: pd.DataFrame, keys: Sequence[str] = ("mode",)) -> pd.DataFrame:
    return _summarise(groups, keys, GROUP_FIELDS)


def _pairs(frame: pd.DataFrame, keys: Sequence[str], metric: str) -> pd.DataFrame:
    modes = [Mode.ATTRACTION.value, Mode.FEATURE.value]
    if frame.empty:
        return pd.DataFrame(columns=modes)

    table = frame.pivot(index=list(keys), columns="mode", values=metric)
    return table.reindex(columns=modes).dropna()


def paired_tests(records: Sequence[SweepRecord], metrics: Sequence[str] = COMPARED_METRICS) -> pd.DataFrame:
    '''
    Wilcoxon signed-rank tests of attraction mode against feature mode, per
    variant and metric, over the instances both modes completed. Group
    metrics pair the two modes' groups of each start
    '''

    frame = records_frame(records)
    groups = group_table(records, ("variant_id", "mode", "start_id")) if records else frame

    rows = []
    for variant_id in sorted(frame["variant_id"].unique()):
        instances = frame[frame["variant_id"] == variant_id]
        starts = groups[groups["variant_id"] == variant_id]

        for metric in metrics:
            if metric in GROUP_FIELDS:
                pairs = _pairs(starts, ("start_id",), metric)
            else:
                pairs = _pairs(instances, ("start_id", "seed"), metric)

            attraction_values = pairs[Mode.ATTRACTION.value].astype(float).tolist()
            feature_values = pairs[Mode.FEATURE.value].astype(float).tolist()
            row = {
                "variant_id": float(variant_id),
                "metric": metric,
                "pairs": len(pairs),
                "attraction_mean": _fmean(attraction_values) if len(pairs) else math.nan,
                "feature_mean": _fmean(feature_values) if len(pairs) else math.nan,
                "statistic": math.nan,
                "p_value": math.nan,
            }
            try:
                row["statistic"], row["p_value"] = wilcoxon_signed_rank(feature_values, attraction_values)
            except DegenerateError as e:
                logger.debug(f"No test for {metric} at {variant_id:g}: {e}")

            rows.append(row)

    return pd.DataFrame(rows, columns=PAIRED_TEST_COLUMNS)


def truncate_to_distance(path: CellPath, distance: float) -> CellPath:
    '''
    Shortest prefix of the path covering the distance, or the whole path when
    it is shorter
    '''

    covered = 0.0
    for index in range(1, len(path)):
        (r0, c0), (r1, c1) = path[index - 1], path[index]
        covered += step_cost(r1 - r0, c1 - c0)
        if covered >= distance:
            return CellPath(path.cells[:index + 1])

    return path


def corpus_frame(corpus: Sequence[CellPath], distance: float, landscape=None) -> pd.DataFrame:
    '''
    Features and score of the recorded paths cut to one target distance
    '''

    rows = []
    for path in corpus:
        features = extract_features(truncate_to_distance(path, distance))
        score = combined_score(landscape, features) if landscape is not None else math.nan
        rows.append({**features.as_row(), "score": score})

    return pd.DataFrame(rows, columns=FEATURE_NAMES + ("score",))


def corpus_tests(records: Sequence[SweepRecord], corpus: Sequence[CellPath], landscape=None,
                 metrics: Sequence[str] = CORPUS_METRICS) -> pd.DataFrame:
    '''
    Each generator against the recorded corpus, per target distance and
    metric. The samples are independent, so the test is the two-sided
    Mann-Whitney rank-sum test

    :return one row per distance, mode and metric
    '''

    frame = records_frame(records)

    rows = []
    for distance in sorted(frame["variant_id"].unique()):
        recorded = corpus_frame(corpus, float(distance), landscape)

        for mode, generated in frame[frame["variant_id"] == distance].groupby("mode", sort=True):
            for metric in metrics:
                x = generated[metric].dropna().astype(float)
                y = recorded[metric].dropna().astype(float)
                row = {
                    "variant_id": float(distance),
                    "mode": mode,
                    "metric": metric,
                    "generated": len(x),
                    "recorded": len(y),
                    "generated_mean": _fmean(x) if len(x) else math.nan,
                    "recorded_mean": _fmean(y) if len(y) else math.nan,
                    "statistic": math.nan,
                    "p_value": math.nan,
                }
                if len(x) and len(y) and pd.concat([x, y]).nunique() > 1:
                    result = mannwhitneyu(x, y, alternative="two-sided")
                    row["statistic"], row["p_value"] = float(result.statistic), float(result.pvalue)
                else:
                    logger.debug(f"No corpus test for {mode} {metric} at {distance:g}")

                rows.append(row)

    return pd.DataFrame(rows, columns=CORPUS_TEST_COLUMNS)


def compare_curves(curves_a: "dict[int, DtwCurve]", curves_f: "dict[int, DtwCurve]") -> pd.DataFrame:
    '''
    Wilcoxon test between the two generators' DTW curves of each start,
    pairing distances by rank
    '''

    rows = []
    for start_id in sorted(set(curves_a) & set(curves_f)):
        a, f = curves_a[start_id], curves_f[start_id]
        row = {"start_id": start_id, "pairs": min(len(a), len(f)), "statistic": math.nan, "p_value": math.nan}
        if len(a) == len(f):
            try:
                row["statistic"], row["p_value"] = wilcoxon_signed_rank(f.distances, a.distances)
            except DegenerateError as e:
                logger.debug(f"No curve test for start {start_id}: {e}")
        else:
            logger.warning(f"Curves of start {start_id} differ in length ({len(a)} vs {len(f)}), not compared")

        rows.append(row)

    return pd.DataFrame(rows, columns=("start_id", "pairs", "statistic", "p_value"))


def write_table(rows, path, columns: Optional[Sequence[str]] = None):
    '''
    Write a frame, or a list of row dicts, as a comma-separated table with a
    header. Floats keep full precision and NaN is written as an empty field
    '''

    if isinstance(rows, pd.DataFrame):
        frame = rows if columns is None else rows.reindex(columns=list(columns))
    else:
        frame = pd.DataFrame(list(rows), columns=list(columns) if columns is not None else None)

    frame.to_csv(path, index=False, na_rep="", float_format=f"%{FLOAT_FORMAT}")


def read_table(path) -> pd.DataFrame:
    '''
    Read a table written by write_table. Empty fields come back as NaN

    :raise DegenerateError if the file is not a table
    '''

    try:
        return pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DegenerateError(f"Malformed table {path}: {e}") from e


def write_curve(curve: DtwCurve, path):
    write_table(pd.DataFrame({"percentage": curve.percentages, "distance": curve.distances}), path)
