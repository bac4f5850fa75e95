"""Evaluation metrics: model-level detection comparisons and
behaviour-level trajectory comparisons.

Model-level metrics only consider objects within RANGE_CUTOFF of ego.
Trajectory metrics resample both traces onto the union of their
timestamps by linear interpolation, then integrate with a left-Riemann
sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RANGE_CUTOFF = 50.0


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 1.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 1.0

    @property
    def accuracy(self) -> float:
        total = self.tp + self.fp + self.fn + self.tn
        return (self.tp + self.tn) / total if total else 1.0


def classification_metrics(predicted, reference, distance,
                           max_range: float = RANGE_CUTOFF) -> ConfusionCounts:
    """Confusion counts over aligned (actor, frame) rows.

    `reference` is the detector's flag when scoring a surrogate against
    the detector, or all-true when scoring against ground truth. Rows
    beyond max_range are excluded.
    """
    predicted = np.asarray(predicted, dtype=bool)
    reference = np.asarray(reference, dtype=bool)
    distance = np.asarray(distance, dtype=float)
    if predicted.size == 0:
        raise ValueError("no rows to score")
    keep = distance <= max_range
    p, r = predicted[keep], reference[keep]
    return ConfusionCounts(
        tp=int(np.sum(p & r)), fp=int(np.sum(p & ~r)),
        fn=int(np.sum(~p & r)), tn=int(np.sum(~p & ~r)))


def sp_mse(errors: np.ndarray, distance: np.ndarray,
           max_range: float = RANGE_CUTOFF) -> float:
    """Mean squared Euclidean position error over matched rows in range.

    `errors` holds per-row (dx, dy) of prediction minus ground truth.
    """
    errors = np.asarray(errors, dtype=float)
    distance = np.asarray(distance, dtype=float)
    keep = distance <= max_range
    if not np.any(keep):
        raise ValueError("no matched rows within range")
    e = errors[keep]
    return float(np.mean(np.sum(e * e, axis=1)))


# --- trajectory traces ------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryTrace:
    """Time series of one closed-loop run."""
    timestamps: np.ndarray        # (T,)
    positions: np.ndarray         # (T, 2) ego position
    velocities: np.ndarray        # (T, 2) ego velocity vector
    brake: np.ndarray             # (T,)
    collision_times: tuple[float, ...] = ()
    truncated: bool = False

    def __post_init__(self):
        t = self.timestamps
        if len(t) != len(self.positions) or len(t) != len(self.velocities) \
                or len(t) != len(self.brake):
            raise ValueError("trace series must have equal length")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("timestamps must be strictly increasing")


def _resample(trace_t: np.ndarray, values: np.ndarray,
              t_common: np.ndarray) -> np.ndarray:
    out = np.empty((len(t_common), values.shape[1]))
    for k in range(values.shape[1]):
        out[:, k] = np.interp(t_common, trace_t, values[:, k])
    return out


def _common_times(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    lo = max(t1[0], t2[0])
    hi = min(t1[-1], t2[-1])
    if hi <= lo:
        raise ValueError("traces do not overlap in time")
    merged = np.union1d(t1, t2)
    return merged[(merged >= lo) & (merged <= hi)]


def mean_eucl(t1: np.ndarray, v1: np.ndarray, t2: np.ndarray,
              v2: np.ndarray) -> float:
    """Time-averaged Euclidean distance between two vector time series."""
    tc = _common_times(t1, t2)
    d = np.linalg.norm(_resample(t1, v1, tc) - _resample(t2, v2, tc), axis=1)
    dt = np.diff(tc)
    span = tc[-1] - tc[0]
    return float(np.sum(d[:-1] * dt) / span)


def max_eucl(t1: np.ndarray, v1: np.ndarray, t2: np.ndarray,
             v2: np.ndarray) -> float:
    """Largest instantaneous Euclidean distance between two series."""
    tc = _common_times(t1, t2)
    d = np.linalg.norm(_resample(t1, v1, tc) - _resample(t2, v2, tc), axis=1)
    return float(d.max())


def mean_eucl_position(a: TrajectoryTrace, b: TrajectoryTrace) -> float:
    return mean_eucl(a.timestamps, a.positions, b.timestamps, b.positions)


def mean_eucl_velocity(a: TrajectoryTrace, b: TrajectoryTrace) -> float:
    return mean_eucl(a.timestamps, a.velocities, b.timestamps, b.velocities)


def max_eucl_position(a: TrajectoryTrace, b: TrajectoryTrace) -> float:
    return max_eucl(a.timestamps, a.positions, b.timestamps, b.positions)


def max_eucl_velocity(a: TrajectoryTrace, b: TrajectoryTrace) -> float:
    return max_eucl(a.timestamps, a.velocities, b.timestamps, b.velocities)


@dataclass(frozen=True)
class BrakingSummary:
    mba: float
    tmba: float
    braked: bool


def mba_tmba(trace: TrajectoryTrace) -> BrakingSummary:
    """Maximum braking amplitude and the first time it is reached.

    A run that never brakes reports (0, 0) with braked=False.
    """
    brake = np.asarray(trace.brake, dtype=float)
    mba = float(brake.max()) if len(brake) else 0.0
    if mba <= 0.0:
        return BrakingSummary(0.0, 0.0, False)
    first = int(np.argmax(brake >= mba))
    return BrakingSummary(mba, float(trace.timestamps[first]), True)


def collision_interval_cdf(collision_times_per_run: list[list[float]]):
    """Pooled empirical CDF of gaps between consecutive collisions.

    Gaps are computed within each run and pooled. Returns (sorted gaps,
    cumulative fractions, median); all empty when fewer than two
    collisions occur in every run.
    """
    gaps: list[float] = []
    for times in collision_times_per_run:
        ordered = sorted(times)
        gaps.extend(b - a for a, b in zip(ordered, ordered[1:]))
    if not gaps:
        return np.array([]), np.array([]), float("nan")
    gaps_arr = np.sort(np.array(gaps))
    cdf = np.arange(1, len(gaps_arr) + 1) / len(gaps_arr)
    return gaps_arr, cdf, float(np.median(gaps_arr))


# --- planner divergence bound ----------------------------------------------

def pkl_bound(reference_positions: np.ndarray, replan, n_samples: int,
              bandwidth: float, rng: np.random.Generator):
    """Divergence between a reference plan and surrogate-driven replans.

    For each timestep t, `replan(t, rng)` produces one replanned ego
    position under a fresh surrogate sample. The negative log-density of
    the reference position is estimated with a Gaussian kernel of the
    given bandwidth over n_samples replans, summed over timesteps; the
    companion upper bound applies the expectation outside the log.

    Returns (kde_estimate, jensen_bound).
    """
    if n_samples < 2:
        raise ValueError("need at least two replan samples")
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")
    reference_positions = np.asarray(reference_positions, dtype=float)
    T = len(reference_positions)
    h = bandwidth
    log_norm = math.log(math.sqrt(2.0 * math.pi) * h)
    kde_total = 0.0
    bound_total = 0.0
    for t in range(T):
        sq = np.empty(n_samples)
        for j in range(n_samples):
            pos = np.asarray(replan(t, rng), dtype=float)
            diff = reference_positions[t] - pos
            sq[j] = float(diff @ diff)
        # KDE with scalar Gaussian kernel on the displacement norm
        log_kernels = -0.5 * sq / (h * h) - log_norm
        m = log_kernels.max()
        log_density = m + math.log(np.mean(np.exp(log_kernels - m)))
        kde_total += -log_density
        bound_total += float(np.mean(0.5 * sq / (h * h) + log_norm))
    return kde_total, bound_total


def normalized_pairwise_table(table: dict[tuple[str, str], float],
                              reference: tuple[str, str]) -> dict[tuple[str, str], float]:
    """Divide every entry by the reference pair's value; diagonal is 0."""
    if reference not in table:
        raise KeyError(f"reference pair {reference} missing from table")
    norm = table[reference]
    if norm <= 0.0:
        raise ValueError("reference entry must be positive")
    out = {}
    for pair, value in table.items():
        out[pair] = 0.0 if pair[0] == pair[1] else value / norm
    return out
