"""Fitness objectives, quality measures and NSGA-II style selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateOutput, Divergence
from .model import FittedModel, prediction_errors, simulate

__all__ = [
    "ObjectiveTriple",
    "QualityMeasures",
    "objectives",
    "quality",
    "evaluate",
    "rms",
    "bfr",
    "dominates",
    "non_dominated_sort",
    "crowding_distance",
    "crowding_truncate",
    "WORST",
]

WORST = float("inf")
METRIC_FORMS = ("paper", "conventional")


@dataclass(frozen=True)
class ObjectiveTriple:
    pred_sse: float
    sim_sse: float
    complexity: int
    failed: bool = False

    def as_tuple(self) -> tuple:
        return (self.pred_sse, self.sim_sse, self.complexity)


@dataclass(frozen=True)
class QualityMeasures:
    rms_p: float
    rms_s: float
    bfr_p: float
    bfr_s: float

    def as_dict(self) -> dict:
        return {"rms_p": self.rms_p, "rms_s": self.rms_s, "bfr_p": self.bfr_p, "bfr_s": self.bfr_s}


def rms(errors, n_transient: int = 0, form: str = "paper") -> float:
    """Root-mean-square error over samples ``n_transient .. N-1``.

    ``paper``: ``sqrt(sum e^2) / (N - N_t)``.
    ``conventional``: ``sqrt(sum e^2 / (N - N_t))``.
    """
    e = np.asarray(errors, dtype=float)[n_transient:]
    if e.size == 0:
        raise ValueError("no samples left after the transient")
    sse = float(e @ e)
    if form == "paper":
        return np.sqrt(sse) / e.size
    if form == "conventional":
        return float(np.sqrt(sse / e.size))
    raise ValueError(f"metric form must be one of {METRIC_FORMS}")


def bfr(errors, y, n_transient: int = 0, form: str = "paper") -> float:
    """Best fit ratio in percent over samples ``n_transient .. N-1``.

    ``paper``: ``100 (1 - sum e^2 / sum (y - mean y)^2)``.
    ``conventional``: ``100 (1 - ||e|| / ||y - mean y||)``.
    The mean is taken over the same samples.
    """
    e = np.asarray(errors, dtype=float)[n_transient:]
    yy = np.asarray(y, dtype=float)[n_transient:]
    dev = yy - yy.mean()
    sst = float(dev @ dev)
    if sst == 0.0:
        raise DegenerateOutput("measured output is constant over the scored range")
    sse = float(e @ e)
    if form == "paper":
        return 100.0 * (1.0 - sse / sst)
    if form == "conventional":
        return 100.0 * (1.0 - np.sqrt(sse) / np.sqrt(sst))
    raise ValueError(f"metric form must be one of {METRIC_FORMS}")


def _scored_from(fm: FittedModel, data, n_transient=None) -> int:
    nt = getattr(data, "n_transient", 0) if n_transient is None else n_transient
    return max(int(nt), fm.structure.max_lag)


def _errors(fm: FittedModel, data):
    y = np.asarray(data.y, dtype=float)
    pred_err = prediction_errors(fm, data)
    if not np.all(np.isfinite(pred_err)):
        pred_err = None
    try:
        sim_err = y - simulate(fm, data)
    except Divergence:
        sim_err = None
    return pred_err, sim_err


def evaluate(fm: FittedModel, data, n_transient: int | None = None, form: str = "paper",
             with_quality: bool = True):
    """Objectives and (optionally) quality measures from one prediction and one simulation."""
    start = _scored_from(fm, data, n_transient)
    if start >= len(data.y):
        obj = ObjectiveTriple(WORST, WORST, fm.complexity, True)
        return obj, (QualityMeasures(np.inf, np.inf, -np.inf, -np.inf) if with_quality else None)
    pred_err, sim_err = _errors(fm, data)
    seg = slice(start, None)
    pred_sse = WORST if pred_err is None else float(pred_err[seg] @ pred_err[seg])
    sim_sse = WORST if sim_err is None else float(sim_err[seg] @ sim_err[seg])
    failed = pred_err is None or sim_err is None
    obj = ObjectiveTriple(pred_sse, sim_sse, fm.complexity, failed)
    if not with_quality:
        return obj, None
    y = data.y
    q = QualityMeasures(
        rms_p=np.inf if pred_err is None else rms(pred_err, start, form),
        rms_s=np.inf if sim_err is None else rms(sim_err, start, form),
        bfr_p=-np.inf if pred_err is None else bfr(pred_err, y, start, form),
        bfr_s=-np.inf if sim_err is None else bfr(sim_err, y, start, form),
    )
    return obj, q


def objectives(fm: FittedModel, fitness_data) -> ObjectiveTriple:
    """Sum of squared prediction errors, sum of squared simulation errors, term count.

    Failed evaluations (diverging simulation, non-finite prediction) score
    ``inf`` in the affected objective.
    """
    return evaluate(fm, fitness_data, with_quality=False)[0]


def quality(fm: FittedModel, data, n_transient: int | None = None, form: str = "paper") -> QualityMeasures:
    """RMS and BFR of prediction and simulation.

    Scoring starts at ``max(n_transient, max_lag)``; earlier samples cannot be
    predicted by the model.
    """
    start = _scored_from(fm, data, n_transient)
    y = np.asarray(data.y, dtype=float)
    if start >= len(y):
        raise ValueError("n_transient must be smaller than the record length")
    dev = y[start:] - y[start:].mean()
    if float(dev @ dev) == 0.0:
        raise DegenerateOutput("measured output is constant over the scored range")
    return evaluate(fm, data, n_transient, form)[1]


# -- non-dominated sorting -------------------------------------------------------------

def _as_points(points) -> np.ndarray:
    arr = np.array(
        [p.as_tuple() if isinstance(p, ObjectiveTriple) else tuple(p) for p in points], dtype=float
    )
    if arr.size == 0:
        return arr.reshape(0, 3)
    return np.where(np.isnan(arr), np.inf, arr)


def dominates(a, b) -> bool:
    """``a`` is no worse than ``b`` everywhere and strictly better somewhere."""
    a = np.asarray(a.as_tuple() if isinstance(a, ObjectiveTriple) else a, dtype=float)
    b = np.asarray(b.as_tuple() if isinstance(b, ObjectiveTriple) else b, dtype=float)
    return bool(np.all(a <= b) and np.any(a < b))


def non_dominated_sort(points) -> list[list[int]]:
    """Partition point indices into successive non-dominated fronts."""
    P = _as_points(points)
    n = len(P)
    if n == 0:
        return []
    le = np.all(P[:, None, :] <= P[None, :, :], axis=2)
    lt = np.any(P[:, None, :] < P[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    fronts = []
    current = np.flatnonzero(count == 0)
    while current.size:
        fronts.append(current.tolist())
        count = count - dom[current].sum(axis=0)
        count[current] = -1
        current = np.flatnonzero(count == 0)
    return fronts


def crowding_distance(points) -> np.ndarray:
    """Crowding distance of each point within one front."""
    P = _as_points(points)
    n = len(P)
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for j in range(P.shape[1]):
        order = np.argsort(P[:, j], kind="stable")
        col = P[order, j]
        finite = col[np.isfinite(col)]
        span = finite.max() - finite.min() if finite.size else 0.0
        span = span if span > 0 else 1.0
        dist[order[0]] = dist[order[-1]] = np.inf
        with np.errstate(invalid="ignore"):
            gaps = np.nan_to_num(col[2:] - col[:-2], nan=0.0, posinf=np.inf) / span
        dist[order[1:-1]] += gaps
    return dist


def rank_and_crowding(points):
    """Front rank and crowding distance for every point."""
    P = _as_points(points)
    rank = np.zeros(len(P), dtype=int)
    crowd = np.zeros(len(P))
    fronts = non_dominated_sort(P)
    for r, front in enumerate(fronts):
        rank[front] = r
        crowd[front] = crowding_distance(P[front])
    return fronts, rank, crowd


def crowding_truncate(points, m: int, tiebreak=None) -> list[int]:
    """Indices of the ``m`` best points, whole fronts first.

    The front that straddles the cut is thinned by descending crowding
    distance, then ascending ``tiebreak`` value, then input order.
    """
    P = _as_points(points)
    if m <= 0:
        return []
    if m >= len(P):
        return list(range(len(P)))
    tiebreak = np.zeros(len(P)) if tiebreak is None else np.asarray(tiebreak, dtype=float)
    chosen: list[int] = []
    for front in non_dominated_sort(P):
        if len(chosen) + len(front) <= m:
            chosen.extend(front)
            if len(chosen) == m:
                break
            continue
        crowd = crowding_distance(P[front])
        keyed = sorted(range(len(front)), key=lambda i: (-crowd[i], tiebreak[front[i]], front[i]))
        chosen.extend(front[i] for i in keyed[: m - len(chosen)])
        break
    return chosen
