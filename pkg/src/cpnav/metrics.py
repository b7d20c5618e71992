"""Front quality metrics and experiment statistics.

Objective vectors are max-max pairs with non-negative components. The
S-measure of a front is the area between the front and the coordinate
axes, i.e. the union area of the rectangles [0, f1] x [0, f2] spanned by
its points (two-objective hypervolume with the origin as reference).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats


def dominates(a, b) -> bool:
    """Max-max Pareto dominance: a >= b componentwise with one strict."""
    return a[0] >= b[0] and a[1] >= b[1] and (a[0] > b[0] or a[1] > b[1])


def nondominated(points) -> np.ndarray:
    """Indices of the nondominated subset, duplicates collapsed to the first."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    keep = []
    for i, p in enumerate(pts):
        dominated = False
        for j, q in enumerate(pts):
            if i != j and (dominates(q, p) or (q[0] == p[0] and q[1] == p[1] and j < i)):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return np.asarray(keep, dtype=np.int64)


def s_measure(front) -> float:
    """Area dominated by a max-max front with reference point (0, 0).

    Accepts any point set with non-negative components; dominated members
    contribute nothing. Implemented as a descending-f1 staircase sweep.
    """
    pts = np.asarray(front, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        return 0.0
    if np.any(pts < 0.0):
        raise ValueError("s_measure requires non-negative objective values")
    order = np.argsort(-pts[:, 0], kind="stable")
    area = 0.0
    top = 0.0
    for i in order:
        f1, f2 = pts[i]
        if f2 > top:
            area += f1 * (f2 - top)
            top = f2
    return float(area)


def accumulate_front(fronts) -> np.ndarray:
    """Nondominated subset of the union of fronts, duplicates collapsed.

    Returned sorted by ascending f1 (hence descending f2); idempotent and
    independent of input order.
    """
    all_pts = [np.asarray(f, dtype=np.float64).reshape(-1, 2) for f in fronts]
    if not all_pts:
        return np.empty((0, 2), dtype=np.float64)
    union = np.concatenate(all_pts, axis=0)
    if union.shape[0] == 0:
        return np.empty((0, 2), dtype=np.float64)
    keep = nondominated(union)
    pts = union[keep]
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    return pts[order]


@dataclass(frozen=True)
class BoxStats:
    """Box-and-whisker summary; quartiles by inclusive linear interpolation,
    whiskers at the extreme data within 1.5 IQR of the nearer quartile."""

    min: float
    whisker_lo: float
    q1: float
    median: float
    mean: float
    q3: float
    whisker_hi: float
    max: float
    outliers: tuple


def boxplot_stats(values) -> BoxStats:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("boxplot_stats needs at least one value")
    q1, med, q3 = (float(q) for q in np.percentile(arr, [25.0, 50.0, 75.0]))
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    whisker_lo = float(np.min(inside))
    whisker_hi = float(np.max(inside))
    outliers = tuple(float(v) for v in np.sort(arr[(arr < lo_fence) | (arr > hi_fence)]))
    return BoxStats(min=float(np.min(arr)), whisker_lo=whisker_lo, q1=q1,
                    median=med, mean=float(np.mean(arr)), q3=q3,
                    whisker_hi=whisker_hi, max=float(np.max(arr)),
                    outliers=outliers)


def reached_fraction(results) -> float:
    """Fraction of episode results that touched at least one target."""
    results = list(results)
    if not results:
        raise ValueError("reached_fraction needs at least one result")
    hit = sum(1 for r in results if r.first_target_hit_step is not None)
    return hit / len(results)


def rank_sum_test(a, b) -> float:
    """Two-sided Wilcoxon rank-sum p-value comparing two samples.

    Exact enumeration for small tie-free samples (both below 20), normal
    approximation with tie correction otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("rank_sum_test needs two non-empty samples")
    has_ties = np.unique(np.concatenate([a, b])).size < a.size + b.size
    method = "exact" if (not has_ties and min(a.size, b.size) < 20) else "asymptotic"
    res = _scipy_stats.mannwhitneyu(a, b, alternative="two-sided", method=method)
    return float(res.pvalue)
