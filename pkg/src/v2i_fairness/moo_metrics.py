"""Pareto-front quality metrics: hypervolume, GD, IGD, spacing.

All metrics assume minimisation.  Hypervolume is exact: a sweep for two
objectives and the WFG-style inclusion–exclusion recursion for three or more
(the fairness problem has one objective per lane, so four).  GD uses the
classical p=2 definition sqrt(sum of squared nearest distances) / |front|;
IGD is GD with the arguments swapped; spacing is the standard deviation of
nearest-neighbour L1 distances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _as_points(front) -> np.ndarray:
    pts = np.asarray(front, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.size == 0:
        raise ValueError(f"expected a non-empty 2-D point set, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("point set contains non-finite values")
    return pts


def nondominated(points: np.ndarray) -> np.ndarray:
    """Rows of `points` not dominated by any other row (minimisation)."""
    pts = _as_points(points)
    pts = np.unique(pts, axis=0)
    keep = np.ones(len(pts), dtype=bool)
    for i, p in enumerate(pts):
        if not keep[i]:
            continue
        dominated = np.all(pts <= p, axis=1) & np.any(pts < p, axis=1)
        if np.any(dominated & keep):
            keep[i] = False
    return pts[keep]


def hypervolume(front, reference_point) -> float:
    """Lebesgue measure of the region dominated by `front` up to the reference."""
    pts = _as_points(front)
    ref = np.asarray(reference_point, dtype=float)
    if ref.shape != (pts.shape[1],):
        raise ValueError(f"reference point shape {ref.shape} does not match "
                         f"{pts.shape[1]} objectives")
    if np.any(pts > ref):
        raise ValueError("some point lies beyond the reference point")
    pts = nondominated(pts)
    if pts.shape[1] == 1:
        return float(ref[0] - pts.min())
    if pts.shape[1] == 2:
        return _hv_sweep_2d(pts, ref)
    # WFG recursion benefits from a deterministic sort: later points limit
    # earlier ones more aggressively when sorted on the first objective.
    order = np.lexsort(pts.T[::-1])
    return _hv_wfg(pts[order], ref)


def _hv_sweep_2d(pts: np.ndarray, ref: np.ndarray) -> float:
    order = np.argsort(pts[:, 0])
    pts = pts[order]
    total = 0.0
    for k, (f1, f2) in enumerate(pts):
        right = ref[0] if k + 1 == len(pts) else pts[k + 1, 0]
        total += (ref[1] - f2) * (right - f1)
    return float(total)


def _hv_wfg(pts: np.ndarray, ref: np.ndarray) -> float:
    total = 0.0
    for k in range(len(pts)):
        total += np.prod(ref - pts[k])
        rest = pts[k + 1:]
        if len(rest):
            limited = nondominated(np.maximum(pts[k], rest))
            total -= _hv_wfg(limited, ref)
    return float(total)


def generational_distance(front, reference_front) -> float:
    """sqrt(sum of squared nearest-reference distances) / |front|."""
    pts = _as_points(front)
    ref = _as_points(reference_front)
    diff = pts[:, None, :] - ref[None, :, :]
    nearest_sq = np.min(np.einsum("ijk,ijk->ij", diff, diff), axis=1)
    return float(np.sqrt(nearest_sq.sum()) / len(pts))


def inverted_generational_distance(front, reference_front) -> float:
    """GD with the arguments swapped: reference measured against the front."""
    return generational_distance(reference_front, front)


def spacing(front) -> float:
    """Standard deviation of nearest-neighbour L1 distances across the front."""
    pts = _as_points(front)
    if len(pts) < 2:
        raise ValueError("spacing needs at least two points")
    l1 = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2)
    np.fill_diagonal(l1, np.inf)
    return float(np.std(l1.min(axis=1)))


@dataclass(frozen=True)
class MetricContext:
    """Fixed reference data so per-generation metrics are comparable.

    The reference point must be weakly dominated by no evaluated point; the
    conventional choice (see `from_initial`) is the per-objective maximum of
    the initial population scaled by 1.1, which later generations can only
    move away from.
    """

    reference_point: np.ndarray
    reference_front: np.ndarray
    normalization: tuple[np.ndarray, np.ndarray] | None = None  # per-obj (lo, hi)

    def __post_init__(self):
        if _as_points(self.reference_front).shape[1] != len(self.reference_point):
            raise ValueError("reference front/point dimensionality mismatch")

    @classmethod
    def from_initial(cls, initial_objectives, reference_front) -> "MetricContext":
        init = _as_points(initial_objectives)
        ref_point = init.max(axis=0) * 1.1
        # a degenerate all-zero objective leaves no volume; nudge the point off
        ref_point = np.where(ref_point > 0, ref_point, 1e-9)
        return cls(reference_point=ref_point,
                   reference_front=_as_points(reference_front))

    def evaluate(self, front) -> dict[str, float]:
        pts = nondominated(_as_points(front))
        clipped = np.minimum(pts, self.reference_point)
        return {
            "hypervolume": hypervolume(clipped, self.reference_point),
            "gd": generational_distance(pts, self.reference_front),
            "igd": inverted_generational_distance(pts, self.reference_front),
            "spacing": spacing(pts) if len(pts) >= 2 else 0.0,
        }
