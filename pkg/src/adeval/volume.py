"""Monte-Carlo volume of a detector's normal-decision region.

A detector with score function f and threshold tau accepts (labels normal)
the points with f(x) < tau; everything at or above tau is flagged
anomalous.  The accepted fraction of a uniform sample over a fixed box
estimates the relative volume of the accept region.  Small volume at a
given false-positive budget means a tight model of the normal class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from adeval.curves import LabeledScores, build_roc, threshold_at_fpr

# Vectorized score function: maps an (m, d) array of points to (m,) scores.
ScoreFunction = Callable[[np.ndarray], np.ndarray]

_CHUNK = 16384


@dataclass(frozen=True)
class SamplingBox:
    """Axis-aligned box from which volume samples are drawn."""

    b_min: NDArray[np.float64]
    b_max: NDArray[np.float64]

    def __post_init__(self) -> None:
        b_min = np.asarray(self.b_min, dtype=np.float64)
        b_max = np.asarray(self.b_max, dtype=np.float64)
        if b_min.ndim != 1 or b_min.shape != b_max.shape or b_min.shape[0] < 1:
            raise ValueError("box bounds must be matching one-dimensional arrays")
        if not (np.isfinite(b_min).all() and np.isfinite(b_max).all()):
            raise ValueError("box bounds must be finite")
        if (b_min > b_max).any():
            raise ValueError("box must satisfy b_min <= b_max componentwise")
        object.__setattr__(self, "b_min", b_min)
        object.__setattr__(self, "b_max", b_max)

    @property
    def dim(self) -> int:
        return int(self.b_min.shape[0])


def bounding_box(points: np.ndarray) -> SamplingBox:
    """Componentwise min/max box of a point set (exact, no margin).

    Degenerate dimensions are allowed; sampling then repeats the single
    coordinate value.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError("points must be a nonempty (n, d) array")
    return SamplingBox(b_min=points.min(axis=0), b_max=points.max(axis=0))


@dataclass(frozen=True)
class VolumeEstimate:
    """Result of one Monte-Carlo volume estimate."""

    vol: float
    cvol: float
    threshold: float
    n_samples: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.vol <= 1.0:
            raise ValueError("vol must lie in [0, 1]")
        if self.cvol != 1.0 - self.vol:
            raise ValueError("cvol must equal 1 - vol exactly")


def mc_volume_at_fpr(
    f: ScoreFunction,
    box: SamplingBox,
    data: LabeledScores,
    alpha: float,
    n: int = 100_000,
    seed: int = 0,
) -> VolumeEstimate:
    """Estimate the accept-region volume at false-positive budget ``alpha``.

    The threshold is read off the empirical ROC curve of ``data`` at
    FPR = alpha; ``n`` points drawn uniformly from ``box`` (one stream,
    seeded by ``seed``) are scored with ``f`` and the fraction with a
    score strictly below the threshold is returned as ``vol``.  Points
    scoring exactly at the threshold count as anomalous.

    Parameters
    ----------
    f:
        Vectorized score function: (m, d) points to (m,) finite scores.
    box:
        Sampling box, normally the bounding box of the full dataset.  It
        must stay fixed across the models being compared.
    data:
        Labeled scores of the evaluated test sample (threshold source).
    alpha:
        Target false-positive rate in (0, 1].
    n:
        Number of uniform samples.
    seed:
        Stream seed; identical seeds reproduce the estimate exactly.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    tau = threshold_at_fpr(build_roc(data), alpha)
    rng = np.random.default_rng(seed)
    points = rng.uniform(box.b_min, box.b_max, size=(n, box.dim))
    accepted = 0
    for start in range(0, n, _CHUNK):
        chunk = points[start : start + _CHUNK]
        scores = np.asarray(f(chunk), dtype=np.float64)
        if scores.shape != (chunk.shape[0],):
            raise ValueError("score function must return one score per point")
        if not np.isfinite(scores).all():
            raise ValueError("score function returned a non-finite value")
        accepted += int((scores < tau).sum())
    vol = accepted / n
    return VolumeEstimate(vol=vol, cvol=1.0 - vol, threshold=tau, n_samples=n)


def cvol_at_fpr(
    f: ScoreFunction,
    box: SamplingBox,
    data: LabeledScores,
    alpha: float,
    n: int = 100_000,
    seed: int = 0,
) -> float:
    """Complement 1 - vol of :func:`mc_volume_at_fpr` (larger is better)."""
    return mc_volume_at_fpr(f, box, data, alpha, n=n, seed=seed).cvol
