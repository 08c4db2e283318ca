"""k-means++ clustering and silhouette scoring for attractor structure.

The silhouette of point i is (b(i) - a(i)) / max(a(i), b(i)) where a is the
mean distance to its own cluster (excluding itself) and b the smallest mean
distance to any other cluster.  Conventions for the degenerate cases: a
singleton cluster has a(i) = 0 (so s(i) = 1 when b > 0), and max(a, b) = 0
gives s(i) = 0 so the score stays defined on coincident clusters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ValidationError

MAX_ITER = 300


@dataclass
class ClusterAssignment:
    labels: np.ndarray           # (n,) ints in [0, k)
    centroids: np.ndarray        # (k, dim)
    inertia: float
    seed: int
    inertia_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


@dataclass
class SilhouetteReport:
    per_point: np.ndarray
    score: float                 # mean silhouette over all points
    intra: np.ndarray            # a(i)
    nearest_other: np.ndarray    # b(i)


def _sq_dists_to(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            # Remaining mass is zero (duplicate-heavy data): pick uniformly.
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), r))
            idx = min(idx, n - 1)
        centers[c] = points[idx]
        closest = np.minimum(closest, ((points - centers[c]) ** 2).sum(axis=1))
    return centers


def kmeans(points: np.ndarray, k: int, seed: int = 0) -> ClusterAssignment:
    """Lloyd iterations from a k-means++ start; deterministic given seed.

    An empty cluster is re-seeded at the point farthest from its assigned
    centroid rather than treated as an error.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"points must be 2-d, got shape {x.shape}")
    n = x.shape[0]
    if not (2 <= k <= n):
        raise ValidationError(f"need 2 <= k <= n={n}, got k={k}")
    rng = np.random.default_rng(seed)
    centers = _plus_plus_init(x, k, rng)
    labels = np.full(n, -1)
    history: list[float] = []
    for _ in range(MAX_ITER):
        sq = _sq_dists_to(x, centers)
        new_labels = np.argmin(sq, axis=1)
        for c in range(k):
            mask = new_labels == c
            if not mask.any():
                dist_to_own = sq[np.arange(n), new_labels]
                far = int(np.argmax(dist_to_own))
                if dist_to_own[far] <= 0:
                    raise ValidationError("zero variance: cannot form k distinct clusters")
                centers[c] = x[far]
                new_labels[far] = c
                mask = new_labels == c
            centers[c] = x[mask].mean(axis=0)
        history.append(float(((x - centers[new_labels]) ** 2).sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    inertia = float(((x - centers[labels]) ** 2).sum())
    return ClusterAssignment(labels=labels, centroids=centers, inertia=inertia,
                             seed=seed, inertia_history=history)


def silhouette(points: np.ndarray, labels: np.ndarray) -> SilhouetteReport:
    x = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    n = x.shape[0]
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValidationError("silhouette undefined for k=1")
    dist = np.sqrt(np.maximum(_sq_dists_to(x, x), 0.0))
    a = np.zeros(n)
    b = np.zeros(n)
    masks = {c: labels == c for c in uniq}
    for i in range(n):
        own = masks[labels[i]].copy()
        own[i] = False
        a[i] = dist[i, own].mean() if own.any() else 0.0
        b[i] = min(dist[i, masks[c]].mean() for c in uniq if c != labels[i])
    denom = np.maximum(a, b)
    per_point = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return SilhouetteReport(per_point=per_point, score=float(per_point.mean()),
                            intra=a, nearest_other=b)


def select_k(points: np.ndarray, k_max: int = 8, seed: int = 0
             ) -> tuple[int, ClusterAssignment, SilhouetteReport]:
    """Pick k in [2, k_max] maximizing mean silhouette; ties go to smaller k."""
    x = np.asarray(points, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ValidationError("need at least 2 points to cluster")
    if k_max < 2:
        raise ValidationError("k_max must be >= 2")
    if n < k_max:
        raise ValidationError(f"need n >= k_max, got n={n}, k_max={k_max}")
    if np.all(x == x[0]):
        raise ValidationError("zero variance: all points identical")
    best = None
    best_score = -np.inf
    for k in range(2, k_max + 1):
        assignment = kmeans(x, k, seed=seed)
        report = silhouette(x, assignment.labels)
        # Selection scores singletons as 0, not the s(i)=1 the public
        # convention gives them; otherwise fragmenting into singletons
        # always wins the comparison.
        counts = np.bincount(assignment.labels, minlength=k)
        per = np.where(counts[assignment.labels] > 1, report.per_point, 0.0)
        score = float(per.mean())
        if score > best_score:
            best = (k, assignment, report)
            best_score = score
    return best
