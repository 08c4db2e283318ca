"""PCA for reducing latent states to 2-3 plot/cluster-friendly dimensions.

Fitting targets the smallest k in [2, 3] whose cumulative explained variance
exceeds a threshold (default 0.85); when even k=3 falls short the model is
returned with ``low_variance`` set instead of failing, since downstream
clustering and persistence remain well defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ValidationError


@dataclass
class PCAModel:
    mean: np.ndarray             # (d,)
    components: np.ndarray       # (k, d), orthonormal rows
    explained_ratio: np.ndarray  # (k,), non-increasing
    low_variance: bool = False   # set when even the largest allowed k misses the target

    @property
    def k(self) -> int:
        return self.components.shape[0]


def _fix_signs(components: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each component made positive, for
    # reproducibility across platforms and refits.
    out = components.copy()
    for i, row in enumerate(out):
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            out[i] = -row
    return out


def pca_fit(points: np.ndarray, min_dims: int = 2, max_dims: int = 3,
            min_variance: float = 0.85) -> PCAModel:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"points must be 2-d, got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise ValidationError("PCA needs at least 2 points")
    mean = x.mean(axis=0)
    centered = x - mean
    if not np.any(centered):
        raise ValidationError("zero variance: all points identical")
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    ratios = eigvals / eigvals.sum()

    lo = min(min_dims, d)
    hi = min(max_dims, d)
    k = hi
    low_variance = True
    for cand in range(lo, hi + 1):
        if ratios[:cand].sum() > min_variance:
            k = cand
            low_variance = False
            break
    components = _fix_signs(eigvecs[:, :k].T)
    return PCAModel(mean=mean, components=components,
                    explained_ratio=ratios[:k], low_variance=low_variance)


def pca_transform(model: PCAModel, points: np.ndarray) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.mean.shape[0]:
        raise ValidationError(
            f"point dimension {x.shape[1]} does not match model dimension {model.mean.shape[0]}")
    y = (x - model.mean) @ model.components.T
    return y[0] if single else y


def pca_inverse_transform(model: PCAModel, reduced: np.ndarray) -> np.ndarray:
    y = np.asarray(reduced, dtype=np.float64)
    return y @ model.components + model.mean
