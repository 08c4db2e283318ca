"""Regression and correlation layer over per-trajectory metric rows.

grouped_fit estimates a random-intercept model in two deterministic stages
instead of iterative maximum likelihood: fixed effects by OLS on group-mean-
centered data, then the group variance by method of moments on group residual
means.  Rows are plain dicts keyed by the metric CSV column names, so the
module works directly on analysis output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy import stats as sstats

from .model import QUALITY_FIELDS, ValidationError

# External predictor tokens mapped onto metric table columns.
PREDICTOR_COLUMNS = {
    "C": "C",
    "Q": "silhouette",
    "P": "total_persistence",
}
DEFAULT_GROUP_VARS = ("temperature", "top_p")
AGGREGATE_COLUMNS = ("C", "silhouette", "total_persistence") + QUALITY_FIELDS

STAR_LEVELS = ((0.001, "***"), (0.01, "**"), (0.05, "*"))


def stars(p_value: float) -> str:
    for level, mark in STAR_LEVELS:
        if p_value < level:
            return mark
    return ""


@dataclass(frozen=True)
class CoefficientEstimate:
    estimate: float
    std_error: float
    p_value: float

    @property
    def stars(self) -> str:
        return stars(self.p_value)


@dataclass
class OLSReport:
    coefficients: dict[str, CoefficientEstimate]
    residuals: np.ndarray
    rss: float
    df: int


def _p_values(estimates: np.ndarray, std_errors: np.ndarray, df: int) -> np.ndarray:
    out = np.ones_like(estimates)
    for i, (b, se) in enumerate(zip(estimates, std_errors)):
        if se == 0.0:
            out[i] = 1.0 if b == 0.0 else 0.0
        else:
            out[i] = 2.0 * float(sstats.t.sf(abs(b) / se, df))
    return out


def _collinear_columns(x: np.ndarray, names: list[str], rank: int) -> list[str]:
    # QR with pivoting: columns pivoted past the numerical rank are the
    # linearly dependent ones.
    _q, _r, pivot = sla.qr(x, mode="economic", pivoting=True)
    return sorted(names[j] for j in pivot[rank:])


def ols_fit(x: np.ndarray, y: np.ndarray,
            names: list[str] | None = None) -> OLSReport:
    """Least squares with classical standard errors and two-sided t tests."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=np.float64)
    n, p = x.shape
    if names is None:
        names = [f"x{j}" for j in range(p)]
    if len(names) != p:
        raise ValidationError(f"{len(names)} names for {p} columns")
    if y.shape != (n,):
        raise ValidationError(f"y shape {y.shape} does not match design rows {n}")
    if n <= p:
        raise ValidationError(f"need n > p, got n={n}, p={p}")
    rank = np.linalg.matrix_rank(x)
    if rank < p:
        cols = _collinear_columns(x, names, rank)
        raise ValidationError(f"design matrix is rank deficient; collinear columns: {cols}")
    beta, _res, _rank, _sv = np.linalg.lstsq(x, y, rcond=None)
    residuals = y - x @ beta
    rss = float(residuals @ residuals)
    df = n - p
    sigma2 = rss / df
    cov = sigma2 * np.linalg.inv(x.T @ x)
    ses = np.sqrt(np.maximum(np.diag(cov), 0.0))
    pvals = _p_values(beta, ses, df)
    coeffs = {name: CoefficientEstimate(float(b), float(se), float(pv))
              for name, b, se, pv in zip(names, beta, ses, pvals)}
    return OLSReport(coefficients=coeffs, residuals=residuals, rss=rss, df=df)


@dataclass(frozen=True)
class RegressionSpec:
    response: str
    predictors: tuple[str, ...] = ("C", "Q", "P")
    group_vars: tuple[str, ...] = DEFAULT_GROUP_VARS

    def __post_init__(self):
        if not self.predictors:
            raise ValidationError("need at least one predictor")
        unknown = [p for p in self.predictors if p not in PREDICTOR_COLUMNS]
        if unknown:
            raise ValidationError(
                f"unknown predictors {unknown}; choose from {sorted(PREDICTOR_COLUMNS)}")


@dataclass
class RegressionReport:
    response: str
    coefficients: dict[str, CoefficientEstimate]
    group_variance: float
    n: int
    n_groups: int
    method: str = "grouped"
    warning: str | None = None


def _extract(rows: list[dict], keys: list[str]) -> np.ndarray:
    out = np.zeros((len(rows), len(keys)))
    for i, row in enumerate(rows):
        for j, key in enumerate(keys):
            value = row.get(key)
            if value is None or (isinstance(value, str) and value == ""):
                raise ValidationError(f"row {i} is missing field '{key}'")
            out[i, j] = float(value)
    return out


def grouped_fit(spec: RegressionSpec, rows: list[dict]) -> RegressionReport:
    """Random-intercept fit of a quality field on metric predictors.

    Falls back to plain OLS (with a warning flag) when only one group is
    present, since a group variance is then unidentifiable.
    """
    if not rows:
        raise ValidationError("no rows to fit")
    columns = [PREDICTOR_COLUMNS[p] for p in spec.predictors]
    y = _extract(rows, [spec.response])[:, 0]
    x = _extract(rows, columns)
    group_keys = [tuple(row.get(g) for g in spec.group_vars) for row in rows]
    groups = sorted(set(group_keys))
    n, p = x.shape
    if len(groups) < 2:
        ones = np.ones((n, 1))
        report = ols_fit(np.hstack([ones, x]), y, names=["intercept"] + list(spec.predictors))
        coeffs = {k: v for k, v in report.coefficients.items() if k != "intercept"}
        return RegressionReport(response=spec.response, coefficients=coeffs,
                                group_variance=0.0, n=n, n_groups=1,
                                method="ols", warning="single group: plain OLS fit")
    index = {g: i for i, g in enumerate(groups)}
    gid = np.array([index[k] for k in group_keys])
    sizes = np.bincount(gid, minlength=len(groups))
    if sizes.min() < 2:
        small = groups[int(np.argmin(sizes))]
        raise ValidationError(f"group {small} has fewer than 2 rows")

    yc = y.copy()
    xc = x.copy()
    for g in range(len(groups)):
        mask = gid == g
        yc[mask] -= yc[mask].mean()
        xc[mask] -= xc[mask].mean(axis=0)
    if np.linalg.matrix_rank(xc) < p:
        cols = _collinear_columns(xc, list(spec.predictors), np.linalg.matrix_rank(xc))
        raise ValidationError(
            f"centered design is rank deficient; collinear columns: {cols}")
    beta, _res, _rank, _sv = np.linalg.lstsq(xc, yc, rcond=None)
    residuals_c = yc - xc @ beta
    rss = float(residuals_c @ residuals_c)
    df = n - p - (len(groups) - 1)
    if df <= 0:
        raise ValidationError(f"not enough rows: df={df}")
    sigma2 = rss / df
    gram_inv = np.linalg.inv(xc.T @ xc)
    ses = np.sqrt(np.maximum(sigma2 * np.diag(gram_inv), 0.0))
    pvals = _p_values(beta, ses, df)
    coeffs = {name: CoefficientEstimate(float(b), float(se), float(pv))
              for name, b, se, pv in zip(spec.predictors, beta, ses, pvals)}

    # Method of moments: spread of group residual means beyond what residual
    # noise alone explains, floored at zero.
    raw_resid = y - x @ beta
    group_means = np.array([raw_resid[gid == g].mean() for g in range(len(groups))])
    between = float(np.var(group_means, ddof=1))
    noise_share = sigma2 * float(np.mean(1.0 / sizes))
    group_variance = max(0.0, between - noise_share)
    return RegressionReport(response=spec.response, coefficients=coeffs,
                            group_variance=group_variance, n=n,
                            n_groups=len(groups))


@dataclass(frozen=True)
class CorrelationReport:
    pearson: float
    spearman: float


def correlations(x, y) -> CorrelationReport:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"paired 1-d arrays required, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise ValidationError(f"need at least 3 pairs, got {x.size}")
    if np.std(x) == 0.0 or np.std(y) == 0.0:
        raise ValidationError("zero variance in correlation input")
    pearson = float(sstats.pearsonr(x, y).statistic)
    spearman = float(sstats.spearmanr(x, y).statistic)
    return CorrelationReport(pearson=pearson, spearman=spearman)


def lexical_diversity(tokens) -> float:
    """log(#types) / log(#tokens); 0 for a single repeated type."""
    tokens = list(tokens)
    if len(tokens) < 2:
        raise ValidationError(f"need at least 2 tokens, got {len(tokens)}")
    return math.log(len(set(tokens))) / math.log(len(tokens))


@dataclass
class SweepCell:
    temperature: float
    top_p: float
    n: int
    means: dict[str, float] = field(default_factory=dict)
    stds: dict[str, float] = field(default_factory=dict)
    flagged: bool = False  # fewer than 2 samples


@dataclass
class SweepTable:
    rows: list[SweepCell]


def sweep_aggregate(rows: list[dict]) -> SweepTable:
    """Per-cell mean/std of metric and quality columns, sorted by cell."""
    if not rows:
        raise ValidationError("no rows to aggregate")
    cells: dict[tuple[float, float], list[dict]] = {}
    for row in rows:
        key = (float(row["temperature"]), float(row["top_p"]))
        cells.setdefault(key, []).append(row)
    out = []
    for (temp, top_p) in sorted(cells):
        members = cells[(temp, top_p)]
        cell = SweepCell(temperature=temp, top_p=top_p, n=len(members),
                         flagged=len(members) < 2)
        for col in AGGREGATE_COLUMNS:
            values = [float(r[col]) for r in members
                      if r.get(col) is not None and r.get(col) != ""]
            if values:
                arr = np.asarray(values)
                cell.means[col] = float(arr.mean())
                cell.stds[col] = float(arr.std())
        out.append(cell)
    return SweepTable(rows=out)
