"""Pipeline glue: per-trajectory metrics, pooled structure, and CSV/JSON I/O.

The per-trajectory path runs distances, jumps, KL, a private PCA, silhouette
k selection, and a persistence total on that trajectory's own states.  The
pooled path fits one PCA over every state in the dataset, clusters trajectory
endpoints, and runs the permutation-filtered persistence diagram on a
subsampled pooled cloud.  Per-trajectory randomness derives from a stable hash
of the sample id alone, so those metrics do not move with the analysis seed;
the seed governs the pooled artifacts.
"""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as dm
from .cluster import ClusterAssignment, SilhouetteReport, select_k, silhouette
from .model import Dataset, QUALITY_FIELDS, Trajectory, ValidationError
from .pca import PCAModel, pca_fit, pca_transform
from .stats import SweepTable
from .topology import (PersistenceConfig, PersistenceDiagram, rips_persistence,
                       significant_features, total_persistence)

METRICS_NAME = "metrics.csv"
# The first six columns are fixed by the trajectory-metrics interface; the
# rest are appended cluster/persistence/quality columns.
METRICS_COLUMNS = ("sample_id", "temperature", "top_p", "C", "n_jumps", "mean_kl",
                   "k_selected", "silhouette", "total_persistence") + QUALITY_FIELDS


@dataclass
class AnalysisSettings:
    normalize: bool = True
    jump_method: str = dm.DEFAULT_JUMP_METHOD
    jump_z: float = dm.DEFAULT_JUMP_Z
    k_max: int = 8
    min_variance: float = 0.85
    max_radius: float | None = None
    rho: float = 0.2
    n_permutations: int = 200
    # Persistence cost grows steeply with cloud size; the pooled cap trades
    # resolution for the permutation loop, the per-trajectory cap runs once
    # per sample so it can stay smaller still.
    max_points: int = 100
    trajectory_max_points: int = 60
    pooled: bool = True
    seed: int = 0


def _sample_seed(base_seed: int, sample_id: str) -> int:
    # Stable across processes, unlike hash(); order-independent by design.
    return (base_seed * 2654435761 + zlib.crc32(sample_id.encode())) % (2 ** 32)


@dataclass
class TrajectoryReport:
    sample_id: str
    temperature: float
    top_p: float
    continuity: float
    n_jumps: int
    jump_indices: list[int]
    mean_kl: float | None
    k_selected: int
    silhouette: float
    total_persistence: float
    quality: dict[str, float] | None = None

    def csv_row(self) -> dict:
        row = {
            "sample_id": self.sample_id,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "C": self.continuity,
            "n_jumps": self.n_jumps,
            "mean_kl": self.mean_kl,
            "k_selected": self.k_selected,
            "silhouette": self.silhouette,
            "total_persistence": self.total_persistence,
        }
        for name in QUALITY_FIELDS:
            row[name] = None if self.quality is None else self.quality[name]
        return row


def _subsample(points: np.ndarray, max_points: int, seed: int) -> np.ndarray:
    n = points.shape[0]
    if n <= max_points:
        return points
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=max_points, replace=False))
    return points[idx]


def trajectory_metrics(traj: Trajectory, settings: AnalysisSettings) -> TrajectoryReport:
    """Distances, jumps, KL, then reduce/cluster/persist on this trajectory."""
    cont = dm.continuity(traj, normalize=settings.normalize)
    jumps = dm.detect_jumps(cont.delta, method=settings.jump_method, z=settings.jump_z)
    try:
        kl = dm.mean_successive_kl(traj).mean_kl
    except ValidationError:
        kl = None
    seed = _sample_seed(0, traj.meta.sample_id)
    model = pca_fit(traj.states, min_variance=settings.min_variance)
    reduced = pca_transform(model, traj.states)
    k_max = min(settings.k_max, reduced.shape[0])
    k, _assignment, sil = select_k(reduced, k_max=k_max, seed=seed)
    cloud = _subsample(reduced, settings.trajectory_max_points, seed)
    diagram = rips_persistence(cloud, max_radius=settings.max_radius)
    total = total_persistence(diagram.bars)
    quality = None if traj.quality is None else traj.quality.as_dict()
    return TrajectoryReport(
        sample_id=traj.meta.sample_id,
        temperature=traj.meta.temperature,
        top_p=traj.meta.top_p,
        continuity=cont.continuity,
        n_jumps=len(jumps.indices),
        jump_indices=sorted(jumps.indices),
        mean_kl=kl,
        k_selected=k,
        silhouette=sil.score,
        total_persistence=total,
        quality=quality,
    )


@dataclass
class PooledArtifacts:
    pca_model: PCAModel
    endpoint_ids: list[str]
    endpoints: np.ndarray            # reduced endpoint coordinates
    k_selected: int
    assignment: ClusterAssignment
    endpoint_silhouette: SilhouetteReport
    diagram: PersistenceDiagram
    pooled_cloud: np.ndarray         # reduced subsampled states fed to topology


@dataclass
class AnalysisResult:
    reports: list[TrajectoryReport]
    pooled: PooledArtifacts | None
    settings: AnalysisSettings


def analyze_dataset(dataset: Dataset, settings: AnalysisSettings | None = None) -> AnalysisResult:
    settings = settings or AnalysisSettings()
    if not dataset.trajectories:
        raise ValidationError("no trajectories")
    ordered = sorted(dataset.trajectories, key=lambda t: t.meta.sample_id)
    reports = [trajectory_metrics(t, settings) for t in ordered]
    pooled = None
    if settings.pooled:
        all_states = np.vstack([t.states for t in ordered])
        model = pca_fit(all_states, min_variance=settings.min_variance)
        endpoints = pca_transform(model, np.vstack([t.states[-1] for t in ordered]))
        k_max = min(settings.k_max, endpoints.shape[0])
        k, assignment, sil = select_k(endpoints, k_max=k_max, seed=settings.seed)
        cloud = _subsample(pca_transform(model, all_states),
                           settings.max_points, settings.seed)
        config = PersistenceConfig(max_radius=settings.max_radius, rho=settings.rho,
                                   n_permutations=settings.n_permutations,
                                   seed=settings.seed)
        diagram = significant_features(cloud, config)
        pooled = PooledArtifacts(
            pca_model=model,
            endpoint_ids=[t.meta.sample_id for t in ordered],
            endpoints=endpoints,
            k_selected=k,
            assignment=assignment,
            endpoint_silhouette=sil,
            diagram=diagram,
            pooled_cloud=cloud,
        )
    return AnalysisResult(reports=reports, pooled=pooled, settings=settings)


@dataclass
class TemperatureProfile:
    temperatures: list[float]
    mean_continuity: list[float]
    endpoint_silhouette: list[float]  # two-group silhouette of that slice


def temperature_profile(dataset: Dataset, settings: AnalysisSettings | None = None,
                        k: int = 2) -> TemperatureProfile:
    """Per-temperature mean continuity and endpoint cluster quality.

    Endpoints are reduced with one PCA fit over all endpoints so slices are
    comparable, then each temperature slice is clustered with a fixed k.
    """
    from .cluster import kmeans

    settings = settings or AnalysisSettings()
    if not dataset.trajectories:
        raise ValidationError("no trajectories")
    by_temp: dict[float, list[Trajectory]] = {}
    for traj in dataset.trajectories:
        by_temp.setdefault(traj.meta.temperature, []).append(traj)
    ordered_all = sorted(dataset.trajectories, key=lambda t: t.meta.sample_id)
    model = pca_fit(np.vstack([t.states[-1] for t in ordered_all]),
                    min_variance=settings.min_variance)
    temperatures, mean_c, sils = [], [], []
    for temp in sorted(by_temp):
        members = sorted(by_temp[temp], key=lambda t: t.meta.sample_id)
        cont = [dm.continuity(t, normalize=settings.normalize).continuity
                for t in members]
        pts = pca_transform(model, np.vstack([t.states[-1] for t in members]))
        assignment = kmeans(pts, k=k, seed=settings.seed)
        sil = silhouette(pts, assignment.labels)
        temperatures.append(temp)
        mean_c.append(float(np.mean(cont)))
        sils.append(sil.score)
    return TemperatureProfile(temperatures=temperatures, mean_continuity=mean_c,
                              endpoint_silhouette=sils)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(reports: list[TrajectoryReport], path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for report in sorted(reports, key=lambda r: r.sample_id):
            row = report.csv_row()
            writer.writerow([_fmt(row[col]) for col in METRICS_COLUMNS])


def read_metrics_csv(path) -> list[dict]:
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in METRICS_COLUMNS[:6] if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"{path.name} is missing columns {missing}")
        for raw in reader:
            row: dict = {"sample_id": raw["sample_id"]}
            for key, value in raw.items():
                if key == "sample_id":
                    continue
                if value is None or value == "":
                    row[key] = None
                elif key in ("n_jumps", "k_selected"):
                    row[key] = int(value)
                else:
                    row[key] = float(value)
            rows.append(row)
    return rows


def write_diagram_csv(diagram: PersistenceDiagram, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dim", "birth", "death", "significant"])
        flags = diagram.significant or [False] * len(diagram.bars)
        for bar, flag in zip(diagram.bars, flags):
            death = "inf" if not bar.finite else repr(bar.death)
            writer.writerow([bar.dim, repr(bar.birth), death,
                             "true" if flag else "false"])


def write_cluster_csv(pooled: PooledArtifacts, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "cluster", "silhouette"])
        for sid, label, s in zip(pooled.endpoint_ids, pooled.assignment.labels,
                                 pooled.endpoint_silhouette.per_point):
            writer.writerow([sid, int(label), repr(float(s))])


def write_endpoints_csv(pooled: PooledArtifacts, path) -> None:
    path = Path(path)
    k = pooled.endpoints.shape[1]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id"] + [f"coord_{j}" for j in range(k)])
        for sid, row in zip(pooled.endpoint_ids, pooled.endpoints):
            writer.writerow([sid] + [repr(float(v)) for v in row])


def read_endpoints_csv(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    ids: list[str] = []
    coords: list[list[float]] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        names = [c for c in (reader.fieldnames or []) if c.startswith("coord_")]
        if not names:
            raise ValidationError(f"{path.name} has no coordinate columns")
        for raw in reader:
            ids.append(raw["sample_id"])
            coords.append([float(raw[c]) for c in names])
    return ids, np.asarray(coords)


def write_pca_json(model: PCAModel, path) -> None:
    doc = {
        "mean": [float(v) for v in model.mean],
        "components": [[float(v) for v in row] for row in model.components],
        "explained_ratio": [float(v) for v in model.explained_ratio],
        "low_variance": bool(model.low_variance),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def write_sweep_csv(table: SweepTable, path) -> None:
    from .stats import AGGREGATE_COLUMNS

    path = Path(path)
    header = ["temperature", "top_p", "n", "flagged"]
    for col in AGGREGATE_COLUMNS:
        header += [f"mean_{col}", f"std_{col}"]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for cell in table.rows:
            row = [repr(cell.temperature), repr(cell.top_p), cell.n,
                   "true" if cell.flagged else "false"]
            for col in AGGREGATE_COLUMNS:
                row.append("" if col not in cell.means else repr(cell.means[col]))
                row.append("" if col not in cell.stds else repr(cell.stds[col]))
            writer.writerow(row)


def write_summary_json(result: AnalysisResult, path) -> None:
    doc: dict = {"n_trajectories": len(result.reports)}
    if result.pooled is not None:
        pooled = result.pooled
        doc["pooled"] = {
            "k_selected": pooled.k_selected,
            "mean_silhouette": float(pooled.endpoint_silhouette.score),
            "pca_dims": int(pooled.pca_model.k),
            "low_variance": bool(pooled.pca_model.low_variance),
            "n_bars": len(pooled.diagram.bars),
            "n_significant": int(sum(pooled.diagram.significant or [])),
            "total_persistence": total_persistence(pooled.diagram.bars),
            "cloud_size": int(pooled.pooled_cloud.shape[0]),
        }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
