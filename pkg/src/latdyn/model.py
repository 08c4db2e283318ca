"""Core domain types and trajectory file I/O.

A trajectory is an ordered sequence of latent state vectors recorded while a
model (or the built-in simulator) generates a sequence, together with the
decoding parameters that produced it and optional per-step token data and
text-quality scores.  All other modules consume trajectories through the
types defined here; files on disk are plain JSON so that independently
written tools can produce and consume them.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

MANIFEST_NAME = "manifest.json"

# Fields of the quality block, in canonical file order.
QUALITY_FIELDS = ("log_ppl", "lttr", "spelling", "grammar", "coherence")
_UNIT_INTERVAL_FIELDS = ("lttr", "spelling", "grammar", "coherence")

DIST_SUM_TOL = 1e-6


class SchemaError(ValueError):
    """A file does not conform to the trajectory or manifest schema."""


class ValidationError(ValueError):
    """Structurally parseable data violates a domain invariant."""


@dataclass(frozen=True)
class DecodingParams:
    """Decoding configuration attached to a trajectory."""

    temperature: float
    top_p: float
    sample_id: str
    prompt: str = ""
    model_id: str = ""
    layer_index: int = 0

    def __post_init__(self):
        # >= 0 rather than > 0: noise-free simulator runs carry temperature 0.
        if not (self.temperature >= 0 and math.isfinite(self.temperature)):
            raise ValidationError(f"temperature must be non-negative and finite, got {self.temperature}")
        if not (0 < self.top_p <= 1):
            raise ValidationError(f"top_p must be in (0, 1], got {self.top_p}")


@dataclass(frozen=True)
class QualityScores:
    """Externally computed text-quality scores (ingested, never computed here)."""

    log_ppl: float
    lttr: float
    spelling: float
    grammar: float
    coherence: float

    def __post_init__(self):
        for name in QUALITY_FIELDS:
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"quality field {name!r} must be finite, got {v}")
        for name in _UNIT_INTERVAL_FIELDS:
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"quality field {name!r} must lie in [0, 1], got {v}")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in QUALITY_FIELDS}


@dataclass
class Trajectory:
    """A latent trajectory: (T+1) states of dimension d plus metadata.

    ``states`` has shape (T+1, d); optional ``token_ids`` has length T and
    optional ``token_distributions`` has shape (T, vocab), each row a
    probability vector.
    """

    states: np.ndarray
    meta: DecodingParams
    token_ids: list[int] | None = None
    token_distributions: np.ndarray | None = None
    quality: QualityScores | None = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.token_distributions is not None:
            self.token_distributions = np.asarray(self.token_distributions, dtype=np.float64)
        self.validate()

    @property
    def num_steps(self) -> int:
        """Number of transitions T (one less than the number of states)."""
        return self.states.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def validate(self) -> None:
        s = self.states
        if s.ndim != 2:
            raise ValidationError(f"states must be a 2-d array, got shape {s.shape}")
        if s.shape[0] < 2:
            raise ValidationError("trajectory needs at least 2 states (T >= 1)")
        if s.shape[1] < 1:
            raise ValidationError("state dimension must be >= 1")
        if not np.all(np.isfinite(s)):
            raise ValidationError("states contain non-finite entries")
        T = self.num_steps
        if self.token_ids is not None:
            if len(self.token_ids) != T:
                raise ValidationError(
                    f"token_ids length {len(self.token_ids)} != T={T}")
            if not all(isinstance(t, (int, np.integer)) for t in self.token_ids):
                raise ValidationError("token_ids must be integers")
        if self.token_distributions is not None:
            d = self.token_distributions
            if d.ndim != 2 or d.shape[0] != T:
                raise ValidationError(
                    f"token_distributions must have shape (T, vocab) with T={T}, got {d.shape}")
            if not np.all(np.isfinite(d)):
                raise ValidationError("token_distributions contain non-finite entries")
            if np.any(d < 0):
                raise ValidationError("token_distributions contain negative entries")
            sums = d.sum(axis=1)
            bad = np.nonzero(np.abs(sums - 1.0) > DIST_SUM_TOL)[0]
            if bad.size:
                raise ValidationError(
                    f"token_distributions row {bad[0]} sums to {sums[bad[0]]!r}, not 1")


def _require(obj: dict, key: str, ctx: str):
    if key not in obj:
        raise SchemaError(f"{ctx}: missing field {key!r}")
    return obj[key]


def _load_states(doc: dict) -> np.ndarray:
    raw = _require(doc, "states", "trajectory")
    if not isinstance(raw, list) or not raw:
        raise SchemaError("trajectory: 'states' must be a non-empty list")
    hidden_dim = _require(doc, "hidden_dim", "trajectory")
    lengths = {len(row) if isinstance(row, list) else -1 for row in raw}
    if -1 in lengths:
        raise SchemaError("trajectory: every entry of 'states' must be a list of numbers")
    if len(lengths) != 1:
        raise ValidationError(
            f"states mix dimensions {sorted(lengths)}; all states must share one dimension")
    if lengths != {hidden_dim}:
        raise ValidationError(
            f"states have dimension {lengths.pop()} but hidden_dim={hidden_dim}")
    try:
        return np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise SchemaError(f"trajectory: 'states' not numeric: {e}") from None


def load_trajectory(path: str | os.PathLike) -> Trajectory:
    """Load and fully validate one trajectory file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path.name}: invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path.name}: top level must be a JSON object")
    version = _require(doc, "schema_version", "trajectory")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}")
    meta_doc = _require(doc, "meta", "trajectory")
    meta = DecodingParams(
        temperature=float(_require(meta_doc, "temperature", "meta")),
        top_p=float(_require(meta_doc, "top_p", "meta")),
        sample_id=str(_require(meta_doc, "sample_id", "meta")),
        prompt=str(_require(meta_doc, "prompt", "meta")),
        model_id=str(_require(meta_doc, "model_id", "meta")),
        layer_index=int(_require(meta_doc, "layer_index", "meta")),
    )
    states = _load_states(doc)
    quality = None
    if doc.get("quality") is not None:
        q = doc["quality"]
        quality = QualityScores(**{name: float(_require(q, name, "quality")) for name in QUALITY_FIELDS})
    token_ids = doc.get("token_ids")
    if token_ids is not None:
        if not isinstance(token_ids, list) or not all(isinstance(t, int) for t in token_ids):
            raise SchemaError("trajectory: 'token_ids' must be a list of integers")
    dists = doc.get("token_distributions")
    if dists is not None:
        if not isinstance(dists, list):
            raise SchemaError("trajectory: 'token_distributions' must be a list of lists")
        try:
            dists = np.asarray(dists, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise SchemaError(f"trajectory: 'token_distributions' not numeric: {e}") from None
    return Trajectory(states=states, meta=meta, token_ids=token_ids,
                      token_distributions=dists, quality=quality)


def trajectory_to_doc(traj: Trajectory) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "meta": {
            "model_id": traj.meta.model_id,
            "prompt": traj.meta.prompt,
            "sample_id": traj.meta.sample_id,
            "temperature": traj.meta.temperature,
            "top_p": traj.meta.top_p,
            "layer_index": traj.meta.layer_index,
        },
        "hidden_dim": traj.dim,
        "states": [[float(x) for x in row] for row in traj.states],
    }
    if traj.token_ids is not None:
        doc["token_ids"] = [int(t) for t in traj.token_ids]
    if traj.token_distributions is not None:
        doc["token_distributions"] = [[float(x) for x in row] for row in traj.token_distributions]
    if traj.quality is not None:
        doc["quality"] = traj.quality.as_dict()
    return doc


def save_trajectory(traj: Trajectory, path: str | os.PathLike) -> None:
    """Write a trajectory file; floats are stored as shortest round-trip
    decimal text, so load(save(t)) reproduces every value bit for bit."""
    traj.validate()
    doc = trajectory_to_doc(traj)
    Path(path).write_text(json.dumps(doc) + "\n")


@dataclass
class Dataset:
    """A validated collection of trajectories over a (temperature, top_p) grid."""

    trajectories: list[Trajectory]
    grid: list[tuple[float, float]]
    cell_counts: dict[tuple[float, float], int] = field(default_factory=dict)

    def __len__(self):
        return len(self.trajectories)


def _cell(traj: Trajectory) -> tuple[float, float]:
    return (traj.meta.temperature, traj.meta.top_p)


def save_dataset(trajectories: list[Trajectory], directory: str | os.PathLike,
                 grid: list[tuple[float, float]] | None = None) -> Path:
    """Write one file per trajectory plus a manifest; returns the manifest path.

    File names are derived from sample_id, which must therefore be unique.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if grid is None:
        seen = []
        for t in trajectories:
            if _cell(t) not in seen:
                seen.append(_cell(t))
        grid = seen
    ids = [t.meta.sample_id for t in trajectories]
    if len(set(ids)) != len(ids):
        raise ValidationError("sample_id values must be unique within a dataset")
    files = []
    for traj in trajectories:
        if _cell(traj) not in grid:
            raise ValidationError(
                f"trajectory {traj.meta.sample_id!r} has cell {_cell(traj)} outside the grid")
        name = f"{traj.meta.sample_id}.json"
        save_trajectory(traj, directory / name)
        files.append(name)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "grid": [[t, p] for t, p in grid],
        "files": files,
    }
    mpath = directory / MANIFEST_NAME
    mpath.write_text(json.dumps(manifest, indent=2) + "\n")
    return mpath


def validate_dataset(directory: str | os.PathLike) -> Dataset:
    """Load every manifest-listed trajectory, failing fast on the first bad file."""
    directory = Path(directory)
    mpath = directory / MANIFEST_NAME
    if not mpath.exists():
        raise ValidationError(f"no trajectories: {directory} has no {MANIFEST_NAME}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{MANIFEST_NAME}: invalid JSON: {e}") from None
    grid_raw = _require(manifest, "grid", "manifest")
    files = _require(manifest, "files", "manifest")
    if not files:
        raise ValidationError(f"no trajectories listed in {mpath}")
    grid = [(float(t), float(p)) for t, p in grid_raw]
    trajectories = []
    counts: dict[tuple[float, float], int] = {cell: 0 for cell in grid}
    for name in files:
        fpath = directory / name
        if not fpath.exists():
            raise ValidationError(f"manifest lists missing file {name!r}")
        try:
            traj = load_trajectory(fpath)
        except (SchemaError, ValidationError) as e:
            raise type(e)(f"{name}: {e}") from None
        cell = _cell(traj)
        if cell not in counts:
            raise ValidationError(
                f"{name}: cell (temperature={cell[0]}, top_p={cell[1]}) is not in the manifest grid")
        counts[cell] += 1
        trajectories.append(traj)
    return Dataset(trajectories=trajectories, grid=grid, cell_counts=counts)
