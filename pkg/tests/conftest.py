"""Shared fixtures: JIT warmup and trajectory builders."""

from __future__ import annotations

import numpy as np
import pytest

from latdyn.model import DecodingParams, Trajectory


@pytest.fixture(scope="session", autouse=True)
def _warm_jit_cache():
    # First topology call triggers numba compilation (disk-cached afterwards);
    # warm it here so per-test runtime budgets measure the algorithms.
    from latdyn.topology import rips_persistence

    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 2.0]])
    rips_persistence(pts)


def make_traj(states, temperature: float = 1.0, top_p: float = 1.0,
              sample_id: str = "t0", **kwargs) -> Trajectory:
    meta = DecodingParams(temperature=temperature, top_p=top_p, sample_id=sample_id)
    return Trajectory(states=np.asarray(states, dtype=np.float64), meta=meta, **kwargs)


def random_rotation(dim: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q * np.sign(np.diag(r))


def planted_rows(seed: int, betas: dict, n_groups: int = 40, per_group: int = 3,
                 intercept: float = 1.5, group_sd: float = 0.005,
                 noise_sd: float = 0.001, response: str = "log_ppl") -> list[dict]:
    """Metric rows whose response is a planted linear function of predictors.

    Groups are (temperature, top_p) cells drawn from the standard sweep grid,
    each with its own Gaussian intercept, so grouped regression has known
    coefficients and a known group variance to recover.
    """
    from latdyn.stats import PREDICTOR_COLUMNS

    rng = np.random.default_rng(seed)
    temps = [round(t, 2) for t in np.linspace(0.1, 2.0, 10)]
    cells = [(t, p) for t in temps for p in (0.3, 0.6, 0.8, 1.0)][:n_groups]
    rows = []
    for temp, top_p in cells:
        shift = rng.normal(0.0, group_sd) if group_sd > 0 else 0.0
        for _ in range(per_group):
            x = {key: rng.normal() for key in betas}
            y = intercept + sum(b * x[k] for k, b in betas.items()) + shift
            y += rng.normal(0.0, noise_sd)
            row = {"temperature": temp, "top_p": top_p, response: y}
            for key, val in x.items():
                row[PREDICTOR_COLUMNS[key]] = val
            rows.append(row)
    return rows
