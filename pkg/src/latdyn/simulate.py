"""Controlled gradient-flow testbed: dh/dt = -grad V(h) + g(h, u).

Everything downstream is validated against this system because its behavior
is analytically known: explicit Euler with optional sqrt(dt)-scaled Gaussian
noise (the temperature analogue), an RK4 reference for error-order studies,
Lyapunov descent traces, a discrete stability certificate, residual-strength
sweeps, an adaptive step size driven by per-state coordinate spread, and a
dataset synthesizer that plants known quality-metric relationships for
regression recovery tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi

from .model import Dataset, DecodingParams, QualityScores, Trajectory, ValidationError

DIVERGENCE_LIMIT = 1e6
DIVERGENCE_MSG = "trajectory diverged (check Δt < 2/λ_max)"
DESCENT_TOL = 1e-9


class SimulationError(RuntimeError):
    pass


def _vec(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValidationError(f"{name} must be a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} must be finite")
    return v


class QuadraticBowl:
    """V(h) = (stiffness/2) * ||h - center||^2."""

    def __init__(self, stiffness: float, center):
        if not (stiffness > 0 and math.isfinite(stiffness)):
            raise ValidationError(f"stiffness must be positive, got {stiffness}")
        self.stiffness = float(stiffness)
        self.center = _vec(center, "center")
        self.dim = self.center.shape[0]

    def value(self, h: np.ndarray) -> float:
        d = h - self.center
        return 0.5 * self.stiffness * float(d @ d)

    def grad(self, h: np.ndarray) -> np.ndarray:
        return self.stiffness * (h - self.center)

    def hessian(self, h: np.ndarray) -> np.ndarray:
        return self.stiffness * np.eye(self.dim)

    def max_curvature(self, states: np.ndarray | None = None) -> float:
        return self.stiffness


class GaussianWells:
    """V(h) = -sum_i depth_i * exp(-||h - c_i||^2 / (2 width_i^2))."""

    def __init__(self, centers, depths, widths):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        m = self.centers.shape[0]
        if m < 1:
            raise ValidationError("need at least one well center")
        self.depths = np.broadcast_to(np.asarray(depths, dtype=np.float64), (m,)).copy()
        self.widths = np.broadcast_to(np.asarray(widths, dtype=np.float64), (m,)).copy()
        if not np.all(self.depths > 0):
            raise ValidationError("well depths must be positive")
        if not np.all(self.widths > 0):
            raise ValidationError("well widths must be positive")
        self.dim = self.centers.shape[1]

    def _exponents(self, h: np.ndarray) -> np.ndarray:
        diff = h[None, :] - self.centers
        return np.exp(-((diff ** 2).sum(axis=1)) / (2.0 * self.widths ** 2))

    def value(self, h: np.ndarray) -> float:
        return float(-(self.depths * self._exponents(h)).sum())

    def grad(self, h: np.ndarray) -> np.ndarray:
        diff = h[None, :] - self.centers
        weights = self.depths * self._exponents(h) / self.widths ** 2
        return (weights[:, None] * diff).sum(axis=0)

    def hessian(self, h: np.ndarray) -> np.ndarray:
        diff = h[None, :] - self.centers
        e = self._exponents(h)
        out = np.zeros((self.dim, self.dim))
        for i in range(self.centers.shape[0]):
            w2 = self.widths[i] ** 2
            coeff = self.depths[i] * e[i] / w2
            out += coeff * (np.eye(self.dim) - np.outer(diff[i], diff[i]) / w2)
        return out

    def max_curvature(self, states: np.ndarray | None = None) -> float:
        # No closed-form bound for a well sum; sample the analytic Hessian at
        # the centers and along the trajectory when one is supplied.
        samples = [c for c in self.centers]
        if states is not None:
            samples.extend(np.asarray(states, dtype=np.float64))
        top = 0.0
        for h in samples:
            top = max(top, float(np.linalg.eigvalsh(self.hessian(h)).max()))
        return top


class ZeroForce:
    def eval(self, h: np.ndarray, u=None) -> np.ndarray:
        return np.zeros_like(h)

    def input_at(self, t: int):
        return None


class ConstantForce:
    def __init__(self, vector):
        self.vector = _vec(vector, "force vector")

    def eval(self, h: np.ndarray, u=None) -> np.ndarray:
        return self.vector

    def input_at(self, t: int):
        return None


class PullForce:
    """g(h) = gain * (target - h), a proportional pull toward a target."""

    def __init__(self, target, gain: float):
        if not math.isfinite(gain):
            raise ValidationError(f"gain must be finite, got {gain}")
        self.target = _vec(target, "target")
        self.gain = float(gain)

    def eval(self, h: np.ndarray, u=None) -> np.ndarray:
        return self.gain * (self.target - h)

    def input_at(self, t: int):
        return None


class ScriptedForce:
    """g(h, u_t) = gain * u_t with a pre-recorded input sequence."""

    def __init__(self, inputs, gain: float = 1.0):
        if not math.isfinite(gain):
            raise ValidationError(f"gain must be finite, got {gain}")
        self.inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        self.gain = float(gain)

    def eval(self, h: np.ndarray, u=None) -> np.ndarray:
        if u is None:
            raise ValidationError("scripted force needs a per-step input")
        return self.gain * np.asarray(u, dtype=np.float64)

    def input_at(self, t: int):
        if t >= self.inputs.shape[0]:
            raise ValidationError(
                f"scripted force has {self.inputs.shape[0]} inputs, needs step {t}")
        return self.inputs[t]


@dataclass
class IntegratorConfig:
    dt: float
    steps: int
    initial: np.ndarray
    noise_temperature: float = 0.0
    clamp_p: float = 1.0
    seed: object = 0  # int or np.random.SeedSequence

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise ValidationError(f"steps must be >= 1, got {self.steps}")
        if not (self.noise_temperature >= 0 and math.isfinite(self.noise_temperature)):
            raise ValidationError(
                f"noise_temperature must be non-negative, got {self.noise_temperature}")
        if not 0.0 < self.clamp_p <= 1.0:
            raise ValidationError(f"clamp_p must be in (0, 1], got {self.clamp_p}")
        self.initial = _vec(self.initial, "initial state")


def grad_energy(landscape, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (landscape.dim,):
        raise ValidationError(
            f"state dim {h.shape} does not match landscape dim {landscape.dim}")
    return landscape.grad(h)


def _draw_noise(rng: np.random.Generator, dim: int, clamp_p: float) -> np.ndarray:
    xi = rng.standard_normal(dim)
    if clamp_p < 1.0:
        # Project onto the clamp_p-quantile ball of the chi distribution:
        # the low-top-p analogue of truncating the sampling tail.
        radius = float(chi.ppf(clamp_p, df=dim))
        norm = float(np.linalg.norm(xi))
        if norm > radius:
            xi *= radius / norm
    return xi


def euler_step(h: np.ndarray, landscape, force, u, dt: float,
               noise_temperature: float = 0.0,
               rng: np.random.Generator | None = None,
               clamp_p: float = 1.0) -> np.ndarray:
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    out = h + dt * (-grad_energy(landscape, h) + force.eval(h, u))
    if noise_temperature > 0:
        if rng is None:
            raise ValidationError("noise requires an rng")
        out = out + math.sqrt(dt) * noise_temperature * _draw_noise(rng, h.shape[0], clamp_p)
    return out


def _guard(h: np.ndarray) -> None:
    if not np.all(np.isfinite(h)) or np.linalg.norm(h) > DIVERGENCE_LIMIT:
        raise SimulationError(DIVERGENCE_MSG)


def _make_meta(config: IntegratorConfig, sample_id: str, model_id: str,
               prompt: str, layer_index: int) -> DecodingParams:
    return DecodingParams(temperature=config.noise_temperature, top_p=config.clamp_p,
                          sample_id=sample_id, prompt=prompt, model_id=model_id,
                          layer_index=layer_index)


def simulate(landscape, force, config: IntegratorConfig, sample_id: str = "sim",
             model_id: str = "synthetic-dynamics", prompt: str = "",
             layer_index: int = 0) -> Trajectory:
    """Explicit Euler rollout; deterministic given config.seed."""
    rng = np.random.default_rng(config.seed)
    h = config.initial.copy()
    states = [h.copy()]
    for t in range(config.steps):
        h = euler_step(h, landscape, force, force.input_at(t), config.dt,
                       config.noise_temperature, rng, config.clamp_p)
        _guard(h)
        states.append(h.copy())
    traj = Trajectory(states=np.asarray(states),
                      meta=_make_meta(config, sample_id, model_id, prompt, layer_index))
    traj.validate()
    return traj


def rk4_reference(landscape, force, config: IntegratorConfig,
                  sample_id: str = "sim-rk4") -> Trajectory:
    """Classical 4th-order rollout on the same grid, the error-study reference.

    The scripted input, when present, is held constant within each step.
    """
    if config.noise_temperature != 0:
        raise ValidationError("rk4 reference requires deterministic dynamics")

    def f(h, u):
        return -grad_energy(landscape, h) + force.eval(h, u)

    h = config.initial.copy()
    states = [h.copy()]
    dt = config.dt
    for t in range(config.steps):
        u = force.input_at(t)
        k1 = f(h, u)
        k2 = f(h + 0.5 * dt * k1, u)
        k3 = f(h + 0.5 * dt * k2, u)
        k4 = f(h + dt * k3, u)
        h = h + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        _guard(h)
        states.append(h.copy())
    traj = Trajectory(states=np.asarray(states),
                      meta=_make_meta(config, sample_id, "synthetic-dynamics-rk4", "", 0))
    traj.validate()
    return traj


@dataclass
class ErrorOrderReport:
    dts: np.ndarray
    sup_errors: np.ndarray
    slope: float


def empirical_error_order(landscape, force, dt_list, initial,
                          t_total: float | None = None) -> ErrorOrderReport:
    """Log-log slope of Euler sup error vs dt over a halving step grid."""
    dts = [float(dt) for dt in dt_list]
    if len(dts) < 3:
        raise ValidationError(f"need >= 3 dt values, got {len(dts)}")
    for a, b in zip(dts, dts[1:]):
        if abs(b - a / 2.0) > 1e-9 * a:
            raise ValidationError(f"dt grid must halve at each step, got {a} -> {b}")
    initial = _vec(initial, "initial state")
    if t_total is None:
        t_total = dts[0] * 20
    errors = []
    for dt in dts:
        steps = round(t_total / dt)
        if abs(steps * dt - t_total) > 1e-9 * t_total:
            raise ValidationError(f"t_total {t_total} is not a multiple of dt {dt}")
        config = IntegratorConfig(dt=dt, steps=steps, initial=initial)
        euler = simulate(landscape, force, config)
        reference = rk4_reference(landscape, force, config)
        err = float(np.linalg.norm(euler.states - reference.states, axis=1).max())
        if err == 0.0:
            raise ValidationError(f"zero error at dt={dt}: order undefined")
        errors.append(err)
    slope = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    return ErrorOrderReport(dts=np.asarray(dts), sup_errors=np.asarray(errors),
                            slope=slope)


@dataclass
class LyapunovConfig:
    metric_matrix: np.ndarray
    equilibrium: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.metric_matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"metric matrix must be square, got shape {m.shape}")
        if np.abs(m - m.T).max() > 1e-10:
            raise ValidationError("metric matrix must be symmetric within 1e-10")
        if np.linalg.eigvalsh(m).min() <= 0:
            raise ValidationError("metric matrix must be positive-definite")
        self.metric_matrix = m
        self.equilibrium = _vec(self.equilibrium, "equilibrium")


@dataclass
class LyapunovReport:
    values: np.ndarray           # L(h_t), length T+1
    deltas: np.ndarray           # L(h_{t+1}) - L(h_t), length T
    condition_held: np.ndarray   # per-step descent inequality flags, length T
    margins: np.ndarray          # inequality slack per step; ~0 marks boundary cases
    fraction_nonincreasing: float


def lyapunov_trace(traj: Trajectory, landscape, force,
                   lyap: LyapunovConfig, tol: float = DESCENT_TOL) -> LyapunovReport:
    """Energy distance L(h) = (h - h*)^T M (h - h*) along a noise-free run.

    The per-step flag records whether the forcing stayed within the descent
    inequality (h - h*)^T M g <= (h - h*)^T M grad V at the step start.
    """
    if traj.meta.temperature != 0:
        raise ValidationError("lyapunov trace requires a noise-free trajectory")
    m = lyap.metric_matrix
    dev = traj.states - lyap.equilibrium
    values = np.einsum("ti,ij,tj->t", dev, m, dev)
    deltas = np.diff(values)
    steps = traj.states.shape[0] - 1
    condition_held = np.zeros(steps, dtype=bool)
    margins = np.zeros(steps)
    for t in range(steps):
        h = traj.states[t]
        mdev = m @ (h - lyap.equilibrium)
        lhs = float(mdev @ force.eval(h, force.input_at(t)))
        rhs = float(mdev @ grad_energy(landscape, h))
        margins[t] = rhs - lhs
        condition_held[t] = lhs <= rhs + tol
    fraction = float(np.mean(deltas <= tol)) if steps else 1.0
    return LyapunovReport(values=values, deltas=deltas, condition_held=condition_held,
                          margins=margins, fraction_nonincreasing=fraction)


@dataclass
class StabilityCertificate:
    force_bounded_all: bool        # grad V . g <= ||grad V||^2 at every step
    force_bounded_fraction: float
    step_within_bound: bool        # dt < 2 / lambda_max
    lambda_max: float
    step_bound: float
    energy_nonincreasing_fraction: float
    stable: bool


def check_discrete_stability(traj: Trajectory, landscape, force, dt: float,
                             tol: float = DESCENT_TOL) -> StabilityCertificate:
    states = traj.states
    steps = states.shape[0] - 1
    cond1 = np.zeros(steps, dtype=bool)
    descent = np.zeros(steps, dtype=bool)
    for t in range(steps):
        h = states[t]
        g = landscape.grad(h)
        cond1[t] = float(g @ force.eval(h, force.input_at(t))) <= float(g @ g) + tol
        descent[t] = landscape.value(states[t + 1]) <= landscape.value(h) + tol
    lam = landscape.max_curvature(states)
    bound = 2.0 / lam if lam > 0 else math.inf
    cond1_all = bool(cond1.all()) if steps else True
    cond2 = dt < bound
    return StabilityCertificate(
        force_bounded_all=cond1_all,
        force_bounded_fraction=float(cond1.mean()) if steps else 1.0,
        step_within_bound=cond2,
        lambda_max=lam,
        step_bound=bound,
        energy_nonincreasing_fraction=float(descent.mean()) if steps else 1.0,
        stable=cond1_all and cond2,
    )


@dataclass
class ResidualSweepReport:
    alphas: np.ndarray
    continuity: np.ndarray  # raw continuity of h' = alpha*h + F(h) per alpha


def residual_sweep(alpha_grid, residual, initial, steps: int) -> ResidualSweepReport:
    """Continuity of the damped update h' = alpha*h + F(h) across alpha.

    residual is the linear map F: a scalar a (meaning a*I) or a square matrix.
    """
    from .metrics import continuity

    alphas = np.asarray(alpha_grid, dtype=np.float64)
    if alphas.size == 0:
        raise ValidationError("alpha grid is empty")
    if np.any((alphas < 0) | (alphas > 1)):
        raise ValidationError("alpha values must lie in [0, 1]")
    h0 = _vec(initial, "initial state")
    d = h0.shape[0]
    a = np.asarray(residual, dtype=np.float64)
    matrix = a if a.ndim == 2 else float(a) * np.eye(d)
    if matrix.shape != (d, d):
        raise ValidationError(f"residual map shape {matrix.shape} does not match dim {d}")
    spectral = float(np.abs(np.linalg.eigvals(matrix)).max())
    if spectral >= 2.0 - float(alphas.max()):
        raise ValidationError(
            f"residual spectral radius {spectral:.3g} too large for alpha grid")
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    values = np.zeros(alphas.shape)
    for idx, alpha in enumerate(alphas):
        h = h0.copy()
        states = [h.copy()]
        for _ in range(steps):
            h = alpha * h + matrix @ h
            if not np.all(np.isfinite(h)) or np.linalg.norm(h) > DIVERGENCE_LIMIT:
                raise SimulationError(f"residual sweep diverged at alpha={alpha}")
            states.append(h.copy())
        traj = Trajectory(states=np.asarray(states),
                          meta=DecodingParams(temperature=0.0, top_p=1.0,
                                              sample_id=f"alpha-{alpha}"))
        values[idx] = continuity(traj, normalize=False).continuity
    return ResidualSweepReport(alphas=alphas, continuity=values)


@dataclass
class AdaptiveStepConfig:
    gamma: float
    landscape: object
    force: object
    beta: np.ndarray | None = None  # constant per-step offset, zero when None

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        if self.beta is not None:
            self.beta = _vec(self.beta, "beta")


@dataclass
class AdaptiveRun:
    trajectory: Trajectory
    dt_eff: np.ndarray


def adaptive_simulate(adaptive: AdaptiveStepConfig, base: IntegratorConfig,
                      sample_id: str = "sim-adaptive") -> AdaptiveRun:
    """Euler rollout whose step size gamma/sigma_t tracks coordinate spread."""
    d = base.initial.shape[0]
    if d < 2:
        raise ValidationError("adaptive stepping needs dim >= 2")
    beta = adaptive.beta if adaptive.beta is not None else np.zeros(d)
    if beta.shape != (d,):
        raise ValidationError(f"beta dim {beta.shape} does not match state dim {d}")
    rng = np.random.default_rng(base.seed)
    landscape, force = adaptive.landscape, adaptive.force
    h = base.initial.copy()
    states = [h.copy()]
    dt_eff = np.zeros(base.steps)
    for t in range(base.steps):
        sigma = float(np.std(h))
        if sigma == 0.0:
            raise ValidationError("degenerate state statistics")
        dt = adaptive.gamma / sigma
        h = euler_step(h, landscape, force, force.input_at(t), dt,
                       base.noise_temperature, rng, base.clamp_p) + beta
        _guard(h)
        dt_eff[t] = dt
        states.append(h.copy())
    meta = DecodingParams(temperature=base.noise_temperature, top_p=base.clamp_p,
                          sample_id=sample_id, model_id="synthetic-dynamics-adaptive")
    traj = Trajectory(states=np.asarray(states), meta=meta)
    traj.validate()
    return AdaptiveRun(trajectory=traj, dt_eff=dt_eff)


def jacobian_symmetry_defect(fld, h, eps: float = 1e-5) -> float:
    """Frobenius norm of the antisymmetric part of the numerical Jacobian.

    Zero (up to finite-difference error) exactly when the field is locally a
    gradient; a rotational component shows up as a positive defect.
    """
    h = _vec(h, "state")
    d = h.shape[0]
    jac = np.zeros((d, d))
    for j in range(d):
        step = np.zeros(d)
        step[j] = eps
        jac[:, j] = (np.asarray(fld(h + step)) - np.asarray(fld(h - step))) / (2 * eps)
    anti = 0.5 * (jac - jac.T)
    return float(np.linalg.norm(anti))


def default_grid() -> list[tuple[float, float]]:
    """Ten noise temperatures from 0.1 to 2.0 crossed with four clamp levels."""
    temperatures = [round(x, 6) for x in np.linspace(0.1, 2.0, 10)]
    clamp = [0.3, 0.6, 0.8, 1.0]
    return [(t, p) for t in temperatures for p in clamp]


def default_two_well(dim: int = 3, separation: float = 12.0, depth: float = 8.0,
                     width: float = 2.0) -> GaussianWells:
    centers = np.zeros((2, dim))
    centers[0, 0] = -separation / 2.0
    centers[1, 0] = separation / 2.0
    return GaussianWells(centers=centers, depths=[depth, depth], widths=[width, width])


@dataclass
class PlantedQualityModel:
    """Quality fields as noisy linear functions of per-trajectory metrics.

    coefficients maps field -> {metric_key -> slope} with metric keys among
    continuity/silhouette/total_persistence; group_sd adds a shared per-cell
    intercept so grouped regression has true random effects to recover.
    """
    intercepts: dict
    coefficients: dict
    noise_sd: dict
    group_sd: dict

    def fields(self) -> list[str]:
        return list(self.intercepts)


def default_quality_model() -> PlantedQualityModel:
    return PlantedQualityModel(
        intercepts={"log_ppl": 2.0, "lttr": 0.5, "spelling": 0.8,
                    "grammar": 0.2, "coherence": 0.3},
        coefficients={"log_ppl": {"continuity": -5.0},
                      "grammar": {"silhouette": 0.4},
                      "coherence": {"total_persistence": 0.005},
                      "lttr": {}, "spelling": {}},
        noise_sd={"log_ppl": 0.1, "lttr": 0.05, "spelling": 0.02,
                  "grammar": 0.02, "coherence": 0.02},
        group_sd={"log_ppl": 0.3, "lttr": 0.05, "spelling": 0.0,
                  "grammar": 0.05, "coherence": 0.03},
    )


BOUNDED_FIELDS = ("lttr", "spelling", "grammar", "coherence")


def synthesize_dataset(grid, n_per_cell: int, landscape, force,
                       quality_model: PlantedQualityModel | None = None,
                       dt: float = 0.05, steps: int = 100, init_scale: float = 1.0,
                       seed: int = 0, model_id: str = "synthetic-dynamics",
                       prompt: str = "", max_points: int = 60) -> Dataset:
    """Simulate n_per_cell runs per (noise temperature, clamp_p) cell.

    Initial states are drawn near a uniformly chosen well center so every run
    starts inside a basin.  When a quality model is given, per-trajectory
    metrics are computed with the same defaults the analysis pipeline uses,
    so planted relationships survive the full round trip.
    """
    from .analysis import AnalysisSettings, trajectory_metrics

    grid = [(float(t), float(p)) for t, p in grid]
    if not grid:
        raise ValidationError("grid is empty")
    if n_per_cell < 1:
        raise ValidationError(f"n_per_cell must be >= 1, got {n_per_cell}")
    centers = getattr(landscape, "centers", None)
    if centers is None:
        centers = np.atleast_2d(landscape.center)
    root = np.random.SeedSequence(seed)
    cell_branch, traj_branch = root.spawn(2)
    cell_seeds = cell_branch.spawn(len(grid))
    traj_seeds = traj_branch.spawn(len(grid) * n_per_cell)
    settings = AnalysisSettings(trajectory_max_points=max_points)
    trajectories = []
    for ci, (temp, clamp_p) in enumerate(grid):
        cell_rng = np.random.default_rng(cell_seeds[ci])
        group_effects = {}
        if quality_model is not None:
            for fld in quality_model.fields():
                group_effects[fld] = cell_rng.normal(0.0, quality_model.group_sd[fld])
        for si in range(n_per_cell):
            init_seq, dyn_seq, noise_seq = traj_seeds[ci * n_per_cell + si].spawn(3)
            init_rng = np.random.default_rng(init_seq)
            center = centers[init_rng.integers(len(centers))]
            h0 = center + init_scale * init_rng.standard_normal(landscape.dim)
            config = IntegratorConfig(dt=dt, steps=steps, initial=h0,
                                      noise_temperature=temp, clamp_p=clamp_p,
                                      seed=dyn_seq)
            try:
                traj = simulate(landscape, force, config,
                                sample_id=f"c{ci:02d}-s{si:02d}",
                                model_id=model_id, prompt=prompt)
            except SimulationError as e:
                raise SimulationError(
                    f"cell (temperature={temp}, top_p={clamp_p}): {e}") from e
            if quality_model is not None:
                report = trajectory_metrics(traj, settings)
                metric_values = {"continuity": report.continuity,
                                 "silhouette": report.silhouette,
                                 "total_persistence": report.total_persistence}
                noise_rng = np.random.default_rng(noise_seq)
                planted = {}
                for fld in quality_model.fields():
                    val = quality_model.intercepts[fld] + group_effects[fld]
                    for key, coef in quality_model.coefficients[fld].items():
                        val += coef * metric_values[key]
                    val += noise_rng.normal(0.0, quality_model.noise_sd[fld])
                    if fld in BOUNDED_FIELDS:
                        val = float(np.clip(val, 0.0, 1.0))
                    planted[fld] = float(val)
                traj.quality = QualityScores(**planted)
            trajectories.append(traj)
    counts = {cell: n_per_cell for cell in grid}
    return Dataset(trajectories=trajectories, grid=grid, cell_counts=counts)
