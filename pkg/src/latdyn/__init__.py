"""Latent-trajectory dynamics toolkit.

Trajectory metrics (continuity, jumps, successive-token KL), PCA reduction,
k-means++/silhouette clustering, Vietoris-Rips persistence with permutation
significance, a controlled dynamical-system testbed, and a grouped regression
layer, wired together by the `latdyn` command-line pipeline.
"""

from .analysis import AnalysisSettings, analyze_dataset, trajectory_metrics
from .cluster import kmeans, select_k, silhouette
from .metrics import continuity, detect_jumps, mean_successive_kl, step_distances
from .model import (DecodingParams, Dataset, QualityScores, SchemaError, Trajectory,
                    ValidationError, load_trajectory, save_dataset, save_trajectory,
                    validate_dataset)
from .pca import pca_fit, pca_inverse_transform, pca_transform
from .simulate import (GaussianWells, IntegratorConfig, QuadraticBowl,
                       SimulationError, adaptive_simulate, check_discrete_stability,
                       empirical_error_order, euler_step, grad_energy,
                       jacobian_symmetry_defect, lyapunov_trace, residual_sweep,
                       rk4_reference, simulate, synthesize_dataset)
from .stats import (correlations, grouped_fit, lexical_diversity, ols_fit,
                    sweep_aggregate)
from .topology import (PersistenceConfig, persistence_diagram, rips_filtration,
                       rips_persistence, significant_features, total_persistence)

__version__ = "0.1.0"

__all__ = [
    "AnalysisSettings", "analyze_dataset", "trajectory_metrics",
    "kmeans", "select_k", "silhouette",
    "continuity", "detect_jumps", "mean_successive_kl", "step_distances",
    "DecodingParams", "Dataset", "QualityScores", "SchemaError", "Trajectory",
    "ValidationError", "load_trajectory", "save_dataset", "save_trajectory",
    "validate_dataset",
    "pca_fit", "pca_inverse_transform", "pca_transform",
    "GaussianWells", "IntegratorConfig", "QuadraticBowl", "SimulationError",
    "adaptive_simulate", "check_discrete_stability", "empirical_error_order",
    "euler_step", "grad_energy", "jacobian_symmetry_defect", "lyapunov_trace",
    "residual_sweep", "rk4_reference", "simulate", "synthesize_dataset",
    "correlations", "grouped_fit", "lexical_diversity", "ols_fit",
    "sweep_aggregate",
    "PersistenceConfig", "persistence_diagram", "rips_filtration",
    "rips_persistence", "significant_features", "total_persistence",
    "__version__",
]
