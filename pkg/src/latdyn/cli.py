"""Command-line pipeline: analyze, simulate, regress, report.

Exit codes: 0 success, 2 input error, 3 missing fields, 4 missing upstream
outputs, 1 internal error.  A JSON config file may supply any flag value;
explicitly passed flags win on conflict.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from .analysis import (AnalysisSettings, analyze_dataset, read_endpoints_csv,
                       read_metrics_csv, write_cluster_csv, write_diagram_csv,
                       write_endpoints_csv, write_metrics_csv, write_pca_json,
                       write_summary_json, write_sweep_csv, METRICS_NAME)
from .model import (QUALITY_FIELDS, SchemaError, ValidationError, save_dataset,
                    validate_dataset)
from .simulate import (ConstantForce, GaussianWells, PlantedQualityModel, PullForce,
                       QuadraticBowl, ScriptedForce, SimulationError, ZeroForce,
                       default_grid, default_quality_model, default_two_well,
                       synthesize_dataset)
from .stats import (PREDICTOR_COLUMNS, RegressionReport, RegressionSpec,
                    grouped_fit, sweep_aggregate)
from .topology import Bar, PersistenceDiagram

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_MISSING_FIELDS = 3
EXIT_MISSING_UPSTREAM = 4

log = logging.getLogger("latdyn")


class MissingFieldsError(ValueError):
    pass


class MissingUpstreamError(ValueError):
    pass


def _bool_flag(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {value!r}")


def _add_analysis_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--normalize", type=_bool_flag, default=None,
                     help="L2-normalize states before differencing (default true)")
    sub.add_argument("--jump-method", choices=("median_mad", "mean_z"), default=None)
    sub.add_argument("--jump-z", type=float, default=None)
    sub.add_argument("--k-max", type=int, default=None)
    sub.add_argument("--max-radius", type=float, default=None)
    sub.add_argument("--rho", type=float, default=None)
    sub.add_argument("--permutations", type=int, default=None)
    sub.add_argument("--max-points", type=int, default=None,
                     help="subsample cap for the pooled persistence cloud")
    sub.add_argument("--trajectory-max-points", type=int, default=None,
                     help="subsample cap for per-trajectory persistence clouds")
    pool = sub.add_mutually_exclusive_group()
    pool.add_argument("--pooled", dest="pooled", action="store_true", default=None,
                      help="pooled PCA/cluster/persistence artifacts (default)")
    pool.add_argument("--per-trajectory", dest="pooled", action="store_false",
                      help="skip pooled artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latdyn",
        description="Latent-trajectory dynamics: metrics, clustering, topology, "
                    "and a controlled dynamical-system testbed.")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    subs = parser.add_subparsers(dest="command", required=True)

    analyze = subs.add_parser("analyze", help="per-trajectory metrics and pooled structure")
    analyze.add_argument("--input", required=True, help="dataset directory")
    analyze.add_argument("--output", required=True, help="output directory")
    analyze.add_argument("--config", default=None, help="JSON file of flag defaults")
    _add_analysis_flags(analyze)

    simulate = subs.add_parser("simulate", help="synthesize a dataset from the testbed")
    simulate.add_argument("--output", required=True, help="dataset directory to create")
    simulate.add_argument("--config", default=None, help="simulator config JSON")
    simulate.add_argument("--seed", type=int, default=None)

    regress = subs.add_parser("regress", help="grouped regressions over analysis output")
    regress.add_argument("--input", required=True,
                         help="analysis output directory (holds metrics.csv)")
    regress.add_argument("--output", required=True)
    regress.add_argument("--config", default=None, help="JSON file of flag defaults")
    regress.add_argument("--response", action="append", default=None,
                         help="quality field; repeat for several (default: all present)")
    regress.add_argument("--predictors", default=None,
                         help="comma list from {C,Q,P} (default C,Q,P)")

    report = subs.add_parser("report", help="plot-ready bundle from analysis output")
    report.add_argument("--input", required=True, help="analysis output directory")
    report.add_argument("--output", required=True)
    report.add_argument("--no-figures", action="store_true",
                        help="emit CSVs only, skip PNG rendering")
    return parser


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"config {p} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SchemaError(f"config {p} must be a JSON object")
    return doc


def _merged(args: argparse.Namespace, config: dict, key: str, default):
    """Flag value if given, else config value, else the built-in default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _settings_from(args: argparse.Namespace, config: dict) -> AnalysisSettings:
    base = AnalysisSettings()
    return AnalysisSettings(
        normalize=_merged(args, config, "normalize", base.normalize),
        jump_method=_merged(args, config, "jump_method", base.jump_method),
        jump_z=float(_merged(args, config, "jump_z", base.jump_z)),
        k_max=int(_merged(args, config, "k_max", base.k_max)),
        min_variance=float(config.get("min_variance", base.min_variance)),
        max_radius=_merged(args, config, "max_radius", base.max_radius),
        rho=float(_merged(args, config, "rho", base.rho)),
        n_permutations=int(_merged(args, config, "permutations", base.n_permutations)),
        max_points=int(_merged(args, config, "max_points", base.max_points)),
        trajectory_max_points=int(_merged(args, config, "trajectory_max_points",
                                          base.trajectory_max_points)),
        pooled=_merged(args, config, "pooled", base.pooled),
        seed=int(_merged(args, config, "seed", base.seed)),
    )


def cmd_analyze(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    settings = _settings_from(args, config)
    dataset = validate_dataset(args.input)
    log.info("analyzing %d trajectories", len(dataset.trajectories))
    result = analyze_dataset(dataset, settings)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(result.reports, out / METRICS_NAME)
    reports_dir = out / "reports"
    reports_dir.mkdir(exist_ok=True)
    for report in result.reports:
        doc = report.csv_row()
        doc["jump_indices"] = report.jump_indices
        (reports_dir / f"{report.sample_id}.json").write_text(
            json.dumps(doc, indent=2) + "\n")
    if result.pooled is not None:
        pooled_dir = out / "pooled"
        pooled_dir.mkdir(exist_ok=True)
        write_pca_json(result.pooled.pca_model, pooled_dir / "pca_model.json")
        write_endpoints_csv(result.pooled, pooled_dir / "endpoints.csv")
        write_cluster_csv(result.pooled, pooled_dir / "cluster_assignments.csv")
        write_diagram_csv(result.pooled.diagram, pooled_dir / "persistence_diagram.csv")
        write_summary_json(result, pooled_dir / "summary.json")
    log.info("analysis written to %s", out)
    return EXIT_OK


def _landscape_from(doc: dict):
    kind = doc.get("kind", "gaussian_wells")
    if kind == "quadratic":
        return QuadraticBowl(stiffness=float(doc["stiffness"]), center=doc["center"])
    if kind == "gaussian_wells":
        if "centers" not in doc:
            return default_two_well(dim=int(doc.get("dim", 3)))
        return GaussianWells(centers=doc["centers"], depths=doc["depths"],
                             widths=doc["widths"])
    raise SchemaError(f"unknown landscape kind {kind!r}")


def _force_from(doc: dict | None):
    if doc is None:
        return ZeroForce()
    kind = doc.get("kind", "zero")
    if kind == "zero":
        return ZeroForce()
    if kind == "constant":
        return ConstantForce(doc["vector"])
    if kind == "pull":
        return PullForce(target=doc["target"], gain=float(doc["gain"]))
    if kind == "scripted":
        return ScriptedForce(inputs=doc["inputs"], gain=float(doc.get("gain", 1.0)))
    raise SchemaError(f"unknown force kind {kind!r}")


def _grid_from(doc) -> list[tuple[float, float]]:
    if doc is None:
        return default_grid()
    if isinstance(doc, dict):
        temps = [float(t) for t in doc["temperatures"]]
        tops = [float(p) for p in doc["top_p"]]
        return [(t, p) for t in temps for p in tops]
    return [(float(t), float(p)) for t, p in doc]


def _quality_from(doc) -> PlantedQualityModel | None:
    if doc is None or doc == "default":
        return default_quality_model()
    if doc is False or doc == "none":
        return None
    return PlantedQualityModel(
        intercepts={k: float(v) for k, v in doc["intercepts"].items()},
        coefficients={k: {kk: float(vv) for kk, vv in v.items()}
                      for k, v in doc["coefficients"].items()},
        noise_sd={k: float(v) for k, v in doc["noise_sd"].items()},
        group_sd={k: float(v) for k, v in doc["group_sd"].items()},
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    landscape = _landscape_from(config.get("landscape", {}))
    force = _force_from(config.get("force"))
    grid = _grid_from(config.get("grid"))
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    dataset = synthesize_dataset(
        grid=grid,
        n_per_cell=int(config.get("n_per_cell", 10)),
        landscape=landscape,
        force=force,
        quality_model=_quality_from(config.get("quality")),
        dt=float(config.get("dt", 0.05)),
        steps=int(config.get("steps", 100)),
        init_scale=float(config.get("init_scale", 1.0)),
        seed=seed,
        max_points=int(config.get("max_points", 60)),
    )
    save_dataset(dataset.trajectories, args.output, dataset.grid)
    log.info("wrote %d trajectories to %s", len(dataset.trajectories), args.output)
    return EXIT_OK


def _report_to_doc(report: RegressionReport) -> dict:
    return {
        "response": report.response,
        "coefficients": {
            name: {"estimate": est.estimate, "std_error": est.std_error,
                   "p_value": est.p_value, "stars": est.stars}
            for name, est in report.coefficients.items()
        },
        "group_variance": report.group_variance,
        "n": report.n,
        "n_groups": report.n_groups,
        "method": report.method,
        "warning": report.warning,
    }


def cmd_regress(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    metrics_path = Path(args.input) / METRICS_NAME
    if not metrics_path.is_file():
        raise MissingUpstreamError(f"missing analysis output: {metrics_path}")
    rows = read_metrics_csv(metrics_path)
    if not rows:
        raise ValidationError("metrics table is empty")

    predictors_raw = _merged(args, config, "predictors", "C,Q,P")
    if isinstance(predictors_raw, str):
        predictors = tuple(p.strip() for p in predictors_raw.split(",") if p.strip())
    else:
        predictors = tuple(predictors_raw)

    responses = args.response or config.get("response")
    if responses is None:
        responses = [f for f in QUALITY_FIELDS
                     if all(r.get(f) is not None for r in rows)]
        if not responses:
            raise MissingFieldsError(f"no quality fields present; need any of "
                                     f"{list(QUALITY_FIELDS)}")
    elif isinstance(responses, str):
        responses = [responses]

    absent = sorted({f for f in responses
                     if any(r.get(f) is None for r in rows)})
    pred_cols = [PREDICTOR_COLUMNS.get(p, p) for p in predictors]
    absent += sorted({c for c in pred_cols if any(r.get(c) is None for r in rows)})
    if absent:
        raise MissingFieldsError(f"missing fields in metrics table: {absent}")

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    reg_dir = out / "regression"
    reg_dir.mkdir(exist_ok=True)
    summary: dict = {"observations": len(rows), "predictors": list(predictors),
                     "responses": {}}
    for response in responses:
        spec = RegressionSpec(response=response, predictors=predictors)
        report = grouped_fit(spec, rows)
        doc = _report_to_doc(report)
        (reg_dir / f"{response}.json").write_text(json.dumps(doc, indent=2) + "\n")
        summary["responses"][response] = doc
        log.info("fit %s: n=%d groups=%d", response, report.n, report.n_groups)
    (out / "regression_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    write_sweep_csv(sweep_aggregate(rows), out / "sweep.csv")
    return EXIT_OK


def _read_diagram_csv(path: Path) -> PersistenceDiagram:
    bars, flags = [], []
    with path.open(newline="") as fh:
        for raw in csv.DictReader(fh):
            bars.append(Bar(int(raw["dim"]), float(raw["birth"]), float(raw["death"])))
            flags.append(raw["significant"] == "true")
    return PersistenceDiagram(bars=bars, significant=flags)


def cmd_report(args: argparse.Namespace) -> int:
    src = Path(args.input)
    metrics_path = src / METRICS_NAME
    pooled_dir = src / "pooled"
    needed = [metrics_path, pooled_dir / "endpoints.csv",
              pooled_dir / "cluster_assignments.csv",
              pooled_dir / "persistence_diagram.csv"]
    missing = [str(p) for p in needed if not p.is_file()]
    if missing:
        raise MissingUpstreamError(f"missing analysis outputs: {missing}")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(pooled_dir / "endpoints.csv", out / "pca_coords.csv")
    shutil.copyfile(pooled_dir / "cluster_assignments.csv", out / "cluster_labels.csv")
    shutil.copyfile(pooled_dir / "persistence_diagram.csv", out / "persistence_bars.csv")
    rows = read_metrics_csv(metrics_path)
    table = sweep_aggregate(rows)
    write_sweep_csv(table, out / "sweep_heatmap.csv")
    if not args.no_figures:
        from . import plots

        fig_dir = out / "figures"
        fig_dir.mkdir(exist_ok=True)
        _ids, endpoints = read_endpoints_csv(out / "pca_coords.csv")
        labels = []
        with (out / "cluster_labels.csv").open(newline="") as fh:
            for raw in csv.DictReader(fh):
                labels.append(int(raw["cluster"]))
        plots.plot_endpoint_clusters(endpoints, np.asarray(labels),
                                     fig_dir / "endpoint_clusters.png")
        plots.plot_barcode(_read_diagram_csv(out / "persistence_bars.csv"),
                           fig_dir / "persistence_barcode.png")
        plots.plot_sweep_heatmap(table, "C", fig_dir / "sweep_heatmap.png")
        log.info("figures written to %s", fig_dir)
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "regress": cmd_regress,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except MissingFieldsError as e:
        log.error("%s", e)
        return EXIT_MISSING_FIELDS
    except MissingUpstreamError as e:
        log.error("%s", e)
        return EXIT_MISSING_UPSTREAM
    except (SchemaError, ValidationError, SimulationError, FileNotFoundError,
            NotADirectoryError, KeyError) as e:
        log.error("%s", e)
        return EXIT_INPUT
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
