"""Command-line front end: one experiment per invocation, artifacts to disk.

Subcommands: generate-data, train-score, optimize, validate, sample. Each
takes --config (flat key=value file, see `--help` for the accepted keys per
subcommand) plus optional --seed/--out overrides. Exit codes: 0 success,
1 numerical abort or violated --assert thresholds, 2 usage/config errors.
"""

import argparse
import os
import sys
import time

import numpy as np

import msopt
from msopt import rng as _rng
from msopt.config import KINDS, ConfigError, ExperimentConfig, describe_keys, load_config
from msopt.control import SystemModel, TrajectoryDataset, generate_dataset
from msopt.errors import MsoptError
from msopt.manifolds import make_manifold
from msopt.objectives import (
    AffineReparamObjective,
    LinearObjective,
    TrackingObjective,
    ZeroObjective,
    load_reference_csv,
    make_reference,
    random_brockett,
)
from msopt.optim import (
    DlfConfig,
    DrgdConfig,
    dlf_run,
    drgd_run,
    landing_descent_run,
    load_run_record,
    riemannian_gd_baseline,
)
from msopt.score.dsm import DsmTrainConfig, dsm_train
from msopt.score.mlp import load_score_mlp, make_score_mlp
from msopt.score.oracles import (
    EmpiricalScoreOracle,
    ExactManifoldAdapter,
    MlpScoreOracle,
    QuadratureScoreOracle,
)
from msopt.score.sampler import ve_reverse_sample
from msopt.validation import feasibility_optimality_report, landing_check, rate_sweep

_SYSTEM_KINDS = ("unicycle", "double_pendulum")


def _write_points_csv(path, points):
    with open(path, "w") as fh:
        for row in np.atleast_2d(points):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _write_manifest(out_dir, cfg: ExperimentConfig, started, artifacts):
    with open(os.path.join(out_dir, "config_echo.cfg"), "w") as fh:
        fh.write(cfg.echo())
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        fh.write(f"msopt_version = {msopt.__version__}\n")
        fh.write(f"numpy_version = {np.__version__}\n")
        fh.write(f"python_version = {sys.version.split()[0]}\n")
        fh.write(f"experiment_kind = {cfg.kind}\n")
        fh.write(f"seed = {cfg.seed}\n")
        fh.write(f"threads = {os.environ.get('MSOPT_THREADS', 'default')}\n")
        fh.write(f"wall_time_s = {time.perf_counter() - started:.3f}\n")
        fh.write("config_echo = config_echo.cfg\n")
        for name in artifacts:
            fh.write(f"artifact = {name}\n")


def _build_system(cfg: ExperimentConfig) -> SystemModel:
    kind = cfg.get("manifold", "kind")
    if cfg.has("manifold", "dt"):
        return SystemModel(kind=kind, dt=cfg.get("manifold", "dt"))
    return SystemModel(kind=kind)


def _build_manifold(cfg: ExperimentConfig):
    kind = cfg.get("manifold", "kind")
    if kind is None:
        return None
    return make_manifold(
        kind,
        radius=cfg.get("manifold", "radius"),
        dim=cfg.get("manifold", "dim"),
        n=cfg.get("manifold", "n"),
    )


def _load_points(path) -> np.ndarray:
    if not os.path.exists(path):
        raise ConfigError(f"dataset path does not exist: {path}")
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _build_oracle(cfg: ExperimentConfig, manifold, dataset_points=None):
    kind = cfg.get("oracle", "kind")
    sigma = cfg.get("oracle", "sigma")
    if kind == "exact":
        if manifold is None:
            raise ConfigError("exact oracle needs a [manifold] section")
        return ExactManifoldAdapter(manifold)
    if kind == "quadrature":
        if manifold is None:
            raise ConfigError("quadrature oracle needs a [manifold] section")
        return QuadratureScoreOracle(manifold, cfg.get("oracle", "node_count"), sigma)
    if kind == "empirical":
        if dataset_points is None:
            if cfg.has("oracle", "dataset"):
                dataset_points = _load_points(cfg.get("oracle", "dataset"))
            elif cfg.has("oracle", "sample_count") and manifold is not None:
                dataset_points = manifold.sample_uniform(
                    cfg.get("oracle", "sample_count"), seed=cfg.seed
                )
            else:
                raise ConfigError(
                    "empirical oracle needs [oracle] dataset or sample_count + manifold"
                )
        return EmpiricalScoreOracle(dataset_points, sigma)
    if kind == "mlp":
        model = cfg.get("oracle", "model")
        if model is None:
            raise ConfigError("mlp oracle needs [oracle] model")
        return MlpScoreOracle(load_score_mlp(model), sigma)
    raise ConfigError(f"unknown oracle kind {kind!r}")


def _tracking_weights(cfg: ExperimentConfig, system: SystemModel):
    if cfg.has("objective", "q_weight"):
        q = np.diag(cfg.get("objective", "q_weight"))
    elif system.kind == "unicycle":
        q = np.diag([10.0, 10.0, 0.0])
    else:
        q = np.diag([10.0, 10.0])
    if cfg.has("objective", "r_weight"):
        r = np.diag(cfg.get("objective", "r_weight"))
    else:
        r = 0.01 * np.eye(system.input_dim)
    return q, r


def _build_tracking_objective(cfg: ExperimentConfig, dataset: TrajectoryDataset):
    system = dataset.system
    q, r = _tracking_weights(cfg, system)
    ref_spec = cfg.get("objective", "reference")
    if ref_spec in ("sinusoid", "arc", "figure_eight"):
        ref = make_reference(
            ref_spec, dataset.horizon, system.dt, system.output_dim,
            amplitude=cfg.get("objective", "amplitude"),
        )
    else:
        ref = load_reference_csv(ref_spec)
    return TrackingObjective(ref, q, r, dataset.horizon)


def _run_algorithm(cfg, oracle, objective, x0, baseline):
    algo = cfg.get("algorithm", "kind")
    every = cfg.get("algorithm", "record_every")
    steps = cfg.get("algorithm", "max_steps")
    tol = cfg.get("algorithm", "stop_grad_tol")
    if algo == "dlf":
        c = DlfConfig(t_step=cfg.get("algorithm", "t_step"), eta=cfg.get("algorithm", "eta"),
                      max_steps=steps, stop_grad_tol=tol)
        return dlf_run(oracle, objective, x0, c, baseline=baseline, record_every=every)
    if algo == "drgd":
        c = DrgdConfig(gamma=cfg.get("algorithm", "gamma"), max_steps=steps, stop_grad_tol=tol)
        return drgd_run(oracle, objective, x0, c, baseline=baseline, record_every=every)
    if algo == "landing_descent":
        return landing_descent_run(
            oracle, objective, x0, gamma=cfg.get("algorithm", "gamma"),
            eta=cfg.get("algorithm", "eta"), max_steps=steps, stop_grad_tol=tol,
            baseline=baseline, record_every=every,
        )
    if algo == "riemannian_gd":
        if baseline is None:
            raise ConfigError("riemannian_gd needs a [manifold] section")
        return riemannian_gd_baseline(
            baseline, objective, x0, gamma=cfg.get("algorithm", "gamma"),
            max_steps=steps, stop_grad_tol=tol, record_every=every,
        )
    raise ConfigError(f"unknown algorithm kind {algo!r}")


def _cmd_generate_data(cfg: ExperimentConfig, out_dir: str):
    kind = cfg.get("manifold", "kind")
    count = cfg.get("manifold", "count")
    if kind in _SYSTEM_KINDS:
        system = _build_system(cfg)
        ds = generate_dataset(system, count, cfg.get("manifold", "horizon"), cfg.seed)
        ds.save(out_dir)
        return ["meta.txt", "data.csv"]
    manifold = _build_manifold(cfg)
    points = manifold.sample_uniform(count, cfg.seed)
    _write_points_csv(os.path.join(out_dir, "points.csv"), points)
    return ["points.csv"]


def _cmd_train_score(cfg: ExperimentConfig, out_dir: str):
    path = cfg.get("oracle", "dataset")
    if os.path.isdir(path):
        ds = TrajectoryDataset.load(path)
        data = ds.normalize(ds.flatten())
    else:
        data = _load_points(path)
    mlp = make_score_mlp(data.shape[1], hidden=cfg.get("algorithm", "hidden"), seed=cfg.seed)
    train_cfg = DsmTrainConfig(
        epochs=cfg.get("algorithm", "epochs"),
        batch=cfg.get("algorithm", "batch"),
        t_max=cfg.get("algorithm", "t_max"),
        t_min=cfg.get("algorithm", "t_min"),
        lr_hi=cfg.get("algorithm", "lr_hi"),
        lr_lo=cfg.get("algorithm", "lr_lo"),
        seed=cfg.seed,
    )
    mlp, trace = dsm_train(data, mlp, train_cfg)
    mlp.save(os.path.join(out_dir, "model.msopt"))
    with open(os.path.join(out_dir, "loss_trace.csv"), "w") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(trace):
            fh.write(f"{i},{loss:.17g}\n")
    return ["model.msopt", "loss_trace.csv"]


def _resolve_x0(cfg, manifold, oracle, objective):
    spec = cfg.get("algorithm", "x0")
    dataset = getattr(oracle, "points", None)
    if spec in ("auto", "dataset_argmin"):
        if dataset is not None and (spec == "dataset_argmin" or not isinstance(oracle, (ExactManifoldAdapter, QuadratureScoreOracle))):
            vals = np.array([objective.value(p) for p in dataset])
            return dataset[int(np.argmin(vals))].copy(), float(vals.min())
        if manifold is None:
            raise ConfigError("cannot resolve x0 = auto without a manifold or dataset")
        return manifold.sample_uniform(1, _rng.stream(cfg.seed, "x0").integers(2**31))[0], None
    if spec == "sample":
        if manifold is None:
            raise ConfigError("x0 = sample needs a [manifold] section")
        return manifold.sample_uniform(1, _rng.stream(cfg.seed, "x0").integers(2**31))[0], None
    return np.array([float(v) for v in spec.split(",")]), None


def _cmd_optimize(cfg: ExperimentConfig, out_dir: str):
    kind = cfg.get("manifold", "kind")
    if cfg.get("objective", "kind") == "tracking" or kind in _SYSTEM_KINDS:
        return _optimize_tracking(cfg, out_dir)
    manifold = _build_manifold(cfg)
    oracle = _build_oracle(cfg, manifold)
    obj_kind = cfg.get("objective", "kind")
    if obj_kind == "linear":
        a = cfg.get("objective", "a")
        if a is None:
            raise ConfigError("linear objective needs [objective] a")
        objective = LinearObjective(np.array(a))
    elif obj_kind == "brockett":
        if manifold is None or not hasattr(manifold, "n"):
            raise ConfigError("brockett objective needs an orthogonal [manifold]")
        objective = random_brockett(manifold.n, seed=cfg.get("objective", "a_seed"))
    elif obj_kind == "zero":
        objective = ZeroObjective(oracle.ambient_dim)
    else:
        raise ConfigError(f"unknown objective kind {obj_kind!r}")

    x0, best = _resolve_x0(cfg, manifold, oracle, objective)
    record, x_final = _run_algorithm(cfg, oracle, objective, x0, manifold)
    record.metadata["seed"] = str(cfg.seed)
    if best is not None:
        record.metadata["dataset_best_objective"] = f"{best:.17g}"
    record.save(os.path.join(out_dir, "run.csv"), os.path.join(out_dir, "run.meta.txt"))
    summary = feasibility_optimality_report(record, baseline=manifold)
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(summary.to_text())
    aborted = record.metadata.get("termination") == "diverged"
    return ["run.csv", "run.meta.txt", "summary.txt"], aborted


def _optimize_tracking(cfg: ExperimentConfig, out_dir: str):
    path = cfg.get("oracle", "dataset")
    if path is None or not os.path.isdir(path):
        raise ConfigError("tracking runs need [oracle] dataset = <trajectory directory>")
    dataset = TrajectoryDataset.load(path)
    tracking = _build_tracking_objective(cfg, dataset)
    if tracking.ambient_dim != dataset.ambient_dim:
        raise ConfigError(
            f"objective layout {tracking.ambient_dim} does not match dataset "
            f"ambient dim {dataset.ambient_dim}"
        )
    flat = dataset.flatten()
    normalized = dataset.normalize(flat)
    oracle = EmpiricalScoreOracle(normalized, cfg.get("oracle", "sigma"))
    objective = AffineReparamObjective(tracking, dataset.norm_shift, dataset.norm_scale)

    vals = np.array([tracking.value(p) for p in flat])
    i_best = int(np.argmin(vals))
    x0 = normalized[i_best].copy()
    record, z_final = _run_algorithm(cfg, oracle, objective, x0, None)
    record.metadata["seed"] = str(cfg.seed)
    record.metadata["space"] = "normalized"
    record.metadata["dataset_best_objective"] = f"{vals[i_best]:.17g}"
    record.save(os.path.join(out_dir, "run.csv"), os.path.join(out_dir, "run.meta.txt"))
    summary = feasibility_optimality_report(record, dataset=dataset, objective=tracking)
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(summary.to_text())
    final_phys = dataset.denormalize(z_final)
    _write_points_csv(os.path.join(out_dir, "optimized_point.csv"), final_phys[None, :])
    aborted = record.metadata.get("termination") == "diverged"
    return ["run.csv", "run.meta.txt", "summary.txt", "optimized_point.csv"], aborted


def _cmd_validate(cfg: ExperimentConfig, out_dir: str, do_assert: bool):
    check = cfg.get("algorithm", "check")
    violations = []
    artifacts = []
    if check == "rate":
        manifold = _build_manifold(cfg)
        if manifold is None:
            raise ConfigError("rate check needs a [manifold] section")
        oracle_kind = cfg.get("oracle", "kind") or "quadrature"

        def family(sigma):
            if oracle_kind == "quadrature":
                return QuadratureScoreOracle(manifold, cfg.get("oracle", "node_count"), sigma)
            if oracle_kind == "exact":
                return ExactManifoldAdapter(manifold)
            if oracle_kind == "empirical":
                if cfg.has("oracle", "dataset"):
                    pts = _load_points(cfg.get("oracle", "dataset"))
                else:
                    pts = manifold.sample_uniform(cfg.get("oracle", "sample_count") or 10000, cfg.seed)
                return EmpiricalScoreOracle(pts, sigma)
            raise ConfigError(f"rate check does not support oracle kind {oracle_kind!r}")

        report = rate_sweep(
            family, manifold, cfg.get("algorithm", "offsets"),
            cfg.get("algorithm", "sigmas"), cfg.get("algorithm", "n_points"), cfg.seed,
        )
        report.save_csv(os.path.join(out_dir, "rate_report.csv"))
        with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
            fh.write(report.summary_text())
        artifacts += ["rate_report.csv", "summary.txt"]
        lo, hi = cfg.get("algorithm", "slope_min"), cfg.get("algorithm", "slope_max")
        for name, slope in (("mean", report.slope_mean), ("jacobian", report.slope_jacobian)):
            if not (lo <= slope <= hi):
                violations.append(f"{name} slope {slope:.3f} outside [{lo}, {hi}]")
        if not report.monotone_decreasing():
            violations.append("errors not monotone decreasing in sigma")
    elif check == "landing":
        manifold = _build_manifold(cfg)
        if manifold is None:
            raise ConfigError("landing check needs a [manifold] section")
        base = manifold.sample_uniform(1, cfg.seed)[0]
        x0 = base + cfg.get("algorithm", "x0_distance") * manifold.unit_normal(base, seed=cfg.seed)
        report = landing_check(
            manifold, cfg.get("algorithm", "eta"), x0,
            cfg.get("algorithm", "t_end"), cfg.get("algorithm", "euler_step"),
            record_every=cfg.get("algorithm", "record_every"),
        )
        report.save_csv(os.path.join(out_dir, "landing_report.csv"))
        with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
            fh.write(report.summary_text())
        artifacts += ["landing_report.csv", "summary.txt"]
        budget = cfg.get("algorithm", "max_rel_dev")
        if report.max_rel_deviation > budget:
            violations.append(
                f"max relative deviation {report.max_rel_deviation:.4g} > {budget}"
            )
    elif check == "report":
        csv_path = cfg.get("algorithm", "run_csv")
        if csv_path is None:
            raise ConfigError("report check needs [algorithm] run_csv")
        record = load_run_record(csv_path, cfg.get("algorithm", "run_meta"))
        manifold = _build_manifold(cfg)
        summary = feasibility_optimality_report(record, baseline=manifold)
        with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
            fh.write(summary.to_text())
        artifacts.append("summary.txt")
    else:
        raise ConfigError(f"unknown validate check {check!r}")

    for v in violations:
        print(f"assertion violated: {v}", file=sys.stderr)
    return artifacts, bool(violations) and do_assert


def _cmd_sample(cfg: ExperimentConfig, out_dir: str):
    mlp = load_score_mlp(cfg.get("oracle", "model"))
    samples = ve_reverse_sample(
        mlp, count=cfg.get("algorithm", "count"), steps=cfg.get("algorithm", "steps"),
        seed=cfg.seed, t_max=cfg.get("algorithm", "t_max"),
        t_min=cfg.get("algorithm", "t_min"),
    )
    _write_points_csv(os.path.join(out_dir, "samples.csv"), samples)
    return ["samples.csv"]


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msopt",
        description="Riemannian optimization over sampled data manifolds",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(
            kind,
            help=f"run a {kind} experiment",
            epilog="accepted config keys:\n" + describe_keys(kind),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, help="override [experiment] seed")
        p.add_argument("--out", help="override [output] dir")
        if kind == "validate":
            p.add_argument(
                "--assert", dest="do_assert", action="store_true",
                help="exit 1 when validation thresholds are violated",
            )
    return parser


def run_cli(argv=None) -> int:
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    started = time.perf_counter()
    try:
        cfg = load_config(args.config)
        if cfg.kind != args.command:
            raise ConfigError(
                f"config declares kind {cfg.kind!r} but subcommand is {args.command!r}"
            )
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.values[("experiment", "seed")] = args.seed
        out_dir = args.out or cfg.get("output", "dir")
        cfg.values[("output", "dir")] = out_dir
        os.makedirs(out_dir, exist_ok=True)

        aborted = False
        if cfg.kind == "generate-data":
            artifacts = _cmd_generate_data(cfg, out_dir)
        elif cfg.kind == "train-score":
            artifacts = _cmd_train_score(cfg, out_dir)
        elif cfg.kind == "optimize":
            artifacts, aborted = _cmd_optimize(cfg, out_dir)
        elif cfg.kind == "validate":
            artifacts, aborted = _cmd_validate(cfg, out_dir, getattr(args, "do_assert", False))
        else:
            artifacts = _cmd_sample(cfg, out_dir)
        _write_manifest(out_dir, cfg, started, artifacts)
        if aborted:
            print("run finished with violations or a numerical abort", file=sys.stderr)
            return 1
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # contract violations from component constructors are config mistakes
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MsoptError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())
