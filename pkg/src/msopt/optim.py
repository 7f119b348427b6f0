"""Optimizers driven by score surrogates, with per-iteration instrumentation.

Four methods:

  dlf_run               Euler-discretized landing flow
                        x <- x + t_step * (-s'(x)^T grad f(s(x)) + eta (s(x) - x))
  landing_descent_run   the same update read as gradient descent on the
                        penalized objective f(s(x)) + eta * d_sigma(x);
                        requires an oracle that exposes the link value
  drgd_run              projected descent x <- s(x - gamma s'(x)^T grad f(x))
  riemannian_gd_baseline classical projected gradient descent on an exactly
                        known manifold (comparison baseline)

Jacobian contractions are vector-Jacobian products: for exact oracles the
Jacobian is symmetric so this equals the forward product; for the network
oracle it is the single forward-backward evaluation.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from msopt.errors import MsoptError, ProjectionError

_RUNAWAY_FACTOR = 1e9

CSV_HEADER = "step,objective,surrogate_objective,feasibility,riem_grad_norm,step_norm"
_COLUMNS = CSV_HEADER.split(",")


@dataclass
class RunRecord:
    """Per-iteration trace plus run metadata and the final iterate."""

    steps: np.ndarray
    objective: np.ndarray
    surrogate_objective: np.ndarray
    feasibility: np.ndarray
    riem_grad_norm: np.ndarray
    step_norm: np.ndarray
    metadata: dict = field(default_factory=dict)
    final_point: np.ndarray | None = None

    def __len__(self):
        return len(self.steps)

    def save(self, csv_path, meta_path=None):
        rows = np.column_stack(
            [
                self.steps,
                self.objective,
                self.surrogate_objective,
                self.feasibility,
                self.riem_grad_norm,
                self.step_norm,
            ]
        )
        with open(csv_path, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in rows:
                fh.write(f"{int(row[0])}," + ",".join(f"{v:.17g}" for v in row[1:]) + "\n")
        if meta_path is not None:
            with open(meta_path, "w") as fh:
                for key in sorted(self.metadata):
                    fh.write(f"{key} = {self.metadata[key]}\n")
                if self.final_point is not None:
                    fh.write(
                        "final_point = "
                        + ",".join(f"{v:.17g}" for v in self.final_point)
                        + "\n"
                    )


def load_run_record(csv_path, meta_path=None) -> RunRecord:
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    metadata = {}
    final_point = None
    if meta_path is not None:
        with open(meta_path) as fh:
            for line in fh:
                key, _, value = line.partition("=")
                key, value = key.strip(), value.strip()
                if key == "final_point":
                    final_point = np.array([float(v) for v in value.split(",")])
                elif key:
                    metadata[key] = value
    return RunRecord(
        steps=data[:, 0].astype(int),
        objective=data[:, 1],
        surrogate_objective=data[:, 2],
        feasibility=data[:, 3],
        riem_grad_norm=data[:, 4],
        step_norm=data[:, 5],
        metadata=metadata,
        final_point=final_point,
    )


@dataclass
class DlfConfig:
    t_step: float = 1e-4
    eta: float = 3e3
    max_steps: int = 1000
    stop_grad_tol: float = 1e-8

    def __post_init__(self):
        if self.t_step <= 0 or self.eta < 0 or self.max_steps < 0:
            raise ValueError("need t_step > 0, eta >= 0, max_steps >= 0")


@dataclass
class DrgdConfig:
    gamma: float = 1e-3
    max_steps: int = 1000
    stop_grad_tol: float = 1e-8

    def __post_init__(self):
        if self.gamma <= 0 or self.max_steps < 0:
            raise ValueError("need gamma > 0, max_steps >= 0")


class _Recorder:
    """Accumulates rows and the baseline-derived optimality metrics."""

    def __init__(self, objective, baseline, every):
        self.objective = objective
        self.baseline = baseline
        self.every = max(1, int(every))
        self.rows = []
        self.max_dist = 0.0
        self.start = time.perf_counter()

    def metrics(self, x):
        if self.baseline is None:
            return np.nan, np.nan
        try:
            p = self.baseline.project(x)
            feas = self.baseline.feasibility(x)
            g = np.linalg.norm(self.baseline.riemannian_grad(p, self.objective.gradient(p)))
            self.max_dist = max(self.max_dist, float(np.linalg.norm(x - p)))
        except ProjectionError:
            feas, g = np.nan, np.nan
        return feas, g

    def add(self, k, x, surrogate, step_norm, force=False):
        if not force and k % self.every != 0:
            return
        if self.rows and self.rows[-1][0] == k:
            return
        feas, g = self.metrics(x)
        self.rows.append(
            (k, self.objective.value(x), surrogate, feas, g, step_norm)
        )

    def finish(self, x_final, metadata):
        rows = np.array(self.rows, dtype=float) if self.rows else np.zeros((0, 6))
        metadata = dict(metadata)
        metadata["wall_time_s"] = f"{time.perf_counter() - self.start:.3f}"
        if self.baseline is not None:
            tube = self.baseline.safe_tube_radius
            metadata["feasibility_metric"] = type(self.baseline).__name__.lower()
            metadata["max_manifold_distance"] = f"{self.max_dist:.17g}"
            metadata["left_safe_tube"] = str(self.max_dist > tube).lower()
        return RunRecord(
            steps=rows[:, 0].astype(int),
            objective=rows[:, 1],
            surrogate_objective=rows[:, 2],
            feasibility=rows[:, 3],
            riem_grad_norm=rows[:, 4],
            step_norm=rows[:, 5],
            metadata=metadata,
            final_point=np.array(x_final, dtype=float),
        )


def _runaway(x, x0_scale):
    return not np.all(np.isfinite(x)) or np.linalg.norm(x) > _RUNAWAY_FACTOR * x0_scale


def _landing_loop(score, objective, x0, step, eta, max_steps, stop_tol, baseline,
                  record_every, algorithm):
    x = np.array(x0, dtype=float)
    x0_scale = 1.0 + np.linalg.norm(x)
    rec = _Recorder(objective, baseline, record_every)
    meta = {
        "algorithm": algorithm,
        "step_size": f"{step:.17g}",
        "eta": f"{eta:.17g}",
        "max_steps": str(max_steps),
        "oracle": type(score).__name__,
        "sigma": f"{score.sigma:.17g}",
        "termination": "budget",
    }
    prev_step_norm = 0.0
    for k in range(max_steps + 1):
        mean = score.mean(x)
        v = objective.gradient(mean)
        drift = -score.mean_vjp(x, v) + eta * (mean - x)
        stop = k == max_steps or np.linalg.norm(drift) < stop_tol
        rec.add(k, x, objective.value(mean), prev_step_norm, force=stop)
        if stop:
            if k < max_steps:
                meta["termination"] = "grad_tol"
            break
        x_next = x + step * drift
        if _runaway(x_next, x0_scale):
            rec.add(k, x, objective.value(mean), prev_step_norm, force=True)
            meta["termination"] = "diverged"
            meta["diverged_at_step"] = str(k + 1)
            break
        prev_step_norm = float(np.linalg.norm(x_next - x))
        x = x_next
    return rec.finish(x, meta), x


def dlf_run(score, objective, x0, cfg: DlfConfig, baseline=None, record_every: int = 1):
    """Euler-discretized denoising landing flow; returns (RunRecord, final x)."""
    return _landing_loop(
        score, objective, x0, cfg.t_step, cfg.eta, cfg.max_steps, cfg.stop_grad_tol,
        baseline, record_every, "dlf",
    )


def landing_descent_run(score, objective, x0, gamma: float, eta: float,
                        max_steps: int, stop_grad_tol: float = 1e-8,
                        baseline=None, record_every: int = 1):
    """Gradient descent on the penalized objective f(s(x)) + eta d_sigma(x).

    The assembled gradient s'(x) grad f(s(x)) + eta (x - s(x)) only descends
    that potential when the oracle exposes the link value, so link-less
    oracles are rejected.
    """
    if not getattr(score, "has_link", False):
        raise MsoptError("landing descent requires an oracle with a link value")
    return _landing_loop(
        score, objective, x0, gamma, eta, max_steps, stop_grad_tol,
        baseline, record_every, "landing_descent",
    )


def drgd_run(score, objective, x0, cfg: DrgdConfig, baseline=None, record_every: int = 1):
    """Denoising Riemannian gradient descent; returns (RunRecord, final x)."""
    x = np.array(x0, dtype=float)
    x0_scale = 1.0 + np.linalg.norm(x)
    rec = _Recorder(objective, baseline, record_every)
    meta = {
        "algorithm": "drgd",
        "gamma": f"{cfg.gamma:.17g}",
        "max_steps": str(cfg.max_steps),
        "oracle": type(score).__name__,
        "sigma": f"{score.sigma:.17g}",
        "termination": "budget",
    }
    prev_step_norm = 0.0
    for k in range(cfg.max_steps + 1):
        v = objective.gradient(x)
        mean, vjp = score.mean_and_vjp(x, v)
        stop = k == cfg.max_steps or np.linalg.norm(vjp) < cfg.stop_grad_tol
        rec.add(k, x, objective.value(mean), prev_step_norm, force=stop)
        if stop:
            if k < cfg.max_steps:
                meta["termination"] = "grad_tol"
            break
        x_next = score.mean(x - cfg.gamma * vjp)
        if _runaway(x_next, x0_scale):
            rec.add(k, x, objective.value(mean), prev_step_norm, force=True)
            meta["termination"] = "diverged"
            meta["diverged_at_step"] = str(k + 1)
            break
        prev_step_norm = float(np.linalg.norm(x_next - x))
        x = x_next
    return rec.finish(x, meta), x


def riemannian_gd_baseline(manifold, objective, x0, gamma: float, max_steps: int,
                           stop_grad_tol: float = 1e-8, record_every: int = 1):
    """Exact projected Riemannian gradient descent on a known manifold."""
    x = manifold.project(np.array(x0, dtype=float))
    if np.linalg.norm(x - np.asarray(x0, dtype=float)) > 1e-9:
        raise ValueError("riemannian_gd_baseline requires an on-manifold start")
    rec = _Recorder(objective, manifold, record_every)
    meta = {
        "algorithm": "riemannian_gd",
        "gamma": f"{gamma:.17g}",
        "max_steps": str(max_steps),
        "oracle": "exact",
        "sigma": "0",
        "termination": "budget",
    }
    prev_step_norm = 0.0
    for k in range(max_steps + 1):
        g = manifold.riemannian_grad(x, objective.gradient(x))
        stop = k == max_steps or np.linalg.norm(g) < stop_grad_tol
        rec.add(k, x, objective.value(x), prev_step_norm, force=stop)
        if stop:
            if k < max_steps:
                meta["termination"] = "grad_tol"
            break
        x_next = manifold.project(x - gamma * g)
        prev_step_norm = float(np.linalg.norm(x_next - x))
        x = x_next
    return rec.finish(x, meta), x
