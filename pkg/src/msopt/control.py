"""Data-driven control stack: simulators, trajectory datasets, back-testing.

Discrete-time systems are RK4 discretizations of the continuous dynamics.
Datasets of input-output pairs sampled under persistently exciting inputs
form the training measure on the system-behavior manifold; flattened points
are (u blocks, then y blocks), matching the tracking objective layout.
"""

import os
from dataclasses import dataclass

import numpy as np

from msopt import rng as _rng
from msopt.errors import DivergenceError, MsoptError
from msopt.linalg import rk4_step

_RESIM_TOL = 1e-10


@dataclass(frozen=True)
class SystemModel:
    """Unicycle car or torque-driven double pendulum."""

    kind: str
    dt: float = None
    # pendulum parameters; unused by the unicycle
    m1: float = 1.0
    l1: float = 1.0
    g: float = 1.0
    m2: float = 0.5
    l2: float = 0.5
    d1: float = 0.1
    d2: float = 0.1

    def __post_init__(self):
        if self.kind not in ("unicycle", "double_pendulum"):
            raise ValueError(f"unknown system kind: {self.kind!r}")
        if self.dt is None:
            object.__setattr__(self, "dt", 0.05 if self.kind == "unicycle" else 0.1)
        if self.dt <= 0:
            raise ValueError("need dt > 0")

    @property
    def state_dim(self) -> int:
        return 3 if self.kind == "unicycle" else 4

    @property
    def input_dim(self) -> int:
        return 2 if self.kind == "unicycle" else 1

    @property
    def output_dim(self) -> int:
        return 3 if self.kind == "unicycle" else 2

    def continuous_dynamics(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if x.size != self.state_dim or u.size != self.input_dim:
            raise ValueError(
                f"dimension mismatch: state {x.size}/{self.state_dim}, "
                f"input {u.size}/{self.input_dim}"
            )
        if self.kind == "unicycle":
            v, w = u
            return np.array([v * np.cos(x[2]), v * np.sin(x[2]), w])
        th1, w1, th2, w2 = x
        delta = th2 - th1
        m_off = self.m2 * self.l1 * self.l2 * np.cos(delta)
        M = np.array(
            [
                [(self.m1 + self.m2) * self.l1**2, m_off],
                [m_off, self.m2 * self.l2**2],
            ]
        )
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        if abs(det) < 1e-12:
            raise MsoptError("singular pendulum mass matrix")
        s = self.m2 * self.l1 * self.l2 * np.sin(delta)
        C = np.array([-s * w2**2, s * w1**2])
        G = np.array(
            [
                (self.m1 + self.m2) * self.g * self.l1 * np.sin(th1),
                self.m2 * self.g * self.l2 * np.sin(th2),
            ]
        )
        damping = np.array([self.d1 * w1, self.d2 * w2])
        tau = np.array([u[0], 0.0])
        acc = np.linalg.solve(M, tau - C - G - damping)
        return np.array([w1, acc[0], w2, acc[1]])

    def output(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x.copy() if self.kind == "unicycle" else x[[0, 2]]

    def step(self, x, u) -> np.ndarray:
        return rk4_step(self.continuous_dynamics, x, u, self.dt)

    def sample_inputs(self, horizon: int, gen) -> np.ndarray:
        """Persistently exciting input law for dataset generation."""
        if self.kind == "unicycle":
            v = gen.uniform(0.0, 1.0, horizon)
            w = gen.normal(0.0, 5.0, horizon)
            return np.stack([v, w], axis=1)
        return gen.uniform(-5.0, 5.0, (horizon, 1))


def rollout(model: SystemModel, u_seq, x0=None):
    """Simulate from x0 (default 0); returns (outputs (N+1, ny), states)."""
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    if u_seq.shape[1] != model.input_dim:
        raise ValueError(f"inputs have width {u_seq.shape[1]}, expected {model.input_dim}")
    x = np.zeros(model.state_dim) if x0 is None else np.array(x0, dtype=float)
    states = [x.copy()]
    for k, u in enumerate(u_seq):
        x = model.step(x, u)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"rollout produced non-finite state at step {k + 1}")
        states.append(x.copy())
    states = np.asarray(states)
    outputs = np.array([model.output(s) for s in states])
    return outputs, states


def backtest(model: SystemModel, u_star, y_star):
    """Replay u_star on the true system; gap = ||y_star - y_true||_F."""
    y_star = np.atleast_2d(np.asarray(y_star, dtype=float))
    y_true, _ = rollout(model, u_star)
    if y_true.shape != y_star.shape:
        raise ValueError(f"claimed outputs {y_star.shape} vs simulated {y_true.shape}")
    return y_true, float(np.linalg.norm(y_star - y_true))


@dataclass
class TrajectoryDataset:
    """Input-output pairs on the behavior manifold, plus generation metadata."""

    system: SystemModel
    horizon: int
    inputs: np.ndarray  # (count, horizon, nu)
    outputs: np.ndarray  # (count, horizon + 1, ny)
    seed: int
    norm_shift: np.ndarray = None
    norm_scale: np.ndarray = None

    def __post_init__(self):
        if self.norm_shift is None:
            flat = self.flatten()
            shift = flat.mean(axis=0)
            scale = flat.std(axis=0)
            scale[scale < 1e-12] = 1.0
            self.norm_shift = shift
            self.norm_scale = scale

    @property
    def count(self) -> int:
        return self.inputs.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.horizon * self.system.input_dim + (self.horizon + 1) * self.system.output_dim

    def flatten(self) -> np.ndarray:
        return np.concatenate(
            [self.inputs.reshape(self.count, -1), self.outputs.reshape(self.count, -1)],
            axis=1,
        )

    def split_point(self, z):
        """Flattened point -> (u (horizon, nu), y (horizon+1, ny))."""
        z = np.asarray(z, dtype=float)
        nu_total = self.horizon * self.system.input_dim
        u = z[:nu_total].reshape(self.horizon, self.system.input_dim)
        y = z[nu_total:].reshape(self.horizon + 1, self.system.output_dim)
        return u, y

    def normalize(self, flat) -> np.ndarray:
        return (np.asarray(flat, dtype=float) - self.norm_shift) / self.norm_scale

    def denormalize(self, z) -> np.ndarray:
        return self.norm_shift + self.norm_scale * np.asarray(z, dtype=float)

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "meta.txt"), "w") as fh:
            fh.write(f"system = {self.system.kind}\n")
            fh.write(f"dt = {self.system.dt:.17g}\n")
            fh.write(f"horizon = {self.horizon}\n")
            fh.write(f"count = {self.count}\n")
            fh.write(f"seed = {self.seed}\n")
            fh.write(f"input_dim = {self.system.input_dim}\n")
            fh.write(f"output_dim = {self.system.output_dim}\n")
            fh.write("norm_shift = " + ",".join(f"{v:.17g}" for v in self.norm_shift) + "\n")
            fh.write("norm_scale = " + ",".join(f"{v:.17g}" for v in self.norm_scale) + "\n")
        flat = self.flatten()
        with open(os.path.join(directory, "data.csv"), "w") as fh:
            for row in flat:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @staticmethod
    def load(directory) -> "TrajectoryDataset":
        meta = {}
        with open(os.path.join(directory, "meta.txt")) as fh:
            for line in fh:
                key, _, value = line.partition("=")
                meta[key.strip()] = value.strip()
        system = SystemModel(kind=meta["system"], dt=float(meta["dt"]))
        horizon = int(meta["horizon"])
        count = int(meta["count"])
        flat = np.loadtxt(os.path.join(directory, "data.csv"), delimiter=",", ndmin=2)
        nu_total = horizon * system.input_dim
        ds = TrajectoryDataset(
            system=system,
            horizon=horizon,
            inputs=flat[:, :nu_total].reshape(count, horizon, system.input_dim),
            outputs=flat[:, nu_total:].reshape(count, horizon + 1, system.output_dim),
            seed=int(meta["seed"]),
            norm_shift=np.array([float(v) for v in meta["norm_shift"].split(",")]),
            norm_scale=np.array([float(v) for v in meta["norm_scale"].split(",")]),
        )
        return ds


def generate_dataset(model: SystemModel, count: int, horizon: int, seed: int) -> TrajectoryDataset:
    """Sample rollouts under the model's excitation law; verifies feasibility."""
    if count < 1 or horizon < 1:
        raise ValueError("need count >= 1 and horizon >= 1")
    inputs = np.empty((count, horizon, model.input_dim))
    outputs = np.empty((count, horizon + 1, model.output_dim))
    for i in range(count):
        gen = _rng.substream(seed, "trajectory", i)
        u = model.sample_inputs(horizon, gen)
        y, _ = rollout(model, u)
        inputs[i] = u
        outputs[i] = y
        y_check, _ = rollout(model, u)
        if np.max(np.abs(y_check - y)) > _RESIM_TOL:
            raise MsoptError(f"trajectory {i} failed the re-simulation check")
    return TrajectoryDataset(
        system=model, horizon=horizon, inputs=inputs, outputs=outputs, seed=seed
    )
