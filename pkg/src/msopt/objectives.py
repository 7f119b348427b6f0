"""Objective functions with analytic gradients and ground-truth oracles.

An objective exposes value(x) and gradient(x) on flattened ambient points.
Every analytic gradient is expected to pass grad_check against central
differences; the Brockett eigenvalue pairing provides an independent global
optimum for the orthogonal-group experiments.
"""

from dataclasses import dataclass

import numpy as np

from msopt import rng as _rng
from msopt.linalg import fd_gradient


class Objective:
    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroObjective(Objective):
    """f = 0; used by pure landing runs."""

    dim: int

    def value(self, x) -> float:
        return 0.0

    def gradient(self, x) -> np.ndarray:
        return np.zeros(self.dim)


@dataclass(frozen=True)
class LinearObjective(Objective):
    """f(x) = a . x; unique sphere minimizer at -radius * a/||a||."""

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if np.linalg.norm(a) == 0.0:
            raise ValueError("linear objective needs a != 0")
        object.__setattr__(self, "a", a)

    def value(self, x) -> float:
        return float(self.a @ np.asarray(x, dtype=float))

    def gradient(self, x) -> np.ndarray:
        return self.a.copy()


class BrockettObjective(Objective):
    """f(X) = tr(A X Q X^T) on n x n matrices, A and Q symmetric."""

    def __init__(self, a, q=None):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("A must be square")
        n = a.shape[0]
        q = np.diag(np.arange(1.0, n + 1.0)) if q is None else np.asarray(q, dtype=float)
        for name, m in (("A", a), ("Q", q)):
            if m.shape != (n, n) or np.abs(m - m.T).max() > 1e-12:
                raise ValueError(f"{name} must be symmetric {n}x{n}")
        self.a = a
        self.q = q
        self.n = n

    def _as_matrix(self, x):
        x = np.asarray(x, dtype=float)
        if x.size != self.n * self.n:
            raise ValueError(f"point of size {x.size} does not reshape to {self.n}x{self.n}")
        return x.reshape(self.n, self.n)

    def value(self, x) -> float:
        X = self._as_matrix(x)
        return float(np.trace(self.a @ X @ self.q @ X.T))

    def gradient(self, x) -> np.ndarray:
        X = self._as_matrix(x)
        return (2.0 * self.a @ X @ self.q).reshape(-1)


def random_brockett(n: int, seed: int) -> BrockettObjective:
    """A = (G + G^T)/2 with standard-normal G, Q = diag(1..n)."""
    g = _rng.stream(seed, "brockett_a").standard_normal((n, n))
    return BrockettObjective(a=(g + g.T) / 2.0)


def brockett_optimum(obj: BrockettObjective) -> float:
    """Global minimum of the Brockett cost over the orthogonal group.

    Rearrangement pairing: eigenvalues of A sorted ascending against the
    diagonal of Q sorted descending. Requires diagonal Q with distinct
    entries (the pairing is then uniquely defined).
    """
    q = obj.q
    if np.abs(q - np.diag(np.diag(q))).max() > 0.0:
        raise ValueError("brockett_optimum requires diagonal Q")
    qd = np.diag(q)
    if np.unique(qd).size != qd.size:
        raise ValueError("brockett_optimum requires distinct diagonal entries in Q")
    alpha = np.sort(np.linalg.eigvalsh(obj.a))
    return float(alpha @ np.sort(qd)[::-1])


class TrackingObjective(Objective):
    """Finite-horizon tracking cost on concatenated (inputs, outputs).

    Layout: (u_0..u_{N-1}, y_0..y_N) flattened row-major. The cost sums
    u_k^T R u_k + (y_k - r_k)^T Q (y_k - r_k) for k < N plus a terminal
    (y_N - r_N)^T Q (y_N - r_N) term. R must be positive definite; Q may be
    positive semidefinite (outputs can be excluded with zero rows).
    """

    def __init__(self, reference, q_weight, r_weight, horizon: int):
        reference = np.atleast_2d(np.asarray(reference, dtype=float))
        q = np.atleast_2d(np.asarray(q_weight, dtype=float))
        r = np.atleast_2d(np.asarray(r_weight, dtype=float))
        if reference.shape[0] != horizon + 1:
            raise ValueError(
                f"reference has {reference.shape[0]} rows, expected horizon+1 = {horizon + 1}"
            )
        ny, nu = q.shape[0], r.shape[0]
        if q.shape != (ny, ny) or np.abs(q - q.T).max() > 1e-12:
            raise ValueError("Q must be symmetric")
        if r.shape != (nu, nu) or np.abs(r - r.T).max() > 1e-12:
            raise ValueError("R must be symmetric")
        if reference.shape[1] != ny:
            raise ValueError("reference width does not match Q")
        if np.linalg.eigvalsh(q).min() < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(r).min() <= 0.0:
            raise ValueError("R must be positive definite")
        self.reference = reference
        self.q = q
        self.r = r
        self.horizon = int(horizon)
        self.input_dim = nu
        self.output_dim = ny
        self.ambient_dim = horizon * nu + (horizon + 1) * ny

    def _split(self, z):
        z = np.asarray(z, dtype=float)
        if z.size != self.ambient_dim:
            raise ValueError(
                f"point of size {z.size} does not match layout "
                f"{self.horizon}*{self.input_dim} + {self.horizon + 1}*{self.output_dim}"
            )
        nu_total = self.horizon * self.input_dim
        u = z[:nu_total].reshape(self.horizon, self.input_dim)
        y = z[nu_total:].reshape(self.horizon + 1, self.output_dim)
        return u, y

    def value(self, z) -> float:
        u, y = self._split(z)
        dy = y - self.reference
        val = np.einsum("ki,ij,kj->", u, self.r, u)
        val += np.einsum("ki,ij,kj->", dy[:-1], self.q, dy[:-1])
        val += dy[-1] @ self.q @ dy[-1]
        return float(val)

    def gradient(self, z) -> np.ndarray:
        u, y = self._split(z)
        dy = y - self.reference
        gu = 2.0 * u @ self.r
        gy = 2.0 * dy @ self.q
        return np.concatenate([gu.reshape(-1), gy.reshape(-1)])


class AffineReparamObjective(Objective):
    """Objective pulled back through x = shift + scale * z (elementwise)."""

    def __init__(self, inner: Objective, shift, scale):
        self.inner = inner
        self.shift = np.asarray(shift, dtype=float)
        self.scale = np.asarray(scale, dtype=float)

    def value(self, z) -> float:
        return self.inner.value(self.shift + self.scale * np.asarray(z, dtype=float))

    def gradient(self, z) -> np.ndarray:
        return self.scale * self.inner.gradient(self.shift + self.scale * np.asarray(z, dtype=float))


def grad_check(obj: Objective, points, h: float = 1e-5) -> float:
    """Max over points of ||analytic - central-difference|| / (1 + ||analytic||)."""
    worst = 0.0
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        g = obj.gradient(x)
        g_fd = fd_gradient(obj.value, x, h=h)
        worst = max(worst, float(np.linalg.norm(g - g_fd) / (1.0 + np.linalg.norm(g))))
    return worst


# ---- reference trajectory generators ---------------------------------------


def make_reference(kind: str, horizon: int, dt: float, output_dim: int, **params) -> np.ndarray:
    """Configurable references: sinusoid, circular arc, or figure-eight.

    Returns (horizon+1, output_dim); coordinates beyond the generated planar
    (or scalar) profile are zero-filled, matching zero-weighted outputs.
    """
    t = np.arange(horizon + 1) * dt
    span = max(horizon * dt, dt)
    kind = kind.lower()
    amplitude = float(params.get("amplitude", 1.0))
    if kind == "sinusoid":
        prof = amplitude * np.sin(2.0 * np.pi * t / span)[:, None]
    elif kind == "arc":
        # quarter turn of radius `amplitude`, starting at the origin
        ang = 0.5 * np.pi * t / span
        prof = amplitude * np.stack([np.sin(ang), 1.0 - np.cos(ang)], axis=1)
    elif kind == "figure_eight":
        ang = 2.0 * np.pi * t / span
        prof = amplitude * np.stack([np.sin(ang), 0.5 * np.sin(2.0 * ang)], axis=1)
    else:
        raise ValueError(f"unknown reference kind: {kind!r}")
    ref = np.zeros((horizon + 1, output_dim))
    w = min(output_dim, prof.shape[1])
    ref[:, :w] = prof[:, :w]
    return ref


def load_reference_csv(path) -> np.ndarray:
    """One output vector per row."""
    ref = np.loadtxt(path, delimiter=",", ndmin=2)
    return np.asarray(ref, dtype=float)
