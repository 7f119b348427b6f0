"""Exactly-known embedded manifolds: circle, sphere, orthogonal group.

These provide the ground-truth projection pi, tangent projection, uniform
sampling and distance against which the score surrogates are validated.
Matrix manifolds flatten to ambient vectors row-major.
"""

from dataclasses import dataclass

import numpy as np

from msopt import rng as _rng
from msopt.errors import ProjectionError
from msopt.linalg import fd_jacobian, svd

_DEGENERATE_TOL = 1e-12
_ON_MANIFOLD_TOL = 1e-9


@dataclass(frozen=True)
class _Manifold:
    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tangent_project(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def riemannian_grad(self, p: np.ndarray, euclid_grad: np.ndarray) -> np.ndarray:
        """Tangent-space projection of the Euclidean gradient at p."""
        return self.tangent_project(p, euclid_grad)

    def dist_to_manifold(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(np.asarray(x, dtype=float) - self.project(x)))

    def feasibility(self, x: np.ndarray) -> float:
        """Constraint residual reported in run records (see subclasses)."""
        return self.dist_to_manifold(x)

    def projection_jacobian(self, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
        """Jacobian of the closest-point projection at x (finite differences)."""
        return fd_jacobian(self.project, np.asarray(x, dtype=float), h=h)

    def _check_on_manifold(self, p: np.ndarray):
        res = self.constraint_residual(p)
        if res > _ON_MANIFOLD_TOL:
            raise ValueError(
                f"point is off the manifold (constraint residual {res:.3e})"
            )


@dataclass(frozen=True)
class Sphere(_Manifold):
    """Sphere of given radius in R^ambient_dim."""

    ambient_dim: int
    radius: float = 1.0

    def __post_init__(self):
        if self.radius <= 0 or self.ambient_dim < 1:
            raise ValueError("sphere needs radius > 0 and ambient_dim >= 1")

    @property
    def safe_tube_radius(self) -> float:
        return 0.5 * self.radius

    def constraint_residual(self, p) -> float:
        return float(abs(np.linalg.norm(p) - self.radius))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        n = np.linalg.norm(x)
        if n < _DEGENERATE_TOL:
            raise ProjectionError(
                "projection undefined at the origin (outside tubular neighborhood)"
            )
        return (self.radius / n) * x

    def tangent_project(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        self._check_on_manifold(p)
        u = p / np.linalg.norm(p)
        return v - (v @ u) * u

    def projection_jacobian(self, x, h: float = 1e-5):
        x = np.asarray(x, dtype=float)
        n = np.linalg.norm(x)
        if n < _DEGENERATE_TOL:
            raise ProjectionError("projection Jacobian undefined at the origin")
        u = x / n
        return (self.radius / n) * (np.eye(x.size) - np.outer(u, u))

    def sample_uniform(self, count: int, seed: int) -> np.ndarray:
        g = _rng.stream(seed, f"sphere{self.ambient_dim}").standard_normal(
            (count, self.ambient_dim)
        )
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return self.radius * g

    def unit_normal(self, p, seed: int = 0, index: int = 0) -> np.ndarray:
        """Outward unit normal; sign alternates with index for tube coverage."""
        u = np.asarray(p, dtype=float) / np.linalg.norm(p)
        return u if index % 2 == 0 else -u


def Circle(radius: float = 1.0) -> Sphere:
    """Circle of given radius in the plane (2-d sphere specialization)."""
    return Sphere(ambient_dim=2, radius=radius)


@dataclass(frozen=True)
class Orthogonal(_Manifold):
    """Orthogonal group O(n), embedded in R^(n*n) row-major."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("orthogonal group needs n >= 1")

    @property
    def ambient_dim(self) -> int:
        return self.n * self.n

    @property
    def safe_tube_radius(self) -> float:
        return 0.4

    def _as_matrix(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x.reshape(self.n, self.n)

    def constraint_residual(self, p) -> float:
        m = self._as_matrix(p)
        return float(np.linalg.norm(m.T @ m - np.eye(self.n)))

    def feasibility(self, x) -> float:
        """Gram residual ||X^T X - I||_F, the tube metric used in reports."""
        return self.constraint_residual(x)

    def project(self, x):
        m = self._as_matrix(x)
        res = svd(m)
        if res.singular_values.min() < _DEGENERATE_TOL:
            raise ProjectionError(
                "polar factor undefined: zero singular value "
                "(outside tubular neighborhood)"
            )
        return (res.u @ res.vt).reshape(-1)

    def tangent_project(self, p, v):
        self._check_on_manifold(p)
        X = self._as_matrix(p)
        V = self._as_matrix(v)
        M = X.T @ V
        return (X @ (M - M.T) / 2.0).reshape(-1)

    def sample_uniform(self, count: int, seed: int) -> np.ndarray:
        gen = _rng.stream(seed, f"haar_o{self.n}")
        out = np.empty((count, self.ambient_dim))
        for i in range(count):
            g = gen.standard_normal((self.n, self.n))
            q, r = np.linalg.qr(g)
            d = np.sign(np.diag(r))
            d[d == 0] = 1.0
            out[i] = (q * d).reshape(-1)
        return out

    def unit_normal(self, p, seed: int = 0, index: int = 0) -> np.ndarray:
        """Random unit normal X*S (S symmetric) at an on-manifold point."""
        X = self._as_matrix(p)
        g = _rng.stream(seed, f"normal_o{self.n}/{index}").standard_normal(
            (self.n, self.n)
        )
        S = (g + g.T) / 2.0
        N = X @ S
        return (N / np.linalg.norm(N)).reshape(-1)


def make_manifold(kind: str, **params) -> _Manifold:
    """Build a manifold from config parameters."""
    kind = kind.lower()
    if kind == "circle":
        return Circle(radius=float(params.get("radius", 1.0)))
    if kind == "sphere":
        return Sphere(
            ambient_dim=int(params.get("dim", 3)),
            radius=float(params.get("radius", 1.0)),
        )
    if kind == "orthogonal":
        return Orthogonal(n=int(params.get("n", 3)))
    raise ValueError(f"unknown manifold kind: {kind!r}")
