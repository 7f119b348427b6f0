"""Score oracles: the manifold-operation surrogates and their exact forms.

Every oracle exposes the same evaluation contract:

  mean(x)          Tweedie mean s(x) = x + sigma^2 grad log p_sigma(x);
                   posterior mean of the clean point, approximate projection.
  eval(x)          ScoreEval with mean, Jacobian s'(x) and link value.
  mean_vjp(x, v)   s'(x)^T v without materializing the Jacobian.

For the exact mixture oracles the Jacobian equals Cov(posterior)/sigma^2
(symmetric PSD), and the link value ell_sigma satisfies grad ell = mean and
hess ell = Jacobian. The link is stored up to an additive constant: the
sigma-dependent normalizers (log N resp. log of the Gaussian constant) are
dropped since only x-derivatives are ever consumed. The smoothed squared
distance is recovered as d_sigma(x) = ||x||^2/2 - ell_sigma(x).
"""

from dataclasses import dataclass

import numpy as np

from msopt.linalg import fd_gradient
from msopt.manifolds import Sphere
from msopt.score.mlp import ScoreMlp

LINK_UNAVAILABLE = float("nan")


@dataclass(frozen=True)
class ScoreEval:
    tweedie_mean: np.ndarray
    tweedie_jacobian: np.ndarray
    link_value: float

    def sigma_distance(self, x) -> float:
        """d_sigma(x) = ||x||^2/2 - link; smoothed half squared distance."""
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ x) - self.link_value


def _softmax_weights(points, sigma, x):
    """Posterior weights, their log-normalizer, and residuals to x."""
    diff = points - x
    logits = -np.einsum("nd,nd->n", diff, diff) / (2.0 * sigma * sigma)
    m = logits.max()
    w = np.exp(logits - m)
    z = w.sum()
    return w / z, float(m + np.log(z))


class _MixtureOracle:
    """Shared closed-form Tweedie math for a finite atom mixture."""

    points: np.ndarray
    sigma: float
    has_link = True

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def _weights(self, x):
        return _softmax_weights(self.points, self.sigma, np.asarray(x, dtype=float))

    def mean(self, x) -> np.ndarray:
        w, _ = self._weights(x)
        return w @ self.points

    def link(self, x) -> float:
        x = np.asarray(x, dtype=float)
        _, lse = self._weights(x)
        return 0.5 * float(x @ x) + self.sigma**2 * lse

    def eval(self, x) -> ScoreEval:
        x = np.asarray(x, dtype=float)
        w, lse = self._weights(x)
        mean = w @ self.points
        centered = self.points - mean
        jac = (w[:, None] * centered).T @ centered / self.sigma**2
        link = 0.5 * float(x @ x) + self.sigma**2 * lse
        return ScoreEval(tweedie_mean=mean, tweedie_jacobian=jac, link_value=link)

    def mean_vjp(self, x, v) -> np.ndarray:
        return self.mean_and_vjp(x, v)[1]

    def mean_and_vjp(self, x, v):
        """(mean, s'(x)^T v) from a single weight computation, O(N d)."""
        v = np.asarray(v, dtype=float)
        w, _ = self._weights(x)
        mean = w @ self.points
        if not v.any():
            return mean, np.zeros_like(v)
        centered = self.points - mean
        vjp = centered.T @ (w * (centered @ v)) / self.sigma**2
        return mean, vjp


class EmpiricalScoreOracle(_MixtureOracle):
    """Exact Tweedie oracle for the empirical measure of a finite dataset."""

    def __init__(self, dataset, sigma: float):
        dataset = np.atleast_2d(np.asarray(dataset, dtype=float))
        if dataset.shape[0] == 0:
            raise ValueError("empirical oracle needs a nonempty dataset")
        if sigma <= 0:
            raise ValueError("empirical oracle needs sigma > 0")
        self.points = dataset
        self.sigma = float(sigma)


class QuadratureScoreOracle(_MixtureOracle):
    """Spectrally accurate oracle for the uniform measure on a circle.

    Equispaced nodes with uniform weights are the trapezoid rule on the
    periodic domain; restricted to circles because that is the one manifold
    where this quadrature is spectrally accurate.
    """

    def __init__(self, manifold, node_count: int, sigma: float):
        if not (isinstance(manifold, Sphere) and manifold.ambient_dim == 2):
            raise ValueError("quadrature oracle supports circles only")
        if node_count < 64:
            raise ValueError("quadrature oracle needs node_count >= 64")
        if sigma <= 0:
            raise ValueError("quadrature oracle needs sigma > 0")
        ang = 2.0 * np.pi * np.arange(node_count) / node_count
        self.points = manifold.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        self.sigma = float(sigma)
        self.manifold = manifold
        self.node_count = int(node_count)


class ExactManifoldAdapter:
    """sigma = 0 oracle: mean = pi(x), Jacobian = pi'(x), link from d(x)."""

    has_link = True
    sigma = 0.0

    def __init__(self, manifold, fd_step: float = 1e-5):
        self.manifold = manifold
        self.fd_step = fd_step

    @property
    def ambient_dim(self) -> int:
        return self.manifold.ambient_dim

    def mean(self, x) -> np.ndarray:
        return self.manifold.project(x)

    def link(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ x) - 0.5 * self.manifold.dist_to_manifold(x) ** 2

    def eval(self, x) -> ScoreEval:
        x = np.asarray(x, dtype=float)
        return ScoreEval(
            tweedie_mean=self.manifold.project(x),
            tweedie_jacobian=self.manifold.projection_jacobian(x, h=self.fd_step),
            link_value=self.link(x),
        )

    def mean_vjp(self, x, v) -> np.ndarray:
        return self.mean_and_vjp(x, v)[1]

    def mean_and_vjp(self, x, v):
        v = np.asarray(v, dtype=float)
        if not v.any():
            return self.manifold.project(x), np.zeros_like(v)
        ev = self.eval(x)
        return ev.tweedie_mean, ev.tweedie_jacobian.T @ v


class MlpScoreOracle:
    """Trained network as oracle at a fixed sigma; no link value available."""

    has_link = False

    def __init__(self, mlp: ScoreMlp, sigma: float):
        if sigma <= 0:
            raise ValueError("mlp oracle needs sigma > 0")
        self.mlp = mlp
        self.sigma = float(sigma)

    @property
    def ambient_dim(self) -> int:
        return self.mlp.ambient_dim

    def mean(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x + self.sigma**2 * self.mlp.score(x, self.sigma)

    def eval(self, x) -> ScoreEval:
        return mlp_score_eval(self.mlp, x, self.sigma)

    def mean_vjp(self, x, v) -> np.ndarray:
        # s'(x)^T v = v + sigma * (d s_tilde/dx)^T v, one forward-backward pass.
        v = np.asarray(v, dtype=float)
        return v + self.sigma * self.mlp.input_vjp_raw(x, self.sigma, v)

    def mean_and_vjp(self, x, v):
        return self.mean(x), self.mean_vjp(x, v)


def mlp_score_eval(mlp: ScoreMlp, x, sigma: float) -> ScoreEval:
    """Tweedie mean/Jacobian of a network score; link marked unavailable."""
    if sigma <= 0:
        raise ValueError("mlp_score_eval needs sigma > 0")
    x = np.asarray(x, dtype=float)
    raw = mlp.forward_raw(x[None, :], float(sigma))[0]
    mean = x + sigma * raw
    jac = np.eye(x.size) + sigma * mlp.input_jacobian_raw(x, sigma)
    return ScoreEval(tweedie_mean=mean, tweedie_jacobian=jac, link_value=LINK_UNAVAILABLE)


def link_grad_consistency(oracle, x, h: float = 1e-5) -> float:
    """|| fd-gradient of the link - Tweedie mean ||; zero for exact oracles."""
    x = np.asarray(x, dtype=float)
    g = fd_gradient(lambda p: oracle.link(p), x, h=h)
    return float(np.linalg.norm(g - oracle.mean(x)))
