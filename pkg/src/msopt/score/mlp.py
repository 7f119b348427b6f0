"""Plain fully-connected ReLU network for the noise-conditional score.

The network takes (x, sigma) concatenated and returns the *scaled* score
s_tilde; the score itself is s_tilde / sigma, which keeps regression targets
O(1) across noise levels. All forward/backward math is hand-rolled numpy on
the fixed topology: training needs parameter gradients, the optimizers need
exact input Jacobians (or vector-Jacobian products) with the same ReLU
subgradient (ties at 0 take derivative 0) used during training.
"""

import struct

import numpy as np

from msopt import rng as _rng

_MAGIC = b"MSOPT1"


class ScoreMlp:
    """Weights/biases per layer; W has shape (out, in), input is (x..., sigma)."""

    def __init__(self, layers):
        self.layers = [(np.array(w, dtype=float), np.array(b, dtype=float)) for w, b in layers]
        for (w, b) in self.layers:
            if w.shape[0] != b.shape[0]:
                raise ValueError("layer weight/bias shapes disagree")
        for (w0, _), (w1, _) in zip(self.layers, self.layers[1:]):
            if w1.shape[1] != w0.shape[0]:
                raise ValueError("consecutive layer widths disagree")

    @property
    def ambient_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def widths(self):
        return [self.layers[0][0].shape[1]] + [w.shape[0] for w, _ in self.layers]

    # ---- forward / backward -------------------------------------------------

    def forward_raw(self, x, sigma):
        """Scaled score s_tilde for a batch (B, d) with per-sample sigma (B,)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (x.shape[0],))
        h = np.concatenate([x, sigma[:, None]], axis=1)
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            h = h @ w.T + b
            if i != last:
                h = np.maximum(h, 0.0)
        return h

    def forward_cached(self, x, sigma):
        """Forward pass keeping pre-activations for backprop."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (x.shape[0],))
        a = np.concatenate([x, sigma[:, None]], axis=1)
        acts = [a]
        pres = []
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            pre = acts[-1] @ w.T + b
            pres.append(pre)
            acts.append(np.maximum(pre, 0.0) if i != last else pre)
        return acts, pres

    def backward(self, acts, pres, dout):
        """Parameter gradients and input gradient for a cached forward pass."""
        grads = [None] * len(self.layers)
        delta = np.asarray(dout, dtype=float)
        for i in range(len(self.layers) - 1, -1, -1):
            w, _ = self.layers[i]
            grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
            delta = delta @ w
            if i > 0:
                delta = delta * (pres[i - 1] > 0.0)
        return grads, delta

    def score(self, x, sigma):
        """Score estimate s_tilde / sigma at a single point."""
        x = np.asarray(x, dtype=float)
        return self.forward_raw(x[None, :], float(sigma))[0] / float(sigma)

    def input_jacobian_raw(self, x, sigma) -> np.ndarray:
        """Exact Jacobian of s_tilde w.r.t. x (sigma column dropped)."""
        acts, pres = self.forward_cached(np.asarray(x, dtype=float)[None, :], float(sigma))
        jac = self.layers[0][0].copy()
        for i in range(1, len(self.layers)):
            mask = (pres[i - 1][0] > 0.0).astype(float)
            jac = self.layers[i][0] @ (mask[:, None] * jac)
        return jac[:, :-1]

    def input_vjp_raw(self, x, sigma, v) -> np.ndarray:
        """Vector-Jacobian product v^T d(s_tilde)/dx via one backward pass."""
        acts, pres = self.forward_cached(np.asarray(x, dtype=float)[None, :], float(sigma))
        _, dinp = self.backward(acts, pres, np.asarray(v, dtype=float)[None, :])
        return dinp[0, :-1]

    # ---- persistence --------------------------------------------------------

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", len(self.layers)))
            for w, b in self.layers:
                fh.write(struct.pack("<II", w.shape[0], w.shape[1]))
                fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
                fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_score_mlp(path) -> ScoreMlp:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"not a score-network file (bad magic {magic!r})")
        (n_layers,) = struct.unpack("<I", fh.read(4))
        layers = []
        for _ in range(n_layers):
            rows, cols = struct.unpack("<II", fh.read(8))
            w = np.frombuffer(fh.read(8 * rows * cols), dtype="<f8").reshape(rows, cols)
            b = np.frombuffer(fh.read(8 * rows), dtype="<f8")
            layers.append((w.copy(), b.copy()))
    return ScoreMlp(layers)


def make_score_mlp(ambient_dim: int, hidden=(128, 128, 128), seed: int = 0) -> ScoreMlp:
    """He-initialized hidden layers, zero-initialized output layer."""
    gen = _rng.stream(seed, "mlp_init")
    widths = [ambient_dim + 1, *hidden, ambient_dim]
    layers = []
    for i in range(len(widths) - 1):
        fan_in, fan_out = widths[i], widths[i + 1]
        if i == len(widths) - 2:
            w = np.zeros((fan_out, fan_in))
        else:
            w = gen.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in)
        layers.append((w, np.zeros(fan_out)))
    return ScoreMlp(layers)
