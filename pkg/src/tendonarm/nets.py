"""Small fully-connected regressors trained with Adam, numpy only.

The final layer starts at zero so an untrained network predicts the output
mean after z-score denormalization; training is deterministic for a fixed
seed (init and batch shuffling share one generator).
"""

from __future__ import annotations

import numpy as np

from .errors import TrainingError


class MLP:
    """Tanh MLP; weights w[i]: (n_in, n_out), biases b[i]: (n_out,)."""

    def __init__(self, sizes: list[int], rng: np.random.Generator | None = None):
        self.sizes = list(sizes)
        self.w, self.b = [], []
        for i in range(len(sizes) - 1):
            n_in, n_out = sizes[i], sizes[i + 1]
            if rng is None:
                w = np.zeros((n_in, n_out))
            elif i == len(sizes) - 2:
                w = np.zeros((n_in, n_out))  # zero head: untrained net = mean
            else:
                w = rng.normal(0.0, np.sqrt(1.0 / n_in), size=(n_in, n_out))
            self.w.append(w)
            self.b.append(np.zeros(n_out))

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = x
        for i in range(len(self.w) - 1):
            h = np.tanh(h @ self.w[i] + self.b[i])
        return h @ self.w[-1] + self.b[-1]

    def _forward_cached(self, x):
        acts = [x]
        h = x
        for i in range(len(self.w) - 1):
            h = np.tanh(h @ self.w[i] + self.b[i])
            acts.append(h)
        return acts, h @ self.w[-1] + self.b[-1]

    def train(
        self,
        x: np.ndarray,
        y: np.ndarray,
        epochs: int,
        rng: np.random.Generator,
        batch_size: int = 256,
        lr: float = 2e-3,
        lr_min: float = 2e-4,
    ) -> list[float]:
        """Minimize MSE with Adam and a cosine learning-rate decay."""
        n = x.shape[0]
        mw = [np.zeros_like(w) for w in self.w]
        vw = [np.zeros_like(w) for w in self.w]
        mb = [np.zeros_like(b) for b in self.b]
        vb = [np.zeros_like(b) for b in self.b]
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        step = 0
        losses = []
        for epoch in range(epochs):
            alpha = lr_min + 0.5 * (lr - lr_min) * (
                1.0 + np.cos(np.pi * epoch / max(1, epochs - 1))
            )
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, batch_size):
                idx = order[start : start + batch_size]
                xb, yb = x[idx], y[idx]
                acts, out = self._forward_cached(xb)
                err = out - yb
                epoch_loss += float(np.sum(err * err))
                delta = 2.0 * err / (xb.shape[0] * yb.shape[1])
                grads_w, grads_b = [None] * len(self.w), [None] * len(self.b)
                for i in reversed(range(len(self.w))):
                    grads_w[i] = acts[i].T @ delta
                    grads_b[i] = delta.sum(axis=0)
                    if i > 0:
                        delta = (delta @ self.w[i].T) * (1.0 - acts[i] * acts[i])
                step += 1
                corr1 = 1.0 - beta1**step
                corr2 = 1.0 - beta2**step
                for i in range(len(self.w)):
                    mw[i] = beta1 * mw[i] + (1 - beta1) * grads_w[i]
                    vw[i] = beta2 * vw[i] + (1 - beta2) * grads_w[i] ** 2
                    self.w[i] -= alpha * (mw[i] / corr1) / (np.sqrt(vw[i] / corr2) + eps)
                    mb[i] = beta1 * mb[i] + (1 - beta1) * grads_b[i]
                    vb[i] = beta2 * vb[i] + (1 - beta2) * grads_b[i] ** 2
                    self.b[i] -= alpha * (mb[i] / corr1) / (np.sqrt(vb[i] / corr2) + eps)
            loss = epoch_loss / (n * y.shape[1])
            if not np.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            losses.append(loss)
        return losses

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "weights": [w.tolist() for w in self.w],
            "biases": [b.tolist() for b in self.b],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MLP":
        net = cls(doc["sizes"])
        net.w = [np.array(w) for w in doc["weights"]]
        net.b = [np.array(b) for b in doc["biases"]]
        return net


class Normalizer:
    """Per-dimension z-score transform frozen from data."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.where(np.asarray(std, dtype=float) > 1e-12, std, 1.0)

    @classmethod
    def fit(cls, x: np.ndarray) -> "Normalizer":
        return cls(x.mean(axis=0), x.std(axis=0))

    def encode(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def decode(self, z: np.ndarray) -> np.ndarray:
        return z * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Normalizer":
        return cls(np.array(doc["mean"]), np.array(doc["std"]))
