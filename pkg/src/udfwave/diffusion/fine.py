"""Fine-coefficient predictors: coarse volume C -> 7-channel detail volume F.

Two implementations of the contract: a closed-form local linear stencil
regressor (ridge least squares, no iterative training) and a small trainable
network reusing the residual MLP core.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidParameter, ShapeMismatch
from ._mlp import init_mlp, mlp_backward, mlp_forward


class FinePredictor:
    """Contract: predict(C) returns a (7,) + C.shape array."""

    def predict(self, coarse: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _stencil_features(arr: np.ndarray, radius: int) -> np.ndarray:
    """Per-voxel neighborhood values (edge-replicated) plus a bias column."""
    padded = np.pad(arr, radius, mode="edge")
    n = arr.size
    k = 2 * radius + 1
    cols = []
    for dx in range(k):
        for dy in range(k):
            for dz in range(k):
                view = padded[dx:dx + arr.shape[0],
                              dy:dy + arr.shape[1],
                              dz:dz + arr.shape[2]]
                cols.append(view.reshape(n))
    cols.append(np.ones(n))
    return np.stack(cols, axis=1)


class LinearStencilPredictor(FinePredictor):
    """Ridge regression from each voxel's local coarse neighborhood to the
    7 detail channels at that voxel; weights shared across voxels."""

    def __init__(self, radius: int = 1, ridge: float = 1e-8):
        self.radius = int(radius)
        if self.radius < 0:
            raise InvalidParameter("radius must be >= 0")
        self.ridge = float(ridge)
        self.weights = None  # (features+1, 7)

    def fit(self, pairs):
        pairs = list(pairs)
        if not pairs:
            raise InvalidParameter("need at least one (coarse, fine) pair")
        k = (2 * self.radius + 1) ** 3 + 1
        ata = np.zeros((k, k))
        atb = np.zeros((k, 7))
        for coarse, fine in pairs:
            coarse = np.asarray(coarse, dtype=np.float64)
            fine = np.asarray(fine, dtype=np.float64)
            if fine.shape != (7,) + coarse.shape:
                raise ShapeMismatch(
                    f"fine shape {fine.shape} != (7,)+{coarse.shape}"
                )
            X = _stencil_features(coarse, self.radius)
            Y = fine.reshape(7, -1).T
            ata += X.T @ X
            atb += X.T @ Y
        reg = self.ridge * np.eye(k)
        reg[-1, -1] = 0.0  # leave the bias unpenalized
        self.weights = np.linalg.solve(ata + reg, atb)
        return self

    def predict(self, coarse):
        if self.weights is None:
            raise InvalidParameter("predictor is not fitted")
        coarse = np.asarray(coarse, dtype=np.float64)
        X = _stencil_features(coarse, self.radius)
        Y = X @ self.weights  # (n, 7)
        return np.ascontiguousarray(Y.T.reshape((7,) + coarse.shape))


class MlpFinePredictor(FinePredictor):
    """Flattened-coarse to flattened-fine regression network."""

    def __init__(self, coarse_shape, hidden: int = 128, blocks: int = 2,
                 seed: int = 0):
        self.coarse_shape = tuple(int(s) for s in coarse_shape)
        self.dim = int(np.prod(self.coarse_shape))
        self.hidden = int(hidden)
        self.blocks = int(blocks)
        self.params = init_mlp(self.dim, self.hidden, self.blocks,
                               7 * self.dim, seed)

    def copy(self):
        clone = MlpFinePredictor(self.coarse_shape, self.hidden, self.blocks)
        clone.params = {k: v.copy() for k, v in self.params.items()}
        return clone

    def loss_and_grads(self, coarse_flat, fine_flat):
        """MSE and gradients for a batch of flattened (C, F) rows."""
        pred, cache = mlp_forward(self.params, coarse_flat)
        resid = pred - fine_flat
        loss = float((resid * resid).mean())
        grads, _ = mlp_backward(self.params, cache, 2.0 * resid / resid.size)
        return loss, grads

    def predict(self, coarse):
        coarse = np.asarray(coarse, dtype=np.float64)
        if coarse.shape != self.coarse_shape:
            raise ShapeMismatch(
                f"coarse shape {coarse.shape} != model shape {self.coarse_shape}"
            )
        pred, _ = mlp_forward(self.params, coarse.reshape(1, -1))
        return pred.reshape((7,) + self.coarse_shape)
