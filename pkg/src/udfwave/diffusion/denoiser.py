"""Noise predictors: the built-in trainable network and the analytic oracle.

A Denoiser maps (noisy volume, timestep, optional condition embedding) to a
predicted noise volume of identical shape, deterministically.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidParameter, ShapeMismatch
from ._mlp import init_mlp, mlp_backward, mlp_forward, timestep_embedding
from .schedule import DiffusionSchedule

DEFAULT_CONDITION_DIM = 64


class ConditionEmbedding:
    """Fixed-length conditioning vector with a provenance tag."""

    __slots__ = ("vector", "tag")

    def __init__(self, vector, tag="external"):
        v = np.asarray(vector, dtype=np.float64).reshape(-1)
        if v.size < 1 or not np.all(np.isfinite(v)):
            raise InvalidParameter("condition vector must be non-empty and finite")
        self.vector = v
        self.tag = str(tag)

    @property
    def dim(self):
        return self.vector.size

    @classmethod
    def from_class_index(cls, index: int, dim: int = DEFAULT_CONDITION_DIM):
        index = int(index)
        if not 0 <= index < dim:
            raise InvalidParameter(f"class index {index} outside [0, {dim})")
        v = np.zeros(dim)
        v[index] = 1.0
        return cls(v, tag=f"class:{index}")


class Denoiser:
    """Contract: shape-preserving noise prediction."""

    cond_dim: int = 0

    def predict_noise(self, x: np.ndarray, t: int, cond=None) -> np.ndarray:
        raise NotImplementedError


class GaussianOracleDenoiser(Denoiser):
    """Exact posterior-mean noise predictor for data ~ N(mu, var*I).

    eps_hat(C_t, t) = sqrt(1-abar_t) * (C_t - sqrt(abar_t)*mu)
                      / (abar_t*var + 1 - abar_t)
    """

    def __init__(self, mu, var: float, sched: DiffusionSchedule):
        self.mu = np.asarray(mu, dtype=np.float64)
        self.var = float(var)
        if self.var < 0.0:
            raise InvalidParameter(f"var must be >= 0, got {var}")
        self.sched = sched
        self.cond_dim = 0

    def predict_noise(self, x, t, cond=None):
        x = np.asarray(x, dtype=np.float64)
        ab = self.sched.alpha_bar[int(t)]
        num = np.sqrt(1.0 - ab) * (x - np.sqrt(ab) * self.mu)
        return num / (ab * self.var + 1.0 - ab)


class ResidualMlpDenoiser(Denoiser):
    """Fully-connected residual network over flattened coarse volumes.

    The timestep enters through a sinusoidal embedding and the condition
    embedding is concatenated to the input. The head predicts the clean
    volume and converts it to noise through the schedule identity
    eps_hat = (x_t - sqrt(abar)*x0_hat) / sqrt(1-abar), which keeps the
    regression target well-scaled at small t.
    """

    def __init__(self, shape, sched: DiffusionSchedule, cond_dim: int = 0,
                 hidden: int = 128, blocks: int = 2, t_dim: int = 32,
                 seed: int = 0):
        self.shape = tuple(int(s) for s in shape)
        self.dim = int(np.prod(self.shape))
        self.sched = sched
        self.cond_dim = int(cond_dim)
        self.hidden = int(hidden)
        self.blocks = int(blocks)
        self.t_dim = int(t_dim)
        in_dim = self.dim + self.t_dim + self.cond_dim
        self.params = init_mlp(in_dim, self.hidden, self.blocks, self.dim, seed)

    def copy(self):
        clone = ResidualMlpDenoiser(self.shape, self.sched, self.cond_dim,
                                    self.hidden, self.blocks, self.t_dim)
        clone.params = {k: v.copy() for k, v in self.params.items()}
        return clone

    def _check_cond(self, cond, batch):
        if self.cond_dim == 0:
            return np.zeros((batch, 0))
        if cond is None:
            return np.zeros((batch, self.cond_dim))
        c = np.asarray(cond, dtype=np.float64)
        if c.ndim == 1:
            c = np.broadcast_to(c, (batch, c.size))
        if c.shape != (batch, self.cond_dim):
            raise ShapeMismatch(
                f"condition shape {c.shape} != ({batch}, {self.cond_dim})"
            )
        return c

    def _forward_batch(self, x_flat, t_idx, cond):
        """x_flat: (B, dim), t_idx: (B,) ints -> (eps_hat, cache)."""
        b = x_flat.shape[0]
        temb = timestep_embedding(t_idx, self.t_dim)
        z = np.concatenate([x_flat, temb, self._check_cond(cond, b)], axis=1)
        x0_hat, cache = mlp_forward(self.params, z)
        ab = self.sched.alpha_bar[np.asarray(t_idx, dtype=np.int64)]
        sab = np.sqrt(ab)[:, None]
        somab = np.sqrt(1.0 - ab)[:, None]
        eps_hat = (x_flat - sab * x0_hat) / somab
        cache["head"] = (sab, somab)
        return eps_hat, cache

    def _backward_batch(self, cache, d_eps_hat):
        sab, somab = cache["head"]
        d_x0 = d_eps_hat * (-sab / somab)
        grads, _ = mlp_backward(self.params, cache, d_x0)
        return grads

    def loss_and_grads(self, x0_flat, t_idx, eps_flat, cond=None):
        """Noise-prediction MSE and parameter gradients for one batch."""
        ab = self.sched.alpha_bar[np.asarray(t_idx, dtype=np.int64)]
        x_t = np.sqrt(ab)[:, None] * x0_flat + np.sqrt(1.0 - ab)[:, None] * eps_flat
        eps_hat, cache = self._forward_batch(x_t, t_idx, cond)
        resid = eps_hat - eps_flat
        loss = float((resid * resid).mean())
        d_eps = 2.0 * resid / resid.size
        return loss, self._backward_batch(cache, d_eps)

    def predict_noise(self, x, t, cond=None):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.shape:
            raise ShapeMismatch(f"volume shape {x.shape} != model shape {self.shape}")
        flat = x.reshape(1, -1)
        c = None if cond is None else np.asarray(cond, dtype=np.float64).reshape(1, -1)
        eps_hat, _ = self._forward_batch(flat, np.array([int(t)]), c)
        return eps_hat.reshape(self.shape)
