"""Scikit-learn style estimators wrapping the learnable components.

These follow the fit/transform/get_params contract so the pipeline composes
with the wider ecosystem: a learnable wavelet compressor (transformer over
UDF volumes), a diffusion generator over coarse coefficient volumes, and the
fine-coefficient regressor.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .diffusion import (
    LinearStencilPredictor,
    MlpFinePredictor,
    ResidualMlpDenoiser,
    make_schedule,
    sample,
    train_denoiser,
    train_fine_predictor,
)
from .errors import InvalidParameter
from .validation import check_array_list, check_volume_list
from .volume import DEFAULT_FAR_WEIGHT, DEFAULT_GAMMA, UdfVolume
from .wavelet import decompose, invert, optimize_filters, resolve_bank


class WaveletCompressor(BaseEstimator, TransformerMixin):
    """Learnable multi-scale wavelet compressor for UDF volumes.

    fit(X) optimizes the filter taps on a list of UdfVolume; transform(X)
    produces WaveletPyramid coefficients; inverse_transform reconstructs
    clamped volumes. With optimize=False the initialization is used as-is.
    """

    def __init__(self, bank="bior6.8", levels=3, optimize=True, iters=300,
                 step_size=1e-3, beta1=0.9, beta2=0.999, batch_size=4,
                 gamma=DEFAULT_GAMMA, far_weight=DEFAULT_FAR_WEIGHT,
                 val_fraction=0.2, seed=0, train_analysis=True,
                 train_synthesis=True):
        self.bank = bank
        self.levels = levels
        self.optimize = optimize
        self.iters = iters
        self.step_size = step_size
        self.beta1 = beta1
        self.beta2 = beta2
        self.batch_size = batch_size
        self.gamma = gamma
        self.far_weight = far_weight
        self.val_fraction = val_fraction
        self.seed = seed
        self.train_analysis = train_analysis
        self.train_synthesis = train_synthesis

    def fit(self, X, y=None):
        volumes = check_volume_list("X", X)
        init = resolve_bank(self.bank)
        if self.optimize:
            self.bank_, self.trace_ = optimize_filters(
                volumes, init,
                iters=self.iters, step=self.step_size,
                betas=(self.beta1, self.beta2), batch_size=self.batch_size,
                gamma=self.gamma, far_weight=self.far_weight,
                levels=self.levels, seed=self.seed,
                val_fraction=self.val_fraction,
                train_analysis=self.train_analysis,
                train_synthesis=self.train_synthesis,
            )
        else:
            self.bank_, self.trace_ = init.copy(), []
        return self

    def _fitted_bank(self):
        if not hasattr(self, "bank_"):
            raise InvalidParameter("WaveletCompressor is not fitted; call fit first")
        return self.bank_

    def transform(self, X):
        bank = self._fitted_bank()
        return [decompose(v, bank, self.levels) for v in check_volume_list("X", X)]

    def inverse_transform(self, pyramids):
        bank = self._fitted_bank()
        return [invert(p, bank) for p in pyramids]


class DiffusionVolumeGenerator(BaseEstimator):
    """Denoising-diffusion generator over (standardized) coarse volumes.

    fit(X, conditions=...) trains the built-in residual-MLP noise predictor;
    sample_volumes(n, seed, condition) runs the ancestral reverse process and
    undoes the standardization.
    """

    def __init__(self, t_steps=100, beta_start=1e-4, beta_end=0.02,
                 hidden=128, blocks=2, t_dim=32, cond_dim=0, iters=2000,
                 step_size=1e-3, batch_size=8, seed=0):
        self.t_steps = t_steps
        self.beta_start = beta_start
        self.beta_end = beta_end
        self.hidden = hidden
        self.blocks = blocks
        self.t_dim = t_dim
        self.cond_dim = cond_dim
        self.iters = iters
        self.step_size = step_size
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y=None, conditions=None):
        arrays = check_array_list("X", X, ndim=3)
        self.mean_ = float(np.mean([a.mean() for a in arrays]))
        flat = np.concatenate([a.reshape(-1) for a in arrays])
        std = float(flat.std())
        self.std_ = std if std > 0 else 1.0
        normalized = [(a - self.mean_) / self.std_ for a in arrays]
        self.schedule_ = make_schedule(self.t_steps, self.beta_start, self.beta_end)
        model = ResidualMlpDenoiser(
            arrays[0].shape, self.schedule_, cond_dim=self.cond_dim,
            hidden=self.hidden, blocks=self.blocks, t_dim=self.t_dim,
            seed=self.seed,
        )
        self.model_, self.trace_ = train_denoiser(
            normalized, model, self.schedule_, iters=self.iters,
            step=self.step_size, batch=self.batch_size, seed=self.seed,
            conditions=conditions,
        )
        return self

    def sample_volumes(self, n_samples=1, seed=0, condition=None):
        if not hasattr(self, "model_"):
            raise InvalidParameter("DiffusionVolumeGenerator is not fitted")
        out = []
        for k in range(int(n_samples)):
            arr = sample(self.model_, self.schedule_, self.model_.shape,
                         condition=condition, seed=int(seed) + k)
            out.append(arr * self.std_ + self.mean_)
        return out


class FineCoefficientRegressor(BaseEstimator):
    """Coarse-to-fine coefficient regression (closed-form stencil or MLP)."""

    def __init__(self, kind="stencil", radius=1, ridge=1e-8, hidden=128,
                 blocks=2, iters=2000, step_size=1e-3, batch_size=8, seed=0):
        self.kind = kind
        self.radius = radius
        self.ridge = ridge
        self.hidden = hidden
        self.blocks = blocks
        self.iters = iters
        self.step_size = step_size
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y):
        """X: list of coarse volumes; y: list of (7,)+shape fine volumes."""
        pairs = list(zip(X, y))
        if self.kind == "stencil":
            model = LinearStencilPredictor(self.radius, self.ridge)
            self.model_, self.trace_ = train_fine_predictor(pairs, model)
        elif self.kind == "mlp":
            coarse_shape = np.asarray(X[0]).shape
            model = MlpFinePredictor(coarse_shape, self.hidden, self.blocks,
                                     seed=self.seed)
            self.model_, self.trace_ = train_fine_predictor(
                pairs, model, iters=self.iters, step=self.step_size,
                batch=self.batch_size, seed=self.seed,
            )
        else:
            raise InvalidParameter(f"kind must be 'stencil' or 'mlp', got {self.kind!r}")
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise InvalidParameter("FineCoefficientRegressor is not fitted")
        return [self.model_.predict(np.asarray(c, dtype=np.float64)) for c in X]


__all__ = [
    "WaveletCompressor",
    "DiffusionVolumeGenerator",
    "FineCoefficientRegressor",
]
