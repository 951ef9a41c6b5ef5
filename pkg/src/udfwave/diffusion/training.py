"""Denoiser / fine-predictor training, ancestral sampling, and the full
coarse -> fine -> inversion generation path.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidParameter, NumericError, ShapeMismatch
from ..validation import check_array_list
from ..volume import UdfVolume
from ..wavelet.bank import FilterBank
from ..wavelet.transform import PyramidSpec, invert
from ._mlp import AdamState
from .denoiser import Denoiser, ResidualMlpDenoiser
from .fine import FinePredictor, LinearStencilPredictor, MlpFinePredictor
from .schedule import DiffusionSchedule


def _as_conditions(conditions, n, cond_dim):
    if conditions is None:
        return None
    rows = []
    for c in conditions:
        v = np.asarray(getattr(c, "vector", c), dtype=np.float64).reshape(-1)
        rows.append(v)
    if len(rows) != n:
        raise InvalidParameter(f"got {len(rows)} conditions for {n} volumes")
    mat = np.stack(rows)
    if mat.shape[1] != cond_dim:
        raise ShapeMismatch(
            f"condition dim {mat.shape[1]} != model cond_dim {cond_dim}"
        )
    return mat


def train_denoiser(
    data,
    model: ResidualMlpDenoiser,
    sched: DiffusionSchedule,
    *,
    iters: int = 2000,
    step: float = 1e-3,
    batch: int = 8,
    seed: int = 0,
    conditions=None,
    probe_every: int = 25,
):
    """Stochastic gradient training of the noise-prediction MSE (Adam).

    Timesteps are uniform on [0, T); the returned model is the snapshot with
    the best loss on a fixed, seeded probe batch (so the running best is
    deterministic and non-increasing). Returns (model, trace) with trace rows
    (iteration, batch_loss, probe_loss).
    """
    arrays = check_array_list("data", data)
    if iters < 0:
        raise InvalidParameter(f"iters must be >= 0, got {iters}")
    if arrays[0].shape != model.shape:
        raise ShapeMismatch(
            f"data shape {arrays[0].shape} != model shape {model.shape}"
        )
    x0 = np.stack([a.reshape(-1) for a in arrays])
    n = len(arrays)
    cond_mat = _as_conditions(conditions, n, model.cond_dim)
    if iters == 0:
        return model, []

    rng = np.random.default_rng(seed)
    # fixed probe batch for best-model tracking
    probe_n = min(32, max(8, n))
    probe_idx = rng.integers(0, n, size=probe_n)
    probe_t = rng.integers(0, sched.T, size=probe_n)
    probe_eps = rng.standard_normal((probe_n, model.dim))

    def probe_loss(m):
        c = None if cond_mat is None else cond_mat[probe_idx]
        loss, _ = m.loss_and_grads(x0[probe_idx], probe_t, probe_eps, c)
        return loss

    adam = AdamState(model.params, step)
    best = probe_loss(model)
    best_params = {k: v.copy() for k, v in model.params.items()}
    trace = []
    last_probe = best
    bsize = max(1, int(batch))
    for it in range(1, int(iters) + 1):
        idx = rng.integers(0, n, size=bsize)
        t_idx = rng.integers(0, sched.T, size=bsize)
        eps = rng.standard_normal((bsize, model.dim))
        c = None if cond_mat is None else cond_mat[idx]
        loss, grads = model.loss_and_grads(x0[idx], t_idx, eps, c)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite denoiser loss at iteration {it}")
        adam.update(model.params, grads)
        if it % max(1, int(probe_every)) == 0 or it == iters:
            last_probe = probe_loss(model)
            if last_probe < best:
                best = last_probe
                best_params = {k: v.copy() for k, v in model.params.items()}
        trace.append((it, loss, last_probe))
    model.params = best_params
    return model, trace


def sample(
    model: Denoiser,
    sched: DiffusionSchedule,
    shape,
    condition=None,
    seed: int = 0,
) -> np.ndarray:
    """Ancestral reverse loop from pure noise; deterministic given seed."""
    shape = tuple(int(s) for s in shape)
    model_shape = getattr(model, "shape", None)
    if model_shape is not None and tuple(model_shape) != shape:
        raise ShapeMismatch(f"requested shape {shape} != model shape {model_shape}")
    cond = None if condition is None else np.asarray(
        getattr(condition, "vector", condition), dtype=np.float64
    ).reshape(-1)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    for t in range(sched.T - 1, -1, -1):
        eps_hat = model.predict_noise(x, t, cond)
        if eps_hat.shape != x.shape:
            raise ShapeMismatch("denoiser changed the volume shape")
        mean = (x - sched.beta[t] / sched.sqrt_one_minus_alpha_bar[t] * eps_hat) \
            / np.sqrt(sched.alpha[t])
        if t > 0:
            x = mean + np.sqrt(sched.posterior_var[t]) * rng.standard_normal(shape)
        else:
            x = mean
    return x


def train_fine_predictor(
    pairs,
    model: FinePredictor | None = None,
    *,
    iters: int = 2000,
    step: float = 1e-3,
    batch: int = 8,
    seed: int = 0,
    probe_every: int = 25,
):
    """Fit a fine predictor on (coarse, fine) pairs with MSE.

    With the default linear stencil model the fit is closed-form and `iters`
    is ignored; the trainable network path mirrors train_denoiser and returns
    the best running snapshot. Returns (model, trace).
    """
    pairs = [(np.asarray(c, dtype=np.float64), np.asarray(f, dtype=np.float64))
             for c, f in pairs]
    if not pairs:
        raise InvalidParameter("need at least one (coarse, fine) pair")
    for c, f in pairs:
        if f.shape != (7,) + c.shape:
            raise ShapeMismatch(f"fine shape {f.shape} != (7,)+{c.shape}")
    if model is None or isinstance(model, LinearStencilPredictor):
        model = model or LinearStencilPredictor()
        model.fit(pairs)
        return model, []
    if not isinstance(model, MlpFinePredictor):
        raise InvalidParameter(f"unsupported fine predictor {type(model).__name__}")
    if iters < 0:
        raise InvalidParameter(f"iters must be >= 0, got {iters}")
    if iters == 0:
        return model, []
    c_flat = np.stack([c.reshape(-1) for c, _ in pairs])
    f_flat = np.stack([f.reshape(-1) for _, f in pairs])
    n = len(pairs)
    rng = np.random.default_rng(seed)
    adam = AdamState(model.params, step)

    def full_loss(m):
        loss, _ = m.loss_and_grads(c_flat, f_flat)
        return loss

    best = full_loss(model)
    best_params = {k: v.copy() for k, v in model.params.items()}
    trace = []
    last_probe = best
    bsize = max(1, min(int(batch), n))
    for it in range(1, int(iters) + 1):
        idx = rng.integers(0, n, size=bsize)
        loss, grads = model.loss_and_grads(c_flat[idx], f_flat[idx])
        if not np.isfinite(loss):
            raise NumericError(f"non-finite fine-predictor loss at iteration {it}")
        adam.update(model.params, grads)
        if it % max(1, int(probe_every)) == 0 or it == iters:
            last_probe = full_loss(model)
            if last_probe < best:
                best = last_probe
                best_params = {k: v.copy() for k, v in model.params.items()}
        trace.append((it, loss, last_probe))
    model.params = best_params
    return model, trace


def generate_udf(
    model: Denoiser,
    fine_model: FinePredictor,
    bank: FilterBank,
    sched: DiffusionSchedule,
    spec: PyramidSpec,
    condition=None,
    seed: int = 0,
    normalization=(0.0, 1.0),
) -> UdfVolume:
    """Full generation path: sample coarse, predict fine, invert, clamp.

    `normalization` is the (mean, std) applied to coarse volumes before
    diffusion training; sampling inverts it. Total for any finite model
    output: the result is always a well-formed clamped volume.
    """
    if bank.length != spec.filter_length:
        raise ShapeMismatch(
            f"bank length {bank.length} != trained filter length {spec.filter_length}"
        )
    mean, std = (float(normalization[0]), float(normalization[1]))
    coarse_std = sample(model, sched, spec.coarse_shape, condition, seed)
    coarse = coarse_std * std + mean
    fine = fine_model.predict(coarse)
    if fine.shape != (7,) + coarse.shape:
        raise ShapeMismatch(f"fine predictor returned {fine.shape}")
    pyr = spec.build(np.nan_to_num(coarse), np.nan_to_num(fine))
    return invert(pyr, bank)
