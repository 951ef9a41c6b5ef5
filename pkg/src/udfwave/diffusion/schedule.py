"""Forward-noising schedule and its derived per-step sampling coefficients."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidParameter, ShapeMismatch

DEFAULT_T = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


class DiffusionSchedule:
    """Linear beta schedule with cached alpha products and posterior terms."""

    __slots__ = ("T", "beta", "alpha", "alpha_bar", "sqrt_alpha_bar",
                 "sqrt_one_minus_alpha_bar", "posterior_var", "beta_start",
                 "beta_end")

    def __init__(self, beta, beta_start=None, beta_end=None):
        beta = np.asarray(beta, dtype=np.float64)
        if beta.ndim != 1 or beta.size < 1:
            raise InvalidParameter("beta must be a non-empty 1-d sequence")
        if beta.min() <= 0.0 or beta.max() >= 1.0:
            raise InvalidParameter("beta entries must lie in (0, 1)")
        self.T = int(beta.size)
        self.beta = beta
        self.alpha = 1.0 - beta
        self.alpha_bar = np.cumprod(self.alpha)
        if np.any(np.diff(self.alpha_bar) >= 0.0):
            raise InvalidParameter("alpha_bar must be strictly decreasing")
        self.sqrt_alpha_bar = np.sqrt(self.alpha_bar)
        self.sqrt_one_minus_alpha_bar = np.sqrt(1.0 - self.alpha_bar)
        prev = np.concatenate([[1.0], self.alpha_bar[:-1]])
        self.posterior_var = beta * (1.0 - prev) / (1.0 - self.alpha_bar)
        self.beta_start = float(beta[0] if beta_start is None else beta_start)
        self.beta_end = float(beta[-1] if beta_end is None else beta_end)

    def __repr__(self):
        return f"DiffusionSchedule(T={self.T}, beta=[{self.beta_start}, {self.beta_end}])"


def make_schedule(T: int = DEFAULT_T, beta_start: float = DEFAULT_BETA_START,
                  beta_end: float = DEFAULT_BETA_END) -> DiffusionSchedule:
    """Linear beta interpolation over T steps."""
    T = int(T)
    if T < 1:
        raise InvalidParameter(f"T must be >= 1, got {T}")
    beta_start = float(beta_start)
    beta_end = float(beta_end)
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise InvalidParameter(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    beta = np.linspace(beta_start, beta_end, T)
    return DiffusionSchedule(beta, beta_start, beta_end)


def forward_noise(c0: np.ndarray, t: int, eps: np.ndarray,
                  sched: DiffusionSchedule) -> np.ndarray:
    """C_t = sqrt(abar_t) * C_0 + sqrt(1 - abar_t) * eps."""
    c0 = np.asarray(c0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if c0.shape != eps.shape:
        raise ShapeMismatch(f"volume shape {c0.shape} != noise shape {eps.shape}")
    t = int(t)
    if not 0 <= t < sched.T:
        raise InvalidParameter(f"t must lie in [0, {sched.T}), got {t}")
    return sched.sqrt_alpha_bar[t] * c0 + sched.sqrt_one_minus_alpha_bar[t] * eps
