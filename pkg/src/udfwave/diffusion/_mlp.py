"""Small fully-connected residual network with hand-written backprop.

Shared by the built-in denoiser and the trainable fine predictor. All math
is float64; tanh activations keep the chain smooth so backprop can be checked
against central finite differences.
"""
from __future__ import annotations

import numpy as np


def init_mlp(in_dim: int, hidden: int, blocks: int, out_dim: int, seed: int):
    """Parameter dict for: in -> tanh -> [residual block]*blocks -> linear out."""
    rng = np.random.default_rng(seed)

    def dense(fan_in, fan_out, scale=1.0):
        return rng.standard_normal((fan_in, fan_out)) * scale / np.sqrt(fan_in)

    params = {
        "w_in": dense(in_dim, hidden),
        "b_in": np.zeros(hidden),
        "w_out": dense(hidden, out_dim, scale=1e-2),
        "b_out": np.zeros(out_dim),
    }
    for b in range(blocks):
        params[f"w1_{b}"] = dense(hidden, hidden)
        params[f"b1_{b}"] = np.zeros(hidden)
        params[f"w2_{b}"] = dense(hidden, hidden, scale=0.1)
        params[f"b2_{b}"] = np.zeros(hidden)
    return params


def mlp_blocks(params) -> int:
    return sum(1 for k in params if k.startswith("w1_"))


def mlp_forward(params, z):
    """z: (B, in_dim) -> (out (B, out_dim), cache)."""
    cache = {"z": z}
    pre = z @ params["w_in"] + params["b_in"]
    h = np.tanh(pre)
    cache["h0"] = h
    for b in range(mlp_blocks(params)):
        u_pre = h @ params[f"w1_{b}"] + params[f"b1_{b}"]
        u = np.tanh(u_pre)
        cache[f"h_{b}"] = h
        cache[f"u_{b}"] = u
        h = h + u @ params[f"w2_{b}"] + params[f"b2_{b}"]
    cache["h_last"] = h
    out = h @ params["w_out"] + params["b_out"]
    return out, cache


def mlp_backward(params, cache, d_out):
    """d_out: (B, out_dim) -> (grads dict, d_z (B, in_dim))."""
    grads = {}
    h = cache["h_last"]
    grads["w_out"] = h.T @ d_out
    grads["b_out"] = d_out.sum(axis=0)
    dh = d_out @ params["w_out"].T
    for b in range(mlp_blocks(params) - 1, -1, -1):
        u = cache[f"u_{b}"]
        h_in = cache[f"h_{b}"]
        du = dh @ params[f"w2_{b}"].T
        grads[f"w2_{b}"] = u.T @ dh
        grads[f"b2_{b}"] = dh.sum(axis=0)
        d_upre = du * (1.0 - u * u)
        grads[f"w1_{b}"] = h_in.T @ d_upre
        grads[f"b1_{b}"] = d_upre.sum(axis=0)
        dh = dh + d_upre @ params[f"w1_{b}"].T
    h0 = cache["h0"]
    d_pre = dh * (1.0 - h0 * h0)
    grads["w_in"] = cache["z"].T @ d_pre
    grads["b_in"] = d_pre.sum(axis=0)
    dz = d_pre @ params["w_in"].T
    return grads, dz


def timestep_embedding(t, dim: int, max_period: float = 10000.0):
    """Sinusoidal embedding of integer timesteps; t: (B,) -> (B, dim)."""
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    half = dim // 2
    freqs = np.exp(-np.log(max_period) * np.arange(half) / max(half, 1))
    ang = t * freqs[None, :]
    emb = np.concatenate([np.sin(ang), np.cos(ang)], axis=1)
    if emb.shape[1] < dim:
        emb = np.concatenate([emb, np.zeros((emb.shape[0], dim - emb.shape[1]))], axis=1)
    return emb


class AdamState:
    """Adaptive-moment update over a parameter dict (fixed key order)."""

    def __init__(self, params, step, betas=(0.9, 0.999)):
        self.keys = sorted(params)
        self.step = step
        self.b1, self.b2 = betas
        self.m = {k: np.zeros_like(params[k]) for k in self.keys}
        self.v = {k: np.zeros_like(params[k]) for k in self.keys}
        self.t = 0

    def update(self, params, grads):
        self.t += 1
        for k in self.keys:
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mhat = self.m[k] / (1 - self.b1 ** self.t)
            vhat = self.v[k] / (1 - self.b2 ** self.t)
            params[k] -= self.step * mhat / (np.sqrt(vhat) + 1e-8)
