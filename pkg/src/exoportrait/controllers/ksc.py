"""Kinematic-state biological torque approximator (the KSC half of HTC).

A small fully connected network maps ``[q, q_dot, gamma]`` (9 inputs) to
four joint torques.  Inputs are standardised with stored statistics and
outputs are rescaled, so weights stay O(1).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..tables import read_table, write_table

KSC_FORMAT = "exoportrait-ksc-params/1"
N_IN = 9
N_OUT = 4


class DimensionError(ValueError):
    pass


@dataclass
class KscParams:
    weights: list  # [W1 (h1, 9), W2 (h2, h1), W3 (4, h2)]
    biases: list   # [b1, b2, b3]
    in_mean: np.ndarray
    in_scale: np.ndarray
    out_scale: np.ndarray

    def check(self) -> None:
        dims = [N_IN] + [w.shape[0] for w in self.weights]
        for w, b, d_in in zip(self.weights, self.biases, dims[:-1]):
            if w.ndim != 2 or w.shape[1] != d_in or b.shape != (w.shape[0],):
                raise DimensionError("KSC parameter dimensions are inconsistent")
        if dims[-1] != N_OUT:
            raise DimensionError("KSC output layer must have 4 units")
        if self.in_mean.shape != (N_IN,) or self.in_scale.shape != (N_IN,) \
                or self.out_scale.shape != (N_OUT,):
            raise DimensionError("KSC normalisation vectors have wrong length")

    @classmethod
    def zeros(cls, hidden=(16, 16)) -> "KscParams":
        dims = [N_IN, *hidden, N_OUT]
        ws = [np.zeros((o, i)) for i, o in zip(dims[:-1], dims[1:])]
        bs = [np.zeros(o) for o in dims[1:]]
        return cls(ws, bs, np.zeros(N_IN), np.ones(N_IN), np.ones(N_OUT))

    @classmethod
    def random(cls, rng: np.random.Generator, hidden=(16, 16), scale=0.5) -> "KscParams":
        p = cls.zeros(hidden)
        p.weights = [rng.normal(0, scale / np.sqrt(w.shape[1]), w.shape) for w in p.weights]
        return p

    # flat vector view used by the optimiser
    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def unflatten(self, vec: np.ndarray) -> "KscParams":
        ws, bs, i = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(vec[i:i + w.size].reshape(w.shape)); i += w.size
            bs.append(vec[i:i + b.size].copy()); i += b.size
        return KscParams(ws, bs, self.in_mean, self.in_scale, self.out_scale)

    def save(self, path, meta=None) -> None:
        rows = []
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            for (r, c), v in np.ndenumerate(w):
                rows.append([f"W{layer + 1}", r, c, v])
            for r, v in enumerate(b):
                rows.append([f"b{layer + 1}", r, 0, v])
        for name, vec in (("in_mean", self.in_mean), ("in_scale", self.in_scale),
                          ("out_scale", self.out_scale)):
            for r, v in enumerate(vec):
                rows.append([name, r, 0, v])
        import pandas as pd
        frame = pd.DataFrame(rows, columns=["tensor", "row", "col", "value"])
        write_table(path, frame.columns, ["-", "1", "1", "1"], frame,
                    meta={"format": KSC_FORMAT, **(meta or {})})

    @classmethod
    def load(cls, path) -> "KscParams":
        tab = read_table(path)
        if tab.meta.get("format") != KSC_FORMAT:
            raise ValueError(f"{path}: not a KSC parameter file")
        f = tab.frame
        tensors = {}
        for name, grp in f.groupby("tensor", sort=False):
            shape = (int(grp["row"].max()) + 1, int(grp["col"].max()) + 1)
            arr = np.zeros(shape)
            arr[grp["row"].astype(int), grp["col"].astype(int)] = grp["value"].astype(float)
            tensors[name] = arr
        n = sum(1 for k in tensors if k.startswith("W"))
        ws = [tensors[f"W{i + 1}"] for i in range(n)]
        bs = [tensors[f"b{i + 1}"][:, 0] for i in range(n)]
        p = cls(ws, bs, tensors["in_mean"][:, 0], tensors["in_scale"][:, 0],
                tensors["out_scale"][:, 0])
        p.check()
        return p


def ksc_features(q, q_dot, gamma) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    q_dot = np.asarray(q_dot, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if q.shape[-1:] != (4,) or q_dot.shape[-1:] != (4,):
        raise DimensionError("KSC expects 4 joint angles and 4 joint rates")
    return np.concatenate([q, q_dot, gamma[..., None]], axis=-1)


def forward(params: KscParams, x: np.ndarray, keep: bool = False):
    """Network output for standardised-in features ``x`` (``(..., 9)``)."""
    h = (x - params.in_mean) / params.in_scale
    acts = [h]
    n = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i < n - 1:
            h = np.tanh(h)
        acts.append(h)
    out = h * params.out_scale
    return (out, acts) if keep else out


def ksc_torque(params: KscParams, q, q_dot, gamma) -> np.ndarray:
    """Biological torque estimate from the kinematic state."""
    params.check()
    return forward(params, ksc_features(q, q_dot, gamma))


def loss_and_grad(params: KscParams, x: np.ndarray, y: np.ndarray):
    """Mean squared error in scaled output units and its gradient (flat)."""
    out, acts = forward(params, x, keep=True)
    n = x.shape[0]
    err = (out - y) / params.out_scale
    loss = 0.5 * np.mean(np.sum(err ** 2, axis=1))
    delta = err / n  # d loss / d (pre-scale output)
    grads_w, grads_b = [], []
    for i in range(len(params.weights) - 1, -1, -1):
        grads_w.append(delta.T @ acts[i])
        grads_b.append(delta.sum(axis=0))
        if i > 0:
            delta = (delta @ params.weights[i]) * (1 - acts[i] ** 2)
    grads_w.reverse()
    grads_b.reverse()
    flat = np.concatenate([a.ravel() for pair in zip(grads_w, grads_b) for a in pair])
    return loss, flat


def fit_ksc(x: np.ndarray, y: np.ndarray, hidden=(16, 16), seed: int = 0,
            maxiter: int = 3000) -> KscParams:
    """Least-squares fit with L-BFGS from a seeded random start."""
    from scipy.optimize import minimize

    rng = np.random.default_rng(seed)
    p = KscParams.random(rng, hidden)
    p.in_mean = x.mean(axis=0)
    p.in_scale = np.where(x.std(axis=0) > 1e-9, x.std(axis=0), 1.0)
    p.out_scale = np.where(y.std(axis=0) > 1e-9, y.std(axis=0), 1.0)

    def fun(vec):
        return loss_and_grad(p.unflatten(vec), x, y)

    res = minimize(fun, p.flatten(), jac=True, method="L-BFGS-B",
                   options={"maxiter": maxiter, "maxfun": maxiter * 2})
    return p.unflatten(res.x)


def default_ksc_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "ksc_params.csv"
