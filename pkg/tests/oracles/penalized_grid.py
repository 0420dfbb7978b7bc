"""Brute-force oracle for the penalized objective on a small instance.

Standalone on purpose: the loss is re-derived here from its three branches
and nothing from the package is imported.  Running the script prints the
values frozen into tests/test_solver.py.
"""
from __future__ import annotations

import numpy as np


def instance():
    rng = np.random.default_rng(20240501)
    X = rng.normal(size=(8, 2))
    y = np.array([1, 1, 1, -1, -1, -1, -1, -1], dtype=float)
    X[y > 0] += [0.8, 0.4]
    return X, y


def loss(u, C, theta):
    rc = np.sqrt(C)
    with np.errstate(divide="ignore"):
        recip = 1.0 / u
    v = np.where(u <= 1 / rc, 2 * rc - C * u, recip)
    return np.maximum(v - theta * rc, 0.0)


def grid_minimum(X, y, C, theta, lam, points=41, half=3.0):
    g = np.linspace(-half, half, points)
    w1, w2, b = np.meshgrid(g, g, g, indexing="ij")
    W = np.stack([w1.ravel(), w2.ravel()], axis=1)
    u = y[None, :] * (W @ X.T + b.ravel()[:, None])
    obj = loss(u, C, theta).mean(axis=1) + 0.5 * lam * np.sum(W * W, axis=1)
    k = int(np.argmin(obj))
    return float(obj[k]), (float(W[k, 0]), float(W[k, 1]), float(b.ravel()[k]))


if __name__ == "__main__":
    X, y = instance()
    print("X =", np.array2string(X, precision=17, separator=", "))
    for theta in (0.0, 0.5, 1.0):
        val, arg = grid_minimum(X, y, 1.0, theta, 1.0)
        print(theta, repr(val), arg)
