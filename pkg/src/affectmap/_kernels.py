"""Elementwise compute kernels with two interchangeable backends.

The hot inner loops of network training (fused bias+rectifier+dropout,
its backward pass, adaptive-moment parameter updates) and of neighbor
search (pairwise squared distances) exist twice: a plain numpy version
and a numba-jitted version. Matrix products and axis reductions are NOT
duplicated; they always go through numpy (BLAS) so that both backends
produce bitwise-identical numbers. The numpy mirrors follow the jitted
per-element expression order exactly; do not "simplify" one without the
other.

Backend selection: the AFFECTMAP_BACKEND environment variable ("numpy"
or "numba") wins at import time; otherwise numba is used when
importable. Tests and benchmarks can switch at runtime via
set_backend()/use_backend().
"""

from __future__ import annotations

import math
import os
from contextlib import contextmanager

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "HAS_NUMBA",
    "active_backend",
    "set_backend",
    "use_backend",
    "warmup",
    "hidden_forward",
    "hidden_backward",
    "relu_backward",
    "adam_update",
    "pairwise_sq_dists",
]

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is an install-time choice
    HAS_NUMBA = False


# ---------------------------------------------------------------------------
# numpy backend


def _hidden_forward_np(zlin, b, u, keep, inv, z_out, hd_out):
    np.add(zlin, b, out=z_out)
    h = np.where(z_out > 0.0, z_out, 0.0)
    hd_out[:] = np.where(u < keep, h * inv, 0.0)


def _hidden_backward_np(delta, z, u, keep, inv, out):
    out[:] = np.where(z > 0.0, np.where(u < keep, delta * inv, 0.0), 0.0)


def _adam_update_np(p, g, m, v, lr, b1, b2, eps, bc1, bc2):
    onem1 = 1.0 - b1
    onem2 = 1.0 - b2
    m[:] = b1 * m + onem1 * g
    v[:] = b2 * v + onem2 * (g * g)
    p -= (lr * (m / bc1)) / (np.sqrt(v / bc2) + eps)


def _pairwise_sq_dists_np(q, s, out):
    # accumulate one feature at a time so the summation order matches the
    # scalar loop in the jitted version bit for bit
    out[:] = 0.0
    for f in range(q.shape[1]):
        diff = q[:, f : f + 1] - s[:, f]
        out += diff * diff


# ---------------------------------------------------------------------------
# numba backend

if HAS_NUMBA:

    @njit(cache=True, nogil=True)
    def _hidden_forward_nb(zlin, b, u, keep, inv, z_out, hd_out):
        n, width = zlin.shape
        for i in range(n):
            for j in range(width):
                z = zlin[i, j] + b[j]
                z_out[i, j] = z
                h = z if z > 0.0 else 0.0
                hd_out[i, j] = h * inv if u[i, j] < keep else 0.0

    @njit(cache=True, nogil=True)
    def _hidden_backward_nb(delta, z, u, keep, inv, out):
        n, width = delta.shape
        for i in range(n):
            for j in range(width):
                g = delta[i, j] * inv if u[i, j] < keep else 0.0
                out[i, j] = g if z[i, j] > 0.0 else 0.0

    @njit(cache=True, nogil=True)
    def _adam_update_nb(p, g, m, v, lr, b1, b2, eps, bc1, bc2):
        onem1 = 1.0 - b1
        onem2 = 1.0 - b2
        for i in range(p.size):
            mi = b1 * m[i] + onem1 * g[i]
            vi = b2 * v[i] + onem2 * (g[i] * g[i])
            m[i] = mi
            v[i] = vi
            p[i] -= lr * (mi / bc1) / (math.sqrt(vi / bc2) + eps)

    @njit(cache=True, nogil=True)
    def _pairwise_sq_dists_nb(q, s, out):
        nq, d = q.shape
        nt = s.shape[0]
        for i in range(nq):
            for j in range(nt):
                acc = 0.0
                for f in range(d):
                    diff = q[i, f] - s[j, f]
                    acc += diff * diff
                out[i, j] = acc


_BACKENDS = {
    "numpy": {
        "hidden_forward": _hidden_forward_np,
        "hidden_backward": _hidden_backward_np,
        "adam_update": _adam_update_np,
        "pairwise_sq_dists": _pairwise_sq_dists_np,
    },
}
if HAS_NUMBA:
    _BACKENDS["numba"] = {
        "hidden_forward": _hidden_forward_nb,
        "hidden_backward": _hidden_backward_nb,
        "adam_update": _adam_update_nb,
        "pairwise_sq_dists": _pairwise_sq_dists_nb,
    }


def _initial_backend() -> str:
    forced = os.environ.get("AFFECTMAP_BACKEND", "").strip().lower()
    if forced in ("", "auto"):
        return "numba" if HAS_NUMBA else "numpy"
    if forced not in ("numpy", "numba"):
        raise ConfigurationError(
            f"AFFECTMAP_BACKEND must be 'numpy' or 'numba', got {forced!r}"
        )
    if forced == "numba" and not HAS_NUMBA:
        raise ConfigurationError(
            "AFFECTMAP_BACKEND=numba but numba is not importable"
        )
    return forced


_ACTIVE = _initial_backend()


def active_backend() -> str:
    return _ACTIVE


def set_backend(name: str) -> None:
    if name not in _BACKENDS:
        available = ", ".join(sorted(_BACKENDS))
        raise ConfigurationError(
            f"unknown backend {name!r}; available: {available}"
        )
    global _ACTIVE
    _ACTIVE = name


@contextmanager
def use_backend(name: str):
    """Temporarily switch the kernel backend (tests, benchmarks)."""
    previous = _ACTIVE
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def hidden_forward(zlin, b, u, keep, inv, z_out, hd_out):
    """z = zlin + b; h = relu(z); hd = dropout-masked, 1/keep-scaled h."""
    _BACKENDS[_ACTIVE]["hidden_forward"](zlin, b, u, keep, inv, z_out, hd_out)


def hidden_backward(delta, z, u, keep, inv, out):
    """Gradient through dropout scaling and the rectifier, fused."""
    _BACKENDS[_ACTIVE]["hidden_backward"](delta, z, u, keep, inv, out)


def relu_backward(delta, z, out):
    """Gradient through the rectifier alone (no dropout in the graph)."""
    # identical numpy expression on both backends; nothing to fuse
    out[:] = np.where(z > 0.0, delta, 0.0)


def adam_update(p, g, m, v, lr, b1, b2, eps, bc1, bc2):
    """One adaptive-moment step, in place, on flat float64 views."""
    _BACKENDS[_ACTIVE]["adam_update"](p, g, m, v, lr, b1, b2, eps, bc1, bc2)


def pairwise_sq_dists(queries, train, out=None):
    """Squared Euclidean distances, queries x train rows."""
    q = np.ascontiguousarray(queries, dtype=np.float64)
    s = np.ascontiguousarray(train, dtype=np.float64)
    if out is None:
        out = np.empty((q.shape[0], s.shape[0]))
    _BACKENDS[_ACTIVE]["pairwise_sq_dists"](q, s, out)
    return out


def warmup() -> None:
    """Compile the jitted kernels on tiny inputs so timed code never pays
    the compilation cost. No-op on the numpy backend."""
    if _ACTIVE != "numba":
        return
    two = np.ones((2, 2))
    flat = np.ones(4)
    hidden_forward(two, np.zeros(2), np.zeros((2, 2)), 0.8, 1.25, np.empty((2, 2)), np.empty((2, 2)))
    hidden_backward(two, two, np.zeros((2, 2)), 0.8, 1.25, np.empty((2, 2)))
    adam_update(flat.copy(), flat, np.zeros(4), np.zeros(4), 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)
    pairwise_sq_dists(two, two)
