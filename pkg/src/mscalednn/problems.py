"""Target functions, embeddings and the sine-sum Poisson problem.

Everything operates on batches ``(N, k)``; single points ``(k,)`` are
accepted where noted.  Scalar fields expose ``value(x)`` and, when
available, ``grad(x)`` and ``laplacian(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, ShapeError

TARGET_KINDS = ("osc3d", "embed60", "hf1d", "hf2d")
EMBEDDINGS = ("none", "linear", "nonlinear")

# default sampling boxes of each target (intrinsic coordinates for embed60)
DEFAULT_DOMAINS = {
    "osc3d": (-np.pi / 2, np.pi / 2),
    "embed60": (0.0, 1.0),
    "hf1d": (0.0, np.pi),
    "hf2d": (0.0, np.pi),
}


def _batch(x, dim: int, what: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ShapeError(f"{what} expects points of dimension {dim}, got shape {np.shape(x)}")
    return x, single


def _out(v: np.ndarray, single: bool):
    return float(v[0]) if single else v


@dataclass(frozen=True)
class FitTarget:
    kind: str
    embedding: str = "none"
    d: int | None = None
    d_in: int = 3

    def __post_init__(self):
        if self.kind not in TARGET_KINDS:
            raise ConfigError(f"unknown target {self.kind!r}")
        if self.embedding not in EMBEDDINGS:
            raise ConfigError(f"unknown embedding {self.embedding!r}")
        if self.kind == "embed60":
            if self.embedding == "none":
                raise ConfigError("embed60 target needs a linear or nonlinear embedding")
            if self.d is None:
                object.__setattr__(self, "d", 60)
            if self.d < self.d_in or self.d_in < 1:
                raise ConfigError("embedding requires d >= d_in >= 1")
        elif self.embedding != "none":
            raise ConfigError(f"target {self.kind} takes no embedding")

    @property
    def intrinsic_dim(self) -> int:
        return {"osc3d": 3, "embed60": self.d_in, "hf1d": 1, "hf2d": 2}[self.kind]

    @property
    def input_dim(self) -> int:
        """Dimension of the network input."""
        return self.d if self.kind == "embed60" else self.intrinsic_dim

    def embed(self, t: np.ndarray) -> np.ndarray:
        if self.kind != "embed60":
            return np.asarray(t, dtype=np.float64)
        fn = embed_linear if self.embedding == "linear" else embed_nonlinear
        return fn(t, self.d)


def cos_sin_sum(t) -> np.ndarray:
    """sum_j cos(10 t_j) + sin(5 t_j) over the last axis."""
    t = np.asarray(t, dtype=np.float64)
    return np.sum(np.cos(10.0 * t) + np.sin(5.0 * t), axis=-1)


def hf1d(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sin(23.0 * x) + np.sin(137.0 * x) + np.sin(203.0 * x)


def hf2d_factor(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sin(23.0 * x) + np.sin(32.0 * x)


def eval_target(target: FitTarget, x):
    """Closed-form target value.

    For ``embed60`` the input may be the intrinsic ``t`` (length ``d_in``)
    or an embedded point (length ``d``); embedded points are mapped back to
    ``t`` first, see :func:`recover_intrinsic`.
    """
    if target.kind == "embed60":
        arr = np.asarray(x, dtype=np.float64)
        width = arr.shape[-1] if arr.ndim else -1
        if width == target.d and target.d != target.d_in:
            xb, single = _batch(arr, target.d, "embed60")
            return _out(cos_sin_sum(recover_intrinsic(target, xb)), single)
        xb, single = _batch(arr, target.d_in, "embed60")
        return _out(cos_sin_sum(xb), single)

    xb, single = _batch(x, target.intrinsic_dim, target.kind)
    if target.kind == "osc3d":
        v = cos_sin_sum(xb)
    elif target.kind == "hf1d":
        v = hf1d(xb[:, 0])
    else:
        v = hf2d_factor(xb[:, 0]) * hf2d_factor(xb[:, 1])
    return _out(v, single)


def embedding_index(d: int, d_in: int) -> np.ndarray:
    """0-based ``t`` index used by each output coordinate.

    Coordinate ``i`` (1-based) reads ``t_m`` with ``m = floor(i / (d/d_in))
    = floor(i * d_in / d)``, clamped to ``1..d_in``.
    """
    i = np.arange(1, d + 1)
    m = np.clip((i * d_in) // d, 1, d_in)
    return m - 1


def embed_linear(t, d: int) -> np.ndarray:
    """``x_i = cos(i) * t_m(i)``."""
    t = np.asarray(t, dtype=np.float64)
    idx = embedding_index(d, t.shape[-1])
    return np.cos(np.arange(1, d + 1)) * t[..., idx]


def embed_nonlinear(t, d: int) -> np.ndarray:
    """``x_i = cos(cos(i) * t_m(i))``."""
    t = np.asarray(t, dtype=np.float64)
    idx = embedding_index(d, t.shape[-1])
    return np.cos(np.cos(np.arange(1, d + 1)) * t[..., idx])


def recover_intrinsic(target: FitTarget, x: np.ndarray) -> np.ndarray:
    """Invert an embedding, reading each ``t_m`` from its best-conditioned coordinate.

    The nonlinear inverse assumes ``t >= 0`` (true on the [0, 1] domain).
    """
    d, d_in = target.d, target.d_in
    idx = embedding_index(d, d_in)
    c = np.cos(np.arange(1, d + 1))
    t = np.empty((x.shape[0], d_in))
    for m in range(d_in):
        members = np.flatnonzero(idx == m)
        best = members[np.argmax(np.abs(c[members]))]
        if target.embedding == "linear":
            t[:, m] = x[:, best] / c[best]
        else:
            t[:, m] = np.arccos(np.clip(x[:, best], -1.0, 1.0)) / np.abs(c[best])
    return t


# -- Poisson problem ----------------------------------------------------------


class SineSum:
    """``sum_i a sin(x_i) + b sin(10 x_i)`` with analytic derivatives."""

    def __init__(self, d: int, a: float = 1.0, b: float = 1.0):
        self.d, self.a, self.b = d, a, b

    def value(self, x):
        xb, single = _batch(x, self.d, "field")
        return _out(np.sum(self.a * np.sin(xb) + self.b * np.sin(10.0 * xb), axis=1), single)

    def grad(self, x):
        xb, single = _batch(x, self.d, "field")
        g = self.a * np.cos(xb) + 10.0 * self.b * np.cos(10.0 * xb)
        return g[0] if single else g

    def laplacian(self, x):
        xb, single = _batch(x, self.d, "field")
        return _out(np.sum(-self.a * np.sin(xb) - 100.0 * self.b * np.sin(10.0 * xb), axis=1), single)


class Constant:
    def __init__(self, d: int, c: float = 0.0):
        self.d, self.c = d, float(c)

    def value(self, x):
        xb, single = _batch(x, self.d, "field")
        return _out(np.full(xb.shape[0], self.c), single)

    def grad(self, x):
        xb, single = _batch(x, self.d, "field")
        g = np.zeros_like(xb)
        return g[0] if single else g

    def laplacian(self, x):
        return self.value(x) * 0.0


@dataclass
class PoissonProblem:
    """``-eps * Lap(u) + V * u = g`` on ``[0, 1]^d`` with ``u = g_tilde`` on the boundary.

    ``source``, ``boundary`` and ``potential`` map ``(N, d)`` batches to
    ``(N,)``; ``epsilon`` and ``potential`` may also be plain numbers.
    """

    d: int
    source: Callable
    boundary: Callable
    solution: object | None = None
    epsilon: float | Callable = 1.0
    potential: float | Callable = 0.0

    def g(self, x) -> np.ndarray:
        return np.asarray(self.source(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def g_tilde(self, x) -> np.ndarray:
        return np.asarray(self.boundary(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def eps_at(self, x) -> np.ndarray | float:
        return self.epsilon(x) if callable(self.epsilon) else float(self.epsilon)

    def v_at(self, x) -> np.ndarray | float:
        return self.potential(x) if callable(self.potential) else float(self.potential)

    @property
    def reduced(self) -> bool:
        """True for the plain Poisson case eps = 1, V = 0."""
        return (not callable(self.epsilon) and self.epsilon == 1.0) and (
            not callable(self.potential) and self.potential == 0.0
        )


def poisson_g(x):
    """Source ``sum_i sin(x_i) + 100 sin(10 x_i)``."""
    x = np.asarray(x, dtype=np.float64)
    return np.sum(np.sin(x) + 100.0 * np.sin(10.0 * x), axis=-1)


def poisson_gtilde(x):
    """Dirichlet data ``sum_i sin(x_i) + sin(10 x_i)``."""
    x = np.asarray(x, dtype=np.float64)
    return np.sum(np.sin(x) + np.sin(10.0 * x), axis=-1)


def poisson_utrue(x):
    return poisson_gtilde(x)


def sine_poisson(d: int) -> PoissonProblem:
    """The d-dimensional test problem whose solution is ``sum sin(x_i) + sin(10 x_i)``."""
    if d < 1:
        raise ConfigError("dimension must be >= 1")
    return PoissonProblem(d=d, source=poisson_g, boundary=poisson_gtilde, solution=SineSum(d))
