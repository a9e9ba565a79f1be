"""Loss functionals and their trainable counterparts.

The plain functions (:func:`ritz_loss`, :func:`lse_loss`, ...) evaluate a
loss for any scalar field exposing ``value``/``grad``/``laplacian``, so a
network and a closed-form solution can be scored the same way.  The
objective classes describe the same losses to
:func:`mscalednn.network.objective_param_gradient`, which needs the partial
derivatives of each point's contribution.

Boundary penalties are averaged over *all* boundary samples.
"""

from __future__ import annotations

import numpy as np

from .errors import CapabilityError, ConfigError
from .network import Network, PointGroup, Tape, forward

# -- fields -------------------------------------------------------------------


class NetworkField:
    """Adapter giving a :class:`Network` the scalar-field interface."""

    def __init__(self, net: Network, chunk_size: int = 4096):
        self.net = net
        self.chunk_size = chunk_size

    def _sweep(self, x, order: int, pick):
        x = np.asarray(x, dtype=np.float64)
        parts = []
        for start in range(0, x.shape[0], self.chunk_size):
            tape = Tape(self.net, x[start : start + self.chunk_size], order=order, backward=False)
            parts.append(pick(tape))
        return np.concatenate(parts) if parts else np.zeros(0)

    def value(self, x):
        return self._sweep(x, 0, lambda t: t.value)

    def grad(self, x):
        return self._sweep(x, 1, lambda t: t.grad)

    def laplacian(self, x):
        return self._sweep(x, 2, lambda t: t.laplacian)


def _values(field, x) -> np.ndarray:
    if isinstance(field, Network):
        return forward(field, x)
    if callable(field) and not hasattr(field, "value"):
        return np.asarray(field(x), dtype=np.float64)
    return np.asarray(field.value(x), dtype=np.float64)


def _require(field, capability: str):
    if isinstance(field, Network):
        return NetworkField(field)
    if not callable(getattr(field, capability, None)):
        raise CapabilityError(f"field {type(field).__name__} does not provide {capability}()")
    return field


def _nonempty(x, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"{what} must be a non-empty (N, d) array")
    return x


# -- pointwise terms shared by the functionals and the objectives -----------


def ritz_terms(u, grad, g, eps=1.0, potential=0.0):
    """Energy density ``eps |grad u|^2 / 2 + V u^2 - g u`` per point."""
    return 0.5 * eps * np.sum(grad * grad, axis=1) + potential * u * u - g * u


def lse_residual(u, lap, g, eps=1.0, potential=0.0):
    """``eps Lap u - V u + g``; zero for an exact solution."""
    return eps * lap - potential * u + g


def boundary_penalty(u, g_tilde, beta: float) -> float:
    diff = u - g_tilde
    return beta * float(np.mean(diff * diff))


# -- functionals on fields --------------------------------------------------------


def ritz_loss(field, problem, interior, boundary, beta: float) -> float:
    """Monte-Carlo Ritz energy plus the Dirichlet penalty."""
    interior = _nonempty(interior, "interior batch")
    boundary = _nonempty(boundary, "boundary batch")
    f = _require(field, "grad")
    u = _values(f, interior)
    dens = ritz_terms(u, f.grad(interior), problem.g(interior), problem.eps_at(interior), problem.v_at(interior))
    return float(np.mean(dens)) + boundary_penalty(_values(f, boundary), problem.g_tilde(boundary), beta)


def lse_loss(field, problem, interior, boundary, beta: float) -> float:
    """Mean squared PDE residual plus the Dirichlet penalty."""
    interior = _nonempty(interior, "interior batch")
    boundary = _nonempty(boundary, "boundary batch")
    f = _require(field, "laplacian")
    u = _values(f, interior) if not problem.reduced else 0.0
    r = lse_residual(u, f.laplacian(interior), problem.g(interior), problem.eps_at(interior), problem.v_at(interior))
    return float(np.mean(r * r)) + boundary_penalty(_values(f, boundary), problem.g_tilde(boundary), beta)


def fit_mse_loss(field, x, y) -> float:
    x = _nonempty(x, "labeled batch")
    diff = _values(field, x) - np.asarray(y, dtype=np.float64)
    return float(np.mean(diff * diff))


def mse_vs_true(field, points, u_true) -> float:
    """Mean squared distance to the true solution over ``points``."""
    points = _nonempty(points, "evaluation set")
    diff = _values(field, points) - _values(u_true, points)
    return float(np.mean(diff * diff))


# -- trainable objectives ----------------------------------------------------------


class FitMSE:
    """Mean squared error on a labeled batch ``(x, y)``."""

    name = "mse"
    uses_laplacian = False

    def groups(self, batch):
        x, y = batch
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n = x.shape[0]

        def adjoint(u, _g, _l, _x, rows):
            diff = u - y[rows]
            return np.sum(diff * diff) / n, 2.0 * diff / n, None, None

        return [PointGroup(x, 0, adjoint, "data")]


class _PdeObjective:
    name = ""
    interior_order = 1

    def __init__(self, problem, beta: float):
        if beta < 0:
            raise ConfigError("beta must be non-negative")
        self.problem = problem
        self.beta = float(beta)

    def _boundary_group(self, boundary) -> PointGroup:
        boundary = np.asarray(boundary, dtype=np.float64)
        m = boundary.shape[0]
        beta, prob = self.beta, self.problem

        def adjoint(u, _g, _l, xc, _rows):
            diff = u - prob.g_tilde(xc)
            return beta * np.sum(diff * diff) / m, 2.0 * beta * diff / m, None, None

        return PointGroup(boundary, 0, adjoint, "boundary")

    def groups(self, batch):
        interior, boundary = batch
        return [self._interior_group(np.asarray(interior, dtype=np.float64)), self._boundary_group(boundary)]

    def __call__(self, field, interior, boundary) -> float:
        raise NotImplementedError


class RitzObjective(_PdeObjective):
    name = "ritz"
    interior_order = 1

    def _interior_group(self, interior) -> PointGroup:
        n = interior.shape[0]
        prob = self.problem

        def adjoint(u, grad, _l, xc, _rows):
            g, eps, v = prob.g(xc), prob.eps_at(xc), prob.v_at(xc)
            total = np.sum(ritz_terms(u, grad, g, eps, v)) / n
            du = (2.0 * v * u - g) / n
            dgrad = np.asarray(eps, dtype=np.float64).reshape(-1, 1) * grad / n
            return total, du, dgrad, None

        return PointGroup(interior, 1, adjoint, "interior")

    def __call__(self, field, interior, boundary) -> float:
        return ritz_loss(field, self.problem, interior, boundary, self.beta)


class LSEObjective(_PdeObjective):
    name = "lse"
    interior_order = 2

    def _interior_group(self, interior) -> PointGroup:
        n = interior.shape[0]
        prob = self.problem

        def adjoint(u, _grad, lap, xc, _rows):
            g, eps, v = prob.g(xc), prob.eps_at(xc), prob.v_at(xc)
            r = lse_residual(u, lap, g, eps, v)
            du = -2.0 * r * v / n * np.ones_like(u)
            return np.sum(r * r) / n, du, None, 2.0 * r * eps / n

        return PointGroup(interior, 2, adjoint, "interior")

    def __call__(self, field, interior, boundary) -> float:
        return lse_loss(field, self.problem, interior, boundary, self.beta)


def make_objective(loss: str, problem=None, beta: float = 1000.0):
    if loss == "mse":
        return FitMSE()
    if problem is None:
        raise ConfigError(f"loss {loss!r} needs a PDE problem")
    if loss == "ritz":
        return RitzObjective(problem, beta)
    if loss == "lse":
        return LSEObjective(problem, beta)
    raise ConfigError(f"unknown loss {loss!r}")
