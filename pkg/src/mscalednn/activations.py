"""Scalar activations with exact derivatives up to third order.

Derivatives are the almost-everywhere ones.  At kinks (x=0 for ReLU,
x in {0, 1} for the sReLU family) the right limit is returned, so the
region where an sReLU-family function is "live" is the half-open
interval [0, 1).
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .kernels import activation_table


class ActivationKind(str, Enum):
    RELU = "relu"
    SRELU = "srelu"
    SRELU2 = "srelu2"
    SRELU3 = "srelu3"

    @classmethod
    def parse(cls, name: "str | ActivationKind") -> "ActivationKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown activation {name!r} (expected one of {choices})") from None


_CODES = {ActivationKind.RELU: 0, ActivationKind.SRELU: 1, ActivationKind.SRELU2: 2, ActivationKind.SRELU3: 3}


def derivatives(kind, x, order: int = 0) -> tuple[np.ndarray, ...]:
    """Return ``(f, f', ..., f^(order))`` evaluated elementwise at ``x``.

    ``order`` may be 0..3.  On [0, 1) the sReLU family is ``s^p`` with
    ``s = x(1 - x)``, ``s' = 1 - 2x``, ``s'' = -2``, which gives

        (s^2)'   = 2 s s'            (s^3)'   = 3 s^2 s'
        (s^2)''  = 2 s'^2 - 4 s      (s^3)''  = 6 s s'^2 - 6 s^2
        (s^2)''' = -12 s'            (s^3)''' = 6 s'^3 - 36 s s'
    """
    kind = ActivationKind.parse(kind)
    if not 0 <= order <= 3:
        raise ValueError("order must be in 0..3")
    shape = np.shape(x)
    x = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    out = np.empty((order + 1, x.size))
    activation_table(x, _CODES[kind], order, out)
    return tuple(out[k].reshape(shape) for k in range(order + 1))


def act_value(kind, x):
    """Activation value.  Scalars in, scalars out; arrays elementwise."""
    return _unwrap(derivatives(kind, x, 0)[0], x)


def act_deriv1(kind, x):
    return _unwrap(derivatives(kind, x, 1)[1], x)


def act_deriv2(kind, x):
    return _unwrap(derivatives(kind, x, 2)[2], x)


def act_deriv3(kind, x):
    # only needed for parameter gradients of Laplacian-based objectives
    return _unwrap(derivatives(kind, x, 3)[3], x)


def _unwrap(arr: np.ndarray, like):
    if np.ndim(like) == 0:
        return float(arr)
    return arr
