"""Multi-scale fully connected network.

The first hidden layer computes ``sigma(K * (W0 @ x) + b0)``, where ``K``
holds one scale factor per neuron.  Later layers are ordinary affine maps
followed by ``sigma``; the output layer is affine (with a bias) and has no
activation.

Besides plain evaluation the module propagates, layer by layer, the input
Jacobian and the input Laplacian of every pre-activation, and differentiates
objectives built on (value, gradient, Laplacian) with respect to all weights
and biases by a hand-written reverse sweep over that same computation.

Array conventions: a batch of points is ``(N, d)``; Jacobians are stored as
``(N, d, width)``.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .activations import _CODES as _ACT_CODES, ActivationKind
from .errors import ConfigError, ShapeError
from .rng import Stream, Streams

CHECKPOINT_TAG = "mscalednn-checkpoint"
CHECKPOINT_VERSION = 1


def build_scale_vector(n1: int, scales) -> np.ndarray:
    """Per-neuron scale factors for the first hidden layer.

    An integer ``A`` splits ``n1`` neurons into ``A`` contiguous parts with
    factors ``1..A``; when ``A`` does not divide ``n1`` the first
    ``n1 % A`` parts get one extra neuron.  A sequence is used verbatim.
    """
    if isinstance(scales, (int, np.integer)) and not isinstance(scales, bool):
        parts = int(scales)
        if parts < 1:
            raise ConfigError(f"scale part count must be >= 1, got {parts}")
        if parts > n1:
            raise ConfigError(f"scale part count {parts} exceeds first-layer width {n1}")
        base, extra = divmod(n1, parts)
        sizes = [base + (1 if i < extra else 0) for i in range(parts)]
        return np.repeat(np.arange(1, parts + 1, dtype=np.float64), sizes)

    k = np.asarray(scales, dtype=np.float64).reshape(-1)
    if k.shape[0] != n1:
        raise ConfigError(f"explicit scale list has length {k.shape[0]}, expected {n1}")
    if not np.all(np.isfinite(k)) or np.any(k <= 0):
        raise ConfigError("scale factors must be positive and finite")
    return k.copy()


@dataclass
class NetworkSpec:
    widths: Sequence[int]
    activation: ActivationKind | str = ActivationKind.SRELU
    scales: int | Sequence[float] = 1
    init: str = "D1"
    seed: int = 0

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        self.activation = ActivationKind.parse(self.activation)
        self.init = str(self.init).upper()
        if len(self.widths) < 2:
            raise ConfigError("network needs at least an input and an output width")
        if any(w < 1 for w in self.widths):
            raise ConfigError(f"layer widths must be positive: {self.widths}")
        if self.init not in ("D1", "D2"):
            raise ConfigError(f"init must be D1 or D2, got {self.init!r}")


@dataclass
class Network:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    scales: np.ndarray
    activation: ActivationKind

    def __post_init__(self):
        self.activation = ActivationKind.parse(self.activation)
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("weights and biases must be non-empty lists of equal length")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError(f"layer {l}: weight {w.shape} and bias {b.shape} disagree")
            if l and w.shape[1] != self.weights[l - 1].shape[0]:
                raise ShapeError(f"layer {l} expects {w.shape[1]} inputs, previous layer has {self.weights[l - 1].shape[0]}")
        if self.scales.shape != (self.weights[0].shape[0],):
            raise ShapeError("scale vector length must equal the first hidden width")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    def parameters(self) -> list[np.ndarray]:
        """Live views, ordered W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "Network":
        return Network(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.scales.copy(),
            self.activation,
        )

    def absorbed(self) -> "Network":
        """Equivalent network with the scales folded into the rows of W0."""
        net = self.copy()
        net.weights[0] = self.scales[:, None] * self.weights[0]
        net.scales = np.ones_like(self.scales)
        return net


@dataclass
class ParamGradient:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: Network) -> "ParamGradient":
        return cls([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])

    def flat(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def __iadd__(self, other: "ParamGradient"):
        for a, b in zip(self.flat(), other.flat()):
            a += b
        return self

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(g * g) for g in self.flat())))


@dataclass
class DerivBundle:
    value: float
    grad_x: np.ndarray
    laplacian_x: float


def init_network(spec: NetworkSpec, rng: Stream | None = None) -> Network:
    """Draw a network from D1 or D2.

    Every weight and bias is N(0, s^2) with ``s = 2/(n_in+n_out)`` (D1) or
    ``s = sqrt(2/(n_in+n_out))`` (D2).  Draw order: layer by layer, the
    weight matrix in row-major order, then that layer's bias.  Without an
    explicit stream the ``init`` sub-stream of ``spec.seed`` is used.
    """
    if rng is None:
        rng = Streams(spec.seed)["init"]
    widths = spec.widths
    scales = build_scale_vector(widths[1], spec.scales)
    weights, biases = [], []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        std = init_std(spec.init, n_in, n_out)
        weights.append(std * rng.normal(n_out * n_in).reshape(n_out, n_in))
        biases.append(std * rng.normal(n_out))
    return Network(weights, biases, scales, spec.activation)


def init_std(init: str, n_in: int, n_out: int) -> float:
    if init.upper() == "D1":
        return 2.0 / (n_in + n_out)
    if init.upper() == "D2":
        return float(np.sqrt(2.0 / (n_in + n_out)))
    raise ConfigError(f"unknown init {init!r}")


def _as_batch(net: Network, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ShapeError(f"expected points of dimension {net.input_dim}, got array of shape {np.shape(x)}")
    return x, single


def forward(net: Network, x):
    """Network output.  A single point gives a float, a batch ``(N, d)`` an array."""
    xb, single = _as_batch(net, x)
    value = Tape(net, xb, order=0, backward=False).value
    return float(value[0]) if single else value


def forward_bundle(net: Network, x):
    """Value, input gradient and input Laplacian.

    For one point returns a :class:`DerivBundle`; for a batch returns the
    tuple ``(values (N,), grads (N, d), laplacians (N,))``.
    """
    xb, single = _as_batch(net, x)
    tape = Tape(net, xb, order=2, backward=False)
    if single:
        return DerivBundle(float(tape.value[0]), tape.grad[0].copy(), float(tape.laplacian[0]))
    return tape.value, tape.grad, tape.laplacian


class Tape:
    """One forward sweep that keeps what the reverse sweep needs.

    ``order`` selects what is propagated: 0 values only, 1 adds the input
    Jacobian, 2 adds the input Laplacian.  Per hidden layer the recursion is

        J_z = s'(a) J_a
        L_z = s''(a) |J_a|^2 + s'(a) L_a

    and an affine map ``a' = W z + b`` carries ``J_a' = W J_z`` and
    ``L_a' = W L_z``.
    """

    def __init__(self, net: Network, x: np.ndarray, order: int = 0, backward: bool = True):
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        self.net = net
        self.x = x
        self.order = order
        self.layers = []
        n_deriv = order + 1 if backward else order

        w0, b0, k = net.weights[0], net.biases[0], net.scales
        a = x @ w0.T
        a *= k
        a += b0
        ja = (k[:, None] * w0).T[None, :, :] if order >= 1 else None
        la = None  # Laplacian of the first pre-activation is identically zero

        code = _ACT_CODES[net.activation]
        n_pts = x.shape[0]
        for l in range(1, len(net.weights)):
            width = a.shape[1]
            s = np.empty((n_deriv + 1, n_pts, width))
            jz = np.empty((n_pts, x.shape[1], width)) if order >= 1 else None
            lz = np.empty((n_pts, width)) if order >= 2 else None
            q = np.empty((n_pts, width)) if order >= 2 else None
            kernels.layer_forward(
                a,
                ja if ja is not None else kernels.EMPTY3,
                la if la is not None else kernels.EMPTY2,
                la is not None,
                code,
                order,
                n_deriv,
                s,
                jz if jz is not None else kernels.EMPTY3,
                lz if lz is not None else kernels.EMPTY2,
                q if q is not None else kernels.EMPTY2,
            )
            z = s[0]
            self.layers.append(_Cached(a, ja, la, q, s, z, jz, lz))
            w, b = net.weights[l], net.biases[l]
            a = z @ w.T
            a += b
            ja = jz @ w.T if order >= 1 else None
            la = lz @ w.T if order >= 2 else None

        self.value = a[:, 0]
        self.grad = np.ascontiguousarray(np.broadcast_to(ja[:, :, 0], x.shape)) if order >= 1 else None
        if order >= 2:
            self.laplacian = la[:, 0] if la is not None else np.zeros(x.shape[0])
        else:
            self.laplacian = None

    def backward(self, d_value, d_grad=None, d_lap=None) -> ParamGradient:
        """Pull adjoints of (value, grad, laplacian) back to every parameter.

        The arguments are the partial derivatives of a scalar objective with
        respect to ``self.value`` ``(N,)``, ``self.grad`` ``(N, d)`` and
        ``self.laplacian`` ``(N,)``; omitted ones are zero.
        """
        net = self.net
        n = self.x.shape[0]
        if d_grad is not None and self.order < 1:
            raise ValueError("tape was recorded without the input gradient")
        if d_lap is not None and self.order < 2:
            raise ValueError("tape was recorded without the input Laplacian")
        depth = len(net.weights)
        out = ParamGradient([None] * depth, [None] * depth)

        abar = np.reshape(np.asarray(d_value, dtype=np.float64), (n, 1))
        jbar = None if d_grad is None else np.reshape(d_grad, (n, -1, 1))
        lbar = None if d_lap is None else np.reshape(d_lap, (n, 1))

        for l in range(len(net.weights) - 1, 0, -1):
            c = self.layers[l - 1]
            w = net.weights[l]
            gw = abar.T @ c.z
            if jbar is not None:
                gw += jbar.reshape(-1, jbar.shape[2]).T @ c.jz.reshape(-1, c.jz.shape[2])
            if lbar is not None:
                gw += lbar.T @ c.lz
            out.weights[l] = gw
            out.biases[l] = abar.sum(axis=0)

            zbar = abar @ w
            jzbar = jbar @ w if jbar is not None else None
            lzbar = lbar @ w if lbar is not None else None

            has_j, has_l = jzbar is not None, lzbar is not None
            abar = np.empty_like(zbar)
            jbar = np.empty((n, self.x.shape[1], zbar.shape[1])) if has_j or has_l else None
            lbar = np.empty_like(zbar) if has_l else None
            kernels.layer_backward(
                zbar,
                jzbar if has_j else kernels.EMPTY3,
                lzbar if has_l else kernels.EMPTY2,
                has_j,
                has_l,
                c.s,
                c.ja if c.ja is not None else kernels.EMPTY3,
                c.la if c.la is not None else kernels.EMPTY2,
                c.la is not None,
                c.q if c.q is not None else kernels.EMPTY2,
                abar,
                jbar if jbar is not None else kernels.EMPTY3,
                lbar if lbar is not None else kernels.EMPTY2,
            )

        k = net.scales
        gw0 = k[:, None] * (abar.T @ self.x)
        if jbar is not None:
            gw0 += k[:, None] * jbar.sum(axis=0).T
        out.weights[0] = gw0
        out.biases[0] = abar.sum(axis=0)
        return out


@dataclass
class _Cached:
    a: np.ndarray
    ja: np.ndarray | None
    la: np.ndarray | None
    q: np.ndarray | None
    s: np.ndarray
    z: np.ndarray
    jz: np.ndarray | None
    lz: np.ndarray | None


@dataclass
class PointGroup:
    """Points of one kind inside an objective, plus how they enter it.

    ``adjoint(value, grad, laplacian, x, rows)`` gets one chunk of the
    group (``rows`` is the slice of ``points`` it covers) and returns the
    chunk's contribution to the objective together with the partials with
    respect to the three arrays (``None`` for arrays the group does not use).
    """

    points: np.ndarray
    order: int
    adjoint: object
    name: str = ""


@dataclass
class GradientResult:
    value: float
    grad: ParamGradient
    values: dict = field(default_factory=dict)


def objective_param_gradient(net: Network, objective, batch, *, chunk_size: int = 2048, threads: int = 1):
    """Value and exact parameter gradient of a sampled objective.

    ``objective.groups(batch)`` supplies :class:`PointGroup` items.  Each
    group is cut into fixed-size chunks that may be processed on several
    threads; contributions are reduced in chunk order, so the result does not
    depend on ``threads``.  Returns ``(value, ParamGradient)``.
    """
    res = evaluate_objective(net, objective, batch, chunk_size=chunk_size, threads=threads)
    return res.value, res.grad


def evaluate_objective(net: Network, objective, batch, *, chunk_size: int = 2048, threads: int = 1) -> GradientResult:
    """Like :func:`objective_param_gradient` but also returns network values per group."""
    groups = objective.groups(batch)
    if net.activation is ActivationKind.RELU and any(g.order >= 2 for g in groups):
        warnings.warn("objective uses the input Laplacian of a ReLU network, which is zero almost everywhere", stacklevel=2)

    jobs = []
    for gi, g in enumerate(groups):
        pts = np.asarray(g.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != net.input_dim:
            raise ShapeError(f"group {g.name or gi}: points have shape {pts.shape}, network input is {net.input_dim}")
        for start in range(0, pts.shape[0], chunk_size):
            rows = slice(start, min(start + chunk_size, pts.shape[0]))
            jobs.append((gi, g, pts[rows], rows))

    def run(job):
        _, g, xc, rows = job
        tape = Tape(net, xc, order=g.order)
        val, du, dg, dl = g.adjoint(tape.value, tape.grad, tape.laplacian, xc, rows)
        return float(val), tape.backward(du, dg, dl), tape.value

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    total = 0.0
    grad = ParamGradient.zeros_like(net)
    values: dict = {}
    for (gi, g, _, _), (val, gr, u) in zip(jobs, results):
        total += val
        grad += gr
        values.setdefault(g.name or gi, []).append(u)
    values = {k: np.concatenate(v) for k, v in values.items()}
    return GradientResult(total, grad, values)


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(net: Network, path) -> None:
    """Write a text checkpoint.

    Layout, one item per line::

        mscalednn-checkpoint 1
        widths <n0> <n1> ... <nL>
        activation <name>
        scales <K_1> ... <K_n1>
        W0 <row-major entries>
        b0 <entries>
        W1 ...

    Floats are written with ``repr`` so they round-trip exactly.
    """
    lines = [
        f"{CHECKPOINT_TAG} {CHECKPOINT_VERSION}",
        "widths " + " ".join(str(w) for w in net.widths),
        f"activation {net.activation.value}",
        "scales " + " ".join(repr(float(v)) for v in net.scales),
    ]
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"W{l} " + " ".join(repr(float(v)) for v in w.ravel()))
        lines.append(f"b{l} " + " ".join(repr(float(v)) for v in b))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> Network:
    with open(path, encoding="utf-8") as fh:
        rows = [line.split() for line in fh if line.strip()]
    if not rows or rows[0][0] != CHECKPOINT_TAG:
        raise ValueError(f"{path}: not a checkpoint file")
    if int(rows[0][1]) != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {rows[0][1]}")
    items = {r[0]: r[1:] for r in rows[1:]}
    widths = [int(v) for v in items["widths"]]
    weights, biases = [], []
    for l, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        weights.append(np.array(items[f"W{l}"], dtype=np.float64).reshape(n_out, n_in))
        biases.append(np.array(items[f"b{l}"], dtype=np.float64))
    scales = np.array(items["scales"], dtype=np.float64)
    return Network(weights, biases, scales, items["activation"][0])
