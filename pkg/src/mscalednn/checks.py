"""Quick finite-difference and oracle self-tests (the ``check`` command)."""

from __future__ import annotations

import numpy as np

from .activations import ActivationKind, derivatives
from .losses import FitMSE, LSEObjective, RitzObjective, lse_loss
from .network import NetworkSpec, forward, forward_bundle, init_network, objective_param_gradient
from .optimizer import AdamState, LrSchedule, adam_step
from .problems import poisson_g, sine_poisson
from .rng import Streams
from .sampling import sample_boundary, sample_interior


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def check_activations(rng) -> float:
    x = rng.uniform(-0.5, 1.5, 1000)
    x = x[(np.abs(x) > 1e-3) & (np.abs(x - 1) > 1e-3)]
    worst = 0.0
    h = 1e-6
    for kind in ActivationKind:
        f0, f1, f2 = derivatives(kind, x, 2)
        fd1 = (derivatives(kind, x + h)[0] - derivatives(kind, x - h)[0]) / (2 * h)
        fd2 = (derivatives(kind, x + h, 1)[1] - derivatives(kind, x - h, 1)[1]) / (2 * h)
        scale1 = np.maximum(np.abs(f1), 1.0)
        scale2 = np.maximum(np.abs(f2), 1.0)
        worst = max(worst, float(np.max(np.abs(fd1 - f1) / scale1)), float(np.max(np.abs(fd2 - f2) / scale2)))
    return worst


def check_bundle(rng) -> tuple[float, float]:
    net = init_network(NetworkSpec([2, 8, 8, 1], "srelu2", 3, "D2", seed=5))
    x = rng.uniform(0, 1, 2)
    b = forward_bundle(net, x)
    eye = np.eye(2)
    h = 1e-5
    fg = np.array([(forward(net, x + h * e) - forward(net, x - h * e)) / (2 * h) for e in eye])
    # second differences need a wider step to stay clear of round-off
    h = 1e-4
    fl = sum((forward(net, x + h * e) - 2 * b.value + forward(net, x - h * e)) / h**2 for e in eye)
    return _rel(b.grad_x, fg), abs(b.laplacian_x - fl) / max(abs(fl), 1e-12)


def check_param_gradients(rng) -> float:
    prob = sine_poisson(2)
    streams = Streams(11)
    interior = sample_interior(0, 1, 2, 8, streams["interior"])
    boundary = sample_boundary(2, 2, streams["boundary"])
    x = rng.uniform(0, 1, (8, 2))
    cases = [
        ("srelu", FitMSE(), (x, poisson_g(x))),
        ("srelu", RitzObjective(prob, 1000.0), (interior, boundary)),
        ("srelu3", LSEObjective(prob, 1000.0), (interior, boundary)),
    ]
    worst = 0.0
    for act, obj, batch in cases:
        net = init_network(NetworkSpec([2, 4, 1], act, 2, "D2", seed=7))
        _, grad = objective_param_gradient(net, obj, batch)
        h = 1e-4
        for p, g in zip(net.parameters(), grad.flat()):
            fd = np.empty_like(p)
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + h
                up, _ = objective_param_gradient(net, obj, batch)
                p[idx] = old - h
                dn, _ = objective_param_gradient(net, obj, batch)
                p[idx] = old
                fd[idx] = (up - dn) / (2 * h)
            worst = max(worst, _rel(g, fd))
    return worst


def check_true_solution(rng) -> float:
    worst = 0.0
    for d in (1, 3, 10):
        prob = sine_poisson(d)
        x = rng.uniform(0, 1, (200, d))
        b = sample_boundary(d, 5, Streams(d)["boundary"])
        loss = lse_loss(prob.solution, prob, x, b, 1000.0)
        scale = float(np.mean(poisson_g(x) ** 2))
        worst = max(worst, loss / scale)
    return worst


def check_scale_absorption(rng) -> float:
    net = init_network(NetworkSpec([3, 16, 16, 1], "srelu", 4, "D2", seed=3))
    x = rng.uniform(-1, 1, (1000, 3))
    return _rel(forward(net, x), forward(net.absorbed(), x))


def check_adam() -> float:
    theta = np.zeros(1)
    state = AdamState.zeros_like([theta])
    adam_step(state, [theta], [np.ones(1)], LrSchedule(0.1))
    expected = -0.1 / (1.0 + 1e-8)
    return abs(theta[0] - expected) / abs(expected)


def run_checks(seed: int = 0):
    """Yield ``(name, passed, detail)`` for each self-test."""
    rng = np.random.default_rng(seed)
    act = check_activations(rng)
    yield "activation derivatives vs finite differences", act <= 1e-6, f"max rel err {act:.2e} (tol 1e-6)"
    g, lap = check_bundle(rng)
    yield "input gradient vs finite differences", g <= 1e-5, f"rel err {g:.2e} (tol 1e-5)"
    yield "input Laplacian vs finite differences", lap <= 1e-4, f"rel err {lap:.2e} (tol 1e-4)"
    pg = check_param_gradients(rng)
    yield "parameter gradients (mse, ritz, lse)", pg <= 1e-4, f"max rel err {pg:.2e} (tol 1e-4)"
    tr = check_true_solution(rng)
    yield "LSE loss of the exact Poisson solution", tr <= 1e-10, f"relative loss {tr:.2e} (tol 1e-10)"
    sa = check_scale_absorption(rng)
    yield "scale absorption into W0", sa <= 1e-13, f"rel err {sa:.2e} (tol 1e-13)"
    ad = check_adam()
    yield "single Adam step", ad <= 1e-12, f"rel err {ad:.2e} (tol 1e-12)"
