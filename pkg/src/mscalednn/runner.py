"""Run configured experiments and write their metrics.

An epoch is one pass over the fixed training set for ``fit`` tasks and one
resample-and-update step for ``pde`` tasks.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import functools
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, resolve_scales
from .errors import NonFiniteLossError
from .losses import FitMSE, NetworkField, fit_mse_loss, make_objective, mse_vs_true
from .network import NetworkSpec, evaluate_objective, init_network, save_checkpoint
from .optimizer import AdamState, LrSchedule, adam_step, lr_at
from .problems import sine_poisson
from .report import Row, RunRecord, emit_csv, emit_svg_plot
from .rng import GENERATOR_VERSION, Streams
from .sampling import Batcher, make_dataset, sample_boundary, sample_interior

log = logging.getLogger(__name__)


@functools.cache
def _keep_heap_memory() -> None:
    """Stop glibc from handing large freed blocks back to the kernel.

    Every training step allocates and frees arrays of several MB.  With the
    default thresholds each one is a fresh mmap, and refaulting its pages
    cost about a third of the step time on the 3-512-1 fit.
    """
    if not sys.platform.startswith("linux"):
        return
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6")
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return
    m_trim_threshold, m_top_pad, m_mmap_threshold = -1, -2, -3
    mallopt(m_mmap_threshold, 32 << 20)
    mallopt(m_trim_threshold, 1 << 30)
    mallopt(m_top_pad, 64 << 20)


def build_network(cfg: ExperimentConfig, streams: Streams):
    scales = resolve_scales(cfg.scales, cfg.widths[1])
    spec = NetworkSpec(cfg.widths, cfg.activation, scales, cfg.init, cfg.seed)
    return init_network(spec, streams["init"])


def _param_norm(net) -> float:
    return float(np.sqrt(sum(np.sum(p * p) for p in net.parameters())))


def fixed_eval_set(cfg: ExperimentConfig, streams: Streams) -> np.ndarray:
    """Interior and boundary points in the same proportion as one training step."""
    per_face = max(1, round(cfg.n_tilde * cfg.eval_size / cfg.n))
    interior = sample_interior(0.0, 1.0, cfg.d, cfg.eval_size, streams["eval"])
    boundary = sample_boundary(cfg.d, per_face, streams["eval"])
    return np.concatenate([interior, boundary])


def run_experiment(cfg: ExperimentConfig, out_dir=None, write: bool = True) -> RunRecord:
    """Train one configuration; returns its per-epoch record.

    With ``write`` the CSV, a JSON metadata file and the final network
    checkpoint are written to ``out_dir`` as ``<label>.csv``,
    ``<label>.meta.json`` and ``<label>.ckpt``.
    """
    if cfg.variants:
        raise ValueError("config has variants; run each of cfg.expand() or use run_config")
    _keep_heap_memory()
    label = cfg.label or cfg.name
    out = Path(out_dir or cfg.out or Path("runs") / cfg.name)
    streams = Streams(cfg.seed)
    net = build_network(cfg, streams)
    schedule = LrSchedule(cfg.lr0, cfg.lr_decay, cfg.decay_kind)
    adam = AdamState.zeros_like(net.parameters(), beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    record = RunRecord(label)
    opts = dict(chunk_size=cfg.chunk_size, threads=cfg.threads)
    field = NetworkField(net, chunk_size=cfg.chunk_size)

    if write:
        out.mkdir(parents=True, exist_ok=True)
        _write_meta(cfg, out / f"{label}.meta.json")

    def fail(epoch, loss):
        if write:
            emit_csv(record, out / f"{label}.csv")
        raise NonFiniteLossError(epoch, _param_norm(net), loss)

    start = time.perf_counter()
    if cfg.task == "fit":
        target = cfg.fit_target()
        train = make_dataset(target, cfg.train_size, cfg.domain, streams["data"], "train")
        test = make_dataset(target, cfg.test_size, cfg.domain, streams["data"], "test") if cfg.test_size else None
        batcher = Batcher(train, cfg.batch_size, streams["shuffle"])
        objective = FitMSE()
        for epoch in range(1, cfg.epochs + 1):
            total = 0.0
            for xb, yb in batcher.epoch():
                res = evaluate_objective(net, objective, (xb, yb), **opts)
                if not np.isfinite(res.value):
                    fail(epoch, res.value)
                total += res.value * len(yb)
                adam_step(adam, net.parameters(), res.grad.flat(), schedule)
            if epoch % cfg.eval_every and epoch != cfg.epochs:
                continue
            row = Row(epoch, lr_at(schedule, adam.t - 1), train_loss=total / len(train))
            if test is not None:
                row.test_loss = fit_mse_loss(field, test.inputs, test.labels)
            _stamp(row, cfg, start)
            record.rows.append(row)
    else:
        problem = sine_poisson(cfg.d)
        objective = make_objective(cfg.loss, problem, cfg.beta)
        truth = problem.solution
        eval_pts = fixed_eval_set(cfg, streams) if cfg.mse_mode == "fixed" else None
        for epoch in range(1, cfg.epochs + 1):
            interior = sample_interior(0.0, 1.0, cfg.d, cfg.n, streams["interior"])
            boundary = sample_boundary(cfg.d, cfg.n_tilde, streams["boundary"])
            res = evaluate_objective(net, objective, (interior, boundary), **opts)
            if not np.isfinite(res.value):
                fail(epoch, res.value)
            logged = epoch % cfg.eval_every == 0 or epoch == cfg.epochs
            if logged and eval_pts is None:
                # metric over this step's S and S~, before the update
                u = np.concatenate([res.values["interior"], res.values["boundary"]])
                pts = np.concatenate([interior, boundary])
                step_mse = float(np.mean((u - truth.value(pts)) ** 2))
            adam_step(adam, net.parameters(), res.grad.flat(), schedule)
            if not logged:
                continue
            row = Row(epoch, lr_at(schedule, adam.t - 1), train_loss=res.value)
            row.mse_true = step_mse if eval_pts is None else mse_vs_true(field, eval_pts, truth)
            _stamp(row, cfg, start)
            record.rows.append(row)

    if write:
        emit_csv(record, out / f"{label}.csv")
        save_checkpoint(net, out / f"{label}.ckpt")
    log.info("%s: %d epochs in %.1fs", label, cfg.epochs, time.perf_counter() - start)
    return record


def _stamp(row: Row, cfg: ExperimentConfig, start: float) -> None:
    if cfg.record_wall_ms:
        row.wall_ms = (time.perf_counter() - start) * 1e3


def _write_meta(cfg: ExperimentConfig, path: Path) -> None:
    meta = {
        "artifact": "mscalednn",
        "artifact_version": __version__,
        "generator": GENERATOR_VERSION,
        "config_hash": cfg.digest(),
        "label": cfg.label or cfg.name,
        "config": cfg.to_dict(),
    }
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def run_config(cfg: ExperimentConfig, out_dir=None, plot: bool = True) -> list[RunRecord]:
    """Run every variant of ``cfg``; also writes ``plot.svg`` when there is data."""
    out = Path(out_dir or cfg.out or Path("runs") / cfg.name)
    records = [run_experiment(run, out) for run in cfg.expand()]
    if plot and any(r.rows for r in records):
        ylabel = "MSE(h, u_true)" if cfg.task == "pde" else "loss"
        emit_svg_plot(records, out / "plot.svg", title=cfg.name, ylabel=ylabel)
    return records
