"""Interior, boundary and dataset sampling on top of :mod:`mscalednn.rng`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import FitTarget, eval_target
from .rng import Stream


def _box(lo, hi, d: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (d,))
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (d,))
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
        raise ValueError(f"degenerate box [{lo}, {hi}]")
    return lo, hi


def sample_interior(lo, hi, d: int, n: int, rng: Stream) -> np.ndarray:
    """``n`` i.i.d. uniform points of the box ``[lo, hi]^d`` (row-major draws)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lo, hi = _box(lo, hi, d)
    u = rng.uniform(n * d).reshape(n, d)
    return lo + (hi - lo) * u


def sample_boundary(d: int, n_tilde: int, rng: Stream) -> np.ndarray:
    """``n_tilde`` uniform points on each of the ``2d`` faces of ``[0, 1]^d``.

    Faces are visited axis by axis, side 0 before side 1.  Each face draws a
    full ``(n_tilde, d)`` block and then pins its axis, so every face costs
    the same number of draws.
    """
    if d < 1 or n_tilde < 1:
        raise ValueError("need d >= 1 and n_tilde >= 1")
    faces = []
    for axis in range(d):
        for side in (0.0, 1.0):
            pts = rng.uniform(n_tilde * d).reshape(n_tilde, d)
            pts[:, axis] = side
            faces.append(pts)
    return np.concatenate(faces)


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    split: str = "train"

    def __post_init__(self):
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs and labels differ in length")

    def __len__(self) -> int:
        return self.labels.shape[0]


def make_dataset(target: FitTarget, size: int, domain, rng: Stream, split: str = "train") -> Dataset:
    """Sample a labeled set.

    Points are drawn in the target's intrinsic coordinates from ``domain``
    (a ``(lo, hi)`` pair), labeled there, and embedded when the target is
    ``embed60``.
    """
    lo, hi = domain
    t = sample_interior(lo, hi, target.intrinsic_dim, size, rng)
    labels = np.asarray(eval_target(target, t), dtype=np.float64)
    return Dataset(target.embed(t), labels, split)


class Batcher:
    """Mini-batches over a fixed dataset.

    Each epoch draws one permutation and yields contiguous slices of it; the
    last slice may be short.  A batch size equal to the dataset size is full
    batch: one batch per epoch, in stored order, with no draws.
    """

    def __init__(self, dataset: Dataset, batch_size: int, rng: Stream):
        if batch_size < 1 or batch_size > len(dataset):
            raise ValueError(f"batch size {batch_size} must be in 1..{len(dataset)}")
        self.dataset = dataset
        self.batch_size = batch_size
        self.rng = rng

    @property
    def full_batch(self) -> bool:
        return self.batch_size == len(self.dataset)

    def epoch(self):
        ds = self.dataset
        if self.full_batch:
            yield ds.inputs, ds.labels
            return
        order = self.rng.permutation(len(ds))
        for start in range(0, len(ds), self.batch_size):
            idx = order[start : start + self.batch_size]
            yield ds.inputs[idx], ds.labels[idx]


def next_batch(batcher: Batcher):
    """First batch of a fresh epoch (convenience for one-off use)."""
    return next(iter(batcher.epoch()))
