"""Adam with box projection, the mini-batch training loop and MSE evaluation."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import dynamics
from .errors import EmptyDataset, EmptyVectors, LengthMismatch, ShapeMismatch
from .genome import Bounds, Genome
from .grad import ParamGrads, loss_grad

__all__ = ["AdamState", "Bounds", "adam_step", "mse", "train", "evaluate", "predict", "batch_slices"]


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.001
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n_params: int, lr: float = 0.001, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params), 0, lr, b1, b2, eps)

    @classmethod
    def for_genome(cls, genome: Genome, **hyper) -> "AdamState":
        return cls.zeros(3 * genome.n_proteins + 2, **hyper)


def adam_step(genome: Genome, grads: ParamGrads, st: AdamState, bounds: Bounds = Bounds()) -> tuple[Genome, AdamState]:
    """One Adam update followed by clipping every parameter into its box."""
    g = grads.to_vector() if isinstance(grads, ParamGrads) else np.asarray(grads, dtype=np.float64)
    theta = genome.to_vector()
    if g.shape != theta.shape or st.m.shape != theta.shape:
        raise ShapeMismatch(f"parameter/gradient/state sizes differ: {theta.shape}, {g.shape}, {st.m.shape}")
    t = st.t + 1
    m = st.b1 * st.m + (1.0 - st.b1) * g
    v = st.b2 * st.v + (1.0 - st.b2) * (g * g)
    m_hat = m / (1.0 - st.b1**t)
    v_hat = v / (1.0 - st.b2**t)
    theta = theta - st.lr * m_hat / (np.sqrt(v_hat) + st.eps)
    lo, hi = bounds.vectors(genome.n_proteins)
    theta = np.clip(theta, lo, hi)
    return genome.with_vector(theta), replace(st, m=m, v=v, t=t)


def mse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.size == 0 or y.size == 0:
        raise EmptyVectors("mse of empty vectors")
    if p.shape != y.shape:
        raise LengthMismatch(f"prediction shape {p.shape} != target shape {y.shape}")
    return float(np.mean((p - y) ** 2))


def _xy(dataset) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(dataset, "x") and hasattr(dataset, "y"):
        x, y = dataset.x, dataset.y
    else:
        x, y = dataset
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] == 0:
        raise EmptyDataset("dataset has no rows")
    return x, y.reshape(x.shape[0], -1)


def predict(genome: Genome, dataset, steps: int) -> np.ndarray:
    x, _ = _xy(dataset)
    return dynamics.unroll(genome, x, steps)


def evaluate(genome: Genome, dataset, steps: int) -> float:
    """MSE over every row and output, state reset per row."""
    x, y = _xy(dataset)
    return mse(dynamics.unroll(genome, x, steps), y)


def batch_slices(n: int, batch_size: int) -> list[slice]:
    return [slice(i, min(i + batch_size, n)) for i in range(0, n, batch_size)]


def train(
    genome: Genome,
    train_set,
    epochs: int,
    batch_size: int = 32,
    steps: int = 3,
    rng_seed=0,
    bounds: Bounds = Bounds(),
    adam: dict | None = None,
    record_curve: bool = True,
    test_set=None,
):
    """Mini-batch Adam training.

    Returns ``(trained_genome, curve)`` where ``curve`` holds the full
    training-set MSE after each epoch (or ``(train, test)`` pairs when
    ``test_set`` is given). ``epochs=0`` returns the genome unchanged.
    """
    x, y = _xy(train_set)
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    rng = np.random.default_rng(rng_seed)
    st = AdamState.for_genome(genome, **(adam or {}))
    curve = []
    n = x.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for sl in batch_slices(n, batch_size):
            idx = order[sl]
            _, grads = loss_grad(genome, (x[idx], y[idx]), steps)
            genome, st = adam_step(genome, grads, st, bounds)
        if record_curve:
            tr = evaluate(genome, (x, y), steps)
            curve.append(tr if test_set is None else (tr, evaluate(genome, test_set, steps)))
    return genome, curve


def write_curve(path, curve) -> None:
    """Learning-curve CSV: ``epoch,train_mse`` (plus ``test_mse`` for paired entries)."""
    paired = bool(curve) and isinstance(curve[0], tuple)
    lines = ["epoch,train_mse,test_mse" if paired else "epoch,train_mse"]
    for i, c in enumerate(curve, start=1):
        lines.append(f"{i},{c[0]!r},{c[1]!r}" if paired else f"{i},{c!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
