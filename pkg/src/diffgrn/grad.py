"""Reverse-mode gradients of the unrolled GRN dynamics.

The computation graph is fixed by (genome size, steps), so the backward pass
is written out by hand against the intermediates stored on a ``Tape``.
Subgradient conventions: d|x|/dx = sign(x) with sign(0) = 0, and the clamp at
zero passes gradient only where the pre-clamp value was strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import dynamics
from .dynamics import SignatureSet, StepRecord
from .errors import EmptyBatch, ShapeMismatch
from .genome import Genome


@dataclass
class Tape:
    genome: Genome
    inputs: np.ndarray
    sig: SignatureSet
    w: np.ndarray
    records: list[StepRecord] = field(default_factory=list)
    output: np.ndarray | None = None

    def __len__(self):
        return len(self.records)

    def replay(self) -> np.ndarray:
        """Recompute the output from the recorded inputs."""
        return dynamics.unroll(self.genome, self.inputs, len(self.records), w=self.w)


@dataclass
class ParamGrads:
    d_id: np.ndarray
    d_enh: np.ndarray
    d_inh: np.ndarray
    d_beta: float
    d_delta: float

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.d_id, self.d_enh, self.d_inh, [self.d_beta, self.d_delta]])

    @classmethod
    def from_vector(cls, v: np.ndarray, n: int) -> "ParamGrads":
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (3 * n + 2,):
            raise ShapeMismatch(f"expected gradient vector of length {3 * n + 2}, got {v.shape}")
        return cls(v[:n].copy(), v[n : 2 * n].copy(), v[2 * n : 3 * n].copy(), float(v[-2]), float(v[-1]))


def forward_with_tape(genome: Genome, inputs, steps: int):
    """Forward pass identical to :func:`dynamics.unroll` that also returns a tape.

    ``inputs`` may be a single input vector or a ``(B, n_in)`` batch; the
    output has the matching leading shape.
    """
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    sig = dynamics.compute_signatures(genome)
    w = dynamics.weights(genome, sig)
    records: list[StepRecord] = []
    out = dynamics.unroll(genome, x[None, :] if single else x, steps, record=records, w=w)
    tape = Tape(genome, x[None, :] if single else x, sig, w, records, out)
    return (out[0] if single else out), tape


def backward(tape: Tape, genome: Genome, d_output) -> ParamGrads:
    """Gradient of ``sum(d_output * output)`` with respect to every genome parameter.

    For a batched tape ``d_output`` is ``(B, n_out)`` and contributions are
    summed over rows.
    """
    g_out = np.asarray(d_output, dtype=np.float64)
    b = tape.inputs.shape[0]
    g_out = g_out.reshape(b, -1) if g_out.ndim == 1 and b == 1 else g_out
    if g_out.shape != (b, genome.n_out):
        raise ShapeMismatch(f"d_output shape {g_out.shape} does not match {(b, genome.n_out)}")

    n, n_in, n_out = genome.n_proteins, genome.n_in, genome.n_out
    delta = genome.delta
    w = tape.w
    gc = np.zeros((b, n_out + genome.n_reg))
    gc[:, :n_out] = g_out
    d_w = np.zeros_like(w)
    d_delta = 0.0
    for rec in reversed(tape.records):
        # quotient rule for new = z / sum(z); rows reset to uniform are constant
        dz = (gc - np.sum(gc * rec.new, axis=1, keepdims=True)) / np.where(rec.degenerate[:, None], 1.0, rec.total)
        dz[rec.degenerate] = 0.0
        d_raw = np.where(rec.raw > 0.0, dz, 0.0)
        d_delta += float(np.sum(d_raw * rec.net))
        d_net = delta * d_raw
        d_w += d_net.T @ rec.sources
        d_src = d_net @ w
        gc = d_raw
        gc[:, n_out:] += d_src[:, n_in:]

    # w = S[non-input rows][:, source cols] / N
    d_s = np.zeros((n, n))
    src = dynamics.source_mask(genome)
    rows = np.arange(n_in, n)
    d_s[np.ix_(rows, np.flatnonzero(src))] = d_w / n

    sig = tape.sig
    beta = genome.beta
    diff_p = genome.enh[None, :] - genome.ids[:, None]
    diff_m = genome.inh[None, :] - genome.ids[:, None]
    d_ap = d_s * np.exp(sig.a_plus)
    d_am = -d_s * np.exp(sig.a_minus)
    d_beta = float(-np.sum(d_ap * np.abs(diff_p)) - np.sum(d_am * np.abs(diff_m)))
    d_dp = -beta * d_ap * np.sign(diff_p)
    d_dm = -beta * d_am * np.sign(diff_m)
    d_enh = d_dp.sum(axis=0)
    d_inh = d_dm.sum(axis=0)
    d_id = -d_dp.sum(axis=1) - d_dm.sum(axis=1)
    return ParamGrads(d_id, d_enh, d_inh, d_beta, d_delta)


def _as_arrays(batch) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(batch, tuple) and len(batch) == 2 and isinstance(batch[0], np.ndarray) and batch[0].ndim == 2:
        x, y = batch
    else:
        if len(batch) == 0:
            raise EmptyBatch("batch is empty")
        x = np.array([np.asarray(r[0], dtype=np.float64) for r in batch])
        y = np.array([np.asarray(r[1], dtype=np.float64).reshape(-1) for r in batch])
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] == 0:
        raise EmptyBatch("batch is empty")
    return x, y.reshape(x.shape[0], -1)


def loss_grad(genome: Genome, batch, steps: int) -> tuple[float, ParamGrads]:
    """Batch MSE and its gradient.

    ``batch`` is a sequence of ``(inputs, target)`` pairs or an ``(X, Y)``
    tuple of 2-d arrays.
    """
    x, y = _as_arrays(batch)
    if y.shape[1] != genome.n_out:
        raise ShapeMismatch(f"targets have {y.shape[1]} columns, genome has {genome.n_out} outputs")
    out, tape = forward_with_tape(genome, x, steps)
    resid = out - y
    loss = float(np.mean(resid**2))
    grads = backward(tape, genome, 2.0 * resid / resid.size)
    return loss, grads


def loss(genome: Genome, batch, steps: int) -> float:
    x, y = _as_arrays(batch)
    out = dynamics.unroll(genome, x, steps)
    return float(np.mean((out - y) ** 2))


# --- finite-difference verification ----------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    mean_rel_error: float
    n_checked: int
    n_skipped: int
    analytic: np.ndarray = field(repr=False)
    numeric: np.ndarray = field(repr=False)
    skipped: np.ndarray = field(repr=False)

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error <= tol


def _pattern(genome: Genome, x: np.ndarray, steps: int) -> bytes:
    """Fingerprint of every non-smooth branch taken by the forward pass."""
    rows = slice(genome.n_in, None)
    src = dynamics.source_mask(genome)
    sp = np.sign(genome.enh[None, src] - genome.ids[rows, None])
    sm = np.sign(genome.inh[None, src] - genome.ids[rows, None])
    records: list[StepRecord] = []
    dynamics.unroll(genome, x, steps, record=records)
    parts = [sp.astype(np.int8).tobytes(), sm.astype(np.int8).tobytes()]
    for r in records:
        parts.append(np.packbits(r.raw > 0.0).tobytes())
        parts.append(np.packbits(r.degenerate).tobytes())
    return b"|".join(parts)


def relative_errors(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Elementwise |a - n| / max(|a|, |n|, floor)."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def grad_check(genome: Genome, batch, steps: int, epsilon: float = 1e-5, floor: float = 1e-8) -> GradCheckReport:
    """Compare analytic gradients with central differences on every parameter.

    Parameters whose ``±2*epsilon`` neighbourhood crosses an |.| kink, a clamp
    boundary or a degenerate normalisation are skipped and counted.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    x, y = _as_arrays(batch)
    _, grads = loss_grad(genome, (x, y), steps)
    analytic = grads.to_vector()
    theta = genome.to_vector()
    base = _pattern(genome, x, steps)
    numeric = np.zeros_like(theta)
    skipped = np.zeros(theta.shape, dtype=bool)
    for k in range(theta.size):
        probes = {}
        for h in (-2 * epsilon, -epsilon, epsilon, 2 * epsilon):
            t = theta.copy()
            t[k] += h
            probes[h] = genome.with_vector(t)
        if any(_pattern(g, x, steps) != base for g in probes.values()):
            skipped[k] = True
            continue
        numeric[k] = (loss(probes[epsilon], (x, y), steps) - loss(probes[-epsilon], (x, y), steps)) / (2 * epsilon)
    rel = relative_errors(analytic[~skipped], numeric[~skipped], floor)
    return GradCheckReport(
        max_rel_error=float(rel.max()) if rel.size else 0.0,
        mean_rel_error=float(rel.mean()) if rel.size else 0.0,
        n_checked=int(rel.size),
        n_skipped=int(skipped.sum()),
        analytic=analytic,
        numeric=numeric,
        skipped=skipped,
    )


def random_instance(rng: np.random.Generator, n_proteins: int, batch_size: int = 4):
    """Random genome with ``n_proteins`` proteins plus a matching random batch."""
    if n_proteins < 2:
        raise ValueError("need at least 2 proteins (one input, one output)")
    n_in = int(rng.integers(1, n_proteins))
    n_out = int(rng.integers(1, n_proteins - n_in + 1))
    genome = Genome.random(n_in, n_out, n_proteins - n_in - n_out, rng)
    x = rng.uniform(0.0, 1.0, size=(batch_size, n_in))
    y = rng.uniform(0.0, 1.0, size=(batch_size, n_out))
    return genome, (x, y)


@dataclass
class SweepReport:
    trials: int
    max_rel_error: float
    mean_rel_error: float
    n_checked: int
    n_skipped: int

    def lines(self) -> list[str]:
        return [
            f"trials {self.trials}",
            f"max_rel_error {self.max_rel_error:.6e}",
            f"mean_rel_error {self.mean_rel_error:.6e}",
            f"checked {self.n_checked}",
            f"skipped {self.n_skipped}",
        ]


def sweep(seed: int, n_proteins: int | Sequence[int], steps: int | Sequence[int], trials: int, epsilon: float = 1e-5) -> SweepReport:
    """Run ``grad_check`` on ``trials`` random instances.

    ``n_proteins``/``steps`` given as ``(lo, hi)`` ranges are sampled
    uniformly (inclusive) per trial.
    """
    rng = np.random.default_rng(seed)
    worst, total, checked, skipped = 0.0, 0.0, 0, 0

    def pick(v):
        return int(v) if np.isscalar(v) else int(rng.integers(v[0], v[1] + 1))

    for _ in range(trials):
        genome, batch = random_instance(rng, pick(n_proteins))
        rep = grad_check(genome, batch, pick(steps), epsilon)
        worst = max(worst, rep.max_rel_error)
        total += rep.mean_rel_error * rep.n_checked
        checked += rep.n_checked
        skipped += rep.n_skipped
    return SweepReport(trials, worst, total / checked if checked else 0.0, checked, skipped)
