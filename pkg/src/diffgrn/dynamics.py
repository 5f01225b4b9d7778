"""GRN concentration dynamics.

Two independent implementations live here: a vectorised matrix form used for
training and evolution, and a plain-Python scalar form kept as a reference.

One update with constant inputs ``x``:

    c[inputs] <- x
    g_i = 1/N sum_j c_j exp(-beta |enh_j - id_i|)     (j over inputs + regulatory)
    h_i = 1/N sum_j c_j exp(-beta |inh_j - id_i|)
    raw_i = max(0, c_i + delta (g_i - h_i))           (i over outputs + regulatory)
    c[non-inputs] <- raw / sum(raw)

Output proteins never act as sources. If every raw value is zero the
non-input block is reset to uniform and the event is counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ShapeMismatch
from .genome import Genome


@dataclass(frozen=True)
class SignatureSet:
    a_plus: np.ndarray
    a_minus: np.ndarray
    s: np.ndarray


@dataclass
class GrnState:
    concentrations: np.ndarray
    degenerate: int = 0  # number of zero-sum normalizations seen so far


def compute_signatures(genome: Genome) -> SignatureSet:
    """Affinity and signature matrices, indexed ``[target i, source j]``."""
    a_plus = -genome.beta * np.abs(genome.enh[None, :] - genome.ids[:, None])
    a_minus = -genome.beta * np.abs(genome.inh[None, :] - genome.ids[:, None])
    return SignatureSet(a_plus, a_minus, np.exp(a_plus) - np.exp(a_minus))


def source_mask(genome: Genome) -> np.ndarray:
    """Boolean mask of proteins that act as sources (inputs and regulatory)."""
    mask = np.ones(genome.n_proteins, dtype=bool)
    mask[genome.n_in : genome.n_in + genome.n_out] = False
    return mask


def influence(state: GrnState, sig: SignatureSet, n: int, sources: np.ndarray | None = None):
    """Enhancing and inhibiting influence vectors ``(g, h)``.

    ``sources`` optionally masks which proteins contribute; by default every
    protein does.
    """
    c = np.asarray(state.concentrations, dtype=np.float64)
    if sources is not None:
        c = np.where(sources, c, 0.0)
    g = np.exp(sig.a_plus) @ c / n
    h = np.exp(sig.a_minus) @ c / n
    return g, h


def reset(genome: Genome) -> GrnState:
    c = np.zeros(genome.n_proteins)
    n_free = genome.n_out + genome.n_reg
    if n_free:
        c[genome.n_in :] = 1.0 / n_free
    return GrnState(c)


def _check_inputs(genome: Genome, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape[-1:] != (genome.n_in,):
        raise ShapeMismatch(f"expected {genome.n_in} inputs, got shape {x.shape}")
    return x


def step(genome: Genome, state: GrnState, inputs, sig: SignatureSet | None = None) -> GrnState:
    """One synchronous update of a single GRN state; returns a new state."""
    x = _check_inputs(genome, inputs)
    sig = compute_signatures(genome) if sig is None else sig
    c = np.array(state.concentrations, dtype=np.float64)
    c[: genome.n_in] = x
    g, h = influence(GrnState(c), sig, genome.n_proteins, source_mask(genome))
    free = slice(genome.n_in, None)
    raw = np.maximum(0.0, c[free] + genome.delta * (g[free] - h[free]))
    total = raw.sum()
    degenerate = state.degenerate
    if total > 0.0:
        c[free] = raw / total
    elif raw.size:
        c[free] = 1.0 / raw.size
        degenerate += 1
    return GrnState(c, degenerate)


class StepRecord(NamedTuple):
    """Intermediate values of one batched update (rows are samples)."""

    prev: np.ndarray  # non-input concentrations before the update
    sources: np.ndarray  # source concentrations used (inputs + regulatory)
    net: np.ndarray  # (g - h) for non-input proteins
    raw: np.ndarray  # pre-clamp values
    total: np.ndarray  # normalisation sums, shape (B, 1)
    degenerate: np.ndarray  # rows reset to uniform
    new: np.ndarray  # non-input concentrations after the update


def weights(genome: Genome, sig: SignatureSet | None = None) -> np.ndarray:
    """Signature block mapping sources to non-input targets, scaled by 1/N."""
    sig = compute_signatures(genome) if sig is None else sig
    return sig.s[genome.n_in :][:, source_mask(genome)] / genome.n_proteins


def unroll(genome: Genome, inputs, steps: int, record: list | None = None, w: np.ndarray | None = None) -> np.ndarray:
    """Batched forward pass from the reset state.

    ``inputs`` has shape ``(B, n_in)`` (or ``(n_in,)``). Returns the output
    concentrations after ``steps`` updates, shape ``(B, n_out)``. When
    ``record`` is a list, one ``StepRecord`` per update is appended to it.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = _check_inputs(genome, inputs)
    x = np.atleast_2d(x)
    b = x.shape[0]
    n_free = genome.n_out + genome.n_reg
    w = weights(genome) if w is None else w
    c = np.full((b, n_free), 1.0 / n_free)
    for _ in range(steps):
        src = np.concatenate([x, c[:, genome.n_out :]], axis=1)
        net = src @ w.T
        raw = c + genome.delta * net
        z = np.maximum(raw, 0.0)
        total = z.sum(axis=1, keepdims=True)
        dead = total[:, 0] <= 0.0
        if dead.any():
            safe = np.where(total > 0.0, total, 1.0)
            new = np.where(dead[:, None], 1.0 / n_free, z / safe)
        else:
            new = z / total
        if record is not None:
            record.append(StepRecord(c, src, net, raw, total, dead, new))
        c = new
    return c[:, : genome.n_out]


def run(genome: Genome, inputs, steps: int) -> np.ndarray:
    """Reset, apply ``steps`` updates with constant inputs, return output concentrations."""
    return unroll(genome, np.asarray(inputs, dtype=np.float64)[None, :], steps)[0]


def run_batch(genome: Genome, inputs, steps: int) -> np.ndarray:
    return unroll(genome, inputs, steps)


# --- scalar reference -------------------------------------------------------


def signatures_reference(genome: Genome) -> SignatureSet:
    n = genome.n_proteins
    ids, enh, inh, beta = genome.ids.tolist(), genome.enh.tolist(), genome.inh.tolist(), genome.beta
    ap = [[-beta * abs(enh[j] - ids[i]) for j in range(n)] for i in range(n)]
    am = [[-beta * abs(inh[j] - ids[i]) for j in range(n)] for i in range(n)]
    s = [[math.exp(ap[i][j]) - math.exp(am[i][j]) for j in range(n)] for i in range(n)]
    return SignatureSet(np.array(ap).reshape(n, n), np.array(am).reshape(n, n), np.array(s).reshape(n, n))


def step_reference(genome: Genome, conc: Sequence[float], inputs: Sequence[float]) -> list[float]:
    """Straight-line scalar version of :func:`step`."""
    n = genome.n_proteins
    ids, enh, inh = genome.ids.tolist(), genome.enh.tolist(), genome.inh.tolist()
    c = list(conc)
    for k in range(genome.n_in):
        c[k] = float(inputs[k])
    is_output = [genome.n_in <= j < genome.n_in + genome.n_out for j in range(n)]
    raw = []
    for i in range(genome.n_in, n):
        g = h = 0.0
        for j in range(n):
            if is_output[j]:
                continue
            g += c[j] * math.exp(-genome.beta * abs(enh[j] - ids[i]))
            h += c[j] * math.exp(-genome.beta * abs(inh[j] - ids[i]))
        g /= n
        h /= n
        raw.append(max(0.0, c[i] + genome.delta * (g - h)))
    total = sum(raw)
    for k, r in enumerate(raw):
        c[genome.n_in + k] = r / total if total > 0.0 else 1.0 / len(raw)
    return c


def run_reference(genome: Genome, inputs: Sequence[float], steps: int) -> list[list[float]]:
    """Scalar trajectory; element ``t`` is the full state after ``t + 1`` updates."""
    c = reset(genome).concentrations.tolist()
    out = []
    for _ in range(steps):
        c = step_reference(genome, c, inputs)
        out.append(list(c))
    return out
