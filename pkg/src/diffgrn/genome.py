"""GRN genomes: proteins, dynamics constants, parameter bounds and the text format."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, ShapeMismatch

FORMAT_TAG = "grn"
FORMAT_VERSION = "v1"


class Kind(enum.Enum):
    INPUT = "input"
    OUTPUT = "output"
    REGULATORY = "regulatory"


@dataclass(frozen=True)
class Protein:
    id: float
    enh: float
    inh: float
    kind: Kind

    def __post_init__(self):
        for name in ("id", "enh", "inh"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"protein tag {name}={v} outside [0, 1]")

    @property
    def tags(self) -> tuple[float, float, float]:
        return (self.id, self.enh, self.inh)


@dataclass(frozen=True)
class Bounds:
    """Box constraints for the learnable/evolvable parameters."""

    tag_lo: float = 0.0
    tag_hi: float = 1.0
    beta_lo: float = 0.05
    beta_hi: float = 2.0
    delta_lo: float = 0.05
    delta_hi: float = 2.0

    def __post_init__(self):
        for lo, hi in ((self.tag_lo, self.tag_hi), (self.beta_lo, self.beta_hi), (self.delta_lo, self.delta_hi)):
            if not lo < hi:
                raise ValueError(f"bounds require lo < hi, got [{lo}, {hi}]")

    def vectors(self, n_proteins: int) -> tuple[np.ndarray, np.ndarray]:
        """Lower/upper bound vectors aligned with ``Genome.to_vector``."""
        lo = np.full(3 * n_proteins + 2, self.tag_lo)
        hi = np.full(3 * n_proteins + 2, self.tag_hi)
        lo[-2], hi[-2] = self.beta_lo, self.beta_hi
        lo[-1], hi[-1] = self.delta_lo, self.delta_hi
        return lo, hi


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Genome:
    """Immutable GRN genome.

    Proteins are stored as three tag vectors ordered inputs, outputs, then
    regulatory proteins; protein kind is implied by position.
    """

    ids: np.ndarray
    enh: np.ndarray
    inh: np.ndarray
    n_in: int
    n_out: int
    beta: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "ids", _frozen(self.ids))
        object.__setattr__(self, "enh", _frozen(self.enh))
        object.__setattr__(self, "inh", _frozen(self.inh))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "delta", float(self.delta))
        n = self.ids.shape[0]
        if self.enh.shape[0] != n or self.inh.shape[0] != n:
            raise ShapeMismatch("id/enh/inh vectors must have equal length")
        if self.n_in < 0 or self.n_out < 0 or self.n_in + self.n_out > n:
            raise ShapeMismatch(f"n_in={self.n_in}, n_out={self.n_out} incompatible with {n} proteins")

    @property
    def n_proteins(self) -> int:
        return self.ids.shape[0]

    @property
    def n_reg(self) -> int:
        return self.n_proteins - self.n_in - self.n_out

    @property
    def proteins(self) -> list[Protein]:
        kinds = [Kind.INPUT] * self.n_in + [Kind.OUTPUT] * self.n_out + [Kind.REGULATORY] * self.n_reg
        return [Protein(float(a), float(b), float(c), k) for a, b, c, k in zip(self.ids, self.enh, self.inh, kinds)]

    @classmethod
    def from_proteins(cls, proteins: Sequence[Protein], beta: float, delta: float) -> "Genome":
        order = {Kind.INPUT: 0, Kind.OUTPUT: 1, Kind.REGULATORY: 2}
        ranks = [order[p.kind] for p in proteins]
        if ranks != sorted(ranks):
            raise ShapeMismatch("proteins must be ordered inputs, outputs, regulatory")
        return cls(
            ids=[p.id for p in proteins],
            enh=[p.enh for p in proteins],
            inh=[p.inh for p in proteins],
            n_in=ranks.count(0),
            n_out=ranks.count(1),
            beta=beta,
            delta=delta,
        )

    @classmethod
    def random(cls, n_in: int, n_out: int, n_reg: int, rng: np.random.Generator, bounds: Bounds = Bounds()) -> "Genome":
        n = n_in + n_out + n_reg
        tags = rng.uniform(bounds.tag_lo, bounds.tag_hi, size=(3, n))
        beta = rng.uniform(bounds.beta_lo, bounds.beta_hi)
        delta = rng.uniform(bounds.delta_lo, bounds.delta_hi)
        return cls(tags[0], tags[1], tags[2], n_in, n_out, beta, delta)

    # flat parameter layout: [ids..., enh..., inh..., beta, delta]
    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.ids, self.enh, self.inh, [self.beta, self.delta]])

    def with_vector(self, theta: np.ndarray) -> "Genome":
        n = self.n_proteins
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (3 * n + 2,):
            raise ShapeMismatch(f"expected parameter vector of length {3 * n + 2}, got {theta.shape}")
        return Genome(theta[:n], theta[n : 2 * n], theta[2 * n : 3 * n], self.n_in, self.n_out, theta[-2], theta[-1])

    def replace(self, **changes) -> "Genome":
        fields = dict(ids=self.ids, enh=self.enh, inh=self.inh, n_in=self.n_in, n_out=self.n_out, beta=self.beta, delta=self.delta)
        fields.update(changes)
        return Genome(**fields)

    def is_valid(self, bounds: Bounds = Bounds(), max_regulatory: int | None = None) -> bool:
        tags = np.concatenate([self.ids, self.enh, self.inh])
        ok = bool(np.all(tags >= bounds.tag_lo) and np.all(tags <= bounds.tag_hi))
        ok &= bounds.beta_lo <= self.beta <= bounds.beta_hi
        ok &= bounds.delta_lo <= self.delta <= bounds.delta_hi
        if max_regulatory is not None:
            ok &= self.n_reg <= max_regulatory
        return ok

    def __eq__(self, other) -> bool:
        if not isinstance(other, Genome):
            return NotImplemented
        return (
            self.n_in == other.n_in
            and self.n_out == other.n_out
            and self.beta == other.beta
            and self.delta == other.delta
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.enh, other.enh)
            and np.array_equal(self.inh, other.inh)
        )

    def __hash__(self):
        return hash((self.n_in, self.n_out, self.beta, self.delta, self.ids.tobytes(), self.enh.tobytes(), self.inh.tobytes()))


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def dumps(genome: Genome) -> str:
    lines = [f"{FORMAT_TAG} {FORMAT_VERSION} {genome.n_in} {genome.n_out} {genome.n_reg} {_fmt(genome.beta)} {_fmt(genome.delta)}"]
    for p in genome.proteins:
        lines.append(f"{p.kind.value} {_fmt(p.id)} {_fmt(p.enh)} {_fmt(p.inh)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Genome:
    """Parse the line-oriented genome format; errors carry 1-based line numbers."""
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln]
    if not lines:
        raise ParseError("empty genome file", 1)
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 7 or parts[0] != FORMAT_TAG or parts[1] != FORMAT_VERSION:
        raise ParseError(f"bad header {header!r}, expected 'grn v1 <n_in> <n_out> <n_reg> <beta> <delta>'", lineno)
    try:
        n_in, n_out, n_reg = (int(x) for x in parts[2:5])
        beta, delta = float(parts[5]), float(parts[6])
    except ValueError as exc:
        raise ParseError(f"bad header value: {exc}", lineno) from None
    if min(n_in, n_out, n_reg) < 0:
        raise ParseError("negative protein count", lineno)
    body = lines[1:]
    if len(body) != n_in + n_out + n_reg:
        last = body[-1][0] if body else lineno
        raise ParseError(f"expected {n_in + n_out + n_reg} protein lines, found {len(body)}", last)
    expected = [Kind.INPUT] * n_in + [Kind.OUTPUT] * n_out + [Kind.REGULATORY] * n_reg
    proteins = []
    for (ln, line), kind in zip(body, expected):
        fields = line.split()
        if len(fields) != 4:
            raise ParseError(f"expected '<kind> <id> <enh> <inh>', got {line!r}", ln)
        if fields[0] != kind.value:
            raise ParseError(f"expected kind {kind.value!r}, got {fields[0]!r}", ln, 1)
        vals = []
        for col, tok in enumerate(fields[1:], start=2):
            try:
                vals.append(float(tok))
            except ValueError:
                raise ParseError(f"not a number: {tok!r}", ln, col) from None
        try:
            proteins.append(Protein(*vals, kind))
        except ValueError as exc:
            raise ParseError(str(exc), ln) from None
    return Genome.from_proteins(proteins, beta, delta) if proteins else Genome([], [], [], 0, 0, beta, delta)


def save(genome: Genome, path) -> None:
    Path(path).write_text(dumps(genome))


def load(path) -> Genome:
    return loads(Path(path).read_text())

