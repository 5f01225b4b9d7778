"""Speciated genetic algorithm for GRN genomes (GRNEAT-style).

Small-network initialisation, speciation by genome distance, crossover with
regulatory proteins aligned by tag distance, and add/modify/delete mutation.
Fitness is the training-set MSE after ``fitness_epochs`` of gradient
training; offspring inherit the untrained genome.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ShapeMismatch
from .genome import Bounds, Genome, Protein
from .optim import evaluate, train


@dataclass(frozen=True)
class LearnConfig:
    """Hyperparameters of the inner gradient-training pass."""

    lr: float = 0.001
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32

    @property
    def adam(self) -> dict:
        return dict(lr=self.lr, b1=self.b1, b2=self.b2, eps=self.eps)


@dataclass(frozen=True)
class EvoConfig:
    population_size: int = 50
    crossover_rate: float = 0.25
    mutation_rate: float = 0.75
    p_add: float = 0.5
    p_modify: float = 0.25
    p_delete: float = 0.25
    fitness_epochs: int = 0
    generations: int = 50
    speciation_threshold: float = 0.15
    tournament_size: int = 3
    elitism: int = 1
    max_regulatory: int = 50
    rng_seed: int = 0
    bounds: Bounds = field(default_factory=Bounds)

    def __post_init__(self):
        if not math.isclose(self.p_add + self.p_modify + self.p_delete, 1.0, abs_tol=1e-9):
            raise ValueError("p_add + p_modify + p_delete must equal 1")
        if not math.isclose(self.crossover_rate + self.mutation_rate, 1.0, abs_tol=1e-9):
            raise ValueError("crossover_rate + mutation_rate must equal 1")
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.fitness_epochs < 0 or self.generations < 1 or self.tournament_size < 1:
            raise ValueError("fitness_epochs >= 0, generations >= 1 and tournament_size >= 1 required")
        if not 0 <= self.elitism < self.population_size:
            raise ValueError("elitism must be in [0, population_size)")


@dataclass
class Individual:
    genome: Genome
    fitness: float | None = None  # post-training MSE, lower is better
    pre_mse: float | None = None  # MSE of the untrained genome
    trained_genome: Genome | None = None

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None


@dataclass
class Species:
    representative: Genome
    members: list[Individual]
    stagnation: int = 0
    best_fitness: float = math.inf


@dataclass
class GenerationStats:
    generation: int
    best_pre_mse: float
    mean_pre_mse: float
    best_post_mse: float
    mean_post_mse: float
    species_count: int
    best_n_reg: int
    best: Individual = field(repr=False)
    post_mses: list[float] = field(default_factory=list, repr=False)  # whole population, not logged

    CSV_HEADER = "generation,best_pre_mse,mean_pre_mse,best_post_mse,mean_post_mse,species_count,best_n_reg"

    def csv_row(self) -> str:
        return (
            f"{self.generation},{self.best_pre_mse!r},{self.mean_pre_mse!r},"
            f"{self.best_post_mse!r},{self.mean_post_mse!r},{self.species_count},{self.best_n_reg}"
        )


# --- initialisation and distances -------------------------------------------


def init_population(cfg: EvoConfig, n_in: int, n_out: int, rng: np.random.Generator) -> list[Individual]:
    if n_in < 1 or n_out < 1:
        raise ValueError("n_in and n_out must be >= 1")
    return [Individual(Genome.random(n_in, n_out, 1, rng, cfg.bounds)) for _ in range(cfg.population_size)]


def _tags(p) -> np.ndarray:
    return np.asarray(p.tags if isinstance(p, Protein) else p, dtype=np.float64)


def protein_distance(p, q) -> float:
    """Mean absolute tag difference, in [0, 1]."""
    return float(np.abs(_tags(p) - _tags(q)).sum() / 3.0)


def _reg_tags(g: Genome) -> np.ndarray:
    start = g.n_in + g.n_out
    return np.stack([g.ids[start:], g.enh[start:], g.inh[start:]], axis=1)


def align(a_tags: np.ndarray, b_tags: np.ndarray) -> list[tuple[int, int, float]]:
    """Greedy one-to-one matching of two protein sets by ascending distance.

    Ties are broken on the tag values themselves, so swapping the two sets
    yields the mirrored matching.
    """
    if len(a_tags) == 0 or len(b_tags) == 0:
        return []
    d = np.abs(a_tags[:, None, :] - b_tags[None, :, :]).sum(axis=2) / 3.0
    a_keys = [tuple(t) for t in a_tags.tolist()]
    b_keys = [tuple(t) for t in b_tags.tolist()]
    cand = sorted(
        ((d[i, j], min(a_keys[i], b_keys[j]), max(a_keys[i], b_keys[j]), i, j) for i in range(len(a_keys)) for j in range(len(b_keys))),
        key=lambda c: c[:3],
    )
    used_a, used_b, pairs = set(), set(), []
    for dist, _, _, i, j in cand:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((i, j, float(dist)))
        if len(pairs) == min(len(a_keys), len(b_keys)):
            break
    return pairs


def _check_compatible(a: Genome, b: Genome):
    if a.n_in != b.n_in or a.n_out != b.n_out:
        raise ShapeMismatch(f"genomes differ in input/output counts: ({a.n_in}, {a.n_out}) vs ({b.n_in}, {b.n_out})")


def genome_distance(a: Genome, b: Genome, bounds: Bounds = Bounds()) -> float:
    """Aligned regulatory tag distance + size difference + dynamics-constant difference."""
    _check_compatible(a, b)
    pairs = align(_reg_tags(a), _reg_tags(b))
    tag_term = sum(p[2] for p in pairs) / len(pairs) if pairs else 0.0
    size_term = 0.5 * abs(a.n_reg - b.n_reg) / max(a.n_reg, b.n_reg, 1)
    const_term = (abs(a.beta - b.beta) + abs(a.delta - b.delta)) / (2.0 * (bounds.beta_hi - bounds.beta_lo))
    return tag_term + size_term + const_term


def speciate(
    population: Sequence[Individual],
    threshold: float,
    previous_species: Sequence[Species] = (),
    bounds: Bounds = Bounds(),
) -> list[Species]:
    """Assign each individual to the first species whose representative is within ``threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    species = [Species(s.representative, [], s.stagnation, s.best_fitness) for s in previous_species]
    for ind in population:
        for sp in species:
            if genome_distance(ind.genome, sp.representative, bounds) <= threshold:
                sp.members.append(ind)
                break
        else:
            species.append(Species(ind.genome, [ind]))
    return [s for s in species if s.members]


# --- variation ---------------------------------------------------------------


def crossover(a: Genome, b: Genome, rng: np.random.Generator, max_regulatory: int = 50) -> Genome:
    _check_compatible(a, b)
    n_io = a.n_in + a.n_out
    rows = []
    for k in range(n_io):
        src = a if rng.random() < 0.5 else b
        rows.append((src.ids[k], src.enh[k], src.inh[k]))
    ra, rb = _reg_tags(a), _reg_tags(b)
    pairs = sorted(align(ra, rb))
    reg = [tuple(ra[i]) if rng.random() < 0.5 else tuple(rb[j]) for i, j, _ in pairs]
    longer, taken = (ra, {i for i, _, _ in pairs}) if len(ra) >= len(rb) else (rb, {j for _, j, _ in pairs})
    for k in range(len(longer)):
        if k in taken:
            continue
        if rng.random() < 0.5 and len(reg) < max_regulatory:
            reg.append(tuple(longer[k]))
    tags = np.array(rows + reg, dtype=np.float64).reshape(-1, 3)
    beta = a.beta if rng.random() < 0.5 else b.beta
    delta = a.delta if rng.random() < 0.5 else b.delta
    return Genome(tags[:, 0], tags[:, 1], tags[:, 2], a.n_in, a.n_out, beta, delta)


def mutate(g: Genome, cfg: EvoConfig, rng: np.random.Generator) -> Genome:
    """One structural draw: add, modify or delete."""
    bounds = cfg.bounds
    u = rng.random()
    if u < cfg.p_add:
        if g.n_reg >= cfg.max_regulatory:
            return g
        t = rng.uniform(bounds.tag_lo, bounds.tag_hi, size=3)
        return g.replace(ids=np.append(g.ids, t[0]), enh=np.append(g.enh, t[1]), inh=np.append(g.inh, t[2]))
    if u < cfg.p_add + cfg.p_modify:
        n = g.n_proteins
        slot = int(rng.integers(3 * n + 2))
        theta = g.to_vector()
        lo, hi = bounds.vectors(n)
        theta[slot] = rng.uniform(lo[slot], hi[slot])
        return g.with_vector(theta)
    if g.n_reg == 0:
        return g
    k = g.n_in + g.n_out + int(rng.integers(g.n_reg))
    return g.replace(ids=np.delete(g.ids, k), enh=np.delete(g.enh, k), inh=np.delete(g.inh, k))


# --- fitness -----------------------------------------------------------------


def training_seed(global_seed: int, generation: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(global_seed), int(generation), int(index)])


def fitness(genome: Genome, train_set, epochs: int, steps: int, learn: LearnConfig, seed, bounds: Bounds):
    """Returns ``(pre_mse, post_mse, trained_genome)``."""
    pre = evaluate(genome, train_set, steps)
    if epochs == 0:
        return pre, pre, genome
    trained, _ = train(genome, train_set, epochs, learn.batch_size, steps, seed, bounds, learn.adam, record_curve=False)
    return pre, evaluate(trained, train_set, steps), trained


_WORKER: dict = {}


def _worker_init(train_set, epochs, steps, learn, bounds):
    _WORKER.update(train_set=train_set, epochs=epochs, steps=steps, learn=learn, bounds=bounds)


def _worker_fitness(args):
    genome, seed = args
    w = _WORKER
    return fitness(genome, w["train_set"], w["epochs"], w["steps"], w["learn"], seed, w["bounds"])


# --- selection and the generational loop ---------------------------------


def _key(ind: Individual) -> float:
    return ind.fitness if ind.fitness is not None else math.inf


def tournament(members: Sequence[Individual], k: int, rng: np.random.Generator) -> Individual:
    picks = rng.integers(len(members), size=k)
    best = min(picks.tolist(), key=lambda i: (_key(members[i]), i))
    return members[best]


def allocate_offspring(population: Sequence[Individual], species: Sequence[Species], n_offspring: int) -> list[int]:
    """Offspring quota per species from mean inverse-rank scores (largest remainder rounding)."""
    order = sorted(range(len(population)), key=lambda i: (_key(population[i]), i))
    p = len(population)
    score = {id(population[i]): (p - r) / p for r, i in enumerate(order)}
    share = np.array([np.mean([score[id(m)] for m in s.members]) for s in species])
    exact = n_offspring * share / share.sum()
    quota = np.floor(exact).astype(int)
    rest = n_offspring - quota.sum()
    for s in sorted(range(len(species)), key=lambda s: (-(exact[s] - quota[s]), s))[:rest]:
        quota[s] += 1
    return quota.tolist()


def reproduce(population: list[Individual], species: list[Species], cfg: EvoConfig, rng: np.random.Generator) -> list[Individual]:
    ranked = sorted(range(len(population)), key=lambda i: (_key(population[i]), i))
    elites = [population[i] for i in ranked[: cfg.elitism]]
    nxt = [Individual(e.genome, e.fitness, e.pre_mse, e.trained_genome) for e in elites]
    quotas = allocate_offspring(population, species, cfg.population_size - len(nxt))
    for sp, q in zip(species, quotas):
        for _ in range(q):
            parent = tournament(sp.members, cfg.tournament_size, rng)
            if rng.random() < cfg.crossover_rate:
                mate = tournament(sp.members, cfg.tournament_size, rng)
                child = crossover(parent.genome, mate.genome, rng, cfg.max_regulatory)
            else:
                child = parent.genome
            if rng.random() < cfg.mutation_rate:
                child = mutate(child, cfg, rng)
            nxt.append(Individual(child))
    return nxt


def _stats(gen: int, population: list[Individual], n_species: int) -> GenerationStats:
    best = min(population, key=_key)
    return GenerationStats(
        generation=gen,
        best_pre_mse=best.pre_mse,
        mean_pre_mse=float(np.mean([i.pre_mse for i in population])),
        best_post_mse=best.fitness,
        mean_post_mse=float(np.mean([i.fitness for i in population])),
        species_count=n_species,
        best_n_reg=best.genome.n_reg,
        best=best,
        post_mses=[i.fitness for i in population],
    )


def evolve(
    cfg: EvoConfig,
    train_set,
    n_in: int,
    n_out: int,
    steps: int = 3,
    learn: LearnConfig = LearnConfig(),
    progress: Callable[[GenerationStats], None] | None = None,
    workers: int = 1,
):
    """Run ``cfg.generations`` generations; returns ``(history, best_individual)``.

    Generations are numbered from 1. ``workers > 1`` evaluates fitness in a
    process pool; results do not depend on the worker count.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    population = init_population(cfg, n_in, n_out, rng)
    species: list[Species] = []
    history: list[GenerationStats] = []
    pool = None
    if workers > 1:
        pool = ProcessPoolExecutor(workers, initializer=_worker_init, initargs=(train_set, cfg.fitness_epochs, steps, learn, cfg.bounds))
    try:
        for gen in range(1, cfg.generations + 1):
            todo = [(i, ind) for i, ind in enumerate(population) if not ind.evaluated]
            tasks = [(ind.genome, training_seed(cfg.rng_seed, gen, i)) for i, ind in todo]
            if pool is not None:
                results = list(pool.map(_worker_fitness, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
            else:
                results = [fitness(g, train_set, cfg.fitness_epochs, steps, learn, s, cfg.bounds) for g, s in tasks]
            for (_, ind), (pre, post, trained) in zip(todo, results):
                ind.pre_mse, ind.fitness, ind.trained_genome = pre, post, trained
            species = speciate(population, cfg.speciation_threshold, species, cfg.bounds)
            for sp in species:
                best = min(_key(m) for m in sp.members)
                if best < sp.best_fitness:
                    sp.best_fitness, sp.stagnation = best, 0
                else:
                    sp.stagnation += 1
            stats = _stats(gen, population, len(species))
            history.append(stats)
            if progress is not None:
                progress(stats)
            if gen < cfg.generations:
                population = reproduce(population, species, cfg, rng)
    finally:
        if pool is not None:
            pool.shutdown()
    return history, history[-1].best


def write_history(path, history: Sequence[GenerationStats]) -> None:
    with open(path, "w") as fh:
        fh.write(GenerationStats.CSV_HEADER + "\n")
        for h in history:
            fh.write(h.csv_row() + "\n")
