"""Experiment protocol: evolution arms x trials, long post-training, random baseline."""

from __future__ import annotations

import dataclasses
import hashlib
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import genome as genome_io
from .data import Dataset, load_csv, normalize, split
from .errors import ConfigError, MissingGenomeFile
from .evo import EvoConfig, GenerationStats, LearnConfig, evolve, write_history
from .genome import Bounds, Genome
from .optim import evaluate, train


@dataclass
class ExperimentConfig:
    dataset: str = ""
    target_columns: list[int] | None = None
    split_seed: int = 0
    test_fraction: float = 0.25
    seed: int = 0
    # evolution
    population_size: int = 50
    generations: int = 50
    crossover_rate: float = 0.25
    mutation_rate: float = 0.75
    p_add: float = 0.5
    p_modify: float = 0.25
    p_delete: float = 0.25
    speciation_threshold: float = 0.15
    tournament_size: int = 3
    elitism: int = 1
    max_regulatory: int = 50
    beta_min: float = 0.05
    beta_max: float = 2.0
    delta_min: float = 0.05
    delta_max: float = 2.0
    # learning
    lr: float = 0.001
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    grn_steps: int = 3
    # protocol
    arms: list[int] = field(default_factory=lambda: [0, 1, 10])
    n_trials: int = 10
    post_training_epochs: int = 200
    post_train_generations: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    baseline_reg_proteins: int = 50
    baseline_samples: int = 10
    output_dir: str = "results"
    threads: int = 0  # 0 = machine parallelism

    def __post_init__(self):
        if not self.arms:
            raise ConfigError("arms", "must list at least one fitness-epoch value")
        if any(a < 0 for a in self.arms):
            raise ConfigError("arms", "epochs must be >= 0")
        if self.n_trials < 1:
            raise ConfigError("n_trials", "must be >= 1")
        if self.grn_steps < 1:
            raise ConfigError("grn_steps", "must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size", "must be >= 1")

    @property
    def bounds(self) -> Bounds:
        return Bounds(beta_lo=self.beta_min, beta_hi=self.beta_max, delta_lo=self.delta_min, delta_hi=self.delta_max)

    @property
    def learn(self) -> LearnConfig:
        return LearnConfig(self.lr, self.b1, self.b2, self.eps, self.batch_size)

    def evo_config(self, fitness_epochs: int, rng_seed: int) -> EvoConfig:
        try:
            return EvoConfig(
                population_size=self.population_size,
                crossover_rate=self.crossover_rate,
                mutation_rate=self.mutation_rate,
                p_add=self.p_add,
                p_modify=self.p_modify,
                p_delete=self.p_delete,
                fitness_epochs=fitness_epochs,
                generations=self.generations,
                speciation_threshold=self.speciation_threshold,
                tournament_size=self.tournament_size,
                elitism=self.elitism,
                max_regulatory=self.max_regulatory,
                rng_seed=rng_seed,
                bounds=self.bounds,
            )
        except ValueError as exc:
            raise ConfigError("evolution", str(exc)) from None

    @property
    def workers(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def canonical(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(repr(x) for x in v)
            lines.append(f"{f.name} = {'' if v is None else v}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        # threads never changes results, so it is left out of the hash
        text = "\n".join(ln for ln in self.canonical().splitlines() if not ln.startswith("threads "))
        return hashlib.sha256(text.encode()).hexdigest()


_LIST_KEYS = {"target_columns", "arms", "post_train_generations"}


def _fraction(tok: str) -> float:
    return float(tok[:-1]) / 100.0 if tok.endswith("%") else float(tok)


def _coerce(key: str, type_name: str, raw: str):
    if key in _LIST_KEYS:
        conv = _fraction if key == "post_train_generations" else int
        return [conv(v.strip()) for v in raw.split(",") if v.strip()]
    if type_name == "int":
        return int(raw)
    if type_name == "float":
        return float(raw)
    return raw


def parse_config(text: str, base_dir=None) -> ExperimentConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment.

    Relative ``dataset``/``output_dir`` paths are resolved against ``base_dir``.
    """
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(key, f"line {lineno}: unknown key")
        try:
            values[key] = _coerce(key, types[key], raw)
        except ValueError:
            raise ConfigError(key, f"line {lineno}: cannot parse {raw!r}") from None
    if not values.get("dataset"):
        raise ConfigError("dataset", "required")
    if base_dir is not None:
        for key in ("dataset", "output_dir"):
            if key in values and not os.path.isabs(values[key]):
                values[key] = str(Path(base_dir) / values[key])
        values.setdefault("output_dir", str(Path(base_dir) / ExperimentConfig.output_dir))
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


@dataclass
class ResultsBundle:
    config: ExperimentConfig
    out_dir: Path
    train: Dataset
    test: Dataset
    histories: dict[tuple[int, int], list[GenerationStats]]
    seeds: dict[int, int]  # trial -> evolution seed
    files: list[Path] = field(default_factory=list)

    def genome_path(self, arm: int, trial: int, generation: int) -> Path:
        return _run_dir(self.out_dir, arm, trial) / "genomes" / f"gen{generation:04d}.grn"


def _run_dir(out: Path, arm: int, trial: int) -> Path:
    return out / f"arm{arm}" / f"trial{trial}"


def prepare_data(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    if not cfg.dataset:
        raise ConfigError("dataset", "required")
    if not Path(cfg.dataset).is_file():
        raise ConfigError("dataset", f"file not found: {cfg.dataset}")
    table = load_csv(cfg.dataset, cfg.target_columns)
    tr, te = split(table, cfg.test_fraction, cfg.split_seed)
    return normalize(tr, te)


def _write_lines(path: Path, lines: list[str], files: list[Path]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    files.append(path)


def run_experiment(cfg: ExperimentConfig, progress: Callable[[int, int, GenerationStats], None] | None = None) -> ResultsBundle:
    """Evolve every (arm, trial) pair and write logs, best genomes and aggregates."""
    train_set, test_set = prepare_data(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = {t: cfg.seed + t for t in range(cfg.n_trials)}
    bundle = ResultsBundle(cfg, out, train_set, test_set, {}, seeds)
    for arm in cfg.arms:
        for trial in range(cfg.n_trials):
            evo_cfg = cfg.evo_config(arm, seeds[trial])
            cb = (lambda s, a=arm, t=trial: progress(a, t, s)) if progress else None
            history, _ = evolve(evo_cfg, train_set, train_set.n_features, train_set.n_targets, cfg.grn_steps, cfg.learn, cb, cfg.workers)
            bundle.histories[(arm, trial)] = history
            run_dir = _run_dir(out, arm, trial)
            (run_dir / "genomes").mkdir(parents=True, exist_ok=True)
            write_history(run_dir / "evolution.csv", history)
            bundle.files.append(run_dir / "evolution.csv")
            for h in history:
                p = bundle.genome_path(arm, trial, h.generation)
                genome_io.save(h.best.genome, p)
                bundle.files.append(p)

    header = "arm,trial,seed," + GenerationStats.CSV_HEADER
    rows = [header]
    for (arm, trial), history in sorted(bundle.histories.items()):
        rows += [f"{arm},{trial},{seeds[trial]},{h.csv_row()}" for h in history]
    _write_lines(out / "evolution_all.csv", rows, bundle.files)

    metrics = ("best_pre_mse", "best_post_mse", "mean_pre_mse", "mean_post_mse")
    for arm in cfg.arms:
        lines = ["generation,n_trials," + ",".join(f"{m}_mean,{m}_std" for m in metrics)]
        for g in range(cfg.generations):
            cells = [str(g + 1), str(cfg.n_trials)]
            for m in metrics:
                v = np.array([getattr(bundle.histories[(arm, t)][g], m) for t in range(cfg.n_trials)])
                cells += [repr(float(v.mean())), repr(float(v.std()))]
            lines.append(",".join(cells))
        _write_lines(out / f"aggregate_arm{arm}.csv", lines, bundle.files)
    write_manifest(bundle)
    return bundle


def selected_generations(n_generations: int, fractions) -> list[int]:
    """Map fractions of the run onto 1-based generation numbers (0 -> first, 1 -> final)."""
    gens = {min(n_generations, max(1, math.ceil(f * n_generations))) for f in fractions}
    return sorted(gens)


POST_TRAIN_HEADER = "arm,trial,generation,pre_train_mse,post_train_mse,pre_test_mse,post_test_mse"


def post_train_best(bundle: ResultsBundle, epochs: int | None = None, generations: list[int] | None = None) -> list[dict]:
    """Train persisted generation-best genomes for a long run and compare train/test MSE."""
    cfg = bundle.config
    epochs = cfg.post_training_epochs if epochs is None else epochs
    gens = selected_generations(cfg.generations, cfg.post_train_generations) if generations is None else generations
    rows = []
    for arm in cfg.arms:
        for trial in range(cfg.n_trials):
            for gen in gens:
                path = bundle.genome_path(arm, trial, gen)
                if not path.is_file():
                    raise MissingGenomeFile(str(path))
                g = genome_io.load(path)
                seed = np.random.SeedSequence([bundle.seeds[trial], arm, gen, 1])
                rows.append(_compare(g, bundle.train, bundle.test, epochs, cfg, seed) | dict(arm=arm, trial=trial, generation=gen))
    lines = [POST_TRAIN_HEADER] + [
        f"{r['arm']},{r['trial']},{r['generation']},{r['pre_train_mse']!r},{r['post_train_mse']!r},{r['pre_test_mse']!r},{r['post_test_mse']!r}"
        for r in rows
    ]
    _write_lines(bundle.out_dir / "post_train.csv", lines, bundle.files)
    return rows


def _compare(g: Genome, train_set, test_set, epochs, cfg: ExperimentConfig, seed) -> dict:
    trained, _ = train(g, train_set, epochs, cfg.batch_size, cfg.grn_steps, seed, cfg.bounds, cfg.learn.adam, record_curve=False)
    return dict(
        pre_train_mse=evaluate(g, train_set, cfg.grn_steps),
        post_train_mse=evaluate(trained, train_set, cfg.grn_steps),
        pre_test_mse=evaluate(g, test_set, cfg.grn_steps),
        post_test_mse=evaluate(trained, test_set, cfg.grn_steps),
    )


BASELINE_HEADER = "sample,n_reg,pre_train_mse,post_train_mse,pre_test_mse,post_test_mse"


def random_baseline(bundle_or_cfg, n_reg: int | None = None, n_samples: int | None = None, epochs: int | None = None, write: bool = True) -> list[dict]:
    """Train randomly initialised large GRNs and report their error distribution."""
    if isinstance(bundle_or_cfg, ResultsBundle):
        cfg, train_set, test_set, out = bundle_or_cfg.config, bundle_or_cfg.train, bundle_or_cfg.test, bundle_or_cfg.out_dir
        files = bundle_or_cfg.files
    else:
        cfg = bundle_or_cfg
        train_set, test_set = prepare_data(cfg)
        out, files = Path(cfg.output_dir), []
    n_reg = cfg.baseline_reg_proteins if n_reg is None else n_reg
    n_samples = cfg.baseline_samples if n_samples is None else n_samples
    epochs = cfg.post_training_epochs if epochs is None else epochs
    rows = []
    for k in range(n_samples):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, k, 2]))
        g = Genome.random(train_set.n_features, train_set.n_targets, n_reg, rng, cfg.bounds)
        rows.append(dict(sample=k, n_reg=g.n_reg) | _compare(g, train_set, test_set, epochs, cfg, rng))
    if write:
        lines = [BASELINE_HEADER] + [
            f"{r['sample']},{r['n_reg']},{r['pre_train_mse']!r},{r['post_train_mse']!r},{r['pre_test_mse']!r},{r['post_test_mse']!r}"
            for r in rows
        ]
        _write_lines(out / "baseline.csv", lines, files)
    return rows


def write_manifest(bundle: ResultsBundle) -> None:
    cfg = bundle.config
    out = bundle.out_dir
    lines = [f"config_sha256 {cfg.digest()}", f"split_seed {cfg.split_seed}"]
    lines += [f"trial {t} seed {s}" for t, s in sorted(bundle.seeds.items())]
    lines += ["files"] + sorted(f"  {p.relative_to(out).as_posix()}" for p in set(bundle.files))
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def run_full(cfg: ExperimentConfig, progress=None) -> ResultsBundle:
    """Evolution, long post-training of selected bests, then the random baseline."""
    bundle = run_experiment(cfg, progress)
    if cfg.post_training_epochs >= 0:
        post_train_best(bundle)
    if cfg.baseline_samples > 0:
        random_baseline(bundle)
    write_manifest(bundle)
    return bundle
