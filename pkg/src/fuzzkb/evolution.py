"""Evolutionary integration of several fuzzy rule sets into one.

The strategy keeps mu individuals split into S contiguous subpopulations.  Every
generation each subpopulation's elite is blended with the mean of its other
members (max-mean arithmetical crossover, length-aware for variable rule
lists), the children get a time-decaying mutation on their membership-function
genes plus rule insertion/deletion, and (mu + offspring) truncation picks the
survivors.  A plain generational GA is included for comparison runs.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .core import (
    FitnessReport,
    KnowledgeBase,
    LabeledDataset,
    SchemaError,
    check_compatible,
    complexity,
    correct_count,
    fitness,
)
from .genome import (
    GeneBounds,
    Genome,
    Schema,
    decode,
    decode_compiled,
    default_max_rules,
    encode,
    random_genome,
    random_rules,
    repair_genome,
)

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class EvolutionConfig:
    mu: int = 100
    subpops: int = 10
    generations: int = 300
    alpha: float = 0.01
    p_mf_mutation: float = 0.1
    tvm_degree: float = 5.0
    p_insert: float = 0.05
    p_delete: float = 0.05
    lambda_range: tuple[float, float] = (0.0, 1.0)
    max_rules: Optional[int] = None  # None: three times the mean source rule count
    seed: int = 0

    def __post_init__(self):
        self.lambda_range = tuple(float(v) for v in self.lambda_range)

    def validate(self) -> "EvolutionConfig":
        if self.subpops < 1:
            raise ConfigError("subpops", "must be >= 1")
        if self.mu < 2 * self.subpops:
            raise ConfigError("mu", f"must be >= 2 * subpops = {2 * self.subpops}")
        if self.generations < 1:
            raise ConfigError("generations", "must be >= 1")
        if self.alpha < 0:
            raise ConfigError("alpha", "must be >= 0")
        for name in ("p_mf_mutation", "p_insert", "p_delete"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(name, "must lie in [0, 1]")
        if not self.tvm_degree > 0:
            raise ConfigError("tvm_degree", "must be > 0")
        if len(self.lambda_range) != 2 or not self.lambda_range[0] < self.lambda_range[1]:
            raise ConfigError("lambda_range", "needs lower < upper")
        if self.max_rules is not None and self.max_rules < 1:
            raise ConfigError("max_rules", "must be >= 1")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "EvolutionConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration field")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda_range"] = list(self.lambda_range)
        return d


@dataclass(eq=False)
class Individual:
    genome: Genome
    report: Optional[FitnessReport] = None

    @property
    def fitness(self) -> float:
        if self.report is None:
            raise ValueError("individual has not been evaluated")
        return self.report.fitness


def subpop_slices(mu: int, s: int) -> list[slice]:
    """Contiguous, near-equal blocks; the first ``mu % s`` blocks get one extra."""
    base, extra = divmod(mu, s)
    out, start = [], 0
    for k in range(s):
        size = base + (k < extra)
        out.append(slice(start, start + size))
        start += size
    return out


@dataclass
class Population:
    individuals: list[Individual]
    subpop_count: int = 1

    def __post_init__(self):
        if len(self.individuals) < 2 * self.subpop_count:
            raise ConfigError("mu", "population smaller than 2 * subpops")

    def __len__(self) -> int:
        return len(self.individuals)

    def subpopulations(self) -> list[list[Individual]]:
        return [self.individuals[s] for s in subpop_slices(len(self), self.subpop_count)]

    def best(self) -> Individual:
        return max(self.individuals, key=lambda ind: ind.fitness)


@dataclass
class GenerationStats:
    generation: int
    best_fitness: float
    best_accuracy: float
    best_complexity: float
    best_rule_count: int
    mean_fitness: float


# --------------------------------------------------------------------------
# evaluation


class Evaluator:
    """Computes fitness reports; memoizes on the decoded knowledge base.

    Decoding is many-to-one (codes are rounded) and evaluation is pure, so
    the cache never changes a result.
    """

    def __init__(self, data: LabeledDataset, source_rule_counts: Sequence[int], alpha: float,
                 schema: Optional[Schema] = None, cache_size: int = 200_000):
        if len(data) == 0:
            raise ValueError("cannot evaluate on an empty dataset")
        self.data = data
        self.schema = schema or Schema.of(data)
        self.bounds = GeneBounds.for_schema(self.schema, 1)
        self.source_rule_counts = list(source_rule_counts)
        self.alpha = alpha
        self.cache_size = cache_size
        self._cache: dict[bytes, FitnessReport] = {}
        complexity(1, self.source_rule_counts)  # fail early on a bad source list

    def __call__(self, genome: Genome) -> FitnessReport:
        ckb = decode_compiled(genome, self.schema, self.bounds)
        key = b"".join([ckb.codes.tobytes(), ckb.consequents.tobytes()]
                       + [a.tobytes() for a in ckb.centers + ckb.widths])
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        acc = correct_count(ckb, self.data) / len(self.data)
        n_rules = len(ckb.codes)
        comp = complexity(n_rules, self.source_rule_counts)
        report = FitnessReport(acc, comp, fitness(acc, comp, self.alpha), n_rules)
        if len(self._cache) >= self.cache_size:
            self._cache.clear()
        self._cache[key] = report
        return report


def evaluate_population(pop: Population | Iterable[Individual], data: LabeledDataset,
                        source_counts: Sequence[int], alpha: float,
                        evaluator: Optional[Evaluator] = None):
    """Fill every individual's fitness report (in place) and return ``pop``."""
    evaluator = evaluator or Evaluator(data, source_counts, alpha)
    members = pop.individuals if isinstance(pop, Population) else pop
    for ind in members:
        ind.report = evaluator(ind.genome)
    return pop


# --------------------------------------------------------------------------
# initialization


def union_merge(sources: Sequence[KnowledgeBase], max_rules: int) -> KnowledgeBase:
    """All distinct source rules (first occurrence order) with averaged partitions."""
    seen, rules = set(), []
    for kb in sources:
        for r in kb.rules:
            if r not in seen:
                seen.add(r)
                rules.append(r)
    parts = []
    for slot, first in enumerate(sources[0].partitions):
        mfs = []
        for j, m in enumerate(first):
            c = np.mean([kb.partitions[slot][j].center for kb in sources])
            w = np.mean([kb.partitions[slot][j].half_width for kb in sources])
            mfs.append(type(m)(float(c), float(w)))
        parts.append(tuple(mfs))
    return KnowledgeBase(sources[0].features, sources[0].classes, parts, rules[:max_rules])


def check_sources(sources: Sequence[KnowledgeBase]) -> Schema:
    if not sources:
        raise ValueError("need at least one source knowledge base")
    schema = Schema.of(sources[0])
    for kb in sources[1:]:
        if Schema.of(kb) != schema:
            raise SchemaError("source knowledge bases disagree on features or classes")
    return schema


def init_population(sources: Sequence[KnowledgeBase], schema: Schema, bounds: GeneBounds,
                    cfg: EvolutionConfig, rng: np.random.Generator) -> Population:
    p = len(sources)
    if cfg.mu < p + 1:
        raise ConfigError("mu", f"must be >= number of sources + 1 = {p + 1}")
    genomes = [repair_genome(encode(kb), bounds) for kb in sources]
    genomes.append(repair_genome(encode(union_merge(sources, bounds.max_rules)), bounds))
    mean_count = max(1, min(bounds.max_rules,
                            round(sum(len(kb.rules) for kb in sources) / p)))
    while len(genomes) < cfg.mu:
        n = int(rng.integers(1, mean_count + 1))
        genomes.append(random_genome(schema, bounds, n, rng))
    return Population([Individual(g) for g in genomes], cfg.subpops)


# --------------------------------------------------------------------------
# operators


def subpop_elite_and_mean(sub: Sequence[Individual]):
    """Elite (first best) plus the mean 'virtual parent' of the rest.

    The mean rule block is truncated to the shortest non-elite rule list.
    """
    if len(sub) < 2:
        raise ValueError("a subpopulation needs at least two members")
    scores = [ind.fitness for ind in sub]
    e = int(np.argmax(scores))
    rest = [ind.genome for i, ind in enumerate(sub) if i != e]
    mean_mf = np.mean([g.mf for g in rest], axis=0)
    shortest = min(g.rule_count for g in rest)
    mean_rules = np.mean([g.rules[:shortest] for g in rest], axis=0)
    return sub[e], mean_mf, mean_rules


def sbmac_offspring(elite: Genome, mean_mf: np.ndarray, mean_rules: np.ndarray, parent: Genome,
                    lam: float, bounds: GeneBounds) -> Genome:
    mf = lam * elite.mf + (1.0 - lam) * mean_mf
    rules = parent.rules.copy()
    lb = min(elite.rule_count, len(mean_rules), parent.rule_count)
    rules[:lb] = lam * elite.rules[:lb] + (1.0 - lam) * mean_rules[:lb]
    return repair_genome(Genome(rules, mf), bounds)


def tvm_delta(t, T, y, b, r):
    """Step of size in [0, y] that shrinks to zero as t approaches T."""
    return y * (1.0 - r ** ((1.0 - t / T) ** b))


def apply_tvm(g: Genome, bounds: GeneBounds, t: int, T: int, cfg: EvolutionConfig,
              rng: np.random.Generator) -> Genome:
    n = len(g.mf)
    hit = rng.random(n) < cfg.p_mf_mutation
    up = rng.random(n) < 0.5
    r = rng.random(n)
    x = g.mf
    step_up = tvm_delta(t, T, bounds.mf_upper - x, cfg.tvm_degree, r)
    step_down = tvm_delta(t, T, x - bounds.mf_lower, cfg.tvm_degree, r)
    moved = np.where(up, x + step_up, x - step_down)
    mf = np.clip(np.where(hit, moved, x), bounds.mf_lower, bounds.mf_upper)
    return Genome(g.rules.copy(), mf)


def insert_rule(g: Genome, position: int, rule: np.ndarray, bounds: GeneBounds) -> Genome:
    if g.rule_count >= bounds.max_rules:
        return g.copy()
    return Genome(np.insert(g.rules, position, rule, axis=0), g.mf.copy())


def delete_rule(g: Genome, position: int) -> Genome:
    if g.rule_count <= 1:
        return g.copy()
    return Genome(np.delete(g.rules, position, axis=0), g.mf.copy())


def insertion_deletion_mutate(g: Genome, schema: Schema, bounds: GeneBounds,
                              cfg: EvolutionConfig, rng: np.random.Generator) -> Genome:
    if rng.random() < cfg.p_insert and g.rule_count < bounds.max_rules:
        pos = int(rng.integers(0, g.rule_count + 1))
        g = insert_rule(g, pos, random_rules(schema, bounds, 1, rng)[0], bounds)
    if rng.random() < cfg.p_delete and g.rule_count > 1:
        g = delete_rule(g, int(rng.integers(0, g.rule_count)))
    return g


def survivor_selection(parents: Population, offspring: Sequence[Individual]) -> Population:
    """(mu + lambda) truncation; ties favour parents, then lower index.

    Survivors are stored best-first, so the contiguous subpopulation blocks
    are regrouped by fitness rank every generation.
    """
    pool = list(parents.individuals) + list(offspring)
    ranked = sorted(pool, key=lambda ind: -ind.fitness)  # stable
    return Population(ranked[: len(parents)], parents.subpop_count)


def _stats(t: int, pop: Population) -> GenerationStats:
    best = pop.best()
    return GenerationStats(
        generation=t,
        best_fitness=best.report.fitness,
        best_accuracy=best.report.accuracy,
        best_complexity=best.report.complexity,
        best_rule_count=best.genome.rule_count,
        mean_fitness=float(np.mean([ind.fitness for ind in pop.individuals])),
    )


# --------------------------------------------------------------------------
# drivers


@dataclass
class RunResult:
    best: KnowledgeBase
    history: list[GenerationStats]
    best_report: FitnessReport
    population: Population = field(repr=False)


def _prepare(sources, data, cfg):
    cfg.validate()
    schema = check_sources(sources)
    check_compatible(sources[0], data)
    counts = [len(kb.rules) for kb in sources]
    max_rules = cfg.max_rules or default_max_rules(counts)
    bounds = GeneBounds.for_schema(schema, max_rules)
    evaluator = Evaluator(data, counts, cfg.alpha, schema)
    rng = np.random.default_rng(cfg.seed)
    pop = init_population(sources, schema, bounds, cfg, rng)
    evaluate_population(pop, data, counts, cfg.alpha, evaluator)
    pop = survivor_selection(pop, [])
    return schema, bounds, evaluator, rng, pop


def nes_generation(pop: Population, t: int, schema: Schema, bounds: GeneBounds,
                   cfg: EvolutionConfig, rng: np.random.Generator,
                   evaluator: Evaluator) -> Population:
    """One generation; ``t`` is the zero-based generation index."""
    offspring = []
    lo, hi = cfg.lambda_range
    for sub in pop.subpopulations():
        elite, mean_mf, mean_rules = subpop_elite_and_mean(sub)
        for ind in sub:
            if ind is elite:
                continue
            child = sbmac_offspring(elite.genome, mean_mf, mean_rules, ind.genome,
                                    rng.uniform(lo, hi), bounds)
            child = apply_tvm(child, bounds, t, cfg.generations, cfg, rng)
            child = insertion_deletion_mutate(child, schema, bounds, cfg, rng)
            offspring.append(Individual(child))
    for ind in offspring:
        ind.report = evaluator(ind.genome)
    return survivor_selection(pop, offspring)


def integrate(sources: Sequence[KnowledgeBase], data: LabeledDataset, cfg: EvolutionConfig,
              on_generation: Optional[Callable[[GenerationStats], None]] = None) -> RunResult:
    schema, bounds, evaluator, rng, pop = _prepare(sources, data, cfg)
    history = []
    for t in range(cfg.generations):
        pop = nes_generation(pop, t, schema, bounds, cfg, rng, evaluator)
        stats = _stats(t + 1, pop)
        history.append(stats)
        if on_generation:
            on_generation(stats)
    best = pop.best()
    return RunResult(decode(best.genome, schema, bounds), history, best.report, pop)


def run_integration(sources, data, cfg, on_generation=None):
    """Run the strategy; returns ``(best_kb, history)``."""
    result = integrate(sources, data, cfg, on_generation)
    return result.best, result.history


# --------------------------------------------------------------------------
# baseline GA


def one_point_crossover(a: Genome, b: Genome, cut: int) -> tuple[Genome, Genome]:
    """Swap everything after rule boundary ``cut``, MF block included."""
    return (Genome(np.vstack([a.rules[:cut], b.rules[cut:]]), b.mf.copy()),
            Genome(np.vstack([b.rules[:cut], a.rules[cut:]]), a.mf.copy()))


def uniform_reset(g: Genome, schema: Schema, bounds: GeneBounds, rate: float,
                  rng: np.random.Generator) -> Genome:
    rules, mf = g.rules.copy(), g.mf.copy()
    hit = rng.random(rules.shape) < rate
    fresh = random_rules(schema, bounds, len(rules), rng)
    rules[hit] = fresh[hit]
    hit = rng.random(len(mf)) < rate
    fresh = rng.uniform(bounds.mf_lower, bounds.mf_upper)
    mf[hit] = fresh[hit]
    return Genome(rules, mf)


def baseline_ga_step(pop: Population, cfg: EvolutionConfig, rng: np.random.Generator,
                     schema: Schema, bounds: GeneBounds, crossover_rate: float = 0.9,
                     mutation_rate: float = 0.01) -> Population:
    """Roulette selection, one-point crossover, uniform-reset mutation, elitism of one.

    Children come back unevaluated; the elite keeps its report.
    """
    scores = np.array([ind.fitness for ind in pop.individuals])
    probs = scores / scores.sum() if scores.sum() > 0 else None
    elite = pop.best()
    children = [Individual(elite.genome.copy(), elite.report)]
    while len(children) < len(pop):
        i, j = rng.choice(len(pop), size=2, p=probs)
        a, b = pop.individuals[i].genome, pop.individuals[j].genome
        if rng.random() < crossover_rate:
            cut = int(rng.integers(0, min(a.rule_count, b.rule_count) + 1))
            a, b = one_point_crossover(a, b, cut)
        for g in (a, b):
            if len(children) < len(pop):
                g = uniform_reset(g, schema, bounds, mutation_rate, rng)
                children.append(Individual(repair_genome(g, bounds)))
    return Population(children, pop.subpop_count)


def run_baseline_ga(sources: Sequence[KnowledgeBase], data: LabeledDataset,
                    cfg: EvolutionConfig, crossover_rate: float = 0.9,
                    mutation_rate: float = 0.01,
                    on_generation: Optional[Callable[[GenerationStats], None]] = None) -> RunResult:
    """Same initial population, fitness and generation budget as :func:`integrate`."""
    schema, bounds, evaluator, rng, pop = _prepare(sources, data, cfg)
    history = []
    for t in range(cfg.generations):
        pop = baseline_ga_step(pop, cfg, rng, schema, bounds, crossover_rate, mutation_rate)
        for ind in pop.individuals:
            if ind.report is None:
                ind.report = evaluator(ind.genome)
        stats = _stats(t + 1, pop)
        history.append(stats)
        if on_generation:
            on_generation(stats)
    best = pop.best()
    return RunResult(decode(best.genome, schema, bounds), history, best.report, pop)
