"""Evolutionary search over reflecting-surface phase configurations.

All optimizers minimize a black-box objective over the normalized box
[-1, 1]^n; a genome maps to phases via ``decode_phases`` (theta = pi * x).
The main algorithm is a success-history adaptive DE with an external archive
and an extra *augmentation* move: whenever the best fitness stalls, the top
population members are shifted by a common random offset along the all-ones
direction, which walks the search out of flat basins without disturbing the
relative phase profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

LOWER = -1.0
UPPER = 1.0


def decode_phases(genome: np.ndarray) -> np.ndarray:
    """Map a normalized genome in [-1, 1]^n to phases in [-pi, pi]^n."""
    return np.pi * np.asarray(genome, dtype=float)


def clip_genome(genome: np.ndarray) -> np.ndarray:
    """Saturate arbitrary values into the feasible box [-1, 1]."""
    return np.clip(np.asarray(genome, dtype=float), LOWER, UPPER)


def random_phases(n_dims: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform phase draw; the random-search baseline configuration."""
    return rng.uniform(-np.pi, np.pi, n_dims)


def equal_phases(n_dims: int, value: float = 0.0) -> np.ndarray:
    """Constant phase profile; the no-design baseline configuration."""
    return np.full(n_dims, float(value))


def _as_generator(rng) -> np.random.Generator:
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class AdeConfig:
    """Hyperparameters of the augmented adaptive DE.

    Attributes:
        population_size: members kept per generation (I).
        generations: number of generations after initialization.
        pbest_fraction: fraction of the population eligible as the elite
            attractor in the mutation (p).
        memory_size: slots of success-history memory (H).
        stall_tolerance: best-fitness change below which a generation counts
            as stalled and triggers augmentation (epsilon).
        shift_sigma: standard deviation of the common shift applied to
            augmented members.
        augment_count: members augmented per stalled generation; defaults to
            ceil(population_size / 10).
    """

    population_size: int = 50
    generations: int = 500
    pbest_fraction: float = 0.11
    memory_size: int = 6
    stall_tolerance: float = 1e-6
    shift_sigma: float = 0.1
    augment_count: int | None = None

    def __post_init__(self) -> None:
        if self.population_size < 4:
            raise ConfigurationError("population_size must be at least 4")
        if self.generations < 0:
            raise ConfigurationError("generations must be nonnegative")
        if not 0.0 < self.pbest_fraction <= 1.0:
            raise ConfigurationError("pbest_fraction must lie in (0, 1]")
        if self.memory_size < 1:
            raise ConfigurationError("memory_size must be at least 1")
        if self.stall_tolerance < 0 or self.shift_sigma < 0:
            raise ConfigurationError("stall_tolerance and shift_sigma must be >= 0")
        if self.augment_count is not None and not (
            1 <= self.augment_count <= self.population_size
        ):
            raise ConfigurationError(
                "augment_count must lie in [1, population_size]"
            )

    @property
    def resolved_augment_count(self) -> int:
        if self.augment_count is not None:
            return self.augment_count
        return math.ceil(self.population_size / 10)


@dataclass(frozen=True)
class DeConfig:
    """Canonical DE/rand/1/bin baseline with fixed control parameters."""

    population_size: int = 50
    generations: int = 500
    weight: float = 0.5
    crossover_rate: float = 0.9

    def __post_init__(self) -> None:
        if self.population_size < 4:
            raise ConfigurationError("population_size must be at least 4")
        if self.generations < 0:
            raise ConfigurationError("generations must be nonnegative")
        if not 0.0 < self.weight <= 2.0:
            raise ConfigurationError("weight must lie in (0, 2]")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ConfigurationError("crossover_rate must lie in [0, 1]")


@dataclass(frozen=True)
class GaConfig:
    """Generational GA baseline: tournament selection, blend crossover,
    Gaussian mutation, single elite."""

    population_size: int = 50
    generations: int = 500
    tournament_size: int = 3
    blend_alpha: float = 0.5
    mutation_prob: float | None = None  # default 1/n_dims
    mutation_sigma: float = 0.1

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ConfigurationError("population_size must be at least 2")
        if self.generations < 0:
            raise ConfigurationError("generations must be nonnegative")
        if self.tournament_size < 1:
            raise ConfigurationError("tournament_size must be at least 1")
        if self.mutation_prob is not None and not 0.0 <= self.mutation_prob <= 1.0:
            raise ConfigurationError("mutation_prob must lie in [0, 1]")


@dataclass
class Population:
    """Evaluated genomes; fitness[i] is always objective(genomes[i])."""

    genomes: np.ndarray  # (size, n_dims) in [-1, 1]
    fitness: np.ndarray  # (size,)

    @property
    def size(self) -> int:
        return self.genomes.shape[0]

    def best_index(self) -> int:
        return int(np.argmin(self.fitness))


class Archive(Population):
    """Displaced parents, index-aligned with the population (same size)."""


@dataclass
class ShadeMemory:
    """Success-history memory of control parameters."""

    scale: np.ndarray  # (H,) mutation weights
    crossover: np.ndarray  # (H,) crossover rates
    cursor: int = 0

    @classmethod
    def create(cls, size: int) -> "ShadeMemory":
        return cls(scale=np.full(size, 0.5), crossover=np.full(size, 0.5))


@dataclass
class ConvergenceTrace:
    """Per-generation progress record; index 0 is the initial population."""

    best: list[float] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)
    augmented: list[bool] = field(default_factory=list)
    accepted: list[int] = field(default_factory=list)
    evaluations: list[int] = field(default_factory=list)
    work: list[dict[str, int]] = field(default_factory=list)


@dataclass
class OptimizationResult:
    genome: np.ndarray
    fitness: float
    evaluations: int
    trace: ConvergenceTrace

    @property
    def phases(self) -> np.ndarray:
        return decode_phases(self.genome)


def initialize_population(
    objective, n_dims: int, size: int, rng: np.random.Generator
) -> tuple[Population, Archive]:
    """Uniform initialization; the archive starts as a copy of the population."""
    genomes = rng.uniform(LOWER, UPPER, (size, n_dims))
    fitness = np.array([float(objective(g)) for g in genomes])
    population = Population(genomes=genomes, fitness=fitness)
    archive = Archive(genomes=genomes.copy(), fitness=fitness.copy())
    return population, archive


def sample_parameters(
    memory: ShadeMemory, rng: np.random.Generator
) -> tuple[float, float]:
    """Draw (weight, crossover_rate) from a random memory slot.

    The weight is Cauchy around the slot value (redrawn while nonpositive,
    clipped above at 1); the crossover rate is normal, clipped to [0, 1].
    """
    slot = int(rng.integers(memory.scale.size))
    weight = 0.0
    while weight <= 0.0:
        weight = memory.scale[slot] + 0.1 * rng.standard_cauchy()
    weight = min(weight, 1.0)
    cr = float(np.clip(rng.normal(memory.crossover[slot], 0.1), 0.0, 1.0))
    return float(weight), cr


def mutate_pbest1(
    population: Population,
    archive: Archive,
    parent_idx: int,
    weight: float,
    pbest_fraction: float,
    rng: np.random.Generator,
    order: np.ndarray | None = None,
) -> np.ndarray:
    """current-to-best-free mutation: x_pbest + F (x_r1 - x_r2).

    The attractor is drawn among the ceil-free top ``pbest_fraction`` share
    of the population (at least one member); r1 comes from the population,
    r2 from the population or the archive, with parent, r1 and r2 pairwise
    distinct.  ``order`` may pass a precomputed fitness argsort.
    """
    size = population.size
    if order is None:
        order = np.argsort(population.fitness, kind="stable")
    n_best = max(1, int(size * pbest_fraction))
    pbest = order[int(rng.integers(n_best))]
    r1 = parent_idx
    while r1 == parent_idx:
        r1 = int(rng.integers(size))
    r2 = parent_idx
    while r2 == parent_idx or r2 == r1:
        r2 = int(rng.integers(2 * size))
    donor = population.genomes[r2] if r2 < size else archive.genomes[r2 - size]
    return population.genomes[pbest] + weight * (population.genomes[r1] - donor)


def repair_bounds(mutant: np.ndarray, parent: np.ndarray) -> np.ndarray:
    """Pull out-of-box genes to the midpoint between the bound and the parent."""
    out = np.asarray(mutant, dtype=float).copy()
    high = out > UPPER
    low = out < LOWER
    out[high] = (UPPER + parent[high]) / 2.0
    out[low] = (LOWER + parent[low]) / 2.0
    return out


def crossover(
    parent: np.ndarray, mutant: np.ndarray, crossover_rate: float, rng: np.random.Generator
) -> np.ndarray:
    """Binomial crossover with one gene forced from the mutant."""
    n = parent.shape[0]
    mask = rng.random(n) < crossover_rate
    mask[int(rng.integers(n))] = True
    return np.where(mask, mutant, parent)


def apply_selection(
    population: Population,
    archive: Archive,
    trials: np.ndarray,
    trial_fitness: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Replace parents by trials that are at least as good.

    Every displaced parent lands in its own archive slot, keeping the
    archive the same size as the population.  Returns the acceptance mask
    and the per-member fitness improvement (zero unless strictly better).
    """
    accepted = trial_fitness <= population.fitness
    improvements = np.where(accepted, population.fitness - trial_fitness, 0.0)
    archive.genomes[accepted] = population.genomes[accepted]
    archive.fitness[accepted] = population.fitness[accepted]
    population.genomes[accepted] = trials[accepted]
    population.fitness[accepted] = trial_fitness[accepted]
    return accepted, improvements


def update_memory(
    memory: ShadeMemory,
    weights: np.ndarray,
    crossover_rates: np.ndarray,
    improvements: np.ndarray,
) -> None:
    """Write improvement-weighted parameter means into the cursor slot.

    Only strictly improving trials contribute (ties carry zero weight); with
    no contributions the memory is left untouched.
    """
    mask = improvements > 0.0
    if not np.any(mask):
        return
    w = improvements[mask] / improvements[mask].sum()
    f = weights[mask]
    memory.scale[memory.cursor] = float((w * f * f).sum() / (w * f).sum())
    memory.crossover[memory.cursor] = float((w * crossover_rates[mask]).sum())
    memory.cursor = (memory.cursor + 1) % memory.scale.size


def augment(
    population: Population,
    archive: Archive,
    objective,
    count: int,
    sigma: float,
    rng: np.random.Generator,
) -> tuple[int, int]:
    """Shift the ``count`` best members by a common per-member offset.

    Each candidate replaces its source member only when strictly better;
    otherwise it can still displace the archive member of the same sorted
    rank.  Returns (evaluations spent, members replaced).
    """
    order = np.argsort(population.fitness, kind="stable")
    archive_order = np.argsort(archive.fitness, kind="stable")
    evaluations = 0
    replaced = 0
    for rank in range(count):
        i = int(order[rank])
        shift = rng.normal(0.0, sigma)
        candidate = clip_genome(population.genomes[i] + shift)
        value = float(objective(candidate))
        evaluations += 1
        if value < population.fitness[i]:
            population.genomes[i] = candidate
            population.fitness[i] = value
            replaced += 1
        else:
            a = int(archive_order[rank])
            if value < archive.fitness[a]:
                archive.genomes[a] = candidate
                archive.fitness[a] = value
    return evaluations, replaced


def run_ade(
    objective,
    n_dims: int,
    config: AdeConfig | None = None,
    rng=None,
) -> OptimizationResult:
    """Minimize ``objective`` over [-1, 1]^n_dims with the augmented DE.

    The augmentation draws come from a dedicated child stream, so disabling
    it (``stall_tolerance=0``) leaves the main search sequence untouched.
    """
    config = config or AdeConfig()
    base = _as_generator(rng)
    ops_rng, shift_rng = base.spawn(2)
    size = config.population_size
    lam = config.resolved_augment_count
    sort_cost = size * max(1, math.ceil(math.log2(size)))

    population, archive = initialize_population(objective, n_dims, size, ops_rng)
    memory = ShadeMemory.create(config.memory_size)
    evaluations = size
    trace = ConvergenceTrace()
    best = float(population.fitness.min())
    trace.best.append(best)
    trace.mean.append(float(population.fitness.mean()))
    trace.augmented.append(False)
    trace.accepted.append(0)
    trace.evaluations.append(evaluations)
    trace.work.append({})
    previous_best = best

    for _ in range(config.generations):
        work = {"sort": sort_cost, "mutation": size * n_dims,
                "crossover": size * n_dims, "evaluation": size, "augmentation": 0}
        order = np.argsort(population.fitness, kind="stable")
        weights = np.empty(size)
        rates = np.empty(size)
        trials = np.empty_like(population.genomes)
        for i in range(size):
            weights[i], rates[i] = sample_parameters(memory, ops_rng)
            mutant = mutate_pbest1(
                population, archive, i, weights[i], config.pbest_fraction,
                ops_rng, order=order,
            )
            repaired = repair_bounds(mutant, population.genomes[i])
            trials[i] = crossover(population.genomes[i], repaired, rates[i], ops_rng)
        trial_fitness = np.array([float(objective(t)) for t in trials])
        evaluations += size
        accepted, improvements = apply_selection(
            population, archive, trials, trial_fitness
        )
        update_memory(memory, weights, rates, improvements)

        best = float(population.fitness.min())
        stalled = abs(best - previous_best) < config.stall_tolerance
        if stalled:
            spent, _ = augment(
                population, archive, objective, lam, config.shift_sigma, shift_rng
            )
            evaluations += spent
            work["sort"] += sort_cost
            work["evaluation"] += spent
            work["augmentation"] = lam * n_dims
            best = float(population.fitness.min())
        previous_best = best

        trace.best.append(best)
        trace.mean.append(float(population.fitness.mean()))
        trace.augmented.append(bool(stalled))
        trace.accepted.append(int(accepted.sum()))
        trace.evaluations.append(evaluations)
        trace.work.append(work)

    idx = population.best_index()
    return OptimizationResult(
        genome=population.genomes[idx].copy(),
        fitness=float(population.fitness[idx]),
        evaluations=evaluations,
        trace=trace,
    )


def run_canonical_de(
    objective,
    n_dims: int,
    config: DeConfig | None = None,
    rng=None,
) -> OptimizationResult:
    """DE/rand/1/bin with fixed weight and crossover rate."""
    config = config or DeConfig()
    gen = _as_generator(rng)
    size = config.population_size

    genomes = gen.uniform(LOWER, UPPER, (size, n_dims))
    fitness = np.array([float(objective(g)) for g in genomes])
    evaluations = size
    trace = ConvergenceTrace()
    trace.best.append(float(fitness.min()))
    trace.mean.append(float(fitness.mean()))
    trace.augmented.append(False)
    trace.accepted.append(0)
    trace.evaluations.append(evaluations)
    trace.work.append({})

    for _ in range(config.generations):
        trials = np.empty_like(genomes)
        for i in range(size):
            picks = [i]
            while len(picks) < 4:
                c = int(gen.integers(size))
                if c not in picks:
                    picks.append(c)
            _, r1, r2, r3 = picks
            mutant = genomes[r1] + config.weight * (genomes[r2] - genomes[r3])
            repaired = repair_bounds(mutant, genomes[i])
            trials[i] = crossover(genomes[i], repaired, config.crossover_rate, gen)
        trial_fitness = np.array([float(objective(t)) for t in trials])
        evaluations += size
        accepted = trial_fitness <= fitness
        genomes[accepted] = trials[accepted]
        fitness[accepted] = trial_fitness[accepted]

        trace.best.append(float(fitness.min()))
        trace.mean.append(float(fitness.mean()))
        trace.augmented.append(False)
        trace.accepted.append(int(accepted.sum()))
        trace.evaluations.append(evaluations)
        trace.work.append({"mutation": size * n_dims, "crossover": size * n_dims,
                           "evaluation": size})

    idx = int(np.argmin(fitness))
    return OptimizationResult(
        genome=genomes[idx].copy(),
        fitness=float(fitness[idx]),
        evaluations=evaluations,
        trace=trace,
    )


def run_ga(
    objective,
    n_dims: int,
    config: GaConfig | None = None,
    rng=None,
) -> OptimizationResult:
    """Generational GA: tournaments, blend crossover, Gaussian mutation,
    one elite carried over unchanged."""
    config = config or GaConfig()
    gen = _as_generator(rng)
    size = config.population_size
    p_mut = config.mutation_prob if config.mutation_prob is not None else 1.0 / n_dims

    genomes = gen.uniform(LOWER, UPPER, (size, n_dims))
    fitness = np.array([float(objective(g)) for g in genomes])
    evaluations = size
    trace = ConvergenceTrace()
    trace.best.append(float(fitness.min()))
    trace.mean.append(float(fitness.mean()))
    trace.augmented.append(False)
    trace.accepted.append(0)
    trace.evaluations.append(evaluations)
    trace.work.append({})

    def tournament() -> int:
        picks = gen.integers(size, size=config.tournament_size)
        return int(picks[np.argmin(fitness[picks])])

    for _ in range(config.generations):
        elite = int(np.argmin(fitness))
        children = np.empty((size - 1, n_dims))
        for i in range(size - 1):
            a = genomes[tournament()]
            b = genomes[tournament()]
            lo = np.minimum(a, b)
            hi = np.maximum(a, b)
            span = hi - lo
            child = gen.uniform(
                lo - config.blend_alpha * span, hi + config.blend_alpha * span
            )
            mask = gen.random(n_dims) < p_mut
            child[mask] += gen.normal(0.0, config.mutation_sigma, int(mask.sum()))
            children[i] = np.clip(child, LOWER, UPPER)
        child_fitness = np.array([float(objective(c)) for c in children])
        evaluations += size - 1
        genomes = np.vstack([genomes[elite][None, :], children])
        fitness = np.concatenate([[fitness[elite]], child_fitness])

        trace.best.append(float(fitness.min()))
        trace.mean.append(float(fitness.mean()))
        trace.augmented.append(False)
        trace.accepted.append(size - 1)
        trace.evaluations.append(evaluations)
        trace.work.append({"crossover": (size - 1) * n_dims,
                           "evaluation": size - 1})

    idx = int(np.argmin(fitness))
    return OptimizationResult(
        genome=genomes[idx].copy(),
        fitness=float(fitness[idx]),
        evaluations=evaluations,
        trace=trace,
    )
