"""Multi-objective genetic programming over TAG derivations.

Each generation estimates the parameters of every new model on the
estimation data, scores it on the fitness data, merges parents and
offspring, keeps the best ``M`` by non-dominated rank and crowding, and
breeds the next offspring by tournament selection, subtree crossover and
mutation.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimation import estimate
from .exceptions import GrammarError, ParseError, TagSysIdError
from .genotype import (
    MUTATIONS,
    DerivationTree,
    crossover_genotypes,
    mutate_genotype,
    random_genotype,
    tokens,
)
from .grammar import Grammar
from .model import FittedModel, ModelStructure, parse_model
from .objectives import (
    WORST,
    ObjectiveTriple,
    QualityMeasures,
    crowding_truncate,
    evaluate,
    rank_and_crowding,
)

__all__ = ["GpConfig", "Individual", "ParetoFront", "Engine", "init_population", "crossover", "mutate", "run"]

logger = logging.getLogger("tagsysid")


@dataclass
class GpConfig:
    population_size: int = 100
    iterations: int = 150
    max_adjunctions: int = 150
    p_crossover: float = 1.0
    p_mutation: float = 0.8
    rng_seed: int = 0
    els_max_iterations: int = 10
    els_tol: float = 1e-8
    metric_form: str = "paper"
    threads: int = 1

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.max_adjunctions < 1:
            raise ValueError("max_adjunctions must be positive")
        for name in ("p_crossover", "p_mutation"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.metric_form not in ("paper", "conventional"):
            raise ValueError("metric_form must be 'paper' or 'conventional'")
        if self.threads < 1:
            raise ValueError("threads must be positive")

    @property
    def M(self) -> int:
        return self.population_size

    @property
    def L(self) -> int:
        return self.iterations


@dataclass(eq=False)
class Individual:
    genotype: DerivationTree
    phenotype: ModelStructure
    fitness: ObjectiveTriple | None = None
    rank: int = 0
    crowding: float = 0.0
    model: FittedModel | None = None
    scores: QualityMeasures | None = None
    origin: str = "init"

    @property
    def adjunction_count(self) -> int:
        return self.genotype.adjunction_count


def decode(grammar: Grammar, genotype: DerivationTree, origin: str = "init") -> Individual:
    return Individual(genotype, parse_model(tokens(grammar, genotype)), origin=origin)


# -- operators ------------------------------------------------------------------------------

def init_population(grammar: Grammar, cfg: GpConfig, rng=None) -> list[Individual]:
    """``M`` random individuals with ramped adjunction counts.

    Target counts are spread evenly over ``0 .. max_adjunctions // 10``; the
    base initial tree is drawn uniformly.
    """
    rng = np.random.default_rng(cfg.rng_seed) if rng is None else rng
    top = cfg.max_adjunctions // 10
    pop = []
    for i in range(cfg.population_size):
        target = (i * (top + 1)) // cfg.population_size
        for _ in range(100):
            g = random_genotype(grammar, target, rng)
            try:
                pop.append(decode(grammar, g))
                break
            except (ParseError, ValueError):
                continue
        else:
            raise GrammarError("grammar keeps producing yields that are not models")
    return pop


def crossover(a: Individual, b: Individual, rng, grammar: Grammar, max_adjunctions: int):
    ga, gb, swapped = crossover_genotypes(grammar, a.genotype, b.genotype, rng, max_adjunctions)
    if not swapped:
        return _copy(a, "reproduction"), _copy(b, "reproduction")
    return decode(grammar, ga, "crossover"), decode(grammar, gb, "crossover")


def mutate(a: Individual, rng, grammar: Grammar, cfg: GpConfig) -> Individual:
    """With probability ``p_m`` apply a uniformly chosen delete/regrow/insert."""
    if rng.random() >= cfg.p_mutation:
        return a
    kind = MUTATIONS[rng.integers(len(MUTATIONS))]
    g = mutate_genotype(grammar, a.genotype, rng, cfg.max_adjunctions, kind)
    child = decode(grammar, g, f"mutation:{kind}") if g is not a.genotype else _copy(a, f"mutation:{kind}")
    return child


def _copy(a: Individual, origin: str) -> Individual:
    return Individual(a.genotype, a.phenotype, a.fitness, a.rank, a.crowding, a.model, a.scores, origin)


def tournament(pop: list[Individual], rng) -> Individual:
    i, j = rng.integers(len(pop)), rng.integers(len(pop))
    a, b = pop[i], pop[j]
    if (b.rank, -b.crowding) < (a.rank, -a.crowding):
        return b
    return a


# -- evaluation -----------------------------------------------------------------------------

class Engine:
    """Evaluates structures, caching results per structure for the whole run."""

    def __init__(self, grammar: Grammar, data, cfg: GpConfig):
        self.grammar = grammar
        self.data = data
        self.cfg = cfg
        self._cache: dict[ModelStructure, tuple] = {}

    def _evaluate_structure(self, s: ModelStructure):
        try:
            report = estimate(s, self.data.estimation, self.cfg.els_max_iterations, self.cfg.els_tol)
            fm = FittedModel(s, report.coefficients, report.residual_variance,
                             info={"estimation": report})
        except (TagSysIdError, ValueError, np.linalg.LinAlgError) as exc:
            logger.debug("estimation failed for %s: %s", s, exc)
            inf = math.inf
            return None, ObjectiveTriple(WORST, WORST, s.p, True), QualityMeasures(inf, inf, -inf, -inf)
        obj, q = evaluate(fm, self.data.fitness, form=self.cfg.metric_form)
        return fm, obj, q

    def evaluate(self, pop: list[Individual]) -> None:
        todo = []
        for ind in pop:
            if ind.phenotype not in self._cache and ind.phenotype not in todo:
                todo.append(ind.phenotype)
        if self.cfg.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.cfg.threads) as ex:
                results = list(ex.map(self._evaluate_structure, todo))
        else:
            results = [self._evaluate_structure(s) for s in todo]
        self._cache.update(zip(todo, results))
        for ind in pop:
            ind.model, ind.fitness, ind.scores = self._cache[ind.phenotype]

    @property
    def evaluations(self) -> int:
        return len(self._cache)


def _select(pop: list[Individual], m: int) -> list[Individual]:
    points = [ind.fitness.as_tuple() for ind in pop]
    keep = crowding_truncate(points, m, tiebreak=[ind.adjunction_count for ind in pop])
    survivors = [pop[i] for i in keep]
    _, rank, crowd = rank_and_crowding([ind.fitness.as_tuple() for ind in survivors])
    for ind, r, c in zip(survivors, rank, crowd):
        ind.rank, ind.crowding = int(r), float(c)
    return survivors


def _breed(parents, rng, grammar, cfg) -> list[Individual]:
    offspring: list[Individual] = []
    while len(offspring) < cfg.population_size:
        a, b = tournament(parents, rng), tournament(parents, rng)
        if rng.random() < cfg.p_crossover:
            c1, c2 = crossover(a, b, rng, grammar, cfg.max_adjunctions)
        else:
            c1, c2 = _copy(a, "reproduction"), _copy(b, "reproduction")
        offspring.append(mutate(c1, rng, grammar, cfg))
        offspring.append(mutate(c2, rng, grammar, cfg))
    return offspring[: cfg.population_size]


@dataclass
class ParetoFront:
    members: list[Individual]
    population: list[Individual]
    history: list[dict] = field(default_factory=list)
    evaluations: int = 0

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def objective_points(self) -> list[tuple]:
        return [m.fitness.as_tuple() for m in self.members]


def _front_of(pop: list[Individual]) -> list[Individual]:
    seen, out = set(), []
    for ind in pop:
        if ind.rank == 0 and ind.phenotype not in seen:
            seen.add(ind.phenotype)
            out.append(ind)
    out.sort(key=lambda i: (i.fitness.complexity, i.fitness.pred_sse, i.fitness.sim_sse, str(i.phenotype)))
    return out


def _summary(gen: int, pop: list[Individual]) -> dict:
    front = [i for i in pop if i.rank == 0]
    return {
        "generation": gen,
        "front_size": len({i.phenotype for i in front}),
        "best_rms_p": min(i.scores.rms_p for i in pop),
        "best_rms_s": min(i.scores.rms_s for i in pop),
        "best_bfr_p": max(i.scores.bfr_p for i in pop),
        "best_bfr_s": max(i.scores.bfr_s for i in pop),
        "min_complexity": min(i.fitness.complexity for i in front),
        "max_complexity": max(i.fitness.complexity for i in front),
    }


def run(cfg: GpConfig, grammar: Grammar, data, callback=None) -> ParetoFront:
    """Evolve model structures and return the final non-dominated set.

    ``data`` is a :class:`~tagsysid.data.DatasetBundle`. Runs exactly
    ``cfg.iterations`` breeding generations after the initial population.
    ``callback(generation, population)`` is called after every selection.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    engine = Engine(grammar, data, cfg)
    pop = init_population(grammar, cfg, rng)
    engine.evaluate(pop)
    pop = _select(pop, cfg.population_size)
    history = [_summary(0, pop)]
    _log(history[-1])
    if callback:
        callback(0, pop)
    for gen in range(1, cfg.iterations + 1):
        offspring = _breed(pop, rng, grammar, cfg)
        engine.evaluate(offspring)
        pop = _select(pop + offspring, cfg.population_size)
        history.append(_summary(gen, pop))
        _log(history[-1])
        if callback:
            callback(gen, pop)
    return ParetoFront(_front_of(pop), pop, history, engine.evaluations)


def _log(row: dict) -> None:
    logger.info(
        "gen %d front=%d best_rms_p=%.6g best_rms_s=%.6g min_complexity=%d",
        row["generation"], row["front_size"], row["best_rms_p"], row["best_rms_s"], row["min_complexity"],
    )
