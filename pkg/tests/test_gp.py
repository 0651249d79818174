import numpy as np
import pytest

from tagsysid import gp
from tagsysid.data import DatasetBundle, make_benchmark
from tagsysid.genotype import random_genotype
from tagsysid.gp import GpConfig, crossover, decode, init_population, mutate, run
from tagsysid.grammar import builtin_grammar
from tagsysid.objectives import dominates


@pytest.fixture(scope="module")
def grammar():
    return builtin_grammar("narmax")


@pytest.fixture(scope="module")
def bundle():
    return DatasetBundle(make_benchmark("S1", 300, seed=4))


def test_config_defaults():
    cfg = GpConfig()
    assert (cfg.M, cfg.L, cfg.max_adjunctions) == (100, 150, 150)
    assert (cfg.p_crossover, cfg.p_mutation) == (1.0, 0.8)


@pytest.mark.parametrize("kw", [
    {"population_size": 0}, {"iterations": -1}, {"p_crossover": 1.5},
    {"p_mutation": -0.1}, {"metric_form": "other"}, {"threads": 0},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        GpConfig(**kw)


def test_init_population(grammar):
    cfg = GpConfig(rng_seed=5)
    pop = init_population(grammar, cfg)
    assert len(pop) == 100
    counts = [ind.adjunction_count for ind in pop]
    assert min(counts) == 0 and max(counts) == cfg.max_adjunctions // 10
    again = init_population(grammar, cfg)
    assert [i.genotype.key for i in pop] == [i.genotype.key for i in again]


def test_crossover_of_bare_individuals_copies(grammar, rng):
    a = decode(grammar, random_genotype(grammar, 0, rng))
    b = decode(grammar, random_genotype(grammar, 0, rng))
    c1, c2 = crossover(a, b, rng, grammar, 150)
    assert c1 is not a and c1.genotype is a.genotype
    assert c2.genotype is b.genotype
    assert c1.origin == c2.origin == "reproduction"


def test_mutation_rate(grammar):
    rng = np.random.default_rng(0)
    cfg = GpConfig(p_mutation=0.8)
    ind = decode(grammar, random_genotype(grammar, 5, rng))
    hits = sum(mutate(ind, rng, grammar, cfg) is not ind for _ in range(10_000))
    assert abs(hits / 10_000 - 0.8) <= 0.02


def test_every_pair_attempts_crossover(grammar, bundle, monkeypatch):
    calls = []
    real = gp.crossover

    def spy(*args, **kw):
        calls.append(1)
        return real(*args, **kw)

    monkeypatch.setattr(gp, "crossover", spy)
    cfg = GpConfig(population_size=20, iterations=2, rng_seed=1)
    run(cfg, grammar, bundle)
    assert len(calls) == 2 * 10


def test_zero_iterations_returns_initial_front(grammar, bundle):
    cfg = GpConfig(population_size=20, iterations=0, rng_seed=2)
    front = run(cfg, grammar, bundle)
    assert len(front.history) == 1
    assert len(front.population) == 20
    assert all(m.rank == 0 for m in front)


def test_run_is_deterministic(grammar, bundle):
    cfg = GpConfig(population_size=20, iterations=5, rng_seed=9)
    a, b = run(cfg, grammar, bundle), run(cfg, grammar, bundle)
    assert [str(m.phenotype) for m in a] == [str(m.phenotype) for m in b]
    assert a.objective_points() == b.objective_points()
    assert a.history == b.history


def test_front_is_non_dominated_and_sorted(grammar, bundle):
    front = run(GpConfig(population_size=30, iterations=8, rng_seed=3), grammar, bundle)
    pts = front.objective_points()
    assert all(not dominates(p, q) for p in pts for q in pts)
    assert [p[2] for p in pts] == sorted(p[2] for p in pts)
    assert all(m.adjunction_count <= 150 for m in front.population)
    assert len({m.phenotype for m in front}) == len(front)


def test_callback_sees_every_generation(grammar, bundle):
    gens = []
    run(GpConfig(population_size=10, iterations=3, rng_seed=0), grammar, bundle,
        callback=lambda g, pop: gens.append((g, len(pop))))
    assert gens == [(0, 10), (1, 10), (2, 10), (3, 10)]


def test_threads_give_valid_front(grammar, bundle):
    front = run(GpConfig(population_size=20, iterations=3, rng_seed=0, threads=4), grammar, bundle)
    assert len(front) >= 1
