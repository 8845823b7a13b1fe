"""Generational GP over concept trees.

The loop follows the classic select / cross / mutate / evaluate cycle with no
elitism inside the population; the best individual ever evaluated is kept
separately and returned. Fitness is accuracy scaled by ``parsimony_x`` minus
tree length.

All selection and variation draws come from one coordinator RNG, so results
depend only on the inputs and the seed, never on how many evaluation
workers are used.
"""
from __future__ import annotations

import logging
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

from .concept import Concept, replace_subtree, serialize, subtree_at
from .initialization import (INIT_METHODS, RAMPED, WALK, PrimitiveSet, TreeFactory,
                             Walker, population_from_examples, population_from_generator)
from .kb import KnowledgeBase
from .retrieval import LearningProblem, Retriever
from .splits import SplitTable

log = logging.getLogger(__name__)

UNIFORM = "uniform"
SHRINK = "shrink"
NODE_REPLACEMENT = "node_replacement"
INSERT = "insert"
MUTATIONS = (UNIFORM, SHRINK, NODE_REPLACEMENT, INSERT)


@dataclass
class GPConfig:
    population_size: int = 800
    generations: int = 200
    tournament_size: int = 7
    p_crossover: float = 0.9
    p_mutation: float = 0.1
    depth_limit: int = 17
    parsimony_x: float = 2048.0
    max_t: int = 2
    k_splits: int = 10
    max_cardinality: int = 5
    timeout: float = 300.0
    seed: int = 0
    init_method: str = WALK
    mutation_variant: str = UNIFORM
    use_data_properties: bool = True
    init_max_height: int = 6

    def __post_init__(self) -> None:
        for name in ("p_crossover", "p_mutation"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        for name in ("population_size", "tournament_size", "max_t", "k_splits",
                     "max_cardinality", "depth_limit", "init_max_height"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.init_method not in INIT_METHODS:
            raise ValueError(f"init_method must be one of {INIT_METHODS}")
        if self.mutation_variant not in MUTATIONS:
            raise ValueError(f"mutation_variant must be one of {MUTATIONS}")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class Individual:
    genome: Concept
    accuracy: Optional[float] = None
    scalar: Optional[float] = None

    @property
    def length(self) -> int:
        return self.genome.length

    @property
    def valid(self) -> bool:
        return self.scalar is not None


def fitness(accuracy: float, length: int, x: float) -> float:
    return accuracy * x - length


def accuracy(kb: KnowledgeBase, c: Concept, problem: LearningProblem,
             retriever: Optional[Retriever] = None) -> float:
    total = len(problem.positives) + len(problem.negatives)
    if total == 0:
        raise ValueError("accuracy needs at least one example")
    r = retriever or Retriever(kb)
    tp, fp, tn, fn = r.confusion(c, problem)
    return (tp + tn) / total


class Evaluator:
    """Accuracy/fitness of genomes on a fixed training problem."""

    def __init__(self, retriever: Retriever, problem: LearningProblem, x: float):
        self.retriever = retriever
        self.x = x
        self.pos, self.neg = retriever.problem_masks(problem)
        self.total = len(problem.positives) + len(problem.negatives)
        if self.total == 0:
            raise ValueError("accuracy needs at least one example")
        self.evaluations = 0

    def accuracy(self, c: Concept) -> float:
        tp, fp, tn, fn = self.retriever.confusion_masks(c, self.pos, self.neg)
        return (tp + tn) / self.total

    def evaluate(self, ind: Individual) -> None:
        acc = self.accuracy(ind.genome)
        ind.accuracy = acc
        ind.scalar = fitness(acc, ind.length, self.x)
        self.evaluations += 1


def _rank(ind: Individual, index: int) -> tuple:
    return (ind.scalar, -ind.length, -index)


def tournament_select(pop: list[Individual], tournament_size: int, count: int,
                      rng: random.Random) -> list[Individual]:
    """``count`` winners of independent size-``tournament_size`` tournaments.

    Contestants are drawn with replacement; ties go to the shorter genome,
    then to the lower population index.
    """
    if not pop:
        raise ValueError("cannot select from an empty population")
    if any(not ind.valid for ind in pop):
        raise ValueError("tournament selection needs evaluated individuals")
    n = len(pop)
    winners = []
    for _ in range(count):
        best = max((rng.randrange(n) for _ in range(tournament_size)),
                   key=lambda i: _rank(pop[i], i))
        winners.append(pop[best])
    return winners


def one_point_crossover(a: Concept, b: Concept, rng: random.Random,
                        depth_limit: int = 17) -> tuple[Concept, Concept]:
    """Swap uniformly chosen subtrees; an over-deep child reverts to its parent.

    Every node is a concept and roles live on the nodes themselves, so any
    swap yields well-typed trees.
    """
    i = rng.randrange(a.length)
    j = rng.randrange(b.length)
    return _swap(a, b, i, j, depth_limit)


def _swap(a: Concept, b: Concept, i: int, j: int, depth_limit: int) -> tuple[Concept, Concept]:
    sa, sb = subtree_at(a, i), subtree_at(b, j)
    c1 = replace_subtree(a, i, sb)
    c2 = replace_subtree(b, j, sa)
    if c1.depth > depth_limit:
        c1 = a
    if c2.depth > depth_limit:
        c2 = b
    return c1, c2


def mutate(c: Concept, variant: str, factory: TreeFactory, rng: random.Random,
           depth_limit: int = 17) -> Concept:
    if variant == UNIFORM:
        addr = rng.randrange(c.length)
        out = replace_subtree(c, addr, factory.generate(RAMPED, 1, 3, rng))
    elif variant == SHRINK:
        out = _shrink(c, rng)
    elif variant == NODE_REPLACEMENT:
        out = _replace_node(c, factory, rng)
    elif variant == INSERT:
        out = _insert(c, factory, rng)
    else:
        raise ValueError(f"unknown mutation {variant!r}")
    return c if out.depth > depth_limit else out


def _internal_addresses(c: Concept) -> list[int]:
    out, stack, addr = [], [c], 0
    while stack:
        node = stack.pop()
        if node.children:
            out.append(addr)
        addr += 1
        stack.extend(reversed(node.children))
    return out


def _shrink(c: Concept, rng: random.Random) -> Concept:
    internal = _internal_addresses(c)
    if not internal:
        return c
    anc = rng.choice(internal)
    sub = subtree_at(c, anc)
    desc = rng.randrange(1, sub.length)
    return replace_subtree(c, anc, subtree_at(sub, desc))


def _replace_node(c: Concept, factory: TreeFactory, rng: random.Random) -> Concept:
    addr = rng.randrange(c.length)
    node = subtree_at(c, addr)
    kids = node.children
    if not kids:
        new = factory.leaf(rng)
    elif len(kids) == 1:
        new = rng.choice(factory.unary)(rng, kids[0])
    else:
        new = rng.choice(factory.binary)(kids[0], kids[1])
    return replace_subtree(c, addr, new)


def _insert(c: Concept, factory: TreeFactory, rng: random.Random) -> Concept:
    addr = rng.randrange(c.length)
    node = subtree_at(c, addr)
    i = rng.randrange(len(factory.unary) + len(factory.binary))
    if i < len(factory.unary):
        new = factory.unary[i](rng, node)
    else:
        op = factory.binary[i - len(factory.unary)]
        other = factory.leaf(rng)
        new = op(node, other) if rng.random() < 0.5 else op(other, node)
    return replace_subtree(c, addr, new)


@dataclass
class RunResult:
    best: Individual
    history: list[dict] = field(default_factory=list)
    timed_out: bool = False

    def __iter__(self):
        # Allows ``best, history = evolve_run(...)``.
        yield self.best
        yield self.history


class _Timeout(Exception):
    pass


def initial_population(kb: KnowledgeBase, problem: LearningProblem, table: SplitTable,
                       cfg: GPConfig, factory: TreeFactory) -> list[Concept]:
    if cfg.init_method == WALK:
        walker = Walker(kb, table, cfg.use_data_properties)
        return population_from_examples(kb, problem, cfg.population_size, cfg.max_t, table,
                                        cfg.seed, walker=walker)
    return population_from_generator(factory, cfg.init_method, cfg.population_size, cfg.seed,
                                     1, cfg.init_max_height)


def evolve_run(kb: KnowledgeBase, problem: LearningProblem, table: SplitTable, cfg: GPConfig,
               retriever: Optional[Retriever] = None, workers: int = 1,
               start: Optional[float] = None) -> RunResult:
    """Evolve a concept for ``problem``; returns the best individual ever seen.

    ``start`` is the ``time.monotonic()`` reading the timeout counts from
    (defaults to now). The run stops after ``cfg.generations`` generations or
    once the timeout passes; a generation cut short by the timeout is
    discarded.
    """
    start = time.monotonic() if start is None else start
    deadline = start + cfg.timeout
    retriever = retriever or Retriever(kb)
    evaluator = Evaluator(retriever, problem, cfg.parsimony_x)
    table = table if cfg.use_data_properties else SplitTable(table.k, {})
    prims = PrimitiveSet.from_kb(kb, table, cfg.max_cardinality, cfg.use_data_properties)
    factory = TreeFactory(prims)
    rng = random.Random(cfg.seed)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def evaluate(inds: list[Individual], check_time: bool) -> None:
        todo = [ind for ind in inds if not ind.valid]
        if pool is None:
            for ind in todo:
                if check_time and time.monotonic() > deadline:
                    raise _Timeout
                evaluator.evaluate(ind)
        else:
            for _ in pool.map(evaluator.evaluate, todo):
                if check_time and time.monotonic() > deadline:
                    raise _Timeout

    def stats(gen: int, pop: list[Individual], hof: Individual) -> dict:
        top = max(range(len(pop)), key=lambda i: _rank(pop[i], i))
        return {
            "generation": gen,
            "best_fitness": pop[top].scalar,
            "best_accuracy": pop[top].accuracy,
            "mean_length": sum(ind.length for ind in pop) / len(pop),
            "hof_fitness": hof.scalar,
            "hof_concept": serialize(hof.genome),
        }

    try:
        pop = [Individual(g) for g in initial_population(kb, problem, table, cfg, factory)]
        # The initial population is always evaluated so there is a result.
        evaluate(pop, check_time=False)
        hof = max(pop, key=lambda ind: ind.scalar)
        history = [stats(0, pop, hof)]
        timed_out = False
        for gen in range(1, cfg.generations + 1):
            if time.monotonic() > deadline:
                timed_out = True
                break
            chosen = tournament_select(pop, cfg.tournament_size, cfg.population_size, rng)
            offspring = [Individual(ind.genome, ind.accuracy, ind.scalar) for ind in chosen]
            for i in range(1, len(offspring), 2):
                if rng.random() < cfg.p_crossover:
                    a, b = one_point_crossover(offspring[i - 1].genome, offspring[i].genome,
                                               rng, cfg.depth_limit)
                    offspring[i - 1] = Individual(a)
                    offspring[i] = Individual(b)
            for i in range(len(offspring)):
                if rng.random() < cfg.p_mutation:
                    offspring[i] = Individual(mutate(offspring[i].genome, cfg.mutation_variant,
                                                     factory, rng, cfg.depth_limit))
            try:
                evaluate(offspring, check_time=True)
            except _Timeout:
                timed_out = True
                break
            pop = offspring
            for ind in pop:
                if ind.scalar > hof.scalar:
                    hof = ind
            history.append(stats(gen, pop, hof))
    finally:
        if pool is not None:
            pool.shutdown()
    log.debug("run finished after %d generations, %d evaluations",
              len(history) - 1, evaluator.evaluations)
    return RunResult(hof, history, timed_out)
