"""Initial populations: biased random walks from positive examples, plus the
classic Grow / Full / RampedHalfHalf tree generators.

Random walks start at a positive example, take one of its types weighted by
how common that type is among all positives, and describe up to ``max_t`` of
its outgoing edges (optionally one hop further). The generators are used for
the initializer ablation and for mutation subtrees.
"""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .concept import (And, Atomic, BoolEq, Concept, DataGE, DataLE, Exists, Forall, MaxCard,
                      MinCard, Not, Or, Thing)
from .kb import BOOLEAN, NUMERIC, OBJECT, KnowledgeBase, outgoing_triples, types_of
from .retrieval import LearningProblem
from .splits import SplitTable, closest_split

GROW = "grow"
FULL = "full"
RAMPED = "ramped"
WALK = "walk"
INIT_METHODS = (WALK, GROW, FULL, RAMPED)


def type_counts(kb: KnowledgeBase, positives) -> dict[str, int]:
    """How many positives carry each (super)type."""
    ct: Counter[str] = Counter()
    for e in positives:
        ct.update(types_of(kb, e))
    return dict(ct)


def derive_rng(seed: int, stream: int) -> random.Random:
    """Independent generator for one individual of a seeded run."""
    state = np.random.SeedSequence([seed, stream]).generate_state(2, dtype=np.uint64)
    return random.Random(int(state[0]) << 64 | int(state[1]))


def _sorted_types(kb: KnowledgeBase, x: str) -> list[str]:
    order = {c: i for i, c in enumerate(kb.atomic_concepts)}
    return sorted(types_of(kb, x), key=order.__getitem__)


class Walker:
    """Turns walks over one KB into concepts.

    Precomputes per-instance triple lists and type lists so a walk costs a
    handful of random draws.
    """

    def __init__(self, kb: KnowledgeBase, table: SplitTable, use_data_properties: bool = True):
        self.kb = kb
        self.table = table
        self.use_data = use_data_properties
        self.types = {x: _sorted_types(kb, x) for x in kb.instances}
        self.triples: dict[str, list[tuple[str, object]]] = {}
        for x in kb.instances:
            self.triples[x] = [(r, o) for r, o in outgoing_triples(kb, x) if self._usable(r)]

    def _usable(self, r: str) -> bool:
        kind = self.kb.role_signatures[r]
        if kind == OBJECT:
            return True
        if not self.use_data:
            return False
        # Numeric roles without thresholds cannot be turned into a restriction.
        return kind == BOOLEAN or bool(self.table.get(r))

    def role_obj_to_concept(self, r: str, o, rng: random.Random) -> Concept:
        kind = self.kb.role_signatures[r]
        if kind == OBJECT:
            types = self.types.get(o, [])
            return Exists(r, Atomic(rng.choice(types)) if types else Thing)
        if kind == BOOLEAN:
            return BoolEq(r, o)
        v = closest_split(self.table, r, o)
        return DataGE(r, v) if o >= v else DataLE(r, v)

    def concept_from_example(self, e: str, ct: dict[str, int], max_t: int,
                             rng: random.Random) -> Concept:
        types = self.types[e]
        if types:
            conc: Concept = Atomic(rng.choices(types, weights=[ct.get(t, 0) or 1 for t in types])[0])
        else:
            conc = Thing

        triples = self.triples[e]
        by_role: dict[str, list] = {}
        for r, o in triples:
            by_role.setdefault(r, []).append(o)
        roles = rng.sample(list(by_role), min(max_t, len(by_role)))
        chosen = [(r, rng.choice(by_role[r])) for r in roles]
        if len(chosen) < max_t:
            picked = set(chosen)
            rest = [t for t in triples if t not in picked]
            chosen += rng.sample(rest, min(max_t - len(chosen), len(rest)))

        for r, o in chosen:
            op = And if rng.random() < 0.5 else Or
            conc = op(conc, self._describe(e, r, o, rng))
        return conc

    def _describe(self, e: str, r: str, o, rng: random.Random) -> Concept:
        if self.kb.role_signatures[r] != OBJECT:
            return self.role_obj_to_concept(r, o, rng)
        onward = [(s, v) for s, v in self.triples.get(o, ()) if v != e]
        if not onward or rng.random() < 0.5:
            return self.role_obj_to_concept(r, o, rng)
        by_role: dict[str, list] = {}
        for s, v in onward:
            by_role.setdefault(s, []).append(v)
        s = rng.choice(list(by_role))
        v = rng.choice(by_role[s])
        return Exists(r, self.role_obj_to_concept(s, v, rng))


def role_obj_to_concept(kb: KnowledgeBase, r: str, o, table: SplitTable,
                        rng: random.Random) -> Concept:
    return Walker(kb, table).role_obj_to_concept(r, o, rng)


def concept_from_example(kb: KnowledgeBase, e: str, ct: dict[str, int], max_t: int,
                         table: SplitTable, rng: random.Random) -> Concept:
    return Walker(kb, table).concept_from_example(e, ct, max_t, rng)


def population_from_examples(kb: KnowledgeBase, problem: LearningProblem, size: int, max_t: int,
                             table: SplitTable, seed: int, use_data_properties: bool = True,
                             walker: Optional[Walker] = None) -> list[Concept]:
    """``size`` walk concepts; individual ``i`` draws from its own sub-stream."""
    if size < 1:
        raise ValueError("population size must be >= 1")
    if not problem.positives:
        raise ValueError("random-walk initialization needs at least one positive example")
    walker = walker or Walker(kb, table, use_data_properties)
    order = kb.index
    positives = sorted(problem.positives, key=order.__getitem__)
    ct = type_counts(kb, positives)
    out = []
    for i in range(size):
        rng = derive_rng(seed, i)
        out.append(walker.concept_from_example(rng.choice(positives), ct, max_t, rng))
    return out


@dataclass
class PrimitiveSet:
    """Building blocks for random trees, all taken from the KB and split table."""

    atomic_concepts: list[str]
    object_roles: list[str]
    numeric_thresholds: dict[str, list[float]] = field(default_factory=dict)
    boolean_roles: list[str] = field(default_factory=list)
    max_cardinality: int = 5
    include_thing: bool = True

    @classmethod
    def from_kb(cls, kb: KnowledgeBase, table: SplitTable, max_cardinality: int = 5,
                use_data_properties: bool = True) -> "PrimitiveSet":
        if max_cardinality < 1:
            raise ValueError("max_cardinality must be >= 1")
        numeric = {d: list(table.get(d)) for d in kb.numeric_roles if table.get(d)}
        return cls(
            atomic_concepts=list(kb.atomic_concepts),
            object_roles=list(kb.object_roles),
            numeric_thresholds=numeric if use_data_properties else {},
            boolean_roles=list(kb.boolean_roles) if use_data_properties else [],
            max_cardinality=max_cardinality,
        )

    def leaf_makers(self) -> list[Callable[[random.Random], Concept]]:
        makers: list[Callable[[random.Random], Concept]] = []
        if self.include_thing:
            makers.append(lambda rng: Thing)
        for c in self.atomic_concepts:
            makers.append(lambda rng, c=c: Atomic(c))
        for d, ts in self.numeric_thresholds.items():
            makers.append(lambda rng, d=d, ts=ts: DataLE(d, rng.choice(ts)))
            makers.append(lambda rng, d=d, ts=ts: DataGE(d, rng.choice(ts)))
        for b in self.boolean_roles:
            makers.append(lambda rng, b=b: BoolEq(b, rng.random() < 0.5))
        return makers

    def unary_makers(self) -> list[Callable[[random.Random, Concept], Concept]]:
        n = self.max_cardinality
        makers: list[Callable[[random.Random, Concept], Concept]] = [lambda rng, c: Not(c)]
        for r in self.object_roles:
            makers += [
                lambda rng, c, r=r: Exists(r, c),
                lambda rng, c, r=r: Forall(r, c),
                lambda rng, c, r=r: MinCard(rng.randint(1, n), r, c),
                lambda rng, c, r=r: MaxCard(rng.randint(1, n), r, c),
            ]
        return makers

    binary_makers: Sequence = (And, Or)


class TreeFactory:
    """Grow/Full/RampedHalfHalf generation over a primitive set."""

    def __init__(self, prims: PrimitiveSet):
        self.prims = prims
        self.leaves = prims.leaf_makers()
        if not self.leaves:
            raise ValueError("primitive set has no leaf candidates")
        self.unary = prims.unary_makers()
        self.binary = list(prims.binary_makers)
        n_internal = len(self.unary) + len(self.binary)
        self.terminal_ratio = len(self.leaves) / (len(self.leaves) + n_internal)

    def leaf(self, rng: random.Random) -> Concept:
        return rng.choice(self.leaves)(rng)

    def internal(self, rng: random.Random, make_child: Callable[[], Concept]) -> Concept:
        i = rng.randrange(len(self.unary) + len(self.binary))
        if i < len(self.unary):
            return self.unary[i](rng, make_child())
        op = self.binary[i - len(self.unary)]
        return op(make_child(), make_child())

    def generate(self, method: str, min_h: int, max_h: int, rng: random.Random) -> Concept:
        if not 0 <= min_h <= max_h:
            raise ValueError(f"need 0 <= min_h <= max_h, got {min_h}, {max_h}")
        if method == RAMPED:
            method = GROW if rng.random() < 0.5 else FULL
        if method not in (GROW, FULL):
            raise ValueError(f"unknown tree method {method!r}")
        height = rng.randint(min_h, max_h)
        return self._build(method, 0, min_h, height, rng)

    def _build(self, method: str, d: int, min_h: int, height: int, rng: random.Random) -> Concept:
        stop = d == height or (method == GROW and d >= min_h and rng.random() < self.terminal_ratio)
        if stop:
            return self.leaf(rng)
        return self.internal(rng, lambda: self._build(method, d + 1, min_h, height, rng))


def random_tree(method: str, min_h: int, max_h: int, prims: PrimitiveSet,
                rng: random.Random) -> Concept:
    return TreeFactory(prims).generate(method, min_h, max_h, rng)


def population_from_generator(factory: TreeFactory, method: str, size: int, seed: int,
                              min_h: int = 1, max_h: int = 6) -> list[Concept]:
    return [factory.generate(method, min_h, max_h, derive_rng(seed, i)) for i in range(size)]
