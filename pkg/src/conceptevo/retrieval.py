"""Closed-world instance retrieval and confusion counts.

Instance sets are boolean masks over ``kb.instances``. A :class:`Retriever`
memoizes the mask of every subtree it has seen; trees produced by crossover
and mutation share most of their subtrees with their parents, so a new
individual usually costs only a few mask operations.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Union

import numpy as np

from . import kernels
from .concept import (And, Atomic, BoolEq, Concept, DataGE, DataLE, Exists, Forall, MaxCard,
                      MinCard, Not, Or, ThingNode, check_concept)
from .kb import KBError, KnowledgeBase


@dataclass(frozen=True)
class LearningProblem:
    positives: frozenset[str]
    negatives: frozenset[str]

    def __init__(self, positives: Iterable[str], negatives: Iterable[str]):
        object.__setattr__(self, "positives", frozenset(positives))
        object.__setattr__(self, "negatives", frozenset(negatives))

    def validate(self, kb: KnowledgeBase) -> None:
        unknown = sorted((self.positives | self.negatives) - set(kb.index))
        if unknown:
            raise KBError(f"learning problem mentions unknown instances: {', '.join(unknown[:5])}")


def load_problem(source: Union[str, bytes]) -> tuple[LearningProblem, list[str], list[str]]:
    """Parse ``pos <x>`` / ``neg <x>`` lines.

    Returns the problem plus the positives and negatives in file order.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    pos: dict[str, None] = {}
    neg: dict[str, None] = {}
    for lineno, raw in enumerate(source.splitlines(), start=1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        if len(parts) != 2 or parts[0] not in ("pos", "neg"):
            raise KBError(f"expected 'pos <x>' or 'neg <x>', got {raw.strip()!r}", lineno)
        (pos if parts[0] == "pos" else neg).setdefault(parts[1], None)
    return LearningProblem(pos, neg), list(pos), list(neg)


def load_problem_file(path: str) -> tuple[LearningProblem, list[str], list[str]]:
    with open(path, "rb") as fh:
        return load_problem(fh.read())


def dump_problem(positives: Iterable[str], negatives: Iterable[str]) -> str:
    lines = [f"pos {x}" for x in positives] + [f"neg {x}" for x in negatives]
    return "\n".join(lines) + "\n"


class Confusion(NamedTuple):
    tp: int
    fp: int
    tn: int
    fn: int


class Retriever:
    """Evaluates concepts against one knowledge base, with a subtree cache.

    The cache only ever stores the exact mask a node evaluates to, so hits
    and misses are indistinguishable from outside. Concurrent callers may
    race to fill the same entry; both compute the same value.
    """

    def __init__(self, kb: KnowledgeBase, max_cache: int = 500_000):
        self.kb = kb
        self.arrays = kb.arrays
        self.max_cache = max_cache
        self._cache: dict[Concept, np.ndarray] = {}
        self._lock = threading.Lock()
        n = self.arrays.n
        self._all = np.ones(n, dtype=bool)
        self._all.flags.writeable = False

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()

    def mask(self, c: Concept) -> np.ndarray:
        """Read-only boolean mask of the instances of ``c``."""
        hit = self._cache.get(c)
        if hit is not None:
            return hit
        m = self._compute(c)
        m.flags.writeable = False
        if len(self._cache) >= self.max_cache:
            with self._lock:
                self._cache.clear()
        self._cache[c] = m
        return m

    def _compute(self, c: Concept) -> np.ndarray:
        a = self.arrays
        if isinstance(c, ThingNode):
            return self._all
        if isinstance(c, Atomic):
            try:
                return a.extension[c.name]
            except KeyError:
                raise KeyError(f"unknown concept {c.name!r}") from None
        if isinstance(c, Not):
            return ~self.mask(c.child)
        if isinstance(c, And):
            return self.mask(c.left) & self.mask(c.right)
        if isinstance(c, Or):
            return self.mask(c.left) | self.mask(c.right)
        if isinstance(c, (Exists, Forall, MinCard, MaxCard)):
            if c.role not in a.indptr:
                check_concept(c, self.kb)
            counts = kernels.successor_counts(a.indptr[c.role], a.indices[c.role], self.mask(c.child))
            if isinstance(c, Exists):
                return counts > 0
            if isinstance(c, Forall):
                return counts == a.degree[c.role]
            if isinstance(c, MinCard):
                return counts >= c.n
            return counts <= c.n
        if isinstance(c, (DataLE, DataGE)):
            if c.role not in a.value_min:
                check_concept(c, self.kb)
            # Existential reading over value sets: some value meets the bound.
            with np.errstate(invalid="ignore"):
                if isinstance(c, DataLE):
                    return a.value_min[c.role] <= c.value
                return a.value_max[c.role] >= c.value
        if isinstance(c, BoolEq):
            try:
                return a.bool_mask[(c.role, c.value)]
            except KeyError:
                check_concept(c, self.kb)
                raise
        raise TypeError(f"not a concept: {c!r}")

    def retrieve(self, c: Concept) -> set[str]:
        names = self.kb.instances
        return {names[i] for i in np.flatnonzero(self.mask(c))}

    def problem_masks(self, problem: LearningProblem) -> tuple[np.ndarray, np.ndarray]:
        idx = self.kb.index
        pos = np.zeros(self.arrays.n, dtype=bool)
        neg = np.zeros(self.arrays.n, dtype=bool)
        pos[[idx[x] for x in problem.positives]] = True
        neg[[idx[x] for x in problem.negatives]] = True
        return pos, neg

    def confusion(self, c: Concept, problem: LearningProblem) -> Confusion:
        pos, neg = self.problem_masks(problem)
        return self.confusion_masks(c, pos, neg)

    def confusion_masks(self, c: Concept, pos: np.ndarray, neg: np.ndarray) -> Confusion:
        m = self.mask(c)
        tp = kernels.count_and(m, pos)
        fp = kernels.count_and(m, neg)
        n_pos = int(np.count_nonzero(pos))
        n_neg = int(np.count_nonzero(neg))
        return Confusion(tp, fp, n_neg - fp, n_pos - tp)


def retrieve(kb: KnowledgeBase, c: Concept) -> set[str]:
    check_concept(c, kb)
    return Retriever(kb).retrieve(c)


def confusion(kb: KnowledgeBase, c: Concept, problem: LearningProblem) -> Confusion:
    check_concept(c, kb)
    return Retriever(kb).confusion(c, problem)
