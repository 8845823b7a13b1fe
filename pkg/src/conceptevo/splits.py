"""Information-gain thresholds for numeric data properties.

Thresholds are precomputed once per learning problem, greedily and level by
level, like growing one decision tree per property breadth first. The
learner then only ever uses values from this table.

Examples may carry several values for a property. An example belongs to the
left side of a threshold if some value is ``<=`` it and to the right side if
some value is ``>`` it, so it can land on both sides. Entropy tallies count an
example once per label it carries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .kb import NUMERIC, KBError, KnowledgeBase
from .retrieval import LearningProblem

# Gains closer than this are ties; ties go to the smaller threshold.
TIE_EPS = 1e-12


def entropy(n_pos: float, n_neg: float) -> float:
    """Binary entropy in bits of a set with the given class tallies."""
    total = n_pos + n_neg
    if total <= 0:
        raise ValueError("entropy of an empty set is undefined")
    h = 0.0
    for c in (n_pos, n_neg):
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


def _entropy_vec(p: np.ndarray, n: np.ndarray) -> np.ndarray:
    total = p + n
    with np.errstate(divide="ignore", invalid="ignore"):
        fp = np.where(total > 0, p / total, 0.0)
        fn = np.where(total > 0, n / total, 0.0)
        h = -(np.where(fp > 0, fp * np.log2(fp), 0.0) + np.where(fn > 0, fn * np.log2(fn), 0.0))
    return h


def _weighted_gain(lp, ln, rp, rn):
    """Gain of a (possibly overlapping) split from the four side tallies.

    The parent distribution is that of the two sides pooled, which equals the
    covered example set whenever no example straddles the threshold and
    keeps the gain non-negative when some do.
    """
    nl = lp + ln
    nr = rp + rn
    total = nl + nr
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = _entropy_vec(lp + rp, ln + rn) - (
            np.where(total > 0, nl / total, 0.0) * _entropy_vec(lp, ln)
            + np.where(total > 0, nr / total, 0.0) * _entropy_vec(rp, rn)
        )
    return np.maximum(gain, 0.0)


class _Column(NamedTuple):
    names: list[str]
    lo: np.ndarray
    hi: np.ndarray
    pos: np.ndarray
    neg: np.ndarray
    values: list[frozenset]


def _column(examples: LearningProblem, d: str, kb: KnowledgeBase) -> _Column:
    kind = kb.role_signatures.get(d)
    if kind is None:
        raise KeyError(f"unknown data role {d!r}")
    if kind != NUMERIC:
        raise KBError(f"role {d!r} is {kind}, not numeric")
    names, lo, hi, pos, neg, values = [], [], [], [], [], []
    order = kb.index
    for x in sorted(examples.positives | examples.negatives, key=lambda e: order.get(e, -1)):
        vals = kb.numeric_values.get((x, d))
        if not vals:
            continue
        names.append(x)
        lo.append(min(vals))
        hi.append(max(vals))
        pos.append(1.0 if x in examples.positives else 0.0)
        neg.append(1.0 if x in examples.negatives else 0.0)
        values.append(vals)
    return _Column(names, np.array(lo, dtype=float), np.array(hi, dtype=float),
                   np.array(pos), np.array(neg), values)


def _side_tallies(col: _Column, thresholds: np.ndarray):
    """Left/right class tallies for each threshold."""
    order_lo = np.argsort(col.lo, kind="stable")
    lo_sorted = col.lo[order_lo]
    cum_lp = np.concatenate(([0.0], np.cumsum(col.pos[order_lo])))
    cum_ln = np.concatenate(([0.0], np.cumsum(col.neg[order_lo])))
    k = np.searchsorted(lo_sorted, thresholds, side="right")
    lp, ln = cum_lp[k], cum_ln[k]

    order_hi = np.argsort(col.hi, kind="stable")
    hi_sorted = col.hi[order_hi]
    cum_rp = np.concatenate(([0.0], np.cumsum(col.pos[order_hi])))
    cum_rn = np.concatenate(([0.0], np.cumsum(col.neg[order_hi])))
    j = np.searchsorted(hi_sorted, thresholds, side="right")
    rp = cum_rp[-1] - cum_rp[j]
    rn = cum_rn[-1] - cum_rn[j]
    return lp, ln, rp, rn


def information_gain(examples: LearningProblem, d: str, threshold: float, kb: KnowledgeBase) -> float:
    col = _column(examples, d, kb)
    if not col.names:
        return 0.0
    lp, ln, rp, rn = _side_tallies(col, np.array([float(threshold)]))
    return float(_weighted_gain(lp, ln, rp, rn)[0])


def candidate_thresholds(examples: LearningProblem, d: str, kb: KnowledgeBase,
                         prune: bool = True) -> list[float]:
    """Midpoints of adjacent distinct values that ``best_split`` evaluates.

    With ``prune``, a midpoint is skipped when every example holding either
    neighbouring value is single-valued and of the same single class; the
    optimum can never lie strictly inside such a run.
    """
    return list(_candidates(_column(examples, d, kb), prune))


def _candidates(col: _Column, prune: bool) -> np.ndarray:
    labels: dict[float, set[str]] = {}
    unsafe: set[float] = set()
    for vals, p, n in zip(col.values, col.pos, col.neg):
        tag = ("+" if p else "") + ("-" if n else "")
        for v in vals:
            labels.setdefault(v, set()).add(tag)
            if len(vals) > 1:
                unsafe.add(v)
    distinct = sorted(labels)
    if len(distinct) < 2:
        return np.empty(0)
    out = []
    for a, b in zip(distinct, distinct[1:]):
        if prune and a not in unsafe and b not in unsafe:
            la, lb = labels[a], labels[b]
            if len(la) == 1 and la == lb and la != {"+-"}:
                continue
        out.append((a + b) / 2)
    return np.array(out, dtype=float)


class Split(NamedTuple):
    threshold: float
    gain: float
    left: LearningProblem
    right: LearningProblem


def best_split(examples: LearningProblem, d: str, kb: KnowledgeBase,
               prune: bool = True) -> Optional[Split]:
    """Highest-gain midpoint threshold for ``d`` on ``examples``, or ``None``."""
    col = _column(examples, d, kb)
    cands = _candidates(col, prune)
    if len(cands) == 0:
        return None
    gains = _weighted_gain(*_side_tallies(col, cands))
    top = gains.max()
    if top <= TIE_EPS:
        return None
    i = int(np.flatnonzero(gains >= top - TIE_EPS)[0])
    t = float(cands[i])
    left = [x for x, lo in zip(col.names, col.lo) if lo <= t]
    right = [x for x, hi in zip(col.names, col.hi) if hi > t]
    return Split(t, float(gains[i]), _restrict(examples, left), _restrict(examples, right))


def _restrict(examples: LearningProblem, members: list[str]) -> LearningProblem:
    s = set(members)
    return LearningProblem(examples.positives & s, examples.negatives & s)


def _set_entropy(e: LearningProblem) -> float:
    return entropy(len(e.positives), len(e.negatives))


@dataclass
class SplitTable:
    """Ascending, duplicate-free thresholds per numeric role."""

    k: int
    thresholds: dict[str, list[float]] = field(default_factory=dict)

    def get(self, d: str) -> list[float]:
        return self.thresholds.get(d, [])

    def to_json(self) -> dict:
        return {"k": self.k, "thresholds": {d: list(v) for d, v in self.thresholds.items()}}

    @classmethod
    def from_json(cls, obj: dict) -> "SplitTable":
        return cls(int(obj["k"]), {d: [float(x) for x in v] for d, v in obj["thresholds"].items()})


def calculate_splits(kb: KnowledgeBase, problem: LearningProblem, k: int,
                     properties: Optional[list[str]] = None) -> SplitTable:
    """Greedy level-wise threshold search, up to ``k`` thresholds per property.

    Each level visits the properties in declaration order and, within a
    property, the example sets in the current list order. Child sets from all
    properties go into one shared next level, which is sorted by entropy
    (highest first) with pure sets dropped.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    remaining = list(kb.numeric_roles if properties is None else properties)
    found: dict[str, list[float]] = {d: [] for d in remaining}
    root = LearningProblem(problem.positives, problem.negatives)
    current = [root] if root.positives or root.negatives else []
    while remaining and current:
        next_level: list[LearningProblem] = []
        for d in list(remaining):
            for e in current:
                split = best_split(e, d, kb)
                if split is None:
                    continue
                if split.threshold not in found[d]:
                    found[d].append(split.threshold)
                size = len(e.positives) + len(e.negatives)
                for child in (split.left, split.right):
                    # Straddling examples can reproduce the parent; never requeue it.
                    if 0 < len(child.positives) + len(child.negatives) < size:
                        next_level.append(child)
                if len(found[d]) >= k:
                    remaining.remove(d)
                    break
        next_level.sort(key=_set_entropy, reverse=True)
        current = [e for e in next_level if _set_entropy(e) > 0]
    return SplitTable(k, {d: sorted(v) for d, v in found.items()})


def closest_split(table: SplitTable, d: str, o: float) -> float:
    """Threshold nearest to ``o``; ties go to the smaller threshold."""
    ts = table.get(d)
    if not ts:
        raise KeyError(f"no thresholds for {d!r}; run calculate_splits first")
    return min(ts, key=lambda t: (abs(t - o), t))
