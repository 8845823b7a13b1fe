"""Experiment harness: synthetic kinship data, stratified k-fold CV, reports."""
from __future__ import annotations

import json
import random
import statistics
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .concept import And, Atomic, Concept, DataGE, Exists, Or, serialize
from .evolve import GPConfig, evolve_run
from .kb import KnowledgeBase, format_value, load_kb
from .retrieval import LearningProblem, Retriever, dump_problem
from .splits import SplitTable, calculate_splits

UNCLE = And(Atomic("Male"), Or(Exists("married", Exists("hasSibling", Atomic("Parent"))),
                               Exists("hasSibling", Atomic("Parent"))))
AGE_THRESHOLD = 45
SENIOR = DataGE("age", AGE_THRESHOLD)


def f1_score(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


# --------------------------------------------------------------------------
# synthetic data

_CLASSES = ["Person", "Male", "Female", "Parent", "Child", "Brother", "Sister",
            "Grandfather", "Father", "Mother", "Daughter"]
_SUBCLASSES = [("Male", "Person"), ("Female", "Person"), ("Parent", "Person"),
               ("Child", "Person"), ("Brother", "Male"), ("Sister", "Female"),
               ("Father", "Male"), ("Father", "Parent"), ("Mother", "Female"),
               ("Mother", "Parent"), ("Grandfather", "Father"), ("Daughter", "Female"),
               ("Daughter", "Child")]
_ROLES = ["hasChild", "hasParent", "hasSibling", "married"]


@dataclass
class _Person:
    name: str
    male: bool
    age: int
    family: int
    spouse: Optional["_Person"] = None
    parents: list["_Person"] = field(default_factory=list)
    children: list["_Person"] = field(default_factory=list)
    siblings: list["_Person"] = field(default_factory=list)


@dataclass
class FamilyData:
    kb_text: str
    uncle_text: str
    age_text: str


def generate_family_data(n_families: int, seed: int, with_age: bool = False) -> FamilyData:
    """Three-generation kinship KB plus labelled problems.

    The Uncle problem labels every instance satisfying ``UNCLE`` as positive
    and samples as many negatives from the rest. With ``with_age`` every
    person also gets an ``age`` and an age problem is produced: the middle
    generation only, whose ages are independent of the family structure,
    with ``age >= 45`` as positive. Without ages ``age_text`` is empty.
    """
    if n_families < 1:
        raise ValueError("n_families must be >= 1")
    rng = random.Random(seed)
    people: list[_Person] = []

    def person(male: bool, lo: int, hi: int, family: int) -> _Person:
        p = _Person(f"p{len(people) + 1:04d}", male, rng.randint(lo, hi), family)
        people.append(p)
        return p

    def marry(a: _Person, b: _Person) -> None:
        a.spouse, b.spouse = b, a

    def siblings(group: list[_Person]) -> None:
        for p in group:
            p.siblings = [q for q in group if q is not p]

    def have_children(a: _Person, b: _Person, n: int, lo: int, hi: int) -> list[_Person]:
        kids = [person(rng.random() < 0.5, lo, hi, a.family) for _ in range(n)]
        for k in kids:
            k.parents = [a, b]
        a.children += kids
        b.children += kids
        siblings(kids)
        return kids

    middle: list[_Person] = []
    for f in range(n_families):
        gf = person(True, 62, 90, f)
        gm = person(False, 60, 88, f)
        marry(gf, gm)
        middle += have_children(gf, gm, rng.randint(3, 5), 30, 59)

    couples = []
    for p in list(middle):
        if p.spouse is not None:
            continue
        u = rng.random()
        if u < 0.3:
            options = [q for q in middle if q.spouse is None and q.male != p.male
                       and q.family != p.family]
            if options:
                q = rng.choice(options)
                marry(p, q)
                couples.append((p, q))
                continue
        if u < 0.9:
            q = person(not p.male, 30, 59, p.family)
            marry(p, q)
            middle.append(q)
            couples.append((p, q))
    for a, b in couples:
        if rng.random() < 0.85:
            have_children(a, b, rng.randint(1, 4), 1, 29)

    lines = ["# synthetic kinship graph"]
    lines += [f"class {c}" for c in _CLASSES]
    lines += [f"subclass {c} {d}" for c, d in _SUBCLASSES]
    lines += [f"objprop {r}" for r in _ROLES]
    if with_age:
        lines.append("dataprop age numeric")
    for p in people:
        types = ["Male" if p.male else "Female"]
        if p.children:
            types.append("Father" if p.male else "Mother")
        if p.male and any(c.children for c in p.children):
            types.append("Grandfather")
        if p.parents:
            types.append("Child")
            if not p.male:
                types.append("Daughter")
        if p.siblings:
            types.append("Brother" if p.male else "Sister")
        lines += [f"type {p.name} {t}" for t in types]
    for p in people:
        lines += [f"rel {p.name} hasChild {c.name}" for c in p.children]
        lines += [f"rel {p.name} hasParent {q.name}" for q in p.parents]
        lines += [f"rel {p.name} hasSibling {s.name}" for s in p.siblings]
        if p.spouse is not None:
            lines.append(f"rel {p.name} married {p.spouse.name}")
        if with_age:
            lines.append(f"data {p.name} age {format_value(p.age)}")
    kb_text = "\n".join(lines) + "\n"

    kb = load_kb(kb_text)
    r = Retriever(kb)
    uncles = r.retrieve(UNCLE)
    pos = [x for x in kb.instances if x in uncles]
    rest = [x for x in kb.instances if x not in uncles]
    neg = sorted(rng.sample(rest, min(len(pos), len(rest))), key=kb.index.__getitem__)
    _verify(r, UNCLE, pos, neg)

    age_text = ""
    if with_age:
        seniors = r.retrieve(SENIOR)
        mid = [p.name for p in middle]
        age_pos = [x for x in mid if x in seniors]
        age_neg = [x for x in mid if x not in seniors]
        _verify(r, SENIOR, age_pos, age_neg)
        age_text = dump_problem(age_pos, age_neg)

    return FamilyData(kb_text, dump_problem(pos, neg), age_text)


def _verify(r: Retriever, target: Concept, pos: Sequence[str], neg: Sequence[str]) -> None:
    covered = r.retrieve(target)
    if not set(pos) <= covered or covered & set(neg):
        raise AssertionError(f"generated labels disagree with {serialize(target)}")


def generate_family_kb(n_families: int, seed: int) -> tuple[str, str]:
    """KB text and Uncle learning-problem text."""
    data = generate_family_data(n_families, seed)
    return data.kb_text, data.uncle_text


# --------------------------------------------------------------------------
# cross-validation


@dataclass
class FoldRecord:
    fold: int
    train_accuracy: float
    train_f1: float
    test_accuracy: Optional[float]
    test_f1: Optional[float]
    concept: str
    length: int
    generations: int
    n_train: int
    n_test: int
    split_table: dict
    wall_time: float = 0.0

    def to_json(self, timings: bool = False) -> dict:
        out = {
            "fold": self.fold,
            "train_accuracy": self.train_accuracy,
            "train_f1": self.train_f1,
            "test_accuracy": self.test_accuracy,
            "test_f1": self.test_f1,
            "concept": self.concept,
            "length": self.length,
            "generations": self.generations,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "split_table": self.split_table,
        }
        if timings:
            out["wall_time"] = self.wall_time
        return out


@dataclass
class EvalReport:
    config: dict
    split_table: dict
    folds: list[FoldRecord]
    stratified: bool = True

    @property
    def aggregate(self) -> dict:
        return aggregate(self.folds)

    def to_json(self, timings: bool = False) -> dict:
        return {
            "config": self.config,
            "stratified": self.stratified,
            "split_table": self.split_table,
            "folds": [f.to_json(timings) for f in self.folds],
            "aggregate": self.aggregate,
        }

    def dumps(self, timings: bool = False) -> str:
        return json.dumps(self.to_json(timings), indent=2) + "\n"

    def to_tsv(self) -> str:
        cols = ["fold", "train_accuracy", "train_f1", "test_accuracy", "test_f1", "length", "concept"]
        rows = ["\t".join(cols)]
        for f in self.folds:
            rec = f.to_json()
            rows.append("\t".join("" if rec[c] is None else str(rec[c]) for c in cols))
        return "\n".join(rows) + "\n"


def aggregate(folds: Sequence[FoldRecord]) -> dict:
    """Mean and population standard deviation over folds.

    Uses test metrics when every fold has them, train metrics otherwise.
    """
    held_out = all(f.test_accuracy is not None for f in folds)
    acc = [f.test_accuracy if held_out else f.train_accuracy for f in folds]
    f1 = [f.test_f1 if held_out else f.train_f1 for f in folds]
    length = [float(f.length) for f in folds]

    def ms(xs):
        return (statistics.fmean(xs), statistics.pstdev(xs)) if xs else (0.0, 0.0)

    out = {}
    for name, xs in (("accuracy", acc), ("f1", f1), ("length", length)):
        out[f"{name}_mean"], out[f"{name}_std"] = ms(xs)
    out["train_accuracy_mean"], _ = ms([f.train_accuracy for f in folds])
    out["train_f1_mean"], _ = ms([f.train_f1 for f in folds])
    out["metric_source"] = "test" if held_out else "train"
    return out


def stratified_folds(positives: Sequence[str], negatives: Sequence[str], folds: int,
                     seed: int) -> list[tuple[list[str], list[str]]]:
    """Shuffle each class separately and cut it into ``folds`` near-equal chunks.

    Negative chunks are assigned in reverse so folds with a smaller positive
    chunk get a larger negative one.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if len(positives) + len(negatives) < folds:
        raise ValueError(f"{len(positives) + len(negatives)} examples cannot fill {folds} folds")
    rng = np.random.default_rng(seed)
    pos = [positives[i] for i in rng.permutation(len(positives))]
    neg = [negatives[i] for i in rng.permutation(len(negatives))]
    pos_chunks = [list(c) for c in np.array_split(np.array(pos, dtype=object), folds)]
    neg_chunks = [list(c) for c in np.array_split(np.array(neg, dtype=object), folds)][::-1]
    out = list(zip(pos_chunks, neg_chunks))
    if any(not p and not n for p, n in out):
        raise ValueError(f"too few examples for {folds} folds")
    return out


def derive_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def _metrics(r: Retriever, c: Concept, problem: LearningProblem) -> tuple[float, float]:
    tp, fp, tn, fn = r.confusion(c, problem)
    total = tp + fp + tn + fn
    return (tp + tn) / total, f1_score(tp, fp, fn)


def run_fold(kb: KnowledgeBase, train: LearningProblem, test: Optional[LearningProblem],
             cfg: GPConfig, fold: int, retriever: Optional[Retriever] = None,
             workers: int = 1) -> FoldRecord:
    r = retriever or Retriever(kb)
    t0 = time.monotonic()
    # The timeout clock starts before split computation.
    table = calculate_splits(kb, train, cfg.k_splits) if cfg.use_data_properties else SplitTable(cfg.k_splits)
    result = evolve_run(kb, train, table, cfg, retriever=r, workers=workers, start=t0)
    wall = time.monotonic() - t0
    best = result.best.genome
    tr_acc, tr_f1 = _metrics(r, best, train)
    te_acc = te_f1 = None
    if test is not None:
        te_acc, te_f1 = _metrics(r, best, test)
    return FoldRecord(
        fold=fold, train_accuracy=tr_acc, train_f1=tr_f1, test_accuracy=te_acc, test_f1=te_f1,
        concept=serialize(best), length=best.length, generations=len(result.history) - 1,
        n_train=len(train.positives) + len(train.negatives),
        n_test=0 if test is None else len(test.positives) + len(test.negatives),
        split_table=table.to_json(), wall_time=wall,
    )


def _ordered(kb: KnowledgeBase, xs) -> list[str]:
    return sorted(xs, key=kb.index.__getitem__)


def cross_validate(kb: KnowledgeBase, problem: LearningProblem, cfg: GPConfig, folds: int = 10,
                   shuffle_seed: Optional[int] = None, workers: int = 1) -> EvalReport:
    """Stratified k-fold CV; fold ``i`` evolves with a seed derived from ``cfg.seed``."""
    problem.validate(kb)
    shuffle_seed = cfg.seed if shuffle_seed is None else shuffle_seed
    parts = stratified_folds(_ordered(kb, problem.positives), _ordered(kb, problem.negatives),
                             folds, shuffle_seed)
    r = Retriever(kb)
    records = []
    for i, (tp, tn) in enumerate(parts):
        test = LearningProblem(tp, tn)
        train = LearningProblem(problem.positives - test.positives,
                                problem.negatives - test.negatives)
        fold_cfg = GPConfig(**{**cfg.to_json(), "seed": derive_seed(cfg.seed, i)})
        records.append(run_fold(kb, train, test, fold_cfg, i, r, workers))
    whole = calculate_splits(kb, problem, cfg.k_splits) if cfg.use_data_properties else SplitTable(cfg.k_splits)
    config = {**cfg.to_json(), "folds": folds, "shuffle_seed": shuffle_seed}
    return EvalReport(config, whole.to_json(), records)


def learn(kb: KnowledgeBase, problem: LearningProblem, cfg: GPConfig, workers: int = 1) -> EvalReport:
    """Single run on all examples; the report carries training metrics only."""
    problem.validate(kb)
    rec = run_fold(kb, problem, None, cfg, 0, workers=workers)
    return EvalReport(cfg.to_json(), rec.split_table, [rec], stratified=False)
