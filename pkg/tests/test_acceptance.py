"""End-to-end acceptance checks.

Each test prints one ``[PASS]`` / ``[FAIL]`` line for its criterion, then
asserts it. Run with ``pytest tests/test_acceptance.py -v`` to see the
lines; the slow ones are marked ``slow``.
"""
import os
import random
import statistics
import subprocess
import sys
import time

import pytest

from conceptevo.concept import (And, Atomic, BoolEq, DataGE, DataLE, Exists, Forall, MaxCard,
                                MinCard, Not, Or, Thing, iter_preorder, parse)
from conceptevo.evolve import Evaluator, GPConfig, evolve_run, fitness
from conceptevo import evolve as ev
from conceptevo.harness import cross_validate, generate_family_data, generate_family_kb
from conceptevo.initialization import population_from_examples
from conceptevo.kb import load_kb
from conceptevo.retrieval import Retriever, load_problem
from conceptevo.splits import best_split, calculate_splits, candidate_thresholds, entropy
from oracles import combine, exhaustive_best_split, iter_concepts, random_split_instance


@pytest.fixture
def report(capsys):
    def emit(tag, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {tag}: {detail}")
        return ok
    return emit


def _uncle(n_families, seed):
    kb_text, uncle_text = generate_family_kb(n_families, seed)
    kb = load_kb(kb_text)
    problem, _, _ = load_problem(uncle_text)
    return kb, problem


@pytest.mark.slow
def test_c1_uncle_reproduction(report):
    f1s, accs, slowest = [], [], 0.0
    for seed in (1, 2, 3):
        kb, problem = _uncle(10, seed)
        rep = cross_validate(kb, problem, GPConfig(seed=seed), folds=10)
        f1s.append(rep.aggregate["f1_mean"])
        accs.append(rep.aggregate["accuracy_mean"])
        slowest = max([slowest] + [f.wall_time for f in rep.folds])
    f1, acc = statistics.fmean(f1s), statistics.fmean(accs)
    ok = f1 >= 0.95 and acc >= 0.95 and slowest < 60
    report("criterion 1 uncle", ok,
           f"mean test F1 {f1:.3f}, accuracy {acc:.3f} (>= 0.95), slowest fold {slowest:.1f}s (< 60s)")
    assert ok


def test_c2_initialization_speed(report):
    kb, problem = _uncle(10, 1)
    table = calculate_splits(kb, problem, 10)
    t0 = time.perf_counter()
    pop = population_from_examples(kb, problem, 1000, 2, table, seed=0)
    took = time.perf_counter() - t0
    ok = len(pop) == 1000 and took < 2.0
    report("criterion 2 init speed", ok, f"1000 walks on {len(kb.instances)} instances in {took:.3f}s (< 2s)")
    assert ok


def _mini_vocabulary(kb):
    leaves = [Thing] + [Atomic(c) for c in kb.atomic_concepts] + [
        DataLE("age", 39.0), DataGE("age", 39.0),
        BoolEq("employed", True), BoolEq("employed", False)]
    unary = [Not]
    for r in kb.object_roles:
        unary += [lambda c, r=r: Exists(r, c), lambda c, r=r: Forall(r, c)]
        unary += [lambda c, r=r, n=n: MinCard(n, r, c) for n in (1, 2)]
        unary += [lambda c, r=r, n=n: MaxCard(n, r, c) for n in (0, 1)]
    return leaves, unary, [And, Or]


@pytest.mark.slow
def test_c3_retrieval_oracle(mini, report):
    r = Retriever(mini)
    sets = {}
    count = mismatches = 0
    t0 = time.perf_counter()
    for c in iter_concepts(5, *_mini_vocabulary(mini)):
        want = combine(mini, c, sets)
        if c.length < 5:
            sets[c] = want
        count += 1
        mismatches += r.retrieve(c) != want
    took = time.perf_counter() - t0
    ok = mismatches == 0 and took < 120
    report("criterion 3 retrieval oracle", ok,
           f"{count} concepts of length <= 5, {mismatches} mismatches, {took:.1f}s (< 120s)")
    assert ok


def _split_sweep():
    rng = random.Random(2024)
    rows = []
    for _ in range(200):
        kb, e, props = random_split_instance(rng)
        for d in props:
            rows.append((kb, e, d))
    return rows


def test_c4_split_oracle(report):
    wrong = 0
    rows = _split_sweep()
    for kb, e, d in rows:
        got, want = best_split(e, d, kb), exhaustive_best_split(kb, e, d)
        if (got is None) != (want is None):
            wrong += 1
        elif got and (got.threshold != want[0] or abs(got.gain - want[1]) > 1e-9):
            wrong += 1
    h = entropy(4, 3)
    ok = wrong == 0 and abs(h - 0.98523) <= 1e-5
    report("criterion 4 split oracle", ok,
           f"{len(rows)} calls on 200 instances, {wrong} disagreements; entropy(4,3) = {h:.6f}")
    assert ok


def test_c4_fayyad_bound(report):
    over = []
    rows = _split_sweep()
    for kb, e, d in rows:
        held = [x for x in e.positives | e.negatives if (x, d) in kb.numeric_values]
        bound = min(sum(x in e.positives for x in held), sum(x in e.negatives for x in held))
        n = len(candidate_thresholds(e, d, kb))
        if n > bound:
            over.append((n, bound))
    ok = not over
    worst = max(over, key=lambda t: t[0] - t[1]) if over else None
    report("criterion 4 candidate bound", ok,
           f"{len(over)} of {len(rows)} calls evaluate more than min(|E+|, |E-|) candidates"
           + (f" (worst {worst[0]} vs bound {worst[1]})" if worst else ""))
    assert ok


@pytest.mark.slow
def test_c5_walk_vs_ramped(report):
    # Full 10-fold CV per seed: a single holdout has about six test
    # positives, so one miss moves its F1 by 0.1 or more.
    walk, ramped = [], []
    for seed in range(10):
        kb, problem = _uncle(10, seed)
        for init, out in (("walk", walk), ("ramped", ramped)):
            rep = cross_validate(kb, problem, GPConfig(seed=seed, init_method=init), folds=10)
            out.append(rep.aggregate["f1_mean"])
    mw, mr = statistics.median(walk), statistics.median(ramped)
    worst = min(w - r for w, r in zip(walk, ramped))
    ok = mw >= mr and worst >= -0.02
    report("criterion 5 init ablation", ok,
           f"median test F1 walk {mw:.3f} vs ramped {mr:.3f}; worst per-seed gap {worst:+.3f} (>= -0.02)"
           f"; walk {[round(x, 3) for x in walk]}, ramped {[round(x, 3) for x in ramped]}")
    assert ok


@pytest.mark.slow
def test_c6_no_data_properties(report):
    data = generate_family_data(20, 1, with_age=True)
    kb = load_kb(data.kb_text)
    problem, _, _ = load_problem(data.age_text)
    full = cross_validate(kb, problem, GPConfig(seed=1), folds=5)
    bare = cross_validate(kb, problem, GPConfig(seed=1, use_data_properties=False), folds=5)
    leaked = [f.concept for f in bare.folds
              if any(isinstance(n, (DataLE, DataGE, BoolEq)) for n in iter_preorder(parse(f.concept)))]
    drop = full.aggregate["f1_mean"] - bare.aggregate["f1_mean"]
    ok = not leaked and drop >= 0.2
    report("criterion 6 data-property ablation", ok,
           f"F1 {full.aggregate['f1_mean']:.3f} -> {bare.aggregate['f1_mean']:.3f} "
           f"(drop {drop:.3f} >= 0.2); {len(leaked)} concepts with data restrictions")
    assert ok


def test_c7_cli_determinism(tmp_path, report):
    env = {**os.environ, "EVOLEARNER_THREADS": "1"}
    cli = [sys.executable, "-m", "conceptevo"]
    subprocess.run(cli + ["gen-family", "--families", "3", "--seed", "7", "--out-dir", str(tmp_path)],
                   check=True, env=env)
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        subprocess.run(cli + ["cv", "--kb", str(tmp_path / "kb.txt"), "--problem",
                              str(tmp_path / "uncle.txt"), "--folds", "3", "--population", "150",
                              "--generations", "20", "--seed", "7", "--out", str(out)],
                       check=True, env=env)
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1]
    report("criterion 7 determinism", ok, f"two cv reports, {len(outs[0])} bytes each, identical={ok}")
    assert ok


def test_c8_gp_invariants(monkeypatch, report):
    kb, problem = _uncle(5, 3)
    table = calculate_splits(kb, problem, 10)
    depths, sizes = [], []
    evaluate, select = Evaluator.evaluate, ev.tournament_select

    def spy_eval(self, ind):
        depths.append(ind.genome.depth)
        evaluate(self, ind)

    def spy_select(pop, k, count, rng):
        sizes.append(len(pop))
        return select(pop, k, count, rng)

    monkeypatch.setattr(Evaluator, "evaluate", spy_eval)
    monkeypatch.setattr(ev, "tournament_select", spy_select)
    cfg = GPConfig(population_size=200, generations=40, seed=3, p_mutation=0.3)
    res = evolve_run(kb, problem, table, cfg)
    hof = [h["hof_fitness"] for h in res.history]
    checks = {
        "hall of fame monotone": hof == sorted(hof),
        "depth <= 17": max(depths) <= 17,
        "population constant": set(sizes) == {200} and len(sizes) == 40,
        "fitness(1, 7, 2048) = 2041": fitness(1.0, 7, 2048) == 2041,
    }
    ok = all(checks.values())
    report("criterion 8 GP invariants", ok,
           f"{len(depths)} evaluations, max depth {max(depths)}; "
           + ", ".join(f"{k}: {'ok' if v else 'broken'}" for k, v in checks.items()))
    assert ok
