"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that the terminal summary prints after the run.
The long reproduction runs are marked ``slow``.
"""
import statistics
import time

import numpy as np
import pytest

from fuzzkb.bootstrap import bootstrap_sources
from fuzzkb.cli import generations_to_target, main
from fuzzkb.core import (
    FeatureSpec,
    FuzzyRule,
    KnowledgeBase,
    LabeledDataset,
    TriangularMF,
    accuracy,
    classify_instance,
    complexity,
    evaluate_kb,
    firing_strength,
    fitness,
    kb_to_json,
    membership_degree,
    repair_partition,
)
from fuzzkb.data import load_dataset
from fuzzkb.evolution import (
    EvolutionConfig,
    apply_tvm,
    insertion_deletion_mutate,
    integrate,
    run_baseline_ga,
)
from fuzzkb.genome import GeneBounds, Genome, Schema, decode, encode, random_genome

import oracle
from conftest import random_problem

RESULTS = []
SEEDS = range(5)


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def run_nes(data, seed, **cfg):
    sources = bootstrap_sources(data, 3, seed=seed)
    return integrate(sources, data, EvolutionConfig(seed=seed, **cfg))


def median_accuracy(data, seeds, **cfg):
    accs = [run_nes(data, s, **cfg).best_report.accuracy for s in seeds]
    return statistics.median(accs), accs


def test_criterion_1_equation_suite():
    start = time.perf_counter()
    tol = 1e-12
    X = FeatureSpec("x", lower=0.0, upper=10.0)
    uniform = (TriangularMF(0.0, 5.0), TriangularMF(5.0, 5.0), TriangularMF(10.0, 5.0))
    kb = KnowledgeBase([X, X], ["Die", "Live"], [uniform, uniform],
                       [FuzzyRule([1, None], 0), FuzzyRule([0, 0], 1), FuzzyRule([None, 1], 1)])
    rows = LabeledDataset.from_rows([X], ["a", "b"], [((0.0,), 0), ((1.0,), 0), ((9.0,), 1), ((10.0,), 0)])
    split = KnowledgeBase([X], ["a", "b"], [uniform], [FuzzyRule([0], 0), FuzzyRule([2], 1)])
    none_fire = KnowledgeBase([X], ["a", "b"], [uniform], [FuzzyRule([0], 0)])
    far = LabeledDataset.from_rows([X], ["a", "b"], [((6.0,), 0), ((9.0,), 1)])
    checks = {
        "mf apex": membership_degree(TriangularMF(5, 2), 5) == 1.0,
        "mf support": membership_degree(TriangularMF(5, 2), 7) == 0.0,
        "mf half": membership_degree(TriangularMF(5, 2), 6) == 0.5,
        "firing product": abs(firing_strength(FuzzyRule([1, 1], 0), kb, (2.5, 4.0)) - 0.4) <= tol,
        "firing empty": firing_strength(FuzzyRule([None, None], 0), kb, (3.0, 7.0)) == 1.0,
        "classify single": classify_instance(split, (1.0,)) == 0,
        "classify tie": classify_instance(kb, (7.0, 3.0)) == 0,
        "classify none": classify_instance(none_fire, (8.0,)) is None,
        "accuracy 3/4": abs(accuracy(split, rows) - 0.75) <= tol,
        "accuracy zero": accuracy(none_fire, far) == 0.0,
        "complexity 1": abs(complexity(10, [8, 12]) - 1.0) <= tol,
        "complexity 2": abs(complexity(10, [5]) - 2.0) <= tol,
        "complexity id": abs(complexity(5, [5, 5, 5]) - 1.0) <= tol,
        "fitness a=1": abs(fitness(0.9, 2.0, 1.0) - 0.45) <= tol,
        "fitness a=0": abs(fitness(0.9, 2.0, 0.0) - 0.9) <= tol,
        # 40-digit mpmath value of 0.9 / 2**0.01
        "fitness a=0.01": abs(fitness(0.9, 2.0, 0.01) - 0.89378324589333231) <= tol,
    }
    elapsed = time.perf_counter() - start
    failed = [k for k, ok in checks.items() if not ok]
    record(1, not failed and elapsed < 1.0,
           f"{len(checks) - len(failed)}/{len(checks)} examples exact, {elapsed:.3f}s, failed={failed}")


def test_criterion_2_oracle_equivalence():
    start = time.perf_counter()
    mismatches = 0
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        kb, data = random_problem(rng, max_features=3, max_rules=4, max_rows=20)
        sources = [int(c) for c in rng.integers(1, 6, int(rng.integers(1, 4)))]
        alpha = float(rng.uniform(0, 1))
        got = evaluate_kb(kb, data, sources, alpha)
        want = oracle.report(kb_to_json(kb), data.rows, sources, alpha)
        mismatches += (got.accuracy, got.complexity, got.fitness) != want
    elapsed = time.perf_counter() - start
    record(2, mismatches == 0 and elapsed < 5.0,
           f"{10 - mismatches}/10 reports identical to reference, {elapsed:.2f}s")


def test_criterion_3_elitist_monotonicity(iris):
    start = time.perf_counter()
    violations = 0
    for seed in range(20):
        hist = run_nes(iris, seed, mu=40, generations=50).history
        fits = [s.best_fitness for s in hist]
        violations += sum(b < a for a, b in zip(fits, fits[1:]))
    elapsed = time.perf_counter() - start
    record(3, violations == 0 and elapsed < 60, f"{violations} violations over 20 runs, {elapsed:.1f}s")


@pytest.fixture(scope="module")
def hepatitis_nes(hepatitis):
    return {s: run_nes(hepatitis, s, generations=300) for s in SEEDS}


@pytest.mark.slow
def test_criterion_4_hepatitis(hepatitis_nes):
    accs = [hepatitis_nes[s].best_report.accuracy for s in SEEDS]
    med = statistics.median(accs)
    record(4, med >= 0.85, f"median accuracy {med:.4f} (>= 0.85) over {[round(a, 4) for a in accs]}")


@pytest.mark.slow
def test_criterion_5_iris(iris):
    start = time.perf_counter()
    med, accs = median_accuracy(iris, SEEDS, generations=200)
    per_seed = (time.perf_counter() - start) / len(SEEDS)
    record(5, med >= 0.70 and per_seed < 60,
           f"median accuracy {med:.4f} (>= 0.70) over {[round(a, 4) for a in accs]}, {per_seed:.1f}s/seed")


@pytest.mark.slow
def test_criterion_6_tictactoe(tictactoe):
    start = time.perf_counter()
    med, accs = median_accuracy(tictactoe, SEEDS, generations=400)
    per_seed = (time.perf_counter() - start) / len(SEEDS)
    record(6, med >= 0.60 and per_seed < 180,
           f"median accuracy {med:.4f} (>= 0.60) over {[round(a, 4) for a in accs]}, {per_seed:.1f}s/seed")


@pytest.mark.slow
def test_criterion_7_convergence(hepatitis, hepatitis_nes):
    ga = {s: run_baseline_ga(bootstrap_sources(hepatitis, 3, seed=s), hepatitis,
                             EvolutionConfig(seed=s, generations=300)) for s in SEEDS}
    target = statistics.median(ga[s].best_report.fitness for s in SEEDS)

    def med_gens(runs):
        # never reaching the target counts as infinitely slow
        gens = [generations_to_target(runs[s].history, target) for s in SEEDS]
        return statistics.median(g if g is not None else float("inf") for g in gens), gens

    nes_med, nes_gens = med_gens(hepatitis_nes)
    ga_med, ga_gens = med_gens(ga)
    record(7, nes_med <= ga_med,
           f"target {target:.4f}; NES median {nes_med} {nes_gens} <= GA median {ga_med} {ga_gens}")


def test_criterion_8_properties():
    rng = np.random.default_rng(8)
    failures = {}

    bad = 0
    for _ in range(100):
        kb, _ = random_problem(rng)
        schema = Schema.of(kb)
        bad += decode(encode(kb), schema, GeneBounds.for_schema(schema, 10)) != kb
    failures["roundtrip"] = bad

    X = FeatureSpec("x", lower=-3.0, upper=7.0, num_linguistic=3)
    schema = Schema((X, FeatureSpec("y", lower=0.0, upper=1.0, num_linguistic=2)), ("a", "b", "c"))
    b = GeneBounds.for_schema(schema, 8)
    cfg = EvolutionConfig(p_mf_mutation=1.0, p_insert=0.5, p_delete=0.5, generations=100)
    bad = 0
    for i in range(10_000):
        g = random_genome(schema, b, int(rng.integers(1, 9)), rng)
        out = apply_tvm(g, b, i % 100, 100, cfg, rng)
        bad += not (np.all(out.mf >= b.mf_lower) and np.all(out.mf <= b.mf_upper))
    failures["tvm"] = bad

    bad = 0
    g = random_genome(schema, b, 1, rng)
    for _ in range(10_000):
        g = insertion_deletion_mutate(g, schema, b, cfg, rng)
        bad += not 1 <= g.rule_count <= b.max_rules
    failures["insert/delete"] = bad

    bad = 0
    for _ in range(100):
        part = [TriangularMF(float(c), float(w))
                for c, w in zip(rng.uniform(-10, 15, 3), rng.uniform(1e-3, 20, 3))]
        once = repair_partition(part, X)
        bad += repair_partition(once, X) != once
    failures["repair"] = bad

    record(8, not any(failures.values()), f"violations {failures}")


@pytest.mark.slow
def test_criterion_9_synthetic(tmp_path):
    accs = []
    for seed in range(3):
        path = tmp_path / f"synth{seed}.csv"
        assert main(["synth", "--rows", "300", "--seed", str(seed), "--out", str(path)]) == 0
        data = load_dataset("generic", path)
        accs.append(run_nes(data, seed, generations=200).best_report.accuracy)
    med = statistics.median(accs)
    record(9, med >= 0.9, f"median accuracy {med:.4f} (>= 0.9) within 200 generations over {accs}")
