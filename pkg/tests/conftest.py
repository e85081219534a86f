from pathlib import Path

import numpy as np
import pytest

from fuzzkb.core import (
    CATEGORICAL,
    FeatureSpec,
    FuzzyRule,
    KnowledgeBase,
    LabeledDataset,
    TriangularMF,
)
from fuzzkb.data import load_dataset

DATA = Path(__file__).resolve().parent.parent / "data"
HEPATITIS = DATA / "hepatitis.data"
IRIS = DATA / "iris.data"
TICTACTOE = DATA / "tic-tac-toe.data"


@pytest.fixture(scope="session")
def hepatitis():
    return load_dataset("hepatitis", HEPATITIS)


@pytest.fixture(scope="session")
def iris():
    return load_dataset("iris", IRIS)


@pytest.fixture(scope="session")
def tictactoe():
    return load_dataset("tictactoe", TICTACTOE)


def random_problem(rng, max_features=3, max_rules=4, max_rows=20):
    """A small random knowledge base plus a dataset over the same schema."""
    n_features = int(rng.integers(1, max_features + 1))
    n_classes = int(rng.integers(2, 4))
    features = []
    for i in range(n_features):
        if rng.random() < 0.7:
            lo = float(rng.uniform(-5, 5))
            features.append(FeatureSpec(f"f{i}", lower=lo, upper=lo + float(rng.uniform(0.5, 10)),
                                        num_linguistic=int(rng.integers(1, 4))))
        else:
            k = int(rng.integers(2, 4))
            features.append(FeatureSpec(f"f{i}", CATEGORICAL, categories=[f"v{j}" for j in range(k)]))
    partitions = []
    for f in features:
        if f.is_numeric:
            centers = np.sort(rng.uniform(f.lower, f.upper, f.num_linguistic))
            partitions.append([TriangularMF(float(c), float(rng.uniform(f.w_min, f.span)))
                               for c in centers])
    rules = []
    for _ in range(int(rng.integers(1, max_rules + 1))):
        ants = [None if rng.random() < 0.3 else int(rng.integers(0, f.arity)) for f in features]
        rules.append(FuzzyRule(ants, int(rng.integers(0, n_classes))))
    classes = [f"k{c}" for c in range(n_classes)]
    kb = KnowledgeBase(features, classes, partitions, rules)
    rows = []
    for _ in range(int(rng.integers(1, max_rows + 1))):
        values = []
        for f in features:
            if rng.random() < 0.15:
                values.append(None)
            elif f.is_numeric:
                values.append(float(rng.uniform(f.lower, f.upper)))
            else:
                values.append(int(rng.integers(0, f.arity)))
        rows.append((values, int(rng.integers(0, n_classes))))
    return kb, LabeledDataset.from_rows(features, classes, rows)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
