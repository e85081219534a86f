"""Build the initial rule sets to integrate: uniform partitions plus one-pass
(Wang-Mendel style) rule induction from each source's share of the data."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import (
    FeatureSpec,
    FuzzyRule,
    KnowledgeBase,
    LabeledDataset,
    SchemaError,
    TriangularMF,
    membership_degree,
)
from .data import split_sources


def uniform_partition(feature: FeatureSpec) -> tuple[TriangularMF, ...]:
    if not feature.is_numeric:
        raise SchemaError(f"feature {feature.name!r} is not numeric")
    n = feature.num_linguistic
    lo, hi = feature.lower, feature.upper
    if n == 1:
        return (TriangularMF((lo + hi) / 2, (hi - lo) / 2),)
    step = (hi - lo) / (n - 1)
    centers = [lo + j * step for j in range(n - 1)] + [hi]
    return tuple(TriangularMF(c, step) for c in centers)


def _best_label(part: Sequence[TriangularMF], x: float) -> tuple[int | None, float]:
    degrees = [membership_degree(m, x) for m in part]
    j = int(np.argmax(degrees))
    return (j, degrees[j]) if degrees[j] > 0 else (None, 1.0)


def induce_rule_set(share: LabeledDataset, partitions, features=None, classes=None) -> KnowledgeBase:
    """One candidate rule per row, keeping the strongest row per antecedent cell.

    Numeric antecedent = linguistic value of maximal membership (lowest index on
    ties).  Missing values, and values outside every triangle, give don't-care.
    A cell claimed by several classes keeps the class of the row with the
    highest own-rule strength, then the lowest class index.
    """
    features = tuple(features or share.features)
    classes = tuple(classes or share.classes)
    if len(share) == 0:
        raise ValueError("cannot induce rules from an empty share")
    partitions = tuple(tuple(p) for p in partitions)
    best: dict[tuple, tuple[float, int]] = {}
    for values, label in zip(share.values, share.labels):
        ants, strength, slot = [], 1.0, 0
        for f, x in zip(features, values):
            if f.is_numeric:
                part = partitions[slot]
                slot += 1
                if np.isnan(x):
                    ants.append(None)
                    continue
                j, deg = _best_label(part, float(x))
                ants.append(j)
                strength *= deg
            else:
                ants.append(None if np.isnan(x) else int(x))
        key = tuple(ants)
        cand = (strength, -int(label))
        if key not in best or cand > best[key]:
            best[key] = cand
    rules = tuple(FuzzyRule(key, -neg) for key, (_, neg) in best.items())
    return KnowledgeBase(features, classes, partitions, rules)


def bootstrap_sources(data: LabeledDataset, P: int, seed: int) -> list[KnowledgeBase]:
    """P source knowledge bases sharing uniform partitions, one per data share."""
    partitions = [uniform_partition(f) for f in data.features if f.is_numeric]
    return [induce_rule_set(share, partitions, data.features, data.classes)
            for share in split_sources(data, P, seed)]
