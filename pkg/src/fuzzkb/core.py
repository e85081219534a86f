"""Fuzzy knowledge-base types, product-t-norm inference and the fitness measures.

A knowledge base holds one shared triangular partition per numeric feature and a
list of rules.  Antecedents are plain ints (linguistic index for numeric features,
category index for categorical ones) or ``None`` for don't-care.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"

#: width floor for repaired partitions, as a fraction of the feature range
W_MIN_FRACTION = 0.01


class SchemaError(ValueError):
    """Raised when a knowledge base, rule or dataset violates its schema."""


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str = NUMERIC
    lower: Optional[float] = None
    upper: Optional[float] = None
    categories: tuple[str, ...] = ()
    num_linguistic: int = 3

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        if self.kind == NUMERIC:
            if self.lower is None or self.upper is None or not self.lower < self.upper:
                raise SchemaError(
                    f"feature {self.name!r}: need lower < upper, got {self.lower}, {self.upper}"
                )
            if self.num_linguistic < 1:
                raise SchemaError(f"feature {self.name!r}: num_linguistic must be >= 1")
        elif self.kind == CATEGORICAL:
            if not self.categories:
                raise SchemaError(f"feature {self.name!r}: categories must be non-empty")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"feature {self.name!r}: duplicate categories")
        else:
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC

    @property
    def span(self) -> float:
        return self.upper - self.lower

    @property
    def w_min(self) -> float:
        return W_MIN_FRACTION * self.span

    @property
    def arity(self) -> int:
        """Number of non-don't-care antecedent values; also the don't-care code."""
        return self.num_linguistic if self.is_numeric else len(self.categories)

    def same_schema(self, other: "FeatureSpec") -> bool:
        """Equal apart from axis bounds and partition size."""
        return (self.name, self.kind, self.categories) == (other.name, other.kind, other.categories)


@dataclass(frozen=True)
class TriangularMF:
    center: float
    half_width: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise SchemaError(f"half_width must be > 0, got {self.half_width}")

    def __call__(self, x: float) -> float:
        return membership_degree(self, x)


# a partition is simply an ordered tuple of MFs
LinguisticPartition = tuple


@dataclass(frozen=True)
class FuzzyRule:
    antecedents: tuple[Optional[int], ...]
    consequent: int

    def __post_init__(self):
        object.__setattr__(self, "antecedents", tuple(self.antecedents))


@dataclass(frozen=True)
class KnowledgeBase:
    features: tuple[FeatureSpec, ...]
    classes: tuple[str, ...]
    partitions: tuple[tuple[TriangularMF, ...], ...]
    rules: tuple[FuzzyRule, ...]

    def __post_init__(self):
        for name in ("features", "classes", "rules"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "partitions", tuple(tuple(p) for p in self.partitions))
        validate_kb(self)

    @property
    def numeric_features(self) -> list[FeatureSpec]:
        return [f for f in self.features if f.is_numeric]

    def partition_for(self, feature_index: int) -> tuple[TriangularMF, ...]:
        slot = sum(1 for f in self.features[:feature_index] if f.is_numeric)
        return self.partitions[slot]

    def with_rules(self, rules: Iterable[FuzzyRule]) -> "KnowledgeBase":
        return KnowledgeBase(self.features, self.classes, self.partitions, tuple(rules))

    @cached_property
    def compiled(self) -> "CompiledKB":
        return CompiledKB.from_kb(self)


def validate_rule(rule: FuzzyRule, features: Sequence[FeatureSpec], n_classes: int) -> None:
    if len(rule.antecedents) != len(features):
        raise SchemaError(
            f"rule has {len(rule.antecedents)} antecedents, schema has {len(features)} features"
        )
    for f, a in zip(features, rule.antecedents):
        if a is not None and not 0 <= a < f.arity:
            raise SchemaError(f"antecedent {a} out of range for feature {f.name!r}")
    if not 0 <= rule.consequent < n_classes:
        raise SchemaError(f"consequent {rule.consequent} out of range")


def validate_kb(kb: KnowledgeBase) -> None:
    if not kb.classes:
        raise SchemaError("knowledge base needs at least one class")
    if not kb.rules:
        raise SchemaError("knowledge base needs at least one rule")
    numeric = [f for f in kb.features if f.is_numeric]
    if len(kb.partitions) != len(numeric):
        raise SchemaError(
            f"{len(kb.partitions)} partitions for {len(numeric)} numeric features"
        )
    for f, p in zip(numeric, kb.partitions):
        if len(p) != f.num_linguistic:
            raise SchemaError(
                f"feature {f.name!r}: partition has {len(p)} MFs, expected {f.num_linguistic}"
            )
    for rule in kb.rules:
        validate_rule(rule, kb.features, len(kb.classes))


# --------------------------------------------------------------------------
# datasets


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Rows of feature values with class labels.

    ``values`` is an (n, F) float array.  Categorical entries hold the category
    index; NaN marks a missing value.
    """

    features: tuple[FeatureSpec, ...]
    classes: tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "classes", tuple(self.classes))
        values = np.array(self.values, dtype=float).reshape(-1, len(self.features))
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if len(values) != len(labels):
            raise SchemaError("values and labels differ in length")
        if len(labels) and (labels.min() < 0 or labels.max() >= len(self.classes)):
            raise SchemaError("class index out of range")
        for j, f in enumerate(self.features):
            if not f.is_numeric:
                col = values[:, j]
                seen = col[~np.isnan(col)]
                if np.any((seen < 0) | (seen >= len(f.categories)) | (seen != np.round(seen))):
                    raise SchemaError(f"bad category index in feature {f.name!r}")
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_rows(cls, features, classes, rows) -> "LabeledDataset":
        """Build from ``(instance, class_index)`` pairs; ``None`` marks missing."""
        rows = list(rows)
        values = np.array(
            [[np.nan if v is None else v for v in inst] for inst, _ in rows], dtype=float
        ).reshape(len(rows), len(features))
        return cls(features, classes, values, np.array([c for _, c in rows], dtype=np.int64))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def rows(self) -> list[tuple[tuple[Optional[float], ...], int]]:
        return [(instance_at(self, i), int(self.labels[i])) for i in range(len(self))]

    def subset(self, index) -> "LabeledDataset":
        return LabeledDataset(self.features, self.classes, self.values[index], self.labels[index])

    def with_features(self, features: Sequence[FeatureSpec]) -> "LabeledDataset":
        return LabeledDataset(tuple(features), self.classes, self.values, self.labels)

    @cached_property
    def _onehot(self) -> tuple[np.ndarray, np.ndarray]:
        """Categorical one-hot block (n, sum K_i) and per-row missing mask (n, C)."""
        cat = [j for j, f in enumerate(self.features) if not f.is_numeric]
        blocks, missing = [], []
        for j in cat:
            col = self.values[:, j]
            k = len(self.features[j].categories)
            miss = np.isnan(col)
            block = np.zeros((len(col), k))
            idx = np.where(miss, 0, col).astype(np.int64)
            block[np.arange(len(col)), idx] = 1.0
            block[miss] = 0.0
            blocks.append(block)
            missing.append(miss)
        n = len(self)
        if not cat:
            return np.zeros((n, 0)), np.zeros((n, 0), dtype=bool)
        return np.hstack(blocks), np.column_stack(missing)


def instance_at(data: LabeledDataset, i: int) -> tuple[Optional[float], ...]:
    out = []
    for f, v in zip(data.features, data.values[i]):
        if math.isnan(v):
            out.append(None)
        else:
            out.append(float(v) if f.is_numeric else int(v))
    return tuple(out)


def check_compatible(kb: KnowledgeBase, data: LabeledDataset) -> None:
    if len(kb.features) != len(data.features) or not all(
        a.same_schema(b) for a, b in zip(kb.features, data.features)
    ):
        raise SchemaError("knowledge base features do not match the dataset")
    if tuple(kb.classes) != tuple(data.classes):
        raise SchemaError(f"class mismatch: {kb.classes} vs {data.classes}")


# --------------------------------------------------------------------------
# inference


def membership_degree(mf: TriangularMF, x: float) -> float:
    return max(0.0, 1.0 - abs(x - mf.center) / mf.half_width)


def firing_strength(rule: FuzzyRule, kb: KnowledgeBase, inst: Sequence[Optional[float]]) -> float:
    if len(inst) != len(kb.features):
        raise SchemaError("instance arity does not match the knowledge base")
    strength = 1.0
    slot = 0
    for f, a, x in zip(kb.features, rule.antecedents, inst):
        part = kb.partitions[slot] if f.is_numeric else None
        slot += f.is_numeric
        if a is None or x is None:
            continue
        if f.is_numeric:
            strength *= membership_degree(part[a], x)
        elif int(x) != a:
            strength *= 0.0
    return strength


def classify_instance(kb: KnowledgeBase, inst: Sequence[Optional[float]]) -> Optional[int]:
    best, best_rule = 0.0, None
    for rule in kb.rules:
        s = firing_strength(rule, kb, inst)
        if s > best:
            best, best_rule = s, rule
    return None if best_rule is None else best_rule.consequent


@dataclass(frozen=True, eq=False)
class CompiledKB:
    """Array form of a knowledge base used by the vectorized evaluator.

    ``codes`` is (R, F) int with the don't-care code equal to the feature arity;
    ``centers`` / ``widths`` hold one array per numeric feature.
    """

    codes: np.ndarray
    consequents: np.ndarray
    centers: tuple[np.ndarray, ...]
    widths: tuple[np.ndarray, ...]

    @classmethod
    def from_kb(cls, kb: KnowledgeBase) -> "CompiledKB":
        arity = [f.arity for f in kb.features]
        codes = np.array(
            [[arity[j] if a is None else a for j, a in enumerate(r.antecedents)] for r in kb.rules],
            dtype=np.int64,
        ).reshape(len(kb.rules), len(kb.features))
        return cls(
            codes=codes,
            consequents=np.array([r.consequent for r in kb.rules], dtype=np.int64),
            centers=tuple(np.array([m.center for m in p]) for p in kb.partitions),
            widths=tuple(np.array([m.half_width for m in p]) for p in kb.partitions),
        )


def strength_matrix(ckb: CompiledKB, data: LabeledDataset) -> np.ndarray:
    """(n, R) firing strengths of every rule on every row.

    Numeric degrees are multiplied left to right in feature order so results are
    bit-identical to :func:`firing_strength`.  Categorical antecedents are crisp
    and folded in afterwards as a 0/1 mask, which cannot change the product.
    """
    n, r = len(data), len(ckb.codes)
    strength = np.ones((n, r))
    slot = 0
    cat_cols = []
    for j, f in enumerate(data.features):
        if not f.is_numeric:
            cat_cols.append(j)
            continue
        x = data.values[:, j][:, None]
        table = np.ones((n, f.num_linguistic + 1))
        table[:, :-1] = np.maximum(0.0, 1.0 - np.abs(x - ckb.centers[slot]) / ckb.widths[slot])
        table[np.isnan(data.values[:, j])] = 1.0
        strength *= table[:, ckb.codes[:, j]]
        slot += 1
    if cat_cols:
        onehot, missing = data._onehot
        # per rule: one-hot selector over categorical values, and number of tests
        selector = np.zeros((onehot.shape[1], r))
        needed = np.zeros((len(cat_cols), r), dtype=bool)
        offset = 0
        for c, j in enumerate(cat_cols):
            k = len(data.features[j].categories)
            codes = ckb.codes[:, j]
            tested = codes < k
            selector[offset + codes[tested], np.nonzero(tested)[0]] = 1.0
            needed[c] = tested
            offset += k
        hits = onehot @ selector
        # missing values satisfy any test on that feature
        hits += missing.astype(float) @ needed.astype(float)
        strength *= hits == needed.sum(axis=0)
    return strength


def predict(ckb: CompiledKB, data: LabeledDataset) -> np.ndarray:
    """Winner-take-all class per row; -1 where no rule fires."""
    strength = strength_matrix(ckb, data)
    if strength.shape[1] == 0:
        return np.full(len(data), -1)
    winner = strength.argmax(axis=1)
    top = strength[np.arange(len(data)), winner]
    return np.where(top > 0.0, ckb.consequents[winner], -1)


def correct_count(ckb: CompiledKB, data: LabeledDataset) -> int:
    return int(np.count_nonzero(predict(ckb, data) == data.labels))


def accuracy(kb: KnowledgeBase, data: LabeledDataset) -> float:
    if len(data) == 0:
        raise ValueError("accuracy is undefined on an empty dataset")
    check_compatible(kb, data)
    return correct_count(kb.compiled, data) / len(data)


# --------------------------------------------------------------------------
# fitness


def complexity(rule_count: int, source_rule_counts: Sequence[int]) -> float:
    if not source_rule_counts:
        raise ValueError("complexity needs at least one source rule set")
    if rule_count < 1 or min(source_rule_counts) < 1:
        raise ValueError("rule counts must be >= 1")
    return rule_count / (sum(source_rule_counts) / len(source_rule_counts))


def fitness(accuracy: float, complexity: float, alpha: float) -> float:
    if not complexity > 0:
        raise ValueError(f"complexity must be > 0, got {complexity}")
    return accuracy / complexity**alpha


@dataclass(frozen=True)
class FitnessReport:
    accuracy: float
    complexity: float
    fitness: float
    rule_count: int = field(default=0, compare=False)


def evaluate_kb(kb: KnowledgeBase, data: LabeledDataset, source_rule_counts, alpha) -> FitnessReport:
    acc = accuracy(kb, data)
    comp = complexity(len(kb.rules), source_rule_counts)
    return FitnessReport(acc, comp, fitness(acc, comp, alpha), len(kb.rules))


# --------------------------------------------------------------------------
# partitions


def repair_partition(p: Sequence[TriangularMF], feature: FeatureSpec) -> tuple[TriangularMF, ...]:
    if not feature.is_numeric:
        raise SchemaError(f"feature {feature.name!r} is not numeric")
    lo, hi = feature.lower, feature.upper
    fixed = [
        (min(max(m.center, lo), hi), min(max(m.half_width, feature.w_min), feature.span))
        for m in p
    ]
    fixed.sort(key=lambda cw: cw[0])
    return tuple(TriangularMF(c, w) for c, w in fixed)


def repair_raw(center: float, half_width: float, feature: FeatureSpec) -> tuple[float, float]:
    """Clamp one (center, half_width) pair; tolerates non-positive widths."""
    return (
        min(max(center, feature.lower), feature.upper),
        min(max(half_width, feature.w_min), feature.span),
    )


# --------------------------------------------------------------------------
# JSON


def feature_to_json(f: FeatureSpec) -> dict:
    return {
        "name": f.name,
        "kind": f.kind,
        "lower": f.lower if f.is_numeric else None,
        "upper": f.upper if f.is_numeric else None,
        "categories": list(f.categories),
        "num_linguistic": f.num_linguistic if f.is_numeric else None,
    }


def feature_from_json(d: dict) -> FeatureSpec:
    kind = d.get("kind", NUMERIC)
    if kind == NUMERIC:
        return FeatureSpec(
            d["name"], NUMERIC, float(d["lower"]), float(d["upper"]),
            num_linguistic=int(d.get("num_linguistic") or 3),
        )
    return FeatureSpec(d["name"], kind, categories=tuple(d["categories"]))


def kb_to_json(kb: KnowledgeBase) -> dict:
    def token(f, a):
        if a is None:
            return "dc"
        return {"lv": a} if f.is_numeric else {"cat": a}

    return {
        "features": [feature_to_json(f) for f in kb.features],
        "classes": list(kb.classes),
        "partitions": [
            [{"center": m.center, "half_width": m.half_width} for m in p] for p in kb.partitions
        ],
        "rules": [
            {"antecedents": [token(f, a) for f, a in zip(kb.features, r.antecedents)],
             "class": r.consequent}
            for r in kb.rules
        ],
    }


def kb_from_json(doc: dict) -> KnowledgeBase:
    try:
        features = tuple(feature_from_json(f) for f in doc["features"])
        partitions = tuple(
            tuple(TriangularMF(float(m["center"]), float(m["half_width"])) for m in p)
            for p in doc["partitions"]
        )
        rules = []
        for r in doc["rules"]:
            ants = []
            for f, tok in zip(features, r["antecedents"]):
                if tok == "dc":
                    ants.append(None)
                else:
                    key = "lv" if f.is_numeric else "cat"
                    if set(tok) != {key}:
                        raise SchemaError(f"feature {f.name!r} expects a {key!r} token, got {tok}")
                    ants.append(int(tok[key]))
            if len(ants) != len(r["antecedents"]):
                raise SchemaError("rule antecedent count does not match features")
            rules.append(FuzzyRule(tuple(ants), int(r["class"])))
        return KnowledgeBase(features, tuple(doc["classes"]), partitions, tuple(rules))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed knowledge base document: {exc!r}") from exc


def dumps_kb(kb: KnowledgeBase) -> str:
    # json emits repr() floats, which round-trip exactly
    return json.dumps(kb_to_json(kb), indent=1)


def loads_kb(text: str) -> KnowledgeBase:
    return kb_from_json(json.loads(text))
