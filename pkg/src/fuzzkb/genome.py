"""Real-valued string encoding of a knowledge base.

Layout per individual: a variable-length block of rule genes followed by a fixed
block of membership-function genes ``(c_11, w_11, c_12, w_12, ...)`` over the
numeric features.  Rule genes hold one real code per feature plus a class code;
rounding to the nearest integer happens only when decoding, so arithmetic
crossover can treat both blocks alike.  A code equal to the feature arity
decodes to don't-care.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    CompiledKB,
    FeatureSpec,
    FuzzyRule,
    KnowledgeBase,
    LabeledDataset,
    SchemaError,
    TriangularMF,
)


@dataclass(frozen=True)
class Schema:
    features: tuple[FeatureSpec, ...]
    classes: tuple[str, ...]

    @classmethod
    def of(cls, obj: KnowledgeBase | LabeledDataset) -> "Schema":
        return cls(tuple(obj.features), tuple(obj.classes))

    @property
    def numeric(self) -> list[FeatureSpec]:
        return [f for f in self.features if f.is_numeric]

    @property
    def rule_width(self) -> int:
        return len(self.features) + 1

    @property
    def mf_length(self) -> int:
        return 2 * sum(f.num_linguistic for f in self.numeric)


@dataclass(eq=False)
class Genome:
    rules: np.ndarray  # (R, F + 1) float
    mf: np.ndarray  # (2 * sum L_i,) float

    def __post_init__(self):
        self.rules = np.asarray(self.rules, dtype=float)
        self.mf = np.asarray(self.mf, dtype=float).reshape(-1)
        if self.rules.ndim != 2:
            raise SchemaError("rule block must be two-dimensional")

    @property
    def rule_count(self) -> int:
        return len(self.rules)

    def copy(self) -> "Genome":
        return Genome(self.rules.copy(), self.mf.copy())

    def same_as(self, other: "Genome") -> bool:
        return (
            self.rules.shape == other.rules.shape
            and np.array_equal(self.rules, other.rules)
            and np.array_equal(self.mf, other.mf)
        )

    def key(self) -> bytes:
        return self.rules.shape[0].to_bytes(4, "little") + self.rules.tobytes() + self.mf.tobytes()


@dataclass(frozen=True, eq=False)
class GeneBounds:
    mf_lower: np.ndarray
    mf_upper: np.ndarray
    rule_upper: np.ndarray  # per code; every rule code has lower bound 0
    max_rules: int

    @classmethod
    def for_schema(cls, schema: Schema, max_rules: int) -> "GeneBounds":
        if max_rules < 1:
            raise ValueError("max_rules must be >= 1")
        lo, hi = [], []
        for f in schema.numeric:
            for _ in range(f.num_linguistic):
                lo += [f.lower, f.w_min]
                hi += [f.upper, f.span]
        rule_upper = [f.arity for f in schema.features] + [len(schema.classes) - 1]
        return cls(np.array(lo, dtype=float), np.array(hi, dtype=float),
                   np.array(rule_upper, dtype=float), int(max_rules))


def default_max_rules(source_rule_counts: Sequence[int]) -> int:
    return max(1, round(3 * sum(source_rule_counts) / len(source_rule_counts)))


def encode(kb: KnowledgeBase) -> Genome:
    arity = [f.arity for f in kb.features]
    rules = np.array(
        [[arity[j] if a is None else a for j, a in enumerate(r.antecedents)] + [r.consequent]
         for r in kb.rules],
        dtype=float,
    )
    mf = np.array([v for p in kb.partitions for m in p for v in (m.center, m.half_width)],
                  dtype=float)
    return Genome(rules, mf)


def _check_lengths(g: Genome, schema: Schema) -> None:
    if g.rules.shape[1] != schema.rule_width:
        raise SchemaError(f"rule genes have {g.rules.shape[1]} codes, expected {schema.rule_width}")
    if len(g.mf) != schema.mf_length:
        raise SchemaError(f"genome has {len(g.mf)} MF genes, expected {schema.mf_length}")
    if g.rule_count < 1:
        raise SchemaError("genome has no rules")


def round_codes(rules: np.ndarray, bounds: GeneBounds) -> np.ndarray:
    """Nearest-integer (half-up) codes clamped into range."""
    codes = np.floor(rules + 0.5)
    return np.clip(codes, 0.0, bounds.rule_upper).astype(np.int64)


def _repaired_partitions(g: Genome, schema: Schema):
    """Per numeric feature: (centers, widths) clamped and sorted by center."""
    out = []
    pos = 0
    for f in schema.numeric:
        n = f.num_linguistic
        pairs = g.mf[pos:pos + 2 * n].reshape(n, 2)
        pos += 2 * n
        centers = np.clip(pairs[:, 0], f.lower, f.upper)
        widths = np.clip(pairs[:, 1], f.w_min, f.span)
        order = np.argsort(centers, kind="stable")
        out.append((centers[order], widths[order]))
    return out


def decode(g: Genome, schema: Schema, bounds: GeneBounds) -> KnowledgeBase:
    _check_lengths(g, schema)
    codes = round_codes(g.rules, bounds)
    arity = [f.arity for f in schema.features]
    rules = tuple(
        FuzzyRule(tuple(None if c == arity[j] else int(c) for j, c in enumerate(row[:-1])),
                  int(row[-1]))
        for row in codes
    )
    partitions = tuple(
        tuple(TriangularMF(float(c), float(w)) for c, w in zip(cs, ws))
        for cs, ws in _repaired_partitions(g, schema)
    )
    return KnowledgeBase(schema.features, schema.classes, partitions, rules)


def decode_compiled(g: Genome, schema: Schema, bounds: GeneBounds) -> CompiledKB:
    """Array-only decode; equivalent to ``decode(g, schema, bounds).compiled``."""
    _check_lengths(g, schema)
    codes = round_codes(g.rules, bounds)
    parts = _repaired_partitions(g, schema)
    return CompiledKB(
        codes=codes[:, :-1],
        consequents=codes[:, -1],
        centers=tuple(c for c, _ in parts),
        widths=tuple(w for _, w in parts),
    )


def random_rules(schema: Schema, bounds: GeneBounds, count: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=(count, schema.rule_width)) * bounds.rule_upper


def random_genome(schema: Schema, bounds: GeneBounds, rule_count: int,
                  rng: np.random.Generator) -> Genome:
    if not 1 <= rule_count <= bounds.max_rules:
        raise ValueError(f"rule_count {rule_count} outside [1, {bounds.max_rules}]")
    rules = random_rules(schema, bounds, rule_count, rng)
    mf = rng.uniform(bounds.mf_lower, bounds.mf_upper)
    return Genome(rules, mf)


def repair_genome(g: Genome, bounds: GeneBounds) -> Genome:
    if g.rule_count < 1:
        raise SchemaError("genome has no rules")
    rules = np.clip(g.rules[: bounds.max_rules], 0.0, bounds.rule_upper)
    mf = np.clip(g.mf, bounds.mf_lower, bounds.mf_upper)
    return Genome(rules, mf)
