"""Evolutionary integration of fuzzy rule sets and their membership functions."""

from .core import (
    CATEGORICAL,
    NUMERIC,
    FeatureSpec,
    FitnessReport,
    FuzzyRule,
    KnowledgeBase,
    LabeledDataset,
    SchemaError,
    TriangularMF,
    accuracy,
    classify_instance,
    complexity,
    dumps_kb,
    firing_strength,
    fitness,
    loads_kb,
    membership_degree,
    repair_partition,
)
from .bootstrap import bootstrap_sources, induce_rule_set, uniform_partition
from .data import DatasetFormat, feature_bounds, impute_policy, load_dataset, split_sources
from .evolution import EvolutionConfig, GenerationStats, integrate, run_baseline_ga, run_integration
from .genome import GeneBounds, Genome, Schema, decode, encode, random_genome, repair_genome

__version__ = "0.1.0"
