"""Anchor rule explanations with a memory of reusable intermediate rules."""

from .anchors import AnchorsResult, SearchConfig, explain, generate_predicates
from .bandit import (
    certify_precision,
    best_candidate,
    kl_bernoulli,
    kl_lower_bound,
    kl_upper_bound,
)
from .core import EMPTY_RULE, Instance, Label, Predicate, Rule, RuleStats
from .data import (
    EmbeddingTable,
    EmpiricalDistribution,
    FeatureSchema,
    SlotSpec,
    ingest_csv,
    ingest_text,
    load_embedding_table,
)
from .engine import ExplainParams, ExplainReport, MemoizedExplainer, explain_memoized
from .memory import Embedder, MemoryEntry, MemoryStore
from .models import ExternalModelClient, ModelOracle, make_builtin
from .perturb import (
    PerturbationSampler,
    estimate_coverage,
    estimate_precision,
    exact_precision_coverage,
)
from .transform import (
    TabularDistance,
    TokenDistance,
    horizontal_transform,
    vertical_transform,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorsResult",
    "EMPTY_RULE",
    "Embedder",
    "EmbeddingTable",
    "EmpiricalDistribution",
    "ExplainParams",
    "ExplainReport",
    "ExternalModelClient",
    "FeatureSchema",
    "Instance",
    "Label",
    "MemoizedExplainer",
    "MemoryEntry",
    "MemoryStore",
    "ModelOracle",
    "PerturbationSampler",
    "Predicate",
    "Rule",
    "RuleStats",
    "SearchConfig",
    "SlotSpec",
    "TabularDistance",
    "TokenDistance",
    "best_candidate",
    "certify_precision",
    "estimate_coverage",
    "estimate_precision",
    "exact_precision_coverage",
    "explain",
    "generate_predicates",
    "horizontal_transform",
    "ingest_csv",
    "ingest_text",
    "kl_bernoulli",
    "kl_lower_bound",
    "kl_upper_bound",
    "load_embedding_table",
    "make_builtin",
    "explain_memoized",
    "vertical_transform",
]
