"""Progressive entity matching between a local data source and external ones.

A local source learns which keyword queries retrieve matching entities from
each external source; external sources learn how to rank their answers.
Both sides learn from user feedback (mean reciprocal rank).
"""

__version__ = "0.1.0"

from .corpus import DataTable, EntityRecord, Feature, GroundTruth, extract_features, load_table, tokenize
from .evaluation import VARIANTS, Datasets, run_experiment
from .protocol import Session, SessionConfig
from .retrieval import RankedList, answer_deterministic, bm25_score, build_index
from .strategy import Intent, LearnerConfig, StrategyMatrix

__all__ = [
    "DataTable",
    "Datasets",
    "EntityRecord",
    "Feature",
    "GroundTruth",
    "Intent",
    "LearnerConfig",
    "RankedList",
    "Session",
    "SessionConfig",
    "StrategyMatrix",
    "VARIANTS",
    "answer_deterministic",
    "bm25_score",
    "build_index",
    "extract_features",
    "load_table",
    "run_experiment",
    "tokenize",
]
