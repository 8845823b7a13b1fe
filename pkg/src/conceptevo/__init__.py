"""Evolutionary learning of description-logic concepts over a knowledge graph."""
from .concept import (And, Atomic, BoolEq, Concept, DataGE, DataLE, Exists, Forall, MaxCard,
                      MinCard, Not, Or, Thing, parse, serialize)
from .evolve import GPConfig, evolve_run
from .harness import cross_validate, generate_family_kb
from .kb import KBError, KnowledgeBase, load_kb
from .retrieval import LearningProblem, Retriever, retrieve
from .splits import SplitTable, calculate_splits

__all__ = [
    "And", "Atomic", "BoolEq", "Concept", "DataGE", "DataLE", "Exists", "Forall", "MaxCard",
    "MinCard", "Not", "Or", "Thing", "parse", "serialize", "GPConfig", "evolve_run",
    "cross_validate", "generate_family_kb", "KBError", "KnowledgeBase", "load_kb",
    "LearningProblem", "Retriever", "retrieve", "SplitTable", "calculate_splits",
]
