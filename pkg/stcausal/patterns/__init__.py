from stcausal.patterns.mining import (
    EvolvingPattern,
    PatternSet,
    ProjectedDatabase,
    first_occurrence_project,
    full_project,
    local_frequent_items,
    mine_feps,
)
from stcausal.patterns.oracle import brute_force_feps

__all__ = [
    "EvolvingPattern",
    "PatternSet",
    "ProjectedDatabase",
    "brute_force_feps",
    "first_occurrence_project",
    "full_project",
    "local_frequent_items",
    "mine_feps",
]
