from stcausal.matching.matching import (
    Candidate,
    CandidateSet,
    MatchStats,
    candidate_causers,
    match_stats,
    match_timestamps,
    matched_training_windows,
    pattern_corr,
)

__all__ = [
    "Candidate",
    "CandidateSet",
    "MatchStats",
    "candidate_causers",
    "match_stats",
    "match_timestamps",
    "matched_training_windows",
    "pattern_corr",
]
