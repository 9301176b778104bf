"""
Frequent evolving pattern mining.

A full-projection PrefixSpan: every occurrence of the extending item within the transition
limit of a postfix start spawns its own postfix, so embeddings which only qualify from a
later occurrence of the prefix are never lost.
"""
import logging
import math
from collections import defaultdict
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field, NonNegativeInt, PositiveInt, validator
from typing_extensions import Literal

from stcausal.common_structures import ResultsConfig, SeriesKey, category_index
from stcausal.datasets.series import (
    SymbolicPollutionDatabase,
    epoch_minutes_to_iso,
)
from stcausal.exceptions import EmptyDatabaseError
from stcausal.validators import check_evolving

logger = logging.getLogger(__name__)

Day = Sequence[Tuple[int, int]]


class Postfix(NamedTuple):
    """
    A postfix of one day: the events after ``position`` with times relative to it.
    ``start`` is the offset of the prefix's first element; both are -1 for the unprojected day.
    """

    day: int
    start: int
    position: int


class ProjectedDatabase:
    """
    The postfixes of a symbolic database which follow an occurrence of ``prefix``.

    ``occurrences`` keeps the earliest start of the prefix on every day it occurs, including
    days where the occurrence leaves nothing behind it and so carries no postfix.
    """

    def __init__(
        self,
        days: Sequence[Day],
        prefix: Tuple[int, ...],
        postfixes: List[Postfix],
        occurrences: Optional[Dict[int, int]] = None,
    ):
        self.days = days
        self.prefix = prefix
        self.postfixes = postfixes
        self.occurrences = occurrences or {}

    @classmethod
    def initial(cls, days: Sequence[Day]) -> "ProjectedDatabase":
        """The unprojected database, one postfix holding each whole day."""
        return cls(
            days=days,
            prefix=(),
            postfixes=[
                Postfix(day, -1, -1) for day, events in enumerate(days) if events
            ],
        )

    @property
    def is_initial(self) -> bool:
        return not self.prefix

    def __len__(self) -> int:
        return len(self.postfixes)

    def residual(self, postfix: Postfix) -> List[Tuple[int, int]]:
        """The (level, relative minutes) events left in a postfix."""
        events = self.days[postfix.day]
        if postfix.position < 0:
            return list(events)
        anchor = events[postfix.position][1]
        return [
            (level, offset - anchor)
            for level, offset in events[postfix.position + 1 :]
        ]

    def _reachable(self, postfix: Postfix, delta_t: int):
        """Yield (index, level, offset) of the events an extension may use."""
        events = self.days[postfix.day]
        if postfix.position < 0:
            for index, (level, offset) in enumerate(events):
                yield index, level, offset
            return
        anchor = events[postfix.position][1]
        for index in range(postfix.position + 1, len(events)):
            level, offset = events[index]
            if offset - anchor > delta_t:
                break
            yield index, level, offset


def _build(
    pdb: ProjectedDatabase, item: int, matches: Dict[Tuple[int, int], int]
) -> ProjectedDatabase:
    occurrences: Dict[int, int] = {}
    postfixes = []
    for (day, position), start in sorted(matches.items()):
        occurrences[day] = min(start, occurrences.get(day, start))
        # an occurrence at the end of the day still counts but leaves no postfix
        if position + 1 < len(pdb.days[day]):
            postfixes.append(Postfix(day, start, position))
    return ProjectedDatabase(pdb.days, pdb.prefix + (item,), postfixes, occurrences)


def full_project(pdb: ProjectedDatabase, item: int, delta_t: int) -> ProjectedDatabase:
    """
    Project a database on one more item, one postfix per qualifying occurrence of the item.

    From the initial database every occurrence of the item qualifies; otherwise an occurrence
    must follow the postfix start by at most ``delta_t`` minutes. Postfixes reaching the same
    event of a day are merged keeping the earliest prefix start.
    """
    matches: Dict[Tuple[int, int], int] = {}
    for postfix in pdb.postfixes:
        for index, level, offset in pdb._reachable(postfix, delta_t):
            if level != item:
                continue
            start = offset if postfix.position < 0 else postfix.start
            key = (postfix.day, index)
            if key not in matches or start < matches[key]:
                matches[key] = start
    return _build(pdb, item, matches)


def first_occurrence_project(
    pdb: ProjectedDatabase, item: int, delta_t: int
) -> ProjectedDatabase:
    """
    Classic PrefixSpan projection keeping only the first qualifying occurrence of the item
    after each postfix. It loses embeddings that start from a later occurrence of the prefix
    and is kept as a reference behaviour.
    """
    matches: Dict[Tuple[int, int], int] = {}
    matched_days = set()
    for postfix in pdb.postfixes:
        if postfix.day in matched_days:
            continue
        for index, level, offset in pdb._reachable(postfix, delta_t):
            if level == item:
                start = offset if postfix.position < 0 else postfix.start
                matches[(postfix.day, index)] = start
                matched_days.add(postfix.day)
                break
    return _build(pdb, item, matches)


def local_frequent_items(
    pdb: ProjectedDatabase, min_support: int, delta_t: int, prev: Optional[int] = None
) -> List[int]:
    """
    The items which can extend the prefix on at least ``min_support`` distinct days.

    An item counts for a postfix when it occurs within ``delta_t`` minutes after the postfix
    start, or anywhere in the day for the initial database. The previous item is never
    returned since consecutive levels of an evolving pattern differ.
    """
    days_with: Dict[int, set] = defaultdict(set)
    for postfix in pdb.postfixes:
        for _, level, _ in pdb._reachable(postfix, delta_t):
            days_with[level].add(postfix.day)
    return sorted(
        item
        for item, days in days_with.items()
        if item != prev and len(days) >= min_support
    )


class EvolvingPattern(ResultsConfig):
    """
    A frequent evolving pattern and the days it occurs on.
    """

    levels: List[int] = Field(..., description="The level sequence, at least two long.")
    delta_t: PositiveInt = Field(
        ..., description="The maximum minutes between consecutive elements."
    )
    support: NonNegativeInt = Field(..., description="The number of days it occurs on.")
    occurrences: List[Tuple[int, int]] = Field(
        ...,
        description="The day index and epoch minute of the earliest start per day.",
    )

    _check_evolving = validator("levels", allow_reuse=True)(check_evolving)

    @validator("levels")
    def _check_length(cls, levels):
        if len(levels) < 2:
            raise ValueError("An evolving pattern has at least two levels.")
        return levels

    @validator("occurrences")
    def _check_occurrences(cls, occurrences, values):
        support = values.get("support")
        days = [day for day, _ in occurrences]
        if len(set(days)) != len(days):
            raise ValueError("A pattern has at most one occurrence per day.")
        if support is not None and len(days) != support:
            raise ValueError(
                f"The support {support} does not match the {len(days)} occurring days."
            )
        return occurrences


class PatternSet(ResultsConfig):
    """
    The frequent evolving patterns mined from one (category, sensor) database.
    """

    category: PositiveInt = Field(..., description="The pollutant category index.")
    sensor_id: str = Field(..., description="The sensor the database belongs to.")
    sigma: Optional[float] = Field(
        None, description="The support fraction used, if the support was given as one."
    )
    min_support: PositiveInt = Field(..., description="The absolute day support used.")
    delta_t: PositiveInt = Field(..., description="The transition limit in minutes.")
    patterns: List[EvolvingPattern] = Field(
        default_factory=list, description="The patterns sorted by level sequence."
    )

    @validator("patterns")
    def _check_unique(cls, patterns):
        seen = set()
        for pattern in patterns:
            levels = tuple(pattern.levels)
            if levels in seen:
                raise ValueError(f"The level sequence {levels} is repeated.")
            seen.add(levels)
        return patterns

    @property
    def key(self) -> SeriesKey:
        return SeriesKey(self.category, self.sensor_id)

    def __len__(self) -> int:
        return len(self.patterns)

    def get(self, levels: Sequence[int]) -> Optional[EvolvingPattern]:
        for pattern in self.patterns:
            if tuple(pattern.levels) == tuple(levels):
                return pattern
        return None

    def supports(self) -> Dict[Tuple[int, ...], int]:
        """The support of every pattern keyed by level sequence."""
        return {tuple(p.levels): p.support for p in self.patterns}

    def occurrence_timestamps(self) -> np.ndarray:
        """The sorted distinct epoch minutes at which any pattern starts."""
        stamps = [minute for p in self.patterns for _, minute in p.occurrences]
        return np.unique(np.asarray(stamps, dtype=np.int64))

    def to_document(self) -> Dict:
        """The JSON document of the pattern set."""
        return {
            "key": {
                "category": self.category,
                "pollutant": self.key.pollutant,
                "sensor_id": self.sensor_id,
            },
            "sigma": self.sigma,
            "min_support": self.min_support,
            "delta_t": self.delta_t,
            "patterns": [
                {
                    "levels": list(p.levels),
                    "support": p.support,
                    "occurrences": [
                        [day, epoch_minutes_to_iso(minute)]
                        for day, minute in p.occurrences
                    ],
                }
                for p in self.patterns
            ],
        }

    @classmethod
    def from_document(cls, document: Dict) -> "PatternSet":
        key = document["key"]
        category = key.get("category") or category_index(key["pollutant"])
        delta_t = document["delta_t"]
        return cls(
            category=category,
            sensor_id=key["sensor_id"],
            sigma=document.get("sigma"),
            min_support=document["min_support"],
            delta_t=delta_t,
            patterns=[
                EvolvingPattern(
                    levels=p["levels"],
                    delta_t=delta_t,
                    support=p["support"],
                    occurrences=[
                        (int(day), int(np.datetime64(stamp, "m").astype(np.int64)))
                        for day, stamp in p["occurrences"]
                    ],
                )
                for p in document["patterns"]
            ],
        )


def absolute_support(sigma: float, n_days: int) -> int:
    """Convert a support fraction to a day count by ceiling, at least one day."""
    if not 0.0 < sigma <= 1.0:
        raise ValueError(f"The support fraction {sigma} should lie in (0, 1].")
    # guard against 0.6 * 5 landing just above 3
    return max(1, math.ceil(sigma * n_days - 1e-9))


def mine_feps(
    db: SymbolicPollutionDatabase,
    sigma: float = 0.1,
    delta_t: int = 60,
    min_support: Optional[int] = None,
    projection: Literal["full", "first"] = "full",
) -> PatternSet:
    """
    Mine every evolving pattern of length two or more which occurs on enough days.

    Parameters:
        db: The symbolic pollution database of one series.
        sigma: The support as a fraction of the days in the database.
        delta_t: The maximum minutes between consecutive pattern elements.
        min_support: An absolute day count which overrides ``sigma``.
        projection: ``full`` projects on every occurrence, ``first`` only on the first one.

    Returns:
        The patterns sorted by level sequence, each with the earliest start on every day it occurs.

    Raises:
        EmptyDatabaseError: If the database has no days.
    """
    if db.n_days == 0:
        raise EmptyDatabaseError(f"the database of {db.key.label()} has no days.")
    if delta_t <= 0:
        raise ValueError("The transition limit delta_t must be positive.")
    if min_support is None:
        min_support = absolute_support(sigma, db.n_days)
        used_sigma: Optional[float] = sigma
    else:
        used_sigma = None

    project: Callable = (
        full_project if projection == "full" else first_occurrence_project
    )
    found: List[Tuple[Tuple[int, ...], ProjectedDatabase]] = []

    def grow(pdb: ProjectedDatabase) -> None:
        prev = pdb.prefix[-1] if pdb.prefix else None
        for item in local_frequent_items(pdb, min_support, delta_t, prev):
            projected = project(pdb, item, delta_t)
            if len(projected.prefix) >= 2 and len(projected.occurrences) >= min_support:
                found.append((projected.prefix, projected))
            grow(projected)

    grow(ProjectedDatabase.initial(db.days))

    patterns = [
        EvolvingPattern(
            levels=list(levels),
            delta_t=delta_t,
            support=len(projected.occurrences),
            occurrences=[
                (day, db.event_time(day, start))
                for day, start in sorted(projected.occurrences.items())
            ],
        )
        for levels, projected in sorted(found, key=lambda f: f[0])
    ]
    logger.debug(
        f"mined {len(patterns)} patterns from {db.n_days} days of {db.key.label()} "
        f"with support {min_support}."
    )
    return PatternSet(
        category=db.category,
        sensor_id=db.sensor_id,
        sigma=used_sigma,
        min_support=min_support,
        delta_t=delta_t,
        patterns=patterns,
    )
