"""
Exhaustive enumeration of evolving patterns, used to check the miner on small databases.
"""
from typing import List, Optional, Sequence, Tuple

from stcausal.datasets.series import SymbolicPollutionDatabase
from stcausal.exceptions import InstanceTooLargeError
from stcausal.patterns.mining import EvolvingPattern, PatternSet

MAX_DAYS = 10
MAX_DAY_LENGTH = 12
MAX_ALPHABET = 4


def earliest_embedding(
    levels: Sequence[int], day: Sequence[Tuple[int, int]], delta_t: int
) -> Optional[int]:
    """
    The offset of the earliest first element over all embeddings of ``levels`` in a day,
    where consecutive elements use strictly later events at most ``delta_t`` minutes apart.
    None if the levels do not embed.
    """
    for first, (level, offset) in enumerate(day):
        if level != levels[0]:
            continue
        reachable = {first}
        for target in levels[1:]:
            reachable = {
                j
                for i in reachable
                for j in range(i + 1, len(day))
                if day[j][0] == target and 0 < day[j][1] - day[i][1] <= delta_t
            }
            if not reachable:
                break
        if reachable:
            return offset
    return None


def brute_force_feps(
    db: SymbolicPollutionDatabase, min_support: int, delta_t: int
) -> PatternSet:
    """
    Enumerate every evolving level sequence up to the longest day and count its support by
    searching each day directly.

    Sequences are extended depth first and a branch is only abandoned once the sequence
    occurs on no day at all, since no extension can occur then either.

    Raises:
        InstanceTooLargeError: Beyond 10 days, 12 events per day or an alphabet of 4.
    """
    longest = max((len(day) for day in db.days), default=0)
    if (
        db.n_days > MAX_DAYS
        or longest > MAX_DAY_LENGTH
        or db.alphabet_size > MAX_ALPHABET
    ):
        raise InstanceTooLargeError(
            f"the oracle handles at most {MAX_DAYS} days of {MAX_DAY_LENGTH} events "
            f"over {MAX_ALPHABET} levels."
        )

    patterns: List[EvolvingPattern] = []

    def extend(levels: Tuple[int, ...]) -> None:
        occurrences = []
        for index, day in enumerate(db.days):
            start = earliest_embedding(levels, day, delta_t)
            if start is not None:
                occurrences.append((index, db.event_time(index, start)))
        if not occurrences:
            return
        if len(levels) >= 2 and len(occurrences) >= min_support:
            patterns.append(
                EvolvingPattern(
                    levels=list(levels),
                    delta_t=delta_t,
                    support=len(occurrences),
                    occurrences=occurrences,
                )
            )
        if len(levels) < longest:
            for level in range(1, db.alphabet_size + 1):
                if level != levels[-1]:
                    extend(levels + (level,))

    for level in range(1, db.alphabet_size + 1):
        extend((level,))

    return PatternSet(
        category=db.category,
        sensor_id=db.sensor_id,
        min_support=min_support,
        delta_t=delta_t,
        patterns=sorted(patterns, key=lambda p: p.levels),
    )
