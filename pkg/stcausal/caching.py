"""A module which caches the artifacts read back from disk so that later stages do not
parse the same pattern, candidate and model files again."""
import logging
import os
from typing import Callable, Tuple, TypeVar

from cachetools import Cache, LRUCache

from stcausal.causal.em import CausalModel
from stcausal.exceptions import ConfigurationError
from stcausal.matching.matching import CandidateSet
from stcausal.patterns.mining import PatternSet
from stcausal.serializers import deserialize

T = TypeVar("T")

ArtifactKey = Tuple[str, int, int]

_pattern_cache = LRUCache(maxsize=4096)

_candidate_cache = LRUCache(maxsize=4096)

_model_cache = LRUCache(maxsize=4096)

logger = logging.getLogger(__name__)


def clear_artifact_caches():
    """Clear the internal artifact caches."""

    _pattern_cache.clear()
    _candidate_cache.clear()
    _model_cache.clear()


def artifact_key(file_name: str) -> ArtifactKey:
    """The cache key of a file, a rewritten file gets a new key."""
    stat = os.stat(file_name)
    return os.path.abspath(file_name), stat.st_size, stat.st_mtime_ns


def _cached_load(
    file_name: str, cache: Cache, builder: Callable[[dict], T], kind: str
) -> T:
    if not os.path.exists(file_name):
        raise ConfigurationError(f"the {kind} file {file_name} does not exist.")
    key = artifact_key(file_name)
    if key in cache:
        return cache[key]
    logger.debug(f"loading the {kind} file {file_name}")
    try:
        artifact = builder(deserialize(file_name))
    except (KeyError, TypeError, ValueError) as error:
        raise ConfigurationError(
            f"the {kind} file {file_name} could not be read: {error}"
        ) from error
    cache[key] = artifact
    return artifact


def load_pattern_set(file_name: str) -> PatternSet:
    return _cached_load(file_name, _pattern_cache, PatternSet.from_document, "pattern")


def load_candidate_set(file_name: str) -> CandidateSet:
    return _cached_load(
        file_name, _candidate_cache, CandidateSet.from_document, "candidate"
    )


def load_model(file_name: str) -> CausalModel:
    return _cached_load(file_name, _model_cache, CausalModel.from_document, "model")
