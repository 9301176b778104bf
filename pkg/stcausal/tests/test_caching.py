import pytest

from stcausal.caching import (
    artifact_key,
    clear_artifact_caches,
    load_candidate_set,
    load_model,
    load_pattern_set,
)
from stcausal.exceptions import ConfigurationError
from stcausal.matching import Candidate, CandidateSet
from stcausal.patterns import EvolvingPattern, PatternSet
from stcausal.serializers import serialize


def candidate_set(corr=0.8):
    return CandidateSet(
        category=1,
        sensor_id="s1",
        candidates=[Candidate(sensor_id="s2", category=1, corr=corr, distance_km=2.5)],
    )


def test_candidate_cache(tmpdir):
    file_name = serialize(candidate_set().to_document(), str(tmpdir.join("s1.json")))
    first = load_candidate_set(file_name)
    assert first == candidate_set()
    assert load_candidate_set(file_name) is first

    clear_artifact_caches()
    assert load_candidate_set(file_name) is not first


def test_rewritten_artifact_is_reloaded(tmpdir):
    """
    A file rewritten with different content gets a new key and is read again.
    """
    file_name = serialize(candidate_set().to_document(), str(tmpdir.join("s1.json")))
    key = artifact_key(file_name)
    assert load_candidate_set(file_name).candidates[0].corr == 0.8

    serialize(candidate_set(corr=0.65432).to_document(), file_name)
    assert artifact_key(file_name) != key
    assert load_candidate_set(file_name).candidates[0].corr == 0.65432


def test_pattern_cache(tmpdir):
    pattern_set = PatternSet(
        category=1,
        sensor_id="s0",
        sigma=0.5,
        min_support=2,
        delta_t=60,
        patterns=[
            EvolvingPattern(
                levels=[1, 2],
                delta_t=60,
                support=2,
                occurrences=[(0, 23753520), (1, 23754990)],
            )
        ],
    )
    file_name = serialize(pattern_set.to_document(), str(tmpdir.join("s0.json")))
    loaded = load_pattern_set(file_name)
    assert loaded == pattern_set
    assert load_pattern_set(file_name) is loaded


@pytest.mark.parametrize(
    "loader",
    [
        pytest.param(load_pattern_set, id="patterns"),
        pytest.param(load_candidate_set, id="candidates"),
        pytest.param(load_model, id="model"),
    ],
)
def test_missing_artifact(tmpdir, loader):
    with pytest.raises(ConfigurationError, match="does not exist"):
        loader(str(tmpdir.join("missing.json")))


@pytest.mark.parametrize(
    "loader",
    [
        pytest.param(load_pattern_set, id="patterns"),
        pytest.param(load_candidate_set, id="candidates"),
        pytest.param(load_model, id="model"),
    ],
)
def test_unreadable_artifact(tmpdir, loader):
    file_name = serialize(
        {"version": 1, "unrelated": 1}, str(tmpdir.join("bad.json"))
    )
    with pytest.raises(ConfigurationError, match="could not be read"):
        loader(file_name)
