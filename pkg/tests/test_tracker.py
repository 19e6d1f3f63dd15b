"""Embedding normalization, matching costs, assignment, and stream building."""

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import rect
from vtspot.errors import ContractError
from vtspot.simulate import ScenarioSpec, brute_force_assignment, generate
from vtspot.tracker import (
    INVALID_COST,
    TrackerConfig,
    assign,
    matching_cost,
    normalize,
    track,
    valid_pair,
)
from vtspot.types import RegionObservation


def _obs(frame, embedding, x=0.0):
    return RegionObservation(frame=frame, quad=rect(x, 0.0, 2.0, 1.0),
                             embedding=np.asarray(embedding, dtype=np.float64))


def test_normalize_three_four_five():
    assert np.array_equal(normalize([3.0, 4.0]), [0.6, 0.8])


def test_normalize_unit_vector_unchanged():
    v = np.array([1.0, 0.0, 0.0])
    assert np.array_equal(normalize(v), v)


def test_normalize_axis_vector():
    assert np.array_equal(normalize([2.0, 0.0, 0.0]), [1.0, 0.0, 0.0])


def test_normalize_zero_rejected():
    with pytest.raises(ContractError):
        normalize([0.0, 0.0])


def test_matching_cost_values():
    u = np.array([1.0, 0.0])
    assert matching_cost(u, u) == 1.0 / (1.0 + 1e-7)
    assert matching_cost(u, np.array([0.0, 1.0])) == 1e7
    half = np.array([0.5, 0.0])
    assert matching_cost(u, half) == 1.0 / (0.5 + 1e-7)
    assert matching_cost(u, half) == pytest.approx(1.9999996, abs=1e-6)


def test_valid_pair_threshold():
    cfg = TrackerConfig()
    u = np.array([1.0, 0.0])
    assert valid_pair(u, np.array([0.95, 0.0]), cfg)
    assert not valid_pair(u, np.array([0.91, 0.0]), cfg)
    assert not valid_pair(u, np.array([-0.2, 0.0]), cfg)


def test_tracker_config_validation():
    with pytest.raises(ContractError):
        TrackerConfig(mc_epsilon=0.0)
    with pytest.raises(ContractError):
        TrackerConfig(similarity_threshold=1.0)
    with pytest.raises(ContractError):
        TrackerConfig(max_gap=-1)
    with pytest.raises(ContractError):
        TrackerConfig(embedding_dim=0)


def test_assign_diagonal():
    assert assign(np.array([[1.0, 2.0], [2.0, 1.0]])) == [(0, 0), (1, 1)]


def test_assign_anti_diagonal():
    assert assign(np.array([[2.0, 1.0], [1.0, 2.0]])) == [(0, 1), (1, 0)]


def test_assign_empty_and_invalid():
    assert assign(np.zeros((0, 3))) == []
    assert assign(np.full((2, 2), INVALID_COST)) == []
    with pytest.raises(ContractError):
        assign(np.array([[np.inf]]))


def test_assign_rectangular_leaves_extra_unmatched():
    cost = np.array([[1.0, 10.0, 10.0], [10.0, 1.0, 10.0]])
    assert assign(cost) == [(0, 0), (1, 1)]
    tall = np.array([[1.0, 10.0], [10.0, 1.0], [5.0, 5.0]])
    pairs = assign(tall)
    assert len(pairs) == 2
    assert sum(tall[i, j] for i, j in pairs) == 2.0


def test_assign_matches_brute_force(rng):
    for _ in range(100):
        n = int(rng.integers(1, 7))
        cost = rng.uniform(0.0, 5.0, size=(n, n))
        total = sum(cost[i, j] for i, j in assign(cost))
        assert total == brute_force_assignment(cost)


def test_track_identical_embeddings_continue_one_stream():
    streams = track([_obs(0, [1.0, 0.0]), _obs(1, [1.0, 0.0])], TrackerConfig())
    assert [len(s.observations) for s in streams] == [2]


def test_track_orthogonal_embeddings_split():
    streams = track([_obs(0, [1.0, 0.0]), _obs(1, [0.0, 1.0])], TrackerConfig())
    assert [len(s.observations) for s in streams] == [1, 1]


def test_track_two_anchor_scenario_recovers_labels():
    spec = ScenarioSpec(n_streams=2, frames_per_stream=(3, 3), seed=9,
                        embedding_dim=8, quality_profile=("high",))
    scenario = generate(spec)
    streams = track(scenario.observations, TrackerConfig())
    assert len(streams) == 2
    by_obs = {id(obs): sid for obs, (sid, _) in zip(scenario.observations, scenario.labels)}
    for stream in streams:
        members = {by_obs[id(obs)] for obs in stream.observations}
        assert len(members) == 1
        assert len(stream.observations) == 3


def test_track_ids_issued_in_frame_then_input_order():
    streams = track(
        [_obs(0, [1.0, 0.0]), _obs(0, [0.0, 1.0]), _obs(1, [0.0, 1.0])],
        TrackerConfig(),
    )
    assert [s.id for s in streams] == [0, 1]
    assert len(streams[1].observations) == 2


def test_track_respects_max_gap():
    cfg = TrackerConfig(max_gap=2)
    within = track([_obs(0, [1.0, 0.0]), _obs(2, [1.0, 0.0])], cfg)
    assert [len(s.observations) for s in within] == [2]
    beyond = track([_obs(0, [1.0, 0.0]), _obs(3, [1.0, 0.0])], cfg)
    assert [len(s.observations) for s in beyond] == [1, 1]


def test_track_rejects_zero_embedding_with_warning(caplog):
    obs = [_obs(0, [1.0, 0.0]), RegionObservation(frame=0, quad=rect(0, 0, 1, 1),
                                                  embedding=np.zeros(2))]
    with caplog.at_level(logging.WARNING):
        streams = track(obs, TrackerConfig())
    assert len(streams) == 1
    assert "zero or missing embedding" in caplog.text


def test_track_enforces_embedding_dim():
    with pytest.raises(ContractError):
        track([_obs(0, [1.0, 0.0])], TrackerConfig(embedding_dim=3))


def test_track_deterministic():
    obs = [_obs(f, [1.0, 0.05 * f]) for f in range(4)]
    a = track(obs, TrackerConfig())
    b = track(obs, TrackerConfig())
    assert [(s.id, [o.frame for o in s.observations]) for s in a] == [
        (s.id, [o.frame for o in s.observations]) for s in b
    ]


def test_track_mean_embedding_mode():
    cfg = TrackerConfig(use_mean_embedding=True)
    streams = track([_obs(0, [1.0, 0.0]), _obs(1, [1.0, 0.01]), _obs(2, [1.0, 0.02])], cfg)
    assert [len(s.observations) for s in streams] == [3]


def _partition(streams, obs_list):
    index = {id(o): i for i, o in enumerate(obs_list)}
    return sorted(tuple(index[id(o)] for o in s.observations) for s in streams)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 3.0))
def test_track_partition_and_scale_invariance(seed, scale):
    r = np.random.default_rng(seed)
    anchors = np.eye(3)
    obs = []
    for frame in range(4):
        for k in range(3):
            e = anchors[k] + 0.01 * r.normal(size=3)
            obs.append(_obs(frame, e, x=3.0 * k))
    base = track(obs, TrackerConfig())
    assert sorted(len(s.observations) for s in base) == [4, 4, 4]
    assert sum(len(s.observations) for s in base) == len(obs)
    scaled = [
        RegionObservation(frame=o.frame, quad=o.quad, embedding=o.embedding * scale)
        for o in obs
    ]
    rescaled = track(scaled, TrackerConfig())
    assert _partition(rescaled, scaled) == _partition(base, obs)
