"""Template estimation, teacher/student scoring, and selection policies."""

import logging

import numpy as np
import pytest

from oracles import rect
from vtspot.errors import ContractError, NoTemplateError, PolicyUnavailableError
from vtspot.recommender import (
    PassthroughStudent,
    RidgeStudent,
    SelectionPolicy,
    Template,
    decide,
    estimate_template,
    fit_student,
    kmeans,
    pad_char_features,
    score_streams,
    select,
    student_score,
    teacher_score,
)
from vtspot.simulate import ScenarioSpec, generate
from vtspot.tracker import TrackerConfig, track
from vtspot.types import (
    GroundTruthRecord,
    RecognitionHypothesis,
    RegionObservation,
    TextStream,
)


def _hyp(text, probs, dim=4, feature_value=1.0):
    features = np.full((len(text), dim), feature_value)
    return RecognitionHypothesis(text, np.asarray(probs, dtype=np.float64), features)


def _obs(frame, text="CAT", probs=(0.9, 0.9, 0.9), student=None, embedding=None):
    obs = RegionObservation(frame=frame, quad=rect(0, 0, 2, 1),
                            embedding=embedding, hypothesis=_hyp(text, probs))
    obs.student_score = student
    return obs


def test_policy_kind_validated():
    with pytest.raises(ContractError):
        SelectionPolicy("BEST")


def test_pad_char_features():
    f = np.arange(6, dtype=np.float64).reshape(2, 3)
    padded = pad_char_features(f, 4)
    assert padded.shape == (4, 3)
    assert np.array_equal(padded[:2], f)
    assert np.array_equal(padded[2:], np.zeros((2, 3)))
    assert np.array_equal(pad_char_features(f, 1), f[:1])
    with pytest.raises(ContractError):
        pad_char_features(f, 0)


def test_kmeans_single_cluster_is_mean():
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]])
    centroids, labels = kmeans(pts, 1)
    assert np.array_equal(centroids, [[2.0, 0.0]])
    assert np.array_equal(labels, [0, 0, 0])


def test_kmeans_separates_two_blobs():
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 0.0], [5.1, 0.0]])
    centroids, labels = kmeans(pts, 2)
    assert labels[0] == labels[1] and labels[2] == labels[3]
    assert labels[0] != labels[2]
    assert sorted(c[0] for c in centroids) == pytest.approx([0.05, 5.05])


def test_kmeans_validation():
    with pytest.raises(ContractError):
        kmeans(np.zeros((0, 2)), 1)
    with pytest.raises(ContractError):
        kmeans(np.zeros((2, 2)), 3)


def test_template_from_single_feature_is_identity():
    f = np.arange(8, dtype=np.float64).reshape(2, 4)
    template = estimate_template([f])
    assert np.array_equal(template.features, f)
    assert template.source_count == 1


def test_template_from_identical_features():
    f = np.ones((3, 4))
    template = estimate_template([f, f])
    assert np.array_equal(template.features, f)
    assert template.source_count == 2


def test_template_requires_input():
    with pytest.raises(NoTemplateError):
        estimate_template([])


def test_template_requires_shared_shape():
    with pytest.raises(ContractError):
        estimate_template([np.ones((2, 4)), np.ones((3, 4))])


def test_template_takes_dominant_cluster():
    near = [np.full((1, 2), 0.0), np.full((1, 2), 0.1), np.full((1, 2), 0.2)]
    far = [np.full((1, 2), 9.0)]
    template = estimate_template(near + far, k_clusters=2)
    assert template.features[0, 0] == pytest.approx(0.1)


def test_teacher_score_self_is_one():
    template = Template(features=np.arange(1, 9, dtype=np.float64).reshape(2, 4),
                        source_count=1)
    assert teacher_score(template.features, template) == pytest.approx(1.0, abs=1e-9)


def test_teacher_score_orthogonal_and_diagonal():
    template = Template(features=np.array([[1.0, 0.0]]), source_count=1)
    assert teacher_score(np.array([[0.0, 1.0]]), template) == 0.0
    diag = teacher_score(np.array([[1.0, 1.0]]), template)
    assert diag == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-12)


def test_teacher_score_rejects_zero_and_mismatch():
    template = Template(features=np.array([[1.0, 0.0]]), source_count=1)
    with pytest.raises(ContractError):
        teacher_score(np.zeros((1, 2)), template)
    with pytest.raises(ContractError):
        teacher_score(np.ones((2, 2)), template)


def test_fit_student_recovers_linear_rule():
    x = np.linspace(-1.0, 1.0, 9).reshape(-1, 1)
    training = [(row, 2.0 * row[0] + 1.0) for row in x]
    student = fit_student(training, ridge_lambda=0.0)
    assert student.weights[0] == pytest.approx(2.0, abs=1e-9)
    assert student.intercept == pytest.approx(1.0, abs=1e-9)


def test_fit_student_multidimensional_exact():
    r = np.random.default_rng(3)
    w_true = np.array([0.5, -1.0, 2.0])
    x = r.normal(size=(20, 3))
    training = [(row, float(row @ w_true)) for row in x]
    student = fit_student(training, ridge_lambda=0.0)
    for row, target in training:
        obs = RegionObservation(frame=0, quad=rect(0, 0, 1, 1), embedding=row)
        assert student_score(obs, student) == pytest.approx(target, abs=1e-6)


def test_fit_student_constant_targets_intercept_only():
    training = [(np.array([v]), 0.5) for v in (-3.0, 0.0, 7.0)]
    student = fit_student(training, ridge_lambda=1e-3)
    obs = RegionObservation(frame=0, quad=rect(0, 0, 1, 1), embedding=np.array([100.0]))
    assert student_score(obs, student) == pytest.approx(0.5, abs=1e-9)


def test_fit_student_contradictory_targets_average():
    x = np.array([1.0])
    student = fit_student([(x, 0.0), (x, 1.0)], ridge_lambda=0.0)
    obs = RegionObservation(frame=0, quad=rect(0, 0, 1, 1), embedding=x)
    assert student_score(obs, student) == pytest.approx(0.5, abs=1e-9)


def test_fit_student_zero_targets_zero_weights():
    training = [(np.array([1.0, v]), 0.0) for v in (0.0, 1.0, 2.0)]
    student = fit_student(training, ridge_lambda=0.5)
    assert np.allclose(student.weights, 0.0)
    assert student.intercept == 0.0


def test_fit_student_validation():
    with pytest.raises(ContractError):
        fit_student([], 0.0)
    with pytest.raises(ContractError):
        fit_student([(np.ones(2), 1.0)], -1.0)


def test_unfitted_student_rejected():
    obs = RegionObservation(frame=0, quad=rect(0, 0, 1, 1), embedding=np.ones(2))
    with pytest.raises(ContractError):
        student_score(obs, RidgeStudent())


def test_passthrough_student():
    obs = RegionObservation(frame=0, quad=rect(0, 0, 1, 1))
    obs.teacher_score = 0.83
    assert PassthroughStudent().score(obs) == 0.83


def test_select_tr_argmax_student_score():
    stream = TextStream(0, [_obs(0, student=0.2), _obs(1, student=0.9), _obs(2, student=0.4)])
    decision = select(stream, SelectionPolicy("TR"))
    assert decision.chosen_frame == 1
    assert decision.quality_score == 0.9


def test_select_tr_tie_keeps_earliest_frame():
    stream = TextStream(0, [_obs(3, student=0.7), _obs(5, student=0.7)])
    assert select(stream, SelectionPolicy("TR")).chosen_frame == 3


def test_select_pcw_argmax_mean_char_prob():
    stream = TextStream(0, [_obs(0, text="AB", probs=(0.5, 0.5)),
                            _obs(1, text="AB", probs=(0.9, 0.7))])
    decision = select(stream, SelectionPolicy("PCW"))
    assert decision.chosen_frame == 1
    assert decision.quality_score == pytest.approx(0.8)


def test_select_hfp_majority_first_occurrence():
    stream = TextStream(0, [_obs(0, text="CAT"), _obs(1, text="DOG"), _obs(2, text="CAT")])
    decision = select(stream, SelectionPolicy("HFP"))
    assert decision.final_text == "CAT"
    assert decision.chosen_frame == 0
    assert decision.quality_score == pytest.approx(2.0 / 3.0)


def test_select_hfp_tie_breaks_by_mean_probability():
    stream = TextStream(0, [_obs(0, text="CAT", probs=(0.5, 0.5, 0.5)),
                            _obs(1, text="DOG", probs=(0.9, 0.9, 0.9))])
    decision = select(stream, SelectionPolicy("HFP"))
    assert decision.final_text == "DOG"
    assert decision.chosen_frame == 1


def test_select_missing_fields_raise_policy_unavailable():
    bare = RegionObservation(frame=0, quad=rect(0, 0, 1, 1))
    stream = TextStream(7, [bare])
    with pytest.raises(PolicyUnavailableError, match="stream 7"):
        select(stream, SelectionPolicy("TR"))
    with pytest.raises(PolicyUnavailableError, match="stream 7"):
        select(stream, SelectionPolicy("PCW"))


def test_select_empty_stream_rejected():
    with pytest.raises(ContractError):
        select(TextStream(0, []), SelectionPolicy("TR"))


def _scored_scenario(seed=21):
    spec = ScenarioSpec(n_streams=3, frames_per_stream=(6, 8), seed=seed,
                        embedding_dim=16, quality_profile=("high", "moderate", "low"))
    scenario = generate(spec)
    streams = track(scenario.observations, TrackerConfig())
    student = score_streams(streams, scenario.gt)
    return scenario, streams, student


def test_score_streams_fills_scores_and_fits_student():
    _, streams, student = _scored_scenario()
    assert student is not None and student.fitted
    for stream in streams:
        for obs in stream.observations:
            assert obs.student_score is not None
            if obs.teacher_score is not None:
                assert -1.0 - 1e-9 <= obs.teacher_score <= 1.0 + 1e-9


def test_score_streams_without_correct_recognitions_returns_none():
    gt = [GroundTruthRecord(0, 0, rect(0, 0, 2, 1), "Latin", "high", "ZZZ")]
    stream = TextStream(0, [_obs(0, text="CAT", embedding=np.array([1.0, 0.0]))])
    assert score_streams([stream], gt) is None


def test_decide_tr_without_student_falls_back_to_pcw(caplog):
    stream = TextStream(0, [_obs(0, text="AB", probs=(0.5, 0.5)),
                            _obs(1, text="AB", probs=(0.9, 0.9))])
    with caplog.at_level(logging.WARNING):
        decisions = decide([stream], SelectionPolicy("TR"), None)
    assert decisions[0].chosen_frame == 1
    assert "falling back" in caplog.text


def test_decide_orders_by_stream_id():
    streams = [TextStream(5, [_obs(0, student=0.1)]), TextStream(2, [_obs(0, student=0.3)])]
    decisions = decide(streams, SelectionPolicy("TR"), PassthroughStudent())
    assert [d.stream_id for d in decisions] == [2, 5]
