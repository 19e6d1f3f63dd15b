"""Synthetic recognizer and flow providers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vtspot.errors import ContractError
from vtspot.providers import (
    ALPHABET,
    ZERO_ERROR,
    ErrorModel,
    char_anchor,
    confusion_partner,
    constant_flow,
    synthetic_recognizer,
    zero_flow,
)


def test_zero_error_is_exact():
    hyp = synthetic_recognizer("AB", ZERO_ERROR, seed=7)
    assert hyp.text == "AB"
    assert np.array_equal(hyp.char_probs, [1.0, 1.0])


def test_same_seed_same_output():
    model = ErrorModel(substitution_prob=0.5, feature_noise=0.1, correct_prob_noise=0.1)
    a = synthetic_recognizer("HELLO", model, seed=7)
    b = synthetic_recognizer("HELLO", model, seed=7)
    assert a.text == b.text
    assert np.array_equal(a.char_probs, b.char_probs)
    assert np.array_equal(a.char_features, b.char_features)


def test_forced_substitution_differs_at_position_zero():
    model = ErrorModel(substitution_prob=1.0)
    hyp = synthetic_recognizer("AB", model, seed=7)
    assert hyp.text[0] != "A"


def test_forced_substitution_probs_within_wrong_range():
    model = ErrorModel(substitution_prob=1.0, wrong_prob_range=(0.4, 0.6))
    hyp = synthetic_recognizer("WORDS", model, seed=3)
    assert hyp.text != "WORDS"
    assert (hyp.char_probs >= 0.4).all() and (hyp.char_probs <= 0.6).all()


def test_full_confusion_bias_lands_on_partner():
    model = ErrorModel(substitution_prob=1.0, confusion_bias=1.0)
    hyp = synthetic_recognizer("CODE", model, seed=11)
    assert hyp.text == "".join(confusion_partner(c) for c in "CODE")


def test_confusion_partner_never_identity():
    for c in ALPHABET:
        assert confusion_partner(c) != c
        assert confusion_partner(c) in ALPHABET


def test_char_anchor_unit_and_stable():
    a = char_anchor("A", 16)
    assert np.linalg.norm(a) == pytest.approx(1.0)
    assert np.array_equal(a, char_anchor("A", 16))
    assert not np.array_equal(a, char_anchor("B", 16))


def test_char_anchor_single_character_only():
    with pytest.raises(ContractError):
        char_anchor("AB", 16)


def test_correct_features_sit_near_anchors():
    hyp = synthetic_recognizer("XY", ZERO_ERROR, seed=5)
    assert np.array_equal(hyp.char_features[0], char_anchor("X", 16))
    assert np.array_equal(hyp.char_features[1], char_anchor("Y", 16))


def test_feature_noise_has_requested_norm():
    model = ErrorModel(feature_noise=0.25)
    hyp = synthetic_recognizer("Z", model, seed=2)
    delta = hyp.char_features[0] - char_anchor("Z", model.feature_dim)
    assert np.linalg.norm(delta) == pytest.approx(0.25)


def test_error_model_validation():
    with pytest.raises(ContractError):
        ErrorModel(substitution_prob=1.5)
    with pytest.raises(ContractError):
        ErrorModel(feature_noise=-0.1)
    with pytest.raises(ContractError):
        ErrorModel(wrong_prob_range=(0.9, 0.2))
    with pytest.raises(ContractError):
        ErrorModel(feature_dim=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_probs_always_within_unit_interval(seed):
    model = ErrorModel(substitution_prob=0.5, correct_prob_noise=0.8,
                       wrong_prob_range=(0.0, 1.0))
    hyp = synthetic_recognizer("ABC123", model, seed=seed)
    assert (hyp.char_probs >= 0.0).all() and (hyp.char_probs <= 1.0).all()
    assert len(hyp.text) == 6
    assert hyp.char_features.shape == (6, model.feature_dim)


def test_flow_providers():
    z = zero_flow(3, 4)
    assert z.is_zero and z.dx.shape == (3, 4)
    c = constant_flow(2, 2, 1.5, -0.5)
    assert not c.is_zero
    assert (c.dx == 1.5).all() and (c.dy == -0.5).all()
