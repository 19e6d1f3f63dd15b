"""Deterministic stand-ins for upstream model outputs.

The synthetic recognizer produces hypotheses from ground-truth text under a
controllable error model. Character features are drawn around one fixed
unit anchor per character code, so correct recognitions of the same string
cluster tightly in feature space while corrupted ones scatter.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .types import FlowField, RecognitionHypothesis

ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"


def char_anchor(char: str, dim: int) -> np.ndarray:
    """Fixed pseudo-random unit vector for one character code."""
    if len(char) != 1:
        raise ContractError(f"char_anchor takes a single character, got {char!r}")
    digest = hashlib.blake2b(char.encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def confusion_partner(char: str) -> str:
    """Fixed lookalike target for biased substitutions; never the input."""
    idx = ALPHABET.find(char)
    if idx >= 0:
        return ALPHABET[(idx + 7) % len(ALPHABET)]
    return ALPHABET[ord(char) % len(ALPHABET)]


@dataclass(frozen=True)
class ErrorModel:
    """Recognizer degradation knobs.

    substitution_prob corrupts each character independently; corrupted
    characters land on the confusion partner with probability
    confusion_bias, else on a uniform other character. feature_noise is the
    norm of the perturbation added to each character's anchor.
    correct_prob_noise jitters correct characters' probabilities downward;
    substituted characters report a uniform draw from wrong_prob_range, so
    the model can be deliberately miscalibrated.
    """

    substitution_prob: float = 0.0
    feature_noise: float = 0.0
    correct_prob_noise: float = 0.0
    wrong_prob_range: tuple = (0.8, 1.0)
    confusion_bias: float = 0.75
    feature_dim: int = 16

    def __post_init__(self):
        for name in ("substitution_prob", "correct_prob_noise", "confusion_bias"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ContractError(f"{name} must be in [0, 1], got {v}")
        if self.feature_noise < 0.0:
            raise ContractError(f"feature_noise must be >= 0, got {self.feature_noise}")
        lo, hi = self.wrong_prob_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ContractError(f"wrong_prob_range must be ordered in [0, 1], got {self.wrong_prob_range}")
        if self.feature_dim < 1:
            raise ContractError(f"feature_dim must be >= 1, got {self.feature_dim}")


ZERO_ERROR = ErrorModel()


def synthetic_recognizer(gt_text: str, error_model: ErrorModel, seed: int) -> RecognitionHypothesis:
    """Deterministic recognition of gt_text under the given error model.

    With a zero error model the output text equals gt_text and every
    character probability is exactly 1.0.
    """
    rng = np.random.default_rng(seed)
    em = error_model
    chars = []
    probs = []
    rows = []
    for ch in gt_text:
        substituted = em.substitution_prob > 0.0 and rng.random() < em.substitution_prob
        if substituted:
            if rng.random() < em.confusion_bias:
                out = confusion_partner(ch)
            else:
                pool = [c for c in ALPHABET if c != ch]
                out = pool[int(rng.integers(len(pool)))]
            lo, hi = em.wrong_prob_range
            prob = lo + (hi - lo) * rng.random()
        else:
            out = ch
            if em.correct_prob_noise > 0.0:
                prob = 1.0 - abs(rng.normal(0.0, em.correct_prob_noise))
            else:
                prob = 1.0
        feature = char_anchor(out, em.feature_dim)
        if em.feature_noise > 0.0:
            bump = rng.standard_normal(em.feature_dim)
            feature = feature + em.feature_noise * bump / np.linalg.norm(bump)
        chars.append(out)
        probs.append(min(max(prob, 0.0), 1.0))
        rows.append(feature)
    features = np.array(rows, dtype=np.float64).reshape(len(chars), em.feature_dim)
    return RecognitionHypothesis(
        text="".join(chars),
        char_probs=np.array(probs, dtype=np.float64),
        char_features=features,
    )


def zero_flow(height: int, width: int) -> FlowField:
    return FlowField(height, width, np.zeros((height, width)), np.zeros((height, width)))


def constant_flow(height: int, width: int, dx: float, dy: float) -> FlowField:
    return FlowField(
        height,
        width,
        np.full((height, width), float(dx)),
        np.full((height, width), float(dy)),
    )
