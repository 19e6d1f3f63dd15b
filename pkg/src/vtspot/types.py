"""Domain types shared by the pipeline stages."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .geometry import Quad

QUALITY_LEVELS = ("high", "moderate", "low")
LANGUAGES = ("Latin", "NonLatin")


@dataclass
class TensorGrid:
    """Dense h x w x c float grid (row-major); all values finite.

    Held as float64 in memory; the file format stores float32.
    """

    height: int
    width: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.channels < 1:
            raise ContractError(
                f"grid dims must be positive, got {self.height}x{self.width}x{self.channels}"
            )
        d = np.ascontiguousarray(self.data, dtype=np.float64)
        expected = (self.height, self.width, self.channels)
        if d.size != self.height * self.width * self.channels:
            raise ContractError(f"data length {d.size} != h*w*c for dims {expected}")
        d = d.reshape(expected)
        if not np.isfinite(d).all():
            raise ContractError("grid values must be finite")
        self.data = d

    @property
    def shape(self):
        return (self.height, self.width, self.channels)


@dataclass
class FlowField:
    """Per-cell displacement field paired with same-sized grids."""

    height: int
    width: int
    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ContractError(f"flow dims must be positive, got {self.height}x{self.width}")
        for name in ("dx", "dy"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if a.shape != (self.height, self.width):
                raise ContractError(f"{name} shape {a.shape} != ({self.height}, {self.width})")
            if not np.isfinite(a).all():
                raise ContractError(f"{name} values must be finite")
            setattr(self, name, a)

    @property
    def is_zero(self) -> bool:
        return not self.dx.any() and not self.dy.any()


@dataclass
class RecognitionHypothesis:
    """Recognizer output: text, per-character probabilities and features."""

    text: str
    char_probs: np.ndarray
    char_features: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.char_probs, dtype=np.float64)
        f = np.ascontiguousarray(self.char_features, dtype=np.float64)
        n = len(self.text)
        if p.shape != (n,):
            raise ContractError(f"char_probs length {p.shape} != text length {n}")
        if f.ndim != 2 or f.shape[0] != n:
            raise ContractError(f"char_features shape {f.shape} != ({n}, d)")
        if n and (p.min() < 0.0 or p.max() > 1.0):
            raise ContractError("char_probs must lie in [0, 1]")
        self.char_probs = p
        self.char_features = f

    @property
    def mean_char_prob(self) -> float:
        """Mean character probability; empty text scores 0."""
        return float(self.char_probs.mean()) if len(self.text) else 0.0


@dataclass
class RegionObservation:
    """One detected text region in one frame.

    The embedding and hypothesis are filled by upstream providers; the
    tracker requires a non-zero embedding, scoring stages fill the rest.
    """

    frame: int
    quad: Quad
    embedding: np.ndarray | None = None
    hypothesis: RecognitionHypothesis | None = None
    teacher_score: float | None = None
    student_score: float | None = None

    def __post_init__(self):
        if self.frame < 0:
            raise ContractError(f"frame must be >= 0, got {self.frame}")
        if self.embedding is not None:
            e = np.ascontiguousarray(self.embedding, dtype=np.float64)
            if e.ndim != 1:
                raise ContractError(f"embedding must be a vector, got shape {e.shape}")
            if not np.isfinite(e).all():
                raise ContractError("embedding values must be finite")
            self.embedding = e


@dataclass(frozen=True)
class GroundTruthRecord:
    """One annotated text region: identity, quality, and transcript."""

    frame: int
    id: int
    quad: Quad
    language: str
    quality: str
    transcript: str

    def __post_init__(self):
        if self.frame < 0:
            raise ContractError(f"frame must be >= 0, got {self.frame}")
        if self.language not in LANGUAGES:
            raise ContractError(f"language must be one of {LANGUAGES}, got {self.language!r}")
        if self.quality not in QUALITY_LEVELS:
            raise ContractError(f"quality must be one of {QUALITY_LEVELS}, got {self.quality!r}")


@dataclass
class TextStream:
    """Observations of one text instance, ordered by strictly increasing frame."""

    id: int
    observations: list = field(default_factory=list)

    def __post_init__(self):
        frames = [o.frame for o in self.observations]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ContractError(f"stream {self.id} frames must strictly increase: {frames}")

    @property
    def last_active_frame(self) -> int:
        if not self.observations:
            raise ContractError(f"stream {self.id} is empty")
        return self.observations[-1].frame

    def append(self, obs: RegionObservation):
        if self.observations and obs.frame <= self.observations[-1].frame:
            raise ContractError(
                f"stream {self.id}: frame {obs.frame} not after {self.observations[-1].frame}"
            )
        self.observations.append(obs)


@dataclass(frozen=True)
class StreamDecision:
    """The single region chosen from a stream for one-time recognition."""

    stream_id: int
    chosen_frame: int
    chosen_quad: Quad
    final_text: str
    quality_score: float
