"""Quality scoring and recognize-once selection.

The teacher estimates a per-stream template from correctly recognized
regions and scores every region by cosine similarity against it. A linear
student regressor is fitted to the teacher's scores so selection can run
without ground truth. Selection policies pick exactly one region per
stream: TR by student score, PCW by mean character probability, HFP by
majority vote over recognized strings.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NoTemplateError, PolicyUnavailableError
from .geometry import polygon_iou
from .types import StreamDecision, TextStream

log = logging.getLogger(__name__)

POLICY_KINDS = ("TR", "PCW", "HFP")


@dataclass(frozen=True)
class SelectionPolicy:
    kind: str

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ContractError(f"policy kind must be one of {POLICY_KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class Template:
    """Padded feature-space representation of a stream's ideal text."""

    features: np.ndarray
    source_count: int

    def __post_init__(self):
        f = np.ascontiguousarray(self.features, dtype=np.float64)
        if f.ndim != 2:
            raise ContractError(f"template features must be a matrix, got shape {f.shape}")
        if not np.isfinite(f).all():
            raise ContractError("template features must be finite")
        if self.source_count < 1:
            raise ContractError(f"source_count must be >= 1, got {self.source_count}")
        object.__setattr__(self, "features", f)


def pad_char_features(features, t_max: int) -> np.ndarray:
    """Zero-pad or truncate a (chars x d) matrix to exactly t_max rows."""
    f = np.ascontiguousarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise ContractError(f"char features must be a matrix, got shape {f.shape}")
    if t_max < 1:
        raise ContractError(f"t_max must be >= 1, got {t_max}")
    if f.shape[0] >= t_max:
        return f[:t_max].copy()
    out = np.zeros((t_max, f.shape[1]), dtype=np.float64)
    out[: f.shape[0]] = f
    return out


def kmeans(points: np.ndarray, k: int, max_iters: int = 100):
    """Deterministic Lloyd iteration; returns (centroids, labels).

    Centroids start at evenly spaced input points; an emptied cluster keeps
    its previous centroid. With k=1 this is the arithmetic mean.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ContractError(f"kmeans needs a non-empty (m x d) matrix, got shape {pts.shape}")
    m = pts.shape[0]
    if not 1 <= k <= m:
        raise ContractError(f"k must be in [1, {m}], got {k}")
    centroids = pts[np.linspace(0, m - 1, k).round().astype(int)].copy()
    labels = np.zeros(m, dtype=np.int64)
    for _ in range(max_iters):
        dists = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = dists.argmin(axis=1)
        for c in range(k):
            member = new_labels == c
            if member.any():
                centroids[c] = pts[member].mean(axis=0)
        if (new_labels == labels).all():
            labels = new_labels
            break
        labels = new_labels
    return centroids, labels


def estimate_template(correct_features, k_clusters: int = 1) -> Template:
    """Template from correctly recognized features: the dominant cluster centroid.

    Inputs must already be padded to a common (t_max x d) shape. The
    centroid of the largest cluster (lowest index on ties) becomes the
    template.
    """
    mats = [np.ascontiguousarray(f, dtype=np.float64) for f in correct_features]
    if not mats:
        raise NoTemplateError("no correctly recognized features to estimate a template from")
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise ContractError("all char-feature matrices must share a padded shape")
    flat = np.stack([m.reshape(-1) for m in mats])
    k = min(k_clusters, flat.shape[0])
    centroids, labels = kmeans(flat, k)
    counts = np.bincount(labels, minlength=k)
    best = int(counts.argmax())
    return Template(features=centroids[best].reshape(shape), source_count=len(mats))


def teacher_score(region_features, template: Template) -> float:
    """Cosine similarity between flattened region features and the template."""
    r = np.ascontiguousarray(region_features, dtype=np.float64).reshape(-1)
    t = template.features.reshape(-1)
    if r.shape != t.shape:
        raise ContractError(f"region features length {r.shape} != template length {t.shape}")
    rn = float(np.linalg.norm(r))
    tn = float(np.linalg.norm(t))
    if rn == 0.0 or tn == 0.0:
        raise ContractError("teacher_score needs non-zero feature vectors")
    return float(np.dot(r, t) / (rn * tn))


class RidgeStudent:
    """Linear score regressor with an unpenalized intercept."""

    def __init__(self, weights=None, intercept: float = 0.0):
        self.weights = None if weights is None else np.ascontiguousarray(weights, dtype=np.float64)
        self.intercept = float(intercept)

    @property
    def fitted(self) -> bool:
        return self.weights is not None

    def score(self, observation) -> float:
        if not self.fitted:
            raise ContractError("student model is not fitted")
        if observation.embedding is None:
            raise ContractError("observation has no embedding to score")
        return float(np.dot(self.weights, observation.embedding) + self.intercept)


class PassthroughStudent:
    """Returns stored teacher scores; for pipeline tests."""

    fitted = True

    def score(self, observation) -> float:
        if observation.teacher_score is None:
            raise ContractError("observation has no stored teacher score")
        return float(observation.teacher_score)


def fit_student(training, ridge_lambda: float) -> RidgeStudent:
    """Least-squares fit of embeddings to teacher scores, ridge on weights only.

    Centering keeps the intercept unpenalized, so constant targets yield an
    intercept-only model; with ridge_lambda 0 a rank-deficient system takes
    the minimum-norm solution.
    """
    if ridge_lambda < 0.0:
        raise ContractError(f"ridge_lambda must be >= 0, got {ridge_lambda}")
    if not training:
        raise ContractError("fit_student needs at least one training pair")
    x = np.stack([np.ascontiguousarray(e, dtype=np.float64) for e, _ in training])
    y = np.array([float(s) for _, s in training])
    x_mean = x.mean(axis=0)
    y_mean = float(y.mean())
    xc = x - x_mean
    yc = y - y_mean
    if ridge_lambda == 0.0:
        w, *_ = np.linalg.lstsq(xc, yc, rcond=None)
    else:
        d = x.shape[1]
        w = np.linalg.solve(xc.T @ xc + ridge_lambda * np.eye(d), xc.T @ yc)
    return RidgeStudent(weights=w, intercept=y_mean - float(np.dot(w, x_mean)))


def student_score(observation, model) -> float:
    """Evaluate a fitted student model on one observation."""
    if not getattr(model, "fitted", False):
        raise ContractError("student model is not fitted")
    return model.score(observation)


def _argmax_obs(stream: TextStream, key) -> int:
    best = 0
    best_score = key(stream.observations[0])
    for i, obs in enumerate(stream.observations[1:], start=1):
        score = key(obs)
        if score > best_score:
            best, best_score = i, score
    return best


def _require(stream: TextStream, field: str):
    for obs in stream.observations:
        if getattr(obs, field) is None:
            raise PolicyUnavailableError(
                f"stream {stream.id}: observation at frame {obs.frame} lacks {field}"
            )


def select(stream: TextStream, policy: SelectionPolicy) -> StreamDecision:
    """Pick exactly one observation from the stream under the given policy.

    Score ties keep the earliest frame. HFP breaks modal-string ties by
    higher mean character probability, then by earlier first occurrence.
    """
    if not stream.observations:
        raise ContractError(f"stream {stream.id} has no observations to select from")
    if policy.kind == "TR":
        _require(stream, "student_score")
        idx = _argmax_obs(stream, lambda o: o.student_score)
        quality = float(stream.observations[idx].student_score)
    elif policy.kind == "PCW":
        _require(stream, "hypothesis")
        idx = _argmax_obs(stream, lambda o: o.hypothesis.mean_char_prob)
        quality = float(stream.observations[idx].hypothesis.mean_char_prob)
    else:
        _require(stream, "hypothesis")
        counts = {}
        for obs in stream.observations:
            counts[obs.hypothesis.text] = counts.get(obs.hypothesis.text, 0) + 1
        modal = max(counts.values())
        candidates = [t for t, c in counts.items() if c == modal]
        if len(candidates) > 1:
            def text_rank(text):
                probs = [
                    o.hypothesis.mean_char_prob
                    for o in stream.observations
                    if o.hypothesis.text == text
                ]
                first = next(
                    i for i, o in enumerate(stream.observations) if o.hypothesis.text == text
                )
                return (-float(np.mean(probs)), first)
            candidates.sort(key=text_rank)
        chosen_text = candidates[0]
        idx = next(
            i for i, o in enumerate(stream.observations) if o.hypothesis.text == chosen_text
        )
        quality = modal / len(stream.observations)
    chosen = stream.observations[idx]
    if chosen.hypothesis is None:
        raise PolicyUnavailableError(
            f"stream {stream.id}: chosen observation at frame {chosen.frame} lacks hypothesis"
        )
    return StreamDecision(
        stream_id=stream.id,
        chosen_frame=chosen.frame,
        chosen_quad=chosen.quad,
        final_text=chosen.hypothesis.text,
        quality_score=quality,
    )


def _stream_transcript(stream: TextStream, gt_by_frame, iou_threshold: float):
    """Per-observation ground-truth transcripts by best spatial match."""
    transcripts = []
    for obs in stream.observations:
        best = None
        best_iou = 0.0
        for record in gt_by_frame.get(obs.frame, ()):
            iou = polygon_iou(obs.quad, record.quad)
            if iou >= iou_threshold and iou > best_iou:
                best, best_iou = record, iou
        transcripts.append(best.transcript if best is not None else None)
    return transcripts


def score_streams(streams, gt, t_max: int = 25, k_clusters: int = 1,
                  ridge_lambda: float = 1e-3, iou_threshold: float = 0.5):
    """Teacher-score all observations and fit the student in place.

    Correctness of an observation is decided against the transcript of the
    best-overlapping ground-truth record in its frame. Streams without any
    correct observation contribute no template and no training pairs.
    Returns the fitted student, or None when no stream yields a template.
    """
    gt_by_frame = {}
    for record in gt:
        gt_by_frame.setdefault(record.frame, []).append(record)
    training = []
    for stream in streams:
        transcripts = _stream_transcript(stream, gt_by_frame, iou_threshold)
        padded = []
        correct = []
        for obs, truth in zip(stream.observations, transcripts):
            if obs.hypothesis is None or len(obs.hypothesis.text) == 0:
                padded.append(None)
                continue
            p = pad_char_features(obs.hypothesis.char_features, t_max)
            padded.append(p)
            if truth is not None and obs.hypothesis.text == truth:
                correct.append(p)
        if not correct:
            continue
        template = estimate_template(correct, k_clusters=k_clusters)
        for obs, p in zip(stream.observations, padded):
            if p is None or not p.any():
                continue
            obs.teacher_score = teacher_score(p, template)
            if obs.embedding is not None:
                training.append((obs.embedding, obs.teacher_score))
    if not training:
        return None
    student = fit_student(training, ridge_lambda)
    for stream in streams:
        for obs in stream.observations:
            if obs.embedding is not None:
                obs.student_score = student_score(obs, student)
    return student


def decide(streams, policy: SelectionPolicy, student) -> list:
    """Select one decision per stream; TR falls back to PCW without a student."""
    effective = policy
    if policy.kind == "TR" and student is None:
        log.warning("no teacher training data; TR falling back to PCW selection")
        effective = SelectionPolicy("PCW")
    return [select(s, effective) for s in sorted(streams, key=lambda s: s.id)]
