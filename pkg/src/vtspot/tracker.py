"""Association of region observations into text streams.

Matching uses the reciprocal-dot cost between L2-normalized embeddings and
a minimum-cost assignment per frame. Pairs below the cosine floor are
masked invalid; unmatched observations open new streams.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .kernels import solve_assignment
from .types import TextStream

log = logging.getLogger(__name__)

INVALID_COST = 1e15


@dataclass
class TrackerConfig:
    """Association constants.

    similarity_threshold is a cosine floor: the reciprocal-dot cost of a
    unit pair is ~1/dot, so a cost-side threshold below 1 would invalidate
    every pair; the floor is therefore applied to the dot product itself.
    embedding_dim, when set, is enforced against incoming observations.
    use_mean_embedding switches the stream-side representative from the
    most recent embedding to the mean of all normalized embeddings.
    """

    mc_epsilon: float = 1e-7
    similarity_threshold: float = 0.92
    max_gap: int = 3
    embedding_dim: int | None = None
    use_mean_embedding: bool = False

    def __post_init__(self):
        if self.mc_epsilon <= 0.0:
            raise ContractError(f"mc_epsilon must be > 0, got {self.mc_epsilon}")
        if not 0.0 < self.similarity_threshold < 1.0:
            raise ContractError(
                f"similarity_threshold must be in (0, 1), got {self.similarity_threshold}"
            )
        if self.max_gap < 0:
            raise ContractError(f"max_gap must be >= 0, got {self.max_gap}")
        if self.embedding_dim is not None and self.embedding_dim < 1:
            raise ContractError(f"embedding_dim must be >= 1, got {self.embedding_dim}")


def normalize(embedding) -> np.ndarray:
    """Scale to unit L2 norm; zero vectors have no direction to keep."""
    v = np.ascontiguousarray(embedding, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ContractError("cannot normalize a zero vector")
    return v / norm


def matching_cost(q1, q2, epsilon: float = 1e-7) -> float:
    """Reciprocal dot product, 1/(q1.q2 + epsilon), for unit vectors."""
    return 1.0 / (float(np.dot(q1, q2)) + epsilon)


def valid_pair(q1, q2, cfg: TrackerConfig) -> bool:
    """A pair may be matched only when its cosine clears the floor."""
    return float(np.dot(q1, q2)) >= cfg.similarity_threshold


def assign(cost_matrix):
    """Minimum-total-cost one-to-one assignment as (row, col) pairs.

    Rectangular matrices are padded square with a constant, which leaves
    the optimum over real pairs unchanged; padded and sentinel-cost pairs
    are dropped from the result.
    """
    cost = np.ascontiguousarray(cost_matrix, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        if cost.ndim == 2:
            return []
        raise ContractError(f"cost matrix must be 2-d, got shape {cost.shape}")
    if not np.isfinite(cost).all():
        raise ContractError("cost matrix must be finite")
    rows, cols = cost.shape
    n = max(rows, cols)
    padded = np.zeros((n, n), dtype=np.float64)
    padded[:rows, :cols] = cost
    row_to_col = solve_assignment(padded)
    pairs = []
    for i in range(rows):
        j = int(row_to_col[i])
        if j < cols and cost[i, j] < INVALID_COST:
            pairs.append((i, j))
    return pairs


def _representative(stream: TextStream, cache: dict, cfg: TrackerConfig) -> np.ndarray:
    units = cache[stream.id]
    if cfg.use_mean_embedding:
        return normalize(np.mean(units, axis=0))
    return units[-1]


def track(observations, cfg: TrackerConfig):
    """Group observations into streams, processing frames in increasing order.

    Streams active within max_gap frames compete for the frame's
    observations via assignment over matching costs; invalid pairs are
    masked. Unmatched observations open new streams with ids issued in
    (frame, input order). Observations with missing or zero embeddings are
    rejected with a logged diagnostic.
    """
    by_frame = {}
    for obs in observations:
        by_frame.setdefault(obs.frame, []).append(obs)

    streams = []
    unit_cache = {}
    next_id = 0
    for frame in sorted(by_frame):
        accepted = []
        units = []
        for obs in by_frame[frame]:
            if obs.embedding is None or not obs.embedding.any():
                log.warning("frame %d: observation rejected, zero or missing embedding", frame)
                continue
            if cfg.embedding_dim is not None and obs.embedding.shape != (cfg.embedding_dim,):
                raise ContractError(
                    f"frame {frame}: embedding shape {obs.embedding.shape} != ({cfg.embedding_dim},)"
                )
            accepted.append(obs)
            units.append(normalize(obs.embedding))
        active = [s for s in streams if s.last_active_frame >= frame - cfg.max_gap]
        matched = set()
        if active and accepted:
            cost = np.full((len(active), len(accepted)), INVALID_COST)
            for i, stream in enumerate(active):
                rep = _representative(stream, unit_cache, cfg)
                for j, unit in enumerate(units):
                    if valid_pair(rep, unit, cfg):
                        cost[i, j] = matching_cost(rep, unit, cfg.mc_epsilon)
            for i, j in assign(cost):
                stream = active[i]
                stream.append(accepted[j])
                unit_cache[stream.id].append(units[j])
                matched.add(j)
        for j, obs in enumerate(accepted):
            if j not in matched:
                stream = TextStream(next_id, [obs])
                unit_cache[next_id] = [units[j]]
                streams.append(stream)
                next_id += 1
    return streams
