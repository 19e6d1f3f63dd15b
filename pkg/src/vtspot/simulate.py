"""Deterministic synthetic scenarios: ground truth, degraded observations,
embeddings, recognition hypotheses, and optionally rendered grid inputs.

Streams move along horizontal lanes with integer velocities, so rendered
geometry is exact. Identity anchors are orthonormalized, which realizes
any separation bound up to 90 degrees; quality degrades embeddings (norm
and direction), character features, probabilities, and substitution rates
together.
"""

import itertools
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, FeasibilityError, FormatError
from .formats import (
    atomic_write_text,
    fmt_float,
    load_annotations,
    load_manifest,
    load_tensor_grid,
    save_annotations,
    save_manifest,
    save_tensor_grid,
)
from .geometry import Quad
from .providers import ALPHABET, ErrorModel, synthetic_recognizer
from .types import (
    QUALITY_LEVELS,
    FlowField,
    GroundTruthRecord,
    RecognitionHypothesis,
    RegionObservation,
    TensorGrid,
)

DEFAULT_EMBEDDING_NOISE = {"high": 0.005, "moderate": 0.02, "low": 0.05}
DEFAULT_QUALITY_SCALE = {"high": 1.0, "moderate": 0.8, "low": 0.6}
DEFAULT_FEATURE_NOISE = {"high": 0.02, "moderate": 0.08, "low": 0.25}
DEFAULT_PROB_NOISE = {"high": 0.02, "moderate": 0.05, "low": 0.25}
DEFAULT_RECOGNIZER_ERROR = {"high": 0.0, "moderate": 0.08, "low": 0.6}


def _check_quality_map(name, mapping, lo=0.0, hi=None):
    for level in QUALITY_LEVELS:
        if level not in mapping:
            raise ContractError(f"{name} must define {level!r}")
        v = float(mapping[level])
        if v < lo or (hi is not None and v > hi):
            raise ContractError(f"{name}[{level!r}] out of range: {v}")


@dataclass(frozen=True)
class ScenarioSpec:
    """Knobs of one synthetic scenario; everything derives from the seed."""

    n_streams: int
    frames_per_stream: tuple
    seed: int
    quality_profile: tuple = ("high", "moderate", "low")
    identity_separation: float = 90.0
    recognizer_error: dict = field(default_factory=lambda: dict(DEFAULT_RECOGNIZER_ERROR))
    embedding_noise: dict = field(default_factory=lambda: dict(DEFAULT_EMBEDDING_NOISE))
    quality_scale: dict = field(default_factory=lambda: dict(DEFAULT_QUALITY_SCALE))
    feature_noise: dict = field(default_factory=lambda: dict(DEFAULT_FEATURE_NOISE))
    prob_noise: dict = field(default_factory=lambda: dict(DEFAULT_PROB_NOISE))
    wrong_prob_range: tuple = (0.92, 1.0)
    confusion_bias: float = 0.75
    embedding_dim: int = 128
    char_feature_dim: int = 16
    text_length: tuple = (3, 6)
    max_start: int = 0
    velocity_range: tuple = (-1, 1)
    grid_height: int = 32
    grid_width: int = 48
    quad_width: int = 6
    quad_height: int = 4
    lane_gap: int = 2
    feature_channels: int = 4
    flow_window: int = 1
    render_grids: bool = False

    def __post_init__(self):
        if self.n_streams < 1:
            raise ContractError(f"n_streams must be >= 1, got {self.n_streams}")
        lo, hi = self.frames_per_stream
        if not 1 <= lo <= hi:
            raise ContractError(f"frames_per_stream must be an ordered range >= 1, got {self.frames_per_stream}")
        if not self.quality_profile:
            raise ContractError("quality_profile must be non-empty")
        for q in self.quality_profile:
            if q not in QUALITY_LEVELS:
                raise ContractError(f"unknown quality {q!r} in profile")
        if not 0.0 < self.identity_separation <= 90.0:
            raise ContractError(
                f"identity_separation must be in (0, 90] degrees, got {self.identity_separation}"
            )
        _check_quality_map("recognizer_error", self.recognizer_error, hi=1.0)
        _check_quality_map("embedding_noise", self.embedding_noise)
        _check_quality_map("quality_scale", self.quality_scale, lo=1e-9)
        _check_quality_map("feature_noise", self.feature_noise)
        _check_quality_map("prob_noise", self.prob_noise, hi=1.0)
        tlo, thi = self.text_length
        if not 1 <= tlo <= thi:
            raise ContractError(f"text_length must be an ordered range >= 1, got {self.text_length}")
        if self.max_start < 0:
            raise ContractError(f"max_start must be >= 0, got {self.max_start}")
        vlo, vhi = self.velocity_range
        if vlo > vhi:
            raise ContractError(f"velocity_range must be ordered, got {self.velocity_range}")
        for name in ("embedding_dim", "char_feature_dim", "grid_height", "grid_width",
                     "quad_width", "quad_height", "feature_channels"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.lane_gap < 0 or self.flow_window < 0:
            raise ContractError("lane_gap and flow_window must be >= 0")


@dataclass
class Scenario:
    """Generated ground truth plus everything the pipeline consumes."""

    gt: list
    observations: list
    labels: list
    transcripts: dict
    motion: dict
    render_meta: dict
    features: dict | None = None
    confidences: dict | None = None
    geometry: dict | None = None
    flows: dict | None = None

    @property
    def rendered(self) -> bool:
        return self.features is not None

    def frame_range(self):
        frames = [r.frame for r in self.gt]
        return (min(frames), max(frames))


def _orthonormal_anchors(rng, n: int, dim: int) -> np.ndarray:
    """Gram-Schmidt anchors; orthogonality realizes any bound up to 90 deg."""
    if n > dim:
        raise FeasibilityError(
            f"cannot separate {n} identities in a {dim}-dimensional embedding space"
        )
    anchors = np.zeros((n, dim))
    for i in range(n):
        for _ in range(64):
            v = rng.standard_normal(dim)
            v -= anchors[:i].T @ (anchors[:i] @ v)
            norm = np.linalg.norm(v)
            if norm > 1e-6:
                anchors[i] = v / norm
                break
        else:
            raise FeasibilityError("could not draw an independent anchor direction")
    return anchors


def _quad_at(x: int, y: int, w: int, h: int) -> Quad:
    return Quad(np.array(
        [[x, y], [x + w, y], [x + w, y + h], [x, y + h]], dtype=np.float64
    ))


def _stream_layout(spec: ScenarioSpec, rng, n_frames: int, index: int):
    """Lane position and integer velocity keeping rendered motion in-bounds."""
    vlo, vhi = spec.velocity_range
    vx = int(rng.integers(vlo, vhi + 1))
    y0 = 1 + index * (spec.quad_height + spec.lane_gap)
    span = (n_frames - 1) * vx
    if spec.render_grids:
        if y0 + spec.quad_height + 1 > spec.grid_height:
            raise FeasibilityError(
                f"{spec.n_streams} lanes of height {spec.quad_height + spec.lane_gap} "
                f"do not fit a grid of height {spec.grid_height}"
            )
        if vx >= 0:
            x0 = 1
            if x0 + span + spec.quad_width + 1 > spec.grid_width:
                raise FeasibilityError(
                    f"track of span {span} does not fit a grid of width {spec.grid_width}"
                )
        else:
            x0 = spec.grid_width - 1 - spec.quad_width
            if x0 + span < 1:
                raise FeasibilityError(
                    f"track of span {span} does not fit a grid of width {spec.grid_width}"
                )
    else:
        x0 = 1
    return x0, y0, vx


def _signature(channels: int, sid: int) -> np.ndarray:
    """Per-stream feature pattern with mean absolute activation exactly 1."""
    sig = np.zeros(channels)
    sig[sid % channels] = float(channels)
    return sig


def generate(spec: ScenarioSpec) -> Scenario:
    """Build one scenario; identical specs produce identical scenarios."""
    rng = np.random.default_rng(spec.seed)
    anchors = _orthonormal_anchors(rng, spec.n_streams, spec.embedding_dim)
    tlo, thi = spec.text_length
    flo, fhi = spec.frames_per_stream
    gt = []
    rows = []
    transcripts = {}
    motion = {}
    for sid in range(spec.n_streams):
        length = int(rng.integers(tlo, thi + 1))
        text = "".join(ALPHABET[int(rng.integers(len(ALPHABET)))] for _ in range(length))
        transcripts[sid] = text
        n_frames = int(rng.integers(flo, fhi + 1))
        start = int(rng.integers(0, spec.max_start + 1))
        x0, y0, vx = _stream_layout(spec, rng, n_frames, sid)
        motion[sid] = {"x0": x0, "y0": y0, "vx": vx, "start": start, "n_frames": n_frames}
        for k in range(n_frames):
            frame = start + k
            quality = spec.quality_profile[k % len(spec.quality_profile)]
            quad = _quad_at(x0 + k * vx, y0, spec.quad_width, spec.quad_height)
            gt.append(GroundTruthRecord(frame, sid, quad, "Latin", quality, text))
            noise = float(spec.embedding_noise[quality])
            direction = anchors[sid]
            if noise > 0.0:
                bump = rng.standard_normal(spec.embedding_dim)
                direction = direction + noise * bump / np.linalg.norm(bump)
                direction = direction / np.linalg.norm(direction)
            embedding = float(spec.quality_scale[quality]) * direction
            model = ErrorModel(
                substitution_prob=float(spec.recognizer_error[quality]),
                feature_noise=float(spec.feature_noise[quality]),
                correct_prob_noise=float(spec.prob_noise[quality]),
                wrong_prob_range=tuple(spec.wrong_prob_range),
                confusion_bias=float(spec.confusion_bias),
                feature_dim=spec.char_feature_dim,
            )
            hypothesis = synthetic_recognizer(text, model, int(rng.integers(2**62)))
            obs = RegionObservation(frame=frame, quad=quad, embedding=embedding,
                                    hypothesis=hypothesis)
            rows.append((frame, sid, quality, obs))
    rows.sort(key=lambda r: (r[0], r[1]))
    observations = [r[3] for r in rows]
    labels = [(r[1], r[2]) for r in rows]
    gt.sort(key=lambda r: (r.frame, r.id))
    render_meta = {
        "grid_height": spec.grid_height,
        "grid_width": spec.grid_width,
        "quad_width": spec.quad_width,
        "quad_height": spec.quad_height,
        "feature_channels": spec.feature_channels,
        "flow_window": spec.flow_window,
        "embedding_dim": spec.embedding_dim,
        "char_feature_dim": spec.char_feature_dim,
    }
    scenario = Scenario(
        gt=gt,
        observations=observations,
        labels=labels,
        transcripts=transcripts,
        motion=motion,
        render_meta=render_meta,
    )
    if spec.render_grids:
        _render(scenario)
    return scenario


def _render(scenario: Scenario):
    """Rasterize features, confidences, geometry, and flows from ground truth.

    Features carry the stream signature over covered cells; confidence and
    geometry live at the quad's center cell. Flow at a reference-frame cell
    covered by a stream points to the stream's position in the source
    frame; elsewhere it is zero.
    """
    meta = scenario.render_meta
    h, w = meta["grid_height"], meta["grid_width"]
    qw, qh = meta["quad_width"], meta["quad_height"]
    channels = meta["feature_channels"]
    window = meta["flow_window"]
    lo, hi = scenario.frame_range()
    by_frame = {}
    for record in scenario.gt:
        by_frame.setdefault(record.frame, []).append(record)
    features = {}
    confidences = {}
    geometry = {}
    flows = {}
    signatures = {sid: _signature(channels, sid) for sid in scenario.motion}
    for t in range(lo, hi + 1):
        feat = np.zeros((h, w, channels))
        conf = np.zeros((h, w, 1))
        geom = np.zeros((h, w, 8))
        for record in by_frame.get(t, ()):
            x0, y0, _, _ = record.quad.bounds
            x0, y0 = int(round(x0)), int(round(y0))
            feat[y0 : y0 + qh, x0 : x0 + qw] = signatures[record.id]
            cx, cy = x0 + qw // 2, y0 + qh // 2
            conf[cy, cx, 0] = 1.0
            geom[cy, cx] = np.asarray(record.quad.flat()) - np.array(
                [cx, cy] * 4, dtype=np.float64
            )
        features[t] = TensorGrid(h, w, channels, feat)
        confidences[t] = TensorGrid(h, w, 1, conf)
        geometry[t] = TensorGrid(h, w, 8, geom)
    for t in range(lo, hi + 1):
        for i in range(-window, window + 1):
            src = min(max(t + i, lo), hi)
            if src == t or (src, t) in flows:
                continue
            dx = np.zeros((h, w))
            for record in by_frame.get(t, ()):
                x0, y0, _, _ = record.quad.bounds
                x0, y0 = int(round(x0)), int(round(y0))
                vx = scenario.motion[record.id]["vx"]
                dx[y0 : y0 + qh, x0 : x0 + qw] = float((src - t) * vx)
            flows[(src, t)] = FlowField(h, w, dx, np.zeros((h, w)))
    scenario.features = features
    scenario.confidences = confidences
    scenario.geometry = geometry
    scenario.flows = flows


def extreme_filter(scenario: Scenario, max_high_fraction: float) -> Scenario:
    """Keep only streams whose fraction of high-quality frames is bounded."""
    f = float(max_high_fraction)
    if not 0.0 < f < 1.0:
        raise ContractError(f"max_high_fraction must be in (0, 1), got {f}")
    per_stream = {}
    for record in scenario.gt:
        total, high = per_stream.get(record.id, (0, 0))
        per_stream[record.id] = (total + 1, high + (record.quality == "high"))
    keep = {sid for sid, (total, high) in per_stream.items() if high / total <= f}
    gt = [r for r in scenario.gt if r.id in keep]
    pairs = [
        (obs, label)
        for obs, label in zip(scenario.observations, scenario.labels)
        if label[0] in keep
    ]
    filtered = Scenario(
        gt=gt,
        observations=[p[0] for p in pairs],
        labels=[p[1] for p in pairs],
        transcripts={sid: t for sid, t in scenario.transcripts.items() if sid in keep},
        motion={sid: m for sid, m in scenario.motion.items() if sid in keep},
        render_meta=dict(scenario.render_meta),
    )
    if scenario.rendered and filtered.gt:
        _render(filtered)
    return filtered


def brute_force_assignment(cost) -> float:
    """Exhaustive minimum total assignment cost; oracle for the solver."""
    c = np.ascontiguousarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ContractError(f"cost must be square, got shape {c.shape}")
    n = c.shape[0]
    if n > 8:
        raise ContractError(f"brute force capped at 8x8, got {n}x{n}")
    best = math.inf
    for perm in itertools.permutations(range(n)):
        total = 0.0
        for i in range(n):
            total += c[i, perm[i]]
        if total < best:
            best = total
    return best


def save_scenario(scenario: Scenario, outdir):
    """Write a scenario directory in the pipeline's file formats."""
    os.makedirs(outdir, exist_ok=True)
    save_annotations(os.path.join(outdir, "gt.tsv"), scenario.gt)
    obs_lines = []
    label_lines = []
    for i, (obs, (sid, quality)) in enumerate(zip(scenario.observations, scenario.labels)):
        coords = "\t".join(fmt_float(v) for v in obs.quad.flat())
        text = obs.hypothesis.text
        probs = ",".join(fmt_float(p) for p in obs.hypothesis.char_probs)
        obs_lines.append(f"{obs.frame}\t{coords}\t{text}\t{probs}")
        label_lines.append(f"{i}\t{sid}\t{quality}")
    atomic_write_text(os.path.join(outdir, "observations.tsv"),
                      "".join(line + "\n" for line in obs_lines))
    atomic_write_text(os.path.join(outdir, "labels.tsv"),
                      "".join(line + "\n" for line in label_lines))
    n_obs = len(scenario.observations)
    dim = scenario.render_meta["embedding_dim"]
    d_char = scenario.render_meta["char_feature_dim"]
    emb = np.stack([obs.embedding for obs in scenario.observations])
    save_tensor_grid(os.path.join(outdir, "embeddings.tg"), TensorGrid(1, n_obs, dim, emb[None]))
    pad_rows = max(1, max(len(obs.hypothesis.text) for obs in scenario.observations))
    charfeat = np.zeros((n_obs, pad_rows, d_char))
    for i, obs in enumerate(scenario.observations):
        rows = obs.hypothesis.char_features
        charfeat[i, : rows.shape[0]] = rows
    save_tensor_grid(os.path.join(outdir, "charfeat.tg"),
                     TensorGrid(n_obs, pad_rows, d_char, charfeat))
    lo, hi = scenario.frame_range()
    manifest = {
        "n_observations": n_obs,
        "n_streams": len(scenario.transcripts),
        "frame_min": lo,
        "frame_max": hi,
        "char_pad_rows": pad_rows,
        "rendered": scenario.rendered,
        "render_meta": scenario.render_meta,
        "streams": {
            str(sid): {"transcript": scenario.transcripts[sid], **scenario.motion[sid]}
            for sid in sorted(scenario.transcripts)
        },
    }
    save_manifest(os.path.join(outdir, "manifest.json"), manifest)
    if scenario.rendered:
        frame_dir = os.path.join(outdir, "frames")
        flow_dir = os.path.join(outdir, "flows")
        os.makedirs(frame_dir, exist_ok=True)
        os.makedirs(flow_dir, exist_ok=True)
        for t in scenario.features:
            save_tensor_grid(os.path.join(frame_dir, f"feat_{t:04d}.tg"), scenario.features[t])
            save_tensor_grid(os.path.join(frame_dir, f"conf_{t:04d}.tg"), scenario.confidences[t])
            save_tensor_grid(os.path.join(frame_dir, f"geom_{t:04d}.tg"), scenario.geometry[t])
        for (src, ref), flow in scenario.flows.items():
            data = np.stack([flow.dx, flow.dy], axis=-1)
            save_tensor_grid(
                os.path.join(flow_dir, f"flow_{src:04d}_to_{ref:04d}.tg"),
                TensorGrid(flow.height, flow.width, 2, data),
            )


def load_scenario(path) -> Scenario:
    """Read a scenario directory back into memory."""
    manifest = load_manifest(os.path.join(path, "manifest.json"))
    gt = load_annotations(os.path.join(path, "gt.tsv"))
    meta = manifest["render_meta"]
    emb_grid = load_tensor_grid(os.path.join(path, "embeddings.tg"))
    char_grid = load_tensor_grid(os.path.join(path, "charfeat.tg"))
    n_obs = manifest["n_observations"]
    if emb_grid.width != n_obs or char_grid.height != n_obs:
        raise FormatError("embedding/charfeat grids disagree with manifest n_observations")
    observations = []
    labels = []
    obs_path = os.path.join(path, "observations.tsv")
    with open(obs_path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 11:
                raise FormatError(f"expected 11 fields, got {len(parts)}", line=line_no)
            i = len(observations)
            if i >= n_obs:
                raise FormatError("more observation rows than manifest declares", line=line_no)
            frame = int(parts[0])
            coords = np.array([float(v) for v in parts[1:9]]).reshape(4, 2)
            text = parts[9]
            probs = (
                np.array([float(v) for v in parts[10].split(",")])
                if parts[10]
                else np.zeros(0)
            )
            feats = char_grid.data[i, : len(text), :]
            hypothesis = RecognitionHypothesis(text, probs, feats)
            observations.append(
                RegionObservation(
                    frame=frame,
                    quad=Quad(coords),
                    embedding=emb_grid.data[0, i],
                    hypothesis=hypothesis,
                )
            )
    with open(os.path.join(path, "labels.tsv"), "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            idx, sid, quality = line.split("\t")
            if int(idx) != len(labels):
                raise FormatError("label rows out of order", line=line_no)
            labels.append((int(sid), quality))
    if len(observations) != n_obs or len(labels) != n_obs:
        raise FormatError(f"expected {n_obs} observations and labels")
    transcripts = {}
    motion = {}
    for sid_str, info in manifest["streams"].items():
        sid = int(sid_str)
        transcripts[sid] = info["transcript"]
        motion[sid] = {k: info[k] for k in ("x0", "y0", "vx", "start", "n_frames")}
    scenario = Scenario(
        gt=gt,
        observations=observations,
        labels=labels,
        transcripts=transcripts,
        motion=motion,
        render_meta=dict(meta),
    )
    if manifest["rendered"]:
        lo, hi = manifest["frame_min"], manifest["frame_max"]
        features = {}
        confidences = {}
        geometry = {}
        flows = {}
        for t in range(lo, hi + 1):
            features[t] = load_tensor_grid(os.path.join(path, "frames", f"feat_{t:04d}.tg"))
            confidences[t] = load_tensor_grid(os.path.join(path, "frames", f"conf_{t:04d}.tg"))
            geometry[t] = load_tensor_grid(os.path.join(path, "frames", f"geom_{t:04d}.tg"))
        window = meta["flow_window"]
        for t in range(lo, hi + 1):
            for i in range(-window, window + 1):
                src = min(max(t + i, lo), hi)
                if src == t or (src, t) in flows:
                    continue
                grid = load_tensor_grid(
                    os.path.join(path, "flows", f"flow_{src:04d}_to_{t:04d}.tg")
                )
                flows[(src, t)] = FlowField(grid.height, grid.width,
                                            grid.data[:, :, 0], grid.data[:, :, 1])
        scenario.features = features
        scenario.confidences = confidences
        scenario.geometry = geometry
        scenario.flows = flows
    return scenario
