"""File formats: binary tensor grids, flow fields, and tab-separated tables.

Tensor grid layout: 16-byte magic, then height/width/channels as
little-endian int32, then float32 cell data row-major. Values are widened
to float64 in memory; round-trips are bit-exact for float32 payloads.

Annotation rows are tab-separated: frame, id, 8 polygon floats, language,
quality, transcript. The transcript comes last so it may contain spaces
(and tabs). Floats are written with repr() so identical values always
produce identical bytes.
"""

import json
import os
import struct
import tempfile

import numpy as np

from .errors import FormatError
from .geometry import Quad, ScoredQuad
from .types import (
    LANGUAGES,
    QUALITY_LEVELS,
    FlowField,
    GroundTruthRecord,
    RegionObservation,
    StreamDecision,
    TensorGrid,
    TextStream,
)

GRID_MAGIC = b"VTSPOT.TGRID.V1\n"
_HEADER_LEN = len(GRID_MAGIC) + 12

DECISION_LANGUAGE = "Latin"
DECISION_QUALITY = "moderate"


def fmt_float(x) -> str:
    """Shortest round-trip decimal form; deterministic across runs."""
    return repr(float(x))


def atomic_write_bytes(path, payload: bytes):
    """Write via a sibling temp file and rename, so readers never see partial files."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def save_tensor_grid(path, grid: TensorGrid):
    header = GRID_MAGIC + struct.pack("<iii", grid.height, grid.width, grid.channels)
    payload = np.ascontiguousarray(grid.data, dtype="<f4").tobytes()
    atomic_write_bytes(path, header + payload)


def load_tensor_grid(path) -> TensorGrid:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER_LEN:
        raise FormatError("truncated grid header", offset=len(blob))
    if blob[: len(GRID_MAGIC)] != GRID_MAGIC:
        raise FormatError("bad grid magic", offset=0)
    h, w, c = struct.unpack_from("<iii", blob, len(GRID_MAGIC))
    if h < 1 or w < 1 or c < 1:
        raise FormatError(f"non-positive grid dims {h}x{w}x{c}", offset=len(GRID_MAGIC))
    expected = _HEADER_LEN + 4 * h * w * c
    if len(blob) < expected:
        raise FormatError(
            f"grid payload truncated: need {expected} bytes, have {len(blob)}",
            offset=len(blob),
        )
    if len(blob) > expected:
        raise FormatError("trailing bytes after grid payload", offset=expected)
    flat = np.frombuffer(blob, dtype="<f4", offset=_HEADER_LEN)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise FormatError("non-finite grid value", offset=_HEADER_LEN + 4 * int(bad[0]))
    data = flat.astype(np.float64).reshape(h, w, c)
    return TensorGrid(h, w, c, data)


def save_flow_field(path, flow: FlowField):
    data = np.stack([flow.dx, flow.dy], axis=-1)
    save_tensor_grid(path, TensorGrid(flow.height, flow.width, 2, data))


def load_flow_field(path) -> FlowField:
    grid = load_tensor_grid(path)
    if grid.channels != 2:
        raise FormatError(f"flow grid must have 2 channels, got {grid.channels}", offset=len(GRID_MAGIC))
    return FlowField(grid.height, grid.width, grid.data[:, :, 0], grid.data[:, :, 1])


def _parse_int(token: str, what: str, line_no: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise FormatError(f"bad {what} {token!r}", line=line_no) from None


def _parse_float(token: str, what: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise FormatError(f"bad {what} {token!r}", line=line_no) from None
    if not np.isfinite(value):
        raise FormatError(f"non-finite {what} {token!r}", line=line_no)
    return value


def _parse_quad(tokens, line_no: int) -> Quad:
    coords = [_parse_float(t, "polygon coordinate", line_no) for t in tokens]
    return Quad(np.array(coords, dtype=np.float64).reshape(4, 2))


def _annotation_line(frame, rid, quad, language, quality, transcript) -> str:
    coords = "\t".join(fmt_float(v) for v in quad.flat())
    return f"{frame}\t{rid}\t{coords}\t{language}\t{quality}\t{transcript}"


def save_annotations(path, records):
    rows = sorted(records, key=lambda r: (r.frame, r.id))
    lines = [
        _annotation_line(r.frame, r.id, r.quad, r.language, r.quality, r.transcript)
        for r in rows
    ]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_annotations(path):
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 12)
            if len(parts) != 13:
                raise FormatError(
                    f"expected 13 tab-separated fields, got {len(parts)}", line=line_no
                )
            frame = _parse_int(parts[0], "frame", line_no)
            rid = _parse_int(parts[1], "id", line_no)
            quad = _parse_quad(parts[2:10], line_no)
            language, quality, transcript = parts[10], parts[11], parts[12]
            if language not in LANGUAGES:
                raise FormatError(f"unknown language {language!r}", line=line_no)
            if quality not in QUALITY_LEVELS:
                raise FormatError(f"unknown quality {quality!r}", line=line_no)
            key = (frame, rid)
            if key in seen:
                raise FormatError(f"duplicate (frame, id) {key}", line=line_no)
            seen.add(key)
            records.append(GroundTruthRecord(frame, rid, quad, language, quality, transcript))
    records.sort(key=lambda r: (r.frame, r.id))
    return records


def save_detections(path, detections):
    """Write per-frame scored quads: frame, 8 coords, score."""
    lines = []
    for frame in sorted(detections):
        for sq in detections[frame]:
            coords = "\t".join(fmt_float(v) for v in sq.quad.flat())
            lines.append(f"{frame}\t{coords}\t{fmt_float(sq.score)}")
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_detections(path):
    detections = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 10:
                raise FormatError(
                    f"expected 10 tab-separated fields, got {len(parts)}", line=line_no
                )
            frame = _parse_int(parts[0], "frame", line_no)
            quad = _parse_quad(parts[1:9], line_no)
            score = _parse_float(parts[9], "score", line_no)
            detections.setdefault(frame, []).append(ScoredQuad(quad, score))
    return detections


def save_streams(path, streams):
    """Write streams as annotation rows; language and quality are fixed
    placeholders and the transcript column carries each observation's
    hypothesis text (empty when absent). Evaluation reads only frame, id,
    and polygon from this file.
    """
    lines = []
    for stream in sorted(streams, key=lambda s: s.id):
        for obs in stream.observations:
            text = obs.hypothesis.text if obs.hypothesis is not None else ""
            lines.append(
                _annotation_line(
                    obs.frame, stream.id, obs.quad, DECISION_LANGUAGE, DECISION_QUALITY, text
                )
            )
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_streams(path):
    """Rebuild streams from a streams file; hypotheses are not restored."""
    records = load_annotations(path)
    by_id = {}
    for r in records:
        by_id.setdefault(r.id, []).append(RegionObservation(frame=r.frame, quad=r.quad))
    return [TextStream(sid, obs) for sid, obs in sorted(by_id.items())]


def save_decisions(path, decisions):
    """Write decisions as annotation rows: frame = chosen frame, id = stream
    id, transcript = final text. Language and quality are placeholders; the
    quality score is not persisted (evaluation never reads it).
    """
    lines = []
    for d in sorted(decisions, key=lambda d: d.stream_id):
        lines.append(
            _annotation_line(
                d.chosen_frame,
                d.stream_id,
                d.chosen_quad,
                DECISION_LANGUAGE,
                DECISION_QUALITY,
                d.final_text,
            )
        )
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_decisions(path):
    records = load_annotations(path)
    return [
        StreamDecision(
            stream_id=r.id,
            chosen_frame=r.frame,
            chosen_quad=r.quad,
            final_text=r.transcript,
            quality_score=0.0,
        )
        for r in sorted(records, key=lambda r: r.id)
    ]


def save_manifest(path, payload: dict):
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad manifest JSON: {exc}", line=exc.lineno) from None
