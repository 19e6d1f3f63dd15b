"""Evaluation protocols: detection P/R/F, tracking MOTP/MOTA/ATA,
selection QSHR/RCR, and sequence-level end-to-end scores.

Stream-level matching credits each ground-truth stream at most once, using
an optimal (maximum-cardinality) pairing so results are order-independent
and match the exhaustive oracle on small instances.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .formats import fmt_float
from .geometry import ScoredQuad, polygon_iou
from .tracker import INVALID_COST, assign

log = logging.getLogger(__name__)

TRANSCRIPT_MODES = ("exact", "case-insensitive")


@dataclass(frozen=True)
class MatchingConfig:
    iou_threshold: float = 0.5
    transcript_match: str = "exact"

    def __post_init__(self):
        if not 0.0 < self.iou_threshold < 1.0:
            raise ContractError(f"iou_threshold must be in (0, 1), got {self.iou_threshold}")
        if self.transcript_match not in TRANSCRIPT_MODES:
            raise ContractError(
                f"transcript_match must be one of {TRANSCRIPT_MODES}, got {self.transcript_match!r}"
            )


@dataclass
class EvalReport:
    det_precision: float
    det_recall: float
    det_f: float
    motp: float
    mota: float
    ata: float
    qshr: float
    rcr: float
    pre_s: float
    rec_s: float
    f_score: float
    n_r: int
    n_g: int
    n_d: int
    recognitions_consumed: int
    regions_total: int
    qshr_excluded: int
    speedup: float

    def to_lines(self):
        """Machine-readable key=value lines, fixed order."""
        items = [
            ("det_precision", self.det_precision),
            ("det_recall", self.det_recall),
            ("det_f", self.det_f),
            ("motp", self.motp),
            ("mota", self.mota),
            ("ata", self.ata),
            ("qshr", self.qshr),
            ("rcr", self.rcr),
            ("pre_s", self.pre_s),
            ("rec_s", self.rec_s),
            ("f_score", self.f_score),
            ("n_r", self.n_r),
            ("n_g", self.n_g),
            ("n_d", self.n_d),
            ("recognitions_consumed", self.recognitions_consumed),
            ("regions_total", self.regions_total),
            ("qshr_excluded", self.qshr_excluded),
            ("speedup_ratio", self.speedup),
        ]
        return [
            f"{key}={fmt_float(value) if isinstance(value, float) else value}"
            for key, value in items
        ]


def _harmonic(p: float, r: float) -> float:
    return 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)


def _texts_equal(a: str, b: str, cfg: MatchingConfig) -> bool:
    if cfg.transcript_match == "case-insensitive":
        return a.casefold() == b.casefold()
    return a == b


def _gt_by_frame(gt):
    grouped = {}
    for record in gt:
        grouped.setdefault(record.frame, []).append(record)
    return grouped


def _gt_streams(gt):
    """Records grouped by stream id, frame-sorted, keyed in id order."""
    grouped = {}
    for record in gt:
        grouped.setdefault(record.id, []).append(record)
    return {
        sid: sorted(records, key=lambda r: r.frame)
        for sid, records in sorted(grouped.items())
    }


def detection_prf(dets, gt, cfg: MatchingConfig):
    """Per-frame greedy one-to-one matching; returns (precision, recall, f)."""
    gt_frames = _gt_by_frame(gt)
    tp = fp = fn = 0
    for frame in sorted(set(dets) | set(gt_frames)):
        candidates = dets.get(frame, [])
        records = gt_frames.get(frame, [])
        taken = [False] * len(records)
        order = sorted(range(len(candidates)), key=lambda i: (-candidates[i].score, i))
        matched = 0
        for i in order:
            best = -1
            best_iou = 0.0
            for j, record in enumerate(records):
                if taken[j]:
                    continue
                iou = polygon_iou(candidates[i].quad, record.quad)
                if iou >= cfg.iou_threshold and iou > best_iou:
                    best, best_iou = j, iou
            if best >= 0:
                taken[best] = True
                matched += 1
        tp += matched
        fp += len(candidates) - matched
        fn += len(records) - matched
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall, _harmonic(precision, recall)


def tracking_metrics(pred_streams, gt, cfg: MatchingConfig):
    """CLEAR-style MOTP/MOTA plus VACE-style ATA; returns the triple.

    Per-frame correspondences come from minimum-cost assignment on 1-IoU
    gated at the threshold; identity switches count whenever a ground-truth
    id changes its matched stream.
    """
    gt_frames = _gt_by_frame(gt)
    pred_frames = {}
    for stream in sorted(pred_streams, key=lambda s: s.id):
        for obs in stream.observations:
            pred_frames.setdefault(obs.frame, []).append((stream.id, obs.quad))
    total_gt = sum(len(v) for v in gt_frames.values())
    iou_sum = 0.0
    n_match = fp = fn = idsw = 0
    last_match = {}
    for frame in sorted(set(gt_frames) | set(pred_frames)):
        records = gt_frames.get(frame, [])
        preds = pred_frames.get(frame, [])
        pairs = []
        if records and preds:
            cost = np.full((len(records), len(preds)), INVALID_COST)
            for i, record in enumerate(records):
                for j, (_, quad) in enumerate(preds):
                    iou = polygon_iou(record.quad, quad)
                    if iou >= cfg.iou_threshold:
                        cost[i, j] = 1.0 - iou
            pairs = assign(cost)
        for i, j in pairs:
            record = records[i]
            pred_id, quad = preds[j]
            iou_sum += polygon_iou(record.quad, quad)
            if record.id in last_match and last_match[record.id] != pred_id:
                idsw += 1
            last_match[record.id] = pred_id
        n_match += len(pairs)
        fp += len(preds) - len(pairs)
        fn += len(records) - len(pairs)
    motp = iou_sum / n_match if n_match else 0.0
    if total_gt:
        mota = 1.0 - (fn + fp + idsw) / total_gt
    else:
        mota = 1.0 if fp + idsw == 0 else 0.0
        log.warning("tracking_metrics: empty ground truth, MOTA degenerate")
    gt_streams = _gt_streams(gt)
    preds_sorted = sorted(pred_streams, key=lambda s: s.id)
    if not gt_streams and not preds_sorted:
        return motp, mota, 1.0
    if not gt_streams or not preds_sorted:
        return motp, mota, 0.0
    gt_ids = list(gt_streams)
    ratios = np.zeros((len(gt_ids), len(preds_sorted)))
    for i, sid in enumerate(gt_ids):
        by_frame = {r.frame: r for r in gt_streams[sid]}
        for j, stream in enumerate(preds_sorted):
            overlap = 0
            union = set(by_frame)
            for obs in stream.observations:
                union.add(obs.frame)
                record = by_frame.get(obs.frame)
                if record is not None and polygon_iou(record.quad, obs.quad) >= cfg.iou_threshold:
                    overlap += 1
            ratios[i, j] = overlap / len(union)
    stda = sum(ratios[i, j] for i, j in assign(-ratios))
    ata = stda / ((len(gt_ids) + len(preds_sorted)) / 2.0)
    return motp, mota, ata


def _valid_recall(decision, records, cfg: MatchingConfig, require_text: bool):
    """Whether a decision validly recalls the given ground-truth stream."""
    start = records[0].frame
    end = records[-1].frame
    if not start <= decision.chosen_frame <= end:
        return False
    record = next((r for r in records if r.frame == decision.chosen_frame), None)
    if record is None:
        return False
    if polygon_iou(decision.chosen_quad, record.quad) < cfg.iou_threshold:
        return False
    if require_text and not _texts_equal(decision.final_text, record.transcript, cfg):
        return False
    return True


def _match_decisions(decisions, gt_streams, cfg: MatchingConfig, require_text: bool):
    """Maximum-cardinality decision-to-stream matching, at most one per stream.

    Returns (decision index, gt stream id) pairs; the assignment solver
    makes tie resolution deterministic.
    """
    decisions = list(decisions)
    gt_ids = list(gt_streams)
    if not decisions or not gt_ids:
        return []
    valid = np.zeros((len(decisions), len(gt_ids)), dtype=bool)
    for i, decision in enumerate(decisions):
        for j, sid in enumerate(gt_ids):
            valid[i, j] = _valid_recall(decision, gt_streams[sid], cfg, require_text)
    if not valid.any():
        return []
    cost = np.where(valid, -1.0, 0.0)
    return [(i, gt_ids[j]) for i, j in assign(cost) if valid[i, j]]


def qshr(decisions, gt, cfg: MatchingConfig = MatchingConfig()) -> float:
    """Fraction of matched streams whose chosen region is annotated high.

    Streams whose ground truth never contains a high-quality record cannot
    hit and are excluded from the denominator.
    """
    value, _ = qshr_detail(decisions, gt, cfg)
    return value


def qshr_detail(decisions, gt, cfg: MatchingConfig = MatchingConfig()):
    """(qshr, excluded-stream count); see qshr."""
    gt_streams = _gt_streams(gt)
    decisions = sorted(decisions, key=lambda d: d.stream_id)
    hits = 0
    counted = 0
    excluded = 0
    for i, sid in _match_decisions(decisions, gt_streams, cfg, require_text=False):
        records = gt_streams[sid]
        if not any(r.quality == "high" for r in records):
            excluded += 1
            continue
        counted += 1
        chosen = next(r for r in records if r.frame == decisions[i].chosen_frame)
        if chosen.quality == "high":
            hits += 1
    if not counted:
        log.warning("qshr: no matched streams with a high-quality record")
        return 0.0, excluded
    return hits / counted, excluded


def rcr(decisions, gt, cfg: MatchingConfig = MatchingConfig()) -> float:
    """Fraction of matched streams whose final text is correct."""
    gt_streams = _gt_streams(gt)
    decisions = sorted(decisions, key=lambda d: d.stream_id)
    matches = _match_decisions(decisions, gt_streams, cfg, require_text=False)
    if not matches:
        log.warning("rcr: no decisions matched any ground-truth stream")
        return 0.0
    hits = 0
    for i, sid in matches:
        chosen = next(r for r in gt_streams[sid] if r.frame == decisions[i].chosen_frame)
        if _texts_equal(decisions[i].final_text, chosen.transcript, cfg):
            hits += 1
    return hits / len(matches)


def end_to_end(decisions, gt, cfg: MatchingConfig = MatchingConfig()):
    """Sequence-level (pre_s, rec_s, f_score) under the once-per-stream rule.

    A decision validly recalls a stream when its text matches, its frame
    falls inside the stream's annotated span, and its quad overlaps the
    record at that frame above the threshold.
    """
    pre, rec, f, _ = end_to_end_counts(decisions, gt, cfg)
    return pre, rec, f


def end_to_end_counts(decisions, gt, cfg: MatchingConfig = MatchingConfig()):
    """(pre_s, rec_s, f_score, (n_r, n_g, n_d)); see end_to_end."""
    gt_streams = _gt_streams(gt)
    decisions = sorted(decisions, key=lambda d: d.stream_id)
    n_r = len(_match_decisions(decisions, gt_streams, cfg, require_text=True))
    n_g = len(gt_streams)
    n_d = len(decisions)
    rec = n_r / n_g if n_g else 0.0
    pre = n_r / n_d if n_d else 0.0
    return pre, rec, _harmonic(pre, rec), (n_r, n_g, n_d)


def speedup_ratio(counts) -> float:
    """Recognition-call reduction: regions_total / recognitions_consumed."""
    consumed = int(counts["recognitions_consumed"])
    total = int(counts["regions_total"])
    if consumed < 1:
        raise ContractError(f"recognitions_consumed must be >= 1, got {consumed}")
    return total / consumed


def evaluate(gt, streams, decisions, counts, detections=None,
             cfg: MatchingConfig = MatchingConfig()) -> EvalReport:
    """Full report over one scenario's outputs.

    When no detections file is supplied, per-frame detections are derived
    from the stream observations with score 1.0.
    """
    if detections is None:
        detections = {}
        for stream in sorted(streams, key=lambda s: s.id):
            for obs in stream.observations:
                detections.setdefault(obs.frame, []).append(ScoredQuad(obs.quad, 1.0))
    det_p, det_r, det_f = detection_prf(detections, gt, cfg)
    motp, mota, ata = tracking_metrics(streams, gt, cfg)
    qshr_value, excluded = qshr_detail(decisions, gt, cfg)
    rcr_value = rcr(decisions, gt, cfg)
    pre_s, rec_s, f_score, (n_r, n_g, n_d) = end_to_end_counts(decisions, gt, cfg)
    return EvalReport(
        det_precision=det_p,
        det_recall=det_r,
        det_f=det_f,
        motp=motp,
        mota=mota,
        ata=ata,
        qshr=qshr_value,
        rcr=rcr_value,
        pre_s=pre_s,
        rec_s=rec_s,
        f_score=f_score,
        n_r=n_r,
        n_g=n_g,
        n_d=n_d,
        recognitions_consumed=int(counts["recognitions_consumed"]),
        regions_total=int(counts["regions_total"]),
        qshr_excluded=excluded,
        speedup=speedup_ratio(counts),
    )
