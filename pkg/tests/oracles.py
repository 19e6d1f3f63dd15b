"""Independent reference implementations used to cross-check the package.

Everything here is written directly from the defining formulas, favoring
clarity over speed, so test expectations share no code with the
implementations under test (geometry primitives excepted, which have their
own hand-valued tests).
"""

import numpy as np

from vtspot.geometry import Quad, polygon_iou


def rect(x0: float, y0: float, w: float, h: float) -> Quad:
    return Quad(np.array(
        [[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]],
        dtype=np.float64,
    ))


def central_difference(f, x, eps: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi.flat[i] += eps
        lo.flat[i] -= eps
        grad.flat[i] = (f(hi) - f(lo)) / (2.0 * eps)
    return grad


def decision_recalls_stream(decision, records, iou_threshold: float,
                            require_text: bool, casefold: bool = False) -> bool:
    """Recall validity: frame in span, record overlap, optional text match."""
    frames = [r.frame for r in records]
    if not min(frames) <= decision.chosen_frame <= max(frames):
        return False
    record = None
    for r in records:
        if r.frame == decision.chosen_frame:
            record = r
    if record is None:
        return False
    if polygon_iou(decision.chosen_quad, record.quad) < iou_threshold:
        return False
    if require_text:
        a, b = decision.final_text, record.transcript
        if casefold:
            a, b = a.casefold(), b.casefold()
        if a != b:
            return False
    return True


def max_stream_matching(decisions, gt, iou_threshold: float = 0.5,
                        require_text: bool = True, casefold: bool = False) -> int:
    """Maximum matched (decision, stream) count by exhaustive backtracking.

    Each ground-truth stream is credited at most once, each decision used
    at most once; decisions may also stay unmatched.
    """
    by_stream = {}
    for record in gt:
        by_stream.setdefault(record.id, []).append(record)
    sids = sorted(by_stream)
    valid = [
        [
            decision_recalls_stream(d, by_stream[sid], iou_threshold,
                                    require_text, casefold)
            for sid in sids
        ]
        for d in decisions
    ]

    def best(i: int, used: frozenset) -> int:
        if i == len(decisions):
            return 0
        top = best(i + 1, used)
        for j in range(len(sids)):
            if valid[i][j] and j not in used:
                top = max(top, 1 + best(i + 1, used | {j}))
        return top

    return best(0, frozenset())
