"""Command-line entry points: detect, spot, eval, sim.

Outputs are written atomically and are byte-identical across repeated runs
and across worker-thread settings (VTSPOT_THREADS caps detection
parallelism; result order never depends on it). Exit codes: 0 success,
2 missing input (the offending path is printed), 3 malformed file or
configuration.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .config import RunConfig, load_config, load_spec, load_transform_params
from .detector import AggregationWindow, TransformParams, aggregate, extract_quads
from .errors import ConfigError, ContractError, FeasibilityError, FormatError
from .formats import (
    load_annotations,
    load_decisions,
    load_detections,
    load_manifest,
    load_streams,
    save_decisions,
    save_detections,
    save_manifest,
    save_streams,
    atomic_write_text,
)
from .metrics import evaluate, speedup_ratio
from .providers import zero_flow
from .recommender import SelectionPolicy, decide, score_streams
from .simulate import generate, load_scenario, save_scenario
from .tracker import track

THREADS_ENV = "VTSPOT_THREADS"


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _resolve(cfg: RunConfig, flag_value, key: str, required: bool = True):
    value = flag_value or cfg.paths.get(key)
    if required and not value:
        raise FileNotFoundError(f"no {key} path given (flag or config paths.{key})")
    return value


def _load_cfg(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "policy", None):
        cfg.policy = args.policy
    if getattr(args, "window_n", None) is not None:
        if args.window_n < 0:
            raise ConfigError(f"--window-n must be >= 0, got {args.window_n}")
        cfg.window_n = args.window_n
    return cfg


def _detect_frame(scenario, transform, cfg: RunConfig, t: int):
    lo, hi = scenario.frame_range()
    n = cfg.window_n
    features = []
    confidences = []
    flows = []
    for i in range(-n, n + 1):
        src = min(max(t + i, lo), hi)
        features.append(scenario.features[src])
        confidences.append(scenario.confidences[src])
        if src == t:
            grid = scenario.features[t]
            flows.append(zero_flow(grid.height, grid.width))
        else:
            flows.append(scenario.flows[(src, t)])
    window = AggregationWindow(
        n=n, reference=t, features=features, confidences=confidences,
        flows=flows, transform=transform,
    )
    refined = aggregate(window, mask_threshold=cfg.mask_threshold)
    return extract_quads(refined, scenario.geometry[t], cfg.conf_threshold,
                         nms_threshold=cfg.nms_threshold)


def cmd_detect(cfg: RunConfig, scenario_dir, out_path) -> int:
    scenario = load_scenario(scenario_dir)
    if not scenario.rendered:
        raise FileNotFoundError(f"scenario has no rendered frames: {os.path.join(scenario_dir, 'frames')}")
    transform_path = cfg.paths.get("transform")
    if transform_path:
        transform = load_transform_params(transform_path)
    else:
        transform = TransformParams.identity(scenario.render_meta["feature_channels"])
    lo, hi = scenario.frame_range()
    frames = list(range(lo, hi + 1))
    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: _detect_frame(scenario, transform, cfg, t), frames))
    else:
        results = [_detect_frame(scenario, transform, cfg, t) for t in frames]
    detections = {}
    for t, quads in zip(frames, results):
        detections[t] = quads
        print(f"frame {t}: {len(quads)} regions")
    save_detections(out_path, detections)
    return 0


def cmd_spot(cfg: RunConfig, scenario_dir, out_dir) -> int:
    scenario = load_scenario(scenario_dir)
    streams = track(scenario.observations, cfg.tracker)
    student = score_streams(
        streams,
        scenario.gt,
        t_max=cfg.t_max,
        k_clusters=cfg.k_clusters,
        ridge_lambda=cfg.ridge_lambda,
        iou_threshold=cfg.matching.iou_threshold,
    )
    policy = SelectionPolicy(cfg.policy.upper())
    decisions = decide(streams, policy, student)
    os.makedirs(out_dir, exist_ok=True)
    save_streams(os.path.join(out_dir, "streams.tsv"), streams)
    save_decisions(os.path.join(out_dir, "decisions.tsv"), decisions)
    regions_total = sum(len(s.observations) for s in streams)
    counts = {
        "policy": cfg.policy,
        "n_streams": len(streams),
        "recognitions_consumed": len(decisions),
        "regions_total": regions_total,
    }
    counts["speedup_ratio"] = speedup_ratio(counts) if decisions else 0.0
    save_manifest(os.path.join(out_dir, "manifest.json"), counts)
    print(
        f"{len(streams)} streams, {regions_total} regions, "
        f"{len(decisions)} recognitions consumed"
    )
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    if args.scenario:
        gt_path = os.path.join(args.scenario, "gt.tsv")
    else:
        gt_path = _resolve(cfg, args.gt, "gt")
    gt = load_annotations(gt_path)
    streams = load_streams(_resolve(cfg, args.streams, "streams"))
    decisions = load_decisions(_resolve(cfg, args.decisions, "decisions"))
    counts = load_manifest(_resolve(cfg, args.manifest, "manifest"))
    detections_path = args.detections or cfg.paths.get("detections")
    detections = load_detections(detections_path) if detections_path else None
    report = evaluate(gt, streams, decisions, counts, detections=detections,
                      cfg=cfg.matching)
    lines = report.to_lines()
    for line in lines:
        print(line)
    if args.out:
        atomic_write_text(args.out, "".join(line + "\n" for line in lines))
    return 0


def cmd_sim(args) -> int:
    spec = load_spec(args.spec)
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    scenario = generate(spec)
    save_scenario(scenario, args.out)
    print(
        f"{len(scenario.transcripts)} streams, {len(scenario.observations)} observations, "
        f"frames {scenario.frame_range()[0]}..{scenario.frame_range()[1]}"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vtspot",
        description="Video text spotting pipeline: detect, track, recognize once, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    detect = sub.add_parser("detect", help="refine confidences and emit detected quads")
    detect.add_argument("--config", help="run configuration YAML")
    detect.add_argument("--scenario", help="scenario directory with rendered frames")
    detect.add_argument("--out", help="output detections file")
    detect.add_argument("--window-n", type=int, dest="window_n", help="half-window override")

    spot = sub.add_parser("spot", help="track, score, and select one region per stream")
    spot.add_argument("--config", help="run configuration YAML")
    spot.add_argument("--scenario", help="scenario directory")
    spot.add_argument("--out", help="output directory for streams/decisions/manifest")
    spot.add_argument("--policy", choices=["tr", "pcw", "hfp"], help="selection policy override")

    ev = sub.add_parser("eval", help="score decisions and streams against ground truth")
    ev.add_argument("--config", help="run configuration YAML")
    ev.add_argument("--scenario", help="scenario directory (supplies gt.tsv)")
    ev.add_argument("--gt", help="ground-truth annotations file")
    ev.add_argument("--streams", help="streams file from spot")
    ev.add_argument("--decisions", help="decisions file from spot")
    ev.add_argument("--manifest", help="manifest file from spot")
    ev.add_argument("--detections", help="detections file from detect (optional)")
    ev.add_argument("--out", help="write the report to this file as well")

    sim = sub.add_parser("sim", help="generate a synthetic scenario directory")
    sim.add_argument("--spec", required=True, help="scenario spec YAML")
    sim.add_argument("--out", required=True, help="output scenario directory")
    sim.add_argument("--seed", type=int, help="override the spec's seed")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "detect":
            cfg = _load_cfg(args)
            scenario_dir = _resolve(cfg, args.scenario, "scenario")
            out = _resolve(cfg, args.out, "out")
            return cmd_detect(cfg, scenario_dir, out)
        if args.command == "spot":
            cfg = _load_cfg(args)
            scenario_dir = _resolve(cfg, args.scenario, "scenario")
            out = _resolve(cfg, args.out, "out")
            return cmd_spot(cfg, scenario_dir, out)
        if args.command == "eval":
            cfg = _load_cfg(args)
            return cmd_eval(cfg, args)
        return cmd_sim(args)
    except FileNotFoundError as exc:
        path = getattr(exc, "filename", None) or exc
        print(f"missing input: {path}", file=sys.stderr)
        return 2
    except (FormatError, ConfigError, ContractError, FeasibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
