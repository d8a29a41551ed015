"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or invalid
files, inconsistent video ids, training divergence).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from . import io as sio
from .assignment import hungarian_match
from .baselines import BaselineMode, BaselineSpec, baseline_for_dataset, compute_dataset_stats
from .fixtures import crossing_example, worked_example
from .legacy import OverlapMetrics, aggregate_overlap, mean_iou, threshold_precision_recall
from .ordered import aggregate, dp_fill, ordered_match, render_grid, soda_from_cost, traceback
from .segments import AnnotationError, VideoAnnotation, build_cost_matrix, normalize_predictions
from .soft import DEFAULT_GAMMA, soft_backward, soft_forward
from .synth import SynthConfig, derive_seed, generate_gt, generate_predictions, parse_config
from .trainer import MATCHERS, TrainConfig, TrainingDiverged, crossing_init, train_instance, uniform_init

log = logging.getLogger("sodaseg")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
DEFAULT_TAUS = (0.3, 0.5, 0.7)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _tau(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"tau must lie in (0, 1), got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _load(path, ground_truth: bool) -> list[VideoAnnotation]:
    try:
        return sio.load_annotations(path, ground_truth=ground_truth)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except AnnotationError as exc:
        raise DataError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- eval


def _tau_key(name: str, tau: float) -> str:
    return f"{name}@{tau:g}"


def evaluate_video(gt: VideoAnnotation, pred: VideoAnnotation, families, taus, top_n, gamma):
    """Raw ([0, 1]) metrics for one video plus objects needed for aggregation."""
    pred = normalize_predictions(pred, top_n)
    cost = build_cost_matrix(gt, pred)
    row: dict[str, float] = {}
    extra = {}
    if "legacy" in families:
        for tau in taus:
            tm = threshold_precision_recall(cost, tau)
            row[_tau_key("precision", tau)] = tm.precision
            row[_tau_key("recall", tau)] = tm.recall
            row[_tau_key("f1", tau)] = tm.f1
        miou = mean_iou(cost)
        row["miou"] = miou
        row["mjaccard"] = miou
        extra["overlap"] = OverlapMetrics(miou, miou)
    if "soda" in families:
        sm = soda_from_cost(cost)
        row["soda-precision"] = sm.precision
        row["soda-recall"] = sm.recall
        row["soda-f1"] = sm.f1
        row["soda-miou"] = sm.matched_miou
        extra["soda"] = sm
        if gamma is not None:
            row["soft-soda-miou"] = soft_forward(cost, gamma) / len(gt) if cost.shape[1] else 0.0
    return row, extra


def run_eval(
    gts: Sequence[VideoAnnotation],
    preds: Sequence[VideoAnnotation],
    metrics: str = "all",
    taus: Sequence[float] = DEFAULT_TAUS,
    top_n: Optional[int] = None,
    gamma: Optional[float] = None,
    micro: bool = False,
    workers: int = 1,
) -> dict:
    """Evaluate predictions against ground truth; report on the 0-100 scale."""
    families = {"legacy", "soda"} if metrics == "all" else {metrics}
    gt_by_id = {v.video_id: v for v in gts}
    pred_by_id = {v.video_id: v for v in preds}
    unknown = sorted(set(pred_by_id) - set(gt_by_id))
    if unknown:
        raise DataError(f"predictions for videos missing from ground truth: {', '.join(unknown)}")
    if not gts:
        raise DataError("ground truth contains no videos")
    ids = sorted(gt_by_id)
    missing = [i for i in ids if i not in pred_by_id]
    if missing:
        log.warning("no predictions for %d video(s); scoring them as empty: %s", len(missing), ", ".join(missing))
    empty = [i for i in ids if i in pred_by_id and len(pred_by_id[i]) == 0]
    if empty:
        log.warning("empty prediction list for %d video(s)", len(empty))
    for i in ids:
        if len(gt_by_id[i]) == 0:
            raise DataError(f"video {i!r}: no reference segments")

    def job(vid):
        gt = gt_by_id[vid]
        pred = pred_by_id.get(vid) or VideoAnnotation(vid, gt.duration, (), ground_truth=False)
        return evaluate_video(gt, pred, families, taus, top_n, gamma)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(job, ids))

    per_video = []
    for vid, (row, _) in zip(ids, results):
        per_video.append({"id": vid, **{k: sio.to_percent(v) for k, v in row.items()}})

    agg: dict[str, float] = {}
    keys = list(results[0][0].keys())
    for key in keys:
        agg[key] = float(np.mean([r[key] for r, _ in results]))
    if "legacy" in families:
        ov = aggregate_overlap([e["overlap"] for _, e in results], [len(gt_by_id[v]) for v in ids])
        agg["miou"], agg["mjaccard"] = ov.miou, ov.mjaccard
    if "soda" in families:
        sm = aggregate([e["soda"] for _, e in results], micro=micro)
        agg["soda-precision"], agg["soda-recall"] = sm.precision, sm.recall
        agg["soda-f1"], agg["soda-miou"] = sm.f1, sm.matched_miou
    return {"per_video": per_video, "aggregate": {k: sio.to_percent(v) for k, v in agg.items()}}


def format_table(report: dict) -> str:
    keys = list(report["aggregate"].keys())
    rows = [[r["id"]] + [f"{r[k]:.2f}" for k in keys] for r in report["per_video"]]
    rows.append(["(aggregate)"] + [f"{report['aggregate'][k]:.2f}" for k in keys])
    header = ["video"] + keys
    widths = [max(len(str(x[c])) for x in rows + [header]) for c in range(len(header))]
    lines = ["  ".join(str(h).ljust(w) if c == 0 else str(h).rjust(w) for c, (h, w) in enumerate(zip(header, widths)))]
    for r in rows:
        lines.append("  ".join(str(x).ljust(w) if c == 0 else str(x).rjust(w) for c, (x, w) in enumerate(zip(r, widths))))
    return "\n".join(lines)


def cmd_eval(args) -> int:
    if args.gt == args.pred:
        raise UsageError("--gt and --pred must be different files")
    gts = _load(args.gt, ground_truth=True)
    preds = _load(args.pred, ground_truth=False)
    report = run_eval(
        gts,
        preds,
        metrics=args.metrics,
        taus=args.tau or DEFAULT_TAUS,
        top_n=args.top_n,
        gamma=args.gamma,
        micro=args.micro,
        workers=args.workers,
    )
    if args.out:
        sio.save_report(args.out, report)
    if args.format == "json":
        print(json.dumps(report, indent=2))
    else:
        print(format_table(report))
    return EXIT_OK


# ---------------------------------------------------------------- match


def _pick_video(gts, preds, video_id):
    gt_by_id = {v.video_id: v for v in gts}
    pred_by_id = {v.video_id: v for v in preds}
    if video_id is None:
        if len(gts) != 1:
            raise UsageError("--video is required when the ground-truth file holds several videos")
        video_id = gts[0].video_id
    if video_id not in gt_by_id:
        raise DataError(f"video {video_id!r} not found in ground truth")
    gt = gt_by_id[video_id]
    pred = pred_by_id.get(video_id) or VideoAnnotation(video_id, gt.duration, (), ground_truth=False)
    return gt, pred


def _pairs_text(pairs) -> str:
    if not pairs:
        return "(none)"
    return ", ".join(f"(g{i + 1}, p{j + 1}, {v:.2f})" for i, j, v in pairs)


def describe_match(gt: VideoAnnotation, pred: VideoAnnotation, algo: str, gamma: float, top_n=None) -> str:
    pred = normalize_predictions(pred, top_n)
    cost = build_cost_matrix(gt, pred)
    out = [f"video: {gt.video_id}  (|G|={cost.shape[0]}, |P|={cost.shape[1]})", "", "IoU cost matrix:"]
    out.append(render_grid(cost) if cost.shape[1] else "(no predictions)")
    if algo == "soda":
        table = dp_fill(cost)
        match = traceback(table, cost)
        m = cost.shape[0]
        out += ["", "DP table:", render_grid(table.scores[1:, 1:]) if cost.shape[1] else "(empty)"]
        out += ["", "traceback:", render_grid(table.moves[1:, 1:]) if cost.shape[1] else "(empty)"]
        out += ["", f"pairs: {_pairs_text(match.pairs)}", f"total: {match.total_score:.4f}"]
        out.append(f"matched mIoU: {match.total_score / m:.4f}")
    elif algo == "hungarian":
        a = hungarian_match(cost)
        out += ["", f"pairs: {_pairs_text(a.pairs)}", f"total: {a.total_score:.4f}"]
        out.append(f"temporally monotone: {'yes' if a.is_monotone else 'no'}")
    else:
        res = soft_backward(cost, gamma)
        out += ["", f"gamma: {gamma:g}", f"soft score: {res.soft_score:.4f}"]
        if cost.shape[1]:
            out += ["", "alignment:", render_grid(res.alignment), "", "d score / d IoU:", render_grid(res.grad_cost, "{:.4f}")]
    return "\n".join(out)


def cmd_match(args) -> int:
    gts = _load(args.gt, ground_truth=True)
    preds = _load(args.pred, ground_truth=False)
    gt, pred = _pick_video(gts, preds, args.video)
    print(describe_match(gt, pred, args.algo, args.gamma, args.top_n))
    return EXIT_OK


# ---------------------------------------------------------------- baseline


def cmd_baseline(args) -> int:
    train = _load(args.train, ground_truth=True)
    targets = _load(args.videos, ground_truth=True) if args.videos else train
    if not train:
        raise DataError(f"{args.train}: no videos")
    avg_count, avg_duration = compute_dataset_stats(train)
    mode = BaselineMode(args.mode)
    spec = BaselineSpec(mode, avg_count=avg_count, avg_duration=avg_duration)
    out = baseline_for_dataset(targets, spec)
    sio.save_annotations(args.out, out)
    log.info("avg_count=%d avg_duration=%.3f s; wrote %d videos", avg_count, avg_duration, len(out))
    print(f"avg_count={avg_count} avg_duration={avg_duration:.2f}s videos={len(out)}")
    return EXIT_OK


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise DataError(f"cannot read {args.config}: {exc.strerror}") from None
        try:
            config = parse_config(text)
        except ValueError as exc:
            raise DataError(f"{args.config}: {exc}") from None
    else:
        config = SynthConfig()
    try:
        gts = generate_gt(config)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    sio.save_annotations(args.out_gt, gts)
    if args.out_pred:
        sio.save_annotations(args.out_pred, generate_predictions(gts, config))
    print(f"wrote {len(gts)} videos")
    return EXIT_OK


# ---------------------------------------------------------------- train


def cmd_train(args) -> int:
    gts = _load(args.gt, ground_truth=True)
    if not gts:
        raise DataError(f"{args.gt}: no videos")
    traj = open(args.trajectory, "w", encoding="utf-8") if args.trajectory else sys.stdout
    per_video = []
    finals = []
    try:
        for idx, gt in enumerate(sorted(gts, key=lambda v: v.video_id)):
            if len(gt) == 0:
                raise DataError(f"video {gt.video_id!r}: no reference segments")
            run_seed = derive_seed(args.seed, idx)
            if args.init == "crossing":
                init = crossing_init(gt, run_seed)
            else:
                init = uniform_init(gt.duration, args.num_proposals, args.init_jitter, run_seed)
            cfg = TrainConfig(
                matcher=args.matcher,
                gamma=args.gamma,
                step_size=args.step_size,
                iterations=args.steps,
                num_proposals=len(init),
                seed=run_seed,
                init_jitter=args.init_jitter,
            )
            try:
                result = train_instance(gt, cfg, init=init)
            except TrainingDiverged as exc:
                raise DataError(f"video {gt.video_id!r}: {exc}") from None
            for point in result.trajectory:
                rec = {"id": gt.video_id, "iteration": point.iteration, "loss": point.loss, "f1": point.metrics.f1}
                traj.write(json.dumps(rec) + "\n")
            fin, ini = result.final.metrics, result.initial.metrics
            finals.append(fin)
            per_video.append(
                {
                    "id": gt.video_id,
                    "initial-soda-f1": sio.to_percent(ini.f1),
                    "soda-precision": sio.to_percent(fin.precision),
                    "soda-recall": sio.to_percent(fin.recall),
                    "soda-f1": sio.to_percent(fin.f1),
                    "final-loss": round(result.final.loss, 6),
                }
            )
    finally:
        if traj is not sys.stdout:
            traj.close()
    agg = aggregate(finals)
    report = {
        "matcher": args.matcher,
        "per_video": per_video,
        "aggregate": {
            "initial-soda-f1": round(float(np.mean([r["initial-soda-f1"] for r in per_video])), 2),
            "soda-precision": sio.to_percent(agg.precision),
            "soda-recall": sio.to_percent(agg.recall),
            "soda-f1": sio.to_percent(agg.f1),
        },
    }
    if args.report:
        sio.save_report(args.report, report)
    return EXIT_OK


# ---------------------------------------------------------------- paper-demo


def paper_demo(gamma: Optional[float] = None) -> str:
    """Text walk-through of the worked example and the crossing example."""
    gt, pred = worked_example()
    cost = build_cost_matrix(gt, pred)
    table = dp_fill(cost)
    match = traceback(table, cost)
    tm = threshold_precision_recall(cost, 0.3)
    miou = mean_iou(cost)
    soda = soda_from_cost(cost)
    m = cost.shape[0]
    out = ["Worked example: 3 ground-truth segments, 4 proposals", ""]
    out += [f"  g{i + 1} = [{s.start:g}, {s.end:g}]" for i, s in enumerate(gt.segments)]
    out += [f"  p{j + 1} = [{s.start:g}, {s.end:g}]" for j, s in enumerate(pred.segments)]
    out += ["", "IoU cost matrix:", render_grid(cost)]
    out += ["", "Filled DP table:", render_grid(table.scores[1:, 1:])]
    out += ["", "Traceback (L = left, T = top, D = diagonal):", render_grid(table.moves[1:, 1:])]
    out += [
        "",
        "Threshold metrics (tau = 0.3):",
        f"  precision = {tm.precision:.2f}   recall = {tm.recall:.2f}",
        f"mIoU (best proposal per ground truth) = {miou:.2f}",
        "",
        f"Ordered matches: {_pairs_text(match.pairs)}",
        f"SODA-D: matched mIoU = {soda.matched_miou:.2f}   precision = {soda.precision:.4f}"
        f"   recall = {soda.recall:.2f}   F1 = {soda.f1:.4f}",
        "",
        f"mIoU reports {miou:.2f} = ({' + '.join(f'{v:.2f}' for v in cost.max(axis=1))})/{m} because p2 is "
        f"counted for both g1 and g2; one-to-one ordered matching gives {soda.matched_miou:.2f} = "
        f"({' + '.join(f'{v:.2f}' for _, _, v in match.pairs)})/{m}.",
    ]
    if gamma is not None:
        out += ["", f"Soft ordered matching, gamma = {gamma:g}: soft score = {soft_forward(cost, gamma):.4f}"
                f" (hard score {match.total_score:.2f})"]

    cgt, cpred = crossing_example()
    ccost = build_cost_matrix(cgt, cpred)
    hung = hungarian_match(ccost)
    ordm = ordered_match(ccost)
    swapped = ccost[:, [0, 2, 1]]
    out += ["", "Crossing example: 2 ground-truth segments, 3 proposals", ""]
    out += [f"  g{i + 1} = [{s.start:g}, {s.end:g}]" for i, s in enumerate(cgt.segments)]
    out += [f"  p{j + 1} = [{s.start:g}, {s.end:g}]" for j, s in enumerate(cpred.segments)]
    out += ["", "IoU cost matrix:", render_grid(ccost)]
    out += [
        "",
        f"Hungarian: {_pairs_text(hung.pairs)}  total {hung.total_score:.2f}"
        f"  ({'monotone' if hung.is_monotone else 'temporally crossed'})",
        f"Ordered:   {_pairs_text(ordm.pairs)}  total {ordm.total_score:.2f}",
        f"Ordered with p2 and p3 swapped in sequence: total {ordered_match(swapped).total_score:.2f}",
    ]
    return "\n".join(out) + "\n"


def cmd_paper_demo(args) -> int:
    sys.stdout.write(paper_demo(args.gamma))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sodaseg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--metrics", choices=("legacy", "soda", "all"), default="all")
    p.add_argument("--tau", type=_tau, nargs="+", help="IoU thresholds (default 0.3 0.5 0.7)")
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--gamma", type=_positive_float, default=None, help="also report the soft matched mIoU")
    p.add_argument("--micro", action="store_true", help="pool SODA-D over segments instead of averaging videos")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--out", help="write the structured report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("match", help="dump the matching for one video")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--video")
    p.add_argument("--algo", choices=("soda", "hungarian", "soft-soda"), default="soda")
    p.add_argument("--gamma", type=_positive_float, default=DEFAULT_GAMMA)
    p.add_argument("--top-n", type=int, default=None)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("baseline", help="uniform baseline segmentations")
    p.add_argument("--mode", choices=[m.value for m in BaselineMode], required=True)
    p.add_argument("--train", required=True, help="annotation file used for the statistics")
    p.add_argument("--videos", help="videos to segment (default: the training videos)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--config")
    p.add_argument("--out-gt", required=True)
    p.add_argument("--out-pred")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="toy boundary refinement")
    p.add_argument("--gt", required=True)
    p.add_argument("--matcher", choices=MATCHERS, default=MATCHERS[0])
    p.add_argument("--gamma", type=_positive_float, default=DEFAULT_GAMMA)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--step-size", type=_positive_float, default=0.05)
    p.add_argument("--num-proposals", type=int, default=8)
    p.add_argument("--init", choices=("uniform", "crossing"), default="uniform")
    p.add_argument("--init-jitter", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report")
    p.add_argument("--trajectory", help="write JSON-lines trajectory here instead of stdout")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("paper-demo", help="print the worked matching example")
    p.add_argument("--gamma", type=_positive_float, default=None)
    p.set_defaults(func=cmd_paper_demo)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sodaseg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"sodaseg: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
