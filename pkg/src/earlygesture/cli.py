"""Command-line entry point.

Subcommands:
    generate   synthesize a corpus (train/test splits, all modalities)
    train      train a model per modality (depth first, then inflate)
    eval       compute the metrics report over the test split
    stream     frame-by-frame detection over a raw tensor file or pipe

Exit codes: 0 success, 2 configuration errors, 3 data errors, 4 numeric
failures, 1 anything else in this package's error hierarchy.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checkpoint import iter_video_frames, load_checkpoint
from .config import RunConfig, echo_config, load_config
from .corpus import CorpusReader, MODALITY_CHANNELS, prepare_eval, write_corpus
from .detector import StreamSession, TriggerConfig, fit_fusion_weights, fuse, peak_class
from .errors import ConfigError, DataError, GestureError, NumericError
from .metrics import EvalSettings, evaluate_videos, emit_report
from .model import GestureModel, inflate_checkpoint
from .train import build_model_config, train_model, write_train_log

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

ALL_MODALITIES = ("depth", "color", "flow")


def _checkpoint_path(run_dir: Path, modality: str) -> Path:
    return run_dir / f"model_{modality}.ckpt"


def cmd_generate(args) -> int:
    config = _effective_config(args)
    out_dir = Path(args.out or config.paths.corpus)
    write_corpus(out_dir, config.seed, config.generator, force=args.force)
    echo_config(config, out_dir)
    print(f"corpus written to {out_dir}")
    return 0


def _train_one(reader: CorpusReader, config: RunConfig, modality: str,
               run_dir: Path) -> Path:
    settings = config.train_settings()
    classes = reader.settings.classes
    if modality == "depth":
        model_config = build_model_config(classes, "depth", config.model.preset,
                                          config.model.variant, settings.target_frames,
                                          config.training.crop_size,
                                          conv_dropout=config.model.conv_dropout,
                                          linear_dropout=config.model.linear_dropout)
        model = GestureModel(model_config, seed=config.seed)
    else:
        depth_path = _checkpoint_path(run_dir, "depth")
        if not depth_path.exists():
            _train_one(reader, config, "depth", run_dir)
        inflated = inflate_checkpoint(load_checkpoint(depth_path),
                                      MODALITY_CHANNELS[modality])
        model = GestureModel.from_checkpoint(inflated)
    print(f"training {modality} ({model.config.variant}, "
          f"{settings.epochs} epochs, seed {settings.seed})")
    optimizer, logs = train_model(reader, modality, model, settings)
    out_path = _checkpoint_path(run_dir, modality)
    model.save(out_path, optimizer_state=optimizer.state_dict())
    write_train_log(run_dir / f"train_log_{modality}.csv", logs)
    final = logs[-1]
    print(f"  final losses: progression {final.gpm_loss:.4f}, "
          f"class {final.class_loss:.4f}, joint {final.joint_loss:.4f}")
    return out_path


def cmd_train(args) -> int:
    config = _effective_config(args)
    reader = CorpusReader(args.corpus or config.paths.corpus)
    run_dir = Path(args.out or config.paths.checkpoints)
    run_dir.mkdir(parents=True, exist_ok=True)
    echo_config(config, run_dir)
    modalities = ALL_MODALITIES if args.modality == "all" else (args.modality,)
    for modality in modalities:
        _train_one(reader, config, modality, run_dir)
    return 0


def _predict_split(reader: CorpusReader, model: GestureModel, split: str,
                   crop_size: int, target_frames: int):
    outputs, segment_lists, labels, video_ids = [], [], [], []
    for entry in reader.entries(split):
        sample = reader.load_video(split, entry["id"], _modality_of(model))
        prepared = prepare_eval(sample, crop_size, target_frames)
        outputs.append(model.predict(prepared.frames))
        segment_lists.append(prepared.segments)
        labels.append(entry["class"])
        video_ids.append(entry["id"])
    return outputs, segment_lists, labels, video_ids


def _modality_of(model: GestureModel) -> str:
    channels = model.config.in_channels
    for modality, c in MODALITY_CHANNELS.items():
        if c == channels:
            return modality
    raise DataError(f"checkpoint channel count {channels} matches no known modality")


def cmd_eval(args) -> int:
    config = _effective_config(args)
    reader = CorpusReader(args.corpus or config.paths.corpus)
    run_dir = Path(args.checkpoints or config.paths.checkpoints)
    report_dir = Path(args.out or config.paths.reports)
    requested = ALL_MODALITIES if args.modality == "all" else (args.modality,)
    available = [m for m in requested if _checkpoint_path(run_dir, m).exists()]
    if not available:
        raise DataError(
            f"no checkpoints for {requested} under {run_dir}; train first")
    settings = EvalSettings(
        roc_grid_points=config.evaluation.roc_grid_points,
        operating_points=config.evaluation.operating_points,
        epsilon=args.epsilon if args.epsilon is not None else config.detector.epsilon,
        tau=args.tau if args.tau is not None else config.detector.tau,
        refractory=config.detector.refractory)

    reports = []
    traces = {}
    test_outputs = {}
    classes = reader.settings.classes
    for modality in available:
        model = GestureModel.load(_checkpoint_path(run_dir, modality),
                                  expect_classes=classes)
        if _modality_of(model) != modality:
            raise DataError(
                f"checkpoint {_checkpoint_path(run_dir, modality)} carries "
                f"{model.config.in_channels} channels, not the {modality} layout")
        outputs, segment_lists, labels, video_ids = _predict_split(
            reader, model, "test", config.training.crop_size,
            config.training.target_frames)
        test_outputs[modality] = (model, outputs, segment_lists, labels, video_ids)
        report = evaluate_videos(modality, outputs, segment_lists, labels, settings)
        reports.append(report)
        print(f"{modality}: accuracy {report.accuracy_peak:.3f}, "
              f"auc {report.auc:.3f}")

    if len(available) >= 2:
        train_preds = {}
        train_labels = None
        for modality in available:
            model = test_outputs[modality][0]
            outputs, _, labels, _ = _predict_split(
                reader, model, "train", config.training.crop_size,
                config.training.target_frames)
            train_preds[modality] = outputs
            train_labels = labels
        weights = fit_fusion_weights(train_preds, train_labels)
        weight_vec = [weights[m] for m in available]
        _, _, segment_lists, labels, _ = test_outputs[available[0]]
        fused_outputs = [fuse([test_outputs[m][1][v] for m in available], weight_vec)
                         for v in range(len(labels))]
        fused_report = evaluate_videos("fused", fused_outputs, segment_lists,
                                       labels, settings)
        train_acc = {}
        for modality in available:
            preds = [peak_class(out) for out in train_preds[modality]]
            train_acc[modality] = float(np.mean(
                [p == l for p, l in zip(preds, train_labels)]))
        fused_train = [fuse([train_preds[m][v] for m in available], weight_vec)
                       for v in range(len(train_labels))]
        fused_train_preds = [peak_class(out) for out in fused_train]
        fused_report.train_accuracy = float(np.mean(
            [p == l for p, l in zip(fused_train_preds, train_labels)]))
        for report in reports:
            if report.modality in train_acc:
                report.train_accuracy = train_acc[report.modality]
        reports.append(fused_report)
        print(f"fused: accuracy {fused_report.accuracy_peak:.3f} "
              f"(weights {', '.join(f'{m}={weights[m]:.2f}' for m in available)})")

    primary = available[0]
    _, outputs, segment_lists, labels, video_ids = test_outputs[primary]
    traces = {vid: (out, segs)
              for vid, out, segs in zip(video_ids, outputs, segment_lists)}
    emit_report(reports, report_dir, traces=traces)
    if len(available) >= 2:
        _append_fusion_weights(report_dir, weights)
    echo_config(config, report_dir)
    print(f"report written to {report_dir}")
    return 0


def _append_fusion_weights(report_dir: Path, weights: dict) -> None:
    with open(report_dir / "metrics_summary.csv", "a", newline="") as f:
        for modality, w in weights.items():
            f.write(f"fused,weight_{modality},{w:.17g}\n")


def cmd_stream(args) -> int:
    config = _effective_config(args)
    model = GestureModel.load(args.checkpoint)
    epsilon = args.epsilon if args.epsilon is not None else config.detector.epsilon
    session = StreamSession(model, TriggerConfig(
        epsilon=epsilon, refractory=config.detector.refractory))
    crop = model.config.frame_size
    sink = open(args.out, "w") if args.out else sys.stdout
    try:
        emitted = 0
        for frame in iter_video_frames(args.input):
            # Oversized sensor frames get the inference-time center crop.
            h, w = frame.shape[-2:]
            if h > crop or w > crop:
                y0, x0 = (h - crop) // 2, (w - crop) // 2
                frame = frame[:, y0:y0 + crop, x0:x0 + crop]
            for event in session.step(frame):
                _write_event(sink, event)
                emitted += 1
        for event in session.finish():
            _write_event(sink, event)
            emitted += 1
        print(f"stream done: {emitted} event(s)", file=sys.stderr)
    finally:
        if args.out:
            sink.close()
    return 0


def _write_event(sink, event) -> None:
    probs = ",".join(f"{p:.17g}" for p in event.probs)
    sink.write(f"{event.frame},{event.class_id},{event.gpm:.17g},{probs}\n")
    sink.flush()


def _effective_config(args) -> RunConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="earlygesture",
        description="Early and online gesture detection on synthetic video")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON run config file")
        p.add_argument("--seed", type=int, default=None, help="override the run seed")
        p.add_argument("--out", default=None, help="output directory")

    p_gen = sub.add_parser("generate", help="synthesize the gesture corpus")
    common(p_gen)
    p_gen.add_argument("--force", action="store_true",
                       help="overwrite an existing corpus")
    p_gen.set_defaults(func=cmd_generate)

    p_train = sub.add_parser("train", help="train model checkpoint(s)")
    common(p_train)
    p_train.add_argument("--corpus", default=None, help="corpus directory")
    p_train.add_argument("--modality", default="depth",
                         choices=["depth", "color", "flow", "all"])
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate checkpoints on the test split")
    common(p_eval)
    p_eval.add_argument("--corpus", default=None, help="corpus directory")
    p_eval.add_argument("--checkpoints", default=None, help="checkpoint directory")
    p_eval.add_argument("--modality", default="all",
                        choices=["depth", "color", "flow", "all"])
    p_eval.add_argument("--epsilon", type=float, default=None,
                        help="online detection threshold")
    p_eval.add_argument("--tau", type=float, default=None,
                        help="consensus ratio for classification")
    p_eval.set_defaults(func=cmd_eval)

    p_stream = sub.add_parser("stream", help="stream frames through a checkpoint")
    p_stream.add_argument("--config", default=None)
    p_stream.add_argument("--seed", type=int, default=None)
    p_stream.add_argument("--checkpoint", required=True, help="model checkpoint")
    p_stream.add_argument("--input", required=True,
                          help="raw tensor file or named pipe")
    p_stream.add_argument("--epsilon", type=float, default=None)
    p_stream.add_argument("--out", default=None, help="event file (default stdout)")
    p_stream.set_defaults(func=cmd_stream)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GestureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
