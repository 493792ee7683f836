"""Command-line entry point: ``survsound <subcommand> ...``.

Exit status is 0 on success, 1 when some evaluation cells failed and 2 on a
configuration or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("survsound")


class UsageError(Exception):
    pass


def _snrs(text: str) -> list[float]:
    from .augmentation import parse_range
    try:
        vals = parse_range(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty SNR list")
    return vals


def _json_arg(text: str) -> dict:
    try:
        v = json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc}") from exc
    if not isinstance(v, dict):
        raise argparse.ArgumentTypeError("expected a JSON object")
    return v


def _geometry(path):
    from .array_sim import ArrayGeometry
    return ArrayGeometry() if path is None else ArrayGeometry.from_file(path)


def _clips(path):
    from .audio_io import load_dataset
    clips = load_dataset(path)
    if not clips:
        raise UsageError(f"no usable clips in {path}")
    return clips


# ---------------------------------------------------------------- commands

def cmd_synth_dataset(args) -> int:
    from .audio_io import save_dataset
    from .harness.synthetic import SyntheticDatasetSpec, generate_synthetic_dataset
    spec = SyntheticDatasetSpec(clips_per_class=args.clips_per_class, seed=args.seed)
    clips = generate_synthetic_dataset(spec)
    manifest = save_dataset(clips, args.out, args.bit_depth)
    print(f"wrote {len(clips)} clips, manifest {manifest}")
    return EXIT_OK


def cmd_augment(args) -> int:
    from .audio_io import save_dataset
    from .augmentation import augment_dataset
    clips = _clips(args.dataset)
    out = augment_dataset(clips, args.snrs, args.seed)
    manifest = save_dataset(out, args.out, args.bit_depth)
    print(f"wrote {len(out)} clips ({len(out) - len(clips)} noisy copies), manifest {manifest}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .array_sim import save_recording, sweep_simulations
    clips = _clips(args.dataset)
    out = Path(args.out)
    n = 0
    for rec in sweep_simulations(clips, _geometry(args.geometry), args.snrs, args.seed,
                                 args.delay_mode, args.redraw_doa):
        save_recording(rec, out / f"{rec.source_id}_snr{rec.snr_db:+g}.wav")
        n += 1
    print(f"wrote {n} recordings to {out}")
    return EXIT_OK


def cmd_beamform(args) -> int:
    from .array_sim import load_recording
    from .audio_io import write_wav
    from .beamforming import LmsConfig, beamform
    geometry = _geometry(args.geometry)
    lms = LmsConfig(taps=args.taps, step_size=args.step_size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in args.recordings:
        rec = load_recording(path)
        max_lag = geometry.max_delay_samples(rec.sample_rate) + 1.0
        clip = beamform(rec, args.mode, args.tdoa, max_lag, lms, args.delay_mode)
        peak = float(np.max(np.abs(clip.samples))) if len(clip) else 0.0
        if peak > 0.999:
            clip = clip.with_samples(clip.samples * (0.999 / peak))
        write_wav(clip, out / f"{Path(path).stem}_{args.mode}.wav")
    print(f"beamformed {len(args.recordings)} recording(s) into {out}")
    return EXIT_OK


def cmd_featurize(args) -> int:
    from .features import clip_features, layout_table
    if args.layout:
        print(layout_table())
        return EXIT_OK
    if args.input is None or args.out is None:
        raise UsageError("featurize needs INPUT and --out (or --layout)")
    from .audio_io import read_wav
    src = Path(args.input)
    if src.is_dir() or src.suffix == ".csv":
        clips = _clips(src)
    else:
        clips = [read_wav(src)]
    X, y, groups, starts = [], [], [], []
    for c in clips:
        f, s = clip_features(c, args.window_ms, args.overlap)
        X.append(f)
        starts.append(s)
        y.append(np.full(f.shape[0], -1 if c.label is None else int(c.label)))
        groups.append(np.full(f.shape[0], c.source_id))
    np.savez(args.out, X=np.concatenate(X), y=np.concatenate(y), groups=np.concatenate(groups),
             starts=np.concatenate(starts))
    print(f"{sum(len(x) for x in X)} windows from {len(clips)} clip(s) -> {args.out}")
    return EXIT_OK


def _train_set(args):
    from .audio_io import load_dataset
    from .harness.experiment import ArtifactCache, training_dataset
    clips = _clips(args.dataset)
    if args.augmented:
        known = {c.source_id for c in clips}
        clips = clips + [c for c in load_dataset(args.augmented) if c.source_id not in known]
    return training_dataset(clips, ArtifactCache())


def cmd_gridsearch(args) -> int:
    from .classifiers import DEFAULT_GRIDS, BootstrapConfig, gridsearch
    data = _train_set(args)
    grid = args.grid if args.grid is not None else DEFAULT_GRIDS[args.kind]
    res = gridsearch(args.kind, grid, data, BootstrapConfig(args.repetitions, seed=args.seed),
                     by_parent=bool(args.augmented), seed=args.seed)
    table = [{"params": c.params, "mean": c.mean, "std": c.std, "error": c.error} for c in res.table]
    for row in table:
        status = row["error"] or f"{row['mean']:.4f} ± {row['std']:.4f}"
        print(f"{json.dumps(row['params'], sort_keys=True)}  {status}")
    if res.best_params is None:
        print("every candidate failed", file=sys.stderr)
        return EXIT_PARTIAL
    print(f"best: {json.dumps(res.best_params, sort_keys=True)}  {res.best_score:.4f}")
    if args.out:
        Path(args.out).write_text(json.dumps({"kind": args.kind, "best_params": res.best_params,
                                              "best_score": res.best_score, "table": table},
                                             indent=1))
    return EXIT_OK if not any(r["error"] for r in table) else EXIT_PARTIAL


def cmd_train(args) -> int:
    from .classifiers import fit
    model = fit(args.kind, args.params, _train_set(args), args.seed)
    model.save(args.out)
    print(f"trained {args.kind} {json.dumps(model.hyperparams, sort_keys=True)} -> {args.out}")
    return EXIT_OK


def _plan(args):
    from .harness.experiment import ExperimentPlan
    plan = ExperimentPlan.from_file(args.config)
    if getattr(args, "cache_dir", None):
        plan.cache_dir = args.cache_dir
    if getattr(args, "workers", None):
        plan.workers = args.workers
        plan.validate()
    return plan


def cmd_evaluate(args) -> int:
    from .harness.experiment import ArtifactCache, exit_status, run_experiment
    from .harness.report import emit_report
    plan = _plan(args)
    out = args.out or plan.output_dir
    if out is None:
        raise UsageError("no output directory: pass --out or set output_dir in the plan")
    report = run_experiment(plan, ArtifactCache(plan.cache_dir))
    report.meta["plan"] = plan.to_dict()
    for p in emit_report(report, out):
        log.info("wrote %s", p)
    print(f"{len(report.rows)} rows, {len(report.failures)} failure(s) -> {out}")
    return exit_status(report)


def cmd_bench_time(args) -> int:
    from .harness.experiment import ArtifactCache, EvaluationReport
    from .harness.report import emit_report
    from .harness.timing import measure_timing
    plan = _plan(args)
    rows, ratios = measure_timing(plan, ArtifactCache(plan.cache_dir), args.runs, args.warmup,
                                  max_clips=args.max_clips)
    for r in rows:
        print(f"{r.stage:<34s} {r.mean_ms:10.4f} ± {r.std_ms:.4f} ms  (n={r.n_samples})")
    for k, v in ratios.items():
        print(f"{k:<34s} {v:10.3f}")
    if args.out:
        emit_report(EvaluationReport(timing=rows, ratios=ratios), args.out, plots=False)
    return EXIT_OK


def cmd_report(args) -> int:
    from .harness.report import emit_report, load_report
    try:
        report = load_report(args.report)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"cannot read report {args.report}: {exc}") from exc
    for p in emit_report(report, args.out, tuple(args.format), plots=not args.no_plots):
        print(p)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    from .classifiers import KINDS
    p = argparse.ArgumentParser(prog="survsound", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-dataset", help="write the synthetic four-class dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--clips-per-class", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--bit-depth", type=int, default=16, choices=(16, 24, 32))
    s.set_defaults(func=cmd_synth_dataset)

    s = sub.add_parser("augment", help="add white-noise copies of every clip")
    s.add_argument("dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--snrs", type=_snrs, default="-10:30:5", help="lo:hi:step or a comma list")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--bit-depth", type=int, default=16, choices=(16, 24, 32))
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("simulate", help="simulate 4-mic captures over an SNR sweep")
    s.add_argument("dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--snrs", type=_snrs, default="-10:30:1")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--geometry", help="YAML/JSON file with mic_positions")
    s.add_argument("--delay-mode", choices=("sinc", "nearest"), default="sinc")
    s.add_argument("--redraw-doa", action="store_true", help="new direction per SNR")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("beamform", help="beamform simulated recordings to mono WAVs")
    s.add_argument("recordings", nargs="+")
    s.add_argument("--mode", choices=("none", "das", "gsc"), default="das")
    s.add_argument("--tdoa", choices=("xcorr", "gcc-phat", "oracle"), default="xcorr")
    s.add_argument("--out", required=True)
    s.add_argument("--geometry")
    s.add_argument("--delay-mode", choices=("sinc", "nearest"), default="sinc")
    s.add_argument("--taps", type=int, default=16)
    s.add_argument("--step-size", type=float, default=0.01)
    s.set_defaults(func=cmd_beamform)

    s = sub.add_parser("featurize", help="extract 126-dim window features")
    s.add_argument("input", nargs="?", help="WAV file, dataset directory or manifest")
    s.add_argument("--out", help="output .npz")
    s.add_argument("--layout", action="store_true", help="print the feature layout and exit")
    s.add_argument("--window-ms", type=float, default=200.0)
    s.add_argument("--overlap", type=float, default=0.5)
    s.set_defaults(func=cmd_featurize)

    for name, func, helptext in (("gridsearch", cmd_gridsearch, "bootstrap hyperparameter search"),
                                 ("train", cmd_train, "fit one classifier and save it as JSON")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--dataset", required=True)
        s.add_argument("--augmented", help="augmented dataset (copies named <id>__...)")
        s.add_argument("--kind", choices=KINDS, required=True)
        s.add_argument("--seed", type=int, default=0)
        s.set_defaults(func=func)
        if name == "gridsearch":
            s.add_argument("--grid", type=_json_arg, help="JSON object of candidate lists")
            s.add_argument("--repetitions", type=int, default=10)
            s.add_argument("--out", help="write the score table as JSON")
        else:
            s.add_argument("--params", type=_json_arg, default={})
            s.add_argument("--out", required=True)

    s = sub.add_parser("evaluate", help="run a YAML experiment plan")
    s.add_argument("config")
    s.add_argument("--out")
    s.add_argument("--cache-dir", help="overrides the plan and $SURVSOUND_CACHE_DIR")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("bench-time", help="time beamformers, features and classifiers")
    s.add_argument("config")
    s.add_argument("--runs", type=int, default=30)
    s.add_argument("--warmup", type=int, default=3)
    s.add_argument("--max-clips", type=int)
    s.add_argument("--out")
    s.add_argument("--cache-dir")
    s.set_defaults(func=cmd_bench_time)

    s = sub.add_parser("report", help="re-emit a saved report.json")
    s.add_argument("report")
    s.add_argument("--out", required=True)
    s.add_argument("--format", nargs="+", choices=("csv", "json", "markdown"),
                   default=["csv", "json", "markdown"])
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    from .harness.experiment import PlanError
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PlanError, UsageError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
