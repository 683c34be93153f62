"""Command-line entry point: ``evtraj <subcommand>`` or ``python -m evtraj``.

Exit codes: 0 success, 2 bad usage, 3 missing input file, 4 malformed
input file, 5 invariant violation found by ``verify``, 6 training
diverged, 1 any other invalid request.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from evtraj import __version__
from evtraj.dataset import augment, make_splits, synthetic_corpus, synthetic_track
from evtraj.evaluation import (
    compare_strategies,
    config_hash,
    evaluate,
    rate_profile,
    summary_json,
    sweep_win,
    sweep_wout,
)
from evtraj.events import SimConfig, generate_events, random_throw, simulate_trajectory
from evtraj.formats import (
    FormatError,
    load_model,
    read_corpus,
    read_events,
    read_track,
    save_model,
    write_corpus,
    write_events,
    write_track,
)
from evtraj.sampling import FixedRate, SampledSequence, Spatial, mean_rate, subsample
from evtraj.seq2seq import Seq2SeqModel, TrainConfig, TrainingDivergedError, train
from evtraj.tracker import DEFAULT_ROI, DEFAULT_THRESHOLD, track_stream

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_FORMAT = 4
EXIT_INVARIANT = 5
EXIT_DIVERGED = 6

OUT_DIR_ENV = "EVTRAJ_OUT_DIR"

log = logging.getLogger("evtraj")


class InvariantViolation(Exception):
    pass


def _out_path(args, name: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_DIR_ENV, ".")) / name


def _write_run_manifest(output: Path, args, extra=None):
    """Record the command, its parameters and their hash next to ``output``."""
    params = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    record = {"command": args.command, "params": params, "config_hash": config_hash(params),
              "output": output.name, "version": __version__}
    if extra:
        record.update(extra)
    path = output.parent / (output.name + ".run.json")
    path.write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n")


def _strategy(args):
    if args.strategy == "spatial":
        return Spatial(args.delta_px)
    if args.strategy == "fixed":
        return FixedRate(args.period_ms)
    return None


def _train_config(args) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                       seed=args.seed, restore_best=args.restore_best)


def _load_corpus(args):
    corpus = read_corpus(args.manifest)
    if not corpus.split:
        corpus = make_splits(corpus, seed=args.seed)
    strategy = _strategy(args)
    return corpus.resample(strategy) if strategy else corpus


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args):
    sim = SimConfig(gravity=args.gravity, restitution=args.restitution, ball_radius=args.radius,
                    noise_rate=args.noise_rate, seed=args.seed)
    ss = np.random.SeedSequence(args.seed)
    throw_seed, event_seed = ss.generate_state(2)
    initial, duration = random_throw(np.random.default_rng(throw_seed), sim)
    if args.duration:
        duration = args.duration
    states = simulate_trajectory(sim, initial, duration, args.dt)
    events = generate_events(states, SimConfig(**{**vars(sim), "seed": int(event_seed)}))
    out = _out_path(args, "events.evt1" if args.format == "binary" else "events.csv")
    write_events(out, events, args.format)
    _write_run_manifest(out, args, {"n_events": int(len(events))})
    print(f"{len(events)} events -> {out}")


def cmd_track(args):
    events = read_events(args.events)
    points = track_stream(events, args.roi, args.threshold, drop_init=args.drop_init)
    out = _out_path(args, "track.trk1" if args.format == "binary" else "track.csv")
    write_track(out, points, args.format)
    _write_run_manifest(out, args, {"n_points": int(len(points))})
    print(f"{len(points)} track points -> {out}")


def cmd_sample(args):
    points = read_track(args.track)
    seq = subsample(points, _strategy(args))
    out = _out_path(args, "sampled.trk1" if args.format == "binary" else "sampled.csv")
    write_track(out, seq.points, args.format)
    extra = {"n_points": len(seq)}
    if len(seq) >= 2:
        extra["mean_rate_hz"], extra["std_rate_hz"] = mean_rate(seq)
    _write_run_manifest(out, args, extra)
    print(f"{len(seq)} samples -> {out}")


def verify_sampled(points: np.ndarray, strategy) -> list[str]:
    """Check the sampling invariants of an already sampled track."""
    problems = []
    t = points["t"]
    if np.any(np.diff(t) <= 0):
        problems.append("timestamps are not strictly increasing")
    if isinstance(strategy, Spatial):
        d = np.hypot(np.diff(points["x"]), np.diff(points["y"]))
        bad = np.nonzero(d < strategy.delta_px)[0]
        if len(bad):
            problems.append(f"{len(bad)} consecutive pairs closer than {strategy.delta_px} px (first at {bad[0]})")
    elif isinstance(strategy, FixedRate):
        gaps = np.diff(t) / 1000.0
        bad = np.nonzero(gaps < strategy.period_ms)[0]
        if len(bad):
            problems.append(f"{len(bad)} gaps shorter than {strategy.period_ms} ms (first at {bad[0]})")
    return problems


def cmd_verify(args):
    points = read_track(args.track)
    problems = verify_sampled(points, _strategy(args))
    if problems:
        for p in problems:
            print(f"FAIL: {p}")
        raise InvariantViolation("; ".join(problems))
    print(f"OK: {len(points)} points satisfy {args.strategy} invariants")


def cmd_profile(args):
    seq = SampledSequence(read_track(args.track), _strategy(args))
    times, rates = rate_profile(seq, args.window_ms)
    out = _out_path(args, "rate_profile.csv")
    lines = ["t_us,rate_hz"] + [f"{int(t)},{r!r}" for t, r in zip(times.tolist(), rates.tolist())]
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    _write_run_manifest(out, args)
    print(f"{len(rates)} profile points -> {out}")


def cmd_dataset(args):
    if args.action == "build":
        corpus = synthetic_corpus(args.count, args.seed)
    else:
        tracks = [read_track(p) for p in args.tracks]
        corpus = augment([SampledSequence(t, None) for t in tracks],
                         provenance={"kind": "imported", "files": [str(p) for p in args.tracks]})
        corpus = make_splits(corpus, seed=args.seed)
    out_dir = Path(args.out) if args.out else Path(os.environ.get(OUT_DIR_ENV, ".")) / "corpus"
    manifest = write_corpus(out_dir, corpus, args.format)
    _write_run_manifest(manifest, args, {"n_trajectories": len(corpus)})
    print(f"{len(corpus)} trajectories -> {manifest}")


def cmd_train(args):
    corpus = _load_corpus(args)
    config = _train_config(args)
    tr = corpus.windows("train", args.w_in, args.w_out, args.stride)
    va = corpus.windows("validation", args.w_in, args.w_out)
    model = Seq2SeqModel.create(hidden_size=args.hidden, seed=args.seed)
    model, curve = train(model, tr, va, config, progress=True)
    out = _out_path(args, "model.s2s")
    save_model(out, model, config, {"w_in": args.w_in, "w_out": args.w_out,
                                    "strategy": str(_strategy(args)),
                                    "train_loss": curve.train_loss, "val_loss": curve.val_loss,
                                    "val_spatial_rmse": curve.val_spatial_rmse})
    _write_run_manifest(out, args)
    print(f"trained {len(tr)} windows, final val loss {curve.val_loss[-1]:.6g} -> {out}")


def cmd_eval(args):
    corpus = _load_corpus(args)
    model, sidecar = load_model(args.model)
    w_in = args.w_in or sidecar.get("w_in")
    w_out = args.w_out or sidecar.get("w_out")
    if not (w_in and w_out):
        raise ValueError("w_in/w_out not given and not recorded in the model sidecar")
    te = corpus.windows(args.split, w_in, w_out)
    err = evaluate(model, te)
    out = _out_path(args, "eval.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("split,w_in,w_out,spatial_rmse_px,temporal_rmse_ms,n_windows\n"
                   f"{args.split},{w_in},{w_out},{err.spatial_rmse!r},{err.temporal_rmse!r},{len(te)}\n")
    _write_run_manifest(out, args)
    print(f"spatial RMSE {err.spatial_rmse:.3f} px, temporal RMSE {err.temporal_rmse:.3f} ms -> {out}")


def _parse_values(text, cast=float):
    return [cast(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args):
    config = _train_config(args)
    if args.manifest:
        raw = read_corpus(args.manifest)
        if not raw.split:
            raw = make_splits(raw, seed=args.seed)
    else:
        raw = synthetic_corpus(args.count, args.seed)
    out = _out_path(args, f"sweep_{args.axis}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.axis == "wout":
        values = _parse_values(args.values or "5,15,25,35,45", int)
        results = [sweep_wout(raw.resample(Spatial(args.delta_px)), args.w_in, values, config, stride=args.stride)]
    elif args.axis == "win":
        values = _parse_values(args.values or "5,10,20,40", int)
        results = [sweep_win(raw.resample(Spatial(args.delta_px)), args.w_out, values, config, stride=args.stride)]
    else:
        values = _parse_values(args.values or "2,4,6")
        results = list(compare_strategies(raw, values, args.seed, config, stride=args.stride))
    out.write_text("".join(r.to_csv() if k == 0 else r.to_csv().split("\n", 1)[1]
                           for k, r in enumerate(results)))
    summary = out.with_suffix(".json")
    params = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    summary.write_text(summary_json(results, params) + "\n")
    _write_run_manifest(out, args)
    print(f"sweep {args.axis} -> {out}")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_strategy(p, required=True):
    p.add_argument("--strategy", choices=["fixed", "spatial"] if required else ["fixed", "spatial", "raw"],
                   default=None if required else "raw", required=required)
    p.add_argument("--delta-px", type=float, default=2.0, help="spatial sampling distance D")
    p.add_argument("--period-ms", type=float, default=10.0, help="fixed-rate sampling period F")


def _add_training(p):
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--stride", type=int, default=1, help="training window stride")
    p.add_argument("--restore-best", action="store_true",
                   help="keep the epoch with the lowest validation loss")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evtraj", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=0, help="global seed for every random choice")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one bouncing-ball throw as an event stream")
    p.add_argument("--gravity", type=float, default=SimConfig.gravity)
    p.add_argument("--restitution", type=float, default=SimConfig.restitution)
    p.add_argument("--radius", type=float, default=SimConfig.ball_radius)
    p.add_argument("--noise-rate", type=float, default=0.0)
    p.add_argument("--duration", type=float, default=None, help="seconds (default: until the ball leaves)")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--format", choices=["csv", "binary"], default="binary")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="run the ROI tracker over an event file")
    p.add_argument("--events", required=True)
    p.add_argument("--roi", type=float, default=DEFAULT_ROI)
    p.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD)
    p.add_argument("--drop-init", action="store_true", help="discard the acquisition point")
    p.add_argument("--format", choices=["csv", "binary"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("sample", help="sub-sample a track")
    p.add_argument("--track", required=True)
    _add_strategy(p)
    p.add_argument("--format", choices=["csv", "binary"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify", help="check the sampling invariants of a sampled track")
    p.add_argument("--track", required=True)
    _add_strategy(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("profile", help="sliding-window sample-rate profile of a track")
    p.add_argument("--track", required=True)
    p.add_argument("--window-ms", type=float, default=100.0)
    _add_strategy(p, required=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("dataset", help="build or import a trajectory corpus")
    p.add_argument("action", choices=["build", "import"])
    p.add_argument("--count", type=int, default=250)
    p.add_argument("--tracks", nargs="*", default=[], help="track files for import")
    p.add_argument("--format", choices=["csv", "binary"], default="csv")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train a sequence-to-sequence model")
    p.add_argument("--manifest", required=True)
    _add_strategy(p, required=False)
    p.add_argument("--w-in", type=int, default=20)
    p.add_argument("--w-out", type=int, default=45)
    p.add_argument("--hidden", type=int, default=25)
    _add_training(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="spatial/temporal RMSE of a trained model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    _add_strategy(p, required=False)
    p.add_argument("--split", choices=["train", "validation", "test"], default="test")
    p.add_argument("--w-in", type=int)
    p.add_argument("--w-out", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run a w_out, w_in or sampling-strategy sweep")
    p.add_argument("--axis", choices=["wout", "win", "strategy"], required=True)
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--manifest", help="raw corpus manifest (default: synthesise one)")
    p.add_argument("--count", type=int, default=250, help="synthetic source trajectories")
    p.add_argument("--delta-px", type=float, default=2.0)
    p.add_argument("--w-in", type=int, default=20)
    p.add_argument("--w-out", type=int, default=45)
    _add_training(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except FileNotFoundError as exc:
        print(f"evtraj: missing file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_MISSING
    except FormatError as exc:
        print(f"evtraj: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except InvariantViolation as exc:
        print(f"evtraj: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except TrainingDivergedError as exc:
        print(f"evtraj: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as exc:
        print(f"evtraj: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
