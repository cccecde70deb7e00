"""Command-line entry points.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every command that produces a report can also append it as JSON lines
to ``--report``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, ProtofuseError

log = logging.getLogger("protofuse")


def _write_report(path, records):
    if path is None:
        return
    with Path(path).open("a") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def _load_data(path):
    from .dataio import load_dataset

    return load_dataset(path)


def cmd_gen_data(args):
    from .dataio import SynthSpec, load_synth_spec, save_dataset
    from .dataio.synth import generate_synthetic

    spec = load_synth_spec(args.spec) if args.spec else SynthSpec()
    if args.seed is not None:
        spec = SynthSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    manifest, samples = generate_synthetic(spec)
    out = save_dataset(args.out, manifest, samples)
    counts = {k: len(v) for k, v in manifest.splits.items()}
    print(f"wrote {len(samples)} samples to {out} (splits {counts})")
    _write_report(args.report, [{"kind": "gen-data", "out": str(out), "splits": counts}])


def cmd_train(args):
    from .dataio import load_config
    from .trainer import Trainer, load_checkpoint, save_checkpoint

    manifest, samples = _load_data(args.data)
    out = Path(args.out)
    last = out.with_name(out.name + ".last")
    log_path = out.with_name(out.name + ".log.jsonl")
    if args.resume:
        ckpt = load_checkpoint(args.resume)
        trainer = Trainer.from_checkpoint(ckpt, manifest, samples, log_path=log_path,
                                          dump_dir=out.parent)
    else:
        if not args.config:
            raise ConfigError("train needs --config unless --resume is given")
        config = load_config(args.config)
        if log_path.exists():
            log_path.unlink()
        trainer = Trainer(config, manifest, samples, log_path=log_path, dump_dir=out.parent)
    trainer.run(until=args.until)
    save_checkpoint(trainer.checkpoint(), last)
    if trainer.best is not None:
        save_checkpoint(trainer.best, out)
    elif not out.exists():
        save_checkpoint(trainer.checkpoint(), out)
    summary = {"kind": "train", "steps": trainer.step, "best_valid_mae": trainer.best_valid_mae,
               "best": str(out), "last": str(last), "log": str(log_path)}
    print(f"trained to step {trainer.step}; best valid MAE {trainer.best_valid_mae}; "
          f"best -> {out}, last -> {last}")
    _write_report(args.report, [summary])


def _model_and_data(args):
    from .model import model_from_checkpoint
    from .trainer import load_checkpoint

    ckpt = load_checkpoint(args.ckpt)
    manifest, samples = _load_data(args.data)
    return model_from_checkpoint(ckpt), manifest, samples


def cmd_eval(args):
    from .evaluation import evaluate, format_report

    model, manifest, samples = _model_and_data(args)
    report = evaluate(model, manifest, samples, split=args.split)
    print(format_report(report, args.split))
    _write_report(args.report, [{"kind": "eval", "split": args.split, **report.to_dict()}])


def cmd_eval_masked(args):
    from .evaluation import MaskSpec, eval_masked, format_report

    mask = MaskSpec.parse(args.mask)
    model, manifest, samples = _model_and_data(args)
    report = eval_masked(model, manifest, samples, mask, split=args.split)
    print(format_report(report, f"mask {mask.codes or '-'}"))
    _write_report(args.report, [{"kind": "eval-masked", "mask": mask.codes,
                                 "split": args.split, **report.to_dict()}])


def cmd_ablate(args):
    from .ablation import format_table, run_ablation
    from .dataio import load_config

    config = load_config(args.config)
    manifest, samples = _load_data(args.data)

    def progress(row):
        log.info("%s: %d steps, train MSE %.4f, test MAE %.3f", row.variant, row.steps,
                 row.train_mse, row.metrics.mae)

    rows = run_ablation(config, manifest, samples, on_row=progress)
    print(format_table(rows))
    _write_report(args.report, [r.to_dict() for r in rows])
    bad = [r.variant for r in rows if not r.delta_ok]
    if bad:
        raise ProtofuseError(f"parameter delta differs from prediction for {bad}")


def cmd_trace(args):
    from .evaluation import extract_traces

    model, manifest, samples = _model_and_data(args)
    records = extract_traces(model, manifest, samples, args.out, plot_dir=args.plot_dir,
                             split=args.split)
    print(f"wrote {len(records)} trace records to {args.out}")
    _write_report(args.report, [{"kind": "trace", "out": str(args.out), "n": len(records)}])


def cmd_gradcheck(args):
    from .checks import run_all

    results, seconds = run_all(args.seed)
    for r in results:
        print(f"{'ok  ' if r.ok else 'FAIL'} {r.name:<26} max rel err {r.max_rel_err:.2e} "
              f"({r.checked} entries)")
    failed = [r.name for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} passed in {seconds:.1f}s")
    _write_report(args.report, [
        {"kind": "gradcheck", "name": r.name, "max_rel_err": r.max_rel_err,
         "checked": r.checked, "tol": r.tol, "ok": r.ok}
        for r in results
    ])
    if failed:
        raise ProtofuseError(f"gradient check failed: {', '.join(failed)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="protofuse", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=fn)
        p.add_argument("--report", help="append JSON-lines records to this file")
        return p

    p = add("gen-data", cmd_gen_data, "generate a synthetic dataset")
    p.add_argument("--spec", help="generator settings JSON (defaults if omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "train a model")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="best checkpoint; <out>.last holds the final state")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--until", type=int, help="stop after this many total steps")

    for name, fn, help_ in (("eval", cmd_eval, "evaluate a checkpoint"),
                            ("eval-masked", cmd_eval_masked, "evaluate with modalities zeroed"),
                            ("trace", cmd_trace, "export gates and selection weights")):
        p = add(name, fn, help_)
        p.add_argument("--ckpt", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--split", default="test", choices=("train", "valid", "test"))
        if name == "eval-masked":
            p.add_argument("--mask", required=True, help="modality codes to zero, e.g. t or a,v")
        if name == "trace":
            p.add_argument("--out", required=True)
            p.add_argument("--plot-dir", help="write per-layer gate histograms (SVG) here")

    p = add("ablate", cmd_ablate, "train the full model and every ablation")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)

    p = add("gradcheck", cmd_gradcheck, "run the finite-difference gradient suite")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"protofuse {args.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    except (ProtofuseError, OSError, ValueError) as exc:
        print(f"protofuse {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
