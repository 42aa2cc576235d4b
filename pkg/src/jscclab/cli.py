"""Command-line interface.

Subcommands: train, eval-matched, eval-mismatched,
eval-continuous-compare, baseline-sweep, gradcheck, dump-constellation.

A flat key=value config file (--config) provides defaults; any key can
be overridden by the CLI flag of the same name. Every subcommand takes
--seed and produces deterministic output for a fixed seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import harness, model as mdl
from .data import DatasetSpec
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .training import TrainConfig, default_lambda, train

_MODEL_FIELDS = {f.name: f for f in dataclasses.fields(ModelConfig)}
_TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


def load_config_file(path: str) -> dict[str, str]:
    values = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


def _coerce(field: dataclasses.Field, raw: str):
    if raw == "none":
        return None
    if field.type in ("int", int):
        return int(raw)
    if field.type in ("float", float, "float | None"):
        return float(raw)
    return raw


def _add_dataclass_args(parser: argparse.ArgumentParser, fields: dict):
    for name, f in fields.items():
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None)


def _build_configs(args) -> tuple[ModelConfig, TrainConfig]:
    file_vals = load_config_file(args.config) if args.config else {}
    mkw, tkw = {}, {}
    for name, f in _MODEL_FIELDS.items():
        raw = getattr(args, name, None)
        if raw is None:
            raw = file_vals.get(name)
        if raw is not None:
            mkw[name] = _coerce(f, str(raw))
    for name, f in _TRAIN_FIELDS.items():
        raw = getattr(args, name, None)
        if raw is None:
            raw = file_vals.get(name)
        if raw is not None:
            tkw[name] = _coerce(f, str(raw))
    return ModelConfig(**mkw), TrainConfig(**tkw)


def _dataset(args, shape=(32, 32, 3)) -> DatasetSpec:
    h, w, c = shape
    return DatasetSpec(source=args.dataset, path=args.data_path,
                       subset=args.subset, seed=args.seed, h=h, w=w, c=c)


def _add_common(parser, dataset=True):
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=0)
    if dataset:
        parser.add_argument("--dataset", default="synthetic",
                            choices=["synthetic", "cifar10-binary"])
        parser.add_argument("--data-path", dest="data_path", default="")
        parser.add_argument("--subset", type=int, default=0)


def _parse_snrs(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jscclab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    _add_common(p)
    _add_dataclass_args(p, _MODEL_FIELDS)
    _add_dataclass_args(p, _TRAIN_FIELDS)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--report", default=None, help="per-epoch CSV output path")
    p.add_argument("--verbose", action="store_true")

    for name in ("eval-matched", "eval-mismatched"):
        p = sub.add_parser(name)
        _add_common(p)
        p.add_argument("--ckpt", required=True)
        p.add_argument("--snrs", default="0,2,4,6,8,10")
        p.add_argument("--trials", type=int, default=10)
        p.add_argument("--out", default=None, help="CSV path (default stdout)")
        if name == "eval-mismatched":
            p.add_argument("--snr-est", dest="snr_est", type=float, required=True)

    p = sub.add_parser("eval-continuous-compare")
    _add_common(p)
    p.add_argument("--ckpts", required=True,
                   help="comma-separated checkpoints; include one continuous-mode model")
    p.add_argument("--snrs", default="0,2,4,6,8,10")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--out", default=None)

    p = sub.add_parser("baseline-sweep")
    _add_common(p)
    p.add_argument("--M", dest="M", type=int, default=4)
    p.add_argument("--P", dest="P", type=float, default=1.0)
    p.add_argument("--rate", type=float, default=0.5, choices=[1 / 3, 0.5, 2 / 3])
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--snrs", default="-4,-2,0,1,2,3,4,6,8,10")
    p.add_argument("--symbol-budget", dest="symbol_budget", type=int, default=0)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=50)
    p.add_argument("--out", default=None)

    p = sub.add_parser("gradcheck")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("dump-constellation")
    p.add_argument("--M", dest="M", type=int, required=True)
    p.add_argument("--P", dest="P", type=float, default=1.0)
    p.add_argument("--out", default=None)
    return parser


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _load_test_images(args, shape=(32, 32, 3)) -> np.ndarray:
    _, test = _dataset(args, shape).load()
    return test


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "train":
        config, tcfg = _build_configs(args)
        train_images, test_images = _dataset(args, (config.H, config.W, config.C)).load()
        params, report = train(config, tcfg, train_images, test_images,
                               seed=args.seed, verbose=args.verbose)
        save_checkpoint(args.out, params, config)
        if args.report:
            _emit(report.to_csv(), args.report)
        print(report.summary())
        return 0

    if args.command in ("eval-matched", "eval-mismatched"):
        params, config = load_checkpoint(args.ckpt)
        images = _load_test_images(args, (config.H, config.W, config.C))
        snrs = _parse_snrs(args.snrs)
        lam = default_lambda(config.M)
        if args.command == "eval-matched":
            records = harness.sweep_matched(images, 255.0, params, config, snrs,
                                            args.trials, args.seed, args.ckpt, lam)
        else:
            records = harness.sweep_mismatched(images, 255.0, params, config,
                                               args.snr_est, snrs, args.trials,
                                               args.seed, args.ckpt, lam)
        _emit(harness.records_to_csv(records), args.out)
        return 0

    if args.command == "eval-continuous-compare":
        models = []
        for path in args.ckpts.split(","):
            params, config = load_checkpoint(path)
            models.append((path, params, config, default_lambda(config.M)))
        shape = (models[0][2].H, models[0][2].W, models[0][2].C)
        images = _load_test_images(args, shape)
        records = harness.compare_continuous(images, 255.0, models,
                                             _parse_snrs(args.snrs),
                                             args.trials, args.seed)
        _emit(harness.records_to_csv(records), args.out)
        return 0

    if args.command == "baseline-sweep":
        from .baseline.ldpc import make_regular_ldpc
        from .constellation import make_qam

        m = round(args.n * (1 - args.rate))
        code = make_regular_ldpc(args.n, m, seed=args.seed)
        const = make_qam(args.M, args.P)
        images = _load_test_images(args)
        records = harness.baseline_sweep(images, code, const,
                                         _parse_snrs(args.snrs), args.seed,
                                         symbol_budget=args.symbol_budget or None,
                                         max_iters=args.max_iters)
        _emit(harness.records_to_csv(records), args.out)
        return 0

    if args.command == "gradcheck":
        from .gradcheck import format_report, run_all

        results = run_all(args.seed)
        print(format_report(results))
        return 0 if all(r.passed for r in results) else 1

    if args.command == "dump-constellation":
        from .constellation import make_qam

        _emit(make_qam(args.M, args.P).dump_csv(), args.out)
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    raise SystemExit(main())
