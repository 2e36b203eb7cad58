"""Command-line front end: fetch, train, eval, sweep-xi, sweep-qubits, sweep-noise.

Settings resolve as defaults < ``--config`` JSON file < flags. Every
artifact goes under ``--out``, in a fresh ``<command>-<timestamp>``
directory.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from datetime import datetime
from pathlib import Path

from . import report
from .data import MNIST_MIRROR, NoiseSpec, add_noise, fetch_mnist, load_split, subset
from .errors import ConfigError, FormatError
from .train import (
    TrainConfig, build_model, evaluate, load_model, save_model, sweep_noise, sweep_qubits,
    sweep_xi, train,
)

log = logging.getLogger("qsfusion")

DEFAULT_CACHE = Path.home() / ".cache" / "qsfusion" / "mnist"
DEFAULT_NOISE_LEVELS = [0.0, 0.1, 0.2, 0.4]
DEFAULT_XI_VALUES = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
DEFAULT_QUBITS = [5, 6, 7]

# flag dest -> config key
FLAG_KEYS = {
    "seed": "seed", "train_k": "train_k", "test_k": "test_k", "xi": "xi", "qubits": "n_qubits",
    "epochs": "epochs", "lr": "lr", "momentum": "momentum", "batch": "batch_size",
    "timesteps": "T", "hidden": "hidden", "noise": "noise", "noise_level": "noise_level",
    "seeds": "seeds", "data_dir": "data_dir", "out": "out",
}
EXTRA_DEFAULTS = {"noise": None, "noise_level": 0.0, "seeds": 1, "data_dir": str(DEFAULT_CACHE), "out": "runs"}


class UsageError(Exception):
    pass


def resolve_config(args):
    """Merge defaults, the JSON config file and explicit flags, then validate.

    Returns ``(TrainConfig, extras)``; raises ``UsageError`` naming the bad field.
    """
    train_fields = {f.name for f in dataclasses.fields(TrainConfig)}
    merged = dict(EXTRA_DEFAULTS)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"config: cannot read {args.config}: {exc}") from exc
        unknown = set(loaded) - train_fields - set(EXTRA_DEFAULTS)
        if unknown:
            raise UsageError(f"config: unknown field(s) {sorted(unknown)}")
        merged.update(loaded)
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            merged[key] = value

    try:
        cfg = TrainConfig(**{k: v for k, v in merged.items() if k in train_fields})
        if merged["noise"] is not None or merged["noise_level"]:
            NoiseSpec(merged["noise"] or "gaussian", float(merged["noise_level"]), cfg.seed)
    except ConfigError as exc:
        raise UsageError(f"invalid config field '{exc.field}': {exc}") from exc
    except TypeError as exc:
        raise UsageError(f"config: {exc}") from exc
    if int(merged["seeds"]) < 1:
        raise UsageError("invalid config field 'seeds': must be >= 1")
    extras = {k: merged[k] for k in EXTRA_DEFAULTS}
    return cfg, extras


def _out_dir(base, command):
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    path = Path(base) / f"{command}-{stamp}"
    path.mkdir(parents=True, exist_ok=False)
    return path


def _load_data(cfg, extras, need_train=True):
    data_dir = Path(extras["data_dir"])
    try:
        train_set = load_split(data_dir, "train") if need_train else None
        test_set = load_split(data_dir, "test")
    except FileNotFoundError as exc:
        raise UsageError(f"missing data: {exc} (run 'qsfusion fetch' or pass --data-dir)") from exc
    except FormatError as exc:
        raise UsageError(f"bad data file in {data_dir}: {exc}") from exc
    try:
        if train_set is not None:
            train_set = subset(train_set, min(cfg.train_k, len(train_set)), cfg.seed)
        test_set = subset(test_set, min(cfg.test_k, len(test_set)), cfg.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return train_set, test_set


def _print_config(command, cfg, extras):
    print(json.dumps({"command": command, **cfg.to_dict(), **extras}, sort_keys=True))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_fetch(args):
    cache = Path(args.cache_dir)
    try:
        fetched = fetch_mnist(cache, base_url=args.mirror)
    except OSError as exc:
        print(f"error: fetch failed: {exc}", file=sys.stderr)
        return 1
    if fetched:
        print(f"downloaded {len(fetched)} file(s) into {cache}")
    else:
        print(f"{cache}: up to date")
    return 0


def cmd_train(args):
    cfg, extras = resolve_config(args)
    _print_config("train", cfg, extras)
    train_set, test_set = _load_data(cfg, extras)
    out = _out_dir(extras["out"], "train")
    model = build_model(cfg, n_inputs=train_set.images.shape[1])
    record = train(model, train_set, cfg, test_set)

    extra = {}
    if extras["noise_level"]:
        spec = NoiseSpec(extras["noise"] or "gaussian", float(extras["noise_level"]), cfg.seed)
        acc, _, _ = evaluate(model, test_set.with_images(add_noise(test_set.images, spec)))
        extra["noisy_test"] = {"kind": spec.kind, "level": spec.level, "accuracy": float(acc)}

    report.write_epochs_csv(record, out / "epochs.csv")
    report.write_confusion_csv(record.confusion, out / "confusion.csv")
    report.write_json(report.run_summary(record, **extra), out / "run.json")
    report.write_svg(report.curves_chart(record), out / "curves.svg")
    save_model(model, out / "model.npz")
    f = record.final
    print(f"train acc {f.train_acc:.4f}  test acc {f.test_acc:.4f}  -> {out}")
    return 0


def cmd_eval(args):
    cfg, extras = resolve_config(args)
    _print_config("eval", cfg, extras)
    try:
        model = load_model(args.model)
    except OSError as exc:
        raise UsageError(f"cannot load model {args.model}: {exc}") from exc
    _, test_set = _load_data(cfg, extras, need_train=False)
    if extras["noise_level"]:
        spec = NoiseSpec(extras["noise"] or "gaussian", float(extras["noise_level"]), cfg.seed)
        test_set = test_set.with_images(add_noise(test_set.images, spec))
    out = _out_dir(extras["out"], "eval")
    acc, cm, loss = evaluate(model, test_set)
    report.write_confusion_csv(cm, out / "confusion.csv")
    report.write_json({
        "schema_version": report.SCHEMA_VERSION, "model": str(args.model),
        "noise": {"kind": extras["noise"], "level": extras["noise_level"]},
        "test_acc": float(acc), "test_loss": loss, "confusion": cm.tolist(),
    }, out / "eval.json")
    print(f"test acc {acc:.4f}  loss {loss:.4f}  -> {out}")
    return 0


def _parse_values(raw, cast, default):
    if raw is None:
        return list(default)
    values = [cast(v) for v in raw.split(",") if v.strip()]
    if not values:
        raise UsageError("--values: empty value list")
    return values


def _sweep_svg_by_key(records, key, title, xlabel):
    train_groups, test_groups = {}, {}
    for r in records:
        k = r.config[key]
        train_groups.setdefault(k, []).append(r.final.train_acc)
        test_groups.setdefault(k, []).append(r.final.test_acc)
    xs, tr_mean, tr_std = report.mean_std(train_groups)
    _, te_mean, te_std = report.mean_std(test_groups)
    return dict(series={"train": (xs, tr_mean, tr_std), "test": (xs, te_mean, te_std)},
                title=title, xlabel=xlabel, ylabel="accuracy")


def cmd_sweep_xi(args):
    cfg, extras = resolve_config(args)
    xi_values = _parse_values(args.values, float, DEFAULT_XI_VALUES)
    for xi in xi_values:
        if not 0 <= xi <= 1:
            raise UsageError(f"invalid config field 'xi': sweep value {xi} outside [0, 1]")
    _print_config("sweep-xi", cfg, extras)
    train_set, test_set = _load_data(cfg, extras)
    out = _out_dir(extras["out"], "sweep-xi")
    records = sweep_xi(cfg, xi_values, train_set, test_set, n_seeds=int(extras["seeds"]))
    report.write_sweep_csv(records, out / "sweep_xi.csv")
    report.write_svg([_sweep_svg_by_key(records, "xi", "Accuracy vs quantum proportion",
                                        "quantum proportion xi")], out / "sweep_xi.svg")
    print(f"{len(records)} runs -> {out}")
    return 0


def cmd_sweep_qubits(args):
    cfg, extras = resolve_config(args)
    qubits = _parse_values(args.values, int, DEFAULT_QUBITS)
    for n in qubits:
        if not 1 <= n <= 24:
            raise UsageError(f"invalid config field 'qubits': sweep value {n} outside [1, 24]")
    _print_config("sweep-qubits", cfg, extras)
    train_set, test_set = _load_data(cfg, extras)
    out = _out_dir(extras["out"], "sweep-qubits")
    records = sweep_qubits(cfg, qubits, train_set, test_set, n_seeds=int(extras["seeds"]))
    report.write_sweep_csv(records, out / "sweep_qubits.csv")

    curves = {}
    for n in qubits:
        runs = [r for r in records if r.config["n_qubits"] == n]
        epochs = [m.epoch for m in runs[0].epochs]
        mean = [sum(r.epochs[i].test_acc for r in runs) / len(runs) for i in range(len(epochs))]
        curves[f"{n} qubits"] = (epochs, mean)
    report.write_svg([
        _sweep_svg_by_key(records, "n_qubits", "Accuracy vs qubit count", "qubits"),
        dict(series=curves, title=f"Test accuracy per epoch (xi={cfg.xi})", xlabel="epoch",
             ylabel="test accuracy"),
    ], out / "sweep_qubits.svg")
    print(f"{len(records)} runs -> {out}")
    return 0


def cmd_sweep_noise(args):
    cfg, extras = resolve_config(args)
    levels = _parse_values(args.values, float, DEFAULT_NOISE_LEVELS)
    if any(level < 0 for level in levels):
        raise UsageError("invalid config field 'noise_level': sweep levels must be >= 0")
    kinds = [extras["noise"]] if extras["noise"] else ["uniform", "gaussian"]
    _print_config("sweep-noise", cfg, extras)
    seeds = [cfg.seed + s for s in range(int(extras["seeds"]))]

    results = []
    if args.model:
        model = load_model(args.model)
        _, test_set = _load_data(cfg, extras, need_train=False)
        results = sweep_noise(model, test_set, kinds, levels, seeds=seeds)
    else:
        train_set, test_set = _load_data(cfg, extras)
        for seed in seeds:
            run_cfg = cfg.replace(seed=seed)
            model = build_model(run_cfg, n_inputs=train_set.images.shape[1])
            train(model, train_set, run_cfg, test_set)
            results.extend(sweep_noise(model, test_set, kinds, levels, seeds=[seed]))
    results.sort(key=lambda r: (kinds.index(r.kind), r.seed, levels.index(r.level)))

    out = _out_dir(extras["out"], "sweep-noise")
    report.write_noise_csv(results, out / "sweep_noise.csv")
    series = {}
    for kind in kinds:
        groups = {}
        for r in results:
            if r.kind == kind:
                groups.setdefault(r.level, []).append(r.accuracy)
        xs, mean, std = report.mean_std(groups)
        series[kind] = (xs, mean, std)
    report.write_svg([dict(series=series, title="Accuracy under input noise", xlabel="noise level",
                           ylabel="test accuracy")], out / "sweep_noise.svg")
    print(f"{len(results)} rows -> {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON file with config fields (flags override it)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory root (default: runs)")
    p.add_argument("--data-dir", dest="data_dir", help=f"directory with the MNIST IDX files (default: {DEFAULT_CACHE})")
    p.add_argument("--train-k", dest="train_k", type=int, help="training subset size")
    p.add_argument("--test-k", dest="test_k", type=int, help="test subset size")
    p.add_argument("--xi", type=float, help="quantum proportion in [0, 1]")
    p.add_argument("--qubits", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--hidden", type=int, help="hidden units in the classical head (0 = none)")
    p.add_argument("--timesteps", type=int, help="spike-train length T")
    p.add_argument("--noise", choices=["uniform", "gaussian"])
    p.add_argument("--noise-level", dest="noise_level", type=float)
    p.add_argument("--seeds", type=int, help="number of repeat seeds for sweeps")


def build_parser():
    parser = argparse.ArgumentParser(prog="qsfusion", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="download the MNIST IDX files")
    p.add_argument("--cache-dir", dest="cache_dir", default=str(DEFAULT_CACHE))
    p.add_argument("--mirror", default=MNIST_MIRROR, help="base URL holding the four .gz files")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("train", help="train one model and write run artifacts")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model")
    _common(p)
    p.add_argument("--model", required=True, help="model.npz written by 'train'")
    p.set_defaults(func=cmd_eval)

    for name, func, help_ in [
        ("sweep-xi", cmd_sweep_xi, "train across quantum proportions"),
        ("sweep-qubits", cmd_sweep_qubits, "train across qubit counts"),
        ("sweep-noise", cmd_sweep_noise, "accuracy under uniform/Gaussian input noise"),
    ]:
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--values", help="comma-separated sweep values")
        if name == "sweep-noise":
            p.add_argument("--model", help="saved model; trains inline per seed when omitted")
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
