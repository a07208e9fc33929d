"""Command-line harness.

Every subcommand is driven by a single JSON config file (no environment
variables), reads and writes only the files named there, and prints
human-readable progress to stdout; all machine-readable output goes to
files.  Exit codes: 2 usage error, 3 malformed config, 4 missing file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import serialize
from .coding import CodingConfig, encode_dataset
from .cover import build_cover, verify_bounds
from .data import SwissRollSpec, gen_swiss_roll
from .diagnostics import SmoothnessSpec, locality_report
from .dictionary import DictLearnConfig, learn
from .experiments import EXPERIMENTS, resolve_config, run_experiment
from .supervised import error_rate, predict_batch, rmse, train_classifier, train_ridge

EXIT_USAGE = 2
EXIT_BAD_CONFIG = 3
EXIT_MISSING_FILE = 4


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail(EXIT_USAGE, "usage", message)


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")
    raise SystemExit(code)


def _load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        _fail(EXIT_MISSING_FILE, "missing-file", f"config file not found: {path}")
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        _fail(EXIT_BAD_CONFIG, "config", f"config is not valid JSON: {exc}")
    if not isinstance(config, dict):
        _fail(EXIT_BAD_CONFIG, "config", "config root must be a JSON object")
    return config


def _section(config, name) -> dict:
    value = config.get(name)
    if not isinstance(value, dict):
        raise ConfigError(f"config needs a {name!r} object")
    return value


def _path(config, key, out_dir, must_exist=False):
    paths = _section(config, "paths")
    if key not in paths:
        raise ConfigError(f"config paths is missing {key!r}")
    path = Path(paths[key])
    if not path.is_absolute() and out_dir is not None:
        path = Path(out_dir) / path
    if must_exist and not path.exists():
        raise FileNotFoundError(str(path))
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _coding_config(config) -> CodingConfig:
    section = _section(config, "coding")
    allowed = {"mu", "beta_sparse", "p", "tol", "max_iter"}
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown coding keys {sorted(unknown)}")
    return CodingConfig(**section)


def _dict_config(config, seed_override) -> DictLearnConfig:
    section = dict(_section(config, "dictionary"))
    if seed_override is not None:
        section["seed"] = seed_override
    return DictLearnConfig(coding=_coding_config(config), **section)


def cmd_gen_data(config, args):
    section = dict(_section(config, "swissroll"))
    if args.seed is not None:
        section["seed"] = args.seed
    dataset = gen_swiss_roll(SwissRollSpec(**section))
    out = _path(config, "dataset", args.out)
    serialize.save_dataset_csv(dataset, out)
    print(f"wrote {dataset.n} samples (d={dataset.d}) to {out}")


def cmd_learn_codebook(config, args):
    dataset = serialize.load_dataset_csv(_path(config, "dataset", args.out, must_exist=True))
    codebook, history = learn(dataset, _dict_config(config, args.seed))
    out = _path(config, "codebook", args.out)
    serialize.save_codebook(codebook, out)
    if history:
        print(f"learned {codebook.size} anchors over {len(history) // 2} rounds; "
              f"objective {history[0]:.6g} -> {history[-1]:.6g}")
    else:
        print(f"initialized {codebook.size} anchors (no learning rounds)")
    print(f"wrote codebook to {out}")


def cmd_encode(config, args):
    dataset = serialize.load_dataset_csv(_path(config, "dataset", args.out, must_exist=True))
    codebook = serialize.load_codebook(_path(config, "codebook", args.out, must_exist=True))
    codes = encode_dataset(dataset, codebook, _coding_config(config))
    out = _path(config, "codes", args.out)
    serialize.save_codes(codes, out)
    nnz = sum(len(c.entries) for c in codes)
    print(f"encoded {len(codes)} points, {nnz / max(len(codes), 1):.2f} nonzeros/point; wrote {out}")


def cmd_train(config, args):
    section = _section(config, "train")
    task = section.get("task")
    if task not in ("regression", "classification"):
        raise ConfigError("train.task must be 'regression' or 'classification'")
    codes = serialize.load_codes(_path(config, "codes", args.out, must_exist=True))
    dataset = serialize.load_dataset_csv(_path(config, "dataset", args.out, must_exist=True))
    if dataset.targets is None:
        raise ConfigError("training dataset has no targets column")
    if task == "regression":
        model = train_ridge(codes, dataset.targets, section.get("lambda", 1e-3))
    else:
        model = train_classifier(
            codes, dataset.targets, section.get("lambda", 1e-3),
            loss=section.get("loss", "squared_hinge"),
            tol=section.get("tol", 1e-6),
            max_iter=section.get("max_iter", 100000),
        )
    out = _path(config, "model", args.out)
    serialize.save_model(model, out)
    print(f"trained {task} model on {len(codes)} codes; wrote {out}")


def cmd_predict(config, args):
    model = serialize.load_model(_path(config, "model", args.out, must_exist=True))
    codes = serialize.load_codes(_path(config, "codes", args.out, must_exist=True))
    predictions = predict_batch(model, codes)
    out = _path(config, "predictions", args.out)
    serialize.save_predictions(predictions, out)
    print(f"wrote {len(predictions)} predictions to {out}")


def cmd_eval(config, args):
    section = _section(config, "eval")
    metric = section.get("metric")
    if metric not in ("rmse", "error_rate"):
        raise ConfigError("eval.metric must be 'rmse' or 'error_rate'")
    predictions = serialize.load_predictions(_path(config, "predictions", args.out, must_exist=True))
    dataset = serialize.load_dataset_csv(_path(config, "dataset", args.out, must_exist=True))
    if dataset.targets is None:
        raise ConfigError("evaluation dataset has no targets column")
    if metric == "rmse":
        value = rmse(predictions, dataset.targets)
    else:
        value = error_rate(predictions, dataset.targets)
    out = _path(config, "metrics", args.out)
    serialize.dump_json({metric: value}, out)
    print(f"{metric} = {value:.6g}; wrote {out}")


def cmd_diagnose_locality(config, args):
    dataset = serialize.load_dataset_csv(_path(config, "dataset", args.out, must_exist=True))
    codebook = serialize.load_codebook(_path(config, "codebook", args.out, must_exist=True))
    codes = serialize.load_codes(_path(config, "codes", args.out, must_exist=True))
    report = locality_report(dataset, codebook, codes)
    records_out = _path(config, "records_csv", args.out)
    hist_out = _path(config, "histogram_csv", args.out)
    serialize.save_locality_records_csv(report, records_out)
    serialize.save_locality_histogram_csv(report, hist_out)
    print(f"mean basis-to-datum distance {report.mean_distance:.6g}; "
          f"wrote {records_out} and {hist_out}")


def cmd_cover_verify(config, args):
    section = _section(config, "cover")
    dataset = serialize.load_dataset_csv(_path(config, "dataset", args.out, must_exist=True))
    cover = build_cover(dataset, float(section["epsilon"]), int(section["m"]))
    spec = SmoothnessSpec(alpha=section.get("alpha", 1.0), beta=section.get("beta", 1.0),
                          p=section.get("p", 1.0))
    report = verify_bounds(dataset, cover, spec)
    serialize.save_cover(cover, _path(config, "cover", args.out))
    serialize.dump_json(report, _path(config, "report", args.out))
    print(f"cover: {report['n_centers']} centers, {report['n_anchors']} anchors, "
          f"Q={report['q_measured']:.6g} (bound {report['q_bound']:.6g})")


def cmd_run_experiment(config, args):
    name = config.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"config.experiment must be one of {list(EXPERIMENTS)}")
    overrides = dict(config.get("params", {}))
    if args.seed is not None:
        overrides["seed"] = args.seed
    resolved = resolve_config(name, overrides)
    results = run_experiment(resolved, verbose=True)
    out = _path(config, "results", args.out)
    serialize.dump_json(results, out)
    print(f"wrote results to {out}")


COMMANDS = {
    "gen-data": cmd_gen_data,
    "learn-codebook": cmd_learn_codebook,
    "encode": cmd_encode,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "diagnose-locality": cmd_diagnose_locality,
    "cover-verify": cmd_cover_verify,
    "run-experiment": cmd_run_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lcc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON config file")
        cmd.add_argument("--out", default=None, help="directory prefix for relative output paths")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--threads", type=int, default=None,
                         help="worker threads for per-point encoding "
                              "(results do not depend on this)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            _fail(EXIT_USAGE, "usage", "--threads must be at least 1")
        import numba

        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    config = _load_config(args.config)
    try:
        COMMANDS[args.command](config, args)
    except ConfigError as exc:
        _fail(EXIT_BAD_CONFIG, "config", exc)
    except (TypeError, ValueError, KeyError) as exc:
        _fail(EXIT_BAD_CONFIG, "config", exc)
    except FileNotFoundError as exc:
        _fail(EXIT_MISSING_FILE, "missing-file", exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
