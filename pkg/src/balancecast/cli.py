"""Command-line entry point.

Subcommands: synth, train, predict, evaluate, explain, grid. Every command
is deterministic given its flags and seed, and all emitted artifacts are
plain CSV/JSON so any plotting tool can consume them. Flags may also be
supplied through a JSON config file (--config); explicit flags win.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric/training error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from .baseline import NaiveModel
from .data import (
    DEFAULT_HORIZON_STEPS,
    Dataset,
    SyntheticConfig,
    align_horizon,
    generate_synthetic,
    load_csv,
    save_csv,
    save_truth_json,
    synthetic_schema,
)
from .ebm import (
    EbmConfig,
    ebm_predict,
    ebm_predict_batch,
    ebm_train,
    explain_local,
    export_shapes,
    global_importance,
)
from .errors import (
    BalancecastError,
    DegenerateLeafError,
    GridError,
    IngestError,
    InsufficientHistoryError,
    InvalidArgumentError,
    SchemaError,
    UnsupportedModelError,
)
from .evaluation import (
    ebm_spec,
    evaluate,
    expanding_window_folds,
    gbt_spec,
    naive_spec,
    stacked_spec,
)
from .gbt import GbtConfig, gbt_predict_batch, gbt_train
from .persistence import load_model, save_model
from .stacking import stacked_predict_batch, stacked_train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

MODEL_CHOICES = ("naive", "gbt", "ebm", "stacked")


class UsageError(BalancecastError):
    """Bad flag combination or value; maps to exit code 2."""


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file of default flag values")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory")


def _add_data(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", default=None, help="dataset CSV path")
    parser.add_argument("--horizon-steps", type=int, default=None)


def _add_hyperparams(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-trees", type=int, default=None)
    parser.add_argument("--learning-rate", type=float, default=None)
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--reg-lambda", type=float, default=None)
    parser.add_argument("--max-depth", type=int, default=None)
    parser.add_argument("--min-child-weight", type=float, default=None)
    parser.add_argument("--outer-rounds", type=int, default=None)
    parser.add_argument("--max-bins", type=int, default=None)
    parser.add_argument("--max-leaves", type=int, default=None)
    parser.add_argument("--meta-n-trees", type=int, default=None)
    parser.add_argument("--meta-max-depth", type=int, default=None)
    parser.add_argument("--meta-learning-rate", type=float, default=None)


def _add_eval(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--initial-train", type=int, default=None)
    parser.add_argument("--test-len", type=int, default=None)
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument("--label", default=None)
    parser.add_argument("--direction", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="balancecast",
        description="Forecast balancing-market activation prices with "
        "interpretable models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    _add_common(p)
    p.add_argument("--n-rows", type=int, default=None)
    p.add_argument("--noise-sd", type=float, default=None)
    p.add_argument("--spike-prob", type=float, default=None)
    p.add_argument("--spike-scale", type=float, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model and write model.json")
    _add_common(p)
    _add_data(p)
    _add_hyperparams(p)
    p.add_argument("--model", default=None, help="naive|gbt|ebm|stacked")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict with a saved model")
    _add_common(p)
    _add_data(p)
    p.add_argument("--model", default=None, help="model JSON file")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="expanding-window evaluation report")
    _add_common(p)
    _add_data(p)
    _add_hyperparams(p)
    _add_eval(p)
    p.add_argument(
        "--models", default=None, help="comma-separated subset of naive,gbt,ebm,stacked"
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="export shape functions and importance")
    _add_common(p)
    _add_data(p)
    p.add_argument("--model", default=None, help="model JSON file (ebm only)")
    p.add_argument("--row", type=int, default=None, help="local explanation row")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("grid", help="evaluate a hyperparameter grid")
    _add_common(p)
    _add_data(p)
    _add_eval(p)
    p.add_argument("--model", default=None, help="gbt|ebm")
    p.add_argument(
        "--param",
        action="append",
        default=None,
        help="name=v1,v2,... (repeatable)",
    )
    p.set_defaults(func=cmd_grid)
    return parser


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill flags that were not given from the --config JSON file."""
    if not getattr(args, "config", None):
        return args
    path = Path(args.config)
    with path.open("r") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise UsageError(f"config file {path}: unknown key {key!r}")
        if getattr(args, dest) is None:
            setattr(args, dest, value)
    return args


def _get(args, name: str, fallback):
    value = getattr(args, name, None)
    return fallback if value is None else value


def _out_dir(args) -> Path:
    out = Path(_get(args, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(args) -> Dataset:
    data = getattr(args, "data", None)
    if not data:
        raise UsageError("--data is required")
    return load_csv(data, synthetic_schema())


def _aligned(args) -> tuple[Dataset, int]:
    horizon = int(_get(args, "horizon_steps", DEFAULT_HORIZON_STEPS))
    return align_horizon(_load_dataset(args), horizon), horizon


def _gbt_config(args, seed: int) -> GbtConfig:
    return GbtConfig(
        n_trees=int(_get(args, "n_trees", 300)),
        learning_rate=float(_get(args, "learning_rate", 0.1)),
        gamma=float(_get(args, "gamma", 0.0)),
        reg_lambda=float(_get(args, "reg_lambda", 1.0)),
        max_depth=int(_get(args, "max_depth", 6)),
        min_child_weight=float(_get(args, "min_child_weight", 1.0)),
        seed=seed,
    )


def _ebm_config(args, seed: int) -> EbmConfig:
    return EbmConfig(
        outer_rounds=int(_get(args, "outer_rounds", 500)),
        learning_rate=float(_get(args, "learning_rate", 0.05)),
        max_bins=int(_get(args, "max_bins", 256)),
        max_leaves_per_round=int(_get(args, "max_leaves", 3)),
        seed=seed,
    )


def _meta_config(args, seed: int) -> GbtConfig:
    return GbtConfig(
        n_trees=int(_get(args, "meta_n_trees", 100)),
        learning_rate=float(_get(args, "meta_learning_rate", 0.1)),
        max_depth=int(_get(args, "meta_max_depth", 4)),
        seed=seed,
    )


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_synth(args) -> None:
    try:
        cfg = SyntheticConfig(
            n_rows=int(_get(args, "n_rows", 2000)),
            seed=int(_get(args, "seed", 42)),
            noise_sd=float(_get(args, "noise_sd", 2.0)),
            spike_prob=float(_get(args, "spike_prob", 0.02)),
            spike_scale=float(_get(args, "spike_scale", 60.0)),
        )
    except InvalidArgumentError as exc:
        raise UsageError(f"bad synthetic config: {exc}") from None
    out = _out_dir(args)
    dataset, truth = generate_synthetic(cfg)
    save_csv(dataset, out / "dataset.csv")
    save_truth_json(truth, dataset, out / "truth.json")
    print(f"wrote {out / 'dataset.csv'} ({dataset.n_rows} rows)")
    print(f"wrote {out / 'truth.json'}")


def cmd_train(args) -> None:
    kind = getattr(args, "model", None)
    if kind not in MODEL_CHOICES:
        raise UsageError(
            f"--model must be one of {', '.join(MODEL_CHOICES)}, got {kind!r}"
        )
    seed = int(_get(args, "seed", 42))
    aligned, horizon = _aligned(args)
    if kind == "naive":
        model = NaiveModel(horizon_steps=horizon)
    elif kind == "gbt":
        model = gbt_train(aligned, _gbt_config(args, seed))
    elif kind == "ebm":
        model = ebm_train(aligned, _ebm_config(args, seed))
    else:
        model = stacked_train(aligned, _ebm_config(args, seed), _meta_config(args, seed))
    out = _out_dir(args)
    save_model(model, horizon, out / "model.json")
    print(f"wrote {out / 'model.json'} (kind={kind}, horizon={horizon})")


def _predict_rows(kind, model, aligned: Dataset, horizon: int):
    """Yield (issue_ts, target_ts, prediction) rows."""
    if kind == "naive":
        start = model.horizon_steps
        preds = aligned.target[: aligned.n_rows - start]
        indices = range(start, aligned.n_rows)
    else:
        if kind == "gbt":
            preds = gbt_predict_batch(model, aligned.features)
        elif kind == "ebm":
            preds = ebm_predict_batch(model, aligned.features)
        else:
            preds = stacked_predict_batch(model, aligned.features)
        indices = range(aligned.n_rows)
    for i, pred in zip(indices, preds):
        issue = int(aligned.timestamps[i])
        yield issue, issue + horizon, repr(float(pred))


def cmd_predict(args) -> None:
    model_path = getattr(args, "model", None)
    if not model_path:
        raise UsageError("--model is required")
    kind, horizon, model = load_model(model_path)
    raw = _load_dataset(args)
    aligned = align_horizon(raw, horizon)
    out = _out_dir(args)
    _write_csv(
        out / "predictions.csv",
        ["issue_timestamp", "target_timestamp", "prediction"],
        _predict_rows(kind, model, aligned, horizon),
    )
    print(f"wrote {out / 'predictions.csv'}")


def _model_specs(args, names, horizon: int, seed: int):
    specs = []
    for name in names:
        if name == "naive":
            specs.append(naive_spec(horizon))
        elif name == "gbt":
            specs.append(gbt_spec(_gbt_config(args, seed)))
        elif name == "ebm":
            specs.append(ebm_spec(_ebm_config(args, seed)))
        elif name == "stacked":
            specs.append(stacked_spec(_ebm_config(args, seed), _meta_config(args, seed)))
        else:
            raise UsageError(f"unknown model kind {name!r}")
    return specs


def cmd_evaluate(args) -> None:
    names = [s.strip() for s in _get(args, "models", "naive,gbt,ebm,stacked").split(",") if s.strip()]
    if not names:
        raise UsageError("--models lists no model kinds")
    seed = int(_get(args, "seed", 42))
    aligned, horizon = _aligned(args)
    initial_train = getattr(args, "initial_train", None)
    test_len = getattr(args, "test_len", None)
    if initial_train is None or test_len is None:
        raise UsageError("--initial-train and --test-len are required")
    folds = expanding_window_folds(aligned.n_rows, int(initial_train), int(test_len))
    epsilon = float(_get(args, "epsilon", 1e-6))
    collected: dict[str, np.ndarray] = {}
    report = evaluate(
        _model_specs(args, names, horizon, seed),
        aligned,
        folds,
        epsilon=epsilon,
        label=str(_get(args, "label", "synthetic")),
        direction=str(_get(args, "direction", "up")),
        collect_predictions=collected,
    )
    out = _out_dir(args)
    report.to_csv(out / "report.csv")
    (out / "report.txt").write_text(report.format_table() + "\n")
    idx = collected["__index__"]
    pred_rows = []
    for name in names:
        preds = collected[name]
        for k, i in enumerate(idx):
            pred_rows.append(
                [
                    name,
                    int(aligned.timestamps[i]),
                    repr(float(collected["__actual__"][k])),
                    repr(float(preds[k])),
                ]
            )
    _write_csv(
        out / "predictions.csv",
        ["model", "issue_timestamp", "actual", "predicted"],
        pred_rows,
    )
    print(report.format_table())
    print(f"wrote {out / 'report.csv'}, {out / 'report.txt'}, {out / 'predictions.csv'}")


def cmd_explain(args) -> None:
    model_path = getattr(args, "model", None)
    if not model_path:
        raise UsageError("--model is required")
    kind, _horizon, model = load_model(model_path)
    if kind != "ebm":
        raise UnsupportedModelError(
            f"explain requires an ebm model file, got kind={kind!r}"
        )
    out = _out_dir(args)
    row = getattr(args, "row", None)
    if row is None:
        d = _load_dataset(args)
        ranking = global_importance(model, d)
        _write_csv(
            out / "importance.csv",
            ["rank", "feature", "mac"],
            (
                [rank + 1, name, repr(mac)]
                for rank, (name, mac) in enumerate(ranking)
            ),
        )
        shape_rows = []
        for name, table in export_shapes(model).items():
            for lower, upper, contribution in table:
                shape_rows.append([name, repr(lower), repr(upper), repr(contribution)])
        _write_csv(
            out / "shapes.csv",
            ["feature", "bin_lower", "bin_upper", "contribution"],
            shape_rows,
        )
        print(f"wrote {out / 'importance.csv'}, {out / 'shapes.csv'}")
    else:
        d = _load_dataset(args)
        if not 0 <= row < d.n_rows:
            raise InvalidArgumentError(
                f"--row {row} out of range for {d.n_rows} rows"
            )
        x = d.features[row]
        contributions = explain_local(model, x)
        prediction = ebm_predict(model, x)
        rows = [[name, repr(c)] for name, c in contributions]
        rows.append(["__intercept__", repr(model.intercept)])
        rows.append(["__prediction__", repr(prediction)])
        _write_csv(out / "local_explanation.csv", ["feature", "contribution"], rows)
        print(f"wrote {out / 'local_explanation.csv'}")


def _parse_grid_params(param_args, config_cls):
    field_types = {f.name: f.type for f in dataclasses.fields(config_cls)}
    grid: list[tuple[str, list]] = []
    for raw in param_args:
        if "=" not in raw:
            raise UsageError(f"--param expects name=v1,v2,..., got {raw!r}")
        name, _, values = raw.partition("=")
        name = name.strip().replace("-", "_")
        if name not in field_types or name == "seed":
            raise UsageError(
                f"unknown {config_cls.__name__} parameter {name!r}"
            )
        caster = int if field_types[name] in ("int", int) else float
        try:
            parsed = [caster(v) for v in values.split(",") if v != ""]
        except ValueError:
            raise UsageError(f"cannot parse values for --param {raw!r}") from None
        if not parsed:
            raise UsageError(f"--param {raw!r} lists no values")
        grid.append((name, parsed))
    return grid


def cmd_grid(args) -> None:
    kind = getattr(args, "model", None)
    if kind not in ("gbt", "ebm"):
        raise UsageError(f"grid search supports gbt or ebm, got {kind!r}")
    config_cls = GbtConfig if kind == "gbt" else EbmConfig
    grid = _parse_grid_params(getattr(args, "param", None) or [], config_cls)
    if not grid:
        raise UsageError("grid search needs at least one --param")
    seed = int(_get(args, "seed", 42))
    aligned, horizon = _aligned(args)
    initial_train = getattr(args, "initial_train", None)
    test_len = getattr(args, "test_len", None)
    if initial_train is None or test_len is None:
        raise UsageError("--initial-train and --test-len are required")
    folds = expanding_window_folds(aligned.n_rows, int(initial_train), int(test_len))
    epsilon = float(_get(args, "epsilon", 1e-6))
    names = [name for name, _ in grid]
    results = []
    for combo in itertools.product(*(values for _, values in grid)):
        overrides = dict(zip(names, combo))
        cfg = config_cls(**overrides, seed=seed)
        spec = gbt_spec(cfg) if kind == "gbt" else ebm_spec(cfg)
        report = evaluate([spec], aligned, folds, epsilon=epsilon)
        metrics = report.rows[0].metrics
        results.append((combo, metrics))
    results.sort(key=lambda r: (r[1].mae, r[0]))
    out = _out_dir(args)
    _write_csv(
        out / "grid.csv",
        [*names, "mae", "rmse", "r2"],
        (
            [*(repr(v) if isinstance(v, float) else v for v in combo),
             repr(m.mae), repr(m.rmse), "" if m.r2 is None else repr(m.r2)]
            for combo, m in results
        ),
    )
    print(f"wrote {out / 'grid.csv'} ({len(results)} combinations)")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = _merge_config(args)
        args.func(args)
    except (UsageError, UnsupportedModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        SchemaError,
        IngestError,
        GridError,
        InvalidArgumentError,
        FileNotFoundError,
        IsADirectoryError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (
        DegenerateLeafError,
        InsufficientHistoryError,
        FloatingPointError,
        ZeroDivisionError,
        OverflowError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
