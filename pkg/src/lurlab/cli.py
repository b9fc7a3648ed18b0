"""Command-line experiment driver.

Subcommands: ``gen-data``, ``train``, ``unlearn``, ``verify``, ``sweep-alpha``
and ``export``. Every command reads one flat JSON config (``--config``);
flags override individual keys. Outputs are CSV/JSON and contain no
timestamps, so reruns with identical inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import traceback
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .core import MlpModel, ParamVector, init_params
from .data import (BlobSpec, DatasetSplit, load_csv, make_blobs, split_classwise_forget,
                   split_random_forget, write_csv)
from .engine import (METHODS, UnlearnConfig, composite_objective, final_model, lur_total_gradient,
                     train, unlearn_run)
from .errors import DomainError, LurLabError, NumericalError, ParseError
from .metrics import METRIC_KEYS, accuracy, avg_gap, compute_metrics
from .tasks import mean_std, sweep_alpha, sweep_argmin, theory_problem
from .theory import DEFAULT_ALPHAS, fit_slope, lemma1_residual, remark1_residual, theorem1_residual

log = logging.getLogger("lurlab")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4, 5
MODEL_FORMAT = "lurlab-model"
MODEL_VERSION = 1
SERIES = ("cosine", "cosine_masked", "loss_r", "loss_f", "grad_norm_r", "grad_norm_f")
TRACE_COLUMNS = ("step",) + SERIES[2:] + SERIES[:2]


class ConfigError(LurLabError, ValueError):
    pass


class EmptyResultError(LurLabError):
    pass


def _pos_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v > 0


def _int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _int_list(v):
    return isinstance(v, list) and all(_int(x) for x in v)


def _num_list(v):
    return isinstance(v, list) and len(v) > 0 and all(_num(x) and x >= 0 for x in v)


# key -> (default, validator, description)
SCHEMA = {
    # unlearning
    "method": ("lur", lambda v: v in METHODS, f"one of {METHODS}"),
    "lur_mode": ("exact", lambda v: v in ("exact", "first_order"), "exact or first_order"),
    "alpha": (0.01, lambda v: _num(v) and v >= 0, "float >= 0"),
    "outer_lr": (0.01, lambda v: _num(v) and v > 0, "float > 0"),
    "momentum": (0.9, lambda v: _num(v) and 0 <= v < 1, "float in [0, 1)"),
    "lambda": (1.0, lambda v: _num(v) and v >= 0, "float >= 0"),
    "epochs": (5, _pos_int, "positive int"),
    "batch_size_r": (32, _pos_int, "positive int"),
    "batch_size_f": (8, _pos_int, "positive int"),
    "mask_sparsity": (0.0, lambda v: _num(v) and 0 <= v < 1, "float in [0, 1)"),
    "record_masked_cosine": (False, lambda v: isinstance(v, bool), "bool"),
    # dataset
    "data_source": ("blobs", lambda v: v in ("blobs", "csv"), "blobs or csv"),
    "train_csv": (None, lambda v: v is None or isinstance(v, str), "path"),
    "test_csv": (None, lambda v: v is None or isinstance(v, str), "path"),
    "blob_classes": (3, lambda v: _int(v) and v >= 2, "int >= 2"),
    "blob_dims": (2, lambda v: _int(v) and v >= 2, "int >= 2"),
    "blob_samples_per_class": (100, lambda v: _int(v) and v >= 2, "int >= 2"),
    "blob_spread": (3.0, lambda v: _num(v) and v >= 0, "float >= 0"),
    "blob_radius": (9.0, lambda v: _num(v) and v > 0, "float > 0"),
    "blob_overlap": (0.5, lambda v: _num(v) and 0 <= v < 1, "float in [0, 1)"),
    "data_seed": (0, _int, "int"),
    # split
    "split_mode": ("random", lambda v: v in ("random", "classwise"), "random or classwise"),
    "forget_fraction": (0.1, lambda v: _num(v) and 0 < v < 1, "float in (0, 1)"),
    "forget_classes": ([], _int_list, "list of ints"),
    # model and pretraining
    "hidden": ([16], lambda v: isinstance(v, list) and all(_pos_int(x) for x in v), "list of positive ints"),
    "activation": ("tanh", lambda v: v in ("tanh", "relu"), "tanh or relu"),
    "train_epochs": (60, _pos_int, "positive int"),
    "train_lr": (0.05, lambda v: _num(v) and v > 0, "float > 0"),
    "train_momentum": (0.9, lambda v: _num(v) and 0 <= v < 1, "float in [0, 1)"),
    "train_batch_size": (32, _pos_int, "positive int"),
    "train_seed": (0, _int, "int"),
    # retrain oracle
    "retrain_epochs": (None, lambda v: v is None or _pos_int(v), "positive int (default train_epochs)"),
    "retrain_lr": (None, lambda v: v is None or (_num(v) and v > 0), "float > 0 (default train_lr)"),
    # orchestration
    "seeds": ([0], lambda v: _int_list(v) and len(v) > 0, "non-empty list of ints"),
    "out_dir": ("results", lambda v: isinstance(v, str), "path"),
    "alpha_grid": ([1e-4, 1e-3, 1e-2, 1e-1, 1.0], _num_list, "non-empty list of floats >= 0"),
    "verify_seeds": (list(range(10)), lambda v: _int_list(v) and len(v) > 0, "non-empty list of ints"),
    "verify_alphas": (list(DEFAULT_ALPHAS), _num_list, "list of floats > 0"),
}

# keys that determine the pretrained model; hashed into the model file
MODEL_KEYS = ("data_source", "train_csv", "test_csv", "blob_classes", "blob_dims",
              "blob_samples_per_class", "blob_spread", "blob_radius", "blob_overlap", "data_seed",
              "hidden", "activation", "train_epochs", "train_lr", "train_momentum",
              "train_batch_size", "train_seed")


def default_config() -> dict:
    return {k: (list(v[0]) if isinstance(v[0], list) else v[0]) for k, v in SCHEMA.items()}


def validate_config(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    cfg = default_config()
    cfg.update(raw)
    for key, (_, check, desc) in SCHEMA.items():
        if not check(cfg[key]):
            raise ConfigError(f"{key}={cfg[key]!r} invalid; expected {desc}")
    if cfg["data_source"] == "csv" and not cfg["train_csv"]:
        raise ConfigError("data_source=csv needs train_csv")
    if cfg["split_mode"] == "classwise" and not cfg["forget_classes"]:
        raise ConfigError("split_mode=classwise needs forget_classes")
    for key in ("alpha", "outer_lr", "momentum", "lambda", "mask_sparsity", "blob_spread",
                "blob_radius", "blob_overlap", "forget_fraction", "train_lr", "train_momentum"):
        cfg[key] = float(cfg[key])
    cfg["alpha_grid"] = [float(a) for a in cfg["alpha_grid"]]
    cfg["verify_alphas"] = [float(a) for a in cfg["verify_alphas"]]
    return cfg


def load_config(path, overrides: dict) -> dict:
    raw = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    raw = dict(raw) if isinstance(raw, dict) else raw
    if isinstance(raw, dict):
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return validate_config(raw)


def config_hash(cfg: dict) -> str:
    subset = {k: cfg[k] for k in MODEL_KEYS}
    return hashlib.sha256(json.dumps(subset, sort_keys=True).encode()).hexdigest()


def unlearn_config(cfg: dict, **changes) -> UnlearnConfig:
    base = UnlearnConfig(method=cfg["method"], lur_mode=cfg["lur_mode"], alpha=cfg["alpha"],
                         outer_lr=cfg["outer_lr"], momentum=cfg["momentum"], lam=cfg["lambda"],
                         epochs=cfg["epochs"], batch_size_r=cfg["batch_size_r"],
                         batch_size_f=cfg["batch_size_f"], mask_sparsity=cfg["mask_sparsity"],
                         record_masked_cosine=cfg["record_masked_cosine"])
    return base.replace(**changes) if changes else base


def retrain_unlearn_config(cfg: dict) -> UnlearnConfig:
    return unlearn_config(cfg, method="retrain",
                          epochs=cfg["retrain_epochs"] or cfg["train_epochs"],
                          outer_lr=cfg["retrain_lr"] or cfg["train_lr"],
                          momentum=cfg["train_momentum"], batch_size_r=cfg["train_batch_size"],
                          mask_sparsity=0.0)


# data and model plumbing

def blob_spec(cfg: dict) -> BlobSpec:
    return BlobSpec(classes=cfg["blob_classes"], dims=cfg["blob_dims"],
                    samples_per_class=cfg["blob_samples_per_class"], spread=cfg["blob_spread"],
                    conflict_overlap=cfg["blob_overlap"], radius=cfg["blob_radius"])


def load_data(cfg: dict):
    if cfg["data_source"] == "csv":
        train_set = load_csv(cfg["train_csv"])
        if not cfg["test_csv"]:
            raise ConfigError("data_source=csv needs test_csv for evaluation")
        return train_set, load_csv(cfg["test_csv"])
    return make_blobs(blob_spec(cfg), cfg["data_seed"])


def make_split(cfg: dict, train_set, test_set, seed: int) -> DatasetSplit:
    if cfg["split_mode"] == "classwise":
        return split_classwise_forget(train_set, cfg["forget_classes"], test=test_set)
    return split_random_forget(train_set, cfg["forget_fraction"], seed, test=test_set)


def layer_dims(cfg: dict, train_set) -> tuple:
    n_classes = int(train_set.labels.max()) + 1
    if cfg["data_source"] == "blobs":
        n_classes = cfg["blob_classes"]
    return (train_set.inputs.shape[1], *cfg["hidden"], n_classes)


def pretrain(cfg: dict, train_set) -> MlpModel:
    model = init_params(layer_dims(cfg, train_set), cfg["activation"], cfg["train_seed"])
    return train(model, train_set, cfg["train_epochs"], cfg["train_lr"], cfg["train_momentum"],
                 cfg["train_batch_size"], cfg["train_seed"])


def model_to_json(model: MlpModel, chash: str) -> str:
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_dims": list(model.layer_dims),
        "activation": model.activation,
        "layout": [[s.name, list(s.shape), s.offset] for s in model.params.layout],
        "params": model.params.data.tolist(),
        "config_hash": chash,
    }
    return json.dumps(payload, sort_keys=True, indent=1) + "\n"


def model_from_json(text: str, expected_hash: str | None = None) -> MlpModel:
    payload = json.loads(text)
    if payload.get("format") != MODEL_FORMAT or payload.get("version") != MODEL_VERSION:
        raise ConfigError("not a lurlab model file (format/version mismatch)")
    if expected_hash is not None and payload["config_hash"] != expected_hash:
        raise ConfigError(
            "model file was trained under a different data/model config "
            f"(hash {payload['config_hash'][:12]} != {expected_hash[:12]}); retrain it")
    model = MlpModel(tuple(payload["layer_dims"]), payload["activation"])
    return model.with_params(ParamVector(payload["params"], model.params.layout))


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _fmt(v):
    return "" if v is None else repr(float(v)) if not isinstance(v, int) else str(v)


def write_trace_csv(path: Path, trace) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace.records:
            w.writerow([_fmt(getattr(r, c)) for c in TRACE_COLUMNS])


def read_trace_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# command implementations

def cmd_gen_data(cfg: dict) -> int:
    out = Path(cfg["out_dir"])
    train_set, test_set = make_blobs(blob_spec(cfg), cfg["data_seed"])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "train.csv", train_set)
    write_csv(out / "test.csv", test_set)
    log.info("wrote %d train / %d test rows to %s", len(train_set), len(test_set), out)
    return EXIT_OK


def cmd_train(cfg: dict) -> int:
    out = Path(cfg["out_dir"])
    train_set, _ = load_data(cfg)
    model = pretrain(cfg, train_set)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.json").write_text(model_to_json(model, config_hash(cfg)), encoding="utf-8")
    log.info("train accuracy %.2f%%", accuracy(model, train_set))
    return EXIT_OK


def _load_model(cfg: dict, model_path) -> MlpModel:
    path = Path(model_path) if model_path else Path(cfg["out_dir"]) / "model.json"
    if not path.is_file():
        raise FileNotFoundError(f"model file {path} not found; run `lurlab train` first")
    return model_from_json(path.read_text(encoding="utf-8"), config_hash(cfg))


def aggregate(per_seed: dict) -> dict:
    """Mean and sample std of each metric (and the gap) over seeds."""
    out = {}
    keys = list(METRIC_KEYS) + ["avg_gap"]
    for k in keys:
        vals = [m[k] for m in per_seed.values() if k in m]
        if vals:
            mean, std = mean_std(vals)
            out[k] = {"mean": mean, "std": std, "n": len(vals)}
    return out


def cmd_unlearn(cfg: dict, model_path=None, methods=None) -> int:
    out = Path(cfg["out_dir"])
    model = _load_model(cfg, model_path)
    train_set, test_set = load_data(cfg)
    methods = methods or [cfg["method"]]
    # the output location is not part of the experiment; keep snapshots relocatable
    snapshot = {k: v for k, v in cfg.items() if k != "out_dir"}
    results = {"config": snapshot, "methods": {}, "failures": []}
    refs = {}
    for seed in cfg["seeds"]:
        splits = make_split(cfg, train_set, test_set, seed)
        ref_trace = unlearn_run(model, splits, retrain_unlearn_config(cfg).replace(seed=seed))
        refs[seed] = (splits, compute_metrics(final_model(model, ref_trace), splits).to_dict())
    for method in methods:
        per_seed = {}
        for seed in cfg["seeds"]:
            splits, reference = refs[seed]
            seed_dir = out / method / f"seed_{seed}"
            run_cfg = (retrain_unlearn_config(cfg) if method == "retrain"
                       else unlearn_config(cfg, method=method)).replace(seed=seed)
            try:
                trace = unlearn_run(model, splits, run_cfg)
            except NumericalError as exc:
                results["failures"].append({"method": method, "seed": seed, "error": str(exc)})
                if exc.trace is not None:
                    write_trace_csv(seed_dir / "trace.csv", exc.trace)
                log.error("%s seed %d failed: %s", method, seed, exc)
                continue
            report = compute_metrics(final_model(model, trace), splits).to_dict()
            report["avg_gap"] = avg_gap(report, reference).avg_gap
            report["gaps"] = avg_gap(report, reference).gaps
            write_trace_csv(seed_dir / "trace.csv", trace)
            write_json(seed_dir / "metrics.json", report)
            write_json(seed_dir / "retrain_metrics.json", reference)
            per_seed[str(seed)] = report
        results["methods"][method] = {"per_seed": per_seed, "aggregate": aggregate(per_seed)}
    write_json(out / "results.json", results)
    for method, res in results["methods"].items():
        agg = res["aggregate"]
        if agg:
            log.info("%-8s " + "  ".join(f"{k}={agg[k]['mean']:.2f}±{agg[k]['std']:.2f}" for k in agg),
                     method)
    return EXIT_NUMERICAL if results["failures"] else EXIT_OK


def cmd_verify(cfg: dict) -> int:
    out = Path(cfg["out_dir"])
    checks = []

    def record(name, passed, **detail):
        checks.append({"check": name, "passed": bool(passed), **detail})

    # quadratic suite: constant Hessians, closed forms
    theta = ParamVector([1.0, 1.0])
    q_r = ad.quadratic(np.diag([2.0, 1.0]))
    q_f = ad.quadratic([[1.0, 1.0], [1.0, 3.0]], [1.0, -1.0])
    second = np.sqrt(61.0)  # ||H_r H_f g_r|| for this pair
    for a in cfg["verify_alphas"]:
        r1 = lemma1_residual(theta, q_f, q_r, a)
        r2 = abs(theorem1_residual(theta, q_r, q_f, a) - a * a * second)
        r3 = abs(remark1_residual(theta, q_r, q_f, a, cfg["lambda"]) - cfg["lambda"] * a * a * second)
        record(f"quadratic alpha={a:g}", max(r1, r2, r3) < 1e-10,
               lemma1=r1, theorem1_err=r2, remark1_err=r3)

    # smooth MLP suite: observed order of the three expansions
    alphas = cfg["verify_alphas"]
    for name, fn in (("lemma1", lambda m, r, f, a: lemma1_residual(m, f, r, a)),
                     ("theorem1", lambda m, r, f, a: theorem1_residual(m, r, f, a)),
                     ("remark1", lambda m, r, f, a: remark1_residual(m, r, f, a, cfg["lambda"]))):
        fits = []
        for seed in cfg["verify_seeds"]:
            m, r, f = theory_problem(seed)
            fits.append(fit_slope(alphas, [fn(m, r, f, a) for a in alphas]))
        good = sum(fit.within(1.8, 2.2, 0.98) for fit in fits)
        need = int(np.ceil(0.8 * len(fits)))
        record(f"{name} slope", good >= need, good_seeds=good, needed=need,
               slopes=[fit.slope for fit in fits], r_squared=[fit.r_squared for fit in fits])

    # exact gradient of the composite objective against central differences
    m, r, f = theory_problem(cfg["verify_seeds"][0])
    for a in (1e-3, 1e-2, 1e-1):
        g = lur_total_gradient(m, r, f, a, cfg["lambda"], mode=cfg["lur_mode"])
        num = ad.central_difference(
            lambda p: composite_objective(m.with_params(p), r, f, a, cfg["lambda"]), m.params)
        err = float(ad.relative_error(g.data, num.data).max())
        record(f"composite gradient ({cfg['lur_mode']}) alpha={a:g}", err <= 1e-4, max_rel_err=err)

    passed = all(c["passed"] for c in checks)
    write_json(out / "verify.json", {"passed": passed, "checks": checks})
    for c in checks:
        log.info("%s %s", "PASS" if c["passed"] else "FAIL", c["check"])
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_sweep_alpha(cfg: dict, model_path=None) -> int:
    out = Path(cfg["out_dir"])
    train_set, test_set = load_data(cfg)
    path = Path(model_path) if model_path else Path(cfg["out_dir"]) / "model.json"
    if model_path or path.is_file():
        model = _load_model(cfg, model_path)
    else:
        model = pretrain(cfg, train_set)

    def problem(seed):
        return model, make_split(cfg, train_set, test_set, seed)

    rows = sweep_alpha(problem, cfg["seeds"], cfg["alpha_grid"], unlearn_config(cfg),
                       retrain_unlearn_config(cfg))
    best = sweep_argmin(rows)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep_alpha.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "mean_gap", "std_gap", "n_seeds"])
        for row in rows:
            w.writerow([repr(row.alpha), repr(row.mean_gap), repr(row.std_gap), len(row.gaps)])
    write_json(out / "sweep_alpha.json", {
        "config": {k: v for k, v in cfg.items() if k != "out_dir"},
        "rows": [asdict(r) for r in rows],
        "argmin_alpha": rows[best].alpha,
        "interior": 0 < best < len(rows) - 1,
    })
    log.info("argmin alpha = %g", rows[best].alpha)
    return EXIT_OK


def cmd_trace_export(bundle, what: str, method=None, out_path=None) -> int:
    """Long-format ``seed,step,series,value`` rows for one method of a bundle."""
    bundle = Path(bundle)
    if what not in SERIES:
        raise ConfigError(f"unknown series {what!r}; available: {', '.join(SERIES)}")
    if not bundle.is_dir():
        raise FileNotFoundError(f"bundle {bundle} does not exist")
    methods = sorted(p.parent.parent.name for p in bundle.glob("*/seed_*/trace.csv"))
    methods = sorted(set(methods))
    if not methods:
        raise EmptyResultError(f"bundle {bundle} holds no traces")
    if method is None:
        if len(methods) > 1:
            raise ConfigError(f"bundle holds several methods {methods}; pick one with --method")
        method = methods[0]
    elif method not in methods:
        raise ConfigError(f"bundle has no traces for {method!r}; available: {methods}")
    rows = []
    for path in bundle.glob(f"{method}/seed_*/trace.csv"):
        seed = int(path.parent.name.split("_", 1)[1])
        for rec in read_trace_csv(path):
            if rec[what] != "":
                rows.append((seed, int(rec["step"]), what, rec[what]))
    if not rows:
        raise EmptyResultError(f"bundle {bundle} holds no {what!r} values for {method}")
    rows.sort(key=lambda r: (r[0], r[1]))
    out_path = Path(out_path) if out_path else bundle / f"export_{method}_{what}.csv"
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "step", "series", "value"])
        w.writerows(rows)
    log.info("wrote %d rows to %s", len(rows), out_path)
    return EXIT_OK


# argument parsing

def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--seed expects an int or comma list, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lurlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--seed", type=_parse_seeds, help="seed or comma-separated seeds")
        p.add_argument("--method", help="unlearning method (comma list allowed for unlearn)")
        p.add_argument("--alpha", type=float, help="inner step size")
        p.add_argument("--mode", choices=("exact", "first_order"), help="LUR gradient mode")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    common(sub.add_parser("gen-data", help="write blob train/test CSVs"))
    common(sub.add_parser("train", help="pretrain the original model on the full training set"))
    p = common(sub.add_parser("unlearn", help="run unlearning over the seed list"))
    p.add_argument("--model", help="model file (default <out>/model.json)")
    common(sub.add_parser("verify", help="numerical checks of the expansion identities"))
    p = common(sub.add_parser("sweep-alpha", help="Avg. Gap versus alpha"))
    p.add_argument("--model", help="model file (default <out>/model.json, else trained in memory)")
    p = common(sub.add_parser("export", help="long-format CSV of one trace series"))
    p.add_argument("--bundle", help="results directory written by unlearn (default <out>)")
    p.add_argument("--series", default="cosine", help=f"one of {', '.join(SERIES)}")
    p.add_argument("--output", help="output CSV path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    methods = None
    method = args.method
    if method and "," in method:
        methods = [m.strip() for m in method.split(",") if m.strip()]
        method = methods[0]
    overrides = {"out_dir": args.out, "method": method, "alpha": args.alpha, "lur_mode": args.mode}
    # --seed feeds the data draw for gen-data, the init for train, the seed list otherwise
    if args.seed is not None:
        seed_key = {"gen-data": "data_seed", "train": "train_seed"}.get(args.command, "seeds")
        if seed_key != "seeds":
            if len(args.seed) != 1:
                log.error("%s takes a single --seed", args.command)
                return EXIT_VALIDATION
            overrides[seed_key] = args.seed[0]
        else:
            overrides["seeds"] = args.seed
    try:
        if methods:
            bad = [m for m in methods if m not in METHODS]
            if bad:
                raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        cfg = load_config(args.config, overrides)
        if args.command == "gen-data":
            return cmd_gen_data(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "unlearn":
            return cmd_unlearn(cfg, args.model, methods)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "sweep-alpha":
            return cmd_sweep_alpha(cfg, args.model)
        if args.command == "export":
            return cmd_trace_export(args.bundle or cfg["out_dir"], args.series, method, args.output)
    except (ConfigError, DomainError, ParseError, EmptyResultError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except Exception:  # pragma: no cover - surfaced for debugging
        traceback.print_exc()
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
