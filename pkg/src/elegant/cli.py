"""Command line entry points.

Five commands share one JSON config file plus a handful of override flags:

  train    fit the undefended and noise-augmented backbones, write weights
           and clean metrics
  certify  certify the smoothed model on the full test pool
  fcr      certify sampled test sets and report the certified fraction
  sweep    fcr across a noise-parameter axis, bucketed by budget thresholds
  attack   attack both models over a budget grid

Seed precedence: --seed flag, then the ELEGANT_SEED environment variable,
then the config file, then the default of 0.  Exit codes: 0 success,
2 bad configuration, 3 missing or malformed data/models, 4 certification
produced no certified test set at all.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .attack import DEFAULT_GRID, evaluate_under_attack
from .data import DataError, load_dataset, make_splits, normalize_attributes
from .fairness import BiasThreshold, bias_value, delta_eo, delta_sp, accuracy
from .fixtures import bundled_fixture_dir, make_german_like, make_small
from .gnn import TrainConfig, load_model, predict_classes, save_model, train
from .pipeline import CERTIFIED, PredictionCache, certify_and_predict, fcr_run
from .smoothing import SmoothingConfig

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Bad or inconsistent run configuration."""


DEFAULTS = {
    "dataset": {"fixture": "sbm-german", "fixture_seed": 0, "edges": None, "attributes": None, "labels": None},
    "backbone": "gcn",
    "seed": 0,
    "jobs": 1,
    "out": ".",
    "metric": "sp",
    "eta": {"mode": "relative", "multiplier": 1.25},
    "splits": {"train_frac": 0.3, "val_frac": 0.45, "vul_frac": 0.05},
    "train": {
        "lr": 5e-2,
        "epochs": 200,
        "weight_decay": 5e-4,
        "dropout": 0.6,
        "hidden": 64,
        "train_noise_flip_prob": 2e-4,
        "train_noise_std": 2e-5,
    },
    "smoothing": {
        "sigma": 0.25,
        "beta": 0.9,
        "n_outer": 200,
        "n_inner": 150,
        "alpha": 0.3,
        "k_max": 64,
        "strict": True,
    },
    "fcr": {"ratio": 0.9, "count": 100, "seeds": None},
    "sweep": {"axis": "sigma", "values": None, "thresholds": None},
    "attack": {"grid": [list(cell) for cell in DEFAULT_GRID], "eta_multiplier": 1.5},
}

SWEEP_VALUES = {
    "sigma": [5e-3, 5e-2, 5e-1, 5.0],
    "beta": [0.6, 0.7, 0.8, 0.9],
}
SWEEP_THRESHOLDS = {
    "sigma": [0.0, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1, 5e-1, 1.0, 5.0, 10.0],
    "beta": [0, 1, 2, 4, 8, 16],
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in out:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            for sub, sv in value.items():
                if sub not in out[key]:
                    raise ConfigError(f"unknown config key {key}.{sub}")
                out[key][sub] = sv
        else:
            out[key] = value
    return out


def build_config(path: str | None, args: argparse.Namespace) -> dict:
    """Merge defaults, config file, environment, and flags (last wins)."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = _merge(cfg, user)
    env_seed = os.environ.get("ELEGANT_SEED")
    if env_seed is not None:
        try:
            cfg["seed"] = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"ELEGANT_SEED must be an integer, got {env_seed!r}") from exc
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "jobs", None) is not None:
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be positive, got {args.jobs}")
        cfg["jobs"] = args.jobs
    if getattr(args, "out", None) is not None:
        cfg["out"] = args.out
    if getattr(args, "backbone", None) is not None:
        cfg["backbone"] = args.backbone
    if getattr(args, "metric", None) is not None:
        cfg["metric"] = args.metric
    if getattr(args, "eta", None) is not None:
        cfg["eta"] = {"mode": "absolute", "value": args.eta}
    if getattr(args, "eta_mult", None) is not None:
        cfg["eta"] = {"mode": "relative", "multiplier": args.eta_mult}
    if cfg["backbone"] not in ("gcn", "sage"):
        raise ConfigError(f"backbone must be gcn or sage, got {cfg['backbone']!r}")
    if cfg["metric"] not in ("sp", "eo"):
        raise ConfigError(f"metric must be sp or eo, got {cfg['metric']!r}")
    return cfg


def load_world(cfg: dict):
    """Dataset plus node splits for this config; attributes min-max scaled."""
    ds = cfg["dataset"]
    if "fixture" in ds and ds["fixture"]:
        name = ds["fixture"]
        fixture_seed = int(ds.get("fixture_seed", 0) or 0)
        if name == "sbm-german":
            g, X, labels = make_german_like(seed=fixture_seed)
        elif name == "sbm-small":
            g, X, labels = make_small(seed=fixture_seed or 7)
        elif name == "sbm200":
            root = bundled_fixture_dir("sbm200")
            g, X, labels = load_dataset(
                os.path.join(root, "edges.txt"),
                os.path.join(root, "features.csv"),
                os.path.join(root, "labels.csv"),
            )
        else:
            raise ConfigError(f"unknown fixture {name!r}")
    else:
        for key in ("edges", "attributes", "labels"):
            if not ds.get(key):
                raise ConfigError(f"dataset config needs {key!r} (or a fixture name)")
        g, X, labels = load_dataset(ds["edges"], ds["attributes"], ds["labels"])
    X = normalize_attributes(X)
    sp = cfg["splits"]
    split = make_splits(g, cfg["seed"], sp["train_frac"], sp["val_frac"], sp["vul_frac"])
    if not split.vulnerable:
        raise ConfigError(
            "vulnerable set is empty under this vul_frac and pool size; certification needs at least one node"
        )
    return g, X, labels, split


def _model_paths(cfg: dict):
    return os.path.join(cfg["out"], "model.bin"), os.path.join(cfg["out"], "model_noise.bin")


def load_models(cfg: dict):
    vanilla_path, noise_path = _model_paths(cfg)
    for p in (vanilla_path, noise_path):
        if not os.path.exists(p):
            raise DataError(f"missing model file {p}; run the train command first")
    return load_model(vanilla_path), load_model(noise_path)


def resolve_eta(cfg: dict, vanilla, g, X, labels, split, multiplier_override=None) -> BiasThreshold:
    """Absolute threshold straight from config, or relative to the vanilla bias."""
    spec = cfg["eta"]
    mode = spec.get("mode", "relative")
    if mode == "absolute":
        if "value" not in spec:
            raise ConfigError("absolute eta needs a 'value'")
        return BiasThreshold.absolute(float(spec["value"]))
    if mode != "relative":
        raise ConfigError(f"eta mode must be absolute or relative, got {mode!r}")
    mult = float(multiplier_override if multiplier_override is not None else spec.get("multiplier", 1.25))
    cls = predict_classes(vanilla, g, X)
    vanilla_bias = bias_value(cls, labels, split.test_pool, cfg["metric"])
    eta = BiasThreshold.relative(mult, vanilla_bias)
    logger.info("relative eta: %.4g * vanilla bias %.4g = %.4g", mult, vanilla_bias, eta.eta)
    return eta


def smoothing_config(cfg: dict, eta: BiasThreshold) -> SmoothingConfig:
    sm = cfg["smoothing"]
    return SmoothingConfig(
        sigma=float(sm["sigma"]),
        beta=float(sm["beta"]),
        n_outer=int(sm["n_outer"]),
        n_inner=int(sm["n_inner"]),
        alpha=float(sm["alpha"]),
        eta=float(eta.eta),
        metric=cfg["metric"],
        master_seed=int(cfg["seed"]),
        k_max=int(sm["k_max"]),
        strict=bool(sm["strict"]),
    )


def _nine_digits(obj):
    """Round every float to 9 significant digits for stable artifacts."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _nine_digits(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nine_digits(v) for v in obj]
    return obj


def write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_nine_digits(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt_cell(v):
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def write_csv(path: str, fieldnames, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fieldnames)
        for row in rows:
            w.writerow([_fmt_cell(row[k]) for k in fieldnames])


def cmd_train(cfg: dict) -> int:
    g, X, labels, split = load_world(cfg)
    tc = TrainConfig(seed=cfg["seed"], **cfg["train"])
    logger.info("training %s on %d nodes / %d edges", cfg["backbone"], g.n, g.n_edges)
    vanilla = train(g, X, labels, split, tc, backbone=cfg["backbone"])
    noise = train(g, X, labels, split, tc, backbone=cfg["backbone"], augment=True)
    os.makedirs(cfg["out"], exist_ok=True)
    vanilla_path, noise_path = _model_paths(cfg)
    save_model(vanilla, vanilla_path)
    save_model(noise, noise_path)

    pool = split.test_pool
    metrics = {}
    for name, model in (("vanilla", vanilla), ("noise_augmented", noise)):
        cls = predict_classes(model, g, X)
        metrics[name] = {
            "accuracy": accuracy(cls, labels.y, pool),
            "delta_sp": delta_sp(cls, labels.s, pool),
            "delta_eo": delta_eo(cls, labels.y, labels.s, pool),
        }
    metrics["meta"] = {
        "backbone": cfg["backbone"],
        "seed": cfg["seed"],
        "n": g.n,
        "edges": g.n_edges,
        "split_sizes": {
            "train": len(split.train),
            "validation": len(split.validation),
            "test_pool": len(split.test_pool),
            "vulnerable": len(split.vulnerable),
        },
        "evaluated_on": "test_pool, clean data",
    }
    write_json(os.path.join(cfg["out"], "metrics.json"), metrics)
    logger.info(
        "clean pool metrics: vanilla acc %.3f / bias_sp %.3f, noise-augmented acc %.3f / bias_sp %.3f",
        metrics["vanilla"]["accuracy"],
        metrics["vanilla"]["delta_sp"],
        metrics["noise_augmented"]["accuracy"],
        metrics["noise_augmented"]["delta_sp"],
    )
    return 0


def cmd_certify(cfg: dict) -> int:
    g, X, labels, split = load_world(cfg)
    vanilla, noise = load_models(cfg)
    eta = resolve_eta(cfg, vanilla, g, X, labels, split)
    scfg = smoothing_config(cfg, eta)
    report = certify_and_predict(noise, g, X, labels, split, split.test_pool, scfg, jobs=cfg["jobs"], eta=eta)
    write_json(os.path.join(cfg["out"], "certify.json"), report.to_json_dict())
    logger.info("certification outcome: %s", report.outcome)
    return 0


def cmd_fcr(cfg: dict) -> int:
    g, X, labels, split = load_world(cfg)
    vanilla, noise = load_models(cfg)
    eta = resolve_eta(cfg, vanilla, g, X, labels, split)
    scfg = smoothing_config(cfg, eta)
    result = fcr_run(
        noise, g, X, labels, split, scfg, ratio=cfg["fcr"]["ratio"], count=cfg["fcr"]["count"], jobs=cfg["jobs"], eta=eta
    )
    payload = result.summary()
    payload["per_set"] = [
        {
            "outcome": r.outcome,
            "eps_A": None if r.budgets is None else r.budgets.eps_A,
            "eps_X": None if r.budgets is None else r.budgets.eps_X,
            "bias": r.selected_bias,
            "accuracy": r.accuracy,
            "n_outer_positive": r.n_outer_positive,
        }
        for r in result.reports
    ]
    payload["eta"] = {
        "value": eta.eta,
        "provenance": eta.provenance,
        "multiplier": eta.multiplier,
        "vanilla_bias": eta.vanilla_bias,
    }
    payload["config"] = result.reports[0].to_json_dict()["config"]
    payload["conventions"] = result.reports[0].to_json_dict()["conventions"]
    seeds = cfg["fcr"].get("seeds")
    if seeds:
        per_seed = []
        for s in seeds:
            alt = replace(scfg, master_seed=int(s))
            alt_result = fcr_run(
                noise, g, X, labels, split, alt, ratio=cfg["fcr"]["ratio"], count=cfg["fcr"]["count"], jobs=cfg["jobs"], eta=eta
            )
            per_seed.append(alt_result.fcr)
        payload["fcr_per_seed"] = per_seed
        payload["fcr_std_across_seeds"] = float(np.std(np.array(per_seed)))
    write_json(os.path.join(cfg["out"], "fcr.json"), payload)
    logger.info("fraction of certified test sets: %.4f", result.fcr)
    if result.fcr == 0.0:
        logger.error("no test set certified; treat the configuration as failed")
        return 4
    return 0


def threshold_fractions(budgets, thresholds, count) -> dict:
    """Fraction of sampled sets whose certified budget clears each threshold.

    Threshold zero counts every certified set; positive thresholds require a
    strictly larger budget, so along an ascending threshold grid the
    fractions can only stay flat or fall.
    """
    out = {}
    for t in thresholds:
        hits = len(budgets) if t == 0 else sum(1 for b in budgets if b > t)
        out[f"thr_{t:g}"] = hits / count
    return out


def cmd_sweep(cfg: dict, axis: str | None = None, values=None, threshold_grid=None) -> int:
    axis = axis or cfg["sweep"]["axis"]
    if axis not in ("sigma", "beta"):
        raise ConfigError(f"sweep axis must be sigma or beta, got {axis!r}")
    values = values if values is not None else (cfg["sweep"]["values"] or SWEEP_VALUES[axis])
    thresholds = threshold_grid if threshold_grid is not None else (cfg["sweep"]["thresholds"] or SWEEP_THRESHOLDS[axis])
    g, X, labels, split = load_world(cfg)
    vanilla, noise = load_models(cfg)
    eta = resolve_eta(cfg, vanilla, g, X, labels, split)
    base = smoothing_config(cfg, eta)
    rows = []
    for v in values:
        scfg = replace(base, **{axis: float(v)})
        result = fcr_run(
            noise, g, X, labels, split, scfg, ratio=cfg["fcr"]["ratio"], count=cfg["fcr"]["count"], jobs=cfg["jobs"], eta=eta
        )
        budgets = [
            (r.budgets.eps_X if axis == "sigma" else r.budgets.eps_A)
            for r in result.reports
            if r.outcome == CERTIFIED
        ]
        row = {axis: float(v)}
        row.update(threshold_fractions(budgets, thresholds, result.count))
        rows.append(row)
        logger.info("sweep %s=%g: fcr %.4f", axis, v, result.fcr)
    fields = [axis] + [f"thr_{t:g}" for t in thresholds]
    write_csv(os.path.join(cfg["out"], "sweep.csv"), fields, rows)
    return 0


def cmd_attack(cfg: dict) -> int:
    g, X, labels, split = load_world(cfg)
    vanilla, noise = load_models(cfg)
    eta = resolve_eta(cfg, vanilla, g, X, labels, split, multiplier_override=cfg["attack"].get("eta_multiplier"))
    scfg = smoothing_config(cfg, eta)
    grid = [tuple(cell) for cell in cfg["attack"]["grid"]]
    rows, meta = evaluate_under_attack(vanilla, noise, g, X, labels, split, grid, scfg, eta=eta, jobs=cfg["jobs"])
    fields = ["budget_edges", "budget_l2", "model", "accuracy", "delta_sp", "delta_eo", "outcome", "within_certified"]
    write_csv(os.path.join(cfg["out"], "attack.csv"), fields, rows)
    write_json(os.path.join(cfg["out"], "attack.json"), meta)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="master seed (overrides ELEGANT_SEED and the config)")
    p.add_argument("--jobs", type=int, help="worker threads for certification")
    p.add_argument("--out", help="artifact directory (default from config, '.')")
    p.add_argument("--backbone", choices=["gcn", "sage"], help="classifier architecture")
    p.add_argument("--metric", choices=["sp", "eo"], help="bias metric")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--eta", type=float, help="absolute bias threshold")
    group.add_argument("--eta-mult", type=float, dest="eta_mult", help="threshold = multiplier * vanilla bias")


def _csv_floats(text: str):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elegant", description="Certified fairness defense for graph node classifiers")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("train", "fit the undefended and noise-augmented backbones"),
        ("certify", "certify the smoothed model on the full test pool"),
        ("fcr", "certify sampled test sets and report the certified fraction"),
        ("sweep", "fcr across a noise-parameter axis"),
        ("attack", "attack both models over a budget grid"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        if name == "sweep":
            p.add_argument("--axis", choices=["sigma", "beta"], help="parameter to sweep")
            p.add_argument("--values", type=_csv_floats, help="comma-separated parameter values")
            p.add_argument("--thresholds", type=_csv_floats, help="comma-separated budget thresholds")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args.config, args)
        os.makedirs(cfg["out"], exist_ok=True)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "certify":
            return cmd_certify(cfg)
        if args.command == "fcr":
            return cmd_fcr(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, axis=getattr(args, "axis", None), values=getattr(args, "values", None), threshold_grid=getattr(args, "thresholds", None))
        if args.command == "attack":
            return cmd_attack(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
