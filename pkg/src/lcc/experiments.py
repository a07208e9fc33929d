"""Reproducible end-to-end experiments used by the CLI and the
acceptance suite.

Every experiment resolves its config against the defaults below, runs
fully seeded, and returns a plain dict (JSON-ready) that embeds the
resolved config, so any results file can be re-derived from itself.
"""

from __future__ import annotations

import copy
from dataclasses import replace

import numpy as np

from .coding import Codebook, CodingConfig, encode_matrix, matrix_to_codes
from .cover import build_cover, verify_bounds
from .data import Dataset, SwissRollSpec, gen_swiss_roll, read_idx, split
from .diagnostics import SmoothnessSpec, locality_report
from .dictionary import DictLearnConfig, UNIT_NORM_MODE, init_codebook, learn, rectify_signs
from .supervised import (
    SmootherConfig,
    error_rate,
    kernel_smooth_batch,
    predict_batch,
    rmse,
    train_classifier,
    train_ridge,
)

EXPERIMENTS = ("swissroll", "swissroll-noisy", "mnist-subset", "cover-verify")

DEFAULTS: dict[str, dict] = {
    "swissroll": {
        "seed": 7,
        "n_unlabeled": 10000,
        "n_labeled": 500,
        "n_validation": 500,
        "n_test": 2000,
        "noise_dims": 0,
        "codebook_size": 128,
        "mu_grid": [0.01, 0.03, 0.1, 0.3, 1.0],
        "beta_grid": [0.1, 0.5, 2.5, 12.0, 60.0],
        "lambda_grid": [1e-5, 1e-3, 1e-1],
        "k_grid": [5, 10, 20, 40],
        "learn_mu": 0.1,
        "learn_beta": 2.5,
        "learn_iters": 10,
        "lambda_anchor": 1e-6,
        "coding_tol": 1e-6,
        "coding_max_iter": 50000,
        "methods": ["sparse-fixed", "lcc-fixed", "sparse-learned", "lcc-learned",
                    "kernel-smoothing"],
        "locality_stats": True,
    },
    "mnist-subset": {
        "seed": 7,
        "train_images": "data/train-images-idx3-ubyte",
        "train_labels": "data/train-labels-idx1-ubyte",
        "test_images": "data/t10k-images-idx3-ubyte",
        "test_labels": "data/t10k-labels-idx1-ubyte",
        "n_train": 10000,
        "n_validation": 1000,
        "n_test": 2000,
        "n_tune": 3000,
        "codebook_size": 512,
        "sparse_beta": 0.15,
        "mu_grid": [0.03, 0.1, 0.3, 1.0, 3.0],
        "lambda_grid": [0.1, 1.0, 10.0],
        "loss": "squared_hinge",
        "classifier_tol": 1e-3,
        "classifier_max_iter": 20000,
        "learn_iters": 8,
        "coding_tol": 1e-6,
        "coding_max_iter": 50000,
    },
    "cover-verify": {
        "seed": 7,
        "n_points": 2000,
        "epsilons": [0.6, 0.3, 0.15],
        "m": 1,
        "alpha": 1.0,
        "beta": 1.0,
        "p": 1.0,
    },
}
DEFAULTS["swissroll-noisy"] = dict(
    DEFAULTS["swissroll"],
    noise_dims=253,
    mu_grid=[0.003, 0.01, 0.03, 0.1, 0.3],
    learn_mu=0.03,
    methods=["lcc-fixed", "lcc-learned", "kernel-smoothing"],
    locality_stats=False,
)


def resolve_config(experiment: str, overrides: dict | None = None) -> dict:
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    config = copy.deepcopy(DEFAULTS[experiment])
    for key, value in (overrides or {}).items():
        if key == "experiment":
            continue
        if key not in config:
            raise ValueError(f"unknown config key {key!r} for experiment {experiment}")
        config[key] = value
    config["experiment"] = experiment
    return config


def run_experiment(config: dict, verbose: bool = False) -> dict:
    experiment = config.get("experiment")
    resolved = resolve_config(experiment, {k: v for k, v in config.items() if k != "experiment"})
    if experiment in ("swissroll", "swissroll-noisy"):
        return _run_swissroll_family(resolved, verbose)
    if experiment == "mnist-subset":
        return _run_mnist_subset(resolved, verbose)
    return _run_cover_verify(resolved, verbose)


def _log(verbose, message):
    if verbose:
        print(message, flush=True)


def circle_dataset(n: int, seed: int) -> Dataset:
    """Uniform sample of the unit circle (intrinsic coordinate = angle)."""
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    points = np.column_stack([np.cos(theta), np.sin(theta)])
    return Dataset(points=points, intrinsic=theta[:, None])


def _coding(cfg, family, value) -> CodingConfig:
    base = CodingConfig(tol=cfg["coding_tol"], max_iter=cfg["coding_max_iter"])
    if family == "lcc":
        return replace(base, mu=float(value))
    return replace(base, beta_sparse=float(value))


def _tune_ridge_on_codebook(cfg, codebook, labeled, validation, family, grid, verbose):
    """Pick (penalty value, ridge lambda) by validation RMSE."""
    best = None
    for value in grid:
        coding = _coding(cfg, family, value)
        gamma_l = encode_matrix(labeled.points, codebook, coding)
        gamma_v = encode_matrix(validation.points, codebook, coding)
        for lam in cfg["lambda_grid"]:
            model = train_ridge(gamma_l, labeled.targets, lam)
            val = rmse(predict_batch(model, gamma_v), validation.targets)
            if best is None or val < best["val_rmse"]:
                best = {
                    "value": float(value),
                    "lambda": float(lam),
                    "val_rmse": val,
                    "avg_support": float(np.mean(np.count_nonzero(gamma_v, axis=1))),
                }
        _log(verbose, f"  {family} value={value:g}: best-so-far val rmse {best['val_rmse']:.4f}")
    return best


def _test_rmse(cfg, codebook, labeled, test, family, tuned):
    coding = _coding(cfg, family, tuned["value"])
    gamma_l = encode_matrix(labeled.points, codebook, coding)
    gamma_t = encode_matrix(test.points, codebook, coding)
    model = train_ridge(gamma_l, labeled.targets, tuned["lambda"])
    return rmse(predict_batch(model, gamma_t), test.targets)


def _swissroll_splits(cfg):
    total = cfg["n_unlabeled"] + cfg["n_labeled"] + cfg["n_validation"] + cfg["n_test"]
    spec = SwissRollSpec(n=total, noise_dims=cfg["noise_dims"], seed=cfg["seed"])
    full = gen_swiss_roll(spec)
    labval, unlabeled, test = split(full, cfg["n_labeled"] + cfg["n_validation"],
                                    cfg["n_test"], cfg["seed"] + 1)
    labeled, _, validation = split(labval, cfg["n_labeled"], cfg["n_validation"],
                                   cfg["seed"] + 2)
    return labeled, validation, unlabeled, test


def _dict_config(cfg, family, value, n_iters=None) -> DictLearnConfig:
    return DictLearnConfig(
        codebook_size=cfg["codebook_size"],
        coding=_coding(cfg, family, value),
        lambda_ridge=cfg["lambda_anchor"],
        n_iters=cfg["learn_iters"] if n_iters is None else n_iters,
        init="random-sample",
        seed=cfg["seed"] + 3,
    )


def _locality_stats(report):
    positives = report.positive_distances()
    return {
        "p95_positive_distance": float(np.percentile(positives, 95)) if positives.size else 0.0,
        "max_positive_distance": float(positives.max()) if positives.size else 0.0,
        "mean_distance": report.mean_distance,
        "n_positive": int(positives.size),
    }


def _run_swissroll_family(cfg, verbose) -> dict:
    labeled, validation, unlabeled, test = _swissroll_splits(cfg)
    methods = cfg["methods"]
    results: dict = {"experiment": cfg["experiment"], "config": cfg,
                     "rmse": {}, "tuned": {}, "history": {}}

    fixed = init_codebook(unlabeled, _dict_config(cfg, "lcc", cfg["learn_mu"], n_iters=0))
    codebooks = {}
    for method in methods:
        if method == "kernel-smoothing":
            continue
        family, variant = method.split("-")
        if variant == "fixed":
            codebooks[method] = fixed
        else:
            value = cfg["learn_mu"] if family == "lcc" else cfg["learn_beta"]
            _log(verbose, f"learning codebook for {method} at value {value:g}")
            codebook, history = learn(unlabeled, _dict_config(cfg, family, value))
            codebooks[method] = codebook
            results["history"][method] = history

    for method in methods:
        if method == "kernel-smoothing":
            best_k, best_val = None, np.inf
            for k in cfg["k_grid"]:
                val = rmse(kernel_smooth_batch(labeled, validation.points, SmootherConfig(k)),
                           validation.targets)
                if val < best_val:
                    best_k, best_val = int(k), val
            results["tuned"][method] = {"k": best_k, "val_rmse": best_val}
            results["rmse"][method] = rmse(
                kernel_smooth_batch(labeled, test.points, SmootherConfig(best_k)),
                test.targets)
            _log(verbose, f"{method}: k={best_k} test rmse {results['rmse'][method]:.4f}")
            continue
        family = method.split("-")[0]
        grid = cfg["mu_grid"] if family == "lcc" else cfg["beta_grid"]
        _log(verbose, f"tuning {method}")
        tuned = _tune_ridge_on_codebook(cfg, codebooks[method], labeled, validation,
                                        family, grid, verbose)
        results["tuned"][method] = tuned
        results["rmse"][method] = _test_rmse(cfg, codebooks[method], labeled, test,
                                             family, tuned)
        _log(verbose, f"{method}: value={tuned['value']:g} test rmse {results['rmse'][method]:.4f}")

    if cfg["locality_stats"] and "lcc-fixed" in methods and "sparse-fixed" in methods:
        results["locality"] = _swissroll_locality(cfg, fixed, test,
                                                  results["tuned"]["lcc-fixed"], verbose)
    return results


def _swissroll_locality(cfg, codebook, test, lcc_tuned, verbose) -> dict:
    """Sign/distance stats on the fixed codebook: tuned locality encoder
    vs plain sparse coding at the closest matching support size."""
    lcc_gamma = encode_matrix(test.points, codebook,
                              _coding(cfg, "lcc", lcc_tuned["value"]))
    lcc_support = float(np.mean(np.count_nonzero(lcc_gamma, axis=1)))
    matched_beta, matched_gamma, best_gap = None, None, np.inf
    for beta in cfg["beta_grid"]:
        gamma = encode_matrix(test.points, codebook, _coding(cfg, "sparse", beta))
        gap = abs(float(np.mean(np.count_nonzero(gamma, axis=1))) - lcc_support)
        if gap < best_gap:
            matched_beta, matched_gamma, best_gap = float(beta), gamma, gap
    lcc_stats = _locality_stats(locality_report(test, codebook, lcc_gamma))
    sparse_stats = _locality_stats(locality_report(test, codebook, matched_gamma))
    lcc_stats["avg_support"] = lcc_support
    sparse_stats["avg_support"] = float(np.mean(np.count_nonzero(matched_gamma, axis=1)))
    _log(verbose, f"locality: lcc p95 {lcc_stats['p95_positive_distance']:.3f} vs "
                  f"sparse p95 {sparse_stats['p95_positive_distance']:.3f} "
                  f"(mean distance {lcc_stats['mean_distance']:.3f})")
    return {"lcc": lcc_stats, "sparse": sparse_stats, "matched_beta": matched_beta}


def _run_mnist_subset(cfg, verbose) -> dict:
    train_full = read_idx(cfg["train_images"], cfg["train_labels"])
    test_full = read_idx(cfg["test_images"], cfg["test_labels"])
    rng = np.random.default_rng(cfg["seed"])
    train = train_full.subset(rng.choice(train_full.n, size=cfg["n_train"], replace=False))
    test = test_full.subset(rng.choice(test_full.n, size=cfg["n_test"], replace=False))
    fit, _, validation = split(train, cfg["n_train"] - cfg["n_validation"],
                               cfg["n_validation"], cfg["seed"] + 1)

    _log(verbose, f"learning unit-norm sparse codebook |C|={cfg['codebook_size']}")
    dict_cfg = DictLearnConfig(
        codebook_size=cfg["codebook_size"],
        coding=CodingConfig(beta_sparse=cfg["sparse_beta"], tol=cfg["coding_tol"],
                            max_iter=cfg["coding_max_iter"]),
        lambda_ridge=0.0,
        n_iters=cfg["learn_iters"],
        init="random-sample",
        seed=cfg["seed"] + 2,
        mode=UNIT_NORM_MODE,
    )
    codebook, history = learn(train, dict_cfg)
    sparse_coding = dict_cfg.coding
    train_sparse = encode_matrix(train.points, codebook, sparse_coding)
    codebook, _ = rectify_signs(codebook, matrix_to_codes(train_sparse))

    ordering = {"fit": fit, "validation": validation, "test": test}
    _log(verbose, "tuning locality weight for the coding step")
    tune_idx = np.random.default_rng(cfg["seed"] + 3).choice(
        fit.n, size=min(cfg["n_tune"], fit.n), replace=False)
    tune_fit = fit.subset(tune_idx)
    best_mu, best_err = None, np.inf
    for mu in cfg["mu_grid"]:
        coding = CodingConfig(mu=mu, tol=cfg["coding_tol"], max_iter=cfg["coding_max_iter"])
        gamma_fit = encode_matrix(tune_fit.points, codebook, coding)
        gamma_val = encode_matrix(validation.points, codebook, coding)
        err = _best_classifier_error(cfg, gamma_fit, tune_fit.targets,
                                     gamma_val, validation.targets)[1]
        _log(verbose, f"  mu={mu:g}: validation error {err:.4f}")
        if err < best_err:
            best_mu, best_err = float(mu), err

    features: dict[str, dict] = {}
    lcc_coding = CodingConfig(mu=best_mu, tol=cfg["coding_tol"], max_iter=cfg["coding_max_iter"])
    for name in ("raw", "sparse", "lcc"):
        if name == "raw":
            feats = {k: ds.points for k, ds in ordering.items()}
        else:
            coding = sparse_coding if name == "sparse" else lcc_coding
            feats = {k: encode_matrix(ds.points, codebook, coding)
                     for k, ds in ordering.items()}
        features[name] = feats

    errors, tuned = {}, {}
    for name, feats in features.items():
        (lam, _), model = _best_classifier_error(
            cfg, feats["fit"], fit.targets, feats["validation"], validation.targets,
            return_model=True)
        errors[name] = error_rate(predict_batch(model, feats["test"]), test.targets)
        tuned[name] = {"lambda": lam}
        _log(verbose, f"{name}: test error {errors[name]:.4f}")

    return {
        "experiment": "mnist-subset",
        "config": cfg,
        "error_rate": errors,
        "tuned": {"mu": best_mu, **tuned},
        "history": history,
    }


def _best_classifier_error(cfg, gamma_fit, y_fit, gamma_val, y_val, return_model=False):
    best = None
    for lam in cfg["lambda_grid"]:
        model = train_classifier(gamma_fit, y_fit, lam, loss=cfg["loss"],
                                 tol=cfg["classifier_tol"],
                                 max_iter=cfg["classifier_max_iter"])
        err = error_rate(predict_batch(model, gamma_val), y_val)
        if best is None or err < best[0][1]:
            best = ((float(lam), err), model)
    if return_model:
        return best
    return best[0]


def _run_cover_verify(cfg, verbose) -> dict:
    data = circle_dataset(cfg["n_points"], cfg["seed"])
    spec = SmoothnessSpec(alpha=cfg["alpha"], beta=cfg["beta"], p=cfg["p"])
    reports = []
    for eps in cfg["epsilons"]:
        cover = build_cover(data, float(eps), cfg["m"])
        report = verify_bounds(data, cover, spec)
        reports.append(report)
        _log(verbose, f"eps={eps:g}: Q={report['q_measured']:.5f} "
                      f"max||x||_g^2={report['max_coding_norm_sq']:.3f}")
    log_eps = np.log([r["epsilon"] for r in reports])
    log_q = np.log([r["q_measured"] for r in reports])
    slope = float(np.polyfit(log_eps, log_q, 1)[0])
    return {
        "experiment": "cover-verify",
        "config": cfg,
        "reports": reports,
        "q_slope": slope,
    }
