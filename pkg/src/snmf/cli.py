"""Command-line front end.

Subcommands::

    snmf simulate   --noise 0.2 --seed 1 --out data/
    snmf fit        --mode snmf --rank 2 --alpha 0.1 --train data/train.csv --model-out model.json
    snmf transform  --model model.json --data data/test.csv --out coef.csv
    snmf evaluate   --model model.json --test data/test.csv
    snmf cv         --train data/train.csv --grid "{0,0.001,0.01,0.1}" --rank 2
    snmf repro-sim  --seeds 20 --out results/

Every command writes a JSON report (``--report``, with a default next to its
main output).  Errors print one line ``error: <Category>: <message>`` on
stderr and exit with status 1.  ``SNMF_LOG`` (error, info or debug) sets the
stderr log level.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import re
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GridParseError, InvalidConfig, SnmfError
from .evaluation import (
    HEADS,
    CvGrid,
    PipelineConfig,
    attach_head,
    auc,
    config_dict,
    grid_search_cv,
    stratified_split,
)
from .experiments import SimStudyConfig, format_table, study_grid, run_sim_study
from .factorization import ConvergenceConfig, fit_nmf, transform_nnls
from .io import (
    REPORT_SCHEMA,
    ModelFile,
    atomic_write,
    format_matrix,
    load_model,
    read_dataset,
    save_model,
    write_dataset,
    write_json,
)
from .numerics import RNG_NAME, RNG_VERSION
from .simulation import SimConfig, gen_simulation
from .supervised import SnmfHyper, fit_snmf, logreg_fit, predict_scores

log = logging.getLogger("snmf")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


# grid strings

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_RANGE = re.compile(rf"^({_NUMBER})\.\.({_NUMBER}):(log10|{_NUMBER})$")
_GRID_KEYS = ("alpha", "beta", "gamma", "rank")


def _parse_values(text: str, key: str) -> list[float]:
    text = text.strip()
    m = _RANGE.match(text)
    if m:
        lo, hi, step = float(m.group(1)), float(m.group(2)), m.group(3)
        if hi < lo:
            raise GridParseError(f"{key}: empty range {text!r}")
        if step == "log10":
            if lo <= 0:
                raise GridParseError(f"{key}: log10 range needs positive bounds, got {text!r}")
            e_lo, e_hi = math.log10(lo), math.log10(hi)
            if abs(e_lo - round(e_lo)) > 1e-9 or abs(e_hi - round(e_hi)) > 1e-9:
                raise GridParseError(f"{key}: log10 bounds must be powers of ten, got {text!r}")
            return [10.0 ** e for e in range(round(e_lo), round(e_hi) + 1)]
        step = float(step)
        if step <= 0:
            raise GridParseError(f"{key}: step must be > 0 in {text!r}")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return [lo + i * step for i in range(count)]
    if text.startswith("{") and text.endswith("}"):
        text = text[1:-1]
    parts = [p.strip() for p in text.split(",")]
    if not parts or any(not re.fullmatch(_NUMBER, p) for p in parts):
        raise GridParseError(f"{key}: cannot parse values {text!r}")
    return [float(p) for p in parts]


def parse_grid(spec: str, folds: int = 5, default_rank: int = 2) -> CvGrid:
    """Parse a grid string.

    ``"alpha=1e-2..1e2:log10;beta=0,0.1;gamma={0,1};rank=50..150:10"`` gives
    each key its own values; ``a..b:log10`` steps through powers of ten,
    ``a..b:s`` steps linearly by ``s``.  A bare list such as
    ``"{0,0.001,0.01,0.1}"`` is used for alpha, beta and gamma alike.  Keys
    left out default to ``{0}`` (rank: ``default_rank``).
    """
    spec = spec.strip()
    if not spec:
        raise GridParseError("empty grid string")
    values: dict[str, list[float]] = {}
    if "=" not in spec:
        shared = _parse_values(spec, "grid")
        values = {"alpha": shared, "beta": shared, "gamma": shared}
    else:
        for part in filter(None, (p.strip() for p in spec.split(";"))):
            key, sep, rhs = part.partition("=")
            key = key.strip()
            if not sep or key not in _GRID_KEYS:
                raise GridParseError(f"unknown grid entry {part!r}; keys are {', '.join(_GRID_KEYS)}")
            if key in values:
                raise GridParseError(f"{key} given twice")
            values[key] = _parse_values(rhs, key)
    ranks = values.get("rank", [default_rank])
    if any(r != int(r) or r < 1 for r in ranks):
        raise GridParseError(f"ranks must be positive integers, got {ranks}")
    for key in ("alpha", "beta", "gamma"):
        if any(v < 0 for v in values.get(key, [])):
            raise GridParseError(f"{key} values must be >= 0")
    try:
        return CvGrid(tuple(values.get("alpha", [0.0])), tuple(values.get("beta", [0.0])),
                      tuple(values.get("gamma", [0.0])), tuple(int(r) for r in ranks), folds)
    except InvalidConfig as exc:
        raise GridParseError(str(exc)) from exc


# shared helpers

def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(fit_conv=ConvergenceConfig(args.max_iter, args.tol), head=args.head,
                          head_beta=args.head_beta)


def _report(command: str, args, started: float, **body) -> dict:
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    doc = {
        "schema": REPORT_SCHEMA,
        "command": command,
        "version": __version__,
        "rng": f"{RNG_NAME}/{RNG_VERSION}",
        "flags": flags,
        "timing": {"elapsed_seconds": time.perf_counter() - started},
    }
    doc.update(body)
    return doc


def model_scores(model: ModelFile, X: np.ndarray, transform_conv: ConvergenceConfig) -> np.ndarray:
    """Classifier scores of samples X: coefficients on the stored basis, then u . w + b."""
    if model.classifier is None:
        raise InvalidConfig("model has no classifier (it was fit without labels)")
    return predict_scores(transform_nnls(X, model.V, transform_conv), model.classifier)[0]


def _transform_conv(settings: dict) -> ConvergenceConfig:
    return ConvergenceConfig(**settings["transform_conv"])


# commands

def cmd_simulate(args) -> int:
    started = time.perf_counter()
    overrides = {k: v for k, v in (("n_per_class", args.n_per_class), ("ambient_dim", args.ambient_dim))
                 if v is not None}
    cfg = SimConfig(noise=args.noise, seed=args.seed, **overrides)
    data = gen_simulation(cfg)
    plan = stratified_split(data.y, 0.5, args.seed)
    out = Path(args.out)
    write_dataset(out / "train.csv", data.X[plan.train_indices], data.y[plan.train_indices])
    write_dataset(out / "test.csv", data.X[plan.test_indices], data.y[plan.test_indices])
    report = _report(
        "simulate", args, started,
        config=asdict(cfg),
        noise_model="per-column Gaussian with the column mean and variance of U V, scaled by noise",
        files={"train": str(out / "train.csv"), "test": str(out / "test.csv")},
        rows={"train": len(plan.train_indices), "test": len(plan.test_indices)},
    )
    write_json(args.report or out / "simulate_report.json", report)
    return 0


def cmd_fit(args) -> int:
    started = time.perf_counter()
    data = read_dataset(args.train)
    cfg = _pipeline_config(args)
    hyper = SnmfHyper(args.alpha, args.beta, args.gamma, args.rank, args.scale_by_shape)
    n, m = data.X.shape
    if args.mode == "snmf":
        y = data.require_labels()
        model = fit_snmf(data.X, y, hyper, cfg.pgd, cfg.fit_conv, args.seed)
        U, V, joint = model.factors.U, model.factors.V, model.logreg
        trace = [t._asdict() for t in model.trace]
        totals, n_iter, converged, stalls = model.totals, model.n_iter, model.converged, model.stalls
        effective = model.effective
    else:
        y = data.y
        res = fit_nmf(data.X, args.rank, cfg.pgd, cfg.fit_conv, args.seed)
        U, V, joint = res.factors.U, res.factors.V, None
        trace = [{"total": t, "L_f": t} for t in res.trace]
        totals, n_iter, converged, stalls = res.trace, res.n_iter, res.converged, res.stalls
        effective = None

    if y is None:
        classifier = None
    elif args.mode == "snmf":
        classifier = attach_head(U, y, joint, hyper, cfg, args.seed)
    else:
        classifier = logreg_fit(U, y, cfg.head_beta, cfg.head_conv, args.seed, cfg.pgd)
    settings = {"transform_conv": asdict(cfg.transform_conv), "head_beta": cfg.head_beta,
                "pipeline": config_dict(cfg)}
    hyper_doc = {"raw": asdict(hyper), "effective": None if effective is None else asdict(effective),
                 "n": n, "m": m}
    model_file = ModelFile(args.mode, U, V, classifier, joint, hyper_doc, settings)
    save_model(args.model_out, model_file)

    metrics = {}
    if classifier is not None:
        metrics["train_auc"] = auc(model_scores(model_file, data.X, cfg.transform_conv), y)
        if joint is not None:
            metrics["train_auc_joint_on_fitted_U"] = auc(predict_scores(U, joint)[0], y)
    report = _report(
        "fit", args, started,
        hyper=hyper_doc, settings=settings, model=str(args.model_out),
        n_iter=n_iter, converged=converged, stalls=stalls,
        trace=trace, trace_non_increasing=bool(np.all(np.diff(totals) <= 0)),
        metrics=metrics,
    )
    write_json(args.report or Path(args.model_out).with_suffix(".report.json"), report)
    return 0


def cmd_transform(args) -> int:
    started = time.perf_counter()
    model = load_model(args.model)
    data = read_dataset(args.data)
    model.check_features(data.X, args.data)
    U = transform_nnls(data.X, model.V, _transform_conv(model.settings))
    atomic_write(args.out, format_matrix(U, "u"))
    report = _report("transform", args, started, rows=U.shape[0], rank=U.shape[1], out=str(args.out))
    write_json(args.report or Path(args.out).with_suffix(".report.json"), report)
    return 0


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    model = load_model(args.model)
    data = read_dataset(args.test)
    model.check_features(data.X, args.test)
    y = data.require_labels()
    scores = model_scores(model, data.X, _transform_conv(model.settings))
    body = {"metrics": {"auc": auc(scores, y)}, "n": int(y.size), "positives": int(y.sum())}
    if args.scores:
        body["scores"] = scores
    report = _report("evaluate", args, started, **body)
    write_json(args.report or Path(args.test).with_suffix(".eval.json"), report)
    return 0


def cmd_cv(args) -> int:
    started = time.perf_counter()
    data = read_dataset(args.train)
    y = data.require_labels()
    grid = parse_grid(args.grid, args.folds, args.rank)
    cfg = _pipeline_config(args)
    res = grid_search_cv(data.X, y, grid, cfg, args.seed, args.jobs, args.scale_by_shape)
    report = _report("cv", args, started, grid=asdict(grid), n_cells=grid.size,
                     best=res.best, table=res.table, pipeline=config_dict(cfg))
    write_json(args.report or Path(args.train).with_suffix(".cv.json"), report)
    return 0


def cmd_repro_sim(args) -> int:
    started = time.perf_counter()
    study = SimStudyConfig(seeds=tuple(range(args.seed0, args.seed0 + args.seeds)),
                           grid=study_grid(args.rank, args.folds), rank=args.rank, n_perm=args.n_perm)
    res = run_sim_study(study, args.jobs)
    out = Path(args.out)
    table = format_table(res["table"])
    atomic_write(out / "table.txt", table + "\n")
    report = _report("repro-sim", args, started, table=res["table"], runs=res["runs"],
                     study={"seeds": list(study.seeds), "noise_levels": list(study.noise_levels),
                            "grid": asdict(study.grid), "n_perm": study.n_perm,
                            "pipeline": config_dict(study.pipeline),
                            "cv_pipeline": config_dict(study.cv_pipeline)},
                     permutation_scheme="paired per-sample swap, two-sided, add-one")
    write_json(args.report or out / "repro_sim.json", report)
    print(table)
    return 0


# argument parsing

def _add_solver_flags(p) -> None:
    p.add_argument("--max-iter", type=int, default=500, help="outer iteration cap")
    p.add_argument("--tol", type=float, default=1e-6, help="relative objective change to stop at")
    p.add_argument("--head", choices=HEADS, default="auto",
                   help="classifier on the coefficients: joint (w, b), a refit logistic regression, "
                        "or auto (joint when alpha > 0)")
    p.add_argument("--head-beta", type=float, default=1e-2, help="ridge weight of a refit classifier")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snmf", description="Supervised nonnegative matrix factorization.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a two-class synthetic dataset split into train/test CSVs")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-per-class", type=int)
    p.add_argument("--ambient-dim", type=int)
    p.add_argument("--report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit NMF or supervised NMF and save the model")
    p.add_argument("--mode", choices=("nmf", "snmf"), default="snmf")
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--scale-by-shape", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--train", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("transform", help="coefficients of new samples on a saved basis")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("evaluate", help="AUC of a saved model on a labelled dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--scores", action="store_true", help="include per-sample scores in the report")
    p.add_argument("--report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cv", help="cross-validated grid search")
    p.add_argument("--train", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--rank", type=int, default=2, help="rank when the grid gives none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--scale-by-shape", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--report")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("repro-sim", help="NMF versus supervised NMF on simulated data across noise levels")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--seed0", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--n-perm", type=int, default=999)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--report")
    p.set_defaults(func=cmd_repro_sim)
    return parser


def _configure_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("SNMF_LOG", "error").lower(), logging.ERROR)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SnmfError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - keep the one-line contract for unexpected failures
        log.debug("unexpected failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
