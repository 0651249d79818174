"""Command-line interface: ``tagsysid run | score | generate``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import re
import shutil
import sys
import tempfile
from dataclasses import asdict, fields
from importlib import metadata
from pathlib import Path

import numpy as np

from .data import SYSTEMS, DatasetBundle, load_csv, make_benchmark, save_csv
from .exceptions import (
    DegenerateOutput,
    GrammarError,
    InsufficientData,
    NonFiniteSample,
    ParseError,
    UnknownSystem,
)
from .gp import GpConfig, run
from .grammar import BUILTIN_GRAMMARS, builtin_grammar, load_grammar
from .model import FittedModel, parse_equation
from .objectives import evaluate, quality

__all__ = ["main", "build_parser", "read_models"]

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4

PARETO_COLUMNS = ("model_id", "complexity", "rms_p", "rms_s", "bfr_p", "bfr_s", "pred_sse", "sim_sse")
HISTORY_COLUMNS = ("generation", "front_size", "best_rms_p", "best_rms_s", "best_bfr_p", "best_bfr_s",
                   "min_complexity", "max_complexity")

# flag name -> GpConfig field
_GP_FLAGS = {
    "pop": "population_size",
    "iters": "iterations",
    "max_adjunctions": "max_adjunctions",
    "pc": "p_crossover",
    "pm": "p_mutation",
    "seed": "rng_seed",
    "threads": "threads",
    "metric_form": "metric_form",
    "els_max_iter": "els_max_iterations",
    "els_tol": "els_tol",
}

logger = logging.getLogger("tagsysid")


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "numba", "scikit-learn"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


# -- parser ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tagsysid", description="TAG-guided GP system identification")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-generation progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evolve a Pareto front of models")
    r.add_argument("--config", type=Path, help="run.json of an earlier run; flags override it")
    r.add_argument("--grammar", help=f"one of {', '.join(BUILTIN_GRAMMARS)} or a grammar file")
    r.add_argument("--data-est", type=Path, help="estimation CSV")
    r.add_argument("--data-val", type=Path, help="fitness CSV (default: the estimation data)")
    r.add_argument("--data-test", type=Path, help="held-out CSV, scored into pareto_test.csv")
    r.add_argument("--pop", type=int)
    r.add_argument("--iters", type=int)
    r.add_argument("--max-adjunctions", type=int)
    r.add_argument("--pc", type=float)
    r.add_argument("--pm", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int, help="evaluation threads; >1 is not bit-reproducible")
    r.add_argument("--metric-form", choices=("paper", "conventional"))
    r.add_argument("--els-max-iter", type=int)
    r.add_argument("--els-tol", type=float)
    r.add_argument("--out", type=Path, help="output directory")

    s = sub.add_parser("score", help="print quality measures of saved models on a dataset")
    s.add_argument("models", type=Path, help="models.txt or a file with one equation per line")
    s.add_argument("dataset", type=Path)
    s.add_argument("--model-id", type=int, help="score only this model")
    s.add_argument("--n-transient", type=int)
    s.add_argument("--metric-form", choices=("paper", "conventional"), default="paper")

    g = sub.add_parser("generate", help="write a benchmark dataset")
    g.add_argument("system", help=f"one of {', '.join(SYSTEMS)}")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noise-std", type=float, help="override the system's noise level")
    g.add_argument("--role", choices=("estimation", "validation", "test"), default="estimation")
    g.add_argument("--out", type=Path, required=True)
    return p


# -- run --------------------------------------------------------------------------------

def resolve_config(args) -> dict:
    """Merge ``--config`` with explicit flags into a plain run description."""
    cfg = {"grammar": "narmax", "data": {}, "gp": asdict(GpConfig()), "out": "tagsysid-run"}
    if args.config is not None:
        try:
            saved = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        cfg["grammar"] = saved.get("grammar", cfg["grammar"])
        cfg["data"].update(saved.get("data", {}))
        unknown = set(saved.get("gp", {})) - {f.name for f in fields(GpConfig)}
        if unknown:
            raise ConfigError(f"unknown gp settings in config: {sorted(unknown)}")
        cfg["gp"].update(saved.get("gp", {}))
        cfg["out"] = saved.get("out", cfg["out"])
    if args.grammar is not None:
        cfg["grammar"] = args.grammar
    for role, value in (("estimation", args.data_est), ("validation", args.data_val), ("test", args.data_test)):
        if value is not None:
            cfg["data"][role] = str(value)
    for flag, name in _GP_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            cfg["gp"][name] = value
    if args.out is not None:
        cfg["out"] = str(args.out)
    if "estimation" not in cfg["data"]:
        raise ConfigError("an estimation dataset is required (--data-est)")
    try:
        GpConfig(**cfg["gp"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _load_grammar(spec: str):
    try:
        if spec in BUILTIN_GRAMMARS:
            return builtin_grammar(spec)
        return load_grammar(spec)
    except (OSError, GrammarError, ParseError) as exc:
        raise ConfigError(f"grammar {spec!r}: {exc}") from None


def _load_data(path, role):
    try:
        return load_csv(path, role=role)
    except (OSError, ParseError, NonFiniteSample, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _pareto_rows(members, data, form, refit_scores=False):
    rows = []
    for i, m in enumerate(members):
        if refit_scores:
            obj, q = evaluate(m.model, data, form=form)
        else:
            obj, q = m.fitness, m.scores
        rows.append([i, obj.complexity, *(_fmt(v) for v in (q.rms_p, q.rms_s, q.bfr_p, q.bfr_s,
                                                            obj.pred_sse, obj.sim_sse))])
    return rows


def cmd_run(args) -> int:
    try:
        cfg = resolve_config(args)
        grammar = _load_grammar(cfg["grammar"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        est = _load_data(cfg["data"]["estimation"], "estimation")
        val = _load_data(cfg["data"]["validation"], "validation") if "validation" in cfg["data"] else None
        test = _load_data(cfg["data"]["test"], "test") if "test" in cfg["data"] else None
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    gp = GpConfig(**cfg["gp"])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".tagsysid-", dir=out.parent))
    try:
        try:
            front = run(gp, grammar, DatasetBundle(est, val, test))
        except (InsufficientData, DegenerateOutput) as exc:
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        members = [m for m in front if m.model is not None and not m.fitness.failed]
        if not members:
            print("runtime error: every model on the final front failed", file=sys.stderr)
            return EXIT_RUNTIME

        _write_csv(staging / "pareto.csv", PARETO_COLUMNS, _pareto_rows(members, None, gp.metric_form))
        (staging / "models.txt").write_text(
            "".join(f"[{i}] {m.model.equation()}\n" for i, m in enumerate(members)), encoding="utf-8")
        _write_csv(staging / "fronts_history.csv", HISTORY_COLUMNS,
                   [[_fmt(row[c]) for c in HISTORY_COLUMNS] for row in front.history])
        if test is not None:
            _write_csv(staging / "pareto_test.csv", PARETO_COLUMNS,
                       _pareto_rows(members, test, gp.metric_form, refit_scores=True))
        record = {**cfg, "seed": gp.rng_seed, "versions": _versions(), "evaluations": front.evaluations}
        (staging / "run.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")

        out.mkdir(parents=True, exist_ok=True)
        for f in sorted(staging.iterdir()):
            f.replace(out / f.name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    print(f"{len(members)} models written to {out}")
    return EXIT_OK


# -- score ----------------------------------------------------------------------------

_MODEL_LINE = re.compile(r"^\s*(?:\[(\d+)\])?\s*(y_k\s*=.*)$")


def read_models(path) -> list[tuple[int, FittedModel]]:
    """Read ``[id] y_k = ...`` lines; ids default to the line order."""
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        m = _MODEL_LINE.match(line)
        if not m:
            raise ParseError(f"line {lineno}: not a model equation", lineno)
        structure, coefs = parse_equation(m.group(2))
        idx = int(m.group(1)) if m.group(1) is not None else len(out)
        out.append((idx, FittedModel(structure, coefs)))
    if not out:
        raise ParseError("no models in file", 1)
    return out


def cmd_score(args) -> int:
    try:
        models = read_models(args.models)
    except (OSError, ParseError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.model_id is not None:
        models = [(i, fm) for i, fm in models if i == args.model_id]
        if not models:
            print(f"model error: no model with id {args.model_id}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        data = load_csv(args.dataset, n_transient=args.n_transient)
    except (OSError, ParseError, NonFiniteSample, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("model_id", "rms_p", "rms_s", "bfr_p", "bfr_s"))
    for i, fm in models:
        try:
            q = quality(fm, data, form=args.metric_form)
        except (DegenerateOutput, ValueError) as exc:
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        w.writerow([i, *(_fmt(v) for v in (q.rms_p, q.rms_s, q.bfr_p, q.bfr_s))])
    return EXIT_OK


# -- generate -----------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.n <= 0:
        print("config error: --n must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        data = make_benchmark(args.system, args.n, args.seed, noise_std=args.noise_std, role=args.role)
    except UnknownSystem as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(data, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"run": cmd_run, "score": cmd_score, "generate": cmd_generate}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
