"""Command-line front end: ``stochrobust simulate|estimate|optimize|replay``.

Every command writes its outputs plus ``manifest.json`` into ``--out``.
Outputs are staged in a temporary directory and moved into place only when
the command succeeds, so a failed run leaves nothing behind.  ``replay``
re-executes a manifest; numeric outputs do not depend on ``--jobs``.
"""

import argparse
import datetime
import json
import math
import os
import shutil
import sys
import tempfile

import numpy as np

from . import __version__
from .builtins import BUILTIN_FORMULAS, BUILTINS
from .errors import ModelError, StochRobustError
from .model import model_hash, parse_model
from .optimize import OptimizerConfig, Param, SearchSpace, gp_ucb_optimize
from .sim import SimConfig, default_jobs, map_ensemble, write_trajectory_csv
from .stats import correlation, estimate_many
from .stl import parse_formula

SEED_ENV = "STOCHROBUST_SEED"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------


def _number(text):
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"not a number: {text!r}") from None


def _assignments(items, what):
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise UsageError(f"{what} must look like name=value, got {item!r}")
        out[name.strip()] = _number(value)
    return out


def _range(text, what, with_step):
    name, sep, spec = text.partition("=")
    parts = spec.split(":")
    if not sep or len(parts) != (3 if with_step else 2):
        form = "name=lo:hi:step" if with_step else "name=lo:hi"
        raise UsageError(f"{what} must look like {form}, got {text!r}")
    nums = [_number(p) for p in parts]
    if not nums[0] < nums[1]:
        raise UsageError(f"{what} {text!r}: lower bound must be below upper bound")
    if with_step and not nums[2] > 0:
        raise UsageError(f"{what} {text!r}: step must be positive")
    return name.strip(), nums


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


# ---------------------------------------------------------------------------
# models and formulas
# ---------------------------------------------------------------------------


def _model_source(args):
    if args.builtin:
        return {"builtin": args.builtin}
    with open(args.model, encoding="utf-8") as fh:
        return {"path": os.path.abspath(args.model), "text": fh.read()}


def _build_model(source, overrides):
    if "builtin" in source:
        return BUILTINS[source["builtin"]](overrides)
    model = parse_model(source["text"])
    unknown = set(overrides) - set(model.parameters)
    if unknown:
        raise UsageError(f"unknown model parameters {sorted(unknown)}")
    return model.with_parameters(overrides) if overrides else model


def _model_factory(source, overrides):
    def factory(params):
        return _build_model(source, {**overrides, **params})

    return factory


def _formula_source(args, source):
    if args.formula is not None:
        return args.formula, {}
    if args.formula_file is not None:
        with open(args.formula_file, encoding="utf-8") as fh:
            return fh.read().strip(), {}
    if "builtin" in source:
        text, params = BUILTIN_FORMULAS[source["builtin"]]
        return text, dict(params)
    raise UsageError("a formula is required (--formula or --formula-file)")


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_histogram(hist, path):
    edges = np.asarray(hist.edges)
    data = np.column_stack([edges[:-1], edges[1:], hist.counts])
    np.savetxt(path, data, delimiter=",", header="lo,hi,count", comments="", fmt=["%.17g", "%.17g", "%d"])


def _write_long_csv(trajectories, path, variables):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("run,t,var,value\n")
        for run, traj in enumerate(trajectories):
            for name in variables:
                block = np.column_stack([traj.times, traj[name]])
                np.savetxt(fh, block, fmt=f"{run},%.17g,{name},%.17g")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _run_simulate(cfg, out, jobs):
    source = cfg["model"]
    model = _build_model(source, cfg["set"])
    sim = SimConfig(cfg["t_end"], cfg["step"])
    trajectories = map_ensemble(model, sim, cfg["runs"], cfg["seed"], jobs=jobs)
    names = trajectories[0].names
    variables = cfg["vars"] or list(names)
    missing = set(variables) - set(names)
    if missing:
        raise UsageError(f"unknown variables {sorted(missing)}")
    if cfg["per_run"]:
        width = max(5, len(str(cfg["runs"] - 1)))
        for i, traj in enumerate(trajectories):
            write_trajectory_csv(traj, os.path.join(out, f"run_{i:0{width}d}.csv"), cfg["seed"], model, i)
    else:
        _write_long_csv(trajectories, os.path.join(out, "trajectories.csv"), variables)
    return model


def _run_estimate(cfg, out, jobs):
    source = cfg["model"]
    text, fparams = cfg["formula"], cfg["formula_params"]
    sweep = cfg.get("sweep")
    base_model = _build_model(source, cfg["set"])
    if sweep is None:
        phi = parse_formula(text, fparams)
        sim = SimConfig(cfg["t_end"], cfg["step"])
        summary = estimate_many(base_model, [phi], cfg["runs"], cfg["seed"], sim, jobs, bins=cfg["bins"])[0]
        _dump_json(
            summary.to_dict(seed=cfg["seed"], model_hash=model_hash(base_model), formula=phi.render()),
            os.path.join(out, "summary.json"),
        )
        _write_histogram(summary.histogram, os.path.join(out, "histogram.csv"))
        np.savetxt(
            os.path.join(out, "robustness.csv"),
            np.column_stack([np.arange(summary.n), summary.samples]),
            delimiter=",", header="run,robustness", comments="", fmt=["%d", "%.17g"],
        )
        return base_model

    name, (lo, hi, step) = sweep
    values = [float(v) for v in np.arange(lo, hi + step * 1e-9, step)]
    rows = []
    if name in fparams:
        # formula parameter: monitor every threshold on the same trajectories
        formulas = [parse_formula(text, {**fparams, name: v}) for v in values]
        sim = SimConfig(cfg["t_end"], cfg["step"])
        summaries = estimate_many(base_model, formulas, cfg["runs"], cfg["seed"], sim, jobs, bins=cfg["bins"])
    else:
        phi = parse_formula(text, fparams)
        sim = SimConfig(cfg["t_end"], cfg["step"])
        summaries = []
        for v in values:
            model = _build_model(source, {**cfg["set"], name: v})
            summaries.append(estimate_many(model, [phi], cfg["runs"], cfg["seed"], sim, jobs, bins=cfg["bins"])[0])
    for v, s in zip(values, summaries):
        rows.append([v, s.p_hat, s.mean_rob, s.cond_pos, s.cond_neg, s.zero_count])
    with open(os.path.join(out, "sweep.csv"), "w", encoding="utf-8") as fh:
        fh.write(f"{name},p_hat,mean_rob,cond_pos,cond_neg,zero_count\n")
        for row in rows:
            fh.write(",".join("" if x is None else repr(float(x)) if not isinstance(x, int) else str(x) for x in row) + "\n")
    ps = [s.p_hat for s in summaries]
    ms = [s.mean_rob for s in summaries]
    try:
        corr = correlation(ps, ms)
    except ValueError:
        corr = None
    _dump_json(
        {
            "parameter": name,
            "values": values,
            "correlation_p_hat_mean_rob": corr,
            "summaries": [s.to_dict() for s in summaries],
            "seed": cfg["seed"],
            "model_hash": model_hash(base_model),
            "formula": text,
            "formula_params": fparams,
        },
        os.path.join(out, "sweep.json"),
    )
    if corr is not None:
        print(f"corr(p_hat, mean_rob) = {corr:.4f}")
    return base_model


def _run_optimize(cfg, out, jobs):
    source = cfg["model"]
    text, fparams = cfg["formula"], cfg["formula_params"]
    base_model = _build_model(source, cfg["set"])
    params = [Param(name, lo, hi, "formula" if name in fparams else "model") for name, (lo, hi) in cfg["vary"]]
    space = SearchSpace(params)
    opt = OptimizerConfig(**cfg["optimizer"], jobs=jobs)
    model = _model_factory(source, cfg["set"]) if "builtin" in source else base_model
    sim = SimConfig(cfg["t_end"], cfg["step"])
    result = gp_ucb_optimize(model, (text, fparams), space, opt, cfg["seed"], sim)
    _dump_json(
        {**result.to_dict(), "seed": cfg["seed"], "model_hash": model_hash(base_model), "formula": text},
        os.path.join(out, "result.json"),
    )
    result.write_trace(os.path.join(out, "trace.jsonl"))
    return base_model


RUNNERS = {"simulate": _run_simulate, "estimate": _run_estimate, "optimize": _run_optimize}


def _execute(cfg, out, jobs):
    """Run ``cfg`` into ``out``; stage outputs and move them into place on success."""
    created = not os.path.isdir(out)
    os.makedirs(out, exist_ok=True)
    stage = tempfile.mkdtemp(prefix=".partial-", dir=out)
    ok = False
    try:
        model = RUNNERS[cfg["command"]](cfg, stage, jobs)
        manifest = {
            "command": cfg["command"],
            "config": cfg,
            "tool_version": __version__,
            "model_hash": model_hash(model),
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }
        _dump_json(manifest, os.path.join(stage, "manifest.json"))
        for name in sorted(os.listdir(stage)):
            os.replace(os.path.join(stage, name), os.path.join(out, name))
        ok = True
    finally:
        shutil.rmtree(stage, ignore_errors=True)
        if created and not ok and not os.listdir(out):
            os.rmdir(out)


def _common_config(args):
    source = _model_source(args)
    cfg = {
        "model": source,
        "set": _assignments(args.set, "--set"),
        "seed": _seed(args),
        "step": args.step,
        "t_end": args.t_end,
        "runs": args.runs,
    }
    if "builtin" in source:
        # fail early on bad overrides
        _build_model(source, cfg["set"])
    return cfg


def _check_model_parameter(source, overrides, name, value):
    try:
        model = _build_model(source, {**overrides, name: value})
    except ModelError:
        model = None
    if model is None or ("builtin" not in source and name not in model.parameters):
        raise UsageError(f"unknown parameter {name!r}: neither a formula nor a model parameter")


def _formula_config(args, cfg):
    text, params = _formula_source(args, cfg["model"])
    params.update(_assignments(args.param, "--param"))
    parse_formula(text, params)  # report syntax errors before simulating
    cfg["formula"] = text
    cfg["formula_params"] = params


def build_config(args):
    """Translate parsed arguments into a JSON-serialisable run configuration."""
    cfg = _common_config(args)
    cfg["command"] = args.command
    if args.command == "simulate":
        if args.t_end is None:
            raise UsageError("simulate needs --t-end")
        cfg["per_run"] = args.per_run
        cfg["vars"] = args.vars.split(",") if args.vars else None
    elif args.command == "estimate":
        if args.runs < 2:
            raise UsageError("estimate needs --runs of at least 2")
        _formula_config(args, cfg)
        cfg["bins"] = args.bins
        cfg["sweep"] = list(_range(args.sweep, "--sweep", True)) if args.sweep else None
    elif args.command == "optimize":
        _formula_config(args, cfg)
        if not args.vary:
            raise UsageError("optimize needs at least one --vary name=lo:hi")
        cfg["vary"] = [list(_range(v, "--vary", False)) for v in args.vary]
        names = [v[0] for v in cfg["vary"]]
        if len(set(names)) != len(names):
            raise UsageError("each parameter may be varied only once")
        for name, (lo, _) in cfg["vary"]:
            if name not in cfg["formula_params"]:
                _check_model_parameter(cfg["model"], cfg["set"], name, lo)
        if args.alpha is not None and not args.alpha < 0:
            raise UsageError("--alpha must be negative")
        if not 0 <= args.q <= 1:
            raise UsageError("--q must lie in [0, 1]")
        cfg["optimizer"] = {
            "n_initial": args.n_initial if args.n_initial else (25 if all(n in cfg["formula_params"] for n in names) else 30),
            "initial_design": "grid" if all(n in cfg["formula_params"] for n in names) else "random",
            "grid_size": args.grid_size,
            "beta": args.beta,
            "beta_scale": args.beta_scale,
            "runs": args.runs,
            "q": args.q,
            "alpha": args.alpha,
            "max_resamplings": args.max_resamplings,
            "noise": args.noise,
            "max_evaluations": args.max_evaluations,
        }
    return cfg


def _add_common(p, runs_default):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", choices=sorted(BUILTINS), help="builtin case-study model")
    src.add_argument("--model", help="model description file (text grammar or JSON)")
    p.add_argument("--set", action="append", metavar="NAME=VALUE", help="model parameter override (repeatable)")
    p.add_argument("--t-end", type=_positive_float, help="simulation horizon (default: formula depth)")
    p.add_argument("--step", type=_positive_float, default=1.0, help="RK4 step for hybrid models")
    p.add_argument("--runs", type=_positive_int, default=runs_default, help="trajectories per estimate")
    p.add_argument("--seed", type=int, help=f"master seed (fallback: ${SEED_ENV}, then 0)")
    p.add_argument("--jobs", type=_positive_int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--out", required=True, help="output directory")


def _add_formula(p):
    f = p.add_mutually_exclusive_group()
    f.add_argument("--formula", help="STL formula text (default: the builtin model's formula)")
    f.add_argument("--formula-file", help="file holding the formula text")
    p.add_argument("--param", action="append", metavar="NAME=VALUE", help="formula parameter (repeatable)")


def make_parser():
    parser = argparse.ArgumentParser(prog="stochrobust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate an ensemble and write trajectories")
    _add_common(p, 1)
    p.add_argument("--per-run", action="store_true", help="one CSV (plus JSON sidecar) per run")
    p.add_argument("--vars", help="comma-separated variables for the long CSV (default: all)")

    p = sub.add_parser("estimate", help="estimate the robustness distribution of a formula")
    _add_common(p, 1000)
    _add_formula(p)
    p.add_argument("--bins", type=_positive_int, default=50, help="histogram bins")
    p.add_argument("--sweep", metavar="NAME=LO:HI:STEP", help="repeat the estimate over a parameter range")

    p = sub.add_parser("optimize", help="GP-UCB search maximising penalized average robustness")
    _add_common(p, 100)
    _add_formula(p)
    p.add_argument("--vary", action="append", metavar="NAME=LO:HI", help="search dimension (repeatable)")
    p.add_argument("--q", type=float, default=0.0, help="probability threshold")
    p.add_argument("--alpha", type=float, help="penalty weight (< 0; default derived from the initial design)")
    p.add_argument("--n-initial", type=_positive_int, help="initial design size")
    p.add_argument("--grid-size", type=_positive_int, default=200)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--beta-scale", choices=("std", "variance"), default="std")
    p.add_argument("--max-resamplings", type=_positive_int, default=3)
    p.add_argument("--noise", choices=("fixed", "heteroscedastic"), default="fixed")
    p.add_argument("--max-evaluations", type=_positive_int, default=500, help="evaluation budget")

    p = sub.add_parser("replay", help="re-run a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: <manifest dir>/replay)")
    p.add_argument("--jobs", type=_positive_int, default=None)
    return parser


def _replay_config(path):
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    cfg = manifest["config"]
    source = cfg["model"]
    if "path" in source:
        with open(source["path"], encoding="utf-8") as fh:
            text = fh.read()
        if text != source["text"]:
            print(f"warning: {source['path']} changed since the manifest was written; using the recorded text",
                  file=sys.stderr)
    return cfg


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            cfg = _replay_config(args.manifest)
            out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.manifest)), "replay")
        else:
            cfg = build_config(args)
            out = args.out
        jobs = args.jobs or default_jobs()
        _execute(cfg, out, jobs)
    except UsageError as exc:
        parser.error(str(exc))
    except (StochRobustError, OSError, ValueError) as exc:
        print(f"stochrobust: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
