"""Command-line entry point: ``fidudeconv fit | simulate | validate | synth-surgery``.

Exit codes: 0 success, 1 a validation check failed, 2 bad input (files,
flags, data), 3 numerical failure inside the sampler or special functions.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .gibbs import GibbsConfig, InfeasibleStateError, chain_diagnostics, rects_at, run_chain, write_rects_csv
from .inference import QUANTILE_CONVENTION, estimate_cdf, min_draws
from .obsmodel import Dataset, Observation
from .specfun import ConvergenceError

__all__ = ["InputError", "describe", "ingest", "main", "synthetic_surgery"]

SEED_ENV = "FIDUDECONV_SEED"
# bump a schema number whenever the columns of that file change
SCHEMAS = {"estimate.csv": 1, "samples.csv": 1, "diagnostics.csv": 1, "rects.csv": 1, "report.csv": 1}

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(ValueError):
    """Unreadable or invalid input data or configuration."""


# ---------------------------------------------------------------------------
# input
# ---------------------------------------------------------------------------


def _parse_int(text, name, row, line):
    try:
        value = int(text.strip())
    except ValueError:
        raise InputError(f"line {line} (row {row}): {name}={text.strip()!r} is not an integer") from None
    return value


def ingest(path, model="binomial"):
    """Read a CSV with header ``m,x`` (binomial) or ``x`` (Poisson).

    Blank lines and lines starting with ``#`` are skipped.  Rows are numbered
    from 1 in file order and that order is kept.
    """
    if model not in ("binomial", "poisson"):
        raise InputError(f"unknown model {model!r}")
    try:
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    header = None
    obs = []
    row = 0
    for line_no, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        cells = [c.strip() for c in text.split(",")]
        if header is None:
            header = cells
            need = ("m", "x") if model == "binomial" else ("x",)
            missing = [c for c in need if c not in header]
            if missing:
                raise InputError(f"line {line_no}: header lacks column(s) {', '.join(missing)}")
            cols = {c: header.index(c) for c in need}
            continue
        row += 1
        if len(cells) != len(header):
            raise InputError(f"line {line_no} (row {row}): expected {len(header)} fields, found {len(cells)}")
        x = _parse_int(cells[cols["x"]], "x", row, line_no)
        m = _parse_int(cells[cols["m"]], "m", row, line_no) if model == "binomial" else None
        try:
            obs.append(Observation(x, m))
        except ValueError as exc:
            raise InputError(f"row {row} (line {line_no}): {exc}") from None
    if header is None or not obs:
        raise InputError(f"{path}: no data rows")
    return Dataset(model, tuple(obs))


def describe(data):
    zeros = int(np.sum(data.x == 0))
    out = {"model": data.model, "n": data.n, "zeros": zeros, "zero_fraction": round(zeros / data.n, 4)}
    if data.model == "binomial":
        out["m_min"] = int(data.m.min())
        out["m_max"] = int(data.m.max())
    return out


def synthetic_surgery(seed=0, n=844, n_zero=322, m_range=(1, 69)):
    """Synthetic stand-in for the intestinal-surgery satellite counts.

    Matches the published summary only: ``n`` patients, ``m`` between the
    range ends (both attained), exactly ``n_zero`` zero counts and nonzero
    proportions ``x/m`` spread roughly uniformly.  Not the real data.
    """
    from .rng import make_rng

    rng = make_rng(seed)
    m = rng.integers(m_range[0], m_range[1] + 1, size=n)
    m[rng.choice(n, 2, replace=False)] = m_range
    x = rng.integers(1, m + 1)
    x[rng.choice(n, n_zero, replace=False)] = 0
    return Dataset.binomial(x, m)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _num(v):
    return repr(float(v))


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(r) + "\n")


def _write_manifest(outdir, command, config, seed, started, inputs, outputs):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "timing": {"started_unix": round(started, 3), "elapsed_seconds": round(time.time() - started, 3)},
        "inputs": inputs,
        "outputs": {name: {"schema_version": SCHEMAS.get(name, 1), "sha256": _sha256(os.path.join(outdir, name))}
                    for name in outputs},
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_seed(flag, fallback=None):
    if flag is not None:
        return flag
    if fallback is not None:
        return fallback
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError(f"{SEED_ENV}={env!r} is not an integer") from None


def _grid(args, data):
    given = (args.grid_start, args.grid_end, args.grid_step)
    if all(v is None for v in given):
        if data.model == "poisson":
            from .simulate import default_grid

            return default_grid(data)
        given = (0.01, 0.99, 0.01)
    start, end, step = (d if v is None else v for v, d in zip(given, (0.01, 0.99, 0.01)))
    if not step > 0 or end < start:
        raise InputError("grid needs grid-step > 0 and grid-end >= grid-start")
    count = int(np.floor((end - start) / step + 1e-9)) + 1
    # rounding keeps decimal grids such as 0.01..0.99 free of representation noise
    return np.round(start + step * np.arange(count), 12)


def _parse_rects(spec, n, sweeps):
    try:
        i, sweep = (int(v) for v in spec.split(":"))
    except ValueError:
        raise InputError(f"--emit-rects expects i:sweep, got {spec!r}") from None
    if not 1 <= i <= n:
        raise InputError(f"--emit-rects observation {i} outside 1..{n}")
    if not 1 <= sweep <= sweeps:
        raise InputError(f"--emit-rects sweep {sweep} outside 1..{sweeps}")
    return i, sweep


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_fit(args):
    started = time.time()
    data = ingest(args.data, args.model)
    summary = describe(data)
    print(f"ingested {summary}", file=sys.stderr)
    seed = _resolve_seed(args.seed)
    grid = _grid(args, data)
    try:
        cfg = GibbsConfig(args.n_mcmc, args.burn_in, seed, args.init, grid)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if not 0 < args.alpha < 1:
        raise InputError("--alpha must lie in (0, 1)")
    if cfg.n_mcmc < min_draws(args.alpha):
        raise InputError(f"--n-mcmc {cfg.n_mcmc} is too small for alpha={args.alpha}; need at least {min_draws(args.alpha)}")
    rects = _parse_rects(args.emit_rects, data.n, cfg.n_burn + cfg.n_mcmc) if args.emit_rects else None
    samples = run_chain(data, cfg)
    mix = estimate_cdf(samples, args.alpha, "mixture")
    con = estimate_cdf(samples, args.alpha, "conservative")
    os.makedirs(args.out, exist_ok=True)
    outputs = ["estimate.csv", "diagnostics.csv"]
    _write_rows(
        os.path.join(args.out, "estimate.csv"),
        ["grid", "point", "mixture_lo", "mixture_hi", "conservative_lo", "conservative_hi"],
        ([_num(v) for v in row] for row in zip(grid, mix.point, mix.ci_lower, mix.ci_upper, con.ci_lower, con.ci_upper)),
    )
    if cfg.n_mcmc >= 2:
        diag = chain_diagnostics(samples)
        lag1 = diag.lag1_autocorr
        diag_rows = ([str(k + 1), _num(a), _num(b)] for k, (a, b) in enumerate(zip(diag.mean_trace, diag.var_trace)))
    else:
        lag1, diag_rows = float("nan"), iter(())
    _write_rows(os.path.join(args.out, "diagnostics.csv"), ["iteration", "mean", "variance"], diag_rows)
    if args.emit_samples:
        header = ["iteration", "bound"] + [_num(g) for g in grid]
        rows = []
        for k in range(len(samples)):
            rows.append([str(k + 1), "lower"] + [_num(v) for v in samples.lower[k]])
            rows.append([str(k + 1), "upper"] + [_num(v) for v in samples.upper[k]])
        _write_rows(os.path.join(args.out, "samples.csv"), header, rows)
        outputs.append("samples.csv")
    if rects:
        write_rects_csv(rects_at(data, cfg, rects[0] - 1, rects[1]), os.path.join(args.out, "rects.csv"))
        outputs.append("rects.csv")
    config = {
        "model": data.model,
        "n_mcmc": cfg.n_mcmc,
        "burn_in": cfg.n_burn,
        "init": cfg.init,
        "alpha": args.alpha,
        "grid": [float(g) for g in grid],
        "quantile_convention": QUANTILE_CONVENTION,
        "emit_rects": args.emit_rects,
        "data_summary": summary,
        "lag1_autocorr_of_mean": None if np.isnan(lag1) else float(lag1),
    }
    inputs = {"data": {"path": os.path.abspath(args.data), "sha256": _sha256(args.data)}}
    _write_manifest(args.out, "fit", config, seed, started, inputs, outputs)
    print(f"wrote {', '.join(outputs)} and manifest.json to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args):
    from .simulate import load_scenario_config, run_simulation, scenario, with_overrides

    started = time.time()
    inputs = {}
    try:
        if args.config:
            cfg = load_scenario_config(args.config)
            inputs["config"] = {"path": os.path.abspath(args.config), "sha256": _sha256(args.config)}
            explicit_seed = _config_has_seed(args.config)
        elif args.scenario:
            cfg = scenario(args.scenario)
            explicit_seed = False
        else:
            raise InputError("simulate needs a config file or --scenario")
        seed = _resolve_seed(args.seed, cfg.seed if explicit_seed else None)
        cfg = with_overrides(cfg, seed=seed, replications=args.replications, n_mcmc=args.n_mcmc, n_burn=args.burn_in)
    except (OSError, ValueError, TypeError) as exc:
        raise InputError(str(exc)) from None
    if args.jobs < 1:
        raise InputError("--jobs must be at least 1")
    report = run_simulation(cfg, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    report.to_csv(os.path.join(args.out, "report.csv"))
    report.to_json(os.path.join(args.out, "summary.json"))
    _write_manifest(args.out, "simulate", cfg.to_dict(), cfg.seed, started, inputs, ["report.csv", "summary.json"])
    print(f"{report.n_completed}/{report.n_requested} replicates completed; wrote report.csv to {args.out}",
          file=sys.stderr)
    return EXIT_OK


def _config_has_seed(path):
    import yaml

    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    return isinstance(raw, dict) and "seed" in raw


def cmd_validate(args):
    from .validation import run_checks

    seed = _resolve_seed(args.seed)
    results = run_checks(args.level, seed=seed, report=lambda r: print(r.line(), flush=True))
    failed = [r for r in results if not r.passed and not r.advisory]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed ({args.level})")
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_synth(args):
    data = synthetic_surgery(_resolve_seed(args.seed))
    with open(args.out, "w", newline="") as fh:
        fh.write("# synthetic data resembling published summaries of a surgery study; not real patient data\n")
        fh.write("m,x\n")
        for m, x in zip(data.m, data.x):
            fh.write(f"{m},{x}\n")
    print(f"wrote {describe(data)} to {args.out}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="fidudeconv", description="Fiducial deconvolution of binomial and Poisson counts.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="estimate the mixing CDF of one dataset")
    f.add_argument("data", help="CSV with header m,x (binomial) or x (poisson)")
    f.add_argument("--out", default=".", help="output directory (default: current)")
    f.add_argument("--model", choices=("binomial", "poisson"), default="binomial")
    f.add_argument("--n-mcmc", type=int, default=10000)
    f.add_argument("--burn-in", type=int, default=1000)
    f.add_argument("--grid-start", type=float)
    f.add_argument("--grid-end", type=float)
    f.add_argument("--grid-step", type=float)
    f.add_argument("--alpha", type=float, default=0.05)
    f.add_argument("--seed", type=int, help=f"default: ${SEED_ENV} or 0")
    f.add_argument("--init", choices=("random", "deterministic"), default="random")
    f.add_argument("--emit-samples", action="store_true", help="also write samples.csv")
    f.add_argument("--emit-rects", metavar="I:SWEEP", help="write rects.csv for observation I (1-based) at sweep SWEEP")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run a Monte Carlo study")
    s.add_argument("config", nargs="?", help="YAML or JSON scenario file")
    s.add_argument("--scenario", type=int, choices=(1, 2, 3, 4, 5), help="built-in scenario instead of a file")
    s.add_argument("--out", default=".")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--replications", type=int)
    s.add_argument("--n-mcmc", type=int)
    s.add_argument("--burn-in", type=int)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="run the built-in numerical and statistical checks")
    v.add_argument("--level", choices=("quick", "full"), default="quick")
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_validate)

    g = sub.add_parser("synth-surgery", help="write a synthetic surgery-like dataset")
    g.add_argument("--out", default="surgery_synthetic.csv")
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, InfeasibleStateError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
