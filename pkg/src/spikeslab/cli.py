"""Command-line entry point: ``spikeslab {fit,select,simulate,theory}``.

Exit codes: 0 success, 1 numerical failure, 2 input error.  Every output is
a pure function of the inputs, flags and seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .bench import (
    SimulationSpec,
    misclassification_curve,
    run_experiment,
    write_misclassification_csv,
    write_scatter_csv,
)
from .errors import InputError, NumericalError
from .gibbs import GibbsConfig, run_chain
from .model import PriorConfig, rescale_response
from .regression import RawDataset, fit_ols, quadratic_expand, read_csv, standardize
from .selection import DEFAULT_GUARD, RULES, apply_rule, selection_table, write_selection_csv
from .theory import PMF_RULES, limit_complexity_pmf, mc_complexity_pmfs, strong_signal_spec, write_pmf_csv

log = logging.getLogger("spikeslab")

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2
BOOL_KEYS = {"quadratic", "trace"}
LIST_KEYS = {"rule"}


def read_config(path):
    """Parse a ``key = value`` file; ``#`` starts a comment. Keys may use dashes or underscores."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}: line {lineno} is not key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key in BOOL_KEYS:
            low = value.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise InputError(f"{path}: line {lineno}: {key} needs a boolean")
            out[key] = low in ("true", "1", "yes")
        elif key in LIST_KEYS:
            out[key] = [v.strip() for v in value.split(",") if v.strip()]
        else:
            out[key] = value
    return out


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {s}")
    return v


def _alpha(s):
    v = float(s)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1], got {s}")
    return v


def _add_common(p):
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_chain(p):
    p.add_argument("--burnin", type=_nonneg_int, default=2500)
    p.add_argument("--samples", type=_positive_int, default=5000)
    p.add_argument("--thin", type=_positive_int, default=1)
    p.add_argument("--block-size", type=_positive_int, default=None)


def _add_data(p):
    p.add_argument("--input", required=True, help="CSV with a header row")
    p.add_argument("--response", required=True, help="name of the response column")
    p.add_argument("--quadratic", action="store_true",
                   help="add pairwise interactions and squares of non-binary columns")


def _add_rules(p):
    p.add_argument("--rule", action="append", choices=RULES, help="repeatable; default: all rules")
    p.add_argument("--alpha", type=_alpha, default=0.10)
    p.add_argument("--guard-c", type=float, default=DEFAULT_GUARD, help="0 disables the forward guard")


def build_parser():
    parser = argparse.ArgumentParser(prog="spikeslab", description="Rescaled spike and slab variable selection")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="run the sampler and write a posterior summary")
    _add_common(fit)
    _add_data(fit)
    _add_chain(fit)
    fit.add_argument("--trace", action="store_true", help="also write every retained draw")

    sel = sub.add_parser("select", help="fit and apply selection rules")
    _add_common(sel)
    _add_data(sel)
    _add_chain(sel)
    _add_rules(sel)
    sel.add_argument("--top", type=_positive_int, default=None, help="rows in the table (default: all)")

    sim = sub.add_parser("simulate", help="replicated synthetic benchmark")
    _add_common(sim)
    _add_chain(sim)
    _add_rules(sim)
    sim.add_argument("--scenario", choices=("A", "B"), default=None)
    sim.add_argument("--spec", help="JSON file with simulation fields (custom layouts)")
    sim.add_argument("--rho", type=float, default=0.0)
    sim.add_argument("--reps", type=_positive_int, default=100)

    th = sub.add_parser("theory", help="limiting complexity pmfs, optionally with Monte Carlo")
    _add_common(th)
    th.add_argument("--rule", action="append", choices=PMF_RULES, help="repeatable; default: all")
    th.add_argument("--K", type=_positive_int, default=25)
    th.add_argument("--k0", type=_positive_int, default=10)
    th.add_argument("--alpha", type=_alpha, default=0.10)
    th.add_argument("--mc-reps", type=_nonneg_int, default=0, help="Monte Carlo replications (0: none)")
    th.add_argument("--n", type=_positive_int, default=400, help="sample size for the Monte Carlo")
    parser.commands = {"fit": fit, "select": sel, "simulate": sim, "theory": th}
    return parser


def _config_path(argv):
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def parse_args(argv=None):
    """Parse flags, letting a ``--config`` file supply defaults."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    path = _config_path(argv)
    if path and argv and argv[0] in parser.commands:
        conf = read_config(path)
        sub = parser.commands[argv[0]]
        actions = {a.dest: a for a in sub._actions}
        unknown = sorted(set(conf) - set(actions) - {"config", "help"})
        if unknown:
            raise InputError(f"{path}: unknown keys {unknown}")
        for key, value in conf.items():
            if key in LIST_KEYS and actions[key].choices is not None:
                bad = [v for v in value if v not in actions[key].choices]
                if bad:
                    raise InputError(f"{path}: invalid {key} values {bad}")
            # a value from the file satisfies a required flag
            actions[key].required = False
        # string defaults are converted by argparse like command-line values
        sub.set_defaults(**conf)
    return parser.parse_args(argv)


def _chain_config(args, keep_trace=False, null_draws=True):
    return GibbsConfig(burn_in=args.burnin, samples=args.samples, thin=args.thin, seed=args.seed,
                       block_size=args.block_size, null_draws=null_draws, keep_trace=keep_trace)


def binary_columns(raw: RawDataset):
    return [c for k, c in enumerate(raw.column_names) if np.unique(raw.x[:, k]).size == 2]


def load_design(args):
    raw = read_csv(args.input, args.response)
    if args.quadratic:
        # main effects are standardized before forming products
        mains = standardize(raw)
        raw = quadratic_expand(RawDataset(x=mains.x, y=raw.y, column_names=mains.column_names),
                               binary_columns=binary_columns(raw))
    return standardize(raw)


def _settings(args, keys):
    return {k: getattr(args, k) for k in keys}


def _fit(args, keep_trace):
    design = load_design(args)
    fit = fit_ols(design)
    prior = PriorConfig()
    ystar = rescale_response(design, fit, prior)
    summary = run_chain(design, ystar, prior, _chain_config(args, keep_trace=keep_trace))
    return design, fit, summary


def cmd_fit(args, out: Path):
    design, fit, summary = _fit(args, args.trace)
    extra = {
        "settings": _settings(args, ("input", "response", "quadratic", "seed", "burnin", "samples", "thin", "block_size")),
        "n": design.n,
        "K": design.K,
        "sigma_hat": fit.sigma_hat,
    }
    summary.write_json(out / "summary.json", extra=extra)
    if args.trace:
        summary.write_trace(out / "trace.csv")
    print(f"K={design.K} n={design.n} sigma_sq posterior mean {summary.sigma_sq_samples.mean():.4g}")
    return EXIT_OK


def cmd_select(args, out: Path):
    design, fit, summary = _fit(args, False)
    rules = tuple(args.rule or RULES)
    outcomes = [apply_rule(r, design, fit, summary, args.alpha, args.guard_c) for r in rules]
    rows = selection_table(design, fit, summary, outcomes, args.top)
    write_selection_csv(out / "selection.csv", rows, rules)
    models = {o.rule_name: [design.column_names[k] for k in o.model.indices] for o in outcomes}
    payload = {
        "settings": _settings(args, ("input", "response", "quadratic", "seed", "burnin", "samples", "thin",
                                     "block_size", "alpha", "guard_c")),
        "models": models,
    }
    with open(out / "models.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    summary.write_json(out / "summary.json")
    for rule, names in models.items():
        print(f"{rule:>9}: {len(names)} selected: {', '.join(names)}")
    return EXIT_OK


def _simulation_spec(args):
    if (args.scenario is None) == (args.spec is None):
        raise InputError("give exactly one of --scenario or --spec")
    if args.scenario is not None:
        return SimulationSpec.scenario(args.scenario, rho=args.rho, reps=args.reps, master_seed=args.seed)
    try:
        conf = json.loads(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read spec {args.spec}: {exc}") from None
    allowed = {f.name for f in fields(SimulationSpec)}
    unknown = sorted(set(conf) - allowed)
    if unknown:
        raise InputError(f"{args.spec}: unknown fields {unknown}")
    conf.setdefault("reps", args.reps)
    conf.setdefault("master_seed", args.seed)
    conf.setdefault("rho", args.rho)
    if conf.get("beta0") is not None:
        conf["beta0"] = tuple(float(b) for b in conf["beta0"])
        conf.setdefault("layout", "custom")
    try:
        return SimulationSpec(**conf)
    except TypeError as exc:
        raise InputError(f"{args.spec}: {exc}") from None


CUTOFF_GRID = np.round(np.arange(0.0, 4.0 + 1e-9, 0.05), 10)


def cmd_simulate(args, out: Path):
    spec = _simulation_spec(args)
    rules = tuple(args.rule or RULES)
    report = run_experiment(spec, rules, _chain_config(args, null_draws=False), alpha=args.alpha,
                            guard_c=args.guard_c)
    label = args.scenario or "custom"
    report.write_csv(out / "table.csv", scenario=f"{label}-rho{spec.rho:g}")
    report.write_per_rep_csv(out / "replications.csv")
    first = report.first_rep
    if first is not None and first["beta_star"] is not None:
        write_scatter_csv(out / "scatter.csv", first["z_stats"], first["beta_star"], first["truth"])
        curves = {
            "zcut": misclassification_curve(first["beta_star"], first["truth"], CUTOFF_GRID),
            "olshard": misclassification_curve(first["z_stats"], first["truth"], CUTOFF_GRID),
        }
        write_misclassification_csv(out / "misclassification.csv", CUTOFF_GRID, curves)
    print(f"{'rule':>9} {'k_hat':>8} {'perf':>8} {'miss':>8} {'fdr':>8} {'fnr':>8}")
    for rule, row in report.aggregate().items():
        print(f"{rule:>9} " + " ".join(f"{row[c]:8.4g}" for c in ("k_hat", "perf", "total_miss", "fdr", "fnr")))
    if report.failures:
        print(f"{len(report.failures)} replication(s) failed and were excluded", file=sys.stderr)
    return EXIT_OK


def cmd_theory(args, out: Path):
    if args.k0 > args.K:
        raise InputError(f"k0={args.k0} exceeds K={args.K}")
    rules = tuple(args.rule or PMF_RULES)
    pmfs = {r: limit_complexity_pmf(r, args.K, args.k0, args.alpha) for r in rules}
    empirical = None
    if args.mc_reps:
        spec = strong_signal_spec(K=args.K, k0=args.k0, n=args.n, reps=args.mc_reps, master_seed=args.seed)
        empirical = mc_complexity_pmfs(spec, args.alpha, rules=rules)
    write_pmf_csv(out / "pmf.csv", pmfs, empirical)
    for r, p in pmfs.items():
        print(f"{r:>9}: mode k={p.mode} with probability {p[p.mode]:.4g}")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "select": cmd_select, "simulate": cmd_simulate, "theory": cmd_theory}


def main(argv=None):
    try:
        args = parse_args(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
