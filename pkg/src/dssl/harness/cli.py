"""Command-line entry point: ``dssl <subcommand> ...``.

Exit codes: 0 success, 1 a run or check failed, 2 invalid input (the message
names the offending field).
"""

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from .. import gaussmix, gradcheck
from ..exceptions import ConfigError, DomainError
from ..logic import RuleSyntaxError, enumerate_valid, load_rule_file, to_dnf
from .config import METHOD_ORDER, load_config, parse_seed_list
from .runner import SeedFailure, atomic_write_text, build_report, run_experiment, run_seeds, write_run

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _load(args, path=None):
    cfg = load_config(path or args.config)
    if args.seeds is not None:
        cfg = cfg.with_seeds(parse_seed_list(args.seeds))
    return cfg


def _jobs(args):
    if args.jobs < 1:
        raise ConfigError("must be at least 1", "--jobs")
    return args.jobs


def cmd_train(args, out):
    cfg = _load(args)
    jobs = _jobs(args)
    out_dir = args.out or cfg.output_dir
    if out_dir is None:
        raise ConfigError("no output directory; pass --out or set output_dir", "output_dir")
    report, _ = run_experiment(cfg, out_dir, jobs)
    acc = report["summary"]["test_accuracy"]
    spread = f" +/- {acc['stderr']:.4f}" if acc["stderr"] is not None else ""
    print(f"{report['method']}: test accuracy {acc['mean']:.4f}{spread} "
          f"over {acc['n']} seed(s) -> {Path(out_dir) / 'report.json'}", file=out)
    return EXIT_OK


def _paired_wins(rows, baseline):
    base = {p["seed"]: p["test_accuracy"] for p in baseline["per_seed"]}
    return sum(p["test_accuracy"] > base[p["seed"]] for p in rows["per_seed"])


def compare_rows(reports):
    """Comparison rows (one per report), ordered Supervised, E, X, PL, DP, CompiledRules."""
    # stable sort: configs of the same method keep their command-line order
    order = sorted(range(len(reports)), key=lambda i: METHOD_ORDER.index(reports[i]["method"]))
    baseline = next((r for r in reports if r["method"] == "Supervised"), None)
    rows = []
    for i in order:
        r = reports[i]
        s = r["summary"]
        rows.append({
            "method": r["method"],
            "config": r["config"]["name"],
            "n_seeds": s["test_accuracy"]["n"],
            "mean_accuracy": s["test_accuracy"]["mean"],
            "stderr": s["test_accuracy"]["stderr"],
            "intermediate_fraction_unlabelled": s["intermediate_fraction_unlabelled"]["mean"],
            "intermediate_fraction_test": s["intermediate_fraction_test"]["mean"],
            "rule_violation_rate": s["rule_violation_rate"]["mean"],
            "wins_vs_supervised": None if baseline is None else _paired_wins(r, baseline),
        })
    return rows


COMPARE_COLUMNS = (
    "method", "config", "n_seeds", "mean_accuracy", "stderr", "intermediate_fraction_unlabelled",
    "intermediate_fraction_test", "rule_violation_rate", "wins_vs_supervised",
)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def compare_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COMPARE_COLUMNS)
    for row in rows:
        writer.writerow(["" if row[c] is None else repr(row[c]) if isinstance(row[c], float) else row[c]
                         for c in COMPARE_COLUMNS])
    return buf.getvalue()


def compare_table(rows):
    """Fixed-width text table; accuracy is shown as mean +/- stderr."""
    header = ["method", "config", "accuracy", "intermediate(unl)", "intermediate(test)", "violations", "wins"]
    body = []
    for r in rows:
        acc = _cell(r["mean_accuracy"])
        if r["stderr"] is not None:
            acc += f" +/- {r['stderr']:.4f}"
        wins = "" if r["wins_vs_supervised"] is None else f"{r['wins_vs_supervised']}/{r['n_seeds']}"
        body.append([r["method"], r["config"], acc, _cell(r["intermediate_fraction_unlabelled"]),
                     _cell(r["intermediate_fraction_test"]), _cell(r["rule_violation_rate"]), wins])
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [header] + body]
    return "\n".join(lines) + "\n"


def cmd_compare(args, out):
    paths = list(args.configs) + list(args.config or [])
    if len(paths) < 1:
        raise ConfigError("give at least one config path", "configs")
    cfgs = [_load(args, p) for p in paths]
    jobs = _jobs(args)
    ref = cfgs[0]
    for p, c in zip(paths, cfgs):
        if c.dataset != ref.dataset:
            raise ConfigError(f"{p}: dataset differs from {paths[0]}", "dataset")
        if c.seeds != ref.seeds:
            raise ConfigError(f"{p}: seed list differs from {paths[0]}", "seeds")
    reports = []
    used = set()
    for c in cfgs:
        results = run_seeds(c, jobs)
        if args.out:
            sub = c.method
            k = 2
            while sub in used:
                sub, k = f"{c.method}_{k}", k + 1
            used.add(sub)
            reports.append(write_run(Path(args.out) / sub, c, results))
        else:
            reports.append(build_report(c, results))
    rows = compare_rows(reports)
    table = compare_table(rows)
    if args.out:
        atomic_write_text(Path(args.out) / "compare.csv", compare_csv(rows))
        atomic_write_text(Path(args.out) / "compare.txt", table)
    out.write(table)
    return EXIT_OK


def cmd_gradcheck(args, out):
    results = gradcheck.run_all()
    for r in results:
        print(r.line(), file=out)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed", file=out)
    return EXIT_OK if not failed else EXIT_FAIL


def density_grid(mix, grid):
    """Interior grid ``i / (grid + 1)`` with total and per-class densities."""
    theta = np.arange(1, grid + 1) / (grid + 1)
    p0, p1 = gaussmix.p_theta_components(theta, mix)
    return theta, p0 + p1, p0, p1


def cmd_density(args, out):
    if args.grid < 1:
        raise ConfigError("must be at least 1", "--grid")
    try:
        mix = gaussmix.GaussianMixture1D(args.mu0, args.mu1, args.sigma, args.pi1)
        theta, p, p0, p1 = density_grid(mix, args.grid)
    except DomainError as exc:
        raise ConfigError(str(exc), "mixture") from None
    norm = gaussmix.integrate_theta_density(mix)
    buf = io.StringIO()
    buf.write(f"# normalization: {norm!r}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["theta", "p", "p_y0", "p_y1"])
    for row in zip(theta, p, p0, p1):
        writer.writerow([repr(float(v)) for v in row])
    if args.out:
        atomic_write_text(args.out, buf.getvalue())
        print(f"normalization {norm:.6f}; {args.grid} points -> {args.out}", file=out)
    else:
        out.write(buf.getvalue())
    return EXIT_OK


def cmd_compile_rules(args, out):
    try:
        attrs, formula = load_rule_file(args.rule_file)
    except FileNotFoundError:
        raise ConfigError(f"rule file {args.rule_file!r} does not exist", "rule_file") from None
    except RuleSyntaxError as exc:
        raise ConfigError(str(exc), args.rule_file) from None
    valid = enumerate_valid(formula, len(attrs))
    if len(valid) == 0:
        print("error: empty valid set (the rules are unsatisfiable)", file=sys.stderr)
        return EXIT_FAIL
    print(f"attributes: {', '.join(attrs)}", file=out)
    print(f"DNF: {to_dnf(formula, len(attrs)).to_text(attrs)}", file=out)
    print(f"|V| = {len(valid)}", file=out)
    print("V = {" + ", ".join(valid.as_strings()) + "}", file=out)
    for s in valid.as_strings():
        print(s, file=out)
    return EXIT_OK


def cmd_gen_data(args, out):
    cfg = _load(args)
    out_dir = args.out or cfg.output_dir
    if out_dir is None:
        raise ConfigError("no output directory; pass --out or set output_dir", "output_dir")
    for seed in cfg.seeds:
        data = cfg.dataset.build(seed)
        path = Path(out_dir) / f"dataset_seed_{seed}.csv"
        atomic_write_text(path, data.csv_text())
        print(f"seed {seed}: {len(data.X_labelled)} labelled, {len(data.X_unlabelled)} unlabelled, "
              f"{len(data.X_test)} test -> {path}", file=out)
    return EXIT_OK


def _add_run_flags(p, config_required=True):
    if config_required:
        p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", help="output directory (overrides output_dir in the config)")
    p.add_argument("--seeds", help="comma-separated seed list (overrides the config)")
    p.add_argument("--jobs", type=int, default=1, help="seeds to run in parallel")


def build_parser():
    parser = argparse.ArgumentParser(prog="dssl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train every seed of one config and write report.json")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="run several configs on one dataset and tabulate them")
    p.add_argument("configs", nargs="*", help="config paths")
    p.add_argument("--config", action="append", help="config path (repeatable)")
    _add_run_flags(p, config_required=False)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", help="finite-difference checks of every analytic gradient")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("density", help="tabulate p(theta) for a two-Gaussian mixture")
    p.add_argument("--mu0", type=float, default=-1.0)
    p.add_argument("--mu1", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--pi1", type=float, default=0.5)
    p.add_argument("--grid", type=int, default=99, help="number of interior grid points")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("compile-rules", help="print the DNF and valid set of a rule file")
    p.add_argument("rule_file")
    p.set_defaults(func=cmd_compile_rules)

    p = sub.add_parser("gen-data", help="write the dataset CSV for each seed")
    _add_run_flags(p)
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SeedFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
