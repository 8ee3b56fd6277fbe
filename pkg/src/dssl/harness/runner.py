"""Multi-seed execution, aggregation and report files.

Each seed is an independent job: the dataset, the initial weights and the
mini-batch order all derive from that seed alone, so seeds can run in any
order or in parallel and the assembled report does not change.
"""

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import DivergenceError
from ..nn import Network
from ..training import N_HIST_BINS, derive_seeds, evaluate, train

SPLITS = ("labelled", "unlabelled", "test")


class SeedFailure(RuntimeError):
    """A training run failed; ``seed`` names the run."""

    def __init__(self, seed, message):
        super().__init__(seed, message)
        self.seed = seed
        self.message = message

    def __str__(self):
        return f"seed {self.seed}: {self.message}"


@dataclass
class SeedResult:
    seed: int
    test_accuracy: float
    history: list
    histograms: dict
    intermediate_fraction: dict
    rule_violation_rate: float
    network: Network


def rule_violation_rate(net_out, valid_set):
    """Share of rows whose thresholded attribute vector is not a valid label."""
    predicted = (net_out > 0.5).astype(np.int64)
    return float(1.0 - valid_set.contains_rows(predicted).mean())


def run_seed(cfg, seed):
    """Generate the data for ``seed``, train one network and evaluate it."""
    data = cfg.dataset.build(seed)
    init_seed, train_seed = derive_seeds(seed)
    sizes = (data.n_features, *cfg.hidden, data.n_outputs)
    net = Network.initialize(sizes, cfg.activation, cfg.head, seed=init_seed)
    tcfg = cfg.train_config(seed=train_seed)
    try:
        net, history = train(
            net, data.X_labelled, data.y_labelled, data.X_unlabelled, tcfg,
            eval_sets={"test": (data.X_test, data.y_test)},
        )
    except DivergenceError as exc:
        raise SeedFailure(seed, f"training diverged ({exc})") from None
    histograms, fractions = {}, {}
    test_acc = math.nan
    for split, (X, y) in data.splits().items():
        if len(X) == 0:
            histograms[split] = np.zeros(N_HIST_BINS, dtype=np.int64)
            fractions[split] = math.nan
            continue
        ev = evaluate(net, X, y)
        histograms[split] = ev["histogram"]
        fractions[split] = ev["intermediate_fraction"]
        if split == "test":
            test_acc = ev["accuracy"]
    violation = math.nan
    if data.valid_set is not None and len(data.X_test):
        violation = rule_violation_rate(net.forward(data.X_test), data.valid_set)
    return SeedResult(seed, test_acc, history, histograms, fractions, violation, net)


def _run_seed_job(args):
    return run_seed(*args)


def run_seeds(cfg, jobs=1):
    """Run every seed of ``cfg``; results come back sorted by seed."""
    tasks = [(cfg, s) for s in cfg.seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_run_seed_job, tasks))
    else:
        results = [run_seed(c, s) for c, s in tasks]
    return sorted(results, key=lambda r: r.seed)


def summarize(values):
    """Mean, standard error (sample sd / sqrt(n)), min and max of finite values."""
    vals = np.asarray([v for v in values if v is not None and math.isfinite(v)], dtype=float)
    n = len(vals)
    if n == 0:
        return {"n": 0, "mean": None, "stderr": None, "min": None, "max": None}
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else None
    return {
        "n": n,
        "mean": float(vals.mean()),
        "stderr": stderr,
        "min": float(vals.min()),
        "max": float(vals.max()),
    }


def _clean(obj):
    """JSON-safe copy: NaN becomes null, numpy scalars and arrays become Python values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def build_report(cfg, results, wall_clock=None):
    per_seed = []
    for r in results:
        per_seed.append({
            "seed": r.seed,
            "test_accuracy": r.test_accuracy,
            "intermediate_fraction": r.intermediate_fraction,
            "rule_violation_rate": r.rule_violation_rate,
        })
    summary = {
        "test_accuracy": summarize(r.test_accuracy for r in results),
        "rule_violation_rate": summarize(r.rule_violation_rate for r in results),
    }
    for split in SPLITS:
        summary[f"intermediate_fraction_{split}"] = summarize(r.intermediate_fraction[split] for r in results)
    report = {
        "config": cfg.to_dict(),
        "method": cfg.method,
        "per_seed": per_seed,
        "summary": summary,
        "series": {str(r.seed): r.history for r in results},
        "histograms": {str(r.seed): r.histograms for r in results},
        "histogram_bins": N_HIST_BINS,
    }
    if wall_clock is not None:
        report["wall_clock_seconds"] = wall_clock
    return _clean(report)


def dumps_report(report):
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def atomic_write_bytes(path, data):
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return "" if not math.isfinite(v) else repr(v)
    return str(v)


def metrics_csv(history):
    if not history:
        return ""
    header = list(history[0])
    return _csv_text(header, [[_fmt(row[k]) for k in header] for row in history])


def histogram_csv(counts):
    edges = np.linspace(0.0, 1.0, len(counts) + 1)
    rows = [[repr(float(edges[i])), repr(float(edges[i + 1])), int(c)] for i, c in enumerate(counts)]
    return _csv_text(["bin_lo", "bin_hi", "count"], rows)


def seed_dir(out_dir, seed):
    return Path(out_dir) / f"seed_{seed}"


def write_run(out_dir, cfg, results, wall_clock=None):
    """Write ``report.json`` and per-seed metrics, histograms and weights."""
    out_dir = Path(out_dir)
    for r in results:
        d = seed_dir(out_dir, r.seed)
        atomic_write_text(d / "metrics.csv", metrics_csv(r.history))
        for split in SPLITS:
            atomic_write_text(d / f"hist_{split}.csv", histogram_csv(r.histograms[split]))
        atomic_write_bytes(d / "network.bin", r.network.to_bytes())
    report = build_report(cfg, results, wall_clock)
    atomic_write_text(out_dir / "report.json", dumps_report(report))
    return report


def run_experiment(cfg, out_dir=None, jobs=1):
    """Run all seeds and, when ``out_dir`` is given, write the report files."""
    start = time.perf_counter()
    results = run_seeds(cfg, jobs)
    wall = time.perf_counter() - start
    if out_dir is None:
        return build_report(cfg, results, wall), results
    return write_run(out_dir, cfg, results, wall), results


def read_histogram_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return np.array([int(row["count"]) for row in csv.DictReader(fh)], dtype=np.int64)
