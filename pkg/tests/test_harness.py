import csv
import io
import json
import math

import numpy as np
import pytest

from dssl import relaxations
from dssl.exceptions import ConfigError
from dssl.harness import cli
from dssl.harness.config import config_from_dict, load_config, parse_seed_list
from dssl.harness.runner import (
    SPLITS,
    SeedFailure,
    dumps_report,
    read_histogram_csv,
    run_experiment,
    seed_dir,
    summarize,
)
from dssl.nn import Network
from dssl.training import derive_seeds, evaluate, intermediate_fraction, train

RULES = "attrs: a, b, c\nexactly_one(a, b, c)\n"


def small_config(relaxation=None, seeds=(0, 1), **train):
    cfg = {
        "name": "small",
        "dataset": {"generator": "blobs",
                    "params": {"n_classes": 3, "n_unlabelled": 200, "n_test": 150}},
        "model": {"hidden": [16]},
        "train": {"epochs": 3, "learning_rate": 0.01, "lambda_u": 0.1, **train},
        "relaxation": relaxation,
        "seeds": list(seeds),
    }
    return cfg


def write_config(path, raw):
    path.write_text(json.dumps(raw), encoding="utf-8")
    return str(path)


def run_cli(argv):
    out = io.StringIO()
    code = cli.main(argv, out=out)
    return code, out.getvalue()


# --- config validation -------------------------------------------------------

@pytest.mark.parametrize("mutate, field", [
    (lambda c: c.update(seeds=[]), "seeds"),
    (lambda c: c.update(seeds=[0, 0]), "seeds"),
    (lambda c: c.update(seeds=[-1]), "seeds"),
    (lambda c: c["train"].update(learning_rate=0), "train.learning_rate"),
    (lambda c: c["train"].update(batch_size_unlabelled=0), "train.batch_size_unlabelled"),
    (lambda c: c["train"].update(warmup=3), "train.warmup"),
    (lambda c: c.update(extra=1), "config.extra"),
    (lambda c: c["dataset"].update(generator="mnist"), "dataset.generator"),
    (lambda c: c["dataset"]["params"].update(separation=-1.0), "dataset.params.separation"),
    (lambda c: c["dataset"]["params"].update(colour="red"), "dataset.params.colour"),
    (lambda c: c["model"].update(activation="gelu"), "model.activation"),
    (lambda c: c["model"].update(hidden=[0]), "model.hidden"),
    (lambda c: c.update(relaxation={"kind": "magic"}), "relaxation.kind"),
    (lambda c: c.update(relaxation={"kind": "dp", "temperature": 0.0}), "relaxation"),
    (lambda c: c.update(relaxation={"kind": "rules"}), "relaxation.rules"),
    (lambda c: c.update(relaxation={"kind": "rules", "rules": "attrs: a\na & ("}), "relaxation.rules"),
])
def test_invalid_config_names_field(mutate, field):
    raw = small_config({"kind": "dp"})
    mutate(raw)
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw)
    assert info.value.field == field


def test_attribute_task_config_checks(tmp_path):
    base = {"dataset": {"generator": "attributes", "rules": RULES}}
    with pytest.raises(ConfigError) as info:
        config_from_dict({**base, "relaxation": {"kind": "dp"}})
    assert info.value.field == "relaxation"
    with pytest.raises(ConfigError) as info:
        config_from_dict({"dataset": {"generator": "attributes"}})
    assert info.value.field == "dataset.rules"
    with pytest.raises(ConfigError) as info:
        config_from_dict({"dataset": {"generator": "attributes", "rules_file": "missing.rules"}}, tmp_path)
    assert info.value.field == "dataset.rules_file"
    with pytest.raises(ConfigError) as info:
        config_from_dict({**base, "model": {"head": "softmax"}})
    assert info.value.field == "model.head"

    (tmp_path / "r.rules").write_text(RULES)
    cfg = config_from_dict({"dataset": {"generator": "attributes", "rules_file": "r.rules"},
                            "relaxation": {"kind": "rules"}}, tmp_path)
    assert cfg.head == "sigmoid" and cfg.method == "CompiledRules"
    assert cfg.relaxation.rules == RULES


def test_cli_reports_config_errors(tmp_path, capsys):
    raw = small_config()
    raw["train"]["momentum"] = 2.0
    path = write_config(tmp_path / "bad.json", raw)
    code, _ = run_cli(["train", "--config", path, "--out", str(tmp_path / "o")])
    assert code == 2
    assert "train.momentum" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()

    code, _ = run_cli(["train", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert code == 2
    (tmp_path / "broken.json").write_text("{not json")
    code, _ = run_cli(["train", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path)])
    assert code == 2
    assert "invalid JSON" in capsys.readouterr().err

    good = write_config(tmp_path / "good.json", small_config())
    code, _ = run_cli(["train", "--config", good, "--seeds", "1,x", "--out", str(tmp_path)])
    assert code == 2
    code, _ = run_cli(["train", "--config", good, "--jobs", "0", "--out", str(tmp_path)])
    assert code == 2
    code, _ = run_cli(["train", "--config", good])
    assert code == 2 and "output_dir" in capsys.readouterr().err


def test_parse_seed_list():
    assert parse_seed_list("3, 1,2") == (3, 1, 2)
    with pytest.raises(ConfigError):
        parse_seed_list("")


def test_method_names():
    assert config_from_dict(small_config()).method == "Supervised"
    assert config_from_dict(small_config({"kind": "dp"})).method == "DP"
    assert config_from_dict(small_config({"kind": "dp"}, lambda_u=0.0)).method == "Supervised"
    assert config_from_dict(small_config({"kind": "exclusivity"})).method == "X"


# --- aggregation ---------------------------------------------------------------

def test_summary_example():
    s = summarize([1.0, 2.0, 3.0])
    assert s["mean"] == 2.0 and s["n"] == 3
    assert s["stderr"] == pytest.approx(1 / math.sqrt(3), abs=1e-15)
    assert s["stderr"] == pytest.approx(0.5774, abs=1e-4)
    single = summarize([0.7])
    assert single["mean"] == 0.7 and single["stderr"] is None
    assert summarize([math.nan])["n"] == 0


def test_summary_mean_within_range(rng):
    for _ in range(50):
        vals = rng.uniform(0, 1, rng.integers(2, 12))
        s = summarize(vals)
        assert s["min"] <= s["mean"] <= s["max"]
        assert s["stderr"] == pytest.approx(np.std(vals, ddof=1) / math.sqrt(len(vals)), rel=1e-12)


# --- train -----------------------------------------------------------------------

def test_single_seed_lambda_zero_matches_direct_training():
    cfg = config_from_dict(small_config({"kind": "dp"}, seeds=[4], lambda_u=0.0))
    report, results = run_experiment(cfg)
    data = cfg.dataset.build(4)
    init_seed, train_seed = derive_seeds(4)
    net = Network.initialize((2, 16, 3), "relu", "softmax", seed=init_seed)
    net, history = train(net, data.X_labelled, data.y_labelled, data.X_unlabelled,
                         cfg.train_config(train_seed), {"test": (data.X_test, data.y_test)})
    assert results[0].network == net
    assert results[0].history == history

    # with no relaxation at all the weights are the same; only the mean log q
    # diagnostic is dropped
    plain = Network.initialize((2, 16, 3), "relu", "softmax", seed=init_seed)
    no_relax = config_from_dict(small_config(None, seeds=[4], lambda_u=0.0)).train_config(train_seed)
    plain, plain_hist = train(plain, data.X_labelled, data.y_labelled, data.X_unlabelled,
                              no_relax, {"test": (data.X_test, data.y_test)})
    assert plain == net
    skip = ("mean_log_q", "unsup_loss")
    for a, b in zip(plain_hist, history, strict=True):
        assert {k: v for k, v in a.items() if k not in skip} == {k: v for k, v in b.items() if k not in skip}
        assert math.isnan(a["unsup_loss"]) and math.isnan(b["unsup_loss"])
        assert math.isnan(a["mean_log_q"]) and math.isfinite(b["mean_log_q"])
    assert report["per_seed"][0]["test_accuracy"] == evaluate(net, data.X_test, data.y_test)["accuracy"]
    assert report["method"] == "Supervised"


def _without_wall_clock(text):
    report = json.loads(text)
    report.pop("wall_clock_seconds")
    return report


def test_train_writes_outputs_and_is_deterministic(tmp_path):
    path = write_config(tmp_path / "dp.json", small_config({"kind": "dp"}))
    outs = [tmp_path / "a", tmp_path / "b", tmp_path / "c"]
    assert run_cli(["train", "--config", path, "--out", str(outs[0])])[0] == 0
    assert run_cli(["train", "--config", path, "--out", str(outs[1])])[0] == 0
    assert run_cli(["train", "--config", path, "--out", str(outs[2]), "--jobs", "2"])[0] == 0

    texts = [(o / "report.json").read_text(encoding="utf-8") for o in outs]
    assert _without_wall_clock(texts[0]) == _without_wall_clock(texts[1]) == _without_wall_clock(texts[2])
    # stable key order: the file is exactly the sorted-key rendering
    assert texts[0] == dumps_report(json.loads(texts[0]))
    for seed in (0, 1):
        for name in ["metrics.csv", "network.bin"] + [f"hist_{s}.csv" for s in SPLITS]:
            a = (seed_dir(outs[0], seed) / name).read_bytes()
            assert a == (seed_dir(outs[1], seed) / name).read_bytes()
            assert a == (seed_dir(outs[2], seed) / name).read_bytes()
    assert not list(tmp_path.rglob("*.tmp"))


def test_report_contents(tmp_path):
    cfg = config_from_dict(small_config({"kind": "entropy"}, seeds=[2, 0, 1]))
    report, _ = run_experiment(cfg, tmp_path)
    assert [p["seed"] for p in report["per_seed"]] == [0, 1, 2]
    assert set(report) == {"config", "method", "per_seed", "summary", "series", "histograms",
                           "histogram_bins", "wall_clock_seconds"}
    assert report["config"]["relaxation"]["kind"] == "entropy"
    assert report["config"]["seeds"] == [2, 0, 1]
    assert report["histogram_bins"] == 50
    assert len(report["series"]["0"]) == 3
    assert report["summary"]["rule_violation_rate"]["n"] == 0
    assert report["per_seed"][0]["rule_violation_rate"] is None


def test_aggregates_recomputable_from_seed_files(tmp_path):
    cfg = config_from_dict(small_config({"kind": "dp"}, seeds=[0, 1, 2]))
    report, _ = run_experiment(cfg, tmp_path)
    sizes = {"labelled": 12, "unlabelled": 200, "test": 150}
    accs = []
    for p in report["per_seed"]:
        d = seed_dir(tmp_path, p["seed"])
        for split in SPLITS:
            counts = read_histogram_csv(d / f"hist_{split}.csv")
            assert counts.sum() == sizes[split]
            assert intermediate_fraction(counts) == p["intermediate_fraction"][split]
        with open(d / "metrics.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3
        acc = float(rows[-1]["test_accuracy"])
        assert acc == p["test_accuracy"]
        accs.append(acc)
        net = Network.load(d / "network.bin")
        data = cfg.dataset.build(p["seed"])
        assert evaluate(net, data.X_test, data.y_test)["accuracy"] == acc
    assert report["summary"]["test_accuracy"] == summarize(accs)
    for split in SPLITS:
        fracs = [p["intermediate_fraction"][split] for p in report["per_seed"]]
        assert report["summary"][f"intermediate_fraction_{split}"] == summarize(fracs)


def test_seed_override(tmp_path):
    path = write_config(tmp_path / "c.json", small_config())
    code, text = run_cli(["train", "--config", path, "--seeds", "5", "--out", str(tmp_path / "o")])
    assert code == 0 and "over 1 seed(s)" in text
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert [p["seed"] for p in report["per_seed"]] == [5]


def test_divergence_names_seed(tmp_path, capsys):
    raw = small_config(seeds=[3], learning_rate=1e8, momentum=0.0)
    path = write_config(tmp_path / "c.json", raw)
    with np.errstate(all="ignore"):
        code, _ = run_cli(["train", "--config", path, "--out", str(tmp_path / "o")])
    assert code == 1
    assert "seed 3" in capsys.readouterr().err
    cfg = config_from_dict(raw)
    with np.errstate(all="ignore"), pytest.raises(SeedFailure) as info:
        run_experiment(cfg)
    assert info.value.seed == 3


def test_attribute_run_reports_violations(tmp_path):
    raw = {
        "dataset": {"generator": "attributes", "rules": RULES,
                    "params": {"n_unlabelled": 100, "n_test": 100}},
        "model": {"hidden": [8]},
        "train": {"epochs": 2},
        "relaxation": {"kind": "rules", "g": "power", "temperature": 10.0},
        "seeds": [0],
    }
    report, _ = run_experiment(config_from_dict(raw), tmp_path)
    rate = report["per_seed"][0]["rule_violation_rate"]
    assert 0.0 <= rate <= 1.0
    assert report["method"] == "CompiledRules"


# --- compare -------------------------------------------------------------------------

def test_compare_identical_configs(tmp_path):
    a = write_config(tmp_path / "a.json", small_config({"kind": "dp"}))
    b = write_config(tmp_path / "b.json", small_config({"kind": "dp"}))
    code, text = run_cli(["compare", a, "--config", b, "--out", str(tmp_path / "cmp")])
    assert code == 0
    with open(tmp_path / "cmp" / "compare.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert rows[0] == {**rows[1]}
    assert (tmp_path / "cmp" / "DP" / "report.json").exists()
    assert (tmp_path / "cmp" / "DP_2" / "report.json").exists()
    assert text == (tmp_path / "cmp" / "compare.txt").read_text()


def test_compare_rows_and_intermediate_column(tmp_path):
    paths = [
        write_config(tmp_path / "dp.json", small_config({"kind": "dp"})),
        write_config(tmp_path / "sup.json", small_config()),
        write_config(tmp_path / "ent.json", small_config({"kind": "entropy"})),
    ]
    out = tmp_path / "cmp"
    code, text = run_cli(["compare", *paths, "--out", str(out)])
    assert code == 0
    with open(out / "compare.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["Supervised", "E", "DP"]
    assert rows[0]["wins_vs_supervised"] == "0"
    for row in rows:
        fracs = []
        for seed in (0, 1):
            counts = read_histogram_csv(seed_dir(out / row["method"], seed) / "hist_unlabelled.csv")
            fracs.append(intermediate_fraction(counts))
        assert float(row["intermediate_fraction_unlabelled"]) == pytest.approx(np.mean(fracs), abs=1e-15)
    assert text.splitlines()[0].startswith("method")


def test_compare_rejects_mismatched_runs(tmp_path, capsys):
    a = write_config(tmp_path / "a.json", small_config())
    b = write_config(tmp_path / "b.json", small_config(seeds=[0, 2]))
    raw = small_config()
    raw["dataset"]["params"]["separation"] = 5.0
    c = write_config(tmp_path / "c.json", raw)
    assert run_cli(["compare", a, b])[0] == 2
    assert "seeds" in capsys.readouterr().err
    assert run_cli(["compare", a, c])[0] == 2
    assert "dataset" in capsys.readouterr().err
    assert run_cli(["compare"])[0] == 2


# --- gradcheck ---------------------------------------------------------------------------

def test_gradcheck_passes():
    code, text = run_cli(["gradcheck"])
    lines = text.splitlines()
    assert code == 0
    assert lines[-1] == f"{len(lines) - 1}/{len(lines) - 1} checks passed"
    assert all(line.startswith("PASS") for line in lines[:-1])
    for head, loss in [("softmax", "dp(T=10)"), ("softmax", "entropy"), ("softmax", "exclusivity"),
                       ("softmax", "pseudo_label"), ("softmax", "rules"), ("sigmoid", "rules")]:
        assert any(f"network/{head}/{loss} " in line for line in lines)


def test_gradcheck_reports_perturbed_gradient(monkeypatch):
    kind = relaxations.RelaxationKind.DET_PRIOR
    exact = relaxations._KERNELS[kind]

    def skewed(theta, spec):
        value, grad = exact(theta, spec)
        return value, grad * 1.01

    monkeypatch.setitem(relaxations._KERNELS, kind, skewed)
    code, text = run_cli(["gradcheck"])
    assert code == 1
    failed = [line for line in text.splitlines() if line.startswith("FAIL")]
    assert failed and all("dp(" in line for line in failed)
    assert any("relaxations/dp(T=10)/K=2" in line for line in failed)
    assert any("network/softmax/dp(T=10)" in line for line in failed)


# --- density ---------------------------------------------------------------------------------

def _density_table(argv):
    code, text = run_cli(["density", *argv])
    assert code == 0
    header, body = text.split("\n", 1)
    rows = list(csv.DictReader(io.StringIO(body)))
    table = {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}
    return float(header.split(":")[1]), table


def test_density_symmetric_mix():
    norm, t = _density_table(["--grid", "199"])
    assert 0.999 <= norm <= 1.001
    np.testing.assert_allclose(t["theta"] + t["theta"][::-1], 1.0, atol=1e-15)
    np.testing.assert_allclose(t["p"], t["p"][::-1], rtol=0, atol=1e-12 * t["p"].max())
    np.testing.assert_allclose(t["p_y0"] + t["p_y1"], t["p"], rtol=1e-15)


def test_density_asymmetric_mix(tmp_path):
    args = ["--mu0", "-0.5", "--mu1", "2", "--sigma", "0.7", "--pi1", "0.2", "--grid", "50"]
    norm, t = _density_table(args)
    assert abs(norm - 1.0) < 1e-3
    np.testing.assert_allclose(t["p_y0"] + t["p_y1"], t["p"], rtol=1e-15)
    assert len(t["theta"]) == 50
    code, _ = run_cli(["density", *args, "--out", str(tmp_path / "d.csv")])
    assert code == 0 and (tmp_path / "d.csv").read_text().startswith("# normalization: ")


def test_density_rejects_bad_mix(capsys):
    assert run_cli(["density", "--sigma", "0"])[0] == 2
    assert run_cli(["density", "--mu0", "1", "--mu1", "1"])[0] == 2
    assert run_cli(["density", "--grid", "0"])[0] == 2
    assert "--grid" in capsys.readouterr().err


# --- compile-rules ---------------------------------------------------------------------------

def test_compile_rules_exactly_one(tmp_path):
    path = tmp_path / "one.rules"
    path.write_text("attrs: a, b\nexactly_one(a, b)\n")
    code, text = run_cli(["compile-rules", str(path)])
    assert code == 0
    assert "|V| = 2" in text
    assert "V = {01, 10}" in text
    lines = text.splitlines()
    assert set(lines[-2:]) == {"01", "10"}


def test_compile_rules_tautology(tmp_path):
    path = tmp_path / "t.rules"
    path.write_text("attrs: a, b, c\na | !a\n")
    code, text = run_cli(["compile-rules", str(path)])
    assert code == 0 and "|V| = 8" in text


def test_compile_rules_contradiction(tmp_path, capsys):
    path = tmp_path / "c.rules"
    path.write_text("attrs: a, b\na & !a\n")
    code, _ = run_cli(["compile-rules", str(path)])
    assert code != 0
    assert "empty valid set" in capsys.readouterr().err


def test_compile_rules_bad_input(tmp_path, capsys):
    assert run_cli(["compile-rules", str(tmp_path / "none.rules")])[0] == 2
    path = tmp_path / "bad.rules"
    path.write_text("attrs: a, b\na & (b\n")
    assert run_cli(["compile-rules", str(path)])[0] == 2
    assert "bad.rules" in capsys.readouterr().err


# --- gen-data -------------------------------------------------------------------------------------

def test_gen_data_writes_seed_files(tmp_path):
    path = write_config(tmp_path / "c.json", small_config(seeds=[0, 3]))
    code, _ = run_cli(["gen-data", "--config", path, "--out", str(tmp_path / "data")])
    assert code == 0
    cfg = load_config(path)
    for seed in (0, 3):
        text = (tmp_path / "data" / f"dataset_seed_{seed}.csv").read_text(encoding="utf-8")
        assert text == cfg.dataset.build(seed).csv_text()
