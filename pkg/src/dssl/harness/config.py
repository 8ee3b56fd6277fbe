"""Experiment configuration: one JSON file fully determines a multi-seed run.

Layout::

    {
      "name": "blobs-dp",
      "dataset": {"generator": "blobs", "params": {"separation": 3.0}},
      "model": {"hidden": [64, 64], "activation": "relu"},
      "train": {"lambda_u": 0.1, "learning_rate": 0.01, "epochs": 60},
      "relaxation": {"kind": "dp", "temperature": 10.0},
      "seeds": [0, 1, 2],
      "output_dir": "runs/blobs-dp"
    }

``relaxation`` may be ``null`` (or ``{"kind": "none"}``) for a supervised run.
Attribute tasks carry their rules as rule-file text (``"rules"``) or a path
(``"rules_file"``, relative to the config file); the ``"rules"`` relaxation
reuses the dataset's rules unless it names its own.
"""

import inspect
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .. import datasets, gaussmix
from ..exceptions import ConfigError
from ..logic import GFunction, RuleSyntaxError, compile_relaxation, enumerate_valid, parse_rule_file_text
from ..relaxations import DEFAULT_EPSILON, RelaxationKind, RelaxationSpec
from ..training import TrainConfig, check_compatible

DEFAULT_SEEDS = tuple(range(10))

GENERATORS = {
    "blobs": datasets.gen_blobs,
    "two_moons": datasets.gen_two_moons,
    "attributes": datasets.gen_attribute_task,
    "gauss1d": datasets.gen_gauss1d,
}
_MIX_KEYS = ("mu0", "mu1", "sigma", "pi1")
# keys of the "train" section; "seed" comes from the seed list instead
TRAIN_KEYS = tuple(f.name for f in fields(TrainConfig) if f.name not in ("relaxation", "seed"))

# short method names used as comparison-table rows, in display order
METHOD_NAMES = {
    None: "Supervised",
    RelaxationKind.ENTROPY: "E",
    RelaxationKind.EXCLUSIVITY: "X",
    RelaxationKind.PSEUDO_LABEL: "PL",
    RelaxationKind.DET_PRIOR: "DP",
    RelaxationKind.COMPILED_RULES: "CompiledRules",
}
METHOD_ORDER = tuple(METHOD_NAMES.values())


def _section(raw, key, default=None):
    value = raw.get(key, default)
    if value is None:
        return default
    if not isinstance(value, dict):
        raise ConfigError("must be an object", key)
    return value


def _check_keys(section, allowed, where):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", f"{where}.{unknown[0]}")


def _read_rules(section, where, base_dir):
    """Rule-file text from ``rules`` or ``rules_file`` in ``section`` (or None)."""
    text = section.get("rules")
    path = section.get("rules_file")
    if text is not None and path is not None:
        raise ConfigError("give either rules or rules_file, not both", f"{where}.rules")
    if path is not None:
        full = Path(base_dir, path)
        if not full.is_file():
            raise ConfigError(f"rule file {str(full)!r} does not exist", f"{where}.rules_file")
        text = full.read_text(encoding="utf-8")
    if text is None:
        return None
    try:
        parse_rule_file_text(text)
    except RuleSyntaxError as exc:
        raise ConfigError(str(exc), f"{where}.rules") from None
    return text


@dataclass(frozen=True)
class DatasetSpec:
    generator: str
    params: dict = field(default_factory=dict)
    rules: str = None

    @property
    def label_kind(self):
        return "attributes" if self.generator == "attributes" else "class"

    def n_outputs(self):
        if self.generator == "attributes":
            return len(parse_rule_file_text(self.rules)[0])
        if self.generator == "blobs":
            return self.params.get("n_classes", 4)
        return 2

    def build(self, seed):
        """Generate the dataset for one run seed."""
        params = dict(self.params)
        if self.generator == "attributes":
            attrs, formula = parse_rule_file_text(self.rules)
            return datasets.gen_attribute_task(formula, len(attrs), seed=seed, **params)
        if self.generator == "gauss1d":
            mix_args = {k: params.pop(k) for k in _MIX_KEYS if k in params}
            return datasets.gen_gauss1d(gaussmix.GaussianMixture1D(**mix_args), seed=seed, **params)
        return GENERATORS[self.generator](seed=seed, **params)

    def to_dict(self):
        out = {"generator": self.generator, "params": dict(self.params)}
        if self.rules is not None:
            out["rules"] = self.rules
        return out


@dataclass(frozen=True)
class RelaxationChoice:
    kind: RelaxationKind = None
    temperature: float = 10.0
    g: str = "power"
    epsilon: float = DEFAULT_EPSILON
    rules: str = None

    @property
    def method(self):
        return METHOD_NAMES[self.kind]

    def build(self):
        """The :class:`RelaxationSpec` in force, or None for supervised runs."""
        if self.kind is None:
            return None
        if self.kind is not RelaxationKind.COMPILED_RULES:
            return RelaxationSpec(self.kind, temperature=self.temperature, epsilon=self.epsilon)
        attrs, formula = parse_rule_file_text(self.rules)
        g = GFunction.identity() if self.g == "identity" else GFunction.power(self.temperature)
        compiled = compile_relaxation(enumerate_valid(formula, len(attrs)), g, epsilon=self.epsilon)
        return RelaxationSpec(self.kind, rules=compiled, epsilon=self.epsilon)

    def to_dict(self):
        if self.kind is None:
            return None
        out = {"kind": self.kind.value, "temperature": self.temperature, "epsilon": self.epsilon}
        if self.kind is RelaxationKind.COMPILED_RULES:
            out["g"] = self.g
            out["rules"] = self.rules
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec
    hidden: tuple = (64, 64)
    activation: str = "relu"
    train: dict = field(default_factory=dict)
    relaxation: RelaxationChoice = field(default_factory=RelaxationChoice)
    seeds: tuple = DEFAULT_SEEDS
    output_dir: str = None
    name: str = "run"

    @property
    def head(self):
        return "sigmoid" if self.dataset.label_kind == "attributes" else "softmax"

    @property
    def method(self):
        if self.relaxation.kind is None or self.train.get("lambda_u", 1.0) == 0:
            return METHOD_NAMES[None]
        return self.relaxation.method

    def train_config(self, seed=0):
        return TrainConfig(relaxation=self.relaxation.build(), seed=seed, **self.train)

    def with_seeds(self, seeds):
        return replace(self, seeds=_check_seeds(seeds))

    def to_dict(self):
        """Config echo for reports. ``output_dir`` is left out so reruns elsewhere match."""
        return {
            "name": self.name,
            "dataset": self.dataset.to_dict(),
            "model": {"hidden": list(self.hidden), "activation": self.activation, "head": self.head},
            "train": dict(self.train),
            "relaxation": self.relaxation.to_dict(),
            "seeds": list(self.seeds),
        }


def _check_seeds(seeds):
    seeds = tuple(seeds)
    if not seeds:
        raise ConfigError("seed list must be nonempty", "seeds")
    for s in seeds:
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise ConfigError(f"seeds must be non-negative integers, got {s!r}", "seeds")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("duplicate seed", "seeds")
    return seeds


def parse_seed_list(text):
    """``"0,1,2"`` -> ``(0, 1, 2)``."""
    try:
        seeds = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"not a comma-separated integer list: {text!r}", "seeds") from None
    return _check_seeds(seeds)


def _dataset_spec(raw, base_dir):
    section = _section(raw, "dataset")
    if section is None:
        raise ConfigError("missing section", "dataset")
    _check_keys(section, ("generator", "params", "rules", "rules_file"), "dataset")
    gen = section.get("generator")
    if gen not in GENERATORS:
        raise ConfigError(f"unknown generator {gen!r}; choose from {sorted(GENERATORS)}", "dataset.generator")
    params = _section(section, "params", {})
    allowed = set(inspect.signature(GENERATORS[gen]).parameters) - {"seed", "rules", "n_attributes", "mix"}
    if gen == "gauss1d":
        allowed |= set(_MIX_KEYS)
    _check_keys(params, allowed, "dataset.params")
    rules = _read_rules(section, "dataset", base_dir)
    if gen == "attributes" and rules is None:
        raise ConfigError("attribute tasks need rules or rules_file", "dataset.rules")
    return DatasetSpec(gen, dict(params), rules)


def _relaxation_choice(raw, dataset, base_dir):
    section = raw.get("relaxation")
    if section is None:
        return RelaxationChoice()
    if not isinstance(section, dict):
        raise ConfigError("must be an object or null", "relaxation")
    _check_keys(section, ("kind", "temperature", "g", "epsilon", "rules", "rules_file"), "relaxation")
    kind = section.get("kind", "none")
    if kind in (None, "none", "supervised"):
        return RelaxationChoice()
    try:
        kind = RelaxationKind(kind)
    except ValueError:
        names = [k.value for k in RelaxationKind]
        raise ConfigError(f"unknown kind {kind!r}; choose from {names} or 'none'", "relaxation.kind") from None
    g = section.get("g", "power")
    if g not in ("identity", "power"):
        raise ConfigError("must be 'identity' or 'power'", "relaxation.g")
    rules = _read_rules(section, "relaxation", base_dir)
    if kind is RelaxationKind.COMPILED_RULES:
        rules = rules if rules is not None else dataset.rules
        if rules is None:
            raise ConfigError("rule relaxation needs rules (here or in the dataset)", "relaxation.rules")
    choice = RelaxationChoice(
        kind,
        temperature=section.get("temperature", 10.0),
        g=g,
        epsilon=section.get("epsilon", DEFAULT_EPSILON),
        rules=rules if kind is RelaxationKind.COMPILED_RULES else None,
    )
    try:
        choice.build()
    except ConfigError as exc:
        raise ConfigError(str(exc), "relaxation") from None
    except ValueError as exc:
        raise ConfigError(str(exc), "relaxation") from None
    return choice


def config_from_dict(raw, base_dir="."):
    """Validate a parsed JSON config. Every failure is a ConfigError naming its field."""
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", "config")
    _check_keys(raw, ("name", "dataset", "model", "train", "relaxation", "seeds", "output_dir"), "config")
    dataset = _dataset_spec(raw, base_dir)

    model = _section(raw, "model", {})
    _check_keys(model, ("hidden", "activation", "head"), "model")
    hidden = model.get("hidden", [64, 64])
    if not isinstance(hidden, list) or not all(isinstance(h, int) and h >= 1 for h in hidden):
        raise ConfigError("must be a list of positive layer widths", "model.hidden")
    activation = model.get("activation", "relu")
    if activation not in ("relu", "tanh"):
        raise ConfigError("must be 'relu' or 'tanh'", "model.activation")

    train = _section(raw, "train", {})
    _check_keys(train, TRAIN_KEYS, "train")
    try:
        TrainConfig(**train)
    except ConfigError as exc:
        raise ConfigError(exc.message, f"train.{exc.field}") from None
    except TypeError as exc:
        raise ConfigError(str(exc), "train") from None

    relaxation = _relaxation_choice(raw, dataset, base_dir)
    cfg = ExperimentConfig(
        dataset=dataset,
        hidden=tuple(hidden),
        activation=activation,
        train=dict(train),
        relaxation=relaxation,
        seeds=_check_seeds(raw.get("seeds", DEFAULT_SEEDS)),
        output_dir=raw.get("output_dir"),
        name=raw.get("name", "run"),
    )
    head = model.get("head")
    if head is not None and head != cfg.head:
        raise ConfigError(f"{dataset.generator!r} data needs the {cfg.head} head", "model.head")
    try:
        check_compatible(cfg.head, dataset.n_outputs(), relaxation.build())
    except ConfigError as exc:
        raise ConfigError(exc.message, "relaxation") from None
    # cheap dry run of the generator catches bad parameter values up front
    try:
        dataset.build(cfg.seeds[0])
    except ConfigError as exc:
        raise ConfigError(exc.message, f"dataset.params.{exc.field}") from None
    return cfg


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {str(path)!r} does not exist", "config")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "config") from None
    return config_from_dict(raw, base_dir=path.parent)
