"""Central finite-difference checks for every analytic gradient in the package."""

import logging
from dataclasses import dataclass

import numpy as np

from .logic import GFunction, compile_relaxation, enumerate_valid, parse_rules
from .nn import Network
from .relaxations import RelaxationKind, RelaxationSpec, batch_loss_grad
from .training import TrainConfig, loss_and_grad

logger = logging.getLogger(__name__)

POINTWISE_TOL = 1e-4
NETWORK_TOL = 1e-3


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_rel_error: float
    tolerance: float

    @property
    def passed(self):
        return bool(np.isfinite(self.max_rel_error) and self.max_rel_error < self.tolerance)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<46s} max_rel_err={self.max_rel_error:.3e}  tol={self.tolerance:.0e}"


def rel_error(analytic, numeric):
    """Norm-wise relative error ``|a - n| / max(|a|, |n|)``."""
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / scale)


def finite_difference(f, x, h):
    """Central-difference gradient of scalar ``f`` at ``x``."""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        orig = x.flat[i]
        x.flat[i] = orig + h
        fp = f(x)
        x.flat[i] = orig - h
        fm = f(x)
        x.flat[i] = orig
        grad.flat[i] = (fp - fm) / (2.0 * h)
    return grad


def pointwise_check(name, value_grad, points, h=1e-6, tol=POINTWISE_TOL):
    """Check ``value_grad(batch) -> (values, grads)`` at each row of ``points``."""
    worst = 0.0
    for p in points:
        _, grad = value_grad(p[None, :])
        numeric = finite_difference(lambda x: value_grad(x[None, :])[0][0], p, h)
        worst = max(worst, rel_error(grad[0], numeric))
    return CheckResult(name, worst, tol)


def simplex_points(n, k, rng, floor=0.02):
    """Random simplex points with every component at least ``floor``."""
    raw = rng.dirichlet(np.ones(k), size=n)
    return floor + (1.0 - k * floor) * raw


def box_points(n, k, rng, margin=0.05):
    return rng.uniform(margin, 1.0 - margin, size=(n, k))


def relaxation_checks(n_points=100, seed=0):
    rng = np.random.default_rng(seed)
    results = []
    specs = [
        ("entropy", RelaxationSpec(RelaxationKind.ENTROPY)),
        ("exclusivity", RelaxationSpec(RelaxationKind.EXCLUSIVITY)),
        ("pseudo_label", RelaxationSpec(RelaxationKind.PSEUDO_LABEL)),
        ("dp(T=10)", RelaxationSpec(RelaxationKind.DET_PRIOR, temperature=10.0)),
        ("dp(T=2)", RelaxationSpec(RelaxationKind.DET_PRIOR, temperature=2.0)),
    ]
    for label, spec in specs:
        for k in (2, 4):
            pts = simplex_points(n_points, k, rng)
            results.append(
                pointwise_check(f"relaxations/{label}/K={k}", lambda t, s=spec: batch_loss_grad(s, t), pts)
            )
    return results


def _rule_relaxations():
    cases = [
        ("exactly_one(a,b,c)", ["a", "b", "c"], GFunction.identity()),
        ("legs -> !fins", ["legs", "fins"], GFunction.power(10.0)),
        ("exactly_one(c1,c2,c3)\nc1 -> extra", ["c1", "c2", "c3", "extra"], GFunction.power(10.0)),
        ("(a | b) & !c\nd <-> a", ["a", "b", "c", "d"], GFunction.power(3.0)),
    ]
    out = []
    for text, attrs, g in cases:
        valid = enumerate_valid(parse_rules(text, attrs), len(attrs))
        out.append((text.replace("\n", "; "), g, compile_relaxation(valid, g)))
    return out


def logic_checks(n_points=100, seed=1):
    rng = np.random.default_rng(seed)
    results = []
    for text, g, compiled in _rule_relaxations():
        pts = box_points(n_points, compiled.n_vars, rng)
        name = f"logic/[{text}]/g={g.kind}{'' if g.kind == 'identity' else g.temperature}"
        results.append(pointwise_check(name, compiled.logloss_grad, pts))
    return results


def network_check(name, net, X_l, y_l, X_u, cfg, h=1e-5, tol=NETWORK_TOL):
    """Finite-difference check of the full batch objective w.r.t. every weight."""
    _, gw, gb, _ = loss_and_grad(net, X_l, y_l, X_u, cfg)
    analytic = Network.flatten_grads(gw, gb)
    theta0 = net.get_flat()
    probe = net.copy()

    def f(flat):
        probe.set_flat(flat)
        return loss_and_grad(probe, X_l, y_l, X_u, cfg)[0]

    numeric = finite_difference(f, theta0, h)
    return CheckResult(name, rel_error(analytic, numeric), tol)


def network_checks(seed=2, activation="relu"):
    """One check per (relaxation, head) pair on a 2-16-16-3 network, 8 + 8 points."""
    rng = np.random.default_rng(seed)
    X_l = rng.standard_normal((8, 2))
    X_u = rng.standard_normal((8, 2))
    y_cls = np.arange(8) % 3
    rules = compile_relaxation(
        enumerate_valid(parse_rules("exactly_one(a,b,c)", ["a", "b", "c"]), 3), GFunction.power(10.0)
    )
    attr_rules = compile_relaxation(
        enumerate_valid(parse_rules("a -> !b\nc | a", ["a", "b", "c"]), 3), GFunction.power(10.0)
    )
    valid_vectors = np.array([[int(pol) for _, pol in clause] for clause in attr_rules.dnf.clauses])
    y_attr = valid_vectors[np.arange(8) % len(valid_vectors)]

    cases = [
        ("softmax", "supervised", None, y_cls),
        ("softmax", "entropy", RelaxationSpec(RelaxationKind.ENTROPY), y_cls),
        ("softmax", "exclusivity", RelaxationSpec(RelaxationKind.EXCLUSIVITY), y_cls),
        ("softmax", "pseudo_label", RelaxationSpec(RelaxationKind.PSEUDO_LABEL), y_cls),
        ("softmax", "dp(T=10)", RelaxationSpec(RelaxationKind.DET_PRIOR, temperature=10.0), y_cls),
        ("softmax", "rules", RelaxationSpec(RelaxationKind.COMPILED_RULES, rules=rules), y_cls),
        ("sigmoid", "supervised", None, y_attr),
        ("sigmoid", "rules", RelaxationSpec(RelaxationKind.COMPILED_RULES, rules=attr_rules), y_attr),
    ]
    results = []
    for i, (head, label, spec, y) in enumerate(cases):
        net = Network.initialize((2, 16, 16, 3), activation, head, seed=seed + i)
        for prior in (False, True) if spec is not None else (False,):
            cfg = TrainConfig(relaxation=spec, lambda_u=1.0, apply_prior_to_labelled=prior)
            suffix = "+labelled-prior" if prior else ""
            name = f"network/{head}/{label}{suffix}"
            results.append(network_check(name, net, X_l, y, X_u, cfg))
    return results


def run_all():
    results = relaxation_checks() + logic_checks() + network_checks()
    for r in results:
        logger.info(r.line())
    return results
