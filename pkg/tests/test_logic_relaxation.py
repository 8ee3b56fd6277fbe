import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dssl.exceptions import ConfigError, DomainError, UnsatisfiableRulesError
from dssl.gradcheck import finite_difference, rel_error
from dssl.logic import (
    FALSE,
    TRUE,
    GFunction,
    ValidSet,
    compile_relaxation,
    enumerate_valid,
    parse_formula,
    relaxation_logloss_grad,
    to_dnf,
    truth_table,
)
from dssl.relaxations import RelaxationKind, RelaxationSpec, exclusivity_loss, unsup_loss_grad

from conftest import random_simplex
from logic_helpers import NAMES, formulas


def exactly_one(k):
    names = NAMES[:k]
    return enumerate_valid(parse_formula(f"exactly_one({', '.join(names)})", names), k)


def exclusivity_formula(theta):
    """sum_k theta_k prod_{j != k} (1 - theta_j), row-wise."""
    theta = np.atleast_2d(theta)
    out = np.zeros(theta.shape[0])
    for k in range(theta.shape[1]):
        term = theta[:, k].copy()
        for j in range(theta.shape[1]):
            if j != k:
                term *= 1.0 - theta[:, j]
        out += term
    return out


@pytest.mark.parametrize("k", [2, 3, 4])
def test_identity_exactly_one_equals_exclusivity(k, rng):
    q = compile_relaxation(exactly_one(k), GFunction.identity())
    for theta in (rng.uniform(0, 1, (1000, k)), random_simplex(rng, 1000, k)):
        assert np.max(np.abs(q.value(theta) - exclusivity_formula(theta))) < 1e-12


def test_identity_logloss_matches_exclusivity_loss_k2(rng):
    q = compile_relaxation(exactly_one(2), GFunction.identity())
    spec = RelaxationSpec(RelaxationKind.EXCLUSIVITY)
    theta = random_simplex(rng, 200, 2, floor=1e-3)
    value, grad = relaxation_logloss_grad(q, theta)
    ref_value, ref_grad = unsup_loss_grad(spec, theta)
    np.testing.assert_allclose(value, ref_value, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(grad, ref_grad, rtol=1e-10)
    np.testing.assert_allclose(value, exclusivity_loss(theta), rtol=1e-12, atol=1e-14)


def test_power_oracle_high_precision():
    vs = ValidSet(3, np.array([[1, 1, 0], [0, 0, 1]]))
    q = compile_relaxation(vs, GFunction.power(10.0))
    mpmath.mp.dps = 40
    t = [mpmath.mpf("0.9"), mpmath.mpf("0.9"), mpmath.mpf("0.1")]
    exact = t[0] ** 10 * t[1] ** 10 * (1 - t[2]) ** 10 + (1 - t[0]) ** 10 * (1 - t[1]) ** 10 * t[2] ** 10
    theta = np.array([0.9, 0.9, 0.1])
    assert q.value(theta) == pytest.approx(float(exact), rel=1e-13)
    assert q.log_value(theta) == pytest.approx(float(mpmath.log(exact)), rel=1e-13)


@given(st.integers(1, 5), st.data())
def test_binary_vectors_give_the_indicator(k, data):
    f = data.draw(formulas(NAMES[:k]))
    vs = enumerate_valid(f, k)
    q = compile_relaxation(vs, GFunction.power(data.draw(st.sampled_from([1.0, 3.0, 10.0]))))
    table = truth_table(k).astype(float)
    expected = vs.contains_rows(table).astype(float)
    np.testing.assert_array_equal(q.value(table), expected)


def test_vacuous_rules(rng):
    q = compile_relaxation(enumerate_valid(TRUE, 3), GFunction.identity())
    theta = rng.uniform(0.01, 0.99, (100, 3))
    value, grad = relaxation_logloss_grad(q, theta)
    np.testing.assert_allclose(value, 0.0, atol=1e-12)
    np.testing.assert_allclose(grad, 0.0, atol=1e-9)
    qp = compile_relaxation(enumerate_valid(TRUE, 3), GFunction.power(4.0))
    expected = np.log(theta**4 + (1 - theta) ** 4).sum(axis=1)
    np.testing.assert_allclose(qp.log_value(theta), expected, rtol=1e-12)


def test_logloss_maximal_on_valid_set():
    vs = exactly_one(3)
    q = compile_relaxation(vs, GFunction.power(10.0))
    for row in vs:
        assert relaxation_logloss_grad(q, np.array(row, dtype=float))[0] == pytest.approx(0.0, abs=1e-5)
    assert relaxation_logloss_grad(q, np.array([1.0, 1.0, 0.0]))[0] < -10


@pytest.mark.parametrize("g", [GFunction.identity(), GFunction.power(10.0)], ids=["identity", "power10"])
def test_gradient_finite_differences(g, rng):
    vs = enumerate_valid(parse_formula("exactly_one(a, b, c) & (a -> d)", NAMES[:4]), 4)
    q = compile_relaxation(vs, g)
    for theta in rng.uniform(0.05, 0.95, (100, 4)):
        _, grad = relaxation_logloss_grad(q, theta)
        numeric = finite_difference(lambda t: relaxation_logloss_grad(q, t)[0], theta, 1e-6)
        assert rel_error(grad, numeric) < 1e-4


def test_temperature_monotone_decrease(rng):
    vs = enumerate_valid(parse_formula("a -> !b", NAMES[:3]), 3)
    for theta in rng.uniform(0.05, 0.95, (50, 3)):
        vals = [compile_relaxation(vs, GFunction.power(t)).value(theta) for t in (1.0, 10.0, 100.0)]
        assert vals[0] > vals[1] > vals[2]


def _hill_climb(q, k, seed, max_steps=30000, lr=0.01):
    """Projected gradient ascent on log q from 1000 random starts, run until
    every start sits within 1e-3 of a vertex (or ``max_steps``).

    Steps are scaled so no coordinate moves more than ``lr``; near clamped
    corners the raw gradient is of order 1/epsilon and would bounce between
    faces.
    """
    theta = np.random.default_rng(seed).uniform(0.0, 1.0, (1000, k))
    for step in range(max_steps):
        _, grad = q.logloss_grad(theta)
        scale = np.maximum(1.0, np.abs(grad).max(axis=1, keepdims=True))
        theta = np.clip(theta + lr * grad / scale, 0.0, 1.0)
        if step % 500 == 0 and np.max(np.abs(theta - np.round(theta))) < 1e-3:
            break
    return theta


@pytest.mark.parametrize("k,rules", [
    (2, "a | b"),
    (3, "exactly_one(a, b, c)"),
    (4, "(a -> !b) & (c <-> d)"),
])
def test_hill_climbing_ends_in_valid_set(k, rules):
    vs = enumerate_valid(parse_formula(rules, NAMES[:k]), k)
    q = compile_relaxation(vs, GFunction.power(3.0))
    theta = _hill_climb(q, k, seed=k)
    corners = np.round(theta)
    assert np.max(np.abs(theta - corners)) < 1e-3
    assert vs.contains_rows(corners).all()


def test_hill_climbing_identity_without_adjacent_valid_vectors():
    # no two valid vectors differ in one bit, so every maximum is a vertex
    vs = exactly_one(4)
    q = compile_relaxation(vs, GFunction.identity())
    theta = _hill_climb(q, 4, seed=0)
    corners = np.round(theta)
    assert np.max(np.abs(theta - corners)) < 1e-3
    assert vs.contains_rows(corners).all()


def test_identity_plateau_between_adjacent_valid_vectors():
    # with g = identity the edge between valid 10 and 11 is flat at q = 1
    q = compile_relaxation(enumerate_valid(parse_formula("a", ["a", "b"]), 2), GFunction.identity())
    edge = np.column_stack([np.ones(5), np.linspace(0.1, 0.9, 5)])
    np.testing.assert_allclose(q.value(edge), 1.0)
    sharp = compile_relaxation(enumerate_valid(parse_formula("a", ["a", "b"]), 2), GFunction.power(3.0))
    assert np.all(sharp.value(edge) < 1.0)


def test_weights():
    vs = exactly_one(2)
    q = compile_relaxation(vs, GFunction.identity(), weights={"10": 0.25, (0, 1): 0.75})
    assert q.weighted
    assert q.value(np.array([1.0, 0.0])) == 0.25
    assert q.value(np.array([0.0, 1.0])) == 0.75
    with pytest.raises(ConfigError):
        compile_relaxation(vs, GFunction.identity(), weights={"11": 1.0})
    with pytest.raises(ConfigError):
        compile_relaxation(vs, GFunction.identity(), weights={"10": -1.0})
    with pytest.raises(ConfigError):
        compile_relaxation(to_dnf(parse_formula("a", ["a", "b"]), 2), weights={"10": 1.0})


def test_unsatisfiable_rules():
    q = compile_relaxation(enumerate_valid(FALSE, 2))
    with pytest.raises(UnsatisfiableRulesError):
        relaxation_logloss_grad(q, np.array([0.5, 0.5]))
    assert q.value(np.array([0.5, 0.5])) == 0.0


def test_compact_dnf_mode_can_double_count():
    names = ["a", "b"]
    dnf = to_dnf(parse_formula("a | b", names), 2)
    q = compile_relaxation(dnf, GFunction.identity())
    assert not q.minterm
    assert q.value(np.array([1.0, 1.0])) == 2.0
    exact = compile_relaxation(enumerate_valid(parse_formula("a | b", names), 2))
    assert exact.minterm and exact.value(np.array([1.0, 1.0])) == 1.0


def test_g_function_contract():
    for g in (GFunction.identity(), GFunction.power(0.5), GFunction.power(10.0)):
        assert g(0.0) == 0.0 and g(1.0) == 1.0
        grid = np.linspace(0, 1, 101)
        assert np.all(np.diff(g(grid)) >= 0)
    with pytest.raises(ConfigError):
        GFunction("cubic")
    with pytest.raises(ConfigError):
        GFunction.power(0.0)
    assert GFunction.power(10).to_dict() == {"kind": "power", "temperature": 10.0}


def test_input_validation():
    q = compile_relaxation(exactly_one(2))
    with pytest.raises(DomainError):
        relaxation_logloss_grad(q, np.array([1.5, 0.0]))
    with pytest.raises(TypeError):
        compile_relaxation("a | b")


def test_clamping_keeps_values_finite():
    q = compile_relaxation(exactly_one(3), GFunction.power(10.0))
    value, grad = relaxation_logloss_grad(q, np.array([[1.0, 1.0, 1.0], [0.0, 0.0, 0.0]]))
    assert np.all(np.isfinite(value)) and np.all(np.isfinite(grad))
    assert math.isfinite(q.log_value(np.array([0.0, 0.0, 0.0])))
