"""Shared strategies and a reference evaluator for the logic tests."""

import itertools

import numpy as np
from hypothesis import strategies as st

from dssl.logic import And, Const, ExactlyOne, Iff, Implies, Not, Or, Var

NAMES = ["a", "b", "c", "d", "e", "f"]


def ref_eval(f, assignment):
    """Plain recursive evaluation on a dict name -> bool."""
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Var):
        return assignment[f.name]
    if isinstance(f, Not):
        return not ref_eval(f.arg, assignment)
    if isinstance(f, And):
        return all(ref_eval(a, assignment) for a in f.args)
    if isinstance(f, Or):
        return any(ref_eval(a, assignment) for a in f.args)
    if isinstance(f, Implies):
        return (not ref_eval(f.left, assignment)) or ref_eval(f.right, assignment)
    if isinstance(f, Iff):
        return ref_eval(f.left, assignment) == ref_eval(f.right, assignment)
    if isinstance(f, ExactlyOne):
        return sum(assignment[v.name] for v in f.vars) == 1
    raise TypeError(f)


def ref_models(f, names):
    """Satisfying assignments as bit tuples, attribute 0 first."""
    out = []
    for bits in itertools.product((0, 1), repeat=len(names)):
        if ref_eval(f, dict(zip(names, map(bool, bits)))):
            out.append(bits)
    return out


def formulas(names, max_leaves=12):
    variables = st.sampled_from([Var(n, i) for i, n in enumerate(names)])
    leaves = st.one_of(variables, variables, variables, st.sampled_from([Const(True), Const(False)]))

    def extend(children):
        pairs = st.lists(children, min_size=2, max_size=3).map(tuple)
        return st.one_of(
            children.map(Not),
            pairs.map(And),
            pairs.map(Or),
            st.tuples(children, children).map(lambda t: Implies(*t)),
            st.tuples(children, children).map(lambda t: Iff(*t)),
            st.lists(variables, min_size=1, max_size=3, unique=True).map(lambda v: ExactlyOne(tuple(v))),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def random_formula(rng, names, depth=4):
    """Seeded random formula for fixed-size sweeps outside hypothesis."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.05:
            return Const(bool(rng.integers(2)))
        i = int(rng.integers(len(names)))
        return Var(names[i], i)
    op = int(rng.integers(6))
    sub = lambda: random_formula(rng, names, depth - 1)  # noqa: E731
    if op == 0:
        return Not(sub())
    if op == 1:
        return And(tuple(sub() for _ in range(int(rng.integers(2, 4)))))
    if op == 2:
        return Or(tuple(sub() for _ in range(int(rng.integers(2, 4)))))
    if op == 3:
        return Implies(sub(), sub())
    if op == 4:
        return Iff(sub(), sub())
    k = int(rng.integers(1, min(4, len(names)) + 1))
    idx = sorted(rng.choice(len(names), size=k, replace=False))
    return ExactlyOne(tuple(Var(names[i], int(i)) for i in idx))


def to_bits(vectors):
    return [tuple(int(b) for b in row) for row in np.asarray(vectors)]
