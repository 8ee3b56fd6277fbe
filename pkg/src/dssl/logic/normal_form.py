"""Disjunctive normal form and valid-label enumeration."""

from dataclasses import dataclass
from itertools import product

import numpy as np

from ..exceptions import ResourceLimitError
from .formula import And, Const, ExactlyOne, Iff, Implies, Not, Or, Var, truth_table

MAX_TRUTH_TABLE_VARS = 20
DEFAULT_MAX_CLAUSES = 4096


class ClauseLimitError(ResourceLimitError):
    pass


@dataclass(frozen=True)
class DnfForm:
    """A disjunction of conjunctive clauses over ``n_vars`` attributes.

    Each clause is a sorted tuple of ``(index, polarity)`` pairs; attributes a
    clause does not mention are free. An empty clause is ``true``; an empty
    clause list is ``false``.
    """

    n_vars: int
    clauses: tuple

    def is_minterm_form(self):
        return all(len(c) == self.n_vars for c in self.clauses)

    def evaluate(self, table):
        table = np.asarray(table).astype(bool)
        out = np.zeros(table.shape[0], dtype=bool)
        for clause in self.clauses:
            hit = np.ones(table.shape[0], dtype=bool)
            for idx, pol in clause:
                hit &= table[:, idx] == pol
            out |= hit
        return out

    def to_text(self, names=None):
        names = names or [f"z{i}" for i in range(self.n_vars)]
        if not self.clauses:
            return "false"
        parts = []
        for clause in self.clauses:
            lits = [(names[i] if pol else "!" + names[i]) for i, pol in clause]
            if not lits:
                parts.append("true")
            elif len(lits) == 1 or len(self.clauses) == 1:
                parts.append(" & ".join(lits))
            else:
                parts.append("(" + " & ".join(lits) + ")")
        return " | ".join(parts)


@dataclass(frozen=True, eq=False)
class ValidSet:
    """The binary label vectors that satisfy a rule set, one per row."""

    n_vars: int
    vectors: np.ndarray

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=np.uint8).reshape(-1, self.n_vars)
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)

    def __len__(self):
        return self.vectors.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ValidSet):
            return NotImplemented
        return self.n_vars == other.n_vars and np.array_equal(self.vectors, other.vectors)

    def __hash__(self):
        return hash((self.n_vars, self.vectors.tobytes()))

    def __contains__(self, vector):
        v = np.asarray(vector, dtype=np.uint8)
        return bool(np.any(np.all(self.vectors == v, axis=1)))

    def __iter__(self):
        return (tuple(int(b) for b in row) for row in self.vectors)

    def as_strings(self):
        return ["".join(str(int(b)) for b in row) for row in self.vectors]

    def to_dnf(self):
        """Minterm DNF: one complete clause per valid vector."""
        clauses = tuple(
            tuple((k, bool(b)) for k, b in enumerate(row)) for row in self.vectors
        )
        return DnfForm(self.n_vars, clauses)

    def contains_rows(self, labels):
        """Boolean mask: which rows of ``labels`` (n, K) are valid."""
        labels = np.asarray(labels).astype(np.int64)
        weights = 1 << np.arange(self.n_vars - 1, -1, -1, dtype=np.int64)
        codes = labels @ weights
        valid_codes = self.vectors.astype(np.int64) @ weights
        return np.isin(codes, valid_codes)


def _nnf(f, negate=False):
    """Negation normal form over Var / Not(Var) / And / Or / Const."""
    if isinstance(f, Const):
        return Const(f.value != negate)
    if isinstance(f, Var):
        return Not(f) if negate else f
    if isinstance(f, Not):
        return _nnf(f.arg, not negate)
    if isinstance(f, ExactlyOne):
        return _nnf(f.expand(), negate)
    if isinstance(f, And):
        args = tuple(_nnf(a, negate) for a in f.args)
        return Or(args) if negate else And(args)
    if isinstance(f, Or):
        args = tuple(_nnf(a, negate) for a in f.args)
        return And(args) if negate else Or(args)
    if isinstance(f, Implies):
        return _nnf(Or((Not(f.left), f.right)), negate)
    if isinstance(f, Iff):
        both = And((f.left, f.right))
        neither = And((Not(f.left), Not(f.right)))
        return _nnf(Or((both, neither)), negate)
    raise TypeError(f"not a formula: {f!r}")


def _merge(c1, c2):
    """Conjoin two clauses (dicts index -> polarity); None if contradictory."""
    out = dict(c1)
    for k, pol in c2.items():
        if out.get(k, pol) != pol:
            return None
        out[k] = pol
    return out


def _simplify(clauses):
    # dedupe, then drop clauses subsumed by a smaller one
    unique = {frozenset(c.items()): c for c in clauses}
    keys = sorted(unique, key=len)
    kept = []
    for key in keys:
        if not any(k <= key for k in kept):
            kept.append(key)
    return [dict(k) for k in kept]


def _dnf_clauses(f, cap):
    if isinstance(f, Const):
        return [{}] if f.value else []
    if isinstance(f, Var):
        return [{f.index: True}]
    if isinstance(f, Not):
        return [{f.arg.index: False}]
    if isinstance(f, Or):
        out = []
        for a in f.args:
            out.extend(_dnf_clauses(a, cap))
            if len(out) > cap:
                out = _simplify(out)
                _check_cap(out, cap)
        return _simplify(out)
    if isinstance(f, And):
        acc = [{}]
        for a in f.args:
            sub = _dnf_clauses(a, cap)
            _check_cap(acc, cap, len(sub))
            acc = [m for c1, c2 in product(acc, sub) if (m := _merge(c1, c2)) is not None]
            acc = _simplify(acc)
            _check_cap(acc, cap)
        return acc
    raise TypeError(f"unexpected node in NNF: {f!r}")


def _check_cap(clauses, cap, factor=1):
    if len(clauses) * max(factor, 1) > cap:
        raise ClauseLimitError(
            f"DNF conversion exceeds {cap} clauses; enumerate the valid set "
            "(enumerate_valid) and compile minterms instead"
        )


def to_dnf(f, n_vars=None, max_clauses=DEFAULT_MAX_CLAUSES):
    """Convert ``f`` to an equivalent :class:`DnfForm`.

    Clauses are simplified by removing contradictions, duplicates and
    subsumed clauses. Raises :class:`ClauseLimitError` once an intermediate
    result exceeds ``max_clauses``.
    """
    if n_vars is None:
        n_vars = 1 + max((v.index for v in f.variables()), default=-1)
    clauses = _dnf_clauses(_nnf(f), max_clauses)
    ordered = sorted(tuple(sorted(c.items())) for c in clauses)
    return DnfForm(n_vars, tuple(ordered))


def enumerate_valid(f, n_vars):
    """All binary vectors of length ``n_vars`` that satisfy ``f``.

    Attribute ``k`` is true exactly when component ``k`` is 1. Rows come out
    in lexicographic order.
    """
    if n_vars > MAX_TRUTH_TABLE_VARS:
        raise ResourceLimitError(
            f"truth-table enumeration is capped at {MAX_TRUTH_TABLE_VARS} attributes, got {n_vars}"
        )
    used = max((v.index for v in f.variables()), default=-1)
    if used >= n_vars:
        raise ValueError(f"formula uses attribute index {used} but n_vars = {n_vars}")
    table = truth_table(n_vars)
    return ValidSet(n_vars, table[f.evaluate(table)])
