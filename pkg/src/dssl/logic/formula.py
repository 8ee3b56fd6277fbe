"""Propositional formula AST over indexed label attributes.

Nodes compare structurally; source positions are carried for error messages
but excluded from equality.
"""

from dataclasses import dataclass, field

import numpy as np

# Binding strength, loosest first.
PREC_IFF, PREC_IMPLIES, PREC_OR, PREC_AND, PREC_NOT, PREC_ATOM = range(6)


class Formula:
    precedence = PREC_ATOM

    def evaluate(self, table):
        """Evaluate on a boolean array of shape (n, K); returns shape (n,)."""
        raise NotImplementedError

    def variables(self):
        raise NotImplementedError

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Const(Formula):
    value: bool
    pos: tuple = field(default=None, compare=False, repr=False)

    def evaluate(self, table):
        return np.full(table.shape[0], self.value, dtype=bool)

    def variables(self):
        return frozenset()


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True, eq=True)
class Var(Formula):
    name: str
    index: int
    pos: tuple = field(default=None, compare=False, repr=False)

    def evaluate(self, table):
        return table[:, self.index].astype(bool)

    def variables(self):
        return frozenset([self])


@dataclass(frozen=True, eq=True)
class Not(Formula):
    arg: Formula
    pos: tuple = field(default=None, compare=False, repr=False)
    precedence = PREC_NOT

    def evaluate(self, table):
        return ~self.arg.evaluate(table)

    def variables(self):
        return self.arg.variables()


@dataclass(frozen=True, eq=True)
class And(Formula):
    args: tuple
    pos: tuple = field(default=None, compare=False, repr=False)
    precedence = PREC_AND

    def evaluate(self, table):
        out = np.ones(table.shape[0], dtype=bool)
        for a in self.args:
            out &= a.evaluate(table)
        return out

    def variables(self):
        return frozenset().union(*(a.variables() for a in self.args))


@dataclass(frozen=True, eq=True)
class Or(Formula):
    args: tuple
    pos: tuple = field(default=None, compare=False, repr=False)
    precedence = PREC_OR

    def evaluate(self, table):
        out = np.zeros(table.shape[0], dtype=bool)
        for a in self.args:
            out |= a.evaluate(table)
        return out

    def variables(self):
        return frozenset().union(*(a.variables() for a in self.args))


@dataclass(frozen=True, eq=True)
class Implies(Formula):
    left: Formula
    right: Formula
    pos: tuple = field(default=None, compare=False, repr=False)
    precedence = PREC_IMPLIES

    def evaluate(self, table):
        return ~self.left.evaluate(table) | self.right.evaluate(table)

    def variables(self):
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True, eq=True)
class Iff(Formula):
    left: Formula
    right: Formula
    pos: tuple = field(default=None, compare=False, repr=False)
    precedence = PREC_IFF

    def evaluate(self, table):
        return self.left.evaluate(table) == self.right.evaluate(table)

    def variables(self):
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True, eq=True)
class ExactlyOne(Formula):
    """Macro: exactly one of ``vars`` is true."""

    vars: tuple
    pos: tuple = field(default=None, compare=False, repr=False)

    def expand(self):
        terms = []
        for v in self.vars:
            rest = [Not(w) for w in self.vars if w is not v]
            terms.append(And((v, *rest)) if rest else v)
        return Or(tuple(terms))

    def evaluate(self, table):
        cols = np.stack([v.evaluate(table) for v in self.vars], axis=1)
        return cols.sum(axis=1) == 1

    def variables(self):
        return frozenset(self.vars)


def conjoin(formulas):
    formulas = tuple(formulas)
    if not formulas:
        return TRUE
    if len(formulas) == 1:
        return formulas[0]
    return And(formulas)


def truth_table(n_vars):
    """All ``2**n_vars`` assignments as a uint8 array, lexicographic order.

    Row ``i`` spells ``i`` in binary with attribute 0 as the most significant bit.
    """
    idx = np.arange(2**n_vars, dtype=np.int64)
    shifts = np.arange(n_vars - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


_BINARY_OPS = {And: " & ", Or: " | ", Implies: " -> ", Iff: " <-> "}


def to_text(f):
    """Render ``f`` in the rule-file syntax, with the fewest parentheses that
    reparse to the same tree."""
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Var):
        return f.name
    if isinstance(f, ExactlyOne):
        return "exactly_one(" + ", ".join(v.name for v in f.vars) + ")"
    if isinstance(f, Not):
        return "!" + _wrap(f.arg, f.arg.precedence < PREC_NOT)
    if isinstance(f, (And, Or)):
        op = _BINARY_OPS[type(f)]
        return op.join(_wrap(a, a.precedence <= f.precedence) for a in f.args)
    if isinstance(f, Implies):
        # right-associative
        left = _wrap(f.left, f.left.precedence <= PREC_IMPLIES)
        right = _wrap(f.right, f.right.precedence < PREC_IMPLIES)
        return left + " -> " + right
    if isinstance(f, Iff):
        # left-associative
        left = _wrap(f.left, f.left.precedence < PREC_IFF)
        right = _wrap(f.right, f.right.precedence <= PREC_IFF)
        return left + " <-> " + right
    raise TypeError(f"not a formula: {f!r}")


def _wrap(f, parens):
    text = to_text(f)
    return f"({text})" if parens else text
