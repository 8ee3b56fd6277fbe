"""Recursive-descent parser for the rule language.

Grammar, loosest binding first::

    iff     := implies ("<->" implies)*        left-associative
    implies := or ("->" implies)?              right-associative
    or      := and ("|" and)*
    and     := unary ("&" unary)*
    unary   := "!" unary | atom
    atom    := NAME | "true" | "false" | "(" iff ")"
             | "exactly_one" "(" NAME ("," NAME)* ")"

A rule text holds one formula per non-empty line; ``#`` starts a comment.
All lines are conjoined.
"""

import re
from pathlib import Path

from .formula import And, Const, ExactlyOne, Iff, Implies, Not, Or, Var, conjoin


class RuleSyntaxError(ValueError):
    def __init__(self, message, line, column):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class UndeclaredVariableError(RuleSyntaxError):
    pass


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<iff><->)
  | (?P<implies>->)
  | (?P<op>[!&|(),])
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"true", "false", "exactly_one"}


def _tokenize(line, lineno):
    tokens = []
    pos = 0
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if m is None:
            raise RuleSyntaxError(f"unexpected character {line[pos]!r}", lineno, pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            if kind == "op":
                kind = text
            elif kind in ("iff", "implies"):
                kind = text
            tokens.append((kind, text, (lineno, pos + 1)))
        pos = m.end()
    tokens.append(("eof", "", (lineno, len(line) + 1)))
    return tokens


class _LineParser:
    def __init__(self, tokens, index_of):
        self.tokens = tokens
        self.i = 0
        self.index_of = index_of

    def peek(self):
        return self.tokens[self.i][0]

    def take(self, kind=None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            self.fail(f"expected {kind!r}")
        self.i += 1
        return tok

    def fail(self, message):
        kind, text, (line, col) = self.tokens[self.i]
        found = "end of line" if kind == "eof" else repr(text)
        raise RuleSyntaxError(f"{message}, found {found}", line, col)

    def parse(self):
        f = self.iff()
        if self.peek() != "eof":
            self.fail("unexpected token")
        return f

    def iff(self):
        pos = self.tokens[self.i][2]
        left = self.implies()
        while self.peek() == "<->":
            self.take()
            left = Iff(left, self.implies(), pos=pos)
        return left

    def implies(self):
        pos = self.tokens[self.i][2]
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implies(), pos=pos)
        return left

    def disjunction(self):
        pos = self.tokens[self.i][2]
        args = [self.conjunction()]
        while self.peek() == "|":
            self.take()
            args.append(self.conjunction())
        return args[0] if len(args) == 1 else Or(tuple(args), pos=pos)

    def conjunction(self):
        pos = self.tokens[self.i][2]
        args = [self.unary()]
        while self.peek() == "&":
            self.take()
            args.append(self.unary())
        return args[0] if len(args) == 1 else And(tuple(args), pos=pos)

    def unary(self):
        if self.peek() == "!":
            pos = self.take()[2]
            return Not(self.unary(), pos=pos)
        return self.atom()

    def atom(self):
        kind, text, pos = self.tokens[self.i]
        if kind == "(":
            self.take()
            inner = self.iff()
            if self.peek() != ")":
                raise RuleSyntaxError("unclosed parenthesis", *pos)
            self.take()
            return inner
        if kind != "name":
            self.fail("expected a variable, constant or '('")
        self.take()
        if text == "true":
            return Const(True, pos=pos)
        if text == "false":
            return Const(False, pos=pos)
        if text == "exactly_one":
            paren = self.take("(")[2]
            names = [self.var()]
            while self.peek() == ",":
                self.take()
                names.append(self.var())
            if self.peek() != ")":
                if self.peek() == "eof":
                    raise RuleSyntaxError("unclosed parenthesis", *paren)
                self.fail("expected ',' or ')'")
            self.take()
            return ExactlyOne(tuple(names), pos=pos)
        return self._resolve(text, pos)

    def var(self):
        kind, text, pos = self.tokens[self.i]
        if kind != "name" or text in _KEYWORDS:
            self.fail("expected a variable name")
        self.take()
        return self._resolve(text, pos)

    def _resolve(self, name, pos):
        if name not in self.index_of:
            raise UndeclaredVariableError(f"undeclared variable {name!r}", *pos)
        return Var(name, self.index_of[name], pos=pos)


def _index_attributes(attributes):
    attributes = list(attributes)
    index_of = {}
    for i, name in enumerate(attributes):
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name) or name in _KEYWORDS:
            raise ValueError(f"invalid attribute name {name!r}")
        if name in index_of:
            raise ValueError(f"duplicate attribute name {name!r}")
        index_of[name] = i
    return index_of


def parse_formula(text, attributes, lineno=1):
    """Parse a single formula."""
    return _LineParser(_tokenize(text, lineno), _index_attributes(attributes)).parse()


def parse_rules(text, attributes):
    """Parse newline-separated rules into their conjunction.

    An empty rule set is the constant ``true``.
    """
    index_of = _index_attributes(attributes)
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        rules.append(_LineParser(_tokenize(line, lineno), index_of).parse())
    return conjoin(rules)


def parse_rule_file_text(text):
    """Parse rule-file contents. Returns ``(attributes, formula)``.

    The first non-comment line must be ``attrs: name1, name2, ...``.
    Line numbers in errors refer to the whole file.
    """
    lines = text.splitlines()
    for i, raw in enumerate(lines):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"attrs\s*:\s*(.*)", line)
        if m is None:
            raise RuleSyntaxError("first rule-file line must be 'attrs: name, ...'", i + 1, 1)
        attributes = [a.strip() for a in m.group(1).split(",") if a.strip()]
        if not attributes:
            raise RuleSyntaxError("no attributes declared", i + 1, 1)
        body = "\n" * (i + 1) + "\n".join(lines[i + 1 :])
        return attributes, parse_rules(body, attributes)
    raise RuleSyntaxError("missing 'attrs:' header", 1, 1)


def load_rule_file(path):
    return parse_rule_file_text(Path(path).read_text(encoding="utf-8"))

