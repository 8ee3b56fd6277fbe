"""Rule language, normal forms and compiled rule relaxations."""

from .formula import (
    FALSE,
    TRUE,
    And,
    Const,
    ExactlyOne,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    Var,
    to_text,
    truth_table,
)
from .normal_form import (
    MAX_TRUTH_TABLE_VARS,
    ClauseLimitError,
    DnfForm,
    ValidSet,
    enumerate_valid,
    to_dnf,
)
from .parser import (
    RuleSyntaxError,
    UndeclaredVariableError,
    load_rule_file,
    parse_formula,
    parse_rule_file_text,
    parse_rules,
)
from .relaxation import (
    CompiledRelaxation,
    GFunction,
    compile_relaxation,
    relaxation_logloss_grad,
)


__all__ = [
    "FALSE",
    "TRUE",
    "And",
    "ClauseLimitError",
    "CompiledRelaxation",
    "Const",
    "DnfForm",
    "ExactlyOne",
    "Formula",
    "GFunction",
    "Iff",
    "Implies",
    "MAX_TRUTH_TABLE_VARS",
    "Not",
    "Or",
    "RuleSyntaxError",
    "UndeclaredVariableError",
    "ValidSet",
    "Var",
    "compile_relaxation",
    "enumerate_valid",
    "load_rule_file",
    "parse_formula",
    "parse_rule_file_text",
    "parse_rules",
    "relaxation_logloss_grad",
    "to_dnf",
    "to_text",
    "truth_table",
]
