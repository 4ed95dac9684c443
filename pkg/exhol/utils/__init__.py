"""
Utility modules for expression parsing and report serialization.
"""

from .expressions import Expression, evaluate, jet_eval, parse_expression, scope_names

__all__ = [
    "Expression",
    "evaluate",
    "jet_eval",
    "parse_expression",
    "scope_names",
]
