"""
Scene expression language.

Recursive-descent parser for closed-form scalar expressions and an evaluator
that turns the syntax tree into jets. Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := atom ("^" number)? | "-" factor
    atom   := number | ident | func "(" expr ")" | "(" expr ")"
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .. import jets
from ..exceptions import (
    ExpressionSyntaxError,
    JetDomainError,
    UnknownFunctionError,
    UnknownIdentifierError,
)
from ..jets import JetSeries

logger = logging.getLogger(__name__)

FUNCTIONS: Dict[str, Callable[[JetSeries], JetSeries]] = {
    "sin": jets.sin,
    "cos": jets.cos,
    "tan": jets.tan,
    "exp": jets.exp,
    "log": jets.log,
    "sqrt": jets.sqrt,
    "sinh": jets.sinh,
    "cosh": jets.cosh,
}


class Token:
    """Token kinds produced by the tokenizer."""

    number = "number"
    identifier = "identifier"
    operator = "operator"
    left_paren = "("
    right_paren = ")"
    eof = "eof"

    def __init__(self, typ: str, text: str, offset: int):
        self.typ = typ
        self.text = text
        self.offset = offset

    def __repr__(self) -> str:
        return f"({self.typ}, {self.text!r}@{self.offset})"


# syntax tree --------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str
    index: int


@dataclass(frozen=True)
class Call:
    function: str
    argument: "Node"


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Power:
    base: "Node"
    exponent: float


@dataclass(frozen=True)
class Negate:
    operand: "Node"


Node = Union[Constant, Variable, Call, BinaryOp, Power, Negate]


@dataclass(frozen=True)
class Expression:
    """Parsed expression together with the variable scope it was parsed in."""

    root: Node
    scope: Tuple[str, ...]
    source: str

    def __str__(self) -> str:
        return self.source


def tokenize(source: str) -> List[Token]:
    """Split ``source`` into tokens, tracking byte offsets."""
    tokens: List[Token] = []
    cursor = 0
    length = len(source)
    while cursor < length:
        char = source[cursor]
        if char in " \t\r\n":
            cursor += 1
            continue
        if not char.isascii():
            raise ExpressionSyntaxError(f"Non-ASCII character {char!r}", cursor, source)
        if char in "+-*/^":
            tokens.append(Token(Token.operator, char, cursor))
            cursor += 1
        elif char == "(":
            tokens.append(Token(Token.left_paren, char, cursor))
            cursor += 1
        elif char == ")":
            tokens.append(Token(Token.right_paren, char, cursor))
            cursor += 1
        elif char.isdigit() or char == ".":
            start = cursor
            while cursor < length and (source[cursor].isdigit() or source[cursor] == "."):
                cursor += 1
            if cursor < length and source[cursor] in "eE":
                probe = cursor + 1
                if probe < length and source[probe] in "+-":
                    probe += 1
                if probe < length and source[probe].isdigit():
                    cursor = probe
                    while cursor < length and source[cursor].isdigit():
                        cursor += 1
            text = source[start:cursor]
            try:
                float(text)
            except ValueError:
                raise ExpressionSyntaxError(f"Malformed number {text!r}", start, source)
            tokens.append(Token(Token.number, text, start))
        elif char.isalpha():
            start = cursor
            while cursor < length and source[cursor].isascii() and source[cursor].isalnum():
                cursor += 1
            tokens.append(Token(Token.identifier, source[start:cursor], start))
        else:
            raise ExpressionSyntaxError(f"Unexpected character {char!r}", cursor, source)
    tokens.append(Token(Token.eof, "", length))
    return tokens


class Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, source: str, scope: Sequence[str]):
        self.source = source
        self.scope = list(scope)
        self.tokens = tokenize(source)
        self.position = 0

    def peek(self) -> Token:
        return self.tokens[self.position]

    def advance(self) -> Token:
        token = self.tokens[self.position]
        if token.typ != Token.eof:
            self.position += 1
        return token

    def fail(self, message: str, token: Token) -> None:
        raise ExpressionSyntaxError(message, token.offset, self.source)

    def parse(self) -> Expression:
        root = self.expression()
        token = self.peek()
        if token.typ != Token.eof:
            self.fail(f"Unexpected {token.text!r}", token)
        return Expression(root=root, scope=tuple(self.scope), source=self.source)

    def expression(self) -> Node:
        node = self.term()
        while self.peek().typ == Token.operator and self.peek().text in "+-":
            op = self.advance().text
            node = BinaryOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek().typ == Token.operator and self.peek().text in "*/":
            op = self.advance().text
            node = BinaryOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        token = self.peek()
        if token.typ == Token.operator and token.text == "-":
            self.advance()
            return Negate(self.factor())
        node = self.atom()
        if self.peek().typ == Token.operator and self.peek().text == "^":
            self.advance()
            node = Power(node, self.exponent())
        return node

    def exponent(self) -> float:
        sign = 1.0
        token = self.peek()
        if token.typ == Token.operator and token.text == "-":
            self.advance()
            sign = -1.0
            token = self.peek()
        if token.typ != Token.number:
            self.fail("Expected a numeric exponent", token)
        self.advance()
        return sign * float(token.text)

    def atom(self) -> Node:
        token = self.advance()
        if token.typ == Token.number:
            return Constant(float(token.text))
        if token.typ == Token.identifier:
            if self.peek().typ == Token.left_paren:
                if token.text not in FUNCTIONS:
                    raise UnknownFunctionError(token.text)
                self.advance()
                argument = self.expression()
                closing = self.advance()
                if closing.typ != Token.right_paren:
                    self.fail("Expected ')'", closing)
                return Call(token.text, argument)
            if token.text in FUNCTIONS:
                self.fail(f"Function {token.text!r} needs an argument", self.peek())
            if token.text not in self.scope:
                raise UnknownIdentifierError(token.text, self.scope)
            return Variable(token.text, self.scope.index(token.text))
        if token.typ == Token.left_paren:
            node = self.expression()
            closing = self.advance()
            if closing.typ != Token.right_paren:
                self.fail("Expected ')'", closing)
            return node
        if token.typ == Token.eof:
            self.fail("Unexpected end of expression", token)
        self.fail(f"Unexpected {token.text!r}", token)
        raise AssertionError("unreachable")


def parse_expression(source: str, scope: Sequence[str]) -> Expression:
    """Parse ``source`` with the given variable names in scope."""
    expression = Parser(source, scope).parse()
    logger.debug(f"Parsed expression {source!r} over {list(scope)}")
    return expression


# evaluation ---------------------------------------------------------------


def evaluate(node: Union[Expression, Node], inputs: JetSeries) -> JetSeries:
    """Evaluate the tree with jets substituted for the scope variables.

    ``inputs`` has shape (len(scope),); the result is a scalar jet in the
    variables of ``inputs``, which makes composition (e.g. a metric evaluated
    along an embedding) a plain evaluation.
    """
    if isinstance(node, Expression):
        node = node.root
    if isinstance(node, Constant):
        return JetSeries.constant(node.value, inputs.space, inputs.base)
    if isinstance(node, Variable):
        return inputs[node.index]
    if isinstance(node, Negate):
        return -evaluate(node.operand, inputs)
    if isinstance(node, Call):
        return FUNCTIONS[node.function](evaluate(node.argument, inputs))
    if isinstance(node, Power):
        base = evaluate(node.base, inputs)
        if float(node.exponent).is_integer():
            return jets.power(base, int(node.exponent))
        if np.any(base.value <= 0):
            raise JetDomainError(
                f"Non-integer power {node.exponent} of nonpositive base {base.value}"
            )
        return jets.exp(node.exponent * jets.log(base))
    if isinstance(node, BinaryOp):
        left = evaluate(node.left, inputs)
        right = evaluate(node.right, inputs)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            if abs(float(right.value)) < jets.ZERO_TOL:
                raise JetDomainError("Division by zero constant term")
            return left / right
    raise TypeError(f"Unknown node {node!r}")


def jet_eval(expression: Expression, base: Sequence[float], order: int) -> JetSeries:
    """Taylor expansion of ``expression`` about ``base`` in its own scope variables."""
    if len(base) != len(expression.scope):
        raise ValueError(
            f"Base point has {len(base)} entries, scope has {len(expression.scope)}"
        )
    return evaluate(expression, JetSeries.variables(base, order))


def evaluate_all(expressions: Sequence[Expression], inputs: JetSeries) -> JetSeries:
    """Evaluate a list of expressions into a jet of shape (len(expressions),)."""
    return jets.stack([evaluate(e, inputs) for e in expressions])


def parse_many(sources: Sequence[str], scope: Sequence[str]) -> List[Expression]:
    return [parse_expression(s, scope) for s in sources]


def scope_names(prefix: str, count: int) -> List[str]:
    return [f"{prefix}{i}" for i in range(count)]


def as_float(expression: Expression, point: Optional[Sequence[float]] = None) -> float:
    """Numeric value of an expression at ``point`` (origin when omitted)."""
    point = [0.0] * len(expression.scope) if point is None else list(point)
    return float(jet_eval(expression, point, 0).value)
