"""
Arithmetic expressions over chart coordinates, used by config files.

    expression := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := ('-' | '+') unary | power
    power      := atom (('^' | '**') unary)?          right-associative
    atom       := number | name | function '(' expression ')' | '(' expression ')'

Names are the chart coordinates plus the constants pi and e. Functions:
sin, cos, exp, ln, sqrt. The text is compiled once into nested closures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Sequence, Tuple

from .errors import ExpressionError

CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS: Dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
}

Node = Callable[[Sequence[float]], float]


@dataclass(frozen=True)
class Expression:
    text: str
    names: Tuple[str, ...]
    _node: Node

    def __call__(self, values: Sequence[float]) -> float:
        return self._node(values)


class Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.text = text
        self.index = 0
        self.slots = {name: k for k, name in enumerate(names)}
        clash = sorted(set(self.slots) & (set(CONSTANTS) | set(FUNCTIONS)))
        if clash:
            raise ExpressionError(f"coordinate name(s) {', '.join(clash)} shadow a builtin", text)

    def error(self, message: str, index=None):
        return ExpressionError(message, self.text, self.index if index is None else index)

    def peek(self, width: int = 1) -> str:
        return self.text[self.index:self.index + width]

    def skip_whitespace(self):
        while self.index < len(self.text) and self.text[self.index].isspace():
            self.index += 1

    def parse(self) -> Node:
        node = self.parse_expression()
        self.skip_whitespace()
        if self.index < len(self.text):
            raise self.error(f"unexpected character {self.peek()!r}")
        return node

    def parse_expression(self) -> Node:
        node = self.parse_term()
        while True:
            self.skip_whitespace()
            char = self.peek()
            if char not in ("+", "-"):
                return node
            self.index += 1
            right = self.parse_term()
            if char == "+":
                node = (lambda a, b: lambda v: a(v) + b(v))(node, right)
            else:
                node = (lambda a, b: lambda v: a(v) - b(v))(node, right)

    def parse_term(self) -> Node:
        node = self.parse_unary()
        while True:
            self.skip_whitespace()
            char = self.peek()
            if char == "*" and self.peek(2) != "**":
                self.index += 1
                node = (lambda a, b: lambda v: a(v) * b(v))(node, self.parse_unary())
            elif char == "/":
                at = self.index
                self.index += 1
                node = self._divide(node, self.parse_unary(), at)
            else:
                return node

    def _divide(self, a: Node, b: Node, at: int) -> Node:
        text = self.text

        def node(v):
            denominator = b(v)
            if denominator == 0.0:
                raise ExpressionError("division by zero", text, at)
            return a(v) / denominator

        return node

    def parse_unary(self) -> Node:
        self.skip_whitespace()
        char = self.peek()
        if char == "-":
            self.index += 1
            inner = self.parse_unary()
            return lambda v: -inner(v)
        if char == "+":
            self.index += 1
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Node:
        base = self.parse_atom()
        self.skip_whitespace()
        if self.peek(2) == "**":
            at = self.index
            self.index += 2
        elif self.peek() == "^":
            at = self.index
            self.index += 1
        else:
            return base
        exponent = self.parse_unary()
        text = self.text

        def node(v):
            try:
                result = base(v) ** exponent(v)
            except (ZeroDivisionError, OverflowError) as exc:
                raise ExpressionError(f"power failed: {exc}", text, at) from None
            if isinstance(result, complex):
                raise ExpressionError("negative base with fractional exponent", text, at)
            return result

        return node

    def parse_atom(self) -> Node:
        self.skip_whitespace()
        char = self.peek()
        if char == "(":
            opened = self.index
            self.index += 1
            node = self.parse_expression()
            self.skip_whitespace()
            if self.peek() != ")":
                raise self.error(f"no closing parenthesis for '(' at index {opened}")
            self.index += 1
            return node
        if char.isdigit() or char == ".":
            return self.parse_number()
        if char.isalpha() or char == "_":
            return self.parse_name()
        if not char:
            raise self.error("unexpected end of expression")
        raise self.error(f"unexpected character {char!r}")

    def parse_number(self) -> Node:
        start = self.index
        text = self.text
        while self.index < len(text) and (text[self.index].isdigit() or text[self.index] == "."):
            self.index += 1
        # an exponent needs digits after e/E
        if self.peek() in ("e", "E"):
            rest = text[self.index + 1:self.index + 3]
            if rest[:1].isdigit() or (rest[:1] in ("+", "-") and rest[1:2].isdigit()):
                self.index += 2
                while self.index < len(text) and text[self.index].isdigit():
                    self.index += 1
        literal = text[start:self.index]
        try:
            value = float(literal)
        except ValueError:
            raise self.error(f"malformed number {literal!r}", start) from None
        return lambda v: value

    def parse_name(self) -> Node:
        start = self.index
        text = self.text
        while self.index < len(text) and (text[self.index].isalnum() or text[self.index] == "_"):
            self.index += 1
        name = text[start:self.index]
        if name in FUNCTIONS:
            self.skip_whitespace()
            if self.peek() != "(":
                raise self.error(f"function {name} needs parenthesised argument")
            self.index += 1
            argument = self.parse_expression()
            self.skip_whitespace()
            if self.peek() != ")":
                raise self.error(f"no closing parenthesis for {name}(")
            self.index += 1
            return self._apply(FUNCTIONS[name], name, argument, start)
        if name in self.slots:
            slot = self.slots[name]
            return lambda v: float(v[slot])
        if name in CONSTANTS:
            value = CONSTANTS[name]
            return lambda v: value
        raise self.error(f"unknown name {name!r}", start)

    def _apply(self, func, name: str, argument: Node, at: int) -> Node:
        text = self.text

        def node(v):
            x = argument(v)
            try:
                return func(x)
            except (ValueError, OverflowError):
                raise ExpressionError(f"{name}({x!r}) is undefined", text, at) from None

        return node


def compile_expression(text: str, names: Sequence[str]) -> Expression:
    """Parse text once; the result is evaluated with coordinate values in `names` order."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression", str(text or ""), 0)
    node = Parser(text, names).parse()
    return Expression(text, tuple(names), node)


def evaluate(text: str, **values: float) -> float:
    names = tuple(values)
    return compile_expression(text, names)([values[n] for n in names])
