"""A small expression language for user-supplied second-order ODEs.

Components of f(t, x, v) are separated by ';'. Variables are fixed-named
t, x1..xn, v1..vn. Supported functions: sin, cos, exp, log, sqrt (all
smooth; no abs or conditionals, the downstream machinery needs C2 right
hand sides). Precedence: ^ binds tightest (right associative), then unary
minus, then * /, then + -.

Parsing is recursive descent with Pratt-style binding powers; evaluation
dispatches through numcore ops, so parsed systems run on plain arrays and
dual numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numcore import Dual2
from .numcore import ops
from .numcore.ops import value_of

__all__ = ["ParseError", "DomainError", "ParsedSystem", "parse", "evaluate",
           "to_source", "Num", "Name", "Unary", "Binary", "Call"]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (column {pos + 1})")
        self.pos = pos


class DomainError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    kind: str        # "t", "x" or "v"
    index: int       # 0-based; unused for t


@dataclass(frozen=True)
class Unary:
    op: str          # "neg"
    arg: object


@dataclass(frozen=True)
class Binary:
    op: str          # "+", "-", "*", "/", "^"
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


@dataclass(frozen=True)
class ParsedSystem:
    dim: int
    components: tuple


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str        # "num", "ident", "op", "lparen", "rparen", "end"
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    toks = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            seen_exp = False
            while j < n and (src[j].isdigit() or src[j] == "."
                             or src[j] in "eE"
                             or (seen_exp and src[j] in "+-"
                                 and src[j - 1] in "eE")):
                if src[j] in "eE":
                    seen_exp = True
                j += 1
            text = src[i:j]
            try:
                float(text)
            except ValueError:
                raise ParseError(f"bad number literal {text!r}", i)
            toks.append(_Token("num", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Token("ident", src[i:j], i))
            i = j
            continue
        if c in "+-*/^":
            toks.append(_Token("op", c, i))
            i += 1
            continue
        if c == "(":
            toks.append(_Token("lparen", c, i))
            i += 1
            continue
        if c == ")":
            toks.append(_Token("rparen", c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    toks.append(_Token("end", "", n))
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_INFIX_BP = {"+": (20, 21), "-": (20, 21), "*": (30, 31), "/": (30, 31),
             "^": (50, 49)}
_PREFIX_MINUS_BP = 40


class _Parser:
    def __init__(self, toks: list[_Token], dim: int):
        self.toks = toks
        self.k = 0
        self.dim = dim

    def peek(self) -> _Token:
        return self.toks[self.k]

    def advance(self) -> _Token:
        tok = self.toks[self.k]
        self.k += 1
        return tok

    def _name(self, tok: _Token):
        text = tok.text
        if text == "t":
            return Name("t", 0)
        if text[0] in "xv" and text[1:].isdigit():
            idx = int(text[1:])
            if not 1 <= idx <= self.dim:
                raise ParseError(
                    f"component index out of range: {text!r} with n={self.dim}",
                    tok.pos)
            return Name(text[0], idx - 1)
        raise ParseError(f"unknown identifier {text!r}", tok.pos)

    def parse_expr(self, min_bp: int):
        tok = self.advance()
        if tok.kind == "num":
            left = Num(float(tok.text))
        elif tok.kind == "ident":
            if tok.text in FUNCTIONS:
                if self.peek().kind != "lparen":
                    raise ParseError(f"function {tok.text!r} needs '('",
                                     self.peek().pos)
                self.advance()
                arg = self.parse_expr(0)
                if self.peek().kind != "rparen":
                    raise ParseError("expected ')'", self.peek().pos)
                self.advance()
                left = Call(tok.text, arg)
            else:
                left = self._name(tok)
        elif tok.kind == "lparen":
            left = self.parse_expr(0)
            if self.peek().kind != "rparen":
                raise ParseError("expected ')'", self.peek().pos)
            self.advance()
        elif tok.kind == "op" and tok.text == "-":
            left = Unary("neg", self.parse_expr(_PREFIX_MINUS_BP))
        else:
            raise ParseError(f"unexpected token {tok.text!r}", tok.pos)

        while True:
            nxt = self.peek()
            if nxt.kind != "op":
                break
            lbp, rbp = _INFIX_BP[nxt.text]
            if lbp < min_bp:
                break
            self.advance()
            right = self.parse_expr(rbp)
            left = Binary(nxt.text, left, right)
        return left


def parse(source: str, dim: int) -> ParsedSystem:
    """Parse one ';'-separated expression per acceleration component."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    pieces = source.split(";")
    if len(pieces) != dim:
        raise ParseError(
            f"expected {dim} components separated by ';', got {len(pieces)}", 0)
    comps = []
    offset = 0
    for piece in pieces:
        toks = _tokenize(piece)
        if toks[0].kind == "end":
            raise ParseError("empty component", offset)
        p = _Parser(toks, dim)
        try:
            ast = p.parse_expr(0)
        except ParseError as e:
            raise ParseError(str(e).rsplit(" (column", 1)[0],
                             offset + e.pos) from None
        tail = p.peek()
        if tail.kind != "end":
            raise ParseError(f"trailing input {tail.text!r}",
                             offset + tail.pos)
        comps.append(ast)
        offset += len(piece) + 1
    return ParsedSystem(dim=dim, components=tuple(comps))


# ---------------------------------------------------------------------------
# Evaluation and printing
# ---------------------------------------------------------------------------

def _eval_node(node, t, x, v):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        if node.kind == "t":
            return t
        src = x if node.kind == "x" else v
        return src[..., node.index]
    if isinstance(node, Unary):
        return -_eval_node(node.arg, t, x, v)
    if isinstance(node, Call):
        a = _eval_node(node.arg, t, x, v)
        if node.fn in ("log", "sqrt") and np.any(value_of(a) < 0):
            raise DomainError(f"{node.fn} of a negative value")
        return getattr(ops, node.fn)(a)
    a = _eval_node(node.left, t, x, v)
    b = _eval_node(node.right, t, x, v)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        if np.any(np.abs(value_of(b)) < 1e-300):
            raise DomainError("division by (near) zero")
        return a / b
    if node.op == "^":
        if not isinstance(b, Dual2) and np.ndim(value_of(b)) == 0:
            return a ** float(value_of(b))
        # variable exponent: a^b = exp(b log a), defined for a > 0
        if np.any(value_of(a) <= 0):
            raise DomainError("variable exponent needs a positive base")
        return ops.exp(b * ops.log(a))
    raise AssertionError(f"unhandled op {node.op!r}")


def evaluate(sys: ParsedSystem, t, x, v):
    """Acceleration vector of the parsed system; duals propagate exactly."""
    comps = [_eval_node(c, t, x, v) for c in sys.components]
    if isinstance(x, Dual2):
        zero = x[..., 0] * 0.0
        comps = [c if isinstance(c, Dual2) else c + zero for c in comps]
        return ops.stack_last(comps)
    batch = np.shape(value_of(x))[:-1]
    comps = [np.broadcast_to(np.asarray(value_of(c), dtype=float), batch)
             for c in comps]
    return np.stack(comps, axis=-1)


def acceleration_fn(sys: ParsedSystem):
    """Adapter with the (t, x, v) signature used by the solver and metrics."""
    def f(t, x, v):
        return evaluate(sys, t, x, v)
    return f


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _print_node(node, parent_bp: int) -> str:
    if isinstance(node, Num):
        val = node.value
        text = repr(int(val)) if float(val).is_integer() else repr(val)
        return text
    if isinstance(node, Name):
        return "t" if node.kind == "t" else f"{node.kind}{node.index + 1}"
    if isinstance(node, Unary):
        inner = _print_node(node.arg, _PREC["neg"])
        text = f"-{inner}"
        return f"({text})" if parent_bp > _PREC["neg"] else text
    if isinstance(node, Call):
        return f"{node.fn}({_print_node(node.arg, 0)})"
    bp = _PREC[node.op]
    # right-associative ^ parenthesizes its left child on ties, the
    # left-associative operators their right child
    if node.op == "^":
        left = _print_node(node.left, bp + 1)
        right = _print_node(node.right, bp)
    else:
        left = _print_node(node.left, bp)
        right = _print_node(node.right, bp + 1)
    text = f"{left} {node.op} {right}" if node.op in "+-" else \
        f"{left}{node.op}{right}"
    return f"({text})" if parent_bp > bp else text


def to_source(sys: ParsedSystem) -> str:
    """Canonical printed form; reparsing it yields an identical AST."""
    return " ; ".join(_print_node(c, 0) for c in sys.components)
