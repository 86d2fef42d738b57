"""Textual configuration language for kernels, means, and likelihood.

Grammar (whitespace insignificant, names and keys lowercase):

    spec        := kernel_expr [";" "mean" "=" mean_expr] [";" "likelihood" "(" args ")"]
    kernel_expr := term { "+" term }
    term        := atom { "*" atom }
    atom        := name "(" [args] ")" | "(" kernel_expr ")"
    name        := "constant"|"white"|"linear"|"se"|"rq"|"matern12"|"matern32"|"matern52"
    mean_expr   := "zero" | "constant" "(" args ")" | "linear" "(" args ")"
    args        := arg { "," arg }
    arg         := key "=" number | key "=" boolean

"+" binds looser than "*"; both are left-associative. Omitted argument
values default to 1, trainable defaults to true, likelihood init to 1.
A leaf's trainable flag applies to every parameter of that leaf.

format_spec produces the canonical form: explicit arguments with sorted
keys, single spaces around operators, zero mean omitted, likelihood clause
always present. parse(format_spec(s)) reproduces s.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from . import kernels, means
from .errors import GPTrajError
from .gpr import GPModel
from .kernels import Param

KERNEL_KEYS = {
    "constant": ("variance",),
    "white": ("variance",),
    "linear": ("variance",),
    "se": ("variance", "lengthscale"),
    "rq": ("variance", "lengthscale", "alpha"),
    "matern12": ("variance", "lengthscale"),
    "matern32": ("variance", "lengthscale"),
    "matern52": ("variance", "lengthscale"),
}

MEAN_KEYS = {"zero": (), "constant": ("c",), "linear": ("a", "b")}


class ParseError(GPTrajError, ValueError):
    """Syntax error with 1-based line and column of the offending token."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnknownKernelName(ParseError):
    pass


class UnknownKey(ParseError):
    pass


class DuplicateKey(ParseError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """Validated model template: kernel and mean trees plus likelihood setup."""

    kernel: kernels.Kernel
    mean: means.MeanFunction
    likelihood_init: float = 1.0
    likelihood_trainable: bool = True


@dataclass(frozen=True)
class _Token:
    kind: str  # name | number | punct | end
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<name>[a-z][a-z0-9_]*)"
    r"|(?P<number>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)"
    r"|(?P<punct>[+*(),;=-])"
)


def _position(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    column = pos - text.rfind("\n", 0, pos)
    return line, column


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            line, col = _position(text, pos)
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        if m.lastgroup != "ws":
            line, col = _position(text, pos)
            tokens.append(_Token(m.lastgroup, m.group(), line, col))
        pos = m.end()
    line, col = _position(text, len(text))
    tokens.append(_Token("end", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message: str, token: _Token | None = None, cls=ParseError):
        tok = token or self.cur
        raise cls(message, tok.line, tok.column)

    def accept(self, text: str) -> bool:
        if self.cur.kind == "punct" and self.cur.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Token:
        if not (self.cur.kind == "punct" and self.cur.text == text):
            self.error(f"expected {text!r}, found {self.cur.text or 'end of input'!r}")
        tok = self.cur
        self.i += 1
        return tok

    def expect_name(self) -> _Token:
        if self.cur.kind != "name":
            self.error(f"expected name, found {self.cur.text or 'end of input'!r}")
        tok = self.cur
        self.i += 1
        return tok

    # ---- grammar ----

    def parse_spec(self) -> ModelSpec:
        kernel = self.parse_kernel_expr()
        mean: means.MeanFunction = means.Zero()
        lik_init, lik_trainable = 1.0, True
        if self.accept(";"):
            clause = self.expect_name()
            if clause.text == "mean":
                self.expect("=")
                mean = self.parse_mean_expr()
                if self.accept(";"):
                    clause = self.expect_name()
                    if clause.text != "likelihood":
                        self.error("expected 'likelihood'", clause)
                    lik_init, lik_trainable = self.parse_likelihood()
            elif clause.text == "likelihood":
                lik_init, lik_trainable = self.parse_likelihood()
            else:
                self.error("expected 'mean' or 'likelihood'", clause)
        if self.cur.kind != "end":
            self.error(f"unexpected trailing input {self.cur.text!r}")
        return ModelSpec(kernel, mean, lik_init, lik_trainable)

    def parse_kernel_expr(self) -> kernels.Kernel:
        node = self.parse_term()
        while self.accept("+"):
            node = kernels.Sum(node, self.parse_term())
        return node

    def parse_term(self) -> kernels.Kernel:
        node = self.parse_atom()
        while self.accept("*"):
            node = kernels.Product(node, self.parse_atom())
        return node

    def parse_atom(self) -> kernels.Kernel:
        if self.accept("("):
            node = self.parse_kernel_expr()
            self.expect(")")
            return node
        tok = self.expect_name()
        if tok.text not in KERNEL_KEYS:
            self.error(f"unknown kernel name {tok.text!r}", tok, UnknownKernelName)
        args = self.parse_parenthesized_args(KERNEL_KEYS[tok.text])
        return _make_kernel(tok.text, args)

    def parse_mean_expr(self) -> means.MeanFunction:
        tok = self.expect_name()
        if tok.text == "zero":
            return means.Zero()
        if tok.text not in ("constant", "linear"):
            self.error(f"unknown mean function {tok.text!r}", tok, UnknownKernelName)
        args = self.parse_parenthesized_args(MEAN_KEYS[tok.text])
        return _make_mean(tok.text, args)

    def parse_likelihood(self) -> tuple[float, bool]:
        args = self.parse_parenthesized_args(("init",))
        init = args.get("init", 1.0)
        if isinstance(init, bool):
            self.error("likelihood init must be a number")
        return float(init), bool(args.get("trainable", True))

    def parse_parenthesized_args(self, allowed: tuple[str, ...]) -> dict:
        self.expect("(")
        args: dict = {}
        if not self.accept(")"):
            while True:
                key_tok = self.expect_name()
                key = key_tok.text
                if key != "trainable" and key not in allowed:
                    self.error(f"unknown key {key!r}", key_tok, UnknownKey)
                if key in args:
                    self.error(f"duplicate key {key!r}", key_tok, DuplicateKey)
                self.expect("=")
                args[key] = self.parse_value(expect_bool=(key == "trainable"))
                if self.accept(")"):
                    break
                self.expect(",")
        return args

    def parse_value(self, expect_bool: bool):
        if self.cur.kind == "name" and self.cur.text in ("true", "false"):
            val = self.cur.text == "true"
            if not expect_bool:
                self.error("expected a number")
            self.i += 1
            return val
        if expect_bool:
            self.error("expected true or false")
        negate = self.accept("-")
        if self.cur.kind != "number":
            self.error(f"expected a number, found {self.cur.text or 'end of input'!r}")
        val = float(self.cur.text)
        self.i += 1
        return -val if negate else val


def _make_kernel(name: str, args: dict) -> kernels.Kernel:
    trainable = bool(args.pop("trainable", True))
    params = {k: Param(float(args.get(k, 1.0)), trainable) for k in KERNEL_KEYS[name]}
    if name == "constant":
        return kernels.Constant(**params)
    if name == "white":
        return kernels.White(**params)
    if name == "linear":
        return kernels.Linear(**params)
    if name == "se":
        return kernels.SquaredExponential(**params)
    if name == "rq":
        return kernels.RationalQuadratic(**params)
    return kernels.Matern(order=int(name[len("matern"):]), **params)


def _make_mean(name: str, args: dict) -> means.MeanFunction:
    trainable = bool(args.pop("trainable", True))
    if name == "constant":
        return means.Constant(Param(float(args.get("c", 1.0)), trainable, None))
    return means.Linear(
        A=Param(float(args.get("a", 1.0)), trainable, None),
        b=Param(float(args.get("b", 1.0)), trainable, None),
    )


def parse(text: str) -> ModelSpec:
    """Parse a model spec string; raises ParseError with position on bad input."""
    if not text.strip():
        raise ParseError("empty spec", 1, 1)
    return _Parser(text).parse_spec()


def _format_number(v: float) -> str:
    f = float(v)
    if f == int(f) and abs(f) < 1e16:
        return str(int(f))
    return repr(f)


def _format_bool(b: bool) -> str:
    return "true" if b else "false"


def _leaf_args(items: list[tuple[str, Param]], name: str) -> str:
    flags = {p.trainable for _, p in items}
    if len(flags) != 1:
        raise ValueError(f"{name}: mixed trainable flags are not representable in spec text")
    pairs = {key.rsplit(".", 1)[1].lower(): p.value for key, p in items}
    pairs["trainable"] = None  # placeholder for ordering
    parts = []
    for key in sorted(pairs):
        if key == "trainable":
            parts.append(f"trainable={_format_bool(flags.pop())}")
        else:
            parts.append(f"{key}={_format_number(pairs[key])}")
    return ", ".join(parts)


def _format_kernel(k: kernels.Kernel, parent: str = "", side: str = "") -> str:
    # parentheses preserve tree shape under the left-associative grammar:
    # a sum needs them under a product and as the right operand of a sum,
    # a product needs them as the right operand of a product
    if isinstance(k, kernels.Sum):
        text = f"{_format_kernel(k.left, 'sum', 'left')} + {_format_kernel(k.right, 'sum', 'right')}"
        needs_parens = parent == "product" or (parent == "sum" and side == "right")
        return f"({text})" if needs_parens else text
    if isinstance(k, kernels.Product):
        text = f"{_format_kernel(k.left, 'product', 'left')} * {_format_kernel(k.right, 'product', 'right')}"
        needs_parens = parent == "product" and side == "right"
        return f"({text})" if needs_parens else text
    return f"{k.name}({_leaf_args(k.params(), k.name)})"


def _format_mean(m: means.MeanFunction) -> str:
    return f"{m.name}({_leaf_args(m.params(), m.name)})"


def format_spec(spec: ModelSpec) -> str:
    """Canonical single-line form; parse(format_spec(s)) equals s."""
    parts = [_format_kernel(spec.kernel)]
    if not isinstance(spec.mean, means.Zero):
        parts.append(f"mean={_format_mean(spec.mean)}")
    parts.append(
        f"likelihood(init={_format_number(spec.likelihood_init)}, "
        f"trainable={_format_bool(spec.likelihood_trainable)})"
    )
    return "; ".join(parts)


def build(spec: ModelSpec, dataset) -> GPModel:
    """Instantiate a GPModel from a spec template and a coordinate dataset."""
    return GPModel(
        kernel=spec.kernel,
        mean=spec.mean,
        likelihood=Param(spec.likelihood_init, spec.likelihood_trainable),
        X=dataset.X,
        y=dataset.y,
    )


def from_model(model: GPModel) -> ModelSpec:
    """Spec template carrying a model's current values and flags."""
    return ModelSpec(
        kernel=model.kernel,
        mean=model.mean,
        likelihood_init=model.likelihood.value,
        likelihood_trainable=model.likelihood.trainable,
    )
