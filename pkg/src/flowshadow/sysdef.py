"""
Vector-field definitions: a small expression language, its parser and
printer, a vectorized evaluator and the builtin system catalog.

A system-definition document looks like::

    name = pitchfork1d
    space = box(-2, 2)
    region = box(-2, 2)
    dx0 = x0 - x0^3

Note that ``-x0^2`` parses as ``(-x0)^2``: unary minus binds tighter than
``^`` in this grammar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Const", "Var", "Unary", "Binary", "Pow", "Expr",
    "SpaceSpec", "SystemSpec", "ParseError", "EvalError", "CatalogError",
    "parse_expr", "parse_system", "format_expr", "format_system",
    "evaluate", "eval_field", "builtin", "CATALOG",
]

FUNCS = ("sin", "cos", "exp", "tanh", "sqrt", "abs")
UNARY_OPS = ("neg",) + FUNCS
BINARY_OPS = ("+", "-", "*", "/")


class ParseError(ValueError):
    """Syntax or semantic error in a system definition, with position."""

    def __init__(self, message: str, line: int = 1, col: int = 1):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}")


class EvalError(ArithmeticError):
    """Domain error while evaluating a field expression."""

    def __init__(self, message: str, subexpr: str):
        self.subexpr = subexpr
        super().__init__(f"{message} in '{subexpr}'")


class CatalogError(ValueError):
    pass


# --------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Const:
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v) or v < 0:
            raise ValueError("constants must be finite and non-negative")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Expr"

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary op {self.op!r}")


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary op {self.op!r}")


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or self.exponent < 0:
            raise ValueError("exponent must be a non-negative integer")


Expr = Union[Const, Var, Unary, Binary, Pow]


def max_var(node: Expr) -> int:
    """Largest variable index referenced by `node` (-1 if none)."""
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Const):
        return -1
    if isinstance(node, Unary):
        return max_var(node.arg)
    if isinstance(node, Pow):
        return max_var(node.base)
    return max(max_var(node.left), max_var(node.right))


# --------------------------------------------------------------------------
# printing

def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _base(node: Expr) -> str:
    if isinstance(node, Const):
        return _fmt_number(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Unary):
        if node.op == "neg":
            return "-" + _base(node.arg)
        return f"{node.op}({format_expr(node.arg)})"
    return "(" + format_expr(node) + ")"


def _factor(node: Expr) -> str:
    if isinstance(node, Pow):
        return f"{_base(node.base)}^{node.exponent}"
    return _base(node)


def _term(node: Expr) -> str:
    if isinstance(node, Binary) and node.op in "*/":
        return f"{_term(node.left)} {node.op} {_factor(node.right)}"
    return _factor(node)


def format_expr(node: Expr) -> str:
    """Print an expression so that it re-parses to the same tree."""
    if isinstance(node, Binary) and node.op in "+-":
        return f"{format_expr(node.left)} {node.op} {_term(node.right)}"
    return _term(node)


# --------------------------------------------------------------------------
# expression parser

class _Lexer:
    def __init__(self, text: str, line: int = 1, col0: int = 1):
        self.text = text
        self.pos = 0
        self.line = line
        self.col0 = col0

    def error(self, msg, pos=None):
        pos = self.pos if pos is None else pos
        raise ParseError(msg, self.line, self.col0 + pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r":
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str):
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of input"
            self.error(f"expected {ch!r}, found {found}")
        self.pos += 1

    def number(self, signed: bool = False) -> float:
        self.skip_ws()
        start = self.pos
        t = self.text
        i = start
        if signed and i < len(t) and t[i] in "+-":
            i += 1
        digits = 0
        while i < len(t) and t[i].isdigit() and t[i].isascii():
            i += 1
            digits += 1
        if i < len(t) and t[i] == ".":
            i += 1
            while i < len(t) and t[i].isdigit() and t[i].isascii():
                i += 1
                digits += 1
        if digits == 0:
            self.error("expected a number", start)
        if i < len(t) and t[i] in "eE":
            j = i + 1
            if j < len(t) and t[j] in "+-":
                j += 1
            k = j
            while k < len(t) and t[k].isdigit() and t[k].isascii():
                k += 1
            if k == j:
                self.error("malformed exponent in number", i)
            i = k
        self.pos = i
        value = float(t[start:i])
        if not math.isfinite(value):
            self.error("number out of range", start)
        return value

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        t = self.text
        while self.pos < len(t) and (t[self.pos].isascii() and (t[self.pos].isalnum() or t[self.pos] == "_")):
            self.pos += 1
        if self.pos == start:
            self.error("expected an identifier")
        return t[start:self.pos]


class _ExprParser:
    def __init__(self, lexer: _Lexer, dim: int | None):
        self.lx = lexer
        self.dim = dim

    def expr(self) -> Expr:
        node = self.term()
        while self.lx.peek() in ("+", "-") and self.lx.peek():
            op = self.lx.peek()
            self.lx.pos += 1
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.lx.peek() in ("*", "/") and self.lx.peek():
            op = self.lx.peek()
            self.lx.pos += 1
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        node = self.base()
        if self.lx.peek() == "^":
            self.lx.pos += 1
            self.lx.skip_ws()
            start = self.lx.pos
            t = self.lx.text
            i = start
            while i < len(t) and t[i].isascii() and t[i].isdigit():
                i += 1
            nxt = t[i] if i < len(t) else ""
            if i == start or nxt in (".", "e", "E") or (nxt.isascii() and nxt.isalnum()) or nxt == "_":
                self.lx.error("exponent must be a non-negative integer literal", start)
            self.lx.pos = i
            node = Pow(node, int(t[start:i]))
        return node

    def base(self) -> Expr:
        lx = self.lx
        ch = lx.peek()
        if ch == "":
            lx.error("unexpected end of expression")
        if ch == "-":
            lx.pos += 1
            return Unary("neg", self.base())
        if ch == "(":
            lx.pos += 1
            node = self.expr()
            lx.take(")")
            return node
        if ch.isdigit() or ch == ".":
            return Const(lx.number())
        if ch.isascii() and ch.isalpha():
            start = lx.pos
            name = lx.ident()
            if name in FUNCS:
                lx.take("(")
                arg = self.expr()
                lx.take(")")
                return Unary(name, arg)
            if name[0] == "x" and name[1:].isdigit() and len(name) > 1:
                idx = int(name[1:])
                if self.dim is not None and idx >= self.dim:
                    lx.error(f"unknown variable {name} (dimension is {self.dim})", start)
                return Var(idx)
            lx.error(f"unknown identifier {name!r}", start)
        lx.error(f"unexpected character {ch!r}")


def parse_expr(text: str, dim: int | None = None, line: int = 1, col0: int = 1) -> Expr:
    """Parse a single field expression."""
    lx = _Lexer(text, line, col0)
    node = _ExprParser(lx, dim).expr()
    if lx.peek() != "":
        lx.error(f"unexpected {lx.peek()!r} after expression")
    return node


# --------------------------------------------------------------------------
# spaces and systems

@dataclass(frozen=True)
class SpaceSpec:
    """State space: a compact box or a flat torus.

    For a torus, ``bounds`` holds ``(0, period)`` per axis.
    """

    kind: str
    bounds: tuple

    def __post_init__(self):
        if self.kind not in ("box", "torus"):
            raise ValueError(f"unknown space kind {self.kind!r}")
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not b:
            raise ValueError("space needs at least one axis")
        for lo, hi in b:
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise ValueError("need lo < hi on every axis")
            if self.kind == "torus" and lo != 0.0:
                raise ValueError("torus axes start at 0")
        object.__setattr__(self, "bounds", b)

    @classmethod
    def box(cls, *pairs) -> "SpaceSpec":
        return cls("box", tuple(pairs))

    @classmethod
    def torus(cls, *periods) -> "SpaceSpec":
        return cls("torus", tuple((0.0, p) for p in periods))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    @property
    def periods(self) -> np.ndarray:
        return self.hi - self.lo

    def normalize(self, p) -> np.ndarray:
        """Canonical representative of a point (wraps torus coordinates)."""
        p = np.asarray(p, dtype=float)
        if self.is_torus:
            per = self.periods
            p = np.mod(p, per)
            # np.mod can round up to the period itself
            p = np.where(p >= per, 0.0, p)
        return p

    def contains(self, p, tol: float = 0.0) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.is_torus:
            return np.all(np.isfinite(p), axis=-1)
        return np.all((p >= self.lo - tol) & (p <= self.hi + tol), axis=-1)

    def text(self) -> str:
        if self.is_torus:
            return "torus(" + ", ".join(_fmt_real(hi) for _, hi in self.bounds) + ")"
        return "box(" + "; ".join(f"{_fmt_real(lo)}, {_fmt_real(hi)}" for lo, hi in self.bounds) + ")"


def _fmt_real(v: float) -> str:
    return _fmt_number(v) if v >= 0 else "-" + _fmt_number(-v)


@dataclass(frozen=True)
class SystemSpec:
    name: str
    space: SpaceSpec
    fields: tuple
    region: tuple = ()
    builtin_id: str | None = None
    params: tuple = ()

    def __post_init__(self):
        fields = tuple(self.fields)
        object.__setattr__(self, "fields", fields)
        if len(fields) != self.space.dim:
            raise ValueError(f"{len(fields)} field expressions for a {self.space.dim}-dimensional space")
        for f in fields:
            if max_var(f) >= self.space.dim:
                raise ValueError("field references a variable beyond the dimension")
        region = tuple((float(lo), float(hi)) for lo, hi in self.region) or self.space.bounds
        if len(region) != self.space.dim:
            raise ValueError("region dimension mismatch")
        for (lo, hi), (slo, shi) in zip(region, self.space.bounds):
            if not lo < hi:
                raise ValueError("region needs lo < hi")
            if lo < slo or hi > shi:
                raise ValueError("region must lie inside the space bounds")
        object.__setattr__(self, "region", region)
        object.__setattr__(self, "params", tuple(sorted(dict(self.params).items())))

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def region_lo(self) -> np.ndarray:
        return np.array([r[0] for r in self.region])

    @property
    def region_hi(self) -> np.ndarray:
        return np.array([r[1] for r in self.region])

    def __call__(self, p) -> np.ndarray:
        return eval_field(self, p)

    def text(self) -> str:
        return format_system(self)


def format_system(spec: SystemSpec) -> str:
    lines = [f"name = {spec.name}", f"space = {spec.space.text()}"]
    if spec.region != spec.space.bounds:
        lines.append("region = " + SpaceSpec("box", spec.region).text())
    for k, f in enumerate(spec.fields):
        lines.append(f"dx{k} = {format_expr(f)}")
    return "\n".join(lines) + "\n"


def _parse_space(text: str, line: int, col0: int, allow_torus: bool = True):
    lx = _Lexer(text, line, col0)
    lx.skip_ws()
    kind_at = lx.pos
    kind = lx.ident()
    if kind not in ("box", "torus") or (kind == "torus" and not allow_torus):
        lx.error(f"unknown space kind {kind!r}", kind_at)
    lx.take("(")
    if kind == "torus":
        periods = [lx.number(signed=True)]
        while lx.peek() == ",":
            lx.pos += 1
            periods.append(lx.number(signed=True))
        lx.take(")")
        if lx.peek():
            lx.error("trailing characters")
        if any(p <= 0 for p in periods):
            lx.error("torus periods must be positive", 0)
        return "torus", [(0.0, p) for p in periods]
    pairs = []
    while True:
        lo = lx.number(signed=True)
        lx.take(",")
        hi = lx.number(signed=True)
        if not lo < hi:
            lx.error("box axis needs lo < hi")
        pairs.append((lo, hi))
        if lx.peek() == ";":
            lx.pos += 1
            continue
        break
    lx.take(")")
    if lx.peek():
        lx.error("trailing characters")
    return "box", pairs


def parse_system(text) -> SystemSpec:
    """Parse a system-definition document.

    Blank lines and lines starting with ``#`` are ignored. Raises
    `ParseError` carrying the line and column of the first problem.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8 at byte {exc.start}", 1, exc.start + 1) from None
    entries = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in raw:
            raise ParseError("expected 'key = value'", lineno, len(raw) - len(raw.lstrip()) + 1)
        eq = raw.index("=")
        key = raw[:eq].strip()
        entries.append((lineno, key, raw[eq + 1:], eq + 2, len(raw) - len(raw.lstrip()) + 1))
    if not entries:
        raise ParseError("empty system definition", 1, 1)

    it = iter(entries)
    lineno, key, value, vcol, kcol = next(it)
    if key != "name":
        raise ParseError("first entry must be 'name = <identifier>'", lineno, kcol)
    name = value.strip()
    if not name or not all(c.isascii() and (c.isalnum() or c == "_") for c in name) or name[0].isdigit():
        raise ParseError("name must be an identifier", lineno, vcol)

    nxt = next(it, None)
    if nxt is None or nxt[1] != "space":
        ln, col = (nxt[0], nxt[4]) if nxt else (lineno + 1, 1)
        raise ParseError("second entry must be 'space = box(...)' or 'space = torus(...)'", ln, col)
    kind, bounds = _parse_space(nxt[2], nxt[0], nxt[3])
    dim = len(bounds)

    region = ()
    rest = list(it)
    if rest and rest[0][1] == "region":
        ln, _, value, vcol, _ = rest.pop(0)
        _, region = _parse_space(value, ln, vcol, allow_torus=False)
        if len(region) != dim:
            raise ParseError(f"region has {len(region)} axes, space has {dim}", ln, vcol)
        for (lo, hi), (slo, shi) in zip(region, bounds):
            if lo < slo or hi > shi:
                raise ParseError("region must lie inside the space bounds", ln, vcol)

    fields: dict[int, Expr] = {}
    for ln, key, value, vcol, kcol in rest:
        if not (key.startswith("dx") and key[2:].isdigit() and key[2:].isascii()):
            raise ParseError(f"unexpected entry {key!r}; expected dx<k> = <expr>", ln, kcol)
        k = int(key[2:])
        if k >= dim:
            raise ParseError(f"dx{k} exceeds dimension {dim}", ln, kcol)
        if k in fields:
            raise ParseError(f"dx{k} defined twice", ln, kcol)
        if not value.strip():
            raise ParseError("missing expression", ln, vcol)
        fields[k] = parse_expr(value, dim, ln, vcol)
    missing = [k for k in range(dim) if k not in fields]
    if missing:
        ln = entries[-1][0]
        raise ParseError(f"dimension mismatch: missing dx{missing[0]}", ln, 1)
    return SystemSpec(name, SpaceSpec(kind, tuple(bounds)), tuple(fields[k] for k in range(dim)), tuple(region))


# --------------------------------------------------------------------------
# evaluation

def evaluate(node: Expr, X: np.ndarray) -> np.ndarray:
    """Evaluate `node` at every row of `X` (shape ``(n, dim)``)."""
    if isinstance(node, Const):
        return np.full(X.shape[0], node.value)
    if isinstance(node, Var):
        return X[:, node.index].astype(float)
    if isinstance(node, Pow):
        b = evaluate(node.base, X)
        out = np.ones_like(b)
        for _ in range(node.exponent):
            out = out * b
        return out
    if isinstance(node, Unary):
        a = evaluate(node.arg, X)
        op = node.op
        if op == "neg":
            return -a
        if op == "sqrt":
            if np.any(a < 0):
                raise EvalError("sqrt of negative value", format_expr(node))
            return np.sqrt(a)
        if op == "exp":
            with np.errstate(over="ignore"):
                r = np.exp(a)
            if not np.all(np.isfinite(r[np.isfinite(a)])):
                raise EvalError("exp overflow", format_expr(node))
            return r
        return getattr(np, op)(a)
    a = evaluate(node.left, X)
    b = evaluate(node.right, X)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if np.any(b == 0):
        raise EvalError("division by zero", format_expr(node))
    return a / b


def eval_field(spec: SystemSpec, p) -> np.ndarray:
    """X(p) for one point (shape ``(dim,)``) or many points (``(n, dim)``)."""
    P = np.asarray(p, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    if P.shape[-1] != spec.dim:
        raise ValueError(f"point has dimension {P.shape[-1]}, system has {spec.dim}")
    P = spec.space.normalize(P)
    out = np.stack([evaluate(f, P) for f in spec.fields], axis=-1)
    return out[0] if single else out


def to_numba_source(node: Expr, var_fmt: str = "x[{}]") -> str:
    """Python/numba source for `node`; variables are rendered with `var_fmt`."""
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return var_fmt.format(node.index)
    if isinstance(node, Pow):
        if node.exponent == 0:
            return "1.0"
        b = to_numba_source(node.base, var_fmt)
        if node.exponent <= 4:
            return "(" + "*".join([f"({b})"] * node.exponent) + ")"
        return f"(({b})**{node.exponent})"
    if isinstance(node, Unary):
        a = to_numba_source(node.arg, var_fmt)
        if node.op == "neg":
            return f"(-({a}))"
        if node.op == "abs":
            return f"abs({a})"
        return f"math.{node.op}({a})"
    return f"({to_numba_source(node.left, var_fmt)} {node.op} {to_numba_source(node.right, var_fmt)})"


# --------------------------------------------------------------------------
# catalog

def _pitchfork(params):
    return SystemSpec(
        "pitchfork1d", SpaceSpec.box((-2.0, 2.0)),
        (parse_expr("x0 - x0^3", 1),), builtin_id="pitchfork1d")


def _circle(params):
    return SystemSpec(
        "circle_ns", SpaceSpec.torus(2 * math.pi),
        (parse_expr("sin(x0)", 1),), builtin_id="circle_ns")


def _torus_linear(params):
    alpha = float(params["alpha"])
    if not math.isfinite(alpha):
        raise CatalogError("alpha must be finite")
    second = Const(alpha) if alpha >= 0 else Unary("neg", Const(-alpha))
    return SystemSpec(
        "torus_linear", SpaceSpec.torus(1.0, 1.0),
        (Const(1.0), second), builtin_id="torus_linear", params=(("alpha", alpha),))


def _saddle(params):
    return SystemSpec(
        "saddle2d", SpaceSpec.box((-1.0, 1.0), (-1.0, 1.0)),
        (parse_expr("x0", 2), parse_expr("-x1", 2)), builtin_id="saddle2d")


CATALOG = {
    "pitchfork1d": (_pitchfork, ()),
    "circle_ns": (_circle, ()),
    "torus_linear": (_torus_linear, ("alpha",)),
    "saddle2d": (_saddle, ()),
}


def builtin(name: str, params: Mapping[str, float] | None = None, **kw) -> SystemSpec:
    """Catalog system by id.

    >>> builtin("torus_linear", alpha=2 ** 0.5).dim
    2
    """
    params = dict(params or {}, **kw)
    if name not in CATALOG:
        raise CatalogError(f"unknown system {name!r}; known: {', '.join(sorted(CATALOG))}")
    factory, required = CATALOG[name]
    missing = [p for p in required if p not in params]
    extra = [p for p in params if p not in required]
    if missing:
        raise CatalogError(f"{name} needs parameter(s): {', '.join(missing)}")
    if extra:
        raise CatalogError(f"{name} takes no parameter(s): {', '.join(extra)}")
    return factory(params)
