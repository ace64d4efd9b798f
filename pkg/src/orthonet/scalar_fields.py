"""Scalar fields on coordinate charts.

Expressions are immutable trees over chart coordinates with exact symbolic
differentiation. There is no algebraic simplification beyond constant folding
and the 0/1 identities, so correctness rests on evaluation, not on canonical
form. Derivatives are cached per node, which keeps repeated differentiation
of shared subtrees cheap and keeps derivative trees compact DAGs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EvalDomainError, ParseError

__all__ = [
    "Chart",
    "Expr",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Power",
    "Call",
    "Jet2",
    "const",
    "var",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "powc",
    "apply_unary",
    "parse_expr",
    "format_expr",
    "diff",
    "evaluate",
    "eval_jet2",
    "fd_oracle",
    "free_vars",
    "substitute",
]


# --- charts -----------------------------------------------------------------


@dataclass(frozen=True)
class Chart:
    """A coordinate box: names, per-axis closed intervals, optional blocks.

    Blocks partition the coordinate indices. Block 0 may be empty (a net with
    no distinguished base block); every other block must be nonempty.
    """

    dim: int
    names: tuple[str, ...]
    domain: tuple[tuple[float, float], ...]
    blocks: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("chart dimension must be >= 1")
        if len(self.names) != self.dim or len(set(self.names)) != self.dim:
            raise ValueError("chart needs dim unique coordinate names")
        if len(self.domain) != self.dim:
            raise ValueError("chart needs one interval per coordinate")
        for lo, hi in self.domain:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"degenerate interval [{lo}, {hi}]")
        if self.blocks is not None:
            flat = [i for b in self.blocks for i in b]
            if sorted(flat) != list(range(self.dim)):
                raise ValueError("blocks must partition the coordinate indices")
            for b in self.blocks[1:]:
                if not b:
                    raise ValueError("only block 0 may be empty")

    @staticmethod
    def box(domain, names=None, blocks=None) -> "Chart":
        dom = tuple((float(lo), float(hi)) for lo, hi in domain)
        dim = len(dom)
        if names is None:
            names = tuple(f"x{i}" for i in range(dim))
        blk = None if blocks is None else tuple(tuple(b) for b in blocks)
        return Chart(dim, tuple(names), dom, blk)

    def contains(self, point) -> bool:
        return all(lo <= x <= hi for x, (lo, hi) in zip(point, self.domain))

    def center(self) -> tuple[float, ...]:
        return tuple(0.5 * (lo + hi) for lo, hi in self.domain)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None


# --- expression nodes -------------------------------------------------------


class Expr:
    """Immutable expression node. Identity-hashed; derivative results are
    memoized per (node, coordinate index)."""

    __slots__ = ("_dcache",)

    def __init__(self):
        object.__setattr__(self, "_dcache", {})

    # arithmetic sugar, used heavily by the geometry modules
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return powc(self, float(exponent))

    def __repr__(self):
        return f"<Expr {format_expr(self)}>"


def _wrap(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return const(float(value))
    raise TypeError(f"cannot use {type(value).__name__} as an expression")


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        super().__init__()
        object.__setattr__(self, "value", float(value))


class Var(Expr):
    __slots__ = ("index",)

    def __init__(self, index: int):
        super().__init__()
        object.__setattr__(self, "index", int(index))


class Unary(Expr):
    __slots__ = ("op", "arg")

    def __init__(self, op: str, arg: Expr):
        super().__init__()
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "arg", arg)


class Binary(Expr):
    __slots__ = ("op", "a", "b")

    def __init__(self, op: str, a: Expr, b: Expr):
        super().__init__()
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


class Power(Expr):
    """Base raised to a constant exponent."""

    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: float):
        super().__init__()
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", float(exponent))


class Call(Expr):
    """Named univariate user function applied to a sub-expression. The body
    is an expression in a single auxiliary variable (index 0); composition
    and differentiation go through substitution."""

    __slots__ = ("name", "body", "arg")

    def __init__(self, name: str, body: Expr, arg: Expr):
        super().__init__()
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "arg", arg)


ZERO = Const(0.0)
ONE = Const(1.0)


# --- smart constructors (constant folding + 0/1 identities only) ------------


def const(value: float) -> Const:
    if value == 0.0:
        return ZERO
    if value == 1.0:
        return ONE
    return Const(value)


def var(index: int) -> Var:
    return Var(index)


def _cval(e: Expr):
    return e.value if isinstance(e, Const) else None


def add(a: Expr, b: Expr) -> Expr:
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        return const(ca + cb)
    if ca == 0.0:
        return b
    if cb == 0.0:
        return a
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        return const(ca - cb)
    if cb == 0.0:
        return a
    if ca == 0.0:
        return neg(b)
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        return const(ca * cb)
    if ca == 0.0 or cb == 0.0:
        return ZERO
    if ca == 1.0:
        return b
    if cb == 1.0:
        return a
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    ca, cb = _cval(a), _cval(b)
    if cb is not None and cb != 0.0:
        if ca is not None:
            return const(ca / cb)
        if cb == 1.0:
            return a
    if ca == 0.0 and cb != 0.0:
        return ZERO
    return Binary("/", a, b)


def neg(a: Expr) -> Expr:
    ca = _cval(a)
    if ca is not None:
        return const(-ca)
    return Unary("neg", a)


def powc(base: Expr, exponent: float) -> Expr:
    exponent = float(exponent)
    if exponent == 1.0:
        return base
    if exponent == 0.0:
        return ONE
    cb = _cval(base)
    if cb is not None:
        try:
            return const(_pow_value(cb, exponent, None))
        except (EvalDomainError, OverflowError):
            pass
    return Power(base, exponent)


def apply_unary(op: str, arg: Expr) -> Expr:
    if op not in _UNARY_EVAL:
        raise ValueError(f"unknown unary operation {op!r}")
    ca = _cval(arg)
    if ca is not None:
        try:
            return const(_unary_value(op, ca, None))
        except (EvalDomainError, OverflowError):
            pass
    return Unary(op, arg)


def exp(a: Expr) -> Expr:
    return apply_unary("exp", a)


def log(a: Expr) -> Expr:
    return apply_unary("log", a)


def sin(a: Expr) -> Expr:
    return apply_unary("sin", a)


def cos(a: Expr) -> Expr:
    return apply_unary("cos", a)


def sqrt(a: Expr) -> Expr:
    return apply_unary("sqrt", a)


# --- evaluation -------------------------------------------------------------


def _raise_domain(message: str, e: Expr):
    raise EvalDomainError(message, format_expr(e))


def _unary_value(op: str, v: float, e: Expr | None) -> float:
    try:
        if op == "neg":
            return -v
        if op == "exp":
            return math.exp(v)
        if op == "log":
            if v <= 0.0:
                _raise_domain("log of a nonpositive value", e if e else ZERO)
            return math.log(v)
        if op == "sin":
            return math.sin(v)
        if op == "cos":
            return math.cos(v)
        if op == "tan":
            return math.tan(v)
        if op == "sinh":
            return math.sinh(v)
        if op == "cosh":
            return math.cosh(v)
        if op == "sqrt":
            if v < 0.0:
                _raise_domain("sqrt of a negative value", e if e else ZERO)
            return math.sqrt(v)
        if op == "abs":
            return abs(v)
    except OverflowError:
        _raise_domain("overflow", e if e else ZERO)
    raise ValueError(f"unknown unary operation {op!r}")


def _pow_value(b: float, c: float, e: Expr | None) -> float:
    if b == 0.0 and c < 0.0:
        _raise_domain("zero raised to a negative power", e if e else ZERO)
    if b < 0.0 and c != int(c):
        _raise_domain("fractional power of a negative base", e if e else ZERO)
    try:
        out = math.pow(b, c)
    except OverflowError:
        _raise_domain("overflow in power", e if e else ZERO)
    return out


_UNARY_EVAL = frozenset(
    ["neg", "exp", "log", "sin", "cos", "tan", "sinh", "cosh", "sqrt", "abs"]
)


def evaluate(e: Expr, point, cache: dict | None = None) -> float:
    """Evaluate at a point (sequence of floats). A shared cache dict makes
    evaluation of many expressions with common subtrees linear in the number
    of distinct nodes."""
    if cache is None:
        cache = {}
    return _eval(e, point, cache)


def _eval(e: Expr, point, cache: dict) -> float:
    # keyed by the node itself: the cache must pin nodes alive, or a recycled
    # address could hand a temporary expression another node's value
    hit = cache.get(e)
    if hit is not None:
        return hit
    if isinstance(e, Const):
        out = e.value
    elif isinstance(e, Var):
        out = float(point[e.index])
    elif isinstance(e, Unary):
        out = _unary_value(e.op, _eval(e.arg, point, cache), e)
    elif isinstance(e, Binary):
        va = _eval(e.a, point, cache)
        vb = _eval(e.b, point, cache)
        if e.op == "+":
            out = va + vb
        elif e.op == "-":
            out = va - vb
        elif e.op == "*":
            out = va * vb
        else:
            if vb == 0.0:
                _raise_domain("division by zero", e)
            out = va / vb
    elif isinstance(e, Power):
        out = _pow_value(_eval(e.base, point, cache), e.exponent, e)
    elif isinstance(e, Call):
        out = _eval(e.body, (_eval(e.arg, point, cache),), {})
    else:
        raise TypeError(f"unknown expression node {type(e).__name__}")
    if not math.isfinite(out):
        _raise_domain("non-finite value", e)
    cache[e] = out
    return out


# --- differentiation --------------------------------------------------------


def diff(e: Expr, i: int) -> Expr:
    """Exact partial derivative with respect to coordinate i."""
    cached = e._dcache.get(i)
    if cached is None:
        cached = _diff(e, i)
        e._dcache[i] = cached
    return cached


def _diff(e: Expr, i: int) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == i else ZERO
    if isinstance(e, Unary):
        da = diff(e.arg, i)
        a = e.arg
        op = e.op
        if op == "neg":
            return neg(da)
        if op == "exp":
            return mul(e, da)
        if op == "log":
            return div(da, a)
        if op == "sin":
            return mul(apply_unary("cos", a), da)
        if op == "cos":
            return neg(mul(apply_unary("sin", a), da))
        if op == "tan":
            return div(da, powc(apply_unary("cos", a), 2.0))
        if op == "sinh":
            return mul(apply_unary("cosh", a), da)
        if op == "cosh":
            return mul(apply_unary("sinh", a), da)
        if op == "sqrt":
            return div(da, mul(const(2.0), e))
        if op == "abs":
            return mul(div(e, a), da)
        raise ValueError(f"unknown unary operation {op!r}")
    if isinstance(e, Binary):
        da, db = diff(e.a, i), diff(e.b, i)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, e.b), mul(e.a, db))
        return div(sub(mul(da, e.b), mul(e.a, db)), powc(e.b, 2.0))
    if isinstance(e, Power):
        return mul(mul(const(e.exponent), powc(e.base, e.exponent - 1.0)), diff(e.base, i))
    if isinstance(e, Call):
        inner = substitute(diff(e.body, 0), {0: e.arg})
        return mul(inner, diff(e.arg, i))
    raise TypeError(f"unknown expression node {type(e).__name__}")


# --- structure helpers ------------------------------------------------------


def free_vars(e: Expr) -> frozenset[int]:
    """Set of coordinate indices the expression actually reads."""
    out: set[int] = set()
    stack = [e]
    seen: set[int] = set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Var):
            out.add(node.index)
        elif isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.append(node.a)
            stack.append(node.b)
        elif isinstance(node, Power):
            stack.append(node.base)
        elif isinstance(node, Call):
            stack.append(node.arg)  # body lives in its own variable space
    return frozenset(out)


def substitute(e: Expr, mapping: dict[int, Expr]) -> Expr:
    """Replace Var(i) by mapping[i] wherever present. Missing indices keep
    their variables. Call bodies are untouched (their variable is private)."""
    memo: dict[int, Expr] = {}

    def walk(node: Expr) -> Expr:
        hit = memo.get(id(node))
        if hit is not None:
            return hit
        if isinstance(node, Const):
            out = node
        elif isinstance(node, Var):
            out = mapping.get(node.index, node)
        elif isinstance(node, Unary):
            out = apply_unary(node.op, walk(node.arg))
        elif isinstance(node, Binary):
            a, b = walk(node.a), walk(node.b)
            out = {"+": add, "-": sub, "*": mul, "/": div}[node.op](a, b)
        elif isinstance(node, Power):
            out = powc(walk(node.base), node.exponent)
        elif isinstance(node, Call):
            out = Call(node.name, node.body, walk(node.arg))
        else:
            raise TypeError(f"unknown expression node {type(node).__name__}")
        memo[id(node)] = out
        return out

    return walk(e)


def is_const_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1.0


# --- printing ---------------------------------------------------------------

_PREC_ADD = 10
_PREC_MUL = 20
_PREC_NEG = 15
_PREC_POW = 30
_PREC_ATOM = 40


def _fmt_float(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def format_expr(e: Expr, names=None) -> str:
    """Render to a string the parser accepts back (given the same chart names
    and user-function declarations)."""

    def name_of(i: int) -> str:
        if names is not None and i < len(names):
            return names[i]
        return f"x{i}"

    def fmt(node: Expr, ctx: int) -> str:
        if isinstance(node, Const):
            text = _fmt_float(node.value)
            if node.value < 0 and ctx > _PREC_NEG:
                return f"({text})"
            return text
        if isinstance(node, Var):
            return name_of(node.index)
        if isinstance(node, Unary):
            if node.op == "neg":
                text = f"-{fmt(node.arg, _PREC_NEG + 1)}"
                return f"({text})" if ctx > _PREC_NEG else text
            return f"{node.op}({fmt(node.arg, 0)})"
        if isinstance(node, Binary):
            prec = _PREC_ADD if node.op in "+-" else _PREC_MUL
            right_bump = 1 if node.op in "-/" else 0
            text = (
                f"{fmt(node.a, prec)} {node.op} {fmt(node.b, prec + right_bump)}"
                if node.op in "+-"
                else f"{fmt(node.a, prec)}{node.op}{fmt(node.b, prec + right_bump)}"
            )
            return f"({text})" if ctx > prec else text
        if isinstance(node, Power):
            expo = _fmt_float(node.exponent)
            text = f"{fmt(node.base, _PREC_POW + 1)}^{expo}"
            return f"({text})" if ctx > _PREC_POW else text
        if isinstance(node, Call):
            return f"{node.name}({fmt(node.arg, 0)})"
        raise TypeError(f"unknown expression node {type(node).__name__}")

    return fmt(e, 0)


# --- parser -----------------------------------------------------------------

_BUILTINS = frozenset(
    ["exp", "log", "sin", "cos", "tan", "sinh", "cosh", "sqrt", "abs"]
)


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        self._scan()
        self.pos = 0

    def _scan(self):
        text, i, n = self.text, 0, len(self.text)
        while i < n:
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
                j = i
                while j < n and text[j].isdigit():
                    j += 1
                if j < n and text[j] == ".":
                    j += 1
                    while j < n and text[j].isdigit():
                        j += 1
                if j < n and text[j] in "eE":
                    k = j + 1
                    if k < n and text[k] in "+-":
                        k += 1
                    if k < n and text[k].isdigit():
                        j = k
                        while j < n and text[j].isdigit():
                            j += 1
                self.tokens.append(("num", text[i:j], i))
                i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.tokens.append(("name", text[i:j], i))
                i = j
                continue
            if ch in "+-*/^(),":
                self.tokens.append((ch, ch, i))
                i += 1
                continue
            raise ParseError(f"unexpected character {ch!r}", i)
        self.tokens.append(("end", "", n))

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        if tok[0] != "end":
            self.pos += 1
        return tok


def parse_expr(text: str, chart: Chart, functions: dict[str, Expr] | None = None) -> Expr:
    """Parse an expression over the chart's coordinate names.

    Grammar (standard precedence, left associative, `^` binds a literal
    constant exponent):

        expr   := term (("+" | "-") term)*
        term   := factor (("*" | "/") factor)*
        factor := "-" factor | base ("^" snumber)?
        base   := number | coord | "(" expr ")" | func "(" expr ")"

    `functions` maps declared univariate function names to their bodies
    (expressions in one auxiliary variable).
    """
    toks = _Tokens(text)
    functions = functions or {}
    index = {name: i for i, name in enumerate(chart.names)}

    def parse_sum() -> Expr:
        node = parse_term()
        while toks.peek()[0] in "+-":
            op = toks.take()[0]
            rhs = parse_term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def parse_term() -> Expr:
        node = parse_factor()
        while toks.peek()[0] in "*/":
            op = toks.take()[0]
            rhs = parse_factor()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def parse_factor() -> Expr:
        if toks.peek()[0] == "-":
            toks.take()
            return neg(parse_factor())
        node = parse_base()
        if toks.peek()[0] == "^":
            toks.take()
            sign = 1.0
            if toks.peek()[0] == "-":
                toks.take()
                sign = -1.0
            kind, text_, pos = toks.take()
            if kind != "num":
                raise ParseError("exponent must be a numeric literal", pos)
            node = powc(node, sign * float(text_))
        return node

    def parse_base() -> Expr:
        kind, text_, pos = toks.take()
        if kind == "num":
            return const(float(text_))
        if kind == "(":
            node = parse_sum()
            kind2, _, pos2 = toks.take()
            if kind2 != ")":
                raise ParseError("expected ')'", pos2)
            return node
        if kind == "name":
            if toks.peek()[0] == "(":
                toks.take()
                arg = parse_sum()
                kind2, _, pos2 = toks.take()
                if kind2 == ",":
                    raise ParseError(
                        f"function {text_!r} expects exactly one argument", pos2
                    )
                if kind2 != ")":
                    raise ParseError("expected ')'", pos2)
                if text_ in _BUILTINS:
                    return apply_unary(text_, arg)
                if text_ in functions:
                    return Call(text_, functions[text_], arg)
                raise ParseError(f"unknown function {text_!r}", pos)
            if text_ in index:
                return var(index[text_])
            raise ParseError(f"unknown identifier {text_!r}", pos)
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {text_!r}", pos)

    root = parse_sum()
    kind, text_, pos = toks.peek()
    if kind != "end":
        raise ParseError(f"unexpected token {text_!r}", pos)
    return root


# --- jets and the finite-difference oracle ----------------------------------


@dataclass
class Jet2:
    """Value, gradient and symmetric Hessian of a scalar field at a point."""

    value: float
    grad: np.ndarray
    hess: np.ndarray


def eval_jet2(e: Expr, p) -> Jet2:
    """Second-order jet by evaluating cached symbolic derivatives. Symmetry
    of the Hessian is exact: entry (i, j) with i <= j is mirrored."""
    p = tuple(float(x) for x in p)
    n = len(p)
    cache: dict = {}
    value = evaluate(e, p, cache)
    grad = np.empty(n)
    firsts = [diff(e, i) for i in range(n)]
    for i in range(n):
        grad[i] = evaluate(firsts[i], p, cache)
    hess = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            hess[i, j] = evaluate(diff(firsts[i], j), p, cache)
            hess[j, i] = hess[i, j]
    return Jet2(value, grad, hess)


def fd_oracle(e: Expr, p, h: float, chart: Chart | None = None):
    """Central finite-difference gradient and Hessian, O(h^2). Used as the
    independent check of the symbolic derivatives, never the other way
    around."""
    p = np.asarray(p, dtype=float)
    n = p.size
    if h <= 0.0:
        raise ValueError("step must be positive")
    if chart is not None:
        for i in range(n):
            lo, hi = chart.domain[i]
            if p[i] - h < lo or p[i] + h > hi:
                raise ValueError(
                    f"step {h} leaves the domain along coordinate {i}"
                )

    def f(q) -> float:
        return evaluate(e, tuple(q))

    f0 = f(p)
    grad = np.empty(n)
    hess = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        fp, fm = f(p + ei), f(p - ei)
        grad[i] = (fp - fm) / (2.0 * h)
        hess[i, i] = (fp - 2.0 * f0 + fm) / (h * h)
    for i in range(n):
        for j in range(i + 1, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            hess[i, j] = (
                f(p + ei + ej) - f(p + ei - ej) - f(p - ei + ej) + f(p - ei - ej)
            ) / (4.0 * h * h)
            hess[j, i] = hess[i, j]
    return grad, hess
