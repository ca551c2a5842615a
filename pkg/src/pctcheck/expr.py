"""Expression trees shared by guards, probabilities, updates and certificates.

Expressions are immutable trees.  They are evaluated either exactly (over
``int``/``Fraction``) or approximately (binary64).  A third, vectorised mode
evaluates over numpy arrays and is used by the simulator.

Grammar, loosest binding first::

    expr    := 'if' expr 'then' expr 'else' expr | or
    or      := and ('||' and)*
    and     := not ('&&' not)*
    not     := '!' not | cmp
    cmp     := sum (('<'|'<='|'=='|'='|'!='|'>='|'>') sum)?
    sum     := prod (('+'|'-') prod)*
    prod    := neg (('*'|'/') neg)*
    neg     := '-' neg | pow
    pow     := atom ('^' neg)?
    atom    := number | ident | '@'ident | call | 'true' | 'false' | '(' expr ')'

A literal ``a/b`` written without spaces is a single rational constant.
"""
from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import (
    DivisionByZero,
    DomainError,
    EvalError,
    ExactnessViolation,
    PctSyntaxError,
    UnknownIdentifier,
)

Number = int | Fraction | float

EXACT = "exact"
APPROX = "approx"
VECTOR = "vector"

FUNCTIONS: dict[str, tuple[int, int | None]] = {
    "ln": (1, 1),
    "exp": (1, 1),
    "sqrt": (1, 1),
    "abs": (1, 1),
    "floor": (1, 1),
    "min": (2, None),
    "max": (2, None),
    "euclid_norm": (2, 2),
    "tower_height": (2, 2),
}
TRANSCENDENTAL = frozenset({"ln", "exp", "sqrt", "euclid_norm"})
KEYWORDS = frozenset({"if", "then", "else", "true", "false"})
COMPARISONS = ("<", "<=", "==", "!=", ">=", ">")
ARITH = ("+", "-", "*", "/", "^")
BOOLEAN = ("&&", "||")

# largest exact power we are willing to build, in bits
POW_BIT_CAP = 1 << 22


# ---------------------------------------------------------------------------
# nodes


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ()

    def __str__(self) -> str:
        return pretty(self)

    def evaluate(self, env: Mapping[str, object], mode: str = EXACT):
        return evaluate(self, env, mode)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: Fraction

    def __post_init__(self):
        v = self.value
        if isinstance(v, bool) or not isinstance(v, Fraction):
            object.__setattr__(self, "value", Fraction(v))


@dataclass(frozen=True)
class BoolConst(Expr):
    value: bool


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Loc(Expr):
    """Symbolic location reference, written ``@name``."""

    name: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # '-' or '!'
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    other: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple = field(default_factory=tuple)


TRUE = BoolConst(True)
FALSE = BoolConst(False)


def const(v) -> Const:
    return Const(Fraction(v))


def conj(a: Expr, b: Expr) -> Expr:
    if a == TRUE:
        return b
    if b == TRUE:
        return a
    return Binary("&&", a, b)


def negate(a: Expr) -> Expr:
    return Unary("!", a)


# ---------------------------------------------------------------------------
# pretty printing


def _fmt_const(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def _atomic(e: Expr) -> bool:
    if isinstance(e, Const):
        return e.value >= 0
    return isinstance(e, (BoolConst, Var, Loc, Call))


def _wrap(e: Expr) -> str:
    s = pretty(e)
    return s if _atomic(e) else f"({s})"


def pretty(e: Expr) -> str:
    """Render ``e`` so that ``parse_expr(pretty(e)) == e``."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, BoolConst):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Loc):
        return "@" + e.name
    if isinstance(e, Unary):
        return e.op + _wrap(e.arg)
    if isinstance(e, Binary):
        return f"{_wrap(e.left)} {e.op} {_wrap(e.right)}"
    if isinstance(e, Ite):
        return f"if {_wrap(e.cond)} then {_wrap(e.then)} else {_wrap(e.other)}"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(pretty(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# lexing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<rat>\d+/\d+(?![\d.]))
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<loc>@[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|:=|<=|>=|==|!=|&&|\|\||[-+*/^<>=!(),;:{}\[\]])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, loc, op, eof
    text: str
    pos: int
    value: object = None


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into tokens; ``#`` starts a comment running to end of line."""
    out: list[Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PctSyntaxError(pos, {"token"}, f"unexpected character {text[pos]!r}", text)
        kind = m.lastgroup
        s = m.group()
        if kind == "rat":
            a, b = s.split("/")
            if int(b) == 0:
                raise PctSyntaxError(pos + len(a) + 1, {"nonzero denominator"}, "zero denominator", text)
            out.append(Token("num", s, pos, Fraction(int(a), int(b))))
        elif kind == "num":
            out.append(Token("num", s, pos, Fraction(s)))
        elif kind != "ws":
            out.append(Token(kind, s, pos))
        pos = m.end()
    out.append(Token("eof", "", n))
    return out


# ---------------------------------------------------------------------------
# parsing

_ATOM_START = {"number", "identifier", "@location", "'('", "'-'", "'!'", "'if'", "'true'", "'false'"}


class TokenStream:
    """Cursor over a token list; also used by the program and certificate parsers."""

    def __init__(self, text: str, tokens: list[Token] | None = None):
        self.text = text
        self.tokens = tokens if tokens is not None else tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at_op(self, *ops: str) -> bool:
        t = self.tok
        return t.kind == "op" and t.text in ops

    def at_word(self, *words: str) -> bool:
        t = self.tok
        return t.kind == "ident" and t.text in words

    def error(self, expected, message: str = "") -> PctSyntaxError:
        return PctSyntaxError(self.tok.pos, expected, message, self.text)

    def expect_op(self, op: str) -> Token:
        if not self.at_op(op):
            raise self.error({f"'{op}'"})
        return self.advance()

    def expect_word(self, word: str) -> Token:
        if not self.at_word(word):
            raise self.error({f"'{word}'"})
        return self.advance()

    def expect_ident(self, what: str = "identifier") -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise self.error({what})
        self.advance()
        return t.text


class _ExprParser:
    def __init__(self, ts: TokenStream, variables, locations):
        self.ts = ts
        self.variables = variables
        self.locations = locations

    def parse(self) -> Expr:
        ts = self.ts
        if ts.at_word("if"):
            ts.advance()
            c = self.parse()
            ts.expect_word("then")
            a = self.parse()
            ts.expect_word("else")
            b = self.parse()
            return Ite(c, a, b)
        return self.disj()

    def disj(self) -> Expr:
        e = self.conj()
        while self.ts.at_op("||"):
            self.ts.advance()
            e = Binary("||", e, self.conj())
        return e

    def conj(self) -> Expr:
        e = self.neg_bool()
        while self.ts.at_op("&&"):
            self.ts.advance()
            e = Binary("&&", e, self.neg_bool())
        return e

    def neg_bool(self) -> Expr:
        if self.ts.at_op("!"):
            self.ts.advance()
            return Unary("!", self.neg_bool())
        return self.cmp()

    def cmp(self) -> Expr:
        e = self.sum()
        if self.ts.at_op(*COMPARISONS, "="):
            op = self.ts.advance().text
            op = "==" if op == "=" else op
            e = Binary(op, e, self.sum())
            if self.ts.at_op(*COMPARISONS, "="):
                raise self.ts.error({"'&&'", "'||'", "end of expression"}, "comparisons do not chain")
        return e

    def sum(self) -> Expr:
        e = self.prod()
        while self.ts.at_op("+", "-"):
            op = self.ts.advance().text
            e = Binary(op, e, self.prod())
        return e

    def prod(self) -> Expr:
        e = self.neg()
        while self.ts.at_op("*", "/"):
            op = self.ts.advance().text
            e = Binary(op, e, self.neg())
        return e

    def neg(self) -> Expr:
        if self.ts.at_op("-"):
            self.ts.advance()
            a = self.neg()
            if isinstance(a, Const):
                return Const(-a.value)
            return Unary("-", a)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.ts.at_op("^"):
            self.ts.advance()
            return Binary("^", base, self.neg())
        return base

    def atom(self) -> Expr:
        ts = self.ts
        t = ts.tok
        if t.kind == "num":
            ts.advance()
            return Const(t.value)
        if t.kind == "loc":
            ts.advance()
            name = t.text[1:]
            if self.locations is not None and name not in self.locations:
                raise UnknownIdentifier(t.text)
            return Loc(name)
        if t.kind == "op" and t.text == "(":
            ts.advance()
            e = self.parse()
            ts.expect_op(")")
            return e
        if t.kind == "ident":
            if t.text == "true" or t.text == "false":
                ts.advance()
                return BoolConst(t.text == "true")
            if t.text == "if":
                return self.parse()
            if t.text in KEYWORDS:
                raise ts.error(_ATOM_START)
            ts.advance()
            if t.text in FUNCTIONS:
                return self.call(t)
            if self.variables is not None and t.text not in self.variables:
                raise UnknownIdentifier(t.text)
            return Var(t.text)
        raise ts.error(_ATOM_START)

    def call(self, name_tok: Token) -> Expr:
        ts = self.ts
        ts.expect_op("(")
        args = [self.parse()]
        while ts.at_op(","):
            ts.advance()
            args.append(self.parse())
        lo, hi = FUNCTIONS[name_tok.text]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ts.error({"')'"} if hi is not None and len(args) > hi else {"','"},
                           f"{name_tok.text} takes {lo if lo == hi else f'at least {lo}'} argument(s)")
        ts.expect_op(")")
        return Call(name_tok.text, tuple(args))


def parse_from(ts: TokenStream, variables: Iterable[str] | None = None,
               locations: Iterable[str] | None = None) -> Expr:
    """Parse one expression from the stream, stopping at the first token that cannot extend it."""
    vs = None if variables is None else frozenset(variables)
    ls = None if locations is None else frozenset(locations)
    return _ExprParser(ts, vs, ls).parse()


def parse_expr(text: str, variables: Iterable[str] | None = None,
               locations: Iterable[str] | None = None) -> Expr:
    """Parse a complete expression.

    If ``variables`` is given, identifiers outside it raise UnknownIdentifier.
    """
    ts = TokenStream(text)
    e = parse_from(ts, variables, locations)
    if ts.tok.kind != "eof":
        raise ts.error({"operator", "end of input"})
    return e


# ---------------------------------------------------------------------------
# analysis


def walk(e: Expr):
    yield e
    if isinstance(e, Unary):
        yield from walk(e.arg)
    elif isinstance(e, Binary):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, Ite):
        yield from walk(e.cond)
        yield from walk(e.then)
        yield from walk(e.other)
    elif isinstance(e, Call):
        for a in e.args:
            yield from walk(a)


def free_vars(e: Expr) -> set[str]:
    return {n.name for n in walk(e) if isinstance(n, Var)}


def uses_locations(e: Expr) -> bool:
    return any(isinstance(n, Loc) or (isinstance(n, Var) and n.name in ("loc", "sigma.loc")) for n in walk(e))


def is_transcendental(e: Expr) -> bool:
    return any(isinstance(n, Call) and n.func in TRANSCENDENTAL for n in walk(e))


def uses_variable_power(e: Expr) -> bool:
    """True if ``e`` contains ``b ^ t`` with a non-constant exponent."""
    return any(isinstance(n, Binary) and n.op == "^" and not isinstance(n.right, Const) for n in walk(e))


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.arg, mapping))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Ite):
        return Ite(substitute(e.cond, mapping), substitute(e.then, mapping), substitute(e.other, mapping))
    if isinstance(e, Call):
        return Call(e.func, tuple(substitute(a, mapping) for a in e.args))
    return e


# ---------------------------------------------------------------------------
# scalar helpers


BIG_DIGITS = 60


def _int_text(n: int) -> str:
    if n.bit_length() * 0.30103 < BIG_DIGITS:
        return str(n)
    return f"{'-' if n < 0 else ''}<{abs(n).bit_length()}-bit integer>"


def format_number(v) -> str:
    """Human-readable rendering; huge integers are abbreviated by bit length."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return _int_text(v)
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return _int_text(v.numerator)
        return f"{_int_text(v.numerator)}/{_int_text(v.denominator)}"
    if isinstance(v, float):
        return "inf" if v == math.inf else "-inf" if v == -math.inf else repr(v)
    return str(v)


def normalize(v):
    """Collapse integral Fractions to int; leave everything else alone."""
    if type(v) is Fraction and v.denominator == 1:
        return v.numerator
    return v


def _exact_div(a, b, node):
    if b == 0:
        raise DivisionByZero(pretty(node))
    if type(a) is int and type(b) is int:
        q, r = divmod(a, b)
        if r == 0:
            return q
    return normalize(Fraction(a) / Fraction(b))


def _exact_pow(a, b, node):
    if type(b) is Fraction:
        if b.denominator != 1:
            raise DomainError(f"non-integer exponent in {pretty(node)}")
        b = b.numerator
    b = int(b)
    if a == 0 and b < 0:
        raise DivisionByZero(pretty(node))
    if abs(a) > 1 and b != 0:
        bits = abs(b) * max(Fraction(a).numerator.bit_length(), Fraction(a).denominator.bit_length())
        if bits > POW_BIT_CAP:
            raise EvalError(f"result too large in {pretty(node)}")
    if b >= 0:
        return normalize(Fraction(a) ** b) if type(a) is Fraction else a ** b
    return normalize(Fraction(1) / (Fraction(a) ** (-b)))


def tower_height(base, value) -> int:
    """Smallest j with t_j >= value where t_0 = base and t_{j+1} = base ** t_j.

    On the tower itself this counts exponentiations from ``base`` to ``value``;
    values at or below ``base`` give 0.
    """
    if isinstance(base, float):
        if not base.is_integer():
            raise DomainError("tower_height base must be an integer")
        base = int(base)
    base = Fraction(base)
    if base.denominator != 1 or base < 2:
        raise DomainError("tower_height base must be an integer >= 2")
    b = base.numerator
    if isinstance(value, float):
        if math.isnan(value):
            raise DomainError("tower_height of NaN")
        if math.isinf(value):
            raise EvalError("tower_height of infinity")
    target = math.ceil(value)
    t, j = b, 0
    cap = target.bit_length()
    while t < target:
        j += 1
        if t >= cap:
            return j
        t = b ** t
    return j


def _floor(v):
    return math.floor(v)


# ---------------------------------------------------------------------------
# compilation to closures

Env = Mapping[str, object]
Fn = Callable[[Env], object]


def _lookup(name: str, approx: bool) -> Fn:
    if approx:
        def f(env):
            try:
                v = env[name]
            except KeyError:
                raise EvalError(f"unbound variable {name!r}") from None
            if type(v) is float or type(v) is str:
                return v
            return float(v)
    else:
        def f(env):
            try:
                return env[name]
            except KeyError:
                raise EvalError(f"unbound variable {name!r}") from None
    return f


def _compile(e: Expr, approx: bool) -> Fn:
    if isinstance(e, Const):
        v = float(e.value) if approx else normalize(e.value)
        return lambda env: v
    if isinstance(e, BoolConst):
        b = e.value
        return lambda env: b
    if isinstance(e, Var):
        return _lookup(e.name, approx)
    if isinstance(e, Loc):
        name = e.name
        return lambda env: name
    if isinstance(e, Unary):
        a = _compile(e.arg, approx)
        if e.op == "-":
            return lambda env: -a(env)
        return lambda env: not a(env)
    if isinstance(e, Ite):
        c, t, o = _compile(e.cond, approx), _compile(e.then, approx), _compile(e.other, approx)
        return lambda env: t(env) if c(env) else o(env)
    if isinstance(e, Binary):
        return _compile_binary(e, approx)
    if isinstance(e, Call):
        return _compile_call(e, approx)
    raise TypeError(f"not an expression: {e!r}")


def _compile_binary(e: Binary, approx: bool) -> Fn:
    l, r = _compile(e.left, approx), _compile(e.right, approx)
    op = e.op
    if op == "+":
        return lambda env: l(env) + r(env)
    if op == "-":
        return lambda env: l(env) - r(env)
    if op == "*":
        return lambda env: l(env) * r(env)
    if op == "&&":
        return lambda env: bool(l(env)) and bool(r(env))
    if op == "||":
        return lambda env: bool(l(env)) or bool(r(env))
    if op == "==":
        return lambda env: l(env) == r(env)
    if op == "!=":
        return lambda env: l(env) != r(env)
    if op in ("<", "<=", ">", ">="):
        fn = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}[op]

        def cmp(env):
            try:
                return fn(l(env), r(env))
            except TypeError:
                raise EvalError(f"cannot order operands in {pretty(e)}") from None
        return cmp
    if op == "/":
        if approx:
            def div(env):
                d = r(env)
                if d == 0:
                    raise DivisionByZero(pretty(e))
                return l(env) / d
            return div
        return lambda env: _exact_div(l(env), r(env), e)
    if op == "^":
        if approx:
            def pw(env):
                a, b = l(env), r(env)
                if a == 0 and b < 0:
                    raise DivisionByZero(pretty(e))
                if a < 0 and not float(b).is_integer():
                    raise DomainError(f"negative base with fractional exponent in {pretty(e)}")
                try:
                    return math.pow(a, b)
                except OverflowError:
                    raise EvalError(f"overflow in {pretty(e)}") from None
            return pw
        return lambda env: _exact_pow(l(env), r(env), e)
    raise TypeError(f"unknown operator {op}")


def _compile_call(e: Call, approx: bool) -> Fn:
    args = [_compile(a, approx) for a in e.args]
    f = e.func
    if f in TRANSCENDENTAL and not approx:
        def refuse(env):
            raise ExactnessViolation(f)
        return refuse
    a0 = args[0]
    if f == "abs":
        return lambda env: abs(a0(env))
    if f == "floor":
        if approx:
            return lambda env: float(math.floor(a0(env)))
        return lambda env: math.floor(a0(env))
    if f == "min":
        return lambda env: min(a(env) for a in args)
    if f == "max":
        return lambda env: max(a(env) for a in args)
    if f == "tower_height":
        a1 = args[1]
        if approx:
            return lambda env: float(tower_height(a0(env), a1(env)))
        return lambda env: tower_height(a0(env), a1(env))
    if f == "ln":
        def ln(env):
            v = a0(env)
            if v <= 0:
                raise DomainError(f"ln of non-positive value {v}")
            return math.log(v)
        return ln
    if f == "sqrt":
        def sq(env):
            v = a0(env)
            if v < 0:
                raise DomainError(f"sqrt of negative value {v}")
            return math.sqrt(v)
        return sq
    if f == "exp":
        def ex(env):
            try:
                return math.exp(a0(env))
            except OverflowError:
                raise EvalError(f"overflow in {pretty(e)}") from None
        return ex
    if f == "euclid_norm":
        a1 = args[1]
        return lambda env: math.hypot(a0(env), a1(env))
    raise TypeError(f"unknown function {f}")


def compiled(e: Expr, mode: str = EXACT) -> Fn:
    """Return a cached closure ``env -> value`` for ``e``."""
    attr = "_fn_approx" if mode == APPROX else "_fn_exact"
    fn = e.__dict__.get(attr)
    if fn is None:
        fn = _compile(e, mode == APPROX)
        object.__setattr__(e, attr, fn)
    return fn


def evaluate(e: Expr, env: Env, mode: str = EXACT):
    """Evaluate ``e`` under ``env``.

    Exact mode returns ``int``/``Fraction`` (or ``bool`` for boolean
    subtrees, which behave as 0/1); approx mode returns floats.
    """
    if mode == VECTOR:
        return evaluate_vector(e, env)
    if mode not in (EXACT, APPROX):
        raise ValueError(f"unknown mode {mode!r}")
    try:
        v = compiled(e, mode)(env)
    except ZeroDivisionError:
        raise DivisionByZero(pretty(e)) from None
    except OverflowError:
        raise EvalError(f"overflow evaluating {pretty(e)}") from None
    if mode == APPROX and type(v) is float and not math.isfinite(v):
        raise EvalError(f"non-finite result evaluating {pretty(e)}")
    return v


def to_number(v):
    """Coerce an evaluation result to a number (booleans become 0/1)."""
    if type(v) is bool:
        return int(v)
    return v


# ---------------------------------------------------------------------------
# vectorised evaluation (numpy, binary64)

_NP_CMP = {"<": np.less, "<=": np.less_equal, "==": np.equal, "!=": np.not_equal,
           ">=": np.greater_equal, ">": np.greater}


def _vec(e: Expr, env):
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, BoolConst):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Loc):
        raise EvalError("location references are not supported in vectorised evaluation")
    if isinstance(e, Unary):
        a = _vec(e.arg, env)
        return -a if e.op == "-" else np.logical_not(a)
    if isinstance(e, Ite):
        return np.where(_vec(e.cond, env), _vec(e.then, env), _vec(e.other, env))
    if isinstance(e, Binary):
        a, b = _vec(e.left, env), _vec(e.right, env)
        op = e.op
        if op == "+":
            return np.add(a, b)
        if op == "-":
            return np.subtract(a, b)
        if op == "*":
            return np.multiply(a, b)
        if op == "/":
            return np.divide(a, b)
        if op == "^":
            return np.power(np.asarray(a, dtype=float), b)
        if op == "&&":
            return np.logical_and(a, b)
        if op == "||":
            return np.logical_or(a, b)
        return _NP_CMP[op](a, b)
    if isinstance(e, Call):
        args = [_vec(a, env) for a in e.args]
        f = e.func
        if f == "abs":
            return np.abs(args[0])
        if f == "floor":
            return np.floor(args[0])
        if f == "min":
            return np.minimum.reduce(np.broadcast_arrays(*args))
        if f == "max":
            return np.maximum.reduce(np.broadcast_arrays(*args))
        if f == "ln":
            return np.log(args[0])
        if f == "sqrt":
            return np.sqrt(args[0])
        if f == "exp":
            return np.exp(args[0])
        if f == "euclid_norm":
            return np.hypot(args[0], args[1])
        if f == "tower_height":
            fn = np.vectorize(lambda b, v: float(tower_height(float(b), float(v))), otypes=[float])
            return fn(args[0], args[1])
    raise TypeError(f"not an expression: {e!r}")


def evaluate_vector(e: Expr, env: Mapping[str, np.ndarray]):
    """Evaluate over arrays; any non-finite numeric entry raises EvalError."""
    with np.errstate(all="ignore"):
        out = _vec(e, env)
    arr = np.asarray(out)
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise EvalError(f"non-finite value evaluating {pretty(e)}")
    return out
