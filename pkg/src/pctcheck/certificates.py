"""Certificate records, the ``.cert`` format and value-function evaluation.

A certificate file starts with ``rule: <tag>;`` and lists value functions
either as per-location expressions::

    fn V at loop: abs(x) + 1;
    fn V at inc, dec: abs(x) + 2;
    fn V at *: 0;                 # any other location

or as explicit tables keyed by ``(location, values in variable order)``::

    table U { (loop, 0) = 1; (loop, 1) = 3; default = error; }
    table V approx { (loop, 1) = 0.6931471805599453; default = 0; }

``approx`` tables hold binary64 values.  Expressions may use the program
variables, ``loc`` (compare with ``@name``), ``terminal`` and, in Rule-7
certificates, the anchor bindings ``sigma.<var>`` and ``sigma.loc``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping

from .cfg import ProgramGraph, State
from .errors import (
    DivisionByZero,
    EvalError,
    ExactnessViolation,
    PctSyntaxError,
    RangeError,
    RuleMismatch,
    UndefinedAt,
    UnknownIdentifier,
)
from .expr import (
    APPROX,
    EXACT,
    TRUE,
    Const,
    Expr,
    TokenStream,
    compiled,
    free_vars,
    is_transcendental,
    normalize,
    parse_expr,
    parse_from,
    pretty,
    to_number,
)

RULES = ("variant", "martingale", "smvariant", "upper", "silower", "lowerfamily", "siast")

# ---------------------------------------------------------------------------
# value functions


@dataclass(frozen=True)
class ClosedForm:
    """Per-location expressions; ``'*'`` covers locations not listed."""

    name: str
    cases: tuple[tuple[str, Expr], ...]

    def __post_init__(self):
        object.__setattr__(self, "_by_loc", dict(self.cases))

    @property
    def exact(self) -> bool:
        return not any(is_transcendental(e) for _, e in self.cases)

    def expr_at(self, loc: str) -> Expr | None:
        d = self._by_loc
        e = d.get(loc)
        return d.get("*") if e is None else e


@dataclass(frozen=True)
class Table:
    """Explicit state table; ``default`` None means misses are errors."""

    name: str
    entries: tuple[tuple[State, object], ...]
    default: object = None
    approx: bool = False

    def __post_init__(self):
        object.__setattr__(self, "_lookup", dict(self.entries))

    @property
    def exact(self) -> bool:
        return not self.approx

    def get(self, s: State):
        return self._lookup.get(s, self.default)


ValueFunction = ClosedForm | Table


def state_env(g: ProgramGraph, s: State, anchor: State | None = None) -> dict:
    env = dict(zip(g.variables, s.vals))
    env["loc"] = s.loc
    env["terminal"] = g.is_terminal(s)
    if anchor is not None:
        for n, v in zip(g.variables, anchor.vals):
            env["sigma." + n] = v
        env["sigma.loc"] = anchor.loc
    return env


def state_predicate(g: ProgramGraph, text: str):
    """Compile a boolean expression over the variables, ``loc`` and ``terminal``."""
    e = parse_expr(text, set(g.variables) | {"loc", "terminal"}, set(g.location_names))
    fn = compiled(e, APPROX if is_transcendental(e) else EXACT)
    return lambda s: bool(fn(state_env(g, s)))


def cert_eval(f: ValueFunction, g: ProgramGraph, s: State, anchor: State | None = None, mode: str = EXACT,
              env: dict | None = None):
    """Value of ``f`` at ``s`` (``anchor`` supplies ``sigma.*`` bindings)."""
    if isinstance(f, Table):
        v = f.get(s)
        if v is None:
            raise UndefinedAt(f.name, g.describe(s))
        if f.approx:
            if mode == EXACT:
                raise ExactnessViolation(f"approx table {f.name}")
            return v
        return float(v) if mode == APPROX else v
    e = f.expr_at(s.loc)
    if e is None:
        raise UndefinedAt(f.name, g.describe(s))
    if env is None:
        env = state_env(g, s, anchor)
    try:
        v = compiled(e, mode)(env)
    except ZeroDivisionError:
        raise DivisionByZero(pretty(e)) from None
    except OverflowError:
        raise EvalError(f"overflow evaluating {f.name}") from None
    v = to_number(v)
    if mode == APPROX:
        v = float(v)
        if not math.isfinite(v):
            raise EvalError(f"non-finite value of {f.name} at {g.describe(s)}")
        return v
    return normalize(v)


def is_integral(v, exact: bool) -> bool:
    if exact and not isinstance(v, float):
        return Fraction(v).denominator == 1
    return abs(float(v) - round(float(v))) < 1e-9


def function_vars(f: ValueFunction) -> set[str]:
    if isinstance(f, Table):
        return set()
    out: set[str] = set()
    for _, e in f.cases:
        out |= free_vars(e)
    return out


# ---------------------------------------------------------------------------
# certificate records


@dataclass(frozen=True)
class Witness:
    r: object
    H: object
    eps: object


@dataclass(frozen=True)
class VariantCert:
    inv: Expr
    U: ValueFunction
    lo: Fraction
    hi: Fraction
    eps: Fraction
    rule: str = field(default="variant", init=False)


@dataclass(frozen=True)
class MartingaleCert:
    inv: Expr
    V: ValueFunction
    U: ValueFunction
    witnesses: tuple[Witness, ...]
    rule: str = field(default="martingale", init=False)


@dataclass(frozen=True)
class SMVariantCert:
    inv: Expr
    V: ValueFunction
    p_fn: Expr
    d_fn: Expr
    grid: tuple
    rule: str = field(default="smvariant", init=False)


@dataclass(frozen=True)
class SICert:
    inv: Expr
    SI: ValueFunction
    p: Fraction
    rule: str = field(default="upper", init=False)


@dataclass(frozen=True)
class SILowerCert:
    si: SICert
    U: ValueFunction
    eps: Fraction
    H: object
    rule: str = field(default="silower", init=False)

    @property
    def inv(self) -> Expr:
        return self.si.inv


@dataclass(frozen=True)
class FamilyEntry:
    n: int
    cert: SILowerCert
    depth: int | None = None


@dataclass(frozen=True)
class LowerFamilyCert:
    p: Fraction
    entries: tuple[FamilyEntry, ...]
    rule: str = field(default="lowerfamily", init=False)


@dataclass(frozen=True)
class AnchorData:
    """Per-anchor overrides for a Rule-7 certificate (None keeps the global value)."""

    SI: ValueFunction | None = None
    U: ValueFunction | None = None
    eps: Expr | None = None
    H: Expr | None = None


@dataclass(frozen=True)
class SIAstCert:
    inv: Expr
    p: Fraction
    anchors: tuple[State, ...] | None  # None: every interior state of the region
    SI: ValueFunction | None
    U: ValueFunction | None
    eps: Expr | None
    H: Expr | None
    overrides: tuple[tuple[State, AnchorData], ...] = ()
    rule: str = field(default="siast", init=False)

    def for_anchor(self, a: State) -> tuple[ValueFunction, ValueFunction, Expr, Expr]:
        d = dict(self.overrides).get(a, AnchorData())
        si, u = d.SI or self.SI, d.U or self.U
        eps, h = d.eps or self.eps, d.H or self.H
        missing = [n for n, v in (("SI", si), ("U", u), ("eps", eps), ("H", h)) if v is None]
        if missing:
            raise RuleMismatch("siast", f"anchor {a} lacks {', '.join(missing)}")
        return si, u, eps, h


Certificate = VariantCert | MartingaleCert | SMVariantCert | SICert | SILowerCert | LowerFamilyCert | SIAstCert


def check_certificate_names(cert: Certificate, g: ProgramGraph) -> None:
    """Raise UnknownIdentifier if a certificate expression uses a name the program lacks."""
    allowed = set(g.variables) | {"loc", "terminal"}
    anchored = allowed | {"sigma." + v for v in g.variables} | {"sigma.loc"}
    locs = set(g.location_names)

    def check_fn(f, names):
        if f is None:
            return
        if isinstance(f, Table):
            for s, _ in f.entries:
                if s.loc not in locs:
                    raise UnknownIdentifier(s.loc)
                if len(s.vals) != len(g.variables):
                    raise RangeError(f.name, s, "table key has wrong number of values")
            return
        for l, e in f.cases:
            if l != "*" and l not in locs:
                raise UnknownIdentifier(l)
            check_expr(e, names)

    def check_expr(e, names):
        if e is None:
            return
        bad = free_vars(e) - names
        if bad:
            raise UnknownIdentifier(sorted(bad)[0])

    if isinstance(cert, LowerFamilyCert):
        for ent in cert.entries:
            check_certificate_names(ent.cert, g)
        return
    check_expr(cert.inv, allowed)
    if isinstance(cert, VariantCert):
        check_fn(cert.U, allowed)
    elif isinstance(cert, MartingaleCert):
        check_fn(cert.V, allowed)
        check_fn(cert.U, allowed)
    elif isinstance(cert, SMVariantCert):
        check_fn(cert.V, allowed)
    elif isinstance(cert, SICert):
        check_fn(cert.SI, allowed)
    elif isinstance(cert, SILowerCert):
        check_fn(cert.si.SI, allowed)
        check_fn(cert.U, allowed)
    elif isinstance(cert, SIAstCert):
        for f in (cert.SI, cert.U):
            check_fn(f, anchored)
        check_expr(cert.eps, anchored)
        check_expr(cert.H, anchored)
        for a, d in cert.overrides:
            check_fn(d.SI, anchored)
            check_fn(d.U, anchored)
            check_expr(d.eps, anchored)
            check_expr(d.H, anchored)


# ---------------------------------------------------------------------------
# parsing


def _const_expr(ts: TokenStream):
    pos = ts.tok.pos
    e = parse_from(ts)
    try:
        v = to_number(compiled(e, EXACT)({}))
    except (EvalError, ZeroDivisionError) as exc:
        raise PctSyntaxError(pos, {"constant"}, f"not a constant: {exc}", ts.text) from None
    return normalize(Fraction(v))


def _state_key(ts: TokenStream) -> State:
    ts.expect_op("(")
    loc = ts.expect_ident("location name")
    vals = []
    while ts.at_op(","):
        ts.advance()
        vals.append(_const_expr(ts))
    ts.expect_op(")")
    return State(loc, tuple(vals))


class _Section:
    """Raw key/value content of one certificate block."""

    def __init__(self):
        self.scalars: dict[str, object] = {}
        self.exprs: dict[str, Expr] = {}
        self.fns: dict[str, list[tuple[str, Expr]]] = {}
        self.tables: dict[str, Table] = {}
        self.witnesses: list[Witness] = []
        self.grid: tuple | None = None
        self.entries: list[tuple[int, "_Section", int]] = []
        self.anchors: tuple[State, ...] | None | str = "unset"
        self.anchor_blocks: list[tuple[State, "_Section", int]] = []
        self.keys: list[tuple[str, int]] = []

    def fn(self, name: str) -> ValueFunction | None:
        if name in self.tables:
            return self.tables[name]
        if name in self.fns:
            return ClosedForm(name, tuple(self.fns[name]))
        return None


_EXPR_KEYS = {"invariant", "p_fn", "d_fn"}
_CONST_KEYS = {"lo", "hi", "eps", "p", "H", "depth"}


def _parse_section(ts: TokenStream, nested: bool) -> _Section:
    sec = _Section()
    while True:
        t = ts.tok
        if t.kind == "eof" or (nested and ts.at_op("}")):
            return sec
        pos = t.pos
        if ts.at_word("fn"):
            ts.advance()
            name = ts.expect_ident("function name")
            ts.expect_word("at")
            locs = []
            while True:
                if ts.at_op("*"):
                    ts.advance()
                    locs.append("*")
                else:
                    locs.append(ts.expect_ident("location name"))
                if not ts.at_op(","):
                    break
                ts.advance()
            ts.expect_op(":")
            e = parse_from(ts)
            ts.expect_op(";")
            cases = sec.fns.setdefault(name, [])
            for l in locs:
                if any(l == c for c, _ in cases):
                    raise PctSyntaxError(pos, {"new location"}, f"{name} defined twice at {l}", ts.text)
                cases.append((l, e))
            sec.keys.append((name, pos))
            continue
        if ts.at_word("table"):
            ts.advance()
            name = ts.expect_ident("table name")
            approx = False
            if ts.at_word("approx"):
                ts.advance()
                approx = True
            ts.expect_op("{")
            rows: dict[State, object] = {}
            default = None
            while not ts.at_op("}"):
                rpos = ts.tok.pos
                if ts.at_word("default"):
                    ts.advance()
                    ts.expect_op("=")
                    if ts.at_word("error"):
                        ts.advance()
                        default = None
                    else:
                        v = _const_expr(ts)
                        default = float(v) if approx else v
                else:
                    key = _state_key(ts)
                    ts.expect_op("=")
                    v = _const_expr(ts)
                    if key in rows:
                        raise PctSyntaxError(rpos, {"new key"}, f"duplicate table key {key}", ts.text)
                    rows[key] = float(v) if approx else v
                ts.expect_op(";")
            ts.expect_op("}")
            sec.tables[name] = Table(name, tuple(rows.items()), default, approx)
            sec.keys.append((name, pos))
            continue
        if ts.at_word("entry"):
            ts.advance()
            n = _const_expr(ts)
            if Fraction(n).denominator != 1 or n < 1:
                raise RangeError("entry", n, "family index must be a positive integer")
            ts.expect_op("{")
            sub = _parse_section(ts, True)
            ts.expect_op("}")
            sec.entries.append((int(n), sub, pos))
            sec.keys.append(("entry", pos))
            continue
        if ts.at_word("anchor") and ts.peek().kind == "op" and ts.peek().text == "(":
            ts.advance()
            a = _state_key(ts)
            ts.expect_op("{")
            sub = _parse_section(ts, True)
            ts.expect_op("}")
            sec.anchor_blocks.append((a, sub, pos))
            sec.keys.append(("anchor", pos))
            continue
        key = ts.expect_ident("key")
        ts.expect_op(":")
        if key in sec.scalars or key in sec.exprs or (key == "grid" and sec.grid is not None) \
                or (key == "anchors" and sec.anchors != "unset"):
            raise PctSyntaxError(pos, {"new key"}, f"duplicate key {key!r}", ts.text)
        if key == "rule":
            sec.scalars["rule"] = ts.expect_ident("rule name")
        elif key in _EXPR_KEYS:
            sec.exprs[key] = parse_from(ts)
        elif key == "witness":
            parts = [_const_expr(ts)]
            while ts.at_op(","):
                ts.advance()
                parts.append(_const_expr(ts))
            if len(parts) != 3:
                raise PctSyntaxError(pos, {"r, H, eps"}, "witness needs three values", ts.text)
            sec.witnesses.append(Witness(*parts))
        elif key == "grid":
            vals = [_const_expr(ts)]
            while ts.at_op(","):
                ts.advance()
                vals.append(_const_expr(ts))
            sec.grid = tuple(vals)
        elif key == "anchors":
            if ts.at_word("all"):
                ts.advance()
                sec.anchors = None
            else:
                lst = [_state_key(ts)]
                while ts.at_op(","):
                    ts.advance()
                    lst.append(_state_key(ts))
                sec.anchors = tuple(lst)
        elif key in ("eps", "H"):
            # Rule-7 certificates may give these as expressions over sigma.*
            e = parse_from(ts)
            try:
                sec.scalars[key] = normalize(Fraction(to_number(compiled(e, EXACT)({}))))
            except (EvalError, ZeroDivisionError):
                sec.exprs[key] = e
        elif key in _CONST_KEYS:
            sec.scalars[key] = _const_expr(ts)
        else:
            raise PctSyntaxError(pos, {"known key"}, f"unknown key {key!r}", ts.text)
        sec.keys.append((key, pos))
        ts.expect_op(";")


_ALLOWED = {
    "variant": {"invariant", "U", "lo", "hi", "eps"},
    "martingale": {"invariant", "V", "U", "witness"},
    "smvariant": {"invariant", "V", "p_fn", "d_fn", "grid"},
    "upper": {"invariant", "SI", "p"},
    "silower": {"invariant", "SI", "U", "p", "eps", "H"},
    "lowerfamily": {"p", "entry"},
    "siast": {"invariant", "SI", "U", "p", "eps", "H", "anchors", "anchor"},
}
_ENTRY_ALLOWED = {"invariant", "SI", "U", "p", "eps", "H", "depth"}
_ANCHOR_ALLOWED = {"SI", "U", "eps", "H"}


def _check_keys(rule: str, sec: _Section, allowed: set[str]) -> None:
    for k, _pos in sec.keys:
        if k == "rule":
            continue
        if k not in allowed:
            raise RuleMismatch(rule, f"key or function {k!r} does not belong to this rule")


def _require(rule: str, **fields):
    missing = [k for k, v in fields.items() if v is None]
    if missing:
        raise RuleMismatch(rule, f"missing {', '.join(missing)}")


def _check_p(p, open_upper: bool = True, field_name: str = "p"):
    if not (0 < p < 1):
        raise RangeError(field_name, p, "must lie in (0, 1)")


def _check_eps(eps, field_name: str = "eps"):
    if eps <= 0:
        raise RangeError(field_name, eps, "must be > 0")


def _natural(v, field_name: str):
    if Fraction(v).denominator != 1 or v < 0:
        raise RangeError(field_name, v, "must be a natural number")
    return int(v)


def _silower(rule: str, sec: _Section) -> SILowerCert:
    si_fn, u_fn = sec.fn("SI"), sec.fn("U")
    p, eps, h = sec.scalars.get("p"), sec.scalars.get("eps"), sec.scalars.get("H")
    _require(rule, SI=si_fn, U=u_fn, p=p, eps=eps, H=h)
    _check_p(p)
    _check_eps(eps)
    si = SICert(sec.exprs.get("invariant", TRUE), si_fn, p)
    return SILowerCert(si, u_fn, eps, _natural(h, "H"))


def parse_certificate(text: str) -> Certificate:
    """Parse a ``.cert`` document into the record for its declared rule."""
    ts = TokenStream(text)
    sec = _parse_section(ts, False)
    rule = sec.scalars.get("rule")
    if rule is None:
        raise PctSyntaxError(0, {"'rule:'"}, "certificate must declare its rule", text)
    if rule not in RULES:
        raise RuleMismatch(rule, f"unknown rule; expected one of {', '.join(RULES)}")
    _check_keys(rule, sec, _ALLOWED[rule])
    inv = sec.exprs.get("invariant", TRUE)
    if "eps" in sec.exprs and rule != "siast":
        raise RuleMismatch(rule, "eps must be a constant")
    if "H" in sec.exprs and rule != "siast":
        raise RuleMismatch(rule, "H must be a constant")

    if rule == "variant":
        u, lo, hi, eps = sec.fn("U"), sec.scalars.get("lo"), sec.scalars.get("hi"), sec.scalars.get("eps")
        _require(rule, U=u, lo=lo, hi=hi, eps=eps)
        if lo >= hi:
            raise RangeError("lo", lo, f"must be below hi = {hi}")
        _check_eps(eps)
        if eps > 1:
            raise RangeError("eps", eps, "must lie in (0, 1]")
        return VariantCert(inv, u, lo, hi, eps)

    if rule == "martingale":
        v, u = sec.fn("V"), sec.fn("U")
        _require(rule, V=v, U=u)
        if not sec.witnesses:
            raise RuleMismatch(rule, "at least one witness: r, H, eps; line is required")
        prev = None
        for w in sec.witnesses:
            _check_eps(w.eps, "witness eps")
            _natural(w.H, "witness H")
            if prev is not None and not w.r > prev:
                raise RangeError("witness r", w.r, "witnesses must be sorted by strictly increasing r")
            prev = w.r
        return MartingaleCert(inv, v, u, tuple(sec.witnesses))

    if rule == "smvariant":
        v, pf, df, grid = sec.fn("V"), sec.exprs.get("p_fn"), sec.exprs.get("d_fn"), sec.grid
        _require(rule, V=v, p_fn=pf, d_fn=df, grid=grid)
        for name, e in (("p_fn", pf), ("d_fn", df)):
            bad = free_vars(e) - {"v"}
            if bad:
                raise UnknownIdentifier(sorted(bad)[0])
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise RangeError("grid", grid, "must be strictly increasing")
        return SMVariantCert(inv, v, pf, df, grid)

    if rule == "upper":
        si, p = sec.fn("SI"), sec.scalars.get("p")
        _require(rule, SI=si, p=p)
        _check_p(p)
        return SICert(inv, si, p)

    if rule == "silower":
        return _silower(rule, sec)

    if rule == "lowerfamily":
        p = sec.scalars.get("p")
        _require(rule, p=p)
        if not (0 <= p < 1):
            raise RangeError("p", p, "must lie in [0, 1)")
        if not sec.entries:
            raise RuleMismatch(rule, "at least one entry block is required")
        seen: set[int] = set()
        entries = []
        for n, sub, _pos in sec.entries:
            if n in seen:
                raise RangeError("entry", n, "duplicate family index")
            seen.add(n)
            _check_keys(rule, sub, _ENTRY_ALLOWED)
            c = _silower(rule, sub)
            depth = sub.scalars.get("depth")
            entries.append(FamilyEntry(n, c, None if depth is None else _natural(depth, "depth")))
        return LowerFamilyCert(p, tuple(entries))

    # siast
    p = sec.scalars.get("p")
    _require(rule, p=p)
    _check_p(p)
    if sec.anchors == "unset":
        raise RuleMismatch(rule, "anchors: must list anchor states or say all")
    eps = _expr_or_const(sec, "eps")
    h = _expr_or_const(sec, "H")
    overrides = []
    for a, sub, _pos in sec.anchor_blocks:
        _check_keys(rule, sub, _ANCHOR_ALLOWED)
        overrides.append((a, AnchorData(sub.fn("SI"), sub.fn("U"), _expr_or_const(sub, "eps"),
                                        _expr_or_const(sub, "H"))))
    for name, val in (("eps", eps), ("H", h)):
        if val is not None and not free_vars(val):
            c = to_number(compiled(val, EXACT)({}))
            if name == "eps":
                _check_eps(c)
            else:
                _natural(c, "H")
    return SIAstCert(inv, p, sec.anchors, sec.fn("SI"), sec.fn("U"), eps, h, tuple(overrides))


def _expr_or_const(sec: _Section, key: str) -> Expr | None:
    if key in sec.exprs:
        return sec.exprs[key]
    if key in sec.scalars:
        return Const(Fraction(sec.scalars[key]))
    return None


def load_certificate(path) -> Certificate:
    with open(path, encoding="utf-8") as fh:
        return parse_certificate(fh.read())


# ---------------------------------------------------------------------------
# serialisation


def _fmt_num(v) -> str:
    if isinstance(v, float):
        return repr(v)
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _fmt_state(s: State) -> str:
    return "(" + ", ".join([s.loc, *(_fmt_num(v) for v in s.vals)]) + ")"


def format_value_function(f: ValueFunction, indent: str = "") -> list[str]:
    if isinstance(f, ClosedForm):
        return [f"{indent}fn {f.name} at {l}: {pretty(e)};" for l, e in f.cases]
    head = f"{indent}table {f.name}{' approx' if f.approx else ''} {{"
    lines = [head]
    for s, v in f.entries:
        lines.append(f"{indent}  {_fmt_state(s)} = {_fmt_num(v)};")
    lines.append(f"{indent}  default = {'error' if f.default is None else _fmt_num(f.default)};")
    lines.append(f"{indent}}}")
    return lines


def _inv_line(inv: Expr, indent: str = "") -> list[str]:
    return [] if inv == TRUE else [f"{indent}invariant: {pretty(inv)};"]


def _silower_lines(c: SILowerCert, indent: str, with_rule: bool) -> list[str]:
    lines = [f"{indent}rule: silower;"] if with_rule else []
    lines += _inv_line(c.si.inv, indent)
    lines += [f"{indent}p: {_fmt_num(c.si.p)};", f"{indent}eps: {_fmt_num(c.eps)};", f"{indent}H: {_fmt_num(c.H)};"]
    lines += format_value_function(c.si.SI, indent)
    lines += format_value_function(c.U, indent)
    return lines


def format_certificate(c: Certificate) -> str:
    """Render ``c`` in the ``.cert`` format; parse_certificate inverts it."""
    if isinstance(c, VariantCert):
        lines = ["rule: variant;", *_inv_line(c.inv), f"lo: {_fmt_num(c.lo)};", f"hi: {_fmt_num(c.hi)};",
                 f"eps: {_fmt_num(c.eps)};", *format_value_function(c.U)]
    elif isinstance(c, MartingaleCert):
        lines = ["rule: martingale;", *_inv_line(c.inv)]
        lines += [f"witness: {_fmt_num(w.r)}, {_fmt_num(w.H)}, {_fmt_num(w.eps)};" for w in c.witnesses]
        lines += format_value_function(c.V) + format_value_function(c.U)
    elif isinstance(c, SMVariantCert):
        lines = ["rule: smvariant;", *_inv_line(c.inv), f"p_fn: {pretty(c.p_fn)};", f"d_fn: {pretty(c.d_fn)};",
                 f"grid: {', '.join(_fmt_num(g) for g in c.grid)};", *format_value_function(c.V)]
    elif isinstance(c, SILowerCert):
        lines = _silower_lines(c, "", True)
    elif isinstance(c, SICert):
        lines = ["rule: upper;", *_inv_line(c.inv), f"p: {_fmt_num(c.p)};", *format_value_function(c.SI)]
    elif isinstance(c, LowerFamilyCert):
        lines = ["rule: lowerfamily;", f"p: {_fmt_num(c.p)};"]
        for ent in c.entries:
            lines.append(f"entry {ent.n} {{")
            if ent.depth is not None:
                lines.append(f"  depth: {ent.depth};")
            lines += _silower_lines(ent.cert, "  ", False)
            lines.append("}")
    elif isinstance(c, SIAstCert):
        lines = ["rule: siast;", *_inv_line(c.inv), f"p: {_fmt_num(c.p)};"]
        if c.anchors is None:
            lines.append("anchors: all;")
        else:
            lines.append("anchors: " + ", ".join(_fmt_state(a) for a in c.anchors) + ";")
        if c.eps is not None:
            lines.append(f"eps: {pretty(c.eps)};")
        if c.H is not None:
            lines.append(f"H: {pretty(c.H)};")
        for f in (c.SI, c.U):
            if f is not None:
                lines += format_value_function(f)
        for a, d in c.overrides:
            lines.append(f"anchor {_fmt_state(a)} {{")
            if d.eps is not None:
                lines.append(f"  eps: {pretty(d.eps)};")
            if d.H is not None:
                lines.append(f"  H: {pretty(d.H)};")
            for f in (d.SI, d.U):
                if f is not None:
                    lines += format_value_function(f, "  ")
            lines.append("}")
    else:
        raise TypeError(f"not a certificate: {c!r}")
    return "\n".join(lines) + "\n"


def with_invariant(c: Certificate, inv: Expr) -> Certificate:
    return replace(c, inv=inv)


def table_from_values(name: str, states, values, approx: bool | None = None, default=None) -> Table:
    """Build a table from parallel state/value sequences."""
    vals = list(values)
    if approx is None:
        approx = any(isinstance(v, float) for v in vals)
    conv = (lambda v: float(v)) if approx else (lambda v: normalize(Fraction(v)))
    return Table(name, tuple((s, conv(v)) for s, v in zip(states, vals)), default, approx)


def mapping_table(name: str, mapping: Mapping[State, object], approx: bool = False, default=None) -> Table:
    return table_from_values(name, mapping.keys(), mapping.values(), approx, default)
