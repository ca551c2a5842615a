"""Probabilistic control-flow graphs: model, text format and validation.

Program text looks like::

    vars x;
    init loop (x=1);
    terminal lend;

    loc loop : prob {
      edge -> inc  guard: x != 0  prob: 1/2;
      edge -> dec  guard: x != 0  prob: 1/2;
      edge -> lend guard: x == 0  prob: 1;
    }
    loc inc : assign { edge -> loop set x := x + 1; }
    loc dec : assign { edge -> loop set x := x - 1; }

An assignment edge without ``set`` leaves the valuation unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, NamedTuple

from .errors import (
    AssignmentFanout,
    DivisionByZero,
    DuplicateLocation,
    DuplicateTerminal,
    EvalError,
    PctSyntaxError,
    ProgramError,
    UnknownIdentifier,
    UnknownTargetLocation,
)
from .expr import (
    EXACT,
    KEYWORDS,
    TRUE,
    Expr,
    FUNCTIONS,
    TokenStream,
    compiled,
    evaluate,
    format_number,
    normalize,
    parse_from,
    pretty,
    to_number,
    uses_locations,
    uses_variable_power,
)


class Kind(str, Enum):
    ASSIGN = "assign"
    NONDET = "nondet"
    PROB = "prob"
    TERMINAL = "terminal"


_KIND_ALIASES = {
    "assign": Kind.ASSIGN, "assignment": Kind.ASSIGN,
    "nondet": Kind.NONDET, "nondeterministic": Kind.NONDET,
    "prob": Kind.PROB, "probabilistic": Kind.PROB,
    "terminal": Kind.TERMINAL,
}


class State(NamedTuple):
    """A program state: location name plus the valuation in variable order."""

    loc: str
    vals: tuple

    def __str__(self) -> str:
        inner = ", ".join(format_number(v) for v in self.vals)
        return f"({self.loc}{', ' if inner else ''}{inner})"


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    guard: Expr = TRUE
    prob: Expr | None = None
    update: tuple[int, Expr] | None = None  # (variable index, expression); None is identity


@dataclass(frozen=True)
class Location:
    name: str
    kind: Kind


@dataclass(frozen=True)
class Successor:
    state: State
    kind: Kind
    prob: Fraction | int | None
    edge: int  # index into the source location's edge list


@dataclass(frozen=True)
class ProgramGraph:
    """The tuple (locations, variables, initial state, transitions, terminal location).

    ``allow_fanout`` relaxes the one-edge rule for assignment locations; it is
    set by program transforms that add guarded self-loops, in which case the
    at-most-one-enabled-edge property is checked dynamically instead.
    """

    locations: tuple[Location, ...]
    variables: tuple[str, ...]
    init_location: str
    init_valuation: tuple
    transitions: tuple[Transition, ...]
    terminal_location: str
    allow_fanout: bool = False
    _kind: dict = field(init=False, repr=False, compare=False)
    _out: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        kinds = {}
        for l in self.locations:
            if l.name in kinds:
                raise DuplicateLocation(l.name)
            kinds[l.name] = l.kind
        out: dict[str, list[Transition]] = {l.name: [] for l in self.locations}
        for t in self.transitions:
            if t.source not in kinds:
                raise ProgramError(f"transition from unknown location {t.source!r}")
            if t.target not in kinds:
                raise UnknownTargetLocation(t.source, t.target)
            out[t.source].append(t)
        if self.terminal_location not in kinds or kinds[self.terminal_location] != Kind.TERMINAL:
            raise ProgramError(f"terminal location {self.terminal_location!r} must be declared with kind terminal")
        for name, k in kinds.items():
            if k == Kind.TERMINAL and name != self.terminal_location:
                raise DuplicateTerminal(name, self.terminal_location)
            if k == Kind.TERMINAL and out[name]:
                raise ProgramError(f"terminal location {name!r} cannot have outgoing edges")
            if k == Kind.ASSIGN and len(out[name]) > 1 and not self.allow_fanout:
                raise AssignmentFanout(name, len(out[name]))
        if self.init_location not in kinds:
            raise ProgramError(f"unknown initial location {self.init_location!r}")
        if len(self.init_valuation) != len(self.variables):
            raise ProgramError("initial valuation must bind every variable")
        object.__setattr__(self, "_kind", kinds)
        object.__setattr__(self, "_out", {k: tuple(v) for k, v in out.items()})
        object.__setattr__(self, "init_valuation", tuple(normalize(Fraction(v)) for v in self.init_valuation))

    # -- accessors --------------------------------------------------------

    def kind(self, loc: str) -> Kind:
        return self._kind[loc]

    def edges(self, loc: str) -> tuple[Transition, ...]:
        return self._out[loc]

    @property
    def location_names(self) -> list[str]:
        return [l.name for l in self.locations]

    @property
    def init_state(self) -> State:
        return State(self.init_location, self.init_valuation)

    @property
    def terminal_state(self) -> State:
        return State(self.terminal_location, (0,) * len(self.variables))

    def is_terminal(self, s: State) -> bool:
        return s.loc == self.terminal_location and not any(s.vals)

    def env(self, s: State) -> dict:
        return dict(zip(self.variables, s.vals))

    def describe(self, s: State) -> str:
        inner = ", ".join(f"{n}={format_number(v)}" for n, v in zip(self.variables, s.vals))
        return f"({s.loc}{', ' if inner else ''}{inner})"

    def has_nondeterminism(self) -> bool:
        return any(l.kind == Kind.NONDET for l in self.locations)

    def successors(self, s: State) -> list[Successor]:
        return successors(self, s)


def successors(g: ProgramGraph, s: State) -> list[Successor]:
    """Successors of ``s`` under enabled edges, in declaration order.

    Probabilistic successors carry their exact probability; the terminal
    location has no successors.
    """
    kind = g._kind[s.loc]
    if kind == Kind.TERMINAL:
        return []
    env = dict(zip(g.variables, s.vals))
    out: list[Successor] = []
    for i, t in enumerate(g._out[s.loc]):
        if t.guard is not TRUE and not compiled(t.guard, EXACT)(env):
            continue
        if kind == Kind.PROB:
            p = normalize(to_number(_exact(t.prob, env)))
            out.append(Successor(State(t.target, s.vals), kind, p, i))
        elif kind == Kind.ASSIGN:
            if t.update is None:
                vals = s.vals
            else:
                j, e = t.update
                v = normalize(to_number(_exact(e, env)))
                vals = s.vals[:j] + (v,) + s.vals[j + 1:]
            out.append(Successor(State(t.target, vals), kind, None, i))
        else:
            out.append(Successor(State(t.target, s.vals), kind, None, i))
    if kind == Kind.ASSIGN and len(out) > 1:
        raise AssignmentFanout(s.loc, len(out))
    return out


def _exact(e: Expr, env):
    try:
        return compiled(e, EXACT)(env)
    except ZeroDivisionError:
        raise DivisionByZero(pretty(e)) from None


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # ProbabilityMassNotOne, NonPositiveProbability, NoSuccessor, AssignmentFanout, EvalError, NonCoreExponentiation
    state: State | None
    detail: str
    value: object = None
    severity: str = "error"

    def __str__(self) -> str:
        where = f" at {self.state}" if self.state is not None else ""
        return f"{self.severity}: {self.kind}{where}: {self.detail}"


def validate_program(g: ProgramGraph, probe, include_notes: bool = False) -> list[Diagnostic]:
    """Dynamic well-formedness checks on the states of ``probe``.

    Returns an empty list iff every probabilistic state has positive edge
    probabilities summing exactly to 1 and every non-terminal state has a
    successor.  With ``include_notes`` the list also carries informational
    notes (such as uses of variable exponentiation).
    """
    states = probe.states if hasattr(probe, "states") else list(probe)
    diags: list[Diagnostic] = []
    for s in states:
        if g.is_terminal(s):
            continue
        try:
            succ = successors(g, s)
        except AssignmentFanout as exc:
            diags.append(Diagnostic("AssignmentFanout", s, str(exc)))
            continue
        except EvalError as exc:
            diags.append(Diagnostic("EvalError", s, str(exc)))
            continue
        if not succ:
            diags.append(Diagnostic("NoSuccessor", s, "no enabled transition"))
            continue
        if g.kind(s.loc) == Kind.PROB:
            mass = 0
            for sc in succ:
                if sc.prob <= 0 or sc.prob > 1:
                    diags.append(Diagnostic("NonPositiveProbability", s,
                                            f"edge to {sc.state.loc} has probability {sc.prob}", sc.prob))
                mass += sc.prob
            if mass != 1:
                diags.append(Diagnostic("ProbabilityMassNotOne", s, f"enabled mass is {mass}", mass))
    if include_notes:
        for t in g.transitions:
            exprs = [t.guard, t.prob] + ([t.update[1]] if t.update else [])
            if any(e is not None and uses_variable_power(e) for e in exprs):
                diags.append(Diagnostic("NonCoreExponentiation", None,
                                        f"edge {t.source} -> {t.target} uses exponentiation with a variable exponent",
                                        severity="note"))
    return diags


# ---------------------------------------------------------------------------
# text format

_RESERVED = KEYWORDS | set(FUNCTIONS) | {"loc", "terminal", "sigma"}


def _valuation(ts: TokenStream, variables: tuple[str, ...], what: str) -> tuple:
    ts.expect_op("(")
    vals: dict[str, object] = {}
    while not ts.at_op(")"):
        pos = ts.tok.pos
        name = ts.expect_ident("variable name")
        if name not in variables:
            raise UnknownIdentifier(name)
        if name in vals:
            raise PctSyntaxError(pos, {"new variable"}, f"{name} bound twice in {what}", ts.text)
        ts.expect_op("=")
        e = parse_from(ts, variables=())
        vals[name] = to_number(evaluate(e, {}, EXACT))
        if not ts.at_op(","):
            break
        ts.advance()
    ts.expect_op(")")
    missing = [v for v in variables if v not in vals]
    if missing:
        raise PctSyntaxError(ts.tok.pos, {", ".join(missing)}, f"{what} does not bind {', '.join(missing)}", ts.text)
    return tuple(vals[v] for v in variables)


def parse_program(text: str) -> ProgramGraph:
    """Parse the ``.pct`` program format."""
    ts = TokenStream(text)
    variables: tuple[str, ...] | None = None
    init: tuple[str, tuple] | None = None
    terminal: str | None = None
    locations: list[Location] = []
    seen: set[str] = set()
    pending: list[tuple[Transition, int]] = []
    fanout = False

    while ts.tok.kind != "eof":
        if ts.at_word("vars"):
            if variables is not None:
                raise ts.error({"'init'", "'terminal'", "'loc'"}, "duplicate vars declaration")
            ts.advance()
            names: list[str] = []
            while ts.tok.kind == "ident":
                pos = ts.tok.pos
                n = ts.expect_ident("variable name")
                if n in _RESERVED or n in names:
                    raise PctSyntaxError(pos, {"variable name"}, f"bad or duplicate variable name {n!r}", text)
                names.append(n)
                if not ts.at_op(","):
                    break
                ts.advance()
            ts.expect_op(";")
            variables = tuple(names)
        elif ts.at_word("init"):
            if variables is None:
                raise ts.error({"'vars'"}, "vars must be declared before init")
            ts.advance()
            loc = ts.expect_ident("location name")
            vals = _valuation(ts, variables, "init")
            ts.expect_op(";")
            init = (loc, vals)
        elif ts.at_word("terminal"):
            ts.advance()
            name = ts.expect_ident("location name")
            if terminal is not None:
                raise DuplicateTerminal(name, terminal)
            ts.expect_op(";")
            terminal = name
        elif ts.at_word("pragma"):
            ts.advance()
            ppos = ts.tok.pos
            word = ts.expect_ident("pragma name")
            if word != "dynamic_fanout":
                raise PctSyntaxError(ppos, {"'dynamic_fanout'"}, f"unknown pragma {word!r}", text)
            ts.expect_op(";")
            fanout = True
        elif ts.at_word("loc"):
            if variables is None:
                raise ts.error({"'vars'"}, "vars must be declared before locations")
            ts.advance()
            name = ts.expect_ident("location name")
            if name in seen:
                raise DuplicateLocation(name)
            seen.add(name)
            ts.expect_op(":")
            kpos = ts.tok.pos
            kname = ts.expect_ident("location kind")
            if kname not in _KIND_ALIASES:
                raise PctSyntaxError(kpos, set(_KIND_ALIASES), f"unknown location kind {kname!r}", text)
            kind = _KIND_ALIASES[kname]
            if kind == Kind.TERMINAL:
                if terminal is not None and terminal != name:
                    raise DuplicateTerminal(name, terminal)
                terminal = name
            locations.append(Location(name, kind))
            ts.expect_op("{")
            while not ts.at_op("}"):
                epos = ts.tok.pos
                pending.append((_edge(ts, name, kind, variables), epos))
            ts.expect_op("}")
        else:
            raise ts.error({"'vars'", "'init'", "'terminal'", "'loc'"})

    if variables is None or init is None or terminal is None:
        missing = [w for w, v in (("vars", variables), ("init", init), ("terminal", terminal)) if v is None]
        raise PctSyntaxError(len(text), {f"'{m}'" for m in missing}, "incomplete program", text)
    if terminal not in seen:
        locations.append(Location(terminal, Kind.TERMINAL))
        seen.add(terminal)
    for t, _pos in pending:
        if t.target not in seen:
            raise UnknownTargetLocation(t.source, t.target)
    if init[0] not in seen:
        raise UnknownIdentifier(init[0])
    return ProgramGraph(
        locations=tuple(locations),
        variables=variables,
        init_location=init[0],
        init_valuation=init[1],
        transitions=tuple(t for t, _ in pending),
        terminal_location=terminal,
        allow_fanout=fanout,
    )


def _edge(ts: TokenStream, source: str, kind: Kind, variables: tuple[str, ...]) -> Transition:
    ts.expect_word("edge")
    ts.expect_op("->")
    target = ts.expect_ident("location name")
    guard: Expr = TRUE
    prob = None
    update = None
    seen: set[str] = set()
    while not ts.at_op(";"):
        pos = ts.tok.pos
        if ts.at_word("guard", "prob") and ts.peek().kind == "op" and ts.peek().text == ":":
            word = ts.advance().text
            ts.advance()
        elif ts.at_word("set"):
            word = ts.advance().text
        else:
            raise ts.error({"'guard:'", "'prob:'", "'set'", "';'"})
        if word in seen:
            raise PctSyntaxError(pos, {"';'"}, f"duplicate {word} clause", ts.text)
        seen.add(word)
        if word == "guard":
            guard = _program_expr(ts, variables)
        elif word == "prob":
            if kind != Kind.PROB:
                raise PctSyntaxError(pos, {"';'"}, "prob clause only allowed at prob locations", ts.text)
            prob = _program_expr(ts, variables)
        else:
            if kind != Kind.ASSIGN:
                raise PctSyntaxError(pos, {"';'"}, "set clause only allowed at assign locations", ts.text)
            var = ts.expect_ident("variable name")
            if var not in variables:
                raise UnknownIdentifier(var)
            ts.expect_op(":=")
            update = (variables.index(var), _program_expr(ts, variables))
    if kind == Kind.PROB and prob is None:
        raise ts.error({"'prob:'"}, f"edge {source} -> {target} needs a probability")
    ts.expect_op(";")
    return Transition(source, target, guard, prob, update)


def _program_expr(ts: TokenStream, variables) -> Expr:
    pos = ts.tok.pos
    e = parse_from(ts, variables=variables)
    if uses_locations(e):
        raise PctSyntaxError(pos, {"expression over program variables"},
                             "location references are not allowed in programs", ts.text)
    return e


def format_program(g: ProgramGraph) -> str:
    """Render ``g`` in the ``.pct`` format (parse_program inverts this)."""
    lines = [f"vars {', '.join(g.variables)};"]
    init = ", ".join(f"{n}={_fmt(v)}" for n, v in zip(g.variables, g.init_valuation))
    lines.append(f"init {g.init_location} ({init});")
    lines.append(f"terminal {g.terminal_location};")
    for l in g.locations:
        lines.append("")
        lines.append(f"loc {l.name} : {l.kind.value} {{")
        for t in g.edges(l.name):
            parts = [f"  edge -> {t.target}"]
            if t.guard != TRUE:
                parts.append(f"guard: {pretty(t.guard)}")
            if t.prob is not None:
                parts.append(f"prob: {pretty(t.prob)}")
            if t.update is not None:
                parts.append(f"set {g.variables[t.update[0]]} := {pretty(t.update[1])}")
            lines.append(" ".join(parts) + ";")
        lines.append("}")
    if g.allow_fanout:
        lines.insert(0, "pragma dynamic_fanout;")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def load_program(path) -> ProgramGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())
