"""Checkers for the seven proof rules.

Every checker walks the interior states of a region that satisfy the
certificate's invariant and tests each side condition of its rule there.
Frontier states are never used as sources; they are listed as caveats.

Comparisons are exact when both sides are exact rationals.  Otherwise they
use binary64 with tolerance ``tol``: a strict inequality passes only with a
margin above ``tol`` (a margin in ``(0, tol]`` is a margin warning), a
non-strict one passes with a margin of at least ``-tol``.  Margin warnings
count as violations.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .certificates import (
    Certificate,
    LowerFamilyCert,
    MartingaleCert,
    SIAstCert,
    SICert,
    SILowerCert,
    SMVariantCert,
    ValueFunction,
    VariantCert,
    cert_eval,
    check_certificate_names,
    is_integral,
    state_env,
)
from .cfg import Kind, ProgramGraph, State
from .errors import PctError
from .expr import APPROX, EXACT, Expr, compiled, format_number, is_transcendental, normalize, to_number
from .semantics import Region, enumerate_region

DEFAULT_TAU = 1e-9

VERIFIED_COMPLETE = "VerifiedComplete"
VERIFIED_ON_REGION = "VerifiedOnRegion"
REFUTED = "Refuted"

EXIT_CODES = {VERIFIED_COMPLETE: 0, REFUTED: 1, VERIFIED_ON_REGION: 2}


def _f(v) -> float:
    """float(v), saturating huge exact values to +-inf."""
    try:
        return float(v)
    except OverflowError:
        return math.inf if v > 0 else -math.inf


def _fmt(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    return format_number(v)


@dataclass
class Violation:
    condition: str
    state_index: int | None
    state: str | None
    values: dict
    margin: object = None
    kind: str = "violation"  # or "margin-warning"

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "kind": self.kind,
            "state_index": self.state_index,
            "state": self.state,
            "values": {k: _fmt(v) for k, v in self.values.items()},
            "margin": None if self.margin is None else _fmt(self.margin),
        }

    def __str__(self) -> str:
        where = f" at #{self.state_index} {self.state}" if self.state is not None else ""
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.values.items())
        m = "" if self.margin is None else f" margin={_fmt(self.margin)}"
        return f"[{self.kind}] {self.condition}{where}: {vals}{m}"


@dataclass
class Verdict:
    status: str
    conclusion: str
    violations: list[Violation]
    frontier: list[str]
    stats: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    @property
    def verified(self) -> bool:
        return self.status != REFUTED

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "conclusion": self.conclusion,
            "violations": [v.to_dict() for v in self.violations],
            "frontier": list(self.frontier),
            "stats": _jsonable(self.stats),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def report(self, max_items: int = 25) -> str:
        st = self.stats
        lines = [
            f"rule: {st.get('rule', '?')}",
            f"status: {self.status}",
            f"conclusion: {self.conclusion}",
            f"states checked: {st.get('states_checked', 0)} (region {st.get('region_states', 0)}, "
            f"frontier {len(self.frontier)})",
            f"min margin: {_fmt(st.get('min_margin'))}",
            f"violations: {len(self.violations)}",
        ]
        for v in self.violations[:max_items]:
            lines.append(f"  {v}")
        if len(self.violations) > max_items:
            lines.append(f"  ... {len(self.violations) - max_items} more")
        for c in st.get("caveats", []):
            lines.append(f"caveat: {c}")
        for n in st.get("notes", []):
            lines.append(f"note: {n}")
        if self.frontier:
            shown = ", ".join(self.frontier[:5])
            more = f" ... ({len(self.frontier)} total)" if len(self.frontier) > 5 else ""
            lines.append(f"frontier: {shown}{more}")
        return "\n".join(lines) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (Fraction,)):
        return _fmt(x)
    if isinstance(x, float):
        return x if math.isfinite(x) else _fmt(x)
    return x


# ---------------------------------------------------------------------------
# shared machinery


class _Fn:
    """Memoised evaluation of one value function over region indices."""

    def __init__(self, ctx: "_Ctx", f: ValueFunction, anchor: State | None = None):
        self.ctx = ctx
        self.f = f
        self.anchor = anchor
        self.exact = f.exact
        self.mode = EXACT if self.exact else APPROX
        self.cache: dict[int, object] = {}
        self.name = f.name

    def __call__(self, i: int):
        v = self.cache.get(i)
        if v is None:
            s = self.ctx.region.states[i]
            env = self.ctx.env(i) if self.anchor is None else state_env(self.ctx.g, s, self.anchor)
            v = cert_eval(self.f, self.ctx.g, s, self.anchor, self.mode, env=env)
            self.cache[i] = v
        return v


class _Ctx:
    def __init__(self, g: ProgramGraph, region: Region, rule: str, tol: float):
        self.g = g
        self.region = region
        self.rule = rule
        self.tol = tol
        self.violations: list[Violation] = []
        self.min_margin = None
        self.min_by_cond: dict[str, float] = {}
        self.caveats: list[str] = []
        self.notes: list[str] = []
        self.checked = 0
        self._envs: dict[int, dict] = {}

    def env(self, i: int) -> dict:
        e = self._envs.get(i)
        if e is None:
            e = state_env(self.g, self.region.states[i])
            self._envs[i] = e
        return e

    def describe(self, i: int | None) -> str | None:
        return None if i is None else self.region.describe(i)

    def fail(self, cond: str, i: int | None, values: dict, margin=None, kind: str = "violation"):
        self.violations.append(Violation(cond, i, self.describe(i), values, margin, kind))

    def _track(self, cond: str, margin):
        m = _f(margin)
        base = cond.split("[")[0]
        if self.min_margin is None or m < self.min_margin:
            self.min_margin = m
        if base not in self.min_by_cond or m < self.min_by_cond[base]:
            self.min_by_cond[base] = m

    def geq(self, cond: str, i: int | None, lhs, rhs, strict: bool = False, values: dict | None = None) -> bool:
        """Require ``lhs > rhs`` (strict) or ``lhs >= rhs``."""
        values = values if values is not None else {"lhs": lhs, "rhs": rhs}
        exact = not isinstance(lhs, float) and not isinstance(rhs, float)
        if exact:
            margin = normalize(Fraction(lhs) - Fraction(rhs))
            self._track(cond, margin)
            ok = margin > 0 if strict else margin >= 0
            if not ok:
                self.fail(cond, i, values, margin)
            return ok
        margin = _f(lhs) - _f(rhs)
        if math.isnan(margin):
            self.fail(cond, i, values, margin)
            return False
        self._track(cond, margin)
        if strict:
            if margin > self.tol:
                return True
            self.fail(cond, i, values, margin, "margin-warning" if margin > 0 else "violation")
            return False
        if margin >= -self.tol:
            return True
        self.fail(cond, i, values, margin)
        return False

    def eq(self, cond: str, i: int | None, lhs, rhs, values: dict | None = None) -> bool:
        values = values if values is not None else {"lhs": lhs, "rhs": rhs}
        exact = not isinstance(lhs, float) and not isinstance(rhs, float)
        diff = (Fraction(lhs) - Fraction(rhs)) if exact else _f(lhs) - _f(rhs)
        ok = diff == 0 if exact else abs(diff) <= self.tol
        if not ok:
            self.fail(cond, i, values, normalize(diff) if exact else diff)
        return ok

    def ge_tol(self, a, b) -> bool:
        """Membership test ``a >= b`` (tolerant in binary64)."""
        if isinstance(a, float) or isinstance(b, float):
            return _f(a) - _f(b) >= -self.tol
        return a >= b

    def lt_strict(self, a, b) -> bool:
        """Membership test ``a < b``; binary64 requires a gap above tol."""
        if isinstance(a, float) or isinstance(b, float):
            return _f(b) - _f(a) > self.tol
        return a < b

    # -- region traversal ---------------------------------------------------

    def inv_states(self, inv: Expr) -> list[int]:
        """Interior states satisfying ``inv``; also checks inv at init and its inductiveness."""
        region = self.region
        mode = APPROX if is_transcendental(inv) else EXACT
        fn = compiled(inv, mode)
        holds: dict[int, bool] = {}

        def sat(i: int) -> bool:
            v = holds.get(i)
            if v is None:
                v = bool(fn(self.env(i)))
                holds[i] = v
            return v

        try:
            if not sat(0):
                self.fail("inv-init", 0, {"invariant": "false"})
        except PctError as exc:
            self.fail("eval-error", 0, {"error": str(exc)})
        out = []
        for i in region.interior:
            try:
                if not sat(i):
                    continue
                for j, _ in region.succ[i]:
                    if not sat(j):
                        self.fail("inv-inductive", i, {"successor": region.describe(j)})
            except PctError as exc:
                self.fail("eval-error", i, {"error": str(exc)})
                continue
            out.append(i)
        self.checked = len(out)
        return out

    def each(self, states: list[int], body: Callable[[int], None]):
        for i in states:
            try:
                body(i)
            except PctError as exc:
                self.fail("eval-error", i, {"error": str(exc)})

    def verdict(self, conclusion_full: str, conclusion_region: str, complete_ok: bool = True,
                extra: dict | None = None) -> Verdict:
        region = self.region
        vs = sorted(self.violations, key=lambda v: (-1 if v.state_index is None else v.state_index, v.condition))
        frontier = [region.describe(i) for i in region.frontier]
        if vs:
            status = REFUTED
            conclusion = f"not established ({len(vs)} violated conditions)"
        elif not frontier and region.closed and complete_ok:
            status = VERIFIED_COMPLETE
            conclusion = conclusion_full
        else:
            status = VERIFIED_ON_REGION
            conclusion = conclusion_region
        if frontier:
            self.caveats.insert(0, f"{len(frontier)} frontier states were not checked as sources")
        stats = {
            "rule": self.rule,
            "region_states": len(region),
            "states_checked": self.checked,
            "region_depth": region.depth,
            "min_margin": self.min_margin,
            "min_margin_by_condition": dict(sorted(self.min_by_cond.items())),
            "tolerance": self.tol,
            "caveats": self.caveats,
            "notes": self.notes,
        }
        if extra:
            stats.update(extra)
        return Verdict(status, conclusion, vs, frontier, stats)


def _mass(region: Region, i: int, pred: Callable[[int], bool]):
    total = 0
    for j, p in region.succ[i]:
        if pred(j):
            total += p
    return normalize(total) if not isinstance(total, float) else total


def _expectation(region: Region, i: int, f: _Fn):
    total = 0
    for j, p in region.succ[i]:
        total += p * f(j)
    return total if isinstance(total, float) else normalize(total)


def _prep(g: ProgramGraph, cert: Certificate):
    check_certificate_names(cert, g)


# ---------------------------------------------------------------------------
# Rule 1: variant


def check_variant_rule(g: ProgramGraph, region: Region, c: VariantCert, tol: float = DEFAULT_TAU) -> Verdict:
    _prep(g, c)
    ctx = _Ctx(g, region, "variant", tol)
    U = _Fn(ctx, c.U)

    def body(i: int):
        u = U(i)
        if not is_integral(u, U.exact):
            ctx.fail("U-integer", i, {"U": u})
        ctx.geq("U-lower", i, u, c.lo, values={"U": u, "lo": c.lo})
        ctx.geq("U-upper", i, c.hi, u, strict=True, values={"U": u, "hi": c.hi})
        if region.is_terminal(i):
            ctx.eq("U-terminal", i, u, c.lo, values={"U": u, "lo": c.lo})
            return
        kind = region.kinds[i]
        if kind == Kind.PROB:
            m = _mass(region, i, lambda j: ctx.lt_strict(U(j), u))
            ctx.geq("U-prob-decrease", i, m, c.eps, strict=True, values={"U": u, "decrease_mass": m, "eps": c.eps})
        else:
            for j, _ in region.succ[i]:
                ctx.geq("U-decrease", i, u, U(j), strict=True,
                        values={"U": u, "U_succ": U(j), "successor": region.describe(j)})

    ctx.each(ctx.inv_states(c.inv), body)
    return ctx.verdict("AST", "AST on region")


# ---------------------------------------------------------------------------
# Rule 2: martingale with distance variant


def check_martingale_ast_rule(g: ProgramGraph, region: Region, c: MartingaleCert,
                              tol: float = DEFAULT_TAU) -> Verdict:
    _prep(g, c)
    ctx = _Ctx(g, region, "martingale", tol)
    V, U = _Fn(ctx, c.V), _Fn(ctx, c.U)
    max_v = [None]

    def body(i: int):
        v, u = V(i), U(i)
        if max_v[0] is None or _f(v) > _f(max_v[0]):
            max_v[0] = v
        if not is_integral(u, U.exact) or _f(u) < -tol:
            ctx.fail("U-natural", i, {"U": u})
        term = region.is_terminal(i)
        if term:
            ctx.eq("V-terminal", i, v, 0, values={"V": v})
            ctx.eq("U-terminal", i, u, 0, values={"U": u})
        else:
            ctx.geq("V-positive", i, v, 0, strict=True, values={"V": v})
        kind = region.kinds[i]
        row = region.succ[i]
        if kind == Kind.PROB:
            ex = _expectation(region, i, V)
            ctx.geq("V-expectation", i, v, ex, values={"V": v, "expected_V": ex})
        else:
            for j, _ in row:
                ctx.geq("V-nonincrease", i, v, V(j), values={"V": v, "V_succ": V(j), "successor": region.describe(j)})
                if not term:
                    ctx.geq("U-decrease", i, u, U(j), strict=True,
                            values={"U": u, "U_succ": U(j), "successor": region.describe(j)})
        for w in c.witnesses:
            if ctx.ge_tol(w.r, v):
                tag = f"[r={_fmt(w.r)}]"
                ctx.geq("witness-bound" + tag, i, w.H, u, values={"U": u, "H": w.H, "V": v})
                if kind == Kind.PROB and not term:
                    m = _mass(region, i, lambda j: ctx.lt_strict(U(j), u))
                    ctx.geq("witness-progress" + tag, i, m, w.eps, strict=True,
                            values={"U": u, "decrease_mass": m, "eps": w.eps})

    ctx.each(ctx.inv_states(c.inv), body)
    max_r = c.witnesses[-1].r
    covered = max_v[0] is None or ctx.ge_tol(max_r, max_v[0])
    if not covered:
        ctx.caveats.append(f"max V on checked states is {_fmt(max_v[0])}, above the largest witness r = {_fmt(max_r)}; "
                           "progress above that level is not certified")
    return ctx.verdict("AST", "AST on region", complete_ok=covered,
                       extra={"max_V": max_v[0], "max_witness_r": max_r})


# ---------------------------------------------------------------------------
# Rule 3: supermartingale variant with progress functions


def _unary_fn(e: Expr, v_exact: bool):
    exact = v_exact and not is_transcendental(e)
    mode = EXACT if exact else APPROX
    fn = compiled(e, mode)

    def call(v):
        r = to_number(fn({"v": v if exact else float(v)}))
        if not exact:
            r = float(r)
        return r
    return call


def check_sm_variant_rule(g: ProgramGraph, region: Region, c: SMVariantCert, tol: float = DEFAULT_TAU) -> Verdict:
    _prep(g, c)
    ctx = _Ctx(g, region, "smvariant", tol)
    V = _Fn(ctx, c.V)
    p_fn = _unary_fn(c.p_fn, V.exact)
    d_fn = _unary_fn(c.d_fn, V.exact)
    grid_p = _unary_fn(c.p_fn, True)
    grid_d = _unary_fn(c.d_fn, True)

    # grid checks: positivity and antitonicity (relative to the supplied grid)
    try:
        pv = [grid_p(x) for x in c.grid]
        dv = [grid_d(x) for x in c.grid]
        for x, a, b in zip(c.grid, pv, dv):
            ctx.geq("p-positive[grid]", None, a, 0, strict=True, values={"v": x, "p": a})
            ctx.geq("p-at-most-1[grid]", None, 1, a, values={"v": x, "p": a})
            ctx.geq("d-positive[grid]", None, b, 0, strict=True, values={"v": x, "d": b})
        for k in range(len(c.grid) - 1):
            ctx.geq("p-antitone[grid]", None, pv[k], pv[k + 1],
                    values={"v1": c.grid[k], "v2": c.grid[k + 1], "p1": pv[k], "p2": pv[k + 1]})
            ctx.geq("d-antitone[grid]", None, dv[k], dv[k + 1],
                    values={"v1": c.grid[k], "v2": c.grid[k + 1], "d1": dv[k], "d2": dv[k + 1]})
    except PctError as exc:
        ctx.fail("eval-error", None, {"error": f"progress functions on grid: {exc}"})
    ctx.notes.append(f"antitonicity of p and d is checked on the grid {', '.join(_fmt(x) for x in c.grid)} only")

    def body(i: int):
        v = V(i)
        if region.is_terminal(i):
            ctx.eq("V-terminal", i, v, 0, values={"V": v})
            return
        ctx.geq("V-positive", i, v, 0, strict=True, values={"V": v})
        row = region.succ[i]
        if not row:
            if region.kinds[i] == Kind.PROB:
                ctx.fail("V-prob-progress", i, {"V": v, "decrease_mass": 0})
            return
        d = d_fn(v)
        ctx.geq("d-positive", i, d, 0, strict=True, values={"V": v, "d": d})
        kind = region.kinds[i]
        if kind == Kind.PROB:
            p = p_fn(v)
            ctx.geq("p-positive", i, p, 0, strict=True, values={"V": v, "p": p})
            ex = _expectation(region, i, V)
            ctx.geq("V-expectation", i, v, ex, values={"V": v, "expected_V": ex})
            m = _mass(region, i, lambda j: ctx.ge_tol(v - V(j), d))
            best = max((v - V(j) for j, _ in row), key=_f)
            ctx.geq("V-prob-progress", i, m, p, values={"V": v, "d": d, "p": p, "decrease_mass": m,
                                                        "best_decrease": best})
        else:
            for j, _ in row:
                ctx.geq("V-progress", i, v - V(j), d,
                        values={"V": v, "V_succ": V(j), "d": d, "successor": region.describe(j)})

    ctx.each(ctx.inv_states(c.inv), body)
    return ctx.verdict("AST (antitonicity grid-relative)", "AST on region (antitonicity grid-relative)")


# ---------------------------------------------------------------------------
# stochastic-invariant rules


def _si_conditions(ctx: _Ctx, SI: _Fn, p, i: int, require_terminal: bool):
    """SI >= 0 plus (expected) non-increase at ``i``; terminal SI >= 1 when required."""
    region = ctx.region
    s = SI(i)
    ctx.geq("SI-nonneg", i, s, 0, values={"SI": s})
    if region.is_terminal(i):
        if require_terminal:
            ctx.geq("SI-terminal", i, s, 1, values={"SI": s})
        return
    row = region.succ[i]
    if region.kinds[i] == Kind.PROB:
        if row:
            ex = _expectation(region, i, SI)
            ctx.geq("SI-expectation", i, s, ex, values={"SI": s, "expected_SI": ex})
    else:
        for j, _ in row:
            ctx.geq("SI-nonincrease", i, s, SI(j), values={"SI": s, "SI_succ": SI(j), "successor": region.describe(j)})


def _variant_conditions(ctx: _Ctx, SI: _Fn, U: _Fn, eps, H, i: int, suffix: str = ""):
    """Rule-5 variant conditions for U at ``i``."""
    region = ctx.region
    u = U(i)
    s = SI(i)
    if not is_integral(u, U.exact) or _f(u) < -ctx.tol:
        ctx.fail("U-natural" + suffix, i, {"U": u})
    ctx.geq("U-bound" + suffix, i, H, u, values={"U": u, "H": H})
    in_zero = region.is_terminal(i) or ctx.ge_tol(s, 1)
    if in_zero:
        ctx.eq("U-zero-set" + suffix, i, u, 0, values={"U": u, "SI": s, "terminal": region.is_terminal(i)})
        return
    if not ctx.lt_strict(0, u):
        ctx.fail("U-zero-set" + suffix, i, {"U": u, "SI": s, "terminal": False})
        return
    row = region.succ[i]
    if region.kinds[i] == Kind.PROB:
        m = _mass(region, i, lambda j: ctx.lt_strict(U(j), u)) if row else 0
        ctx.geq("U-prob-decrease" + suffix, i, m, eps, strict=True, values={"U": u, "decrease_mass": m, "eps": eps})
    else:
        for j, _ in row:
            ctx.geq("U-decrease" + suffix, i, u, U(j), strict=True,
                    values={"U": u, "U_succ": U(j), "successor": region.describe(j)})


def check_upper_bound_rule(g: ProgramGraph, region: Region, c: SICert, tol: float = DEFAULT_TAU) -> Verdict:
    _prep(g, c)
    ctx = _Ctx(g, region, "upper", tol)
    SI = _Fn(ctx, c.SI)
    try:
        ctx.geq("SI-init", 0, c.p, SI(0), values={"SI": SI(0), "p": c.p})
    except PctError as exc:
        ctx.fail("eval-error", 0, {"error": str(exc)})
    ctx.each(ctx.inv_states(c.inv), lambda i: _si_conditions(ctx, SI, c.p, i, True))
    return ctx.verdict(f"Pr_term <= {_fmt(c.p)}", f"Pr_term <= {_fmt(c.p)} on region")


def check_si_lower_bound_rule(g: ProgramGraph, region: Region, c: SILowerCert, tol: float = DEFAULT_TAU) -> Verdict:
    _prep(g, c)
    ctx = _Ctx(g, region, "silower", tol)
    SI, U = _Fn(ctx, c.si.SI), _Fn(ctx, c.U)
    p = c.si.p
    try:
        ctx.geq("SI-init", 0, p, SI(0), values={"SI": SI(0), "p": p})
    except PctError as exc:
        ctx.fail("eval-error", 0, {"error": str(exc)})

    def body(i: int):
        _si_conditions(ctx, SI, p, i, False)
        _variant_conditions(ctx, SI, U, c.eps, c.H, i)

    ctx.each(ctx.inv_states(c.si.inv), body)
    bound = normalize(1 - Fraction(p))
    return ctx.verdict(f"Pr_term >= {_fmt(bound)}", f"Pr_term >= {_fmt(bound)} on region",
                       extra={"bound": bound})


def check_lower_bound_family(g: ProgramGraph, c: LowerFamilyCert, depth_for: Callable[[int], int] | int,
                             tol: float = DEFAULT_TAU) -> Verdict:
    """Check each family entry on its own region and aggregate.

    Only finitely many entries can be checked, so the verdict never claims
    the limit consequent; it reports the best bound certified by the
    verified entries.
    """
    _prep(g, c)
    violations: list[Violation] = []
    frontier: list[str] = []
    entries = []
    best = None
    checked = 0
    for ent in sorted(c.entries, key=lambda e: e.n):
        depth = ent.depth if ent.depth is not None else (depth_for(ent.n) if callable(depth_for) else depth_for)
        region = enumerate_region(g, depth)
        v = check_si_lower_bound_rule(g, region, ent.cert, tol)
        checked += v.stats["states_checked"]
        limit = Fraction(c.p) + Fraction(1, ent.n)
        agg_ok = Fraction(ent.cert.si.p) <= limit
        for viol in v.violations:
            viol.condition = f"n={ent.n}:{viol.condition}"
            violations.append(viol)
        if not agg_ok:
            violations.append(Violation(f"n={ent.n}:family-bound", None, None,
                                        {"entry_p": ent.cert.si.p, "p_plus_1_over_n": limit},
                                        normalize(limit - Fraction(ent.cert.si.p))))
        ok = v.verified and agg_ok
        bound = normalize(1 - limit)
        if ok and (best is None or bound > best):
            best = bound
        frontier.extend(f"n={ent.n}:{s}" for s in v.frontier)
        entries.append({"n": ent.n, "depth": depth, "status": v.status if agg_ok else REFUTED,
                        "entry_p": ent.cert.si.p, "bound": bound})
    status = REFUTED if violations else VERIFIED_ON_REGION
    ns = ", ".join(str(e["n"]) for e in entries)
    if status == REFUTED:
        conclusion = f"not established ({len(violations)} violated conditions)"
    else:
        conclusion = (f"finite prefix of the for-all-n family (n in {{{ns}}}): Pr_term >= {_fmt(best)}; "
                      f"limit claim Pr_term >= {_fmt(normalize(1 - Fraction(c.p)))} is not verified")
    stats = {
        "rule": "lowerfamily",
        "states_checked": checked,
        "region_states": None,
        "min_margin": None,
        "tolerance": tol,
        "best_bound": best,
        "limit_claim": f"Pr_term >= {_fmt(normalize(1 - Fraction(c.p)))} (limit over all n; not verified)",
        "entries": entries,
        "caveats": ["only finitely many family members are checked"],
        "notes": [],
    }
    return Verdict(status, conclusion, violations, frontier, stats)


def check_si_ast_rule(g: ProgramGraph, region: Region, c: SIAstCert, tol: float = DEFAULT_TAU) -> Verdict:
    """Per-anchor Rule-5 conditions; complete only when every interior state is an anchor."""
    _prep(g, c)
    ctx = _Ctx(g, region, "siast", tol)
    states = ctx.inv_states(c.inv)
    if c.anchors is None:
        anchors = [region.states[i] for i in states]
    else:
        anchors = list(c.anchors)
    anchor_idx = []
    for a in anchors:
        j = region.index.get(a)
        if j is None or not region.is_interior(j):
            ctx.fail("anchor-in-region", None, {"anchor": g.describe(a) if len(a.vals) == len(g.variables) else str(a)})
        else:
            anchor_idx.append(j)
    for a_i in anchor_idx:
        a = region.states[a_i]
        try:
            si_f, u_f, eps_e, h_e = c.for_anchor(a)
            env = state_env(g, a, a)
            eps = to_number(compiled(eps_e, EXACT)(env))
            H = to_number(compiled(h_e, EXACT)(env))
        except PctError as exc:
            ctx.fail("eval-error", a_i, {"anchor": region.describe(a_i), "error": str(exc)})
            continue
        SI, U = _Fn(ctx, si_f, a), _Fn(ctx, u_f, a)
        tag = f"[anchor=#{a_i}]"
        if not eps > 0:
            ctx.fail("eps-positive" + tag, a_i, {"eps": eps})
        try:
            ctx.geq("SI-init" + tag, a_i, c.p, SI(a_i), values={"SI": SI(a_i), "p": c.p})
        except PctError as exc:
            ctx.fail("eval-error" + tag, a_i, {"error": str(exc)})

        def body(i: int, SI=SI, U=U, eps=eps, H=H, tag=tag):
            n0 = len(ctx.violations)
            _si_conditions(ctx, SI, c.p, i, False)
            _variant_conditions(ctx, SI, U, eps, H, i)
            for v in ctx.violations[n0:]:
                v.condition += tag

        ctx.each(states, body)
    interior_set = set(states)
    full = interior_set <= set(anchor_idx)
    if not full:
        ctx.caveats.append(f"anchors incomplete: {len(set(anchor_idx) & interior_set)} of {len(interior_set)} "
                           "interior states are anchors")
    ctx.notes.append("anchor coverage is relative to the enumerated region")
    return ctx.verdict("AST", "AST at anchors x region strength", complete_ok=full,
                       extra={"anchors": len(anchor_idx)})


# ---------------------------------------------------------------------------
# dispatch


def check(g: ProgramGraph, cert: Certificate, depth: int | None = None, region: Region | None = None,
          tol: float = DEFAULT_TAU) -> Verdict:
    """Check ``cert`` with the rule named in its header."""
    if isinstance(cert, LowerFamilyCert):
        if depth is None and any(e.depth is None for e in cert.entries):
            raise ValueError("a depth is required for family entries without their own depth")
        return check_lower_bound_family(g, cert, depth, tol)
    if region is None:
        region = enumerate_region(g, depth)
    if isinstance(cert, VariantCert):
        return check_variant_rule(g, region, cert, tol)
    if isinstance(cert, MartingaleCert):
        return check_martingale_ast_rule(g, region, cert, tol)
    if isinstance(cert, SMVariantCert):
        return check_sm_variant_rule(g, region, cert, tol)
    if isinstance(cert, SILowerCert):
        return check_si_lower_bound_rule(g, region, cert, tol)
    if isinstance(cert, SICert):
        return check_upper_bound_rule(g, region, cert, tol)
    if isinstance(cert, SIAstCert):
        return check_si_ast_rule(g, region, cert, tol)
    raise TypeError(f"not a certificate: {cert!r}")
