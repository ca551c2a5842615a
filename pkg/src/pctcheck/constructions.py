"""Completeness constructions and translations between proof rules.

These build certificates from the semantics of a finite region: the
reachability matrix R and the diagonal supermartingale summed from its
columns, the logarithmic gap transform and the injectivity perturbation,
the translations Rule 1 -> Rule 2 and Rule 2 -> Rule 7, and the
guard-strengthening program transform.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .certificates import (
    AnchorData,
    ClosedForm,
    MartingaleCert,
    SIAstCert,
    Table,
    VariantCert,
    Witness,
    cert_eval,
    state_env,
    table_from_values,
)
from .cfg import Kind, ProgramGraph, Transition
from .errors import (
    ConstructionError,
    EscapeBoundViolated,
    NegativeInput,
    NoStrictState,
    NotClosed,
    PhiFailsAtInit,
    RoundsExhausted,
    SequenceExhausted,
)
from .expr import (
    APPROX,
    EXACT,
    TRUE,
    Binary,
    Const,
    Expr,
    Var,
    compiled,
    conj,
    is_transcendental,
    negate,
    normalize,
    parse_expr,
    pretty,
)
from .semantics import Region, ValueMap, shortest_run_bound, value_iteration

EPS_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# reachability matrix and diagonal sequence


@dataclass
class RMatrix:
    """R[i, n]: max probability of reaching a non-terminal state of index >= n from state i."""

    region: Region
    values: np.ndarray  # shape (states, states + 1)
    meta: dict = field(default_factory=dict)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def __getitem__(self, key):
        return float(self.values[key])

    def column(self, n: int) -> ValueMap:
        return ValueMap(self.region, [float(v) for v in self.values[:, n]], {"column": n})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "state", *(f"n{n}" for n in range(self.width))])
        for i in range(self.values.shape[0]):
            w.writerow([i, self.region.describe(i), *(repr(float(v)) for v in self.values[i])])
        return buf.getvalue()


def build_r_matrix(region: Region, tol: float = 1e-12, strict: bool = True) -> RMatrix:
    """All columns at once by one batched value iteration.

    Column n targets the non-terminal states with index >= n; the terminal
    state is absorbing and outside every target, so its row is zero.
    """
    if strict and not region.closed:
        raise NotClosed(len(region.frontier))
    n = len(region)
    idx = np.arange(n)
    target = idx[:, None] >= np.arange(n + 1)[None, :]
    term = region.terminal_index
    if term is not None:
        target[term, :] = False
    x, it, res = value_iteration(region, target, "max", tol)
    return RMatrix(region, x, {"tol": tol, "iterations": it, "residual": res})


@dataclass
class DiagonalSequence:
    indices: tuple[int, ...]
    J: int
    tail_bound: float


def build_diagonal_v(r: RMatrix, J: int, tol: float = 1e-12) -> tuple[DiagonalSequence, ValueMap]:
    """Greedy diagonal sequence and the partial sum V = sum_{j<=J} R(., n_j).

    n_j is the smallest column with R(i, n_j) <= 2^-j for every i <= j; the
    condition only tightens with j, so the sequence is non-decreasing.
    """
    if J < 0:
        raise ValueError("J must be >= 0")
    vals = r.values
    rows = vals.shape[0]
    seq: list[int] = []
    n = 0
    for j in range(J + 1):
        bound = 2.0 ** -j + tol
        top = min(j, rows - 1)
        while n < r.width and np.any(vals[: top + 1, n] > bound):
            n += 1
        if n >= r.width:
            raise SequenceExhausted(j)
        seq.append(n)
    v = vals[:, seq].sum(axis=1)
    tail = 2.0 ** -J
    meta = {"construction": "diagonal", "J": J, "sequence": seq, "tail_bound_rows_le_J": tail}
    return DiagonalSequence(tuple(seq), J, tail), ValueMap(r.region, [float(a) for a in v], meta)


# ---------------------------------------------------------------------------
# gap transform and perturbation


def log_gap_transform(v: ValueMap) -> ValueMap:
    out = []
    for i, a in enumerate(v.values):
        if a < 0:
            raise NegativeInput(v.region.describe(i), a)
        out.append(math.log1p(float(a)))
    return ValueMap(v.region, out, {**v.meta, "transform": "log1p"})


def _sm_margin(region: Region, vals: list[float], i: int) -> float:
    """Slack of the supermartingale inequality at interior state ``i``."""
    row = region.succ[i]
    if not row:
        return math.inf
    if region.kinds[i] == Kind.PROB:
        return vals[i] - sum(float(p) * vals[j] for j, p in row)
    return vals[i] - max(vals[j] for j, _ in row)


def perturb_to_injective(region: Region, v0: ValueMap, max_rounds: int = 10_000,
                         tol: float = 1e-9) -> ValueMap:
    """Lower tied values one state at a time until the table is injective.

    At each round the smallest positive value shared by several states is
    located, a state of that level with strict slack is picked, and its value
    is lowered by half the smaller of its slack and the gap to the next
    occupied value below.  Lowering a value only widens the slack of its
    predecessors, so the supermartingale property is kept.
    """
    if not region.closed:
        raise NotClosed(len(region.frontier))
    vals = [float(a) for a in v0.values]
    term = region.terminal_index
    for i in range(len(region)):
        if i == term:
            continue
        if _sm_margin(region, vals, i) < -tol:
            raise ConstructionError(f"input is not a supermartingale at {region.describe(i)}")
        if vals[i] <= 0:
            raise ConstructionError(f"input is not positive at {region.describe(i)}")
    floor_hits = 0
    rounds = 0
    while True:
        levels: dict[float, list[int]] = {}
        for i, a in enumerate(vals):
            levels.setdefault(a, []).append(i)
        tied = sorted(a for a, idx in levels.items() if a > 0 and len(idx) >= 2)
        if not tied:
            break
        if rounds >= max_rounds:
            raise RoundsExhausted(max_rounds)
        rounds += 1
        r = tied[0]
        members = levels[r]
        below = max((a for a in levels if a < r), default=0.0)
        best = None
        for i in members:
            m = _sm_margin(region, vals, i)
            if m > 0 and (best is None or m > best[1]):
                best = (i, m)
        if best is None:
            raise NoStrictState(r)
        i, m = best
        eps = 0.5 * min(m, r - below)
        if eps < EPS_FLOOR:
            eps = EPS_FLOOR
            floor_hits += 1
        vals[i] = r - eps
    meta = {**v0.meta, "perturbation_rounds": rounds, "eps_floor_hits": floor_hits}
    return ValueMap(region, vals, meta)


def martingale_from_tables(region: Region, v: ValueMap, u: ValueMap | None = None) -> MartingaleCert:
    """Rule-2 certificate from a V table and a distance table (default: shortest runs).

    One witness covers the whole region: r = max V, H = max U and eps half
    the smallest decreasing mass at probabilistic states.
    """
    if u is None:
        u = shortest_run_bound(region)
    states = region.states
    keep = [i for i in range(len(region)) if region.succ[i] is not None or region.is_terminal(i)]
    if any(not math.isfinite(u.values[i]) for i in keep):
        raise ConstructionError("distance table is infinite somewhere on the region")
    V = table_from_values("V", [states[i] for i in keep], [v.values[i] for i in keep])
    U = table_from_values("U", [states[i] for i in keep], [u.values[i] for i in keep], approx=False)
    eps = _min_decrease_mass(region, u.values) / 2
    r = Fraction(max(float(v.values[i]) for i in keep))
    H = max(int(u.values[i]) for i in keep)
    return MartingaleCert(TRUE, V, U, (Witness(normalize(r), H, normalize(eps)),))


def _min_decrease_mass(region: Region, u: list) -> Fraction:
    best = Fraction(1)
    for i, row in enumerate(region.succ):
        if not row or region.kinds[i] != Kind.PROB or not u[i] or region.is_terminal(i):
            continue
        m = sum((Fraction(p) for j, p in row if u[j] < u[i]), Fraction(0))
        if m > 0:
            best = min(best, m)
    return best


# ---------------------------------------------------------------------------
# rule translations


def variant_to_martingale(c: VariantCert) -> MartingaleCert:
    """V is the indicator of not being terminal; U is shifted so that U(terminal) = 0."""
    V = ClosedForm("V", (("*", parse_expr("if terminal then 0 else 1")),))
    lo = Fraction(c.lo)
    U = c.U
    if lo != 0:
        if isinstance(U, Table):
            U = Table(U.name, tuple((s, normalize(Fraction(v) - lo)) for s, v in U.entries),
                      None if U.default is None else normalize(Fraction(U.default) - lo), U.approx)
        else:
            U = ClosedForm(U.name, tuple((l, Binary("-", e, Const(lo))) for l, e in U.cases))
    H = math.ceil(Fraction(c.hi) - lo)
    return MartingaleCert(c.inv, V, U, (Witness(1, H, c.eps),))


def _anchor_data(region: Region, psi: frozenset, p, tol: float):
    """SI, U tables plus eps and H for one sublevel set ``psi``."""
    n = len(region)
    outside = np.ones(n, dtype=bool)
    outside[list(psi)] = False
    term = region.terminal_index
    if term is not None:
        outside[term] = False
    si, _, _ = value_iteration(region, outside, "max", tol=1e-13)
    zero = [i for i in range(n) if outside[i] or i == term or si[i] >= 1 - tol]
    dist = shortest_run_bound(region, zero)
    return si, dist


def martingale_to_si(g: ProgramGraph, region: Region, c: MartingaleCert, p,
                     v_up: float | Callable[[object], float], anchors: Iterable | None = None,
                     tol: float = 1e-9) -> SIAstCert:
    """Rule-7 certificate from a Rule-2 certificate on a closed region.

    For an anchor a, Psi_a is the sublevel set {V <= v_up(a)}; SI_a is the
    maximal probability of leaving Psi_a and U_a the game distance to the
    states where SI_a reaches 1 or the run has terminated.  The escape bound
    SI_a(a) <= p is checked, not assumed.
    """
    if not region.closed:
        raise NotClosed(len(region.frontier))
    mode = EXACT if c.V.exact else APPROX
    vvals = [float(cert_eval(c.V, g, s, mode=mode)) for s in region.states]
    inv_fn = compiled(c.inv, APPROX if is_transcendental(c.inv) else EXACT)
    if anchors is None:
        anchor_idx = [i for i in region.interior if inv_fn(state_env(g, region.states[i]))]
        all_anchors = True
    else:
        anchor_idx = [region.index[a] for a in anchors]
        all_anchors = False
    cache: dict[frozenset, tuple] = {}
    per_anchor = []
    for a in anchor_idx:
        up = v_up(region.states[a]) if callable(v_up) else v_up
        psi = frozenset(i for i, v in enumerate(vvals) if v <= up + tol)
        if psi not in cache:
            si, dist = _anchor_data(region, psi, p, tol)
            if any(not math.isfinite(dist.values[i]) for i in range(len(region))):
                raise ConstructionError("some state cannot reach the zero set of U")
            eps = _min_decrease_mass(region, dist.values) / 2
            H = max(int(v) for v in dist.values)
            SI = table_from_values("SI", region.states, [float(v) for v in si], approx=True)
            U = table_from_values("U", region.states, dist.values, approx=False)
            cache[psi] = (SI, U, normalize(eps), H, si)
        SI, U, eps, H, si = cache[psi]
        if si[a] > float(p) + tol:
            raise EscapeBoundViolated(region.describe(a), float(si[a]))
        per_anchor.append((region.states[a], SI, U, eps, H))
    if not per_anchor:
        raise ConstructionError("no anchors")
    _, SI0, U0, eps0, H0 = per_anchor[0]
    overrides = tuple((s, AnchorData(SI, U, Const(Fraction(eps)), Const(Fraction(H))))
                      for s, SI, U, eps, H in per_anchor[1:]
                      if (SI, U, eps, H) != (SI0, U0, eps0, H0))
    anchor_field = None if all_anchors else tuple(s for s, *_ in per_anchor)
    return SIAstCert(c.inv, p, anchor_field, SI0, U0, Const(Fraction(eps0)), Const(Fraction(H0)), overrides)


# ---------------------------------------------------------------------------
# guard strengthening


def guard_strengthen(g: ProgramGraph, phi: Expr) -> ProgramGraph:
    """Conjoin ``phi`` to every guard and park runs violating it in a self-loop.

    The self-loop at an assignment location rewrites the first variable to
    itself; at a probabilistic location it has probability 1.  The terminal
    location gets no self-loop.
    """
    init_env = g.env(g.init_state)
    if not compiled(phi, EXACT)(init_env):
        raise PhiFailsAtInit(pretty(phi))
    not_phi = negate(phi)
    out: list[Transition] = []
    for loc in g.locations:
        if loc.kind == Kind.TERMINAL:
            continue
        for t in g.edges(loc.name):
            out.append(replace(t, guard=conj(t.guard, phi)))
        update = (0, Var(g.variables[0])) if (loc.kind == Kind.ASSIGN and g.variables) else None
        prob = Const(Fraction(1)) if loc.kind == Kind.PROB else None
        out.append(Transition(loc.name, loc.name, not_phi, prob, update))
    return ProgramGraph(
        locations=g.locations,
        variables=g.variables,
        init_location=g.init_location,
        init_valuation=g.init_valuation,
        transitions=tuple(out),
        terminal_location=g.terminal_location,
        allow_fanout=True,
    )


__all__ = [
    "RMatrix",
    "DiagonalSequence",
    "build_r_matrix",
    "build_diagonal_v",
    "log_gap_transform",
    "perturb_to_injective",
    "martingale_from_tables",
    "variant_to_martingale",
    "martingale_to_si",
    "guard_strengthen",
]
