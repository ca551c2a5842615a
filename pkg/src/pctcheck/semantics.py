"""Operational semantics engines.

* ``enumerate_region``: breadth-first state-space exploration.
* ``kstep_term_prob_min``: exact k-step demonic termination probability.
* ``reach_prob``: min/max reachability, exact at a horizon or by value iteration.
* ``shortest_run_bound``: length of the shortest terminal run a demonic
  scheduler cannot avoid.
* ``simulate``: vectorised Monte-Carlo runs under a fixed policy.
* ``oracle_term_prob``: brute-force history-tree enumeration, kept free of
  any code shared with the dynamic-programming engines.
"""
from __future__ import annotations

import csv
import io
import math
import os
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.stats import binomtest

from .cfg import Kind, ProgramGraph, State, successors
from .errors import (
    AssignmentFanout,
    BudgetExceeded,
    EvalError,
    NotClosed,
    PolicyIncomplete,
    RegionBudgetExceeded,
)
from .expr import evaluate_vector, format_number, normalize

DEFAULT_STATE_BUDGET = 2_000_000
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1_000_000


def state_budget() -> int:
    """Region cap, overridable through ``PCT_STATE_BUDGET``."""
    raw = os.environ.get("PCT_STATE_BUDGET")
    if raw:
        try:
            return int(raw)
        except ValueError:
            pass
    return DEFAULT_STATE_BUDGET


# ---------------------------------------------------------------------------
# regions


@dataclass
class Region:
    """Finite set of reachable states, indexed in BFS discovery order.

    ``succ[i]`` holds ``(j, prob)`` pairs for interior states and ``None`` for
    frontier states.  A state is interior iff all its successors are in the
    region and were actually expanded.
    """

    graph: ProgramGraph
    states: list[State]
    index: dict[State, int]
    depth: int | None
    succ: list[tuple | None]
    kinds: list[Kind]
    errors: dict[int, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, s: State) -> bool:
        return s in self.index

    def is_interior(self, i: int) -> bool:
        return self.succ[i] is not None

    @property
    def interior(self) -> list[int]:
        return [i for i, s in enumerate(self.succ) if s is not None]

    @property
    def frontier(self) -> list[int]:
        return [i for i, s in enumerate(self.succ) if s is None]

    @property
    def closed(self) -> bool:
        return all(s is not None for s in self.succ)

    @property
    def init_index(self) -> int:
        return 0

    @property
    def terminal_index(self) -> int | None:
        return self.index.get(self.graph.terminal_state)

    def is_terminal(self, i: int) -> bool:
        return self.graph.is_terminal(self.states[i])

    def describe(self, i: int) -> str:
        return self.graph.describe(self.states[i])

    def successor_states(self, i: int) -> list[State]:
        sc = self.succ[i]
        return [] if sc is None else [self.states[j] for j, _ in sc]


def _expand(g: ProgramGraph, s: State):
    return [(sc.state, sc.prob) for sc in successors(g, s)]


def enumerate_region(g: ProgramGraph, depth: int | None, within: Callable[[State], bool] | None = None,
                     budget: int | None = None) -> Region:
    """Breadth-first closure of the initial state under successors.

    ``depth=None`` explores until no new states appear.  States failing
    ``within`` are kept but not expanded, so they land in the frontier.
    """
    if depth is not None and depth < 0:
        raise ValueError("depth must be >= 0")
    cap = state_budget() if budget is None else budget
    init = g.init_state
    states = [init]
    index = {init: 0}
    dist = [0]
    succ: list[tuple | None] = [None]
    kinds = [g.kind(init.loc)]
    errors: dict[int, str] = {}
    queue = deque([0])
    pending_last: list[tuple[int, list]] = []

    while queue:
        i = queue.popleft()
        s = states[i]
        if within is not None and not within(s):
            continue
        last = depth is not None and dist[i] >= depth
        try:
            out = _expand(g, s)
        except (EvalError, AssignmentFanout) as exc:
            if last:
                errors[i] = str(exc)
                continue
            raise
        if last:
            pending_last.append((i, out))
            continue
        row = []
        for t, p in out:
            j = index.get(t)
            if j is None:
                j = len(states)
                if j >= cap:
                    raise RegionBudgetExceeded(cap)
                index[t] = j
                states.append(t)
                dist.append(dist[i] + 1)
                succ.append(None)
                kinds.append(g.kind(t.loc))
                queue.append(j)
            row.append((j, p))
        succ[i] = tuple(row)

    # last layer: interior only if everything it reaches is already known
    for i, out in pending_last:
        row = []
        for t, p in out:
            j = index.get(t)
            if j is None:
                break
            row.append((j, p))
        else:
            succ[i] = tuple(row)
    return Region(g, states, index, depth, succ, kinds, errors)


def restrict(region: Region, keep: Callable[[State], bool]) -> Region:
    """Copy of ``region`` in which states failing ``keep`` are demoted to the frontier."""
    succ = [row if (row is not None and keep(s)) else None for s, row in zip(region.states, region.succ)]
    return Region(region.graph, region.states, region.index, region.depth, succ, region.kinds, dict(region.errors))


# ---------------------------------------------------------------------------
# value maps


@dataclass
class ValueMap:
    region: Region
    values: list
    meta: dict = field(default_factory=dict)

    def __getitem__(self, key):
        if isinstance(key, State):
            key = self.region.index[key]
        return self.values[key]

    def __len__(self) -> int:
        return len(self.values)

    def at_init(self):
        return self.values[0]

    def to_csv(self) -> str:
        return region_csv(self.region, self.values)


def _fmt_value(v) -> str:
    return format_number(v)


def region_csv(region: Region, values: list | None = None) -> str:
    """Deterministic CSV: ``index,location,<vars...>,value``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "location", *region.graph.variables, "value"])
    for i, s in enumerate(region.states):
        if values is None:
            val = "interior" if region.is_interior(i) else "frontier"
        else:
            val = _fmt_value(values[i])
        w.writerow([i, s.loc, *(_fmt_value(v) for v in s.vals), val])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# exact horizon iteration


def _horizon(region: Region, base: list, objective: str, k: int) -> list:
    """k rounds of exact Bellman updates; non-interior states keep their base value."""
    pick = min if objective == "min" else max
    fixed = [b == 1 or region.succ[i] is None or not region.succ[i] for i, b in enumerate(base)]
    live = [i for i in range(len(base)) if not fixed[i]]
    cur = list(base)
    for _ in range(k):
        nxt = list(cur)
        changed = False
        for i in live:
            row = region.succ[i]
            kind = region.kinds[i]
            if kind == Kind.PROB:
                v = 0
                for j, p in row:
                    c = cur[j]
                    if c:
                        v += p * c
                v = normalize(v)
            elif kind == Kind.ASSIGN:
                v = cur[row[0][0]]
            else:
                v = pick(cur[j] for j, _ in row)
            if v != cur[i]:
                changed = True
            nxt[i] = v
        cur = nxt
        if not changed:
            break
    return cur


def kstep_term_prob_min(g: ProgramGraph, k: int, region: Region | None = None) -> Fraction:
    """Exact minimum over schedulers of the probability of terminating within k steps."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if region is None:
        region = enumerate_region(g, k)
    # States whose expansion failed sit at depth k; their successors are
    # never needed within the horizon, so their indicator value is exact.
    base = [1 if region.is_terminal(i) else 0 for i in range(len(region))]
    vals = _horizon(region, base, "min", k)
    return Fraction(vals[0])


# ---------------------------------------------------------------------------
# numeric value iteration


@dataclass
class _Choices:
    """Sparse choice structure: one row per (state, choice), rows grouped by state."""

    matrix: sp.csr_matrix
    owners: np.ndarray  # states that own at least one row, ascending
    starts: np.ndarray  # first row of each owner
    nondet: np.ndarray  # bool per owner


def _choices(region: Region, skip: np.ndarray) -> _Choices:
    rows, cols, data = [], [], []
    owners, starts, nondet = [], [], []
    r = 0
    for i, row in enumerate(region.succ):
        if row is None or not row or skip[i]:
            continue
        owners.append(i)
        starts.append(r)
        kind = region.kinds[i]
        nondet.append(kind == Kind.NONDET)
        if kind == Kind.PROB:
            for j, p in row:
                rows.append(r)
                cols.append(j)
                data.append(float(p))
            r += 1
        else:
            for j, _ in row:
                rows.append(r)
                cols.append(j)
                data.append(1.0)
                r += 1
    n = len(region)
    m = sp.csr_matrix((np.asarray(data, dtype=float), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
                      shape=(r, n))
    return _Choices(m, np.asarray(owners, dtype=np.int64), np.asarray(starts, dtype=np.int64),
                    np.asarray(nondet, dtype=bool))


def value_iteration(region: Region, target: np.ndarray, objective: str, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, columns: np.ndarray | None = None):
    """Jacobi value iteration for min/max reachability.

    ``target`` is a boolean vector, or a 2-D boolean array with one target per
    column to solve several problems at once.  Returns ``(values, iterations,
    residual)``.
    """
    target = np.asarray(target, dtype=bool)
    multi = target.ndim == 2
    tgt = target if multi else target[:, None]
    skip = np.all(tgt, axis=1) if multi else target
    ch = _choices(region, skip)
    x = tgt.astype(float)
    if ch.owners.size == 0:
        return (x if multi else x[:, 0]), 0, 0.0
    reduce = np.minimum if objective == "min" else np.maximum
    # rows of owners whose target is set must stay at 1 per column
    owner_target = tgt[ch.owners]
    it = 0
    residual = math.inf
    while it < max_iter:
        it += 1
        rv = ch.matrix @ x
        agg = reduce.reduceat(rv, ch.starts, axis=0)
        agg = np.where(owner_target, 1.0, agg)
        old = x[ch.owners]
        residual = float(np.max(np.abs(agg - old))) if agg.size else 0.0
        x[ch.owners] = agg
        if residual < tol:
            break
    return (x if multi else x[:, 0]), it, residual


def _target_vector(region: Region, target) -> np.ndarray:
    n = len(region)
    if callable(target):
        return np.fromiter((bool(target(s)) for s in region.states), dtype=bool, count=n)
    vec = np.zeros(n, dtype=bool)
    for t in target:
        vec[t if isinstance(t, (int, np.integer)) else region.index[t]] = True
    return vec


def reach_prob(region: Region, target, objective: str = "max", mode: str = "fixpoint", k: int | None = None,
               tol: float = DEFAULT_TOL, strict: bool = False) -> ValueMap:
    """Min or max probability of reaching ``target`` (predicate, states or indices).

    ``mode="horizon"`` with ``k`` gives exact rationals; ``mode="fixpoint"``
    runs value iteration until the sup-norm change drops below ``tol``.
    Frontier states are absorbing non-target states; the metadata records
    this so callers can read results as truncation bounds.
    """
    if objective not in ("min", "max"):
        raise ValueError("objective must be 'min' or 'max'")
    tv = _target_vector(region, target)
    open_states = [i for i in region.frontier if not tv[i]]
    if strict and open_states:
        raise NotClosed(len(open_states))
    meta = {"objective": objective, "mode": mode, "frontier_absorbing": len(open_states),
            "frontier_semantics": "frontier states absorb as non-target"}
    if mode == "horizon":
        if k is None:
            raise ValueError("horizon mode needs k")
        base = [1 if t else 0 for t in tv]
        vals = _horizon(region, base, objective, k)
        meta.update(k=k, exact=True)
        return ValueMap(region, [Fraction(v) for v in vals], meta)
    if mode != "fixpoint":
        raise ValueError(f"unknown mode {mode!r}")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    x, it, res = value_iteration(region, tv, objective, tol)
    meta.update(tol=tol, iterations=it, residual=res, exact=False)
    if open_states:
        meta["bound"] = "lower bound" if objective == "max" else "truncated"
    return ValueMap(region, [float(v) for v in x], meta)


def optimal_policy(region: Region, objective: str = "min", target=None, tol: float = 1e-12) -> dict[State, State]:
    """Memoryless table policy attaining the fixpoint value at nondeterministic states."""
    if target is None:
        term = region.graph.terminal_state
        target = lambda s: s == term  # noqa: E731
    vm = reach_prob(region, target, objective, "fixpoint", tol=tol)
    x = vm.values
    table: dict[State, State] = {}
    for i, row in enumerate(region.succ):
        if row and region.kinds[i] == Kind.NONDET:
            vals = [x[j] for j, _ in row]
            best = min(vals) if objective == "min" else max(vals)
            pick = next(j for (j, _), v in zip(row, vals) if v == best)
            table[region.states[i]] = region.states[pick]
    return table


# ---------------------------------------------------------------------------
# shortest terminal runs


def shortest_run_bound(region: Region, target=None) -> ValueMap:
    """Game distance to the terminal state (or to ``target``).

    Probabilistic states pick their best successor, nondeterministic ones
    their worst; frontier and stuck states are infinite.
    """
    n = len(region)
    if target is None:
        goal = np.zeros(n, dtype=bool)
        if region.terminal_index is not None:
            goal[region.terminal_index] = True
    else:
        goal = _target_vector(region, target)
    src, dst = [], []
    owners, nondet = [], []
    for i, row in enumerate(region.succ):
        if row and not goal[i] and not region.is_terminal(i):
            owners.append(i)
            nondet.append(region.kinds[i] == Kind.NONDET)
            for j, _ in row:
                src.append(len(owners) - 1)
                dst.append(j)
    d = np.full(n, np.inf)
    d[goal] = 0.0
    if owners:
        owners_a = np.asarray(owners, dtype=np.int64)
        dst_a = np.asarray(dst, dtype=np.int64)
        src_a = np.asarray(src, dtype=np.int64)
        starts = np.searchsorted(src_a, np.arange(len(owners)))
        nd = np.asarray(nondet, dtype=bool)
        while True:
            vals = d[dst_a]
            lo = np.minimum.reduceat(vals, starts)
            hi = np.maximum.reduceat(vals, starts)
            new = np.where(nd, hi, lo) + 1.0
            new = np.minimum(new, d[owners_a])
            if np.array_equal(new, d[owners_a]):
                break
            d[owners_a] = new
    out = [int(v) if math.isfinite(v) else math.inf for v in d]
    return ValueMap(region, out, {"kind": "shortest_run_bound"})


# ---------------------------------------------------------------------------
# brute-force oracle


def oracle_term_prob(g: ProgramGraph, k: int, budget: int = 2_000_000) -> Fraction:
    """Minimum k-step termination probability by explicit enumeration.

    Walks the tree of all histories of length at most k.  At every
    nondeterministic history the scheduler's options are enumerated and the
    worst one kept; at probabilistic histories the path probabilities are
    multiplied out and summed.  No memoisation: every history is visited.
    """
    visited = [0]
    term = g.terminal_state

    def go(history: tuple, left: int) -> Fraction:
        visited[0] += 1
        if visited[0] > budget:
            raise BudgetExceeded(budget, "histories")
        s = history[-1]
        if s == term:
            return Fraction(1)
        if left == 0:
            return Fraction(0)
        nxt = successors(g, s)
        if not nxt:
            return Fraction(0)
        kind = nxt[0].kind
        if kind == Kind.PROB:
            total = Fraction(0)
            for sc in nxt:
                total += Fraction(sc.prob) * go(history + (sc.state,), left - 1)
            return total
        if kind == Kind.ASSIGN:
            return go(history + (nxt[0].state,), left - 1)
        options = [go(history + (sc.state,), left - 1) for sc in nxt]
        return min(options)

    return go((g.init_state,), k)


# ---------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class SimResult:
    estimate: float
    half_width_95: float
    censored: int
    terminated: int
    stuck: int
    runs: int
    interval: tuple[float, float]


def _as_exact(v: float):
    return int(v) if float(v).is_integer() else Fraction(v)


def simulate(g: ProgramGraph, policy: str | Mapping[State, State] = "first-declared", runs: int = 1000,
             max_steps: int = 1000, seed: int = 0) -> SimResult:
    """Monte-Carlo termination estimate under a fixed memoryless policy.

    ``policy`` is ``"first-declared"``, ``"uniform-random"`` or a table mapping
    nondeterministic states to chosen successor states.  All runs advance in
    lock-step over binary64 arrays drawn from one generator seeded by
    ``seed``.  Runs still going after ``max_steps`` are censored; runs that
    reach a state without successors are stuck.  Both count as
    non-terminating in the estimate.
    """
    if runs < 1 or max_steps < 1:
        raise ValueError("runs and max_steps must be >= 1")
    rng = np.random.default_rng(seed)
    names = g.location_names
    loc_id = {n: i for i, n in enumerate(names)}
    nv = len(g.variables)
    loc = np.full(runs, loc_id[g.init_location], dtype=np.int64)
    vals = np.tile(np.asarray([float(v) for v in g.init_valuation], dtype=float), (runs, 1)).reshape(runs, nv)
    done = np.zeros(runs, dtype=bool)
    terminated = np.zeros(runs, dtype=bool)
    stuck = np.zeros(runs, dtype=bool)
    term_id = loc_id[g.terminal_location]
    table = policy if isinstance(policy, Mapping) else None
    if table is None and policy not in ("first-declared", "uniform-random"):
        raise ValueError(f"unknown policy {policy!r}")

    def at_terminal():
        hit = (~done) & (loc == term_id)
        if hit.any():
            zero = np.all(vals == 0.0, axis=1) if nv else np.ones(runs, dtype=bool)
            ok = hit & zero
            terminated[ok] = True
            stuck[hit & ~zero] = True
            done[hit] = True

    at_terminal()
    for _ in range(max_steps):
        if done.all():
            break
        step_loc = loc.copy()
        for name in names:
            lid = loc_id[name]
            if lid == term_id:
                continue
            idx = np.nonzero((~done) & (step_loc == lid))[0]
            if idx.size == 0:
                continue
            sub = vals[idx]
            env = {v: sub[:, c] for c, v in enumerate(g.variables)}
            edges = g.edges(name)
            m = idx.size
            if not edges:
                stuck[idx] = True
                done[idx] = True
                continue
            enabled = np.stack([np.broadcast_to(np.asarray(evaluate_vector(t.guard, env), dtype=bool), (m,))
                                for t in edges], axis=1)
            kind = g.kind(name)
            if kind == Kind.PROB:
                probs = np.stack([np.broadcast_to(np.asarray(evaluate_vector(t.prob, env), dtype=float), (m,))
                                  for t in edges], axis=1)
                probs = np.where(enabled, probs, 0.0)
                cum = np.cumsum(probs, axis=1)
                total = cum[:, -1]
                u = rng.random(m) * total
                choice = np.minimum(np.sum(cum <= u[:, None], axis=1), len(edges) - 1)
                dead = total <= 0
            elif kind == Kind.ASSIGN:
                if enabled.sum(axis=1).max(initial=0) > 1:
                    raise AssignmentFanout(name)
                choice = np.argmax(enabled, axis=1)
                dead = ~enabled.any(axis=1)
            else:
                dead = ~enabled.any(axis=1)
                if table is not None:
                    choice = np.zeros(m, dtype=np.int64)
                    for r in np.nonzero(~dead)[0]:
                        s = State(name, tuple(_as_exact(v) for v in sub[r]))
                        if s not in table:
                            raise PolicyIncomplete(g.describe(s))
                        tgt = table[s]
                        options = [c for c, t in enumerate(edges) if enabled[r, c] and t.target == tgt.loc]
                        if not options:
                            raise PolicyIncomplete(g.describe(s))
                        choice[r] = options[0]
                elif policy == "first-declared":
                    choice = np.argmax(enabled, axis=1)
                else:
                    counts = enabled.sum(axis=1)
                    pick = np.floor(rng.random(m) * np.maximum(counts, 1)).astype(np.int64)
                    rank = np.cumsum(enabled, axis=1) - 1
                    choice = np.argmax(enabled & (rank == pick[:, None]), axis=1)
            if dead.any():
                stuck[idx[dead]] = True
                done[idx[dead]] = True
            live = ~dead
            new_loc = np.fromiter((loc_id[t.target] for t in edges), dtype=np.int64, count=len(edges))
            if kind == Kind.ASSIGN:
                for c, t in enumerate(edges):
                    if t.update is None:
                        continue
                    rows = live & (choice == c)
                    if not rows.any():
                        continue
                    j, e = t.update
                    upd = np.broadcast_to(np.asarray(evaluate_vector(e, env), dtype=float), (m,))
                    vals[idx[rows], j] = upd[rows]
            loc[idx[live]] = new_loc[choice[live]]
        at_terminal()
    censored = int(np.sum(~done))
    k = int(terminated.sum())
    ci = binomtest(k, runs).proportion_ci(confidence_level=0.95, method="wilson")
    lo, hi = float(ci.low), float(ci.high)
    return SimResult(k / runs, (hi - lo) / 2, censored, k, int(stuck.sum()), runs, (lo, hi))
