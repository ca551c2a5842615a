"""Command-line front end: ``pctcheck <command> ...``."""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import constructions as cons
from .certificates import (
    MartingaleCert,
    VariantCert,
    cert_eval,
    format_certificate,
    load_certificate,
    state_predicate,
)
from .cfg import format_program, load_program, validate_program
from .corpus import get_example
from .errors import BudgetError, PctError
from .expr import APPROX, EXACT, parse_expr
from .rules import DEFAULT_TAU, check
from .semantics import (
    ValueMap,
    enumerate_region,
    kstep_term_prob_min,
    optimal_policy,
    oracle_term_prob,
    reach_prob,
    region_csv,
    restrict,
    simulate,
)

EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66
EX_SOFTWARE = 70


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _depth(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("depth must be >= 0")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pctcheck", description="Certificate checker for probabilistic program termination.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="check a certificate against a program")
    c.add_argument("program")
    c.add_argument("certificate")
    c.add_argument("--depth", type=_depth, help="region depth (omit to explore until closed)")
    c.add_argument("--tol", type=float, default=DEFAULT_TAU, help="binary64 comparison tolerance")
    c.add_argument("--within", help="expression bounding region expansion")
    c.add_argument("--where", help="expression selecting the states checked as sources")
    c.add_argument("--json", action="store_true", help="print the verdict as JSON")
    c.add_argument("--threads", type=_positive, default=1, help="worker cap (checks run single-threaded)")

    pr = sub.add_parser("prob", help="k-step minimum termination probability")
    pr.add_argument("program")
    pr.add_argument("--depth", type=_depth, required=True)
    pr.add_argument("--exact", action="store_true", help="print the exact rational")
    pr.add_argument("--json", action="store_true")

    o = sub.add_parser("oracle", help="k-step value by brute-force history enumeration")
    o.add_argument("program")
    o.add_argument("--depth", type=_depth, required=True)
    o.add_argument("--json", action="store_true")

    e = sub.add_parser("enumerate", help="enumerate the region of a program")
    e.add_argument("program")
    e.add_argument("--depth", type=_depth)
    e.add_argument("--csv", help="write index,location,vars...,value rows to this path")
    e.add_argument("--value", choices=("none", "kstep", "max-term", "min-term"), default="none",
                   help="value column for the CSV")
    e.add_argument("--json", action="store_true")

    s = sub.add_parser("simulate", help="Monte-Carlo termination estimate")
    s.add_argument("program")
    s.add_argument("--runs", type=_positive, required=True)
    s.add_argument("--max-steps", type=_positive, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--policy", default="first-declared",
                   help="first-declared, uniform-random or demonic (optimal on a region)")
    s.add_argument("--policy-depth", type=_depth, default=50, help="region depth for the demonic policy")
    s.add_argument("--json", action="store_true")

    k = sub.add_parser("construct", help="build certificates or programs")
    ks = k.add_subparsers(dest="which", required=True, parser_class=_Parser)
    d = ks.add_parser("diagonal-v", help="diagonal supermartingale with shortest-run variant")
    d.add_argument("program")
    d.add_argument("--J", type=_depth, default=10)
    d.add_argument("--depth", type=_depth)
    d.add_argument("--csv", help="write the R matrix as CSV")
    for name, helptext in (("log-gap", "apply ln(1 + V) to a martingale certificate's V"),
                           ("perturb", "make a martingale certificate's V injective")):
        q = ks.add_parser(name, help=helptext)
        q.add_argument("program")
        q.add_argument("certificate")
        q.add_argument("--depth", type=_depth)
    v2m = ks.add_parser("variant-to-martingale", help="translate a variant certificate")
    v2m.add_argument("certificate")
    m2s = ks.add_parser("martingale-to-si", help="translate a martingale certificate to one anchored per state")
    m2s.add_argument("program")
    m2s.add_argument("certificate")
    m2s.add_argument("--p", type=_rational, required=True)
    m2s.add_argument("--v-up", type=float, required=True)
    m2s.add_argument("--depth", type=_depth)
    gs = ks.add_parser("guard-strengthen", help="conjoin phi to every guard")
    gs.add_argument("program")
    gs.add_argument("--phi", required=True)
    for q in ks.choices.values():
        q.add_argument("--out", help="write the result here instead of stdout")

    x = sub.add_parser("example", help="print or emit a bundled example")
    x.add_argument("name")
    x.add_argument("--emit", metavar="DIR", help="write the example's files into DIR")

    v = sub.add_parser("validate", help="probe a program for ill-formed states")
    v.add_argument("program")
    v.add_argument("--depth", type=_depth, default=8)
    return p


# ---------------------------------------------------------------------------
# helpers


def _load_program(path: str):
    if not Path(path).is_file():
        raise FileNotFoundError(path)
    return load_program(path)


def _load_cert(path: str):
    if not Path(path).is_file():
        raise FileNotFoundError(path)
    return load_certificate(path)


def _emit(text: str, out: str | None, stdout) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)


def _exact(v) -> str:
    """Full-precision rational text (no abbreviation of long integers)."""
    limit = getattr(sys, "set_int_max_str_digits", None)
    if limit is not None:
        limit(0)
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


# ---------------------------------------------------------------------------
# commands


def _cmd_check(a, out) -> int:
    g = _load_program(a.program)
    c = _load_cert(a.certificate)
    region = None
    if a.within or a.where or not hasattr(c, "entries"):
        within = state_predicate(g, a.within) if a.within else None
        region = enumerate_region(g, a.depth, within=within)
        if a.where:
            region = restrict(region, state_predicate(g, a.where))
    verdict = check(g, c, depth=a.depth, region=region, tol=a.tol)
    out.write(verdict.to_json() + "\n" if a.json else verdict.report())
    return verdict.exit_code


def _cmd_prob(a, out) -> int:
    g = _load_program(a.program)
    v = kstep_term_prob_min(g, a.depth)
    if a.json:
        out.write(json.dumps({"k": a.depth, "value": _exact(v), "float": float(v)}) + "\n")
    elif a.exact:
        out.write(_exact(v) + "\n")
    else:
        out.write(f"{float(v)!r}\n")
    return 0


def _cmd_oracle(a, out) -> int:
    g = _load_program(a.program)
    v = oracle_term_prob(g, a.depth)
    if a.json:
        out.write(json.dumps({"k": a.depth, "value": _exact(v)}) + "\n")
    else:
        out.write(_exact(v) + "\n")
    return 0


def _cmd_enumerate(a, out) -> int:
    g = _load_program(a.program)
    region = enumerate_region(g, a.depth)
    values = None
    if a.value == "kstep":
        if a.depth is None:
            raise _UsageError("--value kstep needs --depth")
        values = reach_prob(region, [region.terminal_index] if region.terminal_index is not None else [],
                            "min", "horizon", k=a.depth).values
    elif a.value in ("max-term", "min-term"):
        term = [region.terminal_index] if region.terminal_index is not None else []
        values = reach_prob(region, term, a.value[:3]).values
    if a.csv:
        Path(a.csv).write_text(region_csv(region, values), encoding="utf-8")
    info = {"states": len(region), "interior": len(region.interior), "frontier": len(region.frontier),
            "closed": region.closed, "depth": region.depth, "expansion_errors": len(region.errors)}
    if a.json:
        out.write(json.dumps(info) + "\n")
    else:
        for key, val in info.items():
            out.write(f"{key}: {val}\n")
    return 0


def _cmd_simulate(a, out) -> int:
    g = _load_program(a.program)
    policy = a.policy
    if policy == "demonic":
        region = enumerate_region(g, a.policy_depth)
        policy = optimal_policy(region, "min")
    elif policy not in ("first-declared", "uniform-random"):
        raise _UsageError(f"unknown policy {policy!r}")
    r = simulate(g, policy, a.runs, a.max_steps, a.seed)
    data = {"runs": r.runs, "terminated": r.terminated, "censored": r.censored, "stuck": r.stuck,
            "estimate": r.estimate, "half_width_95": r.half_width_95, "interval": list(r.interval)}
    if a.json:
        out.write(json.dumps(data) + "\n")
    else:
        for key, val in data.items():
            out.write(f"{key}: {val}\n")
    return 0


def _region_values(g, c, region) -> ValueMap:
    mode = EXACT if c.V.exact else APPROX
    keep = [i for i in range(len(region)) if region.succ[i] is not None or region.is_terminal(i)]
    vals = [0.0] * len(region)
    for i in keep:
        vals[i] = float(cert_eval(c.V, g, region.states[i], mode=mode))
    return ValueMap(region, vals)


def _cmd_construct(a, out) -> int:
    w = a.which
    if w == "variant-to-martingale":
        c = _load_cert(a.certificate)
        if not isinstance(c, VariantCert):
            raise _UsageError("variant-to-martingale needs a variant certificate")
        _emit(format_certificate(cons.variant_to_martingale(c)), a.out, out)
        return 0
    g = _load_program(a.program)
    if w == "guard-strengthen":
        phi = parse_expr(a.phi, set(g.variables))
        _emit(format_program(cons.guard_strengthen(g, phi)), a.out, out)
        return 0
    region = enumerate_region(g, a.depth)
    if w == "diagonal-v":
        r = cons.build_r_matrix(region)
        if a.csv:
            Path(a.csv).write_text(r.to_csv(), encoding="utf-8")
        _, v = cons.build_diagonal_v(r, a.J)
        _emit(format_certificate(cons.martingale_from_tables(region, v)), a.out, out)
        return 0
    c = _load_cert(a.certificate)
    if not isinstance(c, MartingaleCert):
        raise _UsageError(f"{w} needs a martingale certificate")
    if w in ("log-gap", "perturb"):
        if not region.closed:
            raise _UsageError(f"{w} needs a closed region; omit --depth or raise it")
        v = _region_values(g, c, region)
        v = cons.log_gap_transform(v) if w == "log-gap" else cons.perturb_to_injective(region, v)
        _emit(format_certificate(cons.martingale_from_tables(region, v)), a.out, out)
        return 0
    si = cons.martingale_to_si(g, region, c, a.p, a.v_up)
    _emit(format_certificate(si), a.out, out)
    return 0


def _cmd_example(a, out) -> int:
    ex = get_example(a.name)
    if a.emit:
        for p in ex.emit(a.emit):
            out.write(f"wrote {p}\n")
        return 0
    out.write(f"# {ex.name}: {ex.description}\n")
    out.write(ex.source)
    for c in ex.certs:
        depth = "closed" if c.depth is None else c.depth
        out.write(f"# certificate {c.filename} ({c.rule}): depth {depth}, expected {c.expected}\n")
    for n in ex.notes:
        out.write(f"# note: {n}\n")
    return 0


def _cmd_validate(a, out) -> int:
    g = _load_program(a.program)
    region = enumerate_region(g, a.depth)
    diags = validate_program(g, region.states, include_notes=True)
    for d in diags:
        out.write(f"{d}\n")
    errors = [d for d in diags if d.severity == "error"]
    out.write(f"{len(region)} states probed, {len(errors)} errors\n")
    return 1 if errors else 0


_COMMANDS = {
    "check": _cmd_check,
    "prob": _cmd_prob,
    "oracle": _cmd_oracle,
    "enumerate": _cmd_enumerate,
    "simulate": _cmd_simulate,
    "construct": _cmd_construct,
    "example": _cmd_example,
    "validate": _cmd_validate,
}


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    """Run one command; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args, stdout)
    except _UsageError as exc:
        stderr.write(f"{exc}\n")
        return EX_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        stderr.write(f"pctcheck: cannot read {exc.filename or exc}\n")
        return EX_NOINPUT
    except BudgetError as exc:
        stderr.write(f"pctcheck: {exc}\n")
        return EX_SOFTWARE
    except PctError as exc:
        stderr.write(f"pctcheck: {type(exc).__name__}: {exc}\n")
        return EX_DATAERR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
