"""Bundled example programs and certificates."""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .certificates import Certificate, parse_certificate, state_predicate
from .cfg import ProgramGraph, parse_program
from .errors import UnknownExample
from .rules import Verdict, check
from .semantics import enumerate_region, restrict

NAMES = ("rw1d", "rw2d", "tailend", "asym23", "geom", "bounded_walk", "kappa_analogue")


@dataclass(frozen=True)
class CertEntry:
    """A bundled certificate and the verdict it should produce.

    ``within`` bounds region expansion and ``where`` selects the states
    checked as sources; both are expressions over the program variables and
    ``loc``.
    """

    rule: str
    filename: str
    depth: int | None
    expected: str
    within: str | None = None
    where: str | None = None


@dataclass(frozen=True)
class ExampleEntry:
    name: str
    description: str
    certs: tuple[CertEntry, ...]
    phis: tuple[str, ...] = ()
    notes: tuple[str, ...] = field(default=())

    @property
    def program_file(self) -> str:
        return f"{self.name}.pct"

    @property
    def source(self) -> str:
        return _read(self.program_file)

    @property
    def program(self) -> ProgramGraph:
        return parse_program(self.source)

    @property
    def certificates(self) -> list[tuple[str, str]]:
        """(rule tag, certificate text) pairs."""
        return [(c.rule, _read(c.filename)) for c in self.certs]

    def certificate(self, filename: str) -> Certificate:
        return parse_certificate(_read(filename))

    def check_entry(self, entry: CertEntry, depth: int | None = None) -> Verdict:
        """Run the checker on a bundled certificate with its recorded region settings."""
        g = self.program
        c = self.certificate(entry.filename)
        depth = entry.depth if depth is None else depth
        if entry.rule == "lowerfamily":
            return check(g, c, depth=depth)
        within = state_predicate(g, entry.within) if entry.within else None
        region = enumerate_region(g, depth, within=within)
        if entry.where:
            region = restrict(region, state_predicate(g, entry.where))
        return check(g, c, region=region)

    def files(self) -> dict[str, str]:
        out = {self.program_file: self.source}
        for c in self.certs:
            out[c.filename] = _read(c.filename)
        return out

    def emit(self, directory) -> list[Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in self.files().items():
            p = d / name
            p.write_text(text, encoding="utf-8")
            written.append(p)
        return written


def _read(filename: str) -> str:
    return resources.files("pctcheck").joinpath("data", filename).read_text(encoding="utf-8")


_RW2D_WITHIN = "euclid_norm(x, y) <= 60"
_RW2D_WHERE = "loc == @loop && euclid_norm(x, y) >= 10"

_ENTRIES = {
    "rw1d": ExampleEntry(
        "rw1d",
        "1D symmetric random walk from x = 1; terminates almost surely but has no bounded variant",
        (
            CertEntry("martingale", "rw1d.martingale.cert", 25, "VerifiedOnRegion"),
            CertEntry("smvariant", "rw1d.smvariant.cert", 25, "VerifiedOnRegion"),
            CertEntry("variant", "rw1d.variant.cert", 12, "Refuted"),
        ),
        phis=("x < 6", "x < 3"),
        notes=("walk step m takes 2m program steps plus one to exit, so k = 3, 7, 11, 15 give "
               "1/2, 5/8, 11/16, 93/128",),
    ),
    "rw2d": ExampleEntry(
        "rw2d",
        "2D symmetric random walk from (1, 1); recurrent, so terminates almost surely",
        (
            CertEntry("smvariant", "rw2d.smvariant.cert", None, "Refuted", _RW2D_WITHIN, _RW2D_WHERE),
            CertEntry("smvariant", "rw2d.smvariant_half_d.cert", None, "VerifiedOnRegion", _RW2D_WITHIN,
                      _RW2D_WHERE),
        ),
        phis=("x * x + y * y < 10",),
        notes=("with the published d the progress condition fails on most of the annulus; d/2 passes",
               "the supermartingale inequality fails at (1, 1) by about 0.0193"),
    ),
    "tailend": ExampleEntry(
        "tailend",
        "long tail end: x doubles exponentially while a coin keeps flipping, then counts down",
        (CertEntry("martingale", "tailend.martingale.cert", 12, "VerifiedOnRegion"),),
        phis=("x < 100",),
        notes=("the k-step value is exactly 1/2 for 8 <= k <= 14; k = 15 needs 2^(2^65536)",),
    ),
    "asym23": ExampleEntry(
        "asym23",
        "random walk drifting up with probability 2/3; terminates with probability 1/2",
        (
            CertEntry("upper", "asym23.upper.cert", 30, "VerifiedOnRegion"),
            CertEntry("silower", "asym23.silower.cert", 30, "VerifiedOnRegion"),
            CertEntry("lowerfamily", "asym23.lowerfamily.cert", None, "VerifiedOnRegion"),
        ),
        phis=("x < 6",),
    ),
    "geom": ExampleEntry(
        "geom",
        "fair coin flipped until heads; T_k = 1 - 2^-k",
        (CertEntry("variant", "geom.variant.cert", 5, "VerifiedComplete"),),
        phis=("true",),
    ),
    "bounded_walk": ExampleEntry(
        "bounded_walk",
        "symmetric walk on 0..5 with both barriers mapped to the end; finite and almost surely terminating",
        (
            CertEntry("variant", "bounded_walk.variant.cert", None, "VerifiedComplete"),
            CertEntry("silower", "bounded_walk.silower.cert", None, "VerifiedComplete"),
            CertEntry("siast", "bounded_walk.siast.cert", None, "VerifiedComplete"),
        ),
        phis=("x < 5", "x > 1"),
    ),
    "kappa_analogue": ExampleEntry(
        "kappa_analogue",
        "analogue of a program that terminates with probability exactly 1/2 although every state "
        "is a few steps from the end",
        (),
        phis=("x2 < 64",),
        notes=("survival after i rounds is 1/2 + 2^-(i+1); at k = 60 the value is 1/2 - 2^-30",
               "reconstructed from prose constraints; labelled an analogue"),
    ),
}


def get_example(name: str) -> ExampleEntry:
    try:
        return _ENTRIES[name]
    except KeyError:
        raise UnknownExample(name, NAMES) from None


def all_examples() -> list[ExampleEntry]:
    return [_ENTRIES[n] for n in NAMES]
