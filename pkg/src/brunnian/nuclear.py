"""Cluster-separation thresholds from atomic mass excesses.

The threshold for parent -> sum_i k_i fragment_i is

    sum_i k_i ME(fragment_i) - ME(parent)

in MeV. A positive value means the parent lies below the separated
fragments, i.e. it is bound against that breakup. Atomic mass excesses are
used throughout, so electron masses cancel once charge is balanced.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

ELEMENTS = (
    "n H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn Ga Ge As Se Br Kr "
    "Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb "
    "Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U"
).split()
CHARGE = {sym: z for z, sym in enumerate(ELEMENTS)}
ALIASES = {"n": ("n", 1), "p": ("H", 1), "d": ("H", 2), "t": ("H", 3), "alpha": ("He", 4), "a": ("He", 4)}
FLAG_TEXT = {"#": "extrapolated mass", "u": "unbound nuclide"}


class NuclearError(ValueError):
    pass


@dataclass(frozen=True)
class Nuclide:
    symbol: str
    mass_number: int

    def __post_init__(self):
        if self.symbol not in CHARGE:
            raise NuclearError(f"nuclear: unknown element symbol {self.symbol!r}")
        if self.mass_number < 1:
            raise NuclearError("nuclear: mass number must be at least 1")

    @property
    def charge(self) -> int:
        return CHARGE[self.symbol]

    def __str__(self) -> str:
        return "n" if self.symbol == "n" else f"{self.mass_number}{self.symbol}"

    @classmethod
    def parse(cls, text: str) -> "Nuclide":
        text = text.strip()
        if text in ALIASES:
            return cls(*ALIASES[text])
        m = re.fullmatch(r"(\d+)\s*([A-Za-z]+)|([A-Za-z]+)-?(\d+)", text)
        if not m:
            raise NuclearError(f"nuclear: cannot parse nuclide {text!r}")
        a, sym = (m.group(1), m.group(2)) if m.group(1) else (m.group(4), m.group(3))
        sym = sym if sym == "n" else sym.capitalize()
        return cls(sym, int(a))


@dataclass(frozen=True)
class NuclideEntry:
    nuclide: Nuclide
    mass_excess: float  # keV
    flags: str = ""


class MassTable:
    def __init__(self, entries):
        self.entries: dict[Nuclide, NuclideEntry] = {}
        for e in entries:
            if e.nuclide in self.entries:
                raise NuclearError(f"nuclear: duplicate entry for {e.nuclide}")
            self.entries[e.nuclide] = e

    def __contains__(self, nuclide) -> bool:
        return nuclide in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, nuclide: Nuclide) -> NuclideEntry:
        try:
            return self.entries[nuclide]
        except KeyError:
            raise NuclearError(f"nuclear: missing nuclide {nuclide} in mass table") from None

    def merged(self, other: "MassTable") -> "MassTable":
        merged = dict(self.entries)
        merged.update(other.entries)
        return MassTable(merged.values())


def parse_table(text: str) -> MassTable:
    """Parse 'symbol massnumber mass_excess_keV [flags]' records; '#' starts a comment line."""
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise NuclearError(f"nuclear: table line {lineno}: expected 3 or 4 fields, got {len(parts)}")
        try:
            sym = parts[0] if parts[0] == "n" else parts[0].capitalize()
            entries.append(NuclideEntry(Nuclide(sym, int(parts[1])), float(parts[2]), parts[3] if len(parts) == 4 else ""))
        except ValueError as exc:
            raise NuclearError(f"nuclear: table line {lineno}: {exc}") from exc
    return MassTable(entries)


def load_table(path: str | Path | None = None) -> MassTable:
    """The embedded table, or a user file merged over it."""
    embedded = parse_table(resources.files("brunnian").joinpath("data/mass_excess.txt").read_text())
    if path is None:
        return embedded
    return embedded.merged(parse_table(Path(path).read_text()))


@dataclass(frozen=True)
class ThresholdQuery:
    parent: Nuclide
    fragments: tuple[tuple[Nuclide, int], ...]

    def __post_init__(self):
        if not self.fragments:
            raise NuclearError("nuclear: query needs at least one fragment")
        a = sum(k * f.mass_number for f, k in self.fragments)
        z = sum(k * f.charge for f, k in self.fragments)
        if a != self.parent.mass_number or z != self.parent.charge:
            raise NuclearError(
                f"nuclear: unbalanced query {self}: fragments carry A={a}, Z={z}, "
                f"parent has A={self.parent.mass_number}, Z={self.parent.charge}"
            )

    @classmethod
    def parse(cls, text: str) -> "ThresholdQuery":
        """Parse queries such as ``"18C -> 3*6He"`` or ``"10C -> 2*4He + 2p"``."""
        if "->" not in text:
            raise NuclearError(f"nuclear: query {text!r} must look like 'parent -> k*fragment + ...'")
        lhs, rhs = text.split("->", 1)
        frags = []
        for term in rhs.split("+"):
            frags.append(_fragment(term))
        return cls(Nuclide.parse(lhs), tuple(frags))

    def __str__(self) -> str:
        rhs = " + ".join(f"{k}*{f}" if k > 1 else str(f) for f, k in self.fragments)
        return f"{self.parent} -> {rhs}"


def _fragment(term: str) -> tuple[Nuclide, int]:
    """'3*6He', '3 alpha', '2p' or '9Be' -> (nuclide, multiplicity)."""
    term = term.strip()
    if "*" in term:
        k, name = term.split("*", 1)
    elif m := re.fullmatch(r"(\d+)\s+(\S+)", term):
        k, name = m.groups()
    elif m := re.fullmatch(r"(\d+)(n|p|d|t|alpha)", term):
        k, name = m.groups()
    else:
        k, name = "1", term
    try:
        k = int(k)
    except ValueError:
        raise NuclearError(f"nuclear: bad multiplicity in {term!r}") from None
    if k < 1:
        raise NuclearError(f"nuclear: multiplicity must be positive in {term!r}")
    return Nuclide.parse(name), k


@dataclass(frozen=True)
class ThresholdResult:
    query: ThresholdQuery
    energy: float  # MeV
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"query": str(self.query), "threshold_MeV": self.energy, "flags": list(self.flags)}

    def __str__(self) -> str:
        tail = f"  [{'; '.join(self.flags)}]" if self.flags else ""
        return f"{self.query}: {self.energy:.2f} MeV{tail}"


def threshold_energy(query: ThresholdQuery | str, table: MassTable | None = None) -> float:
    """Breakup threshold in MeV."""
    return evaluate_query(query, table).energy


def evaluate_query(query: ThresholdQuery | str, table: MassTable | None = None) -> ThresholdResult:
    if isinstance(query, str):
        query = ThresholdQuery.parse(query)
    table = table if table is not None else load_table()
    parent = table[query.parent]
    total = sum(k * table[f].mass_excess for f, k in query.fragments) - parent.mass_excess
    flags = []
    for role, entry in [("parent", parent)] + [("fragment", table[f]) for f, _ in query.fragments]:
        for ch in entry.flags:
            if ch in FLAG_TEXT:
                note = f"{role} {entry.nuclide}: {FLAG_TEXT[ch]}"
                if note not in flags:
                    flags.append(note)
    return ThresholdResult(query, total / 1000.0, tuple(flags))
