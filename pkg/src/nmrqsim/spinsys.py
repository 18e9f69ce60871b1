"""Spin registers, scalar couplings, and the weak-coupling Hamiltonian.

A register is an ordered list of labelled spin-1/2 nuclei with rotating-frame
offsets plus a symmetric table of scalar couplings.  Registers load from a
small two-section text format::

    [spins]
    # label  species   offset_hz  moment
    C1       carbon13    -1893.2  1.0

    [couplings]
    # pair     j_hz
    C1  C2     41.6

The internal Hamiltonian is diagonal in the Zeeman product basis (weak
coupling throughout):

    H = sum_i 2*pi*offset_i * Iz_i  +  sum_(i<j in mask) 2*pi*J_ij * Iz_i*Iz_j

Coupling masks select which pairs contribute; delays inside pulse sequences
use them to model refocusing of everything outside the active pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .prodop import OperatorExpansion, ProductTerm

__all__ = [
    "SPECIES",
    "ConfigError",
    "Spin",
    "SpinSystem",
    "CouplingMask",
    "load_spin_system",
    "load_spin_system_file",
    "bundled_system_path",
    "serialize_spin_system",
    "thermal_state",
    "free_hamiltonian",
    "hamiltonian_diagonal",
]

#: Nucleus kinds the simulator knows about.
SPECIES = ("proton", "carbon13")


class ConfigError(ValueError):
    """Raised for malformed register files, with source position attached."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Spin:
    """One nucleus: identity, rotating-frame offset, equilibrium weight."""

    label: str
    species: str
    offset_hz: float
    moment: float

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("spin label must be non-empty")
        if self.species not in SPECIES:
            raise ValueError(
                f"unknown species {self.species!r}; expected one of {SPECIES}"
            )
        if self.moment <= 0:
            raise ValueError(f"moment must be positive, got {self.moment}")


def _pair_key(a: str, b: str) -> tuple[str, str]:
    """Order-independent dictionary key for a coupling pair."""
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class SpinSystem:
    """Immutable register of spins plus their scalar-coupling table."""

    spins: tuple[Spin, ...]
    couplings: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.spins:
            raise ValueError("register needs at least one spin")
        labels = [s.label for s in self.spins]
        if len(set(labels)) != len(labels):
            dupes = sorted({l for l in labels if labels.count(l) > 1})
            raise ValueError(f"duplicate spin labels: {dupes}")
        known = set(labels)
        normalized: dict[tuple[str, str], float] = {}
        for (a, b), j in dict(self.couplings).items():
            if a == b:
                raise ValueError(f"spin {a!r} cannot couple to itself")
            for lbl in (a, b):
                if lbl not in known:
                    raise ValueError(f"coupling references unknown spin {lbl!r}")
            key = _pair_key(a, b)
            if key in normalized and normalized[key] != j:
                raise ValueError(
                    f"conflicting couplings for pair {key}: "
                    f"{normalized[key]} vs {j}"
                )
            normalized[key] = float(j)
        object.__setattr__(self, "couplings", normalized)

    @property
    def n_spins(self) -> int:
        return len(self.spins)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.spins)

    def index(self, label: str) -> int:
        for i, s in enumerate(self.spins):
            if s.label == label:
                return i
        raise KeyError(f"no spin labelled {label!r}")

    def spin(self, label: str) -> Spin:
        return self.spins[self.index(label)]

    def j(self, a: str, b: str) -> float:
        """Scalar coupling between two labelled spins (0 when untabulated)."""
        self.index(a)
        self.index(b)
        if a == b:
            raise ValueError(f"spin {a!r} has no self-coupling")
        return self.couplings.get(_pair_key(a, b), 0.0)

    def coupled_pairs(self) -> tuple[tuple[str, str], ...]:
        """Pairs with a nonzero tabulated coupling, in index order."""
        pairs = []
        for key, j in self.couplings.items():
            if j != 0.0:
                i0, i1 = sorted(self.index(l) for l in key)
                pairs.append(((i0, i1), (self.labels[i0], self.labels[i1])))
        return tuple(p for _, p in sorted(pairs))

    def subsystem(self, labels: Iterable[str]) -> "SpinSystem":
        """Register restricted to ``labels`` (in the order given), keeping
        only couplings internal to the selection."""
        picked = tuple(self.spin(l) for l in labels)
        keep = {s.label for s in picked}
        if len(keep) != len(picked):
            raise ValueError("subsystem labels must be distinct")
        sub = {
            key: j for key, j in self.couplings.items()
            if key[0] in keep and key[1] in keep
        }
        return SpinSystem(picked, sub)


@dataclass(frozen=True)
class CouplingMask:
    """Selection of coupling pairs allowed to evolve.

    Pairs are stored order-normalized; membership is label-based so a mask
    built for a register also applies to any subsystem containing the pair.
    """

    pairs: frozenset[tuple[str, str]]

    @classmethod
    def of(cls, *pairs: tuple[str, str]) -> "CouplingMask":
        normalized = set()
        for a, b in pairs:
            if a == b:
                raise ValueError(f"mask pair ({a!r}, {b!r}) is degenerate")
            normalized.add(_pair_key(a, b))
        return cls(frozenset(normalized))

    @classmethod
    def none(cls) -> "CouplingMask":
        return cls(frozenset())

    @classmethod
    def all_pairs(cls, system: SpinSystem) -> "CouplingMask":
        return cls(frozenset(_pair_key(a, b) for (a, b) in system.coupled_pairs()))

    def contains(self, a: str, b: str) -> bool:
        return _pair_key(a, b) in self.pairs

    def validate(self, system: SpinSystem) -> None:
        for a, b in self.pairs:
            system.index(a)
            system.index(b)


# --- configuration text format ------------------------------------------


def load_spin_system(text: str) -> SpinSystem:
    """Parse register text in the two-section format.

    Raises :class:`ConfigError` (with line/column) for unknown sections,
    malformed rows, unknown species, duplicate labels, couplings naming
    unknown spins, and pairs tabulated twice with different values.
    """
    spins: list[Spin] = []
    couplings: dict[tuple[str, str], float] = {}
    seen_labels: set[str] = set()
    section: str | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        col = len(line) - len(line.lstrip()) + 1

        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("unterminated section header", lineno, col)
            name = stripped[1:-1].strip()
            if name not in ("spins", "couplings"):
                raise ConfigError(f"unknown section [{name}]", lineno, col)
            section = name
            continue

        if section is None:
            raise ConfigError("content before any section header", lineno, col)

        fields = stripped.split()
        if section == "spins":
            if len(fields) != 4:
                raise ConfigError(
                    f"spin row needs 4 fields (label species offset_hz moment), "
                    f"got {len(fields)}",
                    lineno, col,
                )
            label, species, offset_s, moment_s = fields
            if label in seen_labels:
                raise ConfigError(f"duplicate spin label {label!r}", lineno, col)
            if species not in SPECIES:
                raise ConfigError(
                    f"unknown species {species!r}; expected one of {SPECIES}",
                    lineno, col + len(label) + 1,
                )
            try:
                offset = float(offset_s)
                moment = float(moment_s)
            except ValueError:
                raise ConfigError("offset and moment must be numeric", lineno, col)
            if moment <= 0:
                raise ConfigError("moment must be positive", lineno, col)
            spins.append(Spin(label, species, offset, moment))
            seen_labels.add(label)
        else:
            if len(fields) != 3:
                raise ConfigError(
                    f"coupling row needs 3 fields (labelA labelB j_hz), "
                    f"got {len(fields)}",
                    lineno, col,
                )
            a, b, j_s = fields
            for lbl in (a, b):
                if lbl not in seen_labels:
                    raise ConfigError(
                        f"coupling references unknown spin {lbl!r}", lineno, col
                    )
            if a == b:
                raise ConfigError(f"spin {a!r} cannot couple to itself", lineno, col)
            try:
                j = float(j_s)
            except ValueError:
                raise ConfigError("coupling value must be numeric", lineno, col)
            key = _pair_key(a, b)
            if key in couplings and couplings[key] != j:
                raise ConfigError(
                    f"pair {key} tabulated twice with conflicting values "
                    f"({couplings[key]} vs {j})",
                    lineno, col,
                )
            couplings[key] = j

    if not spins:
        raise ConfigError("no [spins] rows found", 1)
    return SpinSystem(tuple(spins), couplings)


def load_spin_system_file(path: str | Path) -> SpinSystem:
    return load_spin_system(Path(path).read_text(encoding="utf-8"))


def bundled_system_path() -> Path:
    """Filesystem path of the packaged seven-spin register."""
    return Path(resources.files("nmrqsim").joinpath("data/crotonic_acid.cfg"))


def serialize_spin_system(system: SpinSystem) -> str:
    """Render a register in canonical config text (parses back equal)."""
    lines = ["[spins]"]
    for s in system.spins:
        lines.append(
            f"{s.label}  {s.species}  {s.offset_hz!r}  {s.moment!r}"
        )
    lines.append("")
    lines.append("[couplings]")
    ordered = sorted(
        system.couplings.items(),
        key=lambda kv: tuple(sorted(system.index(l) for l in kv[0])),
    )
    for (a, b), j in ordered:
        if system.index(a) > system.index(b):
            a, b = b, a
        lines.append(f"{a}  {b}  {j!r}")
    lines.append("")
    return "\n".join(lines)


# --- Hamiltonian and thermal state ----------------------------------------


def thermal_state(system: SpinSystem) -> OperatorExpansion:
    """High-temperature equilibrium deviation: one Iz per spin, weighted by
    its moment."""
    terms = {
        ProductTerm.build(system.n_spins, {i: "z"}): spin.moment
        for i, spin in enumerate(system.spins)
    }
    return OperatorExpansion(system.n_spins, terms)


def _z_half(n_spins: int, index: int) -> np.ndarray:
    """Diagonal of Iz for one spin: +1/2 or -1/2 per basis state."""
    dim = 2 ** n_spins
    states = np.arange(dim)
    bit = (states >> (n_spins - 1 - index)) & 1
    return 0.5 - bit.astype(float)


def hamiltonian_diagonal(
    system: SpinSystem,
    mask: CouplingMask | None = None,
    include_offsets: bool = True,
) -> np.ndarray:
    """Diagonal of the internal Hamiltonian in rad/s.

    ``mask`` limits which coupling pairs contribute; ``None`` means all
    tabulated pairs.  Offsets can be switched off to model delays whose
    chemical-shift evolution is refocused.
    """
    if mask is None:
        mask = CouplingMask.all_pairs(system)
    mask.validate(system)
    diag = np.zeros(2 ** system.n_spins)
    if include_offsets:
        for i, spin in enumerate(system.spins):
            diag += 2.0 * np.pi * spin.offset_hz * _z_half(system.n_spins, i)
    for a, b in mask.pairs:
        j = system.j(a, b)
        if j == 0.0:
            continue
        za = _z_half(system.n_spins, system.index(a))
        zb = _z_half(system.n_spins, system.index(b))
        diag += 2.0 * np.pi * j * za * zb
    return diag


def free_hamiltonian(
    system: SpinSystem, mask: CouplingMask | None = None
) -> np.ndarray:
    """Dense internal Hamiltonian (rad/s): offsets plus masked couplings."""
    return np.diag(hamiltonian_diagonal(system, mask)).astype(complex)
