"""Pulse-sequence events, a small text DSL, and sequence execution.

Grammar (one event per line, ``#`` starts a comment)::

    pulse <label>[,<label>...] <angle_deg> <axis>
    delay <seconds>
    delay 1/(<k>*J(<labelA>,<labelB>))
    grad

Angles are degrees in the text and radians internally.  The two delay forms
differ in scope: a numeric delay evolves every tabulated coupling, while the
quotient form evolves only the named pair (everything else treated as
refocused) and resolves its duration against the register's coupling table
at run/compile time.  Both forms ignore chemical-shift evolution, the
idealization of delays embedded in echoes.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .engine import (
    DensityState,
    ROTATION_AXES,
    RotationSpec,
    apply_gradient,
    apply_rotation,
    evolve_coupling,
    rotation_unitary,
)
from .spinsys import CouplingMask, SpinSystem, hamiltonian_diagonal

__all__ = [
    "SequenceError",
    "Rotation",
    "Delay",
    "Gradient",
    "Event",
    "Sequence",
    "parse_sequence",
    "render_sequence",
    "run_sequence",
    "compile_unitary",
]


class SequenceError(ValueError):
    """Raised for malformed sequence text, with source position attached."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Rotation:
    """Hard pulse on one or more spins."""

    targets: tuple[str, ...]
    axis: str
    angle_rad: float

    def __post_init__(self) -> None:
        # reuse the pulse validation rules
        RotationSpec(self.targets, self.axis, self.angle_rad)

    def spec(self) -> RotationSpec:
        return RotationSpec(self.targets, self.axis, self.angle_rad)


@dataclass(frozen=True)
class Delay:
    """Free-evolution interval.

    Exactly one of ``seconds`` (literal duration, all couplings active) or
    ``j_factor``/``j_pair`` (duration ``1/(j_factor * J(pair))``, only that
    pair active) is set.
    """

    seconds: float | None = None
    j_factor: float | None = None
    j_pair: tuple[str, str] | None = None

    def __post_init__(self) -> None:
        literal = self.seconds is not None
        quotient = self.j_factor is not None or self.j_pair is not None
        if literal == quotient:
            raise ValueError("delay needs either seconds or a coupling quotient")
        if literal:
            if self.seconds <= 0:
                raise ValueError(f"delay must be positive, got {self.seconds}")
        else:
            if self.j_factor is None or self.j_pair is None:
                raise ValueError("coupling quotient needs both factor and pair")
            if self.j_factor <= 0:
                raise ValueError(f"quotient factor must be positive, got {self.j_factor}")
            if self.j_pair[0] == self.j_pair[1]:
                raise ValueError(f"degenerate coupling pair {self.j_pair}")

    @property
    def mask(self) -> CouplingMask | None:
        """Couplings active during the delay (``None`` means all)."""
        if self.j_pair is None:
            return None
        return CouplingMask.of(self.j_pair)

    def resolve(self, system: SpinSystem) -> float:
        """Duration in seconds, looking up the coupling when needed."""
        if self.seconds is not None:
            return self.seconds
        a, b = self.j_pair
        j = system.j(a, b)
        if j == 0.0:
            raise ValueError(f"delay needs a nonzero coupling J({a},{b})")
        if j < 0.0:
            raise ValueError(
                f"delay quotient needs a positive coupling, J({a},{b}) = {j}"
            )
        return 1.0 / (self.j_factor * j)


@dataclass(frozen=True)
class Gradient:
    """Ideal dephasing gradient (coherence filter)."""


Event = Union[Rotation, Delay, Gradient]


@dataclass(frozen=True)
class Sequence:
    """Ordered list of events, optionally named for reports."""

    events: tuple[Event, ...]
    name: str = ""

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __add__(self, other: "Sequence") -> "Sequence":
        return Sequence(self.events + other.events, self.name or other.name)


_QUOTIENT_RE = re.compile(
    r"^1/\((\d+(?:\.\d+)?)\*J\((\w+),(\w+)\)\)$"
)


def _tokens_with_columns(line: str) -> list[tuple[str, int]]:
    out = []
    for match in re.finditer(r"\S+", line):
        out.append((match.group(0), match.start() + 1))
    return out


def parse_sequence(
    text: str, system: SpinSystem | None = None, name: str = ""
) -> Sequence:
    """Parse sequence text; label existence is checked when ``system`` is
    given (durations still resolve later, at run/compile time)."""
    events: list[Event] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        tokens = _tokens_with_columns(line)
        if not tokens:
            continue
        (keyword, col0) = tokens[0]

        if keyword == "pulse":
            if len(tokens) != 4:
                raise SequenceError(
                    "pulse needs: pulse <targets> <angle_deg> <axis>", lineno, col0
                )
            (targets_s, tcol), (angle_s, acol), (axis, xcol) = tokens[1:]
            targets = tuple(t for t in targets_s.split(","))
            if any(not t for t in targets):
                raise SequenceError("empty label in target list", lineno, tcol)
            if len(set(targets)) != len(targets):
                raise SequenceError("repeated target label", lineno, tcol)
            if system is not None:
                for t in targets:
                    try:
                        system.index(t)
                    except KeyError:
                        raise SequenceError(f"unknown spin {t!r}", lineno, tcol)
            try:
                angle_deg = float(angle_s)
            except ValueError:
                raise SequenceError(f"bad angle {angle_s!r}", lineno, acol)
            if axis not in ROTATION_AXES:
                raise SequenceError(
                    f"axis must be one of {ROTATION_AXES}, got {axis!r}", lineno, xcol
                )
            events.append(Rotation(targets, axis, math.radians(angle_deg)))

        elif keyword == "delay":
            if len(tokens) != 2:
                raise SequenceError("delay needs exactly one argument", lineno, col0)
            arg, acol = tokens[1]
            quotient = _QUOTIENT_RE.match(arg)
            if quotient:
                factor = float(quotient.group(1))
                pair = (quotient.group(2), quotient.group(3))
                if system is not None:
                    for t in pair:
                        try:
                            system.index(t)
                        except KeyError:
                            raise SequenceError(f"unknown spin {t!r}", lineno, acol)
                try:
                    events.append(Delay(j_factor=factor, j_pair=pair))
                except ValueError as exc:
                    raise SequenceError(str(exc), lineno, acol)
            else:
                try:
                    seconds = float(arg)
                except ValueError:
                    raise SequenceError(
                        f"bad delay {arg!r}: expected seconds or 1/(k*J(a,b))",
                        lineno, acol,
                    )
                if seconds <= 0:
                    raise SequenceError(
                        f"delay must be positive, got {arg}", lineno, acol
                    )
                events.append(Delay(seconds=seconds))

        elif keyword == "grad":
            if len(tokens) != 1:
                raise SequenceError("grad takes no arguments", lineno, col0)
            events.append(Gradient())

        else:
            raise SequenceError(
                f"unknown event {keyword!r} (expected pulse, delay, or grad)",
                lineno, col0,
            )
    return Sequence(tuple(events), name=name)


def _number(value: float) -> str:
    """Canonical numeric rendering: 12 significant digits, no trailing cruft."""
    return f"{value:.12g}"


def render_sequence(sequence: Sequence) -> str:
    """Render events back to DSL text; re-parsing yields equal events."""
    lines = []
    for event in sequence.events:
        if isinstance(event, Rotation):
            lines.append(
                f"pulse {','.join(event.targets)} "
                f"{_number(math.degrees(event.angle_rad))} {event.axis}"
            )
        elif isinstance(event, Delay):
            if event.seconds is not None:
                lines.append(f"delay {_number(event.seconds)}")
            else:
                a, b = event.j_pair
                lines.append(f"delay 1/({_number(event.j_factor)}*J({a},{b}))")
        elif isinstance(event, Gradient):
            lines.append("grad")
        else:
            raise TypeError(f"unknown event type {type(event).__name__}")
    return "\n".join(lines) + ("\n" if lines else "")


def run_sequence(
    state: DensityState, sequence: Sequence, system: SpinSystem
) -> DensityState:
    """Apply every event in order and return the final state."""
    current = state
    for event in sequence.events:
        if isinstance(event, Rotation):
            current = apply_rotation(current, event.spec(), system)
        elif isinstance(event, Delay):
            current = evolve_coupling(
                current, event.resolve(system), system, event.mask
            )
        elif isinstance(event, Gradient):
            current = apply_gradient(current)
        else:
            raise TypeError(f"unknown event type {type(event).__name__}")
    return current


def compile_unitary(sequence: Sequence, system: SpinSystem) -> np.ndarray:
    """Total unitary of a gradient-free sequence (left factor = last event).

    Raises ``ValueError`` when the sequence contains a gradient, which is
    not a unitary operation.
    """
    dim = 2 ** system.n_spins
    total = np.eye(dim, dtype=complex)
    for event in sequence.events:
        if isinstance(event, Rotation):
            u = rotation_unitary(system, event.spec())
        elif isinstance(event, Delay):
            diag = hamiltonian_diagonal(system, event.mask, include_offsets=False)
            u = np.diag(np.exp(-1j * diag * event.resolve(system)))
        elif isinstance(event, Gradient):
            raise ValueError("sequence contains a gradient; no unitary exists")
        else:
            raise TypeError(f"unknown event type {type(event).__name__}")
        total = u @ total
    return total
