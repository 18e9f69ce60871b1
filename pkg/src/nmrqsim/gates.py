"""Two-spin gates built from pulses and coupling evolution.

The central construction is a composite z-rotation: a coupling-evolution
echo bracketed by hard pulses.  The echo (half delay, simultaneous 180x,
half delay, second 180x) lets the scalar coupling of the active pair act
for a total of ``1/(2nJ)`` seconds while offsets and the 180s themselves
cancel, and the closing x/y/x pulse triplet converts a y rotation into the
z rotation no probe coil can drive directly.  Attaching that block between
a pair of opposite y pulses on the target spin yields a controlled gate
whose n-th power is a controlled NOT.

All gate builders return ordinary pulse sequences; nothing here touches a
density matrix directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sequence import Delay, Gradient, Rotation, Sequence, compile_unitary
from .spinsys import SpinSystem

__all__ = [
    "GateParams",
    "canonical_phase",
    "composite_z",
    "controlled_root_not",
    "cphase_matrix",
    "cnot_matrix",
    "controlled_root_not_matrix",
    "equivalent_up_to_global_phase",
    "equivalent_up_to_diagonal_phases",
    "global_phase_deviation",
    "diagonal_phase_deviation",
    "equivalence_level",
    "GateReport",
    "verify_gate",
]


def canonical_phase(n: int) -> float:
    """Composite z angle (radians) that makes the n-th-power identity hold."""
    if n < 1:
        raise ValueError(f"root order must be >= 1, got {n}")
    return -math.pi / n


@dataclass(frozen=True)
class GateParams:
    """Parameters of one controlled gate on a coupled spin pair.

    ``phi_rad`` is the composite z angle applied to both spins; ``None``
    selects the canonical value ``-pi/n``.
    """

    control: str
    target: str
    n: int = 1
    phi_rad: float | None = None

    def __post_init__(self) -> None:
        if self.control == self.target:
            raise ValueError("control and target must be different spins")
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"root order must be an integer >= 1, got {self.n!r}")

    @property
    def phase_rad(self) -> float:
        return canonical_phase(self.n) if self.phi_rad is None else self.phi_rad


def _check_pair(params: GateParams, system: SpinSystem) -> None:
    j = system.j(params.control, params.target)  # validates labels
    if j == 0.0:
        raise ValueError(
            f"no tabulated coupling between {params.control!r} and "
            f"{params.target!r}; the composite gate needs one"
        )
    if j < 0.0:
        raise ValueError(
            f"J({params.control},{params.target}) = {j}; the delay "
            "construction needs a positive coupling"
        )


def composite_z(params: GateParams, system: SpinSystem) -> Sequence:
    """Echoed coupling evolution plus a composite z tail on both spins.

    Seven events: two ``1/(4nJ)`` delays on the active pair, each followed
    by a simultaneous 180x, then the x/y/x triplet realizing
    ``exp(-1j * (phi/2) * Iz)`` on each spin.  The doubled 180 makes the
    echo self-compensating: the pulse pair composes to a global sign, so
    the block's unitary is purely coupling evolution times z rotations.
    """
    _check_pair(params, system)
    pair = (params.control, params.target)
    phi = params.phase_rad
    half = Delay(j_factor=4.0 * params.n, j_pair=pair)
    quarter_turn = math.pi / 2.0
    events = (
        half,
        Rotation(pair, "x", math.pi),
        half,
        Rotation(pair, "x", math.pi),
        Rotation(pair, "x", quarter_turn),
        Rotation(pair, "-y", phi / 2.0),
        Rotation(pair, "-x", quarter_turn),
    )
    return Sequence(events, name=f"cz[{params.control},{params.target};n={params.n}]")


def controlled_root_not(params: GateParams, system: SpinSystem) -> Sequence:
    """Controlled n-th-root-of-NOT: y pulses on the target around the
    composite z block.  With the canonical phase, the n-th power of the
    compiled unitary equals the n = 1 gate up to a global phase."""
    core = composite_z(params, system)
    target = (params.target,)
    quarter_turn = math.pi / 2.0
    events = (
        (Rotation(target, "y", quarter_turn),)
        + core.events
        + (Rotation(target, "-y", quarter_turn),)
    )
    name = f"croot{params.n}[{params.control}->{params.target}]"
    return Sequence(events, name=name)


# --- canonical references (control = first spin, target = second) ---------


def cphase_matrix(phi_rad: float) -> np.ndarray:
    """diag(1, 1, 1, e^{i*phi})."""
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * phi_rad)]).astype(complex)


def cnot_matrix() -> np.ndarray:
    return np.array(
        [
            [1, 0, 0, 0],
            [0, 1, 0, 0],
            [0, 0, 0, 1],
            [0, 0, 1, 0],
        ],
        dtype=complex,
    )


def controlled_root_not_matrix(n: int) -> np.ndarray:
    """Controlled principal n-th root of NOT: the target block has
    eigenvalue 1 on |+> and e^{i*pi/n} on |->."""
    if n < 1:
        raise ValueError(f"root order must be >= 1, got {n}")
    plus = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
    minus = np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex)
    root = plus + np.exp(1j * math.pi / n) * minus
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = np.eye(2)
    out[2:, 2:] = root
    return out


# --- equivalence ladder ----------------------------------------------------


def _check_shapes(u: np.ndarray, v: np.ndarray) -> None:
    if u.shape != v.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"need equal square matrices, got {u.shape} and {v.shape}")


def global_phase_deviation(u: np.ndarray, v: np.ndarray) -> float:
    """max |e^{-i*alpha} V^dag U - 1| with alpha read off the dominant
    element; zero iff U = e^{i*alpha} V."""
    _check_shapes(u, v)
    m = v.conj().T @ u
    peak = m.flat[np.argmax(np.abs(m))]
    if abs(peak) == 0.0:
        return float("inf")
    phase = peak / abs(peak)
    return float(np.max(np.abs(m / phase - np.eye(m.shape[0]))))


def diagonal_phase_deviation(u: np.ndarray, v: np.ndarray) -> float:
    """Distance of V U^dag from the diagonal unitaries: the larger of the
    biggest off-diagonal magnitude and the worst diagonal modulus defect.
    Zero iff D U = V for some diagonal unitary D."""
    _check_shapes(u, v)
    m = v @ u.conj().T
    off = m - np.diag(np.diag(m))
    dev_off = float(np.max(np.abs(off)))
    dev_mod = float(np.max(np.abs(np.abs(np.diag(m)) - 1.0)))
    return max(dev_off, dev_mod)


def equivalent_up_to_global_phase(
    u: np.ndarray, v: np.ndarray, tol: float = 1e-9
) -> bool:
    return global_phase_deviation(u, v) <= tol


def equivalent_up_to_diagonal_phases(
    u: np.ndarray, v: np.ndarray, tol: float = 1e-9
) -> bool:
    return diagonal_phase_deviation(u, v) <= tol


def equivalence_level(
    u: np.ndarray, v: np.ndarray, tol: float = 1e-9
) -> tuple[str, float]:
    """Strictest equivalence of U to V: ``global``, ``diagonal``, or
    ``none``, together with the deviation at the reported level (the
    diagonal deviation when the answer is ``none``)."""
    gdev = global_phase_deviation(u, v)
    if gdev <= tol:
        return "global", gdev
    ddev = diagonal_phase_deviation(u, v)
    if ddev <= tol:
        return "diagonal", ddev
    return "none", ddev


@dataclass(frozen=True)
class GateReport:
    """Outcome of checking a compiled gate against its canonical form."""

    params: GateParams
    level: str
    deviation: float
    global_deviation: float
    diagonal_deviation: float


def verify_gate(
    system: SpinSystem, params: GateParams, tol: float = 1e-9
) -> GateReport:
    """Compile the controlled gate on the pair subsystem and grade it
    against the canonical controlled n-th-root of NOT."""
    sub = system.subsystem([params.control, params.target])
    unitary = compile_unitary(controlled_root_not(params, sub), sub)
    reference = controlled_root_not_matrix(params.n)
    level, deviation = equivalence_level(unitary, reference, tol)
    return GateReport(
        params=params,
        level=level,
        deviation=deviation,
        global_deviation=global_phase_deviation(unitary, reference),
        diagonal_deviation=diagonal_phase_deviation(unitary, reference),
    )
