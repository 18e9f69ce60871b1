"""Density-matrix propagation: pulses, free evolution, gradients, traces.

Conventions, fixed across the package:

* A rotation about ``axis`` by ``angle`` applies ``exp(-1j * angle * I_axis)``
  to every targeted spin, so a positive x rotation sends Iz toward -Iy.
* Free evolution for time ``t`` maps ``rho -> exp(-1j*H*t) rho exp(+1j*H*t)``
  with the weak-coupling Hamiltonian, which is diagonal here; evolution is
  therefore elementwise phase multiplication, never a matrix exponential.
* The gradient model is an ideal coherence filter: it zeroes every matrix
  element connecting basis states of different total magnetic quantum
  number and is exactly idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prodop import OperatorExpansion, SPIN_HALF, from_dense, to_dense
from .spinsys import CouplingMask, SpinSystem, hamiltonian_diagonal

__all__ = [
    "ROTATION_AXES",
    "DensityState",
    "RotationSpec",
    "apply_rotation",
    "evolve_free",
    "evolve_coupling",
    "apply_gradient",
    "expectation",
]

#: Axis tokens accepted by pulses.  Signed axes flip the rotation sense.
ROTATION_AXES = ("x", "y", "z", "-x", "-y")

_HERMITICITY_TOL = 1e-9


@dataclass(frozen=True)
class DensityState:
    """Deviation density matrix for a register of ``n_spins`` nuclei."""

    n_spins: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        dim = 2 ** self.n_spins
        if self.matrix.shape != (dim, dim):
            raise ValueError(
                f"state for {self.n_spins} spins must be {dim}x{dim}, "
                f"got {self.matrix.shape}"
            )
        defect = float(np.max(np.abs(self.matrix - self.matrix.conj().T)))
        if defect > _HERMITICITY_TOL:
            raise ValueError(f"state lost Hermiticity (defect {defect:.3e})")

    @classmethod
    def from_expansion(cls, expansion: OperatorExpansion) -> "DensityState":
        return cls(expansion.n_spins, to_dense(expansion))

    def to_expansion(self, tol: float = 1e-9) -> OperatorExpansion:
        return from_dense(self.matrix, tol=tol)

    def copy(self) -> "DensityState":
        return DensityState(self.n_spins, self.matrix.copy())


@dataclass(frozen=True)
class RotationSpec:
    """A hard pulse: one flip angle applied to one or more spins at once."""

    targets: tuple[str, ...]
    axis: str
    angle_rad: float

    def __post_init__(self) -> None:
        if not self.targets:
            raise ValueError("rotation needs at least one target spin")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"repeated targets in {self.targets}")
        if self.axis not in ROTATION_AXES:
            raise ValueError(
                f"axis must be one of {ROTATION_AXES}, got {self.axis!r}"
            )


def single_spin_rotation(axis: str, angle_rad: float) -> np.ndarray:
    """2x2 unitary exp(-1j * angle * I_axis) for a signed axis token."""
    if axis not in ROTATION_AXES:
        raise ValueError(f"axis must be one of {ROTATION_AXES}, got {axis!r}")
    sign = -1.0 if axis.startswith("-") else 1.0
    generator = SPIN_HALF[axis.lstrip("-")]
    half = 0.5 * angle_rad * sign
    return np.cos(half) * np.eye(2) - 2j * np.sin(half) * generator


def rotation_unitary(
    system: SpinSystem, spec: RotationSpec
) -> np.ndarray:
    """Full-register unitary of a hard pulse (identity on spectators)."""
    targets = {system.index(label) for label in spec.targets}
    u2 = single_spin_rotation(spec.axis, spec.angle_rad)
    out = np.ones((1, 1), dtype=complex)
    for i in range(system.n_spins):
        out = np.kron(out, u2 if i in targets else np.eye(2, dtype=complex))
    return out


def apply_rotation(
    state: DensityState, spec: RotationSpec, system: SpinSystem
) -> DensityState:
    """Conjugate the state by a hard pulse."""
    if state.n_spins != system.n_spins:
        raise ValueError("state and register sizes differ")
    u = rotation_unitary(system, spec)
    return DensityState(state.n_spins, u @ state.matrix @ u.conj().T)


def _evolve_diagonal(
    state: DensityState, diag_rad: np.ndarray, duration_s: float
) -> DensityState:
    phases = np.exp(-1j * diag_rad * duration_s)
    # U rho U^dagger with diagonal U is an outer phase product
    new = state.matrix * np.outer(phases, phases.conj())
    return DensityState(state.n_spins, new)


def evolve_free(
    state: DensityState,
    duration_s: float,
    system: SpinSystem,
    mask: CouplingMask | None = None,
) -> DensityState:
    """Evolve under offsets plus the masked couplings for ``duration_s``."""
    if duration_s < 0:
        raise ValueError(f"duration must be non-negative, got {duration_s}")
    if state.n_spins != system.n_spins:
        raise ValueError("state and register sizes differ")
    diag = hamiltonian_diagonal(system, mask, include_offsets=True)
    return _evolve_diagonal(state, diag, duration_s)


def evolve_coupling(
    state: DensityState,
    duration_s: float,
    system: SpinSystem,
    mask: CouplingMask | None = None,
) -> DensityState:
    """Evolve under the masked couplings only.

    Chemical-shift evolution is treated as refocused, the idealization of a
    delay embedded in an echo.  Sequence delays use this path.
    """
    if duration_s < 0:
        raise ValueError(f"duration must be non-negative, got {duration_s}")
    if state.n_spins != system.n_spins:
        raise ValueError("state and register sizes differ")
    diag = hamiltonian_diagonal(system, mask, include_offsets=False)
    return _evolve_diagonal(state, diag, duration_s)


def apply_gradient(state: DensityState) -> DensityState:
    """Ideal dephasing gradient: keep only elements between basis states of
    equal total magnetic quantum number (equal excitation count)."""
    dim = state.matrix.shape[0]
    counts = np.array([bin(i).count("1") for i in range(dim)])
    keep = counts[:, None] == counts[None, :]
    return DensityState(state.n_spins, np.where(keep, state.matrix, 0.0))


def expectation(state: DensityState, observable: OperatorExpansion) -> float:
    """Trace inner product Tr(rho @ O) for a product-operator observable.

    Raises if the accumulated imaginary part exceeds tolerance, which would
    signal a non-Hermitian state or observable.
    """
    if observable.n_spins != state.n_spins:
        raise ValueError("observable and state sizes differ")
    value = 0.0 + 0.0j
    for term, coeff in observable.terms.items():
        value += coeff * np.trace(state.matrix @ term.matrix())
    if abs(value.imag) > 1e-8 * max(1.0, abs(value.real)):
        raise ValueError(
            f"expectation value is not real (imag {value.imag:.3e})"
        )
    return float(value.real)
