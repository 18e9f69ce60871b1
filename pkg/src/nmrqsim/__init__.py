"""Liquid-state NMR quantum-computing simulator.

Product-operator state representation, hard pulses and coupling evolution
over labelled spin registers, composite-pulse controlled gates with an
equivalence checker, a two-channel phase-measurement experiment with
closed-loop calibration, and FID/spectrum synthesis for figure-like output.
"""

from .engine import (
    DensityState,
    RotationSpec,
    apply_gradient,
    apply_rotation,
    evolve_coupling,
    evolve_free,
    expectation,
)
from .gates import (
    GateParams,
    GateReport,
    canonical_phase,
    cnot_matrix,
    composite_z,
    controlled_root_not,
    controlled_root_not_matrix,
    cphase_matrix,
    equivalence_level,
    equivalent_up_to_diagonal_phases,
    equivalent_up_to_global_phase,
    verify_gate,
)
from .prodop import (
    OperatorExpansion,
    ProductTerm,
    format_expansion,
    from_dense,
    to_dense,
)
from .readout import (
    FID,
    IDEAL,
    CalibrationError,
    CalibrationResult,
    CalibrationRound,
    GateErrorModel,
    PhaseEstimate,
    Spectrum,
    acquire_fid,
    calibrate_phase,
    estimate_phase,
    estimate_phase_from_magnitudes,
    integrate,
    measure_phase_signals,
    phase_experiment_sequence,
    run_phase_experiment,
    spectrum,
)
from .sequence import (
    Delay,
    Gradient,
    Rotation,
    Sequence,
    SequenceError,
    compile_unitary,
    parse_sequence,
    render_sequence,
    run_sequence,
)
from .spinsys import (
    ConfigError,
    CouplingMask,
    Spin,
    SpinSystem,
    bundled_system_path,
    free_hamiltonian,
    hamiltonian_diagonal,
    load_spin_system,
    load_spin_system_file,
    serialize_spin_system,
    thermal_state,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # spin systems
    "Spin", "SpinSystem", "CouplingMask", "ConfigError",
    "load_spin_system", "load_spin_system_file", "bundled_system_path",
    "serialize_spin_system", "thermal_state", "free_hamiltonian",
    "hamiltonian_diagonal",
    # product operators
    "ProductTerm", "OperatorExpansion", "to_dense", "from_dense",
    "format_expansion",
    # engine
    "DensityState", "RotationSpec", "apply_rotation", "evolve_free",
    "evolve_coupling", "apply_gradient", "expectation",
    # sequences
    "Rotation", "Delay", "Gradient", "Sequence", "SequenceError",
    "parse_sequence", "render_sequence", "run_sequence", "compile_unitary",
    # gates
    "GateParams", "GateReport", "canonical_phase", "composite_z",
    "controlled_root_not", "cphase_matrix", "cnot_matrix",
    "controlled_root_not_matrix", "equivalent_up_to_global_phase",
    "equivalent_up_to_diagonal_phases", "equivalence_level", "verify_gate",
    # readout
    "GateErrorModel", "IDEAL", "PhaseEstimate", "estimate_phase",
    "estimate_phase_from_magnitudes", "phase_experiment_sequence",
    "run_phase_experiment", "measure_phase_signals", "CalibrationRound",
    "CalibrationResult", "CalibrationError", "calibrate_phase", "FID",
    "Spectrum", "acquire_fid", "spectrum", "integrate",
]
