import csv
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nmrqsim.engine import DensityState
from nmrqsim.prodop import OperatorExpansion, ProductTerm
from nmrqsim.readout import (
    FID,
    CalibrationError,
    GateErrorModel,
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
    write_calibration_csv,
    write_fid_csv,
    write_spectrum_csv,
    write_sweep_csv,
)
from nmrqsim.sequence import Delay, Gradient, Rotation
from nmrqsim.spinsys import load_spin_system

ONE_SPIN = load_spin_system("[spins]\nA carbon13 250.0 1.0\n")


class TestExperimentSequence:
    def test_ideal_event_list(self, sys7):
        seq = phase_experiment_sequence(sys7, "C1", "C2", 2, math.radians(90.0))
        assert len(seq) == 8
        assert seq.events[0] == Rotation(("C2",), "-y", math.pi / 2)
        assert seq.events[1] == Delay(j_factor=4.0, j_pair=("C1", "C2"))
        assert seq.events[3] == Gradient()
        tail = seq.events[5:]
        assert tail[0] == Rotation(("C2",), "x", math.pi / 2)
        assert tail[1].axis == "-y"
        assert tail[1].angle_rad == pytest.approx(-math.radians(90.0))
        assert tail[2] == Rotation(("C2",), "-x", math.pi / 2)

    def test_read_pulse_appended_on_request(self, sys7):
        seq = phase_experiment_sequence(
            sys7, "C1", "C2", 1, 0.3, read_axis="y"
        )
        assert len(seq) == 9
        assert seq.events[-1] == Rotation(("C2",), "y", math.pi / 2)

    def test_error_model_reshapes_angles(self, sys7):
        error = GateErrorModel(z_offset_rad=0.1, flip_scale=0.9)
        seq = phase_experiment_sequence(sys7, "C1", "C2", 1, 0.5, error)
        assert seq.events[0].angle_rad == pytest.approx(0.9 * math.pi / 2)
        assert seq.events[6].angle_rad == pytest.approx(0.9 * -(0.5 + 0.1))

    def test_validation(self, sys7):
        with pytest.raises(ValueError, match="root order"):
            phase_experiment_sequence(sys7, "C1", "C2", 0, 0.0)
        with pytest.raises(ValueError, match="positive coupling"):
            phase_experiment_sequence(sys7, "C1", "H1", 1, 0.0)
        with pytest.raises(ValueError, match="read axis"):
            phase_experiment_sequence(sys7, "C1", "C2", 1, 0.0, read_axis="z")
        with pytest.raises(ValueError, match="flip scale"):
            GateErrorModel(flip_scale=0.0)


class TestSignals:
    def test_closed_forms_at_thirty_degrees(self, sys7):
        phi = math.radians(30.0)
        sin_s = run_phase_experiment(sys7, "C1", "C2", 1, phi, read_axis="x")
        cos_s = run_phase_experiment(sys7, "C1", "C2", 1, phi, read_axis="y")
        assert sin_s == pytest.approx(0.5, abs=1e-12)
        assert cos_s == pytest.approx(math.sqrt(3) / 2, abs=1e-12)

    def test_root_order_scales_amplitude(self, sys7):
        sin_s, cos_s = measure_phase_signals(
            sys7, "C1", "C2", 2, math.radians(90.0)
        )
        assert sin_s == pytest.approx(math.sin(math.pi / 4), abs=1e-12)
        assert cos_s == pytest.approx(0.0, abs=1e-12)

    def test_target_moment_scales_signal(self, sys7):
        # proton target carries the proton thermal weight
        phi = math.radians(40.0)
        sin_s = run_phase_experiment(sys7, "C2", "H1", 1, phi, read_axis="x")
        assert sin_s == pytest.approx(3.977 * math.sin(phi), abs=1e-12)

    def test_amplitude_identity_across_settings(self, sys7):
        for n in (1, 3):
            for phi_deg in (10.0, 120.0, 260.0, 355.0):
                sin_s, cos_s = measure_phase_signals(
                    sys7, "C1", "C2", n, math.radians(phi_deg)
                )
                assert sin_s**2 + cos_s**2 == pytest.approx(
                    math.sin(math.pi / (2 * n)) ** 2, abs=1e-9
                )


class TestEstimation:
    def test_reference_signal_pairs(self):
        assert estimate_phase(1.00, 0.02).phi_deg == pytest.approx(88.854, abs=1e-3)
        assert estimate_phase(0.09, -1.00).phi_deg == pytest.approx(174.857, abs=1e-3)

    def test_wraps_into_full_turn(self):
        assert estimate_phase(-0.5, math.sqrt(3) / 2).phi_deg == pytest.approx(330.0)

    def test_degenerate_pair_rejected(self):
        with pytest.raises(ValueError, match="vanish"):
            estimate_phase(0.0, 0.0)

    def test_magnitude_mode_resolves_quadrant(self):
        est = estimate_phase_from_magnitudes(1.00, 0.05, 270.0)
        assert est.phi_deg == pytest.approx(267.138, abs=1e-3)
        est = estimate_phase_from_magnitudes(0.07, 1.00, 360.0)
        assert est.phi_deg == pytest.approx(355.996, abs=1e-3)

    def test_magnitude_mode_prefers_earlier_on_ties(self):
        # at nominal 180 the two middle images tie; the earlier one wins
        est = estimate_phase_from_magnitudes(0.5, 0.5, 180.0)
        assert est.phi_deg == pytest.approx(135.0)

    def test_magnitude_mode_degenerate_rejected(self):
        with pytest.raises(ValueError, match="vanish"):
            estimate_phase_from_magnitudes(0.0, 0.0, 90.0)


class TestCalibration:
    def test_ideal_passes_immediately(self, sys7):
        result = calibrate_phase(sys7, "C1", "C2", 1, 90.0)
        assert result.iterations == 0
        assert len(result.history) == 1
        assert abs(result.residual_deg) < 1e-9
        assert result.setting_deg == 90.0

    def test_additive_offset_fixed_in_one_step(self, sys7):
        error = GateErrorModel(z_offset_rad=math.radians(5.0))
        result = calibrate_phase(sys7, "C1", "C2", 1, 90.0, error)
        assert result.iterations == 1
        assert len(result.history) == 2
        assert abs(result.residual_deg) < 1e-6
        assert result.setting_deg == pytest.approx(85.0, abs=1e-6)
        assert result.history[0].residual_deg == pytest.approx(5.0, abs=1e-6)

    def test_flip_error_converges_within_budget(self, sys7):
        error = GateErrorModel(
            z_offset_rad=math.radians(5.0), flip_scale=0.95
        )
        result = calibrate_phase(sys7, "C1", "C2", 2, 90.0, error)
        assert abs(result.residual_deg) <= 0.05
        assert result.iterations <= 3

    def test_budget_exhaustion_raises_with_history(self, sys7):
        error = GateErrorModel(
            z_offset_rad=math.radians(10.0), flip_scale=0.9
        )
        with pytest.raises(CalibrationError) as err:
            calibrate_phase(sys7, "C1", "C2", 1, 90.0, error, max_iter=1)
        assert len(err.value.history) == 1
        assert err.value.history[0].round == 1

    def test_wrapped_residuals_near_full_turn(self, sys7):
        error = GateErrorModel(z_offset_rad=math.radians(4.0))
        result = calibrate_phase(sys7, "C1", "C2", 1, 358.0, error)
        # 358 + 4 wraps past 0; the loop must not chase a 360-degree ghost
        assert result.iterations == 1
        assert abs(result.residual_deg) < 1e-6

    def test_parameter_validation(self, sys7):
        with pytest.raises(ValueError, match="at least one"):
            calibrate_phase(sys7, "C1", "C2", 1, 90.0, max_iter=0)
        with pytest.raises(ValueError, match="tolerance"):
            calibrate_phase(sys7, "C1", "C2", 1, 90.0, tol_deg=0.0)


class TestAcquisition:
    def test_initial_sample_is_trace_overlap(self, pair):
        state = DensityState.from_expansion(
            OperatorExpansion(2, {ProductTerm("ex"): 1.0})
        )
        fid = acquire_fid(state, pair, ["C2"], n_points=4, dwell_s=1e-4)
        assert fid.samples[0] == pytest.approx(1.0 + 0.0j, abs=1e-12)

    def test_single_line_phase_and_decay(self):
        state = DensityState.from_expansion(
            OperatorExpansion(1, {ProductTerm("x"): 1.0})
        )
        t2 = 0.02
        fid = acquire_fid(state, ONE_SPIN, ["A"], n_points=64, dwell_s=1e-4, t2_s=t2)
        t = fid.times_s
        # positive offsets precess with a positive exponent, which is what
        # plants their transform peak on the positive-frequency side
        expected = 0.5 * np.exp(2j * math.pi * 250.0 * t) * np.exp(-t / t2)
        assert_allclose(fid.samples, expected, atol=1e-12)

    def test_detect_sums_spins(self, pair):
        state = DensityState.from_expansion(
            OperatorExpansion(
                2, {ProductTerm("xe"): 1.0, ProductTerm("ex"): 1.0}
            )
        )
        both = acquire_fid(state, pair, ["C1", "C2"], n_points=8, dwell_s=1e-4)
        assert both.samples[0] == pytest.approx(2.0 + 0.0j, abs=1e-12)

    def test_validation(self, pair):
        state = DensityState.from_expansion(
            OperatorExpansion(2, {ProductTerm("ze"): 1.0})
        )
        with pytest.raises(ValueError, match="at least one detected"):
            acquire_fid(state, pair, [])
        with pytest.raises(ValueError, match="repeated"):
            acquire_fid(state, pair, ["C1", "C1"])
        with pytest.raises(KeyError):
            acquire_fid(state, pair, ["Q9"])
        with pytest.raises(ValueError, match="point"):
            acquire_fid(state, pair, ["C1"], n_points=0)
        with pytest.raises(ValueError, match="dwell"):
            acquire_fid(state, pair, ["C1"], dwell_s=0.0)
        with pytest.raises(ValueError, match="decay"):
            acquire_fid(state, pair, ["C1"], t2_s=-1.0)


class TestSpectrum:
    def make_one_spin_fid(self, n_points=1000, dwell=1e-3, t2=math.inf):
        state = DensityState.from_expansion(
            OperatorExpansion(1, {ProductTerm("x"): 1.0})
        )
        return acquire_fid(state, ONE_SPIN, ["A"], n_points=n_points,
                           dwell_s=dwell, t2_s=t2)

    def test_peak_lands_at_positive_offset(self):
        # 250 Hz sits exactly on the 1 Hz grid, so all weight is in one bin
        spec = spectrum(self.make_one_spin_fid())
        peak = np.argmax(np.abs(spec.values))
        assert spec.freqs_hz[peak] == pytest.approx(250.0)
        assert spec.values[peak].real == pytest.approx(500.0, abs=1e-9)
        assert spec.values[peak].imag == pytest.approx(0.0, abs=1e-9)

    def test_receiver_phase_is_a_pure_rotation(self):
        fid = self.make_one_spin_fid(n_points=256)
        base = spectrum(fid)
        rolled = spectrum(fid, receiver_phase_rad=math.pi / 3)
        assert_allclose(
            rolled.values, base.values * np.exp(-1j * math.pi / 3), atol=1e-12
        )

    def test_quadrature_roll_moves_real_signal(self):
        fid = self.make_one_spin_fid()
        dispersive = spectrum(fid, receiver_phase_rad=math.pi / 2)
        peak = np.argmax(np.abs(dispersive.values))
        assert dispersive.values[peak].real == pytest.approx(0.0, abs=1e-9)

    def test_whole_axis_integral_matches_first_sample(self):
        spec = spectrum(self.make_one_spin_fid())
        total = integrate(spec, -500.0, 500.0)
        # sum over all bins collapses the DFT to N * s(0) = N * 0.5
        assert total == pytest.approx(0.5 / 1e-3, rel=1e-9)

    def test_adjacent_windows_tile_without_double_counting(self):
        spec = spectrum(self.make_one_spin_fid(t2=0.05))
        whole = integrate(spec, -500.0, 500.0)
        split = integrate(spec, -500.0, 250.0) + integrate(spec, 250.0, 500.0)
        assert split == pytest.approx(whole, rel=1e-12)

    def test_window_validation(self):
        spec = spectrum(self.make_one_spin_fid())
        with pytest.raises(ValueError, match="empty window"):
            integrate(spec, 10.0, 10.0)

    def test_grid_must_increase(self):
        with pytest.raises(ValueError, match="monotonically"):
            Spectrum(np.array([0.0, -1.0]), np.array([0j, 0j]))

    def test_fid_shape_checked(self):
        with pytest.raises(ValueError, match="align"):
            FID(np.zeros(3), np.zeros(4, dtype=complex), 1e-4, ("A",))


class TestAntiphaseSignature:
    def test_doublet_halves_mirror(self, pair):
        state = DensityState.from_expansion(
            OperatorExpansion(2, {ProductTerm("zx"): 1.0})
        )
        fid = acquire_fid(state, pair, ["C2"], n_points=8192, dwell_s=1e-4, t2_s=0.05)
        spec = spectrum(fid)
        center = pair.spin("C2").offset_hz
        upper = integrate(spec, center, center + 500.0)
        lower = integrate(spec, center - 500.0, center)
        assert upper > 0.0 > lower
        assert abs(upper) == pytest.approx(abs(lower), rel=0.02)

    def test_in_phase_doublet_same_sign(self, pair):
        state = DensityState.from_expansion(
            OperatorExpansion(2, {ProductTerm("ex"): 1.0})
        )
        fid = acquire_fid(state, pair, ["C2"], n_points=8192, dwell_s=1e-4, t2_s=0.05)
        spec = spectrum(fid)
        center = pair.spin("C2").offset_hz
        upper = integrate(spec, center, center + 500.0)
        lower = integrate(spec, center - 500.0, center)
        assert upper > 0.0 and lower > 0.0
        assert upper == pytest.approx(lower, rel=0.02)


class TestDelimitedOutput:
    def read_rows(self, path):
        with open(path, newline="") as fh:
            return list(csv.reader(fh))

    def test_fid_csv(self, tmp_path, pair):
        state = DensityState.from_expansion(
            OperatorExpansion(2, {ProductTerm("ex"): 1.0})
        )
        fid = acquire_fid(state, pair, ["C2"], n_points=16, dwell_s=1e-4)
        path = tmp_path / "fid.csv"
        write_fid_csv(fid, path)
        rows = self.read_rows(path)
        assert rows[0] == ["time_s", "real", "imag"]
        assert len(rows) == 17
        assert float(rows[1][1]) == pytest.approx(1.0)

    def test_spectrum_csv(self, tmp_path):
        spec = Spectrum(
            np.array([-1.0, 0.0, 1.0]),
            np.array([1 + 2j, 3 + 4j, 5 + 6j]),
        )
        path = tmp_path / "spec.csv"
        write_spectrum_csv(spec, path)
        rows = self.read_rows(path)
        assert rows[0] == ["frequency_hz", "real", "imag"]
        assert rows[2] == ["0", "3", "4"]

    def test_calibration_csv(self, tmp_path, sys7):
        error = GateErrorModel(z_offset_rad=math.radians(5.0))
        result = calibrate_phase(sys7, "C1", "C2", 1, 90.0, error)
        path = tmp_path / "cal.csv"
        write_calibration_csv(result.history, path)
        rows = self.read_rows(path)
        assert rows[0] == [
            "iteration", "phi_setting_deg", "phi_exp_deg", "residual_deg",
        ]
        assert len(rows) == 3
        assert float(rows[1][2]) == pytest.approx(95.0, abs=1e-6)

    def test_sweep_csv(self, tmp_path):
        path = tmp_path / "sweep.csv"
        write_sweep_csv([(10.0, 0.17, 0.98, 10.0)], path)
        rows = self.read_rows(path)
        assert rows[0] == [
            "phi_setting_deg", "sin_signal", "cos_signal", "phi_exp_deg",
        ]
        assert rows[1][0] == "10"
