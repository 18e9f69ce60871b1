"""Command-line interface.

Every report-producing command writes delimited output (CSV) into ``--out``
and, unless ``--no-figures`` is given, a PNG figure next to it.  Validation
problems with paths or parameters exit with status 2; operations that run
but report a failure (gate not equivalent, calibration not converging)
exit with status 1.
"""

from __future__ import annotations

import math
from pathlib import Path

import click

from . import __version__
from .engine import DensityState
from .gates import GateParams, verify_gate
from .prodop import format_expansion
from .readout import (
    CalibrationError,
    GateErrorModel,
    acquire_fid,
    calibrate_phase,
    estimate_phase,
    integrate,
    measure_phase_signals,
    run_phase_experiment,
    spectrum as make_spectrum,
    write_calibration_csv,
    write_fid_csv,
    write_spectrum_csv,
    write_sweep_csv,
    phase_experiment_sequence,
)
from .sequence import (
    Rotation,
    Sequence,
    SequenceError,
    parse_sequence,
    render_sequence,
    run_sequence,
)
from .spinsys import (
    ConfigError,
    SpinSystem,
    bundled_system_path,
    load_spin_system_file,
    thermal_state,
)


class SystemParam(click.ParamType):
    """Spin-system argument: a config file path, or ``builtin`` for the
    packaged seven-spin register."""

    name = "system"

    def convert(self, value, param, ctx):
        if isinstance(value, SpinSystem):
            return value
        path = bundled_system_path() if value == "builtin" else Path(value)
        if not path.is_file():
            self.fail(f"system file {str(path)!r} does not exist", param, ctx)
        try:
            return load_spin_system_file(path)
        except ConfigError as exc:
            self.fail(f"{path}: {exc}", param, ctx)


SYSTEM = SystemParam()


def _outdir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _thermal(system: SpinSystem) -> DensityState:
    return DensityState.from_expansion(thermal_state(system))


def _error_model(z_offset_deg: float, flip_scale: float) -> GateErrorModel:
    try:
        return GateErrorModel(
            z_offset_rad=math.radians(z_offset_deg), flip_scale=flip_scale
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))


@click.group()
@click.version_option(__version__, prog_name="nmrqsim")
def main() -> None:
    """Liquid-state NMR quantum-computing simulator."""


@main.command()
@click.argument("system", type=SYSTEM)
@click.argument("sequence_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--precision", default=3, show_default=True, help="Printed digits.")
@click.option("--tol", default=1e-9, show_default=True, help="Coefficient cutoff.")
def simulate(system, sequence_file, precision, tol) -> None:
    """Run a sequence file from thermal equilibrium; print the expansion."""
    text = Path(sequence_file).read_text(encoding="utf-8")
    try:
        seq = parse_sequence(text, system, name=Path(sequence_file).stem)
    except SequenceError as exc:
        raise click.UsageError(f"{sequence_file}: {exc}")
    try:
        final = run_sequence(_thermal(system), seq, system)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    expansion = final.to_expansion(tol=tol)
    click.echo(format_expansion(expansion, system.labels, precision=precision))


@main.command("verify-gate")
@click.argument("system", type=SYSTEM)
@click.option("--control", required=True, help="Control spin label.")
@click.option("--target", required=True, help="Target spin label.")
@click.option("--n", default=1, show_default=True, help="Root order of the gate.")
@click.option("--phi", type=float, default=None,
              help="Composite z angle in degrees (default: canonical -180/n).")
@click.option("--tol", default=1e-9, show_default=True, help="Equivalence tolerance.")
def verify_gate_cmd(system, control, target, n, phi, tol) -> None:
    """Compile the controlled gate and grade it against the canonical form."""
    phi_rad = math.radians(phi) if phi is not None else None
    try:
        params = GateParams(control=control, target=target, n=n, phi_rad=phi_rad)
        report = verify_gate(system, params, tol=tol)
    except (KeyError, ValueError) as exc:
        raise click.UsageError(str(exc))
    click.echo(f"gate: controlled root-{n} NOT, {control} -> {target}")
    click.echo(f"equivalence: {report.level}")
    click.echo(f"deviation at level: {report.deviation:.3e}")
    click.echo(f"global-phase deviation: {report.global_deviation:.3e}")
    click.echo(f"diagonal-phase deviation: {report.diagonal_deviation:.3e}")
    if report.level == "none":
        raise click.ClickException("compiled unitary does not match the canonical gate")


@main.command()
@click.argument("system", type=SYSTEM)
@click.option("--control", required=True, help="Control spin label.")
@click.option("--target", required=True, help="Target spin label.")
@click.option("--n", default=1, show_default=True, help="Root order.")
@click.option("--phi", type=float, default=None, help="Z-rotation setting in degrees.")
@click.option("--sweep", type=float, nargs=3, default=None,
              metavar="START STOP STEP", help="Sweep settings in degrees.")
@click.option("--z-offset", "z_offset_deg", default=0.0, show_default=True,
              help="Injected additive z error (degrees).")
@click.option("--flip-scale", default=1.0, show_default=True,
              help="Injected pulse-angle scale factor.")
@click.option("--out", default="out", show_default=True, help="Report directory.")
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--emit-sequence", type=click.Path(dir_okay=False), default=None,
              help="Also write the experiment (without read pulse) as DSL text.")
def phase(system, control, target, n, phi, sweep, z_offset_deg, flip_scale,
          out, figures, emit_sequence) -> None:
    """Measure the composite z angle via the two-channel experiment."""
    error = _error_model(z_offset_deg, flip_scale)
    if (phi is None) == (not sweep):
        raise click.UsageError("give exactly one of --phi or --sweep")

    if emit_sequence is not None:
        reference = math.radians(phi if phi is not None else sweep[0])
        try:
            seq = phase_experiment_sequence(
                system, control, target, n, reference, error
            )
        except (KeyError, ValueError) as exc:
            raise click.UsageError(str(exc))
        Path(emit_sequence).write_text(render_sequence(seq), encoding="utf-8")
        click.echo(f"wrote {emit_sequence}")

    if phi is not None:
        try:
            sin_s, cos_s = measure_phase_signals(
                system, control, target, n, math.radians(phi), error
            )
        except (KeyError, ValueError) as exc:
            raise click.UsageError(str(exc))
        est = estimate_phase(sin_s, cos_s)
        click.echo(f"setting: {phi:.4f} deg")
        click.echo(f"sin channel: {sin_s:+.6f}")
        click.echo(f"cos channel: {cos_s:+.6f}")
        click.echo(f"estimate: {est.phi_deg:.4f} deg")
        return

    start, stop, step = sweep
    if step <= 0 or stop < start:
        raise click.UsageError("sweep needs START <= STOP and STEP > 0")
    rows = []
    setting = start
    while setting <= stop + 1e-9:
        try:
            sin_s, cos_s = measure_phase_signals(
                system, control, target, n, math.radians(setting), error
            )
        except (KeyError, ValueError) as exc:
            raise click.UsageError(str(exc))
        est = estimate_phase(sin_s, cos_s)
        rows.append((setting, sin_s, cos_s, est.phi_deg))
        setting += step
    outdir = _outdir(out)
    csv_path = outdir / "phase_sweep.csv"
    write_sweep_csv(rows, csv_path)
    click.echo(f"wrote {csv_path} ({len(rows)} settings)")
    if figures:
        from .plots import save_sweep_plot

        png = save_sweep_plot(
            rows, outdir / "phase_sweep.png",
            title=f"{control}->{target}, n={n}",
        )
        click.echo(f"wrote {png}")
    worst = max(abs((r[3] - r[0] + 180.0) % 360.0 - 180.0) for r in rows)
    click.echo(f"worst |estimate - setting|: {worst:.3e} deg")


@main.command()
@click.argument("system", type=SYSTEM)
@click.option("--control", required=True, help="Control spin label.")
@click.option("--target", required=True, help="Target spin label.")
@click.option("--n", default=1, show_default=True, help="Root order.")
@click.option("--target-phi", required=True, type=float,
              help="Desired z angle in degrees.")
@click.option("--z-offset", "z_offset_deg", default=0.0, show_default=True,
              help="Injected additive z error (degrees).")
@click.option("--flip-scale", default=1.0, show_default=True,
              help="Injected pulse-angle scale factor.")
@click.option("--tol-deg", default=0.05, show_default=True,
              help="Convergence tolerance (degrees).")
@click.option("--max-iter", default=10, show_default=True,
              help="Measurement-round budget.")
@click.option("--out", default="out", show_default=True, help="Report directory.")
@click.option("--figures/--no-figures", default=True, show_default=True)
def calibrate(system, control, target, n, target_phi, z_offset_deg, flip_scale,
              tol_deg, max_iter, out, figures) -> None:
    """Close the loop on the z setting under an injected error model."""
    error = _error_model(z_offset_deg, flip_scale)
    outdir = _outdir(out)
    failure: CalibrationError | None = None
    try:
        result = calibrate_phase(
            system, control, target, n, target_phi, error,
            tol_deg=tol_deg, max_iter=max_iter,
        )
        history = result.history
    except CalibrationError as exc:
        failure = exc
        history = exc.history
    except (KeyError, ValueError) as exc:
        raise click.UsageError(str(exc))

    for row in history:
        click.echo(
            f"round {row.round}: setting {row.setting_deg:9.4f} deg  "
            f"measured {row.measured_deg:9.4f} deg  "
            f"residual {row.residual_deg:+9.4f} deg"
        )
    csv_path = outdir / "calibration.csv"
    write_calibration_csv(history, csv_path)
    click.echo(f"wrote {csv_path}")
    if figures:
        from .plots import save_calibration_plot

        png = save_calibration_plot(
            history, outdir / "calibration.png",
            title=f"target {target_phi:g} deg, n={n}",
        )
        click.echo(f"wrote {png}")
    if failure is not None:
        raise click.ClickException(str(failure))
    click.echo(
        f"converged: setting {result.setting_deg:.4f} deg after "
        f"{result.iterations} correction(s), residual {result.residual_deg:+.2e} deg"
    )


@main.command("spectrum")
@click.argument("system", type=SYSTEM)
@click.option("--detect", required=True, help="Observed spin label.")
@click.option("--sequence", "sequence_file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Sequence to run before acquisition.")
@click.option("--read-pulse/--no-read-pulse", default=True, show_default=True,
              help="Apply a 90-degree y read pulse on the detected spin.")
@click.option("--points", default=4096, show_default=True, help="FID length.")
@click.option("--dwell", default=1e-4, show_default=True, help="Dwell time (s).")
@click.option("--t2", default=0.05, show_default=True,
              help="Decay constant during acquisition (s).")
@click.option("--receiver-phase", default=0.0, show_default=True,
              help="Receiver phase in degrees.")
@click.option("--out", default="out", show_default=True, help="Report directory.")
@click.option("--figures/--no-figures", default=True, show_default=True)
def spectrum_cmd(system, detect, sequence_file, read_pulse, points, dwell, t2,
                 receiver_phase, out, figures) -> None:
    """Synthesize an FID and spectrum for the detected spin."""
    state = _thermal(system)
    if sequence_file is not None:
        text = Path(sequence_file).read_text(encoding="utf-8")
        try:
            seq = parse_sequence(text, system, name=Path(sequence_file).stem)
        except SequenceError as exc:
            raise click.UsageError(f"{sequence_file}: {exc}")
        try:
            state = run_sequence(state, seq, system)
        except ValueError as exc:
            raise click.ClickException(str(exc))
    try:
        if read_pulse:
            read = Sequence((Rotation((detect,), "y", math.pi / 2.0),))
            state = run_sequence(state, read, system)
        fid = acquire_fid(
            state, system, [detect], n_points=points, dwell_s=dwell, t2_s=t2
        )
    except (KeyError, ValueError) as exc:
        raise click.UsageError(str(exc))
    spec = make_spectrum(fid, receiver_phase_rad=math.radians(receiver_phase))

    outdir = _outdir(out)
    fid_csv = outdir / "fid.csv"
    spec_csv = outdir / "spectrum.csv"
    write_fid_csv(fid, fid_csv)
    write_spectrum_csv(spec, spec_csv)
    click.echo(f"wrote {fid_csv}")
    click.echo(f"wrote {spec_csv}")
    if figures:
        from .plots import save_fid_plot, save_spectrum_plot

        offset = system.spin(detect).offset_hz
        half_window = 600.0
        png_fid = save_fid_plot(fid, outdir / "fid.png", title=f"FID, detect {detect}")
        png_spec = save_spectrum_plot(
            spec, outdir / "spectrum.png",
            title=f"detect {detect}",
            window_hz=(offset - half_window, offset + half_window),
        )
        click.echo(f"wrote {png_fid}")
        click.echo(f"wrote {png_spec}")
    peak = spec.freqs_hz[int(abs(spec.values.real).argmax())]
    click.echo(f"strongest line near {peak:.1f} Hz")


if __name__ == "__main__":
    main()
