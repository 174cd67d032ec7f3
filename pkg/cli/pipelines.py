"""
Named experiment pipelines.

Each pipeline composes the core modules for one experiment kind, writes its
tables through the ArtifactWriter and returns a summary mapping that the
caller stores as summary.json.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np
import pandas as pd
import structlog

from cli.artifacts import ArtifactWriter
from config.experiment import Experiment, ExperimentConfig
from core.backaction import WeightMode, full_envelope, gamma_p, gamma_p_valid, weight_values
from core.cavity import (
    detuning_sweep,
    emitted_photons,
    field_from_coherence,
    field_spectrum_peak,
    invert_dft,
    output_field,
    revival_train,
)
from core.exceptions import DomainError
from core.filters import chi_time_domain, phase_time_domain
from core.model import EchoEnvelope, PulseSequence, SystemParams, validate
from core.noise import SpectralDensity
from core.oracle import (
    LineMode,
    NoiseTrajectory,
    OracleRun,
    analytic_run,
    averaged_observables,
    compare_to_closed_forms,
    oracle_revival_shape,
    oracle_signal,
    positivity_violations,
)
from core.signal import pulsed_coupling_signal, signal_strength
from core.spinmodel import (
    count_transmission_features,
    eseem_components,
    eseem_envelope,
    envelope_spectrum,
    exact_hahn_envelope,
    fit_visibility,
    passivity_bound,
    spectrum_peaks,
    spin_frequencies,
    transmission,
    transmission_grid,
)

logger = structlog.get_logger(__name__)

FID_STEP_KAPPA = 0.05  # default κ·dt for the fid grid
FID_NOISE_NODES = 201
MAX_DEFAULT_POINTS = 2_000_000


@dataclass(frozen=True)
class RunContext:
    config: ExperimentConfig
    writer: ArtifactWriter
    base_dir: Optional[Path] = None
    n_jobs: int = 1

    @property
    def params(self) -> SystemParams:
        return self.config.system_params()

    def spectrum(self) -> SpectralDensity:
        return self.config.noise_spectrum(self.base_dir)


Pipeline = Callable[[RunContext], Dict[str, Any]]


def _regime(params: SystemParams, tau: Optional[float]) -> Dict[str, Any]:
    checked = validate(params, tau)
    return {
        "high_q": checked.flags.high_q,
        "narrow_cavity": checked.flags.narrow_cavity,
        "slow_pulsing": checked.flags.slow_pulsing,
        "warnings": list(checked.warnings),
    }


def _complex_frame(grid_name: str, grid: np.ndarray, values: np.ndarray) -> pd.DataFrame:
    values = np.asarray(values, dtype=complex)
    return pd.DataFrame({grid_name: grid, "re": values.real, "im": values.imag})


def _envelope_frame(envelope: EchoEnvelope) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "n": np.arange(envelope.values.size),
            "t": envelope.echo_times,
            "re": envelope.values.real,
            "im": envelope.values.imag,
            "weight": envelope.weights,
        }
    )


def _fid_times(ctx: RunContext, seq: PulseSequence, params: SystemParams) -> np.ndarray:
    if ctx.config.grids.time is not None:
        return ctx.config.grids.time.values()
    dt = min(FID_STEP_KAPPA / params.kappa_total, params.t2star / 20.0)
    points = int(math.ceil(seq.total_time / dt)) + 1
    if points > MAX_DEFAULT_POINTS:
        raise DomainError("default fid grid is too fine; give grids.time", points=points)
    return np.linspace(0.0, seq.total_time, points)


def _dynamic_factor(seq: PulseSequence, spectrum: SpectralDensity, times: np.ndarray) -> np.ndarray:
    """e^{-χ(t) - iΦ_q(t)} on a coarse node set, interpolated onto the grid"""
    if not (spectrum.has_classical or spectrum.has_quantum):
        return np.ones(times.size, dtype=complex)
    nodes = np.linspace(times[0], times[-1], min(FID_NOISE_NODES, times.size))
    chi = np.zeros(nodes.size)
    phase = np.zeros(nodes.size)
    for i, t in enumerate(nodes):
        if t <= 0.0:
            continue
        if spectrum.has_classical:
            chi[i] = chi_time_domain(seq, spectrum, float(t))
        if spectrum.has_quantum:
            phase[i] = phase_time_domain(seq, spectrum, float(t))
    return np.exp(-np.interp(times, nodes, chi) - 1j * np.interp(times, nodes, phase))


def run_fid(ctx: RunContext) -> Dict[str, Any]:
    """Free decay: coherence, intracavity field and emitted photon number"""
    params = ctx.params
    seq = ctx.config.pulse_sequence()
    times = _fid_times(ctx, seq, params)
    sigma_x0 = ctx.config.signal.sigma_x0
    static = np.exp(-((times / params.t2star) ** 2) - params.dephasing * times)
    coherence = 0.5 * sigma_x0 * static * _dynamic_factor(seq, ctx.spectrum(), times)
    trace = field_from_coherence(times, coherence, params)
    photons = emitted_photons(output_field(trace, params))

    ctx.writer.write_table("coherence.csv", _complex_frame("t", times, coherence))
    ctx.writer.write_table("field.csv", _complex_frame("t", trace.grid, trace.values), {"frame": trace.frame.value})
    peak = int(np.argmax(np.abs(trace.values)))
    return {
        "points": int(times.size),
        "emitted_photons": photons,
        "field_peak_time": float(trace.grid[peak]),
        "field_peak_abs": float(np.abs(trace.values[peak])),
        "regime": _regime(params, None),
    }


def run_cpmg(ctx: RunContext) -> Dict[str, Any]:
    """Echo envelope with Purcell back-action, signal and (optionally) the revival train"""
    params = ctx.params
    seq = ctx.config.pulse_sequence()
    envelope = full_envelope(seq, params, ctx.spectrum(), weights=ctx.config.signal.weights)
    ctx.writer.write_table("envelope.csv", _envelope_frame(envelope), {"tau": envelope.tau})
    report = signal_strength(
        params, envelope, ctx.config.signal.sigma_x0, cross_terms=ctx.config.signal.cross_terms
    )
    ctx.writer.write_text("signal.txt", report.to_text())
    if ctx.config.grids.time is not None:
        trace = revival_train(envelope, params, ctx.config.grids.time.values(), ctx.config.signal.sigma_x0)
        ctx.writer.write_table("field.csv", _complex_frame("t", trace.grid, trace.values), {"frame": trace.frame.value})
    summary: Dict[str, Any] = {
        "n_echoes": envelope.n_echoes,
        "final_envelope_abs": float(np.abs(envelope.values[-1])),
        "n_eff": report.n_eff,
        "signal": report.signal,
        "gamma_p_valid": gamma_p_valid(params),
        "regime": _regime(params, seq.tau),
    }
    if params.coupling > 0:
        summary["gamma_p"] = gamma_p(params)
    return summary


def run_eseem(ctx: RunContext) -> Dict[str, Any]:
    """Hahn envelope against the nuclear spin: closed form, exact propagation and its spectrum"""
    params = ctx.params
    env = ctx.config.spin_env()
    grid = ctx.config.grids.tau
    assert grid is not None
    taus = grid.values()
    closed = np.asarray(eseem_envelope(taus, env, params.dephasing))
    exact = np.asarray(exact_hahn_envelope(taus, env, dephasing=params.dephasing))
    ctx.writer.write_table(
        "envelope.csv",
        pd.DataFrame({"tau": taus, "closed": closed, "exact_re": exact.real, "exact_im": exact.imag}),
        {"polarization": env.polarization},
    )

    omega, magnitude = envelope_spectrum(taus, closed)
    found = spectrum_peaks(omega, magnitude)
    bin_width = float(omega[1] - omega[0])
    rows = []
    for name, expected in eseem_components(env).items():
        nearest = float(found[np.argmin(np.abs(found - expected))]) if found.size else math.nan
        rows.append(
            {
                "component": name,
                "expected": expected,
                "found": nearest,
                "offset_bins": abs(nearest - expected) / bin_width,
            }
        )
    ctx.writer.write_table("peaks.csv", pd.DataFrame(rows), {"bin_width": bin_width})
    ctx.writer.write_table("spectrum.csv", pd.DataFrame({"omega": omega, "magnitude": magnitude}))

    freqs = spin_frequencies(env)
    fitted = fit_visibility(taus, closed, env, params.dephasing)
    return {
        "omega_plus": freqs.omega_plus,
        "omega_minus": freqs.omega_minus,
        "visibility": freqs.visibility,
        "fitted_visibility": fitted,
        "max_closed_exact_gap": float(np.max(np.abs(closed - exact))),
        "max_imag": float(np.max(np.abs(exact.imag))),
    }


def run_transmission(ctx: RunContext) -> Dict[str, Any]:
    """Averaged transmission A_T(ω) for each requested T2*"""
    params = ctx.params
    env = ctx.config.spin_env()
    method = ctx.config.quadrature.eta_average
    t2_values = ctx.config.grids.t2star_values or [params.t2star]
    bound = passivity_bound(params)
    rows = []
    for i, t2 in enumerate(t2_values):
        if ctx.config.grids.frequency is not None:
            omega = params.cavity_freq + ctx.config.grids.frequency.values()
        else:
            omega = transmission_grid(env, params, t2)
        values = transmission(
            omega, env, params, t2star=t2, order=ctx.config.quadrature.order, method=method
        )
        frame = pd.DataFrame(
            {
                "omega": omega,
                "offset": omega - params.cavity_freq,
                "re": values.real,
                "im": values.imag,
                "abs": np.abs(values),
            }
        )
        ctx.writer.write_table(f"transmission_{i:02d}.csv", frame, {"t2star": t2, "method": method.value})
        rows.append(
            {
                "t2star": t2,
                "features": count_transmission_features(values),
                "max_abs": float(np.max(np.abs(values))),
                "passivity_bound": bound,
            }
        )
    features = pd.DataFrame(rows)
    ctx.writer.write_table("features.csv", features)
    return {"method": method.value, "features": features.to_dict(orient="records")}


def run_signal(ctx: RunContext) -> Dict[str, Any]:
    """Signal per measurement cycle for static coupling, and pulsed coupling when t_on is set"""
    params = ctx.params
    seq = ctx.config.pulse_sequence()
    section = ctx.config.signal
    envelope = full_envelope(seq, params, ctx.spectrum(), weights=section.weights)
    report = signal_strength(params, envelope, section.sigma_x0, cross_terms=section.cross_terms)
    ctx.writer.write_text("signal.txt", report.to_text())
    summary: Dict[str, Any] = {"static": report.to_dict()}
    if section.t_on is not None:
        pulsed = pulsed_coupling_signal(
            params, section.t_on, tau=seq.tau, n_echoes=section.n_echoes, sigma_x0=section.sigma_x0
        )
        ctx.writer.write_text("pulsed.txt", pulsed.to_text())
        summary["pulsed"] = pulsed.to_dict()
    return summary


def run_oracle_compare(ctx: RunContext) -> Dict[str, Any]:
    """Brute-force simulation against the closed forms, per observable"""
    params = ctx.params
    seq = ctx.config.pulse_sequence()
    section = ctx.config.oracle
    settings = section.to_settings(ctx.n_jobs)
    grid = ctx.config.grids.time.values() if ctx.config.grids.time is not None else np.empty(0)

    noise = None
    spectrum = None
    if section.noise_realizations > 0:
        spectrum = ctx.spectrum()
        step = section.noise_step or params.t2star / 10.0
        noise = NoiseTrajectory.sample(
            spectrum, step, seq.total_time, ctx.config.seed, n_realizations=section.noise_realizations
        )
    averages = averaged_observables(params, seq, grid, settings, noise)
    ctx.writer.write_table("oracle_observables.csv", averages.to_dataframe(), {"line_mode": averages.line_mode.value})
    ctx.writer.write_table("oracle_envelope.csv", averages.envelope_frame())

    revival = None
    if section.revival_n is not None and seq.tau is not None:
        revival = oracle_revival_shape(section.revival_n, seq.tau, params, None, settings)
        ctx.writer.write_table(
            "oracle_revival.csv",
            _complex_frame("t", revival.times, revival.values),
            {"n": revival.n, "weight": revival.weight},
        )
    analytic = analytic_run(
        params,
        seq,
        times=averages.times if grid.size else None,
        revival_n=section.revival_n,
        revival_grid=revival.times if revival is not None else None,
        spectrum=spectrum,
    )
    ctx.writer.write_table("closed_form_envelope.csv", _envelope_frame(analytic.envelope))
    report = compare_to_closed_forms(OracleRun(averages, revival), analytic)
    ctx.writer.write_table("deviations.csv", report.to_dataframe())

    violations, worst = positivity_violations(averages)
    closed_signal = signal_strength(params, analytic.envelope).signal
    summary: Dict[str, Any] = {
        "deviations": report.to_dict(),
        "positivity_violations": violations,
        "positivity_worst_excess": worst,
        "norm_error": averages.norm_error,
        "closed_form_signal": closed_signal,
        "realizations": averages.meta["realizations"],
    }
    if averages.line_mode is LineMode.DISCRETIZED or grid.size:
        summary["oracle_signal"] = oracle_signal(averages, params)
    return summary


def run_reconstruct(ctx: RunContext) -> Dict[str, Any]:
    """Synthesize an envelope, sweep the cavity detuning over one period and invert the DFT"""
    params = ctx.params
    seq = ctx.config.pulse_sequence()
    section = ctx.config.reconstruct
    assert seq.tau is not None
    envelope = full_envelope(seq, params, ctx.spectrum())
    detunings = detuning_sweep(envelope.n_echoes, seq.tau, start=section.start)
    peaks = np.asarray(field_spectrum_peak(envelope, params, section.sigma_x0, detuning=detunings))
    ctx.writer.write_table("peaks.csv", _complex_frame("detuning", detunings, peaks))

    if section.weights is WeightMode.WINDOWED:
        weights = envelope.weights
    else:
        weights = weight_values(np.arange(envelope.values.size), seq.tau, params, section.weights)
    recovered = invert_dft(
        peaks,
        detunings,
        weights,
        seq.tau,
        params.qubit_splitting,
        params,
        sigma_x0=section.sigma_x0,
        threshold=section.threshold,
    )
    mask = np.asarray(recovered.meta["recoverable"], dtype=bool)
    scale = np.maximum(np.abs(envelope.values), 1e-300)
    error = np.where(mask, np.abs(recovered.values - envelope.values) / scale, np.nan)
    frame = pd.DataFrame(
        {
            "n": np.arange(envelope.values.size),
            "true_re": envelope.values.real,
            "true_im": envelope.values.imag,
            "recovered_re": recovered.values.real,
            "recovered_im": recovered.values.imag,
            "weight": weights,
            "recoverable": mask,
            "relative_error": error,
        }
    )
    ctx.writer.write_table("recovered.csv", frame, {"weights": section.weights.value})
    return {
        "n_echoes": envelope.n_echoes,
        "recoverable": int(np.count_nonzero(mask)),
        "max_relative_error": float(np.nanmax(error)) if mask.any() else math.nan,
        "weights": section.weights.value,
    }


PIPELINES: Dict[Experiment, Pipeline] = {
    Experiment.FID: run_fid,
    Experiment.CPMG: run_cpmg,
    Experiment.ESEEM: run_eseem,
    Experiment.TRANSMISSION: run_transmission,
    Experiment.SIGNAL: run_signal,
    Experiment.ORACLE_COMPARE: run_oracle_compare,
    Experiment.RECONSTRUCT: run_reconstruct,
}


def run_pipeline(ctx: RunContext) -> Dict[str, Any]:
    experiment = ctx.config.experiment
    log = logger.bind(component="pipeline", experiment=experiment.value)
    log.info("pipeline_started", seed=ctx.config.seed, n_jobs=ctx.n_jobs)
    summary = PIPELINES[experiment](ctx)
    ctx.writer.write_json("summary.json", summary)
    log.info("pipeline_finished", outputs=len(ctx.writer.written))
    return summary
