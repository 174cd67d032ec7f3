import numpy as np
import pytest

from core.backaction import WeightMode, full_envelope, gamma_p, purcell_envelope_factor
from core.exceptions import ContractError, DomainError, ParameterError
from core.model import PulseSequence, SystemParams
from core.noise import SpectralDensity
from core.oracle import (
    LineMode,
    NoiseTrajectory,
    OracleRun,
    OracleSettings,
    analytic_run,
    averaged_observables,
    compare_to_closed_forms,
    evolve_fixed_eta,
    line_recurrence,
    oracle_nodes,
    oracle_revival_shape,
    oracle_signal,
    phase_span,
    positivity_violations,
    stretched_exponent,
)


def test_uncoupled_free_decay() -> None:
    params = SystemParams(coupling=0.0, kappa_total=1.0, t2star=1.0)
    t = np.linspace(0.0, 3.0, 31)
    run = averaged_observables(params, PulseSequence.fid(3.0), t)
    np.testing.assert_allclose(run.coherence, np.exp(-(t**2)), atol=1e-8)
    np.testing.assert_allclose(run.photons, 0.0, atol=1e-15)


def test_envelope_follows_purcell_decay(purcell: SystemParams) -> None:
    seq = PulseSequence.cpmg(50, 10.0)
    run = averaged_observables(purcell, seq, seq.echo_times())
    reference = purcell_envelope_factor(np.arange(51), 10.0, purcell)
    np.testing.assert_allclose(run.envelope, reference, rtol=0.02)
    assert run.norm_error < 1e-6


def test_field_stays_physical(purcell: SystemParams) -> None:
    seq = PulseSequence.cpmg(4, 10.0)
    run = averaged_observables(purcell, seq, np.linspace(0.0, 40.0, 161))
    count, _ = positivity_violations(run)
    assert count == 0


def test_fixed_eta_trajectory_conserves_norm(purcell: SystemParams) -> None:
    trajectory = evolve_fixed_eta(purcell, 0.3, PulseSequence.cpmg(2, 10.0), np.linspace(0.0, 20.0, 41))
    np.testing.assert_allclose(trajectory.total_norm, 1.0, atol=1e-7)
    frame = trajectory.to_dataframe()
    assert list(frame.columns[:3]) == ["t", "re_g0", "im_g0"]
    assert len(list(trajectory.states())) == 41


def test_dephasing_is_rejected(purcell: SystemParams) -> None:
    noisy = purcell.model_copy(update={"dephasing": 0.1})
    with pytest.raises(ContractError):
        averaged_observables(noisy, PulseSequence.hahn(10.0), [0.0, 10.0])


def test_noise_needs_the_markovian_line(purcell: SystemParams) -> None:
    noise = NoiseTrajectory.sample(SpectralDensity.gaussian(0.01, 1.0), 0.1, 20.0, seed=3)
    settings = OracleSettings(line_mode=LineMode.DISCRETIZED)
    with pytest.raises(ContractError):
        averaged_observables(purcell, PulseSequence.hahn(10.0), [0.0, 20.0], settings, noise)


def test_noise_realizations_are_averaged(purcell: SystemParams) -> None:
    noise = NoiseTrajectory.sample(SpectralDensity.gaussian(0.01, 1.0), 0.1, 20.0, seed=3, n_realizations=2)
    assert noise.n_realizations == 2
    run = averaged_observables(purcell, PulseSequence.hahn(10.0), [0.0, 20.0], OracleSettings(), noise)
    assert run.meta["realizations"] == 2
    assert abs(run.envelope[1]) < 1.0


def test_revival_grid_limits(purcell: SystemParams) -> None:
    with pytest.raises(ParameterError):
        oracle_revival_shape(0, 10.0, purcell)
    with pytest.raises(ContractError):
        oracle_revival_shape(2, 10.0, purcell, np.array([-6.0, 0.0, 6.0]))


def test_comparison_with_closed_forms(purcell: SystemParams) -> None:
    seq = PulseSequence.cpmg(10, 10.0)
    run = averaged_observables(purcell, seq, seq.echo_times())
    report = compare_to_closed_forms(OracleRun(run), analytic_run(purcell, seq))
    assert report.deviations["envelope"].max_relative < 0.02
    assert list(report.to_dataframe()["observable"]) == ["envelope"]


def test_stretched_exponent_of_a_synthetic_envelope() -> None:
    gamma = 5e-5
    times = np.geomspace(1.0 / gamma, 16.0 / gamma, 40)
    assert stretched_exponent(np.exp(-np.sqrt(gamma * times)), times, gamma) == pytest.approx(0.5)
    with pytest.raises(ParameterError):
        stretched_exponent(np.ones(3), np.array([1.0, 2.0, 3.0]), gamma)


@pytest.mark.slow
def test_stretched_exponent_of_the_purcell_envelope(purcell: SystemParams) -> None:
    rate = gamma_p(purcell)
    ns = np.unique(np.round(np.geomspace(1.0 / (rate * 10.0), 16.0 / (rate * 10.0), 40)))
    factor = purcell_envelope_factor(ns, 10.0, purcell)
    assert stretched_exponent(factor, ns * 10.0, rate) == pytest.approx(0.5, abs=0.05)


@pytest.mark.slow
def test_discretized_line_signal(purcell: SystemParams) -> None:
    from core.signal import signal_strength

    seq = PulseSequence.cpmg(4, 10.0)
    grid = np.linspace(0.0, 45.0, 46)
    run = averaged_observables(purcell, seq, grid, OracleSettings(line_mode=LineMode.DISCRETIZED))
    envelope = full_envelope(seq, purcell, SpectralDensity.zero(), weights=WeightMode.EMISSION)
    expected = signal_strength(purcell, envelope).signal
    assert oracle_signal(run, purcell) == pytest.approx(expected, rel=0.1)


def test_phase_span_of_cpmg() -> None:
    seq = PulseSequence.cpmg(4, 10.0)
    assert phase_span(seq, 40.0) == pytest.approx(5.0)
    assert phase_span(seq, 3.0) == pytest.approx(3.0)
    # after the last echo the phase grows again with the final sign
    assert phase_span(seq, 52.0) == pytest.approx(12.0)
    assert phase_span(PulseSequence.fid(3.0), 3.0) == pytest.approx(3.0)


def test_oracle_nodes_resolve_the_toggling_phase(purcell: SystemParams) -> None:
    seq = PulseSequence.cpmg(4, 10.0)
    eta, weights = oracle_nodes(purcell, seq, 45.0)
    phases = np.linspace(0.0, 5.0, 201)
    averaged = np.exp(-1j * np.outer(phases, eta)) @ weights
    # ⟨e^{-iηΦ}⟩ = e^{-(Φ/T2*)²}, down to the far tails between echoes
    np.testing.assert_allclose(averaged, np.exp(-((phases / purcell.t2star) ** 2)), atol=1e-8)
    assert np.all(weights > 0)
    with pytest.raises(ParameterError):
        oracle_nodes(purcell, seq, 45.0, order=1)


def test_discretized_line_rejects_runs_past_its_recurrence(purcell: SystemParams) -> None:
    settings = OracleSettings(line_mode=LineMode.DISCRETIZED)
    end = line_recurrence(purcell, settings)
    assert end == pytest.approx(2.0 * np.pi * 511 / 40.0)
    with pytest.raises(DomainError):
        averaged_observables(purcell, PulseSequence.cpmg(8, 10.0), [0.0, end + 1.0], settings)
