import numpy as np
import pytest
from scipy import integrate

from core.backaction import full_envelope, revival_weights
from core.cavity import (
    Domain,
    FieldTrace,
    Frame,
    WavepacketForm,
    cavity_susceptibility,
    conjugate_odd,
    detuning_sweep,
    dft_envelope,
    emitted_photons,
    field_from_coherence,
    field_spectrum_peak,
    invert_dft,
    output_field,
    revival_peak_amplitude,
    revival_train,
    wavepacket,
)
from core.exceptions import DomainError, ParameterError
from core.model import EchoEnvelope, PulseSequence, SystemParams
from core.noise import SpectralDensity


def test_susceptibility_pair() -> None:
    params = SystemParams(detuning=0.3, coupling=0.1, kappa_total=1.0, t2star=1.0)
    omega = 0.7
    re, _ = integrate.quad(
        lambda t: np.real(np.exp(1j * omega * t) * cavity_susceptibility(t, params)), 0.0, 80.0, limit=400
    )
    im, _ = integrate.quad(
        lambda t: np.imag(np.exp(1j * omega * t) * cavity_susceptibility(t, params)), 0.0, 80.0, limit=400
    )
    expected = cavity_susceptibility(omega, params, Domain.FREQUENCY)
    assert re + 1j * im == pytest.approx(expected, rel=1e-8)


def test_susceptibility_is_causal(purcell: SystemParams) -> None:
    values = cavity_susceptibility(np.array([-1.0, 0.0, 2.0]), purcell)
    np.testing.assert_allclose(values, [0.0, 1.0, np.exp(-1.0)])


@pytest.mark.parametrize("domain", [Domain.TIME, Domain.FREQUENCY])
def test_scalar_susceptibility_returns_complex(purcell: SystemParams, domain: Domain) -> None:
    value = cavity_susceptibility(0.25, purcell, domain)
    assert isinstance(value, complex)
    vector = cavity_susceptibility(np.array([0.25]), purcell, domain)
    assert vector.shape == (1,)
    assert vector[0] == pytest.approx(value)


def test_field_from_constant_coherence(purcell: SystemParams) -> None:
    t = np.arange(0.0, 10.0, 0.01)
    trace = field_from_coherence(t, np.ones_like(t), purcell)
    expected = -1j * purcell.coupling * 2.0 * (1.0 - np.exp(-0.5 * t))
    np.testing.assert_allclose(trace.values, expected, atol=1e-4)
    assert trace.frame is Frame.ROTATING


def test_field_rejects_coarse_grid(purcell: SystemParams) -> None:
    t = np.arange(0.0, 10.0, 0.2)
    with pytest.raises(DomainError):
        field_from_coherence(t, np.ones_like(t), purcell)


def test_field_rejects_non_uniform_grid(purcell: SystemParams) -> None:
    t = np.array([0.0, 0.01, 0.03, 0.04])
    with pytest.raises(DomainError):
        field_from_coherence(t, np.ones_like(t), purcell)


def test_frame_round_trip(purcell: SystemParams) -> None:
    t = np.linspace(0.0, 1.0, 11)
    trace = FieldTrace(t, np.exp(0.3j * t), qubit_splitting=purcell.qubit_splitting)
    lab = trace.to_frame(Frame.LAB)
    np.testing.assert_allclose(lab.values, np.exp(0.3j * t - 1j * 1000.0 * t))
    np.testing.assert_allclose(lab.to_frame(Frame.ROTATING).values, trace.values)


def test_frequency_trace_has_no_frame_change() -> None:
    trace = FieldTrace(np.arange(3.0), np.ones(3), domain=Domain.FREQUENCY, qubit_splitting=1.0)
    with pytest.raises(DomainError):
        trace.to_frame(Frame.LAB)


def test_output_field_and_photons(purcell: SystemParams) -> None:
    t = np.linspace(0.0, 1.0, 101)
    trace = FieldTrace(t, np.full(t.size, 2.0 + 0.0j), qubit_splitting=purcell.qubit_splitting)
    out = output_field(trace, purcell)
    assert out.frame is Frame.LAB
    np.testing.assert_allclose(np.abs(out.values), 2.0)
    assert emitted_photons(out) == pytest.approx(4.0)


def test_conjugate_odd() -> None:
    values = np.full(3, 1.0 + 1.0j)
    np.testing.assert_array_equal(conjugate_odd(values), [1 + 1j, 1 - 1j, 1 + 1j])


def test_simplified_wavepacket_peak(purcell: SystemParams) -> None:
    peak = wavepacket(0, 0.0, purcell, weight=1.0)
    assert peak == pytest.approx(-1j * np.sqrt(np.pi) * purcell.coupling * purcell.t2star)


def test_convolved_wavepacket_matches_simplified_after_revival(purcell: SystemParams) -> None:
    t = 5.0 * purcell.t2star
    simplified = wavepacket(0, t, purcell, weight=1.0)
    convolved = wavepacket(0, t, purcell, weight=1.0, form=WavepacketForm.CONVOLVED)
    assert convolved == pytest.approx(simplified, rel=5e-3)


def test_convolved_wavepacket_needs_tau(purcell: SystemParams) -> None:
    with pytest.raises(ParameterError):
        wavepacket(3, 0.0, purcell, weight=1.0, form=WavepacketForm.CONVOLVED)


def test_revival_train_peaks_at_echoes(purcell: SystemParams) -> None:
    envelope = full_envelope(PulseSequence.cpmg(3, 10.0), purcell, SpectralDensity.zero())
    t = np.linspace(-0.5, 35.0, 3551)
    trace = revival_train(envelope, purcell, t)
    for n in (1, 2, 3):
        near = np.abs(t - n * 10.0) < 2.0
        assert np.abs(trace.values[near]).max() > 1e-3
    assert trace.meta["n_echoes"] == 3


def test_revival_train_conjugates_odd_echoes(purcell: SystemParams) -> None:
    t = np.linspace(5.0, 25.0, 801)
    z = 0.3 - 0.4j

    def single(n: int, value: complex) -> np.ndarray:
        values = np.zeros(3, dtype=complex)
        values[n] = value
        envelope = EchoEnvelope(tau=10.0, values=values, weights=np.ones(3))
        return revival_train(envelope, purcell, t).values

    # K acts on odd echoes only, so the train is antilinear in C̃(τ) and linear in C̃(2τ)
    np.testing.assert_allclose(single(1, z), np.conj(z) * single(1, 1.0), atol=1e-14)
    np.testing.assert_allclose(single(2, z), z * single(2, 1.0), atol=1e-14)
    assert not np.allclose(single(1, z), z * single(1, 1.0))


def test_revival_peak_amplitude(purcell: SystemParams, broadening: SystemParams) -> None:
    narrow = revival_peak_amplitude(1.0, purcell)
    assert narrow == pytest.approx(-0.5j * np.sqrt(np.pi) * purcell.coupling * purcell.t2star)
    assert revival_peak_amplitude(1.0, broadening) == pytest.approx(-0.2j)


def test_dft_of_single_echo(purcell: SystemParams) -> None:
    envelope = EchoEnvelope(tau=10.0, values=np.array([1.0]), weights=np.array([1.0]))
    assert dft_envelope(envelope, 0.3) == pytest.approx(1.0)
    peak = field_spectrum_peak(envelope, purcell)
    scale = -1j * np.sqrt(np.pi) * purcell.coupling * purcell.t2star / purcell.kappa_total
    assert peak == pytest.approx(0.5 * scale)


def test_detuning_sweep() -> None:
    sweep = detuning_sweep(4, 2.0)
    assert sweep.size == 5
    assert sweep[1] - sweep[0] == pytest.approx(2.0 * np.pi / 10.0)
    with pytest.raises(ParameterError):
        detuning_sweep(4, 2.0, points=3)


def _round_trip(envelope: EchoEnvelope, params: SystemParams, threshold: float = 1e-6) -> EchoEnvelope:
    detunings = detuning_sweep(envelope.n_echoes, envelope.tau)
    peaks = field_spectrum_peak(envelope, params, detuning=detunings)
    return invert_dft(
        peaks, detunings, envelope.weights, envelope.tau, envelope.qubit_splitting, params, threshold=threshold
    )


def test_reconstruction_recovers_the_envelope(purcell: SystemParams, rng: np.random.Generator) -> None:
    values = rng.uniform(0.2, 1.0, 17) * np.exp(1j * rng.uniform(-np.pi, np.pi, 17))
    weights = rng.uniform(0.2, 1.0, 17)
    envelope = EchoEnvelope(10.0, values, weights, purcell.qubit_splitting)
    recovered = _round_trip(envelope, purcell)
    np.testing.assert_allclose(recovered.values, values, rtol=1e-9)
    assert recovered.meta["recoverable"].all()


def test_reconstruction_marks_small_weights(purcell: SystemParams) -> None:
    weights = np.ones(6)
    weights[3] = 1e-9
    envelope = EchoEnvelope(10.0, np.full(6, 0.5 + 0.1j), weights, purcell.qubit_splitting)
    recovered = _round_trip(envelope, purcell)
    assert np.isnan(recovered.values[3])
    assert not recovered.meta["recoverable"][3]
    assert recovered.values[2] == pytest.approx(0.5 + 0.1j, rel=1e-9)


def test_reconstruction_with_purcell_weights(purcell: SystemParams) -> None:
    envelope = full_envelope(PulseSequence.cpmg(8, 10.0), purcell, SpectralDensity.zero())
    assert envelope.weights[0] == pytest.approx(revival_weights(0, 10.0, purcell))
    recovered = _round_trip(envelope, purcell)
    np.testing.assert_allclose(recovered.values, envelope.values, rtol=1e-8)


def test_reconstruction_needs_a_full_period(purcell: SystemParams) -> None:
    detunings = np.linspace(0.0, 1.0, 5)
    with pytest.raises(DomainError):
        invert_dft(np.ones(5), detunings, np.ones(5), 10.0, 0.0, purcell)
    with pytest.raises(ParameterError):
        invert_dft(np.ones(3), detuning_sweep(2, 10.0), np.ones(5), 10.0, 0.0, purcell)
