import numpy as np
import pytest

from core.backaction import (
    PurcellMode,
    WeightMode,
    asymptotic_first_zero,
    asymptotic_weight,
    dispersive_shift,
    emission_weights,
    first_zero_crossing,
    full_envelope,
    gamma_p,
    gamma_p_valid,
    purcell_envelope_factor,
    purcell_rate,
    revival_asymptote,
    revival_shape,
    revival_weights,
    weight_values,
)
from core.exceptions import ContractError, ParameterError
from core.model import PulseSequence, SystemParams
from core.noise import SpectralDensity


def test_purcell_rate_on_resonance(purcell: SystemParams) -> None:
    assert purcell_rate(0.0, purcell) == pytest.approx(0.04)
    rates = purcell_rate(np.array([0.0, 0.5, -0.5]), purcell)
    np.testing.assert_allclose(rates, [0.04, 0.02, 0.02])


def test_dispersive_shift_at_half_linewidth(purcell: SystemParams) -> None:
    assert dispersive_shift(0.5, purcell) == pytest.approx(purcell.coupling**2)
    assert dispersive_shift(0.0, purcell) == 0.0


def test_purcell_rate_needs_a_lossy_cavity() -> None:
    with pytest.raises(ParameterError):
        purcell_rate(0.0, SystemParams(coupling=0.1, kappa_total=0.0, t2star=1.0))


def test_gamma_p(purcell: SystemParams) -> None:
    assert gamma_p(purcell) == pytest.approx(5e-5)
    assert gamma_p_valid(purcell)
    assert not gamma_p_valid(purcell.model_copy(update={"detuning": 10.0}))


def test_envelope_factor_modes(purcell: SystemParams) -> None:
    ns = np.array([0, 10, 100, 1000])
    exact = purcell_envelope_factor(ns, 10.0, purcell)
    assert exact[0] == pytest.approx(1.0)
    assert np.all(np.diff(exact) < 0)
    asymptotic = purcell_envelope_factor(ns, 10.0, purcell, mode=PurcellMode.ASYMPTOTIC)
    np.testing.assert_allclose(asymptotic, np.exp(-np.sqrt(5e-5 * ns * 10.0)))
    assert isinstance(purcell_envelope_factor(3, 10.0, purcell), float)


def test_envelope_factor_rejects_negative_index(purcell: SystemParams) -> None:
    with pytest.raises(ParameterError):
        purcell_envelope_factor(np.array([-1, 2]), 10.0, purcell)


def test_first_revival_weight_is_one(purcell: SystemParams) -> None:
    assert revival_weights(0, 10.0, purcell) == pytest.approx(1.0, rel=1e-9)


def test_asymptotic_weight(purcell: SystemParams) -> None:
    assert asymptotic_weight(0, 10.0, purcell) == 1.0
    n = 1.0 / (gamma_p(purcell) * 10.0)
    assert asymptotic_weight(n, 10.0, purcell) == pytest.approx(2.0 * np.exp(-2.0))


def test_unperturbed_revival_is_the_free_decay(purcell: SystemParams) -> None:
    t2 = purcell.t2star
    shape = revival_shape(0, 10.0, np.array([0.0, t2, 2.0 * t2]), purcell)
    np.testing.assert_allclose(shape.values, np.exp(-np.array([0.0, 1.0, 4.0])), atol=1e-12)
    assert shape.weight == pytest.approx(1.0, rel=1e-9)


def test_late_revival_first_zero(purcell: SystemParams) -> None:
    shape = revival_shape(2000, 10.0, None, purcell)
    zero = first_zero_crossing(shape.times, shape.values)
    assert zero is not None
    assert zero / purcell.t2star == pytest.approx(0.8752, rel=5e-3)
    assert asymptotic_first_zero(2000, 10.0, purcell) == pytest.approx(
        np.pi * purcell.t2star / (2.0 * np.sqrt(2.0))
    )


def test_asymptotic_first_zero_without_decay() -> None:
    params = SystemParams(coupling=0.0, kappa_total=1.0, t2star=0.1)
    assert asymptotic_first_zero(10, 10.0, params) == float("inf")


def test_revival_asymptote_shape(purcell: SystemParams) -> None:
    assert revival_asymptote(2000, 10.0, 0.0, purcell) == pytest.approx(1.0)
    zero = asymptotic_first_zero(2000, 10.0, purcell)
    assert revival_asymptote(2000, 10.0, zero, purcell) == pytest.approx(0.0, abs=1e-12)


def test_first_zero_crossing() -> None:
    t = np.linspace(-1.0, 3.0, 4001)
    assert first_zero_crossing(t, np.cos(t)) == pytest.approx(np.pi / 2.0, abs=1e-6)
    assert first_zero_crossing(t, np.exp(-(t**2))) is None


def test_full_envelope(purcell: SystemParams) -> None:
    seq = PulseSequence.cpmg(4, 10.0)
    envelope = full_envelope(seq, purcell, SpectralDensity.zero())
    assert envelope.n_echoes == 4
    assert envelope.values[0] == pytest.approx(1.0)
    np.testing.assert_allclose(
        envelope.values.real, purcell_envelope_factor(np.arange(5), 10.0, purcell)
    )
    assert envelope.weights[0] == pytest.approx(1.0, rel=1e-9)
    assert envelope.meta["weights"] == "windowed"


def test_full_envelope_asymptotic_weights(purcell: SystemParams) -> None:
    seq = PulseSequence.cpmg(3, 10.0)
    envelope = full_envelope(seq, purcell, SpectralDensity.zero(), weights=WeightMode.ASYMPTOTIC)
    np.testing.assert_allclose(envelope.weights, asymptotic_weight(np.arange(4), 10.0, purcell))


def test_full_envelope_needs_periodic_pulses(purcell: SystemParams) -> None:
    with pytest.raises(ContractError):
        full_envelope(PulseSequence.fid(10.0), purcell, SpectralDensity.zero())


def test_purcell_factor_over_a_long_train(purcell: SystemParams) -> None:
    # Lorentzian core of width κ against a Gaussian of width √2/T2* = 14κ
    ns = np.arange(1, 2001)
    factor = purcell_envelope_factor(ns, 10.0, purcell)
    assert np.all(np.isfinite(factor))
    assert np.all(np.diff(factor) < 0)
    assert 0.0 < factor[-1] < factor[0] < 1.0
    assert factor[9] == pytest.approx(0.94272, rel=1e-4)


def test_windowed_weights_decrease_until_the_first_sign_change(purcell: SystemParams) -> None:
    ns = np.arange(0, 301)
    weights = revival_weights(ns, 10.0, purcell)
    assert np.all(np.diff(weights) < 0)
    assert np.all(weights > 0)
    np.testing.assert_allclose(weights[[1, 10, 100, 300]], [0.979881, 0.772413, 0.292552, 0.039030], rtol=1e-3)


def test_windowed_weights_against_the_asymptote(purcell: SystemParams) -> None:
    # γ_P nτ = 0.5 and 4
    late = revival_weights(np.array([1000, 8000]), 10.0, purcell)
    assert late[0] < 0
    assert late[1] == pytest.approx(0.02966, rel=1e-2)
    gap = abs(late[1] - asymptotic_weight(8000, 10.0, purcell)) / asymptotic_weight(8000, 10.0, purcell)
    assert 0.15 < gap < 0.25


def test_emission_weights_are_positive_and_non_increasing(purcell: SystemParams) -> None:
    ns = np.array([0, 10, 32, 100, 316, 1000, 3162, 10000, 31623, 100000])
    weights = emission_weights(ns, 10.0, purcell)
    assert weights[0] == pytest.approx(1.0, rel=1e-9)
    assert np.all(weights > 0)
    assert np.all(np.diff(weights) < 0)
    np.testing.assert_allclose(weights[[1, 3, 5, 9]], [0.563683, 0.305166, 0.17128, 0.0541683], rtol=1e-3)
    assert isinstance(emission_weights(10, 10.0, purcell), float)


def test_weight_values_dispatch(purcell: SystemParams) -> None:
    ns = np.arange(3)
    np.testing.assert_allclose(weight_values(ns, 10.0, purcell, WeightMode.ASYMPTOTIC), asymptotic_weight(ns, 10.0, purcell))
    np.testing.assert_allclose(weight_values(ns, 10.0, purcell, WeightMode.EMISSION), emission_weights(ns, 10.0, purcell))
    np.testing.assert_allclose(weight_values(ns, 10.0, purcell, WeightMode.WINDOWED), revival_weights(ns, 10.0, purcell))


def test_full_envelope_emission_weights(purcell: SystemParams) -> None:
    seq = PulseSequence.cpmg(3, 10.0)
    envelope = full_envelope(seq, purcell, SpectralDensity.zero(), weights=WeightMode.EMISSION)
    assert envelope.meta["weights"] == "emission"
    np.testing.assert_allclose(envelope.weights, emission_weights(np.arange(4), 10.0, purcell))


def test_revival_shape_is_hermitian_in_time(purcell: SystemParams) -> None:
    t = np.linspace(-0.5, 0.5, 101)
    detuned = purcell.model_copy(update={"detuning": 0.3})
    shape = revival_shape(500, 10.0, t, detuned)
    np.testing.assert_allclose(shape.values[::-1], np.conj(shape.values), atol=1e-12)
    assert np.max(np.abs(shape.values.imag)) > 1e-6

    resonant = revival_shape(500, 10.0, t, purcell)
    np.testing.assert_allclose(resonant.values.imag, 0.0, atol=1e-12)
    np.testing.assert_allclose(resonant.values.real, resonant.values.real[::-1], atol=1e-12)


def test_late_revival_zero_converges_to_the_asymptote(purcell: SystemParams) -> None:
    # γ_P nτ = 64
    n = 128000
    t = np.linspace(0.0, 2.0 * purcell.t2star, 2001)
    shape = revival_shape(n, 10.0, t, purcell)
    zero = first_zero_crossing(shape.times, shape.values)
    asymptote = asymptotic_first_zero(n, 10.0, purcell)
    assert zero is not None
    assert zero / purcell.t2star == pytest.approx(0.3761, rel=5e-3)
    assert abs(zero - asymptote) / asymptote <= 0.05
