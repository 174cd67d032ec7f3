import math

import numpy as np
import pytest

from core.exceptions import DomainError, ParameterError
from core.model import (
    EchoEnvelope,
    PulseSequence,
    SequenceKind,
    SystemParams,
    balanced_integral,
    sign_function,
    splitting_residue,
    validate,
)


def test_cpmg_pulse_times_and_echoes() -> None:
    seq = PulseSequence.cpmg(3, 2.0)
    assert seq.kind is SequenceKind.CPMG
    assert seq.pulse_times == (1.0, 3.0, 5.0)
    assert seq.total_time == 6.0
    np.testing.assert_array_equal(seq.echo_times(), [0.0, 2.0, 4.0, 6.0])


def test_hahn_is_single_pulse_cpmg() -> None:
    hahn = PulseSequence.hahn(2.0)
    assert hahn.pulse_times == PulseSequence.cpmg(1, 2.0).pulse_times
    assert hahn.is_periodic


def test_fid_has_only_the_initial_echo() -> None:
    seq = PulseSequence.fid(5.0)
    assert seq.n_pulses == 0
    np.testing.assert_array_equal(seq.echo_times(), [0.0])


def test_sign_function_is_right_continuous() -> None:
    seq = PulseSequence.cpmg(3, 2.0)
    assert sign_function(seq, 0.5) == 1
    assert sign_function(seq, 1.0) == -1
    assert sign_function(seq, 3.5) == 1
    np.testing.assert_array_equal(sign_function(seq, np.array([0.0, 2.0, 4.0])), [1, -1, 1])


def test_balanced_integral_vanishes_at_echoes() -> None:
    seq = PulseSequence.cpmg(5, 1.3)
    values = balanced_integral(seq, seq.echo_times())
    np.testing.assert_allclose(values, 0.0, atol=1e-14)
    assert balanced_integral(seq, 0.65) == pytest.approx(0.65)
    assert balanced_integral(seq, 1.3 + 0.65) == pytest.approx(-0.65)


def test_balanced_integral_for_custom_sequence() -> None:
    seq = PulseSequence.custom([1.0], 3.0)
    assert balanced_integral(seq, 2.0) == pytest.approx(0.0)
    assert balanced_integral(seq, 3.0) == pytest.approx(-1.0)


def test_times_outside_the_sequence_are_rejected() -> None:
    seq = PulseSequence.cpmg(2, 1.0)
    with pytest.raises(DomainError):
        sign_function(seq, 2.5)
    with pytest.raises(DomainError):
        balanced_integral(seq, -0.1)


def test_pulse_times_must_increase() -> None:
    with pytest.raises(ParameterError):
        PulseSequence.custom([2.0, 1.0], 3.0)
    with pytest.raises(ParameterError):
        PulseSequence.custom([3.0], 3.0)


def test_kappa_out_defaults_to_remainder() -> None:
    params = SystemParams(kappa_total=1.0, kappa_in=0.3, t2star=1.0)
    assert params.kappa_2 == pytest.approx(0.7)


def test_kappa_partition_mismatch_is_a_parameter_error() -> None:
    with pytest.raises(ParameterError):
        validate({"kappa_total": 1.0, "kappa_in": 0.5, "kappa_out": 2.0, "t2star": 1.0})


def test_validate_flags_and_warnings(purcell: SystemParams) -> None:
    checked = validate(purcell, tau=10.0)
    assert checked.flags.high_q
    assert checked.flags.narrow_cavity
    assert checked.flags.slow_pulsing
    assert checked.warnings == ()

    fast = validate(purcell, tau=1.0)
    assert not fast.flags.slow_pulsing
    assert any(w.startswith("slow_pulsing") for w in fast.warnings)


def test_validate_rejects_nonpositive_tau(purcell: SystemParams) -> None:
    with pytest.raises(ParameterError):
        validate(purcell, tau=0.0)


def test_echo_envelope_shapes_and_delta_delta() -> None:
    tau = 10.0
    env = EchoEnvelope(tau=tau, values=np.ones(4), weights=np.ones(4), qubit_splitting=1000.0)
    assert env.n_echoes == 3
    np.testing.assert_allclose(env.echo_times, [0.0, 10.0, 20.0, 30.0])
    assert env.delta_delta == pytest.approx(1000.0 % (2.0 * math.pi / tau))
    with pytest.raises(ParameterError):
        EchoEnvelope(tau=tau, values=np.ones(4), weights=np.ones(3))


@pytest.mark.parametrize("splitting", [-1000.0, -0.3, 0.0, 0.3, 1000.0])
def test_delta_delta_is_canonical_for_either_sign(splitting: float) -> None:
    tau = 10.0
    period = 2.0 * math.pi / tau
    env = EchoEnvelope(tau=tau, values=np.ones(2), weights=np.ones(2), qubit_splitting=splitting)
    assert 0.0 <= env.delta_delta < period
    # same phase factor e^{iδ_Δτ} as the raw splitting
    assert np.exp(1j * env.delta_delta * tau) == pytest.approx(np.exp(1j * splitting * tau))


def test_splitting_residue_of_opposite_signs_sums_to_period() -> None:
    tau = 10.0
    period = 2.0 * math.pi / tau
    assert splitting_residue(0.3, tau) + splitting_residue(-0.3, tau) == pytest.approx(period)
    assert splitting_residue(-1e-18, tau) < period
