"""Unit tests for Pauli channel descriptions."""

import numpy as np
import pytest

from concatqec.channels import (
    ADEP_PROPORTIONS,
    ChannelError,
    PauliChannel,
    apply_to_bloch,
    bloch_eta,
    kraus,
    named_channel,
    worst_case_infidelity,
)


def test_total_strength_and_proportions():
    ch = PauliChannel(0.02, 0.03, 0.05)
    assert ch.p == pytest.approx(0.1)
    assert ch.proportions == pytest.approx((0.2, 0.3, 0.5))


def test_noiseless_proportions():
    assert PauliChannel(0, 0, 0).proportions == (0.0, 0.0, 0.0)


def test_validation():
    with pytest.raises(ChannelError):
        PauliChannel(-0.1, 0.0, 0.0)
    with pytest.raises(ChannelError):
        PauliChannel(0.5, 0.4, 0.3)


def test_named_channels():
    assert named_channel("bit", 0.1).as_tuple() == pytest.approx((0.1, 0, 0))
    assert named_channel("yflip", 0.1).as_tuple() == pytest.approx((0, 0.1, 0))
    assert named_channel("dep", 0.3).proportions == pytest.approx((1 / 3,) * 3)
    adep = named_channel("adep", 0.1)
    assert adep.proportions == pytest.approx(ADEP_PROPORTIONS)
    assert adep.p == pytest.approx(0.1)
    with pytest.raises(ChannelError):
        named_channel("nope", 0.1)
    with pytest.raises(ChannelError):
        named_channel("bit", 1.5)


def test_bloch_eta_closed_form():
    ch = PauliChannel(0.02, 0.03, 0.05)
    eta = bloch_eta(ch)
    # eta_P = 1 - 2 (p - p_P)
    assert eta.eta_x == pytest.approx(1 - 2 * (0.1 - 0.02))
    assert eta.eta_y == pytest.approx(1 - 2 * (0.1 - 0.03))
    assert eta.eta_z == pytest.approx(1 - 2 * (0.1 - 0.05))


def test_kraus_completeness_and_action():
    ch = PauliChannel(0.05, 0.0, 0.1)
    ops = kraus(ch).operators
    assert len(ops) == 3  # zero-probability Y term omitted
    total = sum(op.conj().T @ op for op in ops)
    assert np.allclose(total, np.eye(2), atol=1e-12)
    # action on a Bloch vector matches the eta picture
    r = np.array([0.3, -0.2, 0.5])
    paulis = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]),
              np.array([[1, 0], [0, -1]])]
    rho = 0.5 * (np.eye(2) + sum(c * s for c, s in zip(r, paulis)))
    out = sum(op @ rho @ op.conj().T for op in ops)
    r_out = [np.trace(out @ s).real for s in paulis]
    assert np.allclose(r_out, apply_to_bloch(ch, r), atol=1e-12)


def test_worst_case_infidelity():
    # (1 - min eta) / 2 = p * (1 - min proportion)
    ch = PauliChannel(0.0, 0.1, 0.0)
    assert worst_case_infidelity(ch) == pytest.approx(0.1)
    dep = named_channel("dep", 0.3)
    assert worst_case_infidelity(dep) == pytest.approx(0.2)
    assert worst_case_infidelity(PauliChannel(0, 0, 0)) == pytest.approx(0.0)


def test_dict_round_trip():
    ch = PauliChannel(0.02, 0.03, 0.05)
    assert PauliChannel.from_dict(ch.to_dict()) == ch
