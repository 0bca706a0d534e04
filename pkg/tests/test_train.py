"""Unit tests for the losses, gradients, and training drivers."""

import numpy as np
import pytest

from concatqec import rea, train
from concatqec.channels import PauliChannel, named_channel
from concatqec.train import (
    TrainConfig,
    TrainedCode,
    TrainingError,
    distinguishability_loss,
    distinguishability_loss_and_grad,
    fidelity_loss,
    fidelity_loss_and_grad,
    gradient,
    train_code,
    train_encoder,
    train_recovery,
    warm_start,
)

RNG = np.random.default_rng(5150)

BIT = named_channel("bit", 0.1)


def small_encoder(n=2, seed=3, scale=0.3):
    layout = rea.build_rea(n, 4, seed=seed)
    params = rea.ReaParameters(
        RNG.uniform(-scale, scale, rea.parameter_count(layout)))
    return layout, params


def test_config_validation():
    with pytest.raises(TrainingError):
        TrainConfig(grad_step=0.0)
    with pytest.raises(TrainingError):
        TrainConfig(restarts=0)
    with pytest.raises(TrainingError):
        TrainConfig(tol=-1.0)


def test_distinguishability_loss_zero_for_noiseless():
    layout, params = small_encoder()
    loss = distinguishability_loss(layout, params, PauliChannel(0, 0, 0))
    assert loss == pytest.approx(0.0, abs=1e-12)


def test_distinguishability_loss_nonnegative_and_bounded():
    layout, params = small_encoder()
    loss = distinguishability_loss(layout, params, named_channel("dep", 0.2))
    assert 0.0 <= loss <= 1.0


def test_distinguishability_gradient_matches_fd():
    layout, params = small_encoder(n=3, seed=1)
    layout3 = rea.build_rea(3, 6, seed=1)
    x = RNG.uniform(-0.4, 0.4, rea.parameter_count(layout3))
    _, g = distinguishability_loss_and_grad(layout3, rea.ReaParameters(x), BIT)
    fd = gradient(lambda v: distinguishability_loss(
        layout3, rea.ReaParameters(v), BIT), x)
    assert np.max(np.abs(g - fd)) < 1e-8


def test_fidelity_gradient_matches_fd():
    enc_layout, enc_params = small_encoder(n=2, seed=2)
    rec_layout = rea.build_rea(3, 5, seed=4)
    x = RNG.uniform(-0.4, 0.4, rea.parameter_count(rec_layout))
    _, g = fidelity_loss_and_grad(enc_layout, enc_params, rec_layout,
                                  rea.ReaParameters(x), BIT, 1)
    fd = gradient(lambda v: fidelity_loss(
        enc_layout, enc_params, rec_layout, rea.ReaParameters(v), BIT, 1), x)
    assert np.max(np.abs(g - fd)) < 1e-8


def test_fidelity_loss_modes():
    enc_layout, enc_params = small_encoder(n=2, seed=2)
    rec_layout = rea.build_rea(3, 5, seed=4)
    x = rea.ReaParameters(RNG.uniform(-0.3, 0.3, rea.parameter_count(rec_layout)))
    avg = fidelity_loss(enc_layout, enc_params, rec_layout, x, BIT, 1)
    worst = fidelity_loss(enc_layout, enc_params, rec_layout, x, BIT, 1,
                          mode="worst")
    assert avg <= worst + 1e-12
    with pytest.raises(TrainingError):
        fidelity_loss(enc_layout, enc_params, rec_layout, x, BIT, 1, mode="median")


def test_fidelity_loss_zero_for_noiseless_identity():
    enc_layout, _ = small_encoder(n=2)
    zero = rea.zero_parameters(enc_layout)
    rec_layout = rea.build_rea(3, 4, seed=0)
    loss = fidelity_loss(enc_layout, zero, rec_layout,
                         rea.zero_parameters(rec_layout),
                         PauliChannel(0, 0, 0), 1)
    assert loss == pytest.approx(0.0, abs=1e-12)


def test_fidelity_loss_register_mismatch():
    enc_layout, enc_params = small_encoder(n=2)
    rec_layout = rea.build_rea(4, 4, seed=0)
    with pytest.raises(TrainingError):
        fidelity_loss(enc_layout, enc_params, rec_layout,
                      rea.zero_parameters(rec_layout), BIT, 1)


def test_gradient_rejects_nonfinite():
    with pytest.raises(TrainingError):
        gradient(lambda x: float("nan"), np.zeros(2))


def test_gradient_central_difference_order():
    # quadratic: central differences are exact up to rounding
    f = lambda x: float(x[0] ** 2 + 3 * x[1])
    g = gradient(f, np.array([1.0, 2.0]), h=1e-4)
    assert np.allclose(g, [2.0, 3.0], atol=1e-8)


def test_train_encoder_noiseless_is_trivial():
    config = TrainConfig(seed=1, restarts=1, max_iterations=5)
    fit = train_encoder(2, PauliChannel(0, 0, 0), config)
    assert fit.loss == pytest.approx(0.0, abs=1e-9)


def test_train_encoder_deterministic():
    config = TrainConfig(seed=7, restarts=1, max_iterations=30)
    a = train_encoder(2, BIT, config)
    b = train_encoder(2, BIT, config)
    assert np.array_equal(a.params.values, b.params.values)
    assert a.loss == b.loss


def test_train_encoder_improves_over_identity():
    config = TrainConfig(seed=0, restarts=1, max_iterations=120)
    fit = train_encoder(3, BIT, config)
    baseline = distinguishability_loss(fit.layout,
                                       rea.zero_parameters(fit.layout), BIT)
    assert fit.loss < baseline


def test_warm_start_prefix_copy():
    prev = rea.build_rea(4, 3, seed=0)
    new = rea.build_rea(4, 5, seed=1)
    prev_params = rea.ReaParameters(np.arange(rea.parameter_count(prev), dtype=float))
    out = warm_start(prev, prev_params, new)
    assert len(out) == rea.parameter_count(new)
    assert np.array_equal(out.values[: len(prev_params)], prev_params.values)
    assert np.all(out.values[len(prev_params):] == 0.0)
    with pytest.raises(TrainingError):
        warm_start(prev, prev_params, rea.build_rea(3, 3, seed=0))


def test_train_code_round_trip_and_losses():
    config = TrainConfig(seed=0, restarts=1, max_iterations=25,
                         recovery_ancillas=1)
    trained = train_code(2, BIT, config)
    assert trained.n == 2 and trained.r == 1
    assert set(trained.losses) == {
        "distinguishability", "fidelity_average", "fidelity_worst"}
    assert trained.losses["fidelity_average"] <= trained.losses["fidelity_worst"] + 1e-12
    back = TrainedCode.from_dict(trained.to_dict())
    assert np.array_equal(back.encoder_params.values, trained.encoder_params.values)
    assert np.array_equal(back.recovery_params.values, trained.recovery_params.values)
    assert back.encoder_layout == trained.encoder_layout


def test_recovery_register_cap():
    enc_layout, enc_params = small_encoder(n=2)
    with pytest.raises(Exception):
        train_recovery(enc_layout, enc_params, BIT, 11,
                       TrainConfig(seed=0, restarts=1, max_iterations=1))
