import numpy as np
import pytest

from motordyn.errors import LayerStateError
from motordyn.tensor import (
    Bidirectional, Conv1d, ConvTranspose1d, DiagRNNCell, Flatten, Linear, LSTMCell, Module, Recurrent,
    ReLU, RNNCell, Sequential, Tanh, finite_difference_check,
)

N_INSTANCES = 20


def _layer_cases():
    return {
        "linear": lambda r: (Linear(4, 3, r), r.normal(size=(2, 5, 4))),
        "conv1d": lambda r: (Conv1d(2, 3, 3, 1, r), r.normal(size=(2, 2, 6))),
        "conv1d_transpose": lambda r: (ConvTranspose1d(3, 2, 5, 2, r), r.normal(size=(2, 3, 6))),
        "relu": lambda r: (ReLU(), r.normal(size=(2, 3, 5))),
        "tanh": lambda r: (Tanh(), r.normal(size=(2, 3, 5))),
        "rnn": lambda r: (Recurrent(RNNCell(2, 3, r)), r.normal(size=(2, 2, 5))),
        "rnn_reverse": lambda r: (Recurrent(RNNCell(2, 3, r), reverse=True), r.normal(size=(2, 2, 5))),
        "diag_rnn": lambda r: (Recurrent(DiagRNNCell(3, r)), r.normal(size=(2, 3, 5))),
        "lstm": lambda r: (Recurrent(LSTMCell(2, 3, r)), r.normal(size=(2, 2, 5))),
        "bidirectional_shared": lambda r: (_shared_bi(r), r.normal(size=(2, 3, 5))),
        "bidirectional_split": lambda r: (Bidirectional(DiagRNNCell(2, r), DiagRNNCell(3, r), split=True),
                                          r.normal(size=(2, 5, 5))),
    }


def _shared_bi(r):
    cell = RNNCell(3, 3, r)
    return Bidirectional(cell, cell)


@pytest.mark.parametrize("name", sorted(_layer_cases()))
def test_layer_gradients_by_finite_differences(name):
    make = _layer_cases()[name]
    for seed in range(N_INSTANCES):
        layer, x = make(np.random.default_rng(seed))
        assert finite_difference_check(layer, x, h=1e-5) < 1e-4, (name, seed)


def test_gradcheck_documented_tolerances(rng):
    assert finite_difference_check(Linear(5, 4, rng), rng.normal(size=(3, 5))) < 1e-6
    assert finite_difference_check(Conv1d(2, 3, 3, 1, rng), rng.normal(size=(2, 2, 7))) < 1e-6
    assert finite_difference_check(Recurrent(DiagRNNCell(3, rng)), rng.normal(size=(1, 3, 5))) < 1e-5


def test_gradcheck_with_random_cotangent(rng):
    layer = Recurrent(LSTMCell(2, 2, rng))
    x = rng.normal(size=(1, 2, 4))
    ct = rng.normal(size=(1, 2, 4))
    assert finite_difference_check(layer, x, cotangent=ct) < 1e-4


def test_gradcheck_rejects_bad_step(rng):
    with pytest.raises(ValueError):
        finite_difference_check(Linear(2, 2, rng), rng.normal(size=(1, 2)), h=0.0)


def test_relu_subgradient_at_zero():
    r = ReLU()
    r.forward(np.array([0.0, 1.0, -1.0]))
    assert r.backward(np.ones(3)).tolist() == [0.0, 1.0, 0.0]


def test_backward_before_forward_is_an_error(rng):
    for layer in (Linear(2, 2, rng), Conv1d(1, 1, 1), ReLU(), Recurrent(RNNCell(1, 1))):
        with pytest.raises(LayerStateError):
            layer.backward(np.ones((1, 1, 1)))


def test_gradients_match_parameter_shapes(rng):
    layer = Sequential([("c", Conv1d(2, 4, 3, 1, rng)), ("a", ReLU()), ("r", Recurrent(LSTMCell(4, 3, rng)))])
    y = layer.forward(rng.normal(size=(2, 2, 6)))
    layer.backward(np.ones_like(y))
    for _, p, g in layer.named_parameters():
        assert p.shape == g.shape


def test_backward_accumulates_until_zeroed(rng):
    lin = Linear(3, 2, rng)
    x = rng.normal(size=(4, 3))
    lin.forward(x)
    lin.backward(np.ones((4, 2)))
    once = lin.grads["weight"].copy()
    lin.forward(x)
    lin.backward(np.ones((4, 2)))
    assert np.allclose(lin.grads["weight"], 2 * once)
    lin.zero_grad()
    assert np.all(lin.grads["weight"] == 0)


@pytest.mark.parametrize("m", [1, 4, 16, 32])
def test_recurrent_parameter_counts(m):
    assert DiagRNNCell(m).num_parameters() == 3 * m
    assert RNNCell(m, m).num_parameters() == 2 * m * m + m


def test_forward_is_deterministic(rng):
    layer = Sequential([("c", Conv1d(3, 4, 5, 2, rng)), ("t", Tanh()),
                        ("b", Bidirectional(DiagRNNCell(2, rng), DiagRNNCell(2, rng), split=True)),
                        ("f", Flatten())])
    x = rng.normal(size=(3, 3, 9))
    assert layer.forward(x).tobytes() == layer.forward(x).tobytes()


def test_seeded_initialization_is_reproducible():
    a = Conv1d(3, 4, 5, 2, np.random.default_rng(9))
    b = Conv1d(3, 4, 5, 2, np.random.default_rng(9))
    assert np.array_equal(a.params["weight"], b.params["weight"])
    bound = np.sqrt(1.0 / (3 * 5))
    assert np.all(np.abs(a.params["weight"]) <= bound)


def test_empty_module_has_no_parameters():
    assert Module().num_parameters() == 0
