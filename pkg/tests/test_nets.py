import numpy as np

from gailbias.nets import (
    Adam,
    leaky,
    leaky_grad,
    log_softmax,
    one_hot,
    sigmoid,
    softmax,
    softplus,
)


def test_sigmoid_extremes_finite():
    z = np.array([-1e4, -50.0, 0.0, 50.0, 1e4])
    s = sigmoid(z)
    assert np.all(np.isfinite(s))
    assert s[2] == 0.5
    assert s[0] >= 0.0 and s[-1] <= 1.0


def test_softplus_matches_reference_and_large_args():
    z = np.array([-30.0, -1.0, 0.0, 1.0, 30.0, 800.0])
    out = softplus(z)
    ref = np.log1p(np.exp(np.minimum(z, 30.0)))
    assert np.allclose(out[:5], ref[:5], rtol=1e-12)
    # for very large z, softplus(z) ~ z and must not overflow
    assert np.isfinite(out[5])
    assert abs(out[5] - 800.0) < 1e-9


def test_log_softmax_normalized():
    rng = np.random.Generator(np.random.PCG64(0))
    logits = rng.normal(size=(7, 5)) * 40.0
    ls = log_softmax(logits)
    assert np.allclose(np.exp(ls).sum(axis=1), 1.0, atol=1e-12)
    p = softmax(logits)
    assert np.allclose(p, np.exp(ls), atol=1e-12)


def test_leaky_relu_and_grad():
    z = np.array([-2.0, 0.0, 3.0])
    assert np.allclose(leaky(z, 0.01), [-0.02, 0.0, 3.0])
    assert np.allclose(leaky_grad(z, 0.01), [0.01, 0.01, 1.0])


def test_one_hot():
    oh = one_hot(np.array([0, 2, 4]), 5)
    assert oh.shape == (3, 5)
    assert oh.sum() == 3.0
    assert oh[0, 0] == 1.0 and oh[1, 2] == 1.0 and oh[2, 4] == 1.0


def test_adam_first_step_is_signed_lr():
    # with zero state the first update is lr * g / (|g| + eps), i.e. ~lr * sign(g)
    p = np.array([1.0, -3.0])
    g = np.array([0.5, -2.0])
    opt = Adam([p], lr=0.1)
    opt.step([p], [g])
    assert np.allclose(p, [0.9, -2.9], atol=1e-6)


def test_adam_matches_manual_recurrence():
    p = np.array([0.3])
    opt = Adam([p], lr=0.01)
    m = v = 0.0
    ref = 0.3
    for t in range(1, 6):
        g = float(np.sin(t))
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref -= 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        opt.step([p], [np.array([g])])
        assert abs(p[0] - ref) < 1e-12
