import numpy as np
import pytest

from random_anc import autodiff as ad
from random_anc.autodiff import Parameter, Tape, Tensor
from random_anc.errors import NumericError, ShapeError, TapeError

from gradcheck import check


def p64(rng, *shape, low=-1.0, high=1.0):
    return Parameter(rng.uniform(low, high, size=shape), dtype=np.float64)


def weighted(out, w):
    # Random projection to a scalar so every output entry matters.
    return ad.sum_all(ad.mul(out, Tensor(w)))


@pytest.mark.parametrize("op", ["add", "sub", "mul"])
def test_binary_ops_broadcast_grad(op, rng):
    a = p64(rng, 3, 4, 5)
    b = p64(rng, 4, 5)
    w = rng.normal(size=(3, 4, 5))
    fn = getattr(ad, op)
    check(lambda: weighted(fn(a, b), w), [a, b])


@pytest.mark.parametrize("name", ["tanh", "square", "neg"])
def test_unary_ops_grad(name, rng):
    a = p64(rng, 2, 3, 4)
    w = rng.normal(size=(2, 3, 4))
    check(lambda: weighted(getattr(ad, name)(a), w), [a])


def test_sqrt_grad_positive(rng):
    a = p64(rng, 5, 3, low=0.5, high=2.0)
    w = rng.normal(size=(5, 3))
    check(lambda: weighted(ad.sqrt(a), w), [a])


def test_sqrt_grad_is_zero_at_zero():
    a = Parameter(np.zeros((2, 2)), dtype=np.float64)
    with Tape() as tape:
        loss = ad.sum_all(ad.sqrt(a))
    ad.backward(tape, loss)
    assert np.all(a.grad == 0)


def test_scale_shift_reductions(rng):
    a = p64(rng, 2, 4, 3)
    w = rng.normal(size=(2, 4))
    check(lambda: weighted(ad.sum_rows(ad.shift(ad.scale(a, 1.7), -0.3)), w), [a])
    check(lambda: ad.mean_all(ad.square(a)), [a])


def test_project_outer_and_affine_tanh(rng):
    x = p64(rng, 6, 4)
    w, b = p64(rng, 5), p64(rng, 5)
    W, B = p64(rng, 4, 5), p64(rng, 4, 5)
    g = rng.normal(size=(6, 4, 5))
    check(lambda: weighted(ad.affine_tanh(ad.project_outer(x, w, b), W, B), g), [x, w, b, W, B])


def test_affine_tanh_matches_composition(rng):
    X = rng.normal(size=(3, 4, 5))
    W, B = rng.normal(size=(4, 5)), rng.normal(size=(4, 5))
    fused = ad.affine_tanh(Tensor(X), Tensor(W), Tensor(B)).values
    np.testing.assert_allclose(fused, np.tanh(X * W + B), rtol=1e-6)


def test_shared_subexpression_accumulates():
    a = Parameter(np.array([[2.0]]), dtype=np.float64)
    with Tape() as tape:
        b = ad.mul(a, a)
        loss = ad.add(b, b)
    ad.backward(tape, loss)
    assert a.grad[0, 0] == pytest.approx(8.0)


def test_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4,\)"):
        ad.mul(Tensor(np.ones((2, 3))), Tensor(np.ones(4)))


def test_backward_needs_scalar_loss():
    a = Parameter(np.ones((2, 2)))
    with Tape() as tape:
        out = ad.tanh(a)
    with pytest.raises(ShapeError):
        ad.backward(tape, out)


def test_backward_rejects_foreign_loss():
    a = Parameter(np.ones((2, 2)))
    with Tape():
        loss = ad.sum_all(a)
    with pytest.raises(TapeError):
        ad.backward(Tape(), loss)


def test_no_grad_records_nothing():
    a = Parameter(np.ones(3))
    with Tape() as tape:
        with ad.no_grad():
            ad.tanh(a)
        assert len(tape) == 0
        ad.tanh(a)
    assert len(tape) == 1


def test_constants_are_not_recorded():
    with Tape() as tape:
        ad.mul(Tensor(np.ones(3)), Tensor(np.ones(3)))
    assert len(tape) == 0


def test_adam_first_step_oracle():
    # After one step m_hat = g and v_hat = g**2, so the update is lr * g / (|g| + eps).
    p = Parameter(np.array([1.0, -2.0, 0.5]), dtype=np.float64)
    g = np.array([0.3, -4.0, 0.0])
    p.grad = g
    ad.adam_step(p, lr=0.01)
    np.testing.assert_allclose(p.values, [1.0 - 0.01 * 0.3 / (0.3 + 1e-8), -2.0 + 0.01 * 4 / (4 + 1e-8), 0.5])


def test_adam_matches_reference_over_steps(rng):
    p = Parameter(rng.normal(size=4), dtype=np.float64)
    ref = p.values.copy()
    m = v = np.zeros(4)
    for t in range(1, 21):
        g = rng.normal(size=4)
        p.grad = g
        ad.adam_step(p, 1e-3, 0.9, 0.999, 1e-8)
        p.zero_grad()
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 1e-3 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    np.testing.assert_allclose(p.values, ref, rtol=1e-12)


def test_adam_rejects_non_finite_gradient():
    p = Parameter(np.ones(2))
    p.grad = np.array([np.nan, 1.0])
    with pytest.raises(NumericError):
        ad.adam_step(p)


def test_tape_is_thread_local():
    import threading

    a = Parameter(np.ones(2))
    seen = []
    with Tape() as tape:
        t = threading.Thread(target=lambda: seen.append(ad._active_tape()))
        t.start()
        t.join()
        ad.tanh(a)
    assert seen == [None]
    assert len(tape) == 1


def test_three_layer_composition_tight(rng):
    x = p64(rng, 4, 3)
    w, b = p64(rng, 5), p64(rng, 5)
    W = p64(rng, 3, 5)
    g = rng.normal(size=(4, 3))
    check(lambda: weighted(ad.tanh(ad.sum_rows(ad.mul(ad.tanh(ad.project_outer(x, w, b)), W))), g),
          [x, w, b, W], tol=1e-5)
