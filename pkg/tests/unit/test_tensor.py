"""
Unit Tests for the tensor engine

Reverse-mode gradients of every primitive against central finite
differences, tape bookkeeping, grad mode and dtype handling.
"""

import threading

import numpy as np
import pytest

from fimguard.core import functional as F
from fimguard.core.gradcheck import finite_difference_gradient, relative_error
from fimguard.core.tensor import (
    Tensor,
    apply_primitive,
    backward,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    set_default_dtype,
)
from fimguard.errors import DomainError, FimGuardError, ShapeError
from fimguard.models.network import build_convnet, build_mlp
from fimguard.training.trainer import regularized_loss

GRAD_TOL = 1e-4


def check_gradient(fn, x: np.ndarray, step: float = 1e-6) -> float:
    """Relative error between backward() and central differences of a scalar fn."""
    xt = Tensor(x.copy(), requires_grad=True)
    analytic = backward(fn(xt), inputs=[xt], accumulate=False)[xt]
    numeric = finite_difference_gradient(fn, Tensor(x.copy()), step=step).data
    return relative_error(analytic, numeric)


def weighted_sum(out: Tensor, seed: int = 0) -> Tensor:
    weights = np.random.default_rng(seed).standard_normal(out.shape)
    return (out * weights).sum()


UNARY_CASES = {
    "negate": lambda t: -t,
    "exp": lambda t: t.exp(),
    "tanh": lambda t: t.tanh(),
    "softmax": lambda t: t.softmax(),
    "reshape": lambda t: t.reshape(3, 4),
    "slice": lambda t: t[1:, ::2],
    "sum_axis": lambda t: t.sum(axis=0),
    "mean_axis": lambda t: t.mean(axis=1, keepdims=True),
    "max_axis": lambda t: t.max(axis=1),
    "square": lambda t: t * t,
}


class TestPrimitiveGradients:
    """Gradient correctness of each primitive."""

    @pytest.mark.parametrize("name", sorted(UNARY_CASES))
    @pytest.mark.parametrize("seed", range(8))
    def test_unary_primitives(self, name, seed):
        """Unary primitives match finite differences."""
        x = np.random.default_rng(seed).standard_normal((4, 3))
        fn = UNARY_CASES[name]
        assert check_gradient(lambda t: weighted_sum(fn(t), seed), x) <= GRAD_TOL

    @pytest.mark.parametrize("seed", range(5))
    def test_relu_away_from_kink(self, seed):
        """relu gradient is exact away from zero."""
        x = np.random.default_rng(seed).standard_normal((5, 4))
        x[np.abs(x) < 0.05] = 0.5
        assert check_gradient(lambda t: weighted_sum(t.relu(), seed), x) <= GRAD_TOL

    @pytest.mark.parametrize("seed", range(5))
    def test_log_and_reciprocal_on_positive_inputs(self, seed):
        """log and reciprocal gradients on strictly positive inputs."""
        x = np.random.default_rng(seed).uniform(0.2, 2.0, size=(3, 4))
        assert check_gradient(lambda t: weighted_sum(t.log(), seed), x) <= GRAD_TOL
        assert check_gradient(lambda t: weighted_sum(t.reciprocal(), seed), x) <= GRAD_TOL

    @pytest.mark.parametrize("seed", range(5))
    def test_broadcast_add_and_multiply(self, seed):
        """Broadcasting operands receive summed gradients."""
        rng = np.random.default_rng(seed)
        other = rng.standard_normal((1, 3))
        x = rng.standard_normal((4, 3))
        assert check_gradient(lambda t: weighted_sum(t + other, seed), x) <= GRAD_TOL
        assert check_gradient(lambda t: weighted_sum(t * other, seed), x) <= GRAD_TOL
        y = rng.standard_normal((4, 3))
        assert check_gradient(lambda t: weighted_sum(Tensor(y) * t.sum(axis=0), seed),
                              rng.standard_normal(3)) <= GRAD_TOL

    @pytest.mark.parametrize("seed", range(5))
    def test_matmul_both_operands(self, seed):
        """matmul gradients for the left and right operand."""
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        assert check_gradient(lambda t: weighted_sum(t @ b, seed), a) <= GRAD_TOL
        assert check_gradient(lambda t: weighted_sum(Tensor(a) @ t, seed), b) <= GRAD_TOL

    @pytest.mark.parametrize("seed", range(4))
    def test_conv2d_input_and_weight(self, seed):
        """conv2d gradients w.r.t. input and filters, with padding and stride."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((2, 2, 6, 6))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        stride = 1 + seed % 2
        fx = lambda t: weighted_sum(F.conv2d(t, Tensor(w), Tensor(b), stride, 1), seed)
        fw = lambda t: weighted_sum(F.conv2d(Tensor(x), t, Tensor(b), stride, 1), seed)
        assert check_gradient(fx, x) <= GRAD_TOL
        assert check_gradient(fw, w) <= GRAD_TOL

    @pytest.mark.parametrize("training", [True, False])
    def test_batch_norm_input_gradient(self, training):
        """batch_norm gradient in both modes (running stats fixed)."""
        rng = np.random.default_rng(3)
        x = rng.standard_normal((5, 3, 2, 2))
        gamma, beta = rng.uniform(0.5, 1.5, 3), rng.standard_normal(3)

        def fn(t):
            mean, var = np.zeros(3), np.ones(3)
            return weighted_sum(F.batch_norm(t, Tensor(gamma), Tensor(beta), mean, var,
                                             training=training), 3)

        assert check_gradient(fn, x) <= GRAD_TOL

    def test_maxpool_gradient(self):
        """maxpool routes the gradient to each window's maximizer."""
        x = np.random.default_rng(5).permutation(64).reshape(1, 1, 8, 8).astype(float)
        assert check_gradient(lambda t: weighted_sum(F.maxpool2d(t, 2), 5), x) <= GRAD_TOL

    @pytest.mark.parametrize("mu", [0.0, 0.022, 0.5])
    @pytest.mark.parametrize("seed", range(4))
    def test_regularized_loss_on_parameters(self, mu, seed):
        """The full CE + mu * trace loss differentiates correctly w.r.t. a weight."""
        rng = np.random.default_rng(seed)
        net = build_mlp(5, [6], 3, seed=seed)
        x = rng.uniform(0, 1, size=(4, 5))
        labels = rng.integers(0, 3, size=4)
        layer = net.final_linear()
        original = layer.weight

        def fn(t):
            layer.weight = t
            try:
                return regularized_loss(net.forward(x), labels, mu)
            finally:
                layer.weight = original

        assert check_gradient(fn, original.data.copy()) <= GRAD_TOL

    def test_convnet_input_gradient(self):
        """End-to-end input gradient through conv, BN, pooling and FC."""
        net = build_convnet((1, 8, 8), 3, seed=2).freeze()
        x = np.random.default_rng(2).uniform(0, 1, size=(1, 1, 8, 8))
        assert check_gradient(lambda t: net.forward(t)[0, 1].log(), x) <= GRAD_TOL


class TestTape:
    """Tape bookkeeping."""

    def test_scalar_example(self):
        """d(x*x)/dx = 2x."""
        x = Tensor([3.0], requires_grad=True)
        grads = backward((x * x).sum())
        np.testing.assert_allclose(grads[x], [6.0])

    def test_accumulate_into_grad(self):
        """accumulate=True adds into .grad across calls."""
        x = Tensor([1.0, 2.0], requires_grad=True)
        backward((x * 2.0).sum())
        backward((x * 3.0).sum())
        np.testing.assert_allclose(x.grad, [5.0, 5.0])

    def test_no_accumulate_leaves_grad_untouched(self):
        """accumulate=False only returns the gradients."""
        x = Tensor([1.0], requires_grad=True)
        backward((x * 2.0).sum(), accumulate=False)
        assert x.grad is None

    def test_consumed_tape_raises(self):
        """Replaying a freed tape is an error."""
        x = Tensor([1.0, 2.0], requires_grad=True)
        y = (x.exp()).sum()
        backward(y)
        with pytest.raises(FimGuardError):
            backward(y)

    def test_retain_graph_allows_replay(self):
        """retain_graph keeps saved values for a second pass."""
        x = Tensor([0.5], requires_grad=True)
        y = x.tanh().sum()
        first = backward(y, retain_graph=True, accumulate=False)[x]
        second = backward(y, accumulate=False)[x]
        np.testing.assert_allclose(first, second)

    @pytest.mark.parametrize("seed", range(5))
    def test_backward_is_linear(self, seed):
        """The gradient of a*f + b*g is a*grad f + b*grad g."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.2, 2.0, size=(3, 4))
        a, b = (float(v) for v in rng.standard_normal(2))

        def f(t):
            return weighted_sum(t.tanh() * t, seed)

        def g(t):
            return weighted_sum(t.log().softmax(), seed + 1)

        def grad(fn):
            xt = Tensor(x.copy(), requires_grad=True)
            return backward(fn(xt), inputs=[xt], accumulate=False)[xt]

        combined = grad(lambda t: f(t) * a + g(t) * b)
        np.testing.assert_allclose(combined, a * grad(f) + b * grad(g), rtol=1e-10, atol=1e-12)

    def test_inputs_restrict_result(self):
        """Only the requested leaves are returned."""
        a = Tensor([1.0], requires_grad=True)
        b = Tensor([2.0], requires_grad=True)
        grads = backward((a * b).sum(), inputs=[a])
        assert a in grads and b not in grads
        assert b.grad is None

    def test_non_scalar_output_rejected(self):
        """backward needs a single-element output."""
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ShapeError):
            backward(x * 2.0)

    def test_unknown_primitive(self):
        """apply_primitive rejects unknown kinds."""
        with pytest.raises(ValueError):
            apply_primitive("fft", (Tensor([1.0]),))

    def test_shape_mismatch(self):
        """Incompatible shapes raise ShapeError."""
        with pytest.raises(ShapeError):
            Tensor(np.ones((2, 3))) + Tensor(np.ones((4, 3)))


class TestDomainAndClamp:
    """Clamped log and reciprocal."""

    def test_unclamped_log_of_zero_raises(self):
        """log(0) without a clamp is a DomainError."""
        with pytest.raises(DomainError):
            Tensor([0.0, 1.0]).log()

    def test_clamped_reciprocal_is_finite(self):
        """reciprocal_safe floors at PROB_CLAMP."""
        out = F.reciprocal_safe(Tensor([0.0, 0.5]))
        np.testing.assert_allclose(out.data, [1.0 / F.PROB_CLAMP, 2.0])

    def test_clamped_gradient_is_zero_below_clamp(self):
        """Below the clamp the input receives no gradient."""
        x = Tensor([1e-20, 0.5], requires_grad=True)
        grads = backward(F.log_safe(x).sum())
        assert grads[x][0] == 0.0
        assert grads[x][1] == pytest.approx(2.0)

    def test_cross_entropy_labels(self):
        """Per-sample CE for integer labels."""
        probs = Tensor(np.array([[0.5, 0.5], [0.25, 0.75]]))
        ce = F.cross_entropy_labels(probs, np.array([0, 1]))
        np.testing.assert_allclose(ce.data, [np.log(2.0), -np.log(0.75)])


class TestModes:
    """Grad mode and default dtype."""

    def test_no_grad_records_nothing(self):
        """Inside no_grad outputs are leaves without requires_grad."""
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            y = x * 2.0
            assert not is_grad_enabled()
        assert is_grad_enabled()
        assert y.is_leaf and not y.requires_grad

    def test_no_grad_is_thread_local(self):
        """Another thread keeps grad mode on."""
        seen = []
        with no_grad():
            worker = threading.Thread(target=lambda: seen.append(is_grad_enabled()))
            worker.start()
            worker.join()
        assert seen == [True]

    def test_set_default_dtype(self):
        """float32 default applies to integer data; other dtypes are rejected."""
        previous = get_default_dtype()
        try:
            set_default_dtype(np.float32)
            assert Tensor([1, 2]).dtype == np.float32
            with pytest.raises(ValueError):
                set_default_dtype(np.int32)
        finally:
            set_default_dtype(previous)
        assert Tensor([1, 2]).dtype == np.float64

    def test_gradcheck_rejects_bad_step(self):
        """finite_difference_gradient needs a positive step."""
        with pytest.raises(ValueError):
            finite_difference_gradient(lambda t: t.sum(), Tensor([1.0]), step=0.0)
