"""Reverse-mode autodiff: forward semantics, backward rules, FD checks."""

import numpy as np
import pytest

from tcblran.autodiff import (
    Node,
    add,
    backward,
    gradient_check,
    matmul,
    mean,
    rows,
    scale,
    scale_rows,
    subtract,
    sum_of_squares,
    tanh,
    transpose,
)
from tcblran.errors import NumericError


def test_tanh_of_zero_vector():
    out = tanh(Node(np.zeros(5), name="x"))
    np.testing.assert_array_equal(out.value, np.zeros(5))


def test_sum_of_squares_three_four():
    out = sum_of_squares(Node(np.array([3.0, 4.0]), name="x"))
    assert float(out.value) == 25.0


def test_matmul_identity_bit_identical():
    a = np.random.default_rng(0).standard_normal((4, 4))
    out = matmul(Node(np.eye(4)), Node(a, name="a"))
    np.testing.assert_array_equal(out.value, a)


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(Node(np.zeros((2, 3))), Node(np.zeros((2, 3))))


def test_add_shape_mismatch_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(3, 2\)"):
        add(Node(np.zeros((2, 3))), Node(np.zeros((3, 2))))


def test_grad_of_sum_of_squares_is_twice_input():
    a = np.array([[1.0, -2.0], [0.5, 3.0]])
    leaf = Node(a, name="a")
    grads = backward(sum_of_squares(leaf))
    np.testing.assert_array_equal(grads["a"], 2.0 * a)


def test_fanout_accumulates():
    x = Node(np.array([1.5]), name="x")
    y = add(x, x)
    grads = backward(sum_of_squares(y))
    # d/dx sum((2x)^2) = 8x
    np.testing.assert_allclose(grads["x"], 8.0 * x.value, atol=1e-15)


def test_backward_requires_scalar_root():
    x = Node(np.ones(3), name="x")
    with pytest.raises(ValueError, match="scalar"):
        backward(add(x, x))


def test_unused_parameter_gradient_is_exact_zero():
    x = Node(np.ones(3), name="x")
    w = Node(np.ones((2, 2)), name="w")
    grads = backward(sum_of_squares(x), params={"x": x, "w": w})
    assert grads["w"].shape == (2, 2)
    assert np.all(grads["w"] == 0.0)


def test_backward_deterministic():
    rng = np.random.default_rng(4)
    a, b = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))

    def run():
        na, nb = Node(a, name="a"), Node(b, name="b")
        return backward(sum_of_squares(tanh(matmul(na, nb))), {"a": na, "b": nb})

    g1, g2 = run(), run()
    np.testing.assert_array_equal(g1["a"], g2["a"])
    np.testing.assert_array_equal(g1["b"], g2["b"])


def test_constants_are_not_differentiated():
    x = Node(np.ones(2), name="x")
    out = matmul(np.array([[2.0, 0.0], [0.0, 2.0]]), x)
    grads = backward(sum_of_squares(out))
    assert set(grads) == {"x"}


class TestPerOpFiniteDifferences:
    """Each registered op against central differences on random shapes."""

    rng = np.random.default_rng(99)

    def check(self, f, params, bound=1e-5):
        assert gradient_check(f, params) < bound

    def test_matmul_matrix_matrix(self):
        p = {"a": self.rng.standard_normal((3, 4)),
             "b": self.rng.standard_normal((4, 2))}
        self.check(lambda n: sum_of_squares(matmul(n["a"], n["b"])), p)

    def test_matmul_matrix_vector(self):
        p = {"a": self.rng.standard_normal((3, 4)),
             "b": self.rng.standard_normal(4)}
        self.check(lambda n: sum_of_squares(matmul(n["a"], n["b"])), p)

    def test_matmul_vector_matrix(self):
        p = {"a": self.rng.standard_normal(3),
             "b": self.rng.standard_normal((3, 2))}
        self.check(lambda n: sum_of_squares(matmul(n["a"], n["b"])), p)

    def test_matmul_vector_vector(self):
        p = {"a": self.rng.standard_normal(5),
             "b": self.rng.standard_normal(5)}
        self.check(lambda n: sum_of_squares(matmul(n["a"], n["b"])), p)

    def test_add_broadcast_bias(self):
        # (n, d) + (d,) row broadcast, the shape the encoder bias uses
        p = {"w": self.rng.standard_normal((4, 3)),
             "b": self.rng.standard_normal(3)}
        self.check(lambda n: sum_of_squares(add(n["w"], n["b"])), p)

    def test_subtract(self):
        p = {"a": self.rng.standard_normal((3, 3)),
             "b": self.rng.standard_normal((3, 3))}
        self.check(lambda n: sum_of_squares(subtract(n["a"], n["b"])), p)

    def test_scale(self):
        p = {"a": self.rng.standard_normal((2, 5))}
        self.check(lambda n: sum_of_squares(scale(n["a"], -1.7)), p)

    def test_scale_rows(self):
        w = self.rng.standard_normal(4)
        p = {"a": self.rng.standard_normal((4, 3))}
        self.check(lambda n: sum_of_squares(scale_rows(n["a"], w)), p)

    def test_tanh(self):
        p = {"a": self.rng.standard_normal((3, 3))}
        self.check(lambda n: sum_of_squares(tanh(n["a"])), p)

    def test_mean(self):
        p = {"a": self.rng.standard_normal((4, 4))}
        self.check(lambda n: scale(mean(n["a"]), 3.0), p)

    def test_transpose(self):
        p = {"a": self.rng.standard_normal((2, 4)),
             "b": self.rng.standard_normal((2, 3))}
        self.check(lambda n: sum_of_squares(matmul(transpose(n["a"]), n["b"])), p)

    def test_rows_scatter_add(self):
        # overlapping slices of the same leaf must accumulate
        p = {"a": self.rng.standard_normal((5, 3))}

        def f(n):
            top = sum_of_squares(rows(n["a"], 0, 3))
            bottom = sum_of_squares(rows(n["a"], 2, 5))
            return add(top, bottom)

        self.check(f, p)


def test_three_layer_composition_matches_fd():
    """Random tanh-layer stack against the finite-difference oracle."""
    rng = np.random.default_rng(12)
    p = {
        "w1": rng.standard_normal((6, 4)) * 0.5,
        "b1": rng.standard_normal(4) * 0.1,
        "w2": rng.standard_normal((4, 4)) * 0.5,
        "b2": rng.standard_normal(4) * 0.1,
        "w3": rng.standard_normal((4, 2)) * 0.5,
    }
    x = rng.standard_normal((7, 6))

    def f(n):
        h1 = tanh(add(matmul(Node(x), n["w1"]), n["b1"]))
        h2 = tanh(add(matmul(h1, n["w2"]), n["b2"]))
        return sum_of_squares(matmul(h2, n["w3"]))

    assert gradient_check(f, p) < 1e-5


def test_gradient_check_quadratic_is_nearly_exact():
    # central differences are exact for quadratics up to roundoff
    p = {"x": np.array([1.0, -2.0, 0.5])}
    err = gradient_check(lambda n: sum_of_squares(n["x"]), p)
    assert err < 1e-9


def test_gradient_check_rejects_bad_eps():
    p = {"x": np.ones(2)}
    with pytest.raises(ValueError):
        gradient_check(lambda n: sum_of_squares(n["x"]), p, eps=0.0)
    with pytest.raises(ValueError):
        gradient_check(lambda n: sum_of_squares(n["x"]), p, eps=-1e-6)


def test_gradient_check_flags_non_finite_probe():
    p = {"x": np.array([1e160])}

    def f(n):
        return sum_of_squares(sum_of_squares(n["x"]))  # overflows to inf

    with pytest.raises(NumericError):
        with np.errstate(over="ignore"):
            gradient_check(f, p)


def test_rows_slice_bounds_checked():
    a = Node(np.zeros((4, 2)), name="a")
    with pytest.raises(ValueError):
        rows(a, 2, 6)
    with pytest.raises(ValueError):
        rows(a, -1, 2)
