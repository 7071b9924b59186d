import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gvf.poly import Polynomial


def test_eval_matches_hand_expansion():
    # 3 x^2 y - 2 y + 7 at (2, -1): 3*4*(-1) + 2 + 7 = -3
    p = Polynomial(((3.0, (2, 1)), (-2.0, (0, 1)), (7.0, (0, 0))))
    assert p(np.array([2.0, -1.0])) == pytest.approx(-3.0, abs=0)
    assert p(np.array([0.0, 0.0])) == pytest.approx(7.0, abs=0)


def test_gradient_matches_hand_derivative():
    p = Polynomial(((3.0, (2, 1)), (-2.0, (0, 1)), (7.0, (0, 0))))
    g = p.gradient(np.array([2.0, -1.0]))
    # d/dx = 6xy = -12, d/dy = 3x^2 - 2 = 10
    np.testing.assert_allclose(g, [-12.0, 10.0], rtol=0, atol=0)


def test_batch_shapes():
    p = Polynomial(((1.0, (2, 0)), (1.0, (0, 2)), (-1.0, (0, 0))))
    x = np.zeros((4, 5, 2))
    assert p(x).shape == (4, 5)
    assert p.gradient(x).shape == (4, 5, 2)


def test_constant_and_coordinate_helpers():
    c = Polynomial.constant(2.5, 3)
    assert c(np.array([9.0, 9.0, 9.0])) == 2.5
    np.testing.assert_array_equal(c.gradient(np.zeros(3)), np.zeros(3))
    x1 = Polynomial.coordinate(1, 3)
    assert x1(np.array([5.0, 7.0, 9.0])) == 7.0


@settings(deadline=None, max_examples=60)
@given(
    x=st.floats(-10, 10, allow_nan=False),
    y=st.floats(-10, 10, allow_nan=False),
)
def test_gradient_matches_central_difference(x, y):
    p = Polynomial(((1.0, (4, 0)), (2.0, (2, 2)), (1.0, (0, 4)), (-8.0, (2, 0)), (8.0, (0, 2))))
    pt = np.array([x, y])
    h = 1e-5 * max(1.0, abs(x), abs(y))
    fd = np.array(
        [
            (p(pt + [h, 0]) - p(pt - [h, 0])) / (2 * h),
            (p(pt + [0, h]) - p(pt - [0, h])) / (2 * h),
        ]
    )
    scale = 1.0 + np.max(np.abs(fd))
    np.testing.assert_allclose(p.gradient(pt), fd, atol=1e-6 * scale * max(1.0, abs(x), abs(y)) ** 2)


def test_rejects_inconsistent_terms():
    with pytest.raises(ValueError):
        Polynomial(((1.0, (1, 0)), (1.0, (1, 0, 0))))
    with pytest.raises(ValueError):
        Polynomial(())


def test_rejects_wrong_dimension_input():
    p = Polynomial(((1.0, (1, 0)),))
    with pytest.raises(ValueError):
        p(np.zeros(3))
