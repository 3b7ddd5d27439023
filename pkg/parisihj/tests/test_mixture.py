import numpy as np
import pytest

from parisihj.mixture import (MixtureSpec, dual, dual_argmax, evaluate,
                              normalize)
from parisihj.testing.reference_values import MIXED_24, PURE_3, SK
from parisihj.utils import NumericalError


def test_construction_and_json():
    m = MixtureSpec({'2': 0.5, 4: 0.5, 3: 0.0})
    assert m.degrees == [2, 4]
    assert m.coeffs == {2: 0.5, 4: 0.5}
    assert m.is_even
    assert m.is_normalized
    assert m.to_dict() == {'2': 0.5, '4': 0.5}
    assert MixtureSpec.from_json(m.to_json()) == m
    assert MixtureSpec.from_json('{"2": 0.6, "3": 0.4}') \
        == MixtureSpec({2: 0.6, 3: 0.4})
    assert not MixtureSpec({2: 0.6, 3: 0.4}).is_even
    assert not MixtureSpec({2: 2.0}).is_normalized


@pytest.mark.parametrize('coeffs', [
    {1: 1.0},
    {0: 1.0},
    {2: -0.5},
    {2: np.nan},
    {2: 0.0},
    {},
    {'x': 1.0},
    {'2': 0.5, 2: 0.5},
    {2.5: 1.0},
])
def test_invalid_mixtures(coeffs):
    with pytest.raises(ValueError):
        MixtureSpec(coeffs)


def test_from_json_rejects_non_objects():
    with pytest.raises(ValueError):
        MixtureSpec.from_json('[1, 2]')


def test_evaluate():
    m = MixtureSpec({2: 0.5, 4: 0.5})
    assert evaluate(m, 0.5) == pytest.approx(0.15625, abs=1e-15)
    assert evaluate(m, 0.5, 1) == pytest.approx(0.75, abs=1e-15)
    assert evaluate(m, 0.5, 2) == pytest.approx(2.5, abs=1e-15)
    # the polynomial is defined on the whole real line
    odd = MixtureSpec({3: 1.0})
    assert evaluate(odd, -1.0) == -1.0
    np.testing.assert_allclose(evaluate(m, np.array([0.0, 1.0])), [0.0, 1.0])
    assert m(0.5) == evaluate(m, 0.5)
    with pytest.raises(ValueError):
        evaluate(m, 0.5, 3)


def test_normalize_idempotent():
    m = MixtureSpec({2: 2.0, 3: 6.0})
    once = normalize(m)
    assert once.is_normalized
    assert once.coeffs == {2: 0.25, 3: 0.75}
    assert normalize(once) == once


def test_dual_closed_forms():
    sk = MixtureSpec({2: 1.0})
    # xi*(s) = s^2 / 4
    for s in (0.1, 1.0, 2.0, 7.5):
        assert dual(sk, s) == pytest.approx(s ** 2 / 4, rel=1e-12)
    # pure p-spin: xi*(s) = (p - 1) (s / p)^(p / (p - 1))
    pure = MixtureSpec({3: 1.0})
    for s in (0.3, 3.0, 40.0):
        expected = 2.0 * (s / 3.0) ** 1.5
        assert dual(pure, s) == pytest.approx(expected, rel=1e-10)


def test_dual_nonpositive_arguments():
    m = MixtureSpec({2: 0.6, 3: 0.4})
    assert dual(m, 0.0) == 0.0
    assert dual(m, -3.0) == 0.0
    np.testing.assert_array_equal(dual(m, np.array([-1.0, 0.0])), [0.0, 0.0])


def test_dual_shape_preserved():
    m = MixtureSpec({2: 1.0})
    out = dual(m, np.ones((2, 3)))
    assert out.shape == (2, 3)
    np.testing.assert_allclose(out, 0.25)


def test_dual_fenchel_young():
    m = MixtureSpec({2: 0.3, 3: 0.2, 5: 0.5})
    s = np.linspace(0.01, 20.0, 50)
    values = dual(m, s)
    r = np.linspace(0.0, 5.0, 401)
    # xi*(s) >= r s - xi(r) for all r >= 0, with equality at the argmax
    lower = np.max(np.outer(s, r) - evaluate(m, r)[None, :], axis=1)
    assert np.all(values >= lower - 1e-9)
    r_star = dual_argmax(m, s)
    np.testing.assert_allclose(evaluate(m, r_star, 1), s, rtol=1e-10)
    np.testing.assert_allclose(values, r_star * s - evaluate(m, r_star),
                               rtol=1e-10)


def test_dual_convex_nondecreasing():
    m = MixtureSpec({2: 0.5, 4: 0.5})
    s = np.linspace(-1.0, 10.0, 1101)
    values = dual(m, s)
    assert np.all(values >= 0)
    assert np.all(np.diff(values) >= -1e-12)
    assert np.all(np.diff(values, 2) >= -1e-9)


def test_dual_large_argument():
    m = MixtureSpec({2: 1.0})
    assert dual(m, 1e6) == pytest.approx(2.5e11, rel=1e-10)


def test_dual_not_bracketed():
    m = MixtureSpec({2: 1.0})
    with pytest.raises(NumericalError):
        dual(m, np.inf)


@pytest.mark.parametrize('coeffs', [SK, MIXED_24, PURE_3])
def test_dual_of_derivative(coeffs):
    m = MixtureSpec(coeffs)
    s = np.linspace(0.0, 1.0, 100)
    xi_prime = evaluate(m, s, 1)
    np.testing.assert_allclose(dual(m, xi_prime),
                               s * xi_prime - evaluate(m, s), atol=1e-10)


@pytest.mark.parametrize('coeffs', [SK, MIXED_24, PURE_3])
def test_dual_above_shifted_identity(coeffs):
    m = MixtureSpec(coeffs)
    s = np.linspace(-2.0, 20.0, 221)
    values = dual(m, s)
    # r = 1 in the supremum
    bound = s - evaluate(m, 1.0)
    assert np.all(values >= bound - 1e-10 * np.maximum(1.0, values))
    # equality where xi'(1) = s
    s1 = evaluate(m, 1.0, 1)
    assert dual(m, s1) == pytest.approx(s1 - evaluate(m, 1.0), rel=1e-10)
