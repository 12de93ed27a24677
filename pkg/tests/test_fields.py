"""Exact field derivatives against central finite differences."""

import numpy as np
import pytest

from hadexp.errors import UnsupportedOrderError
from hadexp.fields import (BumpField, ConstantField, DAlembertPowerField,
                           EllipsoidBumpField, MonomialField)


def fd_partial(field, mi, pts, h=1e-3):
    """Central finite difference of order sum(mi), one axis at a time."""
    pts = np.asarray(pts, dtype=float)
    ax = next(i for i, m in enumerate(mi) if m > 0)
    lower = list(mi)
    lower[ax] -= 1
    up, dn = pts.copy(), pts.copy()
    up[..., ax] += h
    dn[..., ax] -= h
    if sum(lower) == 0:
        return (field(up) - field(dn)) / (2 * h)
    return (fd_partial(field, lower, up, h) - fd_partial(field, lower, dn, h)) / (2 * h)


@pytest.fixture
def sample_points():
    rng = np.random.default_rng(5)
    return rng.uniform(-0.8, 0.8, size=(40, 2))


@pytest.mark.parametrize("mi", [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (2, 1)])
def test_bump_derivatives_match_fd(mi, sample_points):
    f = BumpField([0.1, -0.2], [1.1, 1.3], amplitude=0.7)
    exact = f.deriv(mi, sample_points)
    approx = fd_partial(f, mi, sample_points)
    assert np.allclose(exact, approx, atol=1e-4 * sum(mi) * max(1, np.max(np.abs(exact))))


@pytest.mark.parametrize("mi", [(1, 0, 0), (0, 1, 1), (2, 0, 0), (0, 0, 2)])
def test_ellipsoid_derivatives_match_fd(mi):
    rng = np.random.default_rng(11)
    pts = rng.uniform(-0.7, 0.7, size=(30, 3))
    f = EllipsoidBumpField([0.1, 0.0, -0.1], [1.2, 1.0, 1.1], amplitude=1.3)
    exact = f.deriv(mi, pts)
    approx = fd_partial(f, mi, pts, h=5e-4)
    assert np.allclose(exact, approx, atol=1e-4 * max(1, np.max(np.abs(exact))))


def test_bump_support():
    f = BumpField([0.0, 0.0], [1.0, 2.0])
    assert f([0.999, 0.0]) > 0.0
    assert f([1.001, 0.0]) == 0.0
    assert f.deriv((2, 1), np.array([[1.5, 0.0], [0.0, 2.5]])).tolist() == [0.0, 0.0]
    assert np.allclose(f.support_box, [[-1, 1], [-2, 2]])


def test_ellipsoid_support_is_ellipsoid():
    f = EllipsoidBumpField([0.0, 0.0], [1.0, 2.0])
    assert f([0.9, 0.0]) > 0.0
    # inside the bounding box but outside the ellipse
    assert f([0.9, 1.6]) == 0.0


def test_ellipsoid_spherical_symmetry():
    """Equal spatial widths make the field constant on spatial spheres."""
    f = EllipsoidBumpField([0.5, 0.0, 0.0], [1.5, 1.2, 1.2])
    t = 0.3
    vals = [f([t, 0.6 * np.cos(a), 0.6 * np.sin(a)])
            for a in np.linspace(0, 2 * np.pi, 9)]
    assert np.ptp(vals) == 0.0


def test_box_power_deriv_consistency(sample_points):
    f = BumpField([0.0, 0.1], [1.4, 1.2])
    g = EllipsoidBumpField([0.0, 0.1], [1.4, 1.2])
    for fld in (f, g):
        via_generic = None
        for coeff, mi in [(1.0, (2, 0)), (-1.0, (0, 2))]:
            term = coeff * fld.deriv(mi, sample_points)
            via_generic = term if via_generic is None else via_generic + term
        assert np.allclose(fld.box_power_deriv(1, (0, 0), sample_points), via_generic,
                           rtol=1e-12, atol=1e-15)


def test_dalembert_power_field(sample_points):
    f = BumpField([0.0, 0.0], [1.5, 1.5])
    boxed = DAlembertPowerField(f, 1)
    assert np.allclose(boxed(sample_points), f.box_power(1, sample_points))
    # nested powers collapse
    twice = DAlembertPowerField(boxed, 1)
    assert np.allclose(twice(sample_points), f.box_power(2, sample_points))


def test_order_cap():
    f = BumpField([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(UnsupportedOrderError):
        f.deriv((17, 0), np.zeros(2))
    with pytest.raises(UnsupportedOrderError):
        EllipsoidBumpField([0.0, 0.0], [1.0, 1.0]).box_power_deriv(9, (0, 0), np.zeros(2))


def test_monomial_field():
    # 2 t^2 x - 3 x
    f = MonomialField({(2, 1): 2.0, (0, 1): -3.0}, 2)
    pts = np.array([[1.0, 2.0], [0.5, -1.0]])
    assert np.allclose(f(pts), [2 * 1 * 2 - 6, 2 * 0.25 * (-1) + 3])
    assert np.allclose(f.deriv((1, 1), pts), [4.0, 2.0])
    assert np.allclose(f.deriv((3, 0), pts), 0.0)


def test_field_algebra(sample_points):
    f = BumpField([0.0, 0.0], [1.5, 1.5])
    g = ConstantField(2.0, 2)
    h = f * g + f - 0.5 * f
    assert np.allclose(h(sample_points), 2.5 * f(sample_points))
    prod = f * f
    assert np.allclose(prod.deriv((1, 0), sample_points),
                       2 * f(sample_points) * f.deriv((1, 0), sample_points))
    assert np.allclose((-f)(sample_points), -f(sample_points))


def test_complex_amplitude():
    f = BumpField([0.0, 0.0], [1.0, 1.0], amplitude=1.0 + 2.0j)
    v = f(np.zeros(2))
    assert v.imag == pytest.approx(2 * v.real)
