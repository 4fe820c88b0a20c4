import math

import numpy as np
import pytest

from weaklab.gaussian import (AffineGaussianDensity, GaussianLaw,
                              LognormalDensity, fd_derivative, hermite_He,
                              normal_pdf, normal_pdf_dy)


def test_gaussian_law_validation():
    law = GaussianLaw(np.array([1.0]), np.array([[2.0]]))
    assert law.var == 2.0
    assert law.mean1 == 1.0
    with pytest.raises(ValueError):
        GaussianLaw(np.zeros(2), np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(ValueError):
        GaussianLaw(np.zeros(1), np.array([[-1.0]]))


def test_hermite_values():
    u = np.array([0.0, 1.0, 2.0])
    assert np.allclose(hermite_He(0, u), 1.0)
    assert np.allclose(hermite_He(1, u), u)
    assert np.allclose(hermite_He(2, u), u * u - 1.0)
    assert np.allclose(hermite_He(3, u), u**3 - 3 * u)


def test_normal_pdf_dy_matches_fd():
    for k in range(1, 5):
        got = normal_pdf_dy(k, 0.7, 0.2, 0.9)
        want = fd_derivative(lambda y: normal_pdf(y, 0.2, 0.9), 0.7, k, 1e-2)
        assert abs(got - want) < 1e-6 * max(1.0, abs(got))


def test_fd_stencils_exact_on_polynomials():
    # 4th-order stencils differentiate low-degree polynomials exactly
    p = lambda x: 2 + 3 * x - x**2 + 0.5 * x**3
    assert abs(fd_derivative(p, 1.0, 1, 1e-2) - (3 - 2 + 1.5)) < 1e-10
    assert abs(fd_derivative(p, 1.0, 2, 1e-2) - (-2 + 3)) < 1e-8
    assert abs(fd_derivative(p, 1.0, 3, 1e-2) - 3.0) < 1e-6


def test_affine_density_derivatives_match_fd():
    dens = AffineGaussianDensity(lambda t: math.exp(-t), lambda t: 0.1 * t,
                                 lambda t: 0.5 * (1 - math.exp(-2 * t)))
    t, x, y = 0.7, 0.4, -0.3
    for a in range(3):
        for b in range(3):
            got = dens.deriv(a, b, t, x, y)
            want = fd_derivative(
                lambda xx: fd_derivative(
                    lambda yy: dens.density(t, xx, yy), y, b, 1e-2),
                x, a, 1e-2)
            assert abs(got - want) < 1e-6


def test_affine_center_on_target_inverts_law():
    dens = AffineGaussianDensity(lambda t: 2.0, lambda t: 1.0, lambda t: t)
    mean, std, push, dpush = dens.center_on_target(0.25, 3.0)
    assert push is None
    assert abs(mean - 1.0) < 1e-14          # (3 - 1) / 2
    assert abs(std - 0.25) < 1e-14          # sqrt(0.25) / 2


def test_lognormal_density_normalizes_and_means():
    dens = LognormalDensity(0.1, 0.2)
    y = np.linspace(1e-6, 8.0, 400001)
    p = dens.density(1.0, 1.0, y)
    assert abs(np.trapezoid(p, y) - 1.0) < 1e-6
    assert abs(np.trapezoid(y * p, y) - math.exp(0.1)) < 1e-5
    assert abs(dens.mean_value(1.0, 1.0) - math.exp(0.1)) < 1e-15


def test_lognormal_derivatives_match_fd():
    dens = LognormalDensity(0.1, 0.25)
    t, x, y = 0.8, 1.1, 0.9
    for a in range(4):
        for b in range(4):
            got = float(dens.deriv(a, b, t, x, y))
            want = fd_derivative(
                lambda xx: fd_derivative(
                    lambda yy: dens.density(t, xx, yy), y, b, 2e-3),
                x, a, 2e-3)
            assert abs(got - want) < 2e-4 * max(1.0, abs(got)), (a, b)


def test_lognormal_deriv_order_cap():
    dens = LognormalDensity(0.1, 0.25)
    with pytest.raises(ValueError):
        dens.deriv(7, 0, 1.0, 1.0, 1.0)
