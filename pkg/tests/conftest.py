"""Shared model/rate factories for the test suite."""
import pytest

from gnglab.models import CurieWeiss, CWEntropy, Diffusion, PolynomialRate


def cw(beta, h=0.0):
    return CurieWeiss(beta=beta, h=h)


def quartic_diffusion(b):
    """Diffusion model with W(x) = x^4/4 - b x^2/2."""
    return Diffusion(w_coeffs=(0.0, 0.0, -0.5 * b, 0.0, 0.25))


def entropy_rate(alpha, theta=0.0):
    return CWEntropy(alpha=alpha, theta=theta)


def quartic_rate(a):
    """Polynomial rate x^4/4 - a x^2/2 (plus normalizing offset)."""
    return PolynomialRate(coeffs=(0.0, 0.0, -0.5 * a, 0.0, 0.25))


@pytest.fixture
def cw_free():
    """Infinite-temperature spin-flip dynamics (beta = h = 0)."""
    return cw(0.0)
