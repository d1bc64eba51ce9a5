"""Independent reference values from exact Gaussian laws and Gauss-Hermite quadrature.

Both reference models are linear in the noise:
- Grusin plane ``V0 = k x d_x``, ``V1 = x d_y``: ``x_t = x e^{kt}`` and
  ``y_t = y + sigma_t Z`` with ``sigma_t^2 = x^2 (e^{2kt} - 1) / k``.
- Ornstein-Uhlenbeck ``V0 = a x d_x``, ``V1 = d_x``: ``x_t = x e^{at} + s_t Z``
  with ``s_t^2 = (e^{2at} - 1) / a`` (``2t`` when ``a = 0``).
"""

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate

_NODES, _WEIGHTS = hermegauss(64)
_WEIGHTS = _WEIGHTS / np.sqrt(2.0 * np.pi)
_PHI = 1.0 / np.sqrt(2.0 * np.pi)


def hermite_mean(g, loc, scale):
    """``E g(loc + scale Z)`` by the 64-point Gauss-Hermite rule."""
    return float(np.sum(_WEIGHTS * g(loc + scale * _NODES)))


def gaussian_mean(g, loc, scale, feature=0.0):
    """``E g(loc + scale Z)`` by adaptive quadrature in the original variable.

    The Gauss-Hermite rule misses features of ``g`` (located near
    ``feature``) once they are narrower than the node spacing times ``scale``.
    """
    if scale == 0.0:
        return float(g(np.asarray(loc)))
    lo, hi = loc - 40.0 * scale, loc + 40.0 * scale
    pts = [p for p in (feature - 5.0, feature, feature + 5.0) if lo < p < hi]

    def integrand(u):
        z = (u - loc) / scale
        return float(g(np.asarray(u))) * _PHI * np.exp(-0.5 * z * z) / scale

    val, _ = integrate.quad(integrand, lo, hi, points=pts or None, epsabs=1e-14, epsrel=1e-12, limit=1000)
    return float(val)


def grusin_sigma(x0, t, k):
    return np.sqrt(x0**2 * np.expm1(2.0 * k * t) / k)


def grusin_semigroup(f_y, x0, y0, t, k=1.0):
    """``P_t f`` for a test function depending on ``y`` only."""
    return gaussian_mean(f_y, y0, grusin_sigma(x0, t, k))


def grusin_v1_derivative(f_y, x0, y0, t, k=1.0, h=1e-5):
    """``(V1 P_t f)(x0, y0) = x0 d/dy0 P_t f`` by a central difference."""
    up = grusin_semigroup(f_y, x0, y0 + h, t, k)
    down = grusin_semigroup(f_y, x0, y0 - h, t, k)
    return x0 * (up - down) / (2.0 * h)


def ou_scale(t, a):
    return np.sqrt(2.0 * t) if a == 0 else np.sqrt(np.expm1(2.0 * a * t) / a)


def ou_semigroup(f, x0, t, a):
    return gaussian_mean(f, x0 * np.exp(a * t), ou_scale(t, a))


def ou_derivative(f, x0, t, a, h=1e-5):
    return (ou_semigroup(f, x0 + h, t, a) - ou_semigroup(f, x0 - h, t, a)) / (2.0 * h)
