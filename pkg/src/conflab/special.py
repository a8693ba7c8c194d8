"""Closed-form layer: log-gamma, the hypergeometric 2F1(1/3,2/3;4/3;x),
the crossing function F, rectangle cross-ratios, and the conformal map
from the upper half-plane onto an equilateral triangle.

All routines here are deterministic scalar functions with no shared state.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

__all__ = [
    "RectangleShape",
    "gamma_ln",
    "hyp2f1_113",
    "cardy_F",
    "rectangle_cross_ratio",
    "triangle_map",
    "TRIANGLE_A",
    "TRIANGLE_B",
    "TRIANGLE_C",
]

# Vertices of the reference equilateral triangle.
TRIANGLE_A = 0.0 + 0.0j
TRIANGLE_B = cmath.exp(2j * math.pi / 3)
TRIANGLE_C = cmath.exp(1j * math.pi / 3)

# Beta(1/3, 1/3) = Gamma(1/3)^2 / Gamma(2/3); the crossing-function
# prefactor 3*Gamma(2/3)/Gamma(1/3)^2 is exactly 3 / Beta(1/3, 1/3).
_BETA_13 = math.exp(2.0 * math.lgamma(1.0 / 3.0) - math.lgamma(2.0 / 3.0))
_CARDY_PREFACTOR = 3.0 / _BETA_13


@dataclass(frozen=True)
class RectangleShape:
    """Side lengths of an axis-aligned rectangle (width L, height l)."""

    L: float
    l: float

    def __post_init__(self):
        if not (self.L > 0 and self.l > 0):
            raise ValueError(f"rectangle sides must be positive, got L={self.L}, l={self.l}")


def gamma_ln(x: float) -> float:
    """Natural log of Gamma(x) for x > 0."""
    if not x > 0:
        raise ValueError(f"gamma_ln requires x > 0, got {x}")
    return math.lgamma(x)


def _series_113(x: float) -> float:
    # Power series of 2F1(1/3, 2/3; 4/3; x); used for x <= 1/2 where the
    # term ratio is <= ~0.55 and ~60 terms reach double precision.
    total = 1.0
    term = 1.0
    n = 0
    while True:
        term *= (1.0 / 3.0 + n) * (2.0 / 3.0 + n) / ((4.0 / 3.0 + n) * (n + 1.0)) * x
        total += term
        n += 1
        if abs(term) < 1e-17 * abs(total) or n > 500:
            return total


def _series_near_one(w: float) -> float:
    # 2F1(1, 2/3; 4/3; w) = sum_n (2/3)_n / (4/3)_n * w^n, for w = 1 - x <= 1/2.
    total = 1.0
    term = 1.0
    n = 0
    while True:
        term *= (2.0 / 3.0 + n) / (4.0 / 3.0 + n) * w
        total += term
        n += 1
        if abs(term) < 1e-17 * abs(total) or n > 500:
            return total


def hyp2f1_113(x: float) -> float:
    """Gauss hypergeometric 2F1(1/3, 2/3; 4/3; x) on [0, 1).

    Direct power series for x <= 1/2.  For x > 1/2 the series loses accuracy,
    so the value is assembled from the connection formula at 1 - x, which for
    these parameters collapses to two terms:

        2F1(1/3,2/3;4/3;x) = (B(1/3,1/3)/3) * x^(-1/3)
                             - (1-x)^(1/3) * 2F1(1, 2/3; 4/3; 1-x)
    """
    if not (0.0 <= x < 1.0):
        raise ValueError(f"hyp2f1_113 requires 0 <= x < 1, got {x}")
    if x <= 0.5:
        return _series_113(x)
    w = 1.0 - x
    return (_BETA_13 / 3.0) * x ** (-1.0 / 3.0) - w ** (1.0 / 3.0) * _series_near_one(w)


def cardy_F(x: float) -> float:
    """Limiting crossing probability F(x) = c * x^(1/3) * 2F1(1/3,2/3;4/3;x).

    The constant c = 3*Gamma(2/3)/Gamma(1/3)^2 makes F(1) = 1.  Endpoints are
    returned exactly without evaluating the series.
    """
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"cardy_F requires 0 <= x <= 1, got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x <= 0.5:
        return _CARDY_PREFACTOR * x ** (1.0 / 3.0) * _series_113(x)
    # Complementary form: F(x) = 1 - c * x^(1/3) (1-x)^(1/3) 2F1(1,2/3;4/3;1-x),
    # exact consequence of the connection formula above.
    w = 1.0 - x
    return 1.0 - _CARDY_PREFACTOR * (x * w) ** (1.0 / 3.0) * _series_near_one(w)


def _theta2(q: float) -> float:
    # theta_2(q) = 2 * sum_{n>=0} q^((n+1/2)^2)
    total = 0.0
    n = 0
    while True:
        term = q ** ((n + 0.5) ** 2)
        total += term
        if term < 1e-18 * max(total, 1.0) or n > 64:
            return 2.0 * total
        n += 1


def _theta3(q: float) -> float:
    # theta_3(q) = 1 + 2 * sum_{n>=1} q^(n^2)
    total = 0.0
    n = 1
    while True:
        term = q ** (n * n)
        total += term
        if term < 1e-18 or n > 64:
            return 1.0 + 2.0 * total
        n += 1


def rectangle_cross_ratio(shape: RectangleShape) -> float:
    """Cross-ratio x(L, l) of a rectangle's marked corner quadruple.

    Under the conformal map sending the rectangle to the upper half-plane with
    the left and right (vertical, length l) sides onto (-inf, 0] and [1-x, 1],
    the cross-ratio equals the modular lambda function at aspect ratio L/l:

        x = (theta2(q) / theta3(q))^4,   q = exp(-pi * L / l).

    This normalization is pinned by x(square) = 1/2 and the swap duality
    x(L,l) + x(l,L) = 1 (lambda(-1/tau) = 1 - lambda(tau)); both are exercised
    in tests together with an independent numerical conformal-map oracle.
    Aspect ratios below 1/4 are evaluated through the duality to keep the nome
    small on the side actually summed.
    """
    ratio = shape.L / shape.l
    if ratio < 0.25:
        return 1.0 - rectangle_cross_ratio(RectangleShape(shape.l, shape.L))
    q = math.exp(-math.pi * ratio)
    if q == 0.0:
        warnings.warn(
            f"nome underflow at aspect ratio {ratio:g}; cross-ratio clamped to 0",
            RuntimeWarning,
        )
        return 0.0
    x = (_theta2(q) / _theta3(q)) ** 4
    if x == 0.0:
        warnings.warn(
            f"cross-ratio underflow at aspect ratio {ratio:g}; clamped to 0",
            RuntimeWarning,
        )
    return x


# --- adaptive Gauss-Kronrod quadrature (complex-valued integrands) ---

# 7-point Gauss / 15-point Kronrod pair on [-1, 1].
_KRONROD_X = (
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0, 0.207784955007898, 0.405845151377397,
    0.586087235467691, 0.741531185599394, 0.864864423359769,
    0.949107912342759, 0.991455371120813,
)
_KRONROD_W = (
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728, 0.204432940075298,
    0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529,
)
_GAUSS_W = (
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870,
)


def _gk15(f, a: float, b: float):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    fk = [f(mid + half * x) for x in _KRONROD_X]
    k = half * sum(w * v for w, v in zip(_KRONROD_W, fk))
    g = half * sum(w * fk[2 * i + 1] for i, w in enumerate(_GAUSS_W))
    return k, abs(k - g)


def _quad_adaptive(f, a: float, b: float, tol: float = 1e-13, max_depth: int = 24):
    """Adaptive bisection Gauss-Kronrod; f may return complex values."""
    value, err = _gk15(f, a, b)
    if err <= tol or max_depth == 0:
        return value
    mid = 0.5 * (a + b)
    return _quad_adaptive(f, a, mid, tol / 2, max_depth - 1) + _quad_adaptive(
        f, mid, b, tol / 2, max_depth - 1
    )


def _pow_upper(z: complex, expo: float) -> complex:
    # z^expo where z is a boundary limit from the upper half-plane: negative
    # reals take arg +pi, which is the principal convention already.
    if z == 0:
        return 0.0 + 0.0j
    return cmath.exp(expo * cmath.log(z))


def _pow_lower(z: complex, expo: float) -> complex:
    # z^expo where z is a boundary limit from the lower half-plane: negative
    # reals must take arg -pi instead of the principal +pi.
    if z == 0:
        return 0.0 + 0.0j
    if z.imag == 0.0 and z.real < 0.0:
        return cmath.exp(expo * complex(math.log(-z.real), -math.pi))
    return cmath.exp(expo * cmath.log(z))


def triangle_map(z: complex) -> complex:
    """Conformal map of the closed upper half-plane onto the equilateral
    triangle with vertices A=0, B=exp(2i*pi/3), C=exp(i*pi/3).

    Schwarz-Christoffel integral of t^(-2/3) (1-t)^(-2/3), normalized so that
    0 -> A, 1 -> C and infinity -> B.  The integral is taken from the nearest
    of the three prevertices with a cube substitution that removes the
    endpoint singularity, leaving a smooth integrand for the adaptive
    Gauss-Kronrod rule.  Accuracy is ~1e-12 away from the prevertices.

    Branch bookkeeping: quantities of the form (1 - z) or (u^3 - z) are
    boundary limits from the lower half-plane when z runs over the closed
    upper half-plane, so on the negative real axis their fractional powers
    carry arg -pi; z itself carries arg +pi there.
    """
    z = complex(z)
    if z.imag < -1e-12:
        raise ValueError(f"triangle_map requires Im z >= 0, got {z}")
    if z.imag < 0.0:
        z = complex(z.real, 0.0)
    c0 = TRIANGLE_C / _BETA_13

    if abs(z) >= 4.0:
        # Anchor at infinity (vertex B): integrate t = z / u^3 from u=0 to 1.
        integral = _quad_adaptive(lambda u: _pow_lower(u ** 3 - z, -2.0 / 3.0), 0.0, 1.0)
        return TRIANGLE_B - 3.0 * c0 * _pow_upper(z, 1.0 / 3.0) * integral
    if z == 0.0:
        return TRIANGLE_A
    if z.real <= 0.5:
        # Anchor at 0 (vertex A): t = z * u^3.
        integral = _quad_adaptive(lambda u: _pow_lower(1.0 - z * u ** 3, -2.0 / 3.0), 0.0, 1.0)
        return 3.0 * c0 * _pow_upper(z, 1.0 / 3.0) * integral
    # Anchor at 1 (vertex C): t = 1 + (z - 1) * u^3.
    integral = _quad_adaptive(lambda u: _pow_upper(1.0 + (z - 1.0) * u ** 3, -2.0 / 3.0), 0.0, 1.0)
    return TRIANGLE_C - 3.0 * c0 * _pow_lower(1.0 - z, 1.0 / 3.0) * integral
