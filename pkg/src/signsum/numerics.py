"""Standard normal CDF, upper tail and density.

Every other module takes Phi, phi and the upper tail from here.  The upper
tail is evaluated through ``math.erfc`` directly so that small tails keep
full relative accuracy (no ``1 - cdf`` cancellation).
"""

from __future__ import annotations

import math

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Reference values from mpmath (dps=40, ncdf), truncated to 17 significant
# digits.  Keys are the evaluation points; values are Phi(x).
REFERENCE_CDF = {
    0.5: 0.69146246127401310,
    1.0: 0.84134474606854295,
    SQRT2: 0.92135039647485743,
    SQRT3: 0.95836774166822480,
    1.87083: 0.96931567601214683,
    2.0: 0.97724986805182079,
    2.23607: 0.98732640689228754,
    3.0: 0.99865010196836991,
    -0.5: 0.30853753872598690,
    -1.0: 0.15865525393145705,
    -SQRT2: 0.078649603525142565,
    -SQRT3: 0.041632258331775201,
    -1.87083: 0.030684323987853171,
    -2.0: 0.022750131948179207,
    -2.23607: 0.012673593107712461,
    -3.0: 0.0013498980316300945,
}


class DomainError(ValueError):
    """Argument outside the domain of a numerical routine."""


def _check_finite(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"argument must be finite, got {x!r}")
    return x


def std_normal_cdf(x: float) -> float:
    """Phi(x), absolute error below 1e-12 on [-8, 8]."""
    x = _check_finite(x)
    return 0.5 * math.erfc(-x / SQRT2)


def std_normal_upper_tail(x: float) -> float:
    """1 - Phi(x) = Phi(-x), computed without cancellation."""
    x = _check_finite(x)
    return 0.5 * math.erfc(x / SQRT2)


def std_normal_pdf(x: float) -> float:
    x = _check_finite(x)
    return INV_SQRT_2PI * math.exp(-0.5 * x * x)


# Shorthands used throughout the package.
Phi = std_normal_cdf
Phi_bar = std_normal_upper_tail
phi = std_normal_pdf
