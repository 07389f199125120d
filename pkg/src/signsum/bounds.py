"""Closed-form lower-bound functions and grid checks of their analytic inequalities.

G(c) is the normal-tail bound for a variance budget c, F(c) the older
quadratic bound.  U_K(i) is the tail variance budget left after stopping at
time i, and h(k) is the mixture of two G values that the final case split
needs to stay above G(1/4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .numerics import SQRT2, SQRT3, DomainError, Phi, Phi_bar, phi
from .report import VerificationReport

PHI_BAR_SQRT2 = Phi_bar(SQRT2)
C_STAR = 1.0 / (4.0 * PHI_BAR_SQRT2)
# G(c) > F(c) reduces to y^4 * Phi_bar(y) < 3 / (2 c*) with y = c^(-1/2).
H_THRESHOLD = 3.0 / (2.0 * C_STAR)
# Rounded figure quoted alongside the threshold; slightly below it.
H_THRESHOLD_DISPLAYED = 0.4714

CONCAVITY_TOL = 1e-9


@dataclass(frozen=True)
class BoundTable:
    c_star: float
    phi_bar_sqrt2: float
    G_quarter: float
    F_quarter: Fraction

    def rows(self) -> list[tuple[str, str]]:
        return [
            ("G(1/4)", f"{self.G_quarter:.10f}"),
            ("F(1/4)", f"{self.F_quarter} = {float(self.F_quarter):.5f}"),
            ("c*", f"{self.c_star:.10f}"),
            ("Phi_bar(sqrt2)", f"{self.phi_bar_sqrt2:.12f}"),
        ]


@dataclass(frozen=True)
class ConcavityReport:
    xi: float
    interval: tuple[float, float]
    grid_size: int
    max_second_difference: float
    max_closed_form_second_derivative: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "xi": self.xi,
            "interval": list(self.interval),
            "grid_size": self.grid_size,
            "max_second_difference": self.max_second_difference,
            "max_closed_form_second_derivative": self.max_closed_form_second_derivative,
            "pass": self.passed,
        }


def _finite(x, name="argument") -> float:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")
    return x


def eval_G(c: float) -> float:
    """G(c) = 1/2 (1 - 1/2 Phi_bar(c^-1/2) / Phi_bar(sqrt 2)), for c > 0.

    The c -> 0 limit (1/2) is left to the caller.
    """
    c = _finite(c, "c")
    if c <= 0:
        raise DomainError(f"G is defined for c > 0, got {c!r}")
    return 0.5 * (1.0 - 0.5 * Phi_bar(c ** -0.5) / PHI_BAR_SQRT2)


def eval_F(c):
    """F(c) = 1/2 (1 - 3 c^2).  Exact when ``c`` is rational."""
    if isinstance(c, Rational):
        c = Fraction(c)
        if c < 0:
            raise DomainError(f"F is evaluated for c >= 0, got {c}")
        return Fraction(1, 2) * (1 - 3 * c * c)
    c = _finite(c, "c")
    if c < 0:
        raise DomainError(f"F is evaluated for c >= 0, got {c!r}")
    return 0.5 * (1.0 - 3.0 * c * c)


def eval_U(K: int, i):
    """U_K(i) = ((K+1)^2 - i) / (2K+1)^2; a Fraction for rational ``i``."""
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    if isinstance(i, Rational):
        return Fraction((K + 1) ** 2 - Fraction(i), (2 * K + 1) ** 2)
    return ((K + 1) ** 2 - float(i)) / (2 * K + 1) ** 2


def _check_k(k: int) -> None:
    if int(k) != k or k < 2:
        raise DomainError(f"k must be an integer >= 2, got {k!r}")


def eval_h(k: int) -> float:
    _check_k(k)
    p = 2.0 ** (1 - k)
    return p * eval_G(eval_U(k, k)) + (1.0 - p) * eval_G(eval_U(k, k + 2))


def eval_half_mix(k: int) -> float:
    """h(k) with the second G replaced by its c -> 0 limit 1/2."""
    _check_k(k)
    p = 2.0 ** (1 - k)
    return p * eval_G(eval_U(k, k)) + (1.0 - p) * 0.5


def eval_H(y: float) -> float:
    y = _finite(y, "y")
    if y <= 0:
        raise DomainError(f"H is defined for y > 0, got {y!r}")
    return y ** 4 * Phi_bar(y)


def eval_L(y: float) -> float:
    y = _finite(y, "y")
    if y <= 0:
        raise DomainError(f"L is defined for y > 0, got {y!r}")
    return y ** 3 * phi(y)


def eval_Z(xi: float, eps: float) -> float:
    s = 1.0 + xi * eps
    if not s > 0:
        raise DomainError(f"Z needs 1 + xi*eps > 0, got xi={xi!r}, eps={eps!r}")
    return 2.0 / math.sqrt(s)


def bd_tail_bound(y: float) -> float:
    """min(1, c* Phi_bar(y)): the Rademacher tail majorant for y >= sqrt 2."""
    return min(1.0, C_STAR * Phi_bar(y))


def bound_table() -> BoundTable:
    return BoundTable(
        c_star=C_STAR,
        phi_bar_sqrt2=PHI_BAR_SQRT2,
        G_quarter=eval_G(0.25),
        F_quarter=eval_F(Fraction(1, 4)),
    )


def _grid(grid_max: float, grid_step: float) -> np.ndarray:
    if grid_max <= 0 or grid_step <= 0:
        raise DomainError("grid_max and grid_step must be positive")
    n = int(math.floor(grid_max / grid_step + 1e-9))
    return np.arange(1, n + 1) * grid_step


def check_G_dominates_F(grid_max: float = 8.0, grid_step: float = 1e-3) -> VerificationReport:
    """Check H(y) below the G > F threshold on (0, grid_max], and G > F at c = 1/y^2."""
    ys = _grid(grid_max, grid_step)
    H = np.array([eval_H(y) for y in ys])
    L = np.array([eval_L(y) for y in ys])
    cs = 1.0 / ys ** 2
    diff = np.array([eval_G(c) - eval_F(c) for c in cs])
    iH, iL, iD = int(np.argmax(H)), int(np.argmax(L)), int(np.argmin(diff))
    margin = H_THRESHOLD - H[iH]
    quarter = int(np.argmin(np.abs(cs - 0.25)))
    return VerificationReport(
        "G_dominates_F",
        bool(margin > 0 and diff[iD] > 0 and np.all(H <= L)),
        float(margin),
        {"y": float(ys[iH])},
        {"y_min": float(ys[0]), "y_max": float(ys[-1]), "step": grid_step, "points": len(ys)},
        {
            "threshold": H_THRESHOLD,
            "max_H": float(H[iH]),
            "argmax_H": float(ys[iH]),
            "max_L": float(L[iL]),
            "argmax_L": float(ys[iL]),
            "H_le_L_everywhere": bool(np.all(H <= L)),
            "min_G_minus_F": float(diff[iD]),
            "argmin_G_minus_F_c": float(cs[iD]),
            "G_minus_F_at_quarter": float(diff[quarter]),
        },
    )


def concavity_second_derivative(xi: float, eps: float) -> float:
    """Closed form of d^2/d eps^2 Phi(Z_xi(eps))."""
    s = 1.0 + xi * eps
    return -0.5 * phi(eval_Z(xi, eps)) * s ** -3.5 * xi * xi * (1.0 - 3.0 * xi * eps)


def check_concavity(xi: float, lo: float = 0.0, hi: float = 4 / 9,
                    grid_size: int = 1000, tol: float = CONCAVITY_TOL) -> ConcavityReport:
    """Concavity of eps -> Phi(Z_xi(eps)) on [lo, hi], by closed form and by raw second differences."""
    if grid_size < 3:
        raise DomainError("grid_size must be >= 3")
    eval_Z(xi, lo)
    eval_Z(xi, hi)
    eps = np.linspace(lo, hi, grid_size)
    f = np.array([Phi(eval_Z(xi, e)) for e in eps])
    second = f[:-2] - 2.0 * f[1:-1] + f[2:]
    closed = np.array([concavity_second_derivative(xi, e) for e in eps])
    max_sd, max_cf = float(second.max()), float(closed.max())
    return ConcavityReport(xi, (lo, hi), grid_size, max_sd, max_cf,
                           max_sd <= tol and max_cf <= tol)


def check_endpoint_value() -> VerificationReport:
    """1/2 Phi(sqrt 3) + 1/2 Phi(3) >= 0.9785 > 0.9773 > Phi(2)."""
    lhs = 0.5 * Phi(SQRT3) + 0.5 * Phi(3.0)
    rhs = Phi(2.0)
    chain = lhs >= 0.9785 > 0.9773 > rhs
    return VerificationReport(
        "endpoint_chain",
        bool(chain),
        lhs - rhs,
        None,
        {},
        {"mixed_value": lhs, "Phi_2": rhs, "displayed": [0.9785, 0.9773]},
    )


def check_h_sequence(k_max: int = 64) -> VerificationReport:
    """h(k) >= G(1/4) for k = 2..k_max; also records monotone approach to G(1/4)."""
    g = eval_G(0.25)
    ks = list(range(2, k_max + 1))
    gaps = [eval_h(k) - g for k in ks]
    i = min(range(len(ks)), key=lambda j: gaps[j])
    tail = gaps[len(gaps) // 2:]
    return VerificationReport(
        "h_k_ge_G_quarter",
        all(d >= 0 for d in gaps),
        gaps[i],
        {"k": ks[i]},
        {"k_min": 2, "k_max": k_max},
        {"last_gap": gaps[-1],
         "tail_nonincreasing": all(a >= b for a, b in zip(tail, tail[1:]))},
    )


def check_half_mix_sequence(k_max: int = 64) -> VerificationReport:
    g = eval_G(0.25)
    ks = list(range(2, k_max + 1))
    gaps = [eval_half_mix(k) - g for k in ks]
    i = min(range(len(ks)), key=lambda j: gaps[j])
    return VerificationReport(
        "half_mix_ge_G_quarter",
        all(d >= 0 for d in gaps),
        gaps[i],
        {"k": ks[i]},
        {"k_min": 2, "k_max": k_max},
        {"dominates_h": all(eval_half_mix(k) >= eval_h(k) for k in ks)},
    )


def check_L_max(grid_max: float = 8.0, grid_step: float = 1e-3) -> VerificationReport:
    """L(y) = y^3 phi(y) peaks at sqrt 3 with value about 0.4625, below 0.4714."""
    ys = _grid(grid_max, grid_step)
    L = np.array([eval_L(y) for y in ys])
    i = int(np.argmax(L))
    located = abs(ys[i] - SQRT3) <= grid_step
    margin = H_THRESHOLD_DISPLAYED - float(L[i])
    return VerificationReport(
        "L_max_sqrt3",
        bool(located and margin > 0),
        margin,
        {"y": float(ys[i])},
        {"y_max": float(ys[-1]), "step": grid_step},
        {"max_L": float(L[i]), "L_sqrt3": eval_L(SQRT3)},
    )
