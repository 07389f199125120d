"""Stopping-time decomposition of S over every sign path.

After a canonical reordering v_n >= v_1 >= v_{n-1} >= v_2 >= v_3 >= ... >=
v_{n-2} >= 0, the random time T is the first t <= n-2 with
|X_t| > 1 - v_{t+1} (X_t the partial signed sum), else n-1.  K is the same
rule applied to the all-plus prefix sums M_t, so it depends on the weights
only.  Conditioning on T splits P(|S| <= 1) into pieces each bounded below
by G of a tail variance budget U_K(T); this module enumerates all 2^n paths
and checks every link of that argument on a concrete instance.

Exact-mode weights run on the integer lattice (no rounding anywhere).  Float
and surd weights run in float64; the event |S| <= 1 then uses the same
closed-boundary tolerance as :mod:`signsum.dist`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bounds import eval_G, eval_U, eval_h, eval_half_mix
from .dist import (BOUNDARY_TOL, DEFAULT_CAPS, Caps, CapacityError, ExactProbability,
                   WeightVector, prob_abs_le_one)
from .numerics import DomainError
from .report import VerificationReport

FLOAT_SLACK_TOL = 1e-12
NORM_TOL = 1e-12


class UndefinedConditionalError(ValueError):
    """Conditioning event has probability zero."""


@dataclass(frozen=True)
class CanonicalOrdering:
    ordered_weights: WeightVector
    permutation: tuple[int, ...]  # permutation[j] = canonical index of input weight j
    padded_zeros: int
    flipped: tuple[int, ...] = ()  # input indices whose sign was absorbed

    @property
    def n(self) -> int:
        return self.ordered_weights.n

    def is_exact(self) -> bool:
        return self.ordered_weights.mode == "exact"

    def values(self) -> tuple[np.ndarray, object]:
        """Weights as int64 lattice numerators with the unit, or floats with 1.0."""
        w = self.ordered_weights
        if w.mode == "exact":
            lat = w.lattice()
            return lat.Z[:, 0].copy(), lat.D
        return np.array(w.weights, dtype=float), 1.0

    def exact_values(self) -> list:
        """Weights as Fractions (exact mode) or floats."""
        w = self.ordered_weights
        return w.exact_values() if w.mode == "exact" else list(w.weights)


def _magnitude_key(w: WeightVector, i: int):
    if w.terms is None:
        return abs(w.weights[i])
    a, d = w.terms[i]
    return a * a * d


def canonical_reorder(w: WeightVector) -> CanonicalOrdering:
    """Absolute values, zero-padded to n >= 4, arranged in the zigzag order.

    Magnitudes are sorted descending (ties by input index) and placed as
    v_n, v_1, v_{n-1}, v_2, then v_3 .. v_{n-2}.
    """
    n_in = w.n
    flipped = tuple(i for i, v in enumerate(w.weights) if v < 0)
    full = w.absolute().padded(max(4, n_in))
    n = full.n
    order = sorted(range(n), key=lambda i: (-_magnitude_key(full, i), i))
    slots = [n - 1, 0, n - 2, 1] + list(range(2, n - 2))
    placed = [0] * n
    for rank, src in enumerate(order):
        placed[slots[rank]] = src
    ordered = full.subset(placed)
    where = {src: dst for dst, src in enumerate(placed)}
    return CanonicalOrdering(ordered, tuple(where[j] for j in range(n_in)), n - n_in, flipped)


def is_canonical(values) -> bool:
    """v_n >= v_1 >= v_{n-1} >= v_2 >= v_3 >= ... >= v_{n-2} >= 0 (n >= 4)."""
    v = list(values)
    n = len(v)
    if n < 4:
        return False
    chain = [v[n - 1], v[0], v[n - 2], v[1]] + v[2:n - 2] + [0]
    return all(a >= b for a, b in zip(chain, chain[1:]))


def compute_K(c: CanonicalOrdering) -> int:
    """Smallest t <= n-1 with M_t > 1 - v_{t+1}, else n-1."""
    v, one = c.values()
    n = len(v)
    m = 0
    for t in range(1, n):
        m += v[t - 1]
        if m > one - v[t]:
            return t
    return n - 1


def compute_T(c: CanonicalOrdering, signs) -> tuple[int, object]:
    """Stopping time T and X_T for one sign path (entries +1/-1)."""
    signs = list(signs)
    vals = c.exact_values()
    n = len(vals)
    if len(signs) != n:
        raise DomainError(f"expected {n} signs, got {len(signs)}")
    if any(s not in (1, -1) for s in signs):
        raise DomainError("signs must be +1 or -1")
    x = 0
    for t in range(1, n - 1):
        x += signs[t - 1] * vals[t - 1]
        if abs(x) > 1 - vals[t]:
            return t, x
    return n - 1, x + signs[n - 2] * vals[n - 2]


@dataclass
class StoppingProfile:
    """All 2^n paths of one canonical instance.

    Path index bit t-1 set means eps_t = -1.  ``X_T`` and ``S`` hold lattice
    numerators (exact mode, unit ``one`` = D) or floats (``one`` = 1.0).
    """

    K: int
    prefix_sums: tuple
    T: np.ndarray
    X_T: np.ndarray
    S: np.ndarray
    one: object
    exact: bool
    n: int
    premature_crossings: int = 0  # paths with |X_s| > 1 - v_{s+1} for some s < T
    tail_norm_sq: tuple = field(default=(), repr=False)  # by T

    def signs(self, index: int) -> list[int]:
        return [-1 if (index >> t) & 1 else 1 for t in range(self.n)]

    def record(self, index: int) -> dict:
        T = int(self.T[index])
        return {"signs": self.signs(index), "T": T, "X_T": self.to_number(self.X_T[index]),
                "Y_tail_norm_sq": self.tail_norm_sq[T]}

    def to_number(self, raw):
        return Fraction(int(raw), self.one) if self.exact else float(raw)

    def inside_unit(self) -> np.ndarray:
        if self.exact:
            return np.abs(self.S) <= self.one
        return np.abs(self.S) <= 1.0 + BOUNDARY_TOL


def build_profile(c: CanonicalOrdering, caps: Caps | None = None) -> StoppingProfile:
    caps = caps or DEFAULT_CAPS
    n = c.n
    if n > caps.path_n:
        raise CapacityError(f"path enumeration capped at n={caps.path_n}, got n={n}")
    v, one = c.values()
    idx = np.arange(2 ** n, dtype=np.int64)
    dtype = v.dtype
    X = np.zeros(2 ** n, dtype=dtype)
    T = np.full(2 ** n, n - 1, dtype=np.int64)
    XT = np.zeros(2 ** n, dtype=dtype)
    stopped = np.zeros(2 ** n, dtype=bool)
    premature = np.zeros(2 ** n, dtype=bool)
    for t in range(1, n):
        eps = 1 - 2 * ((idx >> (t - 1)) & 1)
        X = X + eps.astype(dtype) * v[t - 1]
        if t == n - 1:
            XT[~stopped] = X[~stopped]
            break
        cross = np.abs(X) > one - v[t]
        new = cross & ~stopped
        T[new] = t
        XT[new] = X[new]
        stopped |= new
    S = X + (1 - 2 * ((idx >> (n - 1)) & 1)).astype(dtype) * v[n - 1]
    # independent re-check of minimality: no crossing strictly before T
    Y = np.zeros(2 ** n, dtype=dtype)
    for t in range(1, n - 1):
        Y = Y + (1 - 2 * ((idx >> (t - 1)) & 1)).astype(dtype) * v[t - 1]
        premature |= (t < T) & (np.abs(Y) > one - v[t])
    prefix = tuple(np.cumsum(v).tolist())
    sq = [Fraction(int(z) ** 2, one ** 2) if c.is_exact() else float(z) ** 2 for z in v]
    tails = tuple(sum(sq[t:], Fraction(0) if c.is_exact() else 0.0) for t in range(n + 1))
    return StoppingProfile(compute_K(c), prefix, T, XT, S, one, c.is_exact(), n,
                           int(premature.sum()), tails)


def check_profile_invariants(c: CanonicalOrdering, p: StoppingProfile) -> VerificationReport:
    """Ordering, K and per-path invariants of the stopping construction."""
    n, K = p.n, p.K
    v, one = c.values()
    absX = np.abs(p.X_T)
    checks = {
        "canonical_order": is_canonical(c.exact_values()),
        "n_ge_4": n >= 4,
        "K_range": 2 <= K <= n - 1,
        "T_range": bool(np.all((p.T >= 2) & (p.T <= n - 1))),
        "K_le_T": bool(np.all(p.T >= K)),
        "abs_X_T_le_1": bool(np.all(absX <= one)),
        "crossing_at_T": bool(np.all((p.T > n - 2) | (absX > one - v[np.minimum(p.T, n - 1)]))),
        "no_premature_crossing": p.premature_crossings == 0,
    }
    M = p.prefix_sums
    if K <= n - 2:
        checks["K_crossing"] = M[K - 1] > one - v[K] and M[K] > one
    checks["K_minimal"] = all(M[s - 1] <= one - v[s] for s in range(1, K))
    checks["M_K_le_1"] = M[K - 1] <= one
    vals = c.exact_values()
    tol = 0 if c.is_exact() else FLOAT_SLACK_TOL
    checks["cauchy_schwarz_four"] = vals[-1] + vals[0] + vals[-2] + vals[1] <= 2 + tol
    checks["v1_plus_v2_le_1"] = vals[0] + vals[1] <= 1 + tol
    failed = [k for k, ok in checks.items() if not ok]
    return VerificationReport("stopping_invariants", not failed, 0.0 if not failed else -1.0,
                              failed or None, {"n": n}, {"K": K, "checks": checks})


def verify_all_equal_signs_rule(c: CanonicalOrdering, profile: StoppingProfile | None = None) -> VerificationReport:
    """T = K exactly when eps_1..eps_K agree; otherwise T >= K+2 (K <= n-4)."""
    p = profile or build_profile(c)
    n, K = p.n, p.K
    if K > n - 3:
        return VerificationReport("all_equal_signs_rule", True, 0.0, None, {"n": n},
                                  {"K": K, "reason": "K > n-3"}, applicable=False)
    idx = np.arange(2 ** n, dtype=np.int64)
    mask = (1 << K) - 1
    prefix = idx & mask
    equal = (prefix == 0) | (prefix == mask)
    at_K = p.T == K
    count_K = int(at_K.sum())
    expected = 2 ** (n - K + 1)
    mismatched = int((at_K != equal).sum())
    next_step = int((p.T == K + 1).sum())
    violations = mismatched + (count_K != expected)
    if K <= n - 4:
        violations += next_step
    return VerificationReport(
        "all_equal_signs_rule", violations == 0, -float(violations) if violations else 0.0, None, {"n": n},
        {"K": K, "P_T_eq_K": Fraction(count_K, 2 ** n), "expected": Fraction(1, 2 ** (K - 1)),
         "paths_T_eq_K_plus_1": next_step, "frequency_T_eq_K_plus_1": next_step / 2 ** n},
    )


def case_of(K: int, i: int, n: int) -> str:
    if i >= n - 2:
        return "case12"
    return "case3" if 2 * i <= 3 * K + 2 else "case4"


def case_U(K: int, i: int, n: int, exact: bool = True):
    """Variance budget used at T = i <= n-3 (None for the two last times)."""
    kind = case_of(K, i, n)
    if kind == "case12":
        return None
    arg = i if kind == "case3" else Fraction(3 * K + 2, 2)
    u = eval_U(K, Fraction(arg))
    return u if exact else float(u)


def case_bound(K: int, i: int, n: int) -> float:
    """Lower bound for P(|S| <= 1 | T = i)."""
    u = case_U(K, i, n)
    return 0.5 if u is None else eval_G(float(u))


@dataclass(frozen=True)
class CaseDiagnostics:
    T: int
    X_T: object
    paths: int
    lam: object
    B1: object
    B2: object
    B_mix: object
    K0: float
    bound_used: str
    U_value: object
    slack: object

    def to_dict(self) -> dict:
        return {"T": self.T, "X_T": self.X_T, "paths": self.paths, "lambda": self.lam,
                "B1": self.B1, "B2": self.B2, "B_mix": self.B_mix,
                "K0": "inf" if math.isinf(self.K0) else self.K0,
                "bound_used": self.bound_used, "U_value": self.U_value, "slack": self.slack}


def verify_variance_bounds(c: CanonicalOrdering, profile: StoppingProfile | None = None) -> VerificationReport:
    """Tail variance inequalities at every T <= n-3 path, with the intermediate chain."""
    p = profile or build_profile(c)
    n, K = p.n, p.K
    exact = p.exact
    norm = c.ordered_weights.norm_sq
    if norm > 1 + (0 if exact else NORM_TOL):
        return VerificationReport("variance_bounds", True, 0.0, None, {"n": n},
                                  {"reason": "sum of squares exceeds 1"}, applicable=False)
    sel = p.T <= n - 3
    if not sel.any():
        return VerificationReport("variance_bounds", True, math.inf, None, {"n": n},
                                  {"K": K, "groups": 0})
    keys = np.stack([p.T[sel], np.abs(p.X_T[sel])], axis=1)
    groups, counts = np.unique(keys, axis=0, return_counts=True)
    tol = 0 if exact else FLOAT_SLACK_TOL
    vals = c.exact_values()
    sq = [x * x for x in vals]
    zero = Fraction(0) if exact else 0.0
    failures: dict[str, int] = {}
    diags = []
    worst = None

    def fail(name):
        failures[name] = failures.get(name, 0) + 1

    for (t_raw, x_raw), cnt in zip(groups, counts):
        T = int(t_raw)
        X = p.to_number(x_raw)
        u = 1 - X
        tail = sum(sq[T:], zero)
        head = sum(sq[:T], zero)
        B1 = Fraction(1, K + 1) + (T - K - 1) * u * u if exact else 1 / (K + 1) + (T - K - 1) * u * u
        B2 = T * u * u
        kind = case_of(K, T, n)
        U = case_U(K, T, n, exact)
        rhs = U * (1 + X) ** 2
        slack = rhs - tail
        if slack < -tol:
            fail(kind)
        if 2 * T == 3 * K + 2:
            # both readings of the threshold must give the same budget
            if eval_U(K, Fraction(T)) != eval_U(K, Fraction(3 * K + 2, 2)):
                fail("case_boundary")
        if head < B2 - tol:
            fail("head_ge_B2")
        if head < B1 - tol:
            fail("head_ge_B1")
        if exact and (B1 >= B2) != (X >= Fraction(K, K + 1)):
            fail("K0_criterion")
        lam = Fraction(2 * T - K - 1, 2 * K + 1) if exact else (2 * T - K - 1) / (2 * K + 1)
        mix = lam * B1 + (1 - lam) * B2
        closed = (Fraction(2 * T - K - 1, (K + 1) * (2 * K + 1)) if exact
                  else (2 * T - K - 1) / ((K + 1) * (2 * K + 1))) \
            + ((K + 1) ** 2 - T) * u * u / (2 * K + 1)
        if abs(mix - closed) > tol:
            fail("lambda_identity")
        if 0 <= lam <= 1:
            if not (min(B1, B2) - tol <= mix <= max(B1, B2) + tol):
                fail("mix_between")
            if 1 - closed > eval_U(K, T if exact else float(T)) * (1 + X) ** 2 + tol:
                fail("one_minus_B")
        K0 = math.inf if X == 1 else float(X / (1 - X))
        d = CaseDiagnostics(T, X, int(cnt), lam, B1, B2, mix, K0, kind, U, slack)
        diags.append(d)
        if worst is None or slack < worst.slack:
            worst = d
    return VerificationReport(
        "variance_bounds", not failures, float(worst.slack),
        {"T": worst.T, "X_T": worst.X_T}, {"n": n},
        {"K": K, "groups": len(diags), "failures": failures,
         "boundary_groups": sum(1 for d in diags if d.X_T == Fraction(K, K + 1))},
        records=diags,
    )


def conditional_prob_given_T(c: CanonicalOrdering, i: int,
                             profile: StoppingProfile | None = None) -> ExactProbability:
    """P(|S| <= 1 | T = i) by counting paths."""
    p = profile or build_profile(c)
    at = p.T == i
    total = int(at.sum())
    if total == 0:
        raise UndefinedConditionalError(f"P(T={i}) = 0")
    inside = p.inside_unit()
    boundary = 0
    if not p.exact:
        boundary = int((at & (np.abs(np.abs(p.S) - 1.0) <= BOUNDARY_TOL)).sum())
    return ExactProbability(int((at & inside).sum()), total, boundary)


@dataclass
class Certificate:
    K: int
    n: int
    branch: str
    per_T: dict
    final_prob: ExactProbability
    mixture_bound: float
    final_bound: float
    G_quarter: float
    passed: bool
    checks: dict

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "n": self.n,
            "branch": self.branch,
            "per_T": {str(k): v for k, v in self.per_T.items()},
            "final_prob": self.final_prob.float_value,
            "final_prob_exact": f"{self.final_prob.numerator}/{self.final_prob.denominator}",
            "mixture_bound": self.mixture_bound,
            "final_bound": self.final_bound,
            "G_quarter": self.G_quarter,
            "pass": self.passed,
            "checks": self.checks,
        }

    def report(self, claim_id: str = "stopping_certificate") -> VerificationReport:
        margin = min([self.final_prob.float_value - self.final_bound]
                     + [v["margin"] for v in self.per_T.values()])
        return VerificationReport(claim_id, self.passed, margin, {"K": self.K, "n": self.n},
                                  {"n": self.n}, self.to_dict())


def theorem_certificate(w: WeightVector, caps: Caps | None = None) -> Certificate:
    """Run the whole case split on one instance and confirm P(|S| <= 1) >= G(1/4)."""
    caps = caps or DEFAULT_CAPS
    c = canonical_reorder(w)
    if c.n > caps.path_n:
        raise CapacityError(f"path enumeration capped at n={caps.path_n}, got n={c.n}")
    norm = w.norm_sq
    if norm > 1 + (0 if w.mode != "float" else NORM_TOL):
        raise DomainError(f"sum of squares must be <= 1, got {float(norm)!r}")
    p = build_profile(c, caps)
    n, K = p.n, p.K
    gq = eval_G(0.25)
    inside = p.inside_unit()
    per_T = {}
    mixture = 0.0
    for i in sorted(set(int(t) for t in np.unique(p.T))):
        cp = conditional_prob_given_T(c, i, p)
        bound = case_bound(K, i, n)
        per_T[i] = {"count": cp.denominator, "cond_prob": cp.float_value, "bound": bound,
                    "margin": cp.float_value - bound, "case": case_of(K, i, n),
                    "boundary_count": cp.boundary_count}
        mixture += cp.denominator / 2 ** n * bound
    final = ExactProbability(int(inside.sum()), 2 ** n)
    if K <= n - 4:
        branch, final_bound = "K_le_n_minus_4", eval_h(K)
    elif K == n - 3:
        branch, final_bound = "K_eq_n_minus_3", eval_half_mix(K)
    else:
        branch, final_bound = "K_ge_n_minus_2", 0.5
    rule = verify_all_equal_signs_rule(c, p)
    var = verify_variance_bounds(c, p)
    inv = check_profile_invariants(c, p)
    direct = prob_abs_le_one(w, "auto" if w.n <= caps.naive_n else "mim", caps)
    checks = {
        "invariants": inv.passed,
        "all_equal_signs_rule": rule.passed,
        "variance_bounds": var.passed,
        "conditional_bounds": all(v["margin"] >= 0 for v in per_T.values()),
        "prob_ge_mixture": final.float_value >= mixture - 1e-15,
        "mixture_ge_branch_bound": mixture >= final_bound - 1e-15,
        "branch_bound_ge_G_quarter": final_bound >= gq,
        "prob_ge_G_quarter": final.fraction >= gq,
        "matches_direct_count": direct.numerator * 2 ** (n - w.n) == final.numerator,
    }
    return Certificate(K, n, branch, per_T, final, mixture, final_bound, gq,
                       all(checks.values()), checks)
