"""Seeded instance generation, verification batches and extremal search.

Randomness comes from numpy's PCG64 generator.  Every trial draws from its
own stream keyed by ``(seed, ordinal)``, so a batch gives the same report
whatever the thread count or execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .bounds import C_STAR, bd_tail_bound, eval_G
from .dist import (ExactProbability, WeightVector, prob_abs_le_one, shifted_prob,
                   tail_prob)
from .numerics import SQRT2, DomainError, Phi_bar
from .report import VerificationReport

DEFAULT_SEED = 42
STYLES = ("uniform-sphere", "sparse", "two-block", "equal")
RANDOM_STYLES = STYLES[:3]
# c* Phi_bar(sqrt 2) equals 1/4 only up to float rounding.
RATIO_TOL = 1e-12


@dataclass(frozen=True)
class InstanceGenerator:
    n: int
    seed: int = DEFAULT_SEED
    style: str = "uniform-sphere"

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if self.style not in STYLES:
            raise DomainError(f"unknown style {self.style!r}")


@dataclass(frozen=True)
class SearchResult:
    best_weights: WeightVector
    best_prob: ExactProbability
    restarts: int
    evaluations: int
    seed: int

    def to_dict(self) -> dict:
        return {"best_weights": list(self.best_weights.weights),
                "best_prob": self.best_prob.to_dict(), "restarts": self.restarts,
                "evaluations": self.evaluations, "seed": self.seed}


def trial_rng(seed: int, ordinal: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & (2 ** 64 - 1), ordinal])


def _normalize(v: np.ndarray) -> np.ndarray:
    norm = math.sqrt(math.fsum(float(x) ** 2 for x in v))
    return v / norm


def random_unit_weights(gen: InstanceGenerator) -> WeightVector:
    """A nonnegative unit-norm weight vector; deterministic in (n, seed, style)."""
    n = gen.n
    if gen.style == "equal":
        return WeightVector.from_squares([Fraction(1, n)] * n)
    if n == 1:
        return WeightVector.from_floats([1.0])
    rng = np.random.default_rng(int(gen.seed) & (2 ** 64 - 1))
    if gen.style == "uniform-sphere":
        v = np.abs(rng.standard_normal(n))
    elif gen.style == "sparse":
        k = int(rng.integers(1, n + 1))
        v = np.zeros(n)
        v[rng.choice(n, size=k, replace=False)] = np.abs(rng.standard_normal(k))
    else:
        m = int(rng.integers(1, n))
        a, b = rng.uniform(0.05, 1.0, size=2)
        v = np.array([a] * m + [b] * (n - m))
    if not np.any(v > 0):
        v[0] = 1.0
    return WeightVector.from_floats(_normalize(v))


def random_instance(seed: int, ordinal: int, n_max: int, n_min: int = 1) -> tuple[WeightVector, dict]:
    rng = trial_rng(seed, ordinal)
    n = int(rng.integers(n_min, n_max + 1))
    style = RANDOM_STYLES[ordinal % len(RANDOM_STYLES)]
    sub_seed = int(rng.integers(2 ** 63))
    w = random_unit_weights(InstanceGenerator(n, sub_seed, style))
    return w, {"ordinal": ordinal, "n": n, "style": style, "seed": sub_seed}


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def equal_weights_oracle(n: int) -> Fraction:
    """P(|S| <= 1) for n weights 1/sqrt(n): S = k/sqrt(n), inside iff k^2 <= n."""
    good = sum(comb(n, b) for b in range(n + 1) if (2 * b - n) ** 2 <= n)
    return Fraction(good, 2 ** n)


def _classify(prob: ExactProbability) -> str:
    return "tolerance_ambiguity" if prob.boundary_count else "bound_violated"


def verify_theorem_batch(trials: int = 1000, n_max: int = 12, seed: int = DEFAULT_SEED,
                         engine: str = "mim", equal_max: int = 20,
                         threads: int = 1) -> VerificationReport:
    """Minimum exact P(|S| <= 1) over random unit instances and the equal-weights family."""
    if n_max > 26:
        raise DomainError("n_max must be <= 26")
    g = eval_G(0.25)

    def trial(ordinal):
        w, meta = random_instance(seed, ordinal, n_max)
        p = prob_abs_le_one(w, engine)
        return {**meta, "prob": p, "weights": list(w.weights)}

    rows = _map(trial, range(trials), threads)
    equal_rows, equal_ok = [], True
    for n in range(2, equal_max + 1):
        w = random_unit_weights(InstanceGenerator(n, seed, "equal"))
        p = prob_abs_le_one(w, engine)
        match = p.fraction == equal_weights_oracle(n)
        equal_ok &= match
        equal_rows.append({"ordinal": f"equal-{n}", "n": n, "style": "equal", "prob": p,
                           "weights": list(w.weights), "oracle_match": match})
    allrows = rows + equal_rows
    worst = min(range(len(allrows)), key=lambda i: (allrows[i]["prob"].fraction, i))
    wr = allrows[worst]
    violations = [{"ordinal": r["ordinal"], "kind": _classify(r["prob"])}
                  for r in allrows if r["prob"].fraction < g]
    margin = wr["prob"].float_value - g
    return VerificationReport(
        "theorem_batch", not violations and equal_ok, margin,
        {"ordinal": wr["ordinal"], "n": wr["n"], "style": wr["style"], "weights": wr["weights"]},
        {"trials": trials, "n_max": n_max, "seed": seed, "equal_n": [2, equal_max]},
        {"min_prob": wr["prob"].fraction, "G_quarter": g, "equal_family_matches_oracle": equal_ok,
         "min_ge_half": wr["prob"].fraction >= Fraction(1, 2), "violations": violations},
        records=[{"ordinal": r["ordinal"], "n": r["n"], "style": r["style"],
                  "prob": r["prob"].float_value, "margin": r["prob"].float_value - g,
                  "boundary_count": r["prob"].boundary_count} for r in allrows],
    )


def lemma2_instance(U: float, seed: int, ordinal: int, n_max: int = 12) -> tuple[float, WeightVector]:
    """x uniform on [-1, 1], a uniform direction, and a uniform scale sigma <= sqrt(U)(1+|x|)."""
    rng = trial_rng(seed, ordinal)
    x = float(rng.uniform(-1.0, 1.0))
    n = int(rng.integers(1, n_max + 1))
    d = rng.standard_normal(n)
    d = _normalize(d)
    sigma = float(rng.uniform(0.0, math.sqrt(U) * (1 + abs(x))))
    return x, WeightVector.from_floats(sigma * d)


def verify_lemma2_batch(U: float = 0.25, trials: int = 500, seed: int = DEFAULT_SEED,
                        n_max: int = 12, engine: str = "mim", threads: int = 1) -> VerificationReport:
    """Shifted probability P(|x + Y| <= 1) against G(U) under the variance budget."""
    if not 0 < U <= 0.5:
        raise DomainError(f"U must lie in (0, 1/2], got {U!r}")
    g = eval_G(U)

    def trial(ordinal):
        x, w = lemma2_instance(U, seed, ordinal, n_max)
        assert w.norm_sq <= U * (1 + abs(x)) ** 2 * (1 + 1e-12)
        p = shifted_prob(x, w, engine)
        return {"ordinal": ordinal, "x": x, "n": w.n, "sigma": math.sqrt(w.norm_sq),
                "prob": p, "weights": list(w.weights)}

    rows = _map(trial, range(trials), threads)
    # degenerate sigma = 0 instance
    rows.append({"ordinal": "zero", "x": 0.5, "n": 3, "sigma": 0.0,
                 "prob": shifted_prob(0.5, WeightVector.from_floats([0.0] * 3), engine),
                 "weights": [0.0] * 3})
    worst = min(range(len(rows)), key=lambda i: (rows[i]["prob"].fraction, i))
    wr = rows[worst]
    margin = wr["prob"].float_value - g
    violations = [{"ordinal": r["ordinal"], "kind": _classify(r["prob"])}
                  for r in rows if r["prob"].fraction < g]
    claim = "lemma2_quarter" if U == 0.25 else ("lemma2_2_7" if abs(U - 2 / 7) < 1e-15 else "lemma2")
    return VerificationReport(
        claim, not violations, margin,
        {k: wr[k] for k in ("ordinal", "x", "n", "sigma", "weights")},
        {"U": U, "trials": trials, "seed": seed, "n_max": n_max},
        {"G_U": g, "min_prob": wr["prob"].fraction, "violations": violations},
        records=[{"ordinal": r["ordinal"], "x": r["x"], "n": r["n"], "sigma": r["sigma"],
                  "prob": r["prob"].float_value, "margin": r["prob"].float_value - g}
                 for r in rows],
    )


def _bd_ratio(w: WeightVector, y: float, engine: str) -> tuple[float, ExactProbability]:
    sigma = math.sqrt(float(w.norm_sq))
    if sigma == 0:
        return 0.0, ExactProbability(0, 2 ** w.n)
    p = tail_prob(w, y * sigma, engine)
    return p.float_value / bd_tail_bound(y), p


def verify_bd_batch(trials: int = 500, y_grid=(SQRT2, 1.6, 2.0, 3.0), seed: int = DEFAULT_SEED,
                    n_max: int = 12, engine: str = "mim", threads: int = 1) -> VerificationReport:
    """Exact tails P(Y/sigma >= y) against c* Phi_bar(y) for y >= sqrt 2."""
    y_grid = [float(y) for y in y_grid]
    if any(y < SQRT2 for y in y_grid):
        raise DomainError("every grid point must be >= sqrt(2)")

    def trial(ordinal):
        w, meta = random_instance(seed, ordinal, n_max)
        out = []
        for y in y_grid:
            r, p = _bd_ratio(w, y, engine)
            out.append({**meta, "y": y, "ratio": r, "prob": p, "weights": list(w.weights)})
        return out

    rows = [r for chunk in _map(trial, range(trials), threads) for r in chunk]
    sharp = WeightVector.from_squares([Fraction(1, 2)] * 2)
    for y in y_grid:
        r, p = _bd_ratio(sharp, y, engine)
        rows.append({"ordinal": "sharp", "n": 2, "style": "equal", "y": y, "ratio": r,
                     "prob": p, "weights": list(sharp.weights)})
    worst = max(range(len(rows)), key=lambda i: (rows[i]["ratio"], -i))
    wr = rows[worst]
    violations = [{"ordinal": r["ordinal"], "y": r["y"], "kind": _classify(r["prob"])}
                  for r in rows if r["ratio"] > 1 + RATIO_TOL]
    return VerificationReport(
        "bd_bound", not violations, 1.0 - wr["ratio"],
        {k: wr[k] for k in ("ordinal", "n", "y", "weights")},
        {"trials": trials, "y_grid": y_grid, "seed": seed, "n_max": n_max},
        {"max_ratio": wr["ratio"], "c_star": C_STAR, "violations": violations},
        records=[{"ordinal": r["ordinal"], "n": r["n"], "y": r["y"], "ratio": r["ratio"],
                  "margin": 1.0 - r["ratio"]} for r in rows],
    )


def bd_sharpness() -> VerificationReport:
    """(1/sqrt 2, 1/sqrt 2) at y = sqrt 2: the exact tail 1/4 meets c* Phi_bar(sqrt 2)."""
    w = WeightVector.from_squares([Fraction(1, 2)] * 2)
    p = tail_prob(w, SQRT2)
    bound = C_STAR * Phi_bar(SQRT2)
    gap = abs(p.float_value - bound)
    return VerificationReport("bd_sharpness", p.fraction == Fraction(1, 4) and gap <= 1e-10,
                              1e-10 - gap, {"y": SQRT2}, {},
                              {"tail": p.fraction, "bound": bound,
                               "boundary_count": p.boundary_count})


def minimize_prob(n: int, restarts: int = 50, seed: int = DEFAULT_SEED, steps: int = 60,
                  engine: str = "mim", threads: int = 1) -> SearchResult:
    """Random-restart local search for small P(|S| <= 1) on the unit sphere.

    Each step rotates a random coordinate pair by an angle from a geometric
    schedule and keeps the move only on a strict decrease of the exact count.
    """
    if not 1 <= n <= 20:
        raise DomainError("n must lie in 1..20")

    def run(r):
        rng = trial_rng(seed, r)
        v = np.array(random_unit_weights(InstanceGenerator(n, int(rng.integers(2 ** 63)))).weights)
        best = prob_abs_le_one(WeightVector.from_floats(v), engine)
        evals = 1
        if n == 1:
            return best.numerator, v, best, evals
        theta0, decay = math.pi / 4, 0.93
        for k in range(steps):
            i, j = rng.choice(n, size=2, replace=False)
            theta = theta0 * decay ** k * (1 if rng.random() < 0.5 else -1)
            cand = v.copy()
            ci, cj = math.cos(theta), math.sin(theta)
            cand[i], cand[j] = ci * v[i] - cj * v[j], cj * v[i] + ci * v[j]
            cand = np.abs(_normalize(cand))
            p = prob_abs_le_one(WeightVector.from_floats(cand), engine)
            evals += 1
            if p.numerator < best.numerator:
                v, best = cand, p
        return best.numerator, v, best, evals

    results = _map(run, range(restarts), threads)
    k = min(range(len(results)), key=lambda i: (results[i][0], i))
    _, v, best, _ = results[k]
    return SearchResult(WeightVector.from_floats(v), best, restarts,
                        sum(r[3] for r in results), seed)
