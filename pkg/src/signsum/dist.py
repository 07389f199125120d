"""Exact distribution of randomly signed sums S = sum(eps_i * v_i).

Three ingestion modes share one interface:

``exact``
    every weight rational; sums live on the integer lattice (1/D) Z and all
    interval decisions are integer comparisons.
``surd``
    weights given by their squares (``sq:1/20``).  Each weight is stored as
    a * sqrt(d) with rational a and squarefree d; since square roots of
    distinct squarefree integers are linearly independent over Q, a sum
    equals a rational threshold only if its irrational coordinates vanish,
    so ties at rational endpoints are decided exactly.
``float``
    plain float weights; a sum within ``BOUNDARY_TOL`` of an endpoint is
    counted inside the (closed) interval and reported in
    ``ExactProbability.boundary_count``.

Two engines compute every probability: ``naive`` materializes all 2^n sums,
``mim`` (meet in the middle) enumerates the two halves and counts pairs with
a sorted search.  They must agree exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .numerics import DomainError

BOUNDARY_TOL = 1e-9
MERGE_TOL = 1e-12
# Pairs within this distance of a rational endpoint are re-decided exactly
# in surd mode.
_AMBIGUITY = 1e-7
_INT_LIMIT = 2 ** 62


class CapacityError(RuntimeError):
    """Instance too large for the requested engine or exact lattice."""


class WeightParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Caps:
    naive_n: int = 26
    mim_n: int = 50
    path_n: int = 22

    def __post_init__(self):
        if not (1 <= self.naive_n <= 30 and 1 <= self.mim_n <= 60 and 1 <= self.path_n <= 26):
            raise DomainError(f"caps out of supported range: {self}")


DEFAULT_CAPS = Caps()


def _squarefree_split(m: int) -> tuple[int, int]:
    """Return (s, d) with m = s^2 * d and d squarefree."""
    if m == 0:
        return 0, 1
    s, d, p = 1, 1, 2
    while p * p <= m:
        e = 0
        while m % p == 0:
            m //= p
            e += 1
        s *= p ** (e // 2)
        if e % 2:
            d *= p
        p += 1 if p == 2 else 2
    return s, d * m


def _as_fraction(token) -> Fraction:
    if isinstance(token, Rational):
        return Fraction(token)
    if isinstance(token, float):
        if not math.isfinite(token):
            raise DomainError(f"non-finite weight {token!r}")
        return Fraction(repr(token))
    return Fraction(str(token).strip())


@dataclass(frozen=True)
class WeightVector:
    """Weights v_1..v_n with exactness metadata.

    ``terms`` holds (a, d) pairs meaning a * sqrt(d) for the exact and surd
    modes and is ``None`` in float mode.  ``weights`` always carries the
    float values.
    """

    weights: tuple[float, ...]
    mode: str = "float"
    terms: tuple[tuple[Fraction, int], ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.weights) < 1:
            raise DomainError("a weight vector needs at least one weight")
        if not all(math.isfinite(v) for v in self.weights):
            raise DomainError("weights must be finite")
        if self.mode not in ("exact", "surd", "float"):
            raise DomainError(f"unknown mode {self.mode!r}")
        if (self.terms is None) != (self.mode == "float"):
            raise DomainError("terms must be given exactly for exact/surd modes")

    # construction

    @classmethod
    def from_floats(cls, values: Iterable[float]) -> "WeightVector":
        return cls(tuple(float(v) for v in values), "float")

    @classmethod
    def from_terms(cls, terms: Sequence[tuple[Fraction, int]]) -> "WeightVector":
        terms = tuple((Fraction(a), int(d)) if a != 0 else (Fraction(0), 1) for a, d in terms)
        mode = "exact" if all(d == 1 for _, d in terms) else "surd"
        values = tuple(float(a) * math.sqrt(d) for a, d in terms)
        return cls(values, mode, terms)

    @classmethod
    def from_rationals(cls, values: Iterable) -> "WeightVector":
        return cls.from_terms([(_as_fraction(v), 1) for v in values])

    @classmethod
    def from_squares(cls, squares: Iterable, signs: Iterable[int] | None = None) -> "WeightVector":
        """Weights sqrt(r_i) for rational r_i >= 0, optionally negated."""
        squares = [_as_fraction(r) for r in squares]
        signs = [1] * len(squares) if signs is None else list(signs)
        return cls.from_terms([_surd_term(r, s) for r, s in zip(squares, signs)])

    @classmethod
    def parse(cls, lines: Iterable[str]) -> "WeightVector":
        """Parse weights-file lines: ``0.25``, ``1/4`` or ``sq:1/20``; ``#`` starts a comment."""
        terms = []
        for lineno, raw in enumerate(lines, 1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                terms.append(_parse_token(text))
            except (ValueError, ZeroDivisionError, DomainError) as exc:
                raise WeightParseError(f"malformed weight {text!r} ({exc})", lineno) from None
        if not terms:
            raise WeightParseError("no weights found")
        return cls.from_terms(terms)

    @classmethod
    def load(cls, path: str | Path) -> "WeightVector":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh)

    # properties

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def exact_mode(self) -> bool:
        return self.mode == "exact"

    @property
    def norm_sq(self):
        if self.terms is None:
            return math.fsum(v * v for v in self.weights)
        return sum((a * a * d for a, d in self.terms), Fraction(0))

    @property
    def abs_sum(self) -> float:
        return math.fsum(abs(v) for v in self.weights)

    def __len__(self) -> int:
        return self.n

    def exact_values(self) -> list[Fraction] | None:
        """Rational weights in exact mode, otherwise None."""
        if self.mode != "exact":
            return None
        return [a for a, _ in self.terms]

    def subset(self, index: Sequence[int]) -> "WeightVector":
        terms = None if self.terms is None else tuple(self.terms[i] for i in index)
        return WeightVector(tuple(self.weights[i] for i in index), self.mode, terms)

    def absolute(self) -> "WeightVector":
        terms = None if self.terms is None else tuple((abs(a), d) for a, d in self.terms)
        return WeightVector(tuple(abs(v) for v in self.weights), self.mode, terms)

    def padded(self, n: int) -> "WeightVector":
        extra = max(0, n - self.n)
        terms = None if self.terms is None else self.terms + ((Fraction(0), 1),) * extra
        return WeightVector(self.weights + (0.0,) * extra, self.mode, terms)

    def lattice(self) -> "_Lattice":
        if self.terms is None:
            raise DomainError("float-mode weights have no exact lattice")
        return _Lattice.build(self.terms)

    def to_lines(self) -> list[str]:
        if self.terms is None:
            return [repr(v) for v in self.weights]
        out = []
        for a, d in self.terms:
            if d == 1:
                out.append(str(a))
            else:
                out.append(("-" if a < 0 else "") + f"sq:{a * a * d}")
        return out


def _surd_term(r: Fraction, sign: int = 1) -> tuple[Fraction, int]:
    if r < 0:
        raise DomainError(f"squared weight must be >= 0, got {r}")
    s, d = _squarefree_split(r.numerator * r.denominator)
    return (Fraction(s, r.denominator) * (1 if sign >= 0 else -1), d)


def _parse_token(text: str) -> tuple[Fraction, int]:
    sign = 1
    body = text
    if body.startswith("-sq:"):
        sign, body = -1, body[1:]
    if body.startswith("sq:"):
        return _surd_term(Fraction(body[3:].strip()), sign)
    return (Fraction(text), 1)


@dataclass(frozen=True)
class _Lattice:
    """Integer coordinates: weight i = (1/D) * sum_j Z[i, j] * sqrt(basis[j])."""

    D: int
    basis: tuple[int, ...]
    Z: np.ndarray

    @classmethod
    def build(cls, terms) -> "_Lattice":
        D = 1
        for a, _ in terms:
            D = math.lcm(D, a.denominator)
        basis = tuple(sorted({d for a, d in terms if a != 0} | {1}))
        col = {d: j for j, d in enumerate(basis)}
        rows = [[0] * len(basis) for _ in terms]
        for i, (a, d) in enumerate(terms):
            rows[i][col[d]] = int(a * D)
        if sum(max(abs(x) for x in r) for r in rows) >= _INT_LIMIT:
            raise CapacityError("common denominator too large for the exact lattice; use float weights")
        return cls(D, basis, np.array(rows, dtype=np.int64))

    @property
    def rational(self) -> bool:
        return self.basis == (1,)

    def to_float(self, keys: np.ndarray) -> np.ndarray:
        roots = np.sqrt(np.array(self.basis, dtype=float))
        return (keys.astype(float) @ roots) / self.D

    def compare(self, key: np.ndarray, t: Fraction) -> int:
        """Exact sign of value(key) - t."""
        rational = Fraction(int(key[0])) - t * self.D
        irr = [(int(z), d) for z, d in zip(key[1:], self.basis[1:]) if z != 0]
        return _surd_sign(rational, irr)


def _surd_sign(r: Fraction, terms: list[tuple[int, int]]) -> int:
    """Sign of r + sum z*sqrt(d) over distinct squarefree d > 1."""
    if not terms:
        return (r > 0) - (r < 0)
    if len(terms) == 1:
        z, d = terms[0]
        sr, sz = (r > 0) - (r < 0), (z > 0) - (z < 0)
        if sr == 0 or sr == sz:
            return sz if sr == 0 else sr
        # opposite signs: compare r^2 with z^2 d
        diff = r * r - z * z * d
        return sr if diff > 0 else sz
    with mpmath.workdps(80):
        v = mpmath.mpf(r.numerator) / r.denominator
        for z, d in terms:
            v += z * mpmath.sqrt(d)
        return int(mpmath.sign(v))


# ---------------------------------------------------------------------------
# distribution and probability records


@dataclass(frozen=True)
class ExactProbability:
    numerator: int
    denominator: int
    boundary_count: int = 0

    def __post_init__(self):
        if not 0 <= self.numerator <= self.denominator:
            raise ValueError(f"invalid probability {self.numerator}/{self.denominator}")

    @property
    def float_value(self) -> float:
        return self.numerator / self.denominator

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __float__(self) -> float:
        return self.float_value

    def to_dict(self) -> dict:
        return {"numerator": self.numerator, "denominator": self.denominator,
                "prob": self.float_value, "boundary_count": self.boundary_count}


@dataclass(frozen=True)
class SignedSumDistribution:
    """Atoms of S sorted by value; values are Fractions in exact mode."""

    values: tuple
    counts: tuple[int, ...]
    n: int

    @property
    def total(self) -> int:
        return sum(self.counts)

    def atoms(self) -> list[tuple]:
        return list(zip(self.values, self.counts))

    def as_dict(self) -> dict:
        return dict(self.atoms())

    def is_symmetric(self) -> bool:
        vals, cnts = list(self.values), list(self.counts)
        return all(c == cnts[-1 - i] and _neg_equal(v, vals[-1 - i])
                   for i, (v, c) in enumerate(zip(vals, cnts)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["value", "count", "prob"])
        denom = 2 ** self.n
        for v, c in self.atoms():
            writer.writerow([str(v) if isinstance(v, Fraction) else repr(float(v)), c, repr(c / denom)])
        return buf.getvalue()


def _neg_equal(a, b) -> bool:
    if isinstance(a, Fraction):
        return a == -b
    return abs(a + b) <= MERGE_TOL


# ---------------------------------------------------------------------------
# thresholds


@dataclass(frozen=True)
class _Interval:
    lo: object
    hi: object
    exact: bool  # thresholds are rationals usable for exact decisions


def _interval(w: WeightVector, lo, hi) -> _Interval:
    if w.mode == "float":
        lo, hi = float(lo), float(hi)
        if math.isnan(lo) or math.isnan(hi):
            raise DomainError("interval endpoints must not be NaN")
        if lo > hi:
            raise DomainError(f"inverted interval [{lo}, {hi}]")
        return _Interval(lo, hi, False)
    if w.mode == "surd" and (isinstance(lo, float) or isinstance(hi, float)):
        lo, hi = float(lo), float(hi)
        if lo > hi:
            raise DomainError(f"inverted interval [{lo}, {hi}]")
        return _Interval(lo, hi, False)
    lo, hi = _as_fraction(lo), _as_fraction(hi)
    if lo > hi:
        raise DomainError(f"inverted interval [{lo}, {hi}]")
    return _Interval(lo, hi, True)


def _int_bounds(lat: _Lattice, iv: _Interval) -> tuple[int, int]:
    lo = math.ceil(iv.lo * lat.D)
    hi = math.floor(iv.hi * lat.D)
    return max(lo, -_INT_LIMIT), min(hi, _INT_LIMIT)


def _resolve_engine(w: WeightVector, engine: str, caps: Caps) -> str:
    if engine == "auto":
        engine = "naive" if w.n <= 20 else "mim"
    if engine == "naive":
        if w.n > caps.naive_n:
            raise CapacityError(f"naive engine capped at n={caps.naive_n}, got n={w.n}")
    elif engine == "mim":
        if w.n > caps.mim_n:
            raise CapacityError(f"meet-in-the-middle engine capped at n={caps.mim_n}, got n={w.n}")
    else:
        raise DomainError(f"unknown engine {engine!r}")
    if w.n > 62:
        raise CapacityError("counts would overflow 64-bit integers")
    return engine


# ---------------------------------------------------------------------------
# enumeration


def _all_sums_float(weights: Sequence[float]) -> np.ndarray:
    """All 2^n signed sums; bit i of the index set means eps_i = -1."""
    sums = np.zeros(1)
    for v in weights:
        sums = np.concatenate([sums + v, sums - v])
    return sums


def _all_sums_keys(Z: np.ndarray) -> np.ndarray:
    keys = np.zeros((1, Z.shape[1]), dtype=np.int64)
    for row in Z:
        keys = np.concatenate([keys + row, keys - row])
    return keys


def _signs_of(index: np.ndarray, n: int) -> np.ndarray:
    bits = (index[:, None] >> np.arange(n)) & 1
    return 1 - 2 * bits


def enumerate_naive(w: WeightVector, caps: Caps | None = None) -> SignedSumDistribution:
    """Exhaustive distribution of S with equal values merged."""
    caps = caps or DEFAULT_CAPS
    if w.n > caps.naive_n:
        raise CapacityError(f"naive enumeration capped at n={caps.naive_n}, got n={w.n}")
    if w.mode == "exact":
        lat = w.lattice()
        ints = _all_sums_keys(lat.Z)[:, 0]
        vals, cnts = np.unique(ints, return_counts=True)
        values = tuple(Fraction(int(v), lat.D) for v in vals)
    elif w.mode == "surd":
        lat = w.lattice()
        keys, cnts = np.unique(_all_sums_keys(lat.Z), axis=0, return_counts=True)
        fl = lat.to_float(keys)
        order = np.argsort(fl, kind="stable")
        values, cnts = tuple(float(v) for v in fl[order]), cnts[order]
    else:
        sums = np.sort(_all_sums_float(w.weights))
        starts = np.concatenate([[0], np.nonzero(np.diff(sums) > MERGE_TOL)[0] + 1])
        ends = np.concatenate([starts[1:], [len(sums)]])
        values = tuple(float((sums[s] + sums[e - 1]) / 2) for s, e in zip(starts, ends))
        cnts = ends - starts
    return SignedSumDistribution(values, tuple(int(c) for c in cnts), w.n)


def _count_naive(w: WeightVector, iv: _Interval) -> tuple[int, int]:
    if w.mode == "exact":
        lat = w.lattice()
        lo, hi = _int_bounds(lat, iv)
        s = _all_sums_keys(lat.Z)[:, 0]
        return int(np.count_nonzero((s >= lo) & (s <= hi))), 0
    s = _all_sums_float(w.weights)
    if not iv.exact:
        lo, hi = iv.lo, iv.hi
        inside = (s >= lo - BOUNDARY_TOL) & (s <= hi + BOUNDARY_TOL)
        boundary = (np.abs(s - lo) <= BOUNDARY_TOL) | (np.abs(s - hi) <= BOUNDARY_TOL)
        return int(np.count_nonzero(inside)), int(np.count_nonzero(boundary))
    # surd mode, rational endpoints: float filter, exact decision near the ends
    lat = w.lattice()
    flo, fhi = float(iv.lo), float(iv.hi)
    sure = (s >= flo + _AMBIGUITY) & (s <= fhi - _AMBIGUITY)
    near = ((np.abs(s - flo) < _AMBIGUITY) | (np.abs(s - fhi) < _AMBIGUITY)) & ~sure
    idx = np.nonzero(near)[0]
    count = int(np.count_nonzero(sure))
    if len(idx):
        keys = _signs_of(idx, w.n) @ lat.Z
        count += sum(_exact_inside(lat, k, iv) for k in keys)
    return count, 0


def _exact_inside(lat: _Lattice, key: np.ndarray, iv: _Interval) -> bool:
    return lat.compare(key, iv.lo) >= 0 and lat.compare(key, iv.hi) <= 0


def _halves(n: int) -> tuple[list[int], list[int]]:
    h = (n + 1) // 2
    return list(range(h)), list(range(h, n))


def _count_mim(w: WeightVector, iv: _Interval) -> tuple[int, int]:
    left, right = _halves(w.n)
    if w.mode == "exact":
        lat = w.lattice()
        lo, hi = _int_bounds(lat, iv)
        a, ca = np.unique(_all_sums_keys(lat.Z[left])[:, 0], return_counts=True)
        b, cb = np.unique(_all_sums_keys(lat.Z[right])[:, 0], return_counts=True)
        cum = np.concatenate([[0], np.cumsum(cb)])
        hi_idx = np.searchsorted(b, hi - a, side="right")
        lo_idx = np.searchsorted(b, lo - a, side="left")
        per_a = np.maximum(cum[hi_idx] - cum[lo_idx], 0)
        return _checked_total(ca, per_a, w.n), 0
    if not iv.exact:
        a = _all_sums_float([w.weights[i] for i in left])
        b = np.sort(_all_sums_float([w.weights[i] for i in right]))
        lo, hi = iv.lo, iv.hi

        def window(x0, x1):
            return (np.searchsorted(b, x1 - a, side="right")
                    - np.searchsorted(b, x0 - a, side="left"))

        inside = window(lo - BOUNDARY_TOL, hi + BOUNDARY_TOL)
        if lo + BOUNDARY_TOL >= hi - BOUNDARY_TOL:
            boundary = inside
        else:
            boundary = (window(lo - BOUNDARY_TOL, lo + BOUNDARY_TOL)
                        + window(hi - BOUNDARY_TOL, hi + BOUNDARY_TOL))
        return int(inside.sum()), int(boundary.sum())
    return _count_mim_surd(w, iv, left, right), 0


def _checked_total(ca: np.ndarray, per_a: np.ndarray, n: int) -> int:
    total = int(np.dot(ca.astype(np.int64), per_a.astype(np.int64)))
    if not 0 <= total <= 2 ** n:
        raise OverflowError("pair count out of range")
    return total


def _count_mim_surd(w: WeightVector, iv: _Interval, left, right) -> int:
    lat = w.lattice()
    ka, ca = np.unique(_all_sums_keys(lat.Z[left]), axis=0, return_counts=True)
    kb, cb = np.unique(_all_sums_keys(lat.Z[right]), axis=0, return_counts=True)
    fa = lat.to_float(ka)
    fb = lat.to_float(kb)
    order = np.argsort(fb, kind="stable")
    kb, cb, fb = kb[order], cb[order], fb[order]
    cum = np.concatenate([[0], np.cumsum(cb)])
    flo, fhi = float(iv.lo), float(iv.hi)

    def idx(x, side):
        return np.searchsorted(fb, x - fa, side=side)

    s_lo, s_hi = idx(flo + _AMBIGUITY, "left"), idx(fhi - _AMBIGUITY, "right")
    sure = np.maximum(cum[s_hi] - cum[s_lo], 0)
    total = _checked_total(ca, sure, w.n)
    n_lo, n_hi = idx(flo - _AMBIGUITY, "left"), idx(fhi + _AMBIGUITY, "right")
    for i in np.nonzero(n_hi > n_lo)[0]:
        if s_hi[i] > s_lo[i]:
            js = [*range(n_lo[i], min(s_lo[i], n_hi[i])), *range(max(s_hi[i], n_lo[i]), n_hi[i])]
        else:
            js = range(n_lo[i], n_hi[i])
        for j in js:
            if _exact_inside(lat, ka[i] + kb[j], iv):
                total += int(ca[i]) * int(cb[j])
    return total


def prob_in_interval(w: WeightVector, lo, hi, engine: str = "auto",
                     caps: Caps | None = None) -> ExactProbability:
    """P(lo <= S <= hi) as an exact count over 2^n."""
    caps = caps or DEFAULT_CAPS
    iv = _interval(w, lo, hi)
    engine = _resolve_engine(w, engine, caps)
    count, boundary = (_count_naive if engine == "naive" else _count_mim)(w, iv)
    return ExactProbability(count, 2 ** w.n, boundary)


def upper_proxy(w: WeightVector) -> int:
    """An integer strictly above every attainable |S|."""
    return math.ceil(w.abs_sum) + 1


def tail_prob(w: WeightVector, t, engine: str = "auto", caps: Caps | None = None) -> ExactProbability:
    """P(S >= t)."""
    top = upper_proxy(w)
    if isinstance(t, float) or w.mode == "float":
        if float(t) > top:
            return ExactProbability(0, 2 ** w.n)
        return prob_in_interval(w, float(t), float(top), engine, caps)
    if _as_fraction(t) > top:
        return ExactProbability(0, 2 ** w.n)
    return prob_in_interval(w, t, top, engine, caps)


def shifted_prob(x, w: WeightVector, engine: str = "auto", caps: Caps | None = None) -> ExactProbability:
    """P(|x + Y| <= 1) for Y = sum(eps_i v_i) and |x| <= 1."""
    if isinstance(x, Rational):
        x = Fraction(x)
    else:
        x = float(x)
        if not math.isfinite(x):
            raise DomainError("x must be finite")
    if abs(x) > 1:
        raise DomainError(f"shift must satisfy |x| <= 1, got {x}")
    return prob_in_interval(w, -1 - x, 1 - x, engine, caps)


def prob_abs_le_one(w: WeightVector, engine: str = "auto", caps: Caps | None = None) -> ExactProbability:
    return prob_in_interval(w, -1, 1, engine, caps)
