import itertools
from fractions import Fraction

import numpy as np
import pytest

from signsum.bounds import eval_G, eval_U
from signsum.dist import Caps, CapacityError, WeightVector
from signsum.numerics import DomainError
from signsum.search import random_instance
from signsum.stopping import (UndefinedConditionalError, build_profile, canonical_reorder,
                              case_bound, case_of, case_U, check_profile_invariants,
                              compute_K, compute_T, conditional_prob_given_T, is_canonical,
                              theorem_certificate, verify_all_equal_signs_rule,
                              verify_variance_bounds)


def stopping_oracle(v, signs):
    """T = min({t <= n-1 : |X_t| > 1 - v_{t+1}} U {n-1}) straight from the definition."""
    n = len(v)
    X = [sum(s * x for s, x in zip(signs[:t], v[:t])) for t in range(n + 1)]
    hits = [t for t in range(1, n) if abs(X[t]) > 1 - v[t]]
    T = min(hits + [n - 1])
    return T, X[T]


def K_oracle(v):
    n = len(v)
    M = [sum(v[:t]) for t in range(n + 1)]
    hits = [t for t in range(1, n) if M[t] > 1 - v[t]]
    return min(hits + [n - 1])


def random_rational_unit(rng, n):
    """Nonnegative rationals with sum of squares <= 1."""
    while True:
        v = [Fraction(int(rng.integers(0, 12)), 12) for _ in range(n)]
        if sum(x * x for x in v) <= 1 and any(v):
            return v


class TestCanonicalOrder:
    def test_example(self):
        c = canonical_reorder(WeightVector.from_floats([0.9, 0.3, 0.2, 0.1]))
        assert c.ordered_weights.weights == (0.3, 0.1, 0.2, 0.9)
        assert c.padded_zeros == 0

    def test_equal_unchanged(self):
        c = canonical_reorder(WeightVector.from_rationals(["1/2"] * 4))
        assert c.exact_values() == [Fraction(1, 2)] * 4

    def test_padding(self):
        c = canonical_reorder(WeightVector.from_rationals([1]))
        assert c.exact_values() == [0, 0, 0, 1]
        assert c.padded_zeros == 3
        assert c.permutation == (3,)

    def test_negative_absorbed(self):
        c = canonical_reorder(WeightVector.from_floats([-0.6, 0.8]))
        assert c.flipped == (0,)
        assert c.ordered_weights.weights == (0.6, 0.0, 0.0, 0.8)

    def test_ties_stable(self):
        c = canonical_reorder(WeightVector.from_rationals(["1/4", "1/2", "1/4", "1/2", "1/4"]))
        # the two halves go to v_n then v_1, the quarters in input order after them
        assert c.permutation == (3, 4, 1, 0, 2)

    def test_permutation_round_trip(self):
        w = WeightVector.from_floats([0.1, 0.7, 0.3, 0.5, 0.2, 0.4])
        c = canonical_reorder(w)
        for j, dst in enumerate(c.permutation):
            assert c.ordered_weights.weights[dst] == w.weights[j]

    @pytest.mark.parametrize("seed", range(500))
    def test_seeded_inputs_canonical(self, seed):
        w, _ = random_instance(seed, 0, 20)
        c = canonical_reorder(w)
        assert is_canonical(c.exact_values())
        assert sorted(c.ordered_weights.weights) == sorted([abs(x) for x in w.weights] + [0.0] * c.padded_zeros)
        v = c.exact_values()
        assert v[0] + v[1] <= 1 + 1e-12

    def test_is_canonical_rejects(self):
        assert not is_canonical([0.9, 0.3, 0.2, 0.1])
        assert not is_canonical([0.5, 0.5, 0.5])


class TestK:
    def test_half_quads(self):
        assert compute_K(canonical_reorder(WeightVector.from_rationals(["1/2"] * 4))) == 2

    def test_tiny_weights(self):
        c = canonical_reorder(WeightVector.from_floats([1e-3] * 10))
        assert compute_K(c) == 9

    def test_against_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            v = random_rational_unit(rng, int(rng.integers(1, 11)))
            c = canonical_reorder(WeightVector.from_rationals(v))
            K = compute_K(c)
            assert K == K_oracle(c.exact_values())
            assert K >= 2


class TestT:
    def test_examples(self):
        c = canonical_reorder(WeightVector.from_rationals(["1/2"] * 4))
        assert compute_T(c, [1, 1, 1, 1]) == (2, 1)
        assert compute_T(c, [1, 1, -1, -1]) == (2, 1)
        assert compute_T(c, [1, -1, 1, -1]) == (3, Fraction(1, 2))

    def test_length_mismatch(self):
        c = canonical_reorder(WeightVector.from_rationals(["1/2"] * 4))
        with pytest.raises(DomainError):
            compute_T(c, [1, 1, 1])
        with pytest.raises(DomainError):
            compute_T(c, [1, 0, 1, 1])

    def test_vectorized_matches_oracle_exact(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            v = random_rational_unit(rng, int(rng.integers(1, 10)))
            c = canonical_reorder(WeightVector.from_rationals(v))
            p = build_profile(c)
            vals = c.exact_values()
            for idx in range(2 ** p.n):
                signs = p.signs(idx)
                T, X = stopping_oracle(vals, signs)
                assert int(p.T[idx]) == T
                assert p.to_number(p.X_T[idx]) == X
                assert compute_T(c, signs) == (T, X)

    def test_vectorized_matches_scalar_float(self):
        for ordinal in range(20):
            w, _ = random_instance(42, ordinal, 10, n_min=2)
            c = canonical_reorder(w)
            p = build_profile(c)
            for idx in range(0, 2 ** p.n, 3):
                T, X = compute_T(c, p.signs(idx))
                assert int(p.T[idx]) == T
                assert float(p.X_T[idx]) == pytest.approx(X, abs=1e-15)

    def test_path_cap(self):
        c = canonical_reorder(WeightVector.from_floats([0.1] * 8))
        with pytest.raises(CapacityError):
            build_profile(c, Caps(path_n=6))


class TestProfileInvariants:
    @pytest.mark.parametrize("ordinal", range(30))
    def test_seeded(self, ordinal):
        w, _ = random_instance(42, ordinal, 12, n_min=2)
        c = canonical_reorder(w)
        p = build_profile(c)
        rep = check_profile_invariants(c, p)
        assert rep.passed, rep.details
        assert p.premature_crossings == 0
        assert np.all(p.T >= p.K)


class TestEqualSignsRule:
    def substitute(self):
        return canonical_reorder(WeightVector.from_rationals(
            ["1/2", "1/2", "2/5", "2/5", "1/5", "1/5", "1/10", "1/10"]))

    def test_probability_half(self):
        c = self.substitute()
        rep = verify_all_equal_signs_rule(c)
        assert rep.applicable and rep.passed
        assert rep.details["K"] == 2
        assert rep.details["P_T_eq_K"] == Fraction(1, 2)
        assert rep.details["paths_T_eq_K_plus_1"] == 0

    def test_brute_force_frequency(self):
        c = self.substitute()
        vals = c.exact_values()
        Ts = [stopping_oracle(vals, s)[0] for s in itertools.product((1, -1), repeat=8)]
        assert Ts.count(2) == 128
        assert 3 not in Ts

    def test_not_applicable(self):
        c = canonical_reorder(WeightVector.from_floats([1e-3] * 10))
        rep = verify_all_equal_signs_rule(c)
        assert not rep.applicable and rep.passed

    def test_K_eq_n_minus_3_measures_next_step(self):
        # search seeded instances for the K = n-3 branch
        for ordinal in range(400):
            w, _ = random_instance(42, ordinal, 10, n_min=2)
            c = canonical_reorder(w)
            if compute_K(c) == c.n - 3:
                rep = verify_all_equal_signs_rule(c)
                assert rep.applicable and rep.passed
                assert "frequency_T_eq_K_plus_1" in rep.details
                return
        pytest.skip("no K = n-3 instance among the seeded draws")


class TestCases:
    def test_case_split(self):
        assert case_of(2, 4, 8) == "case3"
        assert case_of(2, 5, 8) == "case4"
        assert case_of(2, 6, 8) == "case12"
        assert case_of(3, 5, 12) == "case3"
        assert case_of(3, 6, 12) == "case4"

    def test_case_U_values(self):
        assert case_U(2, 2, 8) == Fraction(7, 25)
        assert case_U(2, 5, 8) == eval_U(2, 4)
        assert case_U(2, 7, 8) is None
        assert case_bound(2, 7, 8) == 0.5
        assert case_bound(2, 2, 8) == pytest.approx(eval_G(0.28))

    def test_integer_threshold_agrees(self):
        # 3K+2 even: both readings of the case boundary give the same budget
        for K in range(2, 20, 2):
            i = (3 * K + 2) // 2
            assert eval_U(K, i) == eval_U(K, Fraction(3 * K + 2, 2))


class TestVarianceBounds:
    def test_half_quads_padded(self):
        # M_2 = 1 is not > 1 - v_3 = 1, so K = 6 and no path stops by n-3
        c = canonical_reorder(WeightVector.from_rationals(["1/2"] * 4 + [0] * 4))
        rep = verify_variance_bounds(c)
        assert rep.passed
        assert rep.details == {"K": 6, "groups": 0}

    def test_infinite_K0_sentinel(self):
        c = canonical_reorder(WeightVector.from_rationals(["2/5", "3/10", "3/10", "1/10", "2/5", "2/5"]))
        rep = verify_variance_bounds(c)
        assert rep.passed and rep.details["K"] == 3
        d = rep.records[0]
        assert d.T == 3 and d.X_T == 1 and d.K0 == float("inf")
        assert d.to_dict()["K0"] == "inf"

    def test_substitute_groups(self):
        c = canonical_reorder(WeightVector.from_rationals(
            ["1/2", "1/2", "2/5", "2/5", "1/5", "1/5", "1/10", "1/10"]))
        rep = verify_variance_bounds(c)
        assert rep.passed and rep.margin >= 0
        assert rep.details["failures"] == {}
        d = rep.records[0]
        assert (d.T, d.X_T, d.paths, d.K0) == (2, Fraction(9, 10), 128, 9.0)
        assert d.B2 == 2 * Fraction(1, 10) ** 2
        assert d.slack == Fraction(7, 25) * Fraction(19, 10) ** 2 - Fraction(51, 100)

    def test_K0_boundary_exercised(self):
        # found by seeded search: T = 5 group sits at X_T = K/(K+1) = 3/4
        c = canonical_reorder(WeightVector.from_rationals(
            ["1/15", "13/30", "17/60", "17/60", "4/15", "19/60", "3/10", "4/15", "1/5", "23/60"]))
        rep = verify_variance_bounds(c)
        assert rep.passed and rep.details["K"] == 3
        assert rep.details["boundary_groups"] == 1
        (d,) = [d for d in rep.records if d.X_T == Fraction(3, 4)]
        assert d.T == 5
        assert d.B1 == d.B2 == Fraction(5, 16)
        assert d.K0 == 3.0

    def test_seed_42_n12(self):
        w, _ = random_instance(42, 0, 12, n_min=12)
        rep = verify_variance_bounds(canonical_reorder(w))
        assert rep.passed

    def test_skips_large_norm(self):
        rep = verify_variance_bounds(canonical_reorder(WeightVector.from_rationals([1, 1, 1, 1])))
        assert not rep.applicable

    def test_slack_matches_direct_computation(self):
        w, _ = random_instance(42, 3, 12, n_min=10)
        c = canonical_reorder(w)
        p = build_profile(c)
        rep = verify_variance_bounds(c, p)
        v = c.exact_values()
        for d in rep.records:
            tail = sum(x * x for x in v[d.T:])
            assert d.slack == pytest.approx(float(case_U(p.K, d.T, p.n)) * (1 + d.X_T) ** 2 - tail,
                                            abs=1e-12)


class TestConditional:
    def test_values(self):
        c = canonical_reorder(WeightVector.from_rationals(
            ["1/2", "1/2", "2/5", "2/5", "1/5", "1/5", "1/10", "1/10"]))
        cp = conditional_prob_given_T(c, 2)
        assert (cp.numerator, cp.denominator) == (78, 128)
        with pytest.raises(UndefinedConditionalError):
            conditional_prob_given_T(c, 3)

    def test_last_times_at_least_half(self):
        for ordinal in range(20):
            w, _ = random_instance(7, ordinal, 12, n_min=4)
            c = canonical_reorder(w)
            p = build_profile(c)
            for i in (p.n - 2, p.n - 1):
                if np.any(p.T == i):
                    assert conditional_prob_given_T(c, i, p).fraction >= Fraction(1, 2)


class TestCertificate:
    def test_equal_ninths(self):
        cert = theorem_certificate(WeightVector.from_squares([Fraction(1, 9)] * 9))
        assert cert.passed
        assert cert.final_prob.fraction >= Fraction(1, 2)
        assert cert.final_prob.fraction == Fraction(420, 512)

    def test_half_quads(self):
        cert = theorem_certificate(WeightVector.from_rationals(["1/2"] * 4))
        assert cert.passed
        assert cert.final_prob.fraction == Fraction(14, 16)
        assert cert.branch == "K_ge_n_minus_2"

    def test_unit_vector(self):
        cert = theorem_certificate(WeightVector.from_rationals([1, 0, 0, 0]))
        assert cert.passed and cert.final_prob.fraction == 1

    def test_substitute(self):
        cert = theorem_certificate(WeightVector.from_rationals(
            ["1/2", "1/2", "2/5", "2/5", "1/5", "1/5", "1/10", "1/10"]))
        assert cert.passed
        assert cert.branch == "K_le_n_minus_4"
        assert cert.final_prob.fraction == Fraction(188, 256)
        assert set(cert.per_T) == {2, 6, 7}
        assert cert.final_bound == pytest.approx(0.43314568966173099, abs=1e-12)
        d = cert.to_dict()
        assert d["final_prob_exact"] == "188/256" and d["pass"]

    def test_rejects_large_norm(self):
        with pytest.raises(DomainError):
            theorem_certificate(WeightVector.from_rationals(["1/2"] * 5))

    def test_capacity(self):
        with pytest.raises(CapacityError):
            theorem_certificate(WeightVector.from_squares([Fraction(1, 23)] * 23))
