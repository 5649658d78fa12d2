import math
from fractions import Fraction

import numpy as np
import pytest

from wagnersis.dgauss import (
    GaussParam,
    SimilarityBudget,
    _decide_exact,
    _exp_neg_pi_interval,
    _LazyUniform,
    empirical_similarity,
    enum_coset_z,
    enum_scaled_zn,
    enum_z,
    eta_qary_bound,
    eta_scaled_zn_bruteforce,
    eta_zn_bound,
    eta_zn_bruteforce,
    lambda1_inf_lower_bound,
    min_entropy_bound,
    pmf_bruteforce,
    rho_bruteforce,
    sample_z,
    sample_zn,
    tail_bound_linf,
)
from wagnersis.errors import InsufficientSamples, PreconditionViolated, WidthTooSmall
from wagnersis.rngutil import derive_rng


class TestExactMachinery:
    @pytest.mark.parametrize("a", [Fraction(1, 7), Fraction(3, 2), Fraction(25, 4),
                                   Fraction(0), Fraction(41)])
    def test_exp_interval_encloses_float(self, a):
        lo, hi = _exp_neg_pi_interval(a, 96)
        ref = math.exp(-math.pi * float(a))
        assert float(lo) <= ref * (1 + 1e-12) and ref * (1 - 1e-12) <= float(hi)
        assert hi - lo < Fraction(1, 1 << 60)

    def test_decide_exact_matches_float_far_from_boundary(self):
        rng = derive_rng(0, "decide")
        for num, den in ((1, 4), (2, 3), (7, 8)):
            a = Fraction(num, den)
            p = math.exp(-math.pi * float(a))
            for u in (p / 2, p * 0.9, min(0.999, p * 1.1), min(0.999, p * 2)):
                lu = _LazyUniform(int(u * (1 << 53)), 53)
                got = _decide_exact(Fraction(1), a, lu, rng)
                assert got == (u < p)


class TestSampleZ:
    def test_width_too_small(self):
        with pytest.raises(WidthTooSmall):
            sample_z(GaussParam.make(s=0.1), derive_rng(0))

    def test_weight_ratio_zero_one(self):
        # Pr[0]/Pr[1] for D_{Z,2} equals e^{pi/4} by definition of the weights.
        pmf = pmf_bruteforce(enum_z(), GaussParam.make(s=2, c=0), radius=60)
        assert pmf[0] / pmf[1] == pytest.approx(math.exp(math.pi / 4), rel=1e-12)

    def test_pmf_agreement(self):
        param = GaussParam.make(s=2, c=0.3)
        rng = derive_rng(42, "pmf")
        n = 150_000
        draws = [sample_z(param, rng) for _ in range(n)]
        pmf = pmf_bruteforce(enum_z(), param, radius=40)
        res = empirical_similarity(draws, pmf)
        assert res.chi2_p >= 1e-3
        assert res.excess(4.5) <= 0.0

    def test_symmetry_at_zero_center(self):
        param = GaussParam.make(s=3, c=0)
        rng = derive_rng(7, "sym")
        n = 100_000
        counts = {}
        for _ in range(n):
            v = sample_z(param, rng)
            counts[v] = counts.get(v, 0) + 1
        for k in range(1, 5):
            a, b = counts.get(k, 0), counts.get(-k, 0)
            se = math.sqrt(a + b)
            assert abs(a - b) <= 4.5 * se + 1

    def test_fraction_center(self):
        param = GaussParam.make(s=3, c=Fraction(1, 3))
        rng = derive_rng(3)
        vals = {sample_z(param, rng) for _ in range(200)}
        assert all(isinstance(v, int) for v in vals)


class TestSampleZn:
    def test_width_precondition_scales_with_n(self):
        s_edge = math.sqrt(math.log(2 * 64 + 4) / math.pi)
        with pytest.raises(WidthTooSmall):
            sample_zn(GaussParam.make(s=s_edge * 0.9), 64, derive_rng(0))

    def test_dimension_one_matches_sample_z(self):
        param = GaussParam.make(s=2, c=0.3)
        r1, r2 = derive_rng(5, "a"), derive_rng(5, "a")
        xs = [sample_z(param, r1) for _ in range(2000)]
        ys = [sample_zn(param, 1, r2)[0] for _ in range(2000)]
        assert xs == ys  # identical stream, identical decisions

    def test_moments_against_pmf_oracle(self):
        param = GaussParam.make(s=3, c=0)
        pmf = pmf_bruteforce(enum_z(), param, radius=45)
        mean = sum(k * p for k, p in pmf.items())
        var = sum((k - mean) ** 2 * p for k, p in pmf.items())
        m4 = sum((k - mean) ** 4 * p for k, p in pmf.items())
        rng = derive_rng(11, "mom")
        n = 60_000
        draws = np.array([sample_zn(param, 2, rng) for _ in range(n)])
        emp_var = draws.var(axis=0)
        se_var = math.sqrt((m4 - var**2) / n)
        assert np.all(np.abs(emp_var - var) < 4 * se_var)
        cross = float(np.mean(draws[:, 0] * draws[:, 1]))
        se_cross = var / math.sqrt(n)
        assert abs(cross) < 4 * se_cross

    def test_off_grid_centers(self):
        param = GaussParam.make(s=4, c=(5.5, -2.25))
        pmf_a = pmf_bruteforce(enum_z(), GaussParam.make(s=4, c=5.5), radius=60)
        pmf_b = pmf_bruteforce(enum_z(), GaussParam.make(s=4, c=-2.25), radius=60)
        means = (sum(k * p for k, p in pmf_a.items()),
                 sum(k * p for k, p in pmf_b.items()))
        sds = []
        for pmf, mu in zip((pmf_a, pmf_b), means):
            sds.append(math.sqrt(sum((k - mu) ** 2 * p for k, p in pmf.items())))
        rng = derive_rng(13)
        n = 50_000
        draws = np.array([sample_zn(param, 2, rng) for _ in range(n)])
        for j in range(2):
            se = sds[j] / math.sqrt(n)
            assert abs(float(draws[:, j].mean()) - means[j]) < 4 * se


class TestRhoBruteforce:
    def test_theta_value(self):
        val, err = rho_bruteforce(enum_z(), GaussParam.make(s=1, c=0), 40)
        expected = 1 + 2 * sum(math.exp(-math.pi * k * k) for k in range(1, 10))
        assert val == pytest.approx(expected, rel=1e-14)
        assert val == pytest.approx(1.0864348112, rel=1e-9)
        assert err < 1e-300 or err == 0.0

    def test_shifted_center_no_larger(self):
        v0, _ = rho_bruteforce(enum_z(), GaussParam.make(s=1, c=0), 40)
        v5, _ = rho_bruteforce(enum_z(), GaussParam.make(s=1, c=0.5), 40)
        assert v5 <= v0

    def test_scaling_identity(self):
        # rho_{2}(2 Z^2) = rho_{1}(Z^2)
        v_scaled, _ = rho_bruteforce(enum_scaled_zn(2, 2), GaussParam.make(s=2, c=(0, 0)), 40)
        v_plain, _ = rho_bruteforce(enum_scaled_zn(1, 2), GaussParam.make(s=1, c=(0, 0)), 20)
        assert v_scaled == pytest.approx(v_plain, rel=1e-12)

    def test_smoothing_inequality_over_centers(self):
        eps = 0.1
        s = eta_zn_bound(1, eps)
        denom, _ = rho_bruteforce(enum_z(), GaussParam.make(s=s, c=0), 12 * s)
        rng = derive_rng(0, "centers")
        for _ in range(100):
            c = rng.random()
            num, _ = rho_bruteforce(enum_z(), GaussParam.make(s=s, c=c), 12 * s)
            assert (1 - eps) / (1 + eps) - 1e-12 <= num / denom <= 1 + 1e-12


class TestFormulas:
    def test_eta_zn_values(self):
        assert eta_zn_bound(1, 1.0) == pytest.approx(math.sqrt(math.log(4) / math.pi), rel=1e-12)
        assert eta_zn_bound(1, 1.0) == pytest.approx(0.66428, abs=1e-4)
        assert eta_zn_bound(512, 2.0**-20) == pytest.approx(2.5728, abs=1e-3)

    def test_eta_zn_monotone(self):
        assert eta_zn_bound(1, 0.5) > eta_zn_bound(1, 1.0) > eta_zn_bound(1, 2.0)
        assert eta_zn_bound(8, 0.01) > eta_zn_bound(4, 0.01)

    def test_eta_qary_value_and_preconditions(self):
        v = eta_qary_bound(4, 8, 257, 2.0**-10)
        expect = math.sqrt(72 * math.log(2**10) / math.pi) * math.sqrt(257)
        assert v == pytest.approx(expect, rel=1e-12)
        assert v == pytest.approx(202.055, abs=0.01)
        with pytest.raises(PreconditionViolated):
            eta_qary_bound(4, 8, 257, 1 / (4 * 8) + 1e-9)
        with pytest.raises(PreconditionViolated):
            eta_qary_bound(7, 7, 7, 2.0**-10)  # q^(1-n/m) = 1 < 6
        with pytest.raises(PreconditionViolated):
            eta_qary_bound(4, 8, 256, 2.0**-10)  # composite q

    def test_lambda1_lower_bound(self):
        v = lambda1_inf_lower_bound(4, 8, 257)
        assert v == pytest.approx(math.sqrt(257) / (3 * math.sqrt(2)), rel=1e-12)
        assert v == pytest.approx(3.78, abs=0.01)
        assert v >= 257 ** (1 - 4 / 8) / 6  # m >= n strengthens the bound
        with pytest.raises(PreconditionViolated):
            lambda1_inf_lower_bound(5, 5, 7)

    def test_tail_bound(self):
        assert tail_bound_linf(1, 1) == pytest.approx(2 * math.exp(-math.pi), rel=1e-12)
        assert tail_bound_linf(1, 0.01) >= 1.0  # vacuous but unclamped
        assert tail_bound_linf(4, 2) < tail_bound_linf(4, 1)

    def test_tail_bound_empirical(self):
        # D_{Z^2, 5}: fraction with ||X||_inf > 1.5 * 5 versus 4 e^{-pi 1.5^2}.
        param = GaussParam.make(s=5, c=0)
        rng = derive_rng(17)
        n = 100_000
        R = 1.5
        exceed = sum(
            1 for _ in range(n)
            if max(abs(v) for v in sample_zn(param, 2, rng)) > R * 5)
        bound = tail_bound_linf(2, R)
        sigma = math.sqrt(bound * (1 - bound) / n)
        assert exceed / n <= bound + 3 * sigma

    def test_min_entropy(self):
        assert min_entropy_bound(8, 0) == 2.0**-8
        assert min_entropy_bound(2, 1 / 3) == pytest.approx(0.5, rel=1e-12)
        with pytest.raises(PreconditionViolated):
            min_entropy_bound(2, 1.0)

    def test_min_entropy_brute_check(self):
        eps = 0.05
        s = 2 * eta_zn_bound(2, eps)
        pmf = pmf_bruteforce(enum_scaled_zn(1, 2), GaussParam.make(s=s, c=(0.3, 0.7)),
                             radius=12 * s)
        assert max(pmf.values()) <= min_entropy_bound(2, eps)


class TestSimilarityBudget:
    def test_validation(self):
        SimilarityBudget(delta=0.0, epsilon=0.5)
        with pytest.raises(PreconditionViolated):
            SimilarityBudget(delta=-1.0, epsilon=0.5)
        with pytest.raises(PreconditionViolated):
            SimilarityBudget(delta=0.0, epsilon=0.6)


class TestEmpiricalSimilarity:
    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamples):
            empirical_similarity([0] * 100, {0: 1.0})

    def test_coverage_precondition(self):
        with pytest.raises(PreconditionViolated):
            empirical_similarity([0] * 20_000, {0: 0.5})

    def test_null_hypothesis_sane(self):
        param = GaussParam.make(s=3, c=0)
        pmf = pmf_bruteforce(enum_z(), param, radius=45)
        rng = derive_rng(23, "null")
        draws = [sample_z(param, rng) for _ in range(50_000)]
        res = empirical_similarity(draws, pmf)
        assert res.chi2_p >= 1e-3
        assert res.n_bins >= 5

    def test_detects_wrong_width(self):
        wide = GaussParam.make(s=3 * math.sqrt(2), c=0)
        narrow_pmf = pmf_bruteforce(enum_z(), GaussParam.make(s=3, c=0), radius=60)
        rng = derive_rng(29, "power")
        draws = [sample_z(wide, rng) for _ in range(100_000)]
        draws = [d for d in draws if d in narrow_pmf]
        res = empirical_similarity(draws, narrow_pmf)
        assert res.chi2_p < 1e-6

    def test_convolution_of_cosets(self):
        # X ~ D_{Z+1/2, s}, Y ~ D_{Z, s}; X - Y against D_{Z+1/2, sqrt(2) s}.
        s = 3.0
        rng = derive_rng(31, "conv")
        half = Fraction(1, 2)
        param_x = GaussParam.make(s=s, c=-half)
        param_y = GaussParam.make(s=s, c=0)
        n = 200_000
        diffs = []
        for _ in range(n):
            x = sample_z(param_x, rng) + half
            y = sample_z(param_y, rng)
            diffs.append(float(x - y))
        pmf = pmf_bruteforce(enum_coset_z(half),
                             GaussParam.make(s_sq=Fraction(2) * Fraction(s) ** 2, c=0),
                             radius=60)
        res = empirical_similarity(diffs, pmf)
        # eps from inverting the Z smoothing bound at s/sqrt(2)
        eps = 2.0 / (math.exp(math.pi * (s / math.sqrt(2)) ** 2) / 1 - 2)
        assert res.excess(4.5) <= 3 * eps + 1e-9
        assert res.chi2_p >= 1e-3


class TestEtaBruteforce:
    def test_zn_close_to_formula_bound(self):
        eps = 2.0**-10
        brute = eta_zn_bruteforce(3, eps)
        assert brute <= eta_zn_bound(3, eps) + 1e-9
        assert brute >= 0.5 * eta_zn_bound(3, eps)

    def test_scaled_lattice_scales(self):
        eps = 2.0**-8
        base = eta_zn_bruteforce(2, eps)
        scaled = eta_scaled_zn_bruteforce(Fraction(5, 2), 2, eps)
        assert scaled == pytest.approx(2.5 * base, rel=1e-6)

    def test_qary_enumeration(self):
        A = np.array([[1, 2, 1]])
        eta = __import__("wagnersis.dgauss", fromlist=["eta_qary_bruteforce"]) \
            .eta_qary_bruteforce(A, 3, 2.0**-12)
        assert 1.0 < eta < 6.0
