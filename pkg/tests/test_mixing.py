import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from cwsc import mixing
from cwsc.errors import (ConfigError, DiracMeasure, DomainError, OracleScaleExceeded,
                         SupercriticalRequired)
from cwsc.harness.rng import make_rng

# frozen from mpmath.findroot(tanh(beta c) - c) at 30 digits
C_2 = 0.9575040240772687
C_15 = 0.8585596366401102


def mp_magnetization(beta):
    mpmath.mp.dps = 30
    return float(mpmath.findroot(lambda c: mpmath.tanh(beta * c) - c, 0.9))


class TestSpontaneousMagnetization:
    def test_frozen_values(self):
        assert mixing.solve_spontaneous_magnetization(2.0) == pytest.approx(C_2, abs=1e-14)
        assert mixing.solve_spontaneous_magnetization(1.5) == pytest.approx(C_15, abs=1e-14)

    @pytest.mark.parametrize("beta", [1.01, 1.2, 1.5, 2.0, 5.0])
    def test_against_mpmath(self, beta):
        c = mixing.solve_spontaneous_magnetization(beta)
        assert c == pytest.approx(mp_magnetization(beta), abs=1e-13)
        assert abs(math.tanh(beta * c) - c) < 1e-14

    def test_saturation(self):
        assert abs(mixing.solve_spontaneous_magnetization(100.0) - 1.0) < 1e-6

    @pytest.mark.parametrize("beta", [0.0, 0.5, 1.0])
    def test_rejects_subcritical(self, beta):
        with pytest.raises(SupercriticalRequired):
            mixing.solve_spontaneous_magnetization(beta)


class TestMixingMeasure:
    def test_density_at_zero_is_normalization(self):
        mm = mixing.mixing_measure(0.5, 16)
        assert mm.density(0.0) == pytest.approx(mm.normalization, rel=1e-12)

    @pytest.mark.parametrize("beta,n", [(0.5, 16), (1.0, 100), (1.5, 1000), (3.0, 50)])
    def test_even(self, beta, n):
        mm = mixing.mixing_measure(beta, n)
        assert mm.density(0.3) == pytest.approx(mm.density(-0.3), rel=1e-13)

    def test_integrates_to_one_scipy(self):
        # independent route: scipy quad on the t-coordinate formula
        beta, n = 0.5, 16
        mm = mixing.mixing_measure(beta, n)

        def raw(t):
            F = math.atanh(t) ** 2 / beta + math.log(1 - t * t)
            return math.exp(-n / 2 * F) / (1 - t * t)

        Z = integrate.quad(raw, -1, 1, epsabs=1e-14, limit=200)[0]
        assert mm.normalization == pytest.approx(1.0 / Z, rel=1e-10)
        total = integrate.quad(mm.density, -1, 1, epsabs=1e-13, limit=200)[0]
        assert total == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("beta,n", [(0.5, 10 ** 4), (1.0, 10 ** 6), (1.5, 10 ** 4), (1.5, 10 ** 8)])
    def test_mass_is_one(self, beta, n):
        assert mixing.mixing_measure(beta, n).mass(-1.0, 1.0) == pytest.approx(1.0, abs=1e-10)

    def test_domain_errors(self):
        mm = mixing.mixing_measure(0.5, 16)
        with pytest.raises(DomainError):
            mm.density(1.0)
        with pytest.raises(DiracMeasure):
            mixing.mixing_measure(0.0, 16).density(0.1)

    @pytest.mark.parametrize("beta,n", [(0.5, 100), (1.0, 10 ** 4), (1.5, 10 ** 4)])
    def test_odd_moments_vanish(self, beta, n):
        mm = mixing.mixing_measure(beta, n)
        for p in (1, 3, 5):
            assert abs(mm.moment(p)) < 1e-12

    def test_dirac_moments(self):
        assert mixing.mixing_measure(0.0, 100).moment(2) == 0.0

    def test_critical_rate(self):
        a = mixing.mixing_measure(1.0, 10 ** 4).moment(2)
        b = mixing.mixing_measure(1.0, 2 * 10 ** 4).moment(2)
        assert a / b == pytest.approx(math.sqrt(2), rel=0.1)

    @pytest.mark.parametrize("beta", [0.5, 1.0])
    @pytest.mark.parametrize("p", [2, 4])
    def test_moment_decay(self, beta, p):
        scaled = [n ** (p / 4) * mixing.mixing_measure(beta, n).moment(p) for n in (100, 1000, 10 ** 4)]
        assert max(scaled) <= 1.5 * scaled[0]

    def test_supercritical_concentration(self):
        c = C_15
        for n in (10 ** 4, 10 ** 5):
            assert mixing.mixing_measure(1.5, n).mass(-c / 2, c / 2) < 1e-6
        # with n = N^2 spins the first absolute moment around c is O(1/N)
        vals = []
        for n in (1000, 10 ** 4, 10 ** 5):
            mm = mixing.mixing_measure(1.5, n)
            vals.append(math.sqrt(n) * mm.expect(lambda t: np.where(t > c / 2, np.abs(t - c), 0.0)))
        assert max(vals) <= 1.5 * vals[0]


class TestSampling:
    def test_dirac(self):
        rng = make_rng(1)
        assert np.all(mixing.mixing_measure(0.0, 100).sample(rng, 50) == 0.0)

    def test_symmetric_mean(self):
        draws = mixing.mixing_measure(0.5, 10 ** 4).sample(make_rng(2), 10 ** 5)
        assert abs(draws.mean()) < 3 * draws.std() / math.sqrt(draws.size)

    def test_supercritical_gap(self):
        draws = mixing.mixing_measure(1.5, 10 ** 4).sample(make_rng(3), 10 ** 5)
        assert np.mean(np.abs(draws) <= C_15 / 2) < 1e-3

    def test_deterministic(self):
        mm = mixing.mixing_measure(1.2, 500)
        assert np.array_equal(mm.sample(make_rng(9), 100), mm.sample(make_rng(9), 100))

    def test_matches_cdf(self):
        mm = mixing.mixing_measure(1.0, 400)
        draws = mm.sample(make_rng(4), 20_000)
        cdf = np.vectorize(lambda x: mm.mass(-1.0, x))
        res = stats.kstest(draws, cdf)
        assert res.pvalue > 1e-3

    @pytest.mark.parametrize("beta,n", [(0.7, 8), (1.0, 12), (1.4, 10)])
    def test_configuration_chi_square(self, beta, n):
        rng = make_rng(5)
        M = 10 ** 5
        t = mixing.mixing_measure(beta, n).sample(rng, M)
        ups = (rng.random((M, n)) < (1 + t[:, None]) / 2).sum(axis=1)
        observed = np.bincount(ups, minlength=n + 1)
        expected = np.array([math.comb(n, k) * mixing.exact_cw_pmf(beta, n, [1] * k + [-1] * (n - k))
                             for k in range(n + 1)]) * M
        keep = expected > 5
        chi2 = np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep])
        assert stats.chi2.sf(chi2, keep.sum() - 1) > 1e-3


class TestExactPmf:
    def test_rademacher(self):
        assert mixing.exact_cw_pmf(0.0, 2, [1, 1]) == pytest.approx(0.25, abs=1e-15)

    def test_enumeration(self):
        e = math.e
        assert mixing.exact_cw_pmf(1.0, 2, [1, 1]) == pytest.approx(e / (2 * e + 2), rel=1e-14)

    def test_brute_force(self):
        beta, n = 0.9, 10
        configs = np.array(np.meshgrid(*[[-1, 1]] * n)).reshape(n, -1).T
        w = np.exp(beta / (2 * n) * configs.sum(axis=1) ** 2)
        p = w / w.sum()
        for k in (0, 17, 511, 1023):
            assert mixing.exact_cw_pmf(beta, n, configs[k]) == pytest.approx(p[k], rel=1e-12)

    @given(st.permutations([1, 1, -1, 1, -1, -1, 1, 1]))
    def test_permutation_invariant(self, config):
        base = mixing.exact_cw_pmf(1.3, 8, [1, 1, -1, 1, -1, -1, 1, 1])
        assert mixing.exact_cw_pmf(1.3, 8, config) == base

    def test_oracle_limits(self):
        with pytest.raises(OracleScaleExceeded):
            mixing.exact_cw_pmf(1.0, 25, [1] * 25)
        with pytest.raises(ConfigError):
            mixing.exact_cw_pmf(1.0, 3, [1, 0, 1])


class TestDeFinetti:
    def test_dirac_reduces(self):
        assert mixing.definetti_pmf_oracle(0.0, 6, [1, -1, 1, 1, 1, -1]) == 2.0 ** -6

    def test_all_plus(self):
        y = [1] * 8
        assert abs(mixing.definetti_pmf_oracle(0.8, 8, y) - mixing.exact_cw_pmf(0.8, 8, y)) < 1e-8

    @settings(max_examples=30, deadline=None)
    @given(beta=st.sampled_from([0.2, 0.9, 1.0, 1.6, 2.5]), n=st.integers(1, 12), data=st.data())
    def test_consistency(self, beta, n, data):
        k = data.draw(st.integers(0, n))
        y = [1] * k + [-1] * (n - k)
        assert abs(mixing.definetti_pmf_oracle(beta, n, y) - mixing.exact_cw_pmf(beta, n, y)) < 1e-8

    def test_depends_on_count_only(self):
        a = mixing.definetti_pmf_oracle(1.2, 6, [1, 1, -1, -1, -1, 1])
        b = mixing.definetti_pmf_oracle(1.2, 6, [-1, 1, 1, 1, -1, -1])
        assert a == b


class TestCorrelations:
    def test_odd_and_dirac(self):
        assert abs(mixing.correlation_exact(1.0, 1000, 3)) < 1e-12
        assert mixing.correlation_exact(0.0, 1000, 2) == 0.0

    def test_supercritical_limit(self):
        assert mixing.correlation_exact(1.5, 10 ** 4, 2) == pytest.approx(C_15 ** 2, rel=0.05)

    def test_small_n_brute_force(self):
        # E[Y1 Y2] by enumerating Curie-Weiss(1.2, 8)
        beta, n = 1.2, 8
        configs = np.array(np.meshgrid(*[[-1, 1]] * n)).reshape(n, -1).T
        w = np.exp(beta / (2 * n) * configs.sum(axis=1) ** 2)
        expected = np.sum(w * configs[:, 0] * configs[:, 1]) / w.sum()
        assert mixing.correlation_exact(beta, n, 2) == pytest.approx(expected, rel=1e-10)

    def test_rejects_ell_zero(self):
        with pytest.raises(ConfigError):
            mixing.correlation_exact(1.0, 10, 0)


class TestKernels:
    def test_plain_moments(self):
        k = mixing.SpinKernel.plain(0.5)
        assert k.m1(0.3) == pytest.approx(0.3)
        assert k.m2(0.3) == pytest.approx(1.0)

    def test_plain_saturation(self):
        eps, count = 1e-3, 200
        k = mixing.SpinKernel.plain()
        rng = make_rng(6)
        hits = sum(np.all(k.sample(1 - eps, count, rng) == 1.0) for _ in range(2000))
        p = (1 - eps / 2) ** count
        assert abs(hits / 2000 - p) < 4 * math.sqrt(p * (1 - p) / 2000)

    def test_plain_mean_zero(self):
        x = mixing.sample_spins(mixing.SpinKernel.plain(), 0.0, 10 ** 5, make_rng(7))
        assert abs(x.mean()) < 9 / math.sqrt(10 ** 5)

    def test_perturbed_support_and_mean(self):
        k = mixing.SpinKernel.perturbed(1.5)
        c, s = k.c, math.sqrt(1 - k.c ** 2)
        x = k.sample(0.6, 10 ** 5, make_rng(8))
        assert set(np.unique(x)) <= {(1 - c) / s, (-1 - c) / s}
        mean = (0.6 - c) / s
        sd = math.sqrt(k.m2(0.6) - mean ** 2)
        assert abs(x.mean() - mean) < 3 * sd / math.sqrt(x.size)
        (a, b), _ = k.support(-0.2)
        assert (a, b) == ((1 + c) / s, (-1 + c) / s)

    @given(st.floats(-0.999, 0.999).filter(lambda t: t != 0))
    def test_perturbed_closed_forms(self, t):
        k = mixing.SpinKernel.perturbed(1.5)
        m1, one_minus_m2 = mixing.perturbed_moments(1.5, t)
        assert k.m1(t) == pytest.approx(m1, abs=1e-12)
        assert 1 - k.m2(t) == pytest.approx(one_minus_m2, abs=1e-12)

    def test_perturbed_zeros_and_jump(self):
        c = C_15
        assert mixing.perturbed_moments(1.5, c) == pytest.approx((0, 0), abs=1e-15)
        assert mixing.perturbed_moments(1.5, -c) == pytest.approx((0, 0), abs=1e-15)
        up = mixing.perturbed_moments(1.5, 1e-300)[0]
        down = mixing.perturbed_moments(1.5, 0.0)[0]
        s = math.sqrt(1 - c * c)
        assert up == pytest.approx(-c / s) and down == pytest.approx(c / s)

    def test_sample_rejects_boundary(self):
        with pytest.raises(DomainError):
            mixing.SpinKernel.plain().sample(1.0, 3, make_rng(0))
