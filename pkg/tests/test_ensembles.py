import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cwsc import ensembles, mixing
from cwsc.ensembles import EnsembleSpec, MixingSpace, build, build_perturbed
from cwsc.errors import ConfigError, SupercriticalRequired
from cwsc.harness.rng import make_rng

C_15 = 0.8585596366401102


def test_spec_invariants():
    with pytest.raises(SupercriticalRequired):
        EnsembleSpec("perturbed_supercritical", 1.0, 8)
    with pytest.raises(ConfigError):
        EnsembleSpec("rademacher", 0.5, 8)
    with pytest.raises(ConfigError):
        EnsembleSpec("curie_weiss", 0.5, 5000)
    with pytest.raises(ConfigError):
        EnsembleSpec("gaussian", 0.5, 8)


@settings(max_examples=20, deadline=None)
@given(beta=st.sampled_from([0.0, 0.5, 1.0, 1.5]), N=st.integers(2, 40), seed=st.integers(0, 2 ** 64 - 1))
def test_symmetric_spin_entries(beta, N, seed):
    H = build(EnsembleSpec("curie_weiss", beta, N, seed)).entries
    assert np.array_equal(H, H.T)
    assert np.all(np.abs(H) == 1 / math.sqrt(N))


def test_rademacher_mean():
    N = 200
    H = build(EnsembleSpec("rademacher", 0.0, N, 3))
    upper = H.entries[np.triu_indices(N)] * math.sqrt(N)
    assert abs(upper.mean()) < 9 / math.sqrt(upper.size)
    assert H.t == 0.0


def test_determinism():
    spec = EnsembleSpec("curie_weiss", 1.2, 50, 123)
    a, b = build(spec), build(spec)
    assert np.array_equal(a.entries, b.entries) and a.t == b.t


def test_pair_products_match_quadrature():
    N, R = 32, 1000
    rng = make_rng(11)
    products = np.empty(R)
    for r in range(R):
        X = build(EnsembleSpec("curie_weiss", 1.0, N), rng).entries * math.sqrt(N)
        iu = np.triu_indices(N, 1)
        off = X[iu]
        products[r] = off[:-1] @ off[1:] / (off.size - 1)
    expected = mixing.mixing_measure(1.0, N * N).moment(2)
    assert abs(products.mean() - expected) < 3 * products.std() / math.sqrt(R)


def test_exchangeable_pairs():
    # joint law of two fixed entry pairs across replicas
    rng = make_rng(12)
    N, R = 6, 10_000
    counts = np.zeros((2, 4), dtype=int)
    for _ in range(R):
        X = build(EnsembleSpec("curie_weiss", 1.0, N), rng).entries > 0
        counts[0, 2 * X[0, 1] + X[2, 3]] += 1
        counts[1, 2 * X[4, 4] + X[1, 5]] += 1
    assert stats.chi2_contingency(counts)[1] > 1e-3


class TestPerturbed:
    def test_support(self):
        N = 24
        c, s = C_15, math.sqrt(1 - C_15 ** 2)
        rng = make_rng(13)
        for _ in range(10):
            Z = build_perturbed(EnsembleSpec("perturbed_supercritical", 1.5, N), rng)
            sign = -1.0 if Z.t > 0 else 1.0
            allowed = np.array([1 + sign * c, -1 + sign * c]) / (s * math.sqrt(N))
            gap = np.min(np.abs(Z.entries[..., None] - allowed), axis=-1)
            assert gap.max() < 1e-14

    def test_paths_identical(self):
        spec = EnsembleSpec("perturbed_supercritical", 1.5, 40, 77)
        a = build_perturbed(spec, make_rng(5), path="shift")
        b = build_perturbed(spec, make_rng(5), path="kernel")
        assert np.array_equal(a.entries, b.entries)

    def test_rank_one_difference(self):
        for seed in range(5):
            rescaled, perturbed = ensembles.build_supercritical_pair(1.5, 64, make_rng(seed))
            D = perturbed.entries - rescaled.entries
            sv = np.linalg.svd(D, compute_uv=False)
            assert np.sum(sv > 1e-10 * sv[0]) == 1
            assert sv[0] == pytest.approx(C_15 * math.sqrt(64) / math.sqrt(1 - C_15 ** 2), rel=1e-10)

    def test_entry_variance(self):
        N, R = 64, 200
        rng = make_rng(14)
        var = np.mean([np.mean(build_perturbed(EnsembleSpec("perturbed_supercritical", 1.5, N), rng).entries ** 2)
                       for _ in range(R)])
        assert var == pytest.approx(1 / N, rel=0.1)

    def test_requires_supercritical(self):
        with pytest.raises(SupercriticalRequired):
            build_perturbed(EnsembleSpec("curie_weiss", 1.0, 8))


class TestCustom:
    def test_missing_callbacks(self):
        with pytest.raises(ConfigError):
            ensembles.custom_ensemble(MixingSpace(sample_t=lambda N, rng: 0.0), 8, make_rng(0))

    def test_matches_builtin(self):
        space = ensembles.curie_weiss_space(0.8)
        a = ensembles.custom_ensemble(space, 20, make_rng(21))
        b = build(EnsembleSpec("curie_weiss", 0.8, 20), make_rng(21))
        assert np.array_equal(a.entries, b.entries)

    def test_gaussian_space(self):
        space = MixingSpace(sample_t=lambda N, rng: 0.0,
                            sample_spin_given_t=lambda t, n, rng: rng.standard_normal(n),
                            m1=lambda t: 0.0, m2=lambda t: 1.0)
        H = ensembles.custom_ensemble(space, 30, make_rng(2)).entries
        assert np.array_equal(H, H.T)


class TestConditions:
    def test_plain_subcritical_bounded(self):
        for beta in (0.5, 1.0):
            rep = ensembles.check_cw_type_conditions(ensembles.curie_weiss_space(beta),
                                                     [100, 1000, 10 ** 4], [2, 4, 6])
            assert rep.all_bounded()
            for p in (2, 4, 6):
                assert max(rep.values[(p, "central_first")]) <= 2 ** p
                assert max(rep.values[(p, "central_second")]) <= 2 ** p

    def test_plain_supercritical_diverges(self):
        rep = ensembles.check_cw_type_conditions(ensembles.curie_weiss_space(1.5), [100, 1000, 10 ** 4], [2])
        assert not rep.bounded(2, "first_moment")

    def test_perturbed_bounded(self):
        rep = ensembles.check_cw_type_conditions(ensembles.perturbed_space(1.5), [100, 1000, 10 ** 4], [2, 4])
        assert rep.all_bounded()


def test_serialization_roundtrip(tmp_path):
    M = build(EnsembleSpec("curie_weiss", 1.3, 17, 99))
    path = tmp_path / "m.bin"
    ensembles.save_matrix(M, path)
    back = ensembles.load_matrix(path)
    assert np.array_equal(back.entries, M.entries)
    assert back.t == M.t and back.spec.seed == 99 and back.spec.beta == 1.3
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(ConfigError):
        ensembles.load_matrix(path)
