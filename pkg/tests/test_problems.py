import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from scolab.errors import InvalidArgument
from scolab.numerics import RngStream, mean_and_se, project_ball
from scolab.problems import (
    AmirProblem,
    BitDataset,
    CoordinateProblem,
    IndexDataset,
    SignDataset,
    TightnessProblem,
    amir_loss,
    amir_min_empirical_risk,
    amir_empirical_risk,
    amir_population_risk,
    amir_subgrad,
    bad_coordinates,
    bad_event_holds,
    coordinate_loss,
    coordinate_sampler,
    default_d,
    dumps_dataset,
    empirical_mean,
    level_histogram,
    loads_dataset,
    sample_amir_dataset,
    sample_coordinate_dataset,
    sample_level_histogram,
    sample_tightness_dataset,
    tightness_erm,
    tightness_loss,
)

from conftest import SEED


def small_amir(d=6, n=3, lam=None):
    lam = 1 / (n * math.sqrt(d)) if lam is None else lam
    return AmirProblem(n=n, T=2 * n * n, d=d, lam=lam)


@st.composite
def ball_points(draw, d=6):
    v = np.array(draw(st.lists(st.floats(-1, 1), min_size=d, max_size=d)))
    return project_ball(v, 1.0)


bits6 = st.lists(st.integers(0, 1), min_size=6, max_size=6).map(np.array)


class TestTightness:
    prob = TightnessProblem(L=1.0, R=1.0, d=3)

    def test_loss_examples(self):
        u = self.prob.point
        assert tightness_loss(self.prob, np.zeros(3), u) == 0.0
        assert tightness_loss(self.prob, self.prob.z0, u) == -1.0
        p2 = TightnessProblem(L=2.0, R=1.0, d=3)
        assert tightness_loss(p2, -p2.z0, p2.point) == 2.0

    def test_alphabet(self):
        with pytest.raises(InvalidArgument):
            tightness_loss(self.prob, np.zeros(3), np.array([0.0, 1.0, 0.0]))

    def test_anchor_norm(self):
        p = TightnessProblem(L=1.0, R=2.5, d=4)
        assert np.linalg.norm(p.z0) == 2.5

    def test_erm(self):
        z0 = self.prob.z0
        np.testing.assert_array_equal(tightness_erm(self.prob, SignDataset([1, 1, 1])), z0)
        np.testing.assert_array_equal(tightness_erm(self.prob, SignDataset([-1, -1])), -z0)
        np.testing.assert_array_equal(tightness_erm(self.prob, SignDataset([1, -1])), z0)


class TestAmirConstruction:
    def test_default_sizes(self):
        assert AmirProblem.build(8).d == 24576
        assert AmirProblem.build(10).d == 153600
        assert AmirProblem.build(12).d == 884736
        assert default_d(3, 7) == math.ceil(0.75 * 7 * 8)

    def test_constants(self):
        p = AmirProblem.build(6)
        assert p.T == 72
        assert p.eta == pytest.approx(1 / (6 * math.sqrt(30)))
        assert p.lam == pytest.approx(1 / (6 * math.sqrt(p.d)))
        assert p.L_effective <= 4

    def test_lambda_cap(self):
        with pytest.raises(InvalidArgument):
            AmirProblem(n=2, T=8, d=16, lam=0.2)

    def test_loss_examples(self):
        p = AmirProblem(n=1, T=2, d=2, lam=0.01)
        assert amir_loss(p, np.zeros(2), np.array([1, 1])) == 0.0
        assert amir_loss(p, np.array([0.1, -0.2]), np.array([1, 0])) == pytest.approx(0.111)
        w = np.array([-0.1, -0.3])
        assert amir_loss(p, w, np.array([0, 0])) == 0.0

    def test_loss_dimension(self):
        p = small_amir()
        with pytest.raises(InvalidArgument):
            amir_loss(p, np.zeros(5), np.zeros(6))

    def test_subgrad_examples(self):
        p = AmirProblem(n=1, T=2, d=3, lam=0.05)
        mu = np.array([1.0, 0.5, 0.0])
        np.testing.assert_allclose(amir_subgrad(p, np.zeros(3), mu), p.lam * mu)
        np.testing.assert_array_equal(amir_subgrad(p, np.array([-1.0, -2.0, -0.1]), np.zeros(3)), 0)
        g = amir_subgrad(p, np.array([0.5, 0.7, 0.7]), np.zeros(3))
        np.testing.assert_array_equal(g, [0, 1, 0])

    def test_population_risk_examples(self):
        p = AmirProblem(n=1, T=2, d=3, lam=1e-9)
        assert amir_population_risk(p, np.zeros(3)) == 0
        p0 = AmirProblem(n=1, T=2, d=3, lam=1e-300)
        assert amir_population_risk(p0, np.array([0.5, 0, 0])) == pytest.approx(0.625)

    def test_population_risk_mc(self):
        p = small_amir(d=6)
        rng = RngStream(SEED, 11).generator()
        w = project_ball(rng.uniform(-1, 1, 6), 1.0)
        Z = rng.integers(0, 2, size=(100_000, 6))
        losses = Z @ (w * w) + p.lam * (Z @ w) + max(w.max(), 0)
        m, se = mean_and_se(losses)
        assert abs(m - amir_population_risk(p, w)) <= 3 * se

    def test_exact_empirical_minimum(self):
        p = small_amir(d=6)
        mu = np.array([0, 1 / 3, 2 / 3, 1, 0, 1 / 3])
        w_star = np.where(mu > 0, -p.lam / 2, 0.0)
        assert amir_empirical_risk(p, w_star, mu) == pytest.approx(amir_min_empirical_risk(p, mu))
        rng = RngStream(SEED, 12).generator()
        for _ in range(200):
            w = project_ball(rng.normal(0, 0.1, 6), 1.0)
            assert amir_empirical_risk(p, w, mu) >= amir_min_empirical_risk(p, mu) - 1e-15

    @given(ball_points(), st.lists(st.floats(-0.5, 0.5), min_size=6, max_size=6))
    def test_max_term_lipschitz(self, x, delta):
        delta = np.array(delta)
        g = lambda v: max(v.max(), 0.0)
        assert abs(g(x + delta) - g(x)) <= np.linalg.norm(delta) + 1e-12

    @given(ball_points(), ball_points(), bits6, st.floats(0, 1))
    def test_convex_along_segments(self, w1, w2, z, a):
        p = small_amir()
        mid = a * w1 + (1 - a) * w2
        assert amir_loss(p, mid, z) <= a * amir_loss(p, w1, z) + (1 - a) * amir_loss(p, w2, z) + 1e-12

    @given(ball_points(), ball_points(), bits6)
    def test_lipschitz(self, w1, w2, z):
        p = small_amir()
        assert abs(amir_loss(p, w1, z) - amir_loss(p, w2, z)) <= 4 * np.linalg.norm(w1 - w2) + 1e-12

    @given(ball_points(), ball_points(), bits6)
    def test_subgradient_inequality(self, v, w, z):
        # with mu = z the empirical risk is the loss at z
        p = small_amir()
        g = amir_subgrad(p, w, z.astype(float))
        assert amir_loss(p, v, z) >= amir_loss(p, w, z) + g @ (v - w) - 1e-12


class TestDatasets:
    def test_bad_coordinates_examples(self):
        ones = BitDataset.from_dense(np.ones((3, 11), dtype=np.uint8))
        bad, count = bad_coordinates(ones)
        assert count == 0 and not bad.any()
        zeros = BitDataset.from_dense(np.zeros((3, 11), dtype=np.uint8))
        bad, count = bad_coordinates(zeros)
        assert count == 11 and bad.all()

    def test_bad_count_matches_dense_definition(self):
        p = AmirProblem.build(3, d=77)
        ds = sample_amir_dataset(p, RngStream(SEED, 13).generator())
        bad, count = bad_coordinates(ds)
        np.testing.assert_array_equal(bad, ds.dense().sum(axis=0) == 0)
        assert level_histogram(ds)[0] == count

    def test_bad_count_mean_and_law(self):
        p = AmirProblem.build(3, d=100)
        rng = RngStream(SEED, 14).generator()
        counts = np.array([bad_coordinates(sample_amir_dataset(p, rng))[1] for _ in range(20_000)])
        m, se = mean_and_se(counts)
        assert abs(m - 12.5) <= 3 * se
        # chi-square goodness of fit against Binomial(100, 1/8), tails pooled
        edges = np.arange(5, 22)
        obs = np.array([np.sum(counts <= 5)] + [np.sum(counts == k) for k in edges[1:-1]]
                       + [np.sum(counts >= 21)])
        pmf = stats.binom(100, 1 / 8)
        exp = np.array([pmf.cdf(5)] + [pmf.pmf(k) for k in edges[1:-1]] + [pmf.sf(20)]) * counts.size
        assert stats.chisquare(obs, exp).pvalue > 0.001

    def test_event_probability_chernoff(self):
        for n in (6, 8):
            p = AmirProblem.build(n)
            rng = RngStream(SEED, 15 + n).generator()
            ev = np.array([bad_event_holds(int(sample_level_histogram(p, rng)[0]), p.T)
                           for _ in range(4000)])
            m, se = mean_and_se(ev)
            assert m >= 1 - 2 * math.exp(-p.T / 36) - 3 * se

    def test_bits_are_fair(self):
        p = AmirProblem.build(2, d=1003)
        ds = sample_amir_dataset(p, RngStream(SEED, 16).generator(), n=400)
        assert abs(ds.dense().mean() - 0.5) < 3.29 * math.sqrt(0.25 / (400 * 1003))

    def test_histogram_law_matches_full_sampling(self):
        p = AmirProblem.build(3, d=64)
        rng = RngStream(SEED, 17).generator()
        full = np.array([level_histogram(sample_amir_dataset(p, rng)) for _ in range(3000)])
        fast = np.array([sample_level_histogram(p, rng) for _ in range(3000)])
        for k in range(4):
            assert stats.ks_2samp(full[:, k], fast[:, k]).pvalue > 0.001

    def test_empirical_mean_examples(self):
        assert np.all(empirical_mean(BitDataset.from_dense(np.zeros((2, 3), np.uint8))) == 0)
        assert np.all(empirical_mean(BitDataset.from_dense(np.ones((2, 3), np.uint8))) == 1)
        np.testing.assert_allclose(empirical_mean(BitDataset.from_dense([[1, 0], [1, 1]])), [1, 0.5])

    def test_padding_validation(self):
        with pytest.raises(InvalidArgument):
            BitDataset(np.array([[0xFF]], dtype=np.uint8), 5)

    def test_immutable(self):
        ds = BitDataset.from_dense(np.ones((2, 9), np.uint8))
        with pytest.raises(ValueError):
            ds.packed[0, 0] = 0


class TestCoordinate:
    prob = CoordinateProblem(10)

    def test_loss(self):
        w = np.zeros(10)
        assert coordinate_loss(self.prob, w, 3) == 0
        w[3] = 1.0
        assert coordinate_loss(self.prob, w, 3) == -1

    def test_sampler_uniform(self):
        idx = coordinate_sampler(self.prob, RngStream(SEED, 18).generator(), size=10 ** 6)
        freq = np.bincount(idx, minlength=10) / idx.size
        se = math.sqrt(0.1 * 0.9 / idx.size)
        assert np.all(np.abs(freq - 0.1) <= 3.5 * se)
        assert stats.chisquare(np.bincount(idx, minlength=10)).pvalue > 0.001

    def test_index_mean(self):
        mu = empirical_mean(IndexDataset([1, 1, 4], 5))
        np.testing.assert_allclose(mu, [0, 2 / 3, 0, 0, 1 / 3])


class TestSerialization:
    def test_bit_roundtrip_and_layout(self):
        ds = BitDataset.from_dense(np.array([[1, 0, 1, 1, 0, 0, 0, 0, 1], [0] * 8 + [1]]))
        blob = dumps_dataset(ds)
        assert blob[:8] == b"SB" + (2).to_bytes(2, "little") + (9).to_bytes(4, "little")
        assert blob[8:] == bytes([0b10110000, 0b10000000, 0, 0b10000000])
        assert loads_dataset(blob) == ds

    def test_other_roundtrips(self):
        rng = RngStream(SEED, 19).generator()
        ic = sample_coordinate_dataset(CoordinateProblem(50), 7, rng)
        assert loads_dataset(dumps_dataset(ic)) == ic
        sd = sample_tightness_dataset(13, rng)
        assert loads_dataset(dumps_dataset(sd)) == sd
        big = sample_amir_dataset(AmirProblem.build(4), rng)
        assert loads_dataset(dumps_dataset(big)) == big

    def test_reproducible_bytes(self):
        p = AmirProblem.build(4)
        a = dumps_dataset(sample_amir_dataset(p, RngStream(SEED, 20).generator()))
        b = dumps_dataset(sample_amir_dataset(p, RngStream(SEED, 20).generator()))
        assert a == b

    def test_bad_blob(self):
        with pytest.raises(InvalidArgument):
            loads_dataset(b"XX" + bytes(6))
        with pytest.raises(InvalidArgument):
            loads_dataset(b"SB\x02\x00\x09\x00\x00\x00\x00")
