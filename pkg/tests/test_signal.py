import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clickfield.errors import NormalizationError, OrthonormalityError, ShapeError, ValidationError
from clickfield.signal import (
    CovarianceSpec,
    FieldSample,
    GridSpec,
    SignalSource,
    TemporalModel,
    build_mixed_source,
    build_pure_source,
    empirical_covariance,
    next_sample,
    replica_seed_sequence,
    total_energy,
)

from conftest import random_orthonormal, random_state

N = 10**5


class TestGrid:
    def test_defaults(self):
        g = GridSpec((4, 2))
        assert g.dimension == 2
        assert g.total_cells == 8
        assert g.dV == pytest.approx(1 / 8)

    def test_flat_index(self):
        g = GridSpec((3, 4))
        assert g.flat_index((1, 2)) == 6
        with pytest.raises(ShapeError):
            g.flat_index(12)

    @pytest.mark.parametrize("cells,dv", [((0,), None), ((2,), 0.0), ((2,), -1.0)])
    def test_rejects(self, cells, dv):
        with pytest.raises(ValidationError):
            GridSpec(cells, dv)

    def test_point_and_uniform_modes_are_normalized(self):
        g = GridSpec((5,), 0.3)
        assert g.norm(g.point_mode(2)) == pytest.approx(1.0)
        assert g.norm(g.uniform_mode()) == pytest.approx(1.0)


class TestBuildPure:
    def test_uniform_mode(self, grid4):
        src = build_pure_source(np.ones(4), 1.0, seed=0, grid=grid4)
        assert src.trace == 1.0
        assert src.covariance.rank == 1
        np.testing.assert_allclose(src.covariance.modes[0], np.ones(4))

    def test_point_mass_kernel(self, grid4):
        psi = grid4.point_mode(1)
        src = build_pure_source(psi, 2.0, seed=0, grid=grid4)
        assert src.trace == 2.0
        k = src.covariance.kernel_matrix()
        mask = np.ones((4, 4), bool)
        mask[1, 1] = False
        assert np.all(k[mask] == 0)
        assert k[1, 1].real == pytest.approx(2.0 / grid4.dV)

    def test_rejects_unnormalized(self, grid4):
        with pytest.raises(NormalizationError):
            build_pure_source(np.ones(4) * 1.01, 1.0, seed=0, grid=grid4)

    @pytest.mark.parametrize("eps", [0.0, -1.0])
    def test_rejects_nonpositive_energy(self, grid4, eps):
        with pytest.raises(ValidationError):
            build_pure_source(np.ones(4), eps, seed=0, grid=grid4)

    def test_second_moment(self):
        # E|phi(x1)|^2 = eps |Psi(x1)|^2 = 0.64 eps.
        g = GridSpec((2,), 1.0)
        eps = 1.5
        src = build_pure_source([np.sqrt(0.64), np.sqrt(0.36)], eps, seed=3, grid=g)
        e = np.abs(src.sample_block(N)[:, 0]) ** 2
        se = e.std(ddof=1) / np.sqrt(N)
        assert abs(e.mean() - 0.64 * eps) <= 3 * se


class TestBuildMixed:
    def test_rank_one_reduces_to_pure(self, grid4, rng):
        psi = random_state(grid4, rng)
        a = build_pure_source(psi, 0.7, seed=9, grid=grid4)
        b = build_mixed_source([psi], [0.7], seed=9, grid=grid4)
        np.testing.assert_array_equal(a.sample_block(100), b.sample_block(100))

    def test_completeness_kernel(self):
        g = GridSpec((2,))
        modes = np.array([[1, 1], [1, -1]], dtype=complex)  # unit norm at dV = 1/2
        src = build_mixed_source(modes, [0.5, 0.5], seed=0, grid=g)
        np.testing.assert_allclose(src.covariance.operator_matrix(), 0.5 * np.eye(2), atol=1e-15)

    def test_empirical_covariance_diagonal(self):
        g = GridSpec((2,), 1.0)
        src = build_mixed_source(g.standard_basis(), [0.7, 0.3], seed=4, grid=g)
        cov = empirical_covariance(src, N)
        assert cov[0, 0].real == pytest.approx(0.7, rel=0.05)
        assert cov[1, 1].real == pytest.approx(0.3, rel=0.05)

    def test_non_orthonormal_reports_pair(self, grid4):
        modes = np.array([np.ones(4), grid4.point_mode(0)])
        with pytest.raises(OrthonormalityError) as info:
            build_mixed_source(modes, [0.5, 0.5], seed=0, grid=grid4)
        pairs = {(j, k) for j, k, _ in info.value.pairs}
        assert (0, 1) in pairs
        assert "(0, 1)" in str(info.value)

    def test_rejects_all_zero_weights(self, grid4):
        with pytest.raises(ValidationError):
            build_mixed_source(grid4.standard_basis(), np.zeros(4), seed=0, grid=grid4)

    def test_rejects_negative_weight(self, grid4):
        with pytest.raises(ValidationError):
            build_mixed_source(grid4.standard_basis()[:2], [1.0, -0.1], seed=0, grid=grid4)

    def test_operator_is_psd_with_trace(self, rng):
        g = GridSpec((6,))
        cov = CovarianceSpec(g, random_orthonormal(g, 3, rng), [0.5, 0.3, 0.2])
        ev = np.linalg.eigvalsh(cov.operator_matrix())
        assert ev.min() > -1e-12
        assert ev.sum() == pytest.approx(1.0)


class TestSampling:
    def test_pure_samples_collinear(self, grid4, rng):
        psi = random_state(grid4, rng)
        src = build_pure_source(psi, 2.0, seed=1, grid=grid4)
        x = src.sample_block(50)
        ratio = x / psi
        np.testing.assert_allclose(ratio, ratio[:, :1] * np.ones((1, 4)), rtol=1e-12)
        assert np.mean(np.abs(ratio[:, 0]) ** 2) == pytest.approx(2.0, rel=0.5)

    def test_next_sample_ticks(self, grid4):
        src = build_pure_source(np.ones(4), 1.0, seed=1, grid=grid4)
        a, b = next_sample(src), next_sample(src)
        assert (a.tick, b.tick) == (0, 1)
        assert a.amplitudes.shape == (4,)
        assert not np.array_equal(a.amplitudes, b.amplitudes)

    @pytest.mark.parametrize("kappa", [0.0, 0.6])
    def test_block_and_single_draws_agree(self, grid4, kappa):
        src1 = build_pure_source(np.ones(4), 1.0, TemporalModel(kappa), seed=5, grid=grid4)
        src2 = src1.fresh()
        singles = np.array([next_sample(src1).amplitudes for _ in range(20)])
        blocks = np.concatenate([src2.sample_block(7), src2.sample_block(13)])
        np.testing.assert_array_equal(singles, blocks)

    def test_reproducible(self, rng):
        g = GridSpec((6,))
        modes = random_orthonormal(g, 3, rng)
        a = build_mixed_source(modes, [1, 2, 3], TemporalModel(0.3), seed=77, grid=g)
        b = build_mixed_source(modes, [1, 2, 3], TemporalModel(0.3), seed=77, grid=g)
        np.testing.assert_array_equal(a.sample_block(1000), b.sample_block(1000))
        c = a.spawn(1)
        assert not np.array_equal(c.sample_block(10), a.fresh().sample_block(10))

    def test_replica_seed_matches_spawn(self):
        ss = np.random.SeedSequence(123).spawn(3)[2]
        assert replica_seed_sequence(123, 2).generate_state(4).tolist() == ss.generate_state(4).tolist()

    def test_zero_mean(self, rng):
        g = GridSpec((6,))
        src = build_mixed_source(random_orthonormal(g, 3, rng), [0.5, 0.3, 0.2], seed=2, grid=g)
        x = src.sample_block(N)
        mean = x.mean(axis=0)
        se_re = x.real.std(axis=0, ddof=1) / np.sqrt(N)
        se_im = x.imag.std(axis=0, ddof=1) / np.sqrt(N)
        assert np.all(np.abs(mean.real) <= 4 * se_re)
        assert np.all(np.abs(mean.imag) <= 4 * se_im)

    @pytest.mark.parametrize("kappa", [0.0, 0.5])
    def test_lag_one_correlation(self, grid4, kappa):
        src = build_pure_source(np.ones(4), 1.0, TemporalModel(kappa), seed=8, grid=grid4)
        xi = src.coefficient_block(N)[:, 0]
        r = np.real(np.vdot(xi[:-1], xi[1:])) / np.vdot(xi, xi).real
        # Large-sample s.e. of the lag-one estimator: sqrt((1 - kappa^2) / n).
        assert abs(r - kappa) <= 3 * np.sqrt((1 - kappa**2) / N)

    @pytest.mark.parametrize("kappa", [0.0, 0.5, 0.9, 0.99])
    def test_stationary_coefficient_variance(self, kappa):
        g = GridSpec((1,))
        first, last = [], []
        for seed in range(400):
            src = build_pure_source([1.0], 1.0, TemporalModel(kappa), seed=seed, grid=g)
            xi = src.coefficient_block(10**4)[:, 0]
            first.append(xi[0])
            last.append(xi[-1])
        # E|xi|^2 = 1 at both ends; |xi|^2 ~ Exp(1) so s.e. = 1/sqrt(400).
        for v in (first, last):
            assert abs(np.mean(np.abs(v) ** 2) - 1.0) <= 4 / np.sqrt(400)

    def test_ar1_rejects_kappa_one(self):
        with pytest.raises(ValidationError):
            TemporalModel(1.0)


class TestEnergy:
    def test_zero_field(self, grid4):
        assert total_energy(FieldSample(np.zeros(4, complex), 0), grid4) == 0.0

    def test_unit_field(self, grid4):
        assert total_energy(FieldSample(np.ones(4, complex), 0), grid4) == pytest.approx(1.0)

    def test_length_mismatch(self, grid4):
        with pytest.raises(ShapeError):
            total_energy(FieldSample(np.ones(3, complex), 0), grid4)

    @given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False), min_size=4, max_size=4),
           st.integers(1, 3))
    def test_additive(self, vals, split):
        g = GridSpec((4,))
        a = np.array(vals)
        lo, hi = a.copy(), a.copy()
        lo[split:] = 0
        hi[:split] = 0
        whole = total_energy(FieldSample(a, 0), g)
        parts = total_energy(FieldSample(lo, 0), g) + total_energy(FieldSample(hi, 0), g)
        assert whole >= 0
        assert whole == pytest.approx(parts, rel=1e-12, abs=1e-12)

    def test_mean_energy_is_trace(self, rng):
        g = GridSpec((6,))
        src = build_mixed_source(random_orthonormal(g, 3, rng), [0.5, 0.3, 0.7], seed=12, grid=g)
        e = np.sum(np.abs(src.sample_block(N)) ** 2, axis=1) * g.dV
        assert abs(e.mean() - 1.5) <= 3 * e.std(ddof=1) / np.sqrt(N)


class TestEmpiricalCovariance:
    def test_two_samples_hermitian(self, grid4, rng):
        src = build_pure_source(random_state(grid4, rng), 1.0, seed=0, grid=grid4)
        c = empirical_covariance(src, 2)
        np.testing.assert_allclose(c, c.conj().T)

    def test_rejects_single_sample(self, grid4):
        src = build_pure_source(np.ones(4), 1.0, seed=0, grid=grid4)
        with pytest.raises(ValidationError):
            empirical_covariance(src, 1)

    def test_point_mass(self, grid4):
        src = build_pure_source(grid4.point_mode(2), 1.0, seed=6, grid=grid4)
        cov, se = empirical_covariance(src, N, return_stderr=True)
        expected = src.covariance.kernel_matrix()
        assert expected[2, 2].real == pytest.approx(1.0 / grid4.dV)
        assert np.all(np.abs(cov - expected) <= 5 * se + 1e-12)
