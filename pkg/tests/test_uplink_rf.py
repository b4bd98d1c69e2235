import math

import numpy as np
import pytest
from scipy import special

from errors import ParameterDomainError
from models import DistanceModel, NetworkRealization, UplinkConfig
from tools import geometry, uplink_rf
from utils.numerics import RngStream


def _noise_limited(**overrides):
    values = dict(density=0.25, alpha=3.5, epsilon=1.0, mu=1.0, noise_power=0.1, interference=False)
    values.update(overrides)
    return UplinkConfig(**values)


class TestNoiseLimited:
    def test_full_compensation_coverage_is_exponential(self):
        # ε = 1 removes the distance from the signal, leaving P[h > Γσ²]
        cfg = _noise_limited()
        for threshold in (0.1, 1.0, 10.0):
            expected = math.exp(-cfg.mu * threshold * cfg.noise_power)
            assert uplink_rf.coverage_analytic(cfg, threshold) == pytest.approx(expected, rel=1e-8)

    def test_full_compensation_rate_is_exponential_integral(self):
        cfg = _noise_limited()
        a = cfg.mu * cfg.noise_power
        expected = math.exp(a) * special.exp1(a)
        assert uplink_rf.rate_analytic(cfg) == pytest.approx(expected, rel=1e-6)

    def test_outage_keeps_relative_accuracy(self):
        cfg = _noise_limited(noise_power=1e-9)
        expected = -math.expm1(-cfg.mu * cfg.noise_power)
        assert uplink_rf.outage_analytic(cfg, 1.0) == pytest.approx(expected, rel=1e-6)


class TestLaplace:
    def test_unit_at_zero(self, table_iii):
        assert uplink_rf.interference_laplace(table_iii, 0.0, 1.0) == 1.0

    def test_decreasing_in_s(self, table_iii):
        values = [uplink_rf.interference_laplace(table_iii, s, 1.0) for s in (0.1, 1.0, 10.0)]
        assert 1.0 > values[0] > values[1] > values[2] > 0.0

    def test_matches_monte_carlo(self, table_iii):
        r = 1.0
        cfg = table_iii.model_copy(update={"window_radius": 17.0})
        s = table_iii.mu * r ** (table_iii.alpha * (1 - table_iii.epsilon))
        samples = uplink_rf.interference_samples(cfg, r, 20_000, RngStream(5))
        assert uplink_rf.interference_laplace(cfg, s, r) == pytest.approx(np.mean(np.exp(-s * samples)), abs=0.01)

    def test_rejects_bad_arguments(self, table_iii):
        with pytest.raises(ParameterDomainError):
            uplink_rf.interference_laplace(table_iii, -1.0, 1.0)
        with pytest.raises(ParameterDomainError):
            uplink_rf.interference_laplace(table_iii, 1.0, 0.0)


class TestCoverage:
    def test_analytic_matches_monte_carlo(self, table_iii):
        analytic = uplink_rf.coverage_analytic(table_iii, 1.0)
        mc = uplink_rf.coverage_mc(table_iii, [0.0], 20_000, RngStream(11))
        assert analytic == pytest.approx(mc.coverage[0], abs=0.015)

    def test_curve_is_non_increasing(self, table_iii):
        curve = uplink_rf.coverage_curve_analytic(table_iii, np.arange(-10.0, 21.0, 5.0))
        assert curve.method == "analytic"
        assert np.all(np.diff(curve.coverage) <= 0)
        assert 0.0 <= curve.coverage[-1] <= curve.coverage[0] <= 1.0

    def test_uniform_rz_is_analytic_too(self, table_iii):
        cfg = table_iii.model_copy(update={"distance_model": DistanceModel.PPP_UNIFORM})
        assert 0.0 < uplink_rf.coverage_analytic(cfg, 1.0) < 1.0

    def test_outage_complements_coverage(self, table_iii):
        for threshold in (0.1, 1.0, 10.0):
            total = uplink_rf.coverage_analytic(table_iii, threshold) + uplink_rf.outage_analytic(table_iii, threshold)
            assert total == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("model", [DistanceModel.FULL_PPP, DistanceModel.HEXAGONAL])
    def test_simulation_only_models(self, table_iii, model):
        cfg = table_iii.model_copy(update={"distance_model": model})
        with pytest.raises(ParameterDomainError):
            uplink_rf.coverage_analytic(cfg, 1.0)
        curve = uplink_rf.coverage_mc(cfg, [-5.0, 0.0, 5.0], 2000, RngStream(2))
        assert curve.method == "monte-carlo"
        assert curve.coverage[0] >= curve.coverage[-1]

    def test_threshold_must_be_positive(self, table_iii):
        with pytest.raises(ParameterDomainError):
            uplink_rf.coverage_analytic(table_iii, 0.0)

    def test_wilson_band_brackets_estimate(self, table_iii):
        curve = uplink_rf.coverage_mc(table_iii, [-5.0, 5.0], 3000, RngStream(4))
        for p, lo, hi in zip(curve.coverage, curve.ci_low, curve.ci_high):
            assert lo <= p <= hi


class TestCoverageTrends:
    def test_denser_interferers_lower_coverage(self):
        coverage = [uplink_rf.coverage_analytic(UplinkConfig.table_iii(ue_density=d), 1.0)
                    for d in (0.1, 0.25, 0.5, 1.0)]
        assert all(a > b for a, b in zip(coverage, coverage[1:]))

    def test_one_ue_per_cell_is_scale_free(self):
        # densifying BSs and UEs together leaves an interference-limited uplink unchanged
        coverage = [uplink_rf.coverage_analytic(UplinkConfig.table_iii(density=d), 1.0) for d in (0.1, 0.25, 1.0)]
        assert coverage[0] == pytest.approx(coverage[1], abs=1e-4)
        assert coverage[2] == pytest.approx(coverage[1], abs=1e-4)

    def test_sparse_interferers_match_monte_carlo(self):
        cfg = UplinkConfig.table_iii(ue_density=0.1)
        mc = uplink_rf.coverage_mc(cfg, [0.0], 20_000, RngStream(13))
        assert uplink_rf.coverage_analytic(cfg, 1.0) == pytest.approx(mc.coverage[0], abs=0.015)

    @pytest.mark.parametrize("threshold_db", [5.0, 10.0, 15.0])
    def test_full_compensation_is_worst_above_5db(self, threshold_db):
        threshold = 10.0 ** (threshold_db / 10.0)
        coverage = [uplink_rf.coverage_analytic(UplinkConfig.table_iii(epsilon=e), threshold)
                    for e in (0.0, 0.25, 0.5, 0.75, 1.0)]
        assert all(a > b for a, b in zip(coverage, coverage[1:]))
        assert coverage[-1] == min(coverage)

    def test_pathloss_exponent_matters_most_near_0db(self):
        def spread(threshold_db):
            threshold = 10.0 ** (threshold_db / 10.0)
            values = [uplink_rf.coverage_analytic(UplinkConfig.table_iii(alpha=a), threshold) for a in (3.0, 3.5, 4.0)]
            return max(values) - min(values)

        near_zero = spread(0.0)
        assert near_zero > spread(20.0)
        assert near_zero > spread(-10.0)

    def test_hexagonal_lattice_has_one_ue_per_cell(self):
        with pytest.raises(ValueError):
            UplinkConfig.table_iii(distance_model=DistanceModel.HEXAGONAL, ue_density=0.5)
        cfg = UplinkConfig.table_iii(distance_model=DistanceModel.HEXAGONAL, ue_density=0.25)
        assert cfg.interferer_density == cfg.density


class TestRate:
    def test_direct_and_threshold_integrals_agree(self, table_iii):
        assert uplink_rf.rate_analytic(table_iii) == pytest.approx(uplink_rf.rate_from_coverage(table_iii), abs=1e-3)

    def test_matches_monte_carlo(self, table_iii):
        mean, stderr = uplink_rf.rate_mc(table_iii, 20_000, RngStream(8))
        assert stderr > 0
        assert uplink_rf.rate_analytic(table_iii) == pytest.approx(mean, rel=0.03)

    @pytest.mark.slow
    def test_matches_monte_carlo_tightly(self, table_iii):
        mean, _ = uplink_rf.rate_mc(table_iii, 100_000, RngStream(9))
        assert uplink_rf.rate_analytic(table_iii) == pytest.approx(mean, rel=0.02)


def test_sinr_from_fades_is_deterministic(table_iii):
    net = NetworkRealization(serving_distance=1.0, rz=np.array([0.5]), dz=np.array([2.0]), density=0.25)
    sample = uplink_rf.sinr_from_fades(table_iii, net, 1.0, np.array([1.0]))
    interference = 0.5 ** (table_iii.alpha * table_iii.epsilon) * 2.0 ** (-table_iii.alpha)
    assert sample.signal == pytest.approx(1.0)
    assert sample.interference == pytest.approx(interference)
    assert sample.sinr == pytest.approx(1.0 / (table_iii.noise_power + interference))


def test_sinr_sample_is_consistent(table_iii, rng):
    net = geometry.sample_network(table_iii.distance_model, table_iii.density, None, rng)
    sample = uplink_rf.sinr_sample(table_iii, net, rng)
    assert sample.interference > 0
    assert sample.sinr == pytest.approx(sample.signal / (table_iii.noise_power + sample.interference))
