import math

import numpy as np
import pytest

from errors import ParameterDomainError
from models import FsoLinkSpec, MalagaParams, PathlossParams, PointingParams
from tools import fso_channel
from utils.numerics import QuadratureSpec, RngStream, integrate


class TestTurbulence:
    def test_density_normalised(self, malaga_reference):
        spec = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-10, max_subdivisions=500, tail_scale=malaga_reference.mean)
        total, _ = integrate(lambda x: float(malaga_reference.density(x)), (0.0, math.inf), spec)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_mean_matches_samples(self, malaga_reference):
        draws = fso_channel.malaga_sample(malaga_reference, RngStream(1), 200_000)
        assert draws.mean() == pytest.approx(malaga_reference.mean, rel=0.01)

    def test_cdf_and_ccdf_are_complementary(self, malaga_reference):
        for z in (0.05, 0.5, 1.5, 4.0):
            total = fso_channel.malaga_cdf(malaga_reference, z) + fso_channel.malaga_ccdf(malaga_reference, z)
            assert total == pytest.approx(1.0, abs=1e-8)

    def test_ccdf_matches_density_integral(self, malaga_reference):
        z = 2.0
        spec = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-10, max_subdivisions=500)
        tail, _ = integrate(lambda x: float(malaga_reference.density(x)), (z, math.inf), spec)
        assert fso_channel.malaga_ccdf(malaga_reference, z) == pytest.approx(tail, rel=1e-7)

    def test_empirical_cdf(self, malaga_reference):
        draws = fso_channel.malaga_sample(malaga_reference, RngStream(2), 100_000)
        for z in (0.3, 1.0, 2.5):
            assert np.mean(draws <= z) == pytest.approx(fso_channel.malaga_cdf(malaga_reference, z), abs=0.01)

    def test_no_incoherent_scatter(self):
        # ρ = 1 puts all scatter power in the coherent part: a single Gamma-mixture order
        p = MalagaParams(nu=3.0, kappa=2, b0=0.2, rho=1.0, omega=1.0)
        assert p.zeta == 0.0
        assert list(p.active_orders) == [2]
        draws = fso_channel.malaga_sample(p, RngStream(3), 100_000)
        assert draws.mean() == pytest.approx(p.mean, rel=0.01)
        assert np.mean(draws <= 1.0) == pytest.approx(fso_channel.malaga_cdf(p, 1.0), abs=0.01)

    def test_pdf_rejects_non_positive_intensity(self, malaga_reference):
        with pytest.raises(ParameterDomainError):
            fso_channel.malaga_pdf(malaga_reference, [1.0, 0.0])


class TestPathloss:
    def test_clear_air_gain(self, clear_air_pathloss):
        assert fso_channel.pathloss_gain(clear_air_pathloss) == pytest.approx(7.114e-5, rel=1e-3)

    def test_rytov_variance(self, clear_air_pathloss):
        assert fso_channel.rytov_variance(clear_air_pathloss) == pytest.approx(0.99, rel=0.02)

    def test_beam_spreading(self):
        waist, length, wavelength = 0.02, 1.0, 1.55e-6
        radius = fso_channel.beam_waist_at(waist, length, wavelength)
        assert radius > waist
        # far field: ω_L ≈ λL/(πω0)
        far = fso_channel.beam_waist_at(1e-4, length, wavelength)
        assert far == pytest.approx(wavelength * 1000.0 / (math.pi * 1e-4), rel=1e-3)
        with pytest.raises(ParameterDomainError):
            fso_channel.beam_waist_at(0.0, length, wavelength)

    def test_long_term_radius(self):
        waist, length, wavelength = 0.021, 1.0, 1.55e-6
        calm = fso_channel.long_term_beam_radius(waist, length, wavelength, 0.0)
        assert calm == pytest.approx(fso_channel.beam_waist_at(waist, length, wavelength))
        turbulent = fso_channel.long_term_beam_radius(waist, length, wavelength, 5e-14)
        assert turbulent > calm
        expanded = fso_channel.long_term_beam_radius(waist, length, wavelength, 5e-14, expansion=23.4)
        # a 23.4x expander takes a 2.1 cm waist to a beam of about ten aperture radii
        assert expanded / 0.05 == pytest.approx(9.85, rel=0.02)
        assert expanded > fso_channel.beam_waist_at(23.4 * waist, length, wavelength)
        with pytest.raises(ParameterDomainError):
            fso_channel.long_term_beam_radius(waist, length, wavelength, 5e-14, expansion=0.0)
        with pytest.raises(ParameterDomainError):
            fso_channel.long_term_beam_radius(waist, length, wavelength, -1e-15)


class TestPointing:
    def test_reference_coefficient(self, pointing_reference):
        assert pointing_reference.g2 == pytest.approx(1.5625, rel=1e-3)
        # symmetric zero-boresight jitter: the modified Rayleigh law is exact, η = 1
        assert pointing_reference.eta == pytest.approx(1.0, abs=1e-12)

    def test_beckmann_matches_rayleigh_form(self, pointing_reference):
        draws = fso_channel.pointing_sample(pointing_reference, RngStream(4), 100_000)
        top = pointing_reference.max_gain
        for fraction in (0.2, 0.5, 0.8, 0.95):
            gain = fraction * top
            empirical = np.mean(draws <= gain)
            assert empirical == pytest.approx(fso_channel.pointing_cdf_approx(pointing_reference, gain), abs=0.01)

    def test_mild_asymmetry_stays_close(self):
        p = PointingParams(mu_x=0.2, mu_y=0.0, sigma_x=1.0, sigma_y=1.2, aperture_radius=0.05, beam_waist=2.5)
        draws = np.sort(fso_channel.pointing_sample(p, RngStream(5), 50_000))
        empirical = np.arange(1, draws.size + 1) / draws.size
        approx = fso_channel.pointing_cdf_approx(p, draws)
        assert np.max(np.abs(empirical - approx)) < 0.05

    def test_pdf_support(self, pointing_reference):
        top = pointing_reference.max_gain
        assert fso_channel.pointing_pdf_approx(pointing_reference, 1.01 * top) == 0.0
        assert fso_channel.pointing_pdf_approx(pointing_reference, 0.5 * top) > 0.0

    def test_from_jitter_ratio(self):
        p = PointingParams.from_jitter_ratio(3.5, 0.05, 0.2)
        assert p.sigma_x == pytest.approx(0.175)
        assert p.sigma_y == p.sigma_x


class TestCompositeGain:
    def test_cdf_matches_simulation(self, fso_spec):
        draws = fso_channel.composite_sample(fso_spec, RngStream(6), 200_000)
        for q in (0.1, 0.5, 0.9):
            x = float(np.quantile(draws, q))
            assert fso_channel.composite_gain_cdf(fso_spec, x) == pytest.approx(q, abs=0.01)

    def test_cdf_and_ccdf_are_complementary(self, fso_spec):
        x = fso_spec.mean_gain
        total = fso_channel.composite_gain_cdf(fso_spec, x) + fso_channel.composite_gain_ccdf(fso_spec, x)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_pdf_is_derivative_of_cdf(self, fso_spec):
        x = fso_spec.mean_gain
        h = 1e-4 * x
        slope = (fso_channel.composite_gain_cdf(fso_spec, x + h) - fso_channel.composite_gain_cdf(fso_spec, x - h)) / (2 * h)
        assert fso_channel.composite_gain_pdf(fso_spec, x) == pytest.approx(slope, rel=1e-4)

    @pytest.mark.parametrize("nu, sigma", [(1.5, 0.6), (4.0, 1.0), (10.0, 2.0)])
    def test_pdf_normalised_across_severities(self, nu, sigma, clear_air_pathloss):
        spec = FsoLinkSpec(
            malaga=MalagaParams(nu=nu, kappa=3, b0=0.1, rho=0.5, omega=1.0),
            pointing=PointingParams(sigma_x=sigma, sigma_y=sigma, aperture_radius=0.05, beam_waist=2.5),
            pathloss=clear_air_pathloss,
        )
        # in v = log(x/E[I]) the density x·f(x) is smooth and decays on both sides
        quad = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-9, max_subdivisions=500)

        def mass(v):
            x = spec.mean_gain * math.exp(v)
            return x * float(fso_channel.composite_gain_pdf(spec, x))

        upper, _ = integrate(mass, (0.0, math.inf), quad)
        lower, _ = integrate(lambda v: mass(-v), (0.0, math.inf), quad.with_scale(5.0))
        assert upper + lower == pytest.approx(1.0, abs=1e-6)


class TestSnrStatistics:
    def test_zeroth_moment(self, fso_spec):
        assert fso_channel.snr_moment(fso_spec, 0.0) == pytest.approx(1.0, rel=1e-12)

    def test_heterodyne_mean_is_average_snr(self, fso_spec):
        spec = fso_spec.with_detection(1).with_average_snr(15.0)
        assert fso_channel.average_snr(spec) == pytest.approx(spec.mu_r, rel=1e-9)
        assert spec.mu_r == pytest.approx(10 ** 1.5, rel=1e-12)

    def test_first_moment_matches_quadrature(self, fso_spec):
        quad = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-9, max_subdivisions=500)
        mu = fso_spec.mu_r

        def weighted(v):
            g = mu * math.exp(v)
            return g * g * float(fso_channel.snr_pdf(fso_spec, g))

        upper, _ = integrate(weighted, (0.0, math.inf), quad)
        lower, _ = integrate(lambda v: weighted(-v), (0.0, math.inf), quad.with_scale(5.0))
        assert upper + lower == pytest.approx(fso_channel.snr_moment(fso_spec, 1.0), rel=1e-4)

    def test_second_moment_gives_scintillation_index(self, fso_spec):
        spec = fso_spec.with_detection(1)
        ratio = fso_channel.snr_moment(spec, 2.0) / fso_channel.snr_moment(spec, 1.0) ** 2 - 1.0
        assert ratio == pytest.approx(spec.scintillation_index, rel=1e-9)
        draws = fso_channel.composite_sample(spec, RngStream(7), 400_000)
        assert ratio == pytest.approx(draws.var() / draws.mean() ** 2, rel=0.05)

    def test_negative_moment_rejected(self, fso_spec):
        with pytest.raises(ParameterDomainError):
            fso_channel.snr_moment(fso_spec, -1.0)

    @pytest.mark.parametrize("detection", [1, 2])
    @pytest.mark.parametrize("attenuation, cn2", [(0.43, 5e-14), (42.2, 2e-15), (5.8, 5e-15)],
                             ids=["clear_air", "moderate_fog", "moderate_rain"])
    def test_outage_matches_simulation(self, attenuation, cn2, detection, malaga_reference, pointing_reference):
        pathloss = PathlossParams(aperture_radius=0.05, divergence=0.01, link_length_km=1.0,
                                  attenuation_db_per_km=attenuation, cn2=cn2, wavelength=1.55e-6)
        spec = FsoLinkSpec(malaga=malaga_reference, pointing=pointing_reference, pathloss=pathloss,
                           detection=detection).with_average_snr(20.0)
        draws = fso_channel.snr_sample(spec, RngStream(8, stream_id=detection), 200_000)
        for q in (0.05, 0.5, 0.9):
            threshold = float(np.quantile(draws, q))
            assert fso_channel.outage_probability(spec, threshold) == pytest.approx(q, abs=0.01)

    @pytest.mark.parametrize("mu_db", [50.0, 60.0])
    def test_heterodyne_outperforms_imdd(self, fso_spec, mu_db):
        heterodyne = fso_spec.with_detection(1).with_average_snr(mu_db)
        imdd = fso_spec.with_detection(2).with_average_snr(mu_db)
        assert fso_channel.predicted_diversity(heterodyne)[1] == pytest.approx(
            2.0 * fso_channel.predicted_diversity(imdd)[1])
        assert fso_channel.outage_probability(heterodyne, 1.0) < fso_channel.outage_probability(imdd, 1.0)

    def test_outage_decays_with_predicted_slope(self, fso_spec):
        formula, effective = fso_channel.predicted_diversity(fso_spec)
        assert effective <= formula
        snr_db = np.array([60.0, 70.0])
        outage = [fso_channel.outage_probability(fso_spec.with_average_snr(s), 1.0) for s in snr_db]
        slope = -(math.log10(outage[1]) - math.log10(outage[0])) / 1.0
        assert slope == pytest.approx(effective, abs=0.1)

    def test_cdf_edges(self, fso_spec):
        assert fso_channel.snr_cdf(fso_spec, 0.0) == 0.0
        assert fso_channel.snr_ccdf(fso_spec, -1.0) == 1.0


class TestRates:
    def test_exact_matches_simulation(self, fso_spec):
        draws = fso_channel.snr_sample(fso_spec, RngStream(9), 200_000)
        empirical = float(np.mean(np.log1p(fso_spec.varpi * draws)))
        assert fso_channel.fso_rate_exact(fso_spec) == pytest.approx(empirical, rel=0.015)

    @pytest.mark.parametrize("mu_db", [-20.0, 0.0, 20.0, 40.0])
    def test_jensen_ordering(self, fso_spec, mu_db):
        spec = fso_spec.with_average_snr(mu_db)
        exact = fso_channel.fso_rate_exact(spec)
        upper = fso_channel.fso_rate_upper(spec)
        low = fso_channel.fso_rate_low(spec)
        assert exact <= upper * (1 + 1e-9)
        assert upper <= low

    def test_low_snr_approximation(self, fso_spec):
        spec = fso_spec.with_average_snr(-20.0)
        exact = fso_channel.fso_rate_exact(spec)
        assert abs(exact - fso_channel.fso_rate_low(spec)) / exact < 0.05
        assert fso_channel.fso_rate_low(spec) == pytest.approx(spec.varpi * fso_channel.snr_moment(spec, 1.0))

    @pytest.mark.parametrize("variant", ["moment", "residue"])
    def test_high_snr_approximation(self, fso_spec, variant):
        spec = fso_spec.with_average_snr(40.0)
        exact = fso_channel.fso_rate_exact(spec)
        assert abs(exact - fso_channel.fso_rate_high(spec, variant=variant)) / exact < 0.02

    def test_high_snr_is_logarithmic(self, fso_spec):
        a = fso_channel.fso_rate_high(fso_spec.with_average_snr(30.0))
        b = fso_channel.fso_rate_high(fso_spec.with_average_snr(40.0))
        assert b - a == pytest.approx(math.log(10.0), rel=1e-9)

    def test_residue_variant_improves_on_moment(self, fso_spec):
        spec = fso_spec.with_average_snr(25.0)
        exact = fso_channel.fso_rate_exact(spec)
        moment = fso_channel.fso_rate_high(spec, variant="moment")
        residue = fso_channel.fso_rate_high(spec, variant="residue")
        assert abs(residue - exact) < abs(moment - exact)

    def test_heterodyne_rate_constant(self, fso_spec):
        spec = fso_spec.with_detection(1)
        assert spec.varpi == 1.0
        assert fso_spec.varpi == pytest.approx(math.e / (2 * math.pi))
        with pytest.raises(ParameterDomainError):
            fso_channel.fso_rate_exact(spec, varpi=0.5)

    def test_unknown_high_snr_variant(self, fso_spec):
        with pytest.raises(ParameterDomainError):
            fso_channel.fso_rate_high(fso_spec, variant="series")
