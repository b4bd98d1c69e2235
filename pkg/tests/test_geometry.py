import math

import numpy as np
import pytest
from scipy import stats

from errors import InvalidWindowError, ParameterDomainError
from models import DistanceModel
from tools import geometry
from utils.numerics import RngStream


def test_serving_distance_is_rayleigh(rng):
    density = 0.25
    r = geometry.sample_serving_distance(density, rng, size=100_000)
    result = stats.kstest(r, lambda x: 1.0 - np.exp(-math.pi * density * x * x))
    assert result.statistic < 0.01


def test_serving_distance_scalar(rng):
    assert isinstance(geometry.sample_serving_distance(1.0, rng), float)


def test_joint_density_value():
    assert geometry.joint_rz_density(1.0, 1.0, 0.25) == pytest.approx(0.5130, abs=1e-4)


def test_window_validation():
    with pytest.raises(InvalidWindowError):
        geometry.check_window(0.25, 5.0)
    assert geometry.default_window(0.25) == pytest.approx(30 / math.sqrt(math.pi * 0.25))


def test_density_must_be_positive(rng):
    with pytest.raises(ParameterDomainError):
        geometry.sample_serving_distance(0.0, rng)


def test_mean_interferer_count(rng):
    density, window = 0.25, 30.0
    batch = geometry.sample_network_batch(DistanceModel.PPP_RAYLEIGH, density, window, 2000, rng)
    counts = np.bincount(batch.owner, minlength=batch.size)
    expected = density * math.pi * window ** 2
    # exclusion removes on average λπE[r²] = 1 point
    assert counts.mean() == pytest.approx(expected - 1.0, rel=0.02)


@pytest.mark.parametrize("model", [DistanceModel.PPP_RAYLEIGH, DistanceModel.PPP_UNIFORM, DistanceModel.FULL_PPP])
def test_ppp_snapshot_respects_exclusion(model, rng):
    net = geometry.sample_network(model, 0.25, None, rng)
    assert net.interferer_count > 0
    assert np.all(net.dz > net.serving_distance)
    assert np.all(net.rz > 0)


def test_hexagonal_snapshot(rng):
    net = geometry.sample_network(DistanceModel.HEXAGONAL, 0.25, 20.0, rng)
    assert np.all(net.dz >= net.rz)
    # one interferer per lattice cell inside the window
    assert net.interferer_count == geometry.hexagonal_lattice(0.25, 20.0).shape[0]


def test_hexagon_cell_area_matches_density():
    for density in (0.1, 0.25, 2.0):
        assert geometry.hexagon_cell_area(density) == pytest.approx(1.0 / density, rel=1e-12)


def test_uniform_in_hexagon_stays_in_cell(rng):
    density = 0.25
    points = geometry.uniform_in_hexagon(density, 20_000, rng)
    # inside the cell the origin is the nearest lattice point
    lattice = geometry.hexagonal_lattice(density, 10.0)
    d_origin = np.hypot(points[:, 0], points[:, 1])
    nearest_other = np.min(np.linalg.norm(points[:, None, :] - lattice[None, :, :], axis=-1), axis=1)
    assert np.all(d_origin <= nearest_other + 1e-12)
    # E[d²] of a uniform point in a regular hexagon of side s is 5s²/12
    s = geometry.hexagon_side(density)
    assert np.mean(d_origin ** 2) == pytest.approx(5 * s * s / 12, rel=0.02)


@pytest.mark.parametrize("model", [DistanceModel.PPP_RAYLEIGH, DistanceModel.PPP_UNIFORM])
def test_rz_sampling_matches_closed_form(model, rng):
    density = 0.25
    samples = geometry.sample_rz(model, density, 50_000, rng)
    grid = np.linspace(0.1, 2.0, 12)
    empirical = np.array([np.mean(samples > r) for r in grid])
    np.testing.assert_allclose(empirical, geometry.rz_ccdf(model, grid, density), atol=0.01)


def test_uniform_rz_support(rng):
    density = 0.25
    samples = geometry.sample_rz(DistanceModel.PPP_UNIFORM, density, 10_000, rng)
    assert samples.max() <= geometry.uniform_rz_support(density)
    pdf = geometry.rz_pdf(DistanceModel.PPP_UNIFORM, [0.5, 5.0], density)
    assert pdf[0] == pytest.approx(2 * math.pi * density * 0.5)
    assert pdf[1] == 0.0


def test_full_ppp_rz_below_serving_mean(rng):
    density = 0.25
    samples = geometry.sample_rz(DistanceModel.FULL_PPP, density, 5_000, rng)
    assert np.all(samples > 0)
    # the typical cell is smaller than the zero cell, so r_z is stochastically below the serving distance
    assert samples.mean() < 1.0 / (2 * math.sqrt(density))


def test_closed_forms_only_for_analytic_models():
    with pytest.raises(ParameterDomainError):
        geometry.rz_ccdf(DistanceModel.HEXAGONAL, 1.0, 0.25)
    with pytest.raises(ParameterDomainError):
        geometry.rz_pdf(DistanceModel.FULL_PPP, 1.0, 0.25)


def test_batches_are_reproducible():
    a = geometry.sample_network_batch(DistanceModel.PPP_RAYLEIGH, 0.25, None, 10, RngStream(3))
    b = geometry.sample_network_batch(DistanceModel.PPP_RAYLEIGH, 0.25, None, 10, RngStream(3))
    np.testing.assert_array_equal(a.dz, b.dz)
    np.testing.assert_array_equal(a.rz, b.rz)
