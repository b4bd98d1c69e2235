import math
import os
import sys

import pytest

# Add the repository root to sys.path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

# keep test runs from writing the run log next to the sources
os.environ.setdefault("LOG_FILE", "")

from models import FsoLinkSpec, MalagaParams, PathlossParams, PointingParams, UplinkConfig
from runner.config import build_scenario
from utils.numerics import RngStream


@pytest.fixture
def rng():
    return RngStream(12345)


@pytest.fixture(scope="session")
def scenario():
    """Default scenario: every default preset, nothing else."""
    return build_scenario()


@pytest.fixture(scope="session")
def table_iii():
    return UplinkConfig.table_iii()


@pytest.fixture(scope="session")
def malaga_reference():
    return MalagaParams(nu=2.296, kappa=2, b0=0.1079, rho=0.596, omega=1.3265, theta_a=math.pi / 2, theta_b=0.0)


@pytest.fixture(scope="session")
def clear_air_pathloss():
    return PathlossParams(aperture_radius=0.05, divergence=0.01, link_length_km=1.0,
                          attenuation_db_per_km=0.43, cn2=5e-14, wavelength=1.55e-6)


@pytest.fixture(scope="session")
def pointing_reference():
    return PointingParams(sigma_x=1.0, sigma_y=1.0, aperture_radius=0.05, beam_waist=2.5)


@pytest.fixture(scope="session")
def fso_spec(malaga_reference, pointing_reference, clear_air_pathloss):
    """IM/DD reference link at 20 dB average electrical SNR."""
    spec = FsoLinkSpec(malaga=malaga_reference, pointing=pointing_reference, pathloss=clear_air_pathloss,
                       detection=2)
    return spec.with_average_snr(20.0)
