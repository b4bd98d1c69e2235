"""Domain types shared by the evaluators, the runner and the API.

All models are immutable; derived constants are computed once on first access
and cached on the instance.
"""

import math
from enum import Enum
from functools import cached_property
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import special, stats

import logger
from utils.numerics import QuadratureSpec, bessel_k_scaled, erf, integrate

# dB/km -> 1/km, 10*log10(e)
DB_PER_NEPER = 4.343

THERMAL_NOISE_DBM_PER_HZ = -173.8


class _FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]):
        return cls.model_validate(data)


class _ArrayModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

class DistanceModel(str, Enum):
    """How the interfering UEs' distances to their own BS are distributed."""

    FULL_PPP = "full_ppp"
    PPP_RAYLEIGH = "ppp_rayleigh"
    PPP_UNIFORM = "ppp_uniform"
    HEXAGONAL = "hexagonal"

    @property
    def has_analytic_form(self) -> bool:
        return self in (DistanceModel.PPP_RAYLEIGH, DistanceModel.PPP_UNIFORM)


class NetworkRealization(_ArrayModel):
    """One sampled uplink snapshot seen from the BS of interest at the origin.

    Distances in km. For the PPP-based models every interferer lies outside the
    serving disk (d_z > r); on the hexagonal lattice an interferer is instead
    never closer to the BS of interest than to its own BS (d_z >= r_z).
    """

    serving_distance: float = Field(gt=0)
    rz: np.ndarray
    dz: np.ndarray
    density: float = Field(gt=0)
    model: DistanceModel = DistanceModel.PPP_RAYLEIGH

    @model_validator(mode="after")
    def _check_distances(self):
        if self.rz.shape != self.dz.shape:
            raise ValueError("rz and dz must have the same shape")
        if np.any(self.rz <= 0):
            raise ValueError("interferer distances r_z must be positive")
        if self.model == DistanceModel.HEXAGONAL:
            if np.any(self.dz < self.rz):
                raise ValueError("hexagonal interferer closer to the BS of interest than to its own BS")
        elif np.any(self.dz <= self.serving_distance):
            raise ValueError("interferer inside the serving disk")
        return self

    @property
    def interferer_count(self) -> int:
        return int(self.rz.size)


# ---------------------------------------------------------------------------
# Uplink
# ---------------------------------------------------------------------------

class UplinkConfig(_FrozenModel):
    """Cellular uplink with distance-proportional fractional power control.

    Attributes:
        density: UE (and BS) density λ per km²
        alpha: Pathloss exponent, > 2
        epsilon: Power-control exponent in [0, 1]
        mu: Rate of the exponential fading power, 1/W (mean power 1/mu)
        noise_power: σ² in W
        distance_model: Law of the interferers' own-BS distances r_z
        interference: False drops every interferer (noise-limited uplink)
        window_radius: Simulation window in km; None selects 30/√(πλ)
        ue_density: Density of active interfering UEs per km²; None means one
            per cell, i.e. ``density``. r_z keeps following the BS density.
    """

    density: float = Field(gt=0)
    alpha: float = Field(gt=2)
    epsilon: float = Field(ge=0, le=1)
    mu: float = Field(gt=0)
    noise_power: float = Field(gt=0)
    distance_model: DistanceModel = DistanceModel.PPP_RAYLEIGH
    interference: bool = True
    window_radius: Optional[float] = Field(None, gt=0)
    ue_density: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _check_ue_density(self):
        if self.distance_model == DistanceModel.HEXAGONAL and self.ue_density not in (None, self.density):
            raise ValueError("the hexagonal lattice carries exactly one UE per cell")
        return self

    @property
    def interferer_density(self) -> float:
        return self.density if self.ue_density is None else self.ue_density

    @property
    def window(self) -> float:
        if self.window_radius is not None:
            return self.window_radius
        return 30.0 / math.sqrt(math.pi * self.density)

    @staticmethod
    def noise_power_for_bandwidth(bandwidth_hz: float) -> float:
        """Thermal noise power in W: -173.8 dBm/Hz + 10log10(BW)."""
        noise_dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz)
        return 10.0 ** (noise_dbm / 10.0) / 1000.0

    @classmethod
    def table_iii(cls, bandwidth_hz: float = 300e6, **overrides) -> "UplinkConfig":
        """Reference cellular parameters: λ=0.25, α=3.5, ε=0.6, 1/μ=150 mW."""
        values = dict(
            density=0.25,
            alpha=3.5,
            epsilon=0.6,
            mu=1.0 / 0.150,
            noise_power=cls.noise_power_for_bandwidth(bandwidth_hz),
        )
        values.update(overrides)
        return cls(**values)


class SinrSample(_FrozenModel):
    sinr: float = Field(ge=0)
    signal: float = Field(ge=0)
    interference: float = Field(ge=0)


class CoverageCurve(_FrozenModel):
    """P[SINR > Γ] on a threshold grid given in dB."""

    thresholds_db: List[float]
    coverage: List[float]
    ci_low: Optional[List[float]] = None
    ci_high: Optional[List[float]] = None
    method: Literal["analytic", "monte-carlo"]

    @model_validator(mode="after")
    def _check_curve(self):
        cov = np.asarray(self.coverage, dtype=float)
        if cov.shape != (len(self.thresholds_db),):
            raise ValueError("one coverage value per threshold required")
        if np.any((cov < 0) | (cov > 1)):
            raise ValueError("coverage values must lie in [0, 1]")
        if np.any(np.diff(np.asarray(self.thresholds_db)) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        if np.any(np.diff(cov) > 1e-9):
            raise ValueError("coverage must be non-increasing in the threshold")
        return self


# ---------------------------------------------------------------------------
# FSO channel
# ---------------------------------------------------------------------------

class MalagaParams(_FrozenModel):
    """Málaga turbulence parameters.

    The density is evaluated in its Gamma-mixture form

        f(I) = Σ_n 2 w_n / (Γ(ν)Γ(n)) θ^{-(ν+n)/2} I^{(ν+n)/2-1} K_{ν-n}(2√(I/θ))

    with θ = (ζκ+Ω')/(νκ) and binomial weights w_n, which equals the usual
    Λ·σ_n form and stays valid when ζ = 0.
    """

    nu: float = Field(gt=0)
    kappa: int = Field(ge=1)
    b0: float = Field(ge=0)
    rho: float = Field(ge=0, le=1)
    omega: float = Field(ge=0)
    theta_a: float = 0.0
    theta_b: float = 0.0

    @model_validator(mode="after")
    def _check_normalisation(self):
        if self.zeta + self.omega_prime <= 0:
            raise ValueError("Málaga parameters give zero average power")
        spec = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-10, max_subdivisions=500, tail_scale=self.mean)
        total, _ = integrate(lambda x: float(self.density(x)), (0.0, math.inf), spec)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"Málaga density integrates to {total:.8f}, not 1")
        if self.zeta > 0:
            printed = self.lambda_printed / self.lambda_
            if not math.isclose(printed, 1.0, rel_tol=1e-9):
                logger.debug(f"printed Λ prefactor differs from the normalised one by a factor {printed:.6g}")
        return self

    @cached_property
    def zeta(self) -> float:
        """Average power of the incoherent scatter component, 2b0(1-ρ)."""
        return 2.0 * self.b0 * (1.0 - self.rho)

    @cached_property
    def omega_prime(self) -> float:
        return (
            self.omega
            + 2.0 * self.rho * self.b0
            + 2.0 * math.sqrt(2.0 * self.rho * self.b0 * self.omega) * math.cos(self.theta_a - self.theta_b)
        )

    @cached_property
    def theta(self) -> float:
        return (self.zeta * self.kappa + self.omega_prime) / (self.nu * self.kappa)

    @cached_property
    def mean(self) -> float:
        """E[I_a] = ζ + Ω'."""
        return self.zeta + self.omega_prime

    @cached_property
    def mixture_weights(self) -> np.ndarray:
        """w_n = C(κ-1, n-1) p^{n-1} (1-p)^{κ-n}, p = Ω'/(ζκ+Ω'), n = 1..κ."""
        p = self.omega_prime / (self.zeta * self.kappa + self.omega_prime)
        weights = stats.binom.pmf(np.arange(self.kappa), self.kappa - 1, p)
        weights.setflags(write=False)
        return weights

    @cached_property
    def lambda_(self) -> float:
        """Λ with the ζ^{1+ν/2} normalisation (requires ζ > 0)."""
        zk = self.zeta * self.kappa
        return (
            2.0 * self.nu ** (self.nu / 2.0)
            / (self.zeta ** (1.0 + self.nu / 2.0) * special.gamma(self.nu))
            * (zk / (zk + self.omega_prime)) ** (self.kappa + self.nu / 2.0)
        )

    @cached_property
    def lambda_printed(self) -> float:
        """Λ with the ζ^{1+1/ν} prefactor as commonly printed; kept for comparison only."""
        return self.lambda_ * self.zeta ** (self.nu / 2.0 - 1.0 / self.nu)

    @cached_property
    def sigma_n(self) -> np.ndarray:
        n = np.arange(1, self.kappa + 1, dtype=float)
        zk = self.zeta * self.kappa
        return (
            special.comb(self.kappa - 1, n - 1)
            * (zk + self.omega_prime) ** (1.0 - n / 2.0)
            / special.factorial(n - 1)
            * (self.omega_prime / self.zeta) ** (n - 1)
            * (self.nu / self.kappa) ** (n / 2.0)
        )

    @cached_property
    def tau_n(self) -> np.ndarray:
        n = np.arange(1, self.kappa + 1, dtype=float)
        return self.sigma_n * self.theta ** ((self.nu + n) / 2.0)

    @property
    def active_orders(self) -> np.ndarray:
        """Mixture orders n with non-zero weight."""
        return np.flatnonzero(self.mixture_weights > 0) + 1

    def density(self, x):
        """Turbulence density at I_a = x; 0 for x <= 0."""
        x_arr = np.asarray(x, dtype=float)
        out = np.zeros_like(x_arr)
        positive = x_arr > 0
        xp = x_arr[positive]
        if xp.size:
            arg = 2.0 * np.sqrt(xp / self.theta)
            log_x = np.log(xp)
            total = np.zeros_like(xp)
            for n in self.active_orders:
                w = self.mixture_weights[n - 1]
                half = (self.nu + n) / 2.0
                log_coef = (
                    math.log(2.0 * w)
                    - special.gammaln(self.nu)
                    - special.gammaln(n)
                    - half * math.log(self.theta)
                )
                total += np.exp(log_coef + (half - 1.0) * log_x - arg) * bessel_k_scaled(self.nu - n, arg)
            out[positive] = total
        return float(out) if np.ndim(out) == 0 else out


class PointingParams(_FrozenModel):
    """Beckmann misalignment at the receiver plane, all lengths in metres.

    The radial displacement is approximated by a Rayleigh law with jitter
    variance σ_s², giving I_p = A0·η·U^{1/g²} with U uniform on (0, 1).
    """

    mu_x: float = 0.0
    mu_y: float = 0.0
    sigma_x: float = Field(gt=0)
    sigma_y: float = Field(gt=0)
    aperture_radius: float = Field(gt=0)
    beam_waist: float = Field(gt=0)

    @classmethod
    def from_jitter_ratio(cls, ratio: float, aperture_radius: float, beam_waist: float) -> "PointingParams":
        """Symmetric zero-boresight jitter with σ_s = ratio·a."""
        sigma = ratio * aperture_radius
        return cls(sigma_x=sigma, sigma_y=sigma, aperture_radius=aperture_radius, beam_waist=beam_waist)

    @cached_property
    def v(self) -> float:
        return math.sqrt(math.pi / 2.0) * self.aperture_radius / self.beam_waist

    @cached_property
    def A0(self) -> float:
        return erf(self.v) ** 2

    @cached_property
    def omega_zeq2(self) -> float:
        v = self.v
        return math.sqrt(math.pi) * erf(v) * self.beam_waist ** 2 / (2.0 * v * math.exp(-v * v))

    @cached_property
    def phi_x(self) -> float:
        return math.sqrt(self.omega_zeq2) / (2.0 * self.sigma_x)

    @cached_property
    def phi_y(self) -> float:
        return math.sqrt(self.omega_zeq2) / (2.0 * self.sigma_y)

    @cached_property
    def sigma_s2(self) -> float:
        sx2, sy2 = self.sigma_x ** 2, self.sigma_y ** 2
        inner = (3 * self.mu_x ** 2 * sx2 ** 2 + 3 * self.mu_y ** 2 * sy2 ** 2 + sx2 ** 3 + sy2 ** 3) / 2.0
        return inner ** (1.0 / 3.0)

    @cached_property
    def g2(self) -> float:
        """Pointing-error coefficient ω_zeq²/(4σ_s²)."""
        return self.omega_zeq2 / (4.0 * self.sigma_s2)

    @cached_property
    def eta(self) -> float:
        px2, py2 = self.phi_x ** 2, self.phi_y ** 2
        exponent = (
            1.0 / self.g2
            - 1.0 / (2.0 * px2)
            - 1.0 / (2.0 * py2)
            - self.mu_x ** 2 / (2.0 * self.sigma_x ** 2 * px2)
            - self.mu_y ** 2 / (2.0 * self.sigma_y ** 2 * py2)
        )
        return math.exp(exponent)

    @property
    def max_gain(self) -> float:
        """Upper end A0·η of the approximate pointing-gain support."""
        return self.A0 * self.eta


class PathlossParams(_FrozenModel):
    """Deterministic optical pathloss and turbulence strength inputs."""

    aperture_radius: float = Field(gt=0)
    divergence: float = Field(gt=0)
    link_length_km: float = Field(gt=0)
    attenuation_db_per_km: float = Field(ge=0)
    cn2: float = Field(gt=0)
    wavelength: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_gain(self):
        if self.gain > 1.0:
            raise ValueError(f"pathloss gain {self.gain:.4g} exceeds 1; link too short for this aperture")
        return self

    @property
    def attenuation_per_km(self) -> float:
        return self.attenuation_db_per_km / DB_PER_NEPER

    @cached_property
    def gain(self) -> float:
        length_m = self.link_length_km * 1000.0
        geometric = math.pi * self.aperture_radius ** 2 / (self.divergence * length_m) ** 2
        return geometric * math.exp(-self.attenuation_per_km * self.link_length_km)


class FsoLinkSpec(_FrozenModel):
    """Complete FSO backhaul hop: I = I_a·I_l·I_p, γ_r = I^r/σ²_RD.

    Attributes:
        malaga: Turbulence parameters
        pointing: Misalignment parameters
        pathloss: Pathloss parameters
        detection: 1 heterodyne, 2 IM/DD
        noise_var: σ²_RD
    """

    malaga: MalagaParams
    pointing: PointingParams
    pathloss: PathlossParams
    detection: Literal[1, 2] = 2
    noise_var: float = Field(1e-7, gt=0)

    @cached_property
    def scale(self) -> float:
        """I_l·A0·η: I = scale · I_a · U^{1/g²}."""
        return self.pathloss.gain * self.pointing.max_gain

    @cached_property
    def mean_gain(self) -> float:
        g2 = self.pointing.g2
        return self.scale * self.malaga.mean * g2 / (g2 + 1.0)

    @cached_property
    def mu_r(self) -> float:
        """Average electrical SNR E[I]^r/σ²_RD."""
        return self.mean_gain ** self.detection / self.noise_var

    @cached_property
    def delta(self) -> float:
        m, g2 = self.malaga, self.pointing.g2
        return g2 * m.nu * m.kappa * (m.zeta + m.omega_prime) / ((g2 + 1.0) * (m.zeta * m.kappa + m.omega_prime))

    @property
    def varpi(self) -> float:
        return 1.0 if self.detection == 1 else math.e / (2.0 * math.pi)

    @cached_property
    def scintillation_index(self) -> float:
        """E[I²]/E[I]² − 1 of the composite gain."""
        m, g2 = self.malaga, self.pointing.g2
        n = np.arange(1, m.kappa + 1)
        second = (
            self.delta ** -2
            * g2 / (g2 + 2.0)
            * np.sum(m.mixture_weights * (m.nu + 1.0) * m.nu * (n + 1.0) * n)
        )
        return float(second - 1.0)

    def with_noise(self, noise_var: float) -> "FsoLinkSpec":
        return FsoLinkSpec(
            malaga=self.malaga,
            pointing=self.pointing,
            pathloss=self.pathloss,
            detection=self.detection,
            noise_var=noise_var,
        )

    def with_average_snr(self, mu_db: float) -> "FsoLinkSpec":
        """Same channel with σ²_RD chosen so that μ_r equals ``mu_db``."""
        return self.with_noise(self.mean_gain ** self.detection / 10.0 ** (mu_db / 10.0))

    def with_detection(self, detection: int) -> "FsoLinkSpec":
        return FsoLinkSpec(
            malaga=self.malaga,
            pointing=self.pointing,
            pathloss=self.pathloss,
            detection=detection,
            noise_var=self.noise_var,
        )


# ---------------------------------------------------------------------------
# Hybrid DF
# ---------------------------------------------------------------------------

class HybridResult(_FrozenModel):
    coverage: Optional[float] = Field(None, ge=0, le=1)
    rate: Optional[float] = Field(None, ge=0)
    uplink: Dict[str, float] = {}
    backhaul: Dict[str, float] = {}

    @model_validator(mode="after")
    def _check_bounds(self):
        slack = 1e-12
        if self.coverage is not None:
            hops = [h["coverage"] for h in (self.uplink, self.backhaul) if "coverage" in h]
            if hops and self.coverage > min(hops) + slack:
                raise ValueError("end-to-end coverage exceeds a per-hop coverage")
        if self.rate is not None:
            hops = [h["rate"] for h in (self.uplink, self.backhaul) if "rate" in h]
            if hops and self.rate > min(hops) + slack:
                raise ValueError("end-to-end rate exceeds a per-hop rate")
        return self


class DiversityEstimate(_FrozenModel):
    slope: float = Field(gt=0)
    fit_range_db: List[float]
    predicted: Optional[float] = None
    predicted_formula: Optional[float] = None

    @field_validator("fit_range_db")
    @classmethod
    def _check_range(cls, value: List[float]) -> List[float]:
        if len(value) != 2 or value[1] <= value[0]:
            raise ValueError("fit range must be an increasing (low, high) pair")
        return value


# ---------------------------------------------------------------------------
# IRS
# ---------------------------------------------------------------------------

class IrsChannels(_ArrayModel):
    """Channels through an N-element reflecting surface.

    Attributes:
        h1: UE -> IRS, shape (N,)
        h2: IRS -> destination, shape (N,)
        hz: interferers -> IRS, shape (Z, N); Z may be 0
        weights: interferer power weights r_z^{αε} d_z^{-α}, shape (Z,)
        noise_var: σ²
    """

    h1: np.ndarray
    h2: np.ndarray
    hz: np.ndarray
    weights: np.ndarray
    noise_var: float = Field(gt=0)

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data: Any) -> Any:
        if isinstance(data, dict):
            data = dict(data)
            h1 = np.asarray(data.get("h1"), dtype=complex).ravel()
            data["h1"] = h1
            data["h2"] = np.asarray(data.get("h2"), dtype=complex).ravel()
            hz = data.get("hz")
            hz = np.zeros((0, h1.size), dtype=complex) if hz is None else np.asarray(hz, dtype=complex)
            data["hz"] = np.atleast_2d(hz) if hz.size else hz.reshape(0, h1.size)
            weights = data.get("weights")
            data["weights"] = (
                np.ones(data["hz"].shape[0]) if weights is None else np.atleast_1d(np.asarray(weights, dtype=float))
            )
        return data

    @model_validator(mode="after")
    def _check_shapes(self):
        n = self.h1.size
        if n < 1:
            raise ValueError("at least one reflecting element is required")
        if self.h2.size != n or self.hz.shape[1] != n:
            raise ValueError("h1, h2 and hz rows must all have length N")
        if self.weights.shape != (self.hz.shape[0],):
            raise ValueError("one weight per interferer required")
        if np.any(self.weights <= 0):
            raise ValueError("interferer weights must be positive")
        for name in ("h1", "h2", "hz"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")
        if np.linalg.norm(self.h1) == 0 or np.linalg.norm(self.h2) == 0:
            raise ValueError("h1 and h2 must have non-zero norm")
        return self

    @property
    def size(self) -> int:
        return int(self.h1.size)

    @property
    def interferer_count(self) -> int:
        return int(self.hz.shape[0])


class PhaseVector(_ArrayModel):
    """Reflection phases φ_n; Φ = diag(e^{jφ_n})."""

    phases: np.ndarray

    @field_validator("phases", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        arr = np.asarray(value, dtype=float).ravel()
        if not np.all(np.isfinite(arr)):
            raise ValueError("phases must be finite")
        return arr

    @property
    def coefficients(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.coefficients)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

class CsvTable(_FrozenModel):
    """Tabular experiment output plus provenance footer."""

    columns: List[str]
    rows: List[List[Any]]
    footer: Dict[str, str] = {}

    @model_validator(mode="after")
    def _check_rows(self):
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} values, expected {width}")
        return self

    def column(self, name: str) -> List[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]
