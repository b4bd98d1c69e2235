"""FSO backhaul channel: Málaga turbulence, pathloss, pointing errors, SNR statistics and rates.

The composite gain is I = I_l · I_a · I_p with I_p = A0·η·U^{1/g²} (U uniform),
so I = c·I_a·U^{1/g²} with c = I_l·A0·η. For y = x/c,

    P[I <= x] = F_a(y) + ∫_0^∞ h(y e^v) e^{-g² v} dv
    P[I >  x] = ∫_0^∞ h(y e^v) (1 - e^{-g² v}) dv
    F_a(y)    = ∫_0^∞ h(y e^{-v}) dv

with h(t) = t·f_a(t). These logarithmic-variable integrals have bounded,
smooth integrands for every y, which is what makes small outages accurate.
"""

import math
from typing import Callable, Literal, Optional, Tuple

import numpy as np
from scipy import special

import logger
from errors import ParameterDomainError
from models import FsoLinkSpec, MalagaParams, PathlossParams, PointingParams
from utils.numerics import QuadratureSpec, RngStream, bessel_k_scaled, digamma, integrate

COMPOSITE_QUADRATURE = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-10, max_subdivisions=500)
RATE_QUADRATURE = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-9, max_subdivisions=500)

HETERODYNE_VARPI = 1.0
IMDD_VARPI = math.e / (2.0 * math.pi)

# points on the circle used to evaluate one Mellin–Barnes residue
RESIDUE_NODES = 64


def _map_scalar(fn: Callable[[float], float], x):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return fn(float(arr))
    return np.array([fn(float(v)) for v in arr.ravel()]).reshape(arr.shape)


# ---------------------------------------------------------------------------
# Turbulence
# ---------------------------------------------------------------------------

def malaga_pdf(p: MalagaParams, intensity):
    """Málaga density at I_a > 0.

    Raises:
        ParameterDomainError: If any I_a <= 0
    """
    arr = np.asarray(intensity, dtype=float)
    if np.any(~(arr > 0)):
        raise ParameterDomainError("malaga_pdf requires I_a > 0")
    return p.density(arr)


def _component_ccdf(p: MalagaParams, n: int, z: float) -> float:
    """P[G·Γ_n > z] for G ~ Gamma(ν, 1/ν) and Γ_n ~ Gamma(n, νθ), n integer.

    Σ_{k<n} 2 y^{(ν+k)/2} K_{ν-k}(2√y) / (Γ(ν) k!), y = z/θ.
    """
    y = z / p.theta
    x = 2.0 * math.sqrt(y)
    log_y = math.log(y)
    total = 0.0
    for k in range(n):
        log_term = (
            math.log(2.0)
            + 0.5 * (p.nu + k) * log_y
            - special.gammaln(p.nu)
            - special.gammaln(k + 1)
            - x
        )
        total += math.exp(log_term) * bessel_k_scaled(p.nu - k, x)
    return total


def malaga_ccdf(p: MalagaParams, z: float) -> float:
    """Closed-form P[I_a > z]."""
    if z <= 0:
        return 1.0
    value = sum(p.mixture_weights[n - 1] * _component_ccdf(p, int(n), z) for n in p.active_orders)
    return min(max(value, 0.0), 1.0)


def _h(p: MalagaParams, t: float) -> float:
    if t <= 0 or not math.isfinite(t):
        return 0.0
    return t * float(p.density(t))


def _scaled_exp(y: float, v: float) -> float:
    """y·e^v, saturating at inf instead of raising."""
    return y * math.exp(v) if v < 700.0 else math.inf


def _small_order(p: MalagaParams) -> float:
    """Exponent of F_a(y) ~ y^k as y -> 0."""
    return min(p.nu, float(p.active_orders[0]))


def malaga_cdf(p: MalagaParams, z: float) -> float:
    """P[I_a <= z]; integrates the density below the median to keep relative accuracy."""
    if z <= 0:
        return 0.0
    upper = malaga_ccdf(p, z)
    if upper < 0.5:
        return 1.0 - upper
    spec = COMPOSITE_QUADRATURE.with_scale(1.0 / _small_order(p))
    value, _ = integrate(lambda v: _h(p, z * math.exp(-v)), (0.0, math.inf), spec)
    return min(value, 1.0)


def malaga_sample(p: MalagaParams, rng: RngStream, size: Optional[int] = None):
    """Draw I_a = G·|√A·e^{jθ} + S|².

    G ~ Gamma(ν, mean 1) is the large-scale factor, A ~ Gamma(κ, mean Ω')
    carries the coherent (LOS plus coupled scatter) power and S ~ CN(0, ζ) is
    the incoherent scatter. The coherent phase is irrelevant to |·|² and is
    taken as 0.
    """
    n = 1 if size is None else size
    g = rng.gamma(p.nu, 1.0 / p.nu, size=n)
    coherent = np.sqrt(rng.gamma(p.kappa, p.omega_prime / p.kappa, size=n))
    half = math.sqrt(p.zeta / 2.0)
    re = coherent + half * rng.standard_normal(n)
    im = half * rng.standard_normal(n)
    values = g * (re * re + im * im)
    return float(values[0]) if size is None else values


# ---------------------------------------------------------------------------
# Pathloss and turbulence strength
# ---------------------------------------------------------------------------

def pathloss_gain(p: PathlossParams) -> float:
    """πa²/(θL)²·exp(-σL), σ converted from dB/km."""
    return p.gain


def _rytov(cn2: float, wavelength: float, link_length_km: float) -> float:
    k = 2.0 * math.pi / wavelength
    length = link_length_km * 1000.0
    return 1.23 * cn2 * k ** (7.0 / 6.0) * length ** (11.0 / 6.0)


def rytov_variance(p: PathlossParams) -> float:
    """σ_R² = 1.23 Cn² k^{7/6} L^{11/6}, L in metres."""
    return _rytov(p.cn2, p.wavelength, p.link_length_km)


def beam_waist_at(waist: float, link_length_km: float, wavelength: float) -> float:
    """Gaussian-beam radius after L: ω0·√(1 + (λL/(πω0²))²)."""
    if waist <= 0:
        raise ParameterDomainError("beam waist must be positive")
    length = link_length_km * 1000.0
    return waist * math.sqrt(1.0 + (wavelength * length / (math.pi * waist * waist)) ** 2)


def long_term_beam_radius(waist: float, link_length_km: float, wavelength: float, cn2: float,
                          expansion: float = 1.0) -> float:
    """Receiver-plane radius including turbulent spreading.

    The launched waist is ``expansion``·ω0 (transmit beam expander). With ω_z the
    diffraction radius of the launched beam and Λ = λL/(πω_z²),

        ω_LT = ω_z·√(1 + 1.33 σ_R² Λ^{5/6})

    Args:
        waist: Transmitter waist ω0 in m
        link_length_km: L
        wavelength: λ in m
        cn2: Refractive-index structure parameter Cn²
        expansion: Beam-expander magnification, > 0

    Returns:
        ω_LT in m
    """
    if expansion <= 0:
        raise ParameterDomainError("beam expansion must be positive")
    if cn2 < 0:
        raise ParameterDomainError("Cn2 must be non-negative")
    radius = beam_waist_at(expansion * waist, link_length_km, wavelength)
    spread = wavelength * link_length_km * 1000.0 / (math.pi * radius * radius)
    return radius * math.sqrt(1.0 + 1.33 * _rytov(cn2, wavelength, link_length_km) * spread ** (5.0 / 6.0))


# ---------------------------------------------------------------------------
# Pointing errors
# ---------------------------------------------------------------------------

def pointing_sample(p: PointingParams, rng: RngStream, size: Optional[int] = None):
    """Beckmann misalignment: I_p = A0·exp(-2ψ²/ω_zeq²), ψ² = x² + y²."""
    n = 1 if size is None else size
    x = rng.normal(p.mu_x, p.sigma_x, size=n)
    y = rng.normal(p.mu_y, p.sigma_y, size=n)
    values = p.A0 * np.exp(-2.0 * (x * x + y * y) / p.omega_zeq2)
    return float(values[0]) if size is None else values


def pointing_pdf_approx(p: PointingParams, gain):
    """Modified-Rayleigh density g²/(A0η)^{g²}·I_p^{g²-1} on (0, A0η]; 0 outside."""
    arr = np.asarray(gain, dtype=float)
    top = p.max_gain
    inside = (arr > 0) & (arr <= top)
    out = np.zeros_like(arr)
    out[inside] = p.g2 / top * (arr[inside] / top) ** (p.g2 - 1.0)
    return float(out) if out.ndim == 0 else out


def pointing_cdf_approx(p: PointingParams, gain):
    arr = np.asarray(gain, dtype=float)
    out = np.clip(np.maximum(arr, 0.0) / p.max_gain, 0.0, 1.0) ** p.g2
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Composite gain
# ---------------------------------------------------------------------------

def _tail_integral(p: MalagaParams, y: float, weight: Callable[[float], float]) -> float:
    # ∫_0^∞ h(y e^v) weight(v) dv; h decays once y e^v passes a few θ
    scale = max(1.0, math.log(max(p.theta, 1e-300) / y)) if y < p.theta else 1.0
    value, _ = integrate(lambda v: _h(p, _scaled_exp(y, v)) * weight(v), (0.0, math.inf),
                         COMPOSITE_QUADRATURE.with_scale(scale))
    return value


def _composite_cdf_normalised(p: MalagaParams, g2: float, y: float) -> Tuple[float, float]:
    """(P[I_a U^{1/g²} <= y], P[I_a U^{1/g²} > y])."""
    if y <= 0:
        return 0.0, 1.0
    if math.isinf(y):
        return 1.0, 0.0
    upper_a = malaga_ccdf(p, y)
    if upper_a < 0.5:
        ccdf = _tail_integral(p, y, lambda v: -math.expm1(-g2 * v))
        return 1.0 - ccdf, ccdf
    cdf = malaga_cdf(p, y) + _tail_integral(p, y, lambda v: math.exp(-g2 * v))
    cdf = min(cdf, 1.0)
    return cdf, 1.0 - cdf


def composite_gain_cdf(spec: FsoLinkSpec, gain):
    """P[I <= gain] for the composite gain I = I_l·I_a·I_p."""
    return _map_scalar(lambda x: _composite_cdf_normalised(spec.malaga, spec.pointing.g2, x / spec.scale)[0], gain)


def composite_gain_ccdf(spec: FsoLinkSpec, gain):
    return _map_scalar(lambda x: _composite_cdf_normalised(spec.malaga, spec.pointing.g2, x / spec.scale)[1], gain)


def composite_gain_pdf(spec: FsoLinkSpec, gain):
    """Density of I: g²/x · ∫_0^∞ h(y e^v) e^{-g² v} dv with y = x/c."""
    g2 = spec.pointing.g2

    def pdf(x: float) -> float:
        if x <= 0:
            return 0.0
        y = x / spec.scale
        return g2 / x * _tail_integral(spec.malaga, y, lambda v: math.exp(-g2 * v))

    return _map_scalar(pdf, gain)


def composite_sample(spec: FsoLinkSpec, rng: RngStream, size: int) -> np.ndarray:
    """I = I_l·I_a·I_p with Beckmann pointing errors."""
    turbulence = malaga_sample(spec.malaga, rng, size)
    pointing = pointing_sample(spec.pointing, rng, size)
    return spec.pathloss.gain * turbulence * pointing


# ---------------------------------------------------------------------------
# SNR statistics
# ---------------------------------------------------------------------------

def _snr_to_gain(spec: FsoLinkSpec, snr: float) -> float:
    return (snr * spec.noise_var) ** (1.0 / spec.detection)


def snr_sample(spec: FsoLinkSpec, rng: RngStream, size: int) -> np.ndarray:
    """γ_r = I^r/σ²_RD."""
    return composite_sample(spec, rng, size) ** spec.detection / spec.noise_var


def snr_cdf(spec: FsoLinkSpec, snr):
    """F_γ(γ) = P[I <= (γσ²)^{1/r}]; 0 for γ <= 0."""
    return _map_scalar(lambda g: 0.0 if g <= 0 else float(composite_gain_cdf(spec, _snr_to_gain(spec, g))), snr)


def snr_ccdf(spec: FsoLinkSpec, snr):
    return _map_scalar(lambda g: 1.0 if g <= 0 else float(composite_gain_ccdf(spec, _snr_to_gain(spec, g))), snr)


def snr_pdf(spec: FsoLinkSpec, snr):
    def pdf(g: float) -> float:
        if g <= 0:
            return 0.0
        x = _snr_to_gain(spec, g)
        return float(composite_gain_pdf(spec, x)) * x / (spec.detection * g)

    return _map_scalar(pdf, snr)


def outage_probability(spec: FsoLinkSpec, threshold: float) -> float:
    """P[γ_r < Γ] for a linear threshold."""
    return float(snr_cdf(spec, threshold))


def _normalised_mellin(spec: FsoLinkSpec, t):
    """E[X^t] for X = I/E[I]; t may be complex away from the poles."""
    m, g2 = spec.malaga, spec.pointing.g2
    orders = m.active_orders
    weights = m.mixture_weights[orders - 1]
    mix = np.sum(weights * special.gamma(orders + t) / special.gamma(orders))
    return spec.delta ** (-t) * g2 / (g2 + t) * special.gamma(m.nu + t) / special.gamma(m.nu) * mix


def snr_moment(spec: FsoLinkSpec, n: float) -> float:
    """E[γ_r^n] = μ_r^n δ^{-nr} g²/(g²+nr) Σ_m w_m Γ(ν+nr)Γ(m+nr)/(Γ(ν)Γ(m)).

    The weights w_m carry Λ·τ_m·Γ(ν)Γ(m)/2, so the zeroth moment is exactly 1.
    """
    if n < 0:
        raise ParameterDomainError("snr_moment requires n >= 0")
    t = n * spec.detection
    m, g2 = spec.malaga, spec.pointing.g2
    orders = m.active_orders
    log_terms = (
        special.gammaln(m.nu + t) - special.gammaln(m.nu)
        + special.gammaln(orders + t) - special.gammaln(orders)
        + np.log(m.mixture_weights[orders - 1])
    )
    log_value = n * math.log(spec.mu_r) - t * math.log(spec.delta) + math.log(g2 / (g2 + t))
    return float(np.exp(log_value + special.logsumexp(log_terms)))


def average_snr(spec: FsoLinkSpec) -> float:
    """γ̄_r = E[I^r]/σ²_RD = (E[I^r]/E[I]^r)·μ_r."""
    return snr_moment(spec, 1.0)


def predicted_diversity(spec: FsoLinkSpec) -> Tuple[float, float]:
    """(formula, effective) high-SNR outage slope of the backhaul alone.

    formula = min(g², ν, κ)/r; effective replaces κ with the lowest mixture
    order carrying weight, which is 1 whenever ζ > 0.
    """
    m, g2, r = spec.malaga, spec.pointing.g2, spec.detection
    formula = min(g2, m.nu, float(m.kappa)) / r
    effective = min(g2, m.nu, float(m.active_orders[0])) / r
    return formula, effective


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------

def _check_varpi(spec: FsoLinkSpec, varpi: Optional[float]) -> float:
    if varpi is None:
        return spec.varpi
    if not (math.isclose(varpi, HETERODYNE_VARPI) or math.isclose(varpi, IMDD_VARPI)):
        raise ParameterDomainError(f"varpi must be 1 or e/(2π), got {varpi}")
    return float(varpi)


def fso_rate_exact(spec: FsoLinkSpec, varpi: Optional[float] = None) -> float:
    """E[log(1+ϖγ_r)] in nats/s/Hz.

    Integrated by parts against the CCDF of X = I/E[I] in x = e^v:
    ∫ r·c·e^{rv}/(1 + c·e^{rv}) P[X > e^v] dv, c = ϖμ_r.
    """
    varpi = _check_varpi(spec, varpi)
    c = varpi * spec.mu_r
    r = spec.detection
    m, g2 = spec.malaga, spec.pointing.g2
    # X = (c_I/E[I])·I_a·U^{1/g²}; y = x·E[I]/c_I
    to_y = m.mean * g2 / (g2 + 1.0)
    log_c = math.log(c)

    def integrand(v: float) -> float:
        w = log_c + r * v
        share = 1.0 / (1.0 + math.exp(-w)) if w > -700 else 0.0
        if share == 0.0:
            return 0.0
        return r * share * _composite_cdf_normalised(m, g2, _scaled_exp(to_y, v))[1]

    upper, _ = integrate(integrand, (0.0, math.inf), RATE_QUADRATURE)
    lower_scale = max(1.0, log_c / r)
    lower, _ = integrate(lambda v: integrand(-v), (0.0, math.inf), RATE_QUADRATURE.with_scale(lower_scale))
    return upper + lower


def fso_rate_low(spec: FsoLinkSpec, varpi: Optional[float] = None) -> float:
    """Low-SNR rate ϖ·E[γ_r]."""
    return _check_varpi(spec, varpi) * snr_moment(spec, 1.0)


def fso_rate_upper(spec: FsoLinkSpec, varpi: Optional[float] = None) -> float:
    """Jensen bound log(1 + ϖ·E[γ_r])."""
    return math.log1p(_check_varpi(spec, varpi) * snr_moment(spec, 1.0))


def _log_moment_derivative(spec: FsoLinkSpec) -> float:
    """d/dt log E[X^t] at t = 0, i.e. E[log X]."""
    m, g2 = spec.malaga, spec.pointing.g2
    orders = m.active_orders
    weights = m.mixture_weights[orders - 1]
    return -math.log(spec.delta) - 1.0 / g2 + digamma(m.nu) + float(np.sum(weights * digamma(orders.astype(float))))


def _mellin_poles(spec: FsoLinkSpec) -> Tuple[np.ndarray, np.ndarray]:
    """(leading, all) positive singularities of π/(s sin πs)·E[X^{-rs}]."""
    m, g2, r = spec.malaga, spec.pointing.g2, spec.detection
    orders = m.active_orders.astype(float)
    leading = np.concatenate(([1.0, g2 / r, m.nu / r], orders / r))
    shifts = np.arange(0, 4)
    further = np.concatenate((
        np.arange(1, 5, dtype=float),
        (m.nu + shifts) / r,
        ((orders[:, None] + shifts[None, :]) / r).ravel(),
        [g2 / r, 0.0],
    ))
    return np.unique(np.round(leading, 12)), np.unique(np.round(further, 12))


def _residue(fn: Callable[[complex], complex], centre: float, radius: float) -> complex:
    angles = 2.0 * math.pi * (np.arange(RESIDUE_NODES) + 0.5) / RESIDUE_NODES
    points = centre + radius * np.exp(1j * angles)
    values = np.array([fn(s) for s in points])
    return complex(np.mean(values * radius * np.exp(1j * angles)))


def fso_rate_high(spec: FsoLinkSpec, varpi: Optional[float] = None,
                  variant: Literal["moment", "residue"] = "moment") -> float:
    """High-SNR rate.

    ``moment``: log(ϖμ_r) + r·E[log X], the derivative of the moment at zero.
    ``residue``: adds the leading terms of the Mellin–Barnes expansion of
    E[log(1+ϖγ)], one for each pole at s = 1, g²/r, ν/r and m/r. Each residue
    is integrated numerically on a small circle, which also covers coincident
    (double) poles.
    """
    varpi = _check_varpi(spec, varpi)
    c = varpi * spec.mu_r
    base = math.log(c) + spec.detection * _log_moment_derivative(spec)
    if variant == "moment":
        return base
    if variant != "residue":
        raise ParameterDomainError(f"unknown high-SNR variant {variant!r}")

    r = spec.detection

    def kernel(s: complex) -> complex:
        return math.pi / (s * np.sin(math.pi * s)) * c ** (-s) * _normalised_mellin(spec, -r * s)

    leading, singular = _mellin_poles(spec)
    correction = 0.0
    for pole in leading:
        others = singular[np.abs(singular - pole) > 1e-9]
        radius = min(0.25, 0.5 * float(np.min(np.abs(others - pole))))
        correction += _residue(kernel, float(pole), radius).real
    logger.debug(f"high-SNR residue correction {-correction:.3e} at mu_r={spec.mu_r:.3g}")
    return base - correction
