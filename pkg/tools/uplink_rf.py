"""Uplink SINR with fractional power control: Monte Carlo and numerical integrals.

Signal: h·r^{α(ε-1)}. Interference: Σ_z r_z^{αε} h_z d_z^{-α}. All fades are
exponential with rate μ.

The Laplace transform of the interference uses the closed form of the radial
integral,

    ∫_r^∞ x / (1 + x^α/q) dx = q^{2/α}/α · π/sin(2π/α) · I_{1/(1+r^α/q)}(1-2/α, 2/α),

with I the regularised incomplete beta function, so only the average over the
interferers' r_z needs a quadrature rule.
"""

import math
from functools import partial
from typing import Iterable, Optional, Tuple

import numpy as np
from scipy import special

import logger
from errors import ParameterDomainError
from executor import MonteCarloExecutor
from models import CoverageCurve, DistanceModel, NetworkRealization, SinrSample, UplinkConfig
from tools import geometry
from utils.numerics import (
    QuadratureSpec,
    RngStream,
    db_to_linear,
    gauss_laguerre,
    gauss_legendre,
    integrate,
    wilson_interval,
)

RZ_NODES = 64

OUTER_QUADRATURE = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-9, max_subdivisions=400)
RATE_QUADRATURE = QuadratureSpec(abs_tol=1e-10, rel_tol=1e-8, max_subdivisions=400, tail_scale=2.0)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def sinr_from_fades(cfg: UplinkConfig, net: NetworkRealization, h: float, hz: Optional[np.ndarray] = None) -> SinrSample:
    """SINR for given fading powers (no randomness)."""
    signal = h * net.serving_distance ** (cfg.alpha * (cfg.epsilon - 1.0))
    interference = 0.0
    if cfg.interference and net.interferer_count:
        hz = np.asarray(hz, dtype=float)
        terms = net.rz ** (cfg.alpha * cfg.epsilon) * hz * net.dz ** (-cfg.alpha)
        interference = math.fsum(terms)
    return SinrSample(sinr=signal / (cfg.noise_power + interference), signal=signal, interference=interference)


def sinr_sample(cfg: UplinkConfig, net: NetworkRealization, rng: RngStream) -> SinrSample:
    """One SINR draw for a fixed network snapshot."""
    h = rng.exponential(1.0 / cfg.mu)
    hz = rng.exponential(1.0 / cfg.mu, size=net.interferer_count)
    return sinr_from_fades(cfg, net, h, hz)


def _batch_interference(cfg: UplinkConfig, batch: geometry.NetworkBatch, rng: RngStream) -> np.ndarray:
    if not cfg.interference:
        return np.zeros(batch.size)
    hz = rng.exponential(1.0 / cfg.mu, size=batch.owner.size)
    terms = batch.rz ** (cfg.alpha * cfg.epsilon) * hz * batch.dz ** (-cfg.alpha)
    return np.bincount(batch.owner, weights=terms, minlength=batch.size)


def sinr_samples(cfg: UplinkConfig, count: int, rng: RngStream) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``count`` independent (sinr, signal, interference) draws, network and fading both random."""
    batch = geometry.sample_network_batch(cfg.distance_model, cfg.density, cfg.window, count, rng,
                                          interferer_density=cfg.ue_density)
    h = rng.exponential(1.0 / cfg.mu, size=count)
    signal = h * batch.serving ** (cfg.alpha * (cfg.epsilon - 1.0))
    interference = _batch_interference(cfg, batch, rng)
    return signal / (cfg.noise_power + interference), signal, interference


def interference_samples(cfg: UplinkConfig, serving_distance: float, count: int, rng: RngStream) -> np.ndarray:
    """Aggregate interference at the BS of interest for a fixed serving distance."""
    if cfg.distance_model == DistanceModel.HEXAGONAL:
        raise ParameterDomainError("fixed serving distance is not defined on the hexagonal lattice")
    serving = np.full(count, float(serving_distance))
    batch = geometry.sample_interferers(cfg.distance_model, cfg.density, cfg.window, serving, rng,
                                        interferer_density=cfg.ue_density)
    return _batch_interference(cfg, batch, rng)


def _coverage_chunk(cfg: UplinkConfig, thresholds: np.ndarray, size: int, rng: RngStream) -> np.ndarray:
    sinr, _, _ = sinr_samples(cfg, size, rng)
    return np.count_nonzero(sinr[:, None] > thresholds[None, :], axis=0).astype(float)


def coverage_mc(cfg: UplinkConfig, thresholds_db: Iterable[float], n_realizations: int, rng: RngStream,
                executor: Optional[MonteCarloExecutor] = None) -> CoverageCurve:
    """Empirical P[SINR > Γ] with Wilson 95 % intervals.

    Args:
        cfg: Uplink configuration
        thresholds_db: Strictly increasing thresholds in dB
        n_realizations: Number of independent snapshots, at least 1
        rng: Parent random stream
        executor: Chunk executor; a serial one is used by default

    Returns:
        CoverageCurve tagged "monte-carlo"
    """
    if n_realizations < 1:
        raise ParameterDomainError("n_realizations must be at least 1")
    thresholds_db = [float(t) for t in thresholds_db]
    thresholds = db_to_linear(thresholds_db)
    executor = executor or MonteCarloExecutor(workers=1)
    counts = executor.sum(partial(_coverage_chunk, cfg, thresholds), n_realizations, rng)
    low, high = wilson_interval(counts, n_realizations)
    return CoverageCurve(
        thresholds_db=thresholds_db,
        coverage=(counts / n_realizations).tolist(),
        ci_low=low.tolist(),
        ci_high=high.tolist(),
        method="monte-carlo",
    )


def _rate_chunk(cfg: UplinkConfig, size: int, rng: RngStream) -> np.ndarray:
    sinr, _, _ = sinr_samples(cfg, size, rng)
    values = np.log1p(sinr)
    return np.array([math.fsum(values), math.fsum(values * values)])


def rate_mc(cfg: UplinkConfig, n_realizations: int, rng: RngStream,
            executor: Optional[MonteCarloExecutor] = None) -> Tuple[float, float]:
    """Monte Carlo E[log(1+SINR)] in nats/s/Hz with its standard error."""
    executor = executor or MonteCarloExecutor(workers=1)
    total, total_sq = executor.sum(partial(_rate_chunk, cfg), n_realizations, rng)
    mean = total / n_realizations
    variance = max(total_sq / n_realizations - mean * mean, 0.0)
    return float(mean), float(math.sqrt(variance / n_realizations))


# ---------------------------------------------------------------------------
# Analytic
# ---------------------------------------------------------------------------

def _require_analytic(cfg: UplinkConfig) -> None:
    if cfg.interference and not cfg.distance_model.has_analytic_form:
        raise ParameterDomainError(
            f"{cfg.distance_model.value} interferers have no analytic form; use the Monte Carlo estimators"
        )


def _rz_rule(cfg: UplinkConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes/weights for E over the interferer r_z law."""
    if cfg.distance_model == DistanceModel.PPP_RAYLEIGH:
        u, w = gauss_laguerre(RZ_NODES)
        return np.sqrt(u / (math.pi * cfg.density)), np.asarray(w)
    support = geometry.uniform_rz_support(cfg.density)
    r, w = gauss_legendre(RZ_NODES, 0.0, support)
    return r, w * 2.0 * math.pi * cfg.density * r


def _radial_integral(q: np.ndarray, r: float, alpha: float) -> np.ndarray:
    """∫_r^∞ x/(1 + x^α/q) dx, vectorised over q >= 0."""
    q = np.asarray(q, dtype=float)
    out = np.zeros_like(q)
    positive = q > 0
    if np.any(positive):
        a = 2.0 / alpha
        qp = q[positive]
        x = 1.0 / (1.0 + r ** alpha / qp)
        out[positive] = qp ** a / alpha * math.pi / math.sin(math.pi * a) * special.betainc(1.0 - a, a, x)
    return out


def laplace_exponent(cfg: UplinkConfig, s: float, r: float) -> float:
    """-log L_I(s) at exclusion radius r."""
    if not cfg.interference or s == 0:
        return 0.0
    rz, weights = _rz_rule(cfg)
    q = s * rz ** (cfg.alpha * cfg.epsilon) / cfg.mu
    return 2.0 * math.pi * cfg.interferer_density * float(np.dot(weights, _radial_integral(q, r, cfg.alpha)))


def interference_laplace(cfg: UplinkConfig, s: float, r: float) -> float:
    """Laplace transform E[exp(-s I)] of the aggregate interference.

    Args:
        cfg: Uplink configuration (PPP-Rayleigh or PPP-Uniform r_z)
        s: Transform variable, >= 0
        r: Exclusion radius (serving distance), > 0

    Returns:
        L_I(s) in (0, 1]
    """
    if s < 0 or r <= 0:
        raise ParameterDomainError("interference_laplace requires s >= 0 and r > 0")
    _require_analytic(cfg)
    return math.exp(-laplace_exponent(cfg, s, r))


def _serving_radius(cfg: UplinkConfig, u: float) -> float:
    # u = πλr² is Exp(1) for the nearest-BS distance
    return math.sqrt(u / (math.pi * cfg.density))


def _coverage_exponent(cfg: UplinkConfig, threshold: float, u: float) -> float:
    r = _serving_radius(cfg, u)
    if r == 0.0:
        return 0.0
    s = cfg.mu * threshold * r ** (cfg.alpha * (1.0 - cfg.epsilon))
    return s * cfg.noise_power + laplace_exponent(cfg, s, r)


def coverage_analytic(cfg: UplinkConfig, threshold: float) -> float:
    """P[SINR > Γ] for a linear threshold Γ > 0.

    2πλ∫ r e^{-πλr²} e^{-μΓσ² r^{α(1-ε)}} L_I(μΓ r^{α(1-ε)}) dr, evaluated in
    u = πλr².
    """
    if not threshold > 0:
        raise ParameterDomainError(f"threshold must be positive, got {threshold}")
    _require_analytic(cfg)
    value, _ = integrate(
        lambda u: math.exp(-u - _coverage_exponent(cfg, threshold, u)), (0.0, math.inf), OUTER_QUADRATURE
    )
    return min(max(value, 0.0), 1.0)


def outage_analytic(cfg: UplinkConfig, threshold: float) -> float:
    """1 - coverage, integrated directly so small outages keep their relative accuracy."""
    if not threshold > 0:
        raise ParameterDomainError(f"threshold must be positive, got {threshold}")
    _require_analytic(cfg)
    spec = OUTER_QUADRATURE.model_copy(update={"abs_tol": 1e-300, "rel_tol": 1e-9})
    value, _ = integrate(
        lambda u: -math.exp(-u) * math.expm1(-_coverage_exponent(cfg, threshold, u)), (0.0, math.inf), spec
    )
    return min(max(value, 0.0), 1.0)


def coverage_curve_analytic(cfg: UplinkConfig, thresholds_db: Iterable[float]) -> CoverageCurve:
    thresholds_db = [float(t) for t in thresholds_db]
    values = [coverage_analytic(cfg, float(t)) for t in db_to_linear(thresholds_db)]
    # enforce the CCDF shape against quadrature noise at the 1e-12 level
    values = np.minimum.accumulate(np.asarray(values)).tolist()
    return CoverageCurve(thresholds_db=thresholds_db, coverage=values, method="analytic")


def rate_analytic(cfg: UplinkConfig) -> float:
    """Ergodic uplink rate E[log(1+SINR)] in nats/s/Hz.

    2πλ∫ r e^{-πλr²} ∫_0^∞ e^{-σ²μ(e^x-1)r^{α(1-ε)}} L_I(μ(e^x-1)r^{α(1-ε)}) dx dr
    """
    _require_analytic(cfg)

    def inner(u: float) -> float:
        r = _serving_radius(cfg, u)
        if r == 0.0:
            return 0.0
        gain = cfg.mu * r ** (cfg.alpha * (1.0 - cfg.epsilon))

        def ccdf(x: float) -> float:
            if x > 700.0:
                return 0.0
            s = gain * math.expm1(x)
            return math.exp(-s * cfg.noise_power - laplace_exponent(cfg, s, r))

        value, _ = integrate(ccdf, (0.0, math.inf), RATE_QUADRATURE)
        return math.exp(-u) * value

    value, _ = integrate(inner, (0.0, math.inf), OUTER_QUADRATURE)
    logger.debug(f"uplink rate {value:.6f} nats/s/Hz (alpha={cfg.alpha}, eps={cfg.epsilon})")
    return value


def rate_from_coverage(cfg: UplinkConfig) -> float:
    """∫_0^∞ P_c(e^x - 1) dx, the threshold integral of the coverage curve."""
    _require_analytic(cfg)
    value, _ = integrate(
        lambda x: coverage_analytic(cfg, math.expm1(x)) if 0 < x < 700.0 else float(x <= 0), (0.0, math.inf), RATE_QUADRATURE
    )
    return value
