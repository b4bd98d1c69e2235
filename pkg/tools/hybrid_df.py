"""End-to-end metrics when the BS decodes and forwards over the FSO backhaul.

The end-to-end SINR is the smaller of the two hop SINRs. The hops are
independent, so coverage is the product of the per-hop coverages and the
ergodic rate is the smaller per-hop rate.
"""

import math
from functools import partial
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

import logger
from errors import InsufficientDecayError, ParameterDomainError
from executor import MonteCarloExecutor
from models import CoverageCurve, DiversityEstimate, FsoLinkSpec, HybridResult, SinrSample, UplinkConfig
from tools import fso_channel, uplink_rf
from utils.numerics import RngStream, db_to_linear, wilson_interval

# local slope spread accepted inside a fit window
SLOPE_VARIATION = 0.05
FIT_WINDOW_DB = 10.0
MIN_HIGH_SNR_SPAN_DB = 20.0
# a local slope below this is an outage floor
FLOOR_SLOPE = 0.01

ArrayLike = Union[float, np.ndarray]


def hybrid_sinr(uplink: Union[SinrSample, ArrayLike], backhaul: ArrayLike) -> ArrayLike:
    """min(SINR_uplink, γ_backhaul), element-wise."""
    up = uplink.sinr if isinstance(uplink, SinrSample) else uplink
    value = np.minimum(up, backhaul)
    return float(value) if np.ndim(value) == 0 else value


def hybrid_coverage(cfg: UplinkConfig, spec: FsoLinkSpec, threshold: float) -> float:
    """P_up(Γ)·P_bh(Γ) for a linear threshold."""
    return uplink_rf.coverage_analytic(cfg, threshold) * float(fso_channel.snr_ccdf(spec, threshold))


def hybrid_outage(cfg: UplinkConfig, spec: FsoLinkSpec, threshold: float) -> float:
    """1 - P_up·P_bh, assembled from the per-hop outages to keep small values accurate."""
    up = uplink_rf.outage_analytic(cfg, threshold)
    bh = fso_channel.outage_probability(spec, threshold)
    return up + bh - up * bh


def hybrid_rate(cfg: UplinkConfig, spec: FsoLinkSpec, varpi: Optional[float] = None,
                half_duplex: bool = False) -> float:
    """min(uplink rate, backhaul rate) in nats/s/Hz.

    Args:
        cfg: Uplink configuration
        spec: Backhaul hop
        varpi: Backhaul rate constant; the detection default when None
        half_duplex: Apply the 1/2 pre-log of two-slot repetition coding

    Returns:
        End-to-end ergodic rate
    """
    rate = min(uplink_rf.rate_analytic(cfg), fso_channel.fso_rate_exact(spec, varpi))
    return 0.5 * rate if half_duplex else rate


def hybrid_result(cfg: UplinkConfig, spec: FsoLinkSpec, threshold: float, varpi: Optional[float] = None,
                  half_duplex: bool = False) -> HybridResult:
    """Coverage and rate together with the per-hop values they were built from."""
    up_cov = uplink_rf.coverage_analytic(cfg, threshold)
    bh_cov = float(fso_channel.snr_ccdf(spec, threshold))
    up_rate = uplink_rf.rate_analytic(cfg)
    bh_rate = fso_channel.fso_rate_exact(spec, varpi)
    pre_log = 0.5 if half_duplex else 1.0
    return HybridResult(
        coverage=up_cov * bh_cov,
        rate=pre_log * min(up_rate, bh_rate),
        uplink={"coverage": up_cov, "rate": up_rate},
        backhaul={"coverage": bh_cov, "rate": bh_rate},
    )


def _hybrid_samples(cfg: UplinkConfig, spec: FsoLinkSpec, size: int, rng: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    uplink, _, _ = uplink_rf.sinr_samples(cfg, size, rng)
    backhaul = fso_channel.snr_sample(spec, rng, size)
    return uplink, backhaul


def _coverage_chunk(cfg: UplinkConfig, spec: FsoLinkSpec, thresholds: np.ndarray, size: int,
                    rng: RngStream) -> np.ndarray:
    uplink, backhaul = _hybrid_samples(cfg, spec, size, rng)
    sinr = np.minimum(uplink, backhaul)
    return np.count_nonzero(sinr[:, None] > thresholds[None, :], axis=0).astype(float)


def hybrid_coverage_mc(cfg: UplinkConfig, spec: FsoLinkSpec, thresholds_db: Iterable[float], n_realizations: int,
                       rng: RngStream, executor: Optional[MonteCarloExecutor] = None) -> CoverageCurve:
    """Empirical P[min(SINR_up, γ_bh) > Γ] with Wilson 95 % intervals."""
    if n_realizations < 1:
        raise ParameterDomainError("n_realizations must be at least 1")
    thresholds_db = [float(t) for t in thresholds_db]
    executor = executor or MonteCarloExecutor(workers=1)
    counts = executor.sum(partial(_coverage_chunk, cfg, spec, db_to_linear(thresholds_db)), n_realizations, rng)
    low, high = wilson_interval(counts, n_realizations)
    return CoverageCurve(
        thresholds_db=thresholds_db,
        coverage=(counts / n_realizations).tolist(),
        ci_low=low.tolist(),
        ci_high=high.tolist(),
        method="monte-carlo",
    )


def _rate_chunk(cfg: UplinkConfig, spec: FsoLinkSpec, varpi: float, size: int, rng: RngStream) -> np.ndarray:
    uplink, backhaul = _hybrid_samples(cfg, spec, size, rng)
    return np.array([math.fsum(np.log1p(uplink)), math.fsum(np.log1p(varpi * backhaul))])


def hybrid_rate_mc(cfg: UplinkConfig, spec: FsoLinkSpec, n_realizations: int, rng: RngStream,
                   varpi: Optional[float] = None, half_duplex: bool = False,
                   executor: Optional[MonteCarloExecutor] = None) -> HybridResult:
    """Monte Carlo per-hop ergodic rates and their minimum."""
    varpi = spec.varpi if varpi is None else varpi
    executor = executor or MonteCarloExecutor(workers=1)
    up_sum, bh_sum = executor.sum(partial(_rate_chunk, cfg, spec, varpi), n_realizations, rng)
    up_rate, bh_rate = up_sum / n_realizations, bh_sum / n_realizations
    pre_log = 0.5 if half_duplex else 1.0
    return HybridResult(
        rate=pre_log * min(up_rate, bh_rate),
        uplink={"rate": float(up_rate)},
        backhaul={"rate": float(bh_rate)},
    )


def predicted_diversity(spec: FsoLinkSpec, uplink_limited: bool = True) -> Tuple[float, float]:
    """(formula, effective) end-to-end diversity.

    formula is min(1, g²/r, ν/r, κ/r). The effective value replaces κ with the
    lowest Gamma-mixture order carrying weight, which drops to 1 when the
    incoherent scatter power ζ is positive. ``uplink_limited=False`` leaves out
    the uplink's unit diversity.
    """
    formula, effective = fso_channel.predicted_diversity(spec)
    if uplink_limited:
        return min(1.0, formula), min(1.0, effective)
    return formula, effective


def _local_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return -np.diff(y) / np.diff(x)


def diversity_estimate(snr_db: Sequence[float], outage: Sequence[float], predicted: Optional[float] = None,
                       predicted_formula: Optional[float] = None) -> DiversityEstimate:
    """Fit the high-SNR slope of log10(outage) against log10(SNR).

    The fit window is the highest 10 dB stretch in which the local slope
    varies by less than 5 %.

    Args:
        snr_db: Strictly increasing SNR grid in dB
        outage: Outage probabilities on that grid
        predicted: Predicted diversity to report alongside the fit
        predicted_formula: Formula value, when it differs from ``predicted``

    Raises:
        InsufficientDecayError: If the curve floors or covers less than 20 dB
    """
    snr = np.asarray(snr_db, dtype=float)
    out = np.asarray(outage, dtype=float)
    if snr.shape != out.shape or snr.size < 3:
        raise ParameterDomainError("need at least three (snr, outage) pairs of equal length")
    if np.any(np.diff(snr) <= 0):
        raise ParameterDomainError("SNR grid must be strictly increasing")
    keep = out > 0
    snr, out = snr[keep], out[keep]
    if snr.size < 3 or snr[-1] - snr[0] < MIN_HIGH_SNR_SPAN_DB:
        raise InsufficientDecayError(
            f"outage curve spans {snr[-1] - snr[0] if snr.size else 0:.1f} dB with positive values; "
            f"{MIN_HIGH_SNR_SPAN_DB:.0f} dB required"
        )

    x = snr / 10.0
    y = np.log10(out)
    slopes = _local_slopes(x, y)
    if slopes[-1] < FLOOR_SLOPE:
        raise InsufficientDecayError(f"outage floor detected: local slope {slopes[-1]:.3g} at {snr[-1]:.1f} dB")

    chosen = None
    for end in range(snr.size - 1, 0, -1):
        inside = np.flatnonzero(snr >= snr[end] - FIT_WINDOW_DB)
        inside = inside[inside <= end]
        if snr[end] - snr[inside[0]] < FIT_WINDOW_DB - 1e-9 or inside.size < 3:
            break
        local = slopes[inside[0]:end]
        spread = (local.max() - local.min()) / abs(local.mean())
        if spread < SLOPE_VARIATION:
            chosen = inside
            break
    if chosen is None:
        chosen = np.flatnonzero(snr >= snr[-1] - FIT_WINDOW_DB)
        logger.warning("no 10 dB window with a stable local slope; fitting the top of the curve")

    slope = -np.polyfit(x[chosen], y[chosen], 1)[0]
    if slope <= 0:
        raise InsufficientDecayError(f"fitted slope {slope:.3g} is not positive")
    return DiversityEstimate(
        slope=float(slope),
        fit_range_db=[float(snr[chosen[0]]), float(snr[chosen[-1]])],
        predicted=predicted,
        predicted_formula=predicted_formula,
    )
