"""IRS-assisted transmission with zero-forcing of the interferers.

The reflected channel is the bilinear form h1ᵀΦh2 = Σ_n h1_n e^{jφ_n} h2_n.
With y = Φh2, the zero-forcing problem is

    max |h1ᵀy|  s.t.  hzᵀy = 0,

whose unconstrained-modulus solution is y ∝ conj(x̂), x̂ = (I - hz hzᴴ/‖hz‖²) h1.
A reflecting surface can only set phases, so φ_n = -angle(x̂_n h2_n); the
relaxed y is evaluated separately so the cost of the phase-only constraint
stays visible.
The nulled design refines those phases to drive the leakage towards zero.
"""

import math
from typing import Dict, List, Literal, NamedTuple, Optional, Sequence

import numpy as np
from scipy import linalg

import logger
from errors import DegenerateInterfererError, ParameterDomainError
from models import IrsChannels, PhaseVector, UplinkConfig
from tools import geometry
from utils.numerics import RngStream

InterfererPolicy = Literal["strongest", "nullspace"]
PhaseDesign = Literal["optimal", "nulled", "random", "fixed"]

DEFAULT_NOISE_VAR = 0.01
DEFAULT_INTERFERER_WEIGHT = 0.1
NULLING_ITERATIONS = 200
# leakage energy, relative to ‖h2‖², at which the alternating projections stop
NULLING_TOLERANCE = 1e-12


def _reflected(h: np.ndarray, phases: PhaseVector, h2: np.ndarray) -> np.ndarray:
    # rows of h against diag(e^{jφ}) h2
    return h @ (phases.coefficients * h2)


def residual_interference(ch: IrsChannels, phases: PhaseVector) -> float:
    """Σ_z w_z |hz_zᵀΦh2|²."""
    if ch.interferer_count == 0:
        return 0.0
    leak = _reflected(ch.hz, phases, ch.h2)
    return float(np.sum(ch.weights * np.abs(leak) ** 2))


def irs_sinr(ch: IrsChannels, phases: PhaseVector) -> float:
    """|h1ᵀΦh2|² / (Σ_z w_z|hz_zᵀΦh2|² + σ²)."""
    if phases.phases.size != ch.size:
        raise ParameterDomainError(f"{phases.phases.size} phases for {ch.size} reflecting elements")
    signal = abs(_reflected(ch.h1, phases, ch.h2)) ** 2
    return float(signal / (residual_interference(ch, phases) + ch.noise_var))


def strongest_interferer(ch: IrsChannels) -> int:
    """Index of the interferer with the largest w_z‖hz_z‖²."""
    if ch.interferer_count == 0:
        raise DegenerateInterfererError("no interferers to project against")
    return int(np.argmax(ch.weights * np.sum(np.abs(ch.hz) ** 2, axis=1)))


def zf_solution(ch: IrsChannels, interferer: Optional[int] = None) -> np.ndarray:
    """x̂ = (I - hz hzᴴ/‖hz‖²) h1 for one interferer (the strongest by default).

    Raises:
        DegenerateInterfererError: If the interferer channel is all zeros
    """
    index = strongest_interferer(ch) if interferer is None else interferer
    hz = ch.hz[index]
    energy = float(np.real(np.vdot(hz, hz)))
    if energy == 0.0:
        raise DegenerateInterfererError("‖hz‖ = 0; use the interference-free phases")
    return ch.h1 - hz * (np.vdot(hz, ch.h1) / energy)


def nullspace_solution(ch: IrsChannels) -> np.ndarray:
    """Projection of h1 onto the orthogonal complement of every interferer channel.

    Requires more reflecting elements than linearly independent interferers.
    """
    if ch.interferer_count == 0:
        raise DegenerateInterfererError("no interferers to project against")
    basis = linalg.orth(ch.hz.T)
    if basis.shape[1] >= ch.size:
        raise ParameterDomainError(
            f"{basis.shape[1]} independent interferers leave no null space for {ch.size} elements"
        )
    return ch.h1 - basis @ (basis.conj().T @ ch.h1)


def _interference_free(ch: IrsChannels) -> bool:
    return ch.interferer_count == 0 or not np.any(ch.hz)


def _beamformer_target(ch: IrsChannels, policy: InterfererPolicy) -> np.ndarray:
    if _interference_free(ch):
        return ch.h1
    if policy == "nullspace":
        return nullspace_solution(ch)
    if policy != "strongest":
        raise ParameterDomainError(f"unknown interferer policy {policy!r}")
    return zf_solution(ch)


def _align(target: np.ndarray, h2: np.ndarray) -> PhaseVector:
    product = target * h2
    # zero entries contribute nothing; angle() would return 0 for them anyway
    phases = np.where(product != 0, -np.angle(product), 0.0)
    return PhaseVector(phases=phases)


def optimal_phases(ch: IrsChannels, policy: InterfererPolicy = "strongest") -> PhaseVector:
    """Phase-only zero-forcing solution φ_n = -angle(x̂_n h2_n).

    Without interferers (or with all-zero hz) x̂ = h1 and the phases co-phase
    every reflected path. Entries with h2_n = 0 get φ_n = 0.
    """
    target = _beamformer_target(ch, policy)
    if not np.any(np.abs(target) > 1e-14 * np.linalg.norm(ch.h1)):
        logger.warning("h1 lies in the interferer subspace; falling back to interference-free phases")
        target = ch.h1
    return _align(target, ch.h2)


def _null_basis(ch: IrsChannels, policy: InterfererPolicy) -> np.ndarray:
    """Orthonormal basis Q with Qᴴy = 0 exactly when the policy's interferers see no leakage through y."""
    if policy == "nullspace":
        rows = ch.hz
    elif policy == "strongest":
        rows = ch.hz[[strongest_interferer(ch)]]
    else:
        raise ParameterDomainError(f"unknown interferer policy {policy!r}")
    return linalg.orth(rows.conj().T)


def nulled_phases(ch: IrsChannels, policy: InterfererPolicy = "strongest",
                  iterations: int = NULLING_ITERATIONS) -> PhaseVector:
    """Phase-only zero forcing by alternating projections.

    Starts from :func:`optimal_phases`. Each round projects y = Φh2 onto the
    interferer null space and then restores |y_n| = |h2_n| keeping only the
    phase. The leakage towards the nulled interferers never increases.
    """
    start = optimal_phases(ch, policy)
    if _interference_free(ch):
        return start
    basis = _null_basis(ch, policy)
    if basis.shape[1] >= ch.size:
        return start
    modulus = np.abs(ch.h2)
    y = start.coefficients * ch.h2
    tolerance = NULLING_TOLERANCE * float(np.sum(modulus ** 2))
    for _ in range(iterations):
        leak = basis.conj().T @ y
        if float(np.real(np.vdot(leak, leak))) <= tolerance:
            break
        z = y - basis @ leak
        y = np.where(np.abs(z) > 0, modulus * np.exp(1j * np.angle(z)), y)
    return PhaseVector(phases=np.where(modulus > 0, np.angle(y) - np.angle(ch.h2), 0.0))


def phase_designs(ch: IrsChannels, kind: PhaseDesign, rng: Optional[RngStream] = None,
                  policy: InterfererPolicy = "strongest") -> PhaseVector:
    """Optimal, nulled, i.i.d. uniform random, or all-zero phases."""
    if kind == "optimal":
        return optimal_phases(ch, policy)
    if kind == "nulled":
        return nulled_phases(ch, policy)
    if kind == "random":
        if rng is None:
            raise ParameterDomainError("the random phase design needs an RngStream")
        return PhaseVector(phases=rng.uniform(0.0, 2.0 * math.pi, size=ch.size))
    if kind == "fixed":
        return PhaseVector(phases=np.zeros(ch.size))
    raise ParameterDomainError(f"unknown phase design {kind!r}")


def relaxed_beam(ch: IrsChannels, policy: InterfererPolicy = "strongest") -> np.ndarray:
    """y = conj(x̂)·‖h2‖/‖x̂‖, the zero-forcing beamformer without the unit-modulus constraint."""
    target = _beamformer_target(ch, policy)
    norm = np.linalg.norm(target)
    if norm == 0.0:
        return np.zeros(ch.size, dtype=complex)
    return np.conj(target) * (np.linalg.norm(ch.h2) / norm)


def relaxed_residual(ch: IrsChannels, policy: InterfererPolicy = "strongest") -> float:
    if ch.interferer_count == 0:
        return 0.0
    return float(np.sum(ch.weights * np.abs(ch.hz @ relaxed_beam(ch, policy)) ** 2))


def relaxed_sinr(ch: IrsChannels, policy: InterfererPolicy = "strongest") -> float:
    """SINR reached by :func:`relaxed_beam`."""
    signal = abs(ch.h1 @ relaxed_beam(ch, policy)) ** 2
    return float(signal / (relaxed_residual(ch, policy) + ch.noise_var))


def zf_objective(ch: IrsChannels, phases: PhaseVector, policy: InterfererPolicy = "strongest") -> float:
    """|x̂ᵀΦh2|²: reflected power of the desired channel after the zero-forcing projection."""
    target = _beamformer_target(ch, policy)
    return float(abs(_reflected(target, phases, ch.h2)) ** 2)


def interference_free_channels(ch: IrsChannels) -> IrsChannels:
    """The same desired links with every interferer removed."""
    return IrsChannels(h1=ch.h1, h2=ch.h2, hz=None, weights=None, noise_var=ch.noise_var)


def _complex_normal(rng: RngStream, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def interferer_weights(cfg: UplinkConfig, count: int, rng: RngStream) -> np.ndarray:
    """r_z^{αε} d_z^{-α} of the ``count`` strongest interferers in one network snapshot."""
    net = geometry.sample_network(cfg.distance_model, cfg.density, cfg.window_radius, rng,
                                  interferer_density=cfg.ue_density)
    weights = np.sort(net.rz ** (cfg.alpha * cfg.epsilon) * net.dz ** (-cfg.alpha))[::-1]
    if weights.size < count:
        raise ParameterDomainError(f"snapshot has {weights.size} interferers, {count} requested")
    return weights[:count]


def sample_irs_channels(n_elements: int, rng: RngStream, noise_var: float = DEFAULT_NOISE_VAR,
                        interferers: int = 1, weights: Optional[Sequence[float]] = None,
                        uplink: Optional[UplinkConfig] = None) -> IrsChannels:
    """One channel instance with i.i.d. CN(0, 1) entries.

    Interferer weights are taken from ``weights``, drawn from an uplink
    snapshot when ``uplink`` is given, or default to 0.1 each.
    """
    if n_elements < 1:
        raise ParameterDomainError("an IRS needs at least one element")
    h1 = _complex_normal(rng, n_elements)
    h2 = _complex_normal(rng, n_elements)
    hz = _complex_normal(rng, (interferers, n_elements)) if interferers else None
    if weights is not None:
        w = np.asarray(weights, dtype=float)
    elif uplink is not None and interferers:
        w = interferer_weights(uplink, interferers, rng)
    else:
        w = np.full(interferers, DEFAULT_INTERFERER_WEIGHT)
    return IrsChannels(h1=h1, h2=h2, hz=hz, weights=w if interferers else None, noise_var=noise_var)


class SeComparison(NamedTuple):
    rows: List[Dict[str, float]]
    df_rate: Optional[float]
    min_elements: Optional[int]


def se_comparison(sizes: Sequence[int], instances: int, rng: RngStream,
                  designs: Sequence[PhaseDesign] = ("optimal", "nulled", "random", "fixed"),
                  noise_var: float = DEFAULT_NOISE_VAR, interferers: int = 1,
                  weights: Optional[Sequence[float]] = None, uplink: Optional[UplinkConfig] = None,
                  df_rate: Optional[float] = None, policy: InterfererPolicy = "strongest") -> SeComparison:
    """Average spectral efficiency E[log(1+SINR)] per design and surface size.

    Instance k for size N draws from ``rng.spawn(N).child(k)``, so adding sizes
    to the grid leaves the other rows unchanged. An extra ``relaxed`` row per
    size reports the zero-forcing beamformer without the unit-modulus
    constraint.

    Returns:
        Rows with N, design, se, residual_interference (median over
        instances), the DF baseline and the smallest N whose optimal-phase SE
        reaches it
    """
    if instances < 1:
        raise ParameterDomainError("instances must be at least 1")
    rows: List[Dict[str, float]] = []
    optimal_se: Dict[int, float] = {}
    for n in sizes:
        base = rng.spawn(int(n))
        se = {d: [] for d in designs}
        residual = {d: [] for d in designs}
        relaxed, relaxed_leak = [], []
        for k in range(instances):
            stream = base.child(k)
            ch = sample_irs_channels(int(n), stream, noise_var, interferers, weights, uplink)
            for design in designs:
                phases = phase_designs(ch, design, stream, policy)
                se[design].append(math.log1p(irs_sinr(ch, phases)))
                residual[design].append(residual_interference(ch, phases))
            relaxed.append(math.log1p(relaxed_sinr(ch, policy)))
            relaxed_leak.append(relaxed_residual(ch, policy))
        for design in designs:
            rows.append({
                "N": int(n),
                "design": design,
                "se": math.fsum(se[design]) / instances,
                "residual_interference": float(np.median(residual[design])),
            })
        rows.append({"N": int(n), "design": "relaxed", "se": math.fsum(relaxed) / instances,
                     "residual_interference": float(np.median(relaxed_leak))})
        if "optimal" in designs:
            optimal_se[int(n)] = math.fsum(se["optimal"]) / instances

    min_elements = None
    if df_rate is not None:
        reached = [n for n in sorted(optimal_se) if optimal_se[n] >= df_rate]
        min_elements = reached[0] if reached else None
    logger.info(f"IRS comparison over N={list(sizes)}: DF baseline {df_rate}, minimum N {min_elements}")
    return SeComparison(rows=rows, df_rate=df_rate, min_elements=min_elements)
