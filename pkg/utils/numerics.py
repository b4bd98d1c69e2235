"""Special functions, adaptive quadrature and seeded random streams.

Every integral in the project goes through :func:`integrate`, and every random
draw comes from an :class:`RngStream`. Special functions are thin wrappers over
``scipy.special`` that add domain checking so that bad arguments fail loudly
instead of producing ``nan``.
"""

import math
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.laguerre import laggauss
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import integrate as sp_integrate
from scipy import special, stats

import logger
from errors import ParameterDomainError, PoleError, QuadratureError

# quad messages that are never accepted, whatever the error estimate says
_FATAL_QUAD_MESSAGES = ("maximum number of subdivisions", "bad integrand", "divergent")

# roundoff / slow-convergence warnings are accepted up to this multiple of the tolerance
ROUNDOFF_SLACK = 1e4


class TailPolicy(str, Enum):
    EXP_DECAY_MAPPING = "exp_decay_mapping"
    USER_CUTOFF = "user_cutoff"


class QuadratureSpec(BaseModel):
    """Tolerances and tail handling for :func:`integrate`."""

    model_config = ConfigDict(frozen=True)

    abs_tol: float = Field(1e-9, gt=0)
    rel_tol: float = Field(1e-8, gt=0)
    max_subdivisions: int = Field(200, ge=1)
    tail_policy: TailPolicy = TailPolicy.EXP_DECAY_MAPPING
    # x = a + tail_scale * t / (1 - t); pick it near the decay length of the integrand
    tail_scale: float = Field(1.0, gt=0)
    cutoff: Optional[float] = None

    @model_validator(mode="after")
    def _check_cutoff(self):
        if self.tail_policy == TailPolicy.USER_CUTOFF and self.cutoff is None:
            raise ValueError("user_cutoff tail policy requires a cutoff")
        return self

    def with_scale(self, tail_scale: float) -> "QuadratureSpec":
        """Return a copy with a different half-infinite mapping scale."""
        return self.model_copy(update={"tail_scale": float(tail_scale)})


DEFAULT_QUADRATURE = QuadratureSpec()


class RngStream:
    """Seeded random stream.

    A stream is identified by ``(seed, stream_id)``; equal pairs produce
    bit-identical sequences. Streams are single-owner: hand each worker its own
    ``stream_id`` instead of sharing an instance.

    Attribute access falls through to the underlying ``numpy.random.Generator``
    so ``stream.normal(...)``, ``stream.poisson(...)`` etc. work directly.
    """

    def __init__(self, seed: int, stream_id: int = 0, path: Tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2 ** 64:
            raise ParameterDomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
        if int(stream_id) < 0 or any(int(p) < 0 for p in path):
            raise ParameterDomainError(f"stream ids must be non-negative, got {stream_id} {path}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.path = tuple(int(p) for p in path)
        self.generator = np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,) + self.path)
        )

    def spawn(self, stream_id: int) -> "RngStream":
        """A sibling stream with the same seed and another id."""
        return RngStream(self.seed, stream_id)

    def child(self, index: int) -> "RngStream":
        """Independent sub-stream ``index`` of this stream (used for MC chunks)."""
        return RngStream(self.seed, self.stream_id, self.path + (index,))

    def __getattr__(self, name):
        if name == "generator":
            raise AttributeError(name)
        return getattr(self.generator, name)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

def _scalar_or_array(values: np.ndarray):
    return float(values) if np.ndim(values) == 0 else values


def _check_poles(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    poles = (arr <= 0) & (arr == np.floor(arr))
    if np.any(poles):
        raise PoleError(f"{name} has a pole at non-positive integer {arr[poles].flat[0]:g}")
    return arr


def bessel_k(order, x):
    """Modified Bessel function of the second kind K_order(x).

    Args:
        order: Real order (any sign, K is even in the order)
        x: Positive argument

    Returns:
        K_order(x). Values below the double range are flushed to 0.

    Raises:
        ParameterDomainError: If any x <= 0
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(~(x_arr > 0)):
        raise ParameterDomainError("bessel_k requires x > 0")
    values = special.kv(np.abs(np.asarray(order, dtype=float)), x_arr)
    return _scalar_or_array(values)


def gamma_fn(x):
    """Euler gamma function."""
    return _scalar_or_array(special.gamma(_check_poles(x, "gamma")))


def log_gamma(x):
    """log|Γ(x)|, for arguments where Γ itself overflows."""
    return _scalar_or_array(special.gammaln(_check_poles(x, "log_gamma")))


def digamma(x):
    """Digamma ψ(x) = Γ'(x)/Γ(x)."""
    return _scalar_or_array(special.psi(_check_poles(x, "digamma")))


def upper_incomplete_gamma(s, x):
    """Non-regularised upper incomplete gamma Γ(s, x) for s > 0, x >= 0."""
    s_arr = np.asarray(s, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if np.any(s_arr <= 0) or np.any(x_arr < 0):
        raise ParameterDomainError("upper_incomplete_gamma requires s > 0 and x >= 0")
    return _scalar_or_array(special.gammaincc(s_arr, x_arr) * special.gamma(s_arr))


def erf(x):
    return _scalar_or_array(special.erf(np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def integrate(
    f: Callable[[float], float],
    domain: Tuple[float, float],
    spec: Optional[QuadratureSpec] = None,
) -> Tuple[float, float]:
    """Adaptive Gauss–Kronrod quadrature of a scalar function.

    Half-infinite domains ``(a, inf)`` are either mapped onto ``[0, 1)`` with
    ``x = a + s*t/(1-t)`` or truncated at ``spec.cutoff``.

    Args:
        f: Integrand, finite on the open interval
        domain: ``(a, b)`` with ``b`` possibly ``math.inf``
        spec: Tolerances; defaults to ``QuadratureSpec()``

    Returns:
        (value, error_estimate)

    Raises:
        QuadratureError: If the requested tolerance is not reached
        ParameterDomainError: On a reversed or doubly infinite domain
    """
    spec = spec or DEFAULT_QUADRATURE
    a, b = float(domain[0]), float(domain[1])
    if math.isinf(a):
        raise ParameterDomainError("lower integration limit must be finite")
    if b == a:
        return 0.0, 0.0
    if b < a:
        raise ParameterDomainError(f"reversed integration domain ({a}, {b})")

    integrand = f
    lo, hi = a, b
    if math.isinf(b):
        if spec.tail_policy == TailPolicy.USER_CUTOFF:
            if spec.cutoff <= a:
                raise ParameterDomainError(f"cutoff {spec.cutoff} not above lower limit {a}")
            hi = spec.cutoff
        else:
            scale = spec.tail_scale

            def integrand(t):
                one_minus = 1.0 - t
                if one_minus <= 0.0:
                    return 0.0
                x = a + scale * t / one_minus
                value = f(x)
                if not math.isfinite(value) and t > 0.5:
                    # overflow of the mapped abscissa; the exponentially decaying tail is 0 here
                    return 0.0
                return value * scale / (one_minus * one_minus)

            lo, hi = 0.0, 1.0

    result = sp_integrate.quad(
        integrand,
        lo,
        hi,
        epsabs=spec.abs_tol,
        epsrel=spec.rel_tol,
        limit=spec.max_subdivisions,
        full_output=1,
    )
    value, error = float(result[0]), float(result[1])
    message = result[3] if len(result) > 3 else None

    if not math.isfinite(value):
        raise QuadratureError(f"integral over ({a}, {b}) is not finite", value, error)

    if message:
        tolerance = max(spec.abs_tol, spec.rel_tol * abs(value))
        text = str(message).lower()
        if any(key in text for key in _FATAL_QUAD_MESSAGES) or error > ROUNDOFF_SLACK * tolerance:
            raise QuadratureError(
                f"quadrature over ({a}, {b}) did not converge: {str(message).strip()} "
                f"(value={value:.6g}, error={error:.3g})",
                value,
                error,
            )
        logger.debug(f"quad accepted with warning over ({a}, {b}): error={error:.3g}")

    return value, error


@lru_cache(maxsize=16)
def gauss_laguerre(n: int = 64) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ∫₀^∞ e^{-u} f(u) du ≈ Σ w f(u)."""
    nodes, weights = laggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(n: int, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ∫_a^b f(x) dx ≈ Σ w f(x)."""
    nodes, weights = leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def wilson_interval(successes, trials, confidence: float = 0.95):
    """Wilson score interval for a binomial proportion.

    Args:
        successes: Number of successes (scalar or array)
        trials: Number of trials
        confidence: Two-sided confidence level

    Returns:
        (low, high) arrays
    """
    k = np.asarray(successes, dtype=float)
    n = np.asarray(trials, dtype=float)
    if np.any(n < 1):
        raise ParameterDomainError("wilson_interval needs at least one trial")
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    p_hat = k / n
    denom = 1.0 + z * z / n
    centre = (p_hat + z * z / (2.0 * n)) / denom
    half = z * np.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n)) / denom
    return np.clip(centre - half, 0.0, 1.0), np.clip(centre + half, 0.0, 1.0)


def db_to_linear(value_db):
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(np.asarray(value, dtype=float))


def bessel_k_scaled(order, x):
    """Exponentially scaled K: e^{x}·K_order(x), finite for large x."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(~(x_arr > 0)):
        raise ParameterDomainError("bessel_k_scaled requires x > 0")
    return _scalar_or_array(special.kve(np.abs(np.asarray(order, dtype=float)), x_arr))


def laguerre_expectation(f: Callable[[np.ndarray], np.ndarray], n: int = 64) -> float:
    """E[f(U)] for U ~ Exp(1) with an n-point Gauss–Laguerre rule; ``f`` is vectorised."""
    nodes, weights = gauss_laguerre(n)
    return float(np.dot(weights, f(nodes)))


def legendre_expectation(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, n: int = 64) -> float:
    """(1/(b-a))∫_a^b f, i.e. E[f(U)] for U uniform on [a, b]."""
    if not b > a:
        raise ParameterDomainError(f"empty interval ({a}, {b})")
    nodes, weights = gauss_legendre(n, a, b)
    return float(np.dot(weights, f(nodes))) / (b - a)


def unimodal_minimum(values: Sequence[float]) -> Optional[int]:
    """Index of the minimum when ``values`` strictly fall to it and strictly rise after.

    Returns None when the sequence is not unimodal or the minimum sits on either end.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size < 3 or not np.all(np.isfinite(arr)):
        return None
    k = int(np.argmin(arr))
    steps = np.diff(arr)
    if k in (0, arr.size - 1) or np.any(steps[:k] >= 0) or np.any(steps[k:] <= 0):
        return None
    return k
