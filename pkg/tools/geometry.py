"""Spatial sampling of uplink network snapshots.

The BS of interest sits at the origin and its UE at distance r. Interfering
UEs are described only by distances: d_z to the origin and r_z to their own
BS, which sets their fractional power control.
"""

import math
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial import cKDTree

import logger
from errors import InvalidWindowError, ParameterDomainError
from models import DistanceModel, NetworkRealization
from utils.numerics import RngStream

# smallest window, in units of the typical inter-site distance 1/√(πλ)
MIN_WINDOW_FACTOR = 15.0
DEFAULT_WINDOW_FACTOR = 30.0

# nearest-BS distances drawn per FullPPP pool
FULL_PPP_POOL_SIZE = 20_000


class NetworkBatch(NamedTuple):
    """Many realizations stored flat; interferer k belongs to realization owner[k]."""

    serving: np.ndarray
    rz: np.ndarray
    dz: np.ndarray
    owner: np.ndarray
    density: float
    model: DistanceModel

    @property
    def size(self) -> int:
        return int(self.serving.size)

    def realization(self, index: int) -> NetworkRealization:
        mask = self.owner == index
        return NetworkRealization(
            serving_distance=float(self.serving[index]),
            rz=self.rz[mask],
            dz=self.dz[mask],
            density=self.density,
            model=self.model,
        )


def _check_density(density: float) -> None:
    if not density > 0:
        raise ParameterDomainError(f"density must be positive, got {density}")


def min_window(density: float) -> float:
    _check_density(density)
    return MIN_WINDOW_FACTOR / math.sqrt(math.pi * density)


def default_window(density: float) -> float:
    _check_density(density)
    return DEFAULT_WINDOW_FACTOR / math.sqrt(math.pi * density)


def check_window(density: float, window_radius: float) -> float:
    """Validate a window radius, returning it unchanged."""
    lower = min_window(density)
    if not window_radius >= lower:
        raise InvalidWindowError(
            f"window radius {window_radius:.4g} km below 15/sqrt(pi*lambda) = {lower:.4g} km"
        )
    return float(window_radius)


def sample_serving_distance(density: float, rng: RngStream, size: Optional[int] = None):
    """Distance to the nearest BS: density 2πλr·exp(-πλr²)."""
    _check_density(density)
    draws = rng.standard_exponential(size)
    r = np.sqrt(draws / (math.pi * density))
    return float(r) if size is None else r


def joint_rz_density(r1, r2, density: float):
    """Product density (2πλ)² r1 r2 exp(-πλ(r1²+r2²)) of two interferer distances."""
    _check_density(density)
    a = np.asarray(r1, dtype=float)
    b = np.asarray(r2, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ParameterDomainError("joint_rz_density needs non-negative distances")
    value = (2 * math.pi * density) ** 2 * a * b * np.exp(-math.pi * density * (a * a + b * b))
    return float(value) if np.ndim(value) == 0 else value


def uniform_rz_support(density: float) -> float:
    return 1.0 / math.sqrt(math.pi * density)


def rz_pdf(model: DistanceModel, r, density: float):
    """Marginal density of r_z for the models that have one."""
    _check_density(density)
    r = np.asarray(r, dtype=float)
    if model == DistanceModel.PPP_RAYLEIGH:
        value = 2 * math.pi * density * r * np.exp(-math.pi * density * r * r)
    elif model == DistanceModel.PPP_UNIFORM:
        inside = (r >= 0) & (r <= uniform_rz_support(density))
        value = np.where(inside, 2 * math.pi * density * r, 0.0)
    else:
        raise ParameterDomainError(f"{model.value} has no closed-form r_z density")
    return np.where(r < 0, 0.0, value)


def rz_ccdf(model: DistanceModel, r, density: float):
    _check_density(density)
    r = np.asarray(r, dtype=float)
    if model == DistanceModel.PPP_RAYLEIGH:
        value = np.exp(-math.pi * density * np.maximum(r, 0.0) ** 2)
    elif model == DistanceModel.PPP_UNIFORM:
        value = np.clip(1.0 - math.pi * density * np.maximum(r, 0.0) ** 2, 0.0, 1.0)
    else:
        raise ParameterDomainError(f"{model.value} has no closed-form r_z CCDF")
    return value


# ---------------------------------------------------------------------------
# Hexagonal lattice
# ---------------------------------------------------------------------------

def hexagon_side(density: float) -> float:
    """Side s of a regular hexagon of area 1/λ: (3√3/2)s² = 1/λ."""
    _check_density(density)
    return math.sqrt(2.0 / (3.0 * math.sqrt(3.0) * density))


def hexagonal_basis(density: float) -> np.ndarray:
    """Rows are the two lattice generators; spacing √3·s."""
    spacing = math.sqrt(3.0) * hexagon_side(density)
    return spacing * np.array([[1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])


def hexagon_cell_area(density: float) -> float:
    return abs(float(np.linalg.det(hexagonal_basis(density))))


def hexagonal_lattice(density: float, radius: float, include_origin: bool = False) -> np.ndarray:
    """BS positions of the lattice inside a disk, shape (M, 2), in a fixed order."""
    basis = hexagonal_basis(density)
    row_height = basis[1, 1]
    n = int(math.ceil(radius / row_height)) + 2
    idx = np.arange(-n, n + 1)
    i, j = np.meshgrid(idx, idx, indexing="ij")
    points = i.reshape(-1, 1) * basis[0] + j.reshape(-1, 1) * basis[1]
    dist = np.hypot(points[:, 0], points[:, 1])
    keep = dist <= radius
    if not include_origin:
        keep &= dist > 0
    return points[keep]


def uniform_in_hexagon(density: float, size, rng: RngStream) -> np.ndarray:
    """Points uniform in the origin's hexagonal cell, shape (*size, 2).

    A uniform point of the lattice parallelogram is folded onto its nearest
    corner; the fold maps the parallelogram onto the Voronoi cell and keeps the
    distribution uniform.
    """
    basis = hexagonal_basis(density)
    shape = (size,) if np.isscalar(size) else tuple(size)
    uv = rng.random(shape + (2,))
    points = uv @ basis
    corners = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float) @ basis
    diff = points[..., None, :] - corners
    nearest = np.argmin(np.einsum("...kc,...kc->...k", diff, diff), axis=-1)
    return points - corners[nearest]


# ---------------------------------------------------------------------------
# Interferer distance laws
# ---------------------------------------------------------------------------

def _uniform_disk(radius: float, count: int, rng: RngStream) -> np.ndarray:
    r = radius * np.sqrt(rng.random(count))
    angle = 2 * math.pi * rng.random(count)
    return np.column_stack((r * np.cos(angle), r * np.sin(angle)))


def voronoi_cell_distances(density: float, count: int, rng: RngStream, oversample: int = 8) -> np.ndarray:
    """Distances from one uniform UE per Voronoi cell to that cell's BS.

    BSs form a PPP in a disk, UEs are dropped uniformly and attached to their
    nearest BS through a k-d tree. The first UE of each cell is kept, and only
    cells whose BS lies in the inner half of the disk are used so that cells
    clipped by the boundary do not bias the result.
    """
    _check_density(density)
    collected = []
    total = 0
    while total < count:
        bs_target = max(4 * (count - total), 256)
        radius = math.sqrt(bs_target / (math.pi * density))
        n_bs = max(int(rng.poisson(density * math.pi * radius ** 2)), 2)
        stations = _uniform_disk(radius, n_bs, rng)
        ues = _uniform_disk(radius, oversample * n_bs, rng)
        _, owner = cKDTree(stations).query(ues)
        cells, first = np.unique(owner, return_index=True)
        central = np.hypot(stations[cells, 0], stations[cells, 1]) <= radius / 2.0
        offsets = ues[first[central]] - stations[cells[central]]
        distances = np.hypot(offsets[:, 0], offsets[:, 1])
        collected.append(distances[distances > 0])
        total += collected[-1].size
    return np.concatenate(collected)[:count]


def sample_rz(model: DistanceModel, density: float, size: int, rng: RngStream,
              pool: Optional[np.ndarray] = None) -> np.ndarray:
    """Draw ``size`` own-BS distances r_z under ``model``.

    Args:
        model: Distance model
        density: λ
        size: Number of draws
        rng: Random stream
        pool: FullPPP only; distances to resample from (built when omitted)
    """
    _check_density(density)
    if model == DistanceModel.PPP_RAYLEIGH:
        return np.sqrt(rng.standard_exponential(size) / (math.pi * density))
    if model == DistanceModel.PPP_UNIFORM:
        return uniform_rz_support(density) * np.sqrt(1.0 - rng.random(size))
    if model == DistanceModel.FULL_PPP:
        if pool is None:
            pool = voronoi_cell_distances(density, max(size, 1), rng)
        return pool[rng.integers(0, pool.size, size)]
    offsets = uniform_in_hexagon(density, size, rng)
    return np.hypot(offsets[..., 0], offsets[..., 1])


# ---------------------------------------------------------------------------
# Network snapshots
# ---------------------------------------------------------------------------

def sample_network(model: DistanceModel, density: float, window_radius: Optional[float],
                   rng: RngStream, interferer_density: Optional[float] = None) -> NetworkRealization:
    """One snapshot seen from the BS of interest.

    PPP models: interferers form a PPP(λ) in the window disk minus the serving
    disk, each carrying its own r_z. ``interferer_density`` replaces λ for the
    interferer process only. Hexagonal: one UE uniform in every lattice cell of
    the window.

    Raises:
        InvalidWindowError: If the window is below 15/√(πλ)
    """
    return sample_network_batch(model, density, window_radius, 1, rng,
                                interferer_density=interferer_density).realization(0)


def sample_network_batch(model: DistanceModel, density: float, window_radius: Optional[float],
                         count: int, rng: RngStream, pool: Optional[np.ndarray] = None,
                         interferer_density: Optional[float] = None) -> NetworkBatch:
    """``count`` independent snapshots, vectorised. Same law as :func:`sample_network`."""
    if count < 1:
        raise ParameterDomainError("count must be at least 1")
    window = check_window(density, default_window(density) if window_radius is None else window_radius)

    if model == DistanceModel.HEXAGONAL:
        if interferer_density not in (None, density):
            raise ParameterDomainError("the hexagonal lattice carries exactly one UE per cell")
        return _hexagonal_batch(density, window, count, rng)

    serving = sample_serving_distance(density, rng, size=count)
    return sample_interferers(model, density, window, serving, rng, pool=pool, interferer_density=interferer_density)


def sample_interferers(model: DistanceModel, density: float, window_radius: float, serving: np.ndarray,
                       rng: RngStream, pool: Optional[np.ndarray] = None,
                       interferer_density: Optional[float] = None) -> NetworkBatch:
    """PPP interferers around given serving distances (one realization per entry).

    Points with d_z <= r are removed, which is the nearest-BS exclusion. The
    interferer intensity is ``interferer_density`` when given, else ``density``;
    r_z always follows the BS density.
    """
    if model == DistanceModel.HEXAGONAL:
        raise ParameterDomainError("hexagonal interferers are tied to the lattice; use sample_network_batch")
    window = check_window(density, window_radius)
    intensity = density if interferer_density is None else interferer_density
    _check_density(intensity)
    serving = np.asarray(serving, dtype=float)
    count = serving.size
    counts = rng.poisson(intensity * math.pi * window ** 2, size=count)
    owner = np.repeat(np.arange(count), counts)
    dz = window * np.sqrt(rng.random(owner.size))
    keep = dz > serving[owner]
    owner, dz = owner[keep], dz[keep]
    if model == DistanceModel.FULL_PPP and pool is None:
        pool = voronoi_cell_distances(density, FULL_PPP_POOL_SIZE, rng)
    rz = sample_rz(model, density, owner.size, rng, pool=pool)
    logger.debug(f"sampled {count} {model.value} snapshots with {owner.size} interferers")
    return NetworkBatch(serving, rz, dz, owner, density, model)


def _hexagonal_batch(density: float, window: float, count: int, rng: RngStream) -> NetworkBatch:
    stations = hexagonal_lattice(density, window)
    serving_offsets = uniform_in_hexagon(density, count, rng)
    serving = np.hypot(serving_offsets[:, 0], serving_offsets[:, 1])
    offsets = uniform_in_hexagon(density, (count, stations.shape[0]), rng)
    positions = stations[None, :, :] + offsets
    rz = np.hypot(offsets[..., 0], offsets[..., 1]).ravel()
    dz = np.hypot(positions[..., 0], positions[..., 1]).ravel()
    owner = np.repeat(np.arange(count), stations.shape[0])
    return NetworkBatch(serving, rz, dz, owner, density, DistanceModel.HEXAGONAL)
