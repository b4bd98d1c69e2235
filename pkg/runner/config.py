"""Scenario files and presets.

A scenario file is flat TOML: the sections ``[uplink]``, ``[fso]``, ``[irs]``,
``[sweep]`` and ``[output]``, each holding ``key = value`` lines only::

    [uplink]
    epsilon = 0.8

    [sweep]
    variable = "threshold_db"
    start = -10.0
    stop = 20.0
    step = 1.0
    mc_budget = 100000
    seed = 7

Values are layered: the default presets named in ``data/presets.json``, then
any ``--preset`` fragments in order, then the file itself.
"""

import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

import logger
from errors import ConfigError, UnknownPresetError
from models import DistanceModel, FsoLinkSpec, MalagaParams, PathlossParams, PointingParams, UplinkConfig
from utils import config_hash, load_presets

SECTIONS = ("uplink", "fso", "irs", "sweep", "output")

MIN_MC_BUDGET = 1000


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class UplinkSection(_Section):
    density: float = Field(gt=0)
    alpha: float = Field(gt=2)
    epsilon: float = Field(ge=0, le=1)
    mu: float = Field(gt=0)
    bandwidth_hz: float = Field(300e6, gt=0)
    noise_power: Optional[float] = Field(None, gt=0)
    distance_model: DistanceModel = DistanceModel.PPP_RAYLEIGH
    interference: bool = True
    window_radius: Optional[float] = Field(None, gt=0)
    ue_density: Optional[float] = Field(None, gt=0)

    def to_config(self, **overrides) -> UplinkConfig:
        """UplinkConfig; noise from the bandwidth unless noise_power is set."""
        values = self.model_dump(exclude={"bandwidth_hz"})
        if values["noise_power"] is None:
            values["noise_power"] = UplinkConfig.noise_power_for_bandwidth(self.bandwidth_hz)
        values.update(overrides)
        return UplinkConfig(**values)


class FsoSection(_Section):
    # pathloss
    aperture_radius: float = Field(gt=0)
    divergence: float = Field(gt=0)
    wavelength: float = Field(gt=0)
    link_length_km: float = Field(gt=0)
    attenuation_db_per_km: float = Field(ge=0)
    cn2: float = Field(gt=0)
    # turbulence
    nu: float = Field(gt=0)
    kappa: int = Field(ge=1)
    b0: float = Field(ge=0)
    rho: float = Field(ge=0, le=1)
    omega: float = Field(ge=0)
    theta_a: float = 0.0
    theta_b: float = 0.0
    # pointing
    beam_waist: float = Field(gt=0)
    jitter_sigma: float = Field(gt=0)
    jitter_sigma_y: Optional[float] = Field(None, gt=0)
    boresight_x: float = 0.0
    boresight_y: float = 0.0
    # transmit optics (beamwaist sweep)
    beam_expansion: float = Field(1.0, gt=0)
    # receiver
    detection: Literal[1, 2] = 2
    noise_var: float = Field(gt=0)
    average_snr_db: Optional[float] = None

    def malaga(self) -> MalagaParams:
        return MalagaParams(nu=self.nu, kappa=self.kappa, b0=self.b0, rho=self.rho, omega=self.omega,
                            theta_a=self.theta_a, theta_b=self.theta_b)

    def pathloss(self) -> PathlossParams:
        return PathlossParams(aperture_radius=self.aperture_radius, divergence=self.divergence,
                              link_length_km=self.link_length_km, attenuation_db_per_km=self.attenuation_db_per_km,
                              cn2=self.cn2, wavelength=self.wavelength)

    def pointing(self, beam_waist: Optional[float] = None, jitter_sigma: Optional[float] = None) -> PointingParams:
        sigma_x = self.jitter_sigma if jitter_sigma is None else jitter_sigma
        sigma_y = sigma_x if self.jitter_sigma_y is None or jitter_sigma is not None else self.jitter_sigma_y
        return PointingParams(mu_x=self.boresight_x, mu_y=self.boresight_y, sigma_x=sigma_x, sigma_y=sigma_y,
                              aperture_radius=self.aperture_radius,
                              beam_waist=self.beam_waist if beam_waist is None else beam_waist)

    def to_spec(self, malaga: Optional[MalagaParams] = None, **pointing_overrides) -> FsoLinkSpec:
        """FsoLinkSpec; σ²_RD is re-derived when average_snr_db is set."""
        spec = FsoLinkSpec(malaga=malaga or self.malaga(), pointing=self.pointing(**pointing_overrides),
                           pathloss=self.pathloss(), detection=self.detection, noise_var=self.noise_var)
        if self.average_snr_db is not None:
            spec = spec.with_average_snr(self.average_snr_db)
        return spec


class IrsSection(_Section):
    sizes: List[int] = Field(min_length=1)
    instances: int = Field(200, ge=1)
    noise_var: float = Field(0.01, gt=0)
    interferers: int = Field(1, ge=0)
    interferer_weight: Optional[float] = Field(0.1, gt=0)
    weights_from_uplink: bool = False
    policy: Literal["strongest", "nullspace"] = "strongest"
    # DF baseline: SNR per hop in dB; None uses the [uplink]/[fso] scenario as is
    df_uplink_snr_db: Optional[float] = None
    df_backhaul_snr_db: Optional[float] = None

    @field_validator("sizes")
    @classmethod
    def _check_sizes(cls, value: List[int]) -> List[int]:
        if any(n < 1 for n in value):
            raise ValueError("IRS sizes must be positive")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("IRS sizes must be strictly increasing")
        return value


class SweepSection(_Section):
    variable: Optional[str] = None
    grid: Optional[List[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    step: Optional[float] = Field(None, gt=0)
    threshold_db: float = 0.0
    mc_budget: int = Field(10_000, ge=MIN_MC_BUDGET)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    jitter_ratios: List[float] = Field([3.5, 4.0, 4.5, 5.0], min_length=1)
    # beamwaist: (I_l·E[I_a])^r/σ² before pointing loss, held fixed across the waist grid
    transmit_snr_db: float = 100.0
    half_duplex: bool = False

    @model_validator(mode="after")
    def _check_grid(self):
        ranged = [v is not None for v in (self.start, self.stop, self.step)]
        if any(ranged) and not all(ranged):
            raise ValueError("start, stop and step must be given together")
        if all(ranged) and self.grid is not None:
            raise ValueError("give either grid or start/stop/step, not both")
        if all(ranged) and self.stop < self.start:
            raise ValueError("stop must not be below start")
        if self.grid is not None:
            if len(self.grid) == 0:
                raise ValueError("sweep grid is empty")
            if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
                raise ValueError("sweep grid must be strictly increasing")
            if not all(math.isfinite(v) for v in self.grid):
                raise ValueError("sweep grid must be finite")
        return self

    def values(self) -> Optional[List[float]]:
        """The explicit grid, the expanded range, or None when neither is set."""
        if self.grid is not None:
            return list(self.grid)
        if self.start is None:
            return None
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [float(v) for v in np.round(self.start + self.step * np.arange(count), 12)]


class OutputSection(_Section):
    path: Optional[str] = None


class ScenarioConfig(BaseModel):
    """Validated scenario: one section per concern plus the sweep definition."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    uplink: UplinkSection
    fso: FsoSection
    irs: IrsSection
    sweep: SweepSection = SweepSection()
    output: OutputSection = OutputSection()

    def canonical(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    def digest(self) -> str:
        return config_hash(self.canonical())

    def with_overrides(self, section: str, **values) -> "ScenarioConfig":
        """A re-validated copy with some values of one section replaced."""
        data = self.canonical()
        data[section].update(values)
        return validate_scenario(data)


class PresetFragment(BaseModel):
    """Named, immutable group of values for one scenario section."""

    model_config = ConfigDict(frozen=True)

    name: str
    section: str
    description: str = ""
    values: Dict[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)


def _resolve_name(store: Mapping[str, Any], name: str) -> str:
    return store.get("aliases", {}).get(name, name)


def preset(name: str) -> PresetFragment:
    """Look up a preset by name or alias.

    Raises:
        UnknownPresetError: If the name is not in the store
    """
    store = load_presets()
    key = _resolve_name(store, name)
    entry = store.get("presets", {}).get(key)
    if entry is None:
        raise UnknownPresetError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    if entry.get("section") not in SECTIONS:
        raise ConfigError(f"preset {key!r} targets unknown section {entry.get('section')!r}")
    return PresetFragment(name=key, section=entry["section"], description=entry.get("description", ""),
                          values=dict(entry.get("values", {})))


def list_presets() -> List[str]:
    return sorted(load_presets().get("presets", {}))


def table_iv_reference() -> List[Dict[str, Any]]:
    """Reference rows (jitter ratio, optimum waist in cm, ω_L/a) for the beam-waist sweep."""
    return list(load_presets().get("table_iv", []))


def parse_scenario_text(text: str, source: str = "<string>") -> Dict[str, Dict[str, Any]]:
    """Parse flat-section TOML into {section: {key: value}}.

    Raises:
        ConfigError: On syntax errors, unknown sections, top-level keys or nested tables
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    sections: Dict[str, Dict[str, Any]] = {}
    for name, body in data.items():
        if not isinstance(body, dict):
            raise ConfigError(f"{source}: key {name!r} outside a section",
                              [{"field": name, "message": "keys must live in a [section]"}])
        if name not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{name}]",
                              [{"field": name, "message": f"expected one of {', '.join(SECTIONS)}"}])
        for key, value in body.items():
            if isinstance(value, dict):
                raise ConfigError(f"{source}: nested table [{name}.{key}] is not allowed",
                                  [{"field": f"{name}.{key}", "message": "sections are flat"}])
        sections[name] = dict(body)
    return sections


def load_scenario_file(path: str) -> Dict[str, Dict[str, Any]]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenario_text(text, source=path)


def validate_scenario(data: Mapping[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError.from_validation_error(exc, "scenario") from exc


def build_scenario(raw: Optional[Mapping[str, Mapping[str, Any]]] = None,
                   presets: Sequence[str] = ()) -> ScenarioConfig:
    """Layer default presets, named presets and raw section values, then validate.

    Args:
        raw: Section values, e.g. from :func:`load_scenario_file` or an HTTP body
        presets: Extra preset names applied after the defaults

    Returns:
        Validated ScenarioConfig
    """
    store = load_presets()
    merged: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
    for name in list(store.get("defaults", [])) + list(presets):
        fragment = preset(name)
        merged[fragment.section].update(fragment.values)
    for section, values in (raw or {}).items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section {section!r}",
                              [{"field": section, "message": f"expected one of {', '.join(SECTIONS)}"}])
        if values is None:
            continue
        merged[section].update(values)
    scenario = validate_scenario(merged)
    logger.debug(f"scenario {scenario.digest()[:12]} built from presets {list(presets)}")
    return scenario
