"""Experiment subcommands: one CSV table per (scenario, seed).

Every subcommand sweeps one variable over a grid. Grid point k draws its
random numbers from ``RngStream(seed, stream_id=k)``, so rows are reproducible
one by one and independent of the worker count.
"""

import math
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

import logger
from errors import ConfigError, FsoBackhaulError
from executor import MonteCarloExecutor
from models import CsvTable, DistanceModel, FsoLinkSpec, UplinkConfig
from runner.config import ScenarioConfig, build_scenario, list_presets, preset, table_iv_reference
from tools import fso_channel, geometry, hybrid_df, irs, uplink_rf
from utils import VERSION
from utils.numerics import RngStream, db_to_linear, unimodal_minimum

Rows = List[List[Any]]
SweepResult = Tuple[List[str], Rows, Dict[str, Any]]

# relative distance allowed between a beam-waist optimum and its reference value
BEAMWAIST_TOLERANCE = 0.25

__all__ = ["run", "preset", "list_presets", "build_scenario"]


def _stream(config: ScenarioConfig, index: int) -> RngStream:
    return RngStream(config.sweep.seed, stream_id=index)


def _linear(value_db: float) -> float:
    return float(db_to_linear(value_db))


def _uplink_has_analytic(cfg: UplinkConfig) -> bool:
    return not cfg.interference or cfg.distance_model.has_analytic_form


def _uplink_snr_config(config: ScenarioConfig, snr_db: float) -> UplinkConfig:
    """Noise-limited uplink whose mean received power over noise, (1/μ)/σ², is ``snr_db``."""
    mu = config.uplink.mu
    return config.uplink.to_config(interference=False, noise_power=1.0 / (mu * _linear(snr_db)))


# ---------------------------------------------------------------------------
# coverage / rate
# ---------------------------------------------------------------------------

def run_coverage(config: ScenarioConfig, variable: str, grid: Sequence[float],
                 executor: MonteCarloExecutor) -> SweepResult:
    budget = config.sweep.mc_budget
    threshold_db = config.sweep.threshold_db
    rows: Rows = []
    if variable == "threshold_db":
        cfg = config.uplink.to_config()
        mc = uplink_rf.coverage_mc(cfg, grid, budget, _stream(config, 0), executor)
        analytic = uplink_rf.coverage_curve_analytic(cfg, grid).coverage if _uplink_has_analytic(cfg) else None
        for i, t in enumerate(grid):
            rows.append([t, None if analytic is None else analytic[i], mc.coverage[i], mc.ci_low[i], mc.ci_high[i]])
        return ["threshold_db", "coverage_analytic", "coverage_mc", "ci_low", "ci_high"], rows, {}

    for i, value in enumerate(grid):
        cfg = config.uplink.to_config(**{variable: value})
        mc = uplink_rf.coverage_mc(cfg, [threshold_db], budget, _stream(config, i), executor)
        analytic = (
            uplink_rf.coverage_analytic(cfg, _linear(threshold_db)) if _uplink_has_analytic(cfg) else None
        )
        rows.append([value, threshold_db, analytic, mc.coverage[0], mc.ci_low[0], mc.ci_high[0]])
    return [variable, "threshold_db", "coverage_analytic", "coverage_mc", "ci_low", "ci_high"], rows, {}


def run_rate(config: ScenarioConfig, variable: str, grid: Sequence[float],
             executor: MonteCarloExecutor) -> SweepResult:
    rows: Rows = []
    for i, value in enumerate(grid):
        cfg = config.uplink.to_config(**{variable: value})
        analytic = from_coverage = None
        if _uplink_has_analytic(cfg):
            analytic = uplink_rf.rate_analytic(cfg)
            from_coverage = uplink_rf.rate_from_coverage(cfg)
        mean, stderr = uplink_rf.rate_mc(cfg, config.sweep.mc_budget, _stream(config, i), executor)
        rows.append([value, analytic, from_coverage, mean, stderr])
    return [variable, "rate_analytic", "rate_from_coverage", "rate_mc", "rate_mc_stderr"], rows, {}


# ---------------------------------------------------------------------------
# fso
# ---------------------------------------------------------------------------

def _fso_chunk(spec: FsoLinkSpec, threshold: float, varpi: float, size: int, rng: RngStream) -> np.ndarray:
    snr = fso_channel.snr_sample(spec, rng, size)
    return np.array([float(np.count_nonzero(snr < threshold)), math.fsum(np.log1p(varpi * snr))])


def run_fso(config: ScenarioConfig, variable: str, grid: Sequence[float],
            executor: MonteCarloExecutor) -> SweepResult:
    base = config.fso.to_spec()
    threshold = _linear(config.sweep.threshold_db)
    budget = config.sweep.mc_budget
    rows: Rows = []
    for i, mu_db in enumerate(grid):
        spec = base.with_average_snr(mu_db)
        varpi = spec.varpi
        below, log_sum = executor.sum(partial(_fso_chunk, spec, threshold, varpi), budget, _stream(config, i))
        rows.append([
            mu_db,
            spec.detection,
            fso_channel.outage_probability(spec, threshold),
            below / budget,
            fso_channel.fso_rate_exact(spec),
            fso_channel.fso_rate_low(spec),
            fso_channel.fso_rate_upper(spec),
            fso_channel.fso_rate_high(spec, variant="moment"),
            fso_channel.fso_rate_high(spec, variant="residue"),
            log_sum / budget,
            10.0 * math.log10(fso_channel.average_snr(spec)),
        ])
    columns = ["mu_db", "detection", "outage_analytic", "outage_mc", "rate_exact", "rate_low", "rate_upper",
               "rate_high_moment", "rate_high_residue", "rate_mc", "average_snr_db"]
    extras = {
        "rytov_variance": f"{fso_channel.rytov_variance(base.pathloss):.6g}",
        "scintillation_index": f"{base.scintillation_index:.6g}",
        "pathloss_gain": f"{fso_channel.pathloss_gain(base.pathloss):.6g}",
    }
    return columns, rows, extras


# ---------------------------------------------------------------------------
# hybrid
# ---------------------------------------------------------------------------

def run_hybrid(config: ScenarioConfig, variable: str, grid: Sequence[float],
               executor: MonteCarloExecutor) -> SweepResult:
    cfg = config.uplink.to_config()
    analytic_ok = _uplink_has_analytic(cfg)
    budget = config.sweep.mc_budget
    half_duplex = config.sweep.half_duplex
    rows: Rows = []

    if variable == "threshold_db":
        spec = config.fso.to_spec()
        mc = hybrid_df.hybrid_coverage_mc(cfg, spec, grid, budget, _stream(config, 0), executor)
        for i, t in enumerate(grid):
            threshold = _linear(t)
            backhaul = float(fso_channel.snr_ccdf(spec, threshold))
            uplink = uplink_rf.coverage_analytic(cfg, threshold) if analytic_ok else None
            product = None if uplink is None else uplink * backhaul
            rows.append([t, uplink, backhaul, product, mc.coverage[i], mc.ci_low[i], mc.ci_high[i]])
        columns = ["threshold_db", "coverage_uplink", "coverage_backhaul", "coverage_analytic", "coverage_mc",
                   "ci_low", "ci_high"]
        return columns, rows, {}

    base = config.fso.to_spec()
    uplink_rate = uplink_rf.rate_analytic(cfg) if analytic_ok else None
    pre_log = 0.5 if half_duplex else 1.0
    for i, mu_db in enumerate(grid):
        spec = base.with_average_snr(mu_db)
        backhaul_rate = fso_channel.fso_rate_exact(spec)
        analytic = None if uplink_rate is None else pre_log * min(uplink_rate, backhaul_rate)
        mc = hybrid_df.hybrid_rate_mc(cfg, spec, budget, _stream(config, i), half_duplex=half_duplex,
                                      executor=executor)
        rows.append([mu_db, uplink_rate, backhaul_rate, analytic, mc.rate])
    return ["mu_db", "rate_uplink", "rate_backhaul", "rate_analytic", "rate_mc"], rows, {"half_duplex": half_duplex}


# ---------------------------------------------------------------------------
# irs
# ---------------------------------------------------------------------------

def df_baseline_rate(config: ScenarioConfig, executor: MonteCarloExecutor) -> float:
    """End-to-end DF rate the IRS is compared against.

    Each hop runs at the SNR set in ``[irs]`` when given, otherwise at the
    ``[uplink]`` / ``[fso]`` scenario values.
    """
    section = config.irs
    if section.df_uplink_snr_db is not None:
        cfg = _uplink_snr_config(config, section.df_uplink_snr_db)
    else:
        cfg = config.uplink.to_config()
    spec = config.fso.to_spec()
    if section.df_backhaul_snr_db is not None:
        spec = spec.with_average_snr(section.df_backhaul_snr_db)
    half_duplex = config.sweep.half_duplex
    if _uplink_has_analytic(cfg):
        return hybrid_df.hybrid_rate(cfg, spec, half_duplex=half_duplex)
    result = hybrid_df.hybrid_rate_mc(cfg, spec, config.sweep.mc_budget, _stream(config, 0),
                                      half_duplex=half_duplex, executor=executor)
    return float(result.rate)


def run_irs(config: ScenarioConfig, variable: str, grid: Sequence[float],
            executor: MonteCarloExecutor) -> SweepResult:
    section = config.irs
    sizes = [int(n) for n in grid]
    if any(n != v or n < 1 for n, v in zip(sizes, grid)):
        raise ConfigError("IRS sizes must be positive integers", [{"field": "sweep.grid", "message": "integers only"}])
    df_rate = df_baseline_rate(config, executor)
    weights = None
    if section.interferers and section.interferer_weight is not None and not section.weights_from_uplink:
        weights = [section.interferer_weight] * section.interferers
    uplink = config.uplink.to_config() if section.weights_from_uplink else None
    comparison = irs.se_comparison(
        sizes,
        section.instances,
        RngStream(config.sweep.seed, stream_id=0),
        noise_var=section.noise_var,
        interferers=section.interferers,
        weights=weights,
        uplink=uplink,
        df_rate=df_rate,
        policy=section.policy,
    )
    columns = ["N", "design", "se", "residual_interference", "df_rate"]
    rows = [[r["N"], r["design"], r["se"], r["residual_interference"], df_rate] for r in comparison.rows]
    extras = {"min_elements": "none" if comparison.min_elements is None else comparison.min_elements}
    return columns, rows, extras


# ---------------------------------------------------------------------------
# diversity
# ---------------------------------------------------------------------------

def run_diversity(config: ScenarioConfig, variable: str, grid: Sequence[float],
                  executor: MonteCarloExecutor) -> SweepResult:
    threshold = _linear(config.sweep.threshold_db)
    base = config.fso.to_spec()
    if config.uplink.interference:
        logger.info("diversity sweep uses the interference-free uplink")
    rows: Rows = []
    for snr_db in grid:
        cfg = _uplink_snr_config(config, snr_db)
        spec = base.with_average_snr(snr_db)
        up = uplink_rf.outage_analytic(cfg, threshold)
        bh = fso_channel.outage_probability(spec, threshold)
        rows.append([snr_db, up, bh, up + bh - up * bh])

    formula, effective = hybrid_df.predicted_diversity(base)
    backhaul_formula, backhaul_effective = fso_channel.predicted_diversity(base)
    estimate = hybrid_df.diversity_estimate(
        [r[0] for r in rows], [r[3] for r in rows], predicted=effective, predicted_formula=formula
    )
    extras = {
        "slope": f"{estimate.slope:.6g}",
        "fit_low_db": f"{estimate.fit_range_db[0]:g}",
        "fit_high_db": f"{estimate.fit_range_db[1]:g}",
        "predicted_effective": f"{effective:.6g}",
        "predicted_formula": f"{formula:.6g}",
        "backhaul_predicted_effective": f"{backhaul_effective:.6g}",
        "backhaul_predicted_formula": f"{backhaul_formula:.6g}",
    }
    return ["snr_db", "outage_uplink", "outage_backhaul", "outage_hybrid"], rows, extras


# ---------------------------------------------------------------------------
# beamwaist
# ---------------------------------------------------------------------------

def run_beamwaist(config: ScenarioConfig, variable: str, grid: Sequence[float],
                  executor: MonteCarloExecutor) -> SweepResult:
    """Outage against the transmit beam waist ω0 for each jitter ratio σ_s/a.

    The laser waist is magnified by ``beam_expansion`` and spread by diffraction
    and turbulence over the link. σ²_RD is fixed by ``transmit_snr_db`` so that
    only the pointing loss and the jitter tolerance change along the grid. Each
    ratio's curve is checked for a unique interior minimum, which is compared
    with the tabulated optimum for that ratio when there is one.
    """
    section = config.fso
    malaga = section.malaga()
    pathloss = section.pathloss()
    threshold = _linear(config.sweep.threshold_db)
    detection = section.detection
    noise_var = (pathloss.gain * malaga.mean) ** detection / _linear(config.sweep.transmit_snr_db)
    reference = {round(r["jitter_ratio"], 6): r for r in table_iv_reference()}
    rows: Rows = []
    extras: Dict[str, Any] = {}
    agreement = True
    for ratio in config.sweep.jitter_ratios:
        sigma = ratio * section.aperture_radius
        ref = reference.get(round(ratio, 6), {})
        block = []
        for waist_cm in grid:
            radius = fso_channel.long_term_beam_radius(waist_cm / 100.0, section.link_length_km, section.wavelength,
                                                       section.cn2, section.beam_expansion)
            spec = section.to_spec(malaga=malaga, beam_waist=radius, jitter_sigma=sigma).with_noise(noise_var)
            outage = fso_channel.outage_probability(spec, threshold)
            block.append([ratio, waist_cm, 100.0 * radius, spec.pointing.g2, outage])

        best = unimodal_minimum([b[4] for b in block])
        key = f"{ratio:g}"
        if best is None:
            agreement = False
            logger.warning(f"jitter ratio {ratio}: outage has no unique interior minimum on the waist grid")
        else:
            optimum = block[best][1]
            extras[f"optimum_cm_{key}"] = f"{optimum:g}"
            extras[f"optimum_g2_{key}"] = f"{block[best][3]:.6g}"
            if ref.get("waist_cm") is not None:
                deviation = optimum / ref["waist_cm"] - 1.0
                extras[f"deviation_{key}"] = f"{deviation:.6g}"
                if abs(deviation) > BEAMWAIST_TOLERANCE:
                    agreement = False
                    logger.warning(f"jitter ratio {ratio}: optimum w0={optimum} cm is {deviation:+.0%} "
                                   f"from the reference {ref['waist_cm']} cm")
            logger.info(f"jitter ratio {ratio}: outage minimum at w0={optimum} cm")
        for k, row in enumerate(block):
            rows.append(row + [int(k == best), ref.get("waist_cm"), ref.get("wl_over_a")])
    extras["reference_agreement"] = str(agreement)
    columns = ["jitter_ratio", "waist_cm", "beam_radius_cm", "g2", "outage", "optimum", "table_iv_waist_cm",
               "table_iv_wl_over_a"]
    return columns, rows, extras


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def run_distances(config: ScenarioConfig, variable: str, grid: Sequence[float],
                  executor: MonteCarloExecutor) -> SweepResult:
    """Empirical and closed-form CCDFs of the serving distance and of r_z per model."""
    density = config.uplink.density
    budget = config.sweep.mc_budget
    r = np.asarray(grid, dtype=float)
    rows: Rows = []

    serving = geometry.sample_serving_distance(density, _stream(config, 0), size=budget)
    serving_ccdf = np.exp(-math.pi * density * r * r)
    for k, value in enumerate(r):
        rows.append([float(value), "serving", float(serving_ccdf[k]), float(np.mean(serving > value))])

    for index, model in enumerate(DistanceModel, start=1):
        samples = geometry.sample_rz(model, density, budget, _stream(config, index))
        analytic = geometry.rz_ccdf(model, r, density) if model.has_analytic_form else None
        for k, value in enumerate(r):
            rows.append([
                float(value),
                model.value,
                None if analytic is None else float(analytic[k]),
                float(np.mean(samples > value)),
            ])
    return ["r_km", "model", "ccdf_analytic", "ccdf_mc"], rows, {}


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def resolve_sweep(config: ScenarioConfig, tool: Dict[str, Any]) -> Tuple[str, List[float]]:
    """Sweep variable and grid for a subcommand, falling back to its defaults."""
    variable = config.sweep.variable or tool["default_variable"]
    if variable not in tool["variables"]:
        raise ConfigError(
            f"{tool['name']} cannot sweep {variable!r}",
            [{"field": "sweep.variable", "message": f"expected one of {', '.join(tool['variables'])}"}],
        )
    grid = config.sweep.values()
    if grid is None:
        if variable == "N":
            grid = [float(n) for n in config.irs.sizes]
        elif variable == tool["default_variable"]:
            grid = list(tool["default_grid"])
        else:
            raise ConfigError(f"sweep over {variable!r} needs a grid",
                              [{"field": "sweep.grid", "message": "required for this variable"}])
    if not grid:
        raise ConfigError("sweep grid is empty", [{"field": "sweep.grid", "message": "empty"}])
    return variable, grid


def run(subcommand: str, config: ScenarioConfig, executor: Optional[MonteCarloExecutor] = None) -> CsvTable:
    """Run one experiment.

    Args:
        subcommand: One of the registered experiment names
        config: Validated scenario
        executor: Monte Carlo executor; FSO_WORKERS decides the worker count when None

    Returns:
        CsvTable with the provenance footer (seed, version, config_hash, subcommand)

    Raises:
        ConfigError: Unknown subcommand, bad sweep, or values rejected by a model
        QuadratureError, InsufficientDecayError: Numerical failures
    """
    from tools.tools import get_tool_by_name

    tool = get_tool_by_name(subcommand)
    if tool is None:
        raise ConfigError(f"unknown subcommand {subcommand!r}",
                          [{"field": "subcommand", "message": "not a registered experiment"}])
    variable, grid = resolve_sweep(config, tool)
    executor = executor or MonteCarloExecutor()
    logger.info(f"running {subcommand} over {variable} ({len(grid)} points, seed {config.sweep.seed})")
    function: Callable[..., SweepResult] = tool["function"]
    try:
        columns, rows, extras = function(config, variable, grid, executor)
    except ValidationError as exc:
        raise ConfigError.from_validation_error(exc, f"{subcommand} sweep over {variable}") from exc
    except FsoBackhaulError:
        logger.error(f"{subcommand} failed")
        raise

    footer = {
        "seed": str(config.sweep.seed),
        "version": VERSION,
        "config_hash": config.digest(),
        "subcommand": subcommand,
    }
    footer.update({key: str(value) for key, value in extras.items()})
    return CsvTable(columns=columns, rows=rows, footer=footer)
