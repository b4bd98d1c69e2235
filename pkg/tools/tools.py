from typing import Dict, List, Any, Optional
import sys
import os

# Add parent directory to sys.path to access runner
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import importlib

import numpy as np

# experiment functions are named here and imported on lookup
EXPERIMENTS_MODULE = "runner.experiments"


def _grid(start: float, stop: float, step: float) -> List[float]:
    count = int(round((stop - start) / step)) + 1
    return [float(v) for v in np.round(start + step * np.arange(count), 10)]


# Define default experiment tools
DEFAULT_FUNCTION_TOOLS = [
    {
        "name": "coverage",
        "description": "Uplink coverage P[SINR > threshold], analytic and Monte Carlo with 95% Wilson intervals",
        "variables": ["threshold_db", "density", "ue_density", "epsilon", "alpha"],
        "default_variable": "threshold_db",
        "default_grid": _grid(-10.0, 20.0, 1.0),
        "columns": ["threshold_db", "coverage_analytic", "coverage_mc", "ci_low", "ci_high"],
        "function": "run_coverage"
    },
    {
        "name": "rate",
        "description": "Uplink ergodic rate in nats/s/Hz: direct integral, coverage integral and Monte Carlo",
        "variables": ["epsilon", "alpha", "density", "ue_density"],
        "default_variable": "epsilon",
        "default_grid": _grid(0.0, 1.0, 0.2),
        "columns": ["<variable>", "rate_analytic", "rate_from_coverage", "rate_mc", "rate_mc_stderr"],
        "function": "run_rate"
    },
    {
        "name": "fso",
        "description": "FSO backhaul outage and ergodic rate (exact, bounds, high-SNR) against the average SNR",
        "variables": ["mu_db"],
        "default_variable": "mu_db",
        "default_grid": _grid(-10.0, 40.0, 5.0),
        "columns": ["mu_db", "detection", "outage_analytic", "outage_mc", "rate_exact", "rate_low", "rate_upper",
                    "rate_high_moment", "rate_high_residue", "rate_mc", "average_snr_db"],
        "function": "run_fso"
    },
    {
        "name": "hybrid",
        "description": "Decode-and-forward RF/FSO coverage against the threshold, or rate against the backhaul SNR",
        "variables": ["threshold_db", "mu_db"],
        "default_variable": "threshold_db",
        "default_grid": _grid(-10.0, 20.0, 1.0),
        "columns": ["threshold_db", "coverage_uplink", "coverage_backhaul", "coverage_analytic", "coverage_mc",
                    "ci_low", "ci_high"],
        "function": "run_hybrid"
    },
    {
        "name": "irs",
        "description": "IRS spectral efficiency per phase design and surface size, against the DF baseline",
        "variables": ["N"],
        "default_variable": "N",
        "default_grid": None,
        "columns": ["N", "design", "se", "residual_interference", "df_rate"],
        "function": "run_irs"
    },
    {
        "name": "diversity",
        "description": "Per-hop and end-to-end outage against SNR with the fitted diversity order",
        "variables": ["snr_db"],
        "default_variable": "snr_db",
        "default_grid": _grid(0.0, 80.0, 5.0),
        "columns": ["snr_db", "outage_uplink", "outage_backhaul", "outage_hybrid"],
        "function": "run_diversity"
    },
    {
        "name": "beamwaist",
        "description": "Backhaul outage against the transmit beam waist for each jitter ratio",
        "variables": ["waist_cm"],
        "default_variable": "waist_cm",
        "default_grid": _grid(0.1, 10.0, 0.1),
        "columns": ["jitter_ratio", "waist_cm", "beam_radius_cm", "g2", "outage", "optimum", "table_iv_waist_cm",
                    "table_iv_wl_over_a"],
        "function": "run_beamwaist"
    },
    {
        "name": "distances",
        "description": "CCDF of the serving distance and of r_z under every distance model",
        "variables": ["r_km"],
        "default_variable": "r_km",
        "default_grid": _grid(0.05, 3.0, 0.05),
        "columns": ["r_km", "model", "ccdf_analytic", "ccdf_mc"],
        "function": "run_distances"
    }
]


def get_available_tools() -> List[Dict[str, Any]]:
    """
    Get the list of available experiments.

    Returns:
        List[Dict[str, Any]]: Experiment definitions without their function references
    """
    # Drop the function reference so the entries serialize to JSON
    serializable_tools = []
    for tool in DEFAULT_FUNCTION_TOOLS:
        serializable_tool = {k: v for k, v in tool.items() if k != 'function'}
        serializable_tools.append(serializable_tool)

    return serializable_tools


def get_tool_by_name(name: str) -> Optional[Dict[str, Any]]:
    """
    Get an experiment by its subcommand name.

    Args:
        name (str): Subcommand name

    Returns:
        Optional[Dict[str, Any]]: Experiment definition with its function resolved, or None if unknown
    """
    for tool in DEFAULT_FUNCTION_TOOLS:
        if tool["name"] == name:
            module = importlib.import_module(EXPERIMENTS_MODULE)
            return {**tool, "function": getattr(module, tool["function"])}
    return None
