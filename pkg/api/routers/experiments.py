from fastapi import APIRouter, HTTPException, Path
from fastapi.responses import PlainTextResponse
from typing import List
import os
import sys

# Add the parent directory to sys.path
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

import logger
from errors import ConfigError, FsoBackhaulError, InsufficientDecayError, ParameterDomainError, QuadratureError
from models import CsvTable
from runner.config import build_scenario
from runner.experiments import run
from tools.tools import get_available_tools, get_tool_by_name
from utils import render_csv

from api.models import ExperimentInfo, ExperimentRunRequest, TableResponse

router = APIRouter(
    prefix="/experiments",
    tags=["Experiments"],
    responses={404: {"description": "Not found"}},
)

# Helper functions
def _run_table(name: str, request: ExperimentRunRequest) -> CsvTable:
    """Validate the request, run the experiment and map failures to HTTP errors"""
    if get_tool_by_name(name) is None:
        raise HTTPException(status_code=404, detail=f"Unknown experiment {name!r}")
    try:
        config = build_scenario(request.sections(), presets=request.presets)
        return run(name, config)
    except (ConfigError, ParameterDomainError) as e:
        raise HTTPException(
            status_code=422,
            detail={"message": str(e), "field_errors": getattr(e, "field_errors", [])},
        )
    except (QuadratureError, InsufficientDecayError) as e:
        logger.error(f"experiment {name} failed: {e}")
        raise HTTPException(status_code=500, detail=str(e))
    except FsoBackhaulError as e:
        logger.error(f"experiment {name} failed: {e}")
        raise HTTPException(status_code=500, detail=str(e))

# GET all experiments
@router.get("/", response_model=List[ExperimentInfo])
async def get_experiments():
    """Get every experiment with its sweep variables and output columns"""
    return get_available_tools()

# GET experiment by name
@router.get("/{name}", response_model=ExperimentInfo)
async def get_experiment(name: str = Path(..., description="Experiment subcommand")):
    """Get one experiment definition"""
    for tool in get_available_tools():
        if tool["name"] == name:
            return tool
    raise HTTPException(status_code=404, detail=f"Unknown experiment {name!r}")

# POST run experiment, JSON table
@router.post("/{name}/run", response_model=TableResponse)
def run_experiment(
    request: ExperimentRunRequest,
    name: str = Path(..., description="Experiment subcommand"),
):
    """Run an experiment and return its table"""
    table = _run_table(name, request)
    return TableResponse(subcommand=name, columns=table.columns, rows=table.rows, footer=table.footer)

# POST run experiment, CSV text
@router.post("/{name}/csv", response_class=PlainTextResponse)
def run_experiment_csv(
    request: ExperimentRunRequest,
    name: str = Path(..., description="Experiment subcommand"),
):
    """Run an experiment and return the CSV text with its provenance footer"""
    table = _run_table(name, request)
    return PlainTextResponse(render_csv(table), media_type="text/csv")
