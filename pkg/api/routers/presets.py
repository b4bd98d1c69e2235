from fastapi import APIRouter, HTTPException, Path
from typing import List
import os
import sys

# Add the parent directory to sys.path
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from errors import ConfigError, UnknownPresetError
from runner.config import list_presets, preset

from api.models import PresetResponse

router = APIRouter(
    prefix="/presets",
    tags=["Presets"],
    responses={404: {"description": "Not found"}},
)

# GET all presets
@router.get("/", response_model=List[PresetResponse])
async def get_all_presets():
    """Get every named preset"""
    try:
        return [PresetResponse(**preset(name).model_dump()) for name in list_presets()]
    except ConfigError as e:
        raise HTTPException(status_code=500, detail=str(e))

# GET preset by name or alias
@router.get("/{name}", response_model=PresetResponse)
async def get_preset(name: str = Path(..., description="Preset name or alias")):
    """Get one preset; aliases resolve to their canonical name"""
    try:
        return PresetResponse(**preset(name).model_dump())
    except UnknownPresetError as e:
        raise HTTPException(status_code=404, detail=str(e))
    except ConfigError as e:
        raise HTTPException(status_code=500, detail=str(e))
