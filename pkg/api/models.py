from pydantic import BaseModel, Field
from typing import List, Dict, Optional, Any

# Preset models
class PresetResponse(BaseModel):
    name: str
    section: str
    description: str = ""
    values: Dict[str, Any]

# Experiment models
class ExperimentInfo(BaseModel):
    name: str
    description: str
    variables: List[str]
    default_variable: str
    default_grid: Optional[List[float]] = None
    columns: List[str]

class ExperimentRunRequest(BaseModel):
    presets: List[str] = []
    uplink: Dict[str, Any] = {}
    fso: Dict[str, Any] = {}
    irs: Dict[str, Any] = {}
    sweep: Dict[str, Any] = {}
    seed: Optional[int] = Field(None, ge=0)
    mc_budget: Optional[int] = None

    def sections(self) -> Dict[str, Dict[str, Any]]:
        """Raw scenario sections with the top-level seed and budget folded into [sweep]."""
        sweep = dict(self.sweep)
        if self.seed is not None:
            sweep["seed"] = self.seed
        if self.mc_budget is not None:
            sweep["mc_budget"] = self.mc_budget
        return {"uplink": self.uplink, "fso": self.fso, "irs": self.irs, "sweep": sweep}

class TableResponse(BaseModel):
    subcommand: str
    columns: List[str]
    rows: List[List[Any]]
    footer: Dict[str, str]

class ErrorDetail(BaseModel):
    message: str
    field_errors: List[Dict[str, Any]] = []
