# Utils module for the project

import hashlib
import json
import os
import tempfile
from typing import TYPE_CHECKING, Any, Dict, List

import pandas as pd
from dotenv import load_dotenv

import logger
from errors import ConfigError

if TYPE_CHECKING:
    # models imports utils.numerics, so the runtime import would be circular
    from models import CsvTable

load_dotenv()

VERSION = "1.0.0"

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def data_dir() -> str:
    """Directory holding presets.json; FSO_DATA_DIR overrides the bundled ``data``."""
    path = os.getenv("FSO_DATA_DIR", "data")
    return path if os.path.isabs(path) else os.path.join(PROJECT_ROOT, path)


def load_presets() -> Dict[str, Any]:
    """
    Load the preset store.

    Returns:
        Dict[str, Any]: {"defaults": [...], "aliases": {...}, "presets": {...}, "table_iv": [...]}

    Raises:
        ConfigError: If the file is missing or not valid JSON
    """
    path = os.path.join(data_dir(), "presets.json")
    if not os.path.exists(path):
        raise ConfigError(f"preset store not found at {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"preset store {path} is not valid JSON: {exc}") from exc


def canonical_json(data: Any) -> str:
    """Sorted-key, compact JSON used for hashing."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(data: Any) -> str:
    """SHA-256 of :func:`canonical_json`."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def table_to_frame(table: "CsvTable") -> pd.DataFrame:
    return pd.DataFrame(table.rows, columns=table.columns)


def render_csv(table: "CsvTable") -> str:
    """
    Render a table as CSV text followed by ``# key=value`` footer lines.

    Args:
        table (CsvTable): Table to render

    Returns:
        str: CSV text, ``\\n`` line endings
    """
    body = table_to_frame(table).to_csv(index=False, float_format="%.10g", lineterminator="\n")
    footer = "".join(f"# {key}={value}\n" for key, value in table.footer.items())
    return body + footer


def write_csv_table(table: "CsvTable", path: str) -> str:
    """
    Write a table atomically: a temporary file in the target directory is
    renamed over ``path`` only once it is complete.

    Args:
        table (CsvTable): Table to write
        path (str): Destination file

    Returns:
        str: Absolute path written
    """
    target = os.path.abspath(path)
    directory = os.path.dirname(target)
    os.makedirs(directory, exist_ok=True)
    text = render_csv(table)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_path, target)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.info(f"wrote {len(table.rows)} rows to {target}")
    return target


def rows_from_records(records: List[Dict[str, Any]], columns: List[str]) -> List[List[Any]]:
    """Order dict records by ``columns``; missing keys become None."""
    return [[record.get(column) for column in columns] for record in records]
