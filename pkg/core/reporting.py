"""
Artifact emission: JSON documents and CSV curve tables.

Every artifact embeds the resolved run config and a version string and
nothing time-dependent, so the same config and seed reproduce it byte for byte.
"""

import json
import math
import os
import subprocess
import sys
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

__version__ = "0.1.0"

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
_VERSION_CACHE: Optional[str] = None


def version_string() -> str:
    """`git describe` of the source tree, or the package version outside a checkout."""
    global _VERSION_CACHE
    if _VERSION_CACHE is None:
        try:
            out = subprocess.run(
                ["git", "describe", "--always", "--tags", "--dirty"],
                cwd=_ROOT, capture_output=True, text=True, timeout=5, check=True,
            )
            _VERSION_CACHE = out.stdout.strip() or __version__
        except (OSError, subprocess.SubprocessError):
            _VERSION_CACHE = __version__
    return _VERSION_CACHE


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        # JSON has no inf / nan
        if math.isnan(f):
            return None
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def envelope(command: str, config: Dict[str, Any], result: Any) -> Dict[str, Any]:
    return {
        "command": command,
        "version": version_string(),
        "config": config,
        "result": result,
    }


def _open_target(path: Optional[str]):
    if path is None:
        return sys.stdout, False
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    return open(path, "w", newline=""), True


def write_json(payload: Dict[str, Any], path: Optional[str] = None) -> None:
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2)
    f, close = _open_target(path)
    try:
        f.write(text + "\n")
    finally:
        if close:
            f.close()


def write_csv(rows: List[Dict[str, Any]], command: str, config: Dict[str, Any],
              path: Optional[str] = None) -> None:
    """One row per sweep point, preceded by '#' comment lines with version and config."""
    df = pd.DataFrame(rows)
    f, close = _open_target(path)
    try:
        f.write(f"# command: {command}\n")
        f.write(f"# version: {version_string()}\n")
        f.write(f"# config: {json.dumps(_jsonable(config), sort_keys=True)}\n")
        df.to_csv(f, index=False, lineterminator="\n", float_format="%.12g")
    finally:
        if close:
            f.close()
