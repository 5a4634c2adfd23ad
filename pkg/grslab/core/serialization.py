"""Deterministic JSON encoding for reports."""
import math
from typing import Any

import numpy as np
import orjson
from pydantic import BaseModel

from grslab.config import settings


def round_significant(value: float, digits: int) -> float | None:
    """Round to `digits` significant digits; non-finite values become None."""
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(format(value, f".{digits}g"))


def normalize(obj: Any, digits: int) -> Any:
    """Recursively convert numpy scalars/arrays and round every float."""
    if isinstance(obj, BaseModel):
        return normalize(obj.model_dump(mode="python"), digits)
    if isinstance(obj, dict):
        return {str(k): normalize(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return normalize(obj.tolist(), digits)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return round_significant(obj, digits)
    return obj


def dumps(obj: Any, digits: int | None = None) -> bytes:
    """Encode with fixed float precision, stable key order and a trailing newline."""
    digits = digits or settings.FLOAT_SIGNIFICANT_DIGITS
    return orjson.dumps(normalize(obj, digits), option=orjson.OPT_INDENT_2 | orjson.OPT_APPEND_NEWLINE)


def format_float(value: float, digits: int | None = None) -> str:
    """Text form used in CSV cells."""
    digits = digits or settings.FLOAT_SIGNIFICANT_DIGITS
    rounded = round_significant(value, digits)
    return "nan" if rounded is None else format(rounded, f".{digits}g")
