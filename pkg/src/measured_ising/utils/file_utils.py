import csv
import io
import json
import math
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np


class FileUtils:
    """Rendering helpers for run artifacts"""

    FLOAT_DIGITS = 17

    @staticmethod
    def format_float(value: float) -> str:
        """17 significant digits; non-finite values as nan, inf, -inf."""
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.{FileUtils.FLOAT_DIGITS}g}"

    @staticmethod
    def format_cell(value: Any) -> str:
        if isinstance(value, (bool, np.bool_)):
            return str(bool(value)).lower()
        if isinstance(value, (int, np.integer)):
            return str(int(value))
        if isinstance(value, (float, np.floating)):
            return FileUtils.format_float(value)
        return "" if value is None else str(value)

    @staticmethod
    def render_csv(rows: Sequence[Mapping[str, Any]], columns: Optional[List[str]] = None) -> str:
        """CSV text with a fixed column order (first row's keys unless given)."""
        if columns is None:
            columns = list(rows[0].keys()) if rows else []
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([FileUtils.format_cell(row.get(name)) for name in columns])
        return buffer.getvalue()

    @staticmethod
    def columns_to_rows(columns: Mapping[str, Iterable[Any]]) -> List[Dict[str, Any]]:
        names = list(columns)
        return [dict(zip(names, values)) for values in zip(*(columns[n] for n in names))]

    @staticmethod
    def parse_csv(text: str) -> List[Dict[str, float]]:
        """Rows of a numeric CSV; empty cells become nan."""
        reader = csv.DictReader(io.StringIO(text))
        return [
            {key: float(value) if value not in ("", None) else math.nan for key, value in row.items()}
            for row in reader
        ]

    @staticmethod
    def to_jsonable(value: Any) -> Any:
        """Plain JSON types; non-finite floats become strings."""
        if isinstance(value, Mapping):
            return {str(k): FileUtils.to_jsonable(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [FileUtils.to_jsonable(v) for v in value]
        if isinstance(value, np.ndarray):
            return FileUtils.to_jsonable(value.tolist())
        if isinstance(value, (bool, np.bool_)):
            return bool(value)
        if isinstance(value, (int, np.integer)):
            return int(value)
        if isinstance(value, (float, np.floating)):
            value = float(value)
            return value if math.isfinite(value) else FileUtils.format_float(value)
        return value

    @staticmethod
    def render_json(data: Any) -> str:
        """JSON with sorted keys."""
        return json.dumps(FileUtils.to_jsonable(data), indent=2, sort_keys=True) + "\n"
