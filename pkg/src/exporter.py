import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """CSV cell text: 12 significant digits for floats, locale independent."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    if isinstance(value, (list, tuple)):
        return ";".join(format_value(v) for v in value)
    return str(value)


class CSVExporter:
    """Writes '# key: value' header lines followed by a comma separated table."""

    def __init__(self, output_path: Path):
        self.output_path = Path(output_path)
        self.output_path.parent.mkdir(parents=True, exist_ok=True)

    def export(self, header: Dict[str, Any], columns: Sequence[str], rows: List[Dict[str, Any]]) -> Path:
        lines = [f"# {key}: {json.dumps(value, sort_keys=True)}" for key, value in header.items()]
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(format_value(row.get(column)) for column in columns))

        logger.info(f"Writing {len(rows)} row(s) to: {self.output_path}")
        try:
            with open(self.output_path, "w", encoding="utf-8", newline="\n") as f:
                f.write("\n".join(lines) + "\n")
        except OSError as e:
            logger.error(f"IO Error writing to disk: {e}")
            raise
        return self.output_path


class JSONExporter:
    """Writes {"header": ..., "records": [...]} as one JSON document."""

    def __init__(self, output_path: Path):
        self.output_path = Path(output_path)
        self.output_path.parent.mkdir(parents=True, exist_ok=True)

    def export(self, header: Dict[str, Any], records: List[Dict[str, Any]]) -> Path:
        logger.info(f"Writing {len(records)} record(s) to: {self.output_path}")
        try:
            with open(self.output_path, "w", encoding="utf-8") as f:
                # NaN is not JSON; failed points carry null instead
                json.dump({"header": header, "records": _finite(records)}, f, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as e:
            logger.error(f"IO Error writing to disk: {e}")
            raise
        return self.output_path


def _finite(value: Any) -> Any:
    if isinstance(value, float) and value != value:
        return None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value
