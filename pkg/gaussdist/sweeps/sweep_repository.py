import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from gaussdist.sweeps.sweep_models import Cell, OutputFormat, SweepTable

logger = logging.getLogger(__name__)


def format_cell(value: Cell) -> str:
    """17 significant digits for floats, empty for undefined cells."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


class SweepRepository:
    def render(self, table: SweepTable, output_format: OutputFormat) -> str:
        if output_format is OutputFormat.JSON:
            return self._render_json(table)
        return self._render_csv(table)

    def save(
        self,
        table: SweepTable,
        output_format: OutputFormat,
        path: Optional[Path] = None,
    ) -> None:
        content = self.render(table, output_format)
        if path is None:
            sys.stdout.write(content)
            sys.stdout.flush()
            return
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(content)
        except OSError as e:
            logger.error(f"Failed to write {table.command} output to {path}: {e}")
            raise
        logger.info(f"Wrote {len(table.rows)} rows to {path}")

    def _render_csv(self, table: SweepTable) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([format_cell(value) for value in row])

        if table.footer_columns:
            buffer.write(f"# {self._csv_line(table.footer_columns)}")
            for row in table.footer:
                buffer.write(f"# {self._csv_line([format_cell(value) for value in row])}")
        return buffer.getvalue()

    def _render_json(self, table: SweepTable) -> str:
        document = {
            "metadata": table.metadata,
            "command": table.command,
            "columns": table.columns,
            "rows": [dict(zip(table.columns, row)) for row in table.rows],
        }
        if table.footer_columns:
            document["footer"] = [dict(zip(table.footer_columns, row)) for row in table.footer]
        return json.dumps(document, indent=2) + "\n"

    @staticmethod
    def _csv_line(cells: List[str]) -> str:
        buffer = io.StringIO()
        csv.writer(buffer, lineterminator="\n").writerow(cells)
        return buffer.getvalue()
