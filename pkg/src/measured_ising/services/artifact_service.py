"""
Run artifact service
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import aiofiles

from ..core.exceptions import ArtifactError
from ..utils.file_utils import FileUtils

logger = logging.getLogger(__name__)


class ArtifactService:
    """Asynchronous reads and writes of the files in one run directory."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def path(self, relative: str) -> Path:
        return self.root / relative

    async def write_text(self, relative: str, content: str) -> Path:
        file_path = self.path(relative)
        try:
            file_path.parent.mkdir(parents=True, exist_ok=True)
            async with aiofiles.open(file_path, "w", encoding="utf-8") as f:
                await f.write(content)
        except OSError as e:
            logger.error(f"Error writing {file_path}: {e}")
            raise ArtifactError(f"Error writing {file_path}: {e}")
        logger.debug(f"Wrote {file_path}")
        return file_path

    async def write_json(self, relative: str, data: Any) -> Path:
        return await self.write_text(relative, FileUtils.render_json(data))

    async def write_csv(self, relative: str, rows: Sequence[Mapping[str, Any]],
                        columns: Optional[List[str]] = None) -> Path:
        return await self.write_text(relative, FileUtils.render_csv(rows, columns))

    @staticmethod
    async def read_text(file_path: Path) -> str:
        file_path = Path(file_path)
        if not file_path.exists():
            raise ArtifactError(f"File not found: {file_path}")
        try:
            async with aiofiles.open(file_path, "r", encoding="utf-8") as f:
                return await f.read()
        except (OSError, UnicodeDecodeError) as e:
            logger.error(f"Error reading {file_path}: {e}")
            raise ArtifactError(f"Error reading {file_path}: {e}")

    @staticmethod
    async def read_json(file_path: Path) -> Any:
        text = await ArtifactService.read_text(file_path)
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ArtifactError(f"Invalid JSON in {file_path}: {e}")

    @staticmethod
    async def read_aggregated(file_path: Path) -> List[Dict[str, float]]:
        """Rows of an aggregated.csv (a run directory is accepted too)."""
        file_path = Path(file_path)
        if file_path.is_dir():
            file_path = file_path / "aggregated.csv"
        rows = FileUtils.parse_csv(await ArtifactService.read_text(file_path))
        missing = {"t_A", "L", "q", "q_err"} - set(rows[0] if rows else {})
        if missing:
            raise ArtifactError(f"{file_path} lacks columns {sorted(missing)}")
        return rows
