import hashlib
import json
import subprocess
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from app import __version__
from app.utils.file_helpers import FileHelper


class FormatHelper:
    @staticmethod
    def digest_bytes(payload: bytes) -> str:
        """64-bit blake2b digest as 16 hex characters"""
        return hashlib.blake2b(payload, digest_size=8).hexdigest()

    @staticmethod
    def digest_config(config: Dict[str, Any]) -> str:
        """Digest of a config after canonical (sorted-key, compact) JSON encoding"""
        canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
        return FormatHelper.digest_bytes(canonical.encode("utf-8"))

    @staticmethod
    def format_float(value: float) -> str:
        """Shortest text that parses back to the identical double"""
        return repr(float(value))

    @staticmethod
    def format_row(values: Iterable[Any]) -> str:
        cells = []
        for value in values:
            if isinstance(value, float):
                cells.append(FormatHelper.format_float(value))
            else:
                cells.append(str(value))
        return "\t".join(cells)

    @staticmethod
    def header_comment(config: Optional[Dict[str, Any]] = None) -> List[str]:
        """Comment lines recording tool version and the config behind a table"""
        lines = [f"# gtpm {version_string()}"]
        if config:
            for key in sorted(config):
                lines.append(f"# {key}={config[key]}")
        return lines

    @staticmethod
    def write_tsv(
        path: Path,
        columns: Sequence[str],
        rows: Iterable[Sequence[Any]],
        config: Optional[Dict[str, Any]] = None,
    ) -> Path:
        path = Path(path)
        FileHelper.ensure_dir(path.parent)
        lines = FormatHelper.header_comment(config)
        lines.append("\t".join(columns))
        lines.extend(FormatHelper.format_row(row) for row in rows)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


@lru_cache(maxsize=1)
def version_string() -> str:
    """Package version, suffixed with `git describe` output when available"""
    try:
        described = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    if described.returncode != 0 or not described.stdout.strip():
        return __version__
    return f"{__version__}+{described.stdout.strip()}"
