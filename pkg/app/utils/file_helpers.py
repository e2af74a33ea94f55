from pathlib import Path
from typing import Optional

from app.core.exceptions import CorpusFormatError

SUPPORTED_CORPUS_FORMATS = {
    ".jsonl": "jsonl",
    ".json": "jsonl",
    ".tsv": "tsv",
    ".txt": "tsv",
}


class FileHelper:
    @staticmethod
    def detect_corpus_format(path: Path, declared: Optional[str] = None) -> str:
        """Resolve the corpus format from an explicit value or the file extension"""
        if declared is not None:
            if declared not in {"jsonl", "tsv"}:
                raise CorpusFormatError(
                    f"Corpus format '{declared}' is not supported. Supported formats: jsonl, tsv"
                )
            return declared

        extension = Path(path).suffix.lower()
        if extension in SUPPORTED_CORPUS_FORMATS:
            return SUPPORTED_CORPUS_FORMATS[extension]
        raise CorpusFormatError(
            f"Cannot infer corpus format from extension '{extension}'. "
            f"Supported extensions: {sorted(SUPPORTED_CORPUS_FORMATS)}"
        )

    @staticmethod
    def validate_exists(path: Path) -> Path:
        path = Path(path)
        if not path.is_file():
            raise CorpusFormatError(f"Corpus file '{path}' does not exist")
        return path

    @staticmethod
    def ensure_dir(path: Path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        return path
