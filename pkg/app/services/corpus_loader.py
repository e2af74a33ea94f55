import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from app.core.exceptions import CorpusFormatError, DuplicateDocumentError
from app.models.corpus_models import DocumentRecord
from app.utils.file_helpers import FileHelper

logger = logging.getLogger(__name__)

SPLIT_NAMES = {"train", "test"}
TSV_HEADER = ("id", "label", "text")


class CorpusLoader:
    """Read labeled corpora from JSON-lines or tab-separated files"""

    def load_corpus(self, path: Path, format: Optional[str] = None) -> List[DocumentRecord]:
        """
        Load one DocumentRecord per input line, preserving order

        Args:
            path: Corpus file
            format: 'jsonl' or 'tsv'; inferred from the extension when omitted

        Returns:
            Raw (not yet normalized) records, unless the file carries sentences
        """
        path = FileHelper.validate_exists(Path(path))
        corpus_format = FileHelper.detect_corpus_format(path, format)

        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except UnicodeDecodeError as e:
            raise CorpusFormatError(f"Unable to decode corpus '{path}' as UTF-8: {str(e)}")

        if corpus_format == "jsonl":
            records = self._parse_jsonl(lines)
        else:
            records = self._parse_tsv(lines)

        self._check_unique_ids(records)
        logger.info(f"Loaded {len(records)} documents from {path} ({corpus_format})")
        return records

    def _parse_jsonl(self, lines: List[str]) -> List[DocumentRecord]:
        records = []
        for line_number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"invalid JSON: {e.msg}", line_number)
            if not isinstance(payload, dict):
                raise CorpusFormatError("expected a JSON object", line_number)
            records.append(self._record_from_mapping(payload, line_number))
        return records

    def _record_from_mapping(self, payload: Dict[str, Any], line_number: int) -> DocumentRecord:
        missing = [key for key in ("id", "label") if key not in payload]
        if "text" not in payload and "sentences" not in payload:
            missing.append("text")
        if missing:
            raise CorpusFormatError(f"missing field(s): {', '.join(missing)}", line_number)

        split = payload.get("split")
        if split is not None and split not in SPLIT_NAMES:
            raise CorpusFormatError(f"unknown split '{split}'", line_number)

        sentences = payload.get("sentences")
        if sentences is not None:
            if not isinstance(sentences, list) or not all(isinstance(s, list) for s in sentences):
                raise CorpusFormatError("'sentences' must be a list of token lists", line_number)
            sentences = [[str(token) for token in sentence] for sentence in sentences]

        return DocumentRecord(
            id=str(payload["id"]),
            label=str(payload["label"]),
            raw_text=str(payload.get("text", "")),
            sentences=sentences or [],
            split=split,
            normalized=sentences is not None,
        )

    def _parse_tsv(self, lines: List[str]) -> List[DocumentRecord]:
        records = []
        for line_number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if line_number == 1 and tuple(part.strip().lower() for part in parts[:3]) == TSV_HEADER:
                continue
            if len(parts) < 3:
                raise CorpusFormatError(
                    f"expected at least 3 tab-separated columns (id, label, text), got {len(parts)}",
                    line_number,
                )
            split = None
            if len(parts) >= 4 and parts[-1].strip() in SPLIT_NAMES:
                split = parts[-1].strip()
                text = "\t".join(parts[2:-1])
            else:
                text = "\t".join(parts[2:])
            if not parts[0].strip():
                raise CorpusFormatError("empty document id", line_number)
            records.append(
                DocumentRecord(id=parts[0].strip(), label=parts[1].strip(), raw_text=text, split=split)
            )
        return records

    @staticmethod
    def _check_unique_ids(records: List[DocumentRecord]) -> None:
        seen = set()
        for record in records:
            if record.id in seen:
                raise DuplicateDocumentError(f"Duplicate document id '{record.id}'")
            seen.add(record.id)
