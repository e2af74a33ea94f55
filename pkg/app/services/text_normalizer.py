import logging
import re
from collections import Counter
from typing import Dict, List, Optional

from nltk.stem import PorterStemmer

from app.core.exceptions import EmptyVocabularyError
from app.models.config_models import NON_WORD_PATTERN, PipelineConfig
from app.models.corpus_models import DocumentRecord, Vocabulary

logger = logging.getLogger(__name__)


class TextNormalizer:
    """Sentence split, clean, stopword-filter and stem raw text"""

    def __init__(self, config: Optional[PipelineConfig] = None):
        self.config = config or PipelineConfig()
        self._sentence_splitter = re.compile(f"[{re.escape(self.config.sentence_delimiters)}]")
        self._stemmer = PorterStemmer() if self.config.stemming else None
        self._stem_cache: Dict[str, str] = {}

    def normalize_text(self, raw: str) -> List[List[str]]:
        """
        Turn raw text into token sequences, one per non-empty sentence

        Sentences are split before cleaning so that no token pair ever crosses
        a sentence boundary.
        """
        stopwords = self.config.stopwords
        sentences = []
        for chunk in self._sentence_splitter.split(raw):
            cleaned = NON_WORD_PATTERN.sub("", chunk.lower())
            tokens = []
            for token in cleaned.split():
                if token in stopwords:
                    continue
                token = self._stem(token)
                # stems can land on a stopword ("doing" -> "do")
                if token and token not in stopwords:
                    tokens.append(token)
            if tokens:
                sentences.append(tokens)
        return sentences

    def normalize_document(self, document: DocumentRecord) -> DocumentRecord:
        if document.normalized:
            return document
        return document.model_copy(
            update={"sentences": self.normalize_text(document.raw_text), "normalized": True}
        )

    def normalize_documents(self, documents: List[DocumentRecord]) -> List[DocumentRecord]:
        normalized = [self.normalize_document(document) for document in documents]
        empty = [document.id for document in normalized if document.is_empty]
        if empty:
            logger.warning(f"{len(empty)} documents have no tokens after normalization (e.g. {empty[:3]})")
        logger.info(f"Normalized {len(normalized)} documents")
        return normalized

    def _stem(self, token: str) -> str:
        if self._stemmer is None:
            return token
        cached = self._stem_cache.get(token)
        if cached is not None:
            return cached
        # iterate to a fixed point so that normalizing twice changes nothing
        stem = token
        while True:
            next_stem = self._stemmer.stem(stem)
            if next_stem == stem:
                break
            stem = next_stem
        self._stem_cache[token] = stem
        return stem


def build_vocabulary(documents: List[DocumentRecord], config: PipelineConfig) -> Vocabulary:
    """Frequency-filtered vocabulary over normalized documents"""
    counts: Counter = Counter()
    for document in documents:
        for sentence in document.sentences:
            counts.update(sentence)

    vocabulary = Vocabulary.from_counts(counts, min_count=config.min_count)
    if not len(vocabulary):
        raise EmptyVocabularyError(
            f"No word appears at least {config.min_count} times in {len(documents)} documents; "
            f"lower min_count"
        )
    logger.info(
        f"Vocabulary: {len(vocabulary)} of {len(counts)} distinct words kept (min_count={config.min_count})"
    )
    return vocabulary
