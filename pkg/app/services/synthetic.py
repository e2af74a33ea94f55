import json
import logging
import string
from pathlib import Path
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, Field

from app.models.corpus_models import DocumentRecord
from app.utils.file_helpers import FileHelper
from app.utils.seeding import SYNTHETIC_STREAM, SeedHelper

logger = logging.getLogger(__name__)


class SyntheticCorpusConfig(BaseModel):
    """
    Multi-topic corpus with Zipfian word draws

    Each topic owns a disjoint vocabulary; a shared vocabulary is mixed into
    every topic at `shared_rate`. Topic k draws its words with Zipf exponent
    base_exponent + k * exponent_step, so topics differ in how strongly their
    hub words dominate.
    """

    topics: int = Field(default=2, ge=1)
    topic_vocabulary: int = Field(default=200, ge=1)
    shared_vocabulary: int = Field(default=100, ge=0)
    documents_per_topic: int = Field(default=500, ge=1)
    sentences_per_document: int = Field(default=4, ge=1)
    sentence_length: int = Field(default=10, ge=1)
    shared_rate: float = Field(default=0.3, ge=0.0, le=1.0)
    base_exponent: float = Field(default=0.8, gt=0.0)
    exponent_step: float = Field(default=0.4, ge=0.0)
    shared_exponent: float = Field(default=1.0, gt=0.0)
    seed: int = 42


def _letters(index: int, width: int) -> str:
    """Fixed-width base-26 lowercase spelling of index"""
    letters = []
    for _ in range(width):
        index, remainder = divmod(index, 26)
        letters.append(string.ascii_lowercase[remainder])
    return "".join(reversed(letters))


def zipf_probabilities(size: int, exponent: float) -> np.ndarray:
    ranks = np.arange(1, size + 1, dtype=np.float64)
    weights = ranks ** -exponent
    return weights / weights.sum()


def topic_words(topic: int, size: int) -> List[str]:
    return [f"tp{_letters(topic, 2)}{_letters(index, 3)}" for index in range(size)]


def shared_words(size: int) -> List[str]:
    return [f"sh{_letters(index, 3)}" for index in range(size)]


def generate_corpus(config: SyntheticCorpusConfig) -> List[DocumentRecord]:
    """
    Pre-normalized labeled documents, topics interleaved

    Tokens contain only lowercase letters, so the records satisfy the
    normalized-token invariants without passing through the normalizer.
    """
    shared = shared_words(config.shared_vocabulary)
    shared_p = zipf_probabilities(len(shared), config.shared_exponent) if shared else None
    vocabularies = [topic_words(topic, config.topic_vocabulary) for topic in range(config.topics)]
    probabilities = [
        zipf_probabilities(config.topic_vocabulary, config.base_exponent + topic * config.exponent_step)
        for topic in range(config.topics)
    ]

    documents = []
    for number in range(config.documents_per_topic):
        for topic in range(config.topics):
            rng = SeedHelper.rng(config.seed, SYNTHETIC_STREAM, topic, number)
            sentences = []
            for _ in range(config.sentences_per_document):
                draws = rng.choice(config.topic_vocabulary, size=config.sentence_length, p=probabilities[topic])
                from_shared = rng.random(config.sentence_length) < config.shared_rate if shared else None
                shared_draws = rng.choice(len(shared), size=config.sentence_length, p=shared_p) if shared else None
                sentence = []
                for position in range(config.sentence_length):
                    if shared and from_shared[position]:
                        sentence.append(shared[shared_draws[position]])
                    else:
                        sentence.append(vocabularies[topic][draws[position]])
                sentences.append(sentence)
            documents.append(DocumentRecord(
                id=f"t{topic}d{number}",
                label=f"topic{_letters(topic, 2)}",
                raw_text=" ".join(" ".join(sentence) + "." for sentence in sentences),
                sentences=sentences,
                normalized=True,
            ))

    logger.info(
        f"Generated {len(documents)} synthetic documents over {config.topics} topics "
        f"({config.topic_vocabulary} topic words each, {config.shared_vocabulary} shared)"
    )
    return documents


def write_corpus_jsonl(documents: Sequence[DocumentRecord], path: Path) -> Path:
    """One JSON object per line with id, label, text, pre-normalized sentences and split"""
    path = Path(path)
    FileHelper.ensure_dir(path.parent)
    with path.open("w", encoding="utf-8") as handle:
        for document in documents:
            payload = {"id": document.id, "label": document.label, "text": document.raw_text}
            if document.normalized:
                payload["sentences"] = document.sentences
            if document.split is not None:
                payload["split"] = document.split
            handle.write(json.dumps(payload, sort_keys=True) + "\n")
    return path
