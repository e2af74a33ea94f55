from collections import Counter
from typing import Dict, Iterable, List, Optional

from pydantic import BaseModel, Field


class DocumentRecord(BaseModel):
    """One labeled document; `sentences` is filled by normalization"""

    id: str
    label: str
    raw_text: str = ""
    sentences: List[List[str]] = Field(default_factory=list)
    split: Optional[str] = None
    normalized: bool = False

    @property
    def tokens(self) -> List[str]:
        return [token for sentence in self.sentences for token in sentence]

    @property
    def is_empty(self) -> bool:
        return not any(self.sentences)


class Vocabulary(BaseModel):
    """Bijection between retained words and ids 0..V-1, with corpus frequencies"""

    word_to_id: Dict[str, int] = Field(default_factory=dict)
    id_to_word: List[str] = Field(default_factory=list)
    frequencies: List[int] = Field(default_factory=list)

    @classmethod
    def from_counts(cls, counts: Counter, min_count: int = 1) -> "Vocabulary":
        """Keep words with count >= min_count; ids by descending count, ties lexicographic"""
        kept = sorted(
            ((word, count) for word, count in counts.items() if count >= min_count),
            key=lambda item: (-item[1], item[0]),
        )
        return cls(
            word_to_id={word: index for index, (word, _) in enumerate(kept)},
            id_to_word=[word for word, _ in kept],
            frequencies=[count for _, count in kept],
        )

    def __len__(self) -> int:
        return len(self.id_to_word)

    def __contains__(self, word: str) -> bool:
        return word in self.word_to_id

    def id_of(self, word: str) -> Optional[int]:
        return self.word_to_id.get(word)

    def word_of(self, node: int) -> str:
        return self.id_to_word[node]

    def ids_for(self, tokens: Iterable[str]) -> List[int]:
        """Ids of in-vocabulary tokens, OOV tokens dropped, occurrences kept"""
        lookup = self.word_to_id
        return [lookup[token] for token in tokens if token in lookup]

    def add(self, word: str, frequency: int = 0) -> int:
        """Append an unseen word (open vocabulary); returns its id"""
        existing = self.word_to_id.get(word)
        if existing is not None:
            self.frequencies[existing] += frequency
            return existing
        node = len(self.id_to_word)
        self.word_to_id[word] = node
        self.id_to_word.append(word)
        self.frequencies.append(frequency)
        return node

    def oov_rate(self, documents: Iterable[DocumentRecord]) -> float:
        """Fraction of token occurrences not covered by the vocabulary"""
        total = 0
        missing = 0
        for document in documents:
            for token in document.tokens:
                total += 1
                if token not in self.word_to_id:
                    missing += 1
        return missing / total if total else 0.0


class CorpusStats(BaseModel):
    documents: int
    classes: int
    average_length: float
    empty_documents: int
    label_counts: Dict[str, int]

    @classmethod
    def from_documents(cls, documents: List[DocumentRecord]) -> "CorpusStats":
        lengths = [len(document.tokens) for document in documents]
        labels = Counter(document.label for document in documents)
        return cls(
            documents=len(documents),
            classes=len(labels),
            average_length=sum(lengths) / len(lengths) if lengths else 0.0,
            empty_documents=sum(1 for document in documents if document.is_empty),
            label_counts=dict(sorted(labels.items())),
        )
