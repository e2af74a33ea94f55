import numpy as np

from app.services.corpus_loader import CorpusLoader
from app.services.synthetic import SyntheticCorpusConfig, generate_corpus, write_corpus_jsonl, zipf_probabilities

SMALL = dict(topics=3, topic_vocabulary=15, shared_vocabulary=5, documents_per_topic=4,
             sentences_per_document=2, sentence_length=5)


def test_corpus_shape():
    documents = generate_corpus(SyntheticCorpusConfig(**SMALL))
    assert len(documents) == 12
    assert [document.id for document in documents[:3]] == ["t0d0", "t1d0", "t2d0"]
    assert sorted({document.label for document in documents}) == ["topicaa", "topicab", "topicac"]
    assert all(len(document.sentences) == 2 for document in documents)
    assert all(len(sentence) == 5 for document in documents for sentence in document.sentences)


def test_tokens_are_lowercase_words():
    documents = generate_corpus(SyntheticCorpusConfig(**SMALL))
    tokens = {token for document in documents for token in document.tokens}
    assert all(token.isalpha() and token.islower() for token in tokens)
    assert all(document.normalized for document in documents)


def test_topic_vocabularies_are_disjoint():
    documents = generate_corpus(SyntheticCorpusConfig(**dict(SMALL, shared_rate=0.0)))
    by_label = {}
    for document in documents:
        by_label.setdefault(document.label, set()).update(document.tokens)
    words = list(by_label.values())
    assert not words[0] & words[1]
    assert not any(token.startswith("sh") for group in words for token in group)


def test_shared_rate_one_uses_only_shared_words():
    documents = generate_corpus(SyntheticCorpusConfig(**dict(SMALL, shared_rate=1.0)))
    assert all(token.startswith("sh") for document in documents for token in document.tokens)


def test_generation_is_seeded():
    first = generate_corpus(SyntheticCorpusConfig(**SMALL))
    second = generate_corpus(SyntheticCorpusConfig(**SMALL))
    other = generate_corpus(SyntheticCorpusConfig(**dict(SMALL, seed=7)))
    assert [d.sentences for d in first] == [d.sentences for d in second]
    assert [d.sentences for d in first] != [d.sentences for d in other]


def test_zipf_probabilities():
    p = zipf_probabilities(50, 1.2)
    assert abs(p.sum() - 1.0) < 1e-12
    assert np.all(np.diff(p) < 0)
    assert abs(p[0] / p[1] - 2 ** 1.2) < 1e-12


def test_jsonl_round_trip(tmp_path):
    documents = generate_corpus(SyntheticCorpusConfig(**SMALL))
    path = write_corpus_jsonl(documents, tmp_path / "corpus.jsonl")
    loaded = CorpusLoader().load_corpus(path)
    assert [d.id for d in loaded] == [d.id for d in documents]
    assert [d.sentences for d in loaded] == [d.sentences for d in documents]
    assert all(d.normalized for d in loaded)
