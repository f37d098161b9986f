"""
Tests for tokenization, vocabularies and bag-of-words vectorization.
"""

from pathlib import Path

import numpy as np
import pytest

from greedy_rules import NearRuleConfig, select_near_rules
from rules_first_core import ConfigError, DataError
from text_features import (
    build_vocab,
    get_normalizer,
    read_corpus,
    read_vocab,
    split_corpus,
    strip_suffixes,
    tokenize,
    vectorize,
    write_vocab,
)


def test_build_vocab_orders_by_first_appearance():
    vocab = build_vocab(["good day", "good night"])
    assert vocab.tokens == ['good', 'day', 'night']
    assert vocab.get('night') == 2
    assert vocab.frozen


def test_build_vocab_drops_links():
    vocab = build_vocab(["see http://a.example/x now www.example.com"])
    assert vocab.tokens == ['see', 'now']


def test_build_vocab_of_nothing_is_empty():
    assert len(build_vocab([])) == 0


def test_tokenize_keeps_inner_apostrophes():
    assert tokenize("Don't stop 'quoted' wow!!") == ["don't", 'stop', 'quoted', 'wow']
    assert tokenize("snake_case #tag @friend") == ['snake', 'case', 'tag', 'friend']


@pytest.mark.parametrize('token, expected', [
    ('jumped', 'jump'),
    ('cats', 'cat'),
    ('loving', 'lov'),
    ('sing', 'sing'),
    ('was', 'was'),
])
def test_strip_suffixes(token, expected):
    assert strip_suffixes(token) == expected


def test_normalizer_applies_to_tokens():
    assert tokenize("Movies Rocked", get_normalizer('strip_suffixes')) == ['movie', 'rock']
    with pytest.raises(ConfigError, match='Valid normalizers'):
        get_normalizer('porter')


def test_vectorize_binary_presence_and_unseen_tokens():
    vocab = build_vocab(["good day", "good night"])
    data = vectorize([("good good day", 1), ("unknown words", -1)], vocab)
    assert data.features.toarray().tolist() == [[1, 1, 0], [0, 0, 0]]
    assert list(data.labels) == [1, -1]
    assert data.is_binary()


def test_vectorize_frozen_vocab_is_unchanged():
    vocab = build_vocab(["good day"])
    vectorize([("brand new tokens", 1)], vocab)
    assert len(vocab) == 2


def test_vectorize_empty_vocabulary():
    with pytest.raises(DataError, match='empty vocabulary'):
        vectorize([("anything", 1)], build_vocab([]))


def test_vectorize_columns_follow_first_appearance_after_normalizing():
    normalizer = get_normalizer('strip_suffixes')
    vocab = build_vocab(["zebra apples", "apple bananas"], normalizer)
    assert vocab.tokens == ['zebra', 'apple', 'banana']
    data = vectorize([("Bananas, zebra!", 1), ("", -1)], vocab, normalizer)
    assert data.features.dtype == np.float64
    assert data.features.toarray().tolist() == [[1, 0, 1], [0, 0, 0]]


def test_vectorize_no_documents():
    data = vectorize([], build_vocab(["good day"]))
    assert data.features.shape == (0, 2)


def test_read_corpus(tmp_path):
    path = tmp_path / 'corpus.tsv'
    path.write_text("+1\tgreat film\n\n-1\tdull\tplot\n")
    assert read_corpus(path) == [("great film", 1), ("dull\tplot", -1)]


def test_read_corpus_reports_line(tmp_path):
    path = tmp_path / 'corpus.tsv'
    path.write_text("1\tfine\nno label here\n")
    with pytest.raises(DataError, match='line 2'):
        read_corpus(path)
    with pytest.raises(DataError):
        read_corpus(tmp_path / 'missing.tsv')


def test_vocab_file_roundtrip(tmp_path):
    vocab = build_vocab(["alpha beta", "gamma"])
    path = tmp_path / 'vocab.tsv'
    write_vocab(vocab, path)
    assert read_vocab(path).tokens == vocab.tokens

    path.write_text("0\talpha\n2\tbeta\n")
    with pytest.raises(DataError, match='line 2'):
        read_vocab(path)


def test_split_corpus_sizes_and_determinism():
    docs = [(f"doc {i}", 1 if i % 2 else -1) for i in range(10)]
    train, eval, test = split_corpus(docs, seed=3)
    assert (len(train), len(eval), len(test)) == (5, 2, 3)
    assert sorted(train + eval + test) == sorted(docs)
    assert split_corpus(docs, seed=3) == (train, eval, test)
    with pytest.raises(ConfigError):
        split_corpus(docs, fractions=(0.5, 0.5, 0.0))


def test_bundled_corpus_loads():
    docs = read_corpus(Path(__file__).parent / 'data' / 'sentiment_mini.tsv')
    labels = np.array([label for _, label in docs])
    assert len(docs) == 1200
    assert set(np.unique(labels)) == {-1, 1}


def test_bundled_corpus_cue_words_outscore_rare_tokens():
    docs = read_corpus(Path(__file__).parent / 'data' / 'sentiment_mini.tsv')
    normalizer = get_normalizer('strip_suffixes')
    vocab = build_vocab([text for text, _ in docs], normalizer)
    data = vectorize(docs, vocab, normalizer)
    strict = select_near_rules(data, NearRuleConfig(), 2.5)
    assert {vocab.token(rule.feature_index): rule.fired_label for rule in strict} == \
        {'terrible': -1, 'awful': -1, 'horrible': -1, 'bor': -1}
    loose = select_near_rules(data, NearRuleConfig(), 1.0)
    assert len(loose) > len(strict)
