"""
Bag-of-words features for labeled text.

Documents are lower-cased, stripped of links and special characters, split on
whitespace and normalized; every token becomes a binary presence feature.
"""

import logging
import re
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from functools import partial

import numpy as np
import scipy.sparse as sp
from sklearn.feature_extraction.text import CountVectorizer

from rules_first_core import ConfigError, DataError, Dataset

logger = logging.getLogger(__name__)

URL_PATTERN = re.compile(r'https?://\S+|www\.\S+')
SPECIAL_PATTERN = re.compile(r"[^\w\s']|_")
LOOSE_APOSTROPHE = re.compile(r"(?<!\w)'|'(?!\w)")
SUFFIXES = ('ing', 'ed', 's')
MIN_STEM = 3

Document = Tuple[str, int]
Normalizer = Callable[[str], str]


def identity(token: str) -> str:
    return token


def strip_suffixes(token: str) -> str:
    """Drop one trailing 'ing', 'ed' or 's' when at least 3 characters remain."""
    for suffix in SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= MIN_STEM:
            return token[:-len(suffix)]
    return token


NORMALIZERS: Dict[str, Normalizer] = {
    'identity': identity,
    'strip_suffixes': strip_suffixes,
}


def get_normalizer(name: str) -> Normalizer:
    if name not in NORMALIZERS:
        raise ConfigError(f"Unknown normalizer: {name}. Valid normalizers: {', '.join(NORMALIZERS)}")
    return NORMALIZERS[name]


def tokenize(text: str, normalizer: Normalizer = identity) -> List[str]:
    """Lowercase, remove links and special characters (keeping intra-word apostrophes), split."""
    text = URL_PATTERN.sub(' ', text.lower())
    text = SPECIAL_PATTERN.sub(' ', text)
    text = LOOSE_APOSTROPHE.sub(' ', text)
    tokens = (normalizer(token) for token in text.split())
    return [token for token in tokens if token]


class Vocabulary:
    """Token to feature-index map with contiguous indices from 0."""

    def __init__(self, tokens: Iterable[str] = (), frozen: bool = False):
        self._tokens: List[str] = []
        self._index: Dict[str, int] = {}
        self.frozen = False
        for token in tokens:
            self.add(token)
        self.frozen = frozen

    def add(self, token: str) -> Optional[int]:
        """Index of the token, assigning the next index unless frozen."""
        if token in self._index:
            return self._index[token]
        if self.frozen:
            return None
        self._index[token] = len(self._tokens)
        self._tokens.append(token)
        return self._index[token]

    def get(self, token: str) -> Optional[int]:
        return self._index.get(token)

    def token(self, index: int) -> str:
        return self._tokens[index]

    @property
    def tokens(self) -> List[str]:
        return list(self._tokens)

    @property
    def mapping(self) -> Dict[str, int]:
        """Token to index, in index order."""
        return dict(self._index)

    def freeze(self) -> 'Vocabulary':
        self.frozen = True
        return self

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)}, frozen={self.frozen})"


def build_vocab(docs: Iterable[str], normalizer: Normalizer = identity) -> Vocabulary:
    """Frozen vocabulary indexing tokens in order of first appearance."""
    vocab = Vocabulary()
    for text in docs:
        for token in tokenize(text, normalizer):
            vocab.add(token)
    logger.debug(f"Built vocabulary of {len(vocab)} tokens")
    return vocab.freeze()


def vectorize(docs: Sequence[Document], vocab: Vocabulary, normalizer: Normalizer = identity) -> Dataset:
    """
    Binary bag-of-words dataset, one example per (text, label) document.

    Feature j is 1 when token j appears at least once; unknown tokens are ignored.
    """
    if len(vocab) == 0:
        raise DataError("empty vocabulary")
    texts = [text for text, _ in docs]
    if texts:
        vectorizer = CountVectorizer(analyzer=partial(tokenize, normalizer=normalizer),
                                     vocabulary=vocab.mapping, binary=True, dtype=np.float64)
        matrix = vectorizer.transform(texts).tocsr()
    else:
        matrix = sp.csr_matrix((0, len(vocab)))
    return Dataset(matrix, [label for _, label in docs], len(vocab))


# ============================================================================
# Corpus and vocabulary files
# ============================================================================

def read_corpus(filepath: Union[str, Path]) -> List[Document]:
    """Read a UTF-8 TSV corpus, one `label<TAB>text` document per line."""
    try:
        with open(filepath, 'r', encoding='utf-8') as handle:
            lines = handle.read().splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"Error loading corpus from {filepath}: {str(e)}")

    docs = []
    for line_number, line in enumerate(lines, 1):
        if not line.strip():
            continue
        label_text, separator, text = line.partition('\t')
        try:
            label = int(label_text.strip())
        except ValueError:
            label = None
        if not separator or label not in (-1, 1):
            raise DataError(f"{filepath}, line {line_number}: expected '<-1|+1><TAB><text>'")
        docs.append((text, label))
    logger.info(f"Loaded {len(docs)} documents from {filepath}")
    return docs


def write_vocab(vocab: Vocabulary, filepath: Union[str, Path]) -> None:
    with open(filepath, 'w', encoding='utf-8') as handle:
        for index, token in enumerate(vocab.tokens):
            handle.write(f'{index}\t{token}\n')


def read_vocab(filepath: Union[str, Path]) -> Vocabulary:
    try:
        with open(filepath, 'r', encoding='utf-8') as handle:
            lines = handle.read().splitlines()
    except OSError as e:
        raise DataError(f"Error loading vocabulary from {filepath}: {str(e)}")

    tokens = []
    for line_number, line in enumerate(lines, 1):
        index_text, _, token = line.partition('\t')
        if index_text.strip() != str(len(tokens)) or not token:
            raise DataError(f"{filepath}, line {line_number}: expected '{len(tokens)}<TAB><token>'")
        tokens.append(token)
    return Vocabulary(tokens, frozen=True)


def split_corpus(
    docs: Sequence[Document],
    fractions: Tuple[float, float, float] = (0.5, 0.2, 0.3),
    seed: int = 0,
) -> Tuple[List[Document], List[Document], List[Document]]:
    """Seeded train / evaluation / test split of a corpus."""
    if len(fractions) != 3 or min(fractions) <= 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must be three positive numbers summing to 1, got {fractions}")
    order = np.random.default_rng(seed).permutation(len(docs))
    first = int(round(fractions[0] * len(docs)))
    second = first + int(round(fractions[1] * len(docs)))
    pick = lambda part: [docs[i] for i in sorted(part)]
    return pick(order[:first]), pick(order[first:second]), pick(order[second:])
