"""CIDEr-D over role captions.

Per candidate/reference pair and n-gram order n, both captions become
TF-IDF vectors (raw counts times ``log(N) - log(max(1, df))``); the
similarity is the clipped cosine ``sum(min(c, r) * r) / (|c| |r|)``, damped by
``exp(-(len_c - len_r)**2 / (2 * sigma**2))``.  The pair score is ten times
the mean over the orders the reference actually has (``n <= len(ref)``),
so a caption matched against itself always scores 10.  An order whose
vectors vanish (every n-gram occurs in every document) counts as a perfect
match only when both n-gram multisets are identical.
"""
from __future__ import annotations

import math
import string
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

MAX_N = 4
SIGMA = 6.0

_PUNCT = str.maketrans("", "", string.punctuation)


def tokenize(text: str) -> List[str]:
    return text.lower().translate(_PUNCT).split()


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


@dataclass(frozen=True)
class DocumentFrequency:
    counts: Mapping[tuple, int]
    num_docs: int

    @classmethod
    def from_corpus(cls, corpus: Iterable[Union[str, Sequence[str]]], max_n: int = MAX_N) -> "DocumentFrequency":
        """Each corpus item is one document: a caption or a list of reference captions."""
        df: Counter = Counter()
        docs = 0
        for doc in corpus:
            refs = [doc] if isinstance(doc, str) else list(doc)
            seen = set()
            for ref in refs:
                toks = tokenize(ref)
                for n in range(1, max_n + 1):
                    seen.update(ngram_counts(toks, n))
            df.update(seen)
            docs += 1
        if docs == 0:
            raise ValueError("the IDF corpus is empty")
        return cls(dict(df), docs)

    def idf(self, gram: tuple) -> float:
        return math.log(self.num_docs) - math.log(max(1.0, self.counts.get(gram, 0)))


def _vec(counts: Counter, df: DocumentFrequency) -> Tuple[Dict[tuple, float], float]:
    v = {g: tf * df.idf(g) for g, tf in counts.items()}
    return v, math.sqrt(sum(x * x for x in v.values()))


def cider_pair(candidate: str, references: Union[str, Sequence[str]], df: DocumentFrequency,
               max_n: int = MAX_N, sigma: float = SIGMA) -> float:
    refs = [references] if isinstance(references, str) else list(references)
    cand = tokenize(candidate)
    if not cand or not refs:
        return 0.0
    total = 0.0
    for ref in refs:
        rtoks = tokenize(ref)
        orders = min(max_n, len(rtoks))
        if orders == 0:
            continue
        penalty = math.exp(-((len(cand) - len(rtoks)) ** 2) / (2 * sigma ** 2))
        acc = 0.0
        for n in range(1, orders + 1):
            cc, rc = ngram_counts(cand, n), ngram_counts(rtoks, n)
            vc, nc = _vec(cc, df)
            vr, nr = _vec(rc, df)
            if nc == 0 or nr == 0:
                acc += 1.0 if cc == rc else 0.0
                continue
            sim = sum(min(x, vr[g]) * vr[g] for g, x in vc.items() if g in vr)
            acc += sim / (nc * nr)
        total += 10.0 * penalty * acc / orders
    return total / len(refs)


def cider(candidates: Sequence[str], references: Sequence[Union[str, Sequence[str]]],
          idf_corpus: Union[DocumentFrequency, Iterable] = None) -> Tuple[float, List[float]]:
    """Mean CIDEr-D over aligned candidate/reference pairs, plus the per-pair scores.

    ``idf_corpus`` defaults to the references themselves.
    """
    if len(candidates) != len(references):
        raise ValueError("candidates and references must align")
    if idf_corpus is None:
        idf_corpus = references
    df = idf_corpus if isinstance(idf_corpus, DocumentFrequency) else DocumentFrequency.from_corpus(idf_corpus)
    scores = [cider_pair(c, r, df) for c, r in zip(candidates, references)]
    return (sum(scores) / len(scores) if scores else 0.0), scores
