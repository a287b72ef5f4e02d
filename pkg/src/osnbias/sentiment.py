"""Deterministic lexicon-based sentiment scoring.

Scoring rule: within each sentence, every lexicon term contributes its
polarity, negated when a negator appears among the 4 tokens immediately
before it; the sentence total is divided by sqrt(sentence length) and the
text score is the mean over sentences.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

NEGATION_WINDOW = 4

_SENTENCE_SPLIT = re.compile(r"[.!?]+")
_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


class LexiconError(Exception):
    pass


@dataclass(frozen=True)
class Lexicon:
    entries: dict  # lowercase term -> polarity
    negators: frozenset = frozenset()
    duplicate_warnings: int = 0


def load_lexicon(path) -> Lexicon:
    """Load a TSV lexicon: ``term<TAB>polarity`` with optional third column NEG.

    Duplicate terms: last row wins, tallied in ``duplicate_warnings``.
    """
    entries: dict[str, float] = {}
    negators: set[str] = set()
    duplicates = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise LexiconError(f"{path}:{lineno}: expected term<TAB>polarity")
            term = parts[0].strip().lower()
            if not term or any(ch.isspace() for ch in term):
                raise LexiconError(f"{path}:{lineno}: bad term {parts[0]!r}")
            try:
                polarity = float(parts[1])
            except ValueError:
                raise LexiconError(
                    f"{path}:{lineno}: non-numeric polarity {parts[1]!r}"
                ) from None
            if not math.isfinite(polarity):
                raise LexiconError(f"{path}:{lineno}: non-finite polarity")
            if len(parts) >= 3 and parts[2].strip().upper() == "NEG":
                negators.add(term)
                continue
            if term in entries:
                duplicates += 1
            entries[term] = polarity
    return Lexicon(entries=entries, negators=frozenset(negators),
                   duplicate_warnings=duplicates)


def tokenize(text: str) -> list:
    """Split text into sentences of lowercase tokens; empty sentences dropped."""
    sentences = []
    for chunk in _SENTENCE_SPLIT.split(text.lower()):
        tokens = _TOKEN.findall(chunk)
        if tokens:
            sentences.append(tokens)
    return sentences


def score_text(text: str, lex: Lexicon) -> float:
    """Score one text; positive means positive sentiment. Empty text scores 0."""
    sentence_scores = []
    for tokens in tokenize(text):
        raw = 0.0
        for i, tok in enumerate(tokens):
            polarity = lex.entries.get(tok)
            if polarity is None:
                continue
            window = tokens[max(0, i - NEGATION_WINDOW):i]
            if any(t in lex.negators for t in window):
                polarity = -polarity
            raw += polarity
        sentence_scores.append(raw / math.sqrt(len(tokens)))
    if not sentence_scores:
        return 0.0
    return sum(sentence_scores) / len(sentence_scores)
