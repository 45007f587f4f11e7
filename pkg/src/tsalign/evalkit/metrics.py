"""Answer parsers and scoring functions. All are pure and deterministic."""

from __future__ import annotations

import functools
import json
import math
import re
from importlib import resources
from typing import Iterable, Mapping, Sequence

NEGATIONS = frozenset({"no", "not", "without", "never", "nor", "lacks", "lack", "absence"})
NEGATION_WINDOW = 3

_NUMBER = re.compile(
    r"(?<![\w.])[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?(?:[eE][-+]?\d+)?"
    r"|(?<![\w.])[-+]?\.\d+(?:[eE][-+]?\d+)?"
)
_TOKEN = re.compile(r"[-+]?\d+(?:\.\d+)?(?:e[-+]?\d+)?|[a-z]+")


@functools.lru_cache(maxsize=1)
def default_synonyms() -> dict[str, tuple[str, ...]]:
    text = resources.files("tsalign.data").joinpath("synonyms.json").read_text(encoding="utf-8")
    return {k: tuple(v) for k, v in json.loads(text).items()}


def normalize_text(text: str) -> str:
    """Lowercase; underscores and word-joining hyphens become spaces."""
    t = text.lower().replace("_", " ")
    t = re.sub(r"(?<=[a-z0-9])-(?=[a-z])", " ", t)
    return t


def _words(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", normalize_text(text))


def parse_categorical(
    answer: str,
    vocab: Iterable[str],
    synonyms: Mapping[str, Sequence[str]] | None = None,
) -> set[str]:
    """Labels of ``vocab`` mentioned in ``answer``.

    Phrases (label ids and their synonyms) are matched longest first on word
    boundaries, each word used at most once. A match preceded within three
    words by a negation ("no", "not", "without", ...) is discarded, unless the
    phrase itself starts with the negation (e.g. "no periodicity" -> none).
    """
    vocab = list(vocab)
    if not vocab:
        raise ValueError("vocab must be non-empty")
    syn = default_synonyms() if synonyms is None else synonyms
    words = _words(answer or "")
    if not words:
        return set()
    phrases = []
    for label in vocab:
        for form in (label, *syn.get(label, ())):
            toks = tuple(_words(form))
            if toks:
                phrases.append((toks, label))
    phrases.sort(key=lambda p: (-len(p[0]), p[0]))
    used = [False] * len(words)
    found: set[str] = set()
    for toks, label in phrases:
        k = len(toks)
        for i in range(len(words) - k + 1):
            if any(used[i : i + k]) or tuple(words[i : i + k]) != toks:
                continue
            for j in range(i, i + k):
                used[j] = True
            before = words[max(0, i - NEGATION_WINDOW) : i]
            if toks[0] not in NEGATIONS and any(w in NEGATIONS for w in before):
                continue
            found.add(label)
    return found


def parse_number(answer: str) -> float | None:
    """The final numeral in ``answer`` (thousands separators allowed)."""
    matches = _NUMBER.findall(answer or "")
    if not matches:
        return None
    return float(matches[-1].replace(",", ""))


def relative_accuracy(v_answer: float | None, v_label: float, value_range: float | Sequence[float] | None = None) -> float:
    """max(1 - |answer - label| / |label|, 0).

    Labels closer to zero than 1% of the series value range divide by that
    1% instead, so near-zero gold values do not blow the error up.
    """
    if v_answer is None or not math.isfinite(v_answer):
        return 0.0
    if value_range is None:
        delta = 0.0
    elif isinstance(value_range, (int, float)):
        delta = 0.01 * abs(value_range)
    else:
        delta = 0.01 * abs(value_range[1] - value_range[0])
    denom = abs(v_label)
    if denom < delta:
        denom = delta
    err = abs(v_answer - v_label)
    if denom == 0:
        return 1.0 if err == 0 else 0.0
    return max(1.0 - err / denom, 0.0)


def f1(predicted: Iterable, gold: Iterable) -> float:
    """Set F1; two empty sets score 1.0, one empty set scores 0.0."""
    p, g = set(predicted), set(gold)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    tp = len(p & g)
    if tp == 0:
        return 0.0
    precision, recall = tp / len(p), tp / len(g)
    return 2 * precision * recall / (precision + recall)


def _pairs(groups: Iterable[Iterable[str]]) -> set[tuple[str, str]]:
    out = set()
    for g in groups:
        members = sorted(set(g))
        for i, a in enumerate(members):
            for b in members[i + 1 :]:
                out.add((a, b))
    return out


def pair_f1(predicted: Iterable[Iterable[str]], gold: Iterable[Iterable[str]]) -> float:
    """F1 over co-clustered pairs."""
    return f1(_pairs(predicted), _pairs(gold))


def parse_partition(answer: str, vocab: Iterable[str]) -> list[set[str]]:
    """Groups of labels, one per clause (split on ``Group n:``, ``;`` and new lines)."""
    vocab = list(vocab)
    chunks = re.split(r"(?i)group\s*\d*\s*:|;|\n", answer or "")
    groups = []
    for chunk in chunks:
        labels = parse_categorical(chunk, vocab, synonyms={})
        if labels:
            groups.append(labels)
    return groups


def parse_choice(answer: str, options: Sequence[str]) -> str | None:
    """The selected option: an explicit ``Answer: X`` wins, otherwise the first
    standalone option token. Letter options are case-sensitive so the article
    "a" is not read as option A."""
    text = answer or ""
    alts = "|".join(re.escape(o) for o in sorted(options, key=len, reverse=True))
    flags = 0 if all(len(o) == 1 for o in options) else re.IGNORECASE
    explicit = re.search(rf"(?i:answer)\s*(?:is|:)?\s*\(?\b({alts})\b", text, flags)
    m = explicit or re.search(rf"(?<![\w-])({alts})(?![\w-])", text, flags)
    if not m:
        return None
    got = m.group(1)
    for o in options:
        if o.lower() == got.lower():
            return o
    return None


def choice_accuracy(answer: str, gold_choice: str, options: Sequence[str] | None = None) -> tuple[int, bool]:
    """(1 if the selected option equals gold else 0, unparseable flag)."""
    opts = list(options) if options else (["True", "False"] if gold_choice in ("True", "False") else list("ABCD"))
    if gold_choice not in opts:
        raise ValueError(f"gold choice {gold_choice!r} not among options {opts}")
    got = parse_choice(answer, opts)
    if got is None:
        return 0, True
    return int(got == gold_choice), False


# --- keyword scoring -------------------------------------------------------------

_SUFFIXES = ("ing", "edly", "ed", "es", "ly", "s")


def stem(word: str) -> str:
    for suf in _SUFFIXES:
        if len(word) > len(suf) + 2 and word.endswith(suf):
            return word[: -len(suf)]
    return word


def edit_distance(a: str, b: str, limit: int = 2) -> int:
    """Levenshtein distance, exact up to ``limit`` (larger values are capped)."""
    if abs(len(a) - len(b)) >= limit:
        return limit
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
        prev = cur
    return min(prev[-1], limit)


def _tokens(text: str) -> list[str]:
    return _TOKEN.findall(normalize_text(text))


def _is_number(tok: str) -> bool:
    return bool(re.fullmatch(r"[-+]?\d+(?:\.\d+)?(?:e[-+]?\d+)?", tok))


def _token_match(kw: str, tok: str) -> bool:
    if _is_number(kw) or _is_number(tok):
        if not (_is_number(kw) and _is_number(tok)):
            return False
        a, b = float(kw), float(tok)
        return math.isclose(a, b, rel_tol=5e-4, abs_tol=1e-12)
    a, b = stem(kw), stem(tok)
    if a == b:
        return True
    return min(len(a), len(b)) >= 4 and edit_distance(a, b) <= 1


def keyword_score(answer: str, expected_keywords: Sequence[str]) -> float:
    """Fraction of keywords whose every token fuzzy-matches some answer token."""
    if not expected_keywords:
        raise ValueError("expected_keywords must be non-empty")
    toks = _tokens(answer or "")
    if not toks:
        return 0.0
    hit = 0
    for kw in expected_keywords:
        parts = _tokens(kw)
        if parts and all(any(_token_match(p, t) for t in toks) for p in parts):
            hit += 1
    return hit / len(expected_keywords)
