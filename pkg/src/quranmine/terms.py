"""Per-sura important-term extraction: stop-word-delimited n-gram candidates
scored by frequency with a multi-word boost, truncated to a term list that
defines the concept vocabulary."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .arabic import Token


class TermError(ValueError):
    pass


@dataclass(frozen=True)
class CandidateTerm:
    stems: tuple[str, ...]
    freq: int
    first_pos: tuple[int, int]  # (verse index, token position)

    @property
    def key(self) -> str:
        return " ".join(self.stems)


@dataclass(frozen=True)
class ScoredTerm:
    stems: tuple[str, ...]
    freq: int
    first_pos: tuple[int, int]
    score: Fraction

    @property
    def key(self) -> str:
        return " ".join(self.stems)


@dataclass(frozen=True)
class TermList:
    sura_no: int | None
    terms: tuple[ScoredTerm, ...]

    @property
    def stems(self) -> tuple[tuple[str, ...], ...]:
        return tuple(t.stems for t in self.terms)

    @classmethod
    def of(cls, sura_no: int | None, stems: Iterable[str]) -> "TermList":
        """Build a vocabulary directly from stem strings (multi-word entries
        are space-separated); scores fall back to frequency 1."""
        terms = []
        for i, entry in enumerate(stems):
            parts = tuple(entry.split())
            terms.append(ScoredTerm(parts, 1, (0, i), Fraction(1)))
        return cls(sura_no, tuple(terms))


def _runs(tokens: Sequence[Token]) -> list[list[Token]]:
    """Split a verse's retained tokens into runs contiguous in the original
    verse (stop-word gaps break a run)."""
    runs: list[list[Token]] = []
    current: list[Token] = []
    last_pos = None
    for tok in tokens:
        if last_pos is not None and tok.position != last_pos + 1:
            runs.append(current)
            current = []
        current.append(tok)
        last_pos = tok.position
    if current:
        runs.append(current)
    return runs


def extract_candidates(
    verses: Sequence[Sequence[Token]], max_len: int = 3
) -> list[CandidateTerm]:
    """Candidates are the maximal stop-word-free stem n-grams (n <= max_len)
    plus all their unigram constituents, with frequencies aggregated over the
    sura."""
    if not 1 <= max_len <= 3:
        raise TermError(f"max_len must be in [1, 3], got {max_len}")
    freq: dict[tuple[str, ...], int] = {}
    first: dict[tuple[str, ...], tuple[int, int]] = {}

    def count(stems: tuple[str, ...], pos: tuple[int, int]):
        freq[stems] = freq.get(stems, 0) + 1
        if stems not in first:
            first[stems] = pos

    for verse_idx, tokens in enumerate(verses):
        for run in _runs(tokens):
            for tok in run:
                count((tok.stem,), (verse_idx, tok.position))
            if len(run) == 1:
                continue
            width = min(len(run), max_len)
            if width < 2:
                continue
            for i in range(len(run) - width + 1):
                window = run[i : i + width]
                count(tuple(t.stem for t in window), (verse_idx, window[0].position))
    return [CandidateTerm(stems, n, first[stems]) for stems, n in freq.items()]


def score_terms(
    candidates: Iterable[CandidateTerm], boost_multiword: Fraction | float = Fraction(3, 2)
) -> list[ScoredTerm]:
    """score = freq * boost for multi-word terms, freq otherwise; sorted by
    descending score with (first_pos, stems) tie-breaking."""
    boost = Fraction(boost_multiword) if not isinstance(boost_multiword, Fraction) else boost_multiword
    scored = [
        ScoredTerm(c.stems, c.freq, c.first_pos,
                   Fraction(c.freq) * (boost if len(c.stems) > 1 else 1))
        for c in candidates
    ]
    scored.sort(key=lambda t: (-t.score, t.first_pos, t.stems))
    return scored


def select_terms(
    scored: Sequence[ScoredTerm],
    sura_no: int | None,
    limit: int | None = None,
    min_freq: int | None = None,
) -> TermList:
    """Truncate a scored list: either the top ``limit`` terms or all terms
    with ``freq >= min_freq``; exactly one mode must be given."""
    if (limit is None) == (min_freq is None):
        raise TermError("exactly one of limit/min_freq must be provided")
    if limit is not None:
        if limit <= 0:
            raise TermError(f"limit must be positive, got {limit}")
        kept = tuple(scored[:limit])
    else:
        if min_freq < 1:
            raise TermError(f"min_freq must be >= 1, got {min_freq}")
        kept = tuple(t for t in scored if t.freq >= min_freq)
    return TermList(sura_no, kept)


def terms_report(term_lists: Iterable[TermList]) -> str:
    """``sura_no<TAB>rank<TAB>score<TAB>stems`` rows, one block per sura."""
    lines = []
    for tl in term_lists:
        sura = tl.sura_no if tl.sura_no is not None else 0
        for rank, t in enumerate(tl.terms, 1):
            score = f"{float(t.score):g}"
            lines.append(f"{sura}\t{rank}\t{score}\t{t.key}")
    return "\n".join(lines) + ("\n" if lines else "")
