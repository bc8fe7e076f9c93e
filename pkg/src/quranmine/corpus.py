"""Verse-per-line corpus ingestion, sub-corpus selection and corpus statistics.

The on-disk format is the Tanzil pipe format: one ``sura|aya|text`` line per
verse, ``#`` comment lines and blank lines skipped.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

from .arabic import NormalizationConfig, normalize, tokenize

N_SURAS = 114


class CorpusError(ValueError):
    """Malformed corpus input or an invalid corpus operation."""


@dataclass(frozen=True)
class Verse:
    sura_no: int
    aya_no: int
    text: str


@dataclass(frozen=True)
class SuraStats:
    sura_no: int
    n_verses: int
    n_tokens: int


@dataclass(frozen=True)
class CorpusStats:
    n_suras: int
    n_verses: int
    n_tokens: int
    n_distinct_tokens: int
    avg_token_len: float
    per_sura: tuple[SuraStats, ...]


class Corpus:
    """An immutable, (sura, aya)-ordered sequence of verses.

    ``sura_index`` maps each sura number to the contiguous ``[start, stop)``
    range of its verses in :attr:`verses`.
    """

    __slots__ = ("verses", "sura_index")

    def __init__(self, verses: Iterable[Verse]):
        ordered = sorted(verses, key=lambda v: (v.sura_no, v.aya_no))
        index: dict[int, tuple[int, int]] = {}
        seen: set[tuple[int, int]] = set()
        for i, v in enumerate(ordered):
            if not 1 <= v.sura_no <= N_SURAS:
                raise CorpusError(f"sura_no {v.sura_no} outside [1, {N_SURAS}]")
            if v.aya_no < 1:
                raise CorpusError(f"aya_no {v.aya_no} below 1 in sura {v.sura_no}")
            if not v.text.strip():
                raise CorpusError(f"empty verse text at {v.sura_no}:{v.aya_no}")
            key = (v.sura_no, v.aya_no)
            if key in seen:
                raise CorpusError(f"duplicate verse {v.sura_no}:{v.aya_no}")
            seen.add(key)
            start, _ = index.get(v.sura_no, (i, i))
            index[v.sura_no] = (start, i + 1)
        object.__setattr__(self, "verses", tuple(ordered))
        object.__setattr__(self, "sura_index", index)

    def __setattr__(self, name, value):  # pragma: no cover - guard only
        raise AttributeError("Corpus is immutable")

    def __len__(self) -> int:
        return len(self.verses)

    def __iter__(self):
        return iter(self.verses)

    def __eq__(self, other) -> bool:
        return isinstance(other, Corpus) and self.verses == other.verses

    def __hash__(self):
        return hash(self.verses)

    @property
    def sura_nos(self) -> tuple[int, ...]:
        return tuple(sorted(self.sura_index))

    def sura_verses(self, sura_no: int) -> tuple[Verse, ...]:
        if sura_no not in self.sura_index:
            raise CorpusError(f"unknown sura_no {sura_no}")
        start, stop = self.sura_index[sura_no]
        return self.verses[start:stop]


def parse_corpus(stream: TextIO | Iterable[str]) -> Corpus:
    """Parse a Tanzil pipe-format text stream into a :class:`Corpus`."""
    verses = []
    n_data_lines = 0
    for lineno, raw in enumerate(stream, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("|", 2)
        if len(parts) != 3:
            raise CorpusError(f"line {lineno}: expected sura|aya|text, got {line[:50]!r}")
        try:
            sura_no = int(parts[0])
            aya_no = int(parts[1])
        except ValueError:
            raise CorpusError(f"line {lineno}: non-numeric sura/aya in {line[:50]!r}") from None
        text = parts[2]
        if not text.strip():
            raise CorpusError(f"line {lineno}: empty verse text for {sura_no}:{aya_no}")
        n_data_lines += 1
        verses.append(Verse(sura_no, aya_no, text))
    if n_data_lines == 0:
        raise CorpusError("empty corpus input: no data lines found")
    try:
        return Corpus(verses)
    except CorpusError as exc:
        raise CorpusError(str(exc)) from None


def serialize_corpus(corpus: Corpus) -> str:
    """Render a corpus back to Tanzil pipe format (inverse of parse_corpus)."""
    return "".join(f"{v.sura_no}|{v.aya_no}|{v.text}\n" for v in corpus)


def select_subcorpus(corpus: Corpus, sura_nos: Sequence[int]) -> Corpus:
    """Restrict a corpus to the given suras, preserving verse order."""
    for s in sura_nos:
        if s not in corpus.sura_index:
            raise CorpusError(f"unknown sura_no {s}")
    wanted = set(sura_nos)
    return Corpus(v for v in corpus if v.sura_no in wanted)


def corpus_stats(corpus: Corpus, ncfg: NormalizationConfig) -> CorpusStats:
    """Token-level statistics over ``tokenize(normalize(text))`` per verse."""
    if len(corpus) == 0:
        raise CorpusError("cannot compute statistics of an empty corpus")
    n_tokens = 0
    n_letters = 0
    distinct: set[str] = set()
    per_sura: list[SuraStats] = []
    for sura_no in corpus.sura_nos:
        verses = corpus.sura_verses(sura_no)
        sura_tokens = 0
        for v in verses:
            toks = tokenize(normalize(v.text, ncfg))
            sura_tokens += len(toks)
            for t in toks:
                n_letters += len(t)
                distinct.add(t)
        n_tokens += sura_tokens
        per_sura.append(SuraStats(sura_no, len(verses), sura_tokens))
    assert sum(s.n_verses for s in per_sura) == len(corpus)
    return CorpusStats(
        n_suras=len(per_sura),
        n_verses=len(corpus),
        n_tokens=n_tokens,
        n_distinct_tokens=len(distinct),
        avg_token_len=n_letters / n_tokens if n_tokens else 0.0,
        per_sura=tuple(per_sura),
    )


def stats_report(stats: CorpusStats) -> str:
    """Tab-separated stats report: one row per sura plus a totals row."""
    lines = [
        f"# n_suras: {stats.n_suras}",
        f"# n_distinct_tokens: {stats.n_distinct_tokens}",
        f"# avg_token_len: {stats.avg_token_len:.4f}",
    ]
    for s in stats.per_sura:
        lines.append(f"{s.sura_no}\t{s.n_verses}\t{s.n_tokens}")
    lines.append(f"total\t{stats.n_verses}\t{stats.n_tokens}")
    return "\n".join(lines) + "\n"
