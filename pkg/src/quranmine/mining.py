"""Verse transactions over a concept vocabulary, support computation with the
average-derived band filter, Apriori frequent-itemset mining and association
rule generation with a confidence filter.

Supports and confidences are exact rationals internally; reports render them
to 5 decimals.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .arabic import NormalizationConfig, StemmerConfig, preprocess_verse
from .corpus import Corpus
from .terms import TermList

# Multi-word concepts are keyed with an underscore joiner so that reports can
# space-join antecedent concepts unambiguously.
JOINER = "_"


class MiningError(ValueError):
    pass


@dataclass(frozen=True)
class Transaction:
    verse_ref: tuple[int, int]
    items: frozenset[str]
    order: Mapping[str, int]  # item -> first token position in the verse


@dataclass(frozen=True)
class SupportTable:
    n_transactions: int
    counts: Mapping[str, int]
    support: Mapping[str, Fraction]


@dataclass(frozen=True)
class SupportBand:
    ave: Fraction
    max: Fraction
    min: Fraction


@dataclass(frozen=True)
class Itemset:
    items: tuple[str, ...]
    count: int
    support: Fraction


@dataclass(frozen=True)
class AssociationRule:
    antecedent: tuple[str, ...]
    consequent: str
    support: Fraction
    confidence: Fraction
    cooccurrence: int


def concept_key(stems: Sequence[str]) -> str:
    return JOINER.join(stems)


def build_transactions(
    corpus: Corpus,
    vocab: TermList,
    ncfg: NormalizationConfig,
    scfg: StemmerConfig,
    extra_items: Iterable[str] = (),
) -> list[Transaction]:
    """One transaction per verse: the vocabulary concepts present in it.

    Multi-word concepts match when their stems occur contiguously (in
    original verse positions).  ``extra_items`` adds single-stem concepts on
    top of the vocabulary (used to force trigger stems into transactions).
    """
    if vocab.sura_no is not None and set(corpus.sura_index) != {vocab.sura_no}:
        raise MiningError(
            f"vocabulary is for sura {vocab.sura_no} but corpus has "
            f"suras {sorted(corpus.sura_index)}"
        )
    unigrams: set[str] = set(extra_items)
    ngrams: list[tuple[str, ...]] = []
    for stems in vocab.stems:
        if len(stems) == 1:
            unigrams.add(stems[0])
        else:
            ngrams.append(stems)

    out = []
    for verse in corpus:
        tokens = preprocess_verse(verse.sura_no, verse.aya_no, verse.text, ncfg, scfg)
        pos_stem = {t.position: t.stem for t in tokens}
        order: dict[str, int] = {}
        for t in tokens:
            if t.stem in unigrams and t.stem not in order:
                order[t.stem] = t.position
        for stems in ngrams:
            key = concept_key(stems)
            if key in order:
                continue
            for t in tokens:
                if t.stem != stems[0]:
                    continue
                if all(pos_stem.get(t.position + i) == stems[i] for i in range(1, len(stems))):
                    order[key] = t.position
                    break
        out.append(Transaction(
            (verse.sura_no, verse.aya_no), frozenset(order), dict(order)))
    return out


def restrict_transactions(
    transactions: Sequence[Transaction], keep: Iterable[str]
) -> list[Transaction]:
    """Drop items outside ``keep``; empty transactions are retained so the
    denominator N is unchanged."""
    keep = frozenset(keep)
    return [
        Transaction(t.verse_ref, t.items & keep,
                    {i: p for i, p in t.order.items() if i in keep})
        for t in transactions
    ]


def concept_support(transactions: Sequence[Transaction]) -> SupportTable:
    """Per-concept support: transactions containing the concept over N.

    Presence within a verse is boolean; multiplicity does not count.
    """
    n = len(transactions)
    if n == 0:
        raise MiningError("support is undefined over zero transactions")
    counts: dict[str, int] = {}
    for t in transactions:
        for item in t.items:
            counts[item] = counts.get(item, 0) + 1
    support = {c: Fraction(k, n) for c, k in counts.items()}
    return SupportTable(n, counts, support)


def support_band(table: SupportTable) -> SupportBand:
    """Band around the mean support: [ave - ave/2, ave + ave/2]."""
    if not table.support:
        raise MiningError("support band is undefined for an empty table")
    return band_around_average(table.support.values())


def band_around_average(values: Iterable[Fraction]) -> SupportBand:
    values = list(values)
    if not values:
        raise MiningError("band is undefined over no values")
    ave = sum(values, Fraction(0)) / len(values)
    return SupportBand(ave=ave, max=ave + ave / 2, min=ave - ave / 2)


def filter_concepts(table: SupportTable, band: SupportBand) -> set[str]:
    """Concepts whose support lies inside the band, bounds inclusive."""
    return {c for c, s in table.support.items() if band.min <= s <= band.max}


def _to_fraction(x) -> Fraction:
    # str() round-trip gives decimal-literal semantics for floats (0.1 is
    # 1/10, not its binary expansion).
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


def _threshold_count(min_support: Mapping, n: int) -> tuple[Fraction, bool]:
    """Returns (threshold, is_fraction): itemsets pass when count >= threshold
    (count mode) or count/N >= threshold (fraction mode)."""
    if set(min_support) == {"count"}:
        c = min_support["count"]
        if c < 1:
            raise MiningError(f"min_support count must be >= 1, got {c}")
        return Fraction(c), False
    if set(min_support) == {"fraction"}:
        f = _to_fraction(min_support["fraction"])
        if f <= 0:
            raise MiningError(f"min_support fraction must be positive, got {f}")
        return f, True
    raise MiningError(f"min_support must be {{'count': n}} or {{'fraction': f}}, got {min_support!r}")


def mine_frequent_itemsets(
    transactions: Sequence[Transaction],
    k_max: int,
    min_support: Mapping,
) -> list[Itemset]:
    """Classic level-wise Apriori with downward-closure pruning.

    Returns every itemset of size <= k_max meeting the threshold, sorted by
    (size, lexicographic items).
    """
    if not 1 <= k_max <= 3:
        raise MiningError(f"k_max must be in [1, 3], got {k_max}")
    n = len(transactions)
    if n == 0:
        raise MiningError("cannot mine zero transactions")
    threshold, is_fraction = _threshold_count(min_support, n)

    def passes(count: int) -> bool:
        return Fraction(count, n) >= threshold if is_fraction else count >= threshold

    item_sets = [sorted(t.items) for t in transactions]
    counts_1: dict[tuple[str, ...], int] = {}
    for items in item_sets:
        for item in items:
            counts_1[(item,)] = counts_1.get((item,), 0) + 1
    frequent: dict[tuple[str, ...], int] = {k: v for k, v in counts_1.items() if passes(v)}
    level = sorted(frequent)

    k = 2
    while k <= k_max and level:
        prev = set(level)
        candidates = set()
        for a, b in combinations(level, 2):
            if a[:-1] != b[:-1]:
                continue
            cand = a + (b[-1],) if a[-1] < b[-1] else b + (a[-1],)
            if all(tuple(sub) in prev for sub in combinations(cand, k - 1)):
                candidates.add(cand)
        if not candidates:
            break
        counts_k: dict[tuple[str, ...], int] = {}
        for items in item_sets:
            if len(items) < k:
                continue
            for combo in combinations(items, k):
                if combo in candidates:
                    counts_k[combo] = counts_k.get(combo, 0) + 1
        level = sorted(c for c, v in counts_k.items() if passes(v))
        frequent.update({c: counts_k[c] for c in level})
        k += 1

    return [
        Itemset(items, count, Fraction(count, n))
        for items, count in sorted(frequent.items(), key=lambda kv: (len(kv[0]), kv[0]))
    ]


def generate_rules(
    itemsets: Sequence[Itemset],
    transactions: Sequence[Transaction],
    min_conf_band: Mapping,
) -> list[AssociationRule]:
    """Rules A->B (and B->A) from 2-itemsets and {X,Y}->Z from 3-itemsets.

    confidence = support(antecedent + consequent) / support(antecedent);
    cooccurrence is the full itemset's transaction count.  The filter keeps
    rules with confidence >= a fixed threshold, or inside the average-derived
    band over all candidate confidences.
    """
    if not (set(min_conf_band) == {"fixed"} or set(min_conf_band) == {"ave_band"}):
        raise MiningError(
            f"min_conf_band must be {{'fixed': c}} or {{'ave_band': True}}, got {min_conf_band!r}")
    counts = {s.items: s.count for s in itemsets}

    candidates = []
    for s in itemsets:
        if len(s.items) < 2:
            continue
        for consequent in s.items:
            antecedent = tuple(i for i in s.items if i != consequent)
            if antecedent not in counts:
                raise MiningError(
                    f"antecedent {antecedent} missing from itemsets; "
                    "input does not satisfy the Apriori closure precondition")
            conf = Fraction(s.count, counts[antecedent])
            candidates.append(AssociationRule(antecedent, consequent, s.support, conf, s.count))

    if "fixed" in min_conf_band:
        floor = _to_fraction(min_conf_band["fixed"])
        kept = [r for r in candidates if r.confidence >= floor]
    elif candidates:
        band = band_around_average(r.confidence for r in candidates)
        kept = [r for r in candidates if band.min <= r.confidence <= band.max]
    else:
        kept = []
    kept.sort(key=lambda r: (len(r.antecedent), r.antecedent, r.consequent))
    return kept


def rules_report(rules: Iterable[AssociationRule]) -> str:
    """``antecedent<TAB>consequent<TAB>support<TAB>confidence<TAB>cooccurrence``."""
    lines = [
        f"{' '.join(r.antecedent)}\t{r.consequent}\t{float(r.support):.5f}"
        f"\t{float(r.confidence):.5f}\t{r.cooccurrence}"
        for r in rules
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def support_report(table: SupportTable, band: SupportBand, retained: set[str]) -> str:
    """Per-concept support rows with the band in header comments."""
    lines = [
        f"# n_transactions: {table.n_transactions}",
        f"# band_ave: {float(band.ave):.5f}",
        f"# band_max: {float(band.max):.5f}",
        f"# band_min: {float(band.min):.5f}",
    ]
    for c in sorted(table.counts):
        lines.append(
            f"{c}\t{table.counts[c]}\t{float(table.support[c]):.5f}"
            f"\t{1 if c in retained else 0}")
    return "\n".join(lines) + "\n"
