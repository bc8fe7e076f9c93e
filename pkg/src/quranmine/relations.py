"""Trigger/pattern filtering of mined rules into typed relation instances.

The trigger, pattern and category vocabulary loads from a data document and
is re-stemmed through the active stemmer config so it matches pipeline stems.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .arabic import NormalizationConfig, StemmerConfig, normalize, stem
from .mining import AssociationRule, Transaction


class LexiconError(ValueError):
    pass


_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
# property names reserved by the Turtle exporter
_RESERVED_TYPE_NAMES = {"label", "count", "evidence", "Concept"}

POSITION_MODES = ("at_or_after", "any")


@dataclass(frozen=True)
class RelationType:
    name: str
    directed: bool = True


@dataclass(frozen=True)
class Trigger:
    name: str  # first declared surface form
    surface_stems: frozenset[str]
    relation_type: str
    description: str = ""


@dataclass(frozen=True)
class CategoryLexicon:
    categories: Mapping[str, frozenset[str]]

    def members(self, name: str) -> frozenset[str]:
        try:
            return self.categories[name]
        except KeyError:
            raise LexiconError(f"unknown category {name!r}") from None


@dataclass(frozen=True)
class Pattern:
    """``category + trigger -> consequent_category @ relation_type``.

    The consequent slot is advisory unless ``enforce_consequent`` is set.
    """
    category: str
    trigger: Trigger
    consequent_category: str
    relation_type: str
    enforce_consequent: bool = False

    @property
    def label(self) -> str:
        return (f"{self.category} + {self.trigger.name} -> "
                f"{self.consequent_category} @ {self.relation_type}")


@dataclass(frozen=True)
class Lexicons:
    relation_types: tuple[RelationType, ...]
    categories: CategoryLexicon
    triggers: tuple[Trigger, ...]
    patterns: tuple[Pattern, ...]


@dataclass(frozen=True)
class RuleMatch:
    rule: AssociationRule
    pattern: Pattern
    concept: str  # the category-slot antecedent
    evidence: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class RelationInstance:
    subject: str
    object: str
    relation_type: str
    evidence: tuple[tuple[int, int], ...]
    matched_pattern: Pattern | None
    cooccurrence: int


def _sections(doc: str) -> dict[str, list[tuple[int, str]]]:
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(doc.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = re.match(r"^\[([a-z_]+)\]$", line)
        if m:
            current = sections.setdefault(m.group(1), [])
            continue
        if current is None:
            raise LexiconError(f"line {lineno}: entry {line!r} before any [section]")
        current.append((lineno, line))
    return sections


def load_lexicons(doc: str, ncfg: NormalizationConfig, scfg: StemmerConfig) -> Lexicons:
    """Parse the relation-type/category/trigger/pattern document.

    All member and trigger surfaces are normalized and stemmed with the given
    configs; every cross-reference must resolve.
    """
    sections = _sections(doc)
    prep = lambda w: stem(normalize(w, ncfg), scfg)

    type_names: list[str] = []
    for lineno, line in sections.get("relation_types", []):
        name = line.strip()
        if not _IDENT.match(name):
            raise LexiconError(f"line {lineno}: relation type {name!r} is not an identifier")
        if name in _RESERVED_TYPE_NAMES:
            raise LexiconError(f"line {lineno}: relation type {name!r} is reserved")
        if name in type_names:
            raise LexiconError(f"line {lineno}: duplicate relation type {name!r}")
        type_names.append(name)
    registry = tuple(RelationType(n) for n in type_names)

    categories: dict[str, frozenset[str]] = {}
    for lineno, line in sections.get("categories", []):
        name, sep, members = line.partition(":")
        if not sep:
            raise LexiconError(f"line {lineno}: category entry needs 'name: members'")
        name = name.strip()
        stems = frozenset(prep(m.strip()) for m in members.split(",") if m.strip())
        categories[name] = categories.get(name, frozenset()) | stems
    lexicon = CategoryLexicon(categories)

    triggers: list[Trigger] = []
    by_surface: dict[str, Trigger] = {}
    for lineno, line in sections.get("triggers", []):
        head, sep, rest = line.partition("->")
        if not sep:
            raise LexiconError(f"line {lineno}: trigger entry needs 'surfaces -> relation_type'")
        surfaces = [s.strip() for s in head.split(",") if s.strip()]
        rel, _, desc = rest.partition("#")
        rel = rel.strip()
        if not surfaces:
            raise LexiconError(f"line {lineno}: trigger with no surface forms")
        if rel not in type_names:
            raise LexiconError(f"line {lineno}: trigger references unknown relation type {rel!r}")
        trig = Trigger(surfaces[0], frozenset(prep(s) for s in surfaces), rel, desc.strip())
        triggers.append(trig)
        for s in surfaces:
            by_surface.setdefault(s, trig)
            by_surface.setdefault(prep(s), trig)

    patterns: list[Pattern] = []
    for lineno, line in sections.get("patterns", []):
        strict = False
        body = line
        if body.endswith("strict"):
            strict = True
            body = body[: -len("strict")].strip()
        m = re.match(r"^(.+?)\+(.+?)->(.+?)@(.+)$", body)
        if not m:
            raise LexiconError(
                f"line {lineno}: pattern entry needs "
                f"'category + trigger -> category @ relation_type'")
        cat, trig_ref, conseq, rel = (g.strip() for g in m.groups())
        if cat not in categories:
            raise LexiconError(f"line {lineno}: pattern references unknown category {cat!r}")
        if conseq not in categories:
            raise LexiconError(
                f"line {lineno}: pattern consequent references unknown category {conseq!r}")
        trig = by_surface.get(trig_ref) or by_surface.get(prep(trig_ref))
        if trig is None:
            raise LexiconError(f"line {lineno}: pattern references undefined trigger {trig_ref!r}")
        if rel not in type_names:
            raise LexiconError(f"line {lineno}: pattern references unknown relation type {rel!r}")
        patterns.append(Pattern(cat, trig, conseq, rel, strict))

    return Lexicons(registry, lexicon, tuple(triggers), tuple(patterns))


def trigger_stems(lexicons: Lexicons) -> set[str]:
    out: set[str] = set()
    for t in lexicons.triggers:
        out |= t.surface_stems
    return out


@dataclass(frozen=True)
class TriggerIndex:
    """Trigger occurrences plus the transactions they were scanned from."""
    occurrences: Mapping[Trigger, frozenset[tuple[tuple[int, int], int]]]
    by_ref: Mapping[tuple[int, int], Transaction]


def find_trigger_cooccurrences(
    transactions: Sequence[Transaction], triggers: Iterable[Trigger]
) -> TriggerIndex:
    """Record (verse, position) for every trigger stem present in a
    transaction; repeated occurrences keep the earliest position."""
    occ: dict[Trigger, set[tuple[tuple[int, int], int]]] = {}
    for t in transactions:
        for trig in triggers:
            positions = [t.order[s] for s in trig.surface_stems if s in t.order]
            if positions:
                occ.setdefault(trig, set()).add((t.verse_ref, min(positions)))
    return TriggerIndex(
        {trig: frozenset(entries) for trig, entries in occ.items()},
        {t.verse_ref: t for t in transactions},
    )


def _evidence(
    concept: str, trig_item: str, index: TriggerIndex, position_mode: str
) -> tuple[tuple[int, int], ...]:
    refs = []
    for ref in sorted(index.by_ref):
        t = index.by_ref[ref]
        if concept in t.items and trig_item in t.items:
            if position_mode == "any" or t.order[trig_item] >= t.order[concept]:
                refs.append(ref)
    return tuple(refs)


def match_patterns(
    rules: Sequence[AssociationRule],
    patterns: Sequence[Pattern],
    lexicon: CategoryLexicon,
    cooccurrences: TriggerIndex,
    position_mode: str = "at_or_after",
) -> list[RuleMatch]:
    """Keep rules where one antecedent is a pattern's category member and the
    other is that pattern's trigger, with verse evidence placing the trigger
    at or after the concept.  The first pattern in document order wins;
    unmatched rules are dropped.
    """
    if position_mode not in POSITION_MODES:
        raise LexiconError(f"position_mode must be one of {POSITION_MODES}")
    matches = []
    for rule in rules:
        antecedents = rule.antecedent[:2]
        found = None
        for pattern in patterns:
            members = lexicon.members(pattern.category)
            tstems = pattern.trigger.surface_stems
            for concept, other in (
                (antecedents[0], antecedents[-1]),
                (antecedents[-1], antecedents[0]),
            ):
                if concept == other or concept not in members or other not in tstems:
                    continue
                if pattern.enforce_consequent and (
                    rule.consequent not in lexicon.members(pattern.consequent_category)
                ):
                    continue
                evidence = _evidence(concept, other, cooccurrences, position_mode)
                if evidence:
                    found = RuleMatch(rule, pattern, concept, evidence)
                    break
            if found:
                break
        if found:
            matches.append(found)
    return matches


def typed_relations(
    matches: Sequence[RuleMatch], cooccurrences: TriggerIndex | None = None
) -> list[RelationInstance]:
    """One typed edge per match: category concept -> rule consequent.

    Duplicate (subject, object, type) triples merge with unioned evidence;
    instances whose subject equals their object are discarded.
    """
    merged: dict[tuple[str, str, str], tuple[set, Pattern]] = {}
    for m in matches:
        subject, obj = m.concept, m.rule.consequent
        if subject == obj:
            continue
        key = (subject, obj, m.pattern.relation_type)
        if key in merged:
            merged[key][0].update(m.evidence)
        else:
            merged[key] = (set(m.evidence), m.pattern)
    out = []
    for (subject, obj, rel), (evidence, pattern) in merged.items():
        refs = tuple(sorted(evidence))
        out.append(RelationInstance(subject, obj, rel, refs, pattern, len(refs)))
    out.sort(key=lambda r: (r.subject, r.relation_type, r.object))
    return out


def confidence_filter(
    relations: Sequence[RelationInstance], min_cooccurrence: int
) -> list[RelationInstance]:
    if min_cooccurrence < 1:
        raise LexiconError(f"min_cooccurrence must be >= 1, got {min_cooccurrence}")
    return [r for r in relations if r.cooccurrence >= min_cooccurrence]
