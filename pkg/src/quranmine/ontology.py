"""Concept graph assembly, Turtle serialization and a matching subset parser.

The exported Turtle uses one configurable namespace: concept IRIs are the
percent-encoded stems, relation types become properties, and verse evidence
is attached as ``"type|object|sura:aya"`` literals under ``qo:evidence``.
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence
from urllib.parse import quote, unquote

from .relations import RelationInstance


class OntologyError(ValueError):
    pass


class TurtleParseError(OntologyError):
    pass


@dataclass(frozen=True)
class ConceptNode:
    stem: str
    surfaces: tuple[str, ...] = ()
    count: int = 0

    def __post_init__(self):
        if not self.surfaces:
            object.__setattr__(self, "surfaces", (self.stem,))
        else:
            object.__setattr__(self, "surfaces", tuple(sorted(set(self.surfaces))))


def _edge_key(r: RelationInstance) -> tuple:
    return (r.subject, r.relation_type, r.object, tuple(sorted(set(r.evidence))))


class OntologyGraph:
    """Immutable concept graph; equality is set-wise over nodes and edges
    (pattern provenance is not part of graph identity)."""

    __slots__ = ("namespace", "concepts", "relations")

    def __init__(self, namespace: str, concepts: Iterable[ConceptNode],
                 relations: Iterable[RelationInstance]):
        if not namespace:
            raise OntologyError("namespace must be non-empty")
        nodes = {}
        for c in sorted(concepts, key=lambda c: c.stem):
            if c.stem in nodes:
                raise OntologyError(f"duplicate concept node {c.stem!r}")
            nodes[c.stem] = c
        rels = {}
        for r in relations:
            key = (r.subject, r.object, r.relation_type)
            if key in rels:
                prev = rels[key]
                merged = tuple(sorted(set(prev.evidence) | set(r.evidence)))
                rels[key] = RelationInstance(
                    r.subject, r.object, r.relation_type, merged,
                    prev.matched_pattern, len(merged))
            else:
                evidence = tuple(sorted(set(r.evidence)))
                rels[key] = RelationInstance(
                    r.subject, r.object, r.relation_type, evidence,
                    r.matched_pattern, len(evidence))
        for r in rels.values():
            for endpoint in (r.subject, r.object):
                if endpoint not in nodes:
                    raise OntologyError(f"relation endpoint {endpoint!r} not in concepts")
        object.__setattr__(self, "namespace", namespace)
        object.__setattr__(self, "concepts", nodes)
        object.__setattr__(self, "relations", tuple(
            sorted(rels.values(), key=lambda r: (r.subject, r.relation_type, r.object))))

    def __setattr__(self, name, value):  # pragma: no cover - guard only
        raise AttributeError("OntologyGraph is immutable")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, OntologyGraph)
            and self.namespace == other.namespace
            and set(self.concepts.values()) == set(other.concepts.values())
            and {_edge_key(r) for r in self.relations} == {_edge_key(r) for r in other.relations}
        )

    def __hash__(self):
        return hash((self.namespace, frozenset(self.concepts)))


def build_graph(
    concepts: Iterable[ConceptNode],
    relations: Sequence[RelationInstance],
    namespace: str,
) -> OntologyGraph:
    """Assemble the graph; endpoints missing from ``concepts`` are auto-added
    with count 0 and a warning."""
    nodes = {c.stem: c for c in concepts}
    for r in relations:
        for endpoint in (r.subject, r.object):
            if endpoint not in nodes:
                warnings.warn(
                    f"relation endpoint {endpoint!r} missing from concepts; "
                    "added with count 0", stacklevel=2)
                nodes[endpoint] = ConceptNode(endpoint)
    return OntologyGraph(namespace, nodes.values(), relations)


def _esc(literal: str) -> str:
    return literal.replace("\\", "\\\\").replace('"', '\\"')


def _iri(stem: str) -> str:
    return "qo:" + quote(stem, safe="")


def export_turtle(graph: OntologyGraph) -> str:
    """Deterministic Turtle rendering: concept blocks (stems lexicographic)
    followed by relation blocks sorted (subject, type, object)."""
    out = [f"@prefix qo: <{graph.namespace}> .", ""]
    for stem in sorted(graph.concepts):
        node = graph.concepts[stem]
        labels = " , ".join(f'"{_esc(s)}"' for s in node.surfaces)
        out.append(f"{_iri(stem)} a qo:Concept ;")
        out.append(f"    qo:label {labels} ;")
        out.append(f"    qo:count {node.count} .")
        out.append("")
    for r in graph.relations:
        out.append(f"{_iri(r.subject)} qo:{r.relation_type} {_iri(r.object)} ;")
        ev = " , ".join(
            f'"{_esc(f"{r.relation_type}|{r.object}|{s}:{a}")}"' for s, a in r.evidence)
        out.append(f"    qo:evidence {ev} .")
        out.append("")
    return "\n".join(out[:-1] if out[-1] == "" else out) + "\n"


_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>\#[^\n]*)
      | (?P<iriref><[^<>\s]*>)
      | (?P<literal>"(?:[^"\\]|\\.)*")
      | (?P<integer>-?[0-9]+)
      | (?P<pname>[A-Za-z_][A-Za-z0-9_-]*:[^\s;,.\]]*)
      | (?P<keyword>@prefix|\ba\b)
      | (?P<punct>[.;,])
    """,
    re.VERBOSE,
)


def _tokenize_turtle(text: str):
    pos = 0
    line = 1
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise TurtleParseError(f"line {line}: unexpected character {text[pos]!r}")
        line += text[pos:m.end()].count("\n")
        pos = m.end()
        kind = m.lastgroup
        if kind in ("ws", "comment"):
            continue
        tokens.append((kind, m.group(), line))
    return tokens


def _unesc(raw: str) -> str:
    return raw[1:-1].replace('\\"', '"').replace("\\\\", "\\")


def import_turtle(text: str, known_types: set[str] | None = None) -> OntologyGraph:
    """Parse Turtle produced by :func:`export_turtle` back into a graph.

    When ``known_types`` is given, any relation property outside it is an
    error.
    """
    tokens = _tokenize_turtle(text)
    i = 0

    def peek(k=0):
        return tokens[i + k] if i + k < len(tokens) else (None, None, tokens[-1][2] if tokens else 1)

    def take(kind=None, value=None):
        nonlocal i
        if i >= len(tokens):
            raise TurtleParseError("unexpected end of document")
        tk, tv, tl = tokens[i]
        if (kind and tk != kind) or (value and tv != value):
            raise TurtleParseError(f"line {tl}: expected {value or kind}, got {tv!r}")
        i += 1
        return tv, tl

    take("keyword", "@prefix")
    take("pname")  # prefix label, e.g. qo:
    iri, _ = take("iriref")
    namespace = iri[1:-1]
    take("punct", ".")

    def local(pname: str, lineno: int) -> str:
        _, _, name = pname.partition(":")
        if not name:
            raise TurtleParseError(f"line {lineno}: bare prefix {pname!r} where a name was expected")
        return name

    nodes: dict[str, dict] = {}
    edges: dict[tuple[str, str, str], set] = {}
    evidence_literals: list[tuple[str, str, int]] = []

    while peek()[0] is not None:
        subj_tok, subj_line = take("pname")
        subject = unquote(local(subj_tok, subj_line))
        while True:
            kind, value, lineno = peek()
            if kind == "keyword" and value == "a":
                take()
                cls, cl_line = take("pname")
                if local(cls, cl_line) != "Concept":
                    raise TurtleParseError(f"line {cl_line}: unknown class {cls!r}")
                nodes.setdefault(subject, {"surfaces": [], "count": 0})
            elif kind == "pname":
                take()
                prop = local(value, lineno)
                objects = []
                while True:
                    okind, ovalue, oline = peek()
                    if okind == "literal":
                        take()
                        objects.append(("literal", _unesc(ovalue), oline))
                    elif okind == "integer":
                        take()
                        objects.append(("integer", int(ovalue), oline))
                    elif okind == "pname":
                        take()
                        objects.append(("iri", unquote(local(ovalue, oline)), oline))
                    else:
                        raise TurtleParseError(f"line {oline}: expected an object, got {ovalue!r}")
                    if peek()[0] == "punct" and peek()[1] == ",":
                        take()
                        continue
                    break
                entry = nodes.setdefault(subject, {"surfaces": [], "count": 0})
                if prop == "label":
                    for okind, oval, oline in objects:
                        if okind != "literal":
                            raise TurtleParseError(f"line {oline}: label must be a literal")
                        entry["surfaces"].append(oval)
                elif prop == "count":
                    for okind, oval, oline in objects:
                        if okind != "integer":
                            raise TurtleParseError(f"line {oline}: count must be an integer")
                        entry["count"] = oval
                elif prop == "evidence":
                    for okind, oval, oline in objects:
                        if okind != "literal":
                            raise TurtleParseError(f"line {oline}: evidence must be a literal")
                        evidence_literals.append((subject, oval, oline))
                else:
                    if known_types is not None and prop not in known_types:
                        raise TurtleParseError(f"line {lineno}: unknown property name {prop!r}")
                    for okind, oval, oline in objects:
                        if okind != "iri":
                            raise TurtleParseError(
                                f"line {oline}: relation object must be a concept IRI")
                        edges.setdefault((subject, oval, prop), set())
            else:
                raise TurtleParseError(f"line {lineno}: expected a predicate, got {value!r}")
            kind, value, lineno = peek()
            if kind == "punct" and value == ";":
                take()
                continue
            if kind == "punct" and value == ".":
                take()
                break
            raise TurtleParseError(f"line {lineno}: expected ';' or '.', got {value!r}")

    for subject, literal, lineno in evidence_literals:
        parts = literal.split("|")
        if len(parts) != 3 or ":" not in parts[2]:
            raise TurtleParseError(f"line {lineno}: malformed evidence literal {literal!r}")
        rel, obj, ref = parts
        key = (subject, obj, rel)
        if key not in edges:
            raise TurtleParseError(
                f"line {lineno}: evidence for missing relation {subject!r} -{rel}-> {obj!r}")
        sura, _, aya = ref.partition(":")
        try:
            edges[key].add((int(sura), int(aya)))
        except ValueError:
            raise TurtleParseError(f"line {lineno}: malformed verse ref {ref!r}") from None

    concepts = [
        ConceptNode(stem, tuple(d["surfaces"]) or (stem,), d["count"])
        for stem, d in nodes.items()
    ]
    relations = [
        RelationInstance(s, o, rel, tuple(sorted(ev)), None, len(ev))
        for (s, o, rel), ev in edges.items()
    ]
    try:
        return OntologyGraph(namespace, concepts, relations)
    except OntologyError as exc:
        raise TurtleParseError(str(exc)) from None


def query(
    graph: OntologyGraph, concept: str, direction: str = "out"
) -> list[tuple[str, str, tuple[tuple[int, int], ...]]]:
    """Incident edges of a concept as (relation_type, other, evidence)."""
    if direction not in ("out", "in", "both"):
        raise OntologyError(f"direction must be out/in/both, got {direction!r}")
    if concept not in graph.concepts:
        raise OntologyError(f"unknown concept {concept!r}")
    hits = []
    for r in graph.relations:
        if direction in ("out", "both") and r.subject == concept:
            hits.append((r.relation_type, r.object, r.evidence))
        if direction in ("in", "both") and r.object == concept:
            hits.append((r.relation_type, r.subject, r.evidence))
    hits.sort(key=lambda h: (h[0], h[1]))
    return hits


def relations_report(relations: Iterable[RelationInstance]) -> str:
    """``subject<TAB>relation<TAB>object<TAB>evidence_count`` rows."""
    lines = [
        f"{r.subject}\t{r.relation_type}\t{r.object}\t{len(r.evidence)}"
        for r in sorted(relations, key=lambda r: (r.subject, r.relation_type, r.object))
    ]
    return "\n".join(lines) + ("\n" if lines else "")
