"""End-to-end pipeline: config loading, the five stages (stats, terms, mine,
relate, export) and deterministic artifact writing.

Each stage produces a mapping of artifact filename to content; the runner
writes to a temp area and moves files into place only on success, so a failed
run never leaves partial artifacts.  Stages consume the previous stage's
serialized artifacts, which makes single-stage runs inspectable and keeps
``run_pipeline`` equal to running the stages back to back.
"""
from __future__ import annotations

import importlib.resources
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import yaml

from . import arabic, corpus as corpus_mod, mining, ontology, relations, terms as terms_mod
from .arabic import NormalizationConfig, StemmerConfig
from .corpus import Corpus, CorpusError, parse_corpus, select_subcorpus
from .mining import AssociationRule, Transaction
from .relations import Lexicons, RelationInstance
from .terms import TermList

STAGES = ("stats", "terms", "mine", "relate", "export")


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class FunnelRow:
    sura_no: int
    term_count: int
    transactions: int
    frequent_itemsets: int
    generated_rules: int
    accepted_rules: int
    relation_instances: int

    def __post_init__(self):
        if self.accepted_rules > self.generated_rules:
            raise PipelineError(
                f"sura {self.sura_no}: accepted rules ({self.accepted_rules}) "
                f"exceed generated rules ({self.generated_rules})")


@dataclass(frozen=True)
class PipelineConfig:
    corpus_path: Path
    sura_selection: tuple[int, ...] | str  # explicit list or "all"
    ncfg: NormalizationConfig
    scfg: StemmerConfig
    lexicons: Lexicons
    term_limit: int | None
    term_min_freq: int | None
    boost_multiword: Fraction
    max_term_len: int
    vocabulary_scope: str  # per_sura | global
    k_max: int
    min_support: Mapping
    support_filter: str  # band | none
    confidence: Mapping
    min_cooccurrence: int
    trigger_position: str
    namespace: str
    out_dir: Path = field(default=Path("out"))


def _resolve(path_value: str, config_dir: Path) -> Path:
    if path_value.startswith("pkg:"):
        name = path_value[4:]
        return Path(str(importlib.resources.files("quranmine") / "data" / name))
    p = Path(path_value)
    return p if p.is_absolute() else config_dir / p


def default_config_path() -> Path:
    return Path(str(importlib.resources.files("quranmine") / "data" / "pipeline.yaml"))


def load_config(
    config_path,
    corpus_override=None,
    suras_override=None,
    out_override=None,
) -> PipelineConfig:
    """Load and validate the pipeline config; every referenced file must
    exist and parse (fail-fast)."""
    config_path = Path(config_path)
    try:
        with open(config_path, encoding="utf-8") as f:
            doc = yaml.safe_load(f)
    except OSError as exc:
        raise PipelineError(f"cannot read config {config_path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise PipelineError(f"config {config_path} is not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise PipelineError("config document must be a mapping")
    cfg_dir = config_path.parent

    def section(name) -> dict:
        value = doc.get(name, {})
        if not isinstance(value, dict):
            raise PipelineError(f"config section {name!r} must be a mapping")
        return value

    corpus_path = Path(corpus_override) if corpus_override else _resolve(
        str(doc.get("corpus", "")), cfg_dir)
    if not str(corpus_path) or not corpus_path.is_file():
        raise PipelineError(f"corpus file not found: {corpus_path}")

    if suras_override is not None:
        suras = suras_override
    else:
        suras = doc.get("suras", "all")
    if isinstance(suras, str):
        if suras != "all":
            raise PipelineError(f"suras must be a list or 'all', got {suras!r}")
        selection: tuple[int, ...] | str = "all"
    else:
        try:
            selection = tuple(int(s) for s in suras)
        except (TypeError, ValueError):
            raise PipelineError(f"suras must be integers, got {suras!r}") from None
        if not selection:
            raise PipelineError("empty selection: config selects zero suras")

    text = section("text")
    npath = _resolve(str(text.get("normalization", "pkg:textproc.conf")), cfg_dir)
    spath = _resolve(str(text.get("stemmer", "pkg:textproc.conf")), cfg_dir)
    stoppath = _resolve(str(text.get("stoplist", str(spath))), cfg_dir)
    for p in (npath, spath, stoppath):
        if not p.is_file():
            raise PipelineError(f"text config file not found: {p}")
    try:
        ncfg, scfg = arabic.load_text_configs(npath, spath, stoppath)
    except arabic.ConfigError as exc:
        raise PipelineError(f"text config: {exc}") from None

    t = section("terms")
    limit = t.get("limit")
    min_freq = t.get("min_freq")
    if (limit is None) == (min_freq is None):
        raise PipelineError("terms config needs exactly one of limit/min_freq")
    boost = t.get("boost_multiword", 1.5)
    try:
        boost = Fraction(str(boost))
    except ValueError:
        raise PipelineError(f"boost_multiword must be numeric, got {boost!r}") from None
    max_term_len = int(t.get("max_len", 3))
    if not 1 <= max_term_len <= 3:
        raise PipelineError(f"terms max_len must be in [1, 3], got {max_term_len}")
    scope = t.get("scope", "per_sura")
    if scope not in ("per_sura", "global"):
        raise PipelineError(f"terms scope must be per_sura or global, got {scope!r}")

    m = section("mining")
    k_max = int(m.get("k_max", 3))
    if not 1 <= k_max <= 3:
        raise PipelineError(f"mining k_max must be in [1, 3], got {k_max}")
    min_support = m.get("min_support", {"count": 1})
    if not isinstance(min_support, dict) or set(min_support) not in ({"count"}, {"fraction"}):
        raise PipelineError(
            f"min_support must be {{count: n}} or {{fraction: f}}, got {min_support!r}")
    support_filter = m.get("support_filter", "band")
    if support_filter not in ("band", "none"):
        raise PipelineError(f"support_filter must be band or none, got {support_filter!r}")
    confidence = m.get("confidence", {"ave_band": True})
    if not isinstance(confidence, dict) or set(confidence) not in ({"fixed"}, {"ave_band"}):
        raise PipelineError(
            f"confidence must be {{fixed: c}} or {{ave_band: true}}, got {confidence!r}")

    r = section("relations")
    lexpath = _resolve(str(r.get("lexicon", "pkg:lexicon.conf")), cfg_dir)
    if not lexpath.is_file():
        raise PipelineError(f"lexicon file not found: {lexpath}")
    with open(lexpath, encoding="utf-8") as f:
        try:
            lexicons = relations.load_lexicons(f.read(), ncfg, scfg)
        except relations.LexiconError as exc:
            raise PipelineError(f"lexicon: {exc}") from None
    min_cooc = int(r.get("min_cooccurrence", 1))
    if min_cooc < 1:
        raise PipelineError(f"min_cooccurrence must be >= 1, got {min_cooc}")
    position = r.get("trigger_position", "at_or_after")
    if position not in relations.POSITION_MODES:
        raise PipelineError(
            f"trigger_position must be one of {relations.POSITION_MODES}, got {position!r}")

    o = section("output")
    namespace = str(o.get("namespace", "http://example.org/quran-ontology#"))
    if not namespace:
        raise PipelineError("output namespace must be non-empty")
    out_dir = Path(out_override) if out_override else Path(str(o.get("dir", "out")))

    return PipelineConfig(
        corpus_path=corpus_path,
        sura_selection=selection,
        ncfg=ncfg,
        scfg=scfg,
        lexicons=lexicons,
        term_limit=int(limit) if limit is not None else None,
        term_min_freq=int(min_freq) if min_freq is not None else None,
        boost_multiword=boost,
        max_term_len=max_term_len,
        vocabulary_scope=scope,
        k_max=k_max,
        min_support=min_support,
        support_filter=support_filter,
        confidence=confidence,
        min_cooccurrence=min_cooc,
        trigger_position=position,
        namespace=namespace,
        out_dir=out_dir,
    )


# --- shared stage helpers ---

def _load_corpus(cfg: PipelineConfig) -> Corpus:
    with open(cfg.corpus_path, encoding="utf-8") as f:
        full = parse_corpus(f)
    if cfg.sura_selection == "all":
        return full
    return select_subcorpus(full, list(cfg.sura_selection))


def _sura_groups(cfg: PipelineConfig, selected: Corpus) -> list[tuple[int | None, Corpus]]:
    if cfg.vocabulary_scope == "global":
        return [(None, selected)]
    return [(s, select_subcorpus(selected, [s])) for s in selected.sura_nos]


def _group_key(sura_no: int | None) -> int:
    return 0 if sura_no is None else sura_no


def _preprocess_group(group: Corpus, cfg: PipelineConfig) -> list[list[arabic.Token]]:
    return [
        arabic.preprocess_verse(v.sura_no, v.aya_no, v.text, cfg.ncfg, cfg.scfg)
        for v in group
    ]


def _term_list(group: Corpus, sura_no: int | None, cfg: PipelineConfig) -> TermList:
    tokens = _preprocess_group(group, cfg)
    candidates = terms_mod.extract_candidates(tokens, cfg.max_term_len)
    scored = terms_mod.score_terms(candidates, cfg.boost_multiword)
    return terms_mod.select_terms(
        scored, sura_no, limit=cfg.term_limit, min_freq=cfg.term_min_freq)


# --- stages; each returns {artifact filename: content} ---

def stage_stats(cfg: PipelineConfig, out_dir: Path) -> dict[str, str]:
    selected = _load_corpus(cfg)
    stats = corpus_mod.corpus_stats(selected, cfg.ncfg)
    return {"stats.tsv": corpus_mod.stats_report(stats)}


def stage_terms(cfg: PipelineConfig, out_dir: Path) -> dict[str, str]:
    selected = _load_corpus(cfg)
    lists = [_term_list(group, sura_no, cfg) for sura_no, group in _sura_groups(cfg, selected)]
    return {"terms.tsv": terms_mod.terms_report(lists)}


def _read_artifact(out_dir: Path, name: str, needed_by: str) -> str:
    path = out_dir / name
    if not path.is_file():
        raise PipelineError(
            f"{needed_by}: missing upstream artifact {name}; run the earlier stages first")
    return path.read_text(encoding="utf-8")


def _parse_terms_artifact(text: str) -> dict[int, TermList]:
    by_sura: dict[int, list] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise PipelineError(f"terms.tsv line {lineno}: expected 4 columns")
        sura, _rank, score, stems = parts
        by_sura.setdefault(int(sura), []).append(
            terms_mod.ScoredTerm(tuple(stems.split()), 1, (0, lineno), Fraction(str(score))))
    return {
        sura: TermList(sura if sura != 0 else None, tuple(entries))
        for sura, entries in by_sura.items()
    }


def _transactions_artifact(transactions: list[Transaction]) -> str:
    lines = []
    for t in transactions:
        cells = ",".join(
            f"{item}={pos}" for item, pos in sorted(t.order.items(), key=lambda kv: (kv[1], kv[0])))
        lines.append(f"{t.verse_ref[0]}\t{t.verse_ref[1]}\t{cells}")
    return "\n".join(lines) + ("\n" if lines else "")


def _parse_transactions_artifact(text: str) -> list[Transaction]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise PipelineError(f"transactions line {lineno}: expected 3 columns")
        sura, aya, cells = parts
        order = {}
        if cells:
            for cell in cells.split(","):
                item, _, pos = cell.rpartition("=")
                order[item] = int(pos)
        out.append(Transaction((int(sura), int(aya)), frozenset(order), order))
    return out


def _parse_rules_artifact(text: str) -> list[AssociationRule]:
    rules = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise PipelineError(f"rules line {lineno}: expected 5 columns")
        antecedent, consequent, support, confidence, cooc = parts
        rules.append(AssociationRule(
            tuple(antecedent.split()), consequent,
            Fraction(str(support)), Fraction(str(confidence)), int(cooc)))
    return rules


def stage_mine(cfg: PipelineConfig, out_dir: Path) -> dict[str, str]:
    selected = _load_corpus(cfg)
    vocab_by_sura = _parse_terms_artifact(_read_artifact(out_dir, "terms.tsv", "mine"))
    trig_stems = sorted(relations.trigger_stems(cfg.lexicons))

    artifacts: dict[str, str] = {}
    meta_lines = []
    concept_counts: dict[str, int] = {}
    concept_surfaces: dict[str, set[str]] = {}

    for sura_no, group in _sura_groups(cfg, selected):
        key = _group_key(sura_no)
        if key not in vocab_by_sura:
            raise PipelineError(f"mine: terms.tsv has no vocabulary for sura {key}")
        vocab = vocab_by_sura[key]
        transactions = mining.build_transactions(
            group, vocab, cfg.ncfg, cfg.scfg, extra_items=trig_stems)
        table = mining.concept_support(transactions)
        if table.counts:
            band = mining.support_band(table)
            if cfg.support_filter == "band":
                retained = mining.filter_concepts(table, band)
                # triggers are the linguistic signal: they bypass the band
                retained |= set(trig_stems) & set(table.counts)
            else:
                retained = set(table.counts)
            artifacts[f"support_s{key:03d}.tsv"] = mining.support_report(table, band, retained)
        else:
            retained = set()
            artifacts[f"support_s{key:03d}.tsv"] = f"# n_transactions: {table.n_transactions}\n"
        restricted = mining.restrict_transactions(transactions, retained)
        itemsets = mining.mine_frequent_itemsets(restricted, cfg.k_max, cfg.min_support)
        rules = mining.generate_rules(itemsets, restricted, cfg.confidence)

        artifacts[f"transactions_s{key:03d}.tsv"] = _transactions_artifact(restricted)
        artifacts[f"rules_s{key:03d}.tsv"] = mining.rules_report(rules)
        meta_lines.append(
            f"{key}\t{len(vocab.terms)}\t{len(restricted)}\t{len(itemsets)}\t{len(rules)}")

        for c in sorted(retained):
            concept_counts[c] = concept_counts.get(c, 0) + table.counts.get(c, 0)
        tokens = _preprocess_group(group, cfg)
        wanted_uni = {c for c in retained if mining.JOINER not in c}
        for verse_tokens in tokens:
            for tok in verse_tokens:
                if tok.stem in wanted_uni:
                    concept_surfaces.setdefault(tok.stem, set()).add(tok.surface)

    artifacts["mine_meta.tsv"] = "\n".join(meta_lines) + ("\n" if meta_lines else "")
    concept_lines = [
        f"{c}\t{concept_counts[c]}\t{' '.join(sorted(concept_surfaces.get(c, {c})))}"
        for c in sorted(concept_counts)
    ]
    artifacts["concepts.tsv"] = "\n".join(concept_lines) + ("\n" if concept_lines else "")
    return artifacts


def stage_relate(cfg: PipelineConfig, out_dir: Path) -> dict[str, str]:
    meta = _read_artifact(out_dir, "mine_meta.tsv", "relate")
    funnel_rows: list[FunnelRow] = []
    all_instances: list[RelationInstance] = []

    for line in meta.splitlines():
        if not line.strip():
            continue
        key, term_count, n_transactions, n_itemsets, n_rules = (int(x) for x in line.split("\t"))
        transactions = _parse_transactions_artifact(
            _read_artifact(out_dir, f"transactions_s{key:03d}.tsv", "relate"))
        rules = _parse_rules_artifact(
            _read_artifact(out_dir, f"rules_s{key:03d}.tsv", "relate"))
        index = relations.find_trigger_cooccurrences(transactions, cfg.lexicons.triggers)
        matches = relations.match_patterns(
            rules, cfg.lexicons.patterns, cfg.lexicons.categories, index,
            cfg.trigger_position)
        instances = relations.confidence_filter(
            relations.typed_relations(matches), cfg.min_cooccurrence)
        all_instances.extend(instances)
        funnel_rows.append(FunnelRow(
            key, term_count, n_transactions, n_itemsets, n_rules,
            len(matches), len(instances)))

    evidence_lines = [
        f"{r.subject}\t{r.relation_type}\t{r.object}\t"
        + " ".join(f"{s}:{a}" for s, a in r.evidence)
        for r in sorted(all_instances, key=lambda r: (r.subject, r.relation_type, r.object))
    ]
    return {
        "funnel.tsv": funnel_report(funnel_rows),
        "relations.tsv": ontology.relations_report(all_instances),
        "relations_evidence.tsv": "\n".join(evidence_lines) + ("\n" if evidence_lines else ""),
    }


def funnel_report(rows: list[FunnelRow]) -> str:
    lines = ["# sura\tterms\ttransactions\titemsets\trules\taccepted\trelations"]
    for r in rows:
        lines.append(
            f"{r.sura_no}\t{r.term_count}\t{r.transactions}\t{r.frequent_itemsets}"
            f"\t{r.generated_rules}\t{r.accepted_rules}\t{r.relation_instances}")
    return "\n".join(lines) + "\n"


def parse_funnel(text: str) -> list[FunnelRow]:
    rows = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        rows.append(FunnelRow(*(int(x) for x in line.split("\t"))))
    return rows


def stage_export(cfg: PipelineConfig, out_dir: Path) -> dict[str, str]:
    concepts_text = _read_artifact(out_dir, "concepts.tsv", "export")
    evidence_text = _read_artifact(out_dir, "relations_evidence.tsv", "export")
    nodes = []
    for lineno, line in enumerate(concepts_text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise PipelineError(f"concepts.tsv line {lineno}: expected 3 columns")
        stem, count, surfaces = parts
        nodes.append(ontology.ConceptNode(stem, tuple(surfaces.split()), int(count)))
    instances = []
    for lineno, line in enumerate(evidence_text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise PipelineError(f"relations_evidence.tsv line {lineno}: expected 4 columns")
        subject, rel, obj, refs = parts
        evidence = tuple(
            (int(s), int(a)) for s, _, a in (r.partition(":") for r in refs.split()))
        instances.append(RelationInstance(subject, obj, rel, evidence, None, len(evidence)))
    graph = ontology.build_graph(nodes, instances, cfg.namespace)
    return {"ontology.ttl": ontology.export_turtle(graph)}


_STAGE_FUNCS = {
    "stats": stage_stats,
    "terms": stage_terms,
    "mine": stage_mine,
    "relate": stage_relate,
    "export": stage_export,
}


def run_stage(name: str, cfg: PipelineConfig, seedless: bool = False) -> dict[str, str]:
    """Execute one stage and commit its artifacts atomically.

    With ``seedless`` the stage runs twice and the outputs must be
    byte-identical, asserting that the pipeline is deterministic.
    """
    if name not in _STAGE_FUNCS:
        raise PipelineError(f"unknown stage {name!r}; stages are {', '.join(STAGES)}")
    out_dir = cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = _STAGE_FUNCS[name](cfg, out_dir)
    if seedless:
        again = _STAGE_FUNCS[name](cfg, out_dir)
        if again != artifacts:
            differing = sorted(
                k for k in set(artifacts) | set(again) if artifacts.get(k) != again.get(k))
            raise PipelineError(
                f"stage {name} is not deterministic; differing artifacts: {differing}")
    tmp = tempfile.mkdtemp(prefix=f".{name}-", dir=out_dir)
    try:
        for fname, content in artifacts.items():
            tmp_path = Path(tmp) / fname
            tmp_path.write_text(content, encoding="utf-8")
        for fname in artifacts:
            os.replace(Path(tmp) / fname, out_dir / fname)
    finally:
        for leftover in Path(tmp).iterdir():
            leftover.unlink()
        os.rmdir(tmp)
    return artifacts


def run_pipeline(cfg: PipelineConfig, seedless: bool = False) -> dict[str, dict[str, str]]:
    """Run all stages in order; returns {stage: artifacts}."""
    return {name: run_stage(name, cfg, seedless) for name in STAGES}
