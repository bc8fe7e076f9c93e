"""Arabic normalization, tokenization, stop-word removal and light stemming.

All operations are pure functions of (input, config); configs are immutable
after load, so everything here is safe for concurrent use.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

# Harakat, Quranic annotation marks and the dagger alef.
_DIACRITICS = re.compile(r"[ؐ-ًؚ-ٰٟۖ-ۭ]")
_TATWEEL = "ـ"
# Hamzated alef variants and alef wasla.
_ALEF_FORMS = re.compile(r"[آأإٱ]")
_ALEF_MAQSURA = "ى"
_YA = "ي"
_TA_MARBUTA = "ة"
_HA = "ه"

# Tokens are runs of word characters; marks are kept inside a run so that
# tokenizing not-yet-normalized text does not split words at diacritics.
_TOKEN = re.compile(r"[\wؐ-ًؚ-ٰٟۖ-ۭ]+")


class ConfigError(ValueError):
    """Malformed normalization/stemmer configuration document."""


@dataclass(frozen=True)
class NormalizationConfig:
    strip_diacritics: bool = True
    strip_tatweel: bool = True
    unify_alef: bool = True
    unify_ya: bool = True
    unify_ta_marbuta: bool = False


@dataclass(frozen=True)
class StemmerConfig:
    """Affix lists for one-pass light stemming plus the stop-word set.

    Affix lists are kept sorted by descending length so that the first match
    is the longest match.
    """

    prefixes: tuple[str, ...] = ()
    suffixes: tuple[str, ...] = ()
    min_stem_len: int = 3
    stop_words: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.min_stem_len < 2:
            raise ConfigError("min_stem_len must be >= 2")
        for name in ("prefixes", "suffixes"):
            entries = getattr(self, name)
            if any(not e for e in entries):
                raise ConfigError(f"empty entry in {name}")
            object.__setattr__(
                self, name, tuple(sorted(set(entries), key=lambda e: (-len(e), e)))
            )
        object.__setattr__(self, "stop_words", frozenset(self.stop_words))


@dataclass(frozen=True)
class Token:
    surface: str
    stem: str
    verse_ref: tuple[int, int]
    position: int


def normalize(text: str, cfg: NormalizationConfig = NormalizationConfig()) -> str:
    if cfg.strip_diacritics:
        text = _DIACRITICS.sub("", text)
    if cfg.strip_tatweel:
        text = text.replace(_TATWEEL, "")
    if cfg.unify_alef:
        text = _ALEF_FORMS.sub("ا", text)
    if cfg.unify_ya:
        text = text.replace(_ALEF_MAQSURA, _YA)
    if cfg.unify_ta_marbuta:
        text = text.replace(_TA_MARBUTA, _HA)
    return text


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text)


def _strip_once(token: str, affixes: Sequence[str], min_len: int, suffix: bool) -> str:
    # Affixes are sorted longest-first, so the first hit is the longest match;
    # a match whose removal would violate min_len blocks the whole side.
    for a in affixes:
        if token.endswith(a) if suffix else token.startswith(a):
            if len(token) - len(a) >= min_len:
                return token[: -len(a)] if suffix else token[len(a):]
            break
    return token


def stem(token: str, cfg: StemmerConfig) -> str:
    """Strip clitic prefixes and suffixes down to a fixed point.

    Each pass removes the longest matching prefix and then the longest
    matching suffix, only while the remainder keeps ``min_stem_len`` letters;
    passes repeat until nothing changes, so the result is stable under
    re-stemming.  Unstemmable tokens are returned as is.
    """
    result = token
    while True:
        trimmed = _strip_once(result, cfg.prefixes, cfg.min_stem_len, suffix=False)
        trimmed = _strip_once(trimmed, cfg.suffixes, cfg.min_stem_len, suffix=True)
        if trimmed == result:
            return result
        result = trimmed


def preprocess_verse(
    sura_no: int,
    aya_no: int,
    text: str,
    ncfg: NormalizationConfig,
    scfg: StemmerConfig,
) -> list[Token]:
    """normalize -> tokenize -> drop stop-words -> stem.

    ``Token.position`` is the index before stop-word removal, so adjacency in
    the original verse stays recoverable.
    """
    out = []
    for pos, surface in enumerate(tokenize(normalize(text, ncfg))):
        if surface in scfg.stop_words:
            continue
        out.append(Token(surface, stem(surface, scfg), (sura_no, aya_no), pos))
    return out


# --- config document (sections of one entry per line, # comments) ---

_SECTION = re.compile(r"^\[([a-z_]+)\]$")
_FLAG_NAMES = ("strip_diacritics", "strip_tatweel", "unify_alef", "unify_ya",
               "unify_ta_marbuta")


def parse_config_document(text: str) -> dict[str, list[str]]:
    """Split a config document into ``{section: [entry, ...]}``."""
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _SECTION.match(line)
        if m:
            current = sections.setdefault(m.group(1), [])
            continue
        if current is None:
            raise ConfigError(f"line {lineno}: entry {line!r} before any [section]")
        current.append(line)
    return sections


def _parse_kv(entries: Iterable[str], section: str) -> dict[str, str]:
    kv = {}
    for entry in entries:
        key, sep, value = entry.partition("=")
        if not sep:
            raise ConfigError(f"[{section}] entry {entry!r} is not key = value")
        kv[key.strip()] = value.strip()
    return kv


def _parse_flag(value: str, key: str) -> bool:
    low = value.lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"flag {key} must be on/off, got {value!r}")


def normalization_from_document(text: str) -> NormalizationConfig:
    kv = _parse_kv(parse_config_document(text).get("normalization", []), "normalization")
    unknown = set(kv) - set(_FLAG_NAMES)
    if unknown:
        raise ConfigError(f"unknown normalization flags: {sorted(unknown)}")
    defaults = NormalizationConfig()
    return NormalizationConfig(**{
        name: _parse_flag(kv[name], name) if name in kv else getattr(defaults, name)
        for name in _FLAG_NAMES
    })


def normalization_to_document(cfg: NormalizationConfig) -> str:
    lines = ["[normalization]"]
    for name in _FLAG_NAMES:
        lines.append(f"{name} = {'on' if getattr(cfg, name) else 'off'}")
    return "\n".join(lines) + "\n"


def stemmer_from_document(
    text: str,
    stoplist_text: str | None = None,
    ncfg: NormalizationConfig | None = None,
) -> StemmerConfig:
    """Build a StemmerConfig from a config document.

    Stop-words come from the document's own ``[stopwords]`` section unless a
    separate ``stoplist_text`` is given.  When ``ncfg`` is provided, affixes
    and stop-words are normalized with it so they match pipeline tokens.
    """
    sections = parse_config_document(text)
    kv = _parse_kv(sections.get("stemmer", []), "stemmer")
    try:
        min_stem_len = int(kv.get("min_stem_len", "3"))
    except ValueError:
        raise ConfigError(f"min_stem_len must be an integer, got {kv['min_stem_len']!r}") from None
    if stoplist_text is not None:
        stop_entries = parse_config_document(stoplist_text).get("stopwords", [])
    else:
        stop_entries = sections.get("stopwords", [])
    norm = (lambda w: normalize(w, ncfg)) if ncfg is not None else (lambda w: w)
    return StemmerConfig(
        prefixes=tuple(norm(e) for e in sections.get("prefixes", [])),
        suffixes=tuple(norm(e) for e in sections.get("suffixes", [])),
        min_stem_len=min_stem_len,
        stop_words=frozenset(norm(e) for e in stop_entries),
    )


def load_text_configs(
    normalization_path,
    stemmer_path,
    stoplist_path=None,
) -> tuple[NormalizationConfig, StemmerConfig]:
    """Load both text-processing configs from document file(s)."""
    with open(normalization_path, encoding="utf-8") as f:
        ncfg = normalization_from_document(f.read())
    with open(stemmer_path, encoding="utf-8") as f:
        stemmer_text = f.read()
    stop_text = None
    if stoplist_path is not None and str(stoplist_path) != str(stemmer_path):
        with open(stoplist_path, encoding="utf-8") as f:
            stop_text = f.read()
    return ncfg, stemmer_from_document(stemmer_text, stop_text, ncfg)
