"""Keyword baselines: SAR pattern matching and quality-category keyword matching."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

from .corpus import Label

# inserted or dropped freely inside a phrase ("simplify the code" ~ "simplify code")
PHRASE_FILLERS = frozenset({"the", "a", "an", "of", "to"})

_TOKEN = re.compile(r"[^\W_]+|&")


@dataclass(frozen=True)
class PatternDef:
    text: str
    kind: str  # "stem" | "phrase"
    category: Label | None = None
    id: int | None = None

    def __post_init__(self):
        if self.kind not in ("stem", "phrase"):
            raise ValueError(f"pattern kind must be 'stem' or 'phrase', got {self.kind!r}")
        body = self.text.strip()
        if not body:
            raise ValueError("empty pattern")
        if self.kind == "stem":
            if not body.endswith("*") or "*" in body[:-1] or body.count("*") != 1:
                raise ValueError(f"malformed stem pattern {self.text!r}")
            if len(_tokens(body[:-1])) != 1:
                raise ValueError(f"stem pattern must be a single word: {self.text!r}")
        elif "*" in body:
            raise ValueError(f"malformed pattern {self.text!r}: embedded '*'")

    @classmethod
    def parse(cls, text: str, category: Label | None = None, id: int | None = None) -> PatternDef:
        kind = "stem" if text.strip().endswith("*") else "phrase"
        return cls(text, kind, category, id)

    def to_dict(self) -> dict:
        d = {"text": self.text, "kind": self.kind}
        if self.category is not None:
            d["category"] = self.category.value
        if self.id is not None:
            d["id"] = self.id
        return d


def _tokens(text: str) -> list[str]:
    return ["and" if t == "&" else t for t in _TOKEN.findall(text.lower())]


def normalize_variants(message: str) -> list[list[str]]:
    """Token lists for matching: hyphens/slashes joined ("re-factor") and split."""
    low = message.lower()
    joined = re.sub(r"(?<=\w)[-/](?=\w)", "", low)
    split = re.sub(r"[-/]", " ", low)
    variants = [_tokens(joined)]
    if split != joined:
        variants.append(_tokens(split))
    return variants


def _core(tokens: Sequence[str]) -> tuple[str, ...]:
    return tuple(t for t in tokens if t not in PHRASE_FILLERS)


def _contains(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    n = len(needle)
    if n == 0:
        return False
    first = needle[0]
    for i in range(len(haystack) - n + 1):
        if haystack[i] == first and tuple(haystack[i:i + n]) == tuple(needle):
            return True
    return False


@dataclass(frozen=True)
class CompiledPattern:
    source: PatternDef
    stem: str | None
    phrase: tuple[str, ...] | None  # words with fillers dropped
    words: tuple[str, ...] = ()

    def matches(self, variants: list[list[str]], cores: list[tuple[str, ...]]) -> bool:
        if self.stem is not None:
            return any(t.startswith(self.stem) for toks in variants for t in toks)
        return any(_contains(core, self.phrase) for core in cores)


def compile_pattern(p: PatternDef) -> CompiledPattern:
    if p.kind == "stem":
        stem = re.sub(r"[-/]", "", p.text.strip()[:-1].lower())
        return CompiledPattern(p, stem, None, (stem,))
    words = tuple(_tokens(re.sub(r"[-/]", " ", p.text)))
    return CompiledPattern(p, None, _core(words) or words, words)


@dataclass(frozen=True)
class CategoryMatch:
    """Outcome of keyword categorization: one label, none, or an ambiguous set."""

    categories: frozenset[Label]
    keywords: tuple[str, ...] = ()

    @property
    def outcome(self) -> str:
        if not self.categories:
            return "NONE"
        if len(self.categories) > 1:
            return "AMBIGUOUS"
        return next(iter(self.categories)).value

    @property
    def label(self) -> Label | None:
        return next(iter(self.categories)) if len(self.categories) == 1 else None

    def to_dict(self) -> dict:
        return {"outcome": self.outcome,
                "categories": sorted(c.value for c in self.categories),
                "keywords": list(self.keywords)}


class PatternMatcher:
    def __init__(self, sar: Sequence[CompiledPattern], categories: Sequence[CompiledPattern] = ()):
        self.sar = tuple(sar)
        self.categories = tuple(categories)

    @property
    def sources(self) -> list[PatternDef]:
        return [c.source for c in self.sar + self.categories]

    def match_sar(self, message: str) -> list[PatternDef]:
        variants = normalize_variants(message)
        cores = [_core(v) for v in variants]
        return [c.source for c in self.sar if c.matches(variants, cores)]

    def match_category(self, message: str) -> CategoryMatch:
        variants = normalize_variants(message)
        cores = [_core(v) for v in variants]
        hits = [c.source for c in self.categories if c.matches(variants, cores)]
        return CategoryMatch(frozenset(h.category for h in hits), tuple(h.text for h in hits))


def compile_patterns(defs: Iterable[PatternDef]) -> PatternMatcher:
    defs = list(defs)
    if not defs:
        raise ValueError("no patterns to compile")
    sar = [compile_pattern(p) for p in defs if p.category is None]
    cat = [compile_pattern(p) for p in defs if p.category is not None]
    return PatternMatcher(sar, cat)


def match_sar(m: PatternMatcher, message: str) -> list[PatternDef]:
    return m.match_sar(message)


def match_category(m: PatternMatcher, message: str) -> CategoryMatch:
    return m.match_category(message)


def _data(name: str):
    return json.loads(resources.files("sarclass.data").joinpath(name).read_text(encoding="utf-8"))


def load_pattern_file(path) -> list[PatternDef]:
    with open(path, encoding="utf-8") as fh:
        return _pattern_defs(json.load(fh))


def _pattern_defs(rows) -> list[PatternDef]:
    out = []
    for r in rows:
        cat = Label(r["category"]) if r.get("category") else None
        out.append(PatternDef(r["text"], r["kind"], cat, r.get("id")))
    return out


@lru_cache(maxsize=None)
def sar_patterns() -> tuple[PatternDef, ...]:
    """The 87 SAR patterns shipped in ``data/sar_patterns.json``."""
    return tuple(_pattern_defs(_data("sar_patterns.json")))


@lru_cache(maxsize=None)
def quality_keywords() -> tuple[PatternDef, ...]:
    """Internal QA, external QA and code smell keywords from ``data/quality_keywords.json``."""
    return tuple(_pattern_defs(_data("quality_keywords.json")))


@lru_cache(maxsize=None)
def default_matcher() -> PatternMatcher:
    return compile_patterns(sar_patterns() + quality_keywords())
