"""Seeded synthetic corpora built from the shipped keyword tables.

Filler words are screened against every SAR pattern and quality keyword, and
whole messages are re-checked, so the keyword baselines are exact on these
corpora by construction.
"""

from __future__ import annotations

import numpy as np

from .baselines import PatternDef, PatternMatcher, default_matcher, quality_keywords, sar_patterns
from .corpus import Commit, Dataset, Label, Task

_FILLER = """
version bump release tag build pipeline docs readme license year copyright date
test tests spec fixture mock assertion coverage server client endpoint request
response header cookie session login logout user account profile avatar email
password token page button label icon color theme font layout margin padding
style sheet menu sidebar footer navbar dialog modal tooltip table column row
query index cache queue worker thread timer scheduler cron job task event hook
plugin widget panel chart graph map marker image video audio upload download
file folder path url link route router handler callback promise async await
locale translation string message text typo comment example demo tutorial guide
changelog notes install setup script makefile docker image container port host
config option flag setting environment variable secret key value pair list array
number integer float boolean null field record entry item node tree branch
commit upstream downstream mirror artifact package gradle
maven npm yarn pip wheel binary linux windows mac android ios browser chrome
firefox safari mobile desktop tablet screen width height pixel unit metric
counter gauge alert warning notice info debug trace stack frame crash issue ticket
bug report feature request milestone sprint roadmap meeting note draft preview
beta alpha nightly patchlevel snapshot backup restore export import
""".split()

_CONNECTORS = ("for", "in", "on", "with", "and", "from", "into", "at", "by")

# base forms for SAR stems that are not words themselves
_SAR_BASE = {
    "mov": "move", "introduc": "introduce", "decompos": "decompose", "reorganiz": "reorganize",
    "merg": "merge", "renam": "rename", "chang": "change", "restructur": "restructure",
    "remov": "remove", "replac": "replace", "rewrit": "rewrite", "simplif": "simplify",
    "creat": "create", "improv": "improve", "modif": "modify", "enhanc": "enhance",
    "inlin": "inline", "reduc": "reduce", "encapsulat": "encapsulate",
}

_QUALITY_WORDS = {
    "inherit": ("inheritance", "inherited"), "abstraction": ("abstraction", "abstractions"),
    "complex": ("complexity", "complex"), "composition": ("composition",),
    "coupl": ("coupling", "coupled"), "encapsulation": ("encapsulation",),
    "polymorph": ("polymorphism", "polymorphic"), "cohesi": ("cohesion", "cohesive"),
    "functionalit": ("functionality",), "performance": ("performance",),
    "compatib": ("compatibility", "compatible"), "readab": ("readability", "readable"),
    "stabil": ("stability",), "usab": ("usability", "usable"),
    "flexib": ("flexibility", "flexible"), "extensib": ("extensibility", "extensible"),
    "efficien": ("efficiency", "efficient"), "accura": ("accuracy", "accurate"),
    "accessib": ("accessibility", "accessible"), "robust": ("robustness", "robust"),
    "testab": ("testability", "testable"), "correctness": ("correctness",),
    "scalab": ("scalability", "scalable"), "configurab": ("configurability", "configurable"),
    "simplicity": ("simplicity",), "reusab": ("reusability", "reusable"),
    "reliab": ("reliability", "reliable"), "modularity": ("modularity",),
    "maintainab": ("maintainability", "maintainable"), "traceab": ("traceability",),
    "interoperab": ("interoperability",), "repeatab": ("repeatability",),
    "understandab": ("understandability", "understandable"),
    "effectiveness": ("effectiveness",), "productivity": ("productivity",),
    "modifiab": ("modifiability",), "reproducib": ("reproducibility", "reproducible"),
    "adaptab": ("adaptability",), "manageab": ("manageability", "manageable"),
}


def _forms(base: str) -> tuple[str, ...]:
    if base.endswith("e"):
        return base, base + "d", base[:-1] + "ing"
    if base.endswith("y"):
        return base, base[:-1] + "ied", base + "ing"
    return base, base + "ed", base + "ing"


def sar_word_forms(p: PatternDef) -> tuple[str, ...]:
    """Concrete words that instantiate a stem pattern (or the phrase itself)."""
    if p.kind == "phrase":
        return (p.text,)
    stem = p.text[:-1].lower()
    return _forms(_SAR_BASE.get(stem, stem))


def quality_word_forms(p: PatternDef) -> tuple[str, ...]:
    if p.kind == "phrase":
        return (p.text,)
    return _QUALITY_WORDS[p.text[:-1].lower()]


def clean_filler(matcher: PatternMatcher | None = None) -> list[str]:
    matcher = matcher or default_matcher()
    return [w for w in _FILLER
            if not matcher.match_sar(w) and matcher.match_category(w).outcome == "NONE"]


def _is_clean(matcher: PatternMatcher, text: str) -> bool:
    return not matcher.match_sar(text) and matcher.match_category(text).outcome == "NONE"


def _filler(rng: np.random.Generator, words: list[str], n: int) -> list[str]:
    out = []
    for i in range(n):
        if i and rng.random() < 0.25:
            out.append(_CONNECTORS[rng.integers(len(_CONNECTORS))])
        out.append(words[rng.integers(len(words))])
    return out


def _embed(rng, filler: list[str], phrase: str) -> str:
    pos = int(rng.integers(len(filler) + 1))
    words = filler[:pos] + [phrase] + filler[pos:]
    text = " ".join(words)
    return text[0].upper() + text[1:]


def binary_corpus(n_sar: int = 1000, n_non: int = 1000, seed: int = 42) -> Dataset:
    """SAR messages carry one uniformly drawn pattern; non-SAR messages are pure filler."""
    rng = np.random.default_rng(seed)
    matcher = default_matcher()
    words = clean_filler(matcher)
    patterns = sar_patterns()
    commits = []
    for i in range(n_sar):
        p = patterns[rng.integers(len(patterns))]
        forms = sar_word_forms(p)
        phrase = forms[rng.integers(len(forms))]
        msg = _embed(rng, _filler(rng, words, int(rng.integers(2, 8))), phrase)
        commits.append(Commit(f"syn-sar-{i:04d}", msg, Label.SAR, "synthetic"))
    i = 0
    while i < n_non:
        msg = " ".join(_filler(rng, words, int(rng.integers(3, 9))))
        msg = msg[0].upper() + msg[1:]
        if _is_clean(matcher, msg):
            commits.append(Commit(f"syn-non-{i:04d}", msg, Label.NON_SAR, "synthetic"))
            i += 1
    return Dataset(Task.BINARY, commits)


def multiclass_corpus(n_per_class: int = 300, seed: int = 42) -> Dataset:
    """Each message holds exactly one keyword of its category, led by a refactoring verb."""
    rng = np.random.default_rng(seed)
    matcher = default_matcher()
    words = clean_filler(matcher)
    verbs = [f for p in sar_patterns() if p.kind == "stem" for f in sar_word_forms(p)]
    verbs = [v for v in verbs if matcher.match_category(v).outcome == "NONE"]
    by_label: dict[Label, list[PatternDef]] = {}
    for p in quality_keywords():
        by_label.setdefault(p.category, []).append(p)
    commits = []
    for lab in Task.MULTICLASS.labels:
        pool = by_label[lab]
        i = 0
        while i < n_per_class:
            p = pool[rng.integers(len(pool))]
            forms = quality_word_forms(p)
            kw = forms[rng.integers(len(forms))]
            body = _embed(rng, _filler(rng, words, int(rng.integers(2, 7))), kw)
            msg = f"{verbs[rng.integers(len(verbs))].capitalize()} {body[0].lower()}{body[1:]}"
            if matcher.match_category(msg).label is lab:
                commits.append(Commit(f"syn-{lab.value.lower()}-{i:04d}", msg, lab, "synthetic"))
                i += 1
    return Dataset(Task.MULTICLASS, commits)
