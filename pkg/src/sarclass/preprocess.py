"""Commit-message text cleaning, tokenization, stop-word removal and lemmatization."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

_URL = re.compile(r"(?:https?://|ftp://|www\.)\S+", re.IGNORECASE)
# lookbehinds pin matches to the start of a run; without them long runs go quadratic
_EMAIL = re.compile(r"(?<![\w.+-])[\w.+-]+@[\w-]+(?:\.[\w-]+)+")
_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "`": "'"})
_WORD_WITH_APOSTROPHE = re.compile(r"(?<![^\W\d_])[^\W\d_]+(?:'[^\W\d_]+)+")
_WS = re.compile(r"\s+")


def _read_table(name: str) -> list[str]:
    text = resources.files("sarclass.data").joinpath(name).read_text(encoding="utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def _read_mapping(name: str) -> dict[str, str]:
    out = {}
    for ln in _read_table(name):
        surface, _, target = ln.partition("→")
        out[surface.strip()] = target.strip()
    return out


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    return frozenset(_read_table("stopwords.txt"))


def load_stopwords(path) -> frozenset[str]:
    """Lowercased words from a file, one per line; ``#`` starts a comment line."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(ln.strip().lower() for ln in fh
                         if ln.strip() and not ln.lstrip().startswith("#"))


@lru_cache(maxsize=None)
def contractions() -> dict[str, str]:
    return _read_mapping("contractions.txt")


@lru_cache(maxsize=None)
def lemma_exceptions() -> dict[str, str]:
    return _read_mapping("lemma_exceptions.txt")


@dataclass(frozen=True)
class PreprocessConfig:
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    lemmatize: bool = True
    min_token_len: int = 1

    def __post_init__(self):
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))
        if any(w != w.lower() for w in self.stopwords):
            raise ValueError("stopwords must be lowercase")
        if self.min_token_len < 1:
            raise ValueError("min_token_len must be >= 1")

    def to_dict(self) -> dict:
        return {"stopwords": sorted(self.stopwords), "lemmatize": self.lemmatize,
                "min_token_len": self.min_token_len}

    @classmethod
    def from_dict(cls, d: dict) -> PreprocessConfig:
        return cls(frozenset(d["stopwords"]), bool(d["lemmatize"]), int(d["min_token_len"]))


def _expand(match: re.Match) -> str:
    word = match.group(0)
    return contractions().get(word, word.replace("'", ""))


def clean_text(raw: str) -> str:
    text = _URL.sub(" ", raw)
    text = _EMAIL.sub(" ", text)
    text = text.lower().translate(_APOSTROPHES)
    text = _WORD_WITH_APOSTROPHE.sub(_expand, text)
    text = "".join(ch if ch.isalpha() else " " for ch in text)
    return _WS.sub(" ", text).strip()


def tokenize(cleaned: str) -> list[str]:
    """Split on whitespace and on any remaining non-letter character."""
    return "".join(ch if ch.isalpha() else " " for ch in cleaned).split()


def remove_stopwords(tokens: list[str], stopwords: frozenset[str] | set[str]) -> list[str]:
    return [t for t in tokens if t not in stopwords]


_VOWELS = set("aeiou")


def _consonants(word: str) -> list[bool]:
    # y is a consonant at the start or after a vowel
    out: list[bool] = []
    for i, ch in enumerate(word):
        out.append(ch not in _VOWELS and (ch != "y" or i == 0 or not out[-1]))
    return out


def _is_consonant(word: str, i: int) -> bool:
    return _consonants(word)[i]


def _measure(stem: str) -> int:
    # number of vowel-consonant sequences, as in Porter's [C](VC)^m[V]
    pattern = "".join("c" if c else "v" for c in _consonants(stem))
    return len(re.findall(r"v+c+", pattern))


def _has_vowel(stem: str) -> bool:
    return not all(_consonants(stem))


def _ends_cvc(stem: str) -> bool:
    return (len(stem) >= 3 and _is_consonant(stem, len(stem) - 3)
            and not _is_consonant(stem, len(stem) - 2)
            and _is_consonant(stem, len(stem) - 1) and stem[-1] not in "wxy")


def _restore(stem: str) -> str:
    exc = lemma_exceptions()
    if stem in exc:
        return exc[stem]
    if stem.endswith(("bl", "iz")) or (stem.endswith("at") and len(stem) > 2
                                        and _is_consonant(stem, len(stem) - 3)):
        return stem + "e"
    if len(stem) >= 2 and stem[-1] == stem[-2] and _is_consonant(stem, len(stem) - 1) \
            and stem[-1] not in "lsz":
        return stem[:-1]
    if _measure(stem) == 1 and _ends_cvc(stem):
        return stem + "e"
    return stem


def _step(word: str) -> str:
    exc = lemma_exceptions()
    if word in exc:
        return exc[word]
    if len(word) <= 3 or not word.isascii():
        return word
    if word.endswith(("ies", "ied")) and len(word) > 4:
        return word[:-3] + "y"
    for suffix in ("ing", "ed"):
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if len(stem) >= 3 and _has_vowel(stem):
                return _restore(stem)
            return word
    if word.endswith(("sses", "shes", "ches", "xes", "zes")):
        return word[:-2]
    if word.endswith("s") and not word.endswith(("ss", "us", "is")):
        return word[:-1]
    return word


@lru_cache(maxsize=65536)
def lemmatize(token: str) -> str:
    """Rule-based base form: inflectional suffix stripping plus an exception table.

    Rules are applied until a fixed point so the result is idempotent.
    """
    for _ in range(8):
        nxt = _step(token)
        if nxt == token:
            break
        token = nxt
    return token


def preprocess(raw: str, cfg: PreprocessConfig | None = None) -> list[str]:
    cfg = cfg or PreprocessConfig()
    tokens = remove_stopwords(tokenize(clean_text(raw)), cfg.stopwords)
    if cfg.lemmatize:
        # a lemma can itself be a stop word ("others" -> "other")
        tokens = remove_stopwords([lemmatize(t) for t in tokens], cfg.stopwords)
    return [t for t in tokens if len(t) >= cfg.min_token_len]
