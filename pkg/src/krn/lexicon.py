"""Natural-language labels over internal node ids.

Labels are communication only: nothing in the engine core consults
them. A node may carry one label per language, many nodes may share a
label within a language, and reads fall back along a configurable
language chain (ending in English by default).
"""

from __future__ import annotations

import re

from .core import NodeId
from .errors import BadLanguageTag, NoLabel

_LANG_RE = re.compile(r"[A-Za-z]{1,8}(-[A-Za-z0-9]{1,8})*\Z")


class Lexicon:
    def __init__(self, fallback_chain: tuple[str, ...] = ("en",)):
        self.labels: dict[tuple[NodeId, str], str] = {}
        self.reverse: dict[tuple[str, str], set[NodeId]] = {}
        self.fallback_chain = list(fallback_chain)

    def set_label(self, node: NodeId, lang: str, text: str) -> None:
        if not _LANG_RE.match(lang):
            raise BadLanguageTag(f"bad language tag {lang!r}")
        old = self.labels.get((node, lang))
        if old is not None:
            bucket = self.reverse.get((lang, old))
            if bucket is not None:
                bucket.discard(node)
                if not bucket:
                    del self.reverse[(lang, old)]
        self.labels[(node, lang)] = text
        self.reverse.setdefault((lang, text), set()).add(node)

    def label_of(self, node: NodeId, lang: str) -> tuple[str, str]:
        """Label in the requested language, or the first fallback hit.

        Returns (text, language that supplied it).
        """
        hit = self.labels.get((node, lang))
        if hit is not None:
            return hit, lang
        for fb in self.fallback_chain:
            hit = self.labels.get((node, fb))
            if hit is not None:
                return hit, fb
        raise NoLabel(f"node {node} has no label in {lang!r} or its fallbacks")

    def lookup(self, lang: str, text: str) -> set[NodeId]:
        """Exact-match reverse lookup; no fallback, no normalization."""
        return set(self.reverse.get((lang, text), set()))

    def languages_of(self, node: NodeId) -> list[str]:
        return sorted(lang for (nid, lang) in self.labels if nid == node)

    def items(self) -> list[tuple[NodeId, str, str]]:
        """All entries as (node, lang, text), sorted for stable output."""
        return sorted((n, lang, t) for (n, lang), t in self.labels.items())
