"""Identifier abstraction and sequence chunking.

User-defined function/type/variable names and string or char literals are
replaced by positional IDs (F_n, T_n, V_n, L_n) so that a corpus of C
functions shrinks to a small, closed vocabulary. Keywords, punctuators,
and number literals pass through verbatim. Abstracted token streams are
then split into chunks of at most 50 tokens; each chunk is one model
sequence.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from .cparse import FunctionUnit, TokenKind, classify_identifier_roles
from .errors import EmptyFunction

CHUNK_LIMIT = 50

ID_TOKEN_RE = re.compile(r"^(F|T|V|L)_[0-9]+$")

_ROLES = "FTVL"


@dataclass
class IdMap:
    """Per-function (or per fix pair, when shared) entity-to-ID registry.

    entries maps role letter → original spelling → rendered ID token.
    New IDs are numbered densely from 1 in first-occurrence order. A
    spelling already registered under any role keeps that ID even if a
    later occurrence classifies differently; this keeps the before/after
    streams of a fix pair aligned outside the changed region.
    """

    entries: dict[str, dict[str, str]] = field(
        default_factory=lambda: {r: {} for r in _ROLES}
    )
    counters: dict[str, int] = field(default_factory=lambda: {r: 1 for r in _ROLES})

    def copy(self) -> IdMap:
        return IdMap(
            {r: dict(d) for r, d in self.entries.items()}, dict(self.counters)
        )

    def lookup(self, spelling: str) -> str | None:
        for r in _ROLES:
            got = self.entries[r].get(spelling)
            if got is not None:
                return got
        return None

    def resolve(self, role_letter: str, spelling: str) -> str:
        got = self.lookup(spelling)
        if got is not None:
            return got
        n = self.counters[role_letter]
        self.counters[role_letter] = n + 1
        rendered = f"{role_letter}_{n}"
        self.entries[role_letter][spelling] = rendered
        return rendered

    def seed_identity(self, tokens: list[str]) -> None:
        """Register already-abstracted ID tokens as mapping to themselves."""
        for tok in tokens:
            m = ID_TOKEN_RE.match(tok)
            if m is None:
                continue
            letter = m.group(1)
            self.entries[letter].setdefault(tok, tok)
            num = int(tok.split("_", 1)[1])
            self.counters[letter] = max(self.counters[letter], num + 1)

    def size(self) -> dict[str, int]:
        return {r: len(self.entries[r]) for r in _ROLES}


def abstract_function(
    fn: FunctionUnit, shared: IdMap | None = None
) -> tuple[list[str], IdMap]:
    """Abstract one function into ID-stream tokens.

    With `shared` (the other half of a fix pair), existing entries are
    reused and new IDs continue that map's counters; the map is mutated
    in place and returned. Tokens that already look like IDs resolve
    under their embedded role, which makes abstraction idempotent.
    """
    idmap = shared if shared is not None else IdMap()
    roles = classify_identifier_roles(fn)
    out: list[str] = []
    for tok in fn.significant_tokens():
        if tok.kind is TokenKind.IDENTIFIER:
            m = ID_TOKEN_RE.match(tok.text)
            letter = m.group(1) if m is not None else roles[tok.text].value
            out.append(idmap.resolve(letter, tok.text))
        elif tok.kind in (TokenKind.STRING_LITERAL, TokenKind.CHAR_LITERAL):
            out.append(idmap.resolve("L", tok.text))
        else:
            out.append(tok.text)
    return out, idmap


class SeqRole(enum.Enum):
    VULN_BEFORE = "VulnBefore"
    FIXED_AFTER = "FixedAfter"
    NON_VULNERABLE = "NonVulnerable"


@dataclass(frozen=True)
class SequenceMeta:
    source_path: str
    function_name: str
    role: SeqRole


@dataclass(frozen=True)
class AbstractedSequence:
    tokens: tuple[str, ...]
    source_path: str
    function_name: str
    chunk_index: int
    role: SeqRole

    def line(self) -> str:
        """Wire form: space-joined tokens, newline-terminated."""
        return " ".join(self.tokens) + "\n"


def to_sequences(tokens: list[str], meta: SequenceMeta) -> list[AbstractedSequence]:
    """Greedy left-to-right split into chunks of at most CHUNK_LIMIT tokens."""
    if not tokens:
        raise EmptyFunction(f"no tokens for {meta.function_name}")
    return [
        AbstractedSequence(
            tokens=tuple(tokens[i : i + CHUNK_LIMIT]),
            source_path=meta.source_path,
            function_name=meta.function_name,
            chunk_index=i // CHUNK_LIMIT,
            role=meta.role,
        )
        for i in range(0, len(tokens), CHUNK_LIMIT)
    ]
