"""Locating the class keyword's token positions inside a prompt."""

from __future__ import annotations

import re

from .errors import AmbiguousKeyword, KeywordNotFound
from .interfaces import TextEncoder
from .types import TokenEmbeddingSequence


def _whole_word_count(prompt: str, keyword: str) -> int:
    pattern = r"(?<![\w-])" + re.escape(keyword) + r"(?![\w-])"
    return len(re.findall(pattern, prompt, flags=re.IGNORECASE))


def locate_class_token_indices(prompt: str, class_keyword: str,
                               encoder: TextEncoder) -> frozenset[int]:
    """Positions in the tokenized prompt whose tokens spell the keyword.

    Matching is case-insensitive, whole-word and must be unique.  Keywords
    that tokenize into several tokens yield all constituent positions; all of
    them become optimization variables jointly.

    Raises KeywordNotFound when the keyword is absent and AmbiguousKeyword
    when it occurs more than once (at either string or token level).
    """
    occurrences = _whole_word_count(prompt, class_keyword)
    if occurrences == 0:
        raise KeywordNotFound(f"keyword {class_keyword!r} not found in prompt {prompt!r}")
    if occurrences > 1:
        raise AmbiguousKeyword(
            f"keyword {class_keyword!r} occurs {occurrences} times in prompt {prompt!r}")

    ids = encoder.tokenize(prompt).token_ids
    needle = encoder.content_token_ids(class_keyword)
    if not needle:
        raise KeywordNotFound(f"keyword {class_keyword!r} produced no tokens")

    starts = [
        start
        for start in range(len(ids) - len(needle) + 1)
        if tuple(ids[start:start + len(needle)]) == tuple(needle)
    ]
    if not starts:
        raise KeywordNotFound(
            f"keyword {class_keyword!r} tokens not found in tokenized prompt")
    if len(starts) > 1:
        raise AmbiguousKeyword(
            f"keyword {class_keyword!r} tokens occur {len(starts)} times in tokenized prompt")
    start = starts[0]
    return frozenset(range(start, start + len(needle)))


def resolve_class_tokens(prompt: str, class_keyword: str,
                         encoder: TextEncoder) -> TokenEmbeddingSequence:
    """Tokenize a prompt and attach the located class-token index set."""
    indices = locate_class_token_indices(prompt, class_keyword, encoder)
    return encoder.tokenize(prompt).with_class_indices(indices)
