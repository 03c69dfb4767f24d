"""Text normalization used for duplicate detection across the toolkit.

Customer-service corpora mix full-width and half-width punctuation freely
("你好，" vs "你好,"), so equality checks go through :func:`normalize_text`
everywhere a question is compared against another question.
"""

from __future__ import annotations

# Full-width ASCII variants (U+FF01..U+FF5E) map onto their half-width
# counterparts by a constant offset; the ideographic space maps to a plain
# space. CJK punctuation without an ASCII codepoint in that block is handled
# by the explicit table below. CJK ideographs are left untouched.
_FULLWIDTH_OFFSET = 0xFEE0

_TRANSLATION: dict[int, int] = {cp: cp - _FULLWIDTH_OFFSET for cp in range(0xFF01, 0xFF5F)}
_TRANSLATION[0x3000] = 0x20  # ideographic space
_TRANSLATION.update(
    {
        ord("。"): ord("."),
        ord("、"): ord(","),
        ord("“"): ord('"'),
        ord("”"): ord('"'),
        ord("‘"): ord("'"),
        ord("’"): ord("'"),
    }
)


def normalize_text(text: str) -> str:
    """Canonical form for question comparison.

    Trims surrounding whitespace, folds full-width punctuation to half-width,
    and lowercases Latin letters. CJK characters are compared verbatim.
    """
    return text.translate(_TRANSLATION).strip().lower()


def is_blank(text: str) -> bool:
    return not text.strip()
