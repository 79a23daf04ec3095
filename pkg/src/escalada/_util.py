"""Small shared helpers: tokenization and deterministic seed derivation."""

from __future__ import annotations

import hashlib
import string

MASK_TOKEN = "[MASK]"

_STRIP_CHARS = string.punctuation + string.whitespace


def split_tokens(text: str) -> list[str]:
    """Split on whitespace and strip leading/trailing punctuation.

    Original casing is preserved (vocabulary rules need it); tokens that
    consist entirely of punctuation are dropped. The literal mask token is
    kept verbatim so masked queries survive tokenization.
    """
    tokens = []
    for raw in text.split():
        if raw == MASK_TOKEN:
            tokens.append(raw)
            continue
        tok = raw.strip(_STRIP_CHARS)
        if tok:
            tokens.append(tok)
    return tokens


def derive_seed(root_seed: int, label: str) -> int:
    """Stable 64-bit sub-seed for a named component of a run.

    Independent of Python hash randomization and platform, so one root seed
    reproduces an entire experiment.
    """
    digest = hashlib.blake2b(
        label.encode("utf-8"), digest_size=8, key=root_seed.to_bytes(8, "little", signed=True)
    ).digest()
    return int.from_bytes(digest, "little")
