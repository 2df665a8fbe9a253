"""Derivation of independent random streams from one run seed."""

import hashlib


def split_seed(seed: int, label: str) -> int:
    """64-bit stream seed for ``label``: the first 8 bytes of sha256("seed:label")."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
