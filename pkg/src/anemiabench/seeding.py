"""Deterministic seed fan-out.

A single pipeline seed is split into independent per-stage sub-seeds by
hashing the seed together with a label path. Adding a stage (or a model)
therefore never perturbs the randomness consumed by any other stage.
"""

import hashlib


def subseed(seed: int, *labels: object) -> int:
    """Derive a 32-bit sub-seed from ``seed`` and a label path."""
    path = "/".join(str(part) for part in labels)
    digest = hashlib.blake2b(
        f"{seed}/{path}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest[:4], "little")
