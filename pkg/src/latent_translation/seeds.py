"""Deterministic sub-seed derivation.

Every stage, sample, and stochastic draw gets its own seed derived from a
master seed plus a tag path, so runs are reproducible and independent
workers never share a stream.
"""

import hashlib

_MASK63 = (1 << 63) - 1


def derive_seed(*parts: int | str) -> int:
    """Hash a (master seed, tag, ...) path into a stable 63-bit seed.

    Pure function of its arguments; stable across processes and platforms.
    """
    h = hashlib.sha256()
    for part in parts:
        h.update(repr(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little") & _MASK63
