"""Deterministic seed derivation.

Child seeds are a 64-bit hash of the master seed and a sequence of integer
or string parts: each part is encoded (integers as 8-byte little-endian
two's complement, strings as UTF-8 prefixed with their length) and fed to
BLAKE2b with an 8-byte digest.  The scheme is stable across platforms and
independent of execution order, so concurrent trials can derive their own
streams.
"""

from __future__ import annotations

import hashlib
import struct

__all__ = ["mix_seed"]

_MASK = (1 << 64) - 1


def mix_seed(master: int, *parts: int | str) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", master & _MASK))
    for part in parts:
        if isinstance(part, str):
            data = part.encode("utf-8")
            h.update(struct.pack("<Q", len(data)))
            h.update(data)
        else:
            h.update(struct.pack("<q", int(part)))
    return int.from_bytes(h.digest(), "little")
