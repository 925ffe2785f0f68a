"""Deterministic 64-bit seed derivation.

Every stochastic step in the toolkit (noise rendering, presentation order,
simulated-listener draws) takes a seed derived from a master seed plus
context labels, so any single stimulus or run can be re-created in
isolation without replaying everything before it.
"""

import hashlib

_MASK64 = (1 << 64) - 1


def derive_seed(*parts: object) -> int:
    """Hash a master seed and context labels into a 64-bit child seed.

    Parts may be ints or strings; the digest is stable across processes
    and platforms.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little") & _MASK64
