"""Deterministic seed fan-out from a single master seed."""

import hashlib


def derive_seed(master: int, *parts) -> int:
    """Stable 64-bit seed from the master seed plus context parts.

    sha256-based, so results are identical across runs, platforms, and
    PYTHONHASHSEED settings.
    """
    h = hashlib.sha256(str(int(master)).encode("ascii"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")
