"""Sortable unique identifiers for stored documents.

Ids are 26-character Crockford base32 strings: 48 bits of millisecond
timestamp followed by 80 bits of randomness. Lexicographic order therefore
follows creation order, which is what scan() paging relies on. A process-wide
lock makes ids generated in the same millisecond strictly increasing.
"""

from __future__ import annotations

import os
import threading
import time

_ENCODING = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"  # Crockford base32, no I L O U

_lock = threading.Lock()
_last_ms = -1
_last_rand = 0


def new_id() -> str:
    """Return a fresh 26-character sortable id."""
    global _last_ms, _last_rand
    with _lock:
        ms = int(time.time() * 1000)
        if ms <= _last_ms:
            # same-or-regressed clock: bump the random part to stay monotonic
            ms = _last_ms
            rand = _last_rand + 1
            if rand >= 1 << 80:
                ms += 1
                rand = int.from_bytes(os.urandom(10), "big")
        else:
            rand = int.from_bytes(os.urandom(10), "big")
        _last_ms = ms
        _last_rand = rand
    value = (ms << 80) | rand
    chars = []
    for _ in range(26):
        chars.append(_ENCODING[value & 0x1F])
        value >>= 5
    return "".join(reversed(chars))


def is_valid_id(text: str) -> bool:
    return len(text) == 26 and all(c in _ENCODING for c in text)
