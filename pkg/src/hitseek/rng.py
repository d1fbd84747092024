"""Deterministic named random streams.

Every random draw in a campaign flows from a single 64-bit seed. Consumers
(oracle noise, acquisition tie-breaks, posterior sampling, ...) ask for a
stream by name; the stream depends only on (seed, labels), never on how many
other streams were created first or in what order. Philox is counter-based,
so streams with distinct labels are statistically independent.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, *labels: object) -> np.random.Generator:
    """Return an independent generator keyed by (seed, *labels).

    Labels are stringified and hashed with BLAKE2b, so any mix of strings and
    integers works and the mapping is stable across processes and platforms.
    """
    tag = "\x1f".join(str(part) for part in labels)
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=16).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    seq = np.random.SeedSequence([int(seed) & _MASK64, *words])
    return np.random.Generator(np.random.Philox(seq))
