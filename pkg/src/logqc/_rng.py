"""Named random substreams derived from a single root seed.

Every stochastic component draws from a stream keyed by (root seed, labels),
so results do not depend on execution order and parallel workers can be
seeded independently.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_words(labels: tuple) -> list[int]:
    digest = hashlib.sha256("/".join(str(x) for x in labels).encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4)]


def child_seed(seed: int, *labels) -> int:
    """Deterministic 63-bit child seed for the given root seed and labels."""
    digest = hashlib.sha256(
        (str(int(seed)) + "\x1f" + "/".join(str(x) for x in labels)).encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def substream(seed: int, *labels) -> np.random.Generator:
    """Generator for the substream named by `labels` under `seed`."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1)] + _label_words(labels)))
