"""Deterministic random-stream management.

Every stochastic stage of the pipeline draws from its own named substream so
that stages can be reordered, parallelized, or re-run without perturbing each
other.  A substream is keyed by a root seed plus a tuple of labels; labels are
hashed into the entropy pool of a ``SeedSequence``, which guarantees
independent, reproducible streams.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _label_entropy(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *labels) -> np.random.Generator:
    """Return a PCG64 generator for ``(seed, *labels)``.

    The same key always yields the same stream, and distinct keys yield
    statistically independent streams.
    """
    entropy = [int(seed)] + [_label_entropy(lab) for lab in labels]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
