"""Splittable counter-based random streams.

Every random draw in loewnerlab comes from a Philox generator keyed by a
root seed and a tuple of labels. The labels are hashed into the
SeedSequence spawn key, so the stream for ("loops", "batch", 3) is the same
on every machine and independent of the stream for ("loops", "batch", 4).
Two computations that must cancel exactly (paired seeds) only need to ask
for the same labels.
"""

import hashlib
from collections.abc import Iterator

import numpy as np

Label = str | int


def label_key(label: Label) -> int:
    """32-bit hash of a stream label."""
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


def seed_sequence(seed: int, *labels: Label) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(label_key(x) for x in labels))


def stream(seed: int, *labels: Label) -> np.random.Generator:
    """Generator for the named sub-stream of a root seed."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *labels)))


def spawn(seed: int, label: Label, count: int) -> Iterator[np.random.Generator]:
    """Per-item generators (label, 0), (label, 1), ..."""
    for index in range(count):
        yield stream(seed, label, index)
