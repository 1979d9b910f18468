"""Deterministic pseudorandom stream management.

Every stochastic draw in a run is addressed by a :class:`StreamKey`
(macroreplication, substream identity, role).  Keys map to independent
``numpy`` generators through ``SeedSequence`` hashing, so replaying a run
with the same base entropy reproduces every draw bit-for-bit, and draws at
one design point never perturb the streams of another.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

# Substream roles.  PAIRED carries the shared-realization draws used by
# joint HF/LF sampling, LF_EXTRA carries fresh-realization LF-only draws,
# EVAL is reserved for post-hoc evaluation and never used while optimizing.
ROLE_PAIRED = 0
ROLE_LF_EXTRA = 1
ROLE_EVAL = 2


def coord_entropy(coords) -> int:
    """Stable 64-bit identity for a design point (exact float64 coords)."""
    buf = np.ascontiguousarray(coords, dtype=np.float64).tobytes()
    return int.from_bytes(hashlib.blake2b(buf, digest_size=8).digest(), "little")


def text_entropy(text: str) -> int:
    buf = text.encode("utf-8")
    return int.from_bytes(hashlib.blake2b(buf, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class StreamKey:
    """Address of one substream; (macrorep_id, substream_id) fix the sequence."""

    macrorep_id: int
    substream_id: int
    role: int = ROLE_PAIRED

    @classmethod
    def for_point(cls, macrorep_id: int, coords, role: int = ROLE_PAIRED) -> "StreamKey":
        return cls(macrorep_id, coord_entropy(coords), role)


class StreamFactory:
    """Creates generators for stream keys, all rooted at one entropy tuple."""

    def __init__(self, *entropy: int):
        self._root = tuple(int(e) & ((1 << 63) - 1) for e in entropy)

    @property
    def root(self) -> tuple:
        return self._root

    def generator(self, key: StreamKey) -> np.random.Generator:
        seq = np.random.SeedSequence(
            [*self._root, key.macrorep_id & ((1 << 63) - 1),
             key.substream_id & ((1 << 63) - 1), key.role]
        )
        return np.random.default_rng(seq)
