"""Counter-based seed derivation.

Stream key = BLAKE2b-256 keyed with the master seed (8 bytes, little endian)
over ``purpose`` (UTF-8), a zero byte, and ``index`` (8 bytes, little
endian).  A generator for the stream is numpy's PCG64 seeded through
``SeedSequence(int.from_bytes(key, "little"))``.  Any implementation that
reproduces these two steps reproduces every random stream.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = (1 << 64) - 1


def derive_seed(master: int, purpose: str, index: int) -> bytes:
    if not (0 <= master <= _U64 and 0 <= index <= _U64):
        raise ValueError("master and index must be unsigned 64-bit integers")
    h = hashlib.blake2b(key=master.to_bytes(8, "little"), digest_size=32)
    h.update(purpose.encode("utf-8"))
    h.update(b"\x00")
    h.update(index.to_bytes(8, "little"))
    return h.digest()


def rng_from_key(key: bytes) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int.from_bytes(key, "little"))))


def replica_rng(master: int, purpose: str, index: int) -> np.random.Generator:
    return rng_from_key(derive_seed(master, purpose, index))
