"""Seed derivation and counter-based generators.

Streams come from numpy's Philox-4x64 bit generator keyed by a 64-bit seed.
Philox is counter based with published round constants, so any language with
a Philox-4x64-10 implementation reproduces the same raw words. Uniform
doubles are ``(word >> 11) * 2**-53`` as in numpy.
"""
import hashlib
import struct

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master_seed, experiment, N, replica):
    """Stable 64-bit seed for one ``(experiment, N, replica)`` cell.

    The first eight bytes (little endian) of
    ``blake2b(master_seed:u64 | N:u64 | replica:u64 | experiment utf-8)``.
    """
    payload = struct.pack("<QQQ", int(master_seed) & _MASK64, int(N) & _MASK64,
                          int(replica) & _MASK64) + str(experiment).encode()
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_rng(seed):
    """Generator over Philox keyed by ``seed`` (counter starts at zero)."""
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))


def cell_rng(master_seed, experiment, N, replica):
    seed = derive_seed(master_seed, experiment, N, replica)
    return seed, make_rng(seed)
