"""Deterministic seed derivation and RNG construction.

Seeds are combined with the splitmix64 finalizer (Steele et al. constants)
so that independent implementations can reproduce the same derived seeds:

    mix64(x): x += 0x9E3779B97F4A7C15
              x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
              x = (x ^ (x >> 27)) * 0x94D049BB133111EB
              return x ^ (x >> 31)

All arithmetic is modulo 2^64. Sampled randomness then comes from the
counter-based Philox 4x64 generator keyed by the derived seed, which is
splittable and platform-stable.
"""

from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "philox4x64"

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """splitmix64 finalizer; full-period bijection on 64-bit integers."""
    x = (x + _GAMMA) & _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


def derive_seed(root_seed: int, *parts: int | str) -> int:
    """Fold parts (ints or strings) into root_seed; order-sensitive."""
    h = mix64(root_seed & _MASK64)
    for part in parts:
        if isinstance(part, str):
            for b in part.encode("utf-8"):
                h = mix64(h ^ b)
        else:
            h = mix64(h ^ (int(part) & _MASK64))
    return h


def make_rng(seed: int) -> np.random.Generator:
    """Philox generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))
