"""Seed derivation and the portable 64-bit RNG stream used inside game states.

Every random draw in the project flows from a single run seed through
`derive_seed`, so runs replay bit-exactly. Game states carry a raw 64-bit
stream cursor (advanced by `next_state`, sampled by `mix64`) because those
draws must be reproducible from (game definition, action sequence) alone,
including by the browser client.
"""
from __future__ import annotations

import random

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(state: int) -> int:
    """splitmix64 output function for a given stream state."""
    z = state & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def next_state(state: int) -> int:
    """Advance a splitmix64 stream cursor by one draw."""
    return (state + GOLDEN) & MASK64


def fnv1a(data: bytes, h: int = _FNV_OFFSET) -> int:
    """64-bit FNV-1a over raw bytes; also the basis of state digests."""
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & MASK64
    return h


def derive_seed(*parts: int | str) -> int:
    """Fold an arbitrary mix of ints and strings into a 64-bit seed.

    Type tags keep derive_seed(1) and derive_seed("1") distinct.
    """
    h = _FNV_OFFSET
    for part in parts:
        if isinstance(part, bool):  # bool is an int subclass; be explicit
            tag = b"b:" + (b"1" if part else b"0")
        elif isinstance(part, int):
            tag = b"i:" + str(part).encode()
        else:
            tag = b"s:" + str(part).encode()
        h = fnv1a(tag + b"\x1f", h)
    return mix64(h)


def make_rng(*parts: int | str) -> random.Random:
    """A Python RNG seeded deterministically from the given parts."""
    return random.Random(derive_seed(*parts))
