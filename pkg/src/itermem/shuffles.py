"""Enumeration of shuffle permutations.

A shuffle of blocks of sizes ``(m1, m2, ...)`` is stored as the tuple of
images ``(rho(1), ..., rho(m))``: element ``p`` of the concatenated blocks is
placed at position ``rho(p)``, and ``rho`` is increasing on every block.
Barred shuffles add the fixed boundary labels, ``(0, rho(1), ..., m + 1)``.
Multi-directional shuffles are tuples of such tuples, one per cube direction.

Every enumeration is returned in lexicographic order.
"""
from __future__ import annotations

import itertools
import math
from typing import Sequence

from .errors import ShuffleError

Perm = tuple[int, ...]
Shuffle = tuple[Perm, ...]


def enumerate_sh(m1: int, m2: int) -> list[Perm]:
    """All order-preserving interleavings of blocks of sizes m1 and m2."""
    if m1 < 0 or m2 < 0:
        raise ShuffleError("block sizes must be non-negative")
    m = m1 + m2
    out = []
    for first in itertools.combinations(range(1, m + 1), m1):
        rest = [p for p in range(1, m + 1) if p not in first]
        out.append(tuple(first) + tuple(rest))
    return sorted(out)


def enumerate_sh_bar(m1: int, m2: int) -> list[Perm]:
    """Shuffles of ``{0, ..., m1+m2+1}`` fixing both boundary labels."""
    last = m1 + m2 + 1
    return [(0,) + rho + (last,) for rho in enumerate_sh(m1, m2)]


def enumerate_multi(blocks: Sequence[int]) -> list[Perm]:
    """Shuffles of several blocks, built by shuffling two at a time."""
    blocks = list(blocks)
    if any(b < 0 for b in blocks):
        raise ShuffleError("block sizes must be non-negative")
    if not blocks:
        return [()]
    current = [tuple(range(1, blocks[0] + 1))]
    total = blocks[0]
    for b in blocks[1:]:
        nxt = []
        for rho in current:
            for sigma in enumerate_sh(total, b):
                nxt.append(tuple(sigma[p - 1] for p in rho) + sigma[total:])
        current = nxt
        total += b
    return sorted(current)


def _check_pair(k1, k2):
    k1, k2 = tuple(k1), tuple(k2)
    if len(k1) != len(k2):
        raise ShuffleError(f"cut tuples differ in length: {k1} vs {k2}")
    return k1, k2


def enumerate_product(k1: Sequence[int], k2: Sequence[int], barred: bool = False) -> list[Shuffle]:
    """Direction-wise products of (barred) shuffles."""
    k1, k2 = _check_pair(k1, k2)
    family = enumerate_sh_bar if barred else enumerate_sh
    return list(itertools.product(*(family(a, b) for a, b in zip(k1, k2))))


def enumerate_sh1(k1: Sequence[int], k2: Sequence[int]) -> list[Shuffle]:
    """Barred product shuffles whose first direction is plain concatenation."""
    k1, k2 = _check_pair(k1, k2)
    if not k1:
        return [()]
    first = tuple(range(0, k1[0] + k2[0] + 2))
    rest = [enumerate_sh_bar(a, b) for a, b in zip(k1[1:], k2[1:])]
    return [(first,) + tail for tail in itertools.product(*rest)]


def enumerate_shn(k1: Sequence[int], k2: Sequence[int], copies: int) -> list[Shuffle]:
    """Shuffles of one ``k1`` block with ``copies`` ``k2`` blocks.

    Directions ``1..n-1`` carry multi-block shuffles; direction ``n`` is the
    identity on the ``copies + 1`` iteration slots (the last entries of the
    tuples are ignored).
    """
    k1, k2 = _check_pair(k1, k2)
    if copies < 1:
        raise ShuffleError("copies must be at least 1")
    if not k1:
        raise ShuffleError("need at least one direction")
    per_dir = [enumerate_multi([a] + [b] * copies) for a, b in zip(k1[:-1], k2[:-1])]
    last = tuple(range(1, copies + 2))
    return [tail + (last,) for tail in itertools.product(*per_dir)]


# -- counting -----------------------------------------------------------------------

def multinomial(*parts: int) -> int:
    out, total = 1, 0
    for p in parts:
        total += p
        out *= math.comb(total, p)
    return out


def count_sh(m1: int, m2: int) -> int:
    return math.comb(m1 + m2, m1)


def count_product(k1, k2) -> int:
    return math.prod(count_sh(a, b) for a, b in zip(k1, k2))


def count_sh1(k1, k2) -> int:
    return math.prod(count_sh(a, b) for a, b in zip(k1[1:], k2[1:]))


def count_shn(k1, k2, copies) -> int:
    return math.prod(multinomial(a, *([b] * copies)) for a, b in zip(k1[:-1], k2[:-1]))


# -- checks ---------------------------------------------------------------------------

def is_shuffle(rho: Perm, blocks: Sequence[int], barred: bool = False) -> bool:
    """True when ``rho`` is a shuffle of ``blocks`` (barred: with boundary labels)."""
    rho = tuple(rho)
    m = sum(blocks)
    if barred:
        if len(rho) != m + 2 or rho[0] != 0 or rho[-1] != m + 1:
            return False
        rho = rho[1:-1]
    if sorted(rho) != list(range(1, m + 1)):
        return False
    start = 0
    for b in blocks:
        seg = rho[start:start + b]
        if any(x >= y for x, y in zip(seg, seg[1:])):
            return False
        start += b
    return True


def apply_to_word(rho: Perm, word: Sequence) -> tuple:
    """The shuffled word: letter ``p`` of ``word`` goes to position ``rho(p)``."""
    if len(rho) != len(word):
        raise ShuffleError("shuffle and word differ in length")
    out = [None] * len(word)
    for p, pos in enumerate(rho):
        out[pos - 1] = word[p]
    return tuple(out)
