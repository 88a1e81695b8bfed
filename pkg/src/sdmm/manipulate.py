"""Parameter manipulation and bounded approximation.

A non-zero parameter magnitude ``W`` is written as ``2**s * (1 + 2**n * mw)``
with ``mw`` odd (or zero). The approximation restricts ``mw`` to
``{0, 1, 3, 5, 7}`` so every core fits in three bits.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from functools import lru_cache

from .config import DspConfig

APPROX_CORES = (0, 1, 3, 5, 7)


@dataclass(frozen=True)
class ManipulatedParam:
    sign: int = 1
    s: int = 0
    n: int = 0
    mw: int = 0
    is_zero: bool = False
    exact: bool = True

    @property
    def magnitude(self) -> int:
        if self.is_zero:
            return 0
        return (1 << self.s) * (1 + (1 << self.n) * self.mw)

    @property
    def value(self) -> int:
        return self.sign * self.magnitude

    @property
    def negative(self) -> bool:
        return self.sign < 0 and not self.is_zero


ZERO = ManipulatedParam(sign=1, is_zero=True)


def manipulate(w_magnitude: int) -> ManipulatedParam:
    """Decompose a positive magnitude into ``(s, n, mw)`` with minimal ``mw``.

    >>> manipulate(52)
    ManipulatedParam(sign=1, s=2, n=2, mw=3, is_zero=False, exact=True)
    """
    w = int(w_magnitude)
    if w <= 0:
        raise ValueError(f"manipulate needs a positive magnitude, got {w}")
    s = 0
    while w % 2 == 0:
        s += 1
        w //= 2
    w -= 1
    n = 0
    if w > 0:
        while w % 2 == 0:
            n += 1
            w //= 2
    return ManipulatedParam(sign=1, s=s, n=n, mw=w)


def manipulate_signed(w: int) -> ManipulatedParam:
    """Exact decomposition of a signed value; zero maps to the zero lane."""
    w = int(w)
    if w == 0:
        return ZERO
    p = manipulate(abs(w))
    return ManipulatedParam(sign=-1 if w < 0 else 1, s=p.s, n=p.n, mw=p.mw)


def reconstruct(p: ManipulatedParam) -> int:
    return p.value


@lru_cache(maxsize=None)
def _representable(c: int) -> tuple[int, ...]:
    limit = 1 << (c - 1)
    out = set()
    for s in range(c):
        for n in range(c):
            for mw in APPROX_CORES:
                m = (1 << s) * (1 + (1 << n) * mw)
                if m <= limit:
                    out.add(m)
    return tuple(sorted(out))


def representable_set(cfg: DspConfig | int) -> tuple[int, ...]:
    """Ascending magnitudes in ``[1, 2**(c-1)]`` reachable with a 3-bit core."""
    c = cfg if isinstance(cfg, int) else cfg.c
    return _representable(c)


@lru_cache(maxsize=None)
def _nearest_member(c: int, m: int) -> int:
    members = _representable(c)
    i = bisect.bisect_left(members, m)
    if i < len(members) and members[i] == m:
        return m
    below = members[i - 1] if i > 0 else None
    above = members[i] if i < len(members) else None
    if below is None:
        return above
    if above is None:
        return below
    # ties resolve toward the larger magnitude
    return above if above - m <= m - below else below


def approximate(w: int, cfg: DspConfig | int) -> ManipulatedParam:
    """Round ``w`` to the nearest representable value, keeping its sign."""
    c = cfg if isinstance(cfg, int) else cfg.c
    w = int(w)
    if w == 0:
        return ZERO
    m = abs(w)
    if m > 1 << (c - 1):
        raise ValueError(f"{w} is outside the signed {c}-bit range")
    target = _nearest_member(c, m)
    p = manipulate(target)
    return ManipulatedParam(sign=-1 if w < 0 else 1, s=p.s, n=p.n, mw=p.mw,
                            exact=target == m)


def approximate_magnitude(m: int, c: int) -> int:
    return 0 if m == 0 else _nearest_member(c, m)


def approximation_error_table(c: int) -> dict[int, int]:
    """``|w - approximate(w)|`` for every ``w`` in the signed ``c``-bit range."""
    lo, hi = -(1 << (c - 1)), 1 << (c - 1)
    return {w: abs(w - approximate(w, c).value) for w in range(lo, hi)}
