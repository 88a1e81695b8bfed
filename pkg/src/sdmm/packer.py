"""Tuple formation, feasibility, fine-tuning and DSP operand synthesis."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .config import CORE_BITS, DspConfig
from .manipulate import (ZERO, ManipulatedParam, approximate, manipulate,
                         manipulate_signed)

ORIGINAL = "original"
FINE_TUNED = "fine_tuned"
APPROXIMATED = "approximated"

_MASKS = {0: 0b111, 1: 0b110, 3: 0b100, 5: 0b010, 7: 0b000}


class PortOverflowError(ValueError):
    """An operand does not fit its DSP port in strict mode."""


@dataclass(frozen=True)
class ParamTuple:
    lanes: tuple[ManipulatedParam, ...]
    feasible: bool = True
    origin: str = ORIGINAL

    @property
    def magnitudes(self) -> tuple[int, ...]:
        return tuple(p.magnitude for p in self.lanes)

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(p.value for p in self.lanes)

    @property
    def signs(self) -> tuple[int, ...]:
        return tuple(p.sign for p in self.lanes)


@dataclass(frozen=True)
class DspOperands:
    a_word: int
    b_word: int
    c_word: int
    lane_shifts: tuple[tuple[int, int], ...]
    lane_signs: tuple[int, ...]
    lane_zero: tuple[bool, ...]
    i_val: int = 0


def mask_of(mw_a: int) -> int:
    """3-bit sign-extension mask for an approximated core."""
    try:
        return _MASKS[mw_a]
    except KeyError:
        raise ValueError(f"core {mw_a} is not one of 0, 1, 3, 5, 7") from None


def _check_input(i_val: int, v: int) -> int:
    i_val = int(i_val)
    if not -(1 << (v - 1)) <= i_val < (1 << (v - 1)):
        raise ValueError(f"input {i_val} is outside the signed {v}-bit range")
    return i_val


def sign_extension(i_val: int, lane: ManipulatedParam, cfg: DspConfig) -> int:
    """Correction word injected through the C port for one lane.

    The high 3 bits are the core's mask gated by the sign of ``i_val``; the
    low ``v`` bits are ``i_val`` arithmetically shifted right by ``n``.
    """
    i_val = _check_input(i_val, cfg.v)
    sign_rep = 0b111 if i_val < 0 else 0
    low = (i_val >> lane.n) & ((1 << cfg.v) - 1)
    return ((mask_of(lane.mw) & sign_rep) << cfg.v) | low


def _trailing_zeros(x: int) -> int:
    return (x & -x).bit_length() - 1


def exact_sign_extension(i_val: int, w: int, cfg: DspConfig,
                         s: int | None = None, m: int | None = None) -> int:
    """Sign-extension field for an un-approximated magnitude ``w``.

    Returns the ``(c - s)``-bit field that is concatenated above
    ``I[v-1:n]``. ``m`` is the accumulator segment width and defaults to the
    lane slot; any ``m >= c`` yields the same field.
    """
    i_val = _check_input(i_val, cfg.v)
    w = int(w)
    if w <= 0:
        raise ValueError("exact sign extension needs a positive magnitude")
    tz = _trailing_zeros(w)
    s = tz if s is None else s
    if s < 0 or s > tz:
        raise ValueError(f"s={s} exceeds the {tz} trailing zeros of {w}")
    m = cfg.lane_slot if m is None else m
    width = cfg.c - s
    if width <= 0:
        return 0
    if i_val >= 0:
        return 0
    return ((1 << (m - s)) - (w >> s)) % (1 << width)


def build_operands(i_val: int, tup: ParamTuple, cfg: DspConfig) -> DspOperands:
    """Synthesize the A, B and C operands for one packed DSP pass.

    Port B carries the ``v``-bit two's-complement pattern of ``i_val``
    zero-extended, which is what the sign-extension correction assumes.
    """
    i_val = _check_input(i_val, cfg.v)
    if len(tup.lanes) != cfg.k:
        raise ValueError(f"tuple has {len(tup.lanes)} lanes, config expects {cfg.k}")
    slot = cfg.lane_slot
    a_word = 0
    c_word = 0
    for i, lane in enumerate(tup.lanes):
        if lane.is_zero:
            continue
        if lane.mw >= 1 << CORE_BITS:
            raise ValueError(f"lane {i} core {lane.mw} is not approximated")
        a_word |= lane.mw << (i * slot)
        c_word |= sign_extension(i_val, lane, cfg) << (i * slot)
    if cfg.mode == "strict" and a_word >= 1 << cfg.a_width:
        raise PortOverflowError(f"A word {a_word:#x} exceeds {cfg.a_width} bits")
    return DspOperands(
        a_word=a_word,
        b_word=i_val & ((1 << cfg.v) - 1),
        c_word=c_word,
        lane_shifts=tuple((p.n, p.s) for p in tup.lanes),
        lane_signs=tuple(1 if p.negative else 0 for p in tup.lanes),
        lane_zero=tuple(p.is_zero for p in tup.lanes),
        i_val=i_val,
    )


# -- feasibility -------------------------------------------------------------

def _core_bits(p: ManipulatedParam) -> int:
    return 0 if p.is_zero else p.mw.bit_length()


def _feasible_bits(bits: Sequence[int], cfg: DspConfig) -> bool:
    slots = [cfg.v + b for b in bits]
    # port A is two's complement: the packed word must leave its sign bit clear
    a_span = sum(slots[:-1]) + bits[-1]
    return a_span + 1 <= cfg.a_width and sum(slots) <= cfg.acc_width


def feasibility(lanes: ParamTuple | Sequence[ManipulatedParam], cfg: DspConfig) -> bool:
    """Whether the exact decompositions pack into one DSP pass.

    Each lane occupies ``v + bitlen(mw)`` bits of the product.
    """
    if isinstance(lanes, ParamTuple):
        lanes = lanes.lanes
    return _feasible_bits([_core_bits(p) for p in lanes], cfg)


@lru_cache(maxsize=None)
def _core_bits_table(c: int) -> np.ndarray:
    """bit length of the minimal core for every magnitude 0 .. 2**(c-1)."""
    return np.array([0] + [manipulate(m).mw.bit_length() for m in range(1, (1 << (c - 1)) + 1)],
                    dtype=np.int64)


def feasible_magnitudes(mags: Sequence[int], cfg: DspConfig) -> bool:
    table = _core_bits_table(cfg.c)
    return _feasible_bits([int(table[m]) for m in mags], cfg)


def feasible_mask(cands: np.ndarray, cfg: DspConfig) -> np.ndarray:
    """Vectorized feasibility over an ``(N, k)`` array of magnitude tuples."""
    bits = _core_bits_table(cfg.c)[cands]
    a_span = (cfg.v * (cfg.k - 1) + bits[:, :-1].sum(axis=1) + bits[:, -1])
    total = cfg.v * cfg.k + bits.sum(axis=1)
    return (a_span + 1 <= cfg.a_width) & (total <= cfg.acc_width)


# -- Bray-Curtis fine-tuning ----------------------------------------------------

def bray_curtis(u: Sequence[int], w: Sequence[int]) -> float:
    """``sum(||u_i| - |w_i||) / sum(|u_i + w_i|)``; two all-zero vectors give 0."""
    u = np.asarray(u, dtype=np.int64)
    w = np.asarray(w, dtype=np.int64)
    num = np.abs(np.abs(u) - np.abs(w)).sum()
    den = np.abs(u + w).sum()
    if den == 0:
        return 0.0
    return float(num) / float(den)


def _lane_candidates(u: int, bits: np.ndarray) -> list[int]:
    # nearest magnitude on each side of u for every core-width budget; the
    # ratio objective only grows when a lane moves further from u
    out = {u}
    top = len(bits) - 1
    for b in range(int(bits.max()) + 1):
        for m in range(u, -1, -1):
            if bits[m] <= b:
                out.add(m)
                break
        for m in range(u, top + 1):
            if bits[m] <= b:
                out.add(m)
                break
    return sorted(out)


@lru_cache(maxsize=65536)
def nearest_feasible(mags: tuple[int, ...], cfg: DspConfig) -> tuple[int, ...]:
    """Feasible magnitude tuple with minimal Bray-Curtis distance to ``mags``.

    Ties go to the lexicographically smallest tuple.
    """
    if feasible_magnitudes(mags, cfg):
        return mags
    bits = _core_bits_table(cfg.c)
    per_lane = [_lane_candidates(m, bits) for m in mags]
    cands = np.array(list(itertools.product(*per_lane)), dtype=np.int64)
    cands = cands[feasible_mask(cands, cfg)]
    if len(cands) == 0:
        raise RuntimeError(f"no feasible tuple near {mags}")
    return _argmin_bray_curtis(np.array(mags, dtype=np.int64), cands)


def _argmin_bray_curtis(u: np.ndarray, cands: np.ndarray) -> tuple[int, ...]:
    num = np.abs(cands - u).sum(axis=1)
    den = (cands + u).sum(axis=1)
    best = int(np.argmin(num / np.maximum(den, 1)))
    nb, db = num[best], den[best]
    # exact rational comparison for the tie set
    ties = cands[num * db == nb * den]
    order = np.lexsort(ties.T[::-1])
    return tuple(int(x) for x in ties[order[0]])


def _with_magnitudes(tup: ParamTuple, mags: Sequence[int]) -> ParamTuple:
    lanes = []
    for old, m in zip(tup.lanes, mags):
        if m == 0:
            lanes.append(ZERO)
            continue
        p = manipulate(m)
        sign = -1 if old.negative else 1
        lanes.append(ManipulatedParam(sign=sign, s=p.s, n=p.n, mw=p.mw,
                                      exact=old.exact and m == old.magnitude))
    return ParamTuple(tuple(lanes), feasible=True, origin=FINE_TUNED)


def fine_tune(tuples: Iterable[ParamTuple], cfg: DspConfig) -> list[ParamTuple]:
    """Replace every infeasible tuple with its nearest feasible neighbour."""
    out = []
    for tup in tuples:
        if feasibility(tup, cfg):
            out.append(tup if tup.feasible else ParamTuple(tup.lanes, True, tup.origin))
            continue
        out.append(_with_magnitudes(tup, nearest_feasible(tup.magnitudes, cfg)))
    return out


# -- tuple helpers -----------------------------------------------------------------

def form_tuples(params: Iterable[int], cfg: DspConfig) -> list[ParamTuple]:
    """Group a flat parameter stream ``k`` at a time, zero-padding the tail."""
    flat = [int(x) for x in np.asarray(list(params) if not isinstance(params, np.ndarray)
                                       else params).ravel()]
    limit = 1 << (cfg.c - 1)
    for x in flat:
        if not -limit <= x < limit:
            raise ValueError(f"parameter {x} is outside the signed {cfg.c}-bit range")
    pad = (-len(flat)) % cfg.k
    flat.extend([0] * pad)
    out = []
    for i in range(0, len(flat), cfg.k):
        lanes = tuple(manipulate_signed(x) for x in flat[i:i + cfg.k])
        out.append(ParamTuple(lanes, feasible=feasibility(lanes, cfg), origin=ORIGINAL))
    return out


def approximate_tuple(tup: ParamTuple, cfg: DspConfig) -> ParamTuple:
    lanes = []
    for p in tup.lanes:
        a = approximate(p.value, cfg)
        lanes.append(ManipulatedParam(a.sign, a.s, a.n, a.mw, a.is_zero,
                                      exact=a.exact and p.exact))
    return ParamTuple(tuple(lanes), feasible=True, origin=APPROXIMATED)


def tuple_from_values(values: Sequence[int], cfg: DspConfig, approx: bool = True) -> ParamTuple:
    """Convenience: build a tuple directly from signed values."""
    if len(values) != cfg.k:
        raise ValueError(f"expected {cfg.k} values, got {len(values)}")
    if approx:
        return ParamTuple(tuple(approximate(x, cfg) for x in values), True, APPROXIMATED)
    lanes = tuple(manipulate_signed(x) for x in values)
    return ParamTuple(lanes, feasibility(lanes, cfg), ORIGINAL)
