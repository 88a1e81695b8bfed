"""Bit-exact functional model of the DSP datapath and PE post-processing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .config import DspConfig
from .packer import DspOperands, ParamTuple, PortOverflowError, build_operands, exact_sign_extension
from .manipulate import manipulate

TraceSink = Callable[[str], None]


class DspOverflowError(ArithmeticError):
    """The DSP result left the accumulator width."""


class AccumulatorOverflowError(ArithmeticError):
    """A PE partial sum left its configured width."""


@dataclass(frozen=True)
class DspState:
    p_out: int
    config: DspConfig


@dataclass(frozen=True)
class LaneResult:
    lane_index: int
    value: int


def format_trace(ops: DspOperands, state: DspState) -> str:
    return f"A={ops.a_word:x} B={ops.b_word:x} C={ops.c_word:x} P={state.p_out:x}"


def dsp_execute(ops: DspOperands, cfg: DspConfig, trace: TraceSink | None = None) -> DspState:
    """``P = A * B + C`` on the configured port widths."""
    a, b, c = ops.a_word, ops.b_word, ops.c_word
    if a < 0 or a >= 1 << cfg.a_width:
        raise PortOverflowError(f"A={a:#x} does not fit {cfg.a_width} bits")
    if not -(1 << (cfg.b_width - 1)) <= b < 1 << (cfg.b_width - 1):
        raise PortOverflowError(f"B={b} does not fit the signed {cfg.b_width}-bit port")
    if c < 0 or c >= 1 << cfg.acc_width:
        raise PortOverflowError(f"C={c:#x} does not fit {cfg.acc_width} bits")
    raw = a * b + c
    if raw < 0 or raw >= 1 << cfg.acc_width:
        raise DspOverflowError(f"A*B+C={raw:#x} leaves the {cfg.acc_width}-bit accumulator")
    state = DspState(p_out=raw & ((1 << cfg.acc_width) - 1), config=cfg)
    if trace is not None:
        trace(format_trace(ops, state))
    return state


def _to_signed(x: int, bits: int) -> int:
    return x - (1 << bits) if x & (1 << (bits - 1)) else x


def extract_lanes(state: DspState, ops: DspOperands, i_val: int, cfg: DspConfig) -> list[LaneResult]:
    """Split ``P`` into lanes and undo the manipulation for each one.

    Each lane field is widened back by concatenating ``I[n-1:0]``, shifted
    left by ``s``, and negated when the parameter's sign bit is set.
    """
    slot = cfg.lane_slot
    field_mask = (1 << slot) - 1
    width = cfg.lane_result_bits
    out = []
    for i in range(cfg.k):
        if ops.lane_zero[i]:
            out.append(LaneResult(i, 0))
            continue
        n, s = ops.lane_shifts[i]
        field = _to_signed((state.p_out >> (i * slot)) & field_mask, slot)
        value = ((field << n) | (i_val & ((1 << n) - 1))) << s
        if not -(1 << (width - 1)) <= value < 1 << (width - 1):
            raise DspOverflowError(f"lane {i} result {value} exceeds {width} bits")
        if ops.lane_signs[i]:
            value = -value
        out.append(LaneResult(i, value))
    return out


def packed_products(i_val: int, tup: ParamTuple, cfg: DspConfig,
                    trace: TraceSink | None = None) -> list[int]:
    ops = build_operands(i_val, tup, cfg)
    state = dsp_execute(ops, cfg, trace)
    return [r.value for r in extract_lanes(state, ops, i_val, cfg)]


def accumulate(partial_sums: Sequence[int], products: Sequence[int], psum_width: int = 32) -> list[int]:
    """LUT-side accumulation with a hard error on overflow."""
    lo, hi = -(1 << (psum_width - 1)), 1 << (psum_width - 1)
    out = []
    for i, (acc, prod) in enumerate(zip(partial_sums, products)):
        total = int(acc) + prod
        if not lo <= total < hi:
            raise AccumulatorOverflowError(f"lane {i} partial sum {total} exceeds {psum_width} bits")
        out.append(total)
    return out


def pe_execute(i_val: int, tup: ParamTuple, partial_sums: Sequence[int], cfg: DspConfig,
               psum_width: int = 32, trace: TraceSink | None = None) -> list[int]:
    """One PE step: packed multiply then accumulation into ``partial_sums``."""
    if len(partial_sums) != cfg.k:
        raise ValueError(f"expected {cfg.k} partial sums, got {len(partial_sums)}")
    return accumulate(partial_sums, packed_products(i_val, tup, cfg, trace), psum_width)


def exact_lane_product(i_val: int, w: int, cfg: DspConfig) -> int:
    """Single-lane product through the un-approximated datapath.

    The lane is ``v + c - s - n`` bits wide and the C operand is the exact
    sign-extension field concatenated with ``I[v-1:n]``.
    """
    if w == 0:
        return 0
    p = manipulate(abs(w))
    width = cfg.v + cfg.c - p.s - p.n
    i_u = i_val & ((1 << cfg.v) - 1)
    sex = exact_sign_extension(i_val, abs(w), cfg, s=p.s)
    c_word = (sex << (cfg.v - p.n)) | (i_u >> p.n)
    field = _to_signed((p.mw * i_u + c_word) & ((1 << width) - 1), width)
    value = ((field << p.n) | (i_val & ((1 << p.n) - 1))) << p.s
    return -value if w < 0 else value
