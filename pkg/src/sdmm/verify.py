"""Exhaustive lane sweeps and ROM consistency checks."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .config import CORE_BITS, DspConfig
from .dspemu import dsp_execute, extract_lanes
from .manipulate import APPROX_CORES, approximate, representable_set
from .packer import APPROXIMATED, ParamTuple, build_operands
from .romdict import RomImage, operands_from_rom


@dataclass(frozen=True)
class Counterexample:
    w: int
    i_val: int
    lane: int
    expected: int
    got: int

    def __str__(self):
        return (f"W={self.w} I={self.i_val} lane={self.lane} "
                f"expected={self.expected} got={self.got}")


@dataclass
class SweepResult:
    checked: int = 0
    mismatches: int = 0
    first: Counterexample | None = None
    max_p_bits: int = 0
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.mismatches == 0 and not self.notes

    def record(self, cx: Counterexample):
        self.mismatches += 1
        if self.first is None:
            self.first = cx

    def summary(self) -> str:
        if self.passed:
            return f"PASS, 0 mismatches over {self.checked} lane products"
        if self.first is None:
            return f"FAIL, {len(self.notes)} malformed entries"
        return f"FAIL, {self.mismatches} mismatches; first: {self.first}"


def exact_signed_values(cfg: DspConfig) -> list[int]:
    """Every signed value the approximation leaves untouched, zero included."""
    mags = representable_set(cfg)
    return sorted({0, *mags, *(-m for m in mags)})


def input_range(cfg: DspConfig) -> range:
    return range(-(1 << (cfg.v - 1)), 1 << (cfg.v - 1))


def random_tuple(rng: random.Random, cfg: DspConfig, pool: list[int]) -> list[int]:
    return [rng.choice(pool) for _ in range(cfg.k)]


def lane_sweep(cfg: DspConfig, seeds=(0, 1, 2), values=None) -> SweepResult:
    """Every exact W in every lane position, against every input, with random co-lanes.

    The co-lanes are checked too, so the sweep also catches cross-lane leakage.
    """
    pool = exact_signed_values(cfg)
    values = pool if values is None else list(values)
    res = SweepResult()
    for seed in seeds:
        rng = random.Random(seed)
        for w in values:
            for pos in range(cfg.k):
                vals = random_tuple(rng, cfg, pool)
                vals[pos] = w
                tup = ParamTuple(tuple(approximate(x, cfg) for x in vals), True, APPROXIMATED)
                for i_val in input_range(cfg):
                    ops = build_operands(i_val, tup, cfg)
                    state = dsp_execute(ops, cfg)
                    res.max_p_bits = max(res.max_p_bits, (ops.a_word * ops.b_word + ops.c_word).bit_length())
                    for lane in extract_lanes(state, ops, i_val, cfg):
                        res.checked += 1
                        expected = vals[lane.lane_index] * i_val
                        if lane.value != expected:
                            res.record(Counterexample(vals[lane.lane_index], i_val,
                                                      lane.lane_index, expected, lane.value))
    return res


def verify_rom(rom: RomImage, cfg: DspConfig, expected: list[tuple[int, ...]] | None = None) -> SweepResult:
    """Check each ROM entry against the magnitudes it is supposed to hold.

    Without ``expected`` the reference is what the entry's own core, shift
    and zero fields describe, which still catches stray A-word bits and
    illegal cores.
    """
    rom.check_config(cfg)
    res = SweepResult()
    slot_mask = 0
    for i in range(cfg.k):
        slot_mask |= ((1 << CORE_BITS) - 1) << (i * cfg.lane_slot)
    if expected is not None and len(expected) != len(rom.entries):
        res.notes.append(f"expected {len(expected)} entries, ROM holds {len(rom.entries)}")
    for addr, entry in enumerate(rom.entries):
        mags = entry.magnitudes(cfg)
        cores = entry.cores(cfg)
        if entry.a_word & ~slot_mask:
            res.notes.append(f"entry {addr}: A word has bits outside the lane cores")
        illegal = [i for i, mw in enumerate(cores)
                   if mw not in APPROX_CORES or (entry.lane_zero[i] and mw)]
        for i in illegal:
            res.notes.append(f"entry {addr} lane {i}: illegal core {cores[i]}")
        if illegal:
            # no sign-extension mask exists for these cores, so nothing to execute
            continue
        ref = mags if expected is None or addr >= len(expected) else tuple(expected[addr])
        for sign_bits in (0, (1 << cfg.k) - 1):
            for i_val in input_range(cfg):
                ops = operands_from_rom(entry, sign_bits, i_val, cfg)
                lanes = extract_lanes(dsp_execute(ops, cfg), ops, i_val, cfg)
                for lane in lanes:
                    res.checked += 1
                    w = ref[lane.lane_index] * (-1 if sign_bits and ref[lane.lane_index] else 1)
                    if lane.value != w * i_val:
                        res.record(Counterexample(w, i_val, lane.lane_index, w * i_val, lane.value))
    return res
