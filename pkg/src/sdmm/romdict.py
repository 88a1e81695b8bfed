"""WROM dictionary, index-word codec and on-disk formats.

ROM image (little-endian)::

    b"SDMM" | u8 version | u8 c | u8 v | u8 k | u32 entry count
            | entries x (u64 a_word, k x (u8 n, u8 s, u8 zero))

Index word: ``address << k | sign_bits`` with bit ``i`` holding the sign of
lane ``i`` (1 = negative). Streams of index words are stored as a tight
MSB-first bitstream next to a JSON header.
"""

from __future__ import annotations

import json
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bitstream import pack_words, unpack_words
from .config import CORE_BITS, DspConfig
from .manipulate import ZERO, ManipulatedParam, approximate
from .packer import (APPROXIMATED, DspOperands, ParamTuple, _argmin_bray_curtis, approximate_tuple,
                     fine_tune, form_tuples, sign_extension)

MAGIC = b"SDMM"
VERSION = 1


@dataclass(frozen=True)
class RomEntry:
    a_word: int
    lane_shifts: tuple[tuple[int, int], ...]
    lane_zero: tuple[bool, ...]

    def cores(self, cfg: DspConfig) -> tuple[int, ...]:
        mask = (1 << CORE_BITS) - 1
        return tuple((self.a_word >> (i * cfg.lane_slot)) & mask for i in range(cfg.k))

    def lanes(self, signs: Sequence[int], cfg: DspConfig) -> tuple[ManipulatedParam, ...]:
        out = []
        for mw, (n, s), zero, neg in zip(self.cores(cfg), self.lane_shifts, self.lane_zero, signs):
            if zero:
                out.append(ZERO)
            else:
                out.append(ManipulatedParam(sign=-1 if neg else 1, s=s, n=n, mw=mw))
        return tuple(out)

    def magnitudes(self, cfg: DspConfig) -> tuple[int, ...]:
        return tuple(p.magnitude for p in self.lanes([0] * cfg.k, cfg))

    def to_tuple(self, sign_bits: int, cfg: DspConfig) -> ParamTuple:
        signs = [(sign_bits >> i) & 1 for i in range(cfg.k)]
        return ParamTuple(self.lanes(signs, cfg), True, APPROXIMATED)

    @classmethod
    def from_tuple(cls, tup: ParamTuple, cfg: DspConfig) -> "RomEntry":
        a_word = 0
        for i, p in enumerate(tup.lanes):
            if not p.is_zero:
                a_word |= p.mw << (i * cfg.lane_slot)
        return cls(a_word,
                   tuple((0, 0) if p.is_zero else (p.n, p.s) for p in tup.lanes),
                   tuple(p.is_zero for p in tup.lanes))


@dataclass
class RomImage:
    entries: list[RomEntry]
    c: int
    v: int
    k: int
    capacity: int
    stats: dict = field(default_factory=dict)
    merges: dict = field(default_factory=dict)

    def check_config(self, cfg: DspConfig):
        if (self.c, self.v, self.k) != (cfg.c, cfg.v, cfg.k):
            raise ValueError(f"ROM built for c={self.c}, v={self.v}, k={self.k}; "
                             f"config has c={cfg.c}, v={cfg.v}, k={cfg.k}")

    def to_bytes(self) -> bytes:
        out = [MAGIC, struct.pack("<BBBBI", VERSION, self.c, self.v, self.k, len(self.entries))]
        for e in self.entries:
            out.append(struct.pack("<Q", e.a_word))
            for (n, s), z in zip(e.lane_shifts, e.lane_zero):
                out.append(struct.pack("<BBB", n, s, int(z)))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RomImage":
        if data[:4] != MAGIC:
            raise ValueError("not an SDMM ROM image")
        version, c, v, k, count = struct.unpack_from("<BBBBI", data, 4)
        if version != VERSION:
            raise ValueError(f"unsupported ROM version {version}")
        off = 12
        entries = []
        for _ in range(count):
            (a_word,) = struct.unpack_from("<Q", data, off)
            off += 8
            shifts, zeros = [], []
            for _ in range(k):
                n, s, z = struct.unpack_from("<BBB", data, off)
                off += 3
                shifts.append((n, s))
                zeros.append(bool(z))
            entries.append(RomEntry(a_word, tuple(shifts), tuple(zeros)))
        if off != len(data):
            raise ValueError("trailing bytes after ROM entries")
        capacity = 1 << (13 if c == 8 else 14)
        return cls(entries, c, v, k, capacity, {"occupancy": count})

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "RomImage":
        return cls.from_bytes(Path(path).read_bytes())


def _magnitude_tuple(tup: ParamTuple) -> tuple[int, ...]:
    return tup.magnitudes


def build_rom(tuples: Mapping[tuple[int, ...], int] | Iterable[ParamTuple], cfg: DspConfig,
              capacity: int | None = None) -> tuple[RomImage, dict[tuple[int, ...], int]]:
    """One ROM entry per distinct approximated magnitude tuple.

    Addresses follow descending frequency, ties in lexicographic order. When
    the distinct count exceeds ``capacity``, the rarest tuples are merged into
    their Bray-Curtis-nearest retained tuple.
    """
    capacity = cfg.rom_capacity if capacity is None else capacity
    if capacity < 1:
        raise ValueError("ROM capacity must be at least 1")
    if isinstance(tuples, Mapping):
        freqs = Counter({tuple(t): int(f) for t, f in tuples.items()})
        protos = {}
    else:
        freqs = Counter()
        protos = {}
        for tup in tuples:
            key = _magnitude_tuple(tup)
            freqs[key] += 1
            protos.setdefault(key, tup)

    ordered = sorted(freqs, key=lambda t: (-freqs[t], t))
    kept, dropped = ordered[:capacity], ordered[capacity:]
    address_map = {t: i for i, t in enumerate(kept)}
    merges = {}
    if dropped:
        kept_arr = np.array(kept, dtype=np.int64)
        for t in dropped:
            target = _argmin_bray_curtis(np.array(t, dtype=np.int64), kept_arr)
            merges[t] = target
            address_map[t] = address_map[target]

    entries = []
    for t in kept:
        tup = protos.get(t) or _tuple_from_magnitudes(t, cfg)
        entries.append(RomEntry.from_tuple(tup, cfg))
    stats = {
        "distinct_in": len(ordered),
        "occupancy": len(entries),
        "capacity": capacity,
        "merge_count": len(merges),
        "merged_params": int(sum(freqs[t] for t in merges)),
    }
    return RomImage(entries, cfg.c, cfg.v, cfg.k, capacity, stats, merges), address_map


def _tuple_from_magnitudes(mags: Sequence[int], cfg: DspConfig) -> ParamTuple:
    return ParamTuple(tuple(approximate(m, cfg) for m in mags), True, APPROXIMATED)


@dataclass
class EncodedStream:
    words: np.ndarray
    rom: RomImage
    param_count: int
    address_map: dict
    funnel: dict
    final_values: np.ndarray

    @property
    def tuple_count(self) -> int:
        return len(self.words)


def encode_stream(params, cfg: DspConfig, capacity: int | None = None) -> EncodedStream:
    """Approximate, fine-tune and dictionary-encode a flat parameter stream."""
    flat = np.asarray(params, dtype=np.int64).ravel()
    original = form_tuples(flat, cfg)
    tuned = fine_tune(original, cfg)
    approx = [approximate_tuple(t, cfg) for t in tuned]
    rom, address_map = build_rom(approx, cfg, capacity)

    words = np.empty(len(approx), dtype=np.int64)
    final = np.empty(len(approx) * cfg.k, dtype=np.int64)
    for j, tup in enumerate(approx):
        mags = tup.magnitudes
        addr = address_map[mags]
        entry_mags = rom.entries[addr].magnitudes(cfg)
        signs = 0
        for i, p in enumerate(tup.lanes):
            if p.negative and entry_mags[i] != 0:
                signs |= 1 << i
            final[j * cfg.k + i] = -entry_mags[i] if signs >> i & 1 else entry_mags[i]
        words[j] = (addr << cfg.k) | signs

    funnel = {
        "tuples": len(original),
        "original": len({t.magnitudes for t in original}),
        "infeasible": sum(not t.feasible for t in original),
        "fine_tuned": len({t.magnitudes for t in tuned}),
        "approximated": len({t.magnitudes for t in approx}),
        "rom_entries": len(rom.entries),
    }
    return EncodedStream(words, rom, len(flat), address_map, funnel, final)


def decode_word(word: int, rom: RomImage, cfg: DspConfig) -> ParamTuple:
    addr = int(word) >> cfg.k
    if not 0 <= addr < len(rom.entries):
        raise IndexError(f"address {addr} outside ROM of {len(rom.entries)} entries")
    return rom.entries[addr].to_tuple(int(word) & ((1 << cfg.k) - 1), cfg)


def decode_stream(words, rom: RomImage, cfg: DspConfig) -> list[ParamTuple]:
    rom.check_config(cfg)
    return [decode_word(w, rom, cfg) for w in np.asarray(words, dtype=np.int64).ravel()]


def decode_params(words, rom: RomImage, cfg: DspConfig, count: int | None = None) -> np.ndarray:
    vals = [v for t in decode_stream(words, rom, cfg) for v in t.values]
    out = np.array(vals, dtype=np.int64)
    return out if count is None else out[:count]


def wrc_ratio(cfg: DspConfig) -> float:
    """Index-word bits over raw bits for one tuple."""
    return cfg.index_width / (cfg.k * cfg.c)


def memory_crossover(cfg: DspConfig, rom_entries: int | None = None) -> dict:
    """Parameter count beyond which ROM + index words beat raw storage."""
    entries = cfg.rom_capacity if rom_entries is None else rom_entries
    rom_bits = entries * cfg.rom_entry_bits
    saved_per_tuple = cfg.c * cfg.k - cfg.index_width
    tuples = rom_bits / saved_per_tuple
    return {"rom_entries": entries, "rom_bits": rom_bits,
            "saved_bits_per_tuple": saved_per_tuple,
            "crossover_tuples": tuples, "crossover_params": tuples * cfg.k}


# -- files --------------------------------------------------------------------------

def _sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_index_stream(path, words, cfg: DspConfig, param_count: int | None = None):
    words = np.asarray(words, dtype=np.int64)
    Path(path).write_bytes(pack_words(words, cfg.index_width))
    header = {"bits": cfg.c, "input_bits": cfg.v, "k": cfg.k,
              "address_width": cfg.address_width, "count": int(words.size),
              "param_count": int(words.size * cfg.k if param_count is None else param_count)}
    _sidecar(path).write_text(json.dumps(header, sort_keys=True, indent=2) + "\n")


def read_index_stream(path) -> tuple[np.ndarray, dict]:
    header = json.loads(_sidecar(path).read_text())
    width = header["address_width"] + header["k"]
    words = unpack_words(Path(path).read_bytes(), width, header["count"])
    return words, header


def operands_from_rom(entry: RomEntry, sign_bits: int, i_val: int, cfg: DspConfig):
    """DSP operands straight from a ROM entry; the A word is used verbatim."""
    c_word = 0
    for i, (mw, (n, s), zero) in enumerate(zip(entry.cores(cfg), entry.lane_shifts, entry.lane_zero)):
        if not zero:
            lane = ManipulatedParam(s=s, n=n, mw=mw)
            c_word |= sign_extension(i_val, lane, cfg) << (i * cfg.lane_slot)
    return DspOperands(
        a_word=entry.a_word,
        b_word=int(i_val) & ((1 << cfg.v) - 1),
        c_word=c_word,
        lane_shifts=entry.lane_shifts,
        lane_signs=tuple(int((sign_bits >> i) & 1 and not entry.lane_zero[i]) for i in range(cfg.k)),
        lane_zero=entry.lane_zero,
        i_val=int(i_val),
    )
