"""Canonical Huffman coding of index-word streams.

Container layout (little-endian)::

    b"SDMH" | u8 version | u32 table size | table size x (u32 symbol, u8 length)
            | u64 symbol count | u64 payload bits | payload (MSB-first)

The table is sorted canonically (length, then symbol); codes are rebuilt
from the lengths alone.
"""

from __future__ import annotations

import heapq
import math
import struct
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .bitstream import pack_bitstring, unpack_bitstring

MAGIC = b"SDMH"
VERSION = 1


def code_lengths(freqs: dict[int, int]) -> dict[int, int]:
    """Huffman code length per symbol; a lone symbol gets length 1."""
    if not freqs:
        return {}
    if len(freqs) == 1:
        return {next(iter(freqs)): 1}
    # (weight, tiebreak, symbols-in-subtree)
    heap = [(f, i, [sym]) for i, (sym, f) in enumerate(sorted(freqs.items()))]
    heapq.heapify(heap)
    lengths = dict.fromkeys(freqs, 0)
    tiebreak = len(heap)
    while len(heap) > 1:
        f1, _, s1 = heapq.heappop(heap)
        f2, _, s2 = heapq.heappop(heap)
        for sym in s1:
            lengths[sym] += 1
        for sym in s2:
            lengths[sym] += 1
        heapq.heappush(heap, (f1 + f2, tiebreak, s1 + s2))
        tiebreak += 1
    return lengths


def canonical_codes(lengths: dict[int, int]) -> dict[int, tuple[int, int]]:
    """Map symbol -> (code, length) from code lengths alone."""
    code = 0
    prev = 0
    out = {}
    for sym, ln in sorted(lengths.items(), key=lambda kv: (kv[1], kv[0])):
        code <<= ln - prev
        out[sym] = (code, ln)
        code += 1
        prev = ln
    return out


@dataclass(frozen=True)
class HuffmanStream:
    lengths: dict[int, int]
    payload: bytes
    nbits: int
    count: int

    @property
    def bits_per_symbol(self) -> float:
        return self.nbits / self.count if self.count else 0.0

    @property
    def table_bits(self) -> int:
        return len(self.lengths) * 40

    def to_bytes(self) -> bytes:
        table = sorted(self.lengths.items(), key=lambda kv: (kv[1], kv[0]))
        out = [MAGIC, struct.pack("<BI", VERSION, len(table))]
        out += [struct.pack("<IB", sym, ln) for sym, ln in table]
        out.append(struct.pack("<QQ", self.count, self.nbits))
        out.append(self.payload)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "HuffmanStream":
        if data[:4] != MAGIC:
            raise ValueError("not a Huffman container")
        version, size = struct.unpack_from("<BI", data, 4)
        if version != VERSION:
            raise ValueError(f"unsupported container version {version}")
        off = 9
        lengths = {}
        for _ in range(size):
            sym, ln = struct.unpack_from("<IB", data, off)
            lengths[sym] = ln
            off += 5
        count, nbits = struct.unpack_from("<QQ", data, off)
        off += 16
        return cls(lengths, data[off:], nbits, count)


def huffman_encode(symbols: Iterable[int]) -> HuffmanStream:
    symbols = [int(s) for s in symbols]
    if not symbols:
        raise ValueError("cannot Huffman-encode an empty stream")
    lengths = code_lengths(Counter(symbols))
    codes = {sym: format(code, f"0{ln}b") for sym, (code, ln) in canonical_codes(lengths).items()}
    bits = "".join(codes[s] for s in symbols)
    return HuffmanStream(lengths, pack_bitstring(bits), len(bits), len(symbols))


def huffman_decode(stream: HuffmanStream) -> list[int]:
    codes = canonical_codes(stream.lengths)
    lookup = {(ln, code): sym for sym, (code, ln) in codes.items()}
    max_len = max(stream.lengths.values())
    bits = unpack_bitstring(stream.payload, stream.nbits)
    out = []
    code = 0
    ln = 0
    for ch in bits:
        code = (code << 1) | (ch == "1")
        ln += 1
        sym = lookup.get((ln, code))
        if sym is not None:
            out.append(sym)
            code = 0
            ln = 0
        elif ln > max_len:
            raise ValueError("corrupt Huffman payload")
    if ln or len(out) != stream.count:
        raise ValueError("Huffman payload ended mid-symbol")
    return out


def entropy_bits(symbols: Sequence[int]) -> float:
    """Empirical Shannon entropy of a stream, bits per symbol."""
    counts = Counter(symbols)
    total = sum(counts.values())
    return -sum(c / total * math.log2(c / total) for c in counts.values())
