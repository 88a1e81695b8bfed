"""MSB-first bit packing helpers."""

from __future__ import annotations

import numpy as np


def pack_words(words, width: int) -> bytes:
    """Concatenate ``width``-bit words MSB-first into bytes, zero-padded."""
    w = np.asarray(words, dtype=np.uint64).ravel()
    if w.size == 0:
        return b""
    if width > 64 or np.any(w >> np.uint64(width)):
        raise ValueError(f"word does not fit {width} bits")
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    bits = ((w[:, None] >> shifts) & np.uint64(1)).astype(np.uint8).ravel()
    return np.packbits(bits).tobytes()


def unpack_words(data: bytes, width: int, count: int) -> np.ndarray:
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    need = count * width
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if bits.size < need:
        raise ValueError(f"bitstream holds {bits.size} bits, {need} needed")
    bits = bits[:need].reshape(count, width).astype(np.int64)
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return bits @ weights


def pack_bitstring(bits: str) -> bytes:
    if not bits:
        return b""
    arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
    return np.packbits(arr).tobytes()


def unpack_bitstring(data: bytes, nbits: int) -> str:
    arr = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:nbits]
    return (arr + ord("0")).astype(np.uint8).tobytes().decode("ascii")
