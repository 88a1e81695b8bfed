"""Functional weight-stationary systolic array built from SDMM PEs.

Each PE holds one decoded ROM tuple: ``k`` weights from ``k`` neighbouring
output channels that share one input. Inputs stream along the rows, partial
sums flow down the columns and spill to PMem between row tiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DspConfig
from .dspemu import accumulate, dsp_execute, extract_lanes
from .romdict import EncodedStream, RomImage, decode_word, encode_stream, operands_from_rom


@dataclass(frozen=True)
class ArrayConfig:
    """A ``rows x cols`` grid of multiplier positions.

    Every ``k`` neighbouring columns share one SDMM PE, so the array holds
    ``rows * ceil(cols / k)`` DSP blocks where a one-MAC-per-DSP design
    needs ``rows * cols``.
    """

    rows: int = 12
    cols: int = 12
    dsp: DspConfig = field(default_factory=lambda: DspConfig.for_bits(8))
    psum_width: int = 32

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array needs at least one PE")

    @property
    def pe_cols(self) -> int:
        return -(-self.cols // self.dsp.k)

    @property
    def pe_count(self) -> int:
        return self.rows * self.pe_cols

    @property
    def baseline_dsps(self) -> int:
        return self.rows * self.cols

    @property
    def multiplications_per_pass(self) -> int:
        return self.pe_count * self.dsp.k


@dataclass(frozen=True)
class ConvSpec:
    height: int
    width: int
    c_in: int
    k_h: int
    k_w: int
    c_out: int
    stride: int = 1
    padding: int = 0

    @property
    def out_height(self) -> int:
        return (self.height + 2 * self.padding - self.k_h) // self.stride + 1

    @property
    def out_width(self) -> int:
        return (self.width + 2 * self.padding - self.k_w) // self.stride + 1

    def validate(self):
        dims = (self.height, self.width, self.c_in, self.k_h, self.k_w, self.c_out, self.stride)
        if min(dims) < 1 or self.padding < 0:
            raise ValueError(f"invalid convolution spec {self}")
        if self.out_height < 1 or self.out_width < 1:
            raise ValueError(f"convolution produces an empty output: {self}")


@dataclass
class MemoryModel:
    """Word arrays plus byte accounting for the four on-chip memories."""

    imem: np.ndarray
    wmem: np.ndarray
    pmem: np.ndarray
    omem: np.ndarray
    word_bits: dict

    def bytes_used(self) -> dict:
        return {name: int(np.ceil(getattr(self, name).size * bits / 8))
                for name, bits in self.word_bits.items()}


@dataclass
class PackedWeights:
    """A GEMM weight matrix as WMem index words plus the ROM they address."""

    words: np.ndarray  # (N, groups)
    rom: RomImage
    n_rows: int
    n_cols: int

    @property
    def groups(self) -> int:
        return self.words.shape[1]


def pack_weights(w: np.ndarray, cfg: DspConfig, capacity: int | None = None) -> tuple[PackedWeights, EncodedStream]:
    """Encode an ``N x P`` weight matrix, padding each row to a multiple of k."""
    w = np.asarray(w, dtype=np.int64)
    if w.ndim != 2:
        raise ValueError("weights must be a 2-D matrix")
    n, p = w.shape
    groups = -(-p // cfg.k)
    padded = np.zeros((n, groups * cfg.k), dtype=np.int64)
    padded[:, :p] = w
    enc = encode_stream(padded.ravel(), cfg, capacity)
    return PackedWeights(enc.words.reshape(n, groups), enc.rom, n, p), enc


def decoded_weights(packed: PackedWeights, cfg: DspConfig) -> np.ndarray:
    out = np.zeros((packed.n_rows, packed.groups * cfg.k), dtype=np.int64)
    for r in range(packed.n_rows):
        for g in range(packed.groups):
            out[r, g * cfg.k:(g + 1) * cfg.k] = decode_word(packed.words[r, g], packed.rom, cfg).values
    return out[:, :packed.n_cols]


@dataclass
class RunStats:
    passes: int = 0
    pe_steps: int = 0
    multiplications: int = 0
    weight_loads: int = 0
    tiles: int = 0
    dsp_count: int = 0
    max_loads_per_tile: int = 0
    per_pe_multiplications: list = field(default_factory=list)
    memory_bytes: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "passes": self.passes,
            "tiles": self.tiles,
            "pe_steps": self.pe_steps,
            "multiplications": self.multiplications,
            "weight_loads": self.weight_loads,
            "max_loads_per_pe_per_tile": self.max_loads_per_tile,
            "dsp_count": self.dsp_count,
            "per_pe_multiplications_max": max(self.per_pe_multiplications, default=0),
            "memory_bytes": dict(sorted(self.memory_bytes.items())),
        }


def _check_inputs(a: np.ndarray, cfg: DspConfig):
    lo, hi = -(1 << (cfg.v - 1)), 1 << (cfg.v - 1)
    if a.size and (a.min() < lo or a.max() >= hi):
        raise ValueError(f"inputs must lie in the signed {cfg.v}-bit range")


def _load_pe(word: int, rom: RomImage, cfg: DspConfig):
    addr = word >> cfg.k
    if not 0 <= addr < len(rom.entries):
        raise IndexError(f"address {addr} outside ROM of {len(rom.entries)} entries")
    return rom.entries[addr], word & ((1 << cfg.k) - 1)


def execute_gemm(a: np.ndarray, packed: PackedWeights, acfg: ArrayConfig) -> tuple[np.ndarray, RunStats]:
    """Run ``a @ W`` on the array using only index words and the ROM."""
    cfg = acfg.dsp
    packed.rom.check_config(cfg)
    a = np.asarray(a, dtype=np.int64)
    if a.ndim != 2 or a.shape[1] != packed.n_rows:
        raise ValueError(f"input shape {a.shape} does not match {packed.n_rows} weight rows")
    _check_inputs(a, cfg)
    m_rows, n = a.shape
    groups = packed.groups
    k = cfg.k

    mem = MemoryModel(
        imem=a.copy(),
        wmem=packed.words.copy(),
        pmem=np.zeros((m_rows, groups * k), dtype=np.int64),
        omem=np.zeros((m_rows, packed.n_cols), dtype=np.int64),
        word_bits={"imem": cfg.v, "wmem": cfg.index_width,
                   "pmem": acfg.psum_width, "omem": 32},
    )
    stats = RunStats(dsp_count=acfg.pe_count,
                     per_pe_multiplications=[0] * acfg.pe_count)

    for n0 in range(0, n, acfg.rows):
        for g0 in range(0, groups, acfg.pe_cols):
            stats.tiles += 1
            # weight-stationary load: each PE decodes its ROM entry once per tile
            grid = {}
            loads = {}
            for r in range(min(acfg.rows, n - n0)):
                for c in range(min(acfg.pe_cols, groups - g0)):
                    grid[r, c] = _load_pe(int(mem.wmem[n0 + r, g0 + c]), packed.rom, cfg)
                    loads[r, c] = loads.get((r, c), 0) + 1
            stats.weight_loads += sum(loads.values())
            stats.max_loads_per_tile = max(stats.max_loads_per_tile, max(loads.values(), default=0))
            for m in range(m_rows):
                stats.passes += 1
                for c in range(min(acfg.pe_cols, groups - g0)):
                    g = g0 + c
                    psums = [int(x) for x in mem.pmem[m, g * k:(g + 1) * k]]
                    for r in range(min(acfg.rows, n - n0)):
                        entry, sign_bits = grid[r, c]
                        i_val = int(mem.imem[m, n0 + r])
                        ops = operands_from_rom(entry, sign_bits, i_val, cfg)
                        lanes = extract_lanes(dsp_execute(ops, cfg), ops, i_val, cfg)
                        psums = accumulate(psums, [x.value for x in lanes], acfg.psum_width)
                        stats.pe_steps += 1
                        stats.per_pe_multiplications[r * acfg.pe_cols + c] += k
                    mem.pmem[m, g * k:(g + 1) * k] = psums
    stats.multiplications = stats.pe_steps * k
    mem.omem[:] = mem.pmem[:, :packed.n_cols]
    stats.memory_bytes = mem.bytes_used()
    return mem.omem.copy(), stats


def run_gemm(a: np.ndarray, w: np.ndarray, acfg: ArrayConfig,
             capacity: int | None = None) -> tuple[np.ndarray, RunStats]:
    packed, _ = pack_weights(w, acfg.dsp, capacity)
    return execute_gemm(a, packed, acfg)


def im2col(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """``(H, W, C_in)`` -> ``(H_out * W_out, K_h * K_w * C_in)`` patches."""
    p = spec.padding
    xp = np.pad(np.asarray(x, dtype=np.int64), ((p, p), (p, p), (0, 0)))
    rows = []
    for oy in range(spec.out_height):
        for ox in range(spec.out_width):
            y, xx = oy * spec.stride, ox * spec.stride
            rows.append(xp[y:y + spec.k_h, xx:xx + spec.k_w, :].ravel())
    return np.array(rows, dtype=np.int64).reshape(spec.out_height * spec.out_width, -1)


def run_conv(spec: ConvSpec, x: np.ndarray, kernel: np.ndarray, acfg: ArrayConfig,
             capacity: int | None = None) -> tuple[np.ndarray, RunStats]:
    """Convolution lowered to a GEMM; ``kernel`` is ``(K_h, K_w, C_in, C_out)``."""
    spec.validate()
    x = np.asarray(x, dtype=np.int64)
    kernel = np.asarray(kernel, dtype=np.int64)
    if x.shape != (spec.height, spec.width, spec.c_in):
        raise ValueError(f"input shape {x.shape} does not match {spec}")
    if kernel.shape != (spec.k_h, spec.k_w, spec.c_in, spec.c_out):
        raise ValueError(f"kernel shape {kernel.shape} does not match {spec}")
    cols = im2col(x, spec)
    out, stats = run_gemm(cols, kernel.reshape(-1, spec.c_out), acfg, capacity)
    return out.reshape(spec.out_height, spec.out_width, spec.c_out), stats


def resource_report(acfg: ArrayConfig, param_count: int = 0) -> dict:
    """DSP usage against a one-MAC-per-DSP array, plus WMem traffic."""
    cfg = acfg.dsp
    packed = acfg.pe_count
    baseline = acfg.baseline_dsps
    tuples = -(-param_count // cfg.k)
    raw_bytes = param_count * cfg.c / 8
    wrc_bytes = tuples * cfg.index_width / 8
    return {
        "rows": acfg.rows, "cols": acfg.cols, "k": cfg.k,
        "v": cfg.v, "c": cfg.c,
        "dsp_packed": packed,
        "dsp_baseline": baseline,
        "dsp_reduction": 1 - packed / baseline,
        "params": param_count,
        "wmem_bytes_raw": raw_bytes,
        "wmem_bytes_wrc": wrc_bytes,
    }
