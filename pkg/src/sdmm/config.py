"""DSP packing configuration.

A :class:`DspConfig` fixes the input-variable width ``v``, the parameter
width ``c``, the number of lanes ``k`` packed into one DSP pass, and the
port widths of the emulated DSP48E1-style block.
"""

from __future__ import annotations

from dataclasses import dataclass

# lanes per DSP for each input-variable width
LANES_FOR_INPUT_BITS = {8: 3, 6: 4, 4: 6}

# DSP48E1 port widths
DSP48E1_A_WIDTH = 25
DSP48E1_B_WIDTH = 18
DSP48E1_ACC_WIDTH = 48

# approximated core value is at most 3 bits wide
CORE_BITS = 3

STRICT = "strict"
RELAXED = "relaxed"


@dataclass(frozen=True)
class DspConfig:
    """One packing configuration.

    Use :meth:`for_bits` rather than the raw constructor; it derives ``k``
    and the port widths from the bit widths and the port mode.
    """

    v: int
    c: int
    k: int
    a_width: int = DSP48E1_A_WIDTH
    b_width: int = DSP48E1_B_WIDTH
    acc_width: int = DSP48E1_ACC_WIDTH
    mode: str = STRICT

    def __post_init__(self):
        if self.v not in LANES_FOR_INPUT_BITS:
            raise ValueError(f"input width v must be one of 4/6/8, got {self.v}")
        if self.c not in (4, 6, 8):
            raise ValueError(f"parameter width c must be one of 4/6/8, got {self.c}")
        if self.k != LANES_FOR_INPUT_BITS[self.v]:
            raise ValueError(f"k must be {LANES_FOR_INPUT_BITS[self.v]} for v={self.v}, got {self.k}")
        if self.mode not in (STRICT, RELAXED):
            raise ValueError(f"mode must be 'strict' or 'relaxed', got {self.mode!r}")
        if self.k * self.lane_slot > self.acc_width:
            raise ValueError(
                f"{self.k} lanes of {self.lane_slot} bits exceed the {self.acc_width}-bit accumulator")
        if self.a_word_bits > self.a_width:
            raise ValueError(
                f"packed A word needs {self.a_word_bits} bits but port A is {self.a_width} bits "
                f"(v={self.v}, k={self.k}); use relaxed mode")
        if self.v > self.b_width:
            raise ValueError(f"port B ({self.b_width} bits) cannot hold a {self.v}-bit input")

    @classmethod
    def for_bits(cls, c: int = 8, v: int | None = None, mode: str | None = None) -> "DspConfig":
        """Build a config for ``c``-bit parameters and ``v``-bit inputs.

        ``v`` defaults to ``c``. ``mode`` defaults to strict when the packed
        word fits the 25x18 multiplier and relaxed otherwise. In relaxed mode
        the A port is widened to exactly what the packing needs.
        """
        v = c if v is None else v
        if v not in LANES_FOR_INPUT_BITS:
            raise ValueError(f"input width v must be one of 4/6/8, got {v}")
        k = LANES_FOR_INPUT_BITS[v]
        needed = (k - 1) * (v + CORE_BITS) + CORE_BITS
        if mode is None:
            mode = STRICT if needed <= DSP48E1_A_WIDTH else RELAXED
        if mode == RELAXED:
            return cls(v=v, c=c, k=k,
                       a_width=max(DSP48E1_A_WIDTH, needed),
                       b_width=DSP48E1_B_WIDTH,
                       acc_width=max(DSP48E1_ACC_WIDTH, k * (v + CORE_BITS)),
                       mode=RELAXED)
        return cls(v=v, c=c, k=k, mode=mode)

    @property
    def lane_slot(self) -> int:
        """Bits per lane in the packed product."""
        return self.v + CORE_BITS

    @property
    def a_word_bits(self) -> int:
        """Bits spanned by a packed A word whose top lane holds a 3-bit core."""
        return (self.k - 1) * self.lane_slot + CORE_BITS

    @property
    def max_magnitude(self) -> int:
        return 1 << (self.c - 1)

    @property
    def lane_result_bits(self) -> int:
        """Two's-complement width of one reconstructed product."""
        return self.v + self.c

    @property
    def address_width(self) -> int:
        return 13 if self.c == 8 else 14

    @property
    def index_width(self) -> int:
        return self.address_width + self.k

    @property
    def rom_capacity(self) -> int:
        return 1 << self.address_width

    @property
    def shift_bits(self) -> int:
        """Bits needed to store one n or s shift count."""
        return (self.c - 1).bit_length()

    @property
    def rom_entry_bits(self) -> int:
        """Hardware width of one ROM entry: A word plus k (n, s, zero) descriptors."""
        return self.a_word_bits + self.k * (2 * self.shift_bits + 1)

    def describe(self) -> dict:
        return {
            "v": self.v, "c": self.c, "k": self.k, "mode": self.mode,
            "a_width": self.a_width, "b_width": self.b_width,
            "acc_width": self.acc_width, "lane_slot": self.lane_slot,
            "a_word_bits": self.a_word_bits,
            "address_width": self.address_width, "index_width": self.index_width,
        }
