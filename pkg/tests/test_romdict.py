import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdmm.bitstream import pack_bitstring, pack_words, unpack_bitstring, unpack_words
from sdmm.config import DspConfig
from sdmm.romdict import (RomImage, build_rom, decode_params, decode_word, encode_stream, memory_crossover,
                          read_index_stream, wrc_ratio, write_index_stream)

CFG8 = DspConfig.for_bits(8)
WORKED = [x for t in [(13, 68, v) for v in range(103, 113)] for x in t]


def test_worked_funnel():
    enc = encode_stream(WORKED, CFG8)
    f = enc.funnel
    assert (f["original"], f["fine_tuned"], f["approximated"]) == (10, 7, 2)
    assert f["infeasible"] == 3
    assert sorted(e.magnitudes(CFG8) for e in enc.rom.entries) == [(13, 68, 104), (13, 68, 112)]


def test_addresses_follow_frequency():
    params = [1, 2, 3] * 5 + [4, 4, 4] * 2 + [2, 2, 2] * 2
    enc = encode_stream(params, CFG8)
    mags = [e.magnitudes(CFG8) for e in enc.rom.entries]
    assert mags == [(1, 2, 3), (2, 2, 2), (4, 4, 4)]


def test_decode_reproduces_final_values():
    rng = np.random.default_rng(3)
    params = rng.integers(-128, 128, 300)
    enc = encode_stream(params, CFG8)
    assert np.array_equal(decode_params(enc.words, enc.rom, CFG8, len(params)), enc.final_values[:300])
    assert np.abs(enc.final_values[:300] - params).max() <= 8


def test_sign_bits_in_index_word():
    enc = encode_stream([-52, 3, -1], CFG8)
    assert int(enc.words[0]) & 0b111 == 0b101
    assert decode_word(enc.words[0], enc.rom, CFG8).values == (-52, 3, -1)


def test_zero_lanes_carry_no_sign():
    enc = encode_stream([0, -0, 5], CFG8)
    assert int(enc.words[0]) & 0b111 == 0


def test_capacity_merges_rarest():
    params = [1, 2, 3] * 3 + [1, 2, 4] + [100, 100, 100]
    rom, amap = build_rom({(1, 2, 3): 3, (100, 100, 100): 2, (1, 2, 4): 1}, CFG8, capacity=2)
    assert len(rom.entries) == 2
    assert rom.stats["merge_count"] == 1
    assert amap[(1, 2, 4)] == amap[(1, 2, 3)]
    enc = encode_stream(params, CFG8, capacity=1)
    assert len(enc.rom.entries) == 1
    assert set(np.asarray(enc.words) >> 3) == {0}


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(-8, 7), min_size=1, max_size=200), st.integers(1, 40))
def test_rom_never_exceeds_capacity(vals, cap):
    cfg = DspConfig.for_bits(4)
    enc = encode_stream(vals, cfg, capacity=cap)
    assert len(enc.rom.entries) <= cap
    assert np.array_equal(decode_params(enc.words, enc.rom, cfg, len(vals)), enc.final_values[:len(vals)])


def test_default_capacities():
    assert [DspConfig.for_bits(b).rom_capacity for b in (8, 6, 4)] == [8192, 16384, 16384]


def test_wrc_ratios():
    assert wrc_ratio(CFG8) == pytest.approx(2 / 3)
    assert wrc_ratio(DspConfig.for_bits(6)) == pytest.approx(0.75)
    assert wrc_ratio(DspConfig.for_bits(4)) == pytest.approx(5 / 6)
    assert [DspConfig.for_bits(b).index_width for b in (8, 6, 4)] == [16, 18, 20]


def test_memory_crossover():
    cross = memory_crossover(CFG8, rom_entries=100)
    assert cross["saved_bits_per_tuple"] == 8
    assert cross["crossover_tuples"] * 8 == 100 * CFG8.rom_entry_bits


def test_rom_bytes_round_trip(tmp_path):
    enc = encode_stream(WORKED, CFG8)
    path = tmp_path / "rom.sdmm"
    enc.rom.save(path)
    back = RomImage.load(path)
    assert back.entries == enc.rom.entries
    assert back.to_bytes() == enc.rom.to_bytes()
    with pytest.raises(ValueError):
        RomImage.from_bytes(b"XXXX" + path.read_bytes()[4:])
    with pytest.raises(ValueError):
        RomImage.from_bytes(path.read_bytes() + b"\0")
    with pytest.raises(ValueError):
        back.check_config(DspConfig.for_bits(6))


def test_index_stream_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    params = rng.integers(-128, 128, 90)
    enc = encode_stream(params, CFG8)
    path = tmp_path / "index.bin"
    write_index_stream(path, enc.words, CFG8, 90)
    assert path.stat().st_size == (30 * 16 + 7) // 8
    words, header = read_index_stream(path)
    assert np.array_equal(words, enc.words)
    assert header["param_count"] == 90 and header["k"] == 3


def test_address_outside_rom():
    enc = encode_stream([1, 2, 3], CFG8)
    with pytest.raises(IndexError):
        decode_word(5 << 3, enc.rom, CFG8)


@given(st.integers(1, 30), st.data())
def test_word_packing_round_trip(width, data):
    words = data.draw(st.lists(st.integers(0, (1 << width) - 1), max_size=50))
    assert list(unpack_words(pack_words(words, width), width, len(words))) == words


@given(st.text(alphabet="01", max_size=100))
def test_bitstring_round_trip(bits):
    assert unpack_bitstring(pack_bitstring(bits), len(bits)) == bits


def test_wide_a_word_round_trip():
    # at v=4 the packed A word spans 38 bits
    cfg = DspConfig.for_bits(4)
    enc = encode_stream([7, 7, 7, 7, 7, -7], cfg)
    assert enc.rom.entries[0].a_word >= 1 << 32
    back = RomImage.from_bytes(enc.rom.to_bytes())
    assert back.entries == enc.rom.entries
