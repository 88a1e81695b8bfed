from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdmm.config import DspConfig
from sdmm.manipulate import approximate, manipulate
from sdmm.packer import (ORIGINAL, ParamTuple, PortOverflowError, bray_curtis, build_operands,
                         exact_sign_extension, feasibility, feasible_magnitudes, fine_tune, form_tuples,
                         mask_of, nearest_feasible, sign_extension, tuple_from_values)

CFG8 = DspConfig.for_bits(8)
WORKED = [(13, 68, x) for x in range(103, 113)]


def core_bits(m):
    if m == 0:
        return 0
    odd = m >> ((m & -m).bit_length() - 1)
    if odd == 1:
        return 0
    rest = odd - 1
    return (rest >> ((rest & -rest).bit_length() - 1)).bit_length()


@lru_cache(maxsize=None)
def all_feasible_triples():
    """Every magnitude triple in [0, 128]^3 that fits 25/48 with v=8."""
    bits = np.array([core_bits(m) for m in range(129)])
    g = np.arange(129)
    a, b, c = np.meshgrid(g, g, g, indexing="ij")
    a, b, c = a.ravel(), b.ravel(), c.ravel()
    slot = 8 + bits
    span = slot[a] + slot[b] + bits[c] + 1
    ok = (span <= 25) & (slot[a] + slot[b] + slot[c] <= 48)
    return np.stack([a[ok], b[ok], c[ok]], axis=1)


def brute_nearest(u):
    cands = all_feasible_triples()
    u = np.array(u)
    num = np.abs(cands - u).sum(axis=1)
    den = (cands + u).sum(axis=1)
    ratio = num / np.maximum(den, 1)
    close = cands[ratio <= ratio.min() + 1e-9]
    exact = [(Fraction(int(np.abs(t - u).sum()), max(int((t + u).sum()), 1)), tuple(int(x) for x in t))
             for t in close]
    return min(exact)[1]


def test_masks():
    assert [mask_of(m) for m in (0, 1, 3, 5, 7)] == [0b111, 0b110, 0b100, 0b010, 0b000]
    with pytest.raises(ValueError):
        mask_of(2)


def test_golden_sign_extension():
    lane = approximate(52, CFG8)
    assert sign_extension(-72, lane, CFG8) == 0b10011101110
    assert sign_extension(72, lane, CFG8) == 72 >> 2


def test_golden_operands():
    tup = tuple_from_values([52, 0, 0], CFG8)
    ops = build_operands(-72, tup, CFG8)
    assert (ops.a_word, ops.b_word, ops.c_word) == (3, 0xB8, 0x4EE)
    assert ops.lane_shifts[0] == (2, 2)


def test_exact_field_agrees_with_approximate_field():
    exact = exact_sign_extension(-72, 52, CFG8)
    assert exact == 0b110011
    full = (exact << (8 - 2)) | ((-72 & 0xFF) >> 2)
    assert full == 0b110011101110
    approx = sign_extension(-72, approximate(52, CFG8), CFG8)
    assert full % (1 << 11) == approx


def test_exact_field_independent_of_segment_width():
    for m in range(8, 20):
        assert exact_sign_extension(-5, 53, CFG8, m=m) == exact_sign_extension(-5, 53, CFG8)
    assert exact_sign_extension(5, 53, CFG8) == 0
    with pytest.raises(ValueError):
        exact_sign_extension(-5, 53, CFG8, s=1)


def test_input_range_checked():
    tup = tuple_from_values([1, 1, 1], CFG8)
    with pytest.raises(ValueError):
        build_operands(128, tup, CFG8)
    with pytest.raises(ValueError):
        build_operands(0, tuple_from_values([1, 1, 1, 1], DspConfig.for_bits(6)), CFG8)


def test_strict_mode_rejects_wide_packing():
    with pytest.raises(ValueError):
        DspConfig.for_bits(8, 6, "strict")
    cfg = DspConfig(v=8, c=8, k=3, a_width=25, mode="relaxed")
    assert cfg.a_word_bits == 25
    relaxed6 = DspConfig.for_bits(6)
    assert (relaxed6.mode, relaxed6.a_width) == ("relaxed", 30)
    assert DspConfig.for_bits(4).a_width == 38


def test_port_overflow_error_is_value_error():
    assert issubclass(PortOverflowError, ValueError)


def test_worked_feasibility():
    feas = [feasibility(form_tuples(t, CFG8)[0], CFG8) for t in WORKED]
    infeasible = [t[2] for t, ok in zip(WORKED, feas) if not ok]
    assert infeasible == [103, 107, 111]


def test_worked_fine_tuning():
    assert nearest_feasible((13, 68, 103), CFG8) == (13, 68, 104)
    assert nearest_feasible((13, 68, 107), CFG8) == (13, 68, 108)
    assert nearest_feasible((13, 68, 111), CFG8) == (13, 68, 112)
    tuned = fine_tune(form_tuples([x for t in WORKED for x in t], CFG8), CFG8)
    assert len({t.magnitudes for t in tuned}) == 7
    assert all(feasibility(t, CFG8) for t in tuned)


@pytest.mark.parametrize("u", [(13, 68, 103), (13, 68, 111), (127, 127, 127), (103, 107, 111),
                               (0, 0, 111), (111, 0, 0), (99, 1, 87), (75, 119, 83)])
def test_nearest_feasible_against_full_enumeration(u):
    assert nearest_feasible(u, CFG8) == brute_nearest(u)


@settings(max_examples=15, deadline=None)
@given(st.tuples(*[st.integers(0, 128)] * 3))
def test_nearest_feasible_random_against_full_enumeration(u):
    assert nearest_feasible(u, CFG8) == brute_nearest(u)


def test_bray_curtis_basics():
    assert bray_curtis([0, 0, 0], [0, 0, 0]) == 0.0
    assert bray_curtis([13, 68, 103], [13, 68, 104]) == pytest.approx(1 / 369)
    assert bray_curtis([1, 2, 3], [1, 2, 3]) == 0.0


@given(st.lists(st.integers(0, 128), min_size=3, max_size=3),
       st.lists(st.integers(0, 128), min_size=3, max_size=3))
def test_bray_curtis_symmetric_and_bounded(u, w):
    d = bray_curtis(u, w)
    assert d == pytest.approx(bray_curtis(w, u))
    assert 0.0 <= d <= 1.0


def test_form_tuples_pads_and_flags():
    tups = form_tuples([13, 68, 103, 5], CFG8)
    assert len(tups) == 2
    assert not tups[0].feasible and tups[1].feasible
    assert tups[1].values == (5, 0, 0)
    assert tups[0].origin == ORIGINAL
    with pytest.raises(ValueError):
        form_tuples([128], CFG8)


@given(st.lists(st.integers(-128, 127), min_size=1, max_size=30))
@settings(deadline=None)
def test_fine_tune_keeps_signs_and_feasibility(vals):
    tuned = fine_tune(form_tuples(vals, CFG8), CFG8)
    flat = [v for t in tuned for v in t.values][:len(vals)]
    for old, new in zip(vals, flat):
        assert new == 0 or (new < 0) == (old < 0)
    assert all(feasibility(t, CFG8) for t in tuned)


@given(st.tuples(*[st.integers(0, 128)] * 3))
@settings(deadline=None)
def test_feasible_tuples_pass_through(u):
    if feasible_magnitudes(u, CFG8):
        assert nearest_feasible(u, CFG8) == u


@given(st.sampled_from([8, 6, 4]), st.data())
def test_operand_lane_sum_is_exact(v, data):
    cfg = DspConfig.for_bits(v)
    lim = 1 << (v - 1)
    vals = data.draw(st.lists(st.integers(-lim, lim - 1), min_size=cfg.k, max_size=cfg.k))
    i_val = data.draw(st.integers(-lim, lim - 1))
    tup = tuple_from_values(vals, cfg)
    ops = build_operands(i_val, tup, cfg)
    p = ops.a_word * ops.b_word + ops.c_word
    for i, lane in enumerate(tup.lanes):
        field = (p >> (i * cfg.lane_slot)) & ((1 << cfg.lane_slot) - 1)
        if lane.is_zero:
            assert field == 0
        else:
            target = lane.mw * (i_val & ((1 << v) - 1)) + (sign_extension(i_val, lane, cfg))
            assert field == target % (1 << cfg.lane_slot)


def test_manipulated_tuple_values():
    tup = ParamTuple(tuple(manipulate(m) for m in (1, 2, 3)))
    assert tup.values == (1, 2, 3)
