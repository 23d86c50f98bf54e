from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sigdev.errors import DimensionMismatch, InvalidSignature, LevelCapExceeded, NotInvertible
from sigdev.numerics import working_precision
from sigdev.tensor import (
    EXACT,
    TensorSeries,
    from_levels,
    is_unit,
    load_signature,
    max_abs_diff,
    max_level,
    mul_exp,
    save_signature,
    signature_from_dict,
    signature_to_dict,
    square_free_indices,
    ts_exp_segment,
    ts_inverse,
    ts_mul,
    ts_scale,
    unit,
    word_from_index,
    word_index,
    word_iter,
)


def test_word_iter_order():
    assert list(word_iter(2, 0)) == [()]
    assert list(word_iter(2, 2)) == [(1, 1), (1, 2), (2, 1), (2, 2)]
    assert len(list(word_iter(3, 2))) == 9


def test_word_index_matches_iteration_order():
    for d in (1, 2, 3):
        for n in range(4):
            for k, w in enumerate(word_iter(d, n)):
                assert word_index(w, d) == k
                assert word_from_index(k, n, d) == w


def test_square_free_indices():
    words = [word_from_index(int(k), 3, 2) for k in square_free_indices(2, 3)]
    assert words == [(1, 2, 1), (2, 1, 2)]
    assert len(square_free_indices(3, 3)) == 3 * 2 * 2


def test_exp_product_example():
    x = ts_mul(ts_exp_segment([1, 0], 3, EXACT), ts_exp_segment([0, 1], 3, EXACT))
    assert x[(1, 2)] == 1 and x[(2, 1)] == 0
    assert x[(1, 1)] == Fraction(1, 2) and x[(2, 2)] == Fraction(1, 2)


def test_exp_segment_examples():
    assert is_unit(ts_exp_segment([0, 0], 4))
    x = ts_exp_segment([1, 0], 3, EXACT)
    assert (x[(1,)], x[(1, 1)], x[(1, 1, 1)]) == (1, Fraction(1, 2), Fraction(1, 6))
    assert all(c == 0 for w, c in x.words() if any(i != 1 for i in w))
    assert ts_exp_segment([1, 1], 2, EXACT)[(1, 2)] == Fraction(1, 2)


def random_series(rng, d, N, precision=None, group_like=True):
    levels = [[1.0]] + [rng.standard_normal(d**n) / (n + 1) for n in range(1, N + 1)]
    return from_levels(levels, d, precision, group_like)


def test_unit_law():
    rng = np.random.default_rng(0)
    x = random_series(rng, 3, 4)
    one = unit(3, 4)
    assert max_abs_diff(ts_mul(x, one), x) == 0.0
    assert max_abs_diff(ts_mul(one, x), x) == 0.0


def test_inverse_examples():
    assert is_unit(ts_inverse(unit(2, 5)))
    v = [0.3, -1.2, 0.7]
    with working_precision(128):
        inv = ts_inverse(ts_exp_segment(v, 6, 128))
        assert max_abs_diff(inv, ts_exp_segment([-c for c in v], 6, 128)) <= 1e-12


def test_inverse_exact_identity():
    rng = np.random.default_rng(1)
    levels = [[Fraction(2)]] + [[Fraction(int(c), 7) for c in rng.integers(-9, 9, 2**n)] for n in range(1, 5)]
    x = from_levels(levels, 2, EXACT)
    assert is_unit(ts_mul(x, ts_inverse(x)))
    assert is_unit(ts_mul(ts_inverse(x), x))


def test_inverse_rejects_zero_constant():
    x = from_levels([[0.0], [1.0, 2.0]], 2)
    with pytest.raises(NotInvertible):
        ts_inverse(x)


def test_scale_examples():
    rng = np.random.default_rng(2)
    x = random_series(rng, 2, 4)
    assert max_abs_diff(ts_scale(x, 1.0), x) == 0.0
    assert is_unit(ts_scale(x, 0.0))
    y = ts_scale(ts_exp_segment([1, 0], 5, EXACT), 2)
    assert all(y[(1,) * n] == Fraction(2**n, int(np.prod(range(1, n + 1)))) for n in range(6))


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        ts_mul(unit(2, 2), unit(3, 2))


def test_product_truncates_at_smaller_level():
    assert ts_mul(unit(2, 3), unit(2, 5)).level == 3


def test_mul_exp_matches_product():
    rng = np.random.default_rng(3)
    x = random_series(rng, 3, 5, 100)
    v = rng.standard_normal(3)
    with working_precision(100):
        assert max_abs_diff(mul_exp(x, v), ts_mul(x, ts_exp_segment(v, 5, 100))) < 1e-25


def test_level_cap(monkeypatch):
    monkeypatch.setenv("SIGDEV_MAX_COEFFS", "100")
    assert max_level(2) == 5
    with pytest.raises(LevelCapExceeded):
        unit(2, 6)
    monkeypatch.delenv("SIGDEV_MAX_COEFFS")
    assert max_level(2) == 26 and max_level(3) == 16


def test_constructor_validates_shapes():
    with pytest.raises(InvalidSignature):
        TensorSeries(2, 1, (np.ones(1), np.ones(3)))
    with pytest.raises(InvalidSignature):
        TensorSeries(2, 1, (np.ones(1),))


rationals = st.fractions(min_value=-3, max_value=3, max_denominator=7)


def exact_series(d, N):
    return st.tuples(*[st.lists(rationals, min_size=d**n, max_size=d**n) for n in range(N + 1)]).map(
        lambda levels: from_levels(levels, d, EXACT)
    )


@given(exact_series(2, 3), exact_series(2, 3), exact_series(2, 3))
@settings(max_examples=40, deadline=None)
def test_associativity_exact(a, b, c):
    assert max_abs_diff(ts_mul(ts_mul(a, b), c), ts_mul(a, ts_mul(b, c))) == 0.0


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(0, 5))
@settings(max_examples=30, deadline=None)
def test_associativity_float(seed, d, N):
    rng = np.random.default_rng(seed)
    a, b, c = (random_series(rng, d, N) for _ in range(3))
    left, right = ts_mul(ts_mul(a, b), c), ts_mul(a, ts_mul(b, c))
    scale = max(1.0, max(np.max(np.abs(lv)) for lv in left.coeffs))
    assert max_abs_diff(left, right) <= 1e-12 * scale


@given(st.lists(st.floats(-2, 2), min_size=2, max_size=2), st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=40, deadline=None)
def test_one_parameter_group(v, s, t):
    v = np.array(v)
    prod = ts_mul(ts_exp_segment(s * v, 6), ts_exp_segment(t * v, 6))
    assert max_abs_diff(prod, ts_exp_segment((s + t) * v, 6)) <= 1e-12 * max(1.0, (abs(s) + abs(t)) * 4) ** 6


@given(st.integers(0, 2**32 - 1), st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_dilation_is_homomorphism(seed, lam):
    rng = np.random.default_rng(seed)
    a, b = random_series(rng, 2, 5), random_series(rng, 2, 5)
    left = ts_scale(ts_mul(a, b), lam)
    right = ts_mul(ts_scale(a, lam), ts_scale(b, lam))
    assert max_abs_diff(left, right) <= 1e-12 * max(1.0, abs(lam)) ** 5 * 10


@pytest.mark.parametrize("precision", [None, 64, 200])
def test_json_round_trip_bit_exact(tmp_path, precision):
    rng = np.random.default_rng(4)
    x = random_series(rng, 2, 4, precision)
    if precision:
        with working_precision(precision):
            x = ts_mul(x, ts_exp_segment([1 / 3, 2 / 7], 4, precision))
    save_signature(x, tmp_path / "s.json")
    y = load_signature(tmp_path / "s.json")
    assert y.precision == precision
    for a, b in zip(x.coeffs, y.coeffs):
        assert all(u == w for u, w in zip(a, b))


def test_json_format_keys():
    data = signature_to_dict(ts_exp_segment([1.0, 0.0], 2))
    assert set(data["coeffs"]) == {"", "1", "2", "1,1", "1,2", "2,1", "2,2"}
    assert float(data["coeffs"]["1,1"]) == 0.5


def test_json_missing_words_are_zero_and_bad_keys_rejected():
    x = signature_from_dict({"dimension": 2, "level": 2, "coeffs": {"": "1", "1,2": "0.5"}})
    assert x[(1, 2)] == 0.5 and x[(2, 1)] == 0.0
    with pytest.raises(InvalidSignature):
        signature_from_dict({"dimension": 2, "level": 1, "coeffs": {"3": "1"}})
    with pytest.raises(InvalidSignature):
        signature_from_dict({"dimension": 2, "level": 1, "coeffs": {"1,1": "1"}})
    with pytest.raises(InvalidSignature):
        signature_from_dict({"level": 1})
