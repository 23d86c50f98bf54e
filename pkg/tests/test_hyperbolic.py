import csv
import math

import gmpy2
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sigdev.errors import NotOnHyperboloid, PrecisionTooLow, StepTooCoarse, TailTooLarge
from sigdev.hyperbolic import (
    SweepRow,
    ambient_terms,
    ambient_via_wordsets,
    coordinate_error_bounds,
    cosh_rho_via_wordsets,
    decompose_ambient,
    develop_exact,
    develop_exact_ambient,
    develop_from_signature,
    develop_ode,
    develop_ode_path,
    development_matrix,
    minkowski,
    segment_matrix,
    series_ambient,
    smoothed_direction,
    write_sweep_csv,
)
from sigdev.numerics import required_precision, working_precision
from sigdev.paths import PiecewisePath, random_piecewise_path
from sigdev.signature import signature_of_path
from sigdev.tensor import ts_scale

E1, E2 = (1.0, 0.0), (0.0, 1.0)
L_PATH = PiecewisePath.from_segments([(E1, 1.0), (E2, 1.0)])

# (sinh lam L1, sinh lam L2 cosh lam L1, cosh lam L1 cosh lam L2), mpmath at 400 bits
# with L1, L2 taken as the float64 values
EXAMPLE_AMBIENT = {
    (1, 1.0, 1.0): (
        "1.1752011936438014568823818505956008151557179813341",
        "1.8134302039235093838341069914006308524431710061606",
        "2.3810978455418157297811067388868730541469867791154",
    ),
    (5, 1.0, 1.0): (
        "74.203210577788758977009471996064565599619409004426",
        "5506.6164373516966886182622774231822014507255951597",
        "5507.1164600516615698606880452189399817260307141187",
    ),
    (20, 1.0, 1.0): (
        "242582597.70489513795397660405149136535934930439451",
        "58846316709254996.351974977687258700065129340490742",
        "58846316709254996.851974977687258702189306468136536",
    ),
    (20, 0.7, 1.3): (
        "601302.14208197209045148028403697306624729535543159",
        "58846316709295685.049828192686650016037220136761354",
        "58846316709295685.049831264792826682260819448742957",
    ),
}


def test_segment_matrix_zero_is_identity():
    m = segment_matrix((0.6, 0.8), 0, 128)
    assert all(m.entries[i, j] == (1 if i == j else 0) for i in range(3) for j in range(3))


def test_segment_matrix_along_e1():
    s = 0.75
    m = segment_matrix(E1, s, 128).entries
    with working_precision(128):
        ch, sh = gmpy2.cosh(gmpy2.mpfr(s)), gmpy2.sinh(gmpy2.mpfr(s))
    assert m[0, 0] == ch and m[2, 2] == ch and m[0, 2] == sh and m[2, 0] == sh
    assert m[1, 1] == 1 and m[0, 1] == 0 and m[1, 2] == 0


def test_segment_matrix_preserves_form():
    rng = np.random.default_rng(0)
    for d in (2, 3, 4):
        v = rng.standard_normal(d)
        m = segment_matrix(v / np.linalg.norm(v), 5, 128)
        assert m.form_defect() < 2.0 ** (-128 / 4)


def test_development_matrix_maps_o_to_exact_endpoint():
    p = random_piecewise_path(np.random.default_rng(1), 3)
    m = development_matrix(p, 2.0, 128)
    assert m.form_defect() < 1e-30
    x = m.apply([0, 0, 1])
    y, _ = develop_exact_ambient(p, 2.0, 128)
    assert max(abs(float(a - b)) for a, b in zip(x, y)) < 1e-25


@pytest.mark.parametrize("key", list(EXAMPLE_AMBIENT))
def test_example_closed_form(key):
    lam, l1, l2 = key
    p = PiecewisePath.from_segments([(E1, l1), (E2, l2)])
    x, bits = develop_exact_ambient(p, lam)
    assert bits == required_precision(lam * (l1 + l2))
    with working_precision(bits):
        for got, want in zip(x, EXAMPLE_AMBIENT[key]):
            want = gmpy2.mpfr(want)
            assert abs(got / want - 1) <= gmpy2.mpfr(10) ** (-bits / 4)


def test_single_segment_exact():
    p = PiecewisePath.from_segments([((0.6, 0.8), 1.7)])
    pt = develop_exact(p, 3.0)
    assert abs(float(pt.rho) - 5.1) < 1e-15
    assert np.allclose(pt.eta_float, (0.6, 0.8), atol=1e-15)


def test_precision_too_low():
    with pytest.raises(PrecisionTooLow):
        develop_exact(L_PATH, 20.0, 100)


def test_rho_bounded_by_lambda_length():
    rng = np.random.default_rng(2)
    for _ in range(10):
        p = random_piecewise_path(rng, int(rng.integers(1, 5)), int(rng.integers(2, 4)))
        for lam in (0.5, 3.0, 30.0):
            rho = develop_exact(p, lam).rho
            assert rho <= lam * p.total_length * (1 + 1e-15)
            if len(p) > 1:
                assert rho < lam * p.total_length


def test_log_domain_branch_matches_ambient_route():
    p = random_piecewise_path(np.random.default_rng(3), 3)
    lam = 350.0 / p.total_length
    bits = required_precision(lam * p.total_length)
    fast = develop_exact(p, lam)
    x, _ = develop_exact_ambient(p, lam, bits)
    slow = decompose_ambient(x, bits)
    with working_precision(bits):
        assert abs(fast.rho - slow.rho) < 2.0 ** (-bits / 2)
        assert max(abs(a - b) for a, b in zip(fast.eta, slow.eta)) < 2.0 ** (-bits / 2)


def test_decompose_examples():
    o = decompose_ambient([0, 0, 1])
    assert o.degenerate and o.rho == 0
    pt = decompose_ambient([math.sinh(1), 0, math.cosh(1)])
    assert pt.rho == pytest.approx(1.0) and np.allclose(pt.eta_float, E1)
    x, bits = develop_exact_ambient(L_PATH, 1.0)
    pt = decompose_ambient(x, bits)
    assert float(gmpy2.cosh(pt.rho)) == pytest.approx(math.cosh(1) ** 2, rel=1e-15)
    assert float(pt.eta[0]) == pytest.approx(math.sinh(1) / math.sinh(float(pt.rho)), rel=1e-15)


def test_decompose_rejects_points_off_the_sheet():
    with pytest.raises(NotOnHyperboloid):
        decompose_ambient([1, 0, 1])
    with pytest.raises(NotOnHyperboloid):
        decompose_ambient([0, 0, -1])


def test_ambient_satisfies_form():
    p = random_piecewise_path(np.random.default_rng(4), 4, 3)
    pt = develop_exact(p, 7.0)
    with working_precision(pt.precision):
        x = pt.ambient()
        assert abs(minkowski(x, x) + 1) < 2.0 ** (-pt.precision / 4) * x[-1] ** 2
        assert x[-1] > 0


def test_series_single_segment_matches_exact():
    p = PiecewisePath.from_segments([(E1, 1.0)])
    x = signature_of_path(p, 20, 128)
    pt, tail = develop_from_signature(x, 3.0)
    ex = develop_exact(p, 3.0)
    rb, eb = coordinate_error_bounds(pt, tail)
    assert abs(pt.rho_float - ex.rho_float) <= rb
    assert np.max(np.abs(pt.eta_float - ex.eta_float)) <= eb


def test_series_l_path_closed_form():
    x = signature_of_path(L_PATH, 20, 128)
    pt, tail = develop_from_signature(x, 2.0)
    amb = [float(c) for c in pt.ambient()]
    want = (math.sinh(2), math.sinh(2) * math.cosh(2), math.cosh(2) ** 2)
    assert np.linalg.norm(np.array(amb) - want) <= tail


def test_series_at_zero_is_base_point():
    x = signature_of_path(L_PATH, 6, 128)
    pt, tail = develop_from_signature(x, 0.0)
    assert pt.degenerate and pt.rho == 0 and tail == 0.0


def test_series_tail_too_large():
    x = signature_of_path(L_PATH, 10, 128)
    with pytest.raises(TailTooLarge) as info:
        develop_from_signature(x, 8.0)
    assert info.value.lam == 8.0


def test_length_hint_gives_factorial_tail():
    x = signature_of_path(L_PATH, 20, 128)
    _, tail = develop_from_signature(x, 2.0, length_hint=2.0)
    assert tail == pytest.approx(sum(4.0**n / math.factorial(n) for n in range(21, 80)), rel=1e-12)


def test_contraction_matches_wordset_reading():
    p = random_piecewise_path(np.random.default_rng(5), 3, 3)
    x = signature_of_path(p, 12, 128)
    raw, _ = series_ambient(x, 1.5)
    amb, _ = ambient_via_wordsets(x, 1.5)
    with working_precision(128):
        # same retained terms, summed in a different order
        assert max(abs(float(a - b)) for a, b in zip(raw, amb)) < 1e-30 * float(amb[-1])


def test_ambient_terms_vanish_off_doubled_words():
    # level 2 of the development only sees (i, i) words
    x = signature_of_path(L_PATH, 4, 128)
    a2 = ambient_terms(x)[2]
    assert float(a2[2]) == pytest.approx(float(x[(1, 1)] + x[(2, 2)]))
    assert float(a2[0]) == 0 and float(a2[1]) == 0


def test_cosh_wordsets_examples():
    line = signature_of_path(PiecewisePath.from_segments([(E1, 0.8)]), 20, 128)
    assert float(cosh_rho_via_wordsets(line, 2.5)) == pytest.approx(math.cosh(2.0), rel=1e-10)
    assert cosh_rho_via_wordsets(line, 0.0) == 1
    x = signature_of_path(L_PATH, 20, 128)
    _, tail = develop_from_signature(x, 2.0)
    assert abs(float(cosh_rho_via_wordsets(x, 2.0)) - math.cosh(2) ** 2) <= tail


def test_dilation_consistency():
    p = random_piecewise_path(np.random.default_rng(6), 2)
    x = signature_of_path(p, 16, 128)
    a, _ = develop_from_signature(ts_scale(x, 1.5), 2.0, check_tail=False)
    b, _ = develop_from_signature(x, 3.0, check_tail=False)
    assert abs(a.rho_float - b.rho_float) < 1e-25 * max(1, b.rho_float) + 1e-30
    assert np.max(np.abs(a.eta_float - b.eta_float)) < 1e-25


def test_ode_constant_direction():
    pt = develop_ode(lambda t: (0.6, 0.8), 1.3, 4.0, 400)
    assert pt.rho == pytest.approx(5.2, abs=1e-8)
    assert np.allclose(pt.eta_float, (0.6, 0.8), atol=1e-8)


def test_ode_circle_limit():
    theta = lambda t: (math.cos(t), math.sin(t))
    pt = develop_ode(theta, 1.0, 100.0, 10_000)
    got = 100.0 * (pt.eta_float - np.array(theta(1.0)))
    want = np.array([math.sin(1), -math.cos(1)])
    assert np.linalg.norm(got - want) <= 0.05 * np.linalg.norm(want)


def test_ode_circle_matches_fine_polygon():
    # inscribed polygon with many sides approximates the circle
    n = 4000
    t = (np.arange(n) + 0.5) / n
    poly = PiecewisePath.from_segments([((math.cos(s), math.sin(s)), 1.0 / n) for s in t])
    ex = develop_exact(poly, 5.0)
    ode = develop_ode(lambda s: (math.cos(s), math.sin(s)), 1.0, 5.0, 1000)
    assert abs(ex.rho_float - ode.rho_float) < 1e-5
    assert np.max(np.abs(ex.eta_float - ode.eta_float)) < 1e-5


def test_ode_step_guard():
    with pytest.raises(StepTooCoarse):
        develop_ode(lambda t: (1.0, 0.0), 1.0, 10.0, 100)


def test_ode_smoothed_corner():
    theta = smoothed_direction(L_PATH, 1e-3)
    pt = develop_ode(theta, 2.0, 1.5, 4000)
    assert abs(pt.rho_float - develop_exact(L_PATH, 1.5).rho_float) < 1e-3


@given(st.integers(0, 2**32 - 1), st.floats(0.2, 6.0))
@settings(max_examples=10, deadline=None)
def test_route_agreement(seed, lam_L):
    rng = np.random.default_rng(seed)
    p = random_piecewise_path(rng, int(rng.integers(1, 4)))
    lam = lam_L / p.total_length
    ex = develop_exact(p, lam)
    x = signature_of_path(p, 20, 128)
    ser, tail = develop_from_signature(x, lam)
    rb, eb = coordinate_error_bounds(ser, tail)
    ode = develop_ode_path(p, lam, 2000)
    assert abs(ser.rho_float - ex.rho_float) <= rb + 1e-12
    assert np.max(np.abs(ser.eta_float - ex.eta_float)) <= eb + 1e-12
    assert abs(ode.rho_float - ex.rho_float) <= 1e-6 * lam_L
    assert np.max(np.abs(ode.eta_float - ex.eta_float)) <= 1e-6


def test_sweep_csv(tmp_path):
    rows = [SweepRow(lam, develop_exact(L_PATH, lam, 100), 0.0, "exact", 100) for lam in (2.0, 1.0)]
    write_sweep_csv(rows, tmp_path / "s.csv", 2)
    with open(tmp_path / "s.csv") as fh:
        data = list(csv.reader(fh))
    assert data[0] == ["lambda", "rho", "eta_1", "eta_2", "tail_bound", "route", "precision_bits"]
    assert [float(r[0]) for r in data[1:]] == [1.0, 2.0]
    assert float(data[1][1]) == pytest.approx(math.acosh(math.cosh(1) ** 2))
