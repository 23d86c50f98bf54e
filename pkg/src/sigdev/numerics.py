"""Extended-precision scalars and the least-squares fits used by the estimators.

Scalars are :class:`gmpy2.mpfr` values.  gmpy2 rounds every result to the
precision of the *active context*, so all arithmetic on big scalars must run
inside :func:`working_precision`.  Contexts are thread-local.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import DegenerateFit

MIN_PRECISION = 64
LOG2_E = math.log2(math.e)


def required_precision(lambda_times_L: float) -> int:
    """Working precision (bits) that keeps 64 significant bits at scale e^{lambda L}."""
    if lambda_times_L < 0:
        raise ValueError("lambda_times_L must be nonnegative")
    return math.ceil(1.5 * float(lambda_times_L) * LOG2_E) + MIN_PRECISION


@contextmanager
def working_precision(bits: int | None):
    """Run the enclosed block with gmpy2 rounding to ``bits`` bits.

    ``bits=None`` leaves the current context untouched (float64 or exact
    rational computations).
    """
    if bits is None:
        yield None
        return
    if bits < MIN_PRECISION:
        raise ValueError(f"precision must be >= {MIN_PRECISION} bits, got {bits}")
    with gmpy2.context(gmpy2.get_context(), precision=int(bits)) as ctx:
        yield ctx


def big(x, bits: int):
    """Convert ``x`` (int, float, str, Fraction, mpfr) to an mpfr of ``bits`` bits."""
    if isinstance(x, Fraction):
        with working_precision(bits):
            return mpfr(x.numerator) / mpfr(x.denominator)
    if isinstance(x, np.generic):
        x = x.item()
    return mpfr(x, int(bits))


def big_vector(values: Iterable, bits: int) -> np.ndarray:
    return np.array([big(v, bits) for v in values], dtype=object)


def is_big(x) -> bool:
    return isinstance(x, type(mpfr(0)))


def to_decimal(x, bits: int | None = None) -> str:
    """Decimal string that parses back to the identical value at ``bits`` precision."""
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)
    if is_big(x):
        bits = bits or x.precision
        ndig = math.ceil(bits * math.log10(2)) + 2
        if x == 0:
            return "0"
        if not gmpy2.is_finite(x):
            return str(x)
        mant, exp, _ = x.digits(10, ndig)
        sign = ""
        if mant.startswith("-"):
            sign, mant = "-", mant[1:]
        return f"{sign}{mant[0]}.{mant[1:]}e{exp - 1}"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def from_decimal(s, bits: int | None):
    """Inverse of :func:`to_decimal`; ``bits=None`` parses to float64 (or Fraction for a/b)."""
    if isinstance(s, (int, float)) and not isinstance(s, bool):
        s = repr(s) if isinstance(s, float) else str(s)
    if not isinstance(s, str):
        raise ValueError(f"expected a decimal string, got {s!r}")
    if "/" in s:
        frac = Fraction(s)
        return frac if bits is None else big(frac, bits)
    if bits is None:
        return float(s)
    return mpfr(s, int(bits))


def as_float(x) -> float:
    return float(x)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual_rms: float
    n_points: int

    def predict(self, x: float) -> float:
        return self.slope * x + self.intercept


def linear_fit(points: Sequence[tuple[float, float]]) -> FitResult:
    """Ordinary least-squares line through ``points``.

    Raises:
        DegenerateFit: fewer than two points, or all abscissae equal.
    """
    if len(points) < 2:
        raise DegenerateFit(f"need at least 2 points, got {len(points)}")
    x = np.array([float(p[0]) for p in points])
    y = np.array([float(p[1]) for p in points])
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateFit("non-finite data")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise DegenerateFit("all x values are equal")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    return FitResult(slope, intercept, float(np.sqrt(np.mean(resid**2))), len(points))


def factorial_tail(x: float, start: int, rel_tol: float = 1e-17) -> float:
    """Sum_{n >= start} x^n / n! for x >= 0, summed directly (no cancellation)."""
    if x <= 0.0:
        return 0.0
    log_term = start * math.log(x) - math.lgamma(start + 1)
    term = math.exp(log_term) if log_term < 700 else math.inf
    if term == 0.0 or math.isinf(term):
        return term
    total = 0.0
    n = start
    while True:
        total += term
        n += 1
        term *= x / n
        if term < rel_tol * total and x < n:
            return total
