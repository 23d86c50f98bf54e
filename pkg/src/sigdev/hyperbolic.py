"""Development of rescaled paths onto the hyperboloid H^d.

H^d = {x in R^{d+1} : I(x, x) = -1, x_{d+1} > 0} with the Minkowski form
I(x, y) = sum_{j<=d} x_j y_j - x_{d+1} y_{d+1}.  A point is written
(eta sinh rho, cosh rho) with eta a unit vector of R^d.

Three independent routes compute Gamma_lambda(1) o for o = (0, ..., 0, 1):

* :func:`develop_exact` multiplies closed-form segment matrices,
* :func:`develop_from_signature` sums the signature series of the development,
* :func:`develop_ode` integrates the (eta, rho) trajectory equations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import gmpy2
import numpy as np

from .errors import NotOnHyperboloid, PrecisionTooLow, StepTooCoarse, TailTooLarge
from .numerics import big, factorial_tail, required_precision, to_decimal, working_precision
from .paths import PiecewisePath
from .tensor import EXACT, TensorSeries, scalar

LOG_DOMAIN_THRESHOLD = 300.0
DEFAULT_TAIL_FRACTION = 1e-3


# -- points and matrices ------------------------------------------------------


@dataclass(frozen=True)
class DevelopmentPoint:
    """Hyperboloid point in (eta, rho) coordinates.

    ``eta`` and ``rho`` hold scalars at ``precision`` bits (mpfr) or floats
    when ``precision`` is None.  ``degenerate`` marks rho = 0, where eta is
    undefined and reported as e_1.
    """

    eta: tuple
    rho: object
    precision: int | None = None
    degenerate: bool = False

    @property
    def dimension(self) -> int:
        return len(self.eta)

    @property
    def eta_float(self) -> np.ndarray:
        return np.array([float(c) for c in self.eta])

    @property
    def rho_float(self) -> float:
        return float(self.rho)

    def ambient(self) -> tuple:
        """(eta sinh rho, cosh rho) at the point's precision."""
        with working_precision(self.precision):
            if self.precision is None:
                sh, ch = math.sinh(self.rho), math.cosh(self.rho)
            else:
                sh, ch = gmpy2.sinh(self.rho), gmpy2.cosh(self.rho)
            return tuple(e * sh for e in self.eta) + (ch,)

    def eta_distance(self, theta: Sequence) -> object:
        """|eta - theta| at the point's precision (the small quantity the estimators fit).

        theta is normalized at that precision first, the same way segment
        directions are, so a float64 direction does not leave a ~1e-17 floor.
        """
        theta = unit_at_precision(theta, self.precision)
        with working_precision(self.precision):
            s = sum((e - t) ** 2 for e, t in zip(self.eta, theta))
            return gmpy2.sqrt(s) if self.precision is not None else math.sqrt(s)


def minkowski(x: Sequence, y: Sequence):
    return sum(a * b for a, b in zip(x[:-1], y[:-1])) - x[-1] * y[-1]


def unit_at_precision(theta: Sequence, precision: int | None) -> list:
    """theta / |theta| evaluated at working precision.

    A float64 unit vector has norm 1 only to ~1e-16; the segment matrix is an
    isometry only for an exactly unit direction, and the defect would grow
    like e^{2 lambda L}.
    """
    with working_precision(precision):
        th = [scalar(c, precision) for c in theta]
        n = _sqrt(sum(c * c for c in th), precision)
        return [c / n for c in th]


def _sqrt(x, bits):
    return gmpy2.sqrt(x) if bits is not None else math.sqrt(x)


def _asinh(x, bits):
    return gmpy2.asinh(x) if bits is not None else math.asinh(x)


def decompose_ambient(x: Sequence, precision: int | None = None, tol: float | None = None) -> DevelopmentPoint:
    """Split an ambient (d+1)-vector into (eta, rho).

    rho is computed as asinh|spatial part|, which equals arccosh(x_{d+1}) on
    the hyperboloid but keeps full relative accuracy when rho is small.
    """
    if len(x) < 2:
        raise NotOnHyperboloid("ambient vector needs at least 2 components")
    if tol is None:
        tol = 2.0 ** (-(precision or 53) / 2)
    with working_precision(precision):
        xs = [scalar(c, precision) for c in x]
        t = xs[-1]
        q = minkowski(xs, xs)
        if not abs(q + 1) <= tol * max(1, t * t):
            raise NotOnHyperboloid(f"I(x, x) = {float(q)!r}, expected -1")
        if float(t) < 1.0 - tol:
            raise NotOnHyperboloid(f"x_(d+1) = {float(t)!r} is below 1")
        spatial = xs[:-1]
        norm = _sqrt(sum(c * c for c in spatial), precision)
        d = len(spatial)
        if norm == 0:
            e1 = tuple(scalar(1 if k == 0 else 0, precision) for k in range(d))
            return DevelopmentPoint(e1, scalar(0, precision), precision, degenerate=True)
        eta = tuple(c / norm for c in spatial)
        rho = _asinh(norm, precision)
    return DevelopmentPoint(eta, rho, precision)


@dataclass(frozen=True)
class DevelopmentMatrix:
    """(d+1) x (d+1) element of the Lorentz group, stored as an object array."""

    entries: np.ndarray
    precision: int | None = None

    @property
    def dimension(self) -> int:
        return self.entries.shape[0] - 1

    def __matmul__(self, other: DevelopmentMatrix) -> DevelopmentMatrix:
        with working_precision(self.precision):
            return DevelopmentMatrix(self.entries.dot(other.entries), self.precision)

    def apply(self, x: Sequence) -> np.ndarray:
        with working_precision(self.precision):
            return self.entries.dot(np.array(list(x), dtype=object))

    def form_defect(self) -> float:
        """max |M^T J M - J| relative to max |M|^2."""
        n = self.entries.shape[0]
        with working_precision(self.precision):
            J = np.diag([scalar(1, self.precision)] * (n - 1) + [scalar(-1, self.precision)])
            R = self.entries.T.dot(J).dot(self.entries) - J
            scale = max(abs(float(c)) for c in self.entries.ravel()) ** 2
        return max(abs(float(c)) for c in R.ravel()) / max(scale, 1.0)


def identity_matrix(d: int, precision: int | None = None) -> DevelopmentMatrix:
    one, zero = scalar(1, precision), scalar(0, precision)
    m = np.array([[one if i == j else zero for j in range(d + 1)] for i in range(d + 1)], dtype=object)
    return DevelopmentMatrix(m, precision)


def segment_matrix(theta: Sequence[float], s, precision: int | None = None) -> DevelopmentMatrix:
    """Development of a straight segment of (rescaled) length ``s`` in direction ``theta``.

    [[ (cosh s - 1) theta theta^T + I,  sinh s theta ],
     [ sinh s theta^T,                  cosh s       ]]
    """
    d = len(theta)
    with working_precision(precision):
        th = unit_at_precision(theta, precision)
        s = scalar(s, precision)
        if precision is None:
            ch, sh = math.cosh(s), math.sinh(s)
        else:
            ch, sh = gmpy2.cosh(s), gmpy2.sinh(s)
        one, zero = scalar(1, precision), scalar(0, precision)
        m = np.empty((d + 1, d + 1), dtype=object)
        for i in range(d):
            for j in range(d):
                m[i, j] = (ch - one) * th[i] * th[j] + (one if i == j else zero)
            m[i, d] = sh * th[i]
            m[d, i] = sh * th[i]
        m[d, d] = ch
    return DevelopmentMatrix(m, precision)


def development_matrix(p: PiecewisePath, lam, precision: int | None = None) -> DevelopmentMatrix:
    """Gamma_lambda(1) = M_n ... M_1 (the first segment acts first)."""
    out = identity_matrix(p.dimension, precision)
    with working_precision(precision):
        lam = scalar(lam, precision)
        for seg in p.segments:
            out = segment_matrix(seg.direction, lam * scalar(seg.length, precision), precision) @ out
    return out


# -- exact route ----------------------------------------------------------------


def _check_precision(lam_L: float, precision: int | None) -> int:
    need = required_precision(lam_L)
    if precision is None:
        return need
    if precision < need:
        raise PrecisionTooLow(f"lambda*L = {lam_L:.6g} needs {need} bits, got {precision}")
    return precision


def develop_exact_ambient(p: PiecewisePath, lam, precision: int | None = None) -> tuple[np.ndarray, int]:
    """Ambient endpoint Gamma_lambda(1) o by applying segment matrices to o in turn."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    bits = _check_precision(float(lam) * p.total_length, precision)
    d = p.dimension
    with working_precision(bits):
        lam = big(lam, bits)
        x_sp = [big(0, bits)] * d
        x_t = big(1, bits)
        for seg in p.segments:
            th = unit_at_precision(seg.direction, bits)
            s = lam * big(seg.length, bits)
            ch, sh = gmpy2.cosh(s), gmpy2.sinh(s)
            c = sum(a * b for a, b in zip(th, x_sp))
            k = (ch - 1) * c + sh * x_t
            x_sp = [a + k * b for a, b in zip(x_sp, th)]
            x_t = sh * c + ch * x_t
    return np.array(x_sp + [x_t], dtype=object), bits


def _develop_log_domain(p: PiecewisePath, lam, bits: int) -> DevelopmentPoint:
    """Segment-by-segment update of (eta, rho) without forming e^{rho}-sized numbers.

    After a segment (theta, s) applied to (eta, rho), everything is divided by
    e^{rho + s}; with a = e^{-2 rho}, b = e^{-2 s}, c = theta . eta the
    rescaled spatial part is
        eta e^{-s} (1 - a)/2 + theta [c (1 + b - 2e^{-s})(1 - a) + (1 - b)(1 + a)]/4
    and rho' = rho + s + log|S| + log(1 + sqrt(1 + e^{-2(rho+s)}/|S|^2)).
    """
    with working_precision(bits):
        lam = big(lam, bits)
        segs = p.segments
        eta = unit_at_precision(segs[0].direction, bits)
        rho = lam * big(segs[0].length, bits)
        for seg in segs[1:]:
            th = unit_at_precision(seg.direction, bits)
            s = lam * big(seg.length, bits)
            a, b, es = gmpy2.exp(-2 * rho), gmpy2.exp(-2 * s), gmpy2.exp(-s)
            c = sum(x * y for x, y in zip(th, eta))
            k = (c * (1 + b - 2 * es) * (1 - a) + (1 - b) * (1 + a)) / 4
            S = [e * es * (1 - a) / 2 + k * t for e, t in zip(eta, th)]
            nS = gmpy2.sqrt(sum(v * v for v in S))
            rho = rho + s + gmpy2.log(nS) + gmpy2.log1p(gmpy2.sqrt(1 + gmpy2.exp(-2 * (rho + s)) / nS**2))
            eta = [v / nS for v in S]
    return DevelopmentPoint(tuple(eta), rho, bits)


def develop_exact(p: PiecewisePath, lam, precision: int | None = None) -> DevelopmentPoint:
    """Endpoint of the development of lambda * p, from closed-form segment matrices.

    ``precision`` defaults to required_precision(lambda L); a smaller value
    raises PrecisionTooLow.  For lambda L above 300 the (eta, rho) form is
    updated directly instead of through ambient coordinates.
    """
    if len(p) == 0:
        raise ValueError("cannot develop an empty path")
    lam_L = float(lam) * p.total_length
    bits = _check_precision(lam_L, precision)
    if lam_L > LOG_DOMAIN_THRESHOLD:
        return _develop_log_domain(p, lam, bits)
    x, bits = develop_exact_ambient(p, lam, bits)
    return decompose_ambient(x, bits)


# -- series route ------------------------------------------------------------------


@lru_cache(maxsize=None)
def _letter_actions(d: int, n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """For each ambient component j: (indices, values) of the nonzero entries of
    V(w) = F(e_{i_n}) ... F(e_{i_1}) o over all words w of length n.

    F(e_i) maps (a, b) to (b e_i, a_i).  V is built one letter at a time, the
    newest letter acting on the left, with word w.i stored at index w*d + i-1.
    All entries are 0 or 1, so integer arrays carry them exactly.
    """
    V = np.zeros((1, d + 1), dtype=np.int8)
    V[0, d] = 1
    for _ in range(n):
        nxt = np.zeros((V.shape[0], d, d + 1), dtype=np.int8)
        for i in range(d):
            nxt[:, i, i] = V[:, d]
            nxt[:, i, d] = V[:, i]
        V = nxt.reshape(-1, d + 1)
    out = []
    for j in range(d + 1):
        idx = np.nonzero(V[:, j])[0]
        out.append((idx, V[idx, j].astype(np.int64)))
    return tuple(out)


def ambient_terms(x: TensorSeries) -> list[list]:
    """lambda-free level contributions a_n with Gamma_lambda(1) o = sum_n lambda^n a_n.

    a_n = sum_{|w| = n} C(w) V(w), contracting the level-n coefficients against
    the products of F(e_i) in reversed letter order.  Cached on the series.
    """
    cache = x._cache
    if "ambient_terms" in cache:
        return cache["ambient_terms"]
    d, p = x.dimension, x.precision
    bits = p if isinstance(p, int) else None
    terms = []
    with working_precision(bits):
        zero = scalar(0, p)
        for n, arr in enumerate(x.coeffs):
            vec = []
            for idx, vals in _letter_actions(d, n):
                acc = zero
                for k, v in zip(idx, vals):
                    acc = acc + arr[k] * int(v)
                vec.append(acc)
            terms.append(vec)
    cache["ambient_terms"] = terms
    return terms


def _norm_float(v: Sequence) -> float:
    return math.sqrt(sum(float(c) ** 2 for c in v))


def series_tail_bound(norms: Sequence[float], lam: float, length_hint: float | None = None) -> float:
    """Bound on the Euclidean norm of the omitted ambient terms sum_{n > N} lambda^n a_n.

    With a known path length L it is the factorial tail sum_{n>N} (lambda L)^n/n!.
    Otherwise the decay rate mu is read off the last retained levels via
    |a_n| ~ mu^2 |a_{n-2}| / (n (n-1)) (exact for a straight line, where
    mu = L), and the tail is extrapolated from the last term with a 2x margin.
    """
    N = len(norms) - 1
    lam = float(lam)
    if lam == 0.0:
        return 0.0
    if length_hint is not None:
        return factorial_tail(lam * length_hint, N + 1)
    mus = []
    for n in (N, N - 1):
        if n >= 2 and norms[n - 2] > 0.0 and norms[n] > 0.0:
            mus.append(math.sqrt(n * (n - 1) * norms[n] / norms[n - 2]))
    if not mus:
        # fall back on the factorial envelope |a_n| <= L^n / n!
        roots = [(math.factorial(n) * norms[n]) ** (1.0 / n) for n in range(1, N + 1) if norms[n] > 0.0]
        if not roots:
            return 0.0
        mus = [max(roots)]
    mu = max(mus)
    last = lam**N * norms[N]
    if N >= 1:
        last = max(last, lam ** (N - 1) * norms[N - 1] * lam * mu / N)
    if last == 0.0:
        return 0.0
    total, ratio, k = 0.0, 1.0, 1
    while True:
        ratio *= lam * mu / (N + k)
        total += ratio
        if ratio < 1e-17 * total and lam * mu < N + k:
            break
        k += 1
        if k > 100_000:
            return math.inf
    return 2.0 * last * total


def _check_tail(tail: float, rho: float, lam: float, tail_fraction: float) -> None:
    scale = math.sinh(rho) if rho < 700 else math.inf
    if tail > tail_fraction * scale and tail > 0.0:
        raise TailTooLarge(
            f"series tail bound {tail:.3g} exceeds {tail_fraction:g} x sinh(rho) = {tail_fraction * scale:.3g}"
            f" at lambda = {lam:g}",
            lam=lam,
            tail_bound=tail,
        )


def series_ambient(x: TensorSeries, lam) -> tuple[list, int | None]:
    """Truncated ambient sum sum_{n<=N} lambda^n a_n, before projection to (eta, rho)."""
    terms = ambient_terms(x)
    p = x.precision
    bits = p if isinstance(p, int) else None
    if p == EXACT:
        bits = 256
    with working_precision(bits):
        lam_s = scalar(lam, bits) if bits is not None else float(lam)
        acc = [scalar(0, bits) for _ in range(x.dimension + 1)]
        power = scalar(1, bits)
        for a in terms:
            acc = [u + power * (scalar(v, bits) if bits is not None else float(v)) for u, v in zip(acc, a)]
            power = power * lam_s
    return acc, bits


def develop_from_signature(
    x: TensorSeries,
    lam,
    *,
    length_hint: float | None = None,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    check_tail: bool = True,
) -> tuple[DevelopmentPoint, float]:
    """Endpoint of the development of lambda * gamma from the signature alone.

    Returns the point and a bound on the Euclidean norm of the ambient
    truncation error.  The bound relative to sinh rho also bounds the error in
    eta (about twice) and in rho; TailTooLarge is raised when it exceeds
    ``tail_fraction * sinh rho``.
    """
    acc, bits = series_ambient(x, lam)
    norms = [_norm_float(a) for a in ambient_terms(x)]
    tail = series_tail_bound(norms, float(lam), length_hint)
    point = _decompose_series(acc, bits, tail)
    if check_tail:
        _check_tail(tail, point.rho_float, float(lam), tail_fraction)
    return point, tail


def _decompose_series(acc: list, bits: int | None, tail: float) -> DevelopmentPoint:
    # truncation leaves I(x, x) off by O(tail * cosh rho); widen the check accordingly
    scale = max(1.0, float(acc[-1]))
    tol = max(2.0 ** (-(bits or 53) / 2), 4.0 * tail / scale + 1e-12)
    return decompose_ambient(acc, bits, tol=tol)


def coordinate_error_bounds(point: DevelopmentPoint, ambient_error: float) -> tuple[float, float]:
    """(rho bound, eta bound) implied by an ambient perturbation of norm ``ambient_error``.

    |d cosh rho| <= e gives |d rho| <= e / sinh rho; the spatial part moves by
    at most e and has norm sinh rho, so eta moves by at most 2e / sinh rho.
    """
    sh = math.sinh(point.rho_float) if point.rho_float < 700 else math.inf
    if sh == 0.0:
        return math.inf, math.inf
    return ambient_error / sh, 2.0 * ambient_error / sh


def _doubled_words(d: int, m: int) -> np.ndarray:
    """Indices of E_{2m} = {(i_1, i_1, ..., i_m, i_m)} built letter by letter."""
    idx = np.zeros(1, dtype=np.int64)
    for _ in range(m):
        letters = np.arange(d, dtype=np.int64)
        idx = ((idx[:, None] * d + letters[None, :]) * d + letters[None, :]).ravel()
    return idx


def cosh_rho_via_wordsets(x: TensorSeries, lam, *, tail_fraction: float = DEFAULT_TAIL_FRACTION, length_hint=None):
    """cosh rho_lambda(1) = sum_m lambda^{2m} sum_{w in E_{2m}} C(w), doubled-letter words only."""
    value, tail = _wordset_sum(x, lam, None, length_hint)
    if tail > tail_fraction * float(value) and tail > 0.0:
        raise TailTooLarge(f"tail bound {tail:.3g} too large at lambda = {float(lam):g}", lam=float(lam), tail_bound=tail)
    return value


def ambient_via_wordsets(x: TensorSeries, lam, length_hint=None) -> tuple[list, float]:
    """Full ambient endpoint from E_{2m} (time part) and E_{2m} followed by k (spatial part k)."""
    d = x.dimension
    out = [_wordset_sum(x, lam, k, length_hint)[0] for k in range(1, d + 1)]
    t, tail = _wordset_sum(x, lam, None, length_hint)
    return out + [t], tail


def _wordset_sum(x: TensorSeries, lam, letter: int | None, length_hint):
    d, N, p = x.dimension, x.level, x.precision
    bits = p if isinstance(p, int) else None
    if p == EXACT:
        bits = 256
    norms = []
    with working_precision(bits):
        lam_s = scalar(lam, bits) if bits is not None else float(lam)
        total = scalar(0, bits)
        m = 0
        while True:
            n = 2 * m + (0 if letter is None else 1)
            if n > N:
                break
            idx = _doubled_words(d, m)
            if letter is not None:
                idx = idx * d + (letter - 1)
            level_sum = scalar(0, bits)
            for k in idx:
                c = x.coeffs[n][k]
                level_sum = level_sum + (scalar(c, bits) if bits is not None else float(c))
            total = total + lam_s**n * level_sum
            norms.append((n, abs(float(level_sum))))
            m += 1
    full = [0.0] * (N + 1)
    for n, v in norms:
        full[n] = v
    return total, series_tail_bound(full, float(lam), length_hint)


# -- ODE route ---------------------------------------------------------------------

# Fehlberg 4(5) tableau
_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)
_B5 = (16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55)

MIN_STEPS_PER_UNIT = 50


def _trajectory_rhs(theta_fn, speed: float):
    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        eta, rho = y[:-1], y[-1]
        th = np.asarray(theta_fn(t), dtype=float)
        c = float(th @ eta)
        out = np.empty_like(y)
        out[:-1] = speed / math.tanh(rho) * (th - eta * c)
        out[-1] = speed * c
        return out

    return rhs


def _rkf45(rhs, t0: float, y: np.ndarray, h: float, n: int, tol: float) -> tuple[np.ndarray, float]:
    worst = 0.0
    t = t0
    for _ in range(n):
        k = []
        for i in range(6):
            yi = y.copy()
            for a, kj in zip(_A[i], k):
                yi += h * a * kj
            k.append(rhs(t + _C[i] * h, yi))
        y4 = y + h * sum(b * kj for b, kj in zip(_B4, k))
        y5 = y + h * sum(b * kj for b, kj in zip(_B5, k))
        err = float(np.max(np.abs(y5 - y4)))
        worst = max(worst, err)
        if err > tol:
            raise StepTooCoarse(f"embedded error {err:.3g} exceeds {tol:g} at t = {t:.6g}; increase steps")
        y = y5
        y[:-1] /= np.linalg.norm(y[:-1])
        t += h
    return y, worst


def develop_ode(
    theta_fn: Callable[[float], Sequence[float]],
    L: float,
    lam: float,
    steps: int,
    *,
    tol: float = 1e-6,
) -> DevelopmentPoint:
    """Integrate the (eta, rho) trajectory of lambda * gamma for a unit-speed direction field.

    eta' = lambda L coth(rho) (theta - eta theta.eta),  rho' = lambda L theta.eta,
    on t in [0, 1].  coth(rho) blows up at t = 0, so the first step [0, h]
    takes the straight-line solution eta = theta(0), rho = lambda L h; its
    O(h) direction error is forgotten at rate lambda L.  The remaining steps
    use Runge-Kutta-Fehlberg 4(5) with fixed step and renormalized eta;
    StepTooCoarse is raised when ``steps`` is below 50 lambda L or an
    embedded error estimate exceeds ``tol``.
    """
    speed = float(lam) * float(L)
    if steps < max(2, math.ceil(MIN_STEPS_PER_UNIT * speed)):
        raise StepTooCoarse(f"{steps} steps is fewer than 50 lambda L = {MIN_STEPS_PER_UNIT * speed:.1f}")
    h = 1.0 / steps
    th0 = np.asarray(theta_fn(0.0), dtype=float)
    if speed == 0.0:
        return DevelopmentPoint(tuple(float(c) for c in th0), 0.0, None, degenerate=True)
    y = np.empty(len(th0) + 1)
    y[:-1] = th0 / np.linalg.norm(th0)
    y[-1] = speed * h
    y, _ = _rkf45(_trajectory_rhs(theta_fn, speed), h, y, h, steps - 1, tol)
    return DevelopmentPoint(tuple(float(c) for c in y[:-1]), float(y[-1]), None)


def develop_ode_path(p: PiecewisePath, lam: float, steps: int, *, tol: float = 1e-6) -> DevelopmentPoint:
    """ODE route for a piecewise-linear path, integrating each segment with its constant direction.

    The first segment is a straight line from o and is taken exactly; later
    segments get a share of ``steps`` proportional to their length.
    """
    L = p.total_length
    speed = float(lam) * L
    if steps < max(2, math.ceil(MIN_STEPS_PER_UNIT * speed)):
        raise StepTooCoarse(f"{steps} steps is fewer than 50 lambda L = {MIN_STEPS_PER_UNIT * speed:.1f}")
    segs = p.segments
    first = np.array(segs[0].direction)
    y = np.concatenate([first, [float(lam) * segs[0].length]])
    t = segs[0].length / L
    for seg in segs[1:]:
        span = seg.length / L
        n = max(1, math.ceil(steps * span))
        th = np.array(seg.direction)
        y, _ = _rkf45(_trajectory_rhs(lambda _t, th=th: th, speed), t, y, span / n, n, tol)
        t += span
    return DevelopmentPoint(tuple(float(c) for c in y[:-1]), float(y[-1]), None)


def smoothed_direction(p: PiecewisePath, window: float) -> Callable[[float], np.ndarray]:
    """Unit direction field of ``p`` with each corner blended linearly over a time window.

    Inside [t_k - window/2, t_k + window/2] around breakpoint t_k the two
    directions are mixed linearly and renormalized.
    """
    dirs = p.directions
    cuts = p.breakpoints()[1:-1]

    def theta(t: float) -> np.ndarray:
        k = int(np.searchsorted(cuts, t, side="right"))
        for j, c in enumerate(cuts):
            if abs(t - c) < window / 2:
                w = (t - (c - window / 2)) / window
                v = (1 - w) * dirs[j] + w * dirs[j + 1]
                return v / np.linalg.norm(v)
        return dirs[k]

    return theta


# -- sweeps --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    lam: float
    point: DevelopmentPoint
    tail_bound: float
    route: str
    precision_bits: int | None


def write_sweep_csv(rows: Iterable[SweepRow], file, dimension: int) -> None:
    """CSV with columns lambda, rho, eta_1..eta_d, tail_bound, route, precision_bits (lambda ascending)."""
    rows = sorted(rows, key=lambda r: r.lam)
    header = ["lambda", "rho"] + [f"eta_{k}" for k in range(1, dimension + 1)] + ["tail_bound", "route", "precision_bits"]

    def fmt(v):
        return repr(v) if isinstance(v, float) else to_decimal(v)

    own = isinstance(file, (str, Path))
    fh = open(file, "w", newline="") if own else file
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(
                [repr(float(r.lam)), fmt(r.point.rho)]
                + [fmt(e) for e in r.point.eta]
                + [repr(float(r.tail_bound)), r.route, "" if r.precision_bits is None else r.precision_bits]
            )
    finally:
        if own:
            fh.close()

