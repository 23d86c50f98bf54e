"""Truncated free tensor algebra T^{(N)}(R^d) with dense per-level storage.

Level ``n`` of a :class:`TensorSeries` is a flat array of ``d**n`` coefficients.
A word ``(i_1, ..., i_n)`` (letters 1-based) sits at index
``sum_k (i_k - 1) d^(n-k)``: first letter most significant, so flat order is
lexicographic and ``np.multiply.outer(u, v).ravel()`` is the tensor product.

Coefficients come in three flavours selected by ``precision``:

* an ``int`` -- :class:`gmpy2.mpfr` objects at that many bits (object arrays),
* ``None``   -- machine float64,
* ``"exact"`` -- :class:`fractions.Fraction` objects.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, InvalidSignature, LevelCapExceeded, NotInvertible
from .numerics import big, from_decimal, to_decimal, working_precision

Precision = Union[int, None, str]
EXACT = "exact"
DEFAULT_MAX_COEFFS = 2**27

Word = tuple[int, ...]


def max_coeffs() -> int:
    """Dense storage cap: SIGDEV_MAX_COEFFS if set, else 2^27."""
    env = os.environ.get("SIGDEV_MAX_COEFFS")
    if env:
        return int(env)
    return DEFAULT_MAX_COEFFS


def n_coeffs(d: int, level: int) -> int:
    return sum(d**n for n in range(level + 1))


def max_level(d: int) -> int:
    """Largest level whose dense storage fits under the cap."""
    cap = max_coeffs()
    n = 0
    while n_coeffs(d, n + 1) <= cap:
        n += 1
        if d == 1 and n > 10_000:
            break
    return n


def check_capacity(d: int, level: int) -> None:
    if level < 0:
        raise ValueError("level must be >= 0")
    total = n_coeffs(d, level)
    if total > max_coeffs():
        raise LevelCapExceeded(
            f"level {level} in dimension {d} needs {total} coefficients, cap is {max_coeffs()}"
        )


# -- scalars -----------------------------------------------------------------


def scalar(x, precision: Precision):
    if precision is None:
        return float(x)
    if precision == EXACT:
        if isinstance(x, float):
            return Fraction(x)
        return Fraction(x)
    return big(x, precision)


def as_array(values, precision: Precision) -> np.ndarray:
    vals = np.asarray(values, dtype=object if precision is not None else float).ravel()
    if precision is None:
        return vals.astype(float)
    return np.array([scalar(v, precision) for v in vals], dtype=object)


def combine_precision(*ps: Precision) -> Precision:
    bits = [p for p in ps if isinstance(p, int)]
    if bits:
        return max(bits)
    if any(p is None for p in ps):
        return None
    return EXACT


# -- words ---------------------------------------------------------------------


def word_iter(d: int, n: int) -> Iterator[Word]:
    """All d^n words of length n in lexicographic (= dense index) order."""
    if n < 0:
        raise ValueError("word length must be >= 0")
    return itertools.product(range(1, d + 1), repeat=n)


def word_index(word: Sequence[int], d: int) -> int:
    idx = 0
    for letter in word:
        if not 1 <= letter <= d:
            raise ValueError(f"letter {letter} outside 1..{d}")
        idx = idx * d + (letter - 1)
    return idx


def word_from_index(idx: int, n: int, d: int) -> Word:
    letters = []
    for _ in range(n):
        idx, r = divmod(idx, d)
        letters.append(r + 1)
    return tuple(reversed(letters))


def word_key(word: Sequence[int]) -> str:
    return ",".join(str(i) for i in word)


def parse_word_key(key: str) -> Word:
    key = key.strip()
    if not key:
        return ()
    return tuple(int(tok) for tok in key.split(","))


def square_free_indices(d: int, n: int) -> np.ndarray:
    """Dense indices of the square-free words (no equal adjacent letters) of length n."""
    if n == 0:
        return np.zeros(1, dtype=np.int64)
    idx = np.arange(d, dtype=np.int64)
    last = np.arange(d, dtype=np.int64)
    for _ in range(n - 1):
        nxt = np.arange(d, dtype=np.int64)
        keep = last[:, None] != nxt[None, :]
        idx = (idx[:, None] * d + nxt[None, :])[keep]
        last = np.broadcast_to(nxt, keep.shape)[keep]
    return idx


# -- the series type ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TensorSeries:
    """Element of the truncated tensor algebra, levels 0..level."""

    dimension: int
    level: int
    coeffs: tuple[np.ndarray, ...]
    precision: Precision = None
    group_like: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        d, N = self.dimension, self.level
        if d < 1:
            raise InvalidSignature("dimension must be >= 1")
        check_capacity(d, N)
        if len(self.coeffs) != N + 1:
            raise InvalidSignature(f"expected {N + 1} levels, got {len(self.coeffs)}")
        for n, arr in enumerate(self.coeffs):
            if arr.shape != (d**n,):
                raise InvalidSignature(f"level {n} has shape {arr.shape}, expected ({d**n},)")
            arr.setflags(write=False)
        if self.group_like and self.coeffs[0][0] != 1:
            raise InvalidSignature("group-like series must have unit constant term")

    def __getitem__(self, word: Sequence[int]):
        word = tuple(word)
        if len(word) > self.level:
            raise KeyError(f"word of length {len(word)} beyond level {self.level}")
        return self.coeffs[len(word)][word_index(word, self.dimension)]

    def truncate(self, level: int) -> TensorSeries:
        if level > self.level:
            raise ValueError("cannot raise the truncation level")
        return TensorSeries(self.dimension, level, self.coeffs[: level + 1], self.precision, self.group_like)

    def with_precision(self, precision: Precision) -> TensorSeries:
        if precision == self.precision:
            return self
        with working_precision(precision if isinstance(precision, int) else None):
            coeffs = tuple(as_array(c, precision) for c in self.coeffs)
        return TensorSeries(self.dimension, self.level, coeffs, precision, self.group_like)

    def level_norms(self) -> np.ndarray:
        """Euclidean norm of each level, as floats."""
        return np.array([math.sqrt(sum(float(c) ** 2 for c in arr)) for arr in self.coeffs])

    def to_float(self) -> list[np.ndarray]:
        return [np.array([float(c) for c in arr]) for arr in self.coeffs]

    def words(self) -> Iterator[tuple[Word, object]]:
        for n in range(self.level + 1):
            for w, c in zip(word_iter(self.dimension, n), self.coeffs[n]):
                yield w, c


def _check_dims(a: TensorSeries, b: TensorSeries) -> None:
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"dimensions differ: {a.dimension} vs {b.dimension}")


def _bits(p: Precision) -> int | None:
    return p if isinstance(p, int) else None


def unit(d: int, level: int, precision: Precision = None) -> TensorSeries:
    check_capacity(d, level)
    coeffs = [as_array([1], precision)] + [as_array(np.zeros(d**n), precision) for n in range(1, level + 1)]
    return TensorSeries(d, level, tuple(coeffs), precision, group_like=True)


def from_levels(levels: Sequence[Sequence], d: int, precision: Precision = None, group_like: bool = False) -> TensorSeries:
    with working_precision(_bits(precision)):
        coeffs = tuple(as_array(lv, precision) for lv in levels)
    return TensorSeries(d, len(coeffs) - 1, coeffs, precision, group_like)


def ts_mul(a: TensorSeries, b: TensorSeries) -> TensorSeries:
    """Truncated tensor product (Chen product); level = min of the two levels."""
    _check_dims(a, b)
    N = min(a.level, b.level)
    p = combine_precision(a.precision, b.precision)
    a, b = a.with_precision(p), b.with_precision(p)
    out = []
    with working_precision(_bits(p)):
        for n in range(N + 1):
            acc = None
            for j in range(n + 1):
                term = np.multiply.outer(a.coeffs[j], b.coeffs[n - j]).ravel()
                acc = term if acc is None else acc + term
            out.append(acc)
    return TensorSeries(a.dimension, N, tuple(out), p, a.group_like and b.group_like)


def ts_inverse(a: TensorSeries) -> TensorSeries:
    """Multiplicative inverse in the truncated algebra.

    Writing a = c (1 + x) with x of positive degree, the inverse is
    c^{-1} sum_{k<=N} (-x)^k.  The level-by-level recursion
    b_n = -c^{-1} sum_{j>=1} a_j b_{n-j} produces exactly these truncated sums
    at the cost of a single product.
    """
    c = a.coeffs[0][0]
    if c == 0:
        raise NotInvertible("constant term is zero")
    d, p = a.dimension, a.precision
    with working_precision(_bits(p)):
        inv_c = (Fraction(1) / c) if p == EXACT else 1 / c
        out = [np.array([inv_c], dtype=a.coeffs[0].dtype)]
        for n in range(1, a.level + 1):
            acc = None
            for j in range(1, n + 1):
                term = np.multiply.outer(a.coeffs[j], out[n - j]).ravel()
                acc = term if acc is None else acc + term
            out.append(-acc * inv_c)
    return TensorSeries(d, a.level, tuple(out), p, a.group_like)


def ts_scale(a: TensorSeries, lam) -> TensorSeries:
    """Dilation: level n multiplied by lam^n (signature of lam * path)."""
    p = a.precision
    with working_precision(_bits(p)):
        lam = scalar(lam, p)
        out = []
        power = scalar(1, p)
        for n, arr in enumerate(a.coeffs):
            out.append(arr * power)
            power = power * lam
    return TensorSeries(a.dimension, a.level, tuple(out), p, a.group_like)


def ts_add(a: TensorSeries, b: TensorSeries) -> TensorSeries:
    _check_dims(a, b)
    N = min(a.level, b.level)
    p = combine_precision(a.precision, b.precision)
    a, b = a.with_precision(p), b.with_precision(p)
    with working_precision(_bits(p)):
        out = tuple(a.coeffs[n] + b.coeffs[n] for n in range(N + 1))
    return TensorSeries(a.dimension, N, out, p)


def ts_exp_segment(v: Sequence, level: int, precision: Precision = None) -> TensorSeries:
    """exp(v) = sum_n v^{(x)n} / n!, the signature of the straight segment with displacement v."""
    d = len(v)
    check_capacity(d, level)
    with working_precision(_bits(precision)):
        vec = as_array(v, precision)
        out = [as_array([1], precision)]
        for n in range(1, level + 1):
            out.append(np.multiply.outer(out[-1], vec / n).ravel())
    return TensorSeries(d, level, tuple(out), precision, group_like=True)


def mul_exp(x: TensorSeries, v: Sequence) -> TensorSeries:
    """x (x) exp(v) without forming exp(v).

    Level n of the product is sum_j x_j (x) v^{n-j}/(n-j)!, evaluated by Horner's
    rule: ((x_0 v/n + x_1) v/(n-1) + x_2) ... v/1 + x_n.
    """
    d = x.dimension
    if len(v) != d:
        raise DimensionMismatch(f"vector has {len(v)} components, series dimension is {d}")
    p = x.precision
    with working_precision(_bits(p)):
        vec = as_array(v, p)
        scaled = [None] + [vec / k for k in range(1, x.level + 1)]
        out = [x.coeffs[0]]
        for n in range(1, x.level + 1):
            acc = x.coeffs[0] * scaled[n]
            for j in range(1, n):
                acc = np.multiply.outer(acc + x.coeffs[j], scaled[n - j]).ravel()
            out.append(acc + x.coeffs[n])
    return TensorSeries(d, x.level, tuple(out), p, x.group_like)


def max_abs_diff(a: TensorSeries, b: TensorSeries, levels: Sequence[int] | None = None) -> float:
    """Max-norm distance over the given levels (default: all common levels)."""
    _check_dims(a, b)
    if levels is None:
        levels = range(min(a.level, b.level) + 1)
    worst = 0.0
    for n in levels:
        diff = np.abs(np.array([float(u - w) for u, w in zip(a.coeffs[n], b.coeffs[n])]))
        if diff.size:
            worst = max(worst, float(diff.max()))
    return worst


def max_abs(a: TensorSeries, levels: Sequence[int] | None = None) -> float:
    if levels is None:
        levels = range(a.level + 1)
    return max((float(max(abs(float(c)) for c in a.coeffs[n])) for n in levels), default=0.0)


def is_unit(a: TensorSeries, tol: float = 0.0) -> bool:
    if abs(float(a.coeffs[0][0]) - 1.0) > tol:
        return False
    return all(abs(float(c)) <= tol for n in range(1, a.level + 1) for c in a.coeffs[n])


# -- JSON ----------------------------------------------------------------------


def signature_to_dict(x: TensorSeries) -> dict:
    bits = _bits(x.precision)
    coeffs = {}
    for w, c in x.words():
        coeffs[word_key(w)] = to_decimal(c, bits)
    out = {"dimension": x.dimension, "level": x.level}
    if bits is not None:
        out["precision"] = bits
    out["coeffs"] = coeffs
    return out


def signature_from_dict(data: dict, precision: Precision | str = "auto") -> TensorSeries:
    """Parse the JSON signature format.

    ``precision="auto"`` uses the file's ``precision`` field, falling back to
    float64.  Words absent from ``coeffs`` are zero.
    """
    try:
        d = int(data["dimension"])
        N = int(data["level"])
        raw = data["coeffs"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidSignature(f"signature JSON needs dimension/level/coeffs: {exc}") from exc
    if not isinstance(raw, dict):
        raise InvalidSignature("'coeffs' must be an object")
    if precision == "auto":
        precision = data.get("precision")
        precision = int(precision) if precision is not None else None
    check_capacity(d, N)
    bits = _bits(precision)
    zero = scalar(0, precision)
    levels = [np.full(d**n, zero, dtype=object if precision is not None else float) for n in range(N + 1)]
    for key, val in raw.items():
        try:
            w = parse_word_key(key)
            idx = word_index(w, d)
        except ValueError as exc:
            raise InvalidSignature(f"bad word key {key!r}: {exc}") from exc
        if len(w) > N:
            raise InvalidSignature(f"word {key!r} longer than level {N}")
        try:
            levels[len(w)][idx] = from_decimal(val, bits) if precision != EXACT else Fraction(str(val))
        except ValueError as exc:
            raise InvalidSignature(f"bad coefficient for {key!r}: {exc}") from exc
    group_like = levels[0][0] == 1
    return TensorSeries(d, N, tuple(levels), precision, group_like)


def save_signature(x: TensorSeries, file: str | Path) -> None:
    Path(file).write_text(json.dumps(signature_to_dict(x)))


def load_signature(file: str | Path, precision: Precision | str = "auto") -> TensorSeries:
    try:
        data = json.loads(Path(file).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidSignature(f"{file}: {exc}") from exc
    return signature_from_dict(data, precision)
