"""Signatures of piecewise-linear paths, a quadrature oracle, and Chen stripping."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import EmptyPath
from .numerics import working_precision
from .paths import PiecewisePath
from .tensor import (
    Precision,
    TensorSeries,
    check_capacity,
    mul_exp,
    scalar,
    ts_exp_segment,
)


def _displacement(direction: Sequence[float], length: float, precision: Precision) -> list:
    # float direction and length are exact binary values; the product is
    # formed at the target precision so nothing is lost to float64 rounding
    with working_precision(precision if isinstance(precision, int) else None):
        l = scalar(length, precision)
        return [scalar(c, precision) * l for c in direction]


def signature_of_path(p: PiecewisePath, level: int, precision: Precision = None) -> TensorSeries:
    """Exact truncated signature: exp(v_1) (x) exp(v_2) (x) ... over the segments."""
    if len(p) == 0:
        raise EmptyPath("signature of an empty path")
    check_capacity(p.dimension, level)
    segs = p.segments
    x = ts_exp_segment(_displacement(*segs[0], precision), level, precision)
    for seg in segs[1:]:
        x = mul_exp(x, _displacement(*seg, precision))
    return x


def _mesh_counts(lengths: np.ndarray, mesh: int) -> np.ndarray:
    """Split ``mesh`` subintervals across segments proportionally to length, at least one each."""
    share = lengths / lengths.sum() * mesh
    counts = np.maximum(1, np.floor(share).astype(int))
    # hand leftover cells to the segments with the largest remainders
    while counts.sum() < mesh:
        counts[np.argmax(share - counts)] += 1
    return counts


def signature_bruteforce(p: PiecewisePath, level: int, mesh: int) -> TensorSeries:
    """Iterated integrals by left-point Riemann-Stieltjes sums (float64 oracle).

    The partition refines every segment, so the increments are
    ``(length_k / m_k) * direction_k`` repeated ``m_k`` times.  Level n is
    accumulated as S_n(t_{j+1}) = S_n(t_j) + S_{n-1}(t_j) (x) dx_j, which is
    first order in the mesh width above level 1.
    """
    if mesh < 1:
        raise ValueError("mesh must be >= 1")
    if len(p) == 0:
        raise EmptyPath("signature of an empty path")
    d = p.dimension
    check_capacity(d, level)
    counts = _mesh_counts(p.lengths, max(mesh, len(p)))
    incs = np.repeat(p.displacements / counts[:, None], counts, axis=0)  # (m, d)
    m = incs.shape[0]

    levels = [np.ones(1)]
    prev = np.ones((m, 1))  # S_{n-1} at the left endpoint of every cell
    for _ in range(1, level + 1):
        terms = (prev[:, :, None] * incs[:, None, :]).reshape(m, -1)
        running = np.cumsum(terms, axis=0)
        levels.append(running[-1].copy())
        prev = np.vstack([np.zeros((1, terms.shape[1])), running[:-1]])
    return TensorSeries(d, level, tuple(levels), None, group_like=True)


def strip_last_segment(x: TensorSeries, theta: Sequence[float], length: float) -> TensorSeries:
    """X (x) exp(-length * theta): removes a known final segment via Chen's identity."""
    p = x.precision
    with working_precision(p if isinstance(p, int) else None):
        l = scalar(length, p)
        v = [-(scalar(c, p) * l) for c in theta]
    return mul_exp(x, v)


def signature_distance(a: TensorSeries, b: TensorSeries, levels: Sequence[int] | None = None) -> float:
    """Max-norm coefficient distance in float64."""
    if levels is None:
        levels = range(min(a.level, b.level) + 1)
    worst = 0.0
    for n in levels:
        u = np.array([float(c) for c in a.coeffs[n]])
        w = np.array([float(c) for c in b.coeffs[n]])
        worst = max(worst, float(np.max(np.abs(u - w))))
    return worst

