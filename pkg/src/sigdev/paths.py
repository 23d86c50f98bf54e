"""Piecewise-linear paths stored as (unit direction, length) segments.

A path is never sampled: segment form is exactly what the inversion recovers,
and the constant-speed parametrization on [0, 1] is implicit (segment k
occupies a time interval proportional to its length).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyPath, InvalidPath

UNIT_TOL = 1e-14
MERGE_TOL = 1e-12


class Segment(NamedTuple):
    direction: tuple[float, ...]
    length: float


def _unit(v: Sequence[float]) -> tuple[float, ...]:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidPath(f"direction must be a nonempty vector, got {v!r}")
    if not np.all(np.isfinite(arr)):
        raise InvalidPath(f"non-finite direction {v!r}")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise InvalidPath("zero direction vector")
    arr = arr / norm
    # one Newton correction keeps |direction| within a couple of ulps of 1
    arr = arr / math.sqrt(float(arr @ arr))
    return tuple(float(c) for c in arr)


@dataclass(frozen=True)
class PiecewisePath:
    """Concatenation of straight segments in R^d."""

    dimension: int
    segments: tuple[Segment, ...]

    def __post_init__(self):
        if self.dimension < 1:
            raise InvalidPath("dimension must be >= 1")
        segs = []
        for seg in self.segments:
            direction, length = seg
            if len(direction) != self.dimension:
                raise DimensionMismatch(
                    f"segment direction has {len(direction)} components, path dimension is {self.dimension}"
                )
            length = float(length)
            if not (length > 0.0 and math.isfinite(length)):
                raise InvalidPath(f"segment length must be positive, got {length}")
            segs.append(Segment(_unit(direction), length))
        object.__setattr__(self, "segments", tuple(segs))

    @classmethod
    def from_segments(cls, segments: Iterable[tuple[Sequence[float], float]], dimension: int | None = None):
        segments = [(tuple(d), float(l)) for d, l in segments]
        if dimension is None:
            if not segments:
                raise EmptyPath("cannot infer dimension of an empty path")
            dimension = len(segments[0][0])
        return cls(dimension, tuple(Segment(d, l) for d, l in segments))

    @classmethod
    def from_displacements(cls, vectors: Iterable[Sequence[float]]):
        """Build from displacement vectors; each vector becomes one segment."""
        segs = []
        for v in vectors:
            arr = np.asarray(v, dtype=float)
            segs.append((arr, float(np.linalg.norm(arr))))
        return cls.from_segments(segs)

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def directions(self) -> np.ndarray:
        return np.array([s.direction for s in self.segments], dtype=float).reshape(-1, self.dimension)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([s.length for s in self.segments], dtype=float)

    @property
    def total_length(self) -> float:
        return float(math.fsum(s.length for s in self.segments))

    @property
    def displacements(self) -> np.ndarray:
        return self.directions * self.lengths[:, None]

    @property
    def increment(self) -> np.ndarray:
        return self.displacements.sum(axis=0)

    @property
    def antiparallel_joints(self) -> list[int]:
        """Indices j with direction_j = -direction_{j+1}; excluded by the inversion theorem."""
        dirs = self.directions
        return [j for j in range(len(self) - 1) if float(dirs[j] @ dirs[j + 1]) < -1.0 + MERGE_TOL]

    def points(self) -> np.ndarray:
        """Vertices of the path starting at the origin, shape (n+1, d)."""
        return np.vstack([np.zeros(self.dimension), np.cumsum(self.displacements, axis=0)])

    def breakpoints(self) -> np.ndarray:
        """Times in [0, 1] of the segment boundaries under natural parametrization."""
        cum = np.concatenate([[0.0], np.cumsum(self.lengths)])
        return cum / cum[-1]

    def merged(self) -> PiecewisePath:
        """Combine consecutive segments with equal directions."""
        out: list[Segment] = []
        for seg in self.segments:
            if out and _same_direction(out[-1].direction, seg.direction):
                out[-1] = Segment(out[-1].direction, out[-1].length + seg.length)
            else:
                out.append(seg)
        return PiecewisePath(self.dimension, tuple(out))


def _same_direction(a, b, tol: float = MERGE_TOL) -> bool:
    return max(abs(x - y) for x, y in zip(a, b)) <= tol


def concat(a: PiecewisePath, b: PiecewisePath, merge: bool = True) -> PiecewisePath:
    """Path ``a * b``: translate ``b`` to start where ``a`` ends.

    With ``merge`` the last segment of ``a`` and the first of ``b`` are fused
    when their directions agree within 1e-12.
    """
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"cannot concatenate paths in R^{a.dimension} and R^{b.dimension}")
    segs = list(a.segments)
    rest = list(b.segments)
    if merge and segs and rest and _same_direction(segs[-1].direction, rest[0].direction):
        segs[-1] = Segment(segs[-1].direction, segs[-1].length + rest[0].length)
        rest = rest[1:]
    return PiecewisePath(a.dimension, tuple(segs + rest))


def reverse(p: PiecewisePath) -> PiecewisePath:
    """Time reversal gamma^{-1}(u) = gamma(T - u)."""
    return PiecewisePath(
        p.dimension,
        tuple(Segment(tuple(-c for c in s.direction), s.length) for s in reversed(p.segments)),
    )


def direction_at_end(p: PiecewisePath) -> np.ndarray:
    if not p.segments:
        raise EmptyPath("path has no segments")
    return np.array(p.segments[-1].direction)


def basis_vector(i: int, d: int) -> tuple[float, ...]:
    """e_i in R^d with 1-based index ``i``."""
    if not 1 <= i <= d:
        raise ValueError(f"letter {i} outside 1..{d}")
    return tuple(1.0 if k == i - 1 else 0.0 for k in range(d))


def gen_alpha_beta(n: int, d: int = 2) -> tuple[PiecewisePath, PiecewisePath]:
    """Lattice paths with alpha^{n+1} = alpha^n * beta^n and beta^{n+1} = beta^n * alpha^n.

    alpha^0 is one unit step along e_1, beta^0 one unit step along e_2.  Steps
    are kept raw (no collinear merging), so each path has exactly 2^n segments.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if d < 2:
        raise ValueError("alpha/beta construction needs d >= 2")
    alpha = PiecewisePath(d, (Segment(basis_vector(1, d), 1.0),))
    beta = PiecewisePath(d, (Segment(basis_vector(2, d), 1.0),))
    for _ in range(n):
        alpha, beta = concat(alpha, beta, merge=False), concat(beta, alpha, merge=False)
    return alpha, beta


@dataclass(frozen=True)
class AxisPath:
    """(r_1 e_{i_1}) * ... * (r_n e_{i_n}) with 1-based letters."""

    letters: tuple[int, ...]
    displacements: tuple[float, ...]

    def __post_init__(self):
        letters = tuple(int(i) for i in self.letters)
        disp = tuple(float(r) for r in self.displacements)
        if len(letters) != len(disp):
            raise InvalidPath("letters and displacements differ in length")
        if any(i < 1 for i in letters):
            raise InvalidPath("letters are 1-based")
        if any(r == 0.0 for r in disp):
            raise InvalidPath("axis displacements must be nonzero")
        if any(a == b for a, b in zip(letters, letters[1:])):
            raise InvalidPath("consecutive letters must differ")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "displacements", disp)

    @property
    def dimension(self) -> int:
        return max(self.letters, default=1)


def axis_to_piecewise(a: AxisPath, dimension: int | None = None) -> PiecewisePath:
    d = dimension or a.dimension
    segs = []
    for i, r in zip(a.letters, a.displacements):
        e = basis_vector(i, d)
        segs.append(Segment(tuple(math.copysign(1.0, r) * c for c in e), abs(r)))
    return PiecewisePath(d, tuple(segs))


def random_unit(rng: np.random.Generator, d: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(d)
        n = np.linalg.norm(v)
        if n > 1e-8:
            return v / n


def random_piecewise_path(
    rng: np.random.Generator,
    n_segments: int,
    d: int = 2,
    length_range: tuple[float, float] = (0.4, 1.0),
    min_angle_deg: float = 20.0,
) -> PiecewisePath:
    """Random path whose consecutive directions make an angle in [min, 180 - min] degrees."""
    lo = math.cos(math.radians(180.0 - min_angle_deg))
    hi = math.cos(math.radians(min_angle_deg))
    dirs = [random_unit(rng, d)]
    while len(dirs) < n_segments:
        if d == 2:
            turn = rng.uniform(math.radians(min_angle_deg), math.radians(180.0 - min_angle_deg))
            turn *= rng.choice([-1.0, 1.0])
            c, s = math.cos(turn), math.sin(turn)
            x, y = dirs[-1]
            dirs.append(np.array([c * x - s * y, s * x + c * y]))
            continue
        cand = random_unit(rng, d)
        if lo <= float(cand @ dirs[-1]) <= hi:
            dirs.append(cand)
    lengths = rng.uniform(length_range[0], length_range[1], n_segments)
    return PiecewisePath.from_segments(zip(dirs, lengths), dimension=d)


def random_axis_path(
    rng: np.random.Generator,
    n_pieces: int,
    d: int = 2,
    r_range: tuple[float, float] = (0.2, 3.0),
) -> AxisPath:
    """Random axis path with |r_k| in ``r_range`` and random signs."""
    if d < 2 and n_pieces > 1:
        raise ValueError("a multi-piece axis path needs d >= 2")
    letters: list[int] = []
    for _ in range(n_pieces):
        choices = [i for i in range(1, d + 1) if not letters or i != letters[-1]]
        letters.append(int(rng.choice(choices)))
    mags = rng.uniform(r_range[0], r_range[1], n_pieces)
    signs = rng.choice([-1.0, 1.0], n_pieces)
    return AxisPath(tuple(letters), tuple(float(m * s) for m, s in zip(mags, signs)))


# -- JSON --------------------------------------------------------------------


def path_to_dict(p: PiecewisePath) -> dict:
    return {
        "dimension": p.dimension,
        "segments": [{"direction": list(s.direction), "length": s.length} for s in p.segments],
    }


def path_from_dict(data: dict) -> PiecewisePath:
    try:
        d = int(data["dimension"])
        raw = data["segments"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidPath(f"path JSON needs 'dimension' and 'segments': {exc}") from exc
    if not isinstance(raw, list):
        raise InvalidPath("'segments' must be a list")
    if not raw:
        raise EmptyPath("path has no segments")
    segs = []
    for k, seg in enumerate(raw):
        try:
            direction = [float(c) for c in seg["direction"]]
            length = float(seg["length"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidPath(f"segment {k}: {exc}") from exc
        segs.append(Segment(tuple(direction), length))
    return PiecewisePath(d, tuple(segs))


def save_path(p: PiecewisePath, file: str | Path) -> None:
    Path(file).write_text(json.dumps(path_to_dict(p), indent=1))


def load_path(file: str | Path) -> PiecewisePath:
    try:
        data = json.loads(Path(file).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidPath(f"{file}: {exc}") from exc
    return path_from_dict(data)
