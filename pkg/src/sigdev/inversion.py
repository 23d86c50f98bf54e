"""Recovering paths from signatures.

* :func:`axis_invert` -- exact inversion for paths moving along coordinate axes.
* :func:`estimate_last_piece` / :func:`invert_piecewise_linear` -- read the
  direction and length of the final linear piece off the hyperbolic
  development of the dilated path, strip it with Chen's identity, repeat.
* :func:`derivative_expansion` / :func:`recover_endpoint_jet` -- the
  1/lambda expansion of eta_lambda(1) for smooth paths.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DecayNotObserved,
    DegenerateFit,
    IllConditionedFit,
    InsufficientJet,
    LevelInsufficient,
    NotAxisSignature,
    SigdevError,
    TailTooLarge,
)
from .hyperbolic import DevelopmentPoint, develop_from_signature
from .numerics import FitResult, linear_fit
from .paths import AxisPath, PiecewisePath, Segment, path_to_dict
from .signature import signature_of_path, strip_last_segment
from .tensor import TensorSeries, square_free_indices, word_from_index, word_index

Provider = Callable[[float], DevelopmentPoint]


# -- axis paths ----------------------------------------------------------------------


def axis_invert(x: TensorSeries, eps_zero: float = 1e-9) -> AxisPath:
    """Exact inversion of an axis-path signature.

    The longest square-free word w* with a nonzero coefficient spells the
    letters; with w*_k the word obtained by doubling its k-th letter,
    r_k = 2 C(w*_k) / C(w*).  "Nonzero" means above ``eps_zero`` times the
    largest absolute coefficient of the same level.
    """
    d, N = x.dimension, x.level
    found: list[tuple[int, list[int]]] = []
    for n in range(1, N + 1):
        arr = x.coeffs[n]
        scale = max(abs(float(c)) for c in arr)
        if scale == 0.0:
            break
        idx = square_free_indices(d, n)
        hits = [int(k) for k in idx if abs(float(arr[k])) > eps_zero * scale]
        if not hits:
            break
        found.append((n, hits))
    if not found:
        raise NotAxisSignature("no nonzero coefficient at level 1")
    n_star, hits = found[-1]
    if n_star >= N:
        raise LevelInsufficient(
            f"square-free words stay nonzero up to the truncation level {N}; need level >= {n_star + 1}"
        )
    if len(hits) > 1:
        words = [word_from_index(k, n_star, d) for k in hits]
        raise NotAxisSignature(f"{len(hits)} maximal square-free words are nonzero, e.g. {words[:3]}")
    w = word_from_index(hits[0], n_star, d)
    c_w = x.coeffs[n_star][hits[0]]
    rs = []
    for k in range(n_star):
        doubled = w[: k + 1] + w[k:]
        rs.append(float(2 * x.coeffs[n_star + 1][word_index(doubled, d)] / c_w))
    return AxisPath(w, tuple(rs))


# -- configuration and reports ------------------------------------------------------


@dataclass(frozen=True)
class InversionConfig:
    """Tuning knobs for the last-piece estimators and the inversion loop.

    lambda_L_max: largest lambda * (remaining length) used on the series route.
    lambda_lo_fraction: smallest grid point as a fraction of lambda_max.
    fit_fraction: the slope fit only uses lambda <= fit_fraction * lambda_max.
    max_backoff / backoff_factor: when the series tail is too large at
        lambda_max the grid is scaled by backoff_factor, at most max_backoff times.
    remaining_length: "bookkeeping" takes the initial length estimate minus
        the lengths peeled so far; "refit" re-estimates it from the stripped
        signature.
    """

    lambda_L_max: float = 6.0
    lambda_lo_fraction: float = 0.25
    fit_fraction: float = 0.7
    n_lambda: int = 10
    length_grid: tuple[float, ...] = (2.0, 3.0, 4.0, 5.0, 6.0)
    eps_decay: float = 1e-3
    flat_tol: float = 1e-10
    tail_fraction: float = 1e-3
    stop_fraction: float = 0.05
    stop_abs: float = 1e-6
    max_pieces: int = 12
    max_backoff: int = 6
    backoff_factor: float = 0.8
    remaining_length: str = "bookkeeping"
    merge_antiparallel: bool = True
    refine: bool = False
    refine_level: int = 6

    @classmethod
    def from_dict(cls, data: dict) -> InversionConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "length_grid" in data:
            data["length_grid"] = tuple(float(v) for v in data["length_grid"])
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["length_grid"] = list(self.length_grid)
        return out


@dataclass(frozen=True)
class LastPieceEstimate:
    theta_hat: tuple[float, ...]
    l_hat: float
    direction_residual: float
    slope_fit: FitResult
    lambda_grid: tuple[float, ...]
    levels_used: int
    single_piece: bool = False

    def to_dict(self) -> dict:
        return {
            "theta_hat": list(self.theta_hat),
            "l_hat": self.l_hat,
            "direction_residual": self.direction_residual,
            "slope_fit": asdict(self.slope_fit),
            "lambda_grid": list(self.lambda_grid),
            "levels_used": self.levels_used,
            "single_piece": self.single_piece,
        }


@dataclass(frozen=True)
class InversionReport:
    recovered: PiecewisePath | None
    per_piece: tuple[LastPieceEstimate, ...]
    terminated_by: str
    total_length_estimate: float
    failure: str | None = None
    antiparallel_merges: tuple[int, ...] = ()
    refined: bool = False
    config: InversionConfig = field(default_factory=InversionConfig)

    def to_dict(self) -> dict:
        return {
            "recovered": path_to_dict(self.recovered) if self.recovered is not None else None,
            "per_piece": [e.to_dict() for e in self.per_piece],
            "terminated_by": self.terminated_by,
            "total_length_estimate": self.total_length_estimate,
            "failure": self.failure,
            "antiparallel_merges": list(self.antiparallel_merges),
            "refined": self.refined,
            "config": self.config.to_dict(),
        }

    def save(self, file: str | Path) -> None:
        Path(file).write_text(json.dumps(self.to_dict(), indent=1))


TRIVIAL_REMAINDER = "TrivialRemainder"
MAX_PIECES = "MaxPieces"
ESTIMATOR_FAILURE = "EstimatorFailure"


# -- length and last-piece estimators ----------------------------------------------


def _signature_provider(x: TensorSeries, tail_fraction: float) -> Provider:
    return lambda lam: develop_from_signature(x, lam, tail_fraction=tail_fraction)[0]


def fit_total_length(points: Sequence[tuple[float, float]]) -> FitResult:
    return linear_fit(points)


def estimate_total_length(
    x: TensorSeries | None,
    lambda_grid: Sequence[float],
    *,
    provider: Provider | None = None,
    tail_fraction: float = 1e-3,
) -> float:
    """Slope of rho_lambda(1) against lambda: rho = lambda L - O(1) for piecewise-linear paths.

    The development comes from the signature unless ``provider`` (lambda ->
    DevelopmentPoint) is given.
    """
    return _length_fit(x, lambda_grid, provider, tail_fraction).slope


def _length_fit(x, lambda_grid, provider, tail_fraction) -> FitResult:
    if provider is None:
        provider = _signature_provider(x, tail_fraction)
    grid = sorted(float(v) for v in lambda_grid)
    if len(grid) < 2:
        raise DegenerateFit(f"need at least 2 lambda values, got {len(grid)}")
    return linear_fit([(lam, provider(lam).rho_float) for lam in grid])


def length_lower_bound(x: TensorSeries) -> float:
    """max_n (n! |X_n|)^{1/n}: a lower bound for the length since |X_n| <= L^n / n!."""
    norms = x.level_norms()
    best = 0.0
    for n in range(1, x.level + 1):
        if norms[n] > 0.0:
            best = max(best, math.exp((math.lgamma(n + 1) + math.log(norms[n])) / n))
    return best


def estimate_remaining_length(x: TensorSeries, config: InversionConfig) -> float:
    """Total-length estimate with a lambda grid scaled to the (unknown) length.

    Starts from :func:`length_lower_bound` and rescales the grid
    ``config.length_grid / L_guess`` until the estimate stops growing, so
    that lambda L stays inside the region where the truncated series is
    accurate.
    """
    guess = length_lower_bound(x)
    if guess == 0.0:
        return 0.0
    for _ in range(8):
        grid = [g / guess for g in config.length_grid]
        try:
            est = estimate_total_length(x, grid, tail_fraction=config.tail_fraction)
        except TailTooLarge:
            guess *= 1.25
            continue
        if est <= guess * 1.02:
            return est
        guess = est
    return estimate_total_length(x, [g / guess for g in config.length_grid], tail_fraction=config.tail_fraction)


def last_piece_grid(total_length: float, config: InversionConfig) -> list[float]:
    lam_max = config.lambda_L_max / total_length
    grid = np.linspace(config.lambda_lo_fraction * lam_max, config.fit_fraction * lam_max, config.n_lambda)
    return [float(v) for v in grid] + [lam_max]


def estimate_last_piece(
    x: TensorSeries | None,
    config: InversionConfig = InversionConfig(),
    *,
    total_length: float | None = None,
    provider: Provider | None = None,
) -> LastPieceEstimate:
    """Direction and length of the last linear piece.

    theta_hat is eta at lambda_max = lambda_L_max / L; l_hat is minus the
    slope of log|eta_lambda - theta_hat| over lambda <= fit_fraction *
    lambda_max.  A flat eta (straight path) yields a single-piece estimate
    with l_hat = L.
    """
    if provider is None:
        provider = _signature_provider(x, config.tail_fraction)
    if total_length is None:
        total_length = estimate_remaining_length(x, config)
    grid = last_piece_grid(total_length, config)
    top = None
    for _ in range(config.max_backoff + 1):
        try:
            top = provider(grid[-1])
            break
        except TailTooLarge:
            # the series is not trustworthy this far out: shrink the whole grid
            grid = [g * config.backoff_factor for g in grid]
    if top is None:
        raise TailTooLarge(f"no feasible lambda_max after {config.max_backoff} reductions", lam=grid[-1])
    theta = top.eta_float
    theta = theta / np.linalg.norm(theta)
    fit_grid = grid[:-1]
    dists = [float(provider(lam).eta_distance(top.eta)) for lam in fit_grid]
    residual = dists[-1]
    levels = x.level if x is not None else 0
    if max(dists) <= config.flat_tol:
        flat = FitResult(0.0, 0.0, 0.0, len(fit_grid))
        return LastPieceEstimate(tuple(theta), total_length, residual, flat, tuple(grid), levels, single_piece=True)
    pts = [(lam, math.log(dist)) for lam, dist in zip(fit_grid, dists) if dist > 0.0]
    fit = linear_fit(pts)
    if fit.slope >= -config.eps_decay:
        raise DecayNotObserved(f"slope {fit.slope:.4g} shows no exponential approach of eta to theta")
    return LastPieceEstimate(tuple(theta), -fit.slope, residual, fit, tuple(grid), levels)


# -- full inversion loop --------------------------------------------------------------


def default_inversion_precision(level: int, stop_fraction: float = 0.05) -> int:
    """Bits for a signature that will be stripped down to a stop_fraction-sized remainder.

    Rounding at the scale of the full path is magnified by up to
    (L / L_remaining)^n at level n once the remainder is dilated to
    lambda L_remaining = const, hence n log2(1/stop_fraction) guard bits.
    """
    return 64 + math.ceil(level * math.log2(1.0 / stop_fraction))


def _merge_antiparallel(segs: list[Segment], tol: float = 1e-6) -> tuple[list[Segment], list[int]]:
    out: list[Segment] = []
    merged = []
    for k, seg in enumerate(segs):
        if out and float(np.dot(out[-1].direction, seg.direction)) < -1.0 + tol:
            prev = out.pop()
            net = prev.length - seg.length
            merged.append(k - 1)
            if abs(net) > 0.0:
                direction = prev.direction if net > 0 else seg.direction
                out.append(Segment(direction, abs(net)))
            continue
        out.append(seg)
    return out, merged


def invert_piecewise_linear(
    x: TensorSeries,
    config: InversionConfig = InversionConfig(),
) -> InversionReport:
    """Peel linear pieces off the end of the path until the remainder is negligible."""
    try:
        L0 = estimate_remaining_length(x, config)
    except SigdevError as exc:
        return InversionReport(None, (), ESTIMATOR_FAILURE, float("nan"), f"total length: {exc}", config=config)
    estimates: list[LastPieceEstimate] = []
    current = x
    terminated = TRIVIAL_REMAINDER
    failure = None
    while True:
        level1 = math.sqrt(sum(float(c) ** 2 for c in current.coeffs[1]))
        if level1 < config.stop_abs:
            break
        try:
            if not estimates:
                remaining = L0
            elif config.remaining_length == "bookkeeping":
                remaining = L0 - sum(e.l_hat for e in estimates)
            else:
                remaining = estimate_remaining_length(current, config)
        except SigdevError as exc:
            terminated, failure = ESTIMATOR_FAILURE, f"remaining length: {exc}"
            break
        if remaining < config.stop_fraction * L0:
            break
        if len(estimates) >= config.max_pieces:
            terminated = MAX_PIECES
            break
        try:
            est = estimate_last_piece(current, config, total_length=remaining)
        except SigdevError as exc:
            terminated, failure = ESTIMATOR_FAILURE, f"piece {len(estimates) + 1}: {exc}"
            break
        estimates.append(est)
        current = strip_last_segment(current, est.theta_hat, est.l_hat)
        if est.single_piece:
            break

    segs = [Segment(e.theta_hat, e.l_hat) for e in reversed(estimates)]
    merges: list[int] = []
    if config.merge_antiparallel:
        segs, merges = _merge_antiparallel(segs)
    recovered = PiecewisePath(x.dimension, tuple(segs)).merged() if segs else None
    refined = False
    if config.refine and recovered is not None and terminated != ESTIMATOR_FAILURE:
        recovered = refine_path(x, recovered, config.refine_level)
        refined = True
    return InversionReport(
        recovered, tuple(estimates), terminated, L0, failure, tuple(merges), refined, config
    )


def refine_path(x: TensorSeries, initial: PiecewisePath, level: int = 6) -> PiecewisePath:
    """Least-squares polish of all segments against the low levels of the signature.

    Each level n residual is scaled by n! / L^n so every level contributes
    comparably.  Runs in float64 with scipy's trust-region solver.
    """
    from scipy.optimize import least_squares

    d = x.dimension
    level = min(level, x.level)
    target = [np.array([float(c) for c in x.coeffs[n]]) for n in range(1, level + 1)]
    L = initial.total_length
    weights = [math.factorial(n) / L**n for n in range(1, level + 1)]

    def unpack(v):
        disp = v.reshape(-1, d)
        return PiecewisePath.from_displacements(disp)

    def residuals(v):
        try:
            sig = signature_of_path(unpack(v), level)
        except SigdevError:
            return np.full(sum(t.size for t in target), 1e6)
        return np.concatenate([w * (sig.coeffs[n] - t) for n, (w, t) in enumerate(zip(weights, target), start=1)])

    v0 = initial.displacements.ravel()
    sol = least_squares(residuals, v0, method="trf", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=200 * v0.size)
    return unpack(sol.x).merged()


# -- derivative expansion ----------------------------------------------------------------


@dataclass(frozen=True)
class DerivativeExpansion:
    """eta_lambda(1) ~ A_0 + A_1/lambda + ... + A_k/lambda^k, with A_0 = theta(1)."""

    A: tuple[np.ndarray, ...]

    def evaluate(self, lam: float) -> np.ndarray:
        return sum(a / lam**j for j, a in enumerate(self.A))


class _Jet:
    """Truncated Taylor expansion sum_j c_j (t - 1)^j of an array-valued function."""

    def __init__(self, coeffs: np.ndarray):
        self.c = coeffs  # shape (m, ...)

    @property
    def order(self) -> int:
        return self.c.shape[0]

    def derivative(self) -> _Jet:
        m = self.order
        k = np.arange(1, m).reshape((-1,) + (1,) * (self.c.ndim - 1))
        return _Jet(self.c[1:] * k)

    def truncate(self, m: int) -> _Jet:
        return _Jet(self.c[:m])

    def __add__(self, other: _Jet) -> _Jet:
        m = min(self.order, other.order)
        return _Jet(self.c[:m] + other.c[:m])

    def __neg__(self) -> _Jet:
        return _Jet(-self.c)

    def contract(self, other: _Jet, subscripts: str) -> _Jet:
        """Cauchy product with an einsum contraction applied to each coefficient pair."""
        m = min(self.order, other.order)
        out = []
        for n in range(m):
            out.append(sum(np.einsum(subscripts, self.c[j], other.c[n - j]) for j in range(n + 1)))
        return _Jet(np.array(out))


def derivative_expansion(theta_derivs: Sequence[Sequence[float]], k: int | None = None) -> DerivativeExpansion:
    """A_0..A_k at t = 1 from theta(1), theta'(1), ..., theta^{(k)}(1).

    A_0 = theta, A_1 = -P^{-1} theta',
    A_{n+1} = -P^{-1} (A_n' + sum_{j=1}^{n} A_j (theta . A_{n+1-j})),
    with P^{-1} = I - theta theta^T / 2.  Every A_n is carried as a Taylor jet
    in t so that A_n' is available; each derivative costs one order, so k
    derivatives of theta support exactly A_0..A_k.
    """
    derivs = np.array([np.asarray(v, dtype=float) for v in theta_derivs])
    if derivs.ndim != 2 or derivs.shape[0] == 0:
        raise InsufficientJet("need at least theta(1)")
    avail = derivs.shape[0] - 1
    if k is None:
        k = avail
    if k > avail:
        raise InsufficientJet(f"A_{k} needs {k} derivatives of theta, got {avail}")
    if abs(np.linalg.norm(derivs[0]) - 1.0) > 1e-10:
        raise ValueError("theta(1) must be a unit vector")
    d = derivs.shape[1]
    fact = np.array([math.factorial(j) for j in range(avail + 1)], dtype=float)
    theta = _Jet(derivs / fact[:, None])
    outer = theta.contract(theta, "i,j->ij")
    eye = np.zeros((outer.order, d, d))
    eye[0] = np.eye(d)
    p_inv = _Jet(eye + (-0.5) * outer.c)

    A = [theta, -p_inv.contract(theta.derivative(), "ij,j->i")]
    for n in range(1, k):
        acc = A[n].derivative()
        for j in range(1, n + 1):
            dot = theta.contract(A[n + 1 - j], "i,i->")
            acc = acc + A[j].contract(dot, "i,->i")
        A.append(-p_inv.contract(acc, "ij,j->i"))
    return DerivativeExpansion(tuple(a.c[0].copy() for a in A[: k + 1]))


def recover_endpoint_jet(
    provider: Provider,
    k: int,
    lambda_grid: Sequence[float],
    max_condition: float = 1e10,
) -> DerivativeExpansion:
    """Observed A_0..A_k from samples of eta_lambda(1), by least squares in powers of 1/lambda."""
    grid = sorted(float(v) for v in lambda_grid)
    if k == 0:
        return DerivativeExpansion((provider(grid[-1]).eta_float,))
    if len(grid) < k + 2:
        raise IllConditionedFit(f"{len(grid)} lambda values cannot determine {k + 1} coefficients with a residual")
    etas = np.array([provider(lam).eta_float for lam in grid])
    V = np.array([[lam ** (-j) for j in range(k + 1)] for lam in grid])
    # column scaling keeps the condition number about the shape of the grid, not its units
    scale = np.linalg.norm(V, axis=0)
    Vs = V / scale
    cond = np.linalg.cond(Vs)
    if not np.isfinite(cond) or cond > max_condition:
        raise IllConditionedFit(f"Vandermonde condition number {cond:.3g} exceeds {max_condition:g}")
    coef, *_ = np.linalg.lstsq(Vs, etas, rcond=None)
    coef = coef / scale[:, None]
    return DerivativeExpansion(tuple(coef[j] for j in range(k + 1)))


def axis_path_to_dict(a: AxisPath) -> dict:
    return {"letters": list(a.letters), "r": list(a.displacements)}
