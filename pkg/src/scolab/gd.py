"""Projected subgradient descent and its fast paths.

The dense engine runs ``W_{t+1} = proj(W_t - eta g_t)`` from ``W_0 = 0``.
On the Amir problem, coordinates sharing an empirical mean ``k/n`` move
together, so the iterate is fully described by one value per level plus
the number of bad coordinates already pushed to ``-eta``. The compressed
simulator and the closed form both work on that representation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, EventPreconditionError, FallbackRequired, InvalidArgument
from .numerics import project_ball
from .problems import (
    AmirProblem,
    BitDataset,
    CoordinateProblem,
    IndexDataset,
    SignDataset,
    TightnessProblem,
    amir_empirical_risk,
    amir_subgrad,
    bad_event_holds,
    coordinate_empirical_risk,
    default_eta,
    default_T,
    empirical_mean,
    sample_level_histogram,
    tightness_empirical_risk,
)

DENSE_BUDGET = 1 << 31


@dataclass(frozen=True)
class GdConfig:
    """Constant step size ``eta`` and iteration count ``T``; start at 0."""

    eta: float
    T: int

    def __post_init__(self):
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise InvalidArgument("eta must be a positive finite number")
        if int(self.T) != self.T or self.T < 1:
            raise InvalidArgument("T must be a positive integer")

    @classmethod
    def default(cls, n: int, alpha: float = 2.0) -> "GdConfig":
        """``T = 2 n^alpha`` and ``eta = sqrt(n) / (sqrt(5) n^alpha)``."""
        return cls(eta=default_eta(n, alpha), T=default_T(n, alpha))


@dataclass(frozen=True)
class CompressedIterate:
    """Level-bucketed Amir iterate.

    ``counts[k]`` is the number of coordinates with ``mu_hat = k/n``, so
    ``counts[0]`` is ``|B|``. ``values[k]`` (``k >= 1``) is the common value
    of those coordinates. Of the bad coordinates, the first
    ``bad_activated`` in index order sit at ``-eta`` and the rest at 0.
    """

    n: int
    eta: float
    counts: np.ndarray
    values: np.ndarray
    bad_activated: int
    step: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        values = np.asarray(self.values, dtype=float).copy()
        if counts.shape != (self.n + 1,) or values.shape != (self.n + 1,):
            raise InvalidArgument("counts and values need length n + 1")
        values[0] = 0.0
        if not 0 <= self.bad_activated <= counts[0]:
            raise InvalidArgument("bad_activated out of range")
        counts.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return int(self.counts.sum())

    @property
    def bad_total(self) -> int:
        return int(self.counts[0])

    @property
    def bucket_values(self) -> dict[int, float]:
        return {k: float(self.values[k]) for k in range(1, self.n + 1)}

    @property
    def bucket_counts(self) -> dict[int, int]:
        return {k: int(self.counts[k]) for k in range(1, self.n + 1)}

    def norm_sq(self) -> float:
        good = float(self.counts[1:] @ (self.values[1:] ** 2))
        return good + self.bad_activated * self.eta ** 2

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def coordinate_sum(self) -> float:
        return float(self.counts[1:] @ self.values[1:]) - self.bad_activated * self.eta

    def max_value(self) -> float:
        """Largest coordinate; 0 when some bad coordinate is still at 0."""
        cands = [float(v) for k, v in enumerate(self.values) if k and self.counts[k]]
        if self.bad_activated:
            cands.append(-self.eta)
        if self.bad_total > self.bad_activated:
            cands.append(0.0)
        return max(cands) if cands else 0.0

    def groups(self) -> tuple[np.ndarray, np.ndarray]:
        """``(values, sizes)`` for every homogeneous group of coordinates.

        Groups are the good levels ``k = 1..n``, the activated bad
        coordinates and the bad coordinates still at 0, in that order.
        """
        vals = np.concatenate([self.values[1:], [-self.eta, 0.0]])
        sizes = np.concatenate([self.counts[1:],
                                [self.bad_activated, self.bad_total - self.bad_activated]])
        return vals, sizes.astype(np.int64)

    def expand(self, column_counts) -> np.ndarray:
        """Dense vector for a concrete dataset with these column counts."""
        cc = np.asarray(column_counts, dtype=np.int64)
        if np.any(np.bincount(cc, minlength=self.n + 1) != self.counts):
            raise InvalidArgument("column counts do not match the bucket counts")
        w = self.values[cc]
        bad_idx = np.flatnonzero(cc == 0)
        w[bad_idx[: self.bad_activated]] = -self.eta
        return w

    def empirical_risk(self, lam: float) -> float:
        k = np.arange(self.n + 1)
        mu = k / self.n
        quad = float(self.counts @ (mu * self.values ** 2))
        lin = lam * float(self.counts @ (mu * self.values))
        return quad + lin + max(self.max_value(), 0.0)

    def population_risk(self, lam: float) -> float:
        return 0.5 * self.norm_sq() + 0.5 * lam * self.coordinate_sum() + max(self.max_value(), 0.0)


@dataclass
class Trajectory:
    """Final iterate of a GD run, optional per-step norms, and ``F_hat(W_T)``."""

    final: np.ndarray | CompressedIterate
    empirical_risk: float
    norms: np.ndarray | None = field(default=None)

    def norm(self) -> float:
        if isinstance(self.final, CompressedIterate):
            return self.final.norm()
        return float(np.linalg.norm(self.final))


def _empirical_oracle(problem, dataset):
    """Return ``(subgradient, risk)`` callables for the empirical risk."""
    if isinstance(problem, AmirProblem) and isinstance(dataset, BitDataset):
        mu = empirical_mean(dataset)
        return (lambda w: amir_subgrad(problem, w, mu),
                lambda w: amir_empirical_risk(problem, w, mu))
    if isinstance(problem, CoordinateProblem) and isinstance(dataset, IndexDataset):
        mu = empirical_mean(dataset)
        return (lambda w: -mu, lambda w: coordinate_empirical_risk(w, mu))
    if isinstance(problem, TightnessProblem) and isinstance(dataset, SignDataset):
        g = -problem.L * float(dataset.eps.mean()) * problem.point
        return (lambda w: g, lambda w: tightness_empirical_risk(problem, w, dataset))
    raise InvalidArgument("problem and dataset types do not match")


def _dimension(problem) -> int:
    return problem.d


def run_gd_dense(problem, dataset, config: GdConfig, budget: int = DENSE_BUDGET,
                 record_norms: bool = False) -> Trajectory:
    """Projected subgradient descent on the empirical risk, full dimension.

    Raises
    ------
    BudgetExceeded
        If ``d * T`` exceeds ``budget``; use :func:`run_gd_compressed`.
    """
    d = _dimension(problem)
    if d * config.T > budget:
        raise BudgetExceeded(f"d*T = {d * config.T} exceeds budget {budget}; "
                             "use the compressed path")
    radius = getattr(problem, "R", 1.0)
    subgrad, risk = _empirical_oracle(problem, dataset)
    w = np.zeros(d)
    norms = np.empty(config.T) if record_norms else None
    for t in range(config.T):
        w = project_ball(w - config.eta * subgrad(w), radius)
        if norms is not None:
            norms[t] = np.linalg.norm(w)
    return Trajectory(final=w, empirical_risk=risk(w), norms=norms)


def run_gd_compressed(level_counts, config: GdConfig, lam: float) -> CompressedIterate:
    """Amir-problem GD on the level-bucket representation.

    Exact as long as no projection is triggered and the good coordinates
    stay negative after the first step; otherwise ``FallbackRequired``.

    Parameters
    ----------
    level_counts : array_like of int, length ``n + 1``
        Number of columns with ``k`` ones; entry 0 is ``|B|``.
    config : GdConfig
    lam : float
        Linear-penalty coefficient.
    """
    counts = np.asarray(level_counts, dtype=np.int64)
    n = counts.size - 1
    if n < 1:
        raise InvalidArgument("need at least one sample")
    eta = config.eta
    mu = np.arange(n + 1) / n
    good = (counts > 0) & (mu > 0)
    values = np.zeros(n + 1)
    bad_total = int(counts[0])
    active = 0
    for t in range(config.T):
        is_zero = active == 0 and not np.any(values[good] != 0)
        if not is_zero and active < bad_total:
            active += 1  # smallest bad index still at 0 takes the e_j step
        values = values - eta * (2.0 * mu * values + lam * mu)
        values[~good] = 0.0
        if np.any(values[good] >= 0):
            raise FallbackRequired(f"good coordinate became nonnegative at step {t + 1}")
        norm_sq = float(counts[good] @ values[good] ** 2) + active * eta ** 2
        if norm_sq > 1.0:
            raise FallbackRequired(f"projection needed at step {t + 1}")
    return CompressedIterate(n=n, eta=eta, counts=counts, values=values,
                             bad_activated=active, step=config.T)


def amir_closed_form(level_counts, eta: float, lam: float, T: int,
                     require_event: bool = True) -> CompressedIterate:
    """Closed-form iterate ``W_T`` of GD on the Amir problem.

    Good level ``k``: ``(lam/2)(-1 + (1 - 2 eta k/n)^T)``. The first
    ``min(|B|, T - 1)`` bad coordinates are at ``-eta``.

    Raises
    ------
    EventPreconditionError
        When ``require_event`` and ``T/2 <= |B| <= T`` fails.
    """
    counts = np.asarray(level_counts, dtype=np.int64)
    n = counts.size - 1
    bad = int(counts[0])
    if require_event and not bad_event_holds(bad, T):
        raise EventPreconditionError(f"|B| = {bad} outside [{T / 2}, {T}]")
    k = np.arange(n + 1)
    values = 0.5 * lam * (-1.0 + (1.0 - 2.0 * eta * k / n) ** T)
    values[counts == 0] = 0.0
    return CompressedIterate(n=n, eta=eta, counts=counts, values=values,
                             bad_activated=min(bad, max(T - 1, 0)), step=T)


def coordinate_closed_form(mu_hat, eta: float, t: int) -> np.ndarray:
    """GD on the linear coordinate loss: ``eta t mu`` until it hits the sphere."""
    mu = np.asarray(mu_hat, dtype=float)
    nrm = float(np.linalg.norm(mu))
    if eta * t * nrm <= 1.0:
        return eta * t * mu
    return mu / nrm


@dataclass(frozen=True)
class NormCheck:
    passed: bool
    norm: float
    lower: float
    upper: float


def gd_norm_bounds_check(iterate, n: int) -> NormCheck:
    """Is ``1/(2 sqrt n) <= ||W_T|| <= 1/sqrt n``?"""
    if isinstance(iterate, CompressedIterate):
        nrm = iterate.norm()
    elif isinstance(iterate, Trajectory):
        nrm = iterate.norm()
    else:
        nrm = float(np.linalg.norm(np.asarray(iterate, dtype=float)))
    lo, hi = 0.5 / math.sqrt(n), 1.0 / math.sqrt(n)
    return NormCheck(passed=lo <= nrm <= hi, norm=nrm, lower=lo, upper=hi)


def sample_event_histogram(problem: AmirProblem, rng: np.random.Generator,
                           cap: int = 50) -> tuple[np.ndarray, int]:
    """Draw level histograms until the bad-coordinate event holds.

    Returns the histogram and the number of attempts used.
    """
    for attempt in range(1, cap + 1):
        hist = sample_level_histogram(problem, rng)
        if bad_event_holds(int(hist[0]), problem.T):
            return hist, attempt
    raise EventPreconditionError(f"event not reached within {cap} draws")


def summarize_dense(w, column_counts, n: int, eta: float) -> tuple[CompressedIterate, float]:
    """Bucket a dense Amir iterate by level.

    Returns the compressed view and the largest within-bucket spread,
    which is zero when the symmetry argument holds exactly.
    """
    w = np.asarray(w, dtype=float)
    cc = np.asarray(column_counts, dtype=np.int64)
    counts = np.bincount(cc, minlength=n + 1)
    values = np.zeros(n + 1)
    spread = 0.0
    for k in range(1, n + 1):
        sel = w[cc == k]
        if sel.size:
            values[k] = sel[0]
            spread = max(spread, float(sel.max() - sel.min()))
    bad_vals = w[cc == 0]
    active = int(np.sum(np.isclose(bad_vals, -eta, rtol=0, atol=1e-15)))
    rest = bad_vals[~np.isclose(bad_vals, -eta, rtol=0, atol=1e-15)]
    if rest.size:
        spread = max(spread, float(np.abs(rest).max()))
    return CompressedIterate(n=n, eta=eta, counts=counts, values=values,
                             bad_activated=active, step=-1), spread


def trajectory_record(problem: AmirProblem, config: GdConfig,
                      iterate: CompressedIterate) -> dict:
    """JSON-ready summary ``{n, eta, T, d, norm, bad_count, bucket_values}``."""
    return {
        "n": problem.n,
        "eta": config.eta,
        "T": config.T,
        "d": problem.d,
        "norm": iterate.norm(),
        "bad_count": iterate.bad_activated,
        "bucket_values": [float(v) for v in iterate.values[1:]],
    }
