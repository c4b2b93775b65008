"""Numeric and information-theoretic primitives.

All entropies and divergences are in nats. ``0 log 0`` is taken as 0.
Random streams are built on the counter-based Philox generator so a
trial's randomness depends only on ``(master_seed, stream_id)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import InvalidArgument

LOG2 = math.log(2.0)
_MASK64 = (1 << 64) - 1
# exp(x) underflows to zero below this argument in double precision
EXP_UNDERFLOW = -745.0


@dataclass(frozen=True)
class RngStream:
    """A reproducible, independently keyed random stream.

    The Philox key is ``master_seed | (stream_id << 64)``, so streams with
    different ids are distinct counter-based sequences rather than offsets
    of one another.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _MASK64:
                raise InvalidArgument(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        """Return a fresh generator positioned at the start of the stream."""
        key = int(self.master_seed) | (int(self.stream_id) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.master_seed, stream_id)


def exp_safe(x):
    """``exp`` with explicit underflow to zero below -745."""
    x = np.asarray(x, dtype=float)
    out = np.where(x < EXP_UNDERFLOW, 0.0, np.exp(np.maximum(x, EXP_UNDERFLOW)))
    return out[()] if out.ndim == 0 else out


def project_ball(x, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto the centred ball of the given radius.

    Parameters
    ----------
    x : array_like
        Point to project.
    radius : float
        Ball radius, must be positive.

    Returns
    -------
    ndarray
        ``x`` if it lies inside the ball, otherwise ``x * radius / ||x||``.
    """
    if not radius > 0:
        raise InvalidArgument("radius must be positive")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("project_ball received non-finite input")
    nrm = float(np.linalg.norm(x))
    if nrm <= radius:
        return x.copy()
    return x * (radius / nrm)


def gaussian_tail_q(x):
    """Standard Gaussian tail ``Q(x) = P(N(0,1) >= x)``.

    Evaluated as ``erfc(x / sqrt 2) / 2``; scipy's erfc is accurate to
    a few ulps, well inside the 1e-12 target on ``|x| <= 8``.
    """
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return out[()] if np.ndim(out) == 0 else out


def log_gaussian_tail_q(x):
    """``log Q(x)``, stable far into the upper tail."""
    out = special.log_ndtr(-np.asarray(x, dtype=float))
    return out[()] if np.ndim(out) == 0 else out


def log_gaussian_cdf(x):
    """``log(1 - Q(x))``; used for products of many ``1 - Q`` factors."""
    out = special.log_ndtr(np.asarray(x, dtype=float))
    return out[()] if np.ndim(out) == 0 else out


def binary_entropy(p):
    """Binary entropy ``h_b(p)`` in nats."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise InvalidArgument("binary_entropy needs p in [0, 1]")
    out = special.entr(p) + special.entr(1.0 - p)
    return out[()] if out.ndim == 0 else out


def entropy(p) -> float:
    """Shannon entropy of a probability vector, nats."""
    p = np.asarray(p, dtype=float)
    return float(np.sum(special.entr(p)))


def kl_discrete(p, q) -> float:
    """KL divergence ``KL(p || q)`` in nats.

    Returns ``inf`` when ``p`` is not absolutely continuous w.r.t. ``q``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise InvalidArgument("p and q must have the same length")
    if np.any(p < 0) or np.any(q < 0):
        raise InvalidArgument("probability vectors must be nonnegative")
    return float(np.sum(special.rel_entr(p, q)))


def mixture_kl_upper(kl_terms: Sequence[float], weights: Sequence[float]) -> float:
    """Upper bound on ``KL(P || sum_i w_i Q_i)`` from the component KLs.

    Returns ``min_i (kl_terms[i] - log weights[i])``.
    """
    kl = np.asarray(kl_terms, dtype=float)
    w = np.asarray(weights, dtype=float)
    if kl.size == 0 or w.size == 0:
        raise InvalidArgument("mixture_kl_upper needs at least one component")
    if kl.shape != w.shape:
        raise InvalidArgument("kl_terms and weights must have equal length")
    if np.any(w <= 0) or not math.isclose(float(w.sum()), 1.0, rel_tol=0, abs_tol=1e-9):
        raise InvalidArgument("weights must be positive and sum to 1")
    return float(np.min(kl - np.log(w)))


def reverse_markov_lower(mean: float, a: float, m: float, m_tilde: float,
                         prob_geq_m: float) -> float:
    """Reverse-Markov lower bound on ``P(X >= a)`` for ``0 <= X <= m_tilde``.

    ``(E[X] - a - (m_tilde - m) P(X >= m)) / (m - a)``. The raw value is
    returned; it can be negative, and callers clamp only when reporting.
    """
    if not (0 <= a < m <= m_tilde):
        raise InvalidArgument("need 0 <= a < m <= m_tilde")
    if not 0 <= prob_geq_m <= 1:
        raise InvalidArgument("prob_geq_m must be a probability")
    return (mean - a - (m_tilde - m) * prob_geq_m) / (m - a)


def fano_entropy_upper(entropy_nats: float, p_error: float) -> float:
    """Fano upper bound on ``H(X | Y)`` given a decoder with error ``p_error``.

    Both the ``h_b(p) + p H`` and the coarser ``log 2 + p H`` forms are
    valid; the smaller is returned.
    """
    if entropy_nats < 0:
        raise InvalidArgument("entropy must be nonnegative")
    if not 0 <= p_error <= 1:
        raise InvalidArgument("p_error must be a probability")
    tail = p_error * entropy_nats
    return float(min(binary_entropy(p_error) + tail, LOG2 + tail))


def log_prod_one_minus(x) -> float:
    """``log prod_i (1 - x_i)`` accumulated with log1p."""
    x = np.asarray(x, dtype=float)
    if np.any(x > 1):
        raise InvalidArgument("factors must satisfy x <= 1")
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log1p(-x)))


# samplers -----------------------------------------------------------------

_MAX_ELEMS = 1 << 31


def _check_size(*dims) -> None:
    total = 1
    for v in dims:
        if int(v) < 0:
            raise InvalidArgument("sizes must be nonnegative")
        total *= int(v)
    if total > _MAX_ELEMS:
        raise InvalidArgument(f"requested {total} elements, limit is 2**31")


def sample_gaussian_vector(dim: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``N(0, sigma^2 I_dim)``. Size limited to 2**31 entries."""
    _check_size(dim)
    if sigma < 0:
        raise InvalidArgument("sigma must be nonnegative")
    if sigma == 0:
        return np.zeros(dim)
    return sigma * rng.standard_normal(dim)


def sample_bernoulli_matrix(rows: int, cols: int, p: float,
                            rng: np.random.Generator) -> np.ndarray:
    """Draw a ``rows x cols`` matrix of independent Ber(p) bits as uint8."""
    _check_size(rows, cols)
    if not 0 <= p <= 1:
        raise InvalidArgument("p must be in [0, 1]")
    return (rng.random((rows, cols)) < p).astype(np.uint8)


def sample_binomial(count: int, p: float, rng: np.random.Generator, size=None):
    """Binomial(count, p) draw(s). ``count`` must fit in int64."""
    if count < 0 or count > np.iinfo(np.int64).max:
        raise InvalidArgument("count out of range")
    if not 0 <= p <= 1:
        raise InvalidArgument("p must be in [0, 1]")
    return rng.binomial(count, p, size=size)


# summary statistics -------------------------------------------------------

def mean_and_se(values) -> tuple[float, float]:
    """Sample mean and its standard error ``std(ddof=1)/sqrt(n)``."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise InvalidArgument("empty sample")
    if v.size == 1:
        return float(v[0]), 0.0
    return float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(v.size))


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    """Wilson score interval for a binomial proportion.

    Returns ``(low, high)``. The default ``z`` gives 95% coverage.
    """
    if trials <= 0:
        raise InvalidArgument("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])
