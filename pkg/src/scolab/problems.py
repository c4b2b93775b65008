"""The three convex-Lipschitz-bounded constructions and their datasets.

* ``TightnessProblem``: linear loss ``-L <w, z>`` with ``z = +-z0/R``.
* ``AmirProblem``: ``sum_i z_i w_i^2 + lam <w, z> + max(max_i w_i, 0)`` on
  the unit ball with ``z ~ Ber(1/2)^d``.
* ``CoordinateProblem``: linear loss ``-<w, e_j>`` with ``j`` uniform.

Datasets are immutable. Amir datasets are packed bit matrices (row-major,
most significant bit first, rows padded to whole bytes), coordinate
datasets are index vectors and tightness datasets are sign vectors.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import stats

from .errors import InvalidArgument

# problem definitions ------------------------------------------------------


@dataclass(frozen=True)
class TightnessProblem:
    """Linear loss ``f(w, z) = -L <w, z>`` over the radius-``R`` ball.

    Data points are ``z = eps * z0 / R`` with Rademacher ``eps``, and the
    anchor is ``z0 = R e_1``.
    """

    L: float = 1.0
    R: float = 1.0
    d: int = 2

    def __post_init__(self):
        if not (self.L > 0 and self.R > 0):
            raise InvalidArgument("L and R must be positive")
        if self.d < 1:
            raise InvalidArgument("d must be positive")

    @property
    def z0(self) -> np.ndarray:
        z = np.zeros(self.d)
        z[0] = self.R
        return z

    @property
    def point(self) -> np.ndarray:
        """The unit data point ``z0 / R``."""
        return self.z0 / self.R


def default_T(n: int, alpha: float = 2.0) -> int:
    return int(round(2 * n ** alpha))


def default_eta(n: int, alpha: float = 2.0) -> float:
    """Step size ``sqrt(n) / (sqrt(5) n^alpha)``; ``1/(n sqrt(5n))`` at alpha 2."""
    return math.sqrt(n) / (math.sqrt(5.0) * n ** alpha)


def default_d(n: int, T: int) -> int:
    """``ceil(0.75 T 2^n)`` computed in integers."""
    return -((-3 * T * (1 << n)) // 4)


@dataclass(frozen=True)
class AmirProblem:
    """The unit-ball construction with bad coordinates.

    Use :meth:`build` to get the default schedule ``T = 2 n^alpha``,
    ``d = ceil(0.75 T 2^n)`` and ``lam = 1/(n sqrt d)``.
    """

    n: int
    T: int
    d: int
    lam: float
    alpha: float = 2.0
    R: float = field(default=1.0, init=False)

    def __post_init__(self):
        if self.n < 1 or self.T < 1 or self.d < 1:
            raise InvalidArgument("n, T, d must be positive")
        if self.lam <= 0:
            raise InvalidArgument("lam must be positive")
        if self.lam > (1 + 1e-12) / (self.n * math.sqrt(self.d)):
            raise InvalidArgument("lam must not exceed 1/(n sqrt d)")

    @classmethod
    def build(cls, n: int, alpha: float = 2.0, d: int | None = None,
              lam: float | None = None, T: int | None = None) -> "AmirProblem":
        T = default_T(n, alpha) if T is None else int(T)
        d = default_d(n, T) if d is None else int(d)
        lam = 1.0 / (n * math.sqrt(d)) if lam is None else float(lam)
        return cls(n=n, T=T, d=d, lam=lam, alpha=alpha)

    @property
    def eta(self) -> float:
        return default_eta(self.n, self.alpha)

    @property
    def L_effective(self) -> float:
        return 3.0 + self.lam * math.sqrt(self.d)

    @property
    def level_pmf(self) -> np.ndarray:
        """Law of a column sum: Binomial(n, 1/2) on ``0..n``."""
        return stats.binom.pmf(np.arange(self.n + 1), self.n, 0.5)


@dataclass(frozen=True)
class CoordinateProblem:
    """Linear loss ``f(w, e_j) = -w_j`` with ``j`` uniform on ``0..d-1``."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise InvalidArgument("d must be positive")

    @classmethod
    def build(cls, n: int) -> "CoordinateProblem":
        """Birthday-regime dimension ``d = 2 n^2``."""
        return cls(d=2 * n * n)


# datasets -----------------------------------------------------------------


def _pad_mask(d: int) -> int:
    pad = (-d) % 8
    return (0xFF << pad) & 0xFF


@dataclass(frozen=True, eq=False)
class BitDataset:
    """``n x d`` binary sample stored as packed rows (MSB first)."""

    packed: np.ndarray
    d: int

    def __post_init__(self):
        p = np.ascontiguousarray(self.packed, dtype=np.uint8)
        if p.ndim != 2 or p.shape[1] != (self.d + 7) // 8:
            raise InvalidArgument("packed array has the wrong shape for d")
        if p.shape[0] and np.any(p[:, -1] & ~np.uint8(_pad_mask(self.d))):
            raise InvalidArgument("padding bits must be zero")
        p.setflags(write=False)
        object.__setattr__(self, "packed", p)

    @classmethod
    def from_dense(cls, bits) -> "BitDataset":
        bits = np.asarray(bits)
        if bits.ndim != 2 or not np.all((bits == 0) | (bits == 1)):
            raise InvalidArgument("expected a 2-d 0/1 matrix")
        return cls(np.packbits(bits.astype(np.uint8), axis=1), bits.shape[1])

    @property
    def n(self) -> int:
        return self.packed.shape[0]

    def dense(self) -> np.ndarray:
        return np.unpackbits(self.packed, axis=1, count=self.d)

    @cached_property
    def column_counts(self) -> np.ndarray:
        """Number of ones per column, ``n * mu_hat``."""
        return self.dense().sum(axis=0, dtype=np.int64)

    def __eq__(self, other):
        return (isinstance(other, BitDataset) and self.d == other.d
                and np.array_equal(self.packed, other.packed))


@dataclass(frozen=True, eq=False)
class IndexDataset:
    """Coordinate-problem sample stored as indices into ``0..d-1``."""

    indices: np.ndarray
    d: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).copy()
        if idx.ndim != 1 or np.any(idx < 0) or np.any(idx >= self.d):
            raise InvalidArgument("indices must be a vector in [0, d)")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def n(self) -> int:
        return self.indices.size

    def __eq__(self, other):
        return (isinstance(other, IndexDataset) and self.d == other.d
                and np.array_equal(self.indices, other.indices))


@dataclass(frozen=True, eq=False)
class SignDataset:
    """Tightness-problem sample stored as the signs ``eps_i``."""

    eps: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.eps, dtype=np.int8).copy()
        if e.ndim != 1 or not np.all((e == 1) | (e == -1)):
            raise InvalidArgument("eps must be a vector of +-1")
        e.setflags(write=False)
        object.__setattr__(self, "eps", e)

    @property
    def n(self) -> int:
        return self.eps.size

    def __eq__(self, other):
        return isinstance(other, SignDataset) and np.array_equal(self.eps, other.eps)


# samplers -----------------------------------------------------------------


def sample_amir_dataset(problem: AmirProblem, rng: np.random.Generator,
                        n: int | None = None) -> BitDataset:
    """Draw ``n`` rows of Ber(1/2)^d, one random byte per 8 bits."""
    n = problem.n if n is None else n
    nbytes = (problem.d + 7) // 8
    packed = rng.integers(0, 256, size=(n, nbytes), dtype=np.uint8)
    if n:
        packed[:, -1] &= np.uint8(_pad_mask(problem.d))
    return BitDataset(packed, problem.d)


def sample_level_histogram(problem: AmirProblem, rng: np.random.Generator) -> np.ndarray:
    """Sample the histogram of column sums directly.

    Columns are i.i.d., so the counts of columns with ``k`` ones are
    Multinomial(d, Binomial(n, 1/2) pmf). ``hist[0]`` is ``|B|``.
    """
    return rng.multinomial(problem.d, problem.level_pmf).astype(np.int64)


def coordinate_sampler(problem: CoordinateProblem, rng: np.random.Generator, size=None):
    """Uniform coordinate index (or an array of them)."""
    return rng.integers(0, problem.d, size=size)


def sample_coordinate_dataset(problem: CoordinateProblem, n: int,
                              rng: np.random.Generator) -> IndexDataset:
    return IndexDataset(coordinate_sampler(problem, rng, n), problem.d)


def sample_tightness_dataset(n: int, rng: np.random.Generator) -> SignDataset:
    return SignDataset(np.where(rng.random(n) < 0.5, 1, -1))


# derived statistics -------------------------------------------------------


def empirical_mean(dataset) -> np.ndarray:
    """Column means ``mu_hat``. For index data this is the index histogram / n."""
    if isinstance(dataset, BitDataset):
        return dataset.column_counts / dataset.n
    if isinstance(dataset, IndexDataset):
        return np.bincount(dataset.indices, minlength=dataset.d) / dataset.n
    if isinstance(dataset, SignDataset):
        return np.array([dataset.eps.mean()])
    raise InvalidArgument(f"unsupported dataset {type(dataset).__name__}")


def bad_coordinates(dataset: BitDataset) -> tuple[np.ndarray, int]:
    """Indicator of all-zero columns and its weight ``|B|``.

    The scan ORs packed rows byte-wise, so it costs ``n d / 8`` byte ops.
    """
    if not isinstance(dataset, BitDataset):
        raise InvalidArgument("bad coordinates are defined for bit datasets")
    if dataset.n == 0:
        bad = np.ones(dataset.d, dtype=bool)
    else:
        acc = np.bitwise_or.reduce(dataset.packed, axis=0)
        bad = np.unpackbits(~acc, count=dataset.d).astype(bool)
    return bad, int(bad.sum())


def level_histogram(dataset: BitDataset) -> np.ndarray:
    """Counts of columns with ``k = 0..n`` ones."""
    return np.bincount(dataset.column_counts, minlength=dataset.n + 1).astype(np.int64)


def bad_event_holds(bad_count: int, T: int) -> bool:
    """The event ``T/2 <= |B| <= T``."""
    return T / 2 <= bad_count <= T


# losses and oracles -------------------------------------------------------


def _as_vec(w, d: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (d,):
        raise InvalidArgument(f"expected a vector of length {d}, got shape {w.shape}")
    return w


def tightness_loss(problem: TightnessProblem, w, z) -> float:
    w = _as_vec(w, problem.d)
    z = _as_vec(z, problem.d)
    u = problem.point
    if not (np.allclose(z, u, atol=1e-12, rtol=0) or np.allclose(z, -u, atol=1e-12, rtol=0)):
        raise InvalidArgument("z must be +z0/R or -z0/R")
    return float(-problem.L * (w @ z))


def tightness_point(problem: TightnessProblem, eps: int) -> np.ndarray:
    return eps * problem.point


def tightness_erm(problem: TightnessProblem, dataset: SignDataset) -> np.ndarray:
    """Empirical risk minimiser: ``z0`` if ``sum eps >= 0`` else ``-z0``."""
    return problem.z0 if int(dataset.eps.sum()) >= 0 else -problem.z0


def tightness_empirical_risk(problem: TightnessProblem, w, dataset: SignDataset) -> float:
    w = _as_vec(w, problem.d)
    return float(-problem.L * (w @ problem.point) * dataset.eps.mean())


def tightness_population_risk(problem: TightnessProblem, w) -> float:
    """``E[eps] = 0`` so the population risk vanishes identically."""
    _as_vec(w, problem.d)
    return 0.0


def _max_term(w: np.ndarray) -> float:
    return max(float(w.max()), 0.0) if w.size else 0.0


def amir_loss(problem: AmirProblem, w, z) -> float:
    w = _as_vec(w, problem.d)
    z = _as_vec(z, problem.d)
    return float(z @ (w * w) + problem.lam * (w @ z) + _max_term(w))


def amir_empirical_risk(problem: AmirProblem, w, mu_hat) -> float:
    """``sum mu_i w_i^2 + lam <mu, w> + max(max w, 0)``."""
    w = _as_vec(w, problem.d)
    mu = _as_vec(mu_hat, problem.d)
    return float(mu @ (w * w) + problem.lam * (mu @ w) + _max_term(w))


def amir_population_risk(problem: AmirProblem, w) -> float:
    w = _as_vec(w, problem.d)
    return float(0.5 * (w @ w) + 0.5 * problem.lam * w.sum() + _max_term(w))


def amir_subgrad(problem: AmirProblem, w, empirical_mean) -> np.ndarray:
    """Subgradient of the empirical risk at ``w``.

    The max term contributes ``e_j`` with ``j`` the smallest index
    attaining ``max_i w_i`` whenever that maximum is ``>= 0`` and
    ``w != 0``; otherwise it contributes nothing.
    """
    w = _as_vec(w, problem.d)
    mu = _as_vec(empirical_mean, problem.d)
    g = 2.0 * mu * w + problem.lam * mu
    if np.any(w != 0):
        j = int(np.argmax(w))  # first occurrence, i.e. minimum index
        if w[j] >= 0:
            g[j] += 1.0
    return g


def amir_min_empirical_risk(problem: AmirProblem, mu_hat) -> float:
    """Exact minimum of the empirical risk over the unit ball.

    Coordinates with ``mu_i > 0`` sit at ``-lam/2`` (inside the ball since
    ``lam sqrt d <= 1``), giving ``-(lam^2/4) sum mu_i``.
    """
    mu = np.asarray(mu_hat, dtype=float)
    return -0.25 * problem.lam ** 2 * float(mu.sum())


def coordinate_loss(problem: CoordinateProblem, w, z: int) -> float:
    w = _as_vec(w, problem.d)
    if not 0 <= int(z) < problem.d:
        raise InvalidArgument("z must be a coordinate index")
    return float(-w[int(z)])


def coordinate_empirical_risk(w, mu_hat) -> float:
    return float(-(np.asarray(w) @ np.asarray(mu_hat)))


def coordinate_population_risk(problem: CoordinateProblem, w) -> float:
    return float(-_as_vec(w, problem.d).sum() / problem.d)


# serialization ------------------------------------------------------------
#
# Header, 8 bytes little endian: 2-byte magic, uint16 n, uint32 d.
#   b"SB"  bit matrix; payload n rows of ceil(d/8) bytes, MSB first
#   b"SI"  coordinate indices; payload n uint32
#   b"SS"  signs; payload is an n x 1 bit matrix (1 for +1), d = 1

_HEADER = struct.Struct("<2sHI")


def dumps_dataset(dataset) -> bytes:
    if isinstance(dataset, BitDataset):
        head = _HEADER.pack(b"SB", dataset.n, dataset.d)
        return head + dataset.packed.tobytes()
    if isinstance(dataset, IndexDataset):
        head = _HEADER.pack(b"SI", dataset.n, dataset.d)
        return head + dataset.indices.astype("<u4").tobytes()
    if isinstance(dataset, SignDataset):
        head = _HEADER.pack(b"SS", dataset.n, 1)
        bits = (dataset.eps > 0).astype(np.uint8)[:, None]
        return head + np.packbits(bits, axis=1).tobytes()
    raise InvalidArgument(f"unsupported dataset {type(dataset).__name__}")


def loads_dataset(blob: bytes):
    if len(blob) < _HEADER.size:
        raise InvalidArgument("blob shorter than header")
    magic, n, d = _HEADER.unpack_from(blob)
    body = np.frombuffer(blob, dtype=np.uint8, offset=_HEADER.size)
    if magic == b"SB":
        nbytes = (d + 7) // 8
        if body.size != n * nbytes:
            raise InvalidArgument("payload size does not match header")
        return BitDataset(body.reshape(n, nbytes).copy(), d)
    if magic == b"SI":
        if body.size != 4 * n:
            raise InvalidArgument("payload size does not match header")
        return IndexDataset(np.frombuffer(body.tobytes(), dtype="<u4").astype(np.int64), d)
    if magic == b"SS":
        if body.size != n:
            raise InvalidArgument("payload size does not match header")
        bits = np.unpackbits(body.reshape(n, 1), axis=1, count=1)[:, 0]
        return SignDataset(np.where(bits == 1, 1, -1))
    raise InvalidArgument(f"unknown magic {magic!r}")
