"""Supersamples, Fano decoders and information computations.

Unit conventions: functions ending in ``_bits`` return bits, everything
else returns nats unless its docstring says otherwise. The Amir lower
bounds follow the bit-valued formulas in which ``H(U) = n``.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .errors import InvalidArgument
from .gd import CompressedIterate, GdConfig, coordinate_closed_form, run_gd_compressed
from .numerics import (
    LOG2,
    RngStream,
    binary_entropy,
    exp_safe,
    fano_entropy_upper,
    gaussian_tail_q,
    log_prod_one_minus,
    mean_and_se,
    wilson_interval,
)
from .problems import AmirProblem, bad_event_holds, sample_level_histogram

# supersamples -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Supersample:
    """``2 x n`` i.i.d. points and the selection mask ``U``.

    ``grid[v, i]`` is the point in row ``v`` of column ``i``; the training
    set is ``grid[U_i, i]``.
    """

    grid: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.grid.shape[0] != 2 or self.grid.shape[1] != self.mask.size:
            raise InvalidArgument("grid must have shape (2, n, ...) matching the mask")
        if not np.all((self.mask == 0) | (self.mask == 1)):
            raise InvalidArgument("mask must be binary")

    @property
    def n(self) -> int:
        return self.mask.size

    def training(self) -> np.ndarray:
        return self.grid[self.mask, np.arange(self.n)]

    def ghost(self) -> np.ndarray:
        """The points not selected by the mask."""
        return self.grid[1 - self.mask, np.arange(self.n)]


def make_supersample(n: int, sampler: Callable, rng: np.random.Generator) -> Supersample:
    """``sampler(rng, size)`` must return ``size`` i.i.d. points along axis 0."""
    pts = np.asarray(sampler(rng, 2 * n))
    grid = pts.reshape((2, n) + pts.shape[1:])
    mask = rng.integers(0, 2, size=n)
    return Supersample(grid=grid, mask=mask)


def loss_table(loss: Callable, w, supersample: Supersample) -> np.ndarray:
    """``F[v, i] = loss(w, grid[v, i])``."""
    F = np.empty((2, supersample.n))
    for v in range(2):
        for i in range(supersample.n):
            F[v, i] = loss(w, supersample.grid[v, i])
    return F


# the threshold decoder ----------------------------------------------------


def decoder_threshold(eta: float, lam: float, T: int) -> float:
    """``h = (eta + eta lam T) / 2``, halfway between the two value ranges."""
    return 0.5 * (eta + eta * lam * T)


def decoder_psi(w, h: float) -> np.ndarray:
    """Bit ``i`` is set iff ``|w_i| >= h``."""
    if not h > 0:
        raise InvalidArgument("threshold must be positive")
    return (np.abs(np.asarray(w, dtype=float)) >= h).astype(np.uint8)


@dataclass
class DecoderReport:
    n: int
    d: int
    sigma: float
    h: float
    trials: int
    error_count: int
    error_rate: float
    wilson_low: float
    wilson_high: float
    event_count: int
    norm_exceed_count: int

    @property
    def wilson_half_width(self) -> float:
        return 0.5 * (self.wilson_high - self.wilson_low)

    def to_record(self) -> dict:
        return asdict(self)


def group_error_probs(iterate: CompressedIterate, h: float, sigma: float):
    """Per-coordinate probability that ``Psi`` mislabels each group.

    Good coordinate at ``v``: ``|v + xi| >= h``. Bad at ``-eta``:
    ``|xi - eta| < h``. Bad at 0: ``|xi| < h``.
    """
    vals, sizes = iterate.groups()
    n = iterate.n
    p = np.empty(vals.size)
    good = vals[:n]
    p[:n] = gaussian_tail_q((h - good) / sigma) + gaussian_tail_q((h + good) / sigma)
    eta = iterate.eta
    p[n] = gaussian_tail_q((eta - h) / sigma) - gaussian_tail_q((eta + h) / sigma)
    p[n + 1] = 1.0 - 2.0 * gaussian_tail_q(h / sigma)
    return np.clip(p, 0.0, 1.0), sizes


def _noisy_norm_exceeds(iterate: CompressedIterate, sigma: float, d: int,
                        rng: np.random.Generator) -> bool:
    # ||W + xi||^2 = ||W||^2 + 2 sigma ||W|| g + sigma^2 (g^2 + chi2_{d-1})
    w = iterate.norm()
    g = rng.standard_normal()
    chi = rng.chisquare(d - 1) if d > 1 else 0.0
    return w * w + 2 * sigma * w * g + sigma * sigma * (g * g + chi) > 1.0


def decoder_error_mc(n: int, sigma: float, trials: int, seed: int,
                     problem: AmirProblem | None = None) -> DecoderReport:
    """MC estimate of ``P(Psi(W_T + xi) != B)`` at the default schedule.

    Each trial samples a level histogram, runs compressed GD and draws
    per-group binomial error counts. Trials whose noisy iterate leaves the
    unit ball count as errors. Trial ``t`` uses stream ``t``.
    """
    problem = AmirProblem.build(n) if problem is None else problem
    config = GdConfig(eta=problem.eta, T=problem.T)
    h = decoder_threshold(config.eta, problem.lam, config.T)
    errors = events = exceed = 0
    for t in range(trials):
        rng = RngStream(seed, t).generator()
        hist = sample_level_histogram(problem, rng)
        events += bad_event_holds(int(hist[0]), problem.T)
        it = run_gd_compressed(hist, config, problem.lam)
        if sigma == 0:
            wrong = bool(np.any(decoder_psi(it.groups()[0], h)[:n][it.counts[1:] > 0]))
            wrong |= it.bad_activated < it.bad_total
            errors += wrong
            continue
        if _noisy_norm_exceeds(it, sigma, problem.d, rng):
            exceed += 1
            errors += 1
            continue
        p, sizes = group_error_probs(it, h, sigma)
        errors += bool(np.any(rng.binomial(sizes, p) > 0))
    lo, hi = wilson_interval(errors, trials)
    return DecoderReport(n=n, d=problem.d, sigma=sigma, h=h, trials=trials,
                         error_count=errors, error_rate=errors / trials,
                         wilson_low=lo, wilson_high=hi, event_count=events,
                         norm_exceed_count=exceed)


def decoder_error_dense(w_T, bad, h: float, sigma: float, trials: int, seed: int) -> tuple[int, int]:
    """Full-dimension decoder check. Returns ``(errors, trials)``."""
    w = np.asarray(w_T, dtype=float)
    target = np.asarray(bad, dtype=np.uint8)
    errors = 0
    for t in range(trials):
        rng = RngStream(seed, t).generator()
        v = w + sigma * rng.standard_normal(w.size)
        if np.linalg.norm(v) > 1.0 or not np.array_equal(decoder_psi(v, h), target):
            errors += 1
    return errors, trials


# mask decoder -------------------------------------------------------------


def u_decoder(supersample: Supersample, bad, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Recover the mask from the supersample and the bad set.

    Training points vanish on every bad coordinate, so wherever the two
    points of a column differ on ``B`` the one with a 1 there is the ghost.
    Columns with no such difference (``J_k = 0``) are guessed uniformly.

    Returns ``(mask_estimate, J)``.
    """
    b = np.asarray(bad, dtype=bool)
    on_bad = supersample.grid[:, :, b]  # (2, n, |B|)
    hits = on_bad.any(axis=2)
    J = (on_bad[0] != on_bad[1]).any(axis=1)
    guess = rng.integers(0, 2, size=supersample.n)
    est = np.where(J, np.where(hits[1], 0, 1), guess)
    return est.astype(np.int64), J


def expected_two_pow_neg_bad(n: int, d: int) -> float:
    """``E[2^-|B|]`` for ``|B| ~ Bin(d, 2^-n)``: ``(1 - 2^-(n+1))^d``."""
    return math.exp(d * math.log1p(-(2.0 ** -(n + 1))))


def u_decoder_mask_error_exact(n: int, d: int) -> float:
    """``P(U_hat != U) = 1 - E[(1 - 2^(-|B|-1))^n]``."""
    b = np.arange(d + 1)
    pmf = stats.binom.pmf(b, d, 2.0 ** -n)
    ok = np.exp(n * np.log1p(-(2.0 ** (-b - 1.0))))
    return float(1.0 - pmf @ ok)


# tightness construction ---------------------------------------------------


def _prob_sum_nonneg(n: int) -> float:
    # sum eps >= 0  iff  #(+1) >= n/2
    return float(stats.binom.sf(math.ceil(n / 2) - 1, n, 0.5))


def tightness_iomi_exact(n: int) -> float:
    """``I(A(S); S)`` in bits; ``A`` is deterministic with two outputs."""
    if n < 1:
        raise InvalidArgument("n must be positive")
    return float(binary_entropy(_prob_sum_nonneg(n)) / LOG2)


def tightness_ege_exact(n: int, L: float = 1.0, R: float = 1.0) -> float:
    """``L R E|sum eps| / n`` by summing over the Binomial(n, 1/2) law."""
    k = np.arange(n + 1)
    return float(L * R * (stats.binom.pmf(k, n, 0.5) @ np.abs(2 * k - n)) / n)


# coordinate construction --------------------------------------------------


def prob_all_distinct(n: int, d: int) -> float:
    """``P(E = 1) = prod_{k<2n} (1 - k/d)`` for a ``2 x n`` uniform supersample."""
    if 2 * n > d:
        return 0.0
    return math.exp(log_prod_one_minus(np.arange(2 * n) / d))


def coordinate_schedule(n: int) -> tuple[int, float, int]:
    """``(d, eta, T) = (2 n^2, 1/(n sqrt n), n^2)``."""
    return 2 * n * n, 1.0 / (n * math.sqrt(n)), n * n


def _coordinate_weights(train: np.ndarray, d: int, eta: float, T: int) -> np.ndarray:
    mu = np.bincount(train, minlength=d) / train.size
    return coordinate_closed_form(mu, eta, T)


def _mask_table(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)


def _mean_log_class_size(grid: np.ndarray, d: int, eta: float, T: int,
                         masks: np.ndarray) -> float:
    """``E_U log |{u : F(u) = F(U)}|`` for a fixed grid ``(2, n)`` of indices."""
    n = grid.shape[1]
    cols = np.arange(n)
    keys = []
    for u in masks:
        w = _coordinate_weights(grid[u, cols], d, eta, T)
        keys.append((-w[grid]).tobytes())
    sizes = Counter(keys)
    return float(np.mean([math.log(sizes[k]) for k in keys]))


def ecmi_coordinate_exact(n: int, d: int, eta: float | None = None,
                          T: int | None = None) -> float:
    """Exact ``I(F; U | Z~)`` (nats) by enumeration.

    With ``U`` uniform and ``F`` a function of ``(U, Z~)`` the eCMI equals
    ``E_Z~ H(F | Z~)``, computed here as the entropy of the push-forward
    of the uniform mask for every one of the ``d^(2n)`` grids.
    """
    if n > 2 or d > 8:
        raise InvalidArgument("exact enumeration limited to n <= 2, d <= 8")
    _, eta_default, T_default = coordinate_schedule(n)
    eta = eta_default if eta is None else eta
    T = T_default if T is None else T
    masks = _mask_table(n)
    cols = np.arange(n)
    total = 0.0
    grids = itertools.product(range(d), repeat=2 * n)
    for flat in grids:
        grid = np.array(flat).reshape(2, n)
        law = Counter()
        for u in masks:
            w = _coordinate_weights(grid[u, cols], d, eta, T)
            law[(-w[grid]).tobytes()] += 1
        p = np.array(list(law.values()), dtype=float) / len(masks)
        total += float(-(p @ np.log(p)))
    return total / d ** (2 * n)


def icmi_coordinate_exact(n: int, d: int, index: int = 0, eta: float | None = None,
                          T: int | None = None) -> float:
    """Exact ``I(W_T; U_i | Z~_0i, Z~_1i)`` (nats) by enumeration."""
    if n > 2 or d > 8:
        raise InvalidArgument("exact enumeration limited to n <= 2, d <= 8")
    _, eta_default, T_default = coordinate_schedule(n)
    eta = eta_default if eta is None else eta
    T = T_default if T is None else T
    masks = _mask_table(n)
    cols = np.arange(n)
    # joint counts of (column-i pair, W_T, U_i)
    joint = Counter()
    for flat in itertools.product(range(d), repeat=2 * n):
        grid = np.array(flat).reshape(2, n)
        pair = (grid[0, index], grid[1, index])
        for u in masks:
            w = _coordinate_weights(grid[u, cols], d, eta, T)
            joint[(pair, w.tobytes(), int(u[index]))] += 1
    marg = Counter()
    for (pair, wk, ui), c in joint.items():
        marg[(pair, wk)] += c
    total = sum(joint.values())
    # H(U_i | W, pair) = -sum p(pair, w, u) log p(u | pair, w)
    h_cond = -sum(c / total * math.log(c / marg[(pair, wk)])
                  for (pair, wk, ui), c in joint.items())
    return LOG2 - h_cond


def icmi_coordinate_lower(n: int, d: int) -> float:
    """Per-sample CMI lower bound ``P(E = 1) log 2`` (nats)."""
    if d < 2 * n - 1:
        raise InvalidArgument("need d >= 2n - 1")
    return prob_all_distinct(n, d) * LOG2


@dataclass
class EcmiEstimate:
    n: int
    d: int
    trials: int
    estimate: float | None
    se: float | None
    certified_lower: float
    prob_distinct: float

    @property
    def estimate_bits(self) -> float | None:
        return None if self.estimate is None else self.estimate / LOG2

    @property
    def certified_lower_bits(self) -> float:
        return self.certified_lower / LOG2


MAX_ENUM_N = 12


def ecmi_coordinate_estimate(n: int, d: int, trials: int, seed: int,
                             eta: float | None = None, T: int | None = None) -> EcmiEstimate:
    """eCMI (nats) of GD on the coordinate problem.

    The certified part is ``P(E = 1) n log 2``: on the all-distinct event
    the loss table identifies ``U``. For ``n <= 12`` a Monte-Carlo estimate
    of ``n log 2 - H(U | F, Z~)`` is added, enumerating all masks for each
    sampled grid. Grid ``t`` uses stream ``t``.
    """
    _, eta_default, T_default = coordinate_schedule(n)
    eta = eta_default if eta is None else eta
    T = T_default if T is None else T
    pe = prob_all_distinct(n, d)
    est = se = None
    if n <= MAX_ENUM_N and trials > 0:
        masks = _mask_table(n)
        vals = np.empty(trials)
        for t in range(trials):
            rng = RngStream(seed, t).generator()
            grid = rng.integers(0, d, size=(2, n))
            vals[t] = n * LOG2 - _mean_log_class_size(grid, d, eta, T, masks)
        est, se = mean_and_se(vals)
    return EcmiEstimate(n=n, d=d, trials=trials, estimate=est, se=se,
                        certified_lower=pe * n * LOG2, prob_distinct=pe)


# lower bounds for the Amir construction (bits) ----------------------------


def iomi_lower_amir(n: int, p_error: float) -> float:
    """``1.5 n^3 (1 - 2p) - 1`` bits."""
    if not 0 <= p_error <= 1:
        raise InvalidArgument("p_error must be a probability")
    return 1.5 * n ** 3 * (1.0 - 2.0 * p_error) - 1.0


def bad_set_entropy(n: int, d: int) -> float:
    """``H(B) = d h_b(2^-n)`` in nats."""
    return d * float(binary_entropy(2.0 ** -n))


def iomi_lower_fano_chain(n: int, d: int, p_error: float) -> float:
    """Fano chain for ``I(W; S)`` in bits, before simplification.

    ``n E|B| - H(B | W)`` with ``E|B| = d 2^-n`` and ``H(B | W)`` bounded
    by :func:`fano_entropy_upper` using the exact ``H(B)``.
    """
    h = fano_entropy_upper(bad_set_entropy(n, d), p_error)
    return n * d * 2.0 ** -n - h / LOG2


def cmi_gap_upper(n: int) -> float:
    """Upper bound on ``n - CMI`` (bits), exponentials evaluated in log space."""
    n = float(n)
    terms = [
        math.log(n) - n * n * LOG2,
        math.log(n) - n * n / 18.0,
        math.log(2.0) + 5 * math.log(n) + n * LOG2 - 2.0 ** n / n,
        math.log(12.0) + 3 * math.log(n) - n * n / 18.0,
    ]
    return float(sum(exp_safe(t) for t in terms) + 1.0)


def cmi_lower_amir(n: int) -> float:
    """``n - cmi_gap_upper(n)`` bits."""
    return n - cmi_gap_upper(n)
