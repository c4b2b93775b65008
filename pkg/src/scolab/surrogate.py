"""Gaussian surrogate ``proj(W_T + xi)`` and residual-term estimation.

Residuals are ``E|F(W~) - F(W_T)|`` (population) and
``E|F_hat(W~) - F_hat(W_T)|`` (empirical), the expectation taken over the
noise only. Two estimators are provided: a dense one that draws ``xi`` in
full dimension, and a summary one that works on the compressed iterate.

The summary sampler treats each homogeneous group of coordinates (one
per empirical-mean level, plus the activated and idle bad coordinates)
through the exact joint law of ``(sum xi, sum xi^2)`` over the group.
Both risks depend on ``xi`` only through those sums and through
``max_i (W_i + xi_i)``. The per-group maximum is drawn by inverse CDF
independently of the sums; this is the one approximation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import BudgetExceeded, InvalidArgument
from .gd import DENSE_BUDGET, CompressedIterate
from .numerics import RngStream, mean_and_se, project_ball, sample_gaussian_vector
from .problems import AmirProblem, BitDataset, amir_empirical_risk, amir_population_risk, empirical_mean

BETA_STAR = 0.1


def sigma_star(d: int, beta: float = BETA_STAR) -> float:
    """Noise level ``beta / sqrt d`` splitting the small- and large-noise regimes."""
    return beta / math.sqrt(d)


@dataclass(frozen=True)
class SurrogateConfig:
    """Noise level, number of noise draws and the master seed.

    Trial ``t`` uses stream ``stream_offset + t``.
    """

    sigma: float
    trials: int
    seed: int = 0
    stream_offset: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidArgument("sigma must be nonnegative")
        if self.trials < 1:
            raise InvalidArgument("trials must be at least 1")

    def stream(self, trial: int) -> RngStream:
        return RngStream(self.seed, self.stream_offset + trial)


@dataclass
class ResidualEstimate:
    n: int
    d: int
    sigma: float
    trials: int
    delta_pop: float
    delta_pop_se: float
    delta_emp: float
    delta_emp_se: float
    samples: dict = field(default_factory=dict, repr=False)

    def to_record(self) -> dict:
        return {k: getattr(self, k) for k in
                ("n", "d", "sigma", "trials", "delta_pop", "delta_pop_se",
                 "delta_emp", "delta_emp_se")}


def perturb(w, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """``proj(w + xi)`` with ``xi ~ N(0, sigma^2 I)`` onto the unit ball."""
    w = np.asarray(w, dtype=float)
    return project_ball(w + sample_gaussian_vector(w.size, sigma, rng), 1.0)


def _estimate(n, d, sigma, pop, emp, dist) -> ResidualEstimate:
    dp, dp_se = mean_and_se(pop)
    de, de_se = mean_and_se(emp)
    return ResidualEstimate(n=n, d=d, sigma=sigma, trials=len(pop), delta_pop=dp,
                            delta_pop_se=dp_se, delta_emp=de, delta_emp_se=de_se,
                            samples={"pop": np.asarray(pop), "emp": np.asarray(emp),
                                     "dist": np.asarray(dist)})


def residual_mc_dense(problem: AmirProblem, dataset: BitDataset, w_T,
                      config: SurrogateConfig, budget: int = DENSE_BUDGET) -> ResidualEstimate:
    """Full-dimension MC estimate of both residual terms."""
    d = problem.d
    if d * config.trials > budget:
        raise BudgetExceeded("d * trials over budget; use residual_mc_summaries")
    w = np.asarray(w_T, dtype=float)
    mu = empirical_mean(dataset)
    f0 = amir_population_risk(problem, w)
    fh0 = amir_empirical_risk(problem, w, mu)
    pop = np.empty(config.trials)
    emp = np.empty(config.trials)
    dist = np.empty(config.trials)
    for t in range(config.trials):
        wt = perturb(w, config.sigma, config.stream(t).generator())
        pop[t] = abs(amir_population_risk(problem, wt) - f0)
        emp[t] = abs(amir_empirical_risk(problem, wt, mu) - fh0)
        dist[t] = np.linalg.norm(wt - w)
    return _estimate(problem.n, d, config.sigma, pop, emp, dist)


def sample_gaussian_max(count, u, sigma: float = 1.0):
    """Inverse-CDF draw of ``max`` of ``count`` i.i.d. ``N(0, sigma^2)``.

    ``P(M <= x) = Phi(x/sigma)^count``, so ``M = sigma Q^{-1}(1 - u^(1/count))``
    with the tail probability formed as ``-expm1(log(u)/count)``.
    """
    count = np.asarray(count, dtype=float)
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        tail = -np.expm1(np.log(u) / count)
    return -sigma * special.ndtri(tail)


def residual_mc_summaries(iterate: CompressedIterate, lam: float, sigma: float,
                          trials: int, rng: np.random.Generator | RngStream,
                          dataset_n: int | None = None) -> ResidualEstimate:
    """Residual estimates from group summaries, no ``d``-sized arrays.

    Parameters
    ----------
    iterate : CompressedIterate
        Final GD iterate on the Amir problem.
    lam : float
        Linear-penalty coefficient of the problem.
    sigma : float
        Noise standard deviation per coordinate.
    trials : int
        Number of noise draws.
    rng : Generator or RngStream
    """
    if isinstance(rng, RngStream):
        rng = rng.generator()
    n = iterate.n if dataset_n is None else dataset_n
    vals, sizes = iterate.groups()
    mus = np.concatenate([np.arange(1, iterate.n + 1) / iterate.n, [0.0, 0.0]])
    keep = sizes > 0
    vals, sizes, mus = vals[keep], sizes[keep], mus[keep]
    G = vals.size
    w_sq = float(sizes @ vals ** 2)
    w_sum = float(sizes @ vals)
    w_max = iterate.max_value()
    f0 = 0.5 * w_sq + 0.5 * lam * w_sum + max(w_max, 0.0)
    fh0 = float(sizes @ (mus * vals ** 2)) + lam * float(sizes @ (mus * vals)) + max(w_max, 0.0)
    if sigma == 0:
        zeros = np.zeros(trials)
        return _estimate(n, iterate.d, sigma, zeros, zeros, zeros)

    c = sizes.astype(float)
    s = sigma * np.sqrt(c) * rng.standard_normal((trials, G))
    chi = rng.chisquare(np.maximum(c - 1.0, 1.0), size=(trials, G))
    chi = np.where(c > 1, chi, 0.0)
    q = s ** 2 / c + sigma ** 2 * chi
    m = sample_gaussian_max(c, rng.random((trials, G)), sigma)

    v_sq = c * vals ** 2 + 2.0 * vals * s + q  # per-group sum of V_i^2
    v_lin = c * vals + s  # per-group sum of V_i
    norm_sq = v_sq.sum(axis=1)
    scale = 1.0 / np.maximum(1.0, np.sqrt(norm_sq))
    v_max = np.max(vals + m, axis=1)
    max_term = np.maximum(scale * v_max, 0.0)

    f = 0.5 * scale ** 2 * norm_sq + 0.5 * lam * scale * v_lin.sum(axis=1) + max_term
    fh = scale ** 2 * (v_sq @ mus) + lam * scale * (v_lin @ mus) + max_term
    inner = v_lin @ vals
    dist = np.sqrt(np.maximum(scale ** 2 * norm_sq - 2.0 * scale * inner + w_sq, 0.0))
    return _estimate(n, iterate.d, sigma, np.abs(f - f0), np.abs(fh - fh0), dist)
