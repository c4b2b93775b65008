"""Closed-form generalization, optimization and PAC-Bayes bounds.

Information arguments are in nats. Logs are natural. The high-probability
PAC-Bayes bound is only given up to a constant; it is evaluated with the
constant set to 1 and flagged as order-only (see ``CONVENTIONS``).
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .numerics import exp_safe

CONVENTIONS = {
    "information_unit": "nats",
    "log": "natural",
    "pac_bayes_constant": "1 (order-only)",
}


def _nonneg(**kw):
    for k, v in kw.items():
        if v < 0 or not math.isfinite(v):
            raise InvalidArgument(f"{k} must be finite and nonnegative")


def _pos(**kw):
    for k, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise InvalidArgument(f"{k} must be positive")


def ege_from_iomi(L, R, n, iomi):
    """``L R sqrt(2 I(W; S) / n)``."""
    _pos(L=L, R=R, n=n)
    _nonneg(iomi=iomi)
    return L * R * math.sqrt(2.0 * iomi / n)


def ege_from_cmi(L, R, n, cmi):
    """``L R sqrt(8 CMI / n)``."""
    _pos(L=L, R=R, n=n)
    _nonneg(cmi=cmi)
    return L * R * math.sqrt(8.0 * cmi / n)


def ege_from_ecmi(L, R, n, ecmi):
    """``L R sqrt(8 eCMI / n)``."""
    _pos(L=L, R=R, n=n)
    _nonneg(ecmi=ecmi)
    return L * R * math.sqrt(8.0 * ecmi / n)


def _per_sample(n, values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.shape != (n,):
        raise InvalidArgument(f"expected {n} per-sample values, got shape {v.shape}")
    if np.any(v < 0):
        raise InvalidArgument("information values must be nonnegative")
    return v


def ege_individual_iomi(L, R, n, per_sample_mi):
    """``(L R / n) sum_i sqrt(2 I(W; Z_i))``."""
    v = _per_sample(n, per_sample_mi)
    return L * R / n * float(np.sqrt(2.0 * v).sum())


def ege_individual_cmi(L, R, n, per_sample_cmi):
    """``(2 L R / n) sum_i sqrt(2 I(W; U_i | Z~_0i, Z~_1i))``."""
    v = _per_sample(n, per_sample_cmi)
    return 2.0 * L * R / n * float(np.sqrt(2.0 * v).sum())


def gd_opt_error(eta, T, L, R):
    """Last-iterate suboptimality ``R^2/(2 eta T) + (log T + 2) eta L^2 / 2``."""
    _pos(eta=eta, T=T, L=L, R=R)
    return R * R / (2.0 * eta * T) + (math.log(T) + 2.0) * eta * L * L / 2.0


def gd_gen_error(eta, T, L, n):
    """Uniform-stability generalization bound ``4 L^2 sqrt(T) eta + 4 L^2 T eta / n``."""
    _pos(eta=eta, T=T, L=L, n=n)
    return 4.0 * L * L * math.sqrt(T) * eta + 4.0 * L * L * T * eta / n


def gd_excess_risk(eta, T, L, R, n):
    """Sum of :func:`gd_gen_error` and :func:`gd_opt_error`."""
    return gd_gen_error(eta, T, L, n) + gd_opt_error(eta, T, L, R)


def proberror_bound(n: int) -> float:
    """Decoder error bound ``n^2 2^n exp(-2^n/n) + 6 exp(-n^2/18)``."""
    _pos(n=n)
    a = 2 * math.log(n) + n * math.log(2.0) - 2.0 ** n / n
    b = math.log(6.0) - n * n / 18.0
    return float(exp_safe(a) + exp_safe(b))


def pac_bayes_gen_bound(L, R, n, delta, complexity):
    """``L R sqrt((C + log(n/delta)) / n)`` with the hidden constant set to 1."""
    _pos(L=L, R=R, n=n)
    _nonneg(complexity=complexity)
    if not 0 < delta < 1:
        raise InvalidArgument("delta must lie in (0, 1)")
    return L * R * math.sqrt((complexity + math.log(n / delta)) / n)


def amir_good_event_complexity(n: int, T: int) -> float:
    """Posterior-to-prior KL bound ``(5/2) n T + 1`` under the good event."""
    return 2.5 * n * T + 1.0


def pacbayes_failure_constants(n: int, M_res: float) -> dict:
    """Probability lower bounds for the PAC-Bayes failure events.

    ``residual``: ``P(Delta + Delta_hat >= M_res/2) >= M_res/32``.
    ``conditional``: the conditional complexity exceeds ``0.1 n`` with
    probability at least ``1/9``.
    ``classical``: the classical complexity exceeds ``0.6 n^3 - 0.5`` with
    probability at least the reverse-Markov value below (about 0.107 at
    ``n = 16``, hence at least 0.1). Reported as ``None`` for ``n < 16``.
    """
    _pos(n=n)
    _nonneg(M_res=M_res)
    if n >= 16:
        tail = 3.0 * n ** 3 * math.exp(n * math.log(2.0) - n * n / 18.0)
        classical = (0.6 * n ** 3 - 0.5 - tail) / (4.4 * n ** 3 + 1.5)
    else:
        classical = None
    return {
        "residual_prob": M_res / 32.0,
        "conditional_prob": 1.0 / 9.0,
        "classical_prob": classical,
        "conditional_threshold": 0.1 * n,
        "classical_threshold": 0.6 * n ** 3 - 0.5,
    }
