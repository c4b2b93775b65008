"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single ``criterion NN PASS/FAIL`` line; the lines are
collected again in the terminal summary.
"""
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from scolab.bounds import (
    amir_good_event_complexity,
    gd_excess_risk,
    gd_gen_error,
    gd_opt_error,
    pac_bayes_gen_bound,
    proberror_bound,
)
from scolab.experiments import (
    amir_generalization_gaps,
    birthday_mc,
    event_dataset,
    figure_tables,
    gd_dynamics_run,
    stream_id,
    tightness_ege_samples,
)
from scolab.gd import GdConfig, run_gd_compressed, run_gd_dense, summarize_dense
from scolab.info import (
    decoder_error_mc,
    ecmi_coordinate_estimate,
    ecmi_coordinate_exact,
    iomi_lower_amir,
    prob_all_distinct,
    tightness_iomi_exact,
)
from scolab.numerics import LOG2, RngStream, loglog_slope, mean_and_se
from scolab.problems import AmirProblem, bad_event_holds, level_histogram, sample_level_histogram
from scolab.surrogate import SurrogateConfig, residual_mc_dense

from conftest import SEED

pytestmark = pytest.mark.acceptance
TESTS = Path(__file__).parent


def test_01_closed_form_equivalence(acceptance_line):
    start = time.perf_counter()
    worst = {}
    for n in (4, 6, 8):
        worst[n] = max(gd_dynamics_run(n, t, SEED, dense=True).dense_rel_err for t in range(20))
    elapsed = time.perf_counter() - start
    ok = all(v <= 1e-9 for v in worst.values()) and elapsed < 60
    detail = ", ".join(f"n={n} max rel {v:.1e}" for n, v in worst.items())
    acceptance_line(1, "dense GD vs closed form", ok, f"{detail}; 20 runs each; {elapsed:.1f}s")


def test_02_compressed_vs_dense(acceptance_line):
    worst = 0.0
    for n in (8, 10):
        prob = AmirProblem.build(n)
        cfg = GdConfig.default(n)
        for t in range(3):
            ds, _ = event_dataset(prob, RngStream(SEED, stream_id("gd", n, 1000 + t)).generator())
            tr = run_gd_dense(prob, ds, cfg)
            summ, spread = summarize_dense(tr.final, ds.column_counts, n, cfg.eta)
            cp = run_gd_compressed(level_histogram(ds), cfg, prob.lam)
            scale = np.where(cp.values != 0, np.abs(cp.values), 1.0)
            errs = [spread, abs(summ.norm() - cp.norm()) / cp.norm(),
                    float(np.max(np.abs(summ.values - cp.values) / scale)),
                    float(summ.bad_activated != cp.bad_activated)]
            worst = max(worst, *errs)
    acceptance_line(2, "compressed vs dense summaries", worst <= 1e-9,
                    f"max discrepancy {worst:.1e} over n in {{8, 10}}, 3 runs each")


def test_03_norm_lemma(acceptance_line):
    parts, ok = [], True
    for n in (8, 10, 12):
        runs = [gd_dynamics_run(n, t, SEED, dense=False) for t in range(20)]
        rate = np.mean([r.norm_ok for r in runs])
        norms = [r.norm for r in runs]
        ok &= rate == 1.0
        parts.append(f"n={n} rate {rate:.2f} (min {min(norms):.4f} vs {0.5 / math.sqrt(n):.4f})")
    acceptance_line(3, "norm interval of W_T", ok, "; ".join(parts))


def test_04_tightness(acceptance_line):
    start = time.perf_counter()
    ok, parts = True, []
    for n in (4, 16, 64):
        ege, se = mean_and_se(tightness_ege_samples(n, 10_000, SEED))
        iomi_bits = tightness_iomi_exact(n)
        bound = math.sqrt(2 * iomi_bits * LOG2 / n)
        ok &= ege >= 1 / math.sqrt(2 * n) - 3 * se and iomi_bits <= 1 and bound >= ege
        parts.append(f"n={n} EGE {ege:.4f}+-{se:.4f} bound {bound:.4f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    acceptance_line(4, "tightness of the IOMI bound", ok, "; ".join(parts) + f"; {elapsed:.1f}s")


def test_05_bad_coordinates(acceptance_line):
    ok, parts = True, []
    for n in (6, 8, 10):
        prob = AmirProblem.build(n)
        rng = RngStream(SEED, stream_id("gd", n, 1 << 20)).generator()
        counts = np.array([sample_level_histogram(prob, rng)[0] for _ in range(20_000)])
        ev, ev_se = mean_and_se([bad_event_holds(int(b), prob.T) for b in counts])
        m, se = mean_and_se(counts)
        target = prob.d * 2.0 ** -n
        ok &= ev >= 1 - 2 * math.exp(-prob.T / 36) - 3 * ev_se and abs(m - target) <= 3 * se
        parts.append(f"n={n} P(event) {ev:.4f}, mean |B| {m:.2f} vs {target:.2f}")
    acceptance_line(5, "bad-coordinate statistics", ok, "; ".join(parts))


def test_06_decoder(acceptance_line):
    n = 10
    d = AmirProblem.build(n).d
    rep = decoder_error_mc(n, 0.1 / math.sqrt(d), 2000, SEED ^ stream_id("decoder", n, 0))
    p = proberror_bound(n)
    iomi = iomi_lower_amir(n, p)
    ok = (rep.error_rate <= 0.05 and rep.error_rate <= p + 3 * rep.wilson_half_width
          and abs(p - 0.0232) < 1e-4 and p < 0.1 and iomi >= 1.2 * n ** 3 - 1)
    acceptance_line(6, "decoder pipeline", ok,
                    f"error {rep.error_count}/{rep.trials}, bound {p:.5f}, IOMI lower {iomi:.1f} bits")


def test_07_generalization_rate(acceptance_line):
    start = time.perf_counter()
    grid = (6, 8, 10, 12)
    means = [float(np.mean(amir_generalization_gaps(n, 500, SEED))) for n in grid]
    slope = loglog_slope(grid, means)
    elapsed = time.perf_counter() - start
    ok = -0.7 <= slope <= -0.3 and elapsed < 300
    pts = ", ".join(f"{m:.4f}" for m in means)
    acceptance_line(7, "GD generalization-gap slope", ok,
                    f"slope {slope:.3f} (window [-0.7, -0.3]); means {pts}; {elapsed:.1f}s")


def test_08_residual_separation(acceptance_line):
    n = 10
    prob = AmirProblem.build(n)
    cfg = GdConfig.default(n)
    ds, _ = event_dataset(prob, RngStream(SEED, stream_id("residual", n, 0)).generator())
    it = run_gd_compressed(level_histogram(ds), cfg, prob.lam)
    w = it.expand(ds.column_counts)
    cap = 4 * prob.L_effective * prob.R
    est, cap_ok = {}, True
    for j, c in enumerate((0.1, 2.0)):
        conf = SurrogateConfig(c / math.sqrt(prob.d), 2000, SEED, stream_id("residual", n, (1 + j) << 24))
        est[c] = residual_mc_dense(prob, ds, w, conf)
        cap_ok &= bool(np.all(est[c].samples["pop"] <= cap))
    small, large = est[0.1].delta_pop, est[2.0].delta_pop
    ok = large >= 0.3 and large >= 10 * small and cap_ok
    acceptance_line(8, "residual regime separation", ok,
                    f"delta_pop {small:.4f} at 0.1/sqrt(d), {large:.4f} at 2/sqrt(d), "
                    f"ratio {large / small:.1f}, cap {'ok' if cap_ok else 'violated'}")


def test_09_ecmi(acceptance_line):
    parts, ok = [], True
    for n, d in ((3, 18), (5, 50)):
        m, se = birthday_mc(n, d, 100_000, SEED)
        exact = prob_all_distinct(n, d)
        ok &= abs(m - exact) <= 3 * se
        parts.append(f"P(E=1) ({n},{d}) MC {m:.4f} vs {exact:.4f}")
    ok &= all(prob_all_distinct(n, 2 * n * n) >= 0.1 for n in range(1, 41))
    exact = ecmi_coordinate_exact(2, 8)
    est = ecmi_coordinate_estimate(2, 8, 20_000, SEED)
    ok &= abs(est.estimate - exact) <= 0.02
    parts.append(f"eCMI n=2 exact {exact:.4f} vs MC {est.estimate:.4f}")
    certified = [ecmi_coordinate_estimate(n, 2 * n * n, 0, SEED).certified_lower / (n * LOG2)
                 for n in range(1, 41)]
    ok &= min(certified) >= 0.1
    parts.append(f"min certified/(n log 2) {min(certified):.4f}")
    acceptance_line(9, "eCMI construction", ok, "; ".join(parts))


def test_10_figures(acceptance_line):
    f1, f2 = figure_tables(range(4, 41))
    curve1 = [v for n, v in f1["rows"] if n >= 10]
    gaps = {n: v for n, v in f2["rows"]}
    ok = (all(v < 0.1 for v in curve1) and all(a > b for a, b in zip(curve1, curve1[1:]))
          and all(v <= 1.1 for n, v in gaps.items() if n >= 16) and abs(gaps[16] - 1.033) < 5e-4)
    acceptance_line(10, "figure curves", ok,
                    f"figure1 at 10: {curve1[0]:.5f}; figure2 gap at 16: {gaps[16]:.4f}")


def test_11_bound_evaluators(acceptance_line):
    opt = gd_opt_error(0.1, 10, 1, 1)
    ok = abs(opt - 0.7151292546497023) <= 1e-6
    rng = np.random.default_rng(SEED)
    for eta, T, L, R, n in zip(rng.uniform(1e-3, 1, 200), rng.integers(1, 10 ** 5, 200),
                               rng.uniform(0.1, 10, 200), rng.uniform(0.1, 10, 200),
                               rng.integers(1, 10 ** 4, 200)):
        ok &= gd_excess_risk(eta, T, L, R, n) == gd_gen_error(eta, T, L, n) + gd_opt_error(eta, T, L, R)
    vac = []
    for n in range(8, 65):
        T = 2 * n * n
        c = amir_good_event_complexity(n, T)
        ok &= c == 2.5 * n * T + 1
        vac.append(pac_bayes_gen_bound(4, 1, n, 0.05, c))
    ok &= min(vac) >= 1
    acceptance_line(11, "bound evaluators", ok,
                    f"opt {opt:.6f}; excess identity exact; min PAC-Bayes bound n>=8 {min(vac):.1f}")


HELPER_SUITES = [
    "test_problems.py::TestAmirConstruction::test_max_term_lipschitz",
    "test_problems.py::TestAmirConstruction::test_subgradient_inequality",
    "test_numerics.py::TestSamplers::test_gaussian_norm_concentration",
    "test_numerics.py::TestSamplers::test_polar_independence",
    "test_numerics.py::TestReverseMarkov::test_brute_force_discrete_laws",
    "test_numerics.py::TestMixtureKL::test_dominates_true_mixture_kl",
]


def test_12_helper_properties(acceptance_line):
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *[str(TESTS / s) for s in HELPER_SUITES]],
                          cwd=TESTS, capture_output=True, text=True)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    acceptance_line(12, "helper property suites", proc.returncode == 0, summary)
