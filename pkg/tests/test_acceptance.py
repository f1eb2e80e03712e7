"""Acceptance gate: one PASS/FAIL line per criterion, at the stated tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also written when output is captured.
"""

import dataclasses
import json
import math
import time

import numpy as np
import pytest

from cauchy_em.cli import main
from cauchy_em.em_mixture import fit_mixture
from cauchy_em.em_single import ConditionalMoments, EmConfig, estep_moments, fit_cauchy, mstep_update
from cauchy_em.experiments import MIXTURE_SCENARIOS, SweepSpec, _default_mixture_fitter, mixture_sweep, rmse_sweep
from cauchy_em.init_gof import ks_stat
from cauchy_em.stable_core import (
    S0,
    InternalParams,
    MonteCarloPool,
    UserParams,
    cdf_eval,
    density_eval,
    sample_cauchy,
)


def _report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, f"criterion {n}: {detail}"


def test_criterion_1_closed_form_agreement(capsys):
    start = time.perf_counter()
    worst = 0.0
    for sigma in (0.1, 1.0, 5.0):
        y = np.linspace(-20 * sigma, 20 * sigma, 1000) + 0.3
        p = UserParams(0.0, sigma, 0.3)
        z = (y - 0.3) / sigma
        worst = max(worst,
                    np.max(np.abs(density_eval(y, p) - 1 / (math.pi * sigma * (1 + z * z)))),
                    np.max(np.abs(cdf_eval(y, p) - (0.5 + np.arctan(z) / math.pi))))
    elapsed = time.perf_counter() - start
    _report(capsys, 1, worst < 1e-6 and elapsed < 5, f"max abs error {worst:.2e} (< 1e-6), {elapsed:.2f} s (< 5 s)")


def test_criterion_2_sampler_ks(capsys):
    start = time.perf_counter()
    ks = {}
    for i, beta in enumerate((0.0, 0.3, 0.75, 1.0)):
        p = UserParams(beta, 1.0, 0.0)
        ks[beta] = ks_stat(sample_cauchy(p, i, 100_000), p)
    elapsed = time.perf_counter() - start
    ok = max(ks.values()) < 0.01 and elapsed < 60
    detail = ", ".join(f"beta={b}: {v:.4f}" for b, v in ks.items())
    _report(capsys, 2, ok, f"K-S {detail} (< 0.01), {elapsed:.1f} s (< 60 s)")


def test_criterion_3_estep_reduction_and_bound(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    pool = MonteCarloPool.generate(3, 200)
    worst, bound_ok, count = 0.0, True, 0
    for _ in range(100):
        eta, delta = rng.uniform(0.01, 100), rng.uniform(-100, 100)
        lam = rng.uniform(-0.99, 0.99) * 1e-4 * eta  # |lambda| < eps_lambda * (eta + |lambda|)
        y = delta + eta * rng.standard_cauchy(100)
        m = estep_moments(y, InternalParams(eta, lam, delta), pool)
        q = (y - delta) / eta
        worst = max(worst, np.max(np.abs(m.m0 - 2 / (1 + q * q))))
        count += y.size
    general = 0
    for _ in range(100):
        theta = InternalParams(rng.uniform(1e-3, 1e3), rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3))
        y = rng.uniform(-1e4, 1e4, 100)
        m0 = estep_moments(y, theta, MonteCarloPool.generate(int(rng.integers(1 << 31)), 50)).m0
        bound_ok &= bool(np.all((m0 > 0) & (m0 <= 2)))
        general += y.size
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and bound_ok and count == general == 10_000 and elapsed < 10
    _report(capsys, 3, ok, f"symmetric m0 error {worst:.1e} (<= 1e-12) on {count} inputs, "
                          f"0 < m0 <= 2 on {general} inputs: {bound_ok}, {elapsed:.1f} s (< 10 s)")


def test_criterion_4_mstep_hand_oracle(capsys):
    start = time.perf_counter()
    moments = ConditionalMoments(np.array([1.0, 1.0]), np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    out = mstep_update(np.array([0.0, 2.0]), moments, InternalParams(9.0, 0.0, 1.0))
    hand = out.eta**2 == 1.0 and out.lam == 0.0 and out.delta == 1.0
    rng = np.random.default_rng(4)
    perm_ok = equi_ok = True
    for _ in range(100):
        n = int(rng.integers(3, 60))
        y = rng.standard_cauchy(n) * rng.uniform(0.1, 10)
        theta = InternalParams(rng.uniform(0.1, 3), rng.uniform(-3, 3), rng.uniform(-2, 2))
        m = estep_moments(y, theta, MonteCarloPool.generate(int(rng.integers(1 << 31)), 200))
        base = mstep_update(y, m, theta)
        perm = rng.permutation(n)
        perm_ok &= mstep_update(y[perm], ConditionalMoments(m.m0[perm], m.m1[perm], m.m2[perm]), theta) == base
        c = rng.uniform(-100, 100)
        moved = mstep_update(y + c, m, InternalParams(theta.eta, theta.lam, theta.delta + c))
        equi_ok &= math.isclose(moved.delta - c, base.delta, abs_tol=1e-9 * (1 + abs(c)))
        equi_ok &= math.isclose(moved.eta, base.eta, rel_tol=1e-9) and math.isclose(moved.lam, base.lam, rel_tol=1e-9,
                                                                                      abs_tol=1e-12)
    elapsed = time.perf_counter() - start
    ok = hand and perm_ok and equi_ok and elapsed < 5
    _report(capsys, 4, ok, f"hand example {out.as_tuple()}: {hand}, permutation invariance: {perm_ok}, "
                          f"location equivariance: {equi_ok}, {elapsed:.2f} s (< 5 s)")


# EM-vs-ML grid at desk scale: 21 cells x 20 replications x 2 estimators
GRID_EM = EmConfig(iterations=200, burn_in=100, mc_size=1000)


@pytest.mark.slow
def test_criterion_5_single_fit_recovery(capsys):
    start = time.perf_counter()
    cfg = EmConfig(iterations=500, burn_in=250, mc_size=3000)
    est = []
    for s in range(20):
        y = sample_cauchy(UserParams(0.45, 2.0, 0.0), 1000 + s, 300)
        est.append(fit_cauchy(y, config=dataclasses.replace(cfg, seed=s)).averaged_user.as_tuple())
    b, s, m = np.mean(est, axis=0)
    recovery = abs(b - 0.45) < 0.10 and abs(s / 2 - 1) < 0.10 and abs(m) < 0.3

    table = rmse_sweep(SweepSpec(), GRID_EM)
    good = 0
    for beta, sigma in table.cells():
        good += all(table.lookup("EM", p, beta, sigma).rmse <= 1.5 * table.lookup("ML", p, beta, sigma).rmse
                    for p in ("beta", "sigma", "mu"))
    share = good / len(table.cells())
    elapsed = time.perf_counter() - start
    ok = recovery and share >= 0.8 and elapsed < 600
    _report(capsys, 5, ok, f"mean (beta, sigma, mu) = ({b:.3f}, {s:.3f}, {m:.3f}); "
                          f"EM <= 1.5 x ML on every parameter in {good}/{len(table.cells())} cells "
                          f"({share:.0%}, need >= 80%); {elapsed:.0f} s (~ 600 s)")


@pytest.mark.slow
def test_criterion_6_mixture_recovery(capsys):
    start = time.perf_counter()
    _, mus, weights = MIXTURE_SCENARIOS[1]
    fits = []
    base = _default_mixture_fitter(EmConfig(iterations=400, burn_in=200, mc_size=3000), 2)

    def recording(data, seed, truth):
        est = base(data, seed, truth)
        fits.append(est)
        return est

    mixture_sweep(1, n=1000, replications=20, beta_grid=(0.3,), fitter=recording, form=S0)
    worst_mu = worst_w = 0.0
    for est in fits:
        comps = est.user_components(S0)
        order = sorted(range(2), key=lambda j: comps[j].mu)
        for slot, j in enumerate(order):
            worst_mu = max(worst_mu, abs(comps[j].mu - mus[slot]))
            worst_w = max(worst_w, abs(est.weights[j] - weights[slot]))
    elapsed = time.perf_counter() - start
    ok = len(fits) == 20 and worst_mu < 0.3 and worst_w < 0.05 and elapsed < 1200
    _report(capsys, 6, ok, f"20 fits, max |mu_j error| {worst_mu:.3f} (< 0.3), max |omega_j - 0.5| {worst_w:.3f} "
                          f"(< 0.05); {elapsed:.0f} s (~ 1200 s)")


FULL = ["--iters", "2000", "--burn-in", "1000", "--mc-size", "3000", "--seed", "0", "--form", "S0"]


def _cli(argv, tmp_path, name):
    out = tmp_path / f"{name}.json"
    assert main([*argv, "--result", str(out)]) == 0
    return json.loads(out.read_text())


@pytest.mark.slow
def test_criterion_7_real_data_anchors(capsys, tmp_path):
    start = time.perf_counter()
    eq = _cli(["fit", "--fixture", "earthquake", *FULL], tmp_path, "eq")
    e, g = eq["estimates"], eq["gof"]
    eq_ok = (abs(e["mu"] - 16.9498) <= 1.0 and abs(e["sigma"] - 11.5981) <= 1.0 and abs(e["beta"] - 0.9167) <= 0.05
             and g["ks"] <= 0.06 and g["ad"] <= 1.0)
    t_eq = time.perf_counter() - start

    tetra = _cli(["fit-mixture", "--fixture", "tetrahydrocortisone", *FULL, "--init-form", "S0",
                  "--init-weights", "0.70,0.30", "--init-sigma", "1,3", "--init-beta", "0.95,0.95",
                  "--init-mu", "3,10"], tmp_path, "tetra")
    w = tetra["estimates"]["weights"]
    mu = [c["mu"] for c in tetra["estimates"]["components"]]
    tetra_ok = (abs(w[0] - 0.485) <= 0.05 and abs(w[1] - 0.515) <= 0.05 and abs(mu[0] - 3.089) <= 0.3
                and abs(mu[1] - 9.852) <= 0.8 and tetra["gof"]["ks"] <= 0.12)
    t_tetra = time.perf_counter() - start - t_eq

    gp = _cli(["fit-mixture", "--fixture", "guinea-pig", *FULL, "--init-form", "S0",
               "--init-weights", "0.65,0.35", "--init-sigma", "20,55", "--init-beta", "0.20,0.05",
               "--init-mu", "110,250"], tmp_path, "gp")
    gp_ok = gp["gof"]["ks"] <= 0.09
    t_gp = time.perf_counter() - start - t_eq - t_tetra
    ok = eq_ok and tetra_ok and gp_ok and max(t_eq, t_tetra, t_gp) < 900
    _report(capsys, 7, ok,
            f"earthquake S0 (beta, sigma, mu) = ({e['beta']:.4f}, {e['sigma']:.3f}, {e['mu']:.3f}), "
            f"K-S {g['ks']:.4f}, A-D {g['ad']:.3f}: {eq_ok}; "
            f"tetrahydrocortisone omega ({w[0]:.3f}, {w[1]:.3f}), mu ({mu[0]:.3f}, {mu[1]:.3f}), "
            f"K-S {tetra['gof']['ks']:.4f}: {tetra_ok}; guinea pig K-S {gp['gof']['ks']:.4f}: {gp_ok}; "
            f"{t_eq:.0f}/{t_tetra:.0f}/{t_gp:.0f} s (each ~ 900 s)")


def test_criterion_8_reduction_equivalence(capsys):
    start = time.perf_counter()
    y = sample_cauchy(UserParams(0.6, 2.0, 1.0), 8, 300)
    same = True
    for refresh in (True, False):
        cfg = EmConfig(iterations=200, burn_in=100, mc_size=1000, seed=5, refresh_pool=refresh)
        a = fit_cauchy(y, config=cfg)
        b = fit_mixture(y, config=cfg, n_components=1)
        same &= np.array_equal(a.trace, b.component_trace[:, 0, :]) and np.array_equal(a.loglik_trace, b.loglik_trace)
        same &= b.averaged.components[0] == a.averaged_internal and b.averaged.weights == (1.0,)
    elapsed = time.perf_counter() - start
    _report(capsys, 8, same and elapsed < 60,
            f"K=1 mixture trace, log-likelihood and average bit-identical to the single fit "
            f"(fresh and fixed pool): {same}, {elapsed:.1f} s (< 60 s)")


def test_criterion_9_end_to_end_reproducibility(capsys, tmp_path):
    start = time.perf_counter()
    data = tmp_path / "sample.csv"
    suite = [
        ["simulate", "--beta", "0.5", "--sigma", "2", "--mu", "1", "--n", "300", "--seed", "4", "--out", str(data)],
        ["fit", str(data), "--iters", "200", "--burn-in", "100", "--mc-size", "1000", "--trace",
         str(tmp_path / "trace.csv"), "--ml"],
        ["fit-mixture", "--fixture", "tetrahydrocortisone", "--iters", "200", "--burn-in", "100", "--mc-size", "1000"],
        ["density", "--beta", "0.9", "--sigma", "1", "--mu", "0", "--points", "101", "--out", str(tmp_path / "d.csv")],
        ["bench", "--betas", "0.3", "--sigmas", "2", "--replications", "2", "--iters", "50", "--burn-in", "25",
         "--mc-size", "300", "--out", str(tmp_path / "bench.csv")],
    ]
    identical = []
    for i, argv in enumerate(suite):
        first, second = tmp_path / f"first{i}.json", tmp_path / f"second{i}.json"
        assert main([*argv, "--result", str(first)]) == 0
        side = {p: p.read_bytes() for p in tmp_path.iterdir() if p.suffix == ".csv"}
        assert main(["rerun", str(first), "--result", str(second)]) == 0
        identical.append(first.read_bytes() == second.read_bytes()
                         and all(p.read_bytes() == b for p, b in side.items()))
    capsys.readouterr()
    elapsed = time.perf_counter() - start
    _report(capsys, 9, all(identical) and elapsed < 300,
            f"rerun byte-identical for {sum(identical)}/{len(suite)} commands (documents and side files), "
            f"{elapsed:.0f} s (< 300 s)")
