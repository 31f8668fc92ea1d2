"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[ACCEPT n] PASS|FAIL`` line before asserting.
"""

import json
import time

import numpy as np
import pytest

from slgp.cli import main
from slgp.density import build_grid, normalize_log_density, slogt_field, slogt_values
from slgp.inference import Dataset, MCMCConfig, SLGPPosterior, map_estimate, pcn_sample
from slgp.io import TEMPERATURE_SCHEMA, read_csv_table
from slgp.kernels import DomainSpec, KernelSpec, eval_kernel
from slgp.metrics import check_hellinger_bound, integrated_hellinger
from slgp.rates import default_offsets, rate_result, simulate_distances
from slgp.rff import RFFBasis, approx_kernel, build_basis

from conftest import simulate_dataset, write_station_csv


def report(capsys, n, title, ok, detail):
    with capsys.disabled():
        print(f"\n[ACCEPT {n}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
    assert ok, detail


def test_1_rff_fidelity(capsys):
    t0 = time.perf_counter()
    dom = DomainSpec.unit(2, 1)
    spec = KernelSpec.matern(2.5, 1.0, [0.5, 0.5, 0.5])
    p = 2048
    worst = []
    for seed in range(3):
        b = build_basis(spec, dom, p, seed)
        rng = np.random.default_rng(50 + seed)
        y, y2 = rng.random((100, 3)), rng.random((100, 3))

        worst.append(np.abs(approx_kernel(b, y, y2) - eval_kernel(spec, y, y2)).max())
    elapsed = time.perf_counter() - t0
    bound = 5 * spec.variance / np.sqrt(p)
    ok = max(worst) <= bound and elapsed < 10
    report(capsys, 1, "RFF fidelity", ok,
           f"max errors {np.round(worst, 4).tolist()} vs bound {bound:.4f}, {elapsed:.1f}s")


def test_2_transform(capsys):
    t0 = time.perf_counter()
    dom = DomainSpec.unit(1, 1)
    g101 = build_grid(dom, 101)
    b = build_basis(KernelSpec.matern(2.5, 1.0, [0.3, 0.3]), dom, 20, 0)
    uniform = np.all(slogt_field(b, np.zeros(40), [0.5], g101).values == 1.0)

    g = build_grid(dom, 2001)
    freq = np.array([[0.0, 1e-3]])
    lin = RFFBasis(freq, 1.0, None, dom)
    eps = np.array([0.0, 1.0 / (lin.scale * 1e-3)])
    vals = slogt_field(lin, eps, [0.5], g).values
    lin_err = np.abs(vals - np.exp(g.axes[0]) / (np.e - 1)).max()

    rng = np.random.default_rng(0)
    z = rng.standard_normal((50, g101.size)) * 3
    shift_err = np.abs(normalize_log_density(z + rng.normal(scale=20, size=(50, 1)), g101)
                       - normalize_log_density(z, g101)).max()

    norm_err = 0.0
    for k in range(100):
        spec = KernelSpec.matern([0.5, 1.5, 2.5][k % 3], rng.uniform(0.5, 4), rng.uniform(0.05, 1, 2))
        bk = build_basis(spec, dom, 30, k)
        v = slogt_values(bk, rng.standard_normal(bk.n_features), rng.random((10, 1)), g101)
        norm_err = max(norm_err, np.abs(v @ g101.weights - 1).max())
    elapsed = time.perf_counter() - t0
    ok = uniform and lin_err <= 1e-6 and shift_err <= 1e-12 and norm_err <= 1e-10 and elapsed < 30
    report(capsys, 2, "transform", ok,
           f"uniform exact={uniform}, linear err {lin_err:.2e}, shift err {shift_err:.2e}, "
           f"normalization err {norm_err:.2e} over 1000 slices, {elapsed:.1f}s")


def test_3_gradient(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for config in range(20):
        rng = np.random.default_rng(2000 + config)
        d_D = 1 + config % 2
        dom = DomainSpec.unit(d_D, 1)
        fam = [("matern", 0.5), ("matern", 1.5), ("matern", 2.5), ("se", None)][config % 4]
        spec = KernelSpec(fam[0], rng.uniform(0.5, 3), rng.uniform(0.1, 1, d_D + 1), nu=fam[1])
        b = build_basis(spec, dom, 20, config)
        post = SLGPPosterior(b, Dataset(rng.random((50, d_D)), rng.random(50), dom), build_grid(dom, 101))
        eps = rng.standard_normal(b.n_features)
        fd = np.empty_like(eps)
        for j in range(eps.size):
            e = np.zeros_like(eps)
            e[j] = 1e-5
            fd[j] = (post(eps + e).logpost - post(eps - e).logpost) / 2e-5
        worst = max(worst, np.max(np.abs(post(eps).grad - fd)) / np.max(np.abs(fd)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-5 and elapsed < 60
    report(capsys, 3, "gradient check", ok, f"max relative error {worst:.2e} over 20 configs, {elapsed:.1f}s")


def test_4_pcn_prior_invariance(capsys):
    t0 = time.perf_counter()
    dom = DomainSpec.unit(1, 1)
    b = build_basis(KernelSpec.matern(2.5, 1.0, [0.3, 0.3]), dom, 10, 0)
    cfg = MCMCConfig(beta=0.5, n_iter=100_000, burn_in=1000, thin=10, seed=4)
    ch = pcn_sample(b, Dataset.empty(dom), build_grid(dom, 101), cfg)
    mean = np.abs(ch.samples.mean(axis=0)).max()
    var = ch.samples.var(axis=0)
    elapsed = time.perf_counter() - t0
    ok = (ch.acceptance_rate == 1.0 and mean <= 0.05 and var.min() >= 0.9 and var.max() <= 1.1
          and elapsed < 60)
    report(capsys, 4, "pCN prior invariance", ok,
           f"acceptance {ch.acceptance_rate}, max |mean| {mean:.3f}, variance in "
           f"[{var.min():.3f}, {var.max():.3f}], {elapsed:.1f}s")


def test_5_hellinger_bound(capsys):
    dom = DomainSpec.unit(1, 1)
    grid = build_grid(dom, 101)
    rng = np.random.default_rng(5)
    violations, pairs = 0, 0
    for k in range(1000):
        spec = KernelSpec.matern([0.5, 1.5, 2.5][k % 3], rng.uniform(0.5, 5), rng.uniform(0.05, 1, 2))
        b = build_basis(spec, dom, 20, k)
        f, g = slogt_values(b, rng.standard_normal(b.n_features), rng.random((2, 1)), grid)
        violations += not check_hellinger_bound(f, g, grid).bound_satisfied
        pairs += 1
    report(capsys, 5, "Hellinger bound", violations == 0, f"{violations} violations on {pairs} pairs")


@pytest.fixture(scope="module")
def rate_runs():
    grid = build_grid(DomainSpec.unit(1, 1), 201)
    offsets = default_offsets()
    kernels = {"gaussian": KernelSpec.squared_exponential(1.0, [1.0, 1.0]),
               "exponential": KernelSpec.matern(0.5, 1.0, [1.0, 1.0])}
    slopes = {}
    for name, k in kernels.items():
        for seed in range(3):
            dist = simulate_distances(k, offsets, grid, n_reps=1000, p=512, seed=seed)
            for metric, d in dist.items():
                slopes[name, metric.value, seed] = rate_result(d, offsets, metric, 1.0,
                                                               k.holder_alpha1).slope
    return slopes


def test_6_rates(capsys, rate_runs):
    s = rate_runs
    lines, ok = [], True
    targets = {"gaussian": (1.0, 0.25), "exponential": (0.5, 0.15)}
    for name, (target, tol) in targets.items():
        for seed in range(3):
            h, k, tv = s[name, "hellinger", seed], s[name, "kl", seed], s[name, "tv", seed]
            checks = {"hellinger": abs(h - target) <= tol,
                      "kl=2h": abs(k - 2 * h) <= 0.3,
                      "tv=kl": abs(tv - k) <= 0.3}
            ok &= all(checks.values())
            failed = [c for c, v in checks.items() if not v]
            lines.append(f"{name}/seed{seed}: H {h:.3f} KL {k:.3f} TV {tv:.3f}"
                         + (f" (fails {', '.join(failed)})" if failed else ""))
    report(capsys, 6, "rate reproduction", ok, "; ".join(lines))


def _field_distance(basis_a, eps_a, basis_b, eps_b, xs, dw, grid):
    fa = slogt_values(basis_a, eps_a, xs, grid)
    fb = np.ones((xs.shape[0], grid.size)) if basis_b is None else slogt_values(basis_b, eps_b, xs, grid)
    return integrated_hellinger(fa, fb, dw, grid)


def test_7_self_consistency(capsys):
    t0 = time.perf_counter()
    dom = DomainSpec.unit(1, 1)
    grid = build_grid(dom, 101)
    dgrid = build_grid(dom, 101)
    xs = dgrid.axes[0][:, None]
    spec = KernelSpec.matern(2.5, 1.0, [0.3, 0.3])
    decreasing = {25: 0, 100: 0}
    below_uniform, runs, lines = True, 0, []
    for seed in range(5):
        rng = np.random.default_rng(700 + seed)
        truth_basis = build_basis(spec, dom, 500, 10_000 + seed)
        truth = rng.standard_normal(truth_basis.n_features)
        data = simulate_dataset(truth_basis, truth, 5000, grid, rng)
        baseline = _field_distance(truth_basis, truth, None, None, xs, dgrid.weights, grid)
        for p in (25, 100):
            basis = build_basis(spec, dom, p, seed)
            d = []
            for n in (500, 5000):
                fit = map_estimate(basis, data.subset(np.arange(n)), grid)
                d.append(_field_distance(basis, fit.eps, truth_basis, truth, xs, dgrid.weights, grid))
                below_uniform &= d[-1] < baseline
                runs += 1
            decreasing[p] += d[1] < d[0]
            lines.append(f"s{seed} p{p}: {d[0]:.4f}->{d[1]:.4f} (uniform {baseline:.4f})")
    elapsed = time.perf_counter() - t0
    ok = all(v >= 3 for v in decreasing.values()) and below_uniform and elapsed < 600
    report(capsys, 7, "estimation self-consistency", ok,
           f"decreasing in n: {decreasing} of 5 seeds; below uniform in all {runs} runs: "
           f"{below_uniform}; {elapsed:.0f}s; " + "; ".join(lines))


def test_8_workflow(capsys, tmp_path):
    data = write_station_csv(tmp_path / "meteo.csv", n_stations=29, n_days=30, seed=8)
    held = ["ST02", "ST13", "ST27"]
    out = tmp_path / "run"
    cfg = {
        "seed": 1, "p": 250,
        "kernel": {"family": "matern", "nu": 2.5, "variance": 1.0},
        "grid": {"fit_m": 101, "report_m": 201},
        "data": {"path": str(data), "schema": TEMPERATURE_SCHEMA.to_dict(), "holdout": held},
        "hyper_grid": {"per_dim": [[0.2, 0.4], [0.2, 0.4], [0.2, 0.4], [0.2, 0.4]], "tie": [[0, 1]]},
        "mcmc": {"beta": 0.1, "n_iter": 3000, "burn_in": 1000, "thin": 20},
        "predict": {"probs": [0.1, 0.5, 0.9]},
        "output": {"dir": str(out)},
    }
    (tmp_path / "config.json").write_text(json.dumps(cfg))
    codes = [main(["fit-mcmc", "--config", str(tmp_path / "config.json")]),
             main(["predict", "--fit", str(out / "fit.json")])]
    fit = json.loads((out / "fit.json").read_text())
    pred = json.loads((out / "predict.json").read_text())
    _, draws, _ = read_csv_table(out / "predict_draws.csv")
    _, qrows, _ = read_csv_table(out / "predict_quantiles.csv")
    n_train_stations = len(fit["data"]["key_locations"]) - len(fit["data"]["held_out"])
    per_station = {k: len({r[1] for r in draws if r[0] == k}) for k in held}
    monotone = all(
        np.all(np.diff([float(r[2]) for r in qrows if r[0] == k]) >= 0) for k in held)
    checks = {
        "exit codes 0": codes == [0, 0],
        "26 training stations": n_train_stations == 26,
        "500 basis functions": len(fit["basis"]["frequencies"]) * 2 == 500,
        "grid search table": len(fit["grid_search"]["table"]) == 8,
        "held-out predictions": sorted(pred["locations"]) == sorted(held),
        "per-station draws": all(v == 100 for v in per_station.values()),
        "monotone quantiles": monotone,
        "provenance": all(read_csv_table(out / f)[2]["config"]["p"] == 250
                          for f in ("chain.csv", "predict_density.csv", "predict_quantiles.csv")),
    }
    ok = all(checks.values())
    report(capsys, 8, "workflow", ok,
           ", ".join(f"{k}={v}" for k, v in checks.items())
           + f"; best fractions {fit['grid_search']['best_fractions']}")
