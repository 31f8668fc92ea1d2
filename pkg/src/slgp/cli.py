"""Command line interface: ``slgp {simulate,fit-map,fit-mcmc,predict,rates,metrics}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .density import build_grid, grid_from_nodes, sample_slice, slogt_values
from .inference import (HyperGrid, MCMCConfig, hyper_grid_search, map_estimate, pcn_sample,
                        predict_density)
from .kernels import DomainSpec, KernelSpec
from .metrics import check_hellinger_bound, divergence
from .rates import default_offsets, rate_result, simulate_distances
from .rff import RFFBasis, build_basis

logger = logging.getLogger("slgp")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
DEFAULT_FRACTION = 0.2

# exponential and Gaussian kernels at unit scale
DEFAULT_RATE_KERNELS = [
    {"family": "matern", "nu": 0.5, "variance": 1.0},
    {"family": "squared_exponential", "variance": 1.0},
]


def _kernel(kcfg: dict, domain: DomainSpec) -> KernelSpec:
    ranges = np.array([hi - lo for lo, hi in domain.bounds_D + domain.bounds_T])
    ls = kcfg.get("lengthscales")
    ls = DEFAULT_FRACTION * ranges if ls is None else np.asarray(ls, dtype=float)
    if ls.size == 1 and ranges.size > 1:
        ls = np.full(ranges.size, float(ls[0]))
    if ls.size != ranges.size:
        raise sio.ConfigError(f"kernel/lengthscales: need {ranges.size} values, got {ls.size}")
    return KernelSpec(kcfg["family"], kcfg.get("variance", 1.0), ls, nu=kcfg.get("nu"))


def _apply_overrides(cfg: dict, args) -> dict:
    over: dict = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "p", None) is not None:
        over["p"] = args.p
    if getattr(args, "grid_m", None) is not None:
        over["grid"] = {"fit_m": args.grid_m}
    mc = {k: getattr(args, a) for k, a in (("beta", "beta"), ("n_iter", "iters"),
                                           ("burn_in", "burnin"), ("thin", "thin"))
          if getattr(args, a, None) is not None}
    if mc:
        over["mcmc"] = mc
    if getattr(args, "reps", None) is not None:
        over["rates"] = {"n_reps": args.reps}
    if getattr(args, "out", None) is not None:
        over["output"] = {"dir": str(args.out)}
    merged = sio.merge_config(cfg, over)
    return sio.validate_config(merged)


def _config(args) -> dict:
    cfg = sio.load_config(args.config) if getattr(args, "config", None) else sio.validate_config({})
    return _apply_overrides(cfg, args)


def _outdir(cfg) -> Path:
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _domain(cfg) -> DomainSpec:
    try:
        return DomainSpec.from_dict(cfg["domain"])
    except ValueError as exc:
        raise sio.ConfigError(f"domain: {exc}") from None


# ----------------------------- commands -----------------------------

def cmd_simulate(args) -> int:
    cfg = _config(args)
    domain = _domain(cfg)
    kernel = _kernel(cfg["kernel"], domain)
    seed = cfg["seed"]
    basis = build_basis(kernel, domain, cfg["p"], seed)
    eps = np.random.default_rng([seed, 1]).standard_normal(basis.n_features)
    grid = build_grid(domain, cfg["grid"]["report_m"])
    locs = np.asarray(cfg["simulate"]["locations"], dtype=float)
    if locs.ndim != 2 or locs.shape[1] != domain.d_D or not domain.contains(x=locs):
        raise sio.ConfigError("simulate/locations: each location must be a point of D")
    dens = slogt_values(basis, eps, locs, grid)
    out = _outdir(cfg)
    meta = sio.provenance(cfg, command="simulate")
    header = [f"x{j + 1}" for j in range(domain.d_D)] + [f"t{j + 1}" if domain.d_T > 1 else "t"
                                                         for j in range(domain.d_T)] + ["density"]
    rows = ([*x, *t, v] for x, row in zip(locs, dens) for t, v in zip(grid.nodes, row))
    sio.write_csv(out / "simulate_density.csv", header, rows, meta)
    n_samples = cfg["simulate"]["n_samples"]
    if n_samples:
        if domain.d_T != 1:
            raise sio.ConfigError("simulate/n_samples: sampling needs a one-dimensional T")
        rng = np.random.default_rng([seed, 2])
        srows = []
        for i, (x, row) in enumerate(zip(locs, dens)):
            for t in sample_slice(row, grid, n_samples, rng):
                srows.append([f"loc{i}", *x, t])
        sio.write_csv(out / "simulate_samples.csv",
                      ["location"] + [f"x{j + 1}" for j in range(domain.d_D)] + ["t"], srows, meta)
    sio.write_json(out / "simulate.json", {**meta, "basis": basis.to_dict(), "eps": eps.tolist()})
    return EXIT_OK


def _load_training(cfg):
    dcfg = cfg.get("data")
    if not dcfg:
        raise sio.ConfigError("data: required for fitting")
    schema = sio.CsvSchema.from_dict(dcfg["schema"])
    ds, rescaling = sio.load_dataset_csv(dcfg["path"], schema, dcfg.get("t_interval"),
                                         dcfg.get("t_margin", 0.1))
    train, test = sio.holdout_split(ds, dcfg.get("holdout", []))
    if train.n == 0:
        raise sio.DataError("training set is empty after holding out keys")
    return ds, train, test, rescaling


def _fit(cfg):
    ds, train, test, rescaling = _load_training(cfg)
    domain = train.domain
    grid = build_grid(domain, cfg["grid"]["fit_m"])
    p, seed = cfg["p"], cfg["seed"]
    mcfg = cfg["map"]
    search = None
    hcfg = cfg.get("hyper_grid")
    if hcfg:
        variance = hcfg.get("variance", cfg["kernel"].get("variance", 1.0))
        if "candidates" in hcfg:
            hyper = HyperGrid(hcfg["candidates"], variance)
        elif "per_dim" in hcfg:
            hyper = HyperGrid.product(hcfg["per_dim"], variance, hcfg.get("tie", ()))
        else:
            raise sio.ConfigError("hyper_grid: give 'candidates' or 'per_dim'")
        template = _kernel(cfg["kernel"], domain)
        search = hyper_grid_search(template, hyper, train, grid, p, seed, mcfg["tol"], mcfg["max_iter"])
        kernel = template.with_lengthscales(search.best_lengthscales).with_variance(variance)
        basis = build_basis(kernel, domain, p, seed)
        fit = search.best_map
    else:
        kernel = _kernel(cfg["kernel"], domain)
        basis = build_basis(kernel, domain, p, seed)
        fit = map_estimate(basis, train, grid, tol=mcfg["tol"], max_iter=mcfg["max_iter"])
    locs = sio.key_locations(ds)
    payload = {
        "basis": basis.to_dict(),
        "rescaling": rescaling.to_dict(),
        "map": {"eps": fit.eps.tolist(), "logpost": fit.logpost, "grad_norm": fit.grad_norm,
                "converged": fit.converged, "n_iter": fit.n_iter, "message": fit.message},
        "grid_search": None if search is None else {
            "table": search.table(), "best_index": search.best_index,
            "best_fractions": search.best_fractions.tolist()},
        "data": {"n_train": train.n, "n_test": test.n,
                 "held_out": list(cfg["data"].get("holdout", [])),
                 "key_locations": {k: v.tolist() for k, v in locs.items()},
                 "load_report": ds.metadata["load_report"]},
    }
    return basis, train, grid, fit, payload


def cmd_fit_map(args) -> int:
    cfg = _config(args)
    _, _, _, _, payload = _fit(cfg)
    out = _outdir(cfg)
    sio.write_json(out / "fit.json", {**sio.provenance(cfg, command="fit-map"), **payload})
    return EXIT_OK


def cmd_fit_mcmc(args) -> int:
    cfg = _config(args)
    basis, train, grid, fit, payload = _fit(cfg)
    mc = cfg["mcmc"]
    config = MCMCConfig(mc["beta"], mc["n_iter"], mc["burn_in"], mc["thin"], cfg["seed"])
    samples = pcn_sample(basis, train, grid, config, init=fit.eps)
    out = _outdir(cfg)
    meta = sio.provenance(cfg, command="fit-mcmc")
    header = [f"eps_{j}" for j in range(basis.n_features)]
    sio.write_csv(out / "chain.csv", header, samples.samples.tolist(), meta)
    payload["mcmc"] = {"chain": "chain.csv", "acceptance_rate": samples.acceptance_rate,
                       "n_accepted": samples.n_accepted, "n_iter": samples.n_iter,
                       "n_retained": len(samples),
                       "final_logpost": float(samples.logpost_trace[-1])}
    sio.write_json(out / "fit.json", {**meta, **payload})
    return EXIT_OK


def _load_fit(path: Path):
    if not path.is_file():
        raise sio.ConfigError(f"{path}: fit artifact not found (run fit-map or fit-mcmc first)")
    fit = sio.read_json(path)
    if fit.get("format_version") != sio.FORMAT_VERSION:
        raise sio.ConfigError(f"{path}: unsupported format_version {fit.get('format_version')!r}")
    basis = RFFBasis.from_dict(fit["basis"])
    rescaling = sio.DatasetRescaling.from_dict(fit["rescaling"])
    mc = fit.get("mcmc")
    if mc:
        header, rows, _ = sio.read_csv_table(path.parent / mc["chain"])
        draws = np.array(rows, dtype=float)
        source = "mcmc"
    else:
        draws = np.array([fit["map"]["eps"]])
        source = "map"
    return fit, basis, rescaling, draws, source


def cmd_predict(args) -> int:
    fit_path = Path(args.fit)
    fit, basis, rescaling, draws, source = _load_fit(fit_path)
    cfg = _config(args) if args.config else _apply_overrides(fit["config"], args)
    pcfg = cfg["predict"]
    key_locs = {k: np.asarray(v) for k, v in fit["data"]["key_locations"].items()}
    targets = []
    if pcfg.get("locations"):
        for i, raw in enumerate(pcfg["locations"]):
            x = rescaling.location.forward(raw)
            if np.any(x < 0) or np.any(x > 1):
                raise sio.DataError(f"predict/locations/{i}: {raw} lies outside the data's bounding box")
            targets.append((f"loc{i}", x))
    keys = pcfg.get("keys")
    if keys is None and not targets:
        keys = fit["data"]["held_out"] or list(key_locs)
    for k in keys or []:
        if k not in key_locs:
            raise sio.DataError(f"predict/keys: unknown key {k!r}")
        targets.append((k, key_locs[k]))
    if not targets:
        raise sio.ConfigError("predict: no locations or keys to predict at")

    grid = build_grid(basis.domain, cfg["grid"]["report_m"])
    width = float(rescaling.response.width[0])
    t_raw = rescaling.response.inverse(grid.nodes)[:, 0]
    probs = np.asarray(pcfg["probs"], dtype=float)
    band_probs = np.asarray(pcfg["band_probs"], dtype=float)
    meta = sio.provenance(cfg, command="predict", fit=str(fit_path), draws_from=source)
    dens_rows, draw_rows, q_rows, summary = [], [], [], {}
    for name, x in targets:
        pred = predict_density(basis, draws, x, grid, probs, band_probs)
        x_raw = rescaling.location.inverse(x)
        for m, t in enumerate(t_raw):
            dens_rows.append([name, *x_raw, t, pred.mean[m] / width,
                              pred.bands[0, m] / width, pred.bands[-1, m] / width])
        for d, row in enumerate(pred.draws):
            draw_rows.extend([name, d, t, v / width] for t, v in zip(t_raw, row))
        entry = {"location_raw": x_raw.tolist(), "location_unit": np.asarray(x).tolist(),
                 "n_draws": int(pred.draws.shape[0]),
                 "mean": float(rescaling.response.inverse(pred.draw_means.mean(axis=0))[0]),
                 "mean_std": float(pred.draw_means.std(axis=0)[0] * width)}
        if pred.draw_quantiles is not None:
            qraw = rescaling.response.inverse(pred.draw_quantiles[..., None])[..., 0]
            if np.any(np.diff(qraw, axis=1) < 0):
                raise ArithmeticError("non-monotone quantiles")
            lo, hi = np.quantile(qraw, band_probs, axis=0)
            for j, pr in enumerate(probs):
                q_rows.append([name, pr, qraw[:, j].mean(), qraw[:, j].std(), lo[j], hi[j]])
            entry["quantiles"] = {f"{pr:g}": float(qraw[:, j].mean()) for j, pr in enumerate(probs)}
        summary[name] = entry
    out = _outdir(cfg)
    sio.write_csv(out / "predict_density.csv",
                  ["location"] + [f"x{j + 1}" for j in range(basis.domain.d_D)]
                  + ["t", "density", "band_lo", "band_hi"], dens_rows, meta)
    sio.write_csv(out / "predict_draws.csv", ["location", "draw", "t", "density"], draw_rows, meta)
    if q_rows:
        sio.write_csv(out / "predict_quantiles.csv",
                      ["location", "prob", "mean", "std", "band_lo", "band_hi"], q_rows, meta)
    sio.write_json(out / "predict.json", {**meta, "locations": summary,
                                          "probs": probs.tolist(), "band_probs": band_probs.tolist()})
    return EXIT_OK


def cmd_rates(args) -> int:
    cfg = _config(args)
    rcfg = cfg["rates"]
    domain = _domain(cfg)
    grid = build_grid(domain, rcfg["grid_m"])
    offsets = np.asarray(rcfg.get("offsets") or default_offsets(domain), dtype=float)
    fit_range = tuple(rcfg["fit_range"])
    kernels = rcfg.get("kernels") or DEFAULT_RATE_KERNELS
    meta = sio.provenance(cfg, command="rates")
    rows, results = [], []
    for kcfg in kernels:
        kcfg = dict(kcfg)
        kcfg.setdefault("lengthscales", [1.0])
        kernel = _kernel(kcfg, domain)
        label = kernel.family if kernel.nu is None else f"matern{kernel.nu:g}"
        dist = simulate_distances(kernel, offsets, grid, rcfg["n_reps"], rcfg["p"], cfg["seed"],
                                  domain, metrics=rcfg["metrics"])
        for metric, d in dist.items():
            for gamma in rcfg["gammas"]:
                res = rate_result(d, offsets, metric, gamma, kernel.holder_alpha1, fit_range)
                rows.extend([label, metric.value, gamma, h, e, s]
                             for h, e, s in zip(res.offsets, res.estimates, res.stderr))
                results.append({"kernel": kernel.to_dict(), "label": label,
                                "metric": metric.value, "gamma": gamma, "slope": res.slope,
                                "theoretical_exponent": res.theoretical,
                                "fit_range": list(fit_range), "n_reps": rcfg["n_reps"]})
    out = _outdir(cfg)
    sio.write_csv(out / "rates.csv", ["kernel", "metric", "gamma", "offset", "estimate", "stderr"],
                  rows, meta)
    sio.write_json(out / "rates.json", {**meta, "results": results})
    return EXIT_OK


def cmd_metrics(args) -> int:
    tf, f = sio.read_density_csv(args.f, args.slice_f)
    tg, g = sio.read_density_csv(args.g, args.slice_g)
    if tf.shape != tg.shape or not np.allclose(tf, tg, rtol=0, atol=1e-12):
        raise sio.DataError("the two density files use different grids")
    try:
        grid = grid_from_nodes(tf)
    except ValueError as exc:
        raise sio.DataError(str(exc)) from None
    # renormalize: files may be in raw response units or rounded
    f = f / np.dot(grid.weights, f)
    g = g / np.dot(grid.weights, g)
    bound = check_hellinger_bound(f, g, grid)
    report = {
        "format_version": sio.FORMAT_VERSION,
        "inputs": {"f": str(args.f), "g": str(args.g), "slice_f": args.slice_f, "slice_g": args.slice_g},
        "hellinger": divergence("hellinger", f, g, grid),
        "kl_fg": divergence("kl", f, g, grid),
        "kl_gf": divergence("kl", g, f, grid),
        "tv": divergence("tv", f, g, grid),
        "suplog": divergence("suplog", f, g, grid),
        "hellinger_bound_ok": bound.bound_satisfied,
    }
    if args.out:
        sio.write_json(args.out, report)
    else:
        print(json.dumps(report, indent=1, sort_keys=True))
    return EXIT_OK


# ------------------------------ parser ------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slgp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mcmc=False):
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--p", type=int, help="number of Fourier frequencies")
        p.add_argument("--grid-m", dest="grid_m", type=int, help="fit-grid nodes per T dimension")
        if mcmc:
            p.add_argument("--beta", type=float)
            p.add_argument("--iters", type=int)
            p.add_argument("--burnin", type=int)
            p.add_argument("--thin", type=int)

    p = sub.add_parser("simulate", help="draw a prior SLGP and write density slices")
    common(p)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("fit-map", help="MAP fit (with optional lengthscale grid search)")
    common(p)
    p.set_defaults(func=cmd_fit_map)
    p = sub.add_parser("fit-mcmc", help="MAP fit followed by a pCN chain")
    common(p, mcmc=True)
    p.set_defaults(func=cmd_fit_mcmc)
    p = sub.add_parser("predict", help="posterior densities and quantiles at locations")
    common(p)
    p.add_argument("--fit", type=Path, required=True, help="fit.json from fit-map/fit-mcmc")
    p.set_defaults(func=cmd_predict)
    p = sub.add_parser("rates", help="mean-power continuity experiment")
    common(p)
    p.add_argument("--reps", type=int, help="replicates per offset")
    p.set_defaults(func=cmd_rates)
    p = sub.add_parser("metrics", help="dissimilarities between two density CSV files")
    p.add_argument("f", type=Path)
    p.add_argument("g", type=Path)
    p.add_argument("--slice-f", type=int, default=0)
    p.add_argument("--slice-g", type=int, default=0)
    p.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except sio.ConfigError as exc:
        print(f"slgp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (sio.DataError, KeyError) as exc:
        print(f"slgp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ArithmeticError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"slgp: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"slgp: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
