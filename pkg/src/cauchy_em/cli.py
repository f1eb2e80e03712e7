"""Command-line interface.

Every command is driven by a plain config dict built from its flags.  The
JSON result document embeds that dict, so ``cauchy-em rerun result.json``
replays the command and, without ``--timing``, writes identical bytes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments
from .datasets import fixture_names, load_fixture, read_dataset
from .em_mixture import MixtureParams, fit_mixture
from .em_single import EmConfig, fit_cauchy, ml_fit, ml_loglik
from .errors import CauchyEMError, NumericalError
from .init_gof import gof_report, quantile_init
from .stable_core import (
    S0,
    S1,
    InternalParams,
    UserParams,
    cdf_eval,
    convert_form,
    density_eval,
    sample_cauchy,
    user_from_internal,
)

SCHEMA_VERSION = 1
TRACE_COLUMNS = ("iteration", "eta", "lambda", "delta", "beta", "sigma", "mu", "loglik")

MIXTURE_NOTES = [
    "mixture weights updated as the column means of the responsibility matrix",
    "responsibilities and conditional moments are multiplied once in the M-step",
    "each component update uses the single-law sequencing: eta from the previous (lambda, delta), "
    "lambda from the previous delta, delta from the new lambda",
    "component labels aligned by ascending delta before averaging",
]


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _floats(text):
    return [float(v) for v in text.split(",")] if text is not None else None


def _load_data(cfg):
    if cfg.get("fixture"):
        return load_fixture(cfg["fixture"])
    if not cfg.get("data"):
        raise CauchyEMError("give a data file or --fixture")
    return read_dataset(cfg["data"])


def _params_dict(p):
    return {"form": p.form, "beta": p.beta, "sigma": p.sigma, "mu": p.mu}


def _internal_dict(theta):
    return {"eta": theta.eta, "lambda": theta.lam, "delta": theta.delta}


def _em_config(cfg):
    return EmConfig.from_dict(cfg["em"])


def _em_flags(p):
    p.add_argument("--iters", type=int, default=EmConfig.iterations, help="EM iterations T")
    p.add_argument("--burn-in", type=int, default=EmConfig.burn_in, help="iterations discarded before averaging")
    p.add_argument("--mc-size", type=int, default=EmConfig.mc_size, help="Monte-Carlo pool size M")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixed-pool", action="store_true", help="reuse one pool for all iterations")


def _em_cfg_from_args(a):
    return EmConfig(iterations=a.iters, burn_in=a.burn_in, mc_size=a.mc_size, seed=a.seed,
                    refresh_pool=not a.fixed_pool, ml_compare=getattr(a, "ml", False)).to_dict()


def _write_trace_rows(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join([str(int(row[0]))] + [repr(float(v)) for v in row[1:]]) + "\n")


def _user_rows(trace):
    return np.array([user_from_internal(InternalParams(*r)).as_tuple() for r in trace])


def _trace_rows(trace, loglik):
    it = np.arange(1, trace.shape[0] + 1)
    return np.column_stack([it, trace, _user_rows(trace), loglik])


# ---------------------------------------------------------------------------
# Commands: each maps a config dict to (document body, stdout payload or None)
# ---------------------------------------------------------------------------


def run_simulate(cfg):
    params = UserParams(cfg["beta"], cfg["sigma"], cfg["mu"], cfg["form"])
    y = sample_cauchy(params, cfg["seed"], cfg["n"])
    try:
        with open(cfg["out"], "w", encoding="utf-8") as fh:
            fh.write(f"# skewed Cauchy sample: beta={params.beta!r} sigma={params.sigma!r} mu={params.mu!r} "
                     f"form={params.form} seed={cfg['seed']} n={cfg['n']}\n")
            fh.write("y\n")
            fh.writelines(f"{v!r}\n" for v in y.tolist())
    except OSError as exc:
        raise CauchyEMError(f"cannot write {cfg['out']}: {exc}") from exc
    return {"params": _params_dict(params), "seed": cfg["seed"], "n": cfg["n"], "out": cfg["out"]}, None


def _fit_init(cfg, y):
    init = cfg["init"]
    given = {k: init[k] for k in ("beta", "sigma", "mu") if init.get(k) is not None}
    if not given:
        return quantile_init(y), False
    if len(given) == 3:
        return convert_form(UserParams(given["beta"], given["sigma"], given["mu"], init["form"]), S1), True
    base = convert_form(quantile_init(y), init["form"])
    merged = dataclasses.replace(base, **given)
    return convert_form(UserParams(merged.beta, merged.sigma, merged.mu, init["form"]), S1), True


def run_fit(cfg):
    y = _load_data(cfg)
    config = _em_config(cfg)
    init, overridden = _fit_init(cfg, y)
    res = fit_cauchy(y, init, config)
    est = res.estimate(cfg["form"])
    gof = gof_report(y, est)
    if cfg.get("trace"):
        _write_trace_rows(cfg["trace"], _trace_rows(res.trace, res.loglik_trace))
    notes = ["EM runs in the S1 parameterisation; estimates are averages over iterations after burn-in"]
    if cfg["form"] == S0:
        notes.append("S0 location = S1 location + (2/pi) beta sigma log sigma")
    notes.append("initial values " + ("from flags" if overridden else "from alpha=1 quantile estimates"))
    if config.refresh_pool:
        notes.append("fresh Monte-Carlo pool drawn at every iteration from the run seed")
    body = {
        "n": int(y.size),
        "init": _params_dict(init),
        "estimates": _params_dict(est),
        "internal": _internal_dict(res.averaged_internal),
        "gof": gof.to_dict(),
        "loglik_final": float(res.loglik_trace[-1]),
        "diagnostics": res.diagnostics,
        "trace": {"file": cfg.get("trace"), "rows": int(res.trace.shape[0]), "columns": list(TRACE_COLUMNS)},
        "provenance": notes,
    }
    if config.ml_compare:
        ml = convert_form(ml_fit(y, init), cfg["form"])
        body["ml"] = {"estimates": _params_dict(ml), "loglik": ml_loglik(y, ml), "gof": gof_report(y, ml).to_dict()}
    return body, None


def _mixture_init(cfg, y):
    init = cfg["init"]
    if init.get("beta") is None:
        return None
    k = cfg["components"]
    lists = [init[key] for key in ("beta", "sigma", "mu")]
    if any(v is None or len(v) != k for v in lists):
        raise CauchyEMError(f"--init-beta, --init-sigma and --init-mu need {k} comma-separated values each")
    weights = init.get("weights") or [1.0 / k] * k
    if len(weights) != k:
        raise CauchyEMError(f"--init-weights needs {k} values")
    comps = [convert_form(UserParams(b, s, m, init["form"]), S1) for b, s, m in zip(*lists)]
    total = sum(weights)
    return MixtureParams.from_user([w / total for w in weights], comps)


def run_fit_mixture(cfg):
    y = _load_data(cfg)
    config = _em_config(cfg)
    init = _mixture_init(cfg, y)
    res = fit_mixture(y, init, config, n_components=cfg["components"])
    gof = gof_report(y, res.averaged)
    form = cfg["form"]
    if cfg.get("trace"):
        stem = Path(cfg["trace"])
        w_al, c_al = res.aligned_trace()
        for j in range(res.k):
            path = stem.with_name(f"{stem.stem}_component{j + 1}{stem.suffix or '.csv'}")
            _write_trace_rows(path, _trace_rows(c_al[:, j], res.loglik_trace))
        np.savetxt(stem.with_name(f"{stem.stem}_weights{stem.suffix or '.csv'}"), w_al, delimiter=",",
                   header=",".join(f"weight{j + 1}" for j in range(res.k)), comments="", fmt="%.17g")
    comps = res.averaged.user_components(form)
    body = {
        "n": int(y.size),
        "components": res.k,
        "init": None if init is None else {
            "weights": list(init.weights), "components": [_params_dict(c) for c in init.user_components(S1)]},
        "estimates": {"weights": list(res.averaged.weights), "components": [_params_dict(c) for c in comps]},
        "internal": [_internal_dict(c) for c in res.averaged.components],
        "gof": gof.to_dict(),
        "loglik_final": float(res.loglik_trace[-1]),
        "diagnostics": res.diagnostics,
        "trace": {"file": cfg.get("trace"), "rows": int(res.loglik_trace.size), "columns": list(TRACE_COLUMNS)},
        "provenance": MIXTURE_NOTES + (["initial values from per-block quantile estimates"] if init is None else []),
    }
    return body, None


def _density_grid(cfg):
    if cfg.get("y") is not None:
        return np.asarray(cfg["y"], dtype=float)
    return np.linspace(cfg["y_min"], cfg["y_max"], cfg["points"])


def run_density(cfg):
    params = UserParams(cfg["beta"], cfg["sigma"], cfg["mu"], cfg["form"])
    grid = _density_grid(cfg)
    lines = ["y,pdf,cdf,note"]
    n_bad = 0
    for v in grid.tolist():
        note = ""
        try:
            pdf = float(density_eval(v, params))
            cdf = float(cdf_eval(v, params))
        except NumericalError as exc:
            pdf = cdf = float("nan")
            note = f"quadrature failed: {exc}"
            n_bad += 1
        lines.append(f"{v!r},{pdf!r},{cdf!r},{note}")
    text = "\n".join(lines) + "\n"
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text, encoding="utf-8")
        text = None
    return {"params": _params_dict(params), "points": int(grid.size), "failed_rows": n_bad, "out": cfg.get("out")}, text


def run_bench(cfg):
    em = _em_config(cfg)
    if cfg["mode"] == "single":
        spec = experiments.SweepSpec(tuple(cfg["betas"]), tuple(cfg["sigmas"]), cfg["n"], cfg["replications"],
                                     cfg["seed"], tuple(cfg["estimators"]))
        fitters = experiments.stub_fitters(spec.estimators) if cfg["stub"] else None
        table = experiments.rmse_sweep(spec, em, fitters)
    else:
        fitter = (lambda data, seed, truth: truth) if cfg["stub"] else None
        table = experiments.mixture_sweep(cfg["scenario"], cfg["n"], cfg["replications"], em, cfg["seed"],
                                          tuple(cfg["betas"]), fitter)
    text = table.to_csv()
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text, encoding="utf-8")
        text = None
    return {"rows": len(table.rows), "notes": table.notes, "out": cfg.get("out")}, text


RUNNERS = {
    "simulate": run_simulate,
    "fit": run_fit,
    "fit-mixture": run_fit_mixture,
    "density": run_density,
    "bench": run_bench,
}


def execute(command, cfg):
    """Run ``command`` with ``cfg``; returns (ResultDocument dict, stdout payload)."""
    start = time.perf_counter()
    body, payload = RUNNERS[command](cfg)
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "config": cfg}
    doc.update(body)
    if cfg.get("timing"):
        doc["wall_time_s"] = time.perf_counter() - start
    return doc, payload


def dump_document(doc):
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=True) + "\n"


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(p, result_default_stdout=True):
    p.add_argument("--result", help="write the JSON result document here"
                   + (" (default: stdout)" if result_default_stdout else " (default: not written)"))
    p.add_argument("--timing", action="store_true", help="record wall time in the result document")


def _add_params(p, required=True):
    p.add_argument("--beta", type=float, required=required)
    p.add_argument("--sigma", type=float, required=required)
    p.add_argument("--mu", type=float, required=required)
    p.add_argument("--form", choices=(S0, S1), default=S1, help="parameterisation of --mu (default S1)")


def _add_data(p):
    p.add_argument("data", nargs="?", help="single-column CSV of observations")
    p.add_argument("--fixture", choices=fixture_names(), help="use a bundled dataset instead of a file")


def build_parser():
    parser = argparse.ArgumentParser(prog="cauchy-em", description="EM estimation for skewed Cauchy laws.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a sample")
    _add_params(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV")
    _add_common(p)

    p = sub.add_parser("fit", help="fit one skewed Cauchy law")
    _add_data(p)
    _em_flags(p)
    p.add_argument("--init-beta", type=float)
    p.add_argument("--init-sigma", type=float)
    p.add_argument("--init-mu", type=float)
    p.add_argument("--init-form", choices=(S0, S1), default=S1)
    p.add_argument("--form", choices=(S0, S1), default=S1, help="reporting form (default S1)")
    p.add_argument("--trace", help="write the iteration trace CSV here")
    p.add_argument("--ml", action="store_true", help="also report the maximum-likelihood fit")
    _add_common(p)

    p = sub.add_parser("fit-mixture", help="fit a K-component mixture")
    _add_data(p)
    _em_flags(p)
    p.add_argument("--components", type=int, default=2)
    p.add_argument("--init-weights", type=_floats, help="comma-separated, one per component")
    p.add_argument("--init-beta", type=_floats)
    p.add_argument("--init-sigma", type=_floats)
    p.add_argument("--init-mu", type=_floats)
    p.add_argument("--init-form", choices=(S0, S1), default=S1)
    p.add_argument("--form", choices=(S0, S1), default=S1, help="reporting form (default S1)")
    p.add_argument("--trace", help="trace CSV stem; one file per component plus weights")
    _add_common(p)

    p = sub.add_parser("density", help="tabulate pdf and cdf")
    _add_params(p)
    p.add_argument("--y", type=_floats, help="comma-separated evaluation points")
    p.add_argument("--y-min", type=float, default=-10.0)
    p.add_argument("--y-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--out", help="output CSV (default: stdout)")
    _add_common(p, result_default_stdout=False)

    p = sub.add_parser("bench", help="RMSE sweep (EM vs ML, or mixture scenarios)")
    p.add_argument("--mode", choices=("single", "mixture"), default="single")
    p.add_argument("--scenario", type=int, choices=(1, 2), default=1)
    p.add_argument("--betas", type=_floats, default=list(experiments.BETA_GRID))
    p.add_argument("--sigmas", type=_floats, default=list(experiments.SIGMA_LEVELS))
    p.add_argument("--n", type=int)
    p.add_argument("--replications", type=int, default=20)
    p.add_argument("--estimators", default="EM,ML")
    p.add_argument("--stub", action="store_true", help="estimators return the truth (harness check)")
    p.add_argument("--iters", type=int, default=experiments.DESK_EM_CONFIG.iterations)
    p.add_argument("--burn-in", type=int, default=experiments.DESK_EM_CONFIG.burn_in)
    p.add_argument("--mc-size", type=int, default=experiments.DESK_EM_CONFIG.mc_size)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixed-pool", action="store_true")
    p.add_argument("--out", help="output CSV (default: stdout)")
    _add_common(p, result_default_stdout=False)

    p = sub.add_parser("rerun", help="replay the command recorded in a result document")
    p.add_argument("document")
    p.add_argument("--result", help="write the new document here (default: stdout)")

    sub.add_parser("fixtures", help="list bundled datasets")
    return parser


def config_from_args(a):
    cmd = a.command
    if cmd == "simulate":
        return {"beta": a.beta, "sigma": a.sigma, "mu": a.mu, "form": a.form, "n": a.n, "seed": a.seed,
                "out": a.out, "timing": a.timing}
    if cmd in ("fit", "fit-mixture"):
        cfg = {"data": a.data, "fixture": a.fixture, "em": _em_cfg_from_args(a), "form": a.form,
               "trace": a.trace, "timing": a.timing}
        init = {"beta": a.init_beta, "sigma": a.init_sigma, "mu": a.init_mu, "form": a.init_form}
        if cmd == "fit-mixture":
            cfg["components"] = a.components
            init["weights"] = a.init_weights
        cfg["init"] = init
        return cfg
    if cmd == "density":
        return {"beta": a.beta, "sigma": a.sigma, "mu": a.mu, "form": a.form, "y": a.y, "y_min": a.y_min,
                "y_max": a.y_max, "points": a.points, "out": a.out, "timing": a.timing}
    if cmd == "bench":
        n = a.n if a.n is not None else (300 if a.mode == "single" else 1000)
        return {"mode": a.mode, "scenario": a.scenario, "betas": a.betas, "sigmas": a.sigmas, "n": n,
                "replications": a.replications, "estimators": a.estimators.split(","), "stub": a.stub,
                "seed": a.seed, "em": _em_cfg_from_args(a), "out": a.out, "timing": a.timing}
    raise ValueError(cmd)


def _emit(doc, payload, result_path, doc_to_stdout):
    text = dump_document(doc)
    if payload is not None:
        sys.stdout.write(payload)
    if result_path:
        Path(result_path).write_text(text, encoding="utf-8")
    elif doc_to_stdout and payload is None:
        sys.stdout.write(text)


def main(argv=None):
    parser = build_parser()
    a = parser.parse_args(argv)
    try:
        if a.command == "fixtures":
            for name in fixture_names():
                print(name)
            return 0
        if a.command == "rerun":
            recorded = json.loads(Path(a.document).read_text(encoding="utf-8"))
            if recorded.get("schema_version") != SCHEMA_VERSION:
                raise CauchyEMError(f"unsupported schema_version {recorded.get('schema_version')!r}")
            doc, payload = execute(recorded["command"], recorded["config"])
            _emit(doc, payload, a.result, True)
            return 0
        cfg = config_from_args(a)
        doc, payload = execute(a.command, cfg)
        _emit(doc, payload, a.result, a.command in ("simulate", "fit", "fit-mixture"))
        return 0
    except (CauchyEMError, ValueError, OSError) as exc:
        print(f"cauchy-em {a.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
