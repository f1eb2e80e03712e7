"""Replication sweeps: EM against ML for single laws, and two-component mixtures.

Each replication draws its data from a seed that depends only on the sweep
seed and the replication index, so every grid cell sees the same underlying
random numbers (paired comparisons across cells and estimators).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .em_mixture import MixtureParams, fit_mixture
from .em_single import EmConfig, fit_cauchy, ml_fit
from .errors import CauchyEMError
from .stable_core import S0, S1, UserParams, convert_form, sample_cauchy

__all__ = [
    "SweepSpec",
    "RmseRow",
    "RmseTable",
    "rmse_sweep",
    "mixture_sweep",
    "simulate_mixture",
    "stub_fitters",
    "DESK_EM_CONFIG",
    "MIXTURE_SCENARIOS",
]

BETA_GRID = (0.0, 0.15, 0.30, 0.45, 0.60, 0.75, 0.90)
SIGMA_LEVELS = (0.1, 2.0, 5.0)
CSV_COLUMNS = ("estimator", "parameter", "beta", "sigma_level", "component", "rmse", "replications", "failures")
DESK_EM_CONFIG = EmConfig(iterations=400, burn_in=200, mc_size=3000)
# scenario -> (common component scale, locations, weights)
MIXTURE_SCENARIOS = {
    1: (0.25, (-3.0, 3.0), (0.5, 0.5)),
    2: (0.5, (-3.0, 3.0), (0.5, 0.5)),
}
# Exceptions counted as failed replications; anything else is a bug and propagates.
FIT_FAILURES = (CauchyEMError, ArithmeticError, ValueError)


@dataclass(frozen=True)
class SweepSpec:
    beta_grid: tuple = BETA_GRID
    sigma_levels: tuple = SIGMA_LEVELS
    n: int = 300
    replications: int = 20
    seed: int = 0
    estimators: tuple = ("EM", "ML")

    def __post_init__(self):
        if not self.beta_grid or not self.sigma_levels:
            raise ValueError("grids must be non-empty")
        if self.replications < 1 or self.n < 3:
            raise ValueError("need replications >= 1 and n >= 3")
        unknown = set(self.estimators) - {"EM", "ML"}
        if unknown or not self.estimators:
            raise ValueError(f"estimators must be a non-empty subset of EM, ML; got {self.estimators}")


@dataclass(frozen=True)
class RmseRow:
    estimator: str
    parameter: str
    beta: float
    sigma_level: float
    component: int  # 0 for single-law sweeps, 1..K for mixtures
    rmse: float  # nan when every replication failed
    replications: int
    failures: int

    @property
    def valid(self):
        return self.failures < self.replications


@dataclass
class RmseTable:
    rows: list
    notes: list = field(default_factory=list)

    def lookup(self, estimator, parameter, beta, sigma_level, component=0):
        for r in self.rows:
            if (r.estimator, r.parameter, r.component) == (estimator, parameter, component) and math.isclose(
                r.beta, beta
            ) and math.isclose(r.sigma_level, sigma_level):
                return r
        raise KeyError((estimator, parameter, beta, sigma_level, component))

    def cells(self):
        return sorted({(r.beta, r.sigma_level) for r in self.rows})

    def to_csv(self, fh=None):
        out = fh or io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.estimator, r.parameter, repr(r.beta), repr(r.sigma_level), r.component,
                        repr(r.rmse), r.replications, r.failures])
        return out.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, text):
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            rows.append(RmseRow(rec["estimator"], rec["parameter"], float(rec["beta"]), float(rec["sigma_level"]),
                                int(rec["component"]), float(rec["rmse"]), int(rec["replications"]),
                                int(rec["failures"])))
        return cls(rows)


def _seed(*keys):
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0])


def _rmse(errors):
    if not errors:
        return math.nan
    # fsum makes the result independent of replication order
    return math.sqrt(math.fsum(e * e for e in errors) / len(errors))


def default_fitters(em_config):
    def em(data, seed, truth):
        return fit_cauchy(data, config=dataclasses.replace(em_config, seed=seed)).averaged_user

    def ml(data, seed, truth):
        return ml_fit(data)

    return {"EM": em, "ML": ml}


def stub_fitters(estimators=("EM", "ML")):
    """Fitters that return the truth; for exercising the harness."""
    return {name: (lambda data, seed, truth: truth) for name in estimators}


def rmse_sweep(spec, em_config=DESK_EM_CONFIG, fitters=None, progress=None):
    """RMSE of (beta, sigma, mu) for each estimator over the (beta, sigma) grid.

    ``fitters`` maps estimator name to ``f(data, seed, truth) -> UserParams`` and
    defaults to the EM and ML fits.  Truth has mu = 0 in S1 form and errors
    are measured in S1.  A failed fit counts towards the cell's failures and
    is left out of its RMSE.
    """
    fitters = fitters or default_fitters(em_config)
    rows, notes = [], []
    for sigma in spec.sigma_levels:
        for beta in spec.beta_grid:
            truth = UserParams(beta, sigma, 0.0, S1)
            errs = {(e, p): [] for e in spec.estimators for p in ("beta", "sigma", "mu")}
            fails = dict.fromkeys(spec.estimators, 0)
            for rep in range(spec.replications):
                data = sample_cauchy(truth, _seed(spec.seed, rep), spec.n)
                for name in spec.estimators:
                    try:
                        est = convert_form(fitters[name](data, _seed(spec.seed, rep, 1), truth), S1)
                    except FIT_FAILURES as exc:
                        fails[name] += 1
                        notes.append(f"{name} beta={beta} sigma={sigma} rep={rep}: {type(exc).__name__}: {exc}")
                        continue
                    errs[name, "beta"].append(est.beta - beta)
                    errs[name, "sigma"].append(est.sigma - sigma)
                    errs[name, "mu"].append(est.mu)
            for name in spec.estimators:
                if fails[name] == spec.replications:
                    notes.append(f"{name} beta={beta} sigma={sigma}: every replication failed; cell invalid")
                for p in ("beta", "sigma", "mu"):
                    rows.append(RmseRow(name, p, beta, sigma, 0, _rmse(errs[name, p]), spec.replications, fails[name]))
            if progress:
                progress(beta, sigma)
    return RmseTable(rows, notes)


def simulate_mixture(weights, components, seed, n):
    """Draw n points from a mixture of UserParams components."""
    rng = np.random.default_rng(_seed(seed, 0))
    labels = rng.choice(len(weights), size=n, p=np.asarray(weights) / np.sum(weights))
    out = np.empty(n)
    for j, comp in enumerate(components):
        idx = np.flatnonzero(labels == j)
        if idx.size:
            out[idx] = sample_cauchy(comp, _seed(seed, 1, j), idx.size)
    return out


def _default_mixture_fitter(em_config, k):
    def fit(data, seed, truth):
        return fit_mixture(data, config=dataclasses.replace(em_config, seed=seed), n_components=k).averaged

    return fit


def mixture_sweep(scenario, n=1000, replications=20, em_config=DESK_EM_CONFIG, seed=0,
                  beta_grid=BETA_GRID, fitter=None, form=S0, progress=None):
    """RMSE of weights and component parameters for the two-component scenarios.

    Both components share the skewness ``beta``; estimates are ordered by
    ascending location before comparison.  Parameters are compared in
    ``form`` (locations differ between S0 and S1).  ``fitter`` maps
    ``(data, seed, truth)`` to a MixtureParams; ``truth`` is the generating
    MixtureParams.
    """
    if scenario not in MIXTURE_SCENARIOS:
        raise ValueError(f"scenario must be one of {sorted(MIXTURE_SCENARIOS)}")
    sigma, mus, weights = MIXTURE_SCENARIOS[scenario]
    k = len(mus)
    fitter = fitter or _default_mixture_fitter(em_config, k)
    params = ("weight", "beta", "sigma", "mu")
    rows, notes = [], []
    for beta in beta_grid:
        comps = [UserParams(beta, sigma, m, form) for m in mus]
        truth = MixtureParams.from_user(weights, comps)
        errs = {(p, j): [] for p in params for j in range(k)}
        fails = 0
        for rep in range(replications):
            data = simulate_mixture(weights, comps, _seed(seed, rep), n)
            try:
                est = fitter(data, _seed(seed, rep, 1), truth)
            except FIT_FAILURES as exc:
                fails += 1
                notes.append(f"EM beta={beta} scenario={scenario} rep={rep}: {type(exc).__name__}: {exc}")
                continue
            fitted = est.user_components(form)
            order = sorted(range(k), key=lambda j: fitted[j].mu)
            for slot, j in enumerate(order):
                c = fitted[j]
                errs["weight", slot].append(est.weights[j] - weights[slot])
                errs["beta", slot].append(c.beta - beta)
                errs["sigma", slot].append(c.sigma - sigma)
                errs["mu", slot].append(c.mu - mus[slot])
        if fails == replications:
            notes.append(f"EM beta={beta} scenario={scenario}: every replication failed; cell invalid")
        for p in params:
            for j in range(k):
                rows.append(RmseRow("EM", p, beta, sigma, j + 1, _rmse(errs[p, j]), replications, fails))
        if progress:
            progress(beta, sigma)
    return RmseTable(rows, notes)
