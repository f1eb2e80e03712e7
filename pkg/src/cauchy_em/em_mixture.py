"""Monte-Carlo EM for finite mixtures of skewed Cauchy laws.

Responsibilities ``tau`` and the per-component conditional moments are kept
apart and multiplied once, inside the M-step.  Every component shares the
iteration's pool, and the update kernel is the one used by the single-law
fit, so a one-component mixture reproduces :func:`fit_cauchy` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .em_single import (
    EmConfig,
    _as_data,
    _check_eta,
    _floor_eta,
    _fsum,
    _loglik_from_density,
    _mc_density,
    _moments_from_sums,
    _pool_sums,
    _update,
    data_scale,
    pool_schedule,
)
from .errors import InsufficientDataError, ResponsibilityUnderflowError, StarvedComponentError
from .init_gof import quantile_init
from .stable_core import S1, InternalParams, UserParams, cdf_eval, convert_form, density_eval, internal_from_user, user_from_internal

__all__ = [
    "MixtureParams",
    "MixtureFitResult",
    "responsibilities",
    "component_moments",
    "mixture_mstep",
    "fit_mixture",
    "partition_init",
]

STARVATION_FRACTION = 1e-6


@dataclass(frozen=True)
class MixtureParams:
    weights: tuple
    components: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        comps = tuple(c if isinstance(c, InternalParams) else InternalParams(*c) for c in self.components)
        if len(w) == 0 or len(w) != len(comps):
            raise ValueError("need one weight per component and at least one component")
        if any(not v >= 0.0 for v in w) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"weights must be non-negative and sum to 1, got {w}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def k(self):
        return len(self.weights)

    @classmethod
    def from_user(cls, weights, components):
        return cls(tuple(weights), tuple(internal_from_user(c) for c in components))

    def user_components(self, form=S1):
        return [convert_form(user_from_internal(c), form) for c in self.components]

    def sorted_by_delta(self):
        order = sorted(range(self.k), key=lambda j: self.components[j].delta)
        return MixtureParams(tuple(self.weights[j] for j in order), tuple(self.components[j] for j in order))

    def pdf(self, y):
        return sum(w * density_eval(y, c) for w, c in zip(self.weights, self.user_components()))

    def cdf(self, y):
        return sum(w * cdf_eval(y, c) for w, c in zip(self.weights, self.user_components()))


@dataclass
class MixtureFitResult:
    weights_trace: np.ndarray  # (T, K)
    component_trace: np.ndarray  # (T, K, 3) rows of (eta, lam, delta)
    loglik_trace: np.ndarray
    averaged: MixtureParams
    config_echo: EmConfig
    data_size: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self):
        return self.weights_trace.shape[1]

    def aligned_trace(self):
        """Traces with components reordered by ascending delta at every iteration."""
        order = np.argsort(self.component_trace[:, :, 2], axis=1, kind="stable")
        w = np.take_along_axis(self.weights_trace, order, axis=1)
        c = np.take_along_axis(self.component_trace, order[:, :, None], axis=1)
        return w, c

    @property
    def averaged_user(self):
        return self.averaged.user_components()


def _component_sums(y, params, pool):
    return [_pool_sums(y, c, pool) for c in params.components]


def _tau_from_density(dens, weights):
    num = np.column_stack([w * f for w, f in zip(weights, dens)])
    tot = num.sum(axis=1)
    bad = np.flatnonzero(~(tot > 0.0))
    if bad.size:
        raise ResponsibilityUnderflowError(int(bad[0]))
    return num / tot[:, None], tot


def responsibilities(data, params, pool):
    """Posterior component probabilities, n x K, using the MC density on ``pool``."""
    y = np.atleast_1d(np.asarray(data, dtype=float))
    for c in params.components:
        _check_eta(c, 0.0)
    dens = [_mc_density(s[0], pool, c) for s, c in zip(_component_sums(y, params, pool), params.components)]
    return _tau_from_density(dens, params.weights)[0]


def component_moments(data, params, pool, eps_lambda=1e-4):
    """One ConditionalMoments (arrays over observations) per component; tau not applied."""
    y = np.atleast_1d(np.asarray(data, dtype=float))
    for c in params.components:
        _check_eta(c, 0.0)
    return [
        _moments_from_sums(y, c, s, eps_lambda)
        for c, s in zip(params.components, _component_sums(y, params, pool))
    ]


def _mstep(y, tau, moments, params, eps_eta, iteration=None):
    n, k = tau.shape
    masses = [_fsum(tau[:, j]) for j in range(k)]
    floor = k * STARVATION_FRACTION * n
    comps = []
    clamped = 0
    for j in range(k):
        if masses[j] < floor:
            raise StarvedComponentError(j, masses[j], iteration)
        theta, c = _update(y, moments[j], params.components[j], eps_eta, weight=tau[:, j])
        comps.append(theta)
        clamped += c
    total = math.fsum(masses)
    return MixtureParams(tuple(m / total for m in masses), tuple(comps)), clamped


def mixture_mstep(data, tau, moments, params_t, eps_eta=1e-12):
    """Weighted per-component updates with weights ``tau * m_r``; new weights are column means of tau."""
    y = np.asarray(data, dtype=float).ravel()
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (y.size, params_t.k) or len(moments) != params_t.k:
        raise ValueError("tau and moments must be aligned with data and components")
    return _mstep(y, tau, moments, params_t, eps_eta)[0]


def partition_init(data, k):
    """Split sorted data into K contiguous blocks and run quantile_init on each."""
    y = np.sort(np.asarray(data, dtype=float).ravel())
    blocks = np.array_split(y, k)
    comps = [quantile_init(b) for b in blocks]
    return MixtureParams.from_user([1.0 / k] * k if k > 1 else [1.0], comps)


def _coerce_init(y, init, k, weights):
    if isinstance(init, MixtureParams):
        return init
    if init is None:
        if k is None:
            raise ValueError("give either an initial MixtureParams or the number of components")
        return partition_init(y, k)
    comps = list(init)
    if weights is None:
        weights = [1.0] if len(comps) == 1 else [1.0 / len(comps)] * len(comps)
    if not all(isinstance(c, UserParams) for c in comps):
        raise TypeError("component inits must be UserParams")
    return MixtureParams.from_user(weights, comps)


def fit_mixture(data, init=None, config=None, n_components=None, weights=None):
    """Fit a K-component mixture; ``init`` is MixtureParams, a list of UserParams, or None."""
    config = config or EmConfig()
    y = _as_data(data, 3)
    params = _coerce_init(y, init, n_components, weights)
    k = params.k
    if y.size < 3 * k:
        raise InsufficientDataError(f"need at least {3 * k} observations for {k} components")
    eps_eta = config.eps_eta * data_scale(y)
    params = MixtureParams(params.weights, tuple(_floor_eta(c, eps_eta) for c in params.components))

    T = config.iterations
    w_trace = np.empty((T, k))
    c_trace = np.empty((T, k, 3))
    ll = np.empty(T)
    n_clamped = n_symmetric = 0
    pools = pool_schedule(config)
    pool = next(pools)
    sums = _component_sums(y, params, pool)
    for t in range(T):
        dens = [_mc_density(s[0], pool, c) for s, c in zip(sums, params.components)]
        tau = _tau_from_density(dens, params.weights)[0]
        moments = [_moments_from_sums(y, c, s, config.eps_lambda) for c, s in zip(params.components, sums)]
        n_symmetric += sum(m.symmetric for m in moments)
        params, clamped = _mstep(y, tau, moments, params, eps_eta, iteration=t)
        n_clamped += clamped
        pool = next(pools)
        sums = _component_sums(y, params, pool)
        dens = [_mc_density(s[0], pool, c) for s, c in zip(sums, params.components)]
        ll[t] = _loglik_from_density(_tau_from_density(dens, params.weights)[1])
        w_trace[t] = params.weights
        c_trace[t] = [(c.eta, c.lam, c.delta) for c in params.components]

    result = MixtureFitResult(
        weights_trace=w_trace,
        component_trace=c_trace,
        loglik_trace=ll,
        averaged=None,
        config_echo=config,
        data_size=y.size,
        diagnostics={"eta_clamped_updates": n_clamped, "symmetric_updates": n_symmetric},
    )
    w_al, c_al = result.aligned_trace()
    w_avg = w_al[config.burn_in:].mean(axis=0)
    w_avg = w_avg / w_avg.sum()
    c_avg = c_al[config.burn_in:].mean(axis=0)
    result.averaged = MixtureParams(tuple(w_avg), tuple(InternalParams(*row) for row in c_avg))
    return result
