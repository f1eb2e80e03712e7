"""Monte-Carlo EM for a single skewed Cauchy law.

Given the hierarchy ``Y | Z, P ~ N(delta + lam P, eta^2 / Z^2)`` the E-step
needs ``E(Z^2 P^r | y)`` for r = 0, 1, 2.  With pool draws ``p_j`` and
``u_j = 1 / (1 + q_j^2)``, ``q_j = (y - lam p_j - delta) / eta``, these are
estimated by the self-normalised ratio ``2 sum(u_j^2 p_j^r) / sum(u_j)``.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import (
    DegenerateMomentsError,
    DegenerateScaleError,
    InsufficientDataError,
    NumericalError,
    OptimizationError,
)
from .init_gof import quantile_init
from .stable_core import (
    S0,
    S1,
    InternalParams,
    MonteCarloPool,
    UserParams,
    convert_form,
    internal_from_user,
    user_from_internal,
)

__all__ = [
    "ConditionalMoments",
    "EmConfig",
    "FitResult",
    "estep_moments",
    "mstep_update",
    "loglik",
    "fit_cauchy",
    "ml_fit",
    "ml_loglik",
    "pool_schedule",
    "data_scale",
]

_CHUNK = 512


@dataclass(frozen=True)
class ConditionalMoments:
    """Per-observation estimates of E(Z^2 P^r | y) for r = 0, 1, 2.

    ``symmetric`` marks the closed-form mode used when |lam| is negligible;
    m1 and m2 are then zero and the M-step holds lam at 0.
    """

    m0: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    symmetric: bool = False


@dataclass(frozen=True)
class EmConfig:
    iterations: int = 1000
    burn_in: int = 500
    mc_size: int = 3000
    seed: int = 0
    # eta floor, relative to the data scale
    eps_eta: float = 1e-8
    # |lam| below eps_lambda * (eta + |lam|) switches to the symmetric E-step
    eps_lambda: float = 1e-4
    # draw a fresh pool every iteration; False reuses one pool for the fit
    refresh_pool: bool = True
    ml_compare: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.mc_size < 1:
            raise ValueError("mc_size must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not (self.eps_eta > 0 and self.eps_lambda > 0):
            raise ValueError("eps_eta and eps_lambda must be positive")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class FitResult:
    trace: np.ndarray  # (T, 3) rows of (eta, lam, delta)
    loglik_trace: np.ndarray
    averaged_internal: InternalParams
    averaged_user: UserParams
    config_echo: EmConfig
    data_size: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def trace_params(self):
        return [InternalParams(*row) for row in self.trace]

    def user_trace(self):
        """(T, 3) array of S1 (beta, sigma, mu) per iteration."""
        return np.array([user_from_internal(InternalParams(*row)).as_tuple() for row in self.trace])

    def estimate(self, form=S1):
        return convert_form(self.averaged_user, form)


# ---------------------------------------------------------------------------
# Pool handling
# ---------------------------------------------------------------------------


def _iteration_seed(seed, t):
    return int(np.random.SeedSequence([seed, t]).generate_state(1, np.uint64)[0])


def pool_schedule(config):
    """Yield the pool for every E-step, plus one more to score the last iterate.

    With ``refresh_pool`` the pool for step t is drawn from its own substream
    of ``config.seed``; otherwise the step-0 pool is reused throughout.
    """
    first = MonteCarloPool.generate(_iteration_seed(config.seed, 0), config.mc_size)
    yield first
    for t in range(1, config.iterations + 1):
        if config.refresh_pool:
            yield MonteCarloPool.generate(_iteration_seed(config.seed, t), config.mc_size)
        else:
            yield first


# ---------------------------------------------------------------------------
# Pool sums shared by the E-step, the MC density and the log-likelihood
# ---------------------------------------------------------------------------


def _pool_sums(y, theta, pool):
    """Per-observation sums of u, u^2, u^2 p and u^2 p^2 over the pool."""
    p = pool.samples
    p2 = p * p
    shifted = theta.lam * p + theta.delta
    n = y.size
    s1 = np.empty(n)
    s2 = np.empty(n)
    s2p = np.empty(n)
    s2pp = np.empty(n)
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        u = np.subtract(y[start:stop, None], shifted)
        u /= theta.eta
        np.multiply(u, u, out=u)
        u += 1.0
        np.reciprocal(u, out=u)
        s1[start:stop] = u.sum(axis=1)
        np.multiply(u, u, out=u)
        s2[start:stop] = u.sum(axis=1)
        s2p[start:stop] = u @ p
        s2pp[start:stop] = u @ p2
    return s1, s2, s2p, s2pp


def _mc_density(s1, pool, theta):
    return s1 / (pool.size * math.pi * theta.eta)


def _is_symmetric(theta, eps_lambda):
    return abs(theta.lam) < eps_lambda * (theta.eta + abs(theta.lam))


def _moments_from_sums(y, theta, sums, eps_lambda):
    if _is_symmetric(theta, eps_lambda):
        q = (y - theta.delta) / theta.eta
        zeros = np.zeros_like(y)
        return ConditionalMoments(2.0 / (1.0 + q * q), zeros, zeros.copy(), symmetric=True)
    s1, s2, s2p, s2pp = sums
    return ConditionalMoments(2.0 * s2 / s1, 2.0 * s2p / s1, 2.0 * s2pp / s1)


def _check_eta(theta, eps_eta):
    if not theta.eta > 0.0 or theta.eta < eps_eta:
        raise DegenerateScaleError(f"eta={theta.eta:.3g} is below the floor {eps_eta:.3g}")


def estep_moments(y, theta, pool, eps_eta=0.0, eps_lambda=1e-4):
    """Self-normalised Monte-Carlo estimates of E(Z^2 P^r | y, theta).

    ``y`` may be a scalar or an array of observations; the returned moment
    arrays have the same length as ``np.atleast_1d(y)``.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    _check_eta(theta, eps_eta)
    if _is_symmetric(theta, eps_lambda):
        return _moments_from_sums(y, theta, None, eps_lambda)
    return _moments_from_sums(y, theta, _pool_sums(y, theta, pool), eps_lambda)


def _fsum(a):
    return math.fsum(a.tolist())


def _update(y, moments, theta, eps_eta, weight=None):
    """One conditional-maximisation pass; returns (new theta, eta clamped?).

    eta uses (lam, delta) from the previous iterate, lam uses the previous
    delta and delta uses the new lam.  ``weight`` multiplies every moment
    (mixture responsibilities); the eta denominator becomes its sum.
    """
    m0, m1, m2 = moments.m0, moments.m1, moments.m2
    if weight is None:
        mass = float(y.size)
    else:
        m0, m1, m2 = weight * m0, weight * m1, weight * m2
        mass = _fsum(weight)
    r = y - theta.delta
    s0 = _fsum(m0)
    if not s0 > 0.0:
        raise DegenerateMomentsError("sum of E(Z^2 | y) vanished")
    if moments.symmetric:
        lam = 0.0
        radicand = _fsum(r * r * m0) / mass
    else:
        s2 = _fsum(m2)
        if not s2 > 0.0:
            raise DegenerateMomentsError("sum of E(Z^2 P^2 | y) vanished")
        rm1 = _fsum(r * m1)
        radicand = (_fsum(r * r * m0) + theta.lam**2 * s2 - 2.0 * theta.lam * rm1) / mass
        lam = rm1 / s2
    delta = (_fsum(y * m0) - lam * _fsum(m1)) / s0
    clamped = not radicand >= eps_eta**2
    eta = eps_eta if clamped else math.sqrt(radicand)
    if not all(math.isfinite(v) for v in (eta, lam, delta)):
        raise NumericalError("M-step produced non-finite parameters")
    return InternalParams(eta, lam, delta), clamped


def mstep_update(data, moments, theta_t, eps_eta=1e-12):
    """Closed-form M-step; eta is floored at ``eps_eta``."""
    y = np.asarray(data, dtype=float).ravel()
    if y.size == 0:
        raise InsufficientDataError("M-step needs data")
    if moments.m0.shape != y.shape:
        raise ValueError("moments are not aligned with the data")
    return _update(y, moments, theta_t, eps_eta)[0]


def loglik(data, theta, pool):
    """Observed-data log-likelihood with the density estimated on ``pool``."""
    y = np.atleast_1d(np.asarray(data, dtype=float))
    if not theta.eta > 0.0:
        raise DegenerateScaleError("log-likelihood needs eta > 0")
    s1 = _pool_sums(y, theta, pool)[0]
    return _loglik_from_density(_mc_density(s1, pool, theta))


def _loglik_from_density(f):
    if np.any(f <= 0.0) or not np.all(np.isfinite(f)):
        raise NumericalError("non-positive density estimate")
    return _fsum(np.log(f))


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def data_scale(y):
    q25, q50, q75 = np.quantile(y, [0.25, 0.5, 0.75])
    iqr = q75 - q25
    return float(iqr) if iqr > 0 else max(abs(float(q50)), 1.0)


def _as_data(data, min_n):
    y = np.asarray(data, dtype=float).ravel()
    if y.size < min_n:
        raise InsufficientDataError(f"need at least {min_n} observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise InsufficientDataError("data contain non-finite values")
    return y


def _floor_eta(theta, eps_eta):
    if theta.eta < eps_eta:
        return InternalParams(eps_eta, theta.lam, theta.delta)
    return theta


def _window_mean(trace, burn_in):
    return trace[burn_in:].mean(axis=0)


def fit_cauchy(data, init=None, config=None):
    """Run ``config.iterations`` MCEM steps and average the post-burn-in trace."""
    config = config or EmConfig()
    y = _as_data(data, 3)
    if init is None:
        init = quantile_init(y)
    eps_eta = config.eps_eta * data_scale(y)
    theta = _floor_eta(internal_from_user(init), eps_eta)

    T = config.iterations
    trace = np.empty((T, 3))
    ll = np.empty(T)
    n_clamped = n_symmetric = 0
    pools = pool_schedule(config)
    sums = _pool_sums(y, theta, next(pools))
    for t in range(T):
        moments = _moments_from_sums(y, theta, sums, config.eps_lambda)
        n_symmetric += moments.symmetric
        theta, clamped = _update(y, moments, theta, eps_eta)
        n_clamped += clamped
        pool = next(pools)
        sums = _pool_sums(y, theta, pool)
        trace[t] = (theta.eta, theta.lam, theta.delta)
        ll[t] = _loglik_from_density(_mc_density(sums[0], pool, theta))

    avg = InternalParams(*_window_mean(trace, config.burn_in))
    return FitResult(
        trace=trace,
        loglik_trace=ll,
        averaged_internal=avg,
        averaged_user=user_from_internal(avg),
        config_echo=config,
        data_size=y.size,
        diagnostics={"eta_clamped_iterations": n_clamped, "symmetric_iterations": n_symmetric},
    )


# ---------------------------------------------------------------------------
# Maximum-likelihood baseline
# ---------------------------------------------------------------------------


def _standardizer(y):
    center = float(np.median(y))
    q25, q75 = np.quantile(y, [0.25, 0.75])
    scale = float(q75 - q25) / 2.0
    return center, (scale if scale > 0 else 1.0)


def ml_loglik(data, params):
    """Sum of log densities (tabulated fast path) under ``params``."""
    from .density_table import fast_standard_density

    p0 = convert_form(params, S0)
    y = np.asarray(data, dtype=float).ravel()
    f = fast_standard_density((y - p0.mu) / p0.sigma, p0.beta) / p0.sigma
    return _fsum(np.log(np.maximum(f, 1e-300)))


_SIGMA_FLOOR = 1e-8


def ml_fit(data, init=None, max_restarts=3):
    """Maximum likelihood by bounded Nelder-Mead over (beta, sigma, mu).

    The search runs on data standardised by median and half-IQR, in S0 form
    (whose location is equivariant), and the result is mapped back to S1.
    """
    from .density_table import fast_standard_density

    y = _as_data(data, 3)
    center, scale = _standardizer(y)
    z = (y - center) / scale
    if init is None:
        try:
            init = quantile_init(y)
        except InsufficientDataError:
            init = UserParams(0.0, scale, center)
    p0 = convert_form(init, S0)
    x0 = np.array([p0.beta, max(p0.sigma / scale, 2 * _SIGMA_FLOOR), (p0.mu - center) / scale])

    def nll(x):
        beta, sigma, mu = x
        f = fast_standard_density((z - mu) / sigma, beta) / sigma
        return -_fsum(np.log(np.maximum(f, 1e-300)))

    bounds = [(-1.0, 1.0), (_SIGMA_FLOOR, None), (None, None)]
    opts = {"xatol": 1e-7, "fatol": 1e-9, "maxiter": 4000, "maxfev": 8000}
    res = minimize(nll, x0, method="Nelder-Mead", bounds=bounds, options=opts)
    best = res
    for _ in range(max_restarts):
        if best.success:
            break
        res = minimize(nll, best.x, method="Nelder-Mead", bounds=bounds, options=opts)
        if res.fun <= best.fun:
            best = res
    beta, sigma, mu = best.x
    out = convert_form(
        UserParams(float(np.clip(beta, -1, 1)), float(sigma) * scale, float(mu) * scale + center, S0), S1
    )
    if not best.success:
        raise OptimizationError(
            f"Nelder-Mead did not converge after {max_restarts} restarts: {best.message}",
            best=out,
            loglik=-best.fun - y.size * math.log(scale),
        )
    if sigma <= 2 * _SIGMA_FLOOR:
        warnings.warn("ML scale estimate pinned at its lower bound (degenerate data)", RuntimeWarning)
    return out
