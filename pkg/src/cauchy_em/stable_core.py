"""Primitives for the alpha = 1 stable (skewed Cauchy) family.

Two location conventions are supported. In S1 the characteristic function is

    phi(t) = exp(-|sigma t| [1 + i (2/pi) beta sgn(t) log|t|] + i mu t)

and in S0 the ``log|t|`` becomes ``log|sigma t|``.  The forms coincide when
``beta == 0`` or ``sigma == 1``; otherwise the S0 location equals the S1
location plus ``(2/pi) beta sigma log(sigma)``.

The EM machinery works with the decomposition

    Y = eta * N / Z + lam * P + delta,   N, Z ~ N(0, 1),  P ~ C0(1, 1, 0)

where ``eta = sigma (1 - |beta|)``, ``lam = sigma beta`` and
``delta = mu + (2/pi) lam log|lam|`` (S1 location ``mu``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import (
    DegenerateScaleError,
    DomainError,
    EmptyRequestError,
    NumericalError,
)

__all__ = [
    "S0",
    "S1",
    "UserParams",
    "InternalParams",
    "MonteCarloPool",
    "chf_eval",
    "convert_form",
    "internal_from_user",
    "user_from_internal",
    "sample_standard_skewed",
    "sample_cauchy",
    "density_eval",
    "cdf_eval",
    "density_mc",
    "standard_density",
    "standard_cdf",
]

S0 = "S0"
S1 = "S1"
_FORMS = (S0, S1)
TWO_OVER_PI = 2.0 / math.pi


def _xlogabs(x):
    """x * log|x| with the continuous extension 0 at x = 0."""
    x = float(x)
    return 0.0 if x == 0.0 else x * math.log(abs(x))


@dataclass(frozen=True)
class UserParams:
    """Skewness, scale and location of a skewed Cauchy law in S0 or S1 form."""

    beta: float
    sigma: float
    mu: float
    form: str = S1

    def __post_init__(self):
        for name in ("beta", "sigma", "mu"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.form not in _FORMS:
            raise DomainError(f"unknown parameterization {self.form!r}")
        if not all(math.isfinite(v) for v in (self.beta, self.sigma, self.mu)):
            raise DomainError(f"non-finite parameters {self}")
        if abs(self.beta) > 1.0:
            raise DomainError(f"beta must lie in [-1, 1], got {self.beta}")
        if self.sigma <= 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    def to(self, form):
        return convert_form(self, form)

    def as_tuple(self):
        return (self.beta, self.sigma, self.mu)


@dataclass(frozen=True)
class InternalParams:
    """Working parameters (eta, lam, delta) of the EM hierarchy."""

    eta: float
    lam: float
    delta: float

    def __post_init__(self):
        for name in ("eta", "lam", "delta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not all(math.isfinite(v) for v in (self.eta, self.lam, self.delta)):
            raise DomainError(f"non-finite parameters {self}")
        if self.eta < 0.0:
            raise DomainError(f"eta must be non-negative, got {self.eta}")

    @property
    def scale(self):
        return self.eta + abs(self.lam)

    def as_tuple(self):
        return (self.eta, self.lam, self.delta)

    def as_array(self):
        return np.array(self.as_tuple())


@dataclass(frozen=True)
class MonteCarloPool:
    """A seeded set of draws from the standard totally skewed law C0(1, 1, 0)."""

    samples: np.ndarray = field(repr=False)
    seed: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 1:
            raise EmptyRequestError("a Monte-Carlo pool needs at least one draw")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @classmethod
    def generate(cls, seed, size):
        return cls(sample_standard_skewed(seed, size), int(seed))

    @property
    def size(self):
        return self.samples.size


# ---------------------------------------------------------------------------
# Parameter maps
# ---------------------------------------------------------------------------


def chf_eval(t, params):
    """Characteristic function of ``params`` at frequency ``t`` (a Python complex)."""
    t = float(t)
    if not math.isfinite(t):
        raise DomainError(f"frequency must be finite, got {t}")
    if t == 0.0:
        return complex(1.0, 0.0)
    beta, sigma, mu = params.beta, params.sigma, params.mu
    at = abs(sigma * t)
    log_arg = abs(t) if params.form == S1 else abs(sigma * t)
    phase = -at * TWO_OVER_PI * beta * math.copysign(1.0, t) * math.log(log_arg) + mu * t
    return math.exp(-at) * complex(math.cos(phase), math.sin(phase))


def _s0_shift(beta, sigma):
    return TWO_OVER_PI * beta * sigma * math.log(sigma)


def convert_form(params, target_form):
    """Re-express ``params`` in ``target_form`` without changing the law."""
    if target_form not in _FORMS:
        raise DomainError(f"unknown parameterization {target_form!r}")
    if params.form == target_form:
        return params
    shift = _s0_shift(params.beta, params.sigma)
    mu = params.mu + shift if target_form == S0 else params.mu - shift
    return UserParams(params.beta, params.sigma, mu, target_form)


def internal_from_user(params):
    p = convert_form(params, S1)
    lam = p.sigma * p.beta
    return InternalParams(
        eta=p.sigma * (1.0 - abs(p.beta)),
        lam=lam,
        delta=p.mu + TWO_OVER_PI * _xlogabs(lam),
    )


def user_from_internal(theta):
    """Closed-form inverse of :func:`internal_from_user`; result is in S1 form."""
    sigma = theta.eta + abs(theta.lam)
    if not sigma > 0.0:
        raise DegenerateScaleError("eta + |lam| must be positive")
    beta = min(1.0, max(-1.0, theta.lam / sigma))
    return UserParams(beta, sigma, theta.delta - TWO_OVER_PI * _xlogabs(theta.lam), S1)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _cms_alpha_one(rng, beta, n):
    # Chambers-Mallows-Stuck transform at alpha = 1 (S1 standard form).
    phi = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size=n)
    w = rng.standard_exponential(size=n)
    bphi = 0.5 * math.pi + beta * phi
    return TWO_OVER_PI * (
        bphi * np.tan(phi) - beta * np.log(0.5 * math.pi * w * np.cos(phi) / bphi)
    )


def _as_count(n):
    n = int(n)
    if n < 1:
        raise EmptyRequestError(f"requested {n} draws; need at least one")
    return n


def sample_standard_skewed(pool_seed, n):
    """``n`` i.i.d. draws from C0(1, 1, 0), deterministic in ``pool_seed``.

    At unit scale the S0 and S1 standard forms coincide, so no location
    adjustment is applied.
    """
    n = _as_count(n)
    return _cms_alpha_one(np.random.default_rng(pool_seed), 1.0, n)


def sample_cauchy(params, seed, n):
    """Draw ``n`` values via ``eta * N / Z + lam * P + delta``."""
    n = _as_count(n)
    theta = internal_from_user(params)
    ss = np.random.SeedSequence(seed)
    normal_seed, skew_seed = ss.spawn(2)
    rng = np.random.default_rng(normal_seed)
    nz = rng.standard_normal(size=(2, n))
    y = theta.eta * (nz[0] / nz[1]) if theta.eta > 0.0 else np.zeros(n)
    if theta.lam != 0.0:
        y = y + theta.lam * sample_standard_skewed(skew_seed, n)
    return y + theta.delta


# ---------------------------------------------------------------------------
# Density and cdf by Fourier inversion
# ---------------------------------------------------------------------------

# Envelope exp(-t) < 1e-17 beyond this point.
_T_MAX = 40.0
# Above this |x| the composite Gauss rule becomes too long; switch to QAWO.
_X_GAUSS = 60.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
_QUAD_EPSABS = 1e-13


def _panel_nodes(xmax):
    """Gauss-Legendre nodes/weights on [0, _T_MAX] resolving frequency ``xmax``."""
    width = min(0.5, math.pi / (xmax + 4.0))
    # geometric grading towards the t log t singularity at 0
    graded = np.concatenate(([0.0], np.logspace(-14, math.log10(width), 15)))
    uniform = np.arange(width, _T_MAX, width)
    edges = np.unique(np.concatenate((graded, uniform, [_T_MAX])))
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    t = (a + half * (_GL_NODES + 1.0)).ravel()
    w = (half * _GL_WEIGHTS).ravel()
    return t, w


_NODE_CACHE = {}


def _nodes_for(bucket):
    if bucket not in _NODE_CACHE:
        _NODE_CACHE[bucket] = _panel_nodes(bucket)
    return _NODE_CACHE[bucket]


_BUCKETS = (1.0, 4.0, 15.0, _X_GAUSS)


def _gauss_transform(x, beta, kind):
    """Composite-Gauss evaluation of the inversion integral for |x| <= _X_GAUSS."""
    out = np.empty_like(x)
    c = TWO_OVER_PI * beta
    lo = 0.0
    for hi in _BUCKETS:
        sel = (np.abs(x) > lo) & (np.abs(x) <= hi) if lo > 0 else np.abs(x) <= hi
        lo = hi
        if not sel.any():
            continue
        t, w = _nodes_for(hi)
        env = w * np.exp(-t)
        drift = c * t * np.log(t)
        xs = x[sel]
        for start in range(0, xs.size, 256):
            chunk = xs[start:start + 256]
            phase = np.outer(chunk, t) + drift
            if kind == "pdf":
                vals = np.cos(phase) @ env
            else:
                vals = np.sin(phase) @ (env / t)
            out[np.flatnonzero(sel)[start:start + 256]] = vals
    if kind == "pdf":
        return out / math.pi
    return 0.5 + out / math.pi


def _qawo(fun, x, weight, a, b):
    val, err = integrate.quad(
        fun, a, b, weight=weight, wvar=x, epsabs=_QUAD_EPSABS, epsrel=1e-10, limit=500
    )
    return val, err


def _tail_pdf(x, beta):
    c = TWO_OVER_PI * beta

    def even(t):
        return math.exp(-t) * math.cos(c * _xlogabs(t))

    def odd(t):
        return math.exp(-t) * math.sin(c * _xlogabs(t))

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            a, ea = _qawo(even, x, "cos", 0.0, _T_MAX)
            b, eb = _qawo(odd, x, "sin", 0.0, _T_MAX)
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"density quadrature failed at x={x}: {exc}") from exc
    val = (a - b) / math.pi
    resid = (ea + eb) / math.pi
    if resid > max(1e-8, 1e-3 * abs(val)):
        raise NumericalError(f"density quadrature residual {resid:.2e} at x={x}", resid)
    return val


def _tail_cdf(x, beta):
    c = TWO_OVER_PI * beta
    # below the split the phase x*t stays under one radian: graded Gauss panels
    split = 1.0 / abs(x)
    edges = np.concatenate(([0.0], np.logspace(-14, math.log10(split), 20)))
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    t = (a + half * (_GL_NODES + 1.0)).ravel()
    w = (half * _GL_WEIGHTS).ravel()
    head = np.sum(w * np.exp(-t) * np.sin(x * t + c * t * np.log(t)) / t)

    def even(s):
        return math.exp(-s) * math.cos(c * s * math.log(s)) / s

    def odd(s):
        return math.exp(-s) * math.sin(c * s * math.log(s)) / s

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            a1, e1 = _qawo(even, x, "sin", split, _T_MAX)
            a2, e2 = _qawo(odd, x, "cos", split, _T_MAX)
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"cdf quadrature failed at x={x}: {exc}") from exc
    resid = (e1 + e2) / math.pi
    if resid > 1e-8:
        raise NumericalError(f"cdf quadrature residual {resid:.2e} at x={x}", resid)
    return 0.5 + (head + a1 + a2) / math.pi


# Below this value the inversion integrals are dominated by cancellation noise
# (about 1e-16 absolute) on the light side of a totally skewed law.
_LIGHT_TAIL_SWITCH = 1e-6


def _zolotarev_skewed(x, kind):
    """F(x) or f(x) for beta = 1 from Zolotarev's integral of a positive function.

    F(x) = (1/pi) int exp(-exp(g)) dth and f(x) = (1/2) int exp(g - exp(g)) dth
    over (-pi/2, pi/2), with g = -pi x / 2 + log V(th) and
    V(th) = (2/pi) (pi/2 + th) / cos(th) * exp((pi/2 + th) tan(th)).
    Accurate on the light (left) side, where inversion loses all digits.
    """
    logk = -0.5 * math.pi * x

    def g(th):
        a = 0.5 * math.pi + th
        return logk + math.log(TWO_OVER_PI * a / math.cos(th)) + a * math.tan(th)

    if kind == "cdf":
        def fun(th):
            v = g(th)
            return math.exp(-math.exp(v)) if v < 700.0 else 0.0
    else:
        def fun(th):
            v = g(th)
            return math.exp(v - math.exp(v)) if v < 700.0 else 0.0

    lo, hi = -0.5 * math.pi + 1e-12, 0.5 * math.pi - 1e-12
    edges = [lo, hi]
    # g increases in th; split where the integrand peaks (g = 0)
    if g(lo) < 0.0 < g(hi):
        edges.insert(1, optimize.brentq(g, lo, hi, xtol=1e-15))
    total = sum(
        integrate.quad(fun, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0] for a, b in zip(edges[:-1], edges[1:])
    )
    return total / math.pi if kind == "cdf" else 0.5 * total


def _standard(x, beta, kind):
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    if not np.all(np.isfinite(flat)):
        raise DomainError("evaluation points must be finite")
    if beta == 0.0:
        res = 1.0 / (math.pi * (1.0 + flat**2)) if kind == "pdf" else 0.5 + np.arctan(flat) / math.pi
    else:
        res = np.empty_like(flat)
        near = np.abs(flat) <= _X_GAUSS
        if near.any():
            res[near] = _gauss_transform(flat[near], beta, kind)
        tail = _tail_pdf if kind == "pdf" else _tail_cdf
        for i in np.flatnonzero(~near):
            res[i] = tail(flat[i], beta)
        if abs(beta) == 1.0:
            # light side of a totally skewed law: x < 0 for beta = 1, x > 0 for beta = -1
            xr = flat * beta
            small = res if kind == "pdf" or beta > 0 else 1.0 - res
            for i in np.flatnonzero((xr < 0.0) & (small < _LIGHT_TAIL_SWITCH)):
                v = _zolotarev_skewed(xr[i], kind)
                res[i] = v if kind == "pdf" or beta > 0 else 1.0 - v
        if kind == "pdf":
            res = np.maximum(res, 0.0)
        else:
            res = np.clip(res, 0.0, 1.0)
    return res.reshape(x.shape) if x.ndim else float(res[0])


def standard_density(x, beta):
    """Density of the standard S1 law with skewness ``beta`` (sigma = 1, mu = 0)."""
    return _standard(x, float(beta), "pdf")


def standard_cdf(x, beta):
    return _standard(x, float(beta), "cdf")


def _standardize(y, params):
    p0 = convert_form(params, S0)
    y = np.asarray(y, dtype=float)
    return (y - p0.mu) / p0.sigma, p0


def density_eval(y, params):
    """Density at ``y`` (scalar or array) by numerical Fourier inversion."""
    x, p0 = _standardize(y, params)
    return standard_density(x, p0.beta) / p0.sigma


def cdf_eval(y, params):
    """Distribution function at ``y`` by Gil-Pelaez inversion."""
    x, p0 = _standardize(y, params)
    return standard_cdf(x, p0.beta)


# ---------------------------------------------------------------------------
# Monte-Carlo density on a pool
# ---------------------------------------------------------------------------


def density_mc(y, theta, pool):
    """Pool average of the conditional Cauchy density given P = p_j."""
    if not theta.eta > 0.0:
        raise DegenerateScaleError("density_mc needs eta > 0")
    y = np.asarray(y, dtype=float)
    flat = np.atleast_1d(y).ravel()
    p = pool.samples
    if theta.lam == 0.0:
        q = (flat - theta.delta) / theta.eta
        res = 1.0 / (1.0 + q * q)
    else:
        res = np.empty_like(flat)
        shifted = theta.lam * p + theta.delta
        for start in range(0, flat.size, 512):
            q = (flat[start:start + 512, None] - shifted) / theta.eta
            res[start:start + 512] = np.mean(1.0 / (1.0 + q * q), axis=1)
    res = res / (math.pi * theta.eta)
    return res.reshape(y.shape) if y.ndim else float(res[0])
