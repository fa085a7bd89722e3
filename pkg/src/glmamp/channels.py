"""Scalar output likelihood channels and their estimation functions.

Each channel exposes the log-likelihood f(z, y) = log p(y|z) together with
its first two z-derivatives.  On top of that sit the two scalar posterior
summaries used by the solvers:

* ``posterior_mmse`` -- mean/variance of z ~ N(mean, var) tilted by p(y|z)
  (closed form for AWGN, adaptive Gauss-Hermite otherwise), and
* ``posterior_map``  -- mode of the tilted density with Laplace variance
  1/var = -f''(mode, y) + 1/belief_variance.

``g_out`` packages either summary as the output score (point - mean)/var and
its curvature correction; ``awgn_g_out`` is the closed-form AWGN special
case driven by a pseudo-observation.

All operations are vectorized: scalars or same-shape arrays throughout.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import log_ndtr

from .gaussian import GaussianBelief, PosteriorStats

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

# Lower clamp for the Poisson latent when the unconstrained mode would sit on
# or below the z = 0 boundary (only possible for y = 0).
POISSON_Z_FLOOR = 1e-12

MAP_MAX_ITER = 100
MAP_TOL = 1e-12

QUAD_START_ORDER = 61
QUAD_MAX_ORDER = 1025
QUAD_RTOL = 1e-9


class Mode(enum.Enum):
    """Which scalar estimate a solver targets: posterior mean or mode."""

    SUM_PRODUCT = "mmse"
    MAX_SUM = "map"


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge; carries the achieved residual."""

    def __init__(self, residual: float, order: int):
        super().__init__(
            f"quadrature residual {residual:.3e} at max order {order}")
        self.residual = residual
        self.order = order


class OutputChannel:
    """Interface: log p(y|z) and derivatives, support checks, sampling."""

    #: "real" or "positive" -- valid z domain
    domain = "real"
    name = "channel"

    def log_likelihood(self, z, y):
        raise NotImplementedError

    def d1(self, z, y):
        raise NotImplementedError

    def d2(self, z, y):
        raise NotImplementedError

    def in_support(self, y):
        raise NotImplementedError

    def sample(self, z, rng: np.random.Generator):
        raise NotImplementedError

    def spec_string(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class AwgnChannel(OutputChannel):
    """y = z + N(0, noise_variance)."""

    noise_variance: float = 1.0
    name = "awgn"

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError("awgn noise_variance must be > 0")

    def log_likelihood(self, z, y):
        return -0.5 * (y - z) ** 2 / self.noise_variance \
            - 0.5 * np.log(self.noise_variance) - _LOG_SQRT_2PI

    def d1(self, z, y):
        return (y - z) / self.noise_variance

    def d2(self, z, y):
        return np.broadcast_arrays(-1.0 / self.noise_variance + 0.0 * z, y)[0]

    def in_support(self, y):
        return np.isfinite(y)

    def sample(self, z, rng):
        return z + rng.normal(scale=np.sqrt(self.noise_variance), size=np.shape(z))

    def spec_string(self):
        return f"awgn(var={self.noise_variance})"


def _norm_hazard(t):
    """phi(t) / Phi(t), computed stably via log_ndtr."""
    log_phi = -0.5 * t * t - _LOG_SQRT_2PI
    return np.exp(log_phi - log_ndtr(t))


@dataclass(frozen=True)
class ProbitChannel(OutputChannel):
    """P(y = +1 | z) = Phi(z / scale), y in {-1, +1}."""

    scale: float = 1.0
    name = "probit"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("probit scale must be > 0")

    def _t(self, z, y):
        return np.asarray(y) * np.asarray(z) / self.scale

    def log_likelihood(self, z, y):
        return log_ndtr(self._t(z, y))

    def d1(self, z, y):
        return np.asarray(y) * _norm_hazard(self._t(z, y)) / self.scale

    def d2(self, z, y):
        t = self._t(z, y)
        r = _norm_hazard(t)
        return -r * (t + r) / self.scale ** 2

    def in_support(self, y):
        return np.isin(y, (-1, 1))

    def sample(self, z, rng):
        p = np.exp(log_ndtr(np.asarray(z) / self.scale))
        return np.where(rng.uniform(size=np.shape(z)) < p, 1.0, -1.0)

    def spec_string(self):
        return f"probit(scale={self.scale})"


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


@dataclass(frozen=True)
class LogisticChannel(OutputChannel):
    """P(y = +1 | z) = sigmoid(z / scale), y in {-1, +1}."""

    scale: float = 1.0
    name = "logistic"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("logistic scale must be > 0")

    def log_likelihood(self, z, y):
        t = np.asarray(y) * np.asarray(z) / self.scale
        # -softplus(-t), stable on both tails
        return np.minimum(t, 0.0) - np.log1p(np.exp(-np.abs(t)))

    def d1(self, z, y):
        t = np.asarray(y) * np.asarray(z) / self.scale
        return np.asarray(y) * _sigmoid(-t) / self.scale

    def d2(self, z, y):
        s = _sigmoid(np.asarray(z) / self.scale)
        return np.broadcast_arrays(-s * (1.0 - s) / self.scale ** 2, y)[0]

    def in_support(self, y):
        return np.isin(y, (-1, 1))

    def sample(self, z, rng):
        p = _sigmoid(np.asarray(z) / self.scale)
        return np.where(rng.uniform(size=np.shape(z)) < p, 1.0, -1.0)

    def spec_string(self):
        return f"logistic(scale={self.scale})"


@dataclass(frozen=True)
class PoissonChannel(OutputChannel):
    """y ~ Poisson(z) on the domain z > 0; y a nonnegative integer."""

    domain = "positive"
    name = "poisson"

    def log_likelihood(self, z, y):
        from scipy.special import gammaln
        z = np.asarray(z, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = y * np.log(z) - z - gammaln(y + 1.0)
        return np.where(z > 0, out, -np.inf)

    def d1(self, z, y):
        return np.asarray(y) / np.asarray(z, dtype=float) - 1.0

    def d2(self, z, y):
        return -np.asarray(y) / np.asarray(z, dtype=float) ** 2

    def in_support(self, y):
        y = np.asarray(y)
        return (y >= 0) & (np.asarray(y, dtype=float) == np.floor(y))

    def sample(self, z, rng):
        if np.any(np.asarray(z) <= 0):
            raise ValueError("poisson channel requires z > 0 to sample")
        return rng.poisson(z).astype(float)

    def spec_string(self):
        return "poisson()"


# ---------------------------------------------------------------------------
# MAP path: mode of f(z, y) - (z - mean)^2 / (2 var), Laplace variance.
# ---------------------------------------------------------------------------

def _poisson_map_point(y, p_hat, tau_p, shift=0.0):
    """Positive root of z^2 + z(tau - p) - (y + shift) tau = 0.

    ``shift = 1`` gives the mode of the z-posterior expressed in log z
    (used to center the Poisson quadrature).
    """
    b = p_hat - tau_p
    z = 0.5 * (b + np.sqrt(b * b + 4.0 * (np.asarray(y, dtype=float) + shift) * tau_p))
    return np.maximum(z, POISSON_Z_FLOOR)


def _newton_map(channel, y, p_hat, tau_p):
    """Safeguarded vectorized Newton ascent of F(z) = f(z,y) - (z-p)^2/(2 tau)."""
    z = np.array(np.broadcast_arrays(p_hat + 0.0 * tau_p, y)[0], dtype=float)
    if channel.domain == "positive":
        z = np.maximum(z, 1.0)
    scale = 1.0 + np.abs(channel.d1(z, y))
    # rounding of (z - p_hat)/tau_p bounds the achievable residual
    fp_floor = 32.0 * np.finfo(float).eps * (1.0 + np.abs(p_hat)) / tau_p
    for _ in range(MAP_MAX_ITER):
        g = channel.d1(z, y) - (z - p_hat) / tau_p
        if np.all(np.abs(g) <= MAP_TOL * scale + fp_floor):
            break
        h = channel.d2(z, y) - 1.0 / tau_p  # < 0 for concave f
        step = -g / h
        # backtrack where the gradient norm does not decrease
        for _ in range(40):
            z_try = z + step
            if channel.domain == "positive":
                z_try = np.maximum(z_try, POISSON_Z_FLOOR)
            g_try = channel.d1(z_try, y) - (z_try - p_hat) / tau_p
            bad = np.abs(g_try) > np.abs(g)
            if not np.any(bad):
                break
            step = np.where(bad, 0.5 * step, step)
        z = z_try
    g = channel.d1(z, y) - (z - p_hat) / tau_p
    if not np.all(np.abs(g) <= 1e-9 * scale + fp_floor):
        raise RuntimeError("MAP Newton failed to reach stationarity")
    return z


def posterior_map(channel: OutputChannel, y, belief: GaussianBelief) -> PosteriorStats:
    """Mode of the tilted density and its Laplace variance.

    The variance solves 1/var = -f''(mode, y) + 1/belief.variance; for the
    log-concave shipped channels this is always positive and at most the
    belief variance.
    """
    p_hat = np.asarray(belief.mean, dtype=float)
    tau_p = np.asarray(belief.variance, dtype=float)
    if not np.all(channel.in_support(y)):
        raise ValueError(f"observation outside {channel.name} support")
    if isinstance(channel, AwgnChannel):
        lam = 1.0 / tau_p + 1.0 / channel.noise_variance
        point = (p_hat / tau_p + np.asarray(y) / channel.noise_variance) / lam
        return PosteriorStats(point=point, variance=1.0 / lam)
    if isinstance(channel, PoissonChannel):
        point = _poisson_map_point(y, p_hat, tau_p)
    else:
        point = _newton_map(channel, y, p_hat, tau_p)
    prec = -channel.d2(point, y) + 1.0 / tau_p
    return PosteriorStats(point=point, variance=1.0 / prec)


# ---------------------------------------------------------------------------
# MMSE path: adaptive Gauss-Hermite centered on the Laplace fit.
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _gh_nodes(order: int):
    from scipy.special import roots_hermite
    t, w = roots_hermite(order)
    keep = np.isfinite(w) & (w > 0)  # extreme-node weights underflow; mass is nil
    return t[keep], np.log(w[keep])


def _gh_moments(log_target, center, sigma, order):
    """Normalized mean and variance of exp(log_target) via GH at a proposal.

    ``center``/``sigma`` locate the Gaussian proposal; ``log_target`` maps an
    array of abscissas (nodes x samples) to log unnormalized density values.
    """
    t, log_w = _gh_nodes(order)
    x = center[None, :] + np.sqrt(2.0) * sigma[None, :] * t[:, None]
    log_pi = log_target(x) + (t * t + log_w)[:, None]
    log_pi -= np.max(log_pi, axis=0, keepdims=True)
    pi = np.exp(log_pi)
    pi /= np.sum(pi, axis=0, keepdims=True)
    mean = np.sum(pi * x, axis=0)
    var = np.sum(pi * (x - mean[None, :]) ** 2, axis=0)
    return mean, var


def _adaptive_gh(log_target, center, sigma, scale):
    """Double the order until mean and variance stabilize to QUAD_RTOL."""
    order = QUAD_START_ORDER
    mean, var = _gh_moments(log_target, center, sigma, order)
    while order < QUAD_MAX_ORDER:
        order = min(2 * order + 1, QUAD_MAX_ORDER)
        mean2, var2 = _gh_moments(log_target, center, sigma, order)
        resid = max(
            np.max(np.abs(mean2 - mean) / scale),
            np.max(np.abs(var2 - var) / scale ** 2),
        )
        mean, var = mean2, var2
        if resid <= QUAD_RTOL:
            return mean, var
    if resid > 1e-7:
        raise QuadratureError(float(resid), order)
    return mean, var


def posterior_mmse(channel: OutputChannel, y, belief: GaussianBelief) -> PosteriorStats:
    """Exact posterior mean and variance of the tilted scalar model.

    AWGN is conjugate; the other channels are integrated by adaptive
    Gauss-Hermite quadrature centered on the Laplace fit of the posterior
    (for Poisson, in log z so iterates stay in the valid domain).
    """
    p_hat = np.asarray(belief.mean, dtype=float)
    tau_p = np.asarray(belief.variance, dtype=float)
    if not np.all(channel.in_support(y)):
        raise ValueError(f"observation outside {channel.name} support")
    if isinstance(channel, AwgnChannel):
        return posterior_map(channel, y, belief)

    p_hat, tau_p, y = np.broadcast_arrays(p_hat, tau_p, np.asarray(y, dtype=float))
    squeeze = p_hat.ndim == 0
    p_hat = np.atleast_1d(p_hat).astype(float)
    tau_p = np.atleast_1d(tau_p).astype(float)
    y = np.atleast_1d(y).astype(float)
    scale = np.sqrt(tau_p) + np.abs(p_hat)

    if isinstance(channel, PoissonChannel):
        # integrate in u = log z; target includes the Jacobian e^u
        z_mode = _poisson_map_point(y, p_hat, tau_p, shift=1.0)
        u_mode = np.log(z_mode)
        # curvature of (y+1)u - e^u - (e^u - p)^2 / (2 tau) at the mode
        curv = z_mode + (2.0 * z_mode ** 2 - p_hat * z_mode) / tau_p
        sigma_u = 1.0 / np.sqrt(np.maximum(curv, 1e-8))
        sigma_u = np.minimum(sigma_u, 10.0)

        def log_target(u):
            z = np.exp(u)
            return (y[None, :] + 1.0) * u - z - (z - p_hat[None, :]) ** 2 / (2.0 * tau_p[None, :])

        # moments of z = e^u under the u-density
        def z_moments(order):
            t, log_w = _gh_nodes(order)
            u = u_mode[None, :] + np.sqrt(2.0) * sigma_u[None, :] * t[:, None]
            log_pi = log_target(u) + (t * t + log_w)[:, None]
            log_pi -= np.max(log_pi, axis=0, keepdims=True)
            pi = np.exp(log_pi)
            pi /= np.sum(pi, axis=0, keepdims=True)
            z = np.exp(u)
            mean = np.sum(pi * z, axis=0)
            var = np.sum(pi * (z - mean[None, :]) ** 2, axis=0)
            return mean, var

        order = QUAD_START_ORDER
        mean, var = z_moments(order)
        resid = np.inf
        while order < QUAD_MAX_ORDER:
            order = min(2 * order + 1, QUAD_MAX_ORDER)
            mean2, var2 = z_moments(order)
            resid = max(np.max(np.abs(mean2 - mean) / scale),
                        np.max(np.abs(var2 - var) / scale ** 2))
            mean, var = mean2, var2
            if resid <= QUAD_RTOL:
                break
        if resid > 1e-7:
            raise QuadratureError(float(resid), order)
    else:
        lap = posterior_map(channel, y, GaussianBelief(p_hat, tau_p))
        sigma = np.sqrt(np.asarray(lap.variance))
        center = np.asarray(lap.point)

        def log_target(z):
            return channel.log_likelihood(z, y[None, :]) \
                - (z - p_hat[None, :]) ** 2 / (2.0 * tau_p[None, :])

        mean, var = _adaptive_gh(log_target, center, sigma, scale)

    var = np.maximum(var, 1e-300)
    if squeeze:
        return PosteriorStats(point=float(mean[0]), variance=float(var[0]))
    return PosteriorStats(point=mean, variance=var)


# ---------------------------------------------------------------------------
# Output scores.
# ---------------------------------------------------------------------------

def g_out_with_stats(channel: OutputChannel, mode: Mode, y, belief: GaussianBelief):
    """``g_out`` returning also the posterior stats it was derived from.

    In MAX_SUM mode the curvature correction is evaluated both directly from
    f''(mode, y) and through the Laplace variance; the two are algebraically
    identical and asserted to agree to 1e-10 relative.
    """
    tau_p = np.asarray(belief.variance, dtype=float)
    if mode is Mode.SUM_PRODUCT:
        stats = posterior_mmse(channel, y, belief)
        neg_deriv = (tau_p - np.asarray(stats.variance)) / tau_p ** 2
    else:
        stats = posterior_map(channel, y, belief)
        f2 = channel.d2(stats.point, y)
        direct = f2 / (tau_p * f2 - 1.0)
        neg_deriv = (tau_p - np.asarray(stats.variance)) / tau_p ** 2
        resid = np.abs(direct - neg_deriv) / np.maximum(
            np.maximum(np.abs(direct), np.abs(neg_deriv)), 1e-300)
        assert np.all((resid <= 1e-10) | (direct == neg_deriv)), \
            "curvature identity violated beyond 1e-10"
    value = (np.asarray(stats.point) - np.asarray(belief.mean)) / tau_p
    return value, neg_deriv, stats


def g_out(channel: OutputChannel, mode: Mode, y, belief: GaussianBelief):
    """Output score (point - mean)/var and its curvature correction."""
    value, neg_deriv, _ = g_out_with_stats(channel, mode, y, belief)
    return value, neg_deriv


def awgn_g_out(pseudo, belief: GaussianBelief):
    """Closed-form AWGN output score driven by a pseudo-observation."""
    tau_p = np.asarray(belief.variance, dtype=float)
    denom = np.asarray(pseudo.pseudo_variance, dtype=float) + tau_p
    value = (np.asarray(pseudo.pseudo_mean) - np.asarray(belief.mean)) / denom
    return value, 1.0 / denom
