"""Independent numerical oracles used by the test suite.

Deliberately dumb and slow: dense grids, plain fixed-order quadrature,
explicit matrix assembly, proximal gradient.  None of them share code with
the library paths they check.
"""

import numpy as np
from scipy.stats import norm


def grid_moments(log_unnorm, center, sd, n_points=4096, width=12.0, lower=None):
    """Mean/variance of exp(log_unnorm) on a dense grid of +-width sd."""
    lo = center - width * sd
    hi = center + width * sd
    if lower is not None:
        lo = max(lo, lower)
    z = np.linspace(lo, hi, n_points)
    lw = log_unnorm(z)
    lw = lw - np.max(lw)
    w = np.exp(lw)
    w[0] *= 0.5  # trapezoid end weights: matters when the domain boundary
    w[-1] *= 0.5  # carries non-negligible density (truncated posteriors)
    w /= np.sum(w)
    mean = float(np.sum(w * z))
    var = float(np.sum(w * (z - mean) ** 2))
    return mean, var


def gauss_hermite_moments(log_lik, mean, var, order=201):
    """Plain fixed-order Gauss-Hermite at the belief (no recentering)."""
    t, w = np.polynomial.hermite.hermgauss(order)
    z = mean + np.sqrt(2.0 * var) * t
    lw = np.log(w) + log_lik(z)
    lw -= np.max(lw)
    p = np.exp(lw)
    p /= p.sum()
    m = float(np.sum(p * z))
    v = float(np.sum(p * (z - m) ** 2))
    return m, v


def golden_section_max(f, lo, hi, tol=1e-10):
    """Golden-section maximizer of a unimodal scalar function."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def dense_gaussian_posterior(A, prior_mean, prior_var, pseudo_mean, pseudo_var):
    """Explicit precision-matrix Gaussian posterior for the SLM."""
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    prec = np.diag(1.0 / np.asarray(prior_var, dtype=float))
    prec = prec + A.T @ np.diag(1.0 / np.asarray(pseudo_var, dtype=float)) @ A
    rhs = np.asarray(prior_mean) / np.asarray(prior_var) \
        + A.T @ (np.asarray(pseudo_mean) / np.asarray(pseudo_var))
    cov = np.linalg.inv(prec)
    mu = cov @ rhs
    z_mean = A @ mu
    z_var = np.diag(A @ cov @ A.T).copy()
    return mu, np.diag(cov).copy(), z_mean, z_var


def lmmse_solution(A, y, noise_var, prior_mean, prior_var):
    """Closed-form linear-Gaussian posterior mean."""
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    prec = np.diag(np.full(n, 1.0 / prior_var)) + A.T @ A / noise_var
    rhs = np.full(n, prior_mean / prior_var) + A.T @ np.asarray(y) / noise_var
    return np.linalg.solve(prec, rhs)


def lasso_prox_grad(A, y, noise_var, rate, max_iter=200_000, tol=1e-13):
    """Proximal gradient (ISTA) for min ||y-Ax||^2/(2 nv) + rate * |x|_1."""
    A = np.asarray(A, dtype=float)
    L = np.linalg.norm(A, 2) ** 2 / noise_var
    x = np.zeros(A.shape[1])
    for _ in range(max_iter):
        g = A.T @ (A @ x - y) / noise_var
        xn = x - g / L
        xn = np.sign(xn) * np.maximum(np.abs(xn) - rate / L, 0.0)
        if np.linalg.norm(xn - x) <= tol * max(np.linalg.norm(xn), 1e-30):
            return xn
        x = xn
    return x


def probit_posterior_closed_form(y, mean, var, scale=1.0):
    """Textbook Gaussian-CDF conjugacy for the probit posterior moments."""
    s = np.sqrt(scale ** 2 + var)
    t = y * mean / s
    r = norm.pdf(t) / norm.cdf(t)
    post_mean = mean + y * var / s * r
    post_var = var - var ** 2 / s ** 2 * r * (r + t)
    return post_mean, post_var
