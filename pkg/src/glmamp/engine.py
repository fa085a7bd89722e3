"""GLM solvers: the monolithic GAMP loop and the modular SLM + module-B loop.

``run_gamp`` is the classic componentwise GAMP schedule using the channel's
output score in the requested mode and the prior's matching denoiser.

``run_modular`` alternates a standard-linear-model step (module A) with the
scalar output module (module B): module A produces per-component beliefs
(mean, variance) on z = A x, module B refines them through the likelihood
and returns Gaussian pseudo-observations via EP division.  Module A comes in
two flavors selected by ``SolverConfig.slm_backend``:

* ``"exact"`` -- the dense exact Gaussian solve of :mod:`glmamp.slm`, with
  EP messages carrying non-Gaussian priors on the x side;
* ``"amp"``   -- the AWGN-GAMP linear step, which makes the modular loop
  reproduce the monolithic GAMP trajectory exactly.

Both return the solution and a full per-iteration trace exportable as
JSON lines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .channels import Mode, OutputChannel, awgn_g_out, g_out_with_stats
from .gaussian import (DEFAULT_VARIANCE_FLOOR, ExtrinsicMessage, GaussianBelief,
                       PosteriorStats, ep_extrinsic)
from .priors import InputPrior
from .slm import LinearModel, slm_solve

TRACE_FIELDS = ("iter", "x_hat", "tau_x", "p_hat", "tau_p", "z0", "z_var",
                "y_tilde", "sigma2_tilde", "nmse", "floor_events")


@dataclass(frozen=True)
class ProblemInstance:
    """One GLM inference problem: y ~ channel(z), z = A x, x ~ prior."""

    model: LinearModel
    y: np.ndarray
    channel: OutputChannel
    prior: InputPrior
    x_true: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.shape != (self.model.m,):
            raise ValueError(f"y has shape {y.shape}, expected ({self.model.m},)")
        if not np.all(self.channel.in_support(y)):
            raise ValueError(f"y outside {self.channel.name} support")
        object.__setattr__(self, "y", y)
        if self.x_true is not None:
            xt = np.asarray(self.x_true, dtype=float)
            if xt.shape != (self.model.n,):
                raise ValueError("x_true has wrong shape")
            object.__setattr__(self, "x_true", xt)


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 100
    tol: float = 1e-8
    damping: float | None = None  # default 1.0 monolithic, 0.7 modular
    variance_floor: float = DEFAULT_VARIANCE_FLOOR
    seed: int = 0
    slm_backend: str = "exact"  # run_modular module A: "exact" | "amp"

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.damping is not None and not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must be in (0, 1]")
        if self.slm_backend not in ("exact", "amp"):
            raise ValueError("slm_backend must be 'exact' or 'amp'")


@dataclass
class IterationTrace:
    """Per-iteration record of every solver quantity, JSONL-exportable."""

    records: list = field(default_factory=list)
    converged: bool = False
    diverged: bool = False
    floor_events: int = 0

    def append(self, **kw):
        rec = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
               for k, v in kw.items()}
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps({k: rec[k] for k in TRACE_FIELDS},
                                    sort_keys=True) + "\n")

    def column(self, name):
        return [rec[name] for rec in self.records]


def nmse(x_hat, x_true) -> float:
    """Normalized mean squared error ||x_hat - x_true||^2 / ||x_true||^2."""
    denom = float(np.sum(np.asarray(x_true) ** 2))
    if denom == 0.0:
        return float("nan")
    return float(np.sum((np.asarray(x_hat) - np.asarray(x_true)) ** 2) / denom)


def _iter_nmse(problem, x_hat):
    return nmse(x_hat, problem.x_true) if problem.x_true is not None else float("nan")


def run_gamp(problem: ProblemInstance, mode: Mode,
             config: SolverConfig = SolverConfig()):
    """Monolithic GAMP; returns (solution PosteriorStats, IterationTrace)."""
    A = problem.model.A
    A2 = A * A
    y = problem.y
    eps = config.variance_floor
    damp = 1.0 if config.damping is None else config.damping

    x_hat = np.full(problem.model.n, problem.prior.marginal_mean(), dtype=float)
    tau_x = np.full(problem.model.n, problem.prior.marginal_variance(), dtype=float)
    s = np.zeros(problem.model.m)
    tau_s = np.zeros(problem.model.m)

    trace = IterationTrace()
    for it in range(config.max_iter):
        tau_p = np.maximum(A2 @ tau_x, eps)
        p_hat = A @ x_hat - tau_p * s
        if not (np.all(np.isfinite(p_hat)) and np.all(np.isfinite(tau_p))):
            trace.diverged = True
            break
        belief = GaussianBelief(p_hat, tau_p)
        val, nd, stats = g_out_with_stats(problem.channel, mode, y, belief)
        ext = ep_extrinsic(stats, belief, eps=eps)
        floors = int(np.count_nonzero(ext.floored))
        trace.floor_events += floors
        s = damp * val + (1.0 - damp) * s
        tau_s = damp * np.maximum(nd, 0.0) + (1.0 - damp) * tau_s
        tau_r = 1.0 / np.maximum(A2.T @ tau_s, eps)
        r = x_hat + tau_r * (A.T @ s)
        x_old = x_hat
        xstats = problem.prior.denoise(mode, r, tau_r)
        x_hat = np.asarray(xstats.point, dtype=float)
        tau_x = np.maximum(np.asarray(xstats.variance, dtype=float), eps)
        if not np.all(np.isfinite(x_hat)):
            trace.diverged = True
            x_hat, tau_x = x_old, trace.records[-1]["tau_x"] if trace.records else tau_x
            break
        delta = np.linalg.norm(x_hat - x_old) / max(np.linalg.norm(x_hat), 1e-300)
        trace.append(iter=it, x_hat=x_hat, tau_x=tau_x, p_hat=p_hat, tau_p=tau_p,
                     z0=np.asarray(stats.point), z_var=np.asarray(stats.variance),
                     y_tilde=np.asarray(ext.pseudo_mean),
                     sigma2_tilde=np.asarray(ext.pseudo_variance),
                     nmse=_iter_nmse(problem, x_hat), floor_events=floors)
        if it >= 2 and delta < config.tol:
            trace.converged = True
            break
    solution = PosteriorStats(point=x_hat, variance=tau_x)
    return solution, trace


def _damp_natural(lam_old, eta_old, lam_new, eta_new, damp, keep):
    """Linear interpolation in natural parameters; ``keep`` freezes entries."""
    lam = (1.0 - damp) * lam_old + damp * lam_new
    eta = (1.0 - damp) * eta_old + damp * eta_new
    lam = np.where(keep, lam_old, lam)
    eta = np.where(keep, eta_old, eta)
    return lam, eta


def _run_modular_exact(problem, mode, config):
    """Module A = exact dense SLM; x side handled by EP messages."""
    model, y, channel, prior = problem.model, problem.y, problem.channel, problem.prior
    eps = config.variance_floor
    damp = 0.7 if config.damping is None else config.damping

    # pseudo-observations on z, natural parameters (precision, precision*mean)
    v0 = 1e6 * max(1.0, prior.marginal_variance())
    lam_z = np.full(model.m, 1.0 / v0)
    eta_z = np.zeros(model.m)
    # x-side prior approximation messages
    lam_x = np.full(model.n, 1.0 / max(prior.marginal_variance(), eps))
    eta_x = np.full(model.n, prior.marginal_mean()) * lam_x

    x_hat = np.full(model.n, prior.marginal_mean(), dtype=float)
    trace = IterationTrace()
    for it in range(config.max_iter):
        pseudo = ExtrinsicMessage(pseudo_mean=eta_z / lam_z, pseudo_variance=1.0 / lam_z)
        res = slm_solve(model, pseudo, GaussianBelief(eta_x / lam_x, 1.0 / lam_x), eps=eps)
        p_hat = np.asarray(res.z_extrinsic.pseudo_mean)
        tau_p = np.asarray(res.z_extrinsic.pseudo_variance)
        floors = int(np.count_nonzero(res.z_extrinsic.floored))

        # module B: scalar refinement through the likelihood, then EP division
        belief = GaussianBelief(p_hat, tau_p)
        if mode is Mode.SUM_PRODUCT:
            from .channels import posterior_mmse as _post
        else:
            from .channels import posterior_map as _post
        stats = _post(channel, y, belief)
        ext = ep_extrinsic(stats, belief, eps=eps)
        flagged_z = np.broadcast_to(np.asarray(ext.floored), (model.m,))
        floors += int(np.count_nonzero(flagged_z))
        lam_z, eta_z = _damp_natural(
            lam_z, eta_z, 1.0 / np.asarray(ext.pseudo_variance),
            np.asarray(ext.pseudo_mean) / np.asarray(ext.pseudo_variance),
            damp, flagged_z)

        # x side: cavity from the SLM posterior, denoise with the true prior
        xv = np.asarray(res.x_stats.variance)
        xm = np.asarray(res.x_stats.point)
        lam_r = np.maximum(1.0 / xv - lam_x, eps)
        eta_r = xm / xv - eta_x
        tau_r = 1.0 / lam_r
        r = eta_r / lam_r
        xstats = prior.denoise(mode, r, tau_r)
        x_old = x_hat
        x_hat = np.asarray(xstats.point, dtype=float)
        ext_x = ep_extrinsic(xstats, GaussianBelief(r, tau_r), eps=eps)
        flagged_x = np.broadcast_to(np.asarray(ext_x.floored), (model.n,))
        floors += int(np.count_nonzero(flagged_x))
        lam_x, eta_x = _damp_natural(
            lam_x, eta_x, 1.0 / np.asarray(ext_x.pseudo_variance),
            np.asarray(ext_x.pseudo_mean) / np.asarray(ext_x.pseudo_variance),
            damp, flagged_x)

        trace.floor_events += floors
        if not np.all(np.isfinite(x_hat)):
            trace.diverged = True
            x_hat = x_old
            break
        tau_x = np.maximum(np.asarray(xstats.variance, dtype=float) + 0.0 * x_hat, eps)
        delta = np.linalg.norm(x_hat - x_old) / max(np.linalg.norm(x_hat), 1e-300)
        trace.append(iter=it, x_hat=x_hat, tau_x=tau_x, p_hat=p_hat, tau_p=tau_p,
                     z0=np.asarray(stats.point), z_var=np.asarray(stats.variance),
                     y_tilde=eta_z / lam_z, sigma2_tilde=1.0 / lam_z,
                     nmse=_iter_nmse(problem, x_hat), floor_events=floors)
        if it >= 2 and delta < config.tol:
            trace.converged = True
            break
    solution = PosteriorStats(point=x_hat,
                              variance=np.maximum(np.asarray(xstats.variance) + 0.0 * x_hat, eps))
    return solution, trace


def _run_modular_amp(problem, mode, config):
    """Module A = AWGN-GAMP linear step; trajectory-exact GAMP decomposition."""
    A = problem.model.A
    A2 = A * A
    y = problem.y
    channel, prior = problem.channel, problem.prior
    eps = config.variance_floor
    damp = 1.0 if config.damping is None else config.damping

    x_hat = np.full(problem.model.n, prior.marginal_mean(), dtype=float)
    tau_x = np.full(problem.model.n, prior.marginal_variance(), dtype=float)
    s = np.zeros(problem.model.m)
    tau_s = np.zeros(problem.model.m)

    trace = IterationTrace()
    for it in range(config.max_iter):
        tau_p = np.maximum(A2 @ tau_x, eps)
        p_hat = A @ x_hat - tau_p * s
        if not np.all(np.isfinite(p_hat)):
            trace.diverged = True
            break
        belief = GaussianBelief(p_hat, tau_p)
        if mode is Mode.SUM_PRODUCT:
            from .channels import posterior_mmse as _post
        else:
            from .channels import posterior_map as _post
        stats = _post(channel, y, belief)
        ext = ep_extrinsic(stats, belief, eps=eps)
        floors = int(np.count_nonzero(ext.floored))
        trace.floor_events += floors
        val, nd = awgn_g_out(ext, belief)
        s = damp * val + (1.0 - damp) * s
        tau_s = damp * np.maximum(nd, 0.0) + (1.0 - damp) * tau_s
        tau_r = 1.0 / np.maximum(A2.T @ tau_s, eps)
        r = x_hat + tau_r * (A.T @ s)
        x_old = x_hat
        xstats = prior.denoise(mode, r, tau_r)
        x_hat = np.asarray(xstats.point, dtype=float)
        tau_x = np.maximum(np.asarray(xstats.variance, dtype=float), eps)
        if not np.all(np.isfinite(x_hat)):
            trace.diverged = True
            x_hat = x_old
            break
        delta = np.linalg.norm(x_hat - x_old) / max(np.linalg.norm(x_hat), 1e-300)
        trace.append(iter=it, x_hat=x_hat, tau_x=tau_x, p_hat=p_hat, tau_p=tau_p,
                     z0=np.asarray(stats.point), z_var=np.asarray(stats.variance),
                     y_tilde=np.asarray(ext.pseudo_mean),
                     sigma2_tilde=np.asarray(ext.pseudo_variance),
                     nmse=_iter_nmse(problem, x_hat), floor_events=floors)
        if it >= 2 and delta < config.tol:
            trace.converged = True
            break
    solution = PosteriorStats(point=x_hat, variance=tau_x)
    return solution, trace


def run_modular(problem: ProblemInstance, mode: Mode,
                config: SolverConfig = SolverConfig()):
    """Modular SLM + module-B solver; see module docstring for backends."""
    if config.slm_backend == "exact":
        return _run_modular_exact(problem, mode, config)
    return _run_modular_amp(problem, mode, config)
