"""Numerical certificates for the identities the toolkit is built on.

Three check families, each reproducible from (name, seed, samples):

* ``check_laplace_identity`` -- the max-sum curvature correction computed
  directly from f''(mode, y) equals the one computed through the Laplace
  variance, sample by sample.
* ``check_ep_bridge``       -- refining a belief through the likelihood,
  dividing out the cavity, and feeding the resulting pseudo-observation to
  the closed-form AWGN score reproduces the direct output score in the same
  mode.
* ``check_equivalence``     -- the monolithic GAMP solver and the modular
  SLM + module-B solver reach the same fixed point.

``check_derivatives`` is supporting validation of the channel derivatives
by finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .channels import (AwgnChannel, Mode, OutputChannel, PoissonChannel,
                       awgn_g_out, g_out_with_stats, posterior_map, posterior_mmse)
from .engine import ProblemInstance, SolverConfig, run_gamp, run_modular
from .gaussian import GaussianBelief, ep_extrinsic

P_HAT_RANGE = (-3.0, 3.0)
TAU_P_RANGE = (0.1, 10.0)
POISSON_Z_MIN = 0.05


@dataclass
class CheckReport:
    """Outcome of one verification check."""

    check: str
    samples: int
    seed: int
    max_rel_residual: float
    threshold: float
    passed: bool
    skipped_floored: int = 0
    worst_sample: dict | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"check": self.check, "samples": self.samples, "seed": self.seed,
               "max_rel_residual": self.max_rel_residual,
               "threshold": self.threshold, "pass": self.passed,
               "skipped_floored": self.skipped_floored}
        if self.worst_sample is not None:
            out["worst_sample"] = self.worst_sample
        if self.extras:
            out.update(self.extras)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _rel_residual(a, b, floor=1e-300):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    resid = np.abs(a - b) / denom
    return np.where(a == b, 0.0, resid)


def sample_operating_points(channel: OutputChannel, samples: int, seed: int,
                            mode: Mode = Mode.SUM_PRODUCT):
    """Random beliefs and channel-consistent observations.

    Belief means uniform on [-3, 3], variances log-uniform on [0.1, 10],
    y drawn from the channel at a z drawn from the belief (clamped into the
    channel domain).  Poisson counts are lifted to y >= 1: a zero count has
    (at most) zero log-likelihood curvature, so its extrinsic message is
    degenerate by construction in MAX_SUM mode and numerically degenerate
    in SUM_PRODUCT mode.
    """
    rng = np.random.default_rng(seed)
    p_hat = rng.uniform(*P_HAT_RANGE, size=samples)
    tau_p = np.exp(rng.uniform(np.log(TAU_P_RANGE[0]), np.log(TAU_P_RANGE[1]),
                               size=samples))
    z = p_hat + np.sqrt(tau_p) * rng.standard_normal(samples)
    if channel.domain == "positive":
        z = np.maximum(z, POISSON_Z_MIN)
    y = channel.sample(z, rng)
    if isinstance(channel, PoissonChannel):
        y = np.maximum(y, 1.0)
    return p_hat, tau_p, y


def _worst(idx, p_hat, tau_p, y, resid):
    return {"p_hat": float(p_hat[idx]), "tau_p": float(tau_p[idx]),
            "y": float(y[idx]), "residual": float(resid[idx])}


def check_laplace_identity(channel: OutputChannel, samples: int = 10_000,
                           seed: int = 0, threshold: float = 1e-10) -> CheckReport:
    """Direct curvature form vs. Laplace-variance form of the max-sum score."""
    p_hat, tau_p, y = sample_operating_points(channel, samples, seed, Mode.MAX_SUM)
    stats = posterior_map(channel, y, GaussianBelief(p_hat, tau_p))
    f2 = channel.d2(np.asarray(stats.point), y)
    direct = f2 / (tau_p * f2 - 1.0)
    via_laplace = (tau_p - np.asarray(stats.variance)) / tau_p ** 2
    resid = _rel_residual(direct, via_laplace)
    imax = int(np.argmax(resid))
    passed = bool(np.max(resid) <= threshold)
    return CheckReport(check=f"laplace_identity[{channel.name}]", samples=samples,
                       seed=seed, max_rel_residual=float(np.max(resid)),
                       threshold=threshold, passed=passed,
                       worst_sample=None if passed else _worst(imax, p_hat, tau_p, y, resid))


def check_ep_bridge(channel: OutputChannel, mode: Mode, samples: int = 10_000,
                    seed: int = 0, threshold: float | None = None) -> CheckReport:
    """Pseudo-observation route vs. direct output score, both modes."""
    if threshold is None:
        quadrature = mode is Mode.SUM_PRODUCT and not isinstance(channel, AwgnChannel)
        threshold = 1e-9 if quadrature else 1e-10
    p_hat, tau_p, y = sample_operating_points(channel, samples, seed, mode)
    belief = GaussianBelief(p_hat, tau_p)
    val_direct, nd_direct, stats = g_out_with_stats(channel, mode, y, belief)
    ext = ep_extrinsic(stats, belief)
    val_bridge, nd_bridge = awgn_g_out(ext, belief)
    flagged = np.broadcast_to(np.asarray(ext.floored), (samples,))
    resid = np.maximum(_rel_residual(val_direct, val_bridge),
                       _rel_residual(nd_direct, nd_bridge))
    resid = np.where(flagged, 0.0, resid)
    imax = int(np.argmax(resid))
    passed = bool(np.max(resid) <= threshold)
    return CheckReport(check=f"ep_bridge[{channel.name},{mode.value}]",
                       samples=samples, seed=seed,
                       max_rel_residual=float(np.max(resid)), threshold=threshold,
                       passed=passed, skipped_floored=int(np.count_nonzero(flagged)),
                       worst_sample=None if passed else _worst(imax, p_hat, tau_p, y, resid))


def check_derivatives(channel: OutputChannel, samples: int = 10_000,
                      seed: int = 0, threshold: float = 1e-6,
                      step: float = 1e-5) -> CheckReport:
    """Centered finite-difference validation of d1 (from f) and d2 (from d1)."""
    p_hat, tau_p, y = sample_operating_points(channel, samples, seed)
    rng = np.random.default_rng(seed + 1)
    z = p_hat + np.sqrt(tau_p) * rng.standard_normal(samples)
    if channel.domain == "positive":
        z = np.maximum(z, POISSON_Z_MIN)
    fd1 = (channel.log_likelihood(z + step, y)
           - channel.log_likelihood(z - step, y)) / (2.0 * step)
    fd2 = (channel.d1(z + step, y) - channel.d1(z - step, y)) / (2.0 * step)
    d1 = channel.d1(z, y)
    d2 = channel.d2(z, y)
    resid = np.maximum(np.abs(d1 - fd1) / np.maximum(np.abs(d1), 1.0),
                       np.abs(d2 - fd2) / np.maximum(np.abs(d2), 1.0))
    imax = int(np.argmax(resid))
    passed = bool(np.max(resid) <= threshold)
    worst = {"z": float(z[imax]), "y": float(y[imax]), "residual": float(resid[imax])}
    return CheckReport(check=f"derivatives[{channel.name}]", samples=samples,
                       seed=seed, max_rel_residual=float(np.max(resid)),
                       threshold=threshold, passed=passed,
                       worst_sample=None if passed else worst)


def check_equivalence(problem: ProblemInstance, mode: Mode,
                      config: SolverConfig = SolverConfig(),
                      threshold: float = 1e-6) -> CheckReport:
    """Fixed-point distance between the monolithic and modular solvers."""
    sol_g, trace_g = run_gamp(problem, mode, config)
    sol_m, trace_m = run_modular(problem, mode, config)
    xg = np.asarray(sol_g.point)
    xm = np.asarray(sol_m.point)
    dist = float(np.linalg.norm(xg - xm) / max(np.linalg.norm(xg), 1e-300))
    # per-iteration diagnostic distance on the belief means
    diag = []
    for rg, rm in zip(trace_g.records, trace_m.records):
        pg, pm = np.asarray(rg["p_hat"]), np.asarray(rm["p_hat"])
        diag.append(float(np.linalg.norm(pg - pm) / max(np.linalg.norm(pg), 1e-300)))
    passed = bool(dist <= threshold and not trace_g.diverged and not trace_m.diverged)
    return CheckReport(
        check=f"equivalence[{problem.channel.name},{mode.value},{config.slm_backend}]",
        samples=len(trace_g), seed=config.seed, max_rel_residual=dist,
        threshold=threshold, passed=passed,
        skipped_floored=trace_g.floor_events + trace_m.floor_events,
        extras={"iters_gamp": len(trace_g), "iters_modular": len(trace_m),
                "diverged": bool(trace_g.diverged or trace_m.diverged),
                "per_iter_belief_distance": diag[:20]})
