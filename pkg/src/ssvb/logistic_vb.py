"""Spike-and-slab logistic regression with Polya-Gamma augmentation.

Conditional on latent v_i ~ PG(1, c_i) the likelihood is Gaussian in beta,
so q(beta) = N(mu, Sigma) with Sigma = (X' diag(E v) X + D)^-1 and
mu = Sigma X'(y - 1/2).  Only the PG mean is required.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np

from .core_math import Dataset, DomainError, SpikeSlabHyper, spd_solve
from .linear_vb import FitOptions, FitReport, precision_diag, run_to_convergence, select, update_gamma

TiltRule = Literal["sqrt", "literal"]

_SERIES_CUTOFF = 1e-4


def pg_mean(b, c):
    """Mean of PG(b, c): ``b/(2c) tanh(c/2)``, with the limit ``b/4`` at 0."""
    b = np.asarray(b, dtype=float)
    c = np.abs(np.asarray(c, dtype=float))
    if np.any(b <= 0):
        raise DomainError("PG shape b must be positive")
    small = c < _SERIES_CUTOFF
    safe = np.where(small, 1.0, c)
    out = np.where(small, b / 4.0 * (1.0 - c**2 / 12.0), b / (2.0 * safe) * np.tanh(safe / 2.0))
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(eq=False)
class LogisticState:
    mu: np.ndarray
    Sigma: np.ndarray
    w: np.ndarray
    v_mean: np.ndarray
    c: np.ndarray
    t: int


def update_beta_logistic(data: Dataset, v_mean, D):
    v_mean = np.asarray(v_mean, dtype=float)
    if np.any(v_mean <= 0):
        raise DomainError("v_mean must be positive")
    M = data.X.T @ (data.X * v_mean[:, None]) + np.diag(np.asarray(D, dtype=float))
    rep = spd_solve(M, data.X.T @ (data.y - 0.5), want_inverse=True, check_symmetry=False)
    return rep.solution, rep.inverse


def linear_predictor_second_moment(data: Dataset, mu, Sigma) -> np.ndarray:
    """``E[(x_i'beta)^2] = x_i'Sigma x_i + (x_i'mu)^2``."""
    xm = data.X @ mu
    return np.einsum("ij,jk,ik->i", data.X, Sigma, data.X) + xm**2


def update_v(data: Dataset, mu, Sigma, tilt: TiltRule = "sqrt"):
    """Returns ``(c, v_mean)``.

    The PG density tilts by ``exp(-c^2 v / 2)``, so matching the expected
    quadratic term needs ``c_i^2 = E[(x_i'beta)^2]``; ``tilt="literal"``
    instead sets ``c_i`` to the second moment itself.
    """
    m = linear_predictor_second_moment(data, mu, Sigma)
    if tilt == "sqrt":
        c = np.sqrt(np.maximum(m, 0.0))
    elif tilt == "literal":
        c = m
    else:
        raise ValueError(f"unknown tilt rule {tilt!r}")
    return c, np.atleast_1d(pg_mean(1.0, c))


def iterate_logistic(data: Dataset, hyper: SpikeSlabHyper, tilt: TiltRule = "sqrt") -> Iterator[LogisticState]:
    w = np.full(data.p, 0.5)
    v = np.ones(data.n)
    t = 0
    while True:
        t += 1
        D = precision_diag(w, hyper)
        mu, Sigma = update_beta_logistic(data, v, D)
        c, v = update_v(data, mu, Sigma, tilt)
        w = update_gamma(mu, np.diag(Sigma), hyper)
        yield LogisticState(mu=mu, Sigma=Sigma, w=w, v_mean=v, c=c, t=t)


def fit_logistic(data: Dataset, hyper: SpikeSlabHyper | None = None, opts: FitOptions | None = None,
                 tilt: TiltRule = "sqrt", callback=None) -> FitReport:
    hyper = hyper or SpikeSlabHyper()
    opts = opts or FitOptions()
    if data.y_kind != "binary":
        raise DomainError("fit_logistic requires a binary response")
    state, converged, trace = run_to_convergence(
        iterate_logistic(data, hyper, tilt), opts, np.zeros(data.p), np.full(data.p, 0.5), None, callback
    )
    return FitReport(
        algorithm="logistic",
        mu=state.mu,
        w=state.w,
        tau=None,
        selected=select(state.w),
        iterations=state.t,
        converged=converged,
        delta_trace=trace,
    )
