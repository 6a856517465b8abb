"""Collapsed variational inference over the inclusion indicators.

Here beta ~ N(0, sigma^2 C_gamma) so both beta and sigma^2 integrate out in
closed form and only q(gamma) = prod_j Bernoulli(w_j) is optimized.  Each
coordinate update compares two ridge-type solves in which the j-th prior
weight is pinned to 0 (spike) or 1 (slab).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_math import Dataset, DomainError, NumericalDomainError, SpikeSlabHyper, expit, spd_solve
from .linear_vb import FitOptions, FitReport, precision_diag, select

LOG_FLOOR = 1e-300


@dataclass(eq=False)
class CollapsedState:
    w: np.ndarray
    alpha: float
    t: int


def collapsed_alpha(hyper: SpikeSlabHyper, n: int) -> float:
    return hyper.lam - 0.5 * math.log(n) - 0.5 * math.log(hyper.v1)


def _ridge_solve(data: Dataset, hyper: SpikeSlabHyper, w) -> np.ndarray:
    M = data.XtX + np.diag(precision_diag(w, hyper))
    return spd_solve(M, data.Xty, check_symmetry=False).solution


def mu_jk(data: Dataset, hyper: SpikeSlabHyper, w, j: int, k: int) -> np.ndarray:
    """Posterior-mean-type solve with ``w_j`` replaced by ``k``."""
    if k not in (0, 1):
        raise DomainError("k must be 0 or 1")
    wk = np.array(w, dtype=float)
    wk[j] = k
    return _ridge_solve(data, hyper, wk)


def residual_scale(data: Dataset, hyper: SpikeSlabHyper, mu) -> float:
    """``B + ||y||^2/2 - y'X mu / 2``; must be positive."""
    arg = hyper.B + 0.5 * data.yty - 0.5 * float(data.Xty @ mu)
    if not arg > LOG_FLOOR:
        raise NumericalDomainError(f"log argument {arg!r} is not positive")
    return arg


def B_jk(data: Dataset, hyper: SpikeSlabHyper, w, j: int, k: int) -> float:
    """``(A + n/2) log(B + n/2 * sigma_hat_jk^2)``."""
    mu = mu_jk(data, hyper, w, j, k)
    return (hyper.A + data.n / 2.0) * math.log(residual_scale(data, hyper, mu))


def T_terms(data: Dataset, hyper: SpikeSlabHyper, w, j: int) -> tuple[float, float]:
    alpha = collapsed_alpha(hyper, data.n)
    c = hyper.A + data.n / 2.0
    T0 = -c * math.log(residual_scale(data, hyper, mu_jk(data, hyper, w, j, 0)))
    T1 = -c * math.log(residual_scale(data, hyper, mu_jk(data, hyper, w, j, 1))) + alpha
    return T0, T1


def collapsed_gamma_update(data: Dataset, hyper: SpikeSlabHyper, w, j: int) -> float:
    T0, T1 = T_terms(data, hyper, w, j)
    return float(expit(T1 - T0))


def fit_collapsed(data: Dataset, hyper: SpikeSlabHyper | None = None, opts: FitOptions | None = None,
                  callback=None) -> FitReport:
    """Gauss-Seidel sweeps over j = 0..p-1 starting from ``w = 1/2``.

    ``mu`` in the report is the ridge-type solve at the final ``w``;
    ``tau`` is ``None`` since sigma^2 is integrated out.
    """
    hyper = hyper or SpikeSlabHyper()
    opts = opts or FitOptions()
    if data.y_kind != "continuous":
        raise DomainError("fit_collapsed requires a continuous response")
    alpha = collapsed_alpha(hyper, data.n)
    w = np.full(data.p, 0.5)
    trace: list[float] = []
    converged = False
    t = 0
    while t < opts.max_iter:
        t += 1
        w_old = w.copy()
        for j in range(data.p):
            w[j] = collapsed_gamma_update(data, hyper, w, j)
        if callback is not None:
            callback(CollapsedState(w=w.copy(), alpha=alpha, t=t))
        delta = float(np.max(np.abs(w - w_old)))
        if opts.track_trace:
            trace.append(delta)
        if delta < opts.tol:
            converged = True
            break
    return FitReport(
        algorithm="collapsed",
        mu=_ridge_solve(data, hyper, w),
        w=w,
        tau=None,
        selected=select(w),
        iterations=t,
        converged=converged,
        delta_trace=trace,
    )


def quad_form_identity(data: Dataset, hyper: SpikeSlabHyper, w, j: int) -> tuple[float, float]:
    """Both sides of the rank-one identity

    ``y'X (Sigma^(j1) - Sigma^(j0)) X'y = (1/v0 - 1/v1) mu_j^(j0) mu_j^(j1)``.
    """
    m0 = mu_jk(data, hyper, w, j, 0)
    m1 = mu_jk(data, hyper, w, j, 1)
    lhs = float(data.Xty @ m1) - float(data.Xty @ m0)
    rhs = (1.0 / hyper.v0 - 1.0 / hyper.v1) * float(m0[j]) * float(m1[j])
    return lhs, rhs
