"""Mean-field coordinate ascent for the spike-and-slab linear model.

The variational family is q(beta) q(sigma^2) prod_j q(gamma_j) with

    q(beta)      = N(mu, Sigma),  Sigma = (tau X'X + D)^-1,  mu = tau Sigma X'y
    q(sigma^2)   = IG(A + n/2, B1)
    q(gamma_j)   = Bernoulli(w_j)

where ``D = diag(1/v0 + (1/v1 - 1/v0) w)`` and ``tau = E[1/sigma^2]``.

Besides the fitter this module exposes the quantities used to bound the
iterates (``tau_bounds``, ``sparsity_diagnostics``) so that the sparsity
mechanism can be checked numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .core_math import (
    Dataset,
    DomainError,
    PreconditionError,
    SpikeSlabHyper,
    expit,
    spd_solve,
)


@dataclass(frozen=True)
class FitOptions:
    tol: float = 1e-6
    max_iter: int = 500
    track_trace: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")


@dataclass(eq=False)
class FitReport:
    """Outcome of any of the fitters.

    ``tau`` is ``None`` for models without a noise-scale factor (collapsed,
    logistic).  ``selected`` holds 0-based indices with ``w_j > 0.5``.
    """

    algorithm: str
    mu: np.ndarray
    w: np.ndarray
    tau: float | None
    selected: tuple[int, ...]
    iterations: int
    converged: bool
    delta_trace: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "mu": [float(v) for v in self.mu],
            "w": [float(v) for v in self.w],
            "tau": None if self.tau is None else float(self.tau),
            "selected": list(self.selected),
            "iterations": self.iterations,
            "converged": self.converged,
            "delta_trace": [float(v) for v in self.delta_trace],
        }


def select(w) -> tuple[int, ...]:
    return tuple(int(j) for j in np.flatnonzero(np.asarray(w) > 0.5))


@dataclass(eq=False)
class LinearState:
    mu: np.ndarray
    Sigma: np.ndarray
    w: np.ndarray
    tau: float
    A1: float
    B1: float
    t: int
    # values entering iteration t; kept for the iterate-wise bounds
    w_prev: np.ndarray | None = None
    tau_prev: float | None = None


@dataclass(frozen=True)
class TauBounds:
    tau_L: float
    tau_R: float


@dataclass(frozen=True)
class SparsityDiagnostics:
    s_j: float
    h_j: float
    c_j: float
    M_j: float
    c0: float
    sigma_bound: float


# ---------------------------------------------------------------------------
# single updates
# ---------------------------------------------------------------------------

def precision_diag(w, hyper: SpikeSlabHyper) -> np.ndarray:
    """Diagonal of ``D = (1/v0) I + (1/v1 - 1/v0) W``."""
    w = np.asarray(w, dtype=float)
    if np.any((w < 0) | (w > 1)):
        raise DomainError("w must lie in [0, 1]")
    return 1.0 / hyper.v0 + (1.0 / hyper.v1 - 1.0 / hyper.v0) * w


def update_beta(data: Dataset, tau: float, D) -> tuple[np.ndarray, np.ndarray]:
    if not tau > 0:
        raise DomainError("tau must be positive")
    D = np.asarray(D, dtype=float)
    M = tau * data.XtX + np.diag(D)
    rep = spd_solve(M, tau * data.Xty, want_inverse=True, check_symmetry=False)
    return rep.solution, rep.inverse


def expected_sq_residual(data: Dataset, mu, Sigma) -> float:
    """``E||y - X beta||^2`` under ``beta ~ N(mu, Sigma)``."""
    r = data.y - data.X @ mu
    return float(r @ r) + float(np.sum(data.XtX * Sigma))


def update_sigma(data: Dataset, mu, Sigma, hyper: SpikeSlabHyper) -> tuple[float, float, float]:
    A1 = hyper.A + data.n / 2.0
    B1 = hyper.B + 0.5 * expected_sq_residual(data, mu, Sigma)
    return A1, B1, A1 / B1


def gamma_logodds(mu, Sigma_diag, hyper: SpikeSlabHyper) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    Sigma_diag = np.asarray(Sigma_diag, dtype=float)
    if np.any(Sigma_diag <= 0):
        raise DomainError("Sigma diagonal must be positive")
    return (
        hyper.lam
        + 0.5 * math.log(hyper.v0 / hyper.v1)
        + 0.5 * (mu**2 + Sigma_diag) * (1.0 / hyper.v0 - 1.0 / hyper.v1)
    )


def update_gamma(mu, Sigma_diag, hyper: SpikeSlabHyper) -> np.ndarray:
    return np.atleast_1d(expit(gamma_logodds(mu, Sigma_diag, hyper)))


# ---------------------------------------------------------------------------
# the fitter
# ---------------------------------------------------------------------------

def iterate_linear(data: Dataset, hyper: SpikeSlabHyper, w0=None, tau0: float = 1.0) -> Iterator[LinearState]:
    """Yield the state after every full sweep; never terminates on its own."""
    p = data.p
    w = np.full(p, 0.5) if w0 is None else np.asarray(w0, dtype=float).copy()
    tau = float(tau0)
    t = 0
    while True:
        t += 1
        D = precision_diag(w, hyper)
        mu, Sigma = update_beta(data, tau, D)
        A1, B1, tau_new = update_sigma(data, mu, Sigma, hyper)
        w_new = update_gamma(mu, np.diag(Sigma), hyper)
        yield LinearState(mu=mu, Sigma=Sigma, w=w_new, tau=tau_new, A1=A1, B1=B1, t=t,
                          w_prev=w, tau_prev=tau)
        w, tau = w_new, tau_new


def run_to_convergence(states: Iterator, opts: FitOptions, mu0, w0, tau0, callback=None):
    """Drive an iterator of states until the max-change criterion is met.

    Returns ``(last_state, converged, trace)``.  ``tau0`` may be ``None``
    for models without a noise-scale factor.
    """
    mu_old, w_old, tau_old = np.asarray(mu0, float), np.asarray(w0, float), tau0
    trace: list[float] = []
    state = None
    converged = False
    for state in states:
        if callback is not None:
            callback(state)
        delta = max(float(np.max(np.abs(state.mu - mu_old))), float(np.max(np.abs(state.w - w_old))))
        tau_new = getattr(state, "tau", None) if tau_old is not None else None
        if tau_new is not None:
            delta = max(delta, abs(tau_new - tau_old) / tau_new)
        if opts.track_trace:
            trace.append(delta)
        if delta < opts.tol:
            converged = True
            break
        if state.t >= opts.max_iter:
            break
        mu_old, w_old, tau_old = state.mu, state.w, tau_new
    return state, converged, trace


def fit_linear(data: Dataset, hyper: SpikeSlabHyper | None = None, opts: FitOptions | None = None,
               callback=None) -> FitReport:
    """Run the linear-model CAVI from ``w = 1/2``, ``tau = 1``.

    ``callback``, if given, receives every ``LinearState``.
    """
    hyper = hyper or SpikeSlabHyper()
    opts = opts or FitOptions()
    if data.y_kind != "continuous":
        raise DomainError("fit_linear requires a continuous response")
    w0 = np.full(data.p, 0.5)
    state, converged, trace = run_to_convergence(
        iterate_linear(data, hyper, w0, 1.0), opts, np.zeros(data.p), w0, 1.0, callback
    )
    return FitReport(
        algorithm="linear",
        mu=state.mu,
        w=state.w,
        tau=state.tau,
        selected=select(state.w),
        iterations=state.t,
        converged=converged,
        delta_trace=trace,
    )


# ---------------------------------------------------------------------------
# iterate bounds
# ---------------------------------------------------------------------------

def _require_full_rank(data: Dataset):
    if data.p > data.n or not data.full_rank:
        raise PreconditionError("bounds require p <= n and a full-column-rank X")


def hat_quadratic(data: Dataset) -> float:
    """``y' X (X'X)^-1 X' y``."""
    _require_full_rank(data)
    beta_ls = spd_solve(data.XtX, data.Xty, check_symmetry=False).solution
    return float(data.Xty @ beta_ls)


def ls_rss(data: Dataset) -> float:
    _require_full_rank(data)
    beta_ls, *_ = np.linalg.lstsq(data.X, data.y, rcond=None)
    r = data.y - data.X @ beta_ls
    return float(r @ r)


def tau_bounds(data: Dataset, hyper: SpikeSlabHyper, tau0: float = 1.0) -> TauBounds:
    """Deterministic interval containing every ``tau`` iterate for ``t >= 1``."""
    _require_full_rank(data)
    n, p, A, B = data.n, data.p, hyper.A, hyper.B
    a = 2 * A + n
    b = a - p
    tau_L = b / (2 * B + 2 * data.yty + 2 * hat_quadratic(data) + p * b / (a * tau0))
    tau_R = a / (2 * B + ls_rss(data))
    return TauBounds(tau_L=tau_L, tau_R=tau_R)


def _partial_quadratics(data: Dataset, j: int) -> tuple[float, float, float]:
    """Return (X_j'X_j - X_j'P_{-j}X_j, X_j'P_{-j}X_j, y'P_{-j}y) with P_{-j}
    the projection onto the remaining columns."""
    G = data.XtX
    xjj = float(G[j, j])
    if data.p == 1:
        return xjj, 0.0, 0.0
    rest = np.delete(np.arange(data.p), j)
    G_rest = G[np.ix_(rest, rest)]
    g = G[rest, j]
    Xy_rest = data.Xty[rest]
    sol = spd_solve(G_rest, np.column_stack([g, Xy_rest]), check_symmetry=False).solution
    proj_xx = float(g @ sol[:, 0])
    proj_yy = float(Xy_rest @ sol[:, 1])
    return xjj - proj_xx, proj_xx, proj_yy


def sparsity_diagnostics(data: Dataset, hyper: SpikeSlabHyper, bounds: TauBounds, j: int,
                         w_prev_j: float) -> SparsityDiagnostics:
    """Per-coordinate constants bounding one update of coordinate ``j``.

    ``sigma_bound`` is the upper bound on ``Sigma_jj`` at the next
    iteration given ``w_j = w_prev_j``; ``|mu_j| <= c_j Sigma_jj`` and
    ``M_j`` is the v1-free part of the log-odds bound.
    """
    _require_full_rank(data)
    schur, proj_xx, proj_yy = _partial_quadratics(data, j)
    s_j = bounds.tau_L * schur
    h_j = 1.0 / (1.0 / hyper.v0 + s_j)
    c0 = math.sqrt(max(proj_xx, 0.0)) * math.sqrt(max(proj_yy, 0.0))
    c_j = bounds.tau_R * (abs(float(data.Xty[j])) + c0)
    M_j = hyper.lam + (h_j**2 * c_j**2 + h_j) / (2.0 * hyper.v0)
    d_j = 1.0 / hyper.v0 + (1.0 / hyper.v1 - 1.0 / hyper.v0) * w_prev_j
    return SparsityDiagnostics(s_j=s_j, h_j=h_j, c_j=c_j, M_j=M_j, c0=c0, sigma_bound=1.0 / (d_j + s_j))
