"""Spike-and-slab quantile regression via the asymmetric-Laplace mixture.

The ALD error at level q is written as a normal scale-location mixture

    y_i | e_i ~ N(x_i'beta + c1 e_i, c2 sigma e_i),   e_i | sigma ~ Exp(1/sigma)

and the latent e_i get generalized-inverse-Gaussian variational factors
GIG(1/2, lambda1_i, lambda2).  Only the half-integer Bessel ratio
K_{3/2}/K_{1/2} = 1 + 1/z is needed, so all moments are closed form.

``tau_prec`` denotes E[1/sigma]; ``q_level`` is the target quantile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np

from .core_math import Dataset, DomainError, NumericalDomainError, SpikeSlabHyper, spd_solve
from .linear_vb import FitOptions, FitReport, precision_diag, run_to_convergence, select, update_gamma

DELTA2_FLOOR = 1e-12

TauShape = Literal["derivation", "listing"]


@dataclass(frozen=True)
class ALDConstants:
    q_level: float
    c1: float
    c2: float


def ald_constants(q_level: float) -> ALDConstants:
    q = float(q_level)
    if not (0.0 < q < 1.0):
        raise DomainError(f"q_level must lie in (0, 1), got {q_level}")
    return ALDConstants(q_level=q, c1=(1 - 2 * q) / (q * (1 - q)), c2=2 / (q * (1 - q)))


def gig_moments(lambda1, lambda2):
    """``(E[1/e], E[e])`` for ``e ~ GIG(1/2, lambda1, lambda2)``.

    Density proportional to ``x^{-1/2} exp(-(lambda1/x + lambda2 x)/2)``.
    Accepts scalars or broadcastable arrays.
    """
    l1 = np.asarray(lambda1, dtype=float)
    l2 = np.asarray(lambda2, dtype=float)
    if np.any(l1 <= 0) or np.any(l2 <= 0):
        raise DomainError("GIG parameters must be strictly positive")
    ratio = np.sqrt(l1 / l2)
    m_neg1 = 1.0 / ratio
    m_pos1 = ratio * (1.0 + 1.0 / np.sqrt(l1 * l2))
    if m_neg1.ndim == 0 and m_pos1.ndim == 0:
        return float(m_neg1), float(m_pos1)
    return m_neg1, m_pos1


def bessel_ratio_32_12(z):
    """``K_{3/2}(z) / K_{1/2}(z)`` from the recurrence; equals ``1 + 1/z``."""
    return 1.0 + 1.0 / np.asarray(z, dtype=float)


@dataclass(eq=False)
class QuantileState:
    mu: np.ndarray
    Sigma: np.ndarray
    w: np.ndarray
    tau_prec: float
    E1: np.ndarray
    E2: np.ndarray
    A1: float
    B1: float
    t: int

    @property
    def tau(self) -> float:
        return self.tau_prec


def update_beta_quantile(data: Dataset, E1, tau_prec: float, D, consts: ALDConstants):
    E1 = np.asarray(E1, dtype=float)
    if np.any(E1 <= 0):
        raise DomainError("E1 must be positive")
    if not tau_prec > 0:
        raise DomainError("tau_prec must be positive")
    scale = tau_prec / consts.c2
    XE = data.X * E1[:, None]
    M = scale * (data.X.T @ XE) + np.diag(np.asarray(D, dtype=float))
    y0 = E1 * data.y - consts.c1
    rep = spd_solve(M, scale * (data.X.T @ y0), want_inverse=True, check_symmetry=False)
    return rep.solution, rep.inverse


def residual_moments(data: Dataset, mu, Sigma):
    """Per-observation ``E[y_i - x_i'beta]`` and ``E[(y_i - x_i'beta)^2]``."""
    delta1 = data.y - data.X @ mu
    quad = np.einsum("ij,jk,ik->i", data.X, Sigma, data.X)
    return delta1, delta1**2 + quad


def update_sigma_quantile(data: Dataset, mu, Sigma, E1, E2, consts: ALDConstants, hyper: SpikeSlabHyper,
                          tau_shape: TauShape = "derivation"):
    """Returns ``(A1, B1, tau_prec)``.

    ``tau_shape="derivation"`` uses ``A1 = A + 3n/2``; ``"listing"`` uses
    ``A + n/2``, which drops the latent-scale terms.
    """
    delta1, delta2 = residual_moments(data, mu, Sigma)
    c1, c2 = consts.c1, consts.c2
    B1 = hyper.B + float(np.sum((1 + c1**2 / (2 * c2)) * E2 - (c1 / c2) * delta1 + delta2 * E1 / (2 * c2)))
    if not B1 > 0:
        raise NumericalDomainError(f"B1 = {B1!r} is not positive")
    if tau_shape == "derivation":
        A1 = hyper.A + 1.5 * data.n
    elif tau_shape == "listing":
        A1 = hyper.A + 0.5 * data.n
    else:
        raise ValueError(f"unknown tau_shape {tau_shape!r}")
    return A1, B1, A1 / B1


def update_latent_e(data: Dataset, mu, Sigma, tau_prec: float, consts: ALDConstants):
    _, delta2 = residual_moments(data, mu, Sigma)
    delta2 = np.maximum(delta2, DELTA2_FLOOR)
    lambda1 = tau_prec * delta2 / consts.c2
    lambda2 = tau_prec * (2 * consts.c2 + consts.c1**2) / consts.c2
    E1, E2 = gig_moments(lambda1, np.full_like(lambda1, lambda2))
    return E1, E2


def iterate_quantile(data: Dataset, consts: ALDConstants, hyper: SpikeSlabHyper,
                     tau_shape: TauShape = "derivation") -> Iterator[QuantileState]:
    n, p = data.n, data.p
    w = np.full(p, 0.5)
    tau = 1.0
    E1 = np.ones(n)
    E2 = np.ones(n)
    t = 0
    while True:
        t += 1
        D = precision_diag(w, hyper)
        mu, Sigma = update_beta_quantile(data, E1, tau, D, consts)
        A1, B1, tau = update_sigma_quantile(data, mu, Sigma, E1, E2, consts, hyper, tau_shape)
        E1, E2 = update_latent_e(data, mu, Sigma, tau, consts)
        w = update_gamma(mu, np.diag(Sigma), hyper)
        yield QuantileState(mu=mu, Sigma=Sigma, w=w, tau_prec=tau, E1=E1, E2=E2, A1=A1, B1=B1, t=t)


def fit_quantile(data: Dataset, q_level: float, hyper: SpikeSlabHyper | None = None,
                 opts: FitOptions | None = None, tau_shape: TauShape = "derivation",
                 callback=None) -> FitReport:
    hyper = hyper or SpikeSlabHyper()
    opts = opts or FitOptions()
    if data.y_kind != "continuous":
        raise DomainError("fit_quantile requires a continuous response")
    consts = ald_constants(q_level)
    state, converged, trace = run_to_convergence(
        iterate_quantile(data, consts, hyper, tau_shape), opts,
        np.zeros(data.p), np.full(data.p, 0.5), 1.0, callback,
    )
    return FitReport(
        algorithm="quantile",
        mu=state.mu,
        w=state.w,
        tau=state.tau_prec,
        selected=select(state.w),
        iterations=state.t,
        converged=converged,
        delta_trace=trace,
    )
