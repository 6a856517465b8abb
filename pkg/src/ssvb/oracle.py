"""Exact posterior over inclusion patterns by enumerating all 2^p models.

Two marginal likelihoods are available:

* ``collapsed`` -- beta ~ N(0, sigma^2 C_gamma); beta and sigma^2 integrate
  out analytically.  Constants that do not depend on gamma are dropped, so
  absolute values are defined only up to a common offset.
* ``model2`` -- beta ~ N(0, C_gamma) independent of sigma^2 (the model the
  mean-field fitter targets).  beta integrates out analytically and the
  remaining one-dimensional integral over sigma^2 is done by adaptive
  quadrature in ``u = log sigma^2``.  This one is a proper log density.

Models are indexed by binary counting: bit j of the model index is gamma_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import integrate
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, logsumexp

from .core_math import Dataset, SpikeSlabHyper, spd_logdet, spd_solve

MAX_P = 20

ModelKind = Literal["collapsed", "model2"]


class BudgetError(ValueError):
    """Enumeration would exceed the 2^20 model budget."""


class AccuracyError(ArithmeticError):
    def __init__(self, achieved: float, target: float):
        self.achieved = achieved
        self.target = target
        super().__init__(f"quadrature reached relative error {achieved:.3g}, target {target:.3g}")


@dataclass(frozen=True)
class QuadratureOptions:
    lower: float = -40.0
    upper: float = 40.0
    target: float = 1e-8
    epsrel: float = 1e-11
    limit: int = 400
    grid: int = 1601
    form: Literal["auto", "dense", "woodbury"] = "auto"


@dataclass(eq=False)
class ExactPosterior:
    models: list[tuple[tuple[int, ...], float]]
    probs: np.ndarray
    inclusion: np.ndarray
    map_model: tuple[int, ...]
    kind: str = "collapsed"
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "inclusion": [float(v) for v in self.inclusion],
            "map_model": list(self.map_model),
            "models": [{"gamma": list(g), "log_weight": float(lw), "prob": float(pr)}
                       for (g, lw), pr in zip(self.models, self.probs)],
        }


def _as_gamma(gamma, p: int) -> np.ndarray:
    g = np.asarray(gamma, dtype=int)
    if g.shape != (p,) or np.any((g != 0) & (g != 1)):
        raise ValueError(f"gamma must be a 0/1 vector of length {p}")
    return g


def _slab_variances(g: np.ndarray, hyper: SpikeSlabHyper) -> np.ndarray:
    return np.where(g == 1, hyper.v1, hyper.v0)


def log_prior_gamma(g: np.ndarray, hyper: SpikeSlabHyper) -> float:
    k = int(g.sum())
    return k * math.log(hyper.rho) + (g.size - k) * math.log1p(-hyper.rho)


def log_marginal_collapsed(data: Dataset, hyper: SpikeSlabHyper, gamma) -> float:
    g = _as_gamma(gamma, data.p)
    c = _slab_variances(g, hyper)
    M = data.XtX + np.diag(1.0 / c)
    quad = float(data.Xty @ spd_solve(M, data.Xty, check_symmetry=False).solution)
    scale = hyper.B + 0.5 * data.yty - 0.5 * quad
    return (
        log_prior_gamma(g, hyper)
        - 0.5 * float(np.sum(np.log(c)))
        - 0.5 * spd_logdet(M)
        - (hyper.A + data.n / 2.0) * math.log(scale)
    )


# ---------------------------------------------------------------------------
# model2: beta independent of sigma^2
# ---------------------------------------------------------------------------

class _Model2Integrand:
    """log of N(y; 0, s I + X C X') IG(s; A, B) s, as a function of u = log s."""

    def __init__(self, data: Dataset, hyper: SpikeSlabHyper, c: np.ndarray, form: str):
        self.n, self.p = data.n, data.p
        self.A, self.B = hyper.A, hyper.B
        self.yty = data.yty
        self.log_ig_const = hyper.A * math.log(hyper.B) - float(gammaln(hyper.A))
        if form == "auto":
            form = "dense" if self.n <= 4 * self.p else "woodbury"
        self.form = form
        if form == "dense":
            # s I + X C X' shares eigenvectors with X C X'
            e, Q = np.linalg.eigh((data.X * c) @ data.X.T)
            self.e = np.maximum(e, 0.0)
            self.qy2 = (Q.T @ data.y) ** 2
        elif form == "woodbury":
            root = np.sqrt(c)
            K = root[:, None] * data.XtX * root[None, :]
            d, V = np.linalg.eigh(K)
            self.d = np.maximum(d, 0.0)
            self.z2 = (V.T @ (root * data.Xty)) ** 2
        else:
            raise ValueError(f"unknown form {form!r}")

    def loglik(self, s: float) -> float:
        n = self.n
        if self.form == "dense":
            logdet = float(np.sum(np.log(self.e + s)))
            quad = float(np.sum(self.qy2 / (self.e + s)))
        else:
            logdet = n * math.log(s) + float(np.sum(np.log1p(self.d / s)))
            quad = (self.yty - float(np.sum(self.z2 / (s + self.d)))) / s
        return -0.5 * n * math.log(2 * math.pi) - 0.5 * logdet - 0.5 * quad

    def loglik_vec(self, s: np.ndarray) -> np.ndarray:
        """Vectorized over ``s``; woodbury form only."""
        n = self.n
        logdet = n * np.log(s) + np.sum(np.log1p(self.d[None, :] / s[:, None]), axis=1)
        quad = (self.yty - np.sum(self.z2[None, :] / (s[:, None] + self.d[None, :]), axis=1)) / s
        return -0.5 * n * math.log(2 * math.pi) - 0.5 * logdet - 0.5 * quad

    def __call__(self, u: float) -> float:
        s = math.exp(u)
        return self.loglik(s) + self.log_ig_const - (self.A + 1) * u - self.B / s + u


def log_marginal_model2(data: Dataset, hyper: SpikeSlabHyper, gamma,
                        quad: QuadratureOptions | None = None) -> float:
    """log p(y | gamma) + log pi(gamma) for beta ~ N(0, C_gamma), sigma^2 ~ IG(A, B)."""
    quad = quad or QuadratureOptions()
    g = _as_gamma(gamma, data.p)
    f = _Model2Integrand(data, hyper, _slab_variances(g, hyper), quad.form)

    us = np.linspace(quad.lower, quad.upper, quad.grid)
    vals = np.array([f(u) for u in us])
    k = int(np.argmax(vals))
    lo = us[max(k - 1, 0)]
    hi = us[min(k + 1, us.size - 1)]
    res = minimize_scalar(lambda u: -f(u), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    u_star = float(res.x)
    f_max = max(float(-res.fun), float(vals[k]))

    def g_(u):
        return math.exp(f(u) - f_max)

    # split at the mode so the peak is never missed by the adaptive rule
    total = 0.0
    err = 0.0
    for a, b in ((quad.lower, u_star), (u_star, quad.upper)):
        if b <= a:
            continue
        val, e = integrate.quad(g_, a, b, epsabs=0.0, epsrel=quad.epsrel, limit=quad.limit)
        total += val
        err += e
    if not total > 0:
        raise AccuracyError(float("inf"), quad.target)
    rel = err / total
    if rel > quad.target:
        raise AccuracyError(rel, quad.target)
    return f_max + math.log(total) + log_prior_gamma(g, hyper)


def log_marginal_model2_trapezoid(data: Dataset, hyper: SpikeSlabHyper, gamma, points: int = 10**7,
                                  lower: float = -40.0, upper: float = 40.0) -> float:
    """Dense-grid trapezoid reference for ``log_marginal_model2`` (test oracle)."""
    g = _as_gamma(gamma, data.p)
    f = _Model2Integrand(data, hyper, _slab_variances(g, hyper), "woodbury")
    chunks = np.array_split(np.arange(points), max(1, points // 10**6))
    h = (upper - lower) / (points - 1)
    logs = []
    for idx in chunks:
        u = lower + h * idx
        s = np.exp(u)
        lv = f.loglik_vec(s) + f.log_ig_const - (f.A + 1) * u - f.B / s + u
        wts = np.ones_like(u)
        wts[idx == 0] = 0.5
        wts[idx == points - 1] = 0.5
        logs.append(logsumexp(lv, b=wts))
    total = logsumexp(np.array(logs))
    return float(total + math.log(h) + log_prior_gamma(g, hyper))


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def all_models(p: int) -> np.ndarray:
    idx = np.arange(2**p)[:, None]
    return ((idx >> np.arange(p)[None, :]) & 1).astype(int)


def enumerate_posterior(data: Dataset, hyper: SpikeSlabHyper, model_kind: ModelKind = "collapsed",
                        quad: QuadratureOptions | None = None) -> ExactPosterior:
    if data.p > MAX_P:
        raise BudgetError(f"p = {data.p} exceeds the enumeration budget p <= {MAX_P}")
    if model_kind == "collapsed":
        fn = lambda g: log_marginal_collapsed(data, hyper, g)  # noqa: E731
    elif model_kind == "model2":
        fn = lambda g: log_marginal_model2(data, hyper, g, quad)  # noqa: E731
    else:
        raise ValueError(f"unknown model_kind {model_kind!r}")
    gammas = all_models(data.p)
    logw = np.array([fn(g) for g in gammas])
    if not np.all(np.isfinite(logw)):
        raise ArithmeticError("non-finite log weight")
    shifted = np.exp(logw - logw.max())
    probs = shifted / shifted.sum()
    inclusion = probs @ gammas
    best = gammas[int(np.argmax(logw))]
    return ExactPosterior(
        models=[(tuple(int(v) for v in g), float(lw)) for g, lw in zip(gammas, logw)],
        probs=probs,
        inclusion=np.clip(inclusion, 0.0, 1.0),
        map_model=tuple(int(v) for v in best),
        kind=model_kind,
    )
