"""Data generation and Monte-Carlo consistency studies.

Every replication draws its design and its noise from two independent
streams spawned from ``SeedSequence([seed, n, rep])``, so results depend
only on (seed, cell, replication) and never on execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from .collapsed_vb import fit_collapsed
from .core_math import Dataset, DomainError, SpikeSlabHyper, expit, validate_dataset
from .linear_vb import FitOptions, fit_linear
from .logistic_vb import fit_logistic
from .quantile_vb import fit_quantile

ModelKind = Literal["linear", "quantile", "logistic"]
Algorithm = Literal["linear", "collapsed", "quantile", "logistic"]
V0Scaling = Literal["fixed", "inv_sqrt_n", "sqrt_n"]

_MODEL_FOR = {"linear": "linear", "collapsed": "linear", "quantile": "quantile", "logistic": "logistic"}


@dataclass(frozen=True)
class TruthSpec:
    beta0: tuple[float, ...]
    sigma0: float = 1.0
    x_dist: Literal["normal", "equicorrelated"] = "normal"
    x_corr: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta0", tuple(float(b) for b in self.beta0))
        if len(self.beta0) < 1:
            raise DomainError("beta0 must have at least one entry")
        if not self.sigma0 > 0:
            raise DomainError("sigma0 must be positive")
        if self.x_dist not in ("normal", "equicorrelated"):
            raise DomainError(f"unknown x_dist {self.x_dist!r}")
        if not (0.0 <= self.x_corr < 1.0):
            raise DomainError("x_corr must lie in [0, 1)")

    @property
    def p(self) -> int:
        return len(self.beta0)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(j for j, b in enumerate(self.beta0) if b != 0)

    @property
    def l0(self) -> float | None:
        s = self.support
        return min(abs(self.beta0[j]) for j in s) if s else None

    def second_moment(self) -> np.ndarray:
        """E[x x'] of the design distribution."""
        r = self.x_corr if self.x_dist == "equicorrelated" else 0.0
        return (1 - r) * np.eye(self.p) + r * np.ones((self.p, self.p))


def _streams(seed, noise_seed=None):
    x_ss, e_ss = np.random.SeedSequence(seed).spawn(2)
    if noise_seed is not None:
        e_ss = np.random.SeedSequence(noise_seed)
    return np.random.default_rng(x_ss), np.random.default_rng(e_ss)


def sample_ald(rng: np.random.Generator, size: int, q_level: float, scale: float = 1.0) -> np.ndarray:
    """Asymmetric-Laplace draws whose q-quantile is exactly zero.

    A difference of exponentials with rates q/scale and (1-q)/scale has
    density proportional to exp(-rho_q(x)/scale).
    """
    e = rng.standard_exponential((2, size))
    return scale * (e[0] / q_level - e[1] / (1.0 - q_level))


def simulate(model_kind: ModelKind, truth: TruthSpec, n: int, seed, *, q_level: float = 0.5,
             noise_seed=None) -> tuple[Dataset, TruthSpec]:
    if n < 1:
        raise DomainError("n must be >= 1")
    x_rng, e_rng = _streams(seed, noise_seed)
    p = truth.p
    Z = x_rng.standard_normal((n, p))
    if truth.x_dist == "equicorrelated" and truth.x_corr > 0:
        common = x_rng.standard_normal((n, 1))
        X = math.sqrt(1 - truth.x_corr) * Z + math.sqrt(truth.x_corr) * common
    else:
        X = Z
    eta = X @ np.asarray(truth.beta0)
    if model_kind == "linear":
        y = eta + truth.sigma0 * e_rng.standard_normal(n)
        kind = "continuous"
    elif model_kind == "quantile":
        if not 0 < q_level < 1:
            raise DomainError("q_level must lie in (0, 1)")
        y = eta + sample_ald(e_rng, n, q_level, truth.sigma0)
        kind = "continuous"
    elif model_kind == "logistic":
        y = (e_rng.random(n) < expit(eta)).astype(float)
        kind = "binary"
    else:
        raise DomainError(f"unknown model kind {model_kind!r}")
    return validate_dataset(X, y, kind), truth


def check_v0_admissible(hyper: SpikeSlabHyper, l0: float, delta: float) -> bool:
    """Whether (v0, v1, rho) satisfy both parts of the spike-width condition."""
    if not (l0 > 0 and delta > 0):
        raise DomainError("l0 and delta must be positive")
    lam, v0, v1 = hyper.lam, hyper.v0, hyper.v1
    cond_i = v0 < min(v1 * math.exp(-2 * lam), v1)
    cond_ii = (0 < v0 < l0**2) and (
        l0**2 / v0 + math.log(v0) >= math.log(v1) + l0**2 / v1 - 2 * lam + 2 * delta
    )
    return bool(cond_i and cond_ii)


# ---------------------------------------------------------------------------
# consistency studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    truth: TruthSpec
    n_grid: tuple[int, ...] = (100, 400, 1600)
    reps: int = 200
    algorithm: Algorithm = "linear"
    v0: float = 0.01
    v1: float = 100.0
    A: float = 0.5
    B: float = 0.5
    rho: float = 0.5
    v0_scaling: V0Scaling = "fixed"
    q_level: float = 0.5
    delta: float = 0.1
    seed: int = 0
    tol: float = 1e-6
    max_iter: int = 500
    workers: int = 1

    def hyper_for(self, n: int) -> SpikeSlabHyper:
        if self.v0_scaling == "fixed":
            v0 = self.v0
        elif self.v0_scaling == "inv_sqrt_n":
            v0 = self.v0 / math.sqrt(n)
        elif self.v0_scaling == "sqrt_n":
            v0 = self.v0 * math.sqrt(n)
        else:
            raise DomainError(f"unknown v0 scaling {self.v0_scaling!r}")
        return SpikeSlabHyper(v0=v0, v1=self.v1, A=self.A, B=self.B, rho=self.rho)


@dataclass
class CellResult:
    n: int
    p: int
    v0: float
    v1: float
    reps: int
    failures: int
    degraded: bool
    admissible: bool | None
    exact_recovery_rate: float
    sup_error_mean: float
    sigma2_error_mean: float | None
    median_null_w: float | None
    min_signal_w_median: float | None
    min_signal_w: float | None
    seeds: list = field(default_factory=list)


@dataclass
class ExperimentReport:
    algorithm: str
    config: dict
    cells: list[CellResult]
    trends: dict

    def as_dict(self) -> dict:
        return {"algorithm": self.algorithm, "config": self.config,
                "cells": [asdict(c) for c in self.cells], "trends": self.trends}


def _fit(algorithm: str, data: Dataset, hyper: SpikeSlabHyper, opts: FitOptions, q_level: float):
    if algorithm == "linear":
        return fit_linear(data, hyper, opts)
    if algorithm == "collapsed":
        return fit_collapsed(data, hyper, opts)
    if algorithm == "quantile":
        return fit_quantile(data, q_level, hyper, opts)
    if algorithm == "logistic":
        return fit_logistic(data, hyper, opts)
    raise DomainError(f"unknown algorithm {algorithm!r}")


def run_replication(config: ExperimentConfig, n: int, rep: int) -> dict:
    """One simulate-then-fit cycle; returns per-replication metrics."""
    truth = config.truth
    data, _ = simulate(_MODEL_FOR[config.algorithm], truth, n, [config.seed, n, rep], q_level=config.q_level)
    hyper = config.hyper_for(n)
    opts = FitOptions(tol=config.tol, max_iter=config.max_iter, track_trace=False)
    try:
        rep_ = _fit(config.algorithm, data, hyper, opts, config.q_level)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
    beta0 = np.asarray(truth.beta0)
    support = set(truth.support)
    nulls = [j for j in range(truth.p) if j not in support]
    out = {
        "ok": True,
        "recovered": set(rep_.selected) == support,
        "sup_error": float(np.max(np.abs(rep_.mu - beta0))),
        "sigma2_error": None,
        "null_w": [float(rep_.w[j]) for j in nulls],
        "signal_w": [float(rep_.w[j]) for j in sorted(support)],
    }
    if config.algorithm == "linear":
        out["sigma2_error"] = abs(1.0 / rep_.tau - truth.sigma0**2)
    return out


def _run_task(args):
    config, n, rep = args
    return run_replication(config, n, rep)


def _strictly_decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def _nondecreasing(xs) -> bool:
    return all(b >= a for a, b in zip(xs, xs[1:]))


def consistency_experiment(config: ExperimentConfig) -> ExperimentReport:
    truth = config.truth
    if config.reps < 1:
        raise DomainError("reps must be >= 1")
    admissible = {}
    for n in config.n_grid:
        hyper = config.hyper_for(n)
        if truth.support:
            ok = check_v0_admissible(hyper, truth.l0, config.delta)
            if not ok and config.algorithm == "linear":
                raise DomainError(f"v0 = {hyper.v0} violates the spike-width condition at n = {n}")
            admissible[n] = ok
        else:
            admissible[n] = None

    tasks = [(config, n, rep) for n in config.n_grid for rep in range(config.reps)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=8))
    else:
        results = [_run_task(t) for t in tasks]

    cells = []
    for i, n in enumerate(config.n_grid):
        block = results[i * config.reps:(i + 1) * config.reps]
        good = [r for r in block if r["ok"]]
        failures = len(block) - len(good)
        hyper = config.hyper_for(n)
        null_w = [w for r in good for w in r["null_w"]]
        # smallest signal weight within each replication
        signal_min = [min(r["signal_w"]) for r in good if r["signal_w"]]
        sig2 = [r["sigma2_error"] for r in good if r["sigma2_error"] is not None]
        cells.append(CellResult(
            n=n, p=truth.p, v0=hyper.v0, v1=hyper.v1, reps=config.reps, failures=failures,
            degraded=failures > 0.05 * config.reps,
            admissible=admissible[n],
            exact_recovery_rate=float(np.mean([r["recovered"] for r in good])) if good else float("nan"),
            sup_error_mean=float(np.mean([r["sup_error"] for r in good])) if good else float("nan"),
            sigma2_error_mean=float(np.mean(sig2)) if sig2 else None,
            median_null_w=float(np.median(null_w)) if null_w else None,
            min_signal_w_median=float(np.median(signal_min)) if signal_min else None,
            min_signal_w=float(min(signal_min)) if signal_min else None,
            seeds=[[config.seed, n, rep] for rep in range(config.reps)],
        ))

    trends = {
        "exact_recovery_nondecreasing": _nondecreasing([c.exact_recovery_rate for c in cells]),
        "sup_error_decreasing": _strictly_decreasing([c.sup_error_mean for c in cells]),
    }
    if all(c.sigma2_error_mean is not None for c in cells):
        trends["sigma2_error_decreasing"] = _strictly_decreasing([c.sigma2_error_mean for c in cells])
    meds = [c.median_null_w for c in cells]
    if all(m is not None and m > 0 for m in meds):
        trends["median_null_w_decreasing"] = _strictly_decreasing(meds)
        if len(meds) >= 2:
            slope = np.polyfit(np.log([c.n for c in cells]), np.log(meds), 1)[0]
            trends["median_null_w_loglog_slope"] = float(slope)

    cfg = asdict(config)
    cfg["truth"] = asdict(truth)
    return ExperimentReport(algorithm=config.algorithm, config=cfg, cells=cells, trends=trends)

