"""Shared numeric primitives: logistic transforms, SPD solves, dataset checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.linalg import lapack

YKind = Literal["continuous", "binary"]

RANK_TOL = 1e-10


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class SingularityError(np.linalg.LinAlgError):
    """Cholesky factorization failed; ``pivot`` is the 0-based failing index."""

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot})")


class NumericalDomainError(ArithmeticError):
    """A quantity that must be positive (log argument, scale) was not."""


class PreconditionError(ValueError):
    """Inputs violate a structural precondition (rank, p <= n, ...)."""


# ---------------------------------------------------------------------------
# logistic transforms
# ---------------------------------------------------------------------------

def expit(x):
    """Numerically stable logistic function.

    Works on scalars and arrays; branches on the sign of ``x`` so that
    ``exp`` is only ever evaluated at non-positive arguments.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("expit requires finite input")
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def logit(p):
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0) & (arr < 1)):
        raise DomainError("logit requires p in (0, 1)")
    out = np.log(arr) - np.log1p(-arr)
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# SPD linear algebra
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SolveReport:
    solution: np.ndarray
    residual_norm: float
    factorization_ok: bool
    inverse: np.ndarray | None = None


def _cholesky(M: np.ndarray) -> np.ndarray:
    c, info = lapack.dpotrf(M, lower=1, clean=1)
    if info > 0:
        raise SingularityError(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    return c


def spd_solve(M, rhs, *, want_inverse: bool = False, check_symmetry: bool = True) -> SolveReport:
    """Solve ``M @ x = rhs`` for symmetric positive-definite ``M``.

    The residual reported is ``||M x - rhs||_inf / (1 + ||rhs||_inf)``.
    With ``want_inverse`` the full inverse is also returned (symmetrized).
    """
    M = np.asarray(M, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"M must be square, got shape {M.shape}")
    if rhs.shape[0] != M.shape[0]:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, M is {M.shape[0]}x{M.shape[0]}")
    if check_symmetry:
        scale = max(1.0, float(np.max(np.abs(M))))
        if np.max(np.abs(M - M.T)) > 1e-10 * scale:
            raise ValueError("M is not symmetric")
    diag = np.diag(M)
    if np.any(diag <= 0):
        raise SingularityError(int(np.argmax(diag <= 0)))

    L = _cholesky(M)
    sol, info = lapack.dpotrs(L, rhs, lower=1)
    if info != 0:
        raise ValueError(f"dpotrs: illegal argument {-info}")

    inverse = None
    if want_inverse:
        inv, info = lapack.dpotri(L, lower=1)
        if info != 0:
            raise SingularityError(max(info - 1, 0))
        inv = np.tril(inv) + np.tril(inv, -1).T
        inverse = inv

    resid = float(np.max(np.abs(M @ sol - rhs), initial=0.0)) / (1.0 + float(np.max(np.abs(rhs), initial=0.0)))
    return SolveReport(solution=sol, residual_norm=resid, factorization_ok=True, inverse=inverse)


def spd_inverse(M) -> np.ndarray:
    p = np.asarray(M).shape[0]
    return spd_solve(M, np.zeros(p), want_inverse=True).inverse


def spd_logdet(M) -> float:
    L = _cholesky(np.asarray(M, dtype=float))
    return 2.0 * float(np.sum(np.log(np.diag(L))))


# ---------------------------------------------------------------------------
# data and hyperparameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    y_kind: YKind = "continuous"
    full_rank: bool = field(default=True)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @cached_property
    def XtX(self) -> np.ndarray:
        return self.X.T @ self.X

    @cached_property
    def Xty(self) -> np.ndarray:
        return self.X.T @ self.y

    @cached_property
    def yty(self) -> float:
        return float(self.y @ self.y)


def validate_dataset(X, y, y_kind: YKind = "continuous") -> Dataset:
    X = np.array(X, dtype=float)
    y = np.array(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"X must be 2-dimensional, got {X.ndim} dimensions")
    if y.ndim != 1:
        raise ValueError(f"y must be 1-dimensional, got {y.ndim} dimensions")
    n, p = X.shape
    if n < 1 or p < 1:
        raise ValueError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
    if y.shape[0] != n:
        raise ValueError(f"dimension mismatch: X has {n} rows, y has {y.shape[0]} entries")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("X and y must not contain NaN or Inf")
    if y_kind == "binary":
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("binary response must take values in {0, 1}")
    elif y_kind != "continuous":
        raise ValueError(f"unknown y_kind {y_kind!r}")
    sv = np.linalg.svd(X, compute_uv=False)
    full_rank = bool(p <= n and sv[0] > 0 and sv[-1] / sv[0] > RANK_TOL)
    X.setflags(write=False)
    y.setflags(write=False)
    return Dataset(X=X, y=y, y_kind=y_kind, full_rank=full_rank)


@dataclass(frozen=True)
class SpikeSlabHyper:
    v0: float = 0.01
    v1: float = 100.0
    A: float = 0.5
    B: float = 0.5
    rho: float = 0.5

    def __post_init__(self):
        for name in ("v0", "v1", "A", "B", "rho"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not (self.v1 > self.v0 > 0):
            raise DomainError(f"need v1 > v0 > 0, got v0={self.v0}, v1={self.v1}")
        if self.A <= 0 or self.B <= 0:
            raise DomainError(f"need A > 0 and B > 0, got A={self.A}, B={self.B}")
        if not (0 < self.rho < 1):
            raise DomainError(f"rho must lie in (0, 1), got {self.rho}")

    @property
    def lam(self) -> float:
        """Prior log-odds of inclusion."""
        return logit(self.rho)

    def as_dict(self) -> dict:
        return {"v0": self.v0, "v1": self.v1, "A": self.A, "B": self.B, "rho": self.rho}
