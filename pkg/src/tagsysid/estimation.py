"""Least-squares and extended (pseudo-linear) least-squares parameter estimation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import InsufficientData
from .model import FittedModel, ModelStructure, regressor_matrix

__all__ = ["EstimationReport", "least_squares", "extended_least_squares", "estimate", "fit_structure"]

RCOND = 1e-10
ZERO_COLUMN = 1e-12


@dataclass
class EstimationReport:
    coefficients: np.ndarray
    residual_variance: float
    iterations_used: int = 0
    converged: bool = True
    condition_warning: bool = False
    rank: int = 0
    n_rows: int = 0
    residuals: np.ndarray = field(default=None, repr=False)


def _first_row(m: ModelStructure, data) -> int:
    return max(m.max_lag, getattr(data, "n_transient", 0))


def _solve(phi: np.ndarray, target: np.ndarray):
    """Minimum-norm least squares via a complete orthogonal decomposition.

    Columns are normalised before solving so that rank decisions do not
    depend on the physical scale of a monomial; columns that are numerically
    zero get a zero coefficient.
    """
    p = phi.shape[1]
    norms = np.linalg.norm(phi, axis=0)
    live = norms > ZERO_COLUMN * max(norms.max(initial=0.0), np.linalg.norm(target), 1e-300)
    coef = np.zeros(p)
    rank = 0
    if live.any():
        a = phi[:, live] / norms[live]
        x, _, rank, _ = linalg.lstsq(a, target, cond=RCOND, lapack_driver="gelsy",
                                     check_finite=False)
        coef[live] = x / norms[live]
    return coef, int(rank)


def _report(phi, target, coef, rank, start, n, **kw) -> EstimationReport:
    resid = np.zeros(n)
    resid[start:] = target - phi @ coef
    dof = max(phi.shape[0] - rank, 1)
    return EstimationReport(
        coefficients=coef,
        residual_variance=float(resid[start:] @ resid[start:] / dof),
        condition_warning=rank < phi.shape[1],
        rank=rank,
        n_rows=phi.shape[0],
        residuals=resid,
        **kw,
    )


def least_squares(m: ModelStructure, data) -> EstimationReport:
    """Fit a structure without noise factors by ordinary least squares.

    Minimises the sum of squared one-step-ahead errors over samples
    ``max(max_lag, n_transient) .. N-1``. Rank-deficient problems get the
    minimum-norm solution and ``condition_warning=True``.
    """
    if m.has_noise:
        raise ValueError("structure has noise factors; use extended_least_squares")
    u, y = np.asarray(data.u, float), np.asarray(data.y, float)
    start = _first_row(m, data)
    if len(y) - start < m.p:
        raise InsufficientData(f"{max(len(y) - start, 0)} usable rows for {m.p} coefficients")
    phi = regressor_matrix(m, u, y, start=start)
    target = y[start:]
    coef, rank = _solve(phi, target)
    return _report(phi, target, coef, rank, start, len(y))


def extended_least_squares(m: ModelStructure, data, max_iterations: int = 10,
                           tol: float = 1e-8) -> EstimationReport:
    """Iterated least squares for structures with noise factors.

    Iteration 0 fits only the noise-free terms and takes its residuals as
    the noise estimate. Every further iteration builds the full regressor
    matrix from the current residuals, re-solves, and refreshes the
    residuals. Stops once the relative coefficient change drops below
    ``tol`` or after ``max_iterations`` iterations.
    """
    if not m.has_noise:
        raise ValueError("structure has no noise factors; use least_squares")
    u, y = np.asarray(data.u, float), np.asarray(data.y, float)
    n = len(y)
    start = _first_row(m, data)
    if n - start < m.p:
        raise InsufficientData(f"{max(n - start, 0)} usable rows for {m.p} coefficients")
    target = y[start:]

    known = list(m.noise_free_terms)
    coef = np.zeros(m.p)
    rank = 0
    if known:
        phi0 = regressor_matrix(m, u, y, start=start, columns=known)
        sub, rank = _solve(phi0, target)
        coef[known] = sub
        fitted = phi0 @ sub
    else:
        fitted = np.zeros_like(target)
    resid = np.zeros(n)
    resid[start:] = target - fitted

    converged = False
    it = 0
    fit_phi = None  # regressor matrix that produced ``coef``
    while it < max_iterations:
        phi = regressor_matrix(m, u, y, e=resid, start=start)
        if not np.all(np.isfinite(phi)):
            break
        new, new_rank = _solve(phi, target)
        if not np.all(np.isfinite(new)):
            break
        it += 1
        with np.errstate(over="ignore"):
            change = np.linalg.norm(new - coef) / max(np.linalg.norm(coef), np.finfo(float).tiny)
        coef, rank, fit_phi = new, new_rank, phi
        resid = np.zeros(n)
        resid[start:] = target - phi @ coef
        if change < tol:
            converged = True
            break
    if fit_phi is None:
        # iteration 0: noise coefficients are zero, rank counts the fitted columns
        phi = regressor_matrix(m, u, y, e=resid, start=start)
        report = _report(phi, target, coef, rank, start, n, iterations_used=0, converged=False)
        report.condition_warning = rank < len(known)
        return report
    return _report(fit_phi, target, coef, rank, start, n, iterations_used=it, converged=converged)


def estimate(m: ModelStructure, data, max_iterations: int = 10, tol: float = 1e-8) -> EstimationReport:
    """Dispatch to LS or ELS depending on whether ``m`` has noise factors."""
    if m.has_noise:
        return extended_least_squares(m, data, max_iterations, tol)
    return least_squares(m, data)


def fit_structure(m: ModelStructure, data, max_iterations: int = 10, tol: float = 1e-8) -> FittedModel:
    report = estimate(m, data, max_iterations, tol)
    return FittedModel(m, report.coefficients, report.residual_variance, info={"estimation": report})
