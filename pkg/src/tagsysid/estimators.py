"""scikit-learn compatible front ends.

:class:`NarmaxRegressor` fits a fixed structure; :class:`TagGPIdentifier`
searches for structures. Both take the input signal as ``X`` and the
measured output as ``y``. Dynamic models need past outputs at prediction
time, so ``predict`` and ``simulate`` also take ``y``: one-step-ahead
prediction conditions on all of it, free-run simulation only uses its first
``max_lag`` samples as initial conditions.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .data import Dataset, DatasetBundle
from .estimation import estimate
from .gp import GpConfig, run
from .grammar import Grammar, builtin_grammar, load_grammar
from .model import FittedModel, ModelStructure, parse_terms, predict_one_step, simulate
from .objectives import quality
from .validation import check_io

__all__ = ["NarmaxRegressor", "TagGPIdentifier"]


def _dataset(u, y, n_transient=0, role="estimation") -> Dataset:
    return Dataset(u, y, n_transient=min(n_transient, len(u) - 1), role=role)


class _DynamicModelMixin:
    """predict/simulate/score on top of a fitted ``model_``."""

    def predict(self, X, y):
        """One-step-ahead prediction; NaN where past samples are missing."""
        check_is_fitted(self, "model_")
        u, y = check_io(X, y)
        return predict_one_step(self.model_, _dataset(u, y))

    def simulate(self, X, y):
        """Free-run response to ``X`` from the initial conditions in ``y``."""
        check_is_fitted(self, "model_")
        u, y = check_io(X, y)
        return simulate(self.model_, _dataset(u, y))

    def score(self, X, y):
        """Simulation best-fit ratio (percent) on ``(X, y)``."""
        check_is_fitted(self, "model_")
        u, y = check_io(X, y)
        return quality(self.model_, _dataset(u, y, self.n_transient), form=self.metric_form).bfr_s


class NarmaxRegressor(_DynamicModelMixin, BaseEstimator):
    """Least-squares fit of a given NARX/NARMAX structure.

    Parameters
    ----------
    structure : str or ModelStructure
        Regressors, e.g. ``"y_{k-1} + u_{k-1}*y_{k-1} + ξ_{k-1}"``.
    max_iter : int, default=10
        Iteration budget of extended least squares (noise structures only).
    tol : float, default=1e-8
        Relative coefficient change that stops extended least squares.
    n_transient : int, default=0
        Leading samples excluded from fitting and scoring.
    metric_form : {"paper", "conventional"}, default="paper"
        Form of the RMS/BFR measures used by :meth:`score`.

    Attributes
    ----------
    structure_ : ModelStructure
    coef_ : ndarray of shape (n_terms,)
    report_ : EstimationReport
    model_ : FittedModel
    """

    def __init__(self, structure=None, max_iter=10, tol=1e-8, n_transient=0, metric_form="paper"):
        self.structure = structure
        self.max_iter = max_iter
        self.tol = tol
        self.n_transient = n_transient
        self.metric_form = metric_form

    def fit(self, X, y):
        if self.structure is None:
            raise ValueError("structure is required")
        s = self.structure if isinstance(self.structure, ModelStructure) else parse_terms(self.structure)
        u, y = check_io(X, y, min_samples=s.max_lag + 1)
        report = estimate(s, _dataset(u, y, self.n_transient), self.max_iter, self.tol)
        self.structure_ = s
        self.report_ = report
        self.coef_ = report.coefficients
        self.model_ = FittedModel(s, report.coefficients, report.residual_variance, {"estimation": report})
        return self


class TagGPIdentifier(_DynamicModelMixin, BaseEstimator):
    """Grammar-guided multi-objective search for NARMAX model structures.

    Parameters
    ----------
    grammar : {"narx", "narmax", "trig", "full"}, path or Grammar, default="narmax"
    population_size : int, default=100
    n_iterations : int, default=150
    max_adjunctions : int, default=150
    p_crossover : float, default=1.0
    p_mutation : float, default=0.8
    random_state : int, default=0
    n_jobs : int, default=1
        Worker threads for fitness evaluation.
    n_transient : int, default=0
    els_max_iter : int, default=10
    els_tol : float, default=1e-8
    metric_form : {"paper", "conventional"}, default="paper"

    Attributes
    ----------
    front_ : ParetoFront
        Final non-dominated models, ordered by complexity.
    models_ : list of FittedModel
    model_ : FittedModel
        Front member with the smallest simulation error on the fitness data.
    history_ : list of dict
        Per-generation front statistics.
    """

    def __init__(self, grammar="narmax", population_size=100, n_iterations=150, max_adjunctions=150,
                 p_crossover=1.0, p_mutation=0.8, random_state=0, n_jobs=1, n_transient=0,
                 els_max_iter=10, els_tol=1e-8, metric_form="paper"):
        self.grammar = grammar
        self.population_size = population_size
        self.n_iterations = n_iterations
        self.max_adjunctions = max_adjunctions
        self.p_crossover = p_crossover
        self.p_mutation = p_mutation
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.n_transient = n_transient
        self.els_max_iter = els_max_iter
        self.els_tol = els_tol
        self.metric_form = metric_form

    def _grammar(self) -> Grammar:
        if isinstance(self.grammar, Grammar):
            return self.grammar
        if isinstance(self.grammar, Path) or Path(str(self.grammar)).suffix:
            return load_grammar(self.grammar)
        return builtin_grammar(self.grammar)

    def config(self) -> GpConfig:
        return GpConfig(
            population_size=self.population_size,
            iterations=self.n_iterations,
            max_adjunctions=self.max_adjunctions,
            p_crossover=self.p_crossover,
            p_mutation=self.p_mutation,
            rng_seed=0 if self.random_state is None else int(self.random_state),
            els_max_iterations=self.els_max_iter,
            els_tol=self.els_tol,
            metric_form=self.metric_form,
            threads=self.n_jobs,
        )

    def fit(self, X, y, X_val=None, y_val=None):
        """Run the search; fitness is scored on ``(X_val, y_val)`` if given."""
        u, y = check_io(X, y, min_samples=2)
        est = _dataset(u, y, self.n_transient)
        fit_data = est
        if X_val is not None or y_val is not None:
            uv, yv = check_io(X_val, y_val, min_samples=2)
            fit_data = _dataset(uv, yv, self.n_transient, role="validation")
        front = run(self.config(), self._grammar(), DatasetBundle(est, fit_data))
        self.front_ = front
        self.history_ = front.history
        self.models_ = [m.model for m in front if m.model is not None]
        if not self.models_:
            raise RuntimeError("no model on the final front could be estimated")
        best = min((m for m in front if m.model is not None), key=lambda m: m.fitness.sim_sse)
        self.model_ = best.model
        return self
