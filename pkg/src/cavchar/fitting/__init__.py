"""Least-squares engine and named-model fit drivers."""
from .engine import FitProblem, FitResult, numerical_jacobian, solve_least_squares
from .models import MODEL_IDS, fit_freq_shift, fit_named_model, fit_tls_power, fit_tls_temp

__all__ = [
    "FitProblem", "FitResult", "numerical_jacobian", "solve_least_squares",
    "MODEL_IDS", "fit_named_model", "fit_tls_power", "fit_tls_temp", "fit_freq_shift",
]
