"""Named model drivers: problem construction, start heuristics, and dispatch."""
from collections.abc import Mapping

import numpy as np

from .. import loss_models as lm
from ..config import get_defaults
from ..errors import DegenerateDataError, ValidationError
from ..traces import PointSet
from .engine import FitProblem, solve_least_squares

MODEL_IDS = ("tls_power", "tls_temp", "freq_shift", "ringdown", "s11")

TLS_POWER_NAMES = ("f_tls_loss", "n_c", "beta", "q_res")
TLS_TEMP_NAMES = ("f_tls_loss", "q_int0")


def _apply_seed(names, guess, seed_policy):
    if seed_policy is None or seed_policy == "heuristic":
        return guess
    if not isinstance(seed_policy, Mapping):
        raise ValidationError(f"unknown seed policy {seed_policy!r}")
    unknown = set(seed_policy) - set(names)
    if unknown:
        raise ValidationError(f"seed policy names unknown parameters {sorted(unknown)}")
    return np.array([float(seed_policy.get(n, g)) for n, g in zip(names, guess)])


def _require_points(data, kind, n_params):
    if not isinstance(data, PointSet) or data.kind != kind:
        raise ValidationError(f"expected a {kind!r} point set")
    if len(data) < n_params:
        raise DegenerateDataError(
            f"{len(data)} points cannot determine {n_params} parameters")


def _log_q_weights(data):
    if data.sigma is None:
        return None
    return data.y / data.sigma


def fit_tls_power(data, seed_policy="heuristic", tolerance=None, max_iterations=None):
    """Fit Q_int(n_bar) in log-Q space to the power-dependent TLS model."""
    d = get_defaults()
    _require_points(data, "qn", 4)
    n, q = data.x, data.y
    if np.any(q <= 0) or np.any(n < 0):
        raise ValidationError("Q must be > 0 and n_bar >= 0")
    if np.unique(n).size < 4:
        raise DegenerateDataError("need at least 4 distinct photon numbers")
    temp = data.temperature if data.temperature is not None else d.base_temperature_k
    order = np.argsort(n)
    loss = 1.0 / q
    tf = float(lm.thermal_factor(data.f_r, temp))
    drop = loss[order[0]] - loss[order[-1]]
    a0 = max(drop, 1e-3 * loss[order[0]]) / tf
    pos = n[n > 0]
    nc0 = float(np.exp(np.mean(np.log(pos)))) if pos.size else 1.0
    guess = np.array([a0, nc0, 0.5, q[order[-1]]])
    guess = _apply_seed(TLS_POWER_NAMES, guess, seed_policy)
    mode = lm.ModeParams(data.f_r, temp, n)
    log_q = np.log(q)

    def residual(p):
        tp = lm.TlsPowerParams(*p)
        return -np.log(lm.eval_tls_power(tp, mode)) - log_q

    def jacobian(p):
        tp = lm.TlsPowerParams(*p)
        L = lm.eval_tls_power(tp, mode)
        parts = lm.tls_power_partials(tp, mode)
        return -np.column_stack([parts[k] for k in TLS_POWER_NAMES]) / L[:, None]

    problem = FitProblem(
        residual, guess,
        lower=[0.0, 0.0, 0.0, 0.0], upper=[np.inf, np.inf, 2.0, np.inf],
        weights=_log_q_weights(data), jacobian=jacobian,
        max_iterations=max_iterations or d.fit_max_iterations,
        tolerance=tolerance or d.fit_tolerance,
        param_names=TLS_POWER_NAMES,
    )
    res = solve_least_squares(problem)
    res.info.update(model="tls_power", f_r=float(data.f_r), temperature=float(temp))
    return res


def fit_tls_temp(data, seed_policy="heuristic", tolerance=None, max_iterations=None):
    """Fit Q_int(T) in log-Q space to the temperature-dependent TLS model."""
    d = get_defaults()
    _require_points(data, "qt", 2)
    t, q = data.x, data.y
    if np.any(q <= 0) or np.any(t <= 0):
        raise ValidationError("Q and temperature must be > 0")
    tf = lm.thermal_factor(data.f_r, t)
    if np.ptp(tf) <= 1e-12 * np.max(tf):
        raise DegenerateDataError("thermal factor is constant across the temperatures")
    loss = 1.0 / q
    slope, intercept = np.polyfit(tf, loss, 1)
    if not slope > 0:
        slope = 0.5 * np.max(loss)
    if not intercept > 0:
        intercept = 0.5 * np.min(loss)
    guess = _apply_seed(TLS_TEMP_NAMES, np.array([slope, 1.0 / intercept]), seed_policy)
    mode = lm.ModeParams(data.f_r, t)
    log_q = np.log(q)

    def residual(p):
        return -np.log(lm.eval_tls_temp(lm.TlsTempParams(*p), mode)) - log_q

    def jacobian(p):
        tp = lm.TlsTempParams(*p)
        L = lm.eval_tls_temp(tp, mode)
        parts = lm.tls_temp_partials(tp, mode)
        return -np.column_stack([parts[k] for k in TLS_TEMP_NAMES]) / L[:, None]

    problem = FitProblem(
        residual, guess, lower=[0.0, 0.0], upper=[np.inf, np.inf],
        weights=_log_q_weights(data), jacobian=jacobian,
        max_iterations=max_iterations or d.fit_max_iterations,
        tolerance=tolerance or d.fit_tolerance,
        param_names=TLS_TEMP_NAMES,
    )
    res = solve_least_squares(problem)
    res.info.update(model="tls_temp", f_r=float(data.f_r))
    return res


def fit_freq_shift(data, seed_policy="heuristic", tolerance=None, max_iterations=None,
                   fit_offset=False):
    """Fit delta f / f_r(T); optionally with a constant reference offset."""
    d = get_defaults()
    names = ("f_tls_loss", "offset") if fit_offset else ("f_tls_loss",)
    _require_points(data, "ft", len(names))
    t, y = data.x, data.y
    if np.any(t <= 0):
        raise ValidationError("temperature must be > 0")
    basis = lm.freq_shift_bracket(data.f_r, t) / np.pi
    if np.ptp(basis) == 0 and fit_offset:
        raise DegenerateDataError("frequency-shift basis is constant across the temperatures")
    if not np.any(basis != 0):
        raise DegenerateDataError("frequency-shift basis vanishes at every temperature")
    w = None if data.sigma is None else 1.0 / data.sigma
    ww = np.ones_like(y) if w is None else w ** 2
    X = np.column_stack([basis, np.ones_like(basis)]) if fit_offset else basis[:, None]
    lin = np.linalg.lstsq(X * np.sqrt(ww)[:, None], y * np.sqrt(ww), rcond=None)[0]
    a0 = lin[0] if lin[0] > 0 else float(np.max(np.abs(y)) / max(np.max(np.abs(basis)), 1e-300))
    guess = np.array([a0, lin[1]]) if fit_offset else np.array([a0])
    guess = _apply_seed(names, guess, seed_policy)

    def residual(p):
        return p[0] * basis + (p[1] if fit_offset else 0.0) - y

    def jacobian(p):
        return X

    lower = [0.0, -np.inf] if fit_offset else [0.0]
    upper = [np.inf, np.inf] if fit_offset else [np.inf]
    problem = FitProblem(
        residual, guess, lower=lower, upper=upper, weights=w, jacobian=jacobian,
        max_iterations=max_iterations or d.fit_max_iterations,
        tolerance=tolerance or d.fit_tolerance, param_names=names,
    )
    res = solve_least_squares(problem)
    res.info.update(model="freq_shift", f_r=float(data.f_r))
    return res


def fit_named_model(model_id, data, seed_policy="heuristic", **options):
    """Build and solve the least-squares problem for a named model.

    ``seed_policy`` is ``"heuristic"`` (deterministic closed-form starts) or
    a mapping of parameter name to starting value overriding the heuristic.
    """
    if model_id == "tls_power":
        return fit_tls_power(data, seed_policy, **options)
    if model_id == "tls_temp":
        return fit_tls_temp(data, seed_policy, **options)
    if model_id == "freq_shift":
        return fit_freq_shift(data, seed_policy, **options)
    if model_id == "ringdown":
        from ..ringdown import fit_ringdown
        return fit_ringdown(data, seed_policy=seed_policy, **options).fit
    if model_id == "s11":
        from ..resonance import extract_resonance
        return extract_resonance(data, seed_policy=seed_policy, **options).fit
    raise ValidationError(f"unknown model id {model_id!r}; expected one of {MODEL_IDS}")
