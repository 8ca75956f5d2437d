"""Bounded, weighted Levenberg-Marquardt least squares.

Bounds are enforced by reparameterisation rather than projection: a
parameter bounded on one side is mapped through ``lower + exp(u)`` (or
``upper - exp(u)``), a two-sided one through a logistic, and an unbounded one
is left alone. The solver iterates on the internal ``u`` vector; residual and
Jacobian callbacks always see physical parameters.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import EvaluationError, ValidationError

DEFAULT_REL_STEP = np.finfo(float).eps ** (1.0 / 3.0)
LAMBDA_INIT = 1e-3
LAMBDA_UP = 10.0
LAMBDA_DOWN = 10.0
LAMBDA_MAX = 1e16
# fraction of the bound interval used to nudge a start value sitting on a bound
_EDGE = 1e-9


@dataclass
class FitProblem:
    """Weighted least-squares problem.

    ``residual(p)`` returns unweighted residuals; the solver multiplies them by
    ``weights`` (1/sigma per point). ``jacobian(p)``, if given, returns the
    derivative of the unweighted residuals with respect to physical parameters.
    """

    residual: Callable[[np.ndarray], np.ndarray]
    initial: Sequence[float]
    lower: Optional[Sequence[float]] = None
    upper: Optional[Sequence[float]] = None
    weights: Optional[Sequence[float]] = None
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    max_iterations: int = 200
    tolerance: float = 1e-10
    param_names: Sequence[str] = ()
    absolute_sigma: bool = False

    def __post_init__(self):
        self.initial = np.atleast_1d(np.asarray(self.initial, dtype=float)).copy()
        n = self.initial.size
        self.lower = (np.full(n, -np.inf) if self.lower is None
                      else np.asarray(self.lower, dtype=float).reshape(n))
        self.upper = (np.full(n, np.inf) if self.upper is None
                      else np.asarray(self.upper, dtype=float).reshape(n))
        if not np.all(np.isfinite(self.initial)):
            raise ValidationError("initial parameters must be finite")
        if np.any(self.lower > self.initial) or np.any(self.initial > self.upper):
            raise ValidationError("bounds must satisfy lower <= initial <= upper")
        if np.any(self.lower == self.upper):
            raise ValidationError("fixed parameters (lower == upper) are not supported")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if np.any(~(self.weights >= 0)):
                raise ValidationError("weights must be non-negative")
        if not self.param_names:
            self.param_names = tuple(f"p{i}" for i in range(n))
        elif len(self.param_names) != n:
            raise ValidationError("param_names length does not match parameters")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be > 0")


@dataclass
class FitResult:
    parameters: np.ndarray
    covariance: np.ndarray
    reduced_chi_square: float
    iterations: int
    converged: bool
    history: np.ndarray
    param_names: tuple = ()
    status: str = ""
    n_points: int = 0
    info: dict = field(default_factory=dict)

    @property
    def values(self):
        return dict(zip(self.param_names, map(float, self.parameters)))

    @property
    def stderr(self):
        return dict(zip(self.param_names, np.sqrt(np.clip(np.diag(self.covariance), 0, None))))

    def __getitem__(self, name):
        return float(self.parameters[list(self.param_names).index(name)])


class _Transform:
    """Elementwise map between physical parameters and solver coordinates."""

    def __init__(self, lower, upper):
        self.lo = lower
        self.hi = upper
        lo_f = np.isfinite(lower)
        hi_f = np.isfinite(upper)
        self.kind = np.where(lo_f & hi_f, 3, np.where(lo_f, 1, np.where(hi_f, 2, 0)))

    def to_internal(self, p):
        u = p.astype(float).copy()
        for i, k in enumerate(self.kind):
            lo, hi = self.lo[i], self.hi[i]
            if k == 1:
                gap = max(p[i] - lo, _EDGE * max(1.0, abs(lo), abs(p[i])))
                u[i] = np.log(gap)
            elif k == 2:
                gap = max(hi - p[i], _EDGE * max(1.0, abs(hi), abs(p[i])))
                u[i] = np.log(gap)
            elif k == 3:
                frac = np.clip((p[i] - lo) / (hi - lo), _EDGE, 1.0 - _EDGE)
                u[i] = np.log(frac) - np.log1p(-frac)
        return u

    def to_physical(self, u):
        p = u.copy()
        k = self.kind
        with np.errstate(over="ignore"):
            m = k == 1
            p[m] = self.lo[m] + np.exp(u[m])
            m = k == 2
            p[m] = self.hi[m] - np.exp(u[m])
            m = k == 3
            s = 1.0 / (1.0 + np.exp(-u[m]))
            p[m] = self.lo[m] + (self.hi[m] - self.lo[m]) * s
        return p

    def dp_du(self, u):
        d = np.ones_like(u)
        k = self.kind
        with np.errstate(over="ignore"):
            d[k == 1] = np.exp(u[k == 1])
            d[k == 2] = -np.exp(u[k == 2])
            m = k == 3
            s = 1.0 / (1.0 + np.exp(-u[m]))
            d[m] = (self.hi[m] - self.lo[m]) * s * (1.0 - s)
        return d


def numerical_jacobian(fun, params, rel_step=None, floor=1e-8):
    """Central-difference Jacobian of ``fun`` at ``params``.

    The step for parameter ``j`` is ``rel_step * max(|p_j|, floor)``.
    Exceptions or non-finite values raised at a perturbed point are re-raised
    as :class:`EvaluationError` naming the parameter index.
    """
    p = np.atleast_1d(np.asarray(params, dtype=float))
    rel = DEFAULT_REL_STEP if rel_step is None else float(rel_step)
    cols = []
    for j in range(p.size):
        h = rel * max(abs(p[j]), floor)
        hi = p.copy()
        lo = p.copy()
        hi[j] += h
        lo[j] -= h
        try:
            f_hi = np.asarray(fun(hi), dtype=float)
            f_lo = np.asarray(fun(lo), dtype=float)
        except EvaluationError:
            raise
        except Exception as exc:
            raise EvaluationError(
                f"residual evaluation failed while perturbing parameter {j}: {exc}") from exc
        if not (np.all(np.isfinite(f_hi)) and np.all(np.isfinite(f_lo))):
            raise EvaluationError(f"non-finite residual while perturbing parameter {j}")
        cols.append((f_hi - f_lo) / (hi[j] - lo[j]))
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def _evaluate(problem, p):
    try:
        r = np.asarray(problem.residual(p), dtype=float).ravel()
    except EvaluationError:
        raise
    except Exception as exc:
        raise EvaluationError(f"residual evaluation failed: {exc}") from exc
    if problem.weights is not None:
        r = r * problem.weights
    return r


def solve_least_squares(problem: FitProblem) -> FitResult:
    """Minimise the weighted residual sum of squares within bounds.

    Uses Marquardt-scaled damping (``J^T J + lambda diag(J^T J)``) with
    ``lambda`` starting at 1e-3 and moved by a factor of 10. Accepted steps
    never increase the cost. The result is flagged ``converged`` when an
    accepted step lowers the cost by less than ``tolerance`` relative, when
    the cost reaches exactly zero, or when damping saturates with the trial
    cost indistinguishable (to ``tolerance``) from the current one. A result
    with ``converged=False`` carries the best parameters found.
    """
    tf = _Transform(problem.lower, problem.upper)
    u = tf.to_internal(problem.initial)
    p = tf.to_physical(u)
    r = _evaluate(problem, p)
    if not np.all(np.isfinite(r)):
        raise EvaluationError("residual is not finite at the initial parameters")
    n_par = u.size
    if r.size < n_par:
        raise ValidationError(
            f"residual dimension {r.size} is smaller than parameter count {n_par}")

    def weighted_fun(pp):
        return _evaluate(problem, pp)

    def jac_internal(uu):
        pp = tf.to_physical(uu)
        if problem.jacobian is not None:
            jp = np.asarray(problem.jacobian(pp), dtype=float).reshape(r.size, n_par)
            if problem.weights is not None:
                jp = jp * problem.weights[:, None]
            return jp * tf.dp_du(uu)[None, :]
        return numerical_jacobian(lambda vv: weighted_fun(tf.to_physical(vv)), uu,
                                  floor=1.0)

    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = LAMBDA_INIT
    converged = cost == 0.0
    status = "zero residual" if converged else "max iterations reached"
    it = 0
    while not converged and it < problem.max_iterations:
        it += 1
        J = jac_internal(u)
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag[diag <= 0] = 1.0
        accepted = False
        while True:
            M = A + lam * np.diag(diag)
            try:
                step = np.linalg.solve(M, -g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(M, -g, rcond=None)[0]
            u_new = u + step
            p_new = tf.to_physical(u_new)
            try:
                r_new = weighted_fun(p_new)
                ok = bool(np.all(np.isfinite(r_new)) and np.all(np.isfinite(p_new)))
            except EvaluationError:
                ok = False
            if ok:
                with np.errstate(over="ignore"):
                    cost_new = 0.5 * float(r_new @ r_new)
                ok = np.isfinite(cost_new)
            else:
                cost_new = np.inf
            if ok and cost_new <= cost:
                rel = (cost - cost_new) / cost if cost > 0 else 0.0
                u, r = u_new, r_new
                cost = cost_new
                history.append(cost)
                lam = max(lam / LAMBDA_DOWN, 1e-12)
                accepted = True
                if cost == 0.0:
                    converged, status = True, "zero residual"
                elif rel < problem.tolerance:
                    converged, status = True, "relative cost decrease below tolerance"
                break
            lam *= LAMBDA_UP
            if lam > LAMBDA_MAX:
                break
        if not accepted:
            if np.isfinite(cost_new) and abs(cost_new - cost) <= problem.tolerance * cost:
                converged, status = True, "at numerical cost floor"
            else:
                status = "singular: damping could not restore descent"
            break

    p = tf.to_physical(u)
    J = jac_internal(u)
    dof = r.size - n_par
    chi2 = 2.0 * cost
    red = chi2 / dof if dof > 0 else (0.0 if chi2 == 0 else np.nan)
    cov_u = np.linalg.pinv(J.T @ J)
    d = tf.dp_du(u)
    cov = cov_u * np.outer(d, d)
    if not problem.absolute_sigma:
        cov = cov * (red if np.isfinite(red) else 0.0)
    cov = 0.5 * (cov + cov.T)
    return FitResult(
        parameters=p,
        covariance=cov,
        reduced_chi_square=float(red),
        iterations=it,
        converged=converged,
        history=np.asarray(history),
        param_names=tuple(problem.param_names),
        status=status,
        n_points=int(r.size),
    )
