"""Ring-down decay fitting, lifetime budgets and photon-number calibration."""
from dataclasses import dataclass, field

import numpy as np

from . import loss_models as lm
from .config import HBAR, get_defaults
from .errors import DomainError, FitError, NonDecayingTraceError, ValidationError
from .fitting.engine import FitProblem, FitResult, solve_least_squares
from .traces import TimeTrace

MIN_SAMPLES = 10
RINGDOWN_NAMES = ("amplitude0", "tau_tot", "offset")
PHOTON_FORMULA = "n = 4 Q_l^2 P_in / (hbar w_r^2 Q_ext); single-port reflection, on resonance, steady state"


@dataclass
class RingdownFit:
    """Fitted energy decay ``E(t) = amplitude0 * exp(-(t - t_ref) / tau_tot) + offset``.

    ``amplitude0`` is referenced to the first sample time ``t_ref``.
    """

    tau_tot: float
    amplitude0: float
    offset: float
    t_ref: float
    fit: FitResult

    @property
    def tau_stderr(self):
        return self.fit.stderr["tau_tot"]


def _deciles(y):
    k = max(1, y.size // 10)
    return float(np.mean(y[:k])), float(np.mean(y[-k:]))


def _log_linear_start(t, y, offset0):
    yy = y - offset0
    keep = yy > 0.05 * np.max(yy)
    if np.count_nonzero(keep) < 2:
        keep = yy > 0
    if np.count_nonzero(keep) < 2:
        return 1.0, 0.3
    slope, intercept = np.polyfit(t[keep], np.log(yy[keep]), 1)
    if not slope < 0:
        return float(np.max(yy)), 0.3
    return float(np.exp(intercept)), float(-1.0 / slope)


def fit_ringdown(trace, fit_offset=True, seed_policy="heuristic", tolerance=None,
                 max_iterations=None):
    """Fit the total energy decay time of a ring-down trace.

    Amplitude traces are squared before fitting; note that squaring a noisy
    magnitude biases the late-time floor upward, which the offset absorbs.
    Times are shifted to start at zero and energies scaled to unit peak
    before the solve, so ``tau_tot`` is invariant under both operations.

    Parameters
    ----------
    trace : TimeTrace
    fit_offset : bool
        Include a constant floor; ``False`` pins it to zero.
    seed_policy : "heuristic" or mapping
        Mapping entries (physical units) override the log-linear start.

    Returns
    -------
    RingdownFit
    """
    if not isinstance(trace, TimeTrace):
        raise ValidationError("fit_ringdown expects a TimeTrace")
    if len(trace) < MIN_SAMPLES:
        raise ValidationError(f"ring-down needs at least {MIN_SAMPLES} samples, got {len(trace)}")
    d = get_defaults()
    t_ref = float(trace.times[0])
    t = trace.times - t_ref
    span = float(t[-1])
    energy = trace.energy
    scale = float(np.max(np.abs(energy)))
    if not scale > 0:
        raise NonDecayingTraceError("ring-down trace is identically zero")
    tn = t / span
    y = energy / scale
    first, last = _deciles(y)
    if not last < first:
        raise NonDecayingTraceError(
            f"trace does not decay: last-decile mean {last * scale:.6g} >= "
            f"first-decile mean {first * scale:.6g}")

    off0 = min(last, float(np.min(y))) if fit_offset else 0.0
    a0, tau0 = _log_linear_start(tn, y, off0)
    guess = np.array([a0, tau0, off0]) if fit_offset else np.array([a0, tau0])
    if isinstance(seed_policy, dict):
        unknown = set(seed_policy) - set(RINGDOWN_NAMES)
        if unknown or (not fit_offset and "offset" in seed_policy):
            raise ValidationError(f"seed policy names unknown parameters {sorted(unknown)}")
        sc = {"amplitude0": scale, "tau_tot": span, "offset": scale}
        for i, name in enumerate(RINGDOWN_NAMES[:guess.size]):
            if name in seed_policy:
                guess[i] = float(seed_policy[name]) / sc[name]
    elif seed_policy not in (None, "heuristic"):
        raise ValidationError(f"unknown seed policy {seed_policy!r}")
    if not guess[1] > 0:
        raise ValidationError("tau_tot start must be > 0")
    guess[0] = max(guess[0], 1e-12)

    def residual(p):
        out = p[0] * np.exp(-tn / p[1]) - y
        return out + p[2] if fit_offset else out

    def jacobian(p):
        e = np.exp(-tn / p[1])
        cols = [e, p[0] * e * tn / p[1] ** 2]
        if fit_offset:
            cols.append(np.ones_like(tn))
        return np.column_stack(cols)

    n = guess.size
    problem = FitProblem(
        residual, guess,
        lower=[0.0, 0.0, -np.inf][:n], upper=[np.inf] * n,
        jacobian=jacobian,
        max_iterations=max_iterations or d.fit_max_iterations,
        tolerance=tolerance or d.fit_tolerance,
        param_names=RINGDOWN_NAMES[:n],
    )
    res = solve_least_squares(problem)
    if not res.converged:
        raise FitError(f"ring-down fit did not converge: {res.status}")
    unit = np.array([scale, span, scale])[:n]
    params = res.parameters * unit
    cov = res.covariance * np.outer(unit, unit)
    if not fit_offset:
        params = np.append(params, 0.0)
        cov = np.pad(cov, ((0, 1), (0, 1)))
    fit = FitResult(
        parameters=params, covariance=cov, reduced_chi_square=res.reduced_chi_square * scale ** 2,
        iterations=res.iterations, converged=res.converged, history=res.history * scale ** 2,
        param_names=RINGDOWN_NAMES, status=res.status, n_points=res.n_points,
        info={"model": "ringdown", "t_ref": t_ref, "kind": trace.kind,
              "offset_fitted": bool(fit_offset)},
    )
    return RingdownFit(float(params[1]), float(params[0]), float(params[2]), t_ref, fit)


@dataclass(frozen=True)
class LifetimeBudget:
    tau_tot: float
    tau_ext: float
    tau_int: float
    q_tot: float
    q_ext: float
    q_int: float
    f_r: float

    def check(self, rtol=1e-12):
        """Raise ``ValidationError`` if the budget identities fail at ``rtol``."""
        lhs = 1.0 / self.tau_tot
        rhs = 1.0 / self.tau_int + 1.0 / self.tau_ext
        if abs(lhs - rhs) > rtol * lhs:
            raise ValidationError("1/tau_tot != 1/tau_int + 1/tau_ext")
        w = 2.0 * np.pi * self.f_r
        for q, tau in ((self.q_tot, self.tau_tot), (self.q_int, self.tau_int),
                       (self.q_ext, self.tau_ext)):
            if np.isfinite(q) and abs(q - w * tau) > rtol * q:
                raise ValidationError("Q != 2 pi f_r tau")
        return self

    def as_dict(self):
        return {k: float(getattr(self, k)) for k in
                ("tau_tot", "tau_ext", "tau_int", "q_tot", "q_ext", "q_int", "f_r")}


def build_lifetime_budget(tau_tot, q_ext, f_r):
    """Split a measured total lifetime into internal and external parts.

    ``q_ext`` may be ``inf`` (negligible coupling); then ``tau_int = tau_tot``.
    """
    tau_tot, q_ext, f_r = float(tau_tot), float(q_ext), float(f_r)
    if not (tau_tot > 0 and q_ext > 0 and f_r > 0):
        raise DomainError("tau_tot, q_ext and f_r must be > 0")
    tau_ext = np.inf if np.isinf(q_ext) else float(lm.q_to_tau(q_ext, f_r))
    tau_int = lm.combine_decay(tau_tot, tau_ext)
    return LifetimeBudget(
        tau_tot=tau_tot, tau_ext=tau_ext, tau_int=tau_int,
        q_tot=float(lm.tau_to_q(tau_tot, f_r)), q_ext=q_ext,
        q_int=float(lm.tau_to_q(tau_int, f_r)), f_r=f_r,
    )


def loaded_q(q_int, q_ext):
    """Parallel combination 1/Q_l = 1/Q_int + 1/Q_ext."""
    q_int, q_ext = float(q_int), float(q_ext)
    if not (q_int > 0 and q_ext > 0):
        raise DomainError("quality factors must be > 0")
    return 1.0 / (1.0 / q_int + 1.0 / q_ext)


def photon_number(p_in, f_r, q_loaded, q_ext):
    """Mean intracavity photon number for a drive at resonance.

    Uses ``n = 4 Q_l^2 P_in / (hbar w_r^2 Q_ext)`` with ``w_r = 2 pi f_r``.
    ``p_in`` is the power at the cavity reference plane (W) and may be zero
    or an array.
    """
    p = np.asarray(p_in, dtype=float)
    if np.any(~(p >= 0)) or not np.all(np.isfinite(p)):
        raise DomainError("p_in must be finite and >= 0")
    for name, v in (("f_r", f_r), ("q_loaded", q_loaded), ("q_ext", q_ext)):
        if not float(v) > 0 or not np.isfinite(float(v)):
            raise DomainError(f"{name} must be finite and > 0")
    w = 2.0 * np.pi * float(f_r)
    n = 4.0 * float(q_loaded) ** 2 * p / (HBAR * w * w * float(q_ext))
    return float(n) if n.ndim == 0 else n


def power_for_photons(n_bar, f_r, q_loaded, q_ext):
    """Inverse of :func:`photon_number`."""
    n = float(n_bar)
    if not n >= 0:
        raise DomainError("n_bar must be >= 0")
    w = 2.0 * np.pi * float(f_r)
    return n * HBAR * w * w * float(q_ext) / (4.0 * float(q_loaded) ** 2)


@dataclass(frozen=True)
class PhotonCalibration:
    p_in: float
    f_r: float
    q_loaded: float
    q_ext: float
    n_bar: float
    systematic_factor: float = 2.0
    metadata: dict = field(default_factory=dict)

    @property
    def n_bar_range(self):
        """Interval implied by the declared multiplicative systematic."""
        return (self.n_bar / self.systematic_factor, self.n_bar * self.systematic_factor)


def calibrate(p_in, f_r, q_loaded, q_ext, systematic_factor=None):
    """Build a :class:`PhotonCalibration` recording the formula used."""
    sf = get_defaults().photon_number_systematic_factor if systematic_factor is None \
        else float(systematic_factor)
    if not sf >= 1:
        raise DomainError("systematic factor must be >= 1")
    n = photon_number(p_in, f_r, q_loaded, q_ext)
    return PhotonCalibration(float(p_in), float(f_r), float(q_loaded), float(q_ext), float(n),
                             sf, {"formula": PHOTON_FORMULA,
                                  "reference_plane": "cavity input port",
                                  "systematic": f"multiplicative factor {sf:g}"})
