"""Circle-fit extraction of single-port reflection resonances.

Line shape (reflection, with cable/environment terms)::

    S11(f) = a exp(i(alpha - 2 pi f tau)) [1 - (2 Q_l/|Q_ext|) e^{i phi} / (1 + 2 i Q_l (f/f_r - 1))]

with ``1/Q_l = 1/Q_int + cos(phi)/|Q_ext|``. Extraction runs: environment
removal, algebraic circle fit, phase-angle fit for ``f_r`` and ``Q_l``,
geometry of the normalised circle for ``|Q_ext|`` and ``phi``, and an optional
full complex least-squares refinement.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (DomainError, FitError, MultipleResonanceError, NoResonanceError,
                     ValidationError)
from .fitting.engine import FitProblem, FitResult, solve_least_squares
from .traces import FrequencyTrace

CRITICAL_TOLERANCE = 0.05
MIN_POINTS = 16
WING_FRACTION = 0.1
MIN_WING_LINEWIDTHS = 2.0


@dataclass(frozen=True)
class ResonanceParams:
    """Resonance and environment parameters; ``q_int`` follows from the rest."""

    f_r: float
    q_loaded: float
    q_ext: float
    phi: float = 0.0
    env_delay: float = 0.0
    env_amp: float = 1.0
    env_phase: float = 0.0

    def __post_init__(self):
        if not (self.f_r > 0 and self.q_loaded > 0 and self.q_ext > 0):
            raise DomainError("f_r, q_loaded and q_ext must be > 0")
        if not self.env_amp > 0:
            raise DomainError("env_amp must be > 0")
        if not self.internal_loss > 0:
            raise DomainError("parameters imply non-positive internal loss")

    @classmethod
    def from_q(cls, f_r, q_int, q_ext, phi=0.0, **env):
        if not (q_int > 0 and q_ext > 0):
            raise DomainError("q_int and q_ext must be > 0")
        q_l = 1.0 / (1.0 / q_int + np.cos(phi) / q_ext)
        return cls(f_r, q_l, q_ext, phi, **env)

    @property
    def internal_loss(self):
        return float(1.0 / self.q_loaded - np.cos(self.phi) / self.q_ext)

    @property
    def q_int(self):
        return 1.0 / self.internal_loss

    @property
    def diameter(self):
        return 2.0 * self.q_loaded / self.q_ext

    def as_dict(self):
        return {
            "f_r_hz": self.f_r, "q_loaded": self.q_loaded, "q_ext": self.q_ext,
            "q_int": self.q_int, "phi_rad": self.phi, "env_delay_s": self.env_delay,
            "env_amp": self.env_amp, "env_phase_rad": self.env_phase,
        }


@dataclass(frozen=True)
class CouplingRegime:
    label: str
    ratio: float


@dataclass(frozen=True)
class EnvironmentEstimate:
    delay: float
    amp: float
    phase: float
    resonance_detected: bool
    wing_linewidths: float = np.nan
    flags: tuple = ()


@dataclass
class Extraction:
    params: ResonanceParams
    fit: FitResult
    environment: EnvironmentEstimate
    flags: list = field(default_factory=list)


def _wrap(angle):
    return float((angle + np.pi) % (2.0 * np.pi) - np.pi)


def model_s11(p, f):
    """Complex reflection coefficient of ``p`` at frequencies ``f`` (Hz)."""
    return kernels.s11_reflection(f, p.f_r, p.q_loaded, p.diameter, p.phi,
                                  p.env_amp, p.env_phase, p.env_delay, 0.0)


def classify_coupling(p):
    """Label the port coupling by the ratio Q_ext / Q_int."""
    ratio = p.q_ext / p.q_int
    if abs(ratio - 1.0) <= CRITICAL_TOLERANCE:
        label = "critical"
    elif ratio < 1.0:
        label = "overcoupled"
    else:
        label = "undercoupled"
    return CouplingRegime(label, float(ratio))


# ---------------------------------------------------------------------------
# circle fit
# ---------------------------------------------------------------------------

def circle_fit(points):
    """Algebraic (Taubin) circle fit of complex points.

    Returns ``(center, radius)``. Raises :class:`ValidationError` for fewer
    than three points or (numerically) collinear points.
    """
    z = np.asarray(points, dtype=complex).ravel()
    if z.size < 3:
        raise ValidationError("circle fit needs at least three points")
    zm = z.mean()
    w = z - zm
    extent = np.max(np.abs(w))
    if extent == 0:
        raise ValidationError("circle fit points are coincident")
    w = w / extent
    u, v = w.real, w.imag
    q = u * u + v * v
    qm = q.mean()
    q0 = (q - qm) / (2.0 * np.sqrt(qm))
    _, _, vt = np.linalg.svd(np.column_stack([q0, u, v]), full_matrices=False)
    a = vt[2].copy()
    a0 = a[0] / (2.0 * np.sqrt(qm))
    a3 = -qm * a0
    if abs(a0) < 1e-10:
        raise ValidationError("circle fit points are collinear")
    center = complex(-a[1] / (2.0 * a0), -a[2] / (2.0 * a0))
    radius = np.sqrt(a[1] ** 2 + a[2] ** 2 - 4.0 * a0 * a3) / (2.0 * abs(a0))
    if not np.isfinite(radius) or radius > 1e8:
        raise ValidationError("circle fit points are collinear")
    return zm + extent * center, float(extent * radius)


def _circle_residual(z, center, radius):
    return np.abs(z - center) - radius


# ---------------------------------------------------------------------------
# environment
# ---------------------------------------------------------------------------

def _wing_masks(n):
    k = max(2, int(round(WING_FRACTION * n)))
    lo = np.zeros(n, bool)
    hi = np.zeros(n, bool)
    lo[:k] = True
    hi[n - k:] = True
    return lo, hi


def _wing_delay(f, z):
    """Common phase slope of both wings with independent intercepts."""
    lo, hi = _wing_masks(f.size)
    num = 0.0
    den = 0.0
    for m in (lo, hi):
        ff = f[m] - f[m].mean()
        ph = np.unwrap(np.angle(z[m]))
        num += np.sum(ff * (ph - ph.mean()))
        den += np.sum(ff * ff)
    slope = num / den if den > 0 else 0.0
    return -slope / (2.0 * np.pi)


def _segments(mask):
    edges = np.diff(np.concatenate([[0], mask.astype(int), [0]]))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def _detect(f, z, off):
    """Deviation profile from the off-resonant level, with a noise estimate."""
    dev = np.abs(z - off)
    lo, hi = _wing_masks(f.size)
    wing = np.concatenate([z[lo], z[hi]])
    noise = 0.0
    if wing.size > 4:
        d = np.abs(np.diff(z[lo])) if lo.sum() > 2 else np.array([0.0])
        d2 = np.abs(np.diff(z[hi])) if hi.sum() > 2 else np.array([0.0])
        noise = float(np.median(np.concatenate([d, d2]))) / np.sqrt(2.0)
    return dev, noise


def _phase_fit(f, z_centered, f_guess, q_guess, tolerance=1e-12, max_iterations=200):
    """Fit theta(f) = theta0 - 2 arctan(2 Q_l (f - f_r)/f_r) to the centred circle."""
    theta = np.unwrap(np.angle(z_centered))
    lw = f_guess / q_guess
    x_unit = (f - f_guess) / lw

    def model(p):
        th0, ql, delta = p
        f_r = f_guess + delta * lw
        return th0 - 2.0 * np.arctan(2.0 * ql * (f - f_r) / f_r)

    k = int(np.argmin(np.abs(x_unit)))
    th0 = theta[k]
    res = None
    for guess_scale in (1.0, 0.5, 2.0):
        problem = FitProblem(
            lambda p: model(p) - theta, [th0, q_guess * guess_scale, 0.0],
            lower=[-np.inf, 0.0, -np.inf], upper=[np.inf, np.inf, np.inf],
            tolerance=tolerance, max_iterations=max_iterations,
            param_names=("theta0", "q_loaded", "detuning_lw"),
        )
        trial = solve_least_squares(problem)
        if res is None or trial.history[-1] < res.history[-1]:
            res = trial
        if trial.converged and trial.history[-1] <= 1e-20 * theta.size:
            break
    f_r = f_guess + res["detuning_lw"] * lw
    return res, f_r, res["q_loaded"], res["theta0"]


def _initial_guesses(f, z, off):
    dev, noise = _detect(f, z, off)
    k = int(np.argmax(dev))
    dmax = dev[k]
    scale = abs(off) if abs(off) > 0 else 1.0
    if dmax <= max(8.0 * noise, 1e-9 * scale):
        raise NoResonanceError("no resonance found in trace")
    above = dev >= 0.5 * dmax
    lobes = [s for s in _segments(above)]
    if len(lobes) > 1:
        # lobes separated by a deep dip indicate distinct resonances
        for (a0, a1), (b0, b1) in zip(lobes[:-1], lobes[1:]):
            if np.min(dev[a1:b0]) < 0.25 * dmax and (a1 - a0) > 1 and (b1 - b0) > 1:
                raise MultipleResonanceError("more than one resonance in trace")
    half = dev >= dmax / np.sqrt(2.0)
    seg = next(s for s in _segments(half) if s[0] <= k < s[1])
    i0, i1 = seg
    # interpolate the crossing points for sub-sample width estimates
    def cross(i_in, i_out):
        if i_out < 0 or i_out >= f.size:
            return f[i_in]
        d_in, d_out = dev[i_in], dev[i_out]
        target = dmax / np.sqrt(2.0)
        t = (d_in - target) / (d_in - d_out) if d_in != d_out else 0.0
        return f[i_in] + t * (f[i_out] - f[i_in])
    width = cross(i1 - 1, i1) - cross(i0, i0 - 1)
    if not width > 0:
        width = f[min(k + 1, f.size - 1)] - f[max(k - 1, 0)]
    f_g = f[k]
    return f_g, f_g / width, noise


def _refine_delay(f, z, tau0):
    """Refine the cable delay by making the de-delayed locus circular."""
    span = f[-1] - f[0]
    fc = 0.5 * (f[0] + f[-1])
    turn = 2.0 * np.pi * span

    def residual(p):
        # p[0] is the delay expressed as phase accumulated across the span
        zz = z * np.exp(1j * p[0] * (f - fc) / span)
        c, r = circle_fit(zz)
        return _circle_residual(zz, c, r) / max(r, 1e-300)

    res = solve_least_squares(FitProblem(residual, [tau0 * turn], tolerance=1e-14,
                                         param_names=("delay_phase",)))
    return float(res.parameters[0]) / turn


def remove_environment(trace, refine_delay=True):
    """Estimate and divide out cable delay, amplitude and phase.

    Returns ``(normalized_trace, EnvironmentEstimate)``; in the normalised
    trace the off-resonant reflection is ``1 + 0i``. The delay comes from the
    phase slope of the outer wings; when a resonance is present it is refined
    by requiring a circular locus, and the off-resonant point is taken from
    the circle and phase fit rather than the raw wing average.
    """
    if not isinstance(trace, FrequencyTrace):
        raise ValidationError("expected a FrequencyTrace")
    f, z = trace.frequencies, trace.s11
    if f.size < MIN_POINTS:
        raise ValidationError(f"need at least {MIN_POINTS} samples, got {f.size}")
    tau = _wing_delay(f, z)
    zd = z * np.exp(2j * np.pi * tau * f)
    lo, hi = _wing_masks(f.size)
    off = np.mean(np.concatenate([zd[lo], zd[hi]]))
    flags = []
    try:
        f_g, q_g, _ = _initial_guesses(f, zd, off)
    except NoResonanceError:
        env = EnvironmentEstimate(tau, float(abs(off)), _wrap(np.angle(off)), False,
                                  flags=("no-resonance",))
        return FrequencyTrace(f, zd / off, trace.drive_power, trace.temperature), env
    if refine_delay and f.size >= 8:
        try:
            tau = _refine_delay(f, z, tau)
        except (FitError, ValidationError):
            flags.append("delay-refine-failed")
        zd = z * np.exp(2j * np.pi * tau * f)
    center, radius = circle_fit(zd)
    _, f_r, q_l, th0 = _phase_fit(f, zd - center, f_g, q_g)
    off = center + radius * np.exp(1j * (th0 + np.pi))
    lw = f_r / q_l
    wing_lw = (np.ptp(f[lo]) + np.ptp(f[hi])) / lw
    if wing_lw < MIN_WING_LINEWIDTHS:
        flags.append("insufficient-span")
    env = EnvironmentEstimate(tau, float(abs(off)), _wrap(np.angle(off)), True,
                              float(wing_lw), tuple(flags))
    normalized = FrequencyTrace(f, zd / off, trace.drive_power, trace.temperature)
    return normalized, env


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------

def _refine(f, zn, start, tolerance, max_iterations):
    """Full complex least squares on the normalised trace."""
    f_r0, q_l0, q_e0, phi0 = start
    lw = f_r0 / q_l0
    fc = 0.5 * (f[0] + f[-1])
    span = f[-1] - f[0]
    names = ("detuning_lw", "q_loaded", "q_ext", "phi", "amp", "phase", "delay_span")

    def model(p):
        delta, ql, qe, phi, amp, ph, dl = p
        return kernels.s11_reflection(f, f_r0 + delta * lw, ql, 2.0 * ql / qe, phi,
                                      amp, ph, dl / span, fc)

    def residual(p):
        d = model(p) - zn
        return np.concatenate([d.real, d.imag])

    problem = FitProblem(
        residual, [0.0, q_l0, q_e0, phi0, 1.0, 0.0, 0.0],
        lower=[-np.inf, 0.0, 0.0, -np.inf, 0.0, -np.inf, -np.inf],
        upper=[np.inf] * 7, tolerance=tolerance, max_iterations=max_iterations,
        param_names=names,
    )
    res = solve_least_squares(problem)
    delta, ql, qe, phi, amp, ph, dl = res.parameters
    return res, (f_r0 + delta * lw, ql, qe, phi, amp, ph, dl / span, fc)


def extract_resonance(trace, refine=True, seed_policy="heuristic", tolerance=1e-12,
                      max_iterations=200):
    """Extract f_r, Q_l, |Q_ext|, phi, Q_int and environment terms from a trace.

    Returns an :class:`Extraction` holding the :class:`ResonanceParams`, the
    final :class:`FitResult` (complex refinement when ``refine`` is true,
    otherwise the phase fit) and quality flags.
    """
    normalized, env = remove_environment(trace)
    if not env.resonance_detected:
        raise NoResonanceError("no resonance found in trace")
    f, zn = normalized.frequencies, normalized.s11
    center, radius = circle_fit(zn)
    lo, hi = _wing_masks(f.size)
    f_g, q_g, _ = _initial_guesses(f, zn, 1.0 + 0j)
    if seed_policy not in (None, "heuristic"):
        f_g = float(seed_policy.get("f_r", f_g))
        q_g = float(seed_policy.get("q_loaded", q_g))
    phase_res, f_r, q_l, _ = _phase_fit(f, zn - center, f_g, q_g)
    phi = float(np.angle(1.0 - center))
    q_e = q_l / radius
    flags = list(env.flags)
    off = env.amp * np.exp(1j * env.phase)
    fit = phase_res
    fit.info.update(model="s11", stage="phase")
    amp, ph_abs, delay = env.amp, env.phase, env.delay
    if refine:
        res, (f_r, q_l, q_e, phi, a2, ph2, dl, fc) = _refine(
            f, zn, (f_r, q_l, q_e, phi), tolerance, max_iterations)
        # fold the refinement's residual environment back into absolute terms
        total = off * a2 * np.exp(1j * (ph2 + 2.0 * np.pi * fc * dl))
        amp = float(abs(total))
        ph_abs = _wrap(np.angle(total))
        delay = env.delay + dl
        fit = res
        fit.info.update(model="s11", stage="refine")
        if not res.converged:
            flags.append("refine-not-converged")
    try:
        params = ResonanceParams(float(f_r), float(q_l), float(q_e), _wrap(phi),
                                 float(delay), amp, ph_abs)
    except DomainError as exc:
        raise FitError(f"extraction produced unphysical parameters: {exc}") from exc
    if not (f[0] <= params.f_r <= f[-1]):
        flags.append("f_r-outside-span")
    fit.info["flags"] = list(flags)
    return Extraction(params, fit, env, flags)
