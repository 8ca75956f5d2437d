"""Closed-form loss models and unit conversions for TLS-limited cavities.

All quantities are SI. Model evaluators broadcast over array-valued mode
fields (``n_bar``, ``temperature``, ``f_r``), so a whole sweep evaluates in one
call. Every model has a companion ``*_partials`` function returning analytic
derivatives keyed by parameter name.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import BOLTZMANN, PLANCK
from .errors import DomainError

# tanh(x) == 1 to double precision beyond this argument
TANH_CLAMP = 20.0


@dataclass(frozen=True)
class TlsPowerParams:
    """Power-dependent TLS parameters: F*delta0, n_c, beta, Q_res."""

    f_tls_loss: float
    n_c: float
    beta: float
    q_res: float

    def __post_init__(self):
        if not self.f_tls_loss >= 0:
            raise DomainError(f"f_tls_loss must be >= 0, got {self.f_tls_loss}")
        if not self.n_c > 0:
            raise DomainError(f"n_c must be > 0, got {self.n_c}")
        if not 0 < self.beta <= 2:
            raise DomainError(f"beta must lie in (0, 2], got {self.beta}")
        if not self.q_res > 0:
            raise DomainError(f"q_res must be > 0, got {self.q_res}")


@dataclass(frozen=True)
class TlsTempParams:
    f_tls_loss: float
    q_int0: float

    def __post_init__(self):
        if not self.f_tls_loss >= 0:
            raise DomainError(f"f_tls_loss must be >= 0, got {self.f_tls_loss}")
        if not self.q_int0 > 0:
            raise DomainError(f"q_int0 must be > 0, got {self.q_int0}")


@dataclass(frozen=True)
class ModeParams:
    """Operating point of a mode. Fields may be arrays of equal shape."""

    f_r: float
    temperature: float
    n_bar: float = 0.0


@dataclass(frozen=True)
class ParticipationInputs:
    s_e: float
    t_ox: float
    eps_r: float


@dataclass(frozen=True)
class GeometricFactor:
    g: float

    def __post_init__(self):
        if not self.g > 0:
            raise DomainError(f"geometric factor must be > 0, got {self.g}")


def _check_mode(m, need_n=False):
    f_r = np.asarray(m.f_r, dtype=float)
    t = np.asarray(m.temperature, dtype=float)
    if np.any(~(f_r > 0)):
        raise DomainError("f_r must be > 0")
    if np.any(~(t > 0)):
        raise DomainError("temperature must be > 0 for model evaluation")
    if need_n:
        n = np.asarray(m.n_bar, dtype=float)
        if np.any(~(n >= 0)):
            raise DomainError("n_bar must be >= 0")
        return f_r, t, n
    return f_r, t


def thermal_factor(f_r, temperature):
    """tanh(h f_r / 2 k T), clamped to 1 once the argument passes 20."""
    arg = PLANCK * np.asarray(f_r, float) / (2.0 * BOLTZMANN * np.asarray(temperature, float))
    return np.where(arg > TANH_CLAMP, 1.0, np.tanh(np.minimum(arg, TANH_CLAMP)))


def _thermal_factor_dT(f_r, temperature):
    arg = PLANCK * f_r / (2.0 * BOLTZMANN * temperature)
    t = np.tanh(np.minimum(arg, TANH_CLAMP))
    sech2 = np.where(arg > TANH_CLAMP, 0.0, 1.0 - t * t)
    return -sech2 * arg / temperature


def _scalarize(x):
    return float(x) if np.ndim(x) == 0 else x


def eval_tls_power(p, m):
    """1/Q_int as a function of average photon number."""
    if not isinstance(p, TlsPowerParams):
        p = TlsPowerParams(*p)
    f_r, t, n = _check_mode(m, need_n=True)
    tf = thermal_factor(f_r, t)
    sat = np.sqrt(1.0 + (n / p.n_c) ** p.beta)
    return _scalarize(p.f_tls_loss * tf / sat + 1.0 / p.q_res)


def tls_power_partials(p, m):
    """Analytic derivatives of :func:`eval_tls_power`."""
    f_r, t, n = _check_mode(m, need_n=True)
    a, nc, beta, qr = p.f_tls_loss, p.n_c, p.beta, p.q_res
    tf = thermal_factor(f_r, t)
    u = (n / nc) ** beta
    s = np.sqrt(1.0 + u)
    s3 = s ** 3
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.where(n > 0, np.log(np.where(n > 0, n, 1.0) / nc), 0.0)
        d_n = np.where(n > 0, -a * tf * beta * u / (2.0 * np.where(n > 0, n, 1.0) * s3), 0.0)
    out = {
        "f_tls_loss": tf / s,
        "n_c": a * tf * beta * u / (2.0 * nc * s3),
        "beta": -a * tf * u * log_ratio / (2.0 * s3),
        "q_res": np.full_like(tf / s, -1.0 / qr ** 2),
        "temperature": a * _thermal_factor_dT(f_r, t) / s,
        "n_bar": d_n,
    }
    return {k: np.broadcast_to(v, np.broadcast(tf, n).shape).copy() for k, v in out.items()}


def eval_tls_temp(p, m):
    """1/Q_int as a function of temperature (low-power limit)."""
    if not isinstance(p, TlsTempParams):
        p = TlsTempParams(*p)
    f_r, t = _check_mode(m)
    return _scalarize(p.f_tls_loss * thermal_factor(f_r, t) + 1.0 / p.q_int0)


def tls_temp_partials(p, m):
    f_r, t = _check_mode(m)
    tf = thermal_factor(f_r, t)
    return {
        "f_tls_loss": tf,
        "q_int0": np.full_like(tf, -1.0 / p.q_int0 ** 2),
        "temperature": p.f_tls_loss * _thermal_factor_dT(f_r, t),
    }


def freq_shift_bracket(f_r, temperature):
    """Re psi(1/2 + h f_r / (2 pi i k T)) - log(h f_r / (2 pi k T))."""
    x = PLANCK * np.asarray(f_r, float) / (BOLTZMANN * np.asarray(temperature, float))
    return kernels.tls_shift_bracket(x)


def eval_freq_shift(f_tls_loss, m):
    """Fractional frequency shift delta f / f_r from resonant TLS."""
    f_r, t = _check_mode(m)
    return _scalarize(f_tls_loss / np.pi * freq_shift_bracket(f_r, t))


def freq_shift_minimum(f_r, xatol=1e-12):
    """Temperature (K) at which the resonant-TLS frequency shift is most negative.

    The location depends only on ``f_r``: the bracket is minimised over
    ``x = h f_r / k T`` by bounded Brent iteration on ``log x``, where the
    derivative ``Im psi'(z) / (2 pi) - 1/x`` changes sign once.
    """
    from scipy.optimize import brentq

    f_r = float(_positive("f_r", f_r))

    def slope(logx):
        x = np.exp(logx)
        z = 0.5 - 1j * x / (2.0 * np.pi)
        return float(kernels.trigamma(np.array([z]))[0].imag / (2.0 * np.pi) - 1.0 / x)

    logx = brentq(slope, np.log(1e-2), np.log(1e2), xtol=xatol, rtol=4 * np.finfo(float).eps)
    return float(PLANCK * f_r / (BOLTZMANN * np.exp(logx)))


def freq_shift_partials(f_tls_loss, m):
    f_r, t = _check_mode(m)
    x = PLANCK * f_r / (BOLTZMANN * t)
    z = 0.5 - 1j * x / (2.0 * np.pi)
    # d bracket / dx = Im psi'(z) / (2 pi) - 1 / x
    dg_dx = kernels.trigamma(z).imag / (2.0 * np.pi) - 1.0 / x
    g = kernels.tls_shift_bracket(x)
    scale = f_tls_loss / np.pi
    return {
        "f_tls_loss": g / np.pi,
        "temperature": scale * dg_dx * (-x / t),
        "f_r": scale * dg_dx * (x / f_r),
    }


def participation_factor(p):
    """Oxide participation F = t_ox * S_e / eps_r."""
    if not (p.s_e > 0 and p.eps_r > 0):
        raise DomainError("S_e and eps_r must be > 0")
    if not p.t_ox >= 0:
        raise DomainError("t_ox must be >= 0")
    return p.t_ox * p.s_e / p.eps_r


def _g_value(g):
    val = g.g if isinstance(g, GeometricFactor) else float(g)
    if not val > 0:
        raise DomainError(f"geometric factor must be > 0, got {val}")
    return val


def _positive(name, x):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be > 0")
    return arr


def q_to_surface_resistance(q_int, g):
    """R_s = G / Q_int (ohm)."""
    return _scalarize(_g_value(g) / _positive("q_int", q_int))


def surface_resistance_to_q(r_s, g):
    return _scalarize(_g_value(g) / _positive("r_s", r_s))


def q_to_tau(q, f_r):
    """Energy lifetime tau = Q / (2 pi f_r)."""
    return _scalarize(_positive("q", q) / (2.0 * np.pi * _positive("f_r", f_r)))


def tau_to_q(tau, f_r):
    return _scalarize(2.0 * np.pi * _positive("f_r", f_r) * _positive("tau", tau))


def combine_decay(tau_tot, tau_ext):
    """Internal lifetime from total and external lifetimes.

    ``tau_ext`` may be ``inf`` (no external loss), in which case the internal
    lifetime equals the total one.
    """
    tau_tot = float(tau_tot)
    tau_ext = float(tau_ext)
    if not tau_tot > 0:
        raise DomainError(f"tau_tot must be > 0, got {tau_tot}")
    if not tau_ext > tau_tot:
        raise DomainError(
            f"tau_ext ({tau_ext}) must exceed tau_tot ({tau_tot}): "
            "total decay cannot be slower than external-only decay")
    return 1.0 / (1.0 / tau_tot - 1.0 / tau_ext)


def total_decay(tau_int, tau_ext):
    """Forward direction: 1/tau_tot = 1/tau_int + 1/tau_ext."""
    tau_int = float(tau_int)
    tau_ext = float(tau_ext)
    if not (tau_int > 0 and tau_ext > 0):
        raise DomainError("lifetimes must be > 0")
    return 1.0 / (1.0 / tau_int + 1.0 / tau_ext)
