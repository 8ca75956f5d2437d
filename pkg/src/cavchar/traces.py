"""Measurement containers shared by the analysis modules and the file layer."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError


def _vec(x, name, dtype=float):
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def _strictly_increasing(x, name):
    if x.size > 1 and np.any(np.diff(x) <= 0):
        raise ValidationError(f"{name} must be strictly increasing")


@dataclass(frozen=True, eq=False)
class FrequencyTrace:
    """Complex single-port reflection samples on an increasing frequency axis."""

    frequencies: np.ndarray
    s11: np.ndarray
    drive_power: Optional[float] = None
    temperature: Optional[float] = None

    def __post_init__(self):
        f = _vec(self.frequencies, "frequencies")
        s = _vec(self.s11, "s11", complex)
        if f.size != s.size:
            raise ValidationError("frequencies and s11 differ in length")
        _strictly_increasing(f, "frequencies")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s11", s)

    def __len__(self):
        return self.frequencies.size


@dataclass(frozen=True, eq=False)
class TimeTrace:
    """Demodulated ring-down samples. ``kind`` is ``"amplitude"`` or ``"power"``."""

    times: np.ndarray
    values: np.ndarray
    kind: str = "power"
    amplifier_chain_gain_db: Optional[float] = None

    def __post_init__(self):
        t = _vec(self.times, "times")
        v = _vec(self.values, "values")
        if t.size != v.size:
            raise ValidationError("times and values differ in length")
        _strictly_increasing(t, "times")
        if self.kind not in ("amplitude", "power"):
            raise ValidationError(f"unknown time-trace kind {self.kind!r}")
        if self.kind == "amplitude" and np.any(v < 0):
            raise ValidationError("amplitude samples must be >= 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size

    @property
    def energy(self):
        return self.values ** 2 if self.kind == "amplitude" else self.values


@dataclass(frozen=True, eq=False)
class PointSet:
    """Generic (x, y[, sigma]) samples with operating-point metadata.

    ``kind`` is one of ``"qn"`` (Q vs photon number), ``"qt"`` (Q vs
    temperature) and ``"ft"`` (fractional frequency shift vs temperature).
    """

    x: np.ndarray
    y: np.ndarray
    kind: str
    sigma: Optional[np.ndarray] = None
    f_r: float = 5.5e9
    temperature: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = _vec(self.x, "x")
        y = _vec(self.y, "y")
        if x.size != y.size:
            raise ValidationError("x and y differ in length")
        if self.kind not in ("qn", "qt", "ft"):
            raise ValidationError(f"unknown point-set kind {self.kind!r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.sigma is not None:
            s = _vec(self.sigma, "sigma")
            if s.size != x.size:
                raise ValidationError("sigma length does not match data")
            if np.any(s <= 0):
                raise ValidationError("sigma must be > 0")
            object.__setattr__(self, "sigma", s)

    def __len__(self):
        return self.x.size


def qn_points(n_bar, q, sigma=None, f_r=5.5e9, temperature=0.01):
    return PointSet(n_bar, q, "qn", sigma=sigma, f_r=f_r, temperature=temperature)


def qt_points(temperature, q, sigma=None, f_r=5.5e9):
    return PointSet(temperature, q, "qt", sigma=sigma, f_r=f_r)


def ft_points(temperature, df_over_f, sigma=None, f_r=5.5e9):
    return PointSet(temperature, df_over_f, "ft", sigma=sigma, f_r=f_r)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """XPS counts on a binding-energy axis (either ordering)."""

    binding_energy: np.ndarray
    counts: np.ndarray
    meta: str = ""

    def __post_init__(self):
        e = _vec(self.binding_energy, "binding_energy")
        c = _vec(self.counts, "counts")
        if e.size != c.size:
            raise ValidationError("binding_energy and counts differ in length")
        d = np.diff(e)
        if e.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValidationError("binding_energy axis must be monotone")
        object.__setattr__(self, "binding_energy", e)
        object.__setattr__(self, "counts", c)

    def __len__(self):
        return self.binding_energy.size

    def ascending(self):
        if self.binding_energy.size > 1 and self.binding_energy[0] > self.binding_energy[-1]:
            return Spectrum(self.binding_energy[::-1], self.counts[::-1], self.meta)
        return self
