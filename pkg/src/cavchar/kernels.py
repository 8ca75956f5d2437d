"""Hot numeric kernels with paired numba / numpy implementations.

Every kernel ``foo`` exists as ``foo_nb`` (scalar loop, numba-compiled when
available) and ``foo_np`` (vectorised numpy). The public name ``foo`` is bound
to one of them at import time according to :data:`cavchar._accel.USE_NUMBA`.
Both variants are always importable so they can be benchmarked and
cross-checked against each other.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "digamma", "trigamma", "tls_shift_bracket", "s11_reflection", "shirley",
    "digamma_nb", "digamma_np", "trigamma_nb", "trigamma_np",
    "tls_shift_bracket_nb", "tls_shift_bracket_np",
    "s11_reflection_nb", "s11_reflection_np", "shirley_nb", "shirley_np",
    "expe1", "expe1_nb", "expe1_np",
]

# B_2, B_4, ..., B_16
_BERNOULLI = np.array([
    1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0,
    -691.0 / 2730.0, 7.0 / 6.0, -3617.0 / 510.0,
])
# recurrence shifts z -> z + 1 until |z| reaches this radius
_ASYMPTOTIC_RADIUS = 10.0
_MAX_SHIFT = 64


# ---------------------------------------------------------------------------
# complex digamma / trigamma
# ---------------------------------------------------------------------------

@njit
def _digamma_scalar(z, bern):
    acc = 0j
    n = 0
    while abs(z) < _ASYMPTOTIC_RADIUS and n < _MAX_SHIFT:
        acc -= 1.0 / z
        z += 1.0
        n += 1
    zi2 = 1.0 / (z * z)
    zpow = zi2
    series = 0j
    for k in range(bern.shape[0]):
        series += bern[k] / (2.0 * (k + 1)) * zpow
        zpow *= zi2
    return acc + np.log(z) - 0.5 / z - series


@njit
def _trigamma_scalar(z, bern):
    acc = 0j
    n = 0
    while abs(z) < _ASYMPTOTIC_RADIUS and n < _MAX_SHIFT:
        acc += 1.0 / (z * z)
        z += 1.0
        n += 1
    zi = 1.0 / z
    zi2 = zi * zi
    zpow = zi2 * zi
    series = 0j
    for k in range(bern.shape[0]):
        series += bern[k] * zpow
        zpow *= zi2
    return acc + zi + 0.5 * zi2 + series


@njit
def _digamma_loop(z, bern):
    out = np.empty(z.shape[0], dtype=np.complex128)
    for i in range(z.shape[0]):
        out[i] = _digamma_scalar(z[i], bern)
    return out


@njit
def _trigamma_loop(z, bern):
    out = np.empty(z.shape[0], dtype=np.complex128)
    for i in range(z.shape[0]):
        out[i] = _trigamma_scalar(z[i], bern)
    return out


def _as_complex_1d(z):
    arr = np.asarray(z, dtype=np.complex128)
    return arr, np.ascontiguousarray(arr.ravel())


def digamma_nb(z):
    arr, flat = _as_complex_1d(z)
    return _digamma_loop(flat, _BERNOULLI).reshape(arr.shape)


def trigamma_nb(z):
    arr, flat = _as_complex_1d(z)
    return _trigamma_loop(flat, _BERNOULLI).reshape(arr.shape)


def _shift_np(z, sign):
    z = z.copy()
    acc = np.zeros_like(z)
    for _ in range(_MAX_SHIFT):
        small = np.abs(z) < _ASYMPTOTIC_RADIUS
        if not small.any():
            break
        zs = z[small]
        acc[small] += (-1.0 / zs) if sign < 0 else 1.0 / (zs * zs)
        z[small] = zs + 1.0
    return z, acc


def digamma_np(z):
    arr, flat = _as_complex_1d(z)
    w, acc = _shift_np(flat, -1)
    zi2 = 1.0 / (w * w)
    zpow = zi2.copy()
    series = np.zeros_like(w)
    for k, b in enumerate(_BERNOULLI):
        series += b / (2.0 * (k + 1)) * zpow
        zpow *= zi2
    return (acc + np.log(w) - 0.5 / w - series).reshape(arr.shape)


def trigamma_np(z):
    arr, flat = _as_complex_1d(z)
    w, acc = _shift_np(flat, +1)
    zi = 1.0 / w
    zi2 = zi * zi
    zpow = zi2 * zi
    series = np.zeros_like(w)
    for b in _BERNOULLI:
        series += b * zpow
        zpow *= zi2
    return (acc + zi + 0.5 * zi2 + series).reshape(arr.shape)


# ---------------------------------------------------------------------------
# TLS frequency-shift bracket: Re psi(1/2 + x/(2 pi i)) - log(x / 2 pi)
# ---------------------------------------------------------------------------

@njit
def _bracket_scalar(x, bern):
    y = x / (2.0 * math.pi)
    z = complex(0.5, -y)
    if abs(z) >= _ASYMPTOTIC_RADIUS:
        # Re log z - log y folded analytically to avoid cancellation
        zi2 = 1.0 / (z * z)
        zpow = zi2
        series = 0j
        for k in range(bern.shape[0]):
            series += bern[k] / (2.0 * (k + 1)) * zpow
            zpow *= zi2
        tail = -0.5 / z - series
        return 0.5 * math.log1p(0.25 / (y * y)) + tail.real
    return _digamma_scalar(z, bern).real - math.log(y)


@njit
def _bracket_loop(x, bern):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _bracket_scalar(x[i], bern)
    return out


def tls_shift_bracket_nb(x):
    arr = np.asarray(x, dtype=float)
    flat = np.ascontiguousarray(arr.ravel())
    return _bracket_loop(flat, _BERNOULLI).reshape(arr.shape)


def tls_shift_bracket_np(x):
    arr = np.asarray(x, dtype=float)
    flat = arr.ravel()
    y = flat / (2.0 * np.pi)
    z = 0.5 - 1j * y
    out = np.empty_like(flat)
    far = np.abs(z) >= _ASYMPTOTIC_RADIUS
    if far.any():
        zf = z[far]
        zi2 = 1.0 / (zf * zf)
        zpow = zi2.copy()
        series = np.zeros_like(zf)
        for k, b in enumerate(_BERNOULLI):
            series += b / (2.0 * (k + 1)) * zpow
            zpow *= zi2
        tail = -0.5 / zf - series
        out[far] = 0.5 * np.log1p(0.25 / y[far] ** 2) + tail.real
    near = ~far
    if near.any():
        out[near] = digamma_np(z[near]).real - np.log(y[near])
    return out.reshape(arr.shape)


# ---------------------------------------------------------------------------
# single-port reflection line shape
# ---------------------------------------------------------------------------

@njit
def _s11_loop(f, f_r, q_l, diameter, phi, amp, env_phase, delay, f_ref):
    out = np.empty(f.shape[0], dtype=np.complex128)
    coupling = diameter * complex(math.cos(phi), math.sin(phi))
    for i in range(f.shape[0]):
        x = (f[i] - f_r) / f_r
        env_arg = env_phase - 2.0 * math.pi * (f[i] - f_ref) * delay
        env = amp * complex(math.cos(env_arg), math.sin(env_arg))
        out[i] = env * (1.0 - coupling / complex(1.0, 2.0 * q_l * x))
    return out


def s11_reflection_nb(f, f_r, q_l, diameter, phi, amp, env_phase, delay, f_ref=0.0):
    f = np.ascontiguousarray(np.asarray(f, dtype=float))
    return _s11_loop(f, float(f_r), float(q_l), float(diameter), float(phi),
                     float(amp), float(env_phase), float(delay), float(f_ref))


def s11_reflection_np(f, f_r, q_l, diameter, phi, amp, env_phase, delay, f_ref=0.0):
    f = np.asarray(f, dtype=float)
    # (f - f_r) is exact for nearby floats; keeps high-Q detuning noise-free
    x = (f - f_r) / f_r
    env = amp * np.exp(1j * (env_phase - 2.0 * np.pi * (f - f_ref) * delay))
    return env * (1.0 - diameter * np.exp(1j * phi) / (1.0 + 2j * q_l * x))


# ---------------------------------------------------------------------------
# iterative Shirley background
# ---------------------------------------------------------------------------

@njit
def _shirley_loop(e, y, iterations, tol):
    n = e.shape[0]
    lo = y[0]
    hi = y[n - 1]
    bg = np.full(n, lo)
    for _ in range(iterations):
        s = y - bg
        # cumulative trapezoid from the far end toward index 0
        cum = np.zeros(n)
        for i in range(n - 2, -1, -1):
            cum[i] = cum[i + 1] + 0.5 * (s[i] + s[i + 1]) * abs(e[i + 1] - e[i])
        total = cum[0]
        new = np.empty(n)
        for i in range(n):
            if total != 0.0:
                new[i] = hi + (lo - hi) * cum[i] / total
            else:
                new[i] = hi
        delta = 0.0
        scale = 0.0
        for i in range(n):
            delta = max(delta, abs(new[i] - bg[i]))
            scale = max(scale, abs(new[i]))
        bg = new
        if delta <= tol * max(scale, 1e-300):
            break
    return bg


def shirley_nb(energy, counts, iterations=10, tol=1e-6):
    """Shirley background with endpoints pinned to the first/last sample."""
    e = np.ascontiguousarray(np.asarray(energy, dtype=float))
    y = np.ascontiguousarray(np.asarray(counts, dtype=float))
    return _shirley_loop(e, y, int(iterations), float(tol))


def shirley_np(energy, counts, iterations=10, tol=1e-6):
    e = np.asarray(energy, dtype=float)
    y = np.asarray(counts, dtype=float)
    lo, hi = y[0], y[-1]
    bg = np.full_like(y, lo)
    seg_w = np.abs(np.diff(e))
    for _ in range(int(iterations)):
        s = y - bg
        seg = 0.5 * (s[:-1] + s[1:]) * seg_w
        cum = np.zeros_like(y)
        cum[:-1] = np.cumsum(seg[::-1])[::-1]
        total = cum[0]
        new = hi + (lo - hi) * cum / total if total != 0.0 else np.full_like(y, hi)
        delta = np.max(np.abs(new - bg))
        scale = np.max(np.abs(new))
        bg = new
        if delta <= tol * max(scale, 1e-300):
            break
    return bg


# ---------------------------------------------------------------------------
# scaled complex exponential integral exp(a) * E1(a)
# ---------------------------------------------------------------------------

_EULER_GAMMA = 0.5772156649015329
# beyond this modulus the optimally truncated asymptotic series is exact to
# double precision (the neglected Stokes term is below exp(-40) relative)
_E1_ASYMPTOTIC = 40.0
# the power series loses about exp(|a| + Re a) to cancellation; cap that loss
_E1_SERIES_LOSS = 8.0


@njit
def _expe1_scalar(a):
    r = abs(a)
    if r > _E1_ASYMPTOTIC:
        term = 1.0 / a
        acc = term
        k = 1
        while k < r:
            nxt = -term * k / a
            if abs(nxt) >= abs(term) or abs(nxt) <= 1e-17 * abs(acc):
                break
            term = nxt
            acc += term
            k += 1
        return acc
    if r < 2.0 or r + a.real < _E1_SERIES_LOSS:
        # E1(a) = -gamma - log(a) - sum_k (-a)^k / (k k!)
        term = 1.0 + 0j
        s = 0j
        k = 1
        while k < 4000:
            term = -term * a / k
            inc = term / k
            s += inc
            if abs(inc) <= 1e-17 * abs(s) and k > r:
                break
            k += 1
        return np.exp(a) * (-_EULER_GAMMA - np.log(a) - s)
    # modified Lentz on 1/(a+1- 1/(a+3- 4/(a+5- ...)))
    tiny = 1e-300
    f = tiny + 0j
    c = f
    d = 0j
    for k in range(1, 20000):
        bk = a + (2.0 * k - 1.0)
        ak = 1.0 if k == 1 else -float((k - 1) * (k - 1))
        d = bk + ak * d
        if d == 0:
            d = tiny
        c = bk + ak / c
        if c == 0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return f


@njit
def _expe1_loop(a):
    out = np.empty(a.shape[0], dtype=np.complex128)
    for i in range(a.shape[0]):
        out[i] = _expe1_scalar(a[i])
    return out


def expe1_nb(a):
    """``exp(a) * E1(a)`` for complex ``a`` off the negative real axis."""
    arr = np.asarray(a, dtype=complex)
    return _expe1_loop(np.ascontiguousarray(arr.ravel())).reshape(arr.shape)


def expe1_np(a):
    from scipy import special

    arr = np.asarray(a, dtype=complex)
    out = np.empty(arr.shape, dtype=complex)
    big = np.abs(arr) > 500.0
    ab = arr[big]
    term = 1.0 / ab
    acc = term.copy()
    for k in range(1, 12):
        term = -term * k / ab
        acc += term
    out[big] = acc
    sm = arr[~big]
    out[~big] = np.exp(sm) * special.exp1(sm)
    return out


if USE_NUMBA:
    digamma, trigamma = digamma_nb, trigamma_nb
    tls_shift_bracket = tls_shift_bracket_nb
    s11_reflection = s11_reflection_nb
    shirley = shirley_nb
    expe1 = expe1_nb
else:
    digamma, trigamma = digamma_np, trigamma_np
    tls_shift_bracket = tls_shift_bracket_np
    s11_reflection = s11_reflection_np
    shirley = shirley_np
    expe1 = expe1_np
