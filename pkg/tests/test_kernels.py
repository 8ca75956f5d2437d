"""Special-function kernels against mpmath, and numba/numpy parity."""
import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavchar import kernels
from cavchar._accel import HAVE_NUMBA

PAIRS = [
    ("digamma", lambda z: kernels.digamma_nb(z), lambda z: kernels.digamma_np(z)),
    ("trigamma", lambda z: kernels.trigamma_nb(z), lambda z: kernels.trigamma_np(z)),
]


def _rel(a, b):
    return abs(complex(a) - complex(b)) / max(abs(complex(b)), 1e-300)


@pytest.mark.parametrize("z", [0.5 + 0j, 0.5 - 0.01j, 0.5 - 3j, 0.5 - 500j, 7.3 + 2.1j,
                               1e-3 + 0.2j, 30 - 40j, 0.5 - 1e5j])
def test_digamma_matches_mpmath(z):
    got = kernels.digamma(np.array([z]))[0]
    assert _rel(got, mpmath.digamma(z)) < 1e-13


@pytest.mark.parametrize("z", [0.5 + 0j, 0.5 - 0.2j, 0.5 - 8j, 3 + 4j, 0.5 - 700j])
def test_trigamma_matches_mpmath(z):
    got = kernels.trigamma(np.array([z]))[0]
    assert _rel(got, mpmath.psi(1, z)) < 1e-12


def test_shift_bracket_matches_mpmath():
    x = np.geomspace(1e-3, 1e4, 40)
    got = kernels.tls_shift_bracket(x)
    for xi, gi in zip(x, got):
        ref = mpmath.re(mpmath.digamma(0.5 + xi / (2j * mpmath.pi))) - mpmath.log(xi / (2 * mpmath.pi))
        assert abs(gi - float(ref)) < 1e-12 * max(1.0, abs(float(ref)))


@pytest.mark.parametrize("a", [0.3 + 0.1j, -2 + 0.5j, 5 - 3j, -30 + 1e-3j, 45 + 45j, -600 + 2j,
                               1e-6 + 1e-6j, 12 + 0j])
def test_expe1_matches_mpmath(a):
    ref = mpmath.exp(a) * mpmath.e1(a)
    got = kernels.expe1(np.array([a]))[0]
    assert _rel(got, ref) < 1e-12


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
@settings(max_examples=60, deadline=None)
@given(re=st.floats(0.01, 200.0), im=st.floats(-1e4, 1e4))
def test_digamma_numba_numpy_parity(re, im):
    z = np.array([complex(re, im)])
    for _, nb, npy in PAIRS:
        a, b = nb(z)[0], npy(z)[0]
        assert abs(a - b) <= 1e-13 * max(1.0, abs(b))


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
@settings(max_examples=60, deadline=None)
@given(re=st.floats(-300.0, 300.0), im=st.floats(1e-6, 300.0))
def test_expe1_numba_numpy_parity(re, im):
    a = np.array([complex(re, im)])
    x, y = kernels.expe1_nb(a)[0], kernels.expe1_np(a)[0]
    assert abs(x - y) <= 1e-11 * abs(y)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
def test_array_kernel_parity():
    x = np.geomspace(1e-3, 1e3, 200)
    np.testing.assert_allclose(kernels.tls_shift_bracket_nb(x), kernels.tls_shift_bracket_np(x),
                               rtol=1e-13, atol=1e-15)
    f = np.linspace(5.4999e9, 5.5001e9, 301)
    args = (5.5e9, 1e6, 0.8, 0.1, 0.7, 1.2, 3e-8)
    np.testing.assert_allclose(kernels.s11_reflection_nb(f, *args),
                               kernels.s11_reflection_np(f, *args), rtol=0, atol=1e-12)
    e = np.linspace(200, 212, 241)
    y = 10 + 50 * np.exp(-((e - 206) / 1.0) ** 2) + 0.5 * (e - 200)
    np.testing.assert_allclose(kernels.shirley_nb(e, y), kernels.shirley_np(e, y), rtol=1e-12)


def test_shirley_endpoints_pinned():
    e = np.linspace(200, 212, 121)
    y = 5 + 20 * np.exp(-((e - 205) / 0.8) ** 2) + np.where(e > 205, 3.0, 0.0)
    bg = kernels.shirley(e, y)
    assert bg[0] == pytest.approx(y[0])
    assert bg[-1] == pytest.approx(y[-1])
    assert np.all(np.diff(bg) >= -1e-12)


def _run_backend(disable):
    import os
    import subprocess
    import sys
    code = ("from cavchar import _accel, kernels\n"
            "from cavchar.synth import SynthSpec, generate_synthetic\n"
            "from cavchar.resonance import extract_resonance\n"
            "tr = generate_synthetic(SynthSpec('s11', {'f_r': 5.5e9, 'q_int': 1e9, 'q_ext': 2e9},"
            " {'span_linewidths': 20, 'num': 201}, {'snr_db': 40}, 3))[0]\n"
            "print(_accel.USE_NUMBA, kernels.digamma is kernels.digamma_nb,"
            " repr(extract_resonance(tr).params.q_int))\n")
    env = dict(os.environ, CAVCHAR_DISABLE_NUMBA="1" if disable else "0")
    return subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                          text=True, check=True).stdout.split()


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
def test_env_flag_selects_backend():
    fast, slow = _run_backend(False), _run_backend(True)
    assert fast[:2] == ["True", "True"] and slow[:2] == ["False", "False"]
    assert float(fast[2]) == pytest.approx(float(slow[2]), rel=1e-9)
