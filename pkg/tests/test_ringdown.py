"""Ring-down fits, lifetime budgets and photon-number calibration."""
import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import hbar

from cavchar.errors import DomainError, NonDecayingTraceError, ValidationError
from cavchar.resonance import extract_resonance
from cavchar.ringdown import (build_lifetime_budget, calibrate, fit_ringdown, loaded_q,
                              photon_number, power_for_photons)
from cavchar.synth import SynthSpec, generate_synthetic
from cavchar.traces import TimeTrace


def _decay(tau=0.11, e0=2.0, offset=0.0, n=400, t0=0.0, snr=None, seed=0):
    noise = {} if snr is None else {"snr_db": snr}
    tr, _ = generate_synthetic(SynthSpec(
        "ringdown", {"tau_tot": tau, "e0": e0, "offset": offset},
        {"start": t0, "stop": t0 + 5 * tau, "num": n}, noise, seed=seed))
    return tr


def test_noise_free_recovery():
    fit = fit_ringdown(_decay(offset=0.01))
    assert fit.tau_tot == pytest.approx(0.11, rel=1e-9)
    assert fit.offset == pytest.approx(0.01, abs=1e-10)
    assert fit.fit.converged


def test_noisy_recovery_has_honest_error_bar():
    fit = fit_ringdown(_decay(snr=40, seed=4))
    assert abs(fit.tau_tot - 0.11) < 4 * fit.tau_stderr


def test_invariance_under_shift_and_scale():
    base = _decay(snr=40, seed=2)
    ref = fit_ringdown(base).tau_tot
    shifted = TimeTrace(base.times + 123.4, base.values, base.kind)
    scaled = TimeTrace(base.times, base.values * 7.5, base.kind)
    assert fit_ringdown(shifted).tau_tot == pytest.approx(ref, rel=1e-10)
    assert fit_ringdown(scaled).tau_tot == pytest.approx(ref, rel=1e-10)


def test_non_decaying_and_short_traces():
    t = np.linspace(0, 1, 50)
    with pytest.raises(NonDecayingTraceError):
        fit_ringdown(TimeTrace(t, np.exp(t / 0.3), "power"))
    with pytest.raises(ValidationError):
        fit_ringdown(TimeTrace(t[:5], np.exp(-t[:5]), "power"))


@pytest.mark.parametrize("tau_tot,expected", [(0.110, 141e-3), (0.070, 80e-3)])
def test_published_budgets(tau_tot, expected):
    b = build_lifetime_budget(tau_tot, 17e9, 5.5e9)
    assert b.tau_int == pytest.approx(expected, abs=3e-3)


def test_budget_without_coupling_loss():
    b = build_lifetime_budget(0.1, math.inf, 5.5e9)
    assert b.tau_int == 0.1 and b.q_int == pytest.approx(b.q_tot)


@settings(max_examples=100, deadline=None)
@given(tau=st.floats(1e-4, 10.0), ratio=st.floats(1.01, 1e4), f_r=st.floats(1e8, 2e10))
def test_budget_identities(tau, ratio, f_r):
    q_ext = ratio * 2 * math.pi * f_r * tau
    build_lifetime_budget(tau, q_ext, f_r).check(1e-12)


def test_photon_number_symbolic_inversion():
    n, p, w, ql, qe, hb = sympy.symbols("n P w Q_l Q_e hbar", positive=True)
    p_of_n = sympy.solve(sympy.Eq(n, 4 * ql ** 2 * p / (hb * w ** 2 * qe)), p)[0]
    ql_v = loaded_q(3e9, 17e9)
    val = float(p_of_n.subs({n: 1, w: 2 * sympy.pi * 5.5e9, ql: ql_v, qe: 17e9, hb: hbar}))
    assert power_for_photons(1.0, 5.5e9, ql_v, 17e9) == pytest.approx(val, rel=1e-12)
    assert photon_number(val, 5.5e9, ql_v, 17e9) == pytest.approx(1.0, rel=1e-12)
    assert val == pytest.approx(8.23e-23, rel=2e-3)


def test_photon_number_homogeneity():
    base = photon_number(1e-18, 5.5e9, 2e9, 1e10)
    assert photon_number(0.0, 5.5e9, 2e9, 1e10) == 0.0
    assert photon_number(2e-18, 5.5e9, 2e9, 1e10) == pytest.approx(2 * base, rel=1e-15)
    assert photon_number(1e-18, 11e9, 2e9, 1e10) == pytest.approx(base / 4, rel=1e-15)
    with pytest.raises(DomainError):
        photon_number(-1.0, 5.5e9, 2e9, 1e10)


def test_calibration_record():
    cal = calibrate(1e-16, 5.5e9, 2e9, 1e10)
    lo, hi = cal.n_bar_range
    assert lo == pytest.approx(cal.n_bar / 2) and hi == pytest.approx(cal.n_bar * 2)
    assert "Q_l^2" in cal.metadata["formula"]


def test_ringdown_and_s11_agree_on_q_int():
    f_r, q_int, q_ext = 5.5e9, 3.0e9, 17e9
    tau = loaded_q(q_int, q_ext) / (2 * math.pi * f_r)
    rd = fit_ringdown(_decay(tau=tau, snr=40, seed=9))
    q_rd = build_lifetime_budget(rd.tau_tot, q_ext, f_r).q_int
    tr, _ = generate_synthetic(SynthSpec("s11", {"f_r": f_r, "q_int": q_int, "q_ext": q_ext},
                                         {"span_linewidths": 20, "num": 401},
                                         {"snr_db": 40}, seed=9))
    q_s11 = extract_resonance(tr).params.q_int
    assert q_rd == pytest.approx(q_int, rel=0.02)
    assert q_rd == pytest.approx(q_s11, rel=0.02)
