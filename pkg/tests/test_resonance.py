"""S11 model, circle fit and resonance extraction."""
import numpy as np
import pytest

from cavchar.errors import DomainError, MultipleResonanceError, NoResonanceError, ValidationError
from cavchar.resonance import (ResonanceParams, circle_fit, classify_coupling, extract_resonance,
                               model_s11)
from cavchar.synth import SynthSpec, generate_synthetic
from cavchar.traces import FrequencyTrace


def _circumcircle(a, b, c):
    # textbook three-point construction, independent of the algebraic fit
    ax, ay, bx, by, cx, cy = a.real, a.imag, b.real, b.imag, c.real, c.imag
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax ** 2 + ay ** 2) * (by - cy) + (bx ** 2 + by ** 2) * (cy - ay)
          + (cx ** 2 + cy ** 2) * (ay - by)) / d
    uy = ((ax ** 2 + ay ** 2) * (cx - bx) + (bx ** 2 + by ** 2) * (ax - cx)
          + (cx ** 2 + cy ** 2) * (bx - ax)) / d
    return complex(ux, uy), abs(a - complex(ux, uy))


def test_circle_fit_exact_points():
    theta = np.linspace(0.2, 2.5, 50)
    z = 0.3 - 0.7j + 0.45 * np.exp(1j * theta)
    c, r = circle_fit(z)
    c3, r3 = _circumcircle(z[0], z[20], z[-1])
    assert abs(c - c3) < 1e-12 and r == pytest.approx(r3, rel=1e-12)


def test_circle_fit_minimum_points_and_collinear():
    c, r = circle_fit(np.array([1 + 0j, 1j, -1 + 0j]))
    assert abs(c) < 1e-12 and r == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        circle_fit(np.array([0j, 1 + 1j]))
    with pytest.raises(ValidationError):
        circle_fit(np.linspace(0, 1, 10) * (1 + 1j))


def test_on_resonance_magnitude():
    p = ResonanceParams.from_q(5.5e9, 3e9, 17e9)
    assert abs(model_s11(p, np.array([5.5e9]))[0]) == pytest.approx(0.7, rel=1e-12)
    tr, _ = generate_synthetic(SynthSpec("s11", {"f_r": 5.5e9, "q_int": 3e9, "q_ext": 17e9},
                                         {"span_linewidths": 10, "num": 201}))
    assert np.min(np.abs(tr.s11)) == pytest.approx(0.7, rel=1e-6)


@pytest.mark.parametrize("ratio,label", [(0.5, "overcoupled"), (1.0, "critical"),
                                         (1.04, "critical"), (3.0, "undercoupled")])
def test_coupling_regimes(ratio, label):
    p = ResonanceParams.from_q(5e9, 1e8, ratio * 1e8)
    assert classify_coupling(p).label == label


def test_params_domain():
    with pytest.raises(DomainError):
        ResonanceParams.from_q(5e9, -1.0, 1e8)
    with pytest.raises(DomainError):
        ResonanceParams(5e9, 2e8, 1e8)


@pytest.mark.parametrize("refine", [True, False])
@pytest.mark.parametrize("i", range(4))
def test_noise_free_recovery(i, refine):
    r = np.random.default_rng([11, i])
    qi = 10 ** r.uniform(6, 10)
    qe = qi * 10 ** r.uniform(np.log10(0.2), np.log10(5))
    truth = dict(f_r=r.uniform(4e9, 8e9), q_int=qi, q_ext=qe, phi=r.uniform(-0.2, 0.2),
                 env_delay=r.uniform(0, 100e-9), env_amp=r.uniform(0.1, 1.0),
                 env_phase=r.uniform(-np.pi, np.pi))
    tr, _ = generate_synthetic(SynthSpec("s11", truth, {"span_linewidths": 20, "num": 401}, seed=i))
    p = extract_resonance(tr, refine=refine).params
    assert p.q_int == pytest.approx(qi, rel=1e-6)
    assert p.q_ext == pytest.approx(qe, rel=1e-6)
    assert p.f_r == pytest.approx(truth["f_r"], rel=1e-9)


def test_no_resonance():
    f = np.linspace(5e9, 5.001e9, 201)
    z = 0.8 * np.exp(-2j * np.pi * 30e-9 * f)
    with pytest.raises(NoResonanceError):
        extract_resonance(FrequencyTrace(f, z))


def test_two_resonances():
    f = np.linspace(5.5e9 - 400, 5.5e9 + 400, 801)
    a = ResonanceParams.from_q(5.5e9 - 200, 5e8, 5e8)
    b = ResonanceParams.from_q(5.5e9 + 200, 5e8, 5e8)
    z = model_s11(a, f) * model_s11(b, f)
    with pytest.raises(MultipleResonanceError):
        extract_resonance(FrequencyTrace(f, z))
